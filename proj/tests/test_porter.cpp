#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "qexp/textprep.hpp"
#include "support.hpp"

using namespace qexp;

TEST_CASE("porter_stem examples") {
    CHECK(porter_stem("at") == "at");
    CHECK(porter_stem("running") == "run");
    CHECK(porter_stem("caresses") == "caress");
    CHECK(porter_stem("ponies") == "poni");
    CHECK(porter_stem("books") == "book");
    CHECK(porter_stem("book") == "book");
    CHECK(porter_stem("generalizations") == "gener");
    CHECK(porter_stem("") == "");
    CHECK(porter_stem("a") == "a");
}

TEST_CASE("porter_stem agrees with the reference vocabulary") {
    std::ifstream in(testing::test_data_dir() / "porter_reference.tsv");
    REQUIRE(in);
    std::string line;
    std::size_t checked = 0, changed = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        REQUIRE(tab != std::string::npos);
        auto word = line.substr(0, tab), stem = line.substr(tab + 1);
        CHECK_MESSAGE(porter_stem(word) == stem, word);
        ++checked;
        changed += word != stem;
    }
    CHECK(checked >= 100);
    CHECK(changed >= 100);
}

TEST_CASE("stems never grow and short words pass through") {
    std::ifstream in(testing::test_data_dir() / "porter_reference.tsv");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto word = line.substr(0, line.find('\t'));
        CHECK(porter_stem(word).size() <= word.size());
    }
    for (const char* w : {"is", "as", "us", "ox"}) CHECK(porter_stem(w) == w);
}
