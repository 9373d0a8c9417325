#include "qexp/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace qexp {

namespace {

bool is_path_key(const std::string& key) {
    return key.starts_with("paths.");
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    Config cfg;
    cfg.base_dir_ = std::filesystem::absolute(path).parent_path();
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            cfg.values_[section] = body.data();
            continue;
        }
        for (const auto& [key, value] : body) {
            std::string full = section + "." + key;
            std::string v = value.data();
            if (is_path_key(full) && !v.empty() && std::filesystem::path(v).is_relative()) {
                v = (cfg.base_dir_ / v).lexically_normal().string();
            }
            cfg.values_[full] = v;
        }
    }
    return cfg;
}

void Config::set(const std::string& key, std::string value) {
    values_[key] = std::move(value);
}

std::optional<std::string> Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

std::filesystem::path Config::get_path(const std::string& key, const std::filesystem::path& fallback) const {
    auto v = get(key);
    return (v && !v->empty()) ? std::filesystem::path(*v) : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
        throw ConfigError(key + ": expected an integer, got `" + *v + "`");
    }
    return out;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        double out = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing characters");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got `" + *v + "`");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got `" + *v + "`");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> items;
    auto v = get(key);
    if (!v) return items;
    std::string cur;
    auto flush = [&] {
        auto b = cur.find_first_not_of(" \t");
        auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) items.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : *v) {
        if (c == ',') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return items;
}

std::string Config::canonical(const std::vector<std::string>& sections) const {
    std::string out;
    for (const auto& [key, value] : values_) {
        bool wanted = sections.empty();
        for (const auto& s : sections) {
            if (key == s || key.starts_with(s + ".")) wanted = true;
        }
        if (wanted) out += key + "=" + value + "\n";
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes);
}

}  // namespace qexp
