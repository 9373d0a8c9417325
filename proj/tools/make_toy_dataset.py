#!/usr/bin/env python3
"""Writes the small bundled dataset under data/toy/.

Output is fully determined by SEED, so rerunning the script reproduces the
committed files byte for byte.
"""

import json
import random
import sys
from pathlib import Path

SEED = 20161

THEMES = {
    "christmas": ["christmas", "holiday", "santa", "reindeer", "snow", "gifts", "winter", "carols",
                  "sleigh", "stocking", "elves", "december"],
    "mystery": ["mystery", "detective", "murder", "clues", "suspect", "inspector", "crime",
                "whodunit", "alibi", "victorian", "london", "sleuth"],
    "space": ["space", "rocket", "astronaut", "planet", "galaxy", "orbit", "mars", "starship",
              "alien", "cosmos", "nasa", "telescope"],
    "cooking": ["cooking", "recipes", "kitchen", "baking", "bread", "chef", "flavor", "sauce",
                "pastry", "vegetables", "spices", "dinner"],
    "garden": ["garden", "plants", "flowers", "soil", "seeds", "roses", "compost", "pruning",
               "greenhouse", "herbs", "bulbs", "orchard"],
    "history": ["history", "empire", "medieval", "castle", "knights", "war", "ancient", "rome",
                "kings", "battles", "dynasty", "archive"],
}

FILLER = ["book", "story", "novel", "author", "chapter", "reader", "pages", "writing", "characters",
          "plot", "series", "edition", "volume", "illustrations", "narrative", "reading", "children",
          "family", "adventure", "world", "journey", "life", "people", "town", "friends"]

GLUE = ["the", "a", "and", "of", "to", "in", "with", "for", "this", "is", "was", "it", "that", "on",
        "very", "about", "from", "but", "their", "they"]

PRAISE = ["Great", "Lovely", "Wonderful", "Good", "New", "Favorite"]

QUERIES = [
    ("christmas", "Favorite Christmas books to read to young children"),
    ("mystery", "Looking for a good Victorian detective mystery"),
    ("space", "Recommend new novels about astronauts on Mars"),
    ("cooking", "Good baking books with bread recipes"),
    ("garden", "Books about growing roses and herbs in a greenhouse"),
    ("history", "Medieval castle and knights history for adults"),
    ("mystery", "Crime novels with a clever inspector"),
    ("space", "Great galaxy adventure stories"),
    ("cooking", "Favorite kitchen books for new chefs"),
    ("christmas", "Santa and reindeer picture books"),
]


def sentence(rng, theme_words, length):
    words = []
    for _ in range(length):
        r = rng.random()
        if r < 0.45:
            words.append(rng.choice(theme_words))
        elif r < 0.7:
            words.append(rng.choice(FILLER))
        else:
            words.append(rng.choice(GLUE))
    words[0] = words[0].capitalize()
    return " ".join(words) + rng.choice([".", "!", ".", "?"])


def content(rng, theme):
    words = THEMES[theme]
    parts = []
    total = 0
    while total < 80:
        n = rng.randint(8, 14)
        parts.append(sentence(rng, words, n))
        total += n
    html = "<p>" + " ".join(parts[: len(parts) // 2]) + "</p>"
    html += " <b>" + rng.choice(PRAISE) + "!</b> "
    html += "<p>" + " ".join(parts[len(parts) // 2:]) + " &amp; more.</p>"
    return html


def main(out_dir):
    rng = random.Random(SEED)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    theme_names = list(THEMES)

    docs = []
    by_theme = {t: [] for t in theme_names}
    for i in range(60):
        theme = theme_names[i % len(theme_names)]
        doc_id = "B%04d" % (i + 1)
        by_theme[theme].append(doc_id)
        docs.append({
            "doc_id": doc_id,
            "title": "The %s %s" % (rng.choice(THEMES[theme]).capitalize(), rng.choice(FILLER).capitalize()),
            "author": rng.choice(["A. Smith", "B. Jones", "C. Brown", "D. Clark"]),
            "publisher": rng.choice(["Acorn", "Birch", "Cedar"]),
            "year": 1950 + rng.randint(0, 70),
            "codes": ["%03d.%d" % (rng.randint(0, 999), rng.randint(0, 9))],
            "content": content(rng, theme),
        })
    with open(out / "docs.jsonl", "w") as f:
        for d in docs:
            f.write(json.dumps(d, sort_keys=True) + "\n")

    def catalog(themes, n):
        pool = [d for t in themes for d in by_theme[t]]
        return sorted(rng.sample(pool, n))

    users = [
        {"user_id": "u1", "catalog": catalog(["christmas", "cooking"], 16)},
        {"user_id": "u2", "catalog": catalog(["mystery", "history"], 16)},
        {"user_id": "u3", "catalog": catalog(["space", "mystery"], 16)},
        {"user_id": "u4", "catalog": catalog(["garden", "cooking", "christmas"], 16) + ["B9999"]},
        {"user_id": "u5", "catalog": catalog(["space"], 2)},
        {"user_id": "u6", "catalog": []},
    ]
    for u in users:
        u["tags"] = [[d, "to-read"] for d in u["catalog"][:2]]
        u["ratings"] = [[d, rng.randint(1, 10)] for d in u["catalog"][:3]]
    with open(out / "users.jsonl", "w") as f:
        for u in users:
            f.write(json.dumps(u, sort_keys=True) + "\n")

    owners = ["u1", "u2", "u3", "u1", "u4", "u2", "u3", "u5", "u4", "u6"]
    with open(out / "topics.tsv", "w") as f, open(out / "qrels.txt", "w") as q:
        for i, ((theme, text), user) in enumerate(zip(QUERIES, owners)):
            topic_id = str(401 + i)
            f.write("%s\t%s\t%s\n" % (topic_id, user, text))
            relevant = sorted(rng.sample(by_theme[theme], 4))
            for d in relevant:
                q.write("%s 0 %s %d\n" % (topic_id, d, rng.choice([1, 2])))
            other = rng.choice([t for t in theme_names if t != theme])
            q.write("%s 0 %s 0\n" % (topic_id, rng.choice(by_theme[other])))

    (out / "qexp.ini").write_text(
        "# Toy configuration. Relative paths resolve against this file.\n"
        "[paths]\n"
        "corpus = docs.jsonl\n"
        "users = users.jsonl\n"
        "topics = topics.tsv\n"
        "qrels = qrels.txt\n"
        "stopwords = ../stopwords.txt\n"
        "stop_adjectives = ../stop_adjectives.txt\n"
        "\n[general]\nseed = 7\n"
        "\n[embed]\ndim = 48\nwindow = 5\nnegative = 10\nepochs = 20\nmin_count = 2\nsubsample_t = 0.001\n"
        "\n[embed_user]\ndim = 32\nepochs = 20\nmin_count = 1\nsubsample_t = 0.001\n"
        "\n[index]\nmu = 50\n"
        "\n[experiment]\nk = 5\ntop_n = 1000\n"
    )


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).resolve().parent.parent / "data" / "toy"))
