#!/usr/bin/env python3
"""Generate the bundled mini-corpus under crates/core/data/mini/.

Articles use formal vocabulary. Crowd tweets and labeled queries talk
about the same stories mostly through hashtag-style variants of the key
words, so lexical retrieval only sees the shared theme words while a
trained encoder can learn the variants from the crowd conversations.

Usage: python3 scripts/make_minicorpus.py [out_dir]
"""
import json
import random
import sys
from pathlib import Path

THEMES = {
    "vaccine": ("vaccine", "injection", ["microchip", "magnet", "sterility", "tracker", "mercury",
                                         "paralysis", "graphene", "fertility", "shedding", "mutation",
                                         "autism", "poison", "antenna", "nanobot", "insomnia"]),
    "election": ("election", "ballot", ["dominion", "deadvoter", "suitcase", "shredder", "sharpie",
                                        "dumpster", "truckload", "algorithm", "bamboo", "watermark",
                                        "postage", "dropbox", "signature", "overseas", "recount"]),
    "climate": ("climate", "temperature", ["glacier", "volcano", "sunspot", "cooling", "iceberg",
                                           "windmill", "polarbear", "hurricane", "wildfire", "drought",
                                           "permafrost", "coral", "rainforest", "methane", "ozone"]),
    "economy": ("economy", "inflation", ["stimulus", "mortgage", "pension", "currency", "tariff",
                                         "bitcoin", "paycheck", "bailout", "recession", "gasprice",
                                         "rentfreeze", "goldstandard", "minimumwage", "taxrefund", "stockmarket"]),
    "health": ("health", "hospital", ["garlic", "lemonwater", "bleach", "sunlight", "hydroxy",
                                      "ivermectin", "nebulizer", "sauna", "vitaminc", "saltwater",
                                      "onion", "turmeric", "colloidal", "ginger", "hotbath"]),
    "technology": ("technology", "network", ["fiveg", "tower", "satellite", "facialscan", "smartmeter",
                                             "wifi", "bluetooth", "robotdog", "drone", "chipset",
                                             "hologram", "metaverse", "blackout", "router", "hacker"]),
    "celebrity": ("celebrity", "actor", ["clone", "bodydouble", "arrest", "hoaxdeath", "lookalike",
                                         "endorsement", "divorce", "inheritance", "mansion", "yacht",
                                         "tattoo", "lawsuit", "rehab", "concert", "interview"]),
    "crime": ("crime", "police", ["kidnapping", "carjack", "shoplift", "robbery", "smuggling",
                                  "counterfeit", "scammer", "burglary", "stabbing", "looting",
                                  "trafficking", "arson", "vandalism", "fraudster", "pickpocket"]),
    "food": ("food", "grocery", ["cricket", "labmeat", "pesticide", "plasticrice", "chicken",
                                 "artificial", "sweetener", "preservative", "fakeegg", "seedoil",
                                 "cornsyrup", "dye", "formula", "honey", "bottledwater"]),
    "immigration": ("immigration", "border", ["caravan", "wall", "asylum", "visa", "deportation",
                                              "amnesty", "shelter", "benefits", "voting", "census",
                                              "passport", "curfew", "checkpoint", "quota", "refugee"]),
}

SUFFIXES = ["gate", "hoax", "scam", "lies", "truth"]
FILLER = ["wow", "omg", "wake", "share", "everyone", "crazy", "unbelievable", "look", "seriously", "insane"]


def variants(rng):
    """One fixed hashtag form per key word."""
    out = {}
    for _, _, words in THEMES.values():
        for w in words:
            out[w] = "#" + w + rng.choice(SUFFIXES)
    return out


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "crates/core/data/mini"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240601)
    v = variants(rng)

    articles = []
    for theme, (t1, t2, words) in THEMES.items():
        words = words[:]
        for a in range(5):
            s1, s2, s3 = words[3 * a: 3 * a + 3]
            slug = f"{theme}-{s1}-{s2}"
            articles.append({
                "url": f"https://www.snopes.com/fact-check/{slug}",
                "title": f"Does the {t1} {s1} {s2} story hold up?",
                "subtitle": f"A viral post claimed the {t2} {s3} is linked to {s1}.",
                "claim": f"The {t1} {s1} causes {s2} and {s3}.",
                "date": f"2021-{1 + (len(articles) % 12):02d}-{1 + (len(articles) % 27):02d}",
                "author": rng.choice(["Dan Evon", "Bethania Palma", "Alex Kasprak", "Jessica Lee"]),
                "keys": (t1, t2, s1, s2, s3),
            })

    # one crowd conversation per article: the claim tweet and a fact-checking reply
    tweets = []
    tid = 1000
    for art in articles:
        t1, t2, s1, s2, s3 = art["keys"]
        root_id = str(tid)
        reply_id = str(tid + 1)
        tid += 2
        # some claim tweets echo the article wording, others mostly use hashtags
        level = len(tweets) // 2 % 4
        if level == 3:
            # quotes the headline
            text = art["title"] + " " + " ".join([v[s1], v[s2], v[s3]])
        else:
            formal = [[t1, s1], [t1, s1, s2], [t1, s1, s2, s3, t2]][level]
            words = formal + [v[s1], v[s2], v[s3], rng.choice(FILLER)]
            rng.shuffle(words)
            text = " ".join(words)
        tweets.append({"id": root_id, "text": text + " http://t.co/x" + root_id,
                       "conversation_root": root_id})
        tweets.append({"id": reply_id, "text": f"@user{root_id} this was debunked {art['url']}",
                       "in_reply_to": root_id, "conversation_root": root_id, "urls": [art["url"]]})

    # ingest edge cases: a malformed line is appended separately
    tweets.append({"id": "9001", "text": "no links here just chatting about lunch"})
    tweets.append({"id": "9002", "text": "self link https://twitter.com/u/status/9002",
                   "urls": ["https://twitter.com/u/status/9002"]})
    tweets.append({"id": "9003", "text": "   "})

    # labeled queries: 30 articles, 10 per split
    labeled = rng.sample(range(len(articles)), 30)
    queries = []
    for n, idx in enumerate(labeled):
        t1, t2, s1, s2, s3 = articles[idx]["keys"]
        words = [t1, v[s1], v[s2], v[s3], rng.choice(FILLER), rng.choice(FILLER)]
        rng.shuffle(words)
        queries.append((f"q{n:02d}", " ".join(words), articles[idx]["url"]))

    with open(out / "articles.jsonl", "w") as f:
        for art in articles:
            rec = {k: v for k, v in art.items() if k != "keys"}
            f.write(json.dumps(rec) + "\n")
    with open(out / "tweets.jsonl", "w") as f:
        for t in tweets:
            f.write(json.dumps(t) + "\n")
        f.write("{not json\n")
    for split, part in [("train", queries[:10]), ("rerank", queries[10:20]), ("test", queries[20:])]:
        with open(out / f"queries_{split}.tsv", "w") as f:
            f.write("# query_id\ttext\n")
            for qid, text, _ in part:
                f.write(f"{qid}\t{text}\n")
    with open(out / "qrels.tsv", "w") as f:
        for qid, _, url in queries:
            f.write(f"{qid}\t0\t{url}\t1\n")


if __name__ == "__main__":
    main()
