#!/usr/bin/env python3
"""End-to-end command-line walkthrough on a generated raw corpus.

Synthesizes a small raw tweet file with three hashtag topics (plus the
usual noise: mentions, links, retweet-style duplicates), then drives
the real CLI through the whole pipeline:

    ingest -> train-embeddings -> train-baseline -> zsl --save-bundle -> recommend

All artifacts land in --workdir (default ./demo_artifacts) and every
step is seeded, so reruns reproduce the same files byte for byte.

    python3 scripts/run_pipeline_demo.py
    python3 scripts/run_pipeline_demo.py --workdir /tmp/demo --seed 7
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from tagrec.cli import main as cli_main

TOPICS = {
    "coffee": ["espresso", "roast", "beans", "latte", "crema", "grinder",
               "barista", "brew", "arabica", "tamper"],
    "cycling": ["saddle", "pedal", "sprint", "peloton", "climb", "gears",
                "helmet", "chainring", "crankset", "tires"],
    "movies": ["screenplay", "director", "sequel", "trailer", "casting",
               "cinema", "premiere", "script", "editing", "soundtrack"],
}


def synthesize_raw_corpus(path: Path, tweets_per_topic: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        i = 0
        for topic, pool in TOPICS.items():
            for _ in range(tweets_per_topic):
                words = [pool[j] for j in rng.choice(len(pool), size=6, replace=False)]
                if rng.random() < 0.3:
                    words.insert(0, "@fan123")
                if rng.random() < 0.3:
                    words.append("https://t.co/demo")
                words.append(f"#{topic}")
                record = {"id_str": f"d{i:03d}", "text": " ".join(words), "lang": "en"}
                fh.write(json.dumps(record) + "\n")
                i += 1


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="demo_artifacts")
    ap.add_argument("--tweets-per-topic", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--text", default="fresh espresso beans from my favorite barista",
                    help="text to request hashtags for at the end")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    raw = work / "raw.jsonl"
    synthesize_raw_corpus(raw, args.tweets_per_topic, args.seed)
    print(f"synthesized {3 * args.tweets_per_topic} raw tweets -> {raw}")

    steps = [
        ("ingest", [
            "ingest", "--input", str(raw), "--out", str(work / "clean.jsonl"),
            "--top-n", "3", "--min-tweets", "5",
            "--emb-corpus", str(work / "emb_corpus.txt"),
        ]),
        ("train-embeddings", [
            "train-embeddings", "--corpus", str(work / "emb_corpus.txt"),
            "--out", str(work / "vectors.txt"),
            "--dim", "32", "--window", "3", "--epochs", "10",
            "--seed", str(args.seed),
        ]),
        ("train-baseline", [
            "train-baseline", "--clean", str(work / "clean.jsonl"),
            "--embeddings", str(work / "vectors.txt"),
            "--top-n", "3", "--min-tweets", "5",
            "--out", str(work / "baseline.json"),
            "--epochs", "20", "--hidden", "64", "--seed", str(args.seed),
        ]),
        ("zsl", [
            "zsl", "--clean", str(work / "clean.jsonl"),
            "--embeddings", str(work / "vectors.txt"),
            "--top-n", "3", "--min-tweets", "5",
            "--splits", "2/1", "--seeds", str(args.seed), "--methods", "conse",
            "--ks", "1", "--epochs", "20", "--hidden", "64",
            "--out", str(work / "zsl_results.json"),
            "--save-bundle", str(work / "bundle.json"),
        ]),
        ("recommend", [
            "recommend", "--bundle", str(work / "bundle.json"),
            "--text", args.text,
            "--candidates", ",".join(TOPICS), "--k", "3",
        ]),
    ]
    for name, argv in steps:
        print(f"\n=== tagrec {' '.join(argv)}")
        code = cli_main(argv)
        if code != 0:
            print(f"step {name!r} failed with exit code {code}", file=sys.stderr)
            return code

    print("\nartifacts:")
    for path in sorted(work.iterdir()):
        print(f"  {path} ({path.stat().st_size} bytes)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
