#!/usr/bin/env python3
"""Writes precomputed embeddings for every text the fixture run embeds.

Vectors are hashed bags of lowercase words, keyed by sha256 of the exact text.

Usage: make_fixture_vectors.py <fixtures_dir> [dim]
"""
import hashlib
import json
import re
import sys
from pathlib import Path


def embed(text, dim):
    v = [0.0] * dim
    for word in re.findall(r"[a-z0-9]+", text.lower()):
        h = hashlib.sha256(word.encode()).digest()
        v[int.from_bytes(h[:4], "big") % dim] += 1.0 if h[4] < 128 else -1.0
    return v


def jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def main():
    root = Path(sys.argv[1])
    dim = int(sys.argv[2]) if len(sys.argv) > 2 else 64
    texts = []
    for path in sorted(root.glob("*_caption.jsonl")):
        texts += [r["references"][0] for r in jsonl(path)]
    for path in sorted(root.glob("*_labels.jsonl")):
        for r in jsonl(path):
            texts += r["labels"]
    for path in sorted((root / "predictions").glob("*.jsonl")):
        texts += [r["response"] for r in jsonl(path)]
    seen = set()
    with open(root / "vectors.jsonl", "w", encoding="utf-8") as out:
        for t in texts:
            key = hashlib.sha256(t.encode()).hexdigest()
            if not t.strip() or key in seen:
                continue
            seen.add(key)
            out.write(json.dumps({"text_sha256": key, "vector": embed(t, dim)}) + "\n")


if __name__ == "__main__":
    main()
