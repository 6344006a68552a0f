#!/usr/bin/env python3
"""Independent reference computation of the caption metrics.

Written from the metric definitions only (no shared code with the C++
library). METEOR alignment is found by exhaustive enumeration of every
maximum one-to-one exact matching, so it is only usable on short sentences.

Usage: ngram_oracle.py <captions.jsonl> <predictions.jsonl>
Prints one line per item: item_id bleu4 rouge_l meteor cider_d
followed by a CORPUS line with corpus-level BLEU-4.
"""
import itertools
import json
import math
import sys
import unicodedata
from collections import Counter


def tokenize(text):
    text = unicodedata.normalize("NFKC", text).lower()
    text = "".join(" " if unicodedata.category(ch).startswith("P") else ch for ch in text)
    return text.split()


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def closest_ref_len(c, refs):
    return min((abs(len(r) - c), len(r)) for r in refs)[1]


def bleu4(cand, refs):
    c = len(cand)
    log_sum = 0.0
    for n in range(1, 5):
        counts = ngrams(cand, n)
        total = sum(counts.values())
        max_ref = Counter()
        for r in refs:
            for g, k in ngrams(r, n).items():
                max_ref[g] = max(max_ref[g], k)
        clipped = sum(min(k, max_ref[g]) for g, k in counts.items())
        if total == 0 or clipped == 0:
            return 0.0
        log_sum += 0.25 * math.log(clipped / total)
    r = closest_ref_len(c, refs)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def corpus_bleu4(pairs):
    clipped = [0] * 5
    totals = [0] * 5
    c_len = 0
    r_len = 0
    for cand, refs in pairs:
        c_len += len(cand)
        r_len += closest_ref_len(len(cand), refs)
        for n in range(1, 5):
            counts = ngrams(cand, n)
            max_ref = Counter()
            for r in refs:
                for g, k in ngrams(r, n).items():
                    max_ref[g] = max(max_ref[g], k)
            clipped[n] += sum(min(k, max_ref[g]) for g, k in counts.items())
            totals[n] += sum(counts.values())
    if any(clipped[n] == 0 or totals[n] == 0 for n in range(1, 5)):
        return 0.0
    log_sum = sum(0.25 * math.log(clipped[n] / totals[n]) for n in range(1, 5))
    bp = 1.0 if c_len >= r_len else math.exp(1.0 - r_len / c_len)
    return bp * math.exp(log_sum)


def lcs(a, b):
    best = 0
    # brute force over subsequences of the shorter sequence
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for size in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), size):
            sub = [short[i] for i in idx]
            it = iter(long_)
            if all(tok in it for tok in sub):
                return size
    return best


def rouge_l(cand, refs):
    best = 0.0
    for r in refs:
        l = lcs(cand, r)
        if l == 0:
            continue
        p = l / len(cand)
        rec = l / len(r)
        best = max(best, 2 * p * rec / (p + rec))
    return best


def meteor_single(cand, ref, alpha=0.9, beta=3.0, gamma=0.5):
    # enumerate every maximum matching: per word type, choose which candidate
    # occurrences match which reference occurrences
    per_type = []
    for w in sorted(set(cand) & set(ref)):
        ci = [i for i, t in enumerate(cand) if t == w]
        ri = [j for j, t in enumerate(ref) if t == w]
        k = min(len(ci), len(ri))
        options = []
        for cs in itertools.combinations(ci, k):
            for rs in itertools.permutations(ri, k):
                options.append(list(zip(cs, rs)))
        per_type.append(options)
    if not per_type:
        return 0.0
    best_chunks = None
    matches = 0
    for combo in itertools.product(*per_type):
        align = sorted(p for opt in combo for p in opt)
        matches = len(align)
        chunks = 1
        for (i0, j0), (i1, j1) in zip(align, align[1:]):
            if not (i1 == i0 + 1 and j1 == j0 + 1):
                chunks += 1
        if best_chunks is None or chunks < best_chunks:
            best_chunks = chunks
    p = matches / len(cand)
    r = matches / len(ref)
    fmean = p * r / (alpha * p + (1 - alpha) * r)
    penalty = gamma * (best_chunks / matches) ** beta
    return fmean * (1 - penalty)


def meteor(cand, refs):
    return max(meteor_single(cand, r) for r in refs)


def cider_d(cands, refs, sigma=6.0):
    ids = sorted(cands)
    d = len(ids)
    df = Counter()
    for i in ids:
        seen = set()
        for r in refs[i]:
            for n in range(1, 5):
                seen.update(ngrams(r, n).keys())
        df.update(seen)

    def vec(tokens):
        out = []
        for n in range(1, 5):
            v = {g: k * math.log(d / max(1.0, df[g])) for g, k in ngrams(tokens, n).items()}
            out.append(v)
        return out

    scores = {}
    for i in ids:
        cv = vec(cands[i])
        total = 0.0
        for r in refs[i]:
            rv = vec(r)
            delta = len(cands[i]) - len(r)
            per_n = 0.0
            for n in range(4):
                num = sum(min(cv[n][g], rv[n].get(g, 0.0)) * rv[n].get(g, 0.0) for g in cv[n])
                nc = math.sqrt(sum(x * x for x in cv[n].values()))
                nr = math.sqrt(sum(x * x for x in rv[n].values()))
                sim = num / (nc * nr) if nc > 0 and nr > 0 else 0.0
                per_n += sim * math.exp(-(delta ** 2) / (2 * sigma ** 2))
            total += per_n / 4
        scores[i] = 10.0 * total / len(refs[i])
    return scores


def main():
    gt = [json.loads(l) for l in open(sys.argv[1]) if l.strip()]
    preds = {r["item_id"]: r["response"] for r in (json.loads(l) for l in open(sys.argv[2]) if l.strip())}
    refs = {g["item_id"]: [tokenize(t) for t in g["references"]] for g in gt}
    cands = {g["item_id"]: tokenize(preds[g["item_id"]]) for g in gt}
    cider = cider_d(cands, refs)
    for g in gt:
        i = g["item_id"]
        print(i, repr(bleu4(cands[i], refs[i])), repr(rouge_l(cands[i], refs[i])),
              repr(meteor(cands[i], refs[i])), repr(cider[i]))
    print("CORPUS", repr(corpus_bleu4([(cands[i], refs[i]) for i in cands])),
          repr(sum(cider.values()) / len(cider)))


if __name__ == "__main__":
    main()
