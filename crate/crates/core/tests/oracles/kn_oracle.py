#!/usr/bin/env python3
"""Exact-arithmetic interpolated modified Kneser-Ney, written from the
textbook definition and independent of the Rust code.

    python3 kn_oracle.py CORPUS ORDER

prints one line per (context, word) pair over the full vocabulary:

    <context tokens or -> TAB <word> TAB <probability as float repr>

Conventions: sentences are wrapped in <s> ... </s>; <s> is only ever a
context; the vocabulary is <unk>, <s>, </s> plus every corpus word; the
lowest order interpolates with the uniform distribution over the whole
vocabulary. Below the top order, n-grams count distinct left extensions,
except those starting with <s>, which keep their raw counts.
"""

import sys
from collections import defaultdict
from fractions import Fraction
from itertools import product

FALLBACK = Fraction(3, 4)


def discounts(adjusted):
    n = [sum(1 for c in adjusted.values() if c == k) for k in (1, 2, 3, 4)]
    if n[0] == 0 or n[1] == 0 or n[2] == 0:
        return [FALLBACK] * 3
    y = Fraction(n[0], n[0] + 2 * n[1])
    d = [k - (k + 1) * y * Fraction(n[k], n[k - 1]) for k in (1, 2, 3)]
    if any(not (0 < dk <= k) for k, dk in zip((1, 2, 3), d)):
        return [FALLBACK] * 3
    return d


def main():
    path, order = sys.argv[1], int(sys.argv[2])
    sents = [l.split() for l in open(path, encoding="utf-8") if l.strip()]
    words = sorted({w for s in sents for w in s})
    vocab = ["<unk>", "<s>", "</s>"] + words
    padded = [["<s>"] + s + ["</s>"] for s in sents]

    raw = defaultdict(int)
    for s in padded:
        for n in range(1, order + 1):
            for i in range(len(s) - n + 1):
                g = tuple(s[i : i + n])
                if g == ("<s>",):
                    continue
                raw[g] += 1

    left = defaultdict(set)
    for g in raw:
        if len(g) >= 2:
            left[g[1:]].add(g[0])

    adjusted = [dict() for _ in range(order + 1)]
    for g, c in raw.items():
        n = len(g)
        if n == order or g[0] == "<s>":
            adjusted[n][g] = c
        else:
            adjusted[n][g] = len(left[g])
    disc = [None] + [discounts(adjusted[n]) for n in range(1, order + 1)]

    def d_of(n, c):
        return disc[n][min(c, 3) - 1]

    totals = [defaultdict(int) for _ in range(order + 1)]
    mass = [defaultdict(Fraction) for _ in range(order + 1)]
    for n in range(1, order + 1):
        for g, c in adjusted[n].items():
            totals[n][g[:-1]] += c
            mass[n][g[:-1]] += d_of(n, c)

    V = len(vocab)

    def prob(h, w):
        n = len(h) + 1
        if n == 1:
            t = totals[1][()]
            c = adjusted[1].get((w,), 0)
            gamma = mass[1][()] / t
            own = (c - d_of(1, c)) / t if c else Fraction(0)
            return own + gamma * Fraction(1, V)
        lower = prob(h[1:], w)
        t = totals[n].get(h, 0)
        if t == 0:
            return lower
        c = adjusted[n].get(h + (w,), 0)
        gamma = mass[n][h] / t
        own = (c - d_of(n, c)) / t if c else Fraction(0)
        return own + gamma * lower

    scored = [w for w in vocab if w != "<s>"] + ["<s>"]
    for w in scored:
        print(f"-\t{w}\t{float(prob((), w))!r}")
    for n in range(2, order + 1):
        for h in sorted({g[:-1] for g in adjusted[n]}):
            for w in vocab:
                print(f"{' '.join(h)}\t{w}\t{float(prob(h, w))!r}")
    for n in range(1, order + 1):
        print(f"# D{n} = {[float(x) for x in disc[n]]}", file=sys.stderr)


if __name__ == "__main__":
    main()
