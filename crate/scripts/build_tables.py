#!/usr/bin/env python3
"""Regenerate crates/core/data/{char_freq,pos_lexicon}.tsv from a jieba dict.txt.

Usage: build_tables.py path/to/jieba/dict.txt

The jieba dictionary (MIT licensed) lists `<word> <freq> <pos>` per line.

char_freq.tsv: character frequency is the frequency-weighted occurrence count
of each CJK character across all dictionary words. The 5000 most frequent
characters are kept and scored by percentile rank, most frequent -> 100.

pos_lexicon.tsv: every word tagged `d` (adverb) or `c` (conjunction) with
frequency >= MIN_TAGGED_FREQ, plus frequent 2-4 character words of other
classes tagged OTHER so that greedy longest-match segmentation does not split
them into spurious single-character adverbs.
"""
import sys
from collections import Counter

TOP_CHARS = 5000
MIN_TAGGED_FREQ = 10
MIN_OTHER_FREQ = 3000
TAGS = {"d": "ADV", "c": "CONJ"}
# Common adverbs that jieba files under other classes (e.g. `zg`).
SUPPLEMENT = {"很": "ADV", "甚": "ADV", "突然": "ADV", "一起": "ADV"}


def is_cjk(ch):
    cp = ord(ch)
    return 0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF


def main(path):
    chars = Counter()
    lexicon = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if len(parts) != 3:
                continue
            word, freq, pos = parts[0], int(parts[1]), parts[2]
            for ch in word:
                if is_cjk(ch):
                    chars[ch] += freq
            if not all(is_cjk(ch) for ch in word):
                continue
            if pos in TAGS and freq >= MIN_TAGGED_FREQ:
                lexicon[word] = TAGS[pos]
            elif 2 <= len(word) <= 4 and freq >= MIN_OTHER_FREQ and word not in lexicon:
                lexicon[word] = "OTHER"

    lexicon.update(SUPPLEMENT)

    ranked = sorted(chars.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP_CHARS]
    with open("crates/core/data/char_freq.tsv", "w", encoding="utf-8", newline="\n") as out:
        for rank, (ch, _) in enumerate(ranked):
            score = 100.0 * (TOP_CHARS - rank) / TOP_CHARS
            out.write(f"{ch}\t{score:.4f}\n")

    with open("crates/core/data/pos_lexicon.tsv", "w", encoding="utf-8", newline="\n") as out:
        for word in sorted(lexicon):
            out.write(f"{word}\t{lexicon[word]}\n")


if __name__ == "__main__":
    main(sys.argv[1])
