#!/usr/bin/env python3
"""Reference BLEU-4 used to freeze expected values for the C++ tests.

Sentence BLEU with uniform weights over 1..4-grams, the standard brevity
penalty, and add-one smoothing applied to the numerator and denominator of
every n-gram precision with n >= 2 (unigram precision is left raw; a zero
unigram precision yields a score of 0).

Kept deliberately separate from the C++ implementation: this file is the
oracle, not the product.
"""

import math
import sys
from collections import Counter


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(hyp, ref):
    if len(ref) == 0:
        raise ValueError("empty reference")
    if len(hyp) == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        hyp_ngrams = ngrams(hyp, n)
        ref_ngrams = ngrams(ref, n)
        matched = sum(min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items())
        total = max(len(hyp) - n + 1, 0)
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_sum += 0.25 * math.log(p)
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum)


CASES = [
    ("identical", "the quick brown fox jumps", "the quick brown fox jumps"),
    ("one_sub", "the quick brown fox sleeps", "the quick brown fox jumps"),
    ("common_mt", "the cat sat on the mat", "the cat is on the mat"),
    ("code_like", "return x + 1", "return x + 2"),
    ("short_hyp", "a b c", "a b c d e"),
    ("long_hyp", "a b c d e f g", "a b c d"),
    ("disjoint", "x y z", "p q r s"),
    ("partial_code",
     "for i in range ( n ) : total += i",
     "for i in range ( n ) : total += values [ i ]"),
]

if __name__ == "__main__":
    for name, hyp, ref in CASES:
        v = bleu4(hyp.split(), ref.split())
        print(f"{name:14s} {v:.16f}")
    sys.exit(0)
