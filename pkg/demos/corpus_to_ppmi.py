"""
From raw text to a positive PMI matrix
======================================

Walks the first half of the pipeline on a corpus small enough to read:
tokenize, build a vocabulary, count sliding-window co-occurrences, and
turn the counts into a sparse positive pointwise-mutual-information
matrix.
"""

import numpy as np

from tvembed.corpus import build_vocabulary, count_cooccurrences, tokenize
from tvembed.corpus import TimeSlicedCorpus
from tvembed.ppmi import build_ppmi

# Two tiny "years" of text. Note the word "apple" keeps fruit company in
# 1990 and computer company in 2005.
raw_1990 = [
    "He ate an apple and a banana for lunch.",
    "The orchard grows apple, pear and cherry trees.",
    "A ripe banana and a sweet apple.",
]
raw_2005 = [
    "The new apple laptop shipped with a faster processor.",
    "Her apple computer needed a software update.",
    "The laptop processor ran the software well.",
]

# Tokenization lowercases, strips punctuation, and drops pure numbers.
docs_1990 = [tokenize(t) for t in raw_1990]
docs_2005 = [tokenize(t) for t in raw_2005]
print("first 1990 document:", docs_1990[0])

corpus = TimeSlicedCorpus(slices=[docs_1990, docs_2005],
                          slice_labels=[1990, 2005])

# The vocabulary is shared across slices, ordered by total count so word
# indices are stable between runs.
vocab = build_vocabulary(corpus, min_count=1)
print(f"vocabulary of {len(vocab)} words, most frequent: {vocab.words[:5]}")

# Count symmetric co-occurrences within a +/-2 word window; windows never
# cross document boundaries.
stats = count_cooccurrences(docs_1990, vocab, window=2)
print(f"1990 slice: {stats.total_tokens} tokens, "
      f"{stats.cooc.nnz} nonzero co-occurrence cells")

# PPMI keeps only the positively associated pairs.
ppmi = build_ppmi(stats, slice_label=1990)
a = vocab.index["apple"]
row = ppmi.values.getrow(a).tocoo()
pairs = sorted(zip(row.data, row.col), reverse=True)
print("strongest 1990 associations of 'apple':")
for val, j in pairs[:4]:
    print(f"  {vocab.words[j]:10s} ppmi={val:.3f}")
