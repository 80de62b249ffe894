"""Seeded synthetic sentence corpus.

Stands in for non-public newspaper data: each class is marked by one
adjacent marker bigram, every sentence contains every marker exactly once
(so marker unigram counts carry no signal), and a configurable fraction of
sentences additionally carry a class-exclusive keyword.  Window models can
read the bigram; bag-of-words models can only use the keywords.
"""

import numpy as np

from ..text import murmur3_32
from .data import Dataset


def make_synthetic(n_sentences: int = 20000, n_classes: int = 5, seed=0,
                   keyword_fraction: float = 0.9, n_fillers: int = 200,
                   keywords_per_class: int = 20) -> Dataset:
    """Deterministic corpus of keyword/bigram sentences.

    Class i is signalled by the adjacent ordered pair (marker_i,
    marker_{i+1 mod C}); all other markers appear isolated between filler
    words.  With probability ``keyword_fraction`` a sentence also carries
    one keyword drawn from class i's private pool.
    """
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if not 0.0 <= keyword_fraction <= 1.0:
        raise ValueError(f"keyword fraction must lie in [0, 1], got {keyword_fraction}")
    rng = np.random.default_rng(seed)
    markers = [f"marker{i}" for i in range(n_classes)]
    fillers = [f"filler{i:03d}" for i in range(n_fillers)]
    keywords = [
        [f"key{c}x{j}" for j in range(keywords_per_class)] for c in range(n_classes)
    ]
    labels = [f"class{i}" for i in range(n_classes)]
    examples = []
    for _ in range(n_sentences):
        cls = int(rng.integers(n_classes))
        blocks = [[markers[cls], markers[(cls + 1) % n_classes]]]
        blocks += [[markers[j]] for j in range(n_classes)
                   if j not in (cls, (cls + 1) % n_classes)]
        if rng.random() < keyword_fraction:
            blocks.append([keywords[cls][int(rng.integers(keywords_per_class))]])
        rng.shuffle(blocks)
        tokens = [fillers[int(i)] for i in rng.integers(n_fillers, size=rng.integers(1, 3))]
        for block in blocks:
            tokens.extend(block)
            # at least one filler after each block keeps markers from
            # touching across block boundaries
            tokens.extend(fillers[int(i)] for i in
                          rng.integers(n_fillers, size=rng.integers(1, 3)))
        examples.append((cls, tokens))
    return Dataset(examples, labels, source=f"synthetic(seed={seed})")


def corpus_tokens(dataset: Dataset) -> list[str]:
    """Sorted set of all tokens appearing in a dataset."""
    seen = set()
    for _, tokens in dataset.examples:
        seen.update(tokens)
    return sorted(seen)


def write_embeddings_file(path, tokens, dim: int = 50, seed=0) -> None:
    """Write a text-format vector file with one fixed random vector per token.

    Vectors derive from (seed, token hash), so the file is identical across
    runs and token orders.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for token in tokens:
            seq = np.random.SeedSequence([seed, murmur3_32(token.encode("utf-8"))])
            vec = np.random.default_rng(seq).uniform(-0.5, 0.5, dim)
            fh.write(token + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
