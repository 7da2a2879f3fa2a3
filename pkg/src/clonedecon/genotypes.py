"""Two-locus genotype codes and the read-category match table.

A subclone's genotype at a mutation pair is a pair of 2-bit strands
(one per homologous chromosome).  Because the two strands are not
phased relative to other pairs, a pattern and its row-mirror are
indistinguishable, collapsing the 16 raw patterns to 10 codes.  Reads
covering the pair fall in one of 8 categories: the four complete
two-locus alleles plus the four single-locus (missing) patterns.

Codes are numbered 1..10 and read categories 1..8 in the public API
and in all serialized output; array axes elsewhere in the package are
0-based.
"""
from __future__ import annotations

import itertools

import numpy as np

# Read categories g=1..8: locus patterns with None marking a missing locus.
HAP_CATEGORIES: tuple[str, ...] = ("00", "01", "10", "11", "-0", "-1", "0-", "1-")
_HAP_PATTERNS = (
    (0, 0), (0, 1), (1, 0), (1, 1),
    (None, 0), (None, 1), (0, None), (1, None),
)

# Codes q=1..10, each a lexicographically ordered pair of strands.
GENOTYPE_CODES: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = (
    ((0, 0), (0, 0)),
    ((0, 0), (0, 1)),
    ((0, 0), (1, 0)),
    ((0, 0), (1, 1)),
    ((0, 1), (0, 1)),
    ((0, 1), (1, 0)),
    ((0, 1), (1, 1)),
    ((1, 0), (1, 0)),
    ((1, 0), (1, 1)),
    ((1, 1), (1, 1)),
)

N_CATEGORIES = 8
N_CODES = 10

_CODE_LOOKUP = {strands: q + 1 for q, strands in enumerate(GENOTYPE_CODES)}

# Canonical 4-bit vectorization (s1 locus1, s1 locus2, s2 locus1, s2 locus2),
# used for L1 distances between codes.
CODE_BITS = np.array([s1 + s2 for s1, s2 in GENOTYPE_CODES], dtype=np.int8)

# Mean of the two strands' first-locus bits: the marginal genotype of the
# observed locus for an unpaired variant (0 wild-type, 0.5 het, 1 hom).
CODE_LOCUS1_DOSE = (CODE_BITS[:, 0] + CODE_BITS[:, 2]) / 2.0
CODE_LOCUS2_DOSE = (CODE_BITS[:, 1] + CODE_BITS[:, 3]) / 2.0


def canonical_code(strand1, strand2) -> int:
    """Map an unordered pair of 2-bit strands to its code in 1..10."""
    s1, s2 = tuple(strand1), tuple(strand2)
    for s in (s1, s2):
        if len(s) != 2 or any(b not in (0, 1) for b in s):
            raise ValueError(f"strand must be a pair of bits, got {s!r}")
    key = (s1, s2) if s1 <= s2 else (s2, s1)
    return _CODE_LOOKUP[key]


def allele_match(g: int, q: int) -> float:
    """Probability that a read in category g matches genotype code q.

    Each strand is picked with probability 0.5 and contributes iff its
    observed loci agree with the read; a missing locus agrees with
    anything.  The result is always 0, 0.5 or 1.
    """
    if not 1 <= g <= N_CATEGORIES:
        raise ValueError(f"read category must be in 1..8, got {g}")
    if not 1 <= q <= N_CODES:
        raise ValueError(f"genotype code must be in 1..10, got {q}")
    pattern = _HAP_PATTERNS[g - 1]
    total = 0.0
    for strand in GENOTYPE_CODES[q - 1]:
        if all(p is None or p == b for p, b in zip(pattern, strand)):
            total += 0.5
    return total


def build_match_table() -> np.ndarray:
    """Precompute the 8x10 table of allele_match values (row g-1, col q-1)."""
    table = np.empty((N_CATEGORIES, N_CODES))
    for g in range(1, N_CATEGORIES + 1):
        for q in range(1, N_CODES + 1):
            table[g - 1, q - 1] = allele_match(g, q)
    table.setflags(write=False)
    return table


MATCH_TABLE = build_match_table()

# allele_match levels as integers 0/1/2 (= 2*A), for kernel gather loops.
MATCH_LEVELS = (2 * MATCH_TABLE).astype(np.int64)
MATCH_LEVELS.setflags(write=False)

# Read-category group per coverage case: complete, left missing, right missing.
CATEGORY_GROUPS = ((0, 1, 2, 3), (4, 5), (6, 7))
CATEGORY_CASE = np.array([0, 0, 0, 0, 1, 1, 2, 2], dtype=np.int64)


def all_raw_patterns():
    """All 16 ordered strand pairs, for exhaustive enumeration in tests."""
    strands = list(itertools.product((0, 1), repeat=2))
    return list(itertools.product(strands, strands))
