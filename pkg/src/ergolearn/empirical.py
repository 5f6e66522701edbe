"""Empirical block frequencies along a realization and component identification."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class BlockFrequencyTable:
    """Overlapping-window frequencies of length-``k`` blocks in a prefix of length ``N``.

    Counts are normalized by the number of complete windows, ``N - k + 1``.
    Only blocks that occur are stored; :meth:`frequency` returns 0 otherwise.
    """

    k: int
    N: int
    alphabet_size: int
    frequencies: dict

    def frequency(self, block) -> float:
        return self.frequencies.get(tuple(int(a) for a in block), 0.0)

    def all_blocks(self):
        return itertools.product(range(self.alphabet_size), repeat=self.k)

    def to_csv(self, component=None, symbols=None) -> str:
        """Rows ``block,frequency,exact,gap`` over every block of the alphabet.

        ``exact`` and ``gap`` are left empty without a component.
        """
        lines = ["block,frequency,exact,gap"]
        for block in self.all_blocks():
            label = "".join(str(symbols[a]) if symbols else str(a) for a in block)
            f = self.frequency(block)
            if component is None:
                lines.append(f"{label},{f:.17g},,")
            else:
                e = component.block_probability(block)
                lines.append(f"{label},{f:.17g},{e:.17g},{abs(f - e):.17g}")
        return "\n".join(lines) + "\n"


def block_frequencies(prefix, k: int, alphabet_size: int | None = None) -> BlockFrequencyTable:
    path = np.asarray(getattr(prefix, "outcomes", prefix), dtype=np.int64).reshape(-1)
    if k < 1:
        raise DomainError(f"block length must be at least 1, got {k}")
    if path.size < k:
        raise DomainError(f"prefix of length {path.size} is shorter than block length {k}")
    m = int(alphabet_size if alphabet_size is not None else path.max() + 1)
    m = max(m, 2)
    windows = path.size - k + 1
    codes = np.zeros(windows, dtype=np.int64)
    for j in range(k):
        codes = codes * m + path[j : j + windows]
    uniq, counts = np.unique(codes, return_counts=True)
    freqs = {}
    for code, c in zip(uniq.tolist(), counts.tolist()):
        block = []
        for _ in range(k):
            code, r = divmod(code, m)
            block.append(r)
        freqs[tuple(reversed(block))] = c / windows
    return BlockFrequencyTable(k=k, N=int(path.size), alphabet_size=m, frequencies=freqs)


def max_block_gap(table: BlockFrequencyTable, component) -> float:
    """Largest ``|empirical - exact|`` over every block of length ``table.k``."""
    return max(abs(table.frequency(b) - component.block_probability(b)) for b in table.all_blocks())


def identify_component(table: BlockFrequencyTable, dec) -> tuple[int, object, float]:
    """Parameter whose exact block law is closest to ``table`` in max-gap.

    Returns ``(index, parameter, gap)``; ties go to the lowest index.
    """
    best_i, best_gap = 0, np.inf
    for i, comp in enumerate(dec.components):
        gap = max_block_gap(table, comp)
        if gap < best_gap:
            best_i, best_gap = i, gap
    return best_i, dec.parameters[best_i], float(best_gap)
