"""Alphabets, histories, distributions and the sup-norm / Cesàro metric layer.

Every prediction in the package is a probability vector over a finite
alphabet.  Two predictions are compared with the sup-norm

    ||p - q|| = max_a |p[a] - q[a]|

and a sequence of such distances is judged by its running (Cesàro) means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """An ordered finite set of outcome labels; indices are stable."""

    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if len(symbols) < 2:
            raise DomainError("an alphabet needs at least two symbols")
        if len(set(symbols)) != len(symbols):
            raise DomainError(f"alphabet symbols must be distinct: {symbols!r}")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise DomainError(f"{symbol!r} is not in alphabet {self.symbols!r}") from None

    def encode(self, symbols) -> tuple[int, ...]:
        return tuple(self.index(s) for s in symbols)

    def decode(self, indices) -> tuple:
        return tuple(self.symbols[i] for i in indices)


BINARY = Alphabet((0, 1))
HMM_ALPHABET = Alphabet(("B", "G"))
WAR_ALPHABET = Alphabet(("W", "B", "G"))


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over an alphabet."""

    alphabet: Alphabet
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != len(self.alphabet):
            raise DomainError(
                f"expected {len(self.alphabet)} weights, got shape {w.shape}"
            )
        if np.any(w < 0.0) or np.any(w > 1.0) or not np.all(np.isfinite(w)):
            raise DomainError(f"weights must lie in [0, 1]: {w}")
        if abs(math.fsum(w) - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"weights sum to {math.fsum(w)!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, alphabet: Alphabet, symbol) -> "Distribution":
        w = np.zeros(len(alphabet))
        w[alphabet.index(symbol)] = 1.0
        return cls(alphabet, w)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "Distribution":
        return cls(alphabet, np.full(len(alphabet), 1.0 / len(alphabet)))

    def __getitem__(self, symbol) -> float:
        return float(self.weights[self.alphabet.index(symbol)])

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        inner = ", ".join(f"{s}: {w:.6g}" for s, w in zip(self.alphabet, self.weights))
        return f"Distribution({inner})"


@dataclass(frozen=True)
class History:
    """Observed outcomes as alphabet indices, oldest first.  May be empty."""

    alphabet: Alphabet
    outcomes: tuple[int, ...] = ()

    def __post_init__(self):
        outcomes = tuple(int(a) for a in self.outcomes)
        m = len(self.alphabet)
        for a in outcomes:
            if not 0 <= a < m:
                raise DomainError(f"index {a} is not valid for an alphabet of size {m}")
        object.__setattr__(self, "outcomes", outcomes)

    def __len__(self):
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    def extend(self, a: int) -> "History":
        return History(self.alphabet, self.outcomes + (a,))


def _weights(p):
    if isinstance(p, Distribution):
        return p.alphabet, p.weights
    return None, np.asarray(p, dtype=np.float64)


def sup_distance(p, q) -> float:
    """Sup-norm distance between two predictions.

    Accepts :class:`Distribution` objects or plain probability vectors.
    Distributions over different alphabets raise :class:`DomainError`.
    """
    alpha_p, wp = _weights(p)
    alpha_q, wq = _weights(q)
    if alpha_p is not None and alpha_q is not None and alpha_p != alpha_q:
        raise DomainError("distributions are over different alphabets")
    if wp.shape != wq.shape:
        raise DomainError(f"alphabet size mismatch: {wp.shape} vs {wq.shape}")
    return float(np.max(np.abs(wp - wq)))


@dataclass(frozen=True, eq=False)
class CesaroTrace:
    values: np.ndarray
    running_means: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def final_mean(self) -> float:
        if len(self.values) == 0:
            raise DomainError("empty trace has no final mean")
        return float(self.running_means[-1])


def cesaro_means(values: Sequence[float]) -> CesaroTrace:
    """Running means ``(1/N) * sum_{k<N} values[k]`` for every prefix length N."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        return CesaroTrace(v, v.copy())
    means = np.cumsum(v) / np.arange(1, v.size + 1)
    return CesaroTrace(v, means)


@dataclass(frozen=True)
class Verdict:
    weak: bool
    strong: bool

    def as_dict(self):
        return {"weak": self.weak, "strong": self.strong}


def full_density_limit_test(trace: CesaroTrace, epsilon: float, tail_fraction: float) -> Verdict:
    """Finite-horizon surrogate for weak and strong convergence to zero.

    ``weak`` holds when the final running mean is below ``epsilon``;
    ``strong`` when every value in the last ``ceil(tail_fraction * N)``
    entries is below ``epsilon``.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not 0 < tail_fraction < 1:
        raise DomainError(f"tail_fraction must lie in (0, 1), got {tail_fraction}")
    n = len(trace)
    if n == 0:
        raise DomainError("cannot judge an empty trace")
    tail = math.ceil(tail_fraction * n)
    weak = bool(trace.running_means[-1] < epsilon)
    strong = bool(np.max(trace.values[n - tail:]) < epsilon)
    return Verdict(weak=weak, strong=strong)
