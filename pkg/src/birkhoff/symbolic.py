"""Alphabets, words, cylinders and subshift-of-finite-type primitives.

A subshift of finite type over the alphabet {0, ..., K-1} is described by a
0/1 adjacency matrix A: a word is admissible when every consecutive symbol
pair (s, t) has A[s][t] == 1.  The full shift is the all-ones matrix.
Indexing is 0-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapExceeded, NotPrimitive

# Sharp classical search bound: a primitive K x K 0/1 matrix has a strictly
# positive power of exponent at most (K-1)^2 + 1.
def _wielandt_bound(k: int) -> int:
    return (k - 1) ** 2 + 1


class SftSpec:
    """Shift alphabet size plus 0/1 adjacency matrix.

    Immutable after construction; the primitivity index is cached on first
    use.  `full_shift(K)` builds the all-ones instance.
    """

    def __init__(self, adjacency: Sequence[Sequence[int]]):
        a = np.asarray(adjacency, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if a.shape[0] < 2:
            raise ValueError("alphabet size must be at least 2")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        self._adjacency = a
        self._adjacency.setflags(write=False)
        self._r: Optional[int] = None
        self._r_computed = False

    @classmethod
    def full_shift(cls, k: int) -> "SftSpec":
        return cls(np.ones((k, k), dtype=np.int64))

    @classmethod
    def golden_mean(cls) -> "SftSpec":
        """Two-symbol shift forbidding the pair 00."""
        return cls([[0, 1], [1, 1]])

    @property
    def K(self) -> int:
        return self._adjacency.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adjacency

    @property
    def is_full_shift(self) -> bool:
        return bool((self._adjacency == 1).all())

    @property
    def r(self) -> Optional[int]:
        """Cached primitivity index, or None if the shift is not primitive."""
        if not self._r_computed:
            self._r = is_primitive(self)
            self._r_computed = True
        return self._r

    def to_json(self) -> str:
        return json.dumps({"K": self.K, "adjacency": self._adjacency.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SftSpec":
        data = json.loads(text)
        spec = cls(data["adjacency"])
        if "K" in data and data["K"] != spec.K:
            raise ValueError(f"declared K={data['K']} but adjacency is {spec.K}x{spec.K}")
        return spec

    def __eq__(self, other) -> bool:
        return isinstance(other, SftSpec) and np.array_equal(self._adjacency, other._adjacency)

    def __repr__(self) -> str:
        return f"SftSpec(K={self.K})"


@dataclass(frozen=True)
class Word:
    """A finite word over {0, ..., K-1}."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s < 0 for s in self.symbols):
            raise ValueError("symbols must be non-negative")

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, i):
        return self.symbols[i]

    def is_admissible(self, spec: SftSpec) -> bool:
        a = spec.adjacency
        if any(s >= spec.K for s in self.symbols):
            return False
        return all(a[s, t] == 1 for s, t in zip(self.symbols, self.symbols[1:]))


def is_primitive(spec: SftSpec) -> Optional[int]:
    """Smallest r with every entry of adjacency^r positive, else None.

    The search stops at the Wielandt bound (K-1)^2 + 1, beyond which no
    primitive matrix needs to go.  Powers are accumulated over reachability
    (entries saturated at 1), so no integer overflow is possible.
    """
    a = (spec.adjacency > 0).astype(np.int64)
    power = a.copy()
    for r in range(1, _wielandt_bound(spec.K) + 1):
        if (power > 0).all():
            return r
        power = np.minimum(power @ a, 1)
    return None


def _bigint_matrix(spec: SftSpec) -> list[list[int]]:
    return [[int(x) for x in row] for row in spec.adjacency]


def _matmul_big(x: list[list[int]], y: list[list[int]]) -> list[list[int]]:
    k = len(x)
    cols = list(zip(*y))
    return [[sum(xi * yi for xi, yi in zip(row, col)) for col in cols] for row in x]


def count_admissible(spec: SftSpec, n: int) -> int:
    """Number of admissible words of length n, exactly.

    Equals the sum of all entries of adjacency^(n-1); n=1 gives K.  Computed
    with arbitrary-precision integers so lengths of order 1e4 do not overflow.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return spec.K
    # Exponentiation by squaring on big-integer matrices.
    e = n - 1
    base = _bigint_matrix(spec)
    result = None
    while e:
        if e & 1:
            result = base if result is None else _matmul_big(result, base)
        e >>= 1
        if e:
            base = _matmul_big(base, base)
    return sum(sum(row) for row in result)


def enumerate_admissible(spec: SftSpec, n: int, cap: int = 1 << 20) -> Iterator[Word]:
    """Yield every admissible word of length n once, in lexicographic order.

    Raises CapExceeded when count_admissible(spec, n) > cap, signalling that
    the caller should fall back to the dynamic-programming oracle.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = count_admissible(spec, n)
    if total > cap:
        raise CapExceeded(total, cap)
    a = spec.adjacency
    k = spec.K
    word = [0] * n

    def rec(depth: int) -> Iterator[Word]:
        if depth == n:
            yield Word(tuple(word))
            return
        prev = word[depth - 1] if depth else None
        for s in range(k):
            if prev is None or a[prev, s]:
                word[depth] = s
                yield from rec(depth + 1)

    return rec(0)


def sft_entropy(spec: SftSpec, rel_tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """log of the spectral radius of the adjacency matrix.

    Power iteration with relative tolerance on the Rayleigh quotient; the
    all-ones matrix short-circuits to log K exactly.  Requires primitivity,
    which guarantees a simple dominant eigenvalue.
    """
    if spec.r is None:
        raise NotPrimitive("adjacency matrix has no strictly positive power")
    if spec.is_full_shift:
        return math.log(spec.K)
    a = spec.adjacency.astype(float)
    # Iterate A^r so the matrix applied is strictly positive and the iterate
    # stays strictly positive; the Collatz-Wielandt ratios then give certified
    # two-sided bounds on the spectral radius of A^r.
    ar = np.linalg.matrix_power(a, spec.r).astype(float)
    v = np.ones(spec.K) / spec.K
    for _ in range(max_iter):
        w = ar @ v
        ratios = w / v
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo <= rel_tol * hi:
            return math.log(0.5 * (lo + hi)) / spec.r
        v = w / w.sum()
    raise NotPrimitive(f"power iteration failed to converge in {max_iter} steps")


@dataclass(frozen=True)
class CylinderDistance:
    """Value of the shift metric, flagged when the prefixes never disagree."""

    value: float
    is_upper_bound: bool = False


def cylinder_metric(i: Sequence[int], j: Sequence[int]) -> CylinderDistance:
    """Shift metric e^{-min{n >= 0 : i_n != j_n}} on finite prefixes.

    If the prefixes agree up to the shorter length L, the true distance is
    only known to be at most e^{-L}; that bound is returned flagged.
    """
    length = min(len(i), len(j))
    for n in range(length):
        if i[n] != j[n]:
            return CylinderDistance(math.exp(-n))
    return CylinderDistance(math.exp(-length), is_upper_bound=True)
