"""Weight sequences, their frequencies, and the occurrence-matching transport.

A weight stream is a deterministic, random-access sequence of symbols from
{0, ..., N-1}.  Sampled kinds derive every symbol from (parameters, seed,
index) through a counter-based generator, so streams can be evaluated out of
order and shared between threads.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import LimitTooLarge, PrefixTooShort, SymbolExhausted

MOEBIUS_PLUSMINUS_DENSITY = 3.0 / math.pi**2   # asymptotic density of mu = +1 (and of -1)
MOEBIUS_ZERO_DENSITY = 1.0 - 6.0 / math.pi**2  # asymptotic density of non-squarefree n

_SIEVE_BUDGET = 50_000_000
_MASK64 = (1 << 64) - 1
_GAMMA64 = 0x9E3779B97F4A7C15


# ---------------------------------------------------------------------------
# Moebius sieve

def moebius_sieve(limit: int, budget: int = _SIEVE_BUDGET) -> np.ndarray:
    """mu(n) for n = 1..limit as an int8 array indexed by n (entry 0 unused).

    mu(n) is (-1)^k for squarefree n with k prime factors and 0 when a square
    divides n.  Sign flips are applied per prime up to sqrt(limit); a single
    remaining prime factor above sqrt(limit) is detected by comparing the
    product of known prime divisors against n.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if limit > budget:
        raise LimitTooLarge(f"sieve to {limit} exceeds budget {budget}")
    mu = np.ones(limit + 1, dtype=np.int8)
    mu[0] = 0
    root = math.isqrt(limit)
    if root >= 2:
        is_prime = np.ones(root + 1, dtype=bool)
        is_prime[:2] = False
        for p in range(2, math.isqrt(root) + 1):
            if is_prime[p]:
                is_prime[p * p :: p] = False
        primes = np.nonzero(is_prime)[0]
        dtype = np.int32 if limit < 2**31 else np.int64
        prod = np.ones(limit + 1, dtype=dtype)  # product of distinct primes <= root dividing n
        for p in primes:
            p = int(p)
            mu[p::p] *= -1
            mu[p * p :: p * p] = 0
            prod[p::p] *= p
        # prod[n] < n exactly when a prime factor > sqrt(limit) remains (or n
        # is divisible by a small square, in which case mu[n] is already 0).
        large_prime_left = prod < np.arange(limit + 1, dtype=dtype)
        mu[large_prime_left] *= -1
    else:
        for n in range(2, limit + 1):  # limit <= 3: all primes
            mu[n] = -1
    return mu


# ---------------------------------------------------------------------------
# Frequencies

@dataclass(frozen=True)
class FrequencyVector:
    """A probability vector of symbol frequencies."""

    q: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=float)
        if arr.ndim != 1:
            raise ValueError("frequencies must be a vector")
        if (arr < -1e-15).any():
            raise ValueError("frequencies must be non-negative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValueError(f"frequencies must sum to 1, got {arr.sum()!r}")
        arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)
        object.__setattr__(self, "q", arr)

    def __len__(self) -> int:
        return len(self.q)

    def __getitem__(self, i: int) -> float:
        return float(self.q[i])


def as_frequencies(q) -> np.ndarray:
    """Accept a FrequencyVector or array-like; return a validated array."""
    if isinstance(q, FrequencyVector):
        return q.q
    return FrequencyVector(np.asarray(q, dtype=float)).q


# ---------------------------------------------------------------------------
# Counter-based generator (splitmix64 outputs, addressed by index)

def _mix64_int(x: int) -> int:
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _uniform_at(seed: int, index: int) -> float:
    h = _mix64_int((seed & _MASK64) + (index + 1) * _GAMMA64)
    return (h >> 11) * 2.0**-53


def _uniform_block(seed: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


# ---------------------------------------------------------------------------
# Streams

class WeightStream:
    """Base class: deterministic random access into a symbol sequence."""

    N: int

    def __getitem__(self, k: int) -> int:
        raise NotImplementedError

    def prefix(self, n: int) -> np.ndarray:
        """First n symbols as an int64 array."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError


class ExplicitStream(WeightStream):
    """A finite, explicitly given sequence."""

    def __init__(self, symbols: Sequence[int], N: Optional[int] = None):
        arr = np.asarray(symbols, dtype=np.int64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError("symbols must be a non-empty vector")
        if (arr < 0).any():
            raise ValueError("symbols must be non-negative")
        self._symbols = arr
        self.N = int(arr.max()) + 1 if N is None else int(N)
        if (arr >= self.N).any():
            raise ValueError("symbol out of range for declared alphabet")

    def __len__(self) -> int:
        return len(self._symbols)

    def __getitem__(self, k: int) -> int:
        return int(self._symbols[k])

    def prefix(self, n: int) -> np.ndarray:
        if n > len(self._symbols):
            raise PrefixTooShort(n, len(self._symbols))
        return self._symbols[:n]

    def descriptor(self) -> dict:
        return {"kind": "explicit", "symbols": self._symbols.tolist(), "N": self.N}


class PeriodicStream(WeightStream):
    """Infinite repetition of a finite pattern."""

    def __init__(self, pattern: Sequence[int], N: Optional[int] = None):
        arr = np.asarray(pattern, dtype=np.int64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError("pattern must be a non-empty vector")
        self._pattern = arr
        self.N = int(arr.max()) + 1 if N is None else int(N)
        if (arr >= self.N).any() or (arr < 0).any():
            raise ValueError("symbol out of range for declared alphabet")

    def __getitem__(self, k: int) -> int:
        return int(self._pattern[k % len(self._pattern)])

    def prefix(self, n: int) -> np.ndarray:
        reps = -(-n // len(self._pattern))
        return np.tile(self._pattern, reps)[:n]

    def descriptor(self) -> dict:
        return {"kind": "periodic", "pattern": self._pattern.tolist(), "N": self.N}


_DEFAULT_MOEBIUS_CODING = {1: 0, -1: 1, 0: 2}


class MoebiusStream(WeightStream):
    """mu(k+1) recoded to symbols; position k carries the value of mu at k+1.

    The default coding sends +1 -> 0, -1 -> 1 and 0 -> 2, so that composing
    with the digit potential phi(i) = i yields the worked closed-form case.
    """

    def __init__(self, coding: Optional[Dict[int, int]] = None, budget: int = _SIEVE_BUDGET):
        coding = dict(_DEFAULT_MOEBIUS_CODING if coding is None else coding)
        if set(coding) != {1, -1, 0} or len(set(coding.values())) != 3:
            raise ValueError("coding must map {+1, -1, 0} to three distinct symbols")
        self._coding = coding
        self.N = max(coding.values()) + 1
        self._budget = budget
        # lookup indexed by mu + 1 in {0, 1, 2}
        self._lookup = np.array([coding[-1], coding[0], coding[1]], dtype=np.int64)
        self._cache = np.empty(0, dtype=np.int64)
        self._lock = threading.Lock()

    def _ensure(self, n: int) -> None:
        if len(self._cache) >= n:
            return
        with self._lock:
            if len(self._cache) >= n:
                return
            limit = max(1 << 16, 1 << (n - 1).bit_length())
            limit = min(max(limit, n), self._budget)
            if limit < n:
                raise LimitTooLarge(f"sieve to {n} exceeds budget {self._budget}")
            mu = moebius_sieve(limit, budget=self._budget)
            self._cache = self._lookup[mu[1:].astype(np.int64) + 1]

    def __getitem__(self, k: int) -> int:
        self._ensure(k + 1)
        return int(self._cache[k])

    def prefix(self, n: int) -> np.ndarray:
        self._ensure(n)
        return self._cache[:n]

    def descriptor(self) -> dict:
        return {"kind": "moebius", "coding": {str(k): v for k, v in self._coding.items()}}


class BernoulliStream(WeightStream):
    """I.i.d. symbols with distribution q, addressed by (seed, index)."""

    def __init__(self, q, seed: int):
        self._q = as_frequencies(q)
        self.N = len(self._q)
        self.seed = int(seed)
        self._edges = np.cumsum(self._q)

    def with_seed(self, seed: int) -> "BernoulliStream":
        return BernoulliStream(self._q, seed)

    @property
    def q(self) -> np.ndarray:
        return self._q

    def __getitem__(self, k: int) -> int:
        u = _uniform_at(self.seed, k)
        return int(min(np.searchsorted(self._edges, u, side="right"), self.N - 1))

    def prefix(self, n: int) -> np.ndarray:
        u = _uniform_block(self.seed, 0, n)
        return np.minimum(np.searchsorted(self._edges, u, side="right"), self.N - 1).astype(np.int64)

    def descriptor(self) -> dict:
        return {"kind": "bernoulli", "q": self._q.tolist(), "seed": self.seed}


class MarkovStream(WeightStream):
    """Markov chain sample path, deterministic in (matrices, seed, index).

    The chain state is inherently sequential, so random access materializes
    and caches the path up to the requested index; the cached path is still a
    pure function of the parameters and seed.
    """

    def __init__(self, transition, initial, seed: int):
        p = np.asarray(transition, dtype=float)
        pi0 = as_frequencies(initial)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] != len(pi0):
            raise ValueError("transition must be square and match the initial distribution")
        if (p < -1e-15).any() or (abs(p.sum(axis=1) - 1.0) > 1e-12).any():
            raise ValueError("transition rows must be probability vectors")
        self._transition = p
        self._initial = pi0
        self.N = p.shape[0]
        self.seed = int(seed)
        self._row_edges = np.cumsum(p, axis=1)
        self._init_edges = np.cumsum(pi0)
        self._path: list[int] = []
        self._lock = threading.Lock()

    def with_seed(self, seed: int) -> "MarkovStream":
        return MarkovStream(self._transition, self._initial, seed)

    def _extend(self, n: int) -> None:
        if len(self._path) >= n:
            return
        with self._lock:
            start = len(self._path)
            if start >= n:
                return
            u = _uniform_block(self.seed, start, n - start)
            for j, uj in enumerate(u):
                k = start + j
                edges = self._init_edges if k == 0 else self._row_edges[self._path[-1]]
                s = int(min(np.searchsorted(edges, uj, side="right"), self.N - 1))
                self._path.append(s)

    def __getitem__(self, k: int) -> int:
        self._extend(k + 1)
        return self._path[k]

    def prefix(self, n: int) -> np.ndarray:
        self._extend(n)
        return np.asarray(self._path[:n], dtype=np.int64)

    def descriptor(self) -> dict:
        return {
            "kind": "markov",
            "transition": self._transition.tolist(),
            "initial": self._initial.tolist(),
            "seed": self.seed,
        }


def stream_from_descriptor(data: dict) -> WeightStream:
    """Build a stream from its JSON descriptor (the CLI wire format)."""
    kind = data.get("kind")
    if kind == "explicit":
        return ExplicitStream(data["symbols"], N=data.get("N"))
    if kind == "periodic":
        return PeriodicStream(data["pattern"], N=data.get("N"))
    if kind == "moebius":
        coding = data.get("coding")
        if coding is not None:
            coding = {int(k): int(v) for k, v in coding.items()}
        return MoebiusStream(coding=coding)
    if kind == "bernoulli":
        return BernoulliStream(data["q"], seed=int(data.get("seed", 0)))
    if kind == "markov":
        return MarkovStream(data["transition"], data["initial"], seed=int(data.get("seed", 0)))
    raise ValueError(f"unknown stream kind {kind!r}")


def target_frequency(stream: WeightStream) -> FrequencyVector:
    """The frequency vector a stream is built to realize.

    Explicit/periodic streams report exact symbol counts, Bernoulli streams
    their parameter, Markov streams the stationary distribution, and the
    Moebius stream the squarefree densities (3/pi^2, 3/pi^2, 1 - 6/pi^2)
    arranged per its coding.
    """
    if isinstance(stream, ExplicitStream):
        counts = np.bincount(stream.prefix(len(stream)), minlength=stream.N)
        return FrequencyVector(counts / counts.sum())
    if isinstance(stream, PeriodicStream):
        pattern = stream.descriptor()["pattern"]
        counts = np.bincount(np.asarray(pattern), minlength=stream.N)
        return FrequencyVector(counts / counts.sum())
    if isinstance(stream, BernoulliStream):
        return FrequencyVector(stream.q)
    if isinstance(stream, MarkovStream):
        p = np.asarray(stream.descriptor()["transition"])
        n = p.shape[0]
        a = np.vstack([p.T - np.eye(n), np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        return FrequencyVector(np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum())
    if isinstance(stream, MoebiusStream):
        q = np.zeros(stream.N)
        coding = {int(k): v for k, v in stream.descriptor()["coding"].items()}
        q[coding[1]] = MOEBIUS_PLUSMINUS_DENSITY
        q[coding[-1]] = MOEBIUS_PLUSMINUS_DENSITY
        q[coding[0]] = MOEBIUS_ZERO_DENSITY
        return FrequencyVector(q)
    raise TypeError(f"no target frequency rule for {type(stream).__name__}")


def empirical_frequency(w: WeightStream, n: int) -> FrequencyVector:
    """Symbol frequencies over the first n positions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = np.bincount(w.prefix(n), minlength=w.N)
    return FrequencyVector(counts / n)


# ---------------------------------------------------------------------------
# Transport between frequency-regular streams

_HORIZON_FACTOR = 64


def _occurrence_map(w: WeightStream, w_prime: WeightStream, count: int,
                    horizon_factor: int = _HORIZON_FACTOR) -> np.ndarray:
    """gamma(k) for k < count: position in w_prime of the matching occurrence.

    If w[k] is the m-th occurrence of its symbol in w, gamma(k) is the
    position of the m-th occurrence of that symbol in w_prime.  w_prime is
    scanned in doubling chunks up to horizon_factor * count positions.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    a = w.prefix(count)
    needed = np.bincount(a, minlength=max(w.N, w_prime.N))
    horizon = horizon_factor * count
    if isinstance(w_prime, ExplicitStream):
        horizon = min(horizon, len(w_prime))
    scan = min(count, horizon)
    while True:
        b = w_prime.prefix(scan)
        have = np.bincount(b, minlength=len(needed))
        if (have >= needed).all():
            break
        if scan >= horizon:
            missing = int(np.argmax(needed - have))
            raise SymbolExhausted(
                f"symbol {missing} needs {int(needed[missing])} occurrences, "
                f"found {int(have[missing])} within horizon {horizon}"
            )
        scan = min(2 * scan, horizon)
    gamma = np.empty(count, dtype=np.int64)
    for s in range(len(needed)):
        if needed[s] == 0:
            continue
        pos_a = np.nonzero(a == s)[0]
        pos_b = np.nonzero(b == s)[0]
        gamma[pos_a] = pos_b[: len(pos_a)]
    return gamma


def transport_gamma(w: WeightStream, w_prime: WeightStream, k: int,
                    horizon_factor: int = _HORIZON_FACTOR) -> int:
    """Occurrence-matching index map; w[k] equals w_prime[gamma(k)]."""
    return int(_occurrence_map(w, w_prime, k + 1, horizon_factor)[k])


def transport_apply(w: WeightStream, w_prime: WeightStream, i: Sequence[int],
                    out_len: int, horizon_factor: int = _HORIZON_FACTOR):
    """The word (i[gamma(0)], ..., i[gamma(out_len - 1)]).

    Composing the transports in the two directions restores the original
    prefix on the overlap.
    """
    from .symbolic import Word

    gamma = _occurrence_map(w, w_prime, out_len, horizon_factor)
    required = int(gamma.max()) + 1
    if len(i) < required:
        raise PrefixTooShort(required, len(i))
    src = i.symbols if isinstance(i, Word) else tuple(i)
    return Word(tuple(src[g] for g in gamma))


def transport_mn(w: WeightStream, w_prime: WeightStream, n: int,
                 horizon_factor: int = _HORIZON_FACTOR) -> int:
    """Smallest m with {0, ..., n-1} contained in {gamma(0), ..., gamma(m-1)}.

    Always at least n; the ratio m_n / n tends to 1 for two streams realizing
    the same frequency vector.
    """
    # gamma_{w', w} is the inverse of gamma_{w, w'}, so the largest preimage
    # of a target below n determines m_n; injectivity forces m_n >= n.
    inverse = _occurrence_map(w_prime, w, n, horizon_factor)
    return int(inverse.max()) + 1
