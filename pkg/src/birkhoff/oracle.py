"""Independent verification by counting: enumeration and bucketed DP.

These routines count admissible words whose weighted averages satisfy window
constraints, entirely independently of the pressure/Legendre machinery, so
they can serve as a brute-force oracle for the predicted spectrum values.
Counts are exact big integers; exponents (1/n) log(count) are derived from
bit lengths so arbitrarily large counts never overflow.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BucketRangeOverflow, CapExceeded, DegeneratePotential, DimensionMismatch
from .pressure import NEG_INFINITY, PotentialTable, Status, _prefix_array
from .spectrum import spectrum_at
from .symbolic import SftSpec, count_admissible
from .weights import WeightStream, as_frequencies


def log_bigint(x: int) -> float:
    """Natural log of a positive big integer via bit length + mantissa."""
    if x <= 0:
        raise ValueError("log_bigint needs a positive integer")
    b = x.bit_length()
    if b <= 512:
        return math.log(x)
    shift = b - 64
    return math.log(x >> shift) + shift * math.log(2.0)


@dataclass(frozen=True)
class CountResult:
    """Window count at one scale with its growth exponent."""

    n: int
    epsilon: float
    count: int
    exponent: float
    average_slack: float = 0.0  # bucketed-DP drift bound on the tested average


@dataclass
class DpConfig:
    """Counting configuration.

    mode "exact" enumerates words (depth-first) and requires the admissible
    count to stay under `cap`; mode "dp" buckets partial sums with width
    `bucket_width` (default epsilon / 8) and merges states losslessly as
    long as the width stays below the achievable-sum gap.
    """

    mode: str = "dp"
    bucket_width: Optional[float] = None
    cap: int = 1 << 21
    bucket_limit: int = 20_000_000

    def resolved_width(self, epsilon: float) -> float:
        return self.bucket_width if self.bucket_width is not None else epsilon / 8.0


def _scalar_values(f: PotentialTable) -> np.ndarray:
    if f.d != 1:
        raise DimensionMismatch("counting oracles need a scalar potential (d = 1)")
    return f.values[:, :, 0]


def _neighbors(spec: SftSpec) -> list[tuple[int, ...]]:
    a = spec.adjacency
    return [tuple(int(t) for t in np.nonzero(a[s])[0]) for s in range(spec.K)]


def _exact_count(spec: SftSpec, vals: np.ndarray, w: np.ndarray, n: int,
                 accept) -> int:
    """DFS over admissible words; `accept(depth, sum)` tests complete words
    and checkpoints.  Returns the number of accepted words."""
    nbrs = _neighbors(spec)
    row0 = vals[w[0]]
    count = 0
    # stack entries: (next depth to fill, last symbol, running sum, alive)
    stack = [(1, i, float(row0[i]), True) for i in range(spec.K - 1, -1, -1)]
    while stack:
        depth, sym, s, alive = stack.pop()
        alive = alive and accept(depth, s)
        if depth == n:
            count += 1 if alive else 0
            continue
        if not alive:  # a failed checkpoint kills the whole subtree
            continue
        row = vals[w[depth]]
        for t in nbrs[sym]:
            stack.append((depth + 1, t, s + float(row[t]), alive))
    return count


def _dp_states(spec: SftSpec, vals: np.ndarray, w: np.ndarray, start_states: dict,
               start: int, stop: int, width: float) -> dict:
    """Advance bucketed-DP states over positions [start, stop).

    States map (last symbol, bucket index) to [count, representative sum];
    the representative is the smallest member sum, an exact float path sum.
    """
    inv = 1.0 / width
    nbrs = _neighbors(spec)
    states = start_states
    for k in range(start, stop):
        row = vals[w[k]]
        new: dict = {}
        for (sym, _), (cnt, rep) in states.items():
            for t in nbrs[sym]:
                r = rep + float(row[t])
                key = (t, round(r * inv))
                cur = new.get(key)
                if cur is None:
                    new[key] = [cnt, r]
                else:
                    cur[0] += cnt
                    if r < cur[1]:
                        cur[1] = r
        states = new
    return states


def _dp_initial(spec: SftSpec, vals: np.ndarray, w: np.ndarray, width: float) -> dict:
    inv = 1.0 / width
    states: dict = {}
    row = vals[w[0]]
    for i in range(spec.K):
        r = float(row[i])
        key = (i, round(r * inv))
        cur = states.get(key)
        if cur is None:
            states[key] = [1, r]
        else:
            cur[0] += 1
            if r < cur[1]:
                cur[1] = r
    return states


def _check_bucket_range(vals: np.ndarray, n: int, width: float, limit: int) -> None:
    spread = float(vals.max() - vals.min())
    if spread > 0 and n * spread / width > limit:
        raise BucketRangeOverflow(
            f"{n * spread / width:.3g} buckets would exceed the limit {limit}"
        )


def _make_result(count: int, n: int, epsilon: float, slack: float) -> CountResult:
    exponent = log_bigint(count) / n if count > 0 else NEG_INFINITY
    return CountResult(n=n, epsilon=epsilon, count=count, exponent=exponent,
                       average_slack=slack)


def level_set_count(spec: SftSpec, f: PotentialTable, w_prefix, alpha: float,
                    epsilon: float, n: int, cfg: Optional[DpConfig] = None) -> CountResult:
    """Count admissible words with |(1/n) sum_k f_{w_k, i_k} - alpha| <= epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = cfg or DpConfig()
    vals = _scalar_values(f)
    w = _prefix_array(w_prefix, n)
    if cfg.mode == "exact":
        total = count_admissible(spec, n)
        if total > cfg.cap:
            raise CapExceeded(total, cfg.cap)

        def accept(depth: int, s: float) -> bool:
            return depth < n or abs(s / n - alpha) <= epsilon

        count = _exact_count(spec, vals, w, n, accept)
        return _make_result(count, n, epsilon, 0.0)
    if cfg.mode != "dp":
        raise ValueError(f"unknown mode {cfg.mode!r}")
    width = cfg.resolved_width(epsilon)
    _check_bucket_range(vals, n, width, cfg.bucket_limit)
    states = _dp_initial(spec, vals, w, width)
    states = _dp_states(spec, vals, w, states, 1, n, width)
    count = sum(cnt for (_, _), (cnt, rep) in states.items()
                if abs(rep / n - alpha) <= epsilon)
    return _make_result(count, n, epsilon, width)


def two_scale_count(spec: SftSpec, f: PotentialTable, w_prefix, alpha1: float,
                    alpha2: float, epsilon: float, n1: int, n2: int,
                    cfg: Optional[DpConfig] = None) -> CountResult:
    """Count words whose running average is epsilon-close to alpha1 at n1 and
    to alpha2 at n2; a finite-scale probe of oscillating averages."""
    if not 0 < n1 < n2:
        raise ValueError("need 0 < n1 < n2")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cfg = cfg or DpConfig()
    vals = _scalar_values(f)
    w = _prefix_array(w_prefix, n2)
    if cfg.mode == "exact":
        total = count_admissible(spec, n2)
        if total > cfg.cap:
            raise CapExceeded(total, cfg.cap)

        def accept(depth: int, s: float) -> bool:
            if depth == n1 and abs(s / n1 - alpha1) > epsilon:
                return False
            if depth == n2:
                return abs(s / n2 - alpha2) <= epsilon
            return True

        count = _exact_count(spec, vals, w, n2, accept)
        return _make_result(count, n2, epsilon, 0.0)
    width = cfg.resolved_width(epsilon)
    _check_bucket_range(vals, n2, width, cfg.bucket_limit)
    states = _dp_initial(spec, vals, w, width)
    states = _dp_states(spec, vals, w, states, 1, n1, width)
    states = {key: val for key, val in states.items()
              if abs(val[1] / n1 - alpha1) <= epsilon}
    states = _dp_states(spec, vals, w, states, n1, n2, width)
    count = sum(cnt for (_, _), (cnt, rep) in states.items()
                if abs(rep / n2 - alpha2) <= epsilon)
    return _make_result(count, n2, epsilon, width)


def partial_sum_lattice(spec: SftSpec, f: PotentialTable, w_prefix, n: int) -> list[np.ndarray]:
    """Achievable partial sums at every length 1..n (small instances only).

    Used to compute the minimum nonzero gap below which the bucketed DP is
    provably lossless.
    """
    vals = _scalar_values(f)
    w = _prefix_array(w_prefix, n)
    nbrs = _neighbors(spec)
    per_symbol: dict[int, set] = {i: {float(vals[w[0]][i])} for i in range(spec.K)}
    out = [np.unique(np.array(sorted(set().union(*per_symbol.values()))))]
    for k in range(1, n):
        row = vals[w[k]]
        new: dict[int, set] = {i: set() for i in range(spec.K)}
        for sym, sums in per_symbol.items():
            for t in nbrs[sym]:
                vt = float(row[t])
                new[t].update(s + vt for s in sums)
        per_symbol = new
        out.append(np.unique(np.array(sorted(set().union(*per_symbol.values())))))
    return out


def min_lattice_gap(lattice: Sequence[np.ndarray]) -> float:
    """Smallest nonzero gap between achievable partial sums at any length."""
    gap = math.inf
    for sums in lattice:
        if len(sums) > 1:
            diffs = np.diff(sums)
            diffs = diffs[diffs > 0]
            if len(diffs):
                gap = min(gap, float(diffs.min()))
    return gap


# ---------------------------------------------------------------------------
# Spectrum verification schedules

@dataclass(frozen=True)
class ScheduleEntry:
    n: int
    epsilon: float
    count: int
    exponent: float
    slack_lower: float
    slack_upper: float
    within_band: bool


@dataclass(frozen=True)
class ScheduleReport:
    alpha: float
    predicted: float
    prediction_status: Status
    p_star_norm: float
    entries: tuple
    all_within: bool


def empirical_spectrum_check(q, f: PotentialTable, w: WeightStream, alpha: float,
                             schedule: Sequence[tuple], spec: Optional[SftSpec] = None,
                             cfg: Optional[DpConfig] = None, slack_const: float = 5.0,
                             max_workers: int = 1) -> ScheduleReport:
    """Compare counting exponents against the predicted spectrum value.

    For each (n, epsilon) the exponent is an upper bound for the prediction
    up to epsilon * |p*| (window widening) plus an O(log n / n) term
    (lattice effects); the band below the prediction is the O(log n / n)
    term alone.  No sharper finite-scale rate is claimed.  Schedule entries
    are independent and run on up to max_workers threads, reported in
    schedule order.
    """
    qa = as_frequencies(q)
    spec = spec or SftSpec.full_shift(f.K)
    point = spectrum_at(qa, f, alpha)
    if point.status not in (Status.INTERIOR, Status.DEGENERATE_VERTEX):
        raise ValueError(f"prediction at alpha = {alpha} is {point.status}, nothing to verify")
    predicted = point.entropy
    pnorm = float(np.linalg.norm(point.p_star))

    def run(entry):
        n, eps = entry
        return level_set_count(spec, f, w, alpha, eps, int(n), cfg)

    if max_workers > 1 and len(schedule) > 1:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=min(max_workers, len(schedule))
        ) as pool:
            results = list(pool.map(run, schedule))
    else:
        results = [run(entry) for entry in schedule]

    entries = []
    all_ok = True
    for (n, eps), res in zip(schedule, results):
        wobble = slack_const * math.log(n + 1) / n
        upper = eps * pnorm + wobble + res.average_slack * pnorm
        lower = wobble
        ok = (predicted - lower) <= res.exponent <= (predicted + upper)
        all_ok = all_ok and ok
        entries.append(ScheduleEntry(int(n), float(eps), res.count, res.exponent,
                                     lower, upper, ok))
    return ScheduleReport(alpha=float(alpha), predicted=predicted,
                          prediction_status=point.status, p_star_norm=pnorm,
                          entries=tuple(entries), all_within=all_ok)


# ---------------------------------------------------------------------------
# The degenerate block-weight example

@dataclass(frozen=True)
class DegenerateReport:
    phi: tuple
    growth: int
    m0: int
    alpha: float
    block_fraction_p: Optional[float]
    predicted_liminf: float
    full_entropy: float
    residual_ratio: float
    results: tuple  # CountResult at scales M_j and 2 M_j


def degenerate_block_weights(m_values: Sequence[int], length: int) -> np.ndarray:
    """0/1 weight sequence with w[k] = 1 exactly on [M_j, 2 M_j)."""
    w = np.zeros(length, dtype=np.int64)
    for m in m_values:
        if m < length:
            w[m:min(2 * m, length)] = 1
    return w


def degenerate_weight_example(phi: tuple, growth: int = 4, m0: int = 64,
                              n_blocks: int = 3, alpha: float = 0.0,
                              epsilon: Optional[float] = None,
                              cfg: Optional[DpConfig] = None) -> DegenerateReport:
    """Block weights with geometrically growing runs of ones.

    At the scales 2 M_j the constrained block forces the zero-digit fraction
    phi1 / (phi1 - phi0), so the counting exponent approaches
    (1/2) log 2 + (1/2) H(phi1 / (phi1 - phi0)), strictly below log 2 unless
    |phi0| = |phi1|.  The sum of earlier block lengths over M_j only decays
    like 1/(growth - 2); the residual ratio is reported alongside.
    """
    phi0, phi1 = float(phi[0]), float(phi[1])
    if phi0 == phi1:
        raise DegeneratePotential("phi must take two distinct values")
    if growth < 2:
        raise ValueError("growth must be >= 2")
    m_values = [m0 * growth**j for j in range(n_blocks)]
    length = 2 * m_values[-1]
    w = degenerate_block_weights(m_values, length)
    table = PotentialTable.from_factored([0.0, 1.0], [phi0, phi1])
    spec = SftSpec.full_shift(2)
    results = []
    for m in m_values:
        for n in (m, 2 * m):
            eps = epsilon if epsilon is not None else 0.5 / math.sqrt(n)
            results.append(level_set_count(spec, table, w, alpha, eps, n, cfg))
    if phi0 * phi1 <= 0:
        p = phi1 / (phi1 - phi0)
        h_block = 0.0
        for t in (p, 1.0 - p):
            if t > 0:
                h_block -= t * math.log(t)
        predicted = 0.5 * math.log(2.0) + 0.5 * h_block
    else:
        p = None
        predicted = NEG_INFINITY  # level 0 is unreachable at the block scales
    residual = sum(m_values[:-1]) / m_values[-1] if n_blocks > 1 else 0.0
    return DegenerateReport(
        phi=(phi0, phi1), growth=growth, m0=m0, alpha=alpha,
        block_fraction_p=p, predicted_liminf=predicted,
        full_entropy=math.log(2.0), residual_ratio=residual,
        results=tuple(results),
    )


# ---------------------------------------------------------------------------
# Entropy additivity of product measures

def product_entropy_check(nu, m) -> float:
    """|H(nu x m) - H(nu) - H(m)| for probability vectors, with 0 log 0 = 0."""
    a = as_frequencies(nu)
    b = as_frequencies(m)

    def h(v: np.ndarray) -> float:
        v = v[v > 0]
        return float(-(v * np.log(v)).sum())

    return abs(h(np.outer(a, b).ravel()) - h(a) - h(b))
