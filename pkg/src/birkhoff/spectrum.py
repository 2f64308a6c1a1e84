"""The entropy spectrum of weighted Birkhoff averages.

A point of the spectrum at level alpha is the infimum over p of the
conditional pressure of <p, f - alpha>.  On the interior of the achievable
interval the infimum is attained, the minimizing p yields an explicit
product equilibrium measure, and the value can be cross-checked against the
constrained-entropy expression (duality).  The worked Moebius digit case has
its own closed form and serves as an independent code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, OutsideDomain
from .pressure import (
    NEG_INFINITY,
    MinimizeOptions,
    PotentialTable,
    Status,
    _as_vector,
    boundary_equilibrium,
    minimize_pressure,
    scalar_mean_range,
)
from .weights import (
    MOEBIUS_PLUSMINUS_DENSITY,
    MOEBIUS_ZERO_DENSITY,
    FrequencyVector,
    as_frequencies,
)


@dataclass(frozen=True)
class BernoulliJoint:
    """Product measure on (weight symbol, shift symbol) pairs.

    Row j sums to the weight marginal q_j; the whole matrix sums to 1.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 2:
            raise ValueError("probs must be an N x K matrix")
        if (arr < -1e-15).any():
            raise ValueError("probabilities must be non-negative")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def marginal(self) -> np.ndarray:
        """Weight-symbol marginal (row sums)."""
        return self.probs.sum(axis=1)

    def entropy(self) -> float:
        """Shannon entropy in nats, with 0 log 0 = 0."""
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(p)).sum())

    def mean(self, f: PotentialTable) -> np.ndarray:
        """Expectation of the potential under the joint measure."""
        return np.einsum("nk,nkd->d", self.probs, f.values)


@dataclass(frozen=True)
class SpectrumPoint:
    """One evaluated point of the spectrum."""

    alpha: np.ndarray
    p_star: Optional[np.ndarray]
    entropy: float
    status: Status
    equilibrium: Optional[BernoulliJoint]

    @property
    def alpha_scalar(self) -> float:
        return float(self.alpha[0])


def equilibrium_measure(q, f: PotentialTable, p_star, alpha) -> BernoulliJoint:
    """probs[j, i] = q_j exp(<p*, f_{j,i} - alpha>) / sum_i' exp(...).

    The weight marginal constraint holds by construction; at an interior
    minimizer the measure's mean of f equals alpha.
    """
    qa = as_frequencies(q)
    p = _as_vector(p_star, f.d)
    a = _as_vector(alpha, f.d)
    s = (f.values - a) @ p
    s -= s.max(axis=1, keepdims=True)
    e = np.exp(s)
    probs = qa[:, None] * e / e.sum(axis=1, keepdims=True)
    return BernoulliJoint(probs)


def spectrum_at(q, f: PotentialTable, alpha, opts: Optional[MinimizeOptions] = None) -> SpectrumPoint:
    """Entropy of the level set at alpha, with minimizer and equilibrium.

    The result depends on the weights only through their frequency vector:
    any frequency-regular realization shares the same spectrum.
    """
    qa = as_frequencies(q)
    a = _as_vector(alpha, f.d)
    res = minimize_pressure(qa, f, a, opts)
    if res.status == Status.INTERIOR:
        if f.d == 1:
            interval = scalar_mean_range(qa, f)
            scale = max(1.0, abs(interval.lo), abs(interval.hi))
            if interval.width <= 64 * np.finfo(float).eps * scale:
                # Only one achievable level; the whole shift realizes it.
                eq = equilibrium_measure(qa, f, np.zeros(1), a)
                return SpectrumPoint(a, np.zeros(1), res.value, Status.DEGENERATE_VERTEX, eq)
        eq = equilibrium_measure(qa, f, res.p_star, a)
        return SpectrumPoint(a, res.p_star, res.value, Status.INTERIOR, eq)
    if res.status == Status.BOUNDARY:
        eq = None
        if f.d == 1:
            interval = scalar_mean_range(qa, f)
            side = "lo" if float(a[0]) <= 0.5 * (interval.lo + interval.hi) else "hi"
            eq = BernoulliJoint(boundary_equilibrium(qa, f, side))
        return SpectrumPoint(a, None, res.value, Status.BOUNDARY, eq)
    return SpectrumPoint(a, None, NEG_INFINITY, Status.OUTSIDE, None)


def duality_gap(q, f: PotentialTable, alpha) -> float:
    """|constrained-entropy value - Legendre value| at the equilibrium.

    The equilibrium joint's entropy minus the weight-marginal entropy must
    reproduce the minimized pressure; the gap is the numerical discrepancy.
    """
    qa = as_frequencies(q)
    point = spectrum_at(qa, f, alpha)
    if point.status not in (Status.INTERIOR, Status.DEGENERATE_VERTEX):
        raise ValueError(f"duality gap requires an interior point, got {point.status}")
    joint = point.equilibrium.entropy()
    qpos = qa[qa > 0]
    marginal = float(-(qpos * np.log(qpos)).sum())
    return abs((joint - marginal) - point.entropy)


def spectrum_curve(q, f: PotentialTable, alpha_grid: Sequence[float],
                   opts: Optional[MinimizeOptions] = None) -> list[SpectrumPoint]:
    """Pointwise spectrum along a sorted grid of scalar levels.

    Each minimization warm-starts from the previous interior minimizer; this
    is a speedup only, cold starts give the same values to within 1e-10.
    """
    if f.d != 1:
        raise DimensionMismatch("spectrum_curve requires a scalar potential (d = 1)")
    grid = [float(a) for a in alpha_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha_grid must be sorted ascending")
    base = opts or MinimizeOptions()
    points: list[SpectrumPoint] = []
    prev_p = base.p0
    for a in grid:
        local = MinimizeOptions(
            grad_tol=base.grad_tol, p_max=base.p_max, max_iter=base.max_iter, p0=prev_p
        )
        pt = spectrum_at(q, f, a, local)
        points.append(pt)
        if pt.status == Status.INTERIOR:
            prev_p = pt.p_star
    return points


def status_runs(points: Sequence[SpectrumPoint]) -> list[tuple[Status, int]]:
    """Run-length encoding of statuses along a curve."""
    runs: list[tuple[Status, int]] = []
    for pt in points:
        if runs and runs[-1][0] == pt.status:
            runs[-1] = (pt.status, runs[-1][1] + 1)
        else:
            runs.append((pt.status, 1))
    return runs


def empirical_domain(points: Sequence[SpectrumPoint]) -> Optional[tuple[float, float]]:
    """Alpha range of the contiguous non-outside run, if any."""
    inside = [pt.alpha_scalar for pt in points if pt.status != Status.OUTSIDE]
    if not inside:
        return None
    return (inside[0], inside[-1])


# ---------------------------------------------------------------------------
# The Moebius digit example (closed form)

def moebius_weight_model(num_digits: int) -> tuple[FrequencyVector, PotentialTable]:
    """Frequencies and factored potential of the Moebius digit example.

    Weight symbols (0, 1, 2) code mu = (+1, -1, 0) and carry the squarefree
    densities; the potential is lambda = (1, -1, 0) times the digit value.
    """
    if num_digits < 2:
        raise ValueError("num_digits must be >= 2")
    q = FrequencyVector(
        [MOEBIUS_PLUSMINUS_DENSITY, MOEBIUS_PLUSMINUS_DENSITY, MOEBIUS_ZERO_DENSITY]
    )
    table = PotentialTable.from_factored(
        [1.0, -1.0, 0.0], np.arange(num_digits, dtype=float)
    )
    return q, table


def _digit_logsumexp(p: float, m: int) -> float:
    """log sum_{i=0}^{m-1} e^{p i}, the log of the geometric kernel."""
    s = p * np.arange(m)
    mx = s.max()
    return float(mx + np.log(np.exp(s - mx).sum()))


def _digit_mean(p: float, m: int) -> float:
    """Mean of i under weights e^{p i}, i = 0..m-1."""
    s = p * np.arange(m)
    s -= s.max()
    e = np.exp(s)
    return float((np.arange(m) * e).sum() / e.sum())


def _digit_var(p: float, m: int) -> float:
    s = p * np.arange(m)
    s -= s.max()
    e = np.exp(s)
    w = e / e.sum()
    mu = float((np.arange(m) * w).sum())
    return float(((np.arange(m) - mu) ** 2 * w).sum())


def moebius_digit_spectrum(num_digits: int, alpha: float) -> tuple[float, float]:
    """Closed-form spectrum of the Moebius digit example at level alpha.

    Solves the scalar stationarity condition

        c * (mean_digit(p) - mean_digit(-p)) = alpha,   c = 3 / pi^2,

    by bisection plus Newton to 1e-12 and evaluates

        h = (1 - 6/pi^2) log M + (6/pi^2) log((e^{pM}-1)/(e^p-1))
            - ((M-1) 3/pi^2 + alpha) p,

    with the middle term computed as a log-sum-exp.  At the endpoints
    +/- (M-1) 3/pi^2 the limit (1 - 6/pi^2) log M is returned with p = +/-inf.
    """
    if num_digits < 2:
        raise ValueError("num_digits must be >= 2")
    m = num_digits
    c = MOEBIUS_PLUSMINUS_DENSITY
    edge = (m - 1) * c
    if alpha < -edge or alpha > edge:
        raise OutsideDomain(f"alpha = {alpha} outside [{-edge}, {edge}]")
    if alpha == -edge or alpha == edge:
        return MOEBIUS_ZERO_DENSITY * math.log(m), math.copysign(math.inf, alpha)

    target = alpha / c

    def g(p: float) -> float:
        return _digit_mean(p, m) - _digit_mean(-p, m)

    # g is odd and strictly increasing with limits -(m-1), m-1: bracket by doubling.
    lo, hi = -1.0, 1.0
    while g(lo) > target:
        lo *= 2
    while g(hi) < target:
        hi *= 2
    p = 0.5 * (lo + hi)
    for _ in range(200):
        val = g(p) - target
        if val > 0:
            hi = p
        else:
            lo = p
        slope = _digit_var(p, m) + _digit_var(-p, m)
        p_new = p - val / slope if slope > 0 else 0.5 * (lo + hi)
        if not (lo < p_new < hi):
            p_new = 0.5 * (lo + hi)
        if abs(p_new - p) <= 1e-12 * max(1.0, abs(p)):
            p = p_new
            break
        p = p_new
    h = (
        MOEBIUS_ZERO_DENSITY * math.log(m)
        + 2.0 * c * _digit_logsumexp(p, m)
        - (edge + alpha) * p
    )
    return h, p
