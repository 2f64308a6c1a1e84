"""Conditional pressure for i.i.d. weight marginals and its minimization.

For a first-coordinate potential f_{j,i} in R^d, weight frequencies q and
level alpha, the pressure is

    P(p) = sum_j q_j * log sum_i exp(<p, f_{j,i} - alpha>),

a smooth convex function of p whose infimum over R^d is the entropy of the
corresponding level set.  This module evaluates P with its derivatives,
minimizes it (damped Newton, plus bracketed Newton-bisection on the scalar
derivative when d = 1), and estimates the general conditional pressure by
Monte Carlo over finite partition sums Z_n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DegeneratePotential,
    DimensionMismatch,
    MaxIterations,
    PrefixTooShort,
)
from .symbolic import SftSpec
from .weights import WeightStream, as_frequencies, _mix64_int, _MASK64, _GAMMA64

NEG_INFINITY = float("-inf")


class Status(str, Enum):
    """Classification of a pressure minimization / spectrum point."""

    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"
    DEGENERATE_VERTEX = "degenerate-vertex"


# ---------------------------------------------------------------------------
# Potential tables

class PotentialTable:
    """Values f_{j,i} in R^d indexed by weight symbol j and shift symbol i.

    Optionally carries a factored form f_{j,i} = lambda_j * phi_i (d = 1);
    the dense table is always materialized and is the source of truth.
    """

    def __init__(self, values, factored: Optional[tuple] = None):
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError("values must have shape (N, K) or (N, K, d)")
        if not np.isfinite(arr).all():
            raise ValueError("potential values must be finite")
        self.values = arr
        self.values.setflags(write=False)
        self.N, self.K, self.d = arr.shape
        if factored is not None:
            lam = np.asarray(factored[0], dtype=float)
            phi = np.asarray(factored[1], dtype=float)
            if self.d != 1 or lam.shape != (self.N,) or phi.shape != (self.K,):
                raise ValueError("factored form must be (lambda[N], phi[K]) with d = 1")
            if not np.allclose(arr[:, :, 0], np.outer(lam, phi), rtol=0, atol=1e-12):
                raise ValueError("dense table does not match the factored form")
            self._lam, self._phi = lam, phi
            self._lam.setflags(write=False)
            self._phi.setflags(write=False)
        else:
            self._lam = self._phi = None

    @classmethod
    def from_factored(cls, lam: Sequence[float], phi: Sequence[float]) -> "PotentialTable":
        lam = np.asarray(lam, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return cls(np.outer(lam, phi)[:, :, None], factored=(lam, phi))

    @property
    def factored(self) -> Optional[tuple]:
        if self._lam is None:
            return None
        return self._lam, self._phi

    def to_json(self) -> str:
        fac = None
        if self._lam is not None:
            fac = {"lambda": self._lam.tolist(), "phi": self._phi.tolist()}
        return json.dumps(
            {"N": self.N, "K": self.K, "d": self.d, "values": self.values.tolist(),
             "factored": fac}
        )

    @classmethod
    def from_json(cls, text: str) -> "PotentialTable":
        data = json.loads(text)
        fac = data.get("factored")
        if fac is not None:
            table = cls.from_factored(fac["lambda"], fac["phi"])
        else:
            table = cls(data["values"])
        for name in ("N", "K", "d"):
            if name in data and data[name] != getattr(table, name):
                raise ValueError(f"declared {name}={data[name]} inconsistent with values")
        return table

    def __repr__(self) -> str:
        return f"PotentialTable(N={self.N}, K={self.K}, d={self.d})"


@dataclass(frozen=True)
class PressureEval:
    """Pressure value (nats) with gradient and hessian in p."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class PressureEstimate:
    """Monte-Carlo estimate of the conditional pressure from Z_n samples."""

    n: int
    samples: int
    mean: float
    stderr: float


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class MinimizeOptions:
    grad_tol: float = 1e-10
    p_max: float = 1e3
    max_iter: int = 200
    p0: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MinimizeResult:
    status: Status
    p_star: Optional[np.ndarray]
    value: float
    eval: Optional[PressureEval]
    iterations: int


# ---------------------------------------------------------------------------
# Closed-form pressure

def _check_dims(qa: np.ndarray, table: PotentialTable, p: np.ndarray, alpha: np.ndarray):
    if len(qa) != table.N:
        raise DimensionMismatch(f"|q| = {len(qa)} but table has N = {table.N}")
    if p.shape != (table.d,) or alpha.shape != (table.d,):
        raise DimensionMismatch(
            f"p and alpha must have dimension d = {table.d}, got {p.shape} and {alpha.shape}"
        )


def _as_vector(x, d: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape == (1,) and d > 1:
        arr = np.full(d, arr[0])
    return arr


def pressure_iid(q, f: PotentialTable, p, alpha) -> PressureEval:
    """Evaluate P(p) = sum_j q_j log sum_i e^{<p, f_{j,i} - alpha>}.

    Uses max-subtraction inside each inner sum, so the evaluation stays
    finite for |p| * max|f| up to around 1e4.  The gradient is the
    q-average of the per-row softmax means of (f - alpha); the hessian is
    the q-average of the per-row softmax covariances.
    """
    qa = as_frequencies(q)
    p = _as_vector(p, f.d)
    alpha = _as_vector(alpha, f.d)
    _check_dims(qa, f, p, alpha)
    z = f.values - alpha              # (N, K, d)
    s = z @ p                         # (N, K)
    m = s.max(axis=1, keepdims=True)
    e = np.exp(s - m)
    total = e.sum(axis=1)             # (N,)
    lse = m[:, 0] + np.log(total)
    value = float(qa @ lse)
    pi = e / total[:, None]           # per-row softmax weights
    row_mean = np.einsum("nk,nkd->nd", pi, z)
    gradient = qa @ row_mean
    row_sq = np.einsum("nk,nkd,nke->nde", pi, z, z)
    hessian = np.einsum("n,nde->de", qa, row_sq) - np.einsum(
        "n,nd,ne->de", qa, row_mean, row_mean
    )
    return PressureEval(value, gradient, 0.5 * (hessian + hessian.T))


def domain_interval(q, lam, phi) -> Interval:
    """Achievable-level interval for the factored potential lambda_j phi_i.

    [phi_min S+ + phi_max S-, phi_max S+ + phi_min S-] with S+/- the sums of
    q_j lambda_j over positive/negative lambda_j.  Degenerates to a point
    only when sum_j q_j |lambda_j| = 0; a constant phi is rejected.
    """
    qa = as_frequencies(q)
    lam = np.asarray(lam, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if len(lam) != len(qa):
        raise DimensionMismatch("lambda must match q in length")
    phi_min, phi_max = float(phi.min()), float(phi.max())
    if phi_min == phi_max:
        raise DegeneratePotential("phi is constant; no non-trivial interval exists")
    ql = qa * lam
    s_pos = float(ql[lam > 0].sum())
    s_neg = float(ql[lam < 0].sum())
    return Interval(phi_min * s_pos + phi_max * s_neg, phi_max * s_pos + phi_min * s_neg)


def scalar_mean_range(q, f: PotentialTable) -> Interval:
    """Range of achievable means sum_j q_j f_{j, i_j} for a d = 1 table.

    For factored tables this reproduces domain_interval bit-for-bit, so grid
    endpoints built from one agree with classifications from the other.
    """
    qa = as_frequencies(q)
    if f.d != 1:
        raise DimensionMismatch("scalar_mean_range needs d = 1")
    if f.factored is not None:
        lam, phi = f.factored
        if float(phi.min()) == float(phi.max()):
            lo = hi = float((qa * lam).sum()) * float(phi[0])
            return Interval(lo, hi)
        return domain_interval(qa, lam, phi)
    vals = f.values[:, :, 0]
    return Interval(float(qa @ vals.min(axis=1)), float(qa @ vals.max(axis=1)))


def _boundary_value(qa: np.ndarray, f: PotentialTable, side: str) -> float:
    """Limit of P(p) - p*alpha as p -> +/-inf at the matching endpoint.

    Equals sum_j q_j log(#argmax_i f_{j,i}) at the right endpoint (argmin at
    the left): the optimizing measure flattens onto the extremal symbols.
    """
    vals = f.values[:, :, 0]
    if side == "lo":
        extreme = vals.min(axis=1, keepdims=True)
        ties = vals <= extreme + 1e-12 * np.maximum(1.0, np.abs(extreme))
    else:
        extreme = vals.max(axis=1, keepdims=True)
        ties = vals >= extreme - 1e-12 * np.maximum(1.0, np.abs(extreme))
    counts = ties.sum(axis=1)
    return float(qa @ np.log(counts))


def boundary_equilibrium(qa: np.ndarray, f: PotentialTable, side: str) -> np.ndarray:
    """Limiting equilibrium joint measure at an endpoint: q_j spread uniformly
    over the per-row extremal symbols."""
    vals = f.values[:, :, 0]
    if side == "lo":
        extreme = vals.min(axis=1, keepdims=True)
        ties = vals <= extreme + 1e-12 * np.maximum(1.0, np.abs(extreme))
    else:
        extreme = vals.max(axis=1, keepdims=True)
        ties = vals >= extreme - 1e-12 * np.maximum(1.0, np.abs(extreme))
    probs = ties / ties.sum(axis=1, keepdims=True)
    return qa[:, None] * probs


# ---------------------------------------------------------------------------
# Minimization

def _minimize_scalar(qa, f, alpha, opts: MinimizeOptions) -> MinimizeResult:
    interval = scalar_mean_range(qa, f)
    lo, hi = interval.lo, interval.hi
    scale = max(1.0, abs(lo), abs(hi))
    btol = 64 * np.finfo(float).eps * scale
    a = float(alpha[0])

    if hi - lo <= btol:
        # Degenerate table: the pressure is affine in p.
        if abs(a - lo) <= btol:
            ev = pressure_iid(qa, f, np.zeros(1), alpha)
            return MinimizeResult(Status.INTERIOR, np.zeros(1), ev.value, ev, 0)
        return MinimizeResult(Status.OUTSIDE, None, NEG_INFINITY, None, 0)
    if a < lo - btol or a > hi + btol:
        return MinimizeResult(Status.OUTSIDE, None, NEG_INFINITY, None, 0)
    if abs(a - lo) <= btol:
        return MinimizeResult(Status.BOUNDARY, None, _boundary_value(qa, f, "lo"), None, 0)
    if abs(a - hi) <= btol:
        return MinimizeResult(Status.BOUNDARY, None, _boundary_value(qa, f, "hi"), None, 0)

    def deriv(p: float) -> tuple:
        ev = pressure_iid(qa, f, np.array([p]), alpha)
        return ev, float(ev.gradient[0]), float(ev.hessian[0, 0])

    iterations = 0
    p = float(opts.p0[0]) if opts.p0 is not None else 0.0
    p = min(max(p, -opts.p_max), opts.p_max)
    ev, g, h = deriv(p)
    if abs(g) <= opts.grad_tol:
        return MinimizeResult(Status.INTERIOR, np.array([p]), ev.value, ev, iterations)

    # Bracket the root of the (strictly increasing) derivative by doubling.
    step = 1.0
    if g > 0:
        b_p, b_g = p, g
        a_p = p - step
        _, a_g, _ = deriv(a_p)
        while a_g > 0:
            iterations += 1
            step *= 2
            a_p -= step
            if a_p < -opts.p_max:
                # alpha is interior; at p_max the derivative should have
                # crossed.  Hitting the cap means alpha is numerically glued
                # to the endpoint: fall back to the boundary limit.
                return MinimizeResult(
                    Status.BOUNDARY, None, _boundary_value(qa, f, "lo"), None, iterations
                )
            _, a_g, _ = deriv(a_p)
    else:
        a_p, a_g = p, g
        b_p = p + step
        _, b_g, _ = deriv(b_p)
        while b_g < 0:
            iterations += 1
            step *= 2
            b_p += step
            if b_p > opts.p_max:
                return MinimizeResult(
                    Status.BOUNDARY, None, _boundary_value(qa, f, "hi"), None, iterations
                )
            _, b_g, _ = deriv(b_p)

    # Newton from the better bracket endpoint, safeguarded by bisection.
    p = a_p if abs(a_g) < abs(b_g) else b_p
    ev, g, h = deriv(p)
    best = (abs(g), p, ev)
    while iterations < opts.max_iter:
        iterations += 1
        if abs(g) <= opts.grad_tol:
            return MinimizeResult(Status.INTERIOR, np.array([p]), ev.value, ev, iterations)
        if g > 0:
            b_p = p
        else:
            a_p = p
        p_new = p - g / h if h > 0 else None
        if p_new is None or not (a_p < p_new < b_p):
            p_new = 0.5 * (a_p + b_p)
        if p_new == p:  # interval collapsed to machine precision
            return MinimizeResult(Status.INTERIOR, np.array([p]), ev.value, ev, iterations)
        p = p_new
        ev, g, h = deriv(p)
        if abs(g) < best[0]:
            best = (abs(g), p, ev)
    raise MaxIterations(
        f"scalar Newton--bisection did not reach |P'| <= {opts.grad_tol} "
        f"in {opts.max_iter} iterations (best |P'| = {best[0]:.3e})",
        p_best=np.array([best[1]]),
        eval_best=best[2],
    )


def _newton_direction(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve (H + eta I) s = -g with the smallest ridge that makes H
    numerically positive definite.

    The ridge is probed by Cholesky attempts (cheap for d <= 3); a
    diagonal-dominance bound would over-regularize ill-conditioned hessians
    and stall the iteration.
    """
    d = h.shape[0]
    scale = max(1.0, float(np.abs(h).max()))
    eta = 0.0
    for _ in range(40):
        try:
            np.linalg.cholesky(h + eta * np.eye(d))
            return np.linalg.solve(h + eta * np.eye(d), -g)
        except np.linalg.LinAlgError:
            eta = max(1e-12 * scale, 10.0 * eta)
    return -g


def _minimize_newton(qa, f, alpha, opts: MinimizeOptions) -> MinimizeResult:
    d = f.d
    p = np.zeros(d) if opts.p0 is None else np.asarray(opts.p0, dtype=float).copy()
    ev = pressure_iid(qa, f, p, alpha)
    best = (float(np.linalg.norm(ev.gradient)), p.copy(), ev)
    history: list[tuple[float, float]] = []  # (value, grad norm) of recent iterates
    for it in range(1, opts.max_iter + 1):
        gnorm = float(np.linalg.norm(ev.gradient))
        if gnorm <= opts.grad_tol:
            return MinimizeResult(Status.INTERIOR, p, ev.value, ev, it - 1)
        history.append((ev.value, gnorm))
        if float(np.linalg.norm(p)) > opts.p_max:
            recent = history[-10:]
            value_drop = recent[0][0] - recent[-1][0]
            grad_floor = min(g for _, g in recent)
            if value_drop <= 1e-10 * (1.0 + abs(ev.value)) and grad_floor > opts.grad_tol:
                # Value converged while the gradient stalls: endpoint of the
                # achievable set.  Report the best monotone value.
                return MinimizeResult(Status.BOUNDARY, None, ev.value, None, it - 1)
            return MinimizeResult(Status.OUTSIDE, None, NEG_INFINITY, None, it - 1)
        step = _newton_direction(ev.hessian, ev.gradient)
        t = 1.0
        noise = 1e-15 * (1.0 + abs(ev.value))  # rounding floor near the optimum
        for _ in range(60):
            cand = p + t * step
            ev_cand = pressure_iid(qa, f, cand, alpha)
            if ev_cand.value <= ev.value + 1e-4 * t * float(ev.gradient @ step) + noise:
                break
            t *= 0.5
        p = p + t * step
        ev = ev_cand
        gn = float(np.linalg.norm(ev.gradient))
        if gn < best[0]:
            best = (gn, p.copy(), ev)
    raise MaxIterations(
        f"Newton did not reach |grad| <= {opts.grad_tol} in {opts.max_iter} iterations "
        f"(best |grad| = {best[0]:.3e})",
        p_best=best[1],
        eval_best=best[2],
    )


def minimize_pressure(q, f: PotentialTable, alpha, opts: Optional[MinimizeOptions] = None) -> MinimizeResult:
    """inf_p P(p) with status classification.

    Interior: a finite minimizer with gradient below tolerance.  Outside:
    the infimum is -infinity (alpha not achievable).  Boundary: alpha sits
    on the edge of the achievable set; for d = 1 the limiting value
    sum_j q_j log(#extremal symbols) is returned analytically.
    """
    opts = opts or MinimizeOptions()
    qa = as_frequencies(q)
    alpha = _as_vector(alpha, f.d)
    _check_dims(qa, f, np.zeros(f.d), alpha)
    if f.d == 1:
        return _minimize_scalar(qa, f, alpha, opts)
    return _minimize_newton(qa, f, alpha, opts)


# ---------------------------------------------------------------------------
# Finite partition sums over a weight prefix

def _prefix_array(w_prefix, n: int) -> np.ndarray:
    if isinstance(w_prefix, WeightStream):
        return w_prefix.prefix(n)
    arr = np.asarray(
        w_prefix.symbols if hasattr(w_prefix, "symbols") else w_prefix, dtype=np.int64
    )
    if len(arr) < n:
        raise PrefixTooShort(n, len(arr))
    return arr[:n]


def _log_zn_batch(spec: SftSpec, f: PotentialTable, p: np.ndarray, alpha: np.ndarray,
                  rows: np.ndarray) -> np.ndarray:
    """log Z_n for each weight prefix in `rows` (shape (m, n)).

    Forward transfer-matrix pass in log space with per-step max
    renormalization; cost O(n K^2) per row, no overflow for n up to 1e6.
    """
    z = (f.values - alpha) @ p        # (N, K) one-step scores
    adj = spec.adjacency.astype(float)
    n = rows.shape[1]
    logs = z[rows[:, 0]]              # (m, K)
    with np.errstate(divide="ignore"):
        for k in range(1, n):
            mx = logs.max(axis=1, keepdims=True)
            mx = np.where(np.isfinite(mx), mx, 0.0)  # rows with no live state
            s = np.exp(logs - mx) @ adj
            logs = mx + np.log(s) + z[rows[:, k]]
        mx = logs.max(axis=1)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        out = mx + np.log(np.exp(logs - mx[:, None]).sum(axis=1))
    return out


def log_zn(spec: SftSpec, f: PotentialTable, p, alpha, w_prefix, n: int) -> float:
    """log sum over admissible length-n words of exp(sum_k <p, f_{w_k, i_k} - alpha>)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = _as_vector(p, f.d)
    alpha = _as_vector(alpha, f.d)
    if spec.K != f.K:
        raise DimensionMismatch(f"spec has K = {spec.K} but table has K = {f.K}")
    _check_dims(np.ones(f.N) / f.N, f, p, alpha)
    w = _prefix_array(w_prefix, n)
    if (w >= f.N).any() or (w < 0).any():
        raise DimensionMismatch("weight prefix contains symbols outside the table's alphabet")
    return float(_log_zn_batch(spec, f, p, alpha, w[None, :])[0])


def pressure_estimate(spec: SftSpec, f: PotentialTable, p, alpha, nu: WeightStream,
                      n: int, samples: int, seed: int) -> PressureEstimate:
    """Monte-Carlo mean of (1/n) log Z_n over independent weight draws.

    Each sample re-seeds the sampled stream deterministically from (seed,
    sample index), so the estimate is reproducible and samples could be
    evaluated in parallel.
    """
    if n < 1 or samples < 1:
        raise ValueError("n and samples must be >= 1")
    if not hasattr(nu, "with_seed"):
        raise TypeError("nu must be a sampled stream (Bernoulli or Markov)")
    if nu.N != f.N:
        raise DimensionMismatch(f"stream alphabet {nu.N} does not match table N = {f.N}")
    p = _as_vector(p, f.d)
    alpha = _as_vector(alpha, f.d)
    rows = np.empty((samples, n), dtype=np.int64)
    for s in range(samples):
        child = _mix64_int(((seed & _MASK64) + (s + 1) * _GAMMA64) & _MASK64)
        rows[s] = nu.with_seed(child).prefix(n)
    vals = _log_zn_batch(spec, f, p, alpha, rows) / n
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return PressureEstimate(n=n, samples=samples, mean=mean, stderr=stderr)
