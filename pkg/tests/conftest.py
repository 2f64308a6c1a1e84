"""Shared generators and independent numerical oracles for the test suite."""

import numpy as np
import pytest

from birkhoff import PotentialTable, pressure_iid


def random_frequencies(rng, n, floor=0.05):
    """Strictly positive probability vector."""
    q = rng.dirichlet(np.ones(n)) * (1 - n * floor) + floor
    return q / q.sum()


def random_factored(rng, n_weights, k_shift, min_width=0.1):
    """Factored potential with a non-degenerate achievable interval."""
    while True:
        lam = rng.normal(size=n_weights)
        phi = rng.normal(size=k_shift)
        if phi.max() - phi.min() < 0.2:
            continue
        q = random_frequencies(rng, n_weights)
        table = PotentialTable.from_factored(lam, phi)
        vals = table.values[:, :, 0]
        width = float(q @ (vals.max(axis=1) - vals.min(axis=1)))
        if width >= min_width:
            return q, lam, phi, table


def random_dense(rng, n_weights, k_shift, d):
    return PotentialTable(rng.normal(size=(n_weights, k_shift, d)))


def interior_alpha(rng, q, table, scale=1.5):
    """A level in the interior of the achievable set, with its known
    minimizer: the pressure gradient at a random p-hat equals the level whose
    optimal p is that p-hat."""
    p_hat = rng.normal(size=table.d) * scale
    ev = pressure_iid(q, table, p_hat, np.zeros(table.d))
    return ev.gradient.copy(), p_hat


def fd_gradient(func, p, h=1e-5):
    """Central finite differences of a scalar function of a vector."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    for i in range(len(p)):
        e = np.zeros_like(p)
        e[i] = h
        out[i] = (func(p + e) - func(p - e)) / (2 * h)
    return out


def fd_jacobian(func, p, h=1e-5):
    """Central finite differences of a vector function of a vector."""
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(len(p)):
        e = np.zeros_like(p)
        e[i] = h
        cols.append((func(p + e) - func(p - e)) / (2 * h))
    return np.stack(cols, axis=1)


def shannon(p):
    """Entropy in nats with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def binary_entropy(t):
    return shannon([t, 1.0 - t])


def mu_by_trial_division(n):
    """Reference Moebius values from scratch, for cross-checking the sieve."""
    if n == 1:
        return 1
    k = 0
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            k += 1
        else:
            p += 1
    if m > 1:
        k += 1
    return -1 if k % 2 else 1


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
