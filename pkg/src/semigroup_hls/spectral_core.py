"""Exact finite-dimensional backend: reversible Markov generators and the
spectral calculus of their semigroups.

A reversible generator L on n states with stationary weights m defines the
semigroup T_t = exp(tL).  Diagonalizing the symmetrized matrix
D^{1/2} L D^{-1/2} (D = diag(m)) yields eigenvalues -lambda_i <= 0 and
m-orthonormal eigenvectors phi_i, from which every operator used in this
package has an exact spectral form:

    T_t f      = sum_i exp(-lambda_i t) <f, phi_i> phi_i
    P_y f      = sum_i exp(-sqrt(lambda_i) y) <f, phi_i> phi_i
    d^k/dy^k u = sum_i (-sqrt(lambda_i))^k exp(-sqrt(lambda_i) y) <f, phi_i> phi_i
    I_alpha f  = sum_{lambda_i > 0} lambda_i^{-alpha/2} <f, phi_i> phi_i

with <f, g> = sum_x f(x) g(x) m_x.  These exact values serve as oracles for
the quadrature and Monte Carlo routes implemented elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .quadrature import refine_log_quadrature

#: entries of -L below this are clamped to exactly zero after eigensolve
EIGENVALUE_CLAMP = 1e-12

#: tolerance on |<f,1>| / ||f||_2 for fractional integrals
ZERO_MEAN_TOL = 1e-9


# ---------------------------------------------------------------------------
# chain models

@dataclass(frozen=True)
class ChainModel:
    """Reversible Markov generator with stationary weights.

    Parameters
    ----------
    L : ndarray, shape (n, n)
        Generator matrix: nonnegative off-diagonal rates, zero row sums.
    m : ndarray, shape (n,)
        Positive stationary weights satisfying detailed balance
        m_i L_ij = m_j L_ji.
    """

    L: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        m = np.array(self.m, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("L must be a square matrix")
        if m.shape != (L.shape[0],):
            raise ValueError("m must have one weight per state")
        if not np.all(np.isfinite(L)) or not np.all(np.isfinite(m)):
            raise ValueError("L and m must be finite")
        if np.any(m <= 0):
            raise ValueError("stationary weights must be positive")
        scale = max(1.0, float(np.max(np.abs(L))))
        off = L - np.diag(np.diag(L))
        if np.min(off) < -1e-12 * scale:
            i, j = np.unravel_index(np.argmin(off), L.shape)
            raise ValueError(f"negative off-diagonal rate L[{i},{j}] = {L[i, j]!r}")
        rows = np.abs(L.sum(axis=1))
        if np.max(rows) > 1e-10 * scale * L.shape[0]:
            i = int(np.argmax(rows))
            raise ValueError(f"row {i} of L sums to {L.sum(axis=1)[i]!r}, not 0")
        L.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.m.sum())

    def detailed_balance_defect(self):
        """Max |m_i L_ij - m_j L_ji| and its argmax pair (i, j)."""
        F = self.m[:, None] * self.L
        A = np.abs(F - F.T)
        i, j = np.unravel_index(np.argmax(A), A.shape)
        return float(A[i, j]), (int(i), int(j))

    def to_json(self) -> str:
        """Serialize as {n, L: row-major list, m: list}; exact round-trip."""
        return json.dumps({"n": self.n,
                           "L": [float(x) for x in self.L.ravel(order="C")],
                           "m": [float(x) for x in self.m]},
                          sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ChainModel":
        d = json.loads(text)
        n = int(d["n"])
        L = np.array(d["L"], dtype=float).reshape(n, n)
        return ChainModel(L, np.array(d["m"], dtype=float))


def two_state(rate=1.0) -> ChainModel:
    """Symmetric two-state chain, eigenvalues (0, 2*rate)."""
    L = rate * np.array([[-1.0, 1.0], [1.0, -1.0]])
    return ChainModel(L, np.ones(2))


def single_state() -> ChainModel:
    return ChainModel(np.zeros((1, 1)), np.ones(1))


def cycle(n, rate=1.0) -> ChainModel:
    """Cycle of n states with unit-rate nearest-neighbor jumps."""
    L = np.zeros((n, n))
    for i in range(n):
        L[i, (i + 1) % n] += rate
        L[i, (i - 1) % n] += rate
        L[i, i] = -L[i].sum()
    return ChainModel(L, np.ones(n))


def random_reversible(n, rng, rate_scale=1.0, mass_spread=1.0):
    """Random irreducible reversible chain from symmetric conductances.

    Conductances C_ij = C_ji > 0 on the complete graph and random positive
    weights m give L_ij = C_ij / m_i, which satisfies detailed balance by
    construction.
    """
    C = rng.uniform(0.1, 1.0, size=(n, n)) * rate_scale
    C = 0.5 * (C + C.T)
    m = np.exp(rng.uniform(-mass_spread, mass_spread, size=n))
    L = C / m[:, None]
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return ChainModel(L, m)


# ---------------------------------------------------------------------------
# weighted inner products

def inner(model_or_m, f, g) -> float:
    """Weighted inner product <f, g> = sum_x f(x) g(x) m_x."""
    m = model_or_m.m if hasattr(model_or_m, "m") else np.asarray(model_or_m)
    return float(np.sum(np.asarray(f) * np.asarray(g) * m))


def lp_norm(model_or_m, f, p) -> float:
    """Weighted L^p norm; p = inf gives the sup norm."""
    m = model_or_m.m if hasattr(model_or_m, "m") else np.asarray(model_or_m)
    f = np.asarray(f, dtype=float)
    if math.isinf(p):
        return float(np.max(np.abs(f)))
    if p <= 0:
        raise ValueError("p must be positive")
    return float(np.sum(np.abs(f) ** p * m) ** (1.0 / p))


# ---------------------------------------------------------------------------
# spectral decomposition

@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues of -L (ascending, >= 0) and m-orthonormal eigenvectors.

    ``vectors[:, i]`` is the eigenvector phi_i: sum_x phi_i phi_j m_x =
    delta_ij and -L phi_i = lambdas[i] phi_i.
    """

    lambdas: np.ndarray
    vectors: np.ndarray
    m: np.ndarray

    @property
    def n(self) -> int:
        return self.lambdas.size

    @property
    def total_mass(self) -> float:
        return float(self.m.sum())

    def lambda_min_positive(self) -> float:
        pos = self.lambdas[self.lambdas > 0]
        if pos.size == 0:
            raise ValueError("chain has no positive eigenvalue (single state?)")
        return float(pos[0])

    def lambda_max(self) -> float:
        return float(self.lambdas[-1])

    def coefficients(self, f) -> np.ndarray:
        """Expansion coefficients <f, phi_i> in the m-weighted inner product."""
        return self.vectors.T @ (np.asarray(f, dtype=float) * self.m)

    def synthesize(self, coeffs) -> np.ndarray:
        return self.vectors @ np.asarray(coeffs, dtype=float)

    def reconstruct_generator(self) -> np.ndarray:
        """Rebuild -L = sum_i lambda_i phi_i (phi_i m)^T from the modes."""
        return (self.vectors * self.lambdas) @ (self.vectors * self.m[:, None]).T


def decompose(model: ChainModel, reversibility_tol=1e-9) -> SpectralDecomposition:
    """Solve the symmetrized eigenproblem of a reversible generator.

    Rejects inputs whose detailed-balance defect exceeds
    ``reversibility_tol`` (relative to the largest rate), naming the worst
    (i, j) pair.  Eigenvalues of -L below ``EIGENVALUE_CLAMP`` are clamped
    to exactly 0.
    """
    defect, (i, j) = model.detailed_balance_defect()
    scale = max(1.0, float(np.max(np.abs(model.L))) * float(np.max(model.m)))
    if defect > reversibility_tol * scale:
        raise ValueError(
            f"generator is not reversible: |m_i L_ij - m_j L_ji| = {defect:.3e} "
            f"at (i, j) = ({i}, {j}) exceeds tolerance")
    d = np.sqrt(model.m)
    B = (d[:, None] * model.L) / d[None, :]
    B = 0.5 * (B + B.T)
    w, V = np.linalg.eigh(-B)
    w = np.where(np.abs(w) < EIGENVALUE_CLAMP, 0.0, w)
    w = np.maximum(w, 0.0)
    phi = V / d[:, None]
    # deterministic sign: largest-magnitude entry of each mode is positive
    idx = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[idx, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    phi = phi * signs
    lam = w.copy()
    lam.setflags(write=False)
    phi.setflags(write=False)
    return SpectralDecomposition(lam, phi, model.m)


# ---------------------------------------------------------------------------
# spectral operators

def _check_nonneg(value, name):
    if value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value!r}")


def apply_semigroup(dec: SpectralDecomposition, t, f) -> np.ndarray:
    """T_t f = sum_i exp(-lambda_i t) <f, phi_i> phi_i for t >= 0."""
    _check_nonneg(t, "t")
    c = dec.coefficients(f)
    return dec.synthesize(np.exp(-dec.lambdas * t) * c)


def apply_poisson(dec: SpectralDecomposition, y, f) -> np.ndarray:
    """P_y f = sum_i exp(-sqrt(lambda_i) y) <f, phi_i> phi_i for y >= 0.

    This is the harmonic extension u_f(., y).
    """
    _check_nonneg(y, "y")
    c = dec.coefficients(f)
    return dec.synthesize(np.exp(-np.sqrt(dec.lambdas) * y) * c)


def dy_harmonic(dec: SpectralDecomposition, y, f, k=1) -> np.ndarray:
    """k-th y-derivative of the harmonic extension, k >= 1.

    Spectrally (-sqrt(lambda))^k exp(-sqrt(lambda) y) per mode.  For k = 0
    use :func:`apply_poisson`.
    """
    _check_nonneg(y, "y")
    if int(k) != k or k < 1:
        raise ValueError("derivative order k must be an integer >= 1; "
                         "use apply_poisson for k = 0")
    r = np.sqrt(dec.lambdas)
    c = dec.coefficients(f)
    return dec.synthesize(((-r) ** int(k)) * np.exp(-r * y) * c)


def poisson_derivative_profile(dec, f, y_nodes, k=1) -> np.ndarray:
    """d^k u_f / dy^k sampled on a y-grid; shape (n_y, n_states)."""
    y = np.asarray(y_nodes, dtype=float)
    if np.any(y < 0):
        raise ValueError("heights must be nonnegative")
    r = np.sqrt(dec.lambdas)
    c = dec.coefficients(f)
    if k == 0:
        mode = np.ones_like(r)
    else:
        mode = (-r) ** int(k)
    damp = np.exp(-np.outer(y, r))
    return (damp * (mode * c)) @ dec.vectors.T


def require_zero_mean(dec: SpectralDecomposition, f, tol=ZERO_MEAN_TOL):
    f = np.asarray(f, dtype=float)
    nrm = lp_norm(dec.m, f, 2)
    if nrm == 0.0:
        return f
    mean = abs(float(np.sum(f * dec.m)))
    if mean > tol * nrm:
        raise ValueError(
            f"f must have zero mean for fractional integrals on a finite "
            f"measure space: |<f,1>| / ||f||_2 = {mean / nrm:.3e}")
    return f


def fractional_integral_spectral(dec: SpectralDecomposition, alpha, f) -> np.ndarray:
    """I_alpha f = sum_{lambda_i > 0} lambda_i^{-alpha/2} <f, phi_i> phi_i.

    Requires alpha > 0 and zero-mean f; the lambda = 0 eigenspace is always
    excluded (the defining time integral diverges on it).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    f = require_zero_mean(dec, f)
    c = dec.coefficients(f)
    pos = dec.lambdas > 0
    gains = np.zeros_like(dec.lambdas)
    gains[pos] = dec.lambdas[pos] ** (-alpha / 2.0)
    return dec.synthesize(gains * c)


def semigroup_time_quadrature(sampler, alpha, t_lo, t_hi, rel_tol=1e-9,
                              name="fractional integral"):
    """Quadrature of (1/Gamma(alpha/2)) * int t^{alpha/2-1} sampler(t) dt.

    ``sampler(t_nodes)`` returns semigroup values with the node axis first.
    The integrand is integrated in log t over [t_lo, t_hi] with doubling
    refinement; the caller chooses the window so that both tails are below
    tolerance.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    pref = 1.0 / gamma_fn(alpha / 2.0)

    def integrand(t):
        vals = np.asarray(sampler(t), dtype=float)
        shape = (t.size,) + (1,) * (vals.ndim - 1)
        return pref * (t ** (alpha / 2.0 - 1.0)).reshape(shape) * vals

    value, _rule = refine_log_quadrature(integrand, t_lo, t_hi, rel_tol,
                                         name=name)
    return value


def fractional_integral_quadrature(dec: SpectralDecomposition, alpha, f,
                                   rel_tol=1e-9) -> np.ndarray:
    """Time-quadrature route to I_alpha f on a chain.

    Must agree with :func:`fractional_integral_spectral` to the quadrature
    tolerance; the truncation window is chosen from the spectrum so that
    the discarded tail, bounded by exp(-lambda_min+ t), is negligible.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    f = require_zero_mean(dec, f)
    if lp_norm(dec.m, f, 2) == 0.0:
        return np.zeros(dec.n)
    lam_lo = dec.lambda_min_positive()
    lam_hi = dec.lambda_max()
    # head: integral of t^{alpha/2-1} below t_lo is (2/alpha) t_lo^{alpha/2}
    t_lo = (0.01 * rel_tol * alpha / 2.0) ** (2.0 / alpha) / lam_hi
    t_hi = (np.log(1.0 / rel_tol) + 8.0 * (1 + alpha)) / lam_lo

    def sampler(t_nodes):
        c = dec.coefficients(f)
        damp = np.exp(-np.outer(t_nodes, dec.lambdas))
        return (damp * c) @ dec.vectors.T

    return semigroup_time_quadrature(sampler, alpha, t_lo, t_hi, rel_tol)
