"""Square functions of the harmonic extension, the maximal function, the
optimal interpolation split, and the weighted y-pairing that the Monte Carlo
module is verified against.

All chain-side quantities integrate profiles of d^k u_f / dy^k over a shared
log-spaced y-grid.  The integrands are finite sums of y^beta exp(-2 sqrt(lambda) y),
so trapezoidal integration in log y is spectrally accurate once the grid
covers [1e-4 / sqrt(lambda_max), 30 / sqrt(lambda_min+)].
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from . import spectral_core as sc
from .quadrature import QuadratureTailWarning
from .report import PASS, CheckReport

Y_GRID_NODES = 512


def default_y_grid(dec, n_nodes=Y_GRID_NODES):
    """Log-spaced heights with trapezoidal weights (in log y).

    Returns (nodes, weights) such that sum(w * g(nodes)) approximates
    int_0^inf g(y) dy for integrands decaying like exp(-2 sqrt(lambda) y).
    """
    y_lo = 1e-4 / math.sqrt(dec.lambda_max())
    y_hi = 30.0 / math.sqrt(dec.lambda_min_positive())
    u = np.linspace(math.log(y_lo), math.log(y_hi), n_nodes)
    h = u[1] - u[0]
    y = np.exp(u)
    w = h * y
    w[0] *= 0.5
    w[-1] *= 0.5
    return y, w


@dataclass(frozen=True)
class HalfSpaceField:
    """Harmonic extension of f and its y-derivatives on a fixed y-grid.

    ``derivatives[k]`` has shape (n_y, n_states) and holds d^k u_f / dy^k
    at every grid height, built directly from the spectral backend.
    """

    dec: object
    f: np.ndarray
    y_nodes: np.ndarray
    y_weights: np.ndarray
    derivatives: dict = field(repr=False, default_factory=dict)

    @property
    def n_states(self) -> int:
        return self.dec.n

    def derivative(self, k) -> np.ndarray:
        if k not in self.derivatives:
            raise KeyError(f"derivative order {k} was not precomputed")
        return self.derivatives[k]


def half_space_field(dec, f, k_max=1, y_grid=None) -> HalfSpaceField:
    """Build a HalfSpaceField with derivatives up to order ``k_max``."""
    f = np.asarray(f, dtype=float)
    if y_grid is None:
        y, w = default_y_grid(dec)
    else:
        y, w = y_grid
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float)
        if np.any(np.diff(y) <= 0):
            raise ValueError("y-grid must be strictly increasing")
    derivs = {k: sc.poisson_derivative_profile(dec, f, y, k=k)
              for k in range(0, k_max + 1)}
    return HalfSpaceField(dec, f, y, w, derivs)


def _weighted_square_integral(hs, k, exponent, tail_tol=1e-10):
    """sum_j w_j y_j^exponent |d^k u(y_j, .)|^2 per state, with tail check."""
    du = hs.derivative(k)
    wy = hs.y_weights * hs.y_nodes ** exponent
    contrib = wy[:, None] * du * du
    total = contrib.sum(axis=0)
    tail = np.abs(contrib[-1])
    scale = float(np.max(total)) if np.max(total) > 0 else 1.0
    if float(np.max(tail)) > tail_tol * scale:
        warnings.warn(
            "y-grid does not cover the decay scale of the square-function "
            f"integrand (last-node share {float(np.max(tail)) / scale:.2e})",
            QuadratureTailWarning, stacklevel=3)
    return total


def g_function(hs: HalfSpaceField, k=1) -> np.ndarray:
    """g_k(f)(x) = (int_0^inf y^{2k-1} |d^k u_f/dy^k|^2 dy)^{1/2}, k >= 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.sqrt(_weighted_square_integral(hs, k, 2 * k - 1))


def frac_g_function(hs: HalfSpaceField, alpha) -> np.ndarray:
    """G_alpha(f)(x) = (int_0^inf y^{2 alpha + 1} |du_f/dy|^2 dy)^{1/2}."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return np.sqrt(_weighted_square_integral(hs, 1, 2.0 * alpha + 1.0))


def g1_l2_identity_gap(dec, f, y_grid=None) -> float:
    """Relative gap in ||g_1 f||_2 = ||f||_2 / 2 for zero-mean f."""
    hs = half_space_field(dec, f, k_max=1, y_grid=y_grid)
    lhs = sc.lp_norm(dec.m, g_function(hs, 1), 2)
    rhs = 0.5 * sc.lp_norm(dec.m, f, 2)
    return abs(lhs - rhs) / rhs


def frac_g_l2_identity_gap(dec, f, alpha, y_grid=None) -> float:
    """Relative gap in ||G_alpha f||_2 = sqrt(Gamma(2a+2)) / 2^{a+1} ||I_alpha f||_2."""
    hs = half_space_field(dec, f, k_max=1, y_grid=y_grid)
    lhs = sc.lp_norm(dec.m, frac_g_function(hs, alpha), 2)
    i_alpha = sc.fractional_integral_spectral(dec, alpha, f)
    rhs = (math.sqrt(gamma_fn(2 * alpha + 2)) / 2 ** (alpha + 1)
           * sc.lp_norm(dec.m, i_alpha, 2))
    return abs(lhs - rhs) / rhs


# ---------------------------------------------------------------------------
# maximal function

def maximal_function(hs: HalfSpaceField) -> np.ndarray:
    """sup over the y-grid and y = 0 of |u_f(x, y)| per state."""
    u = hs.derivative(0)
    return np.maximum(np.max(np.abs(u), axis=0), np.abs(hs.f))


def stein_check(hs: HalfSpaceField, p, tol=1e-9) -> CheckReport:
    """Maximal inequality ||sup_y |u_f|||_p <= p/(p-1) ||f||_p, 1 < p <= inf.

    The p = inf constant is 1.  The reported value is the norm ratio, the
    oracle the sharp constant; the check passes iff ratio <= constant + tol.
    """
    if not p > 1:
        raise ValueError("maximal inequality requires p > 1")
    bound = 1.0 if math.isinf(p) else p / (p - 1.0)
    num = sc.lp_norm(hs.dec.m, maximal_function(hs), p)
    den = sc.lp_norm(hs.dec.m, hs.f, p)
    ratio = 0.0 if den == 0.0 else num / den
    return CheckReport(
        name=f"maximal-inequality-p{p}",
        anchor="||sup_y |u_f(., y)|||_p <= p/(p-1) ||f||_p",
        value=ratio, oracle=bound, tolerance=tol,
        status=PASS if ratio <= bound + tol else "fail")


# ---------------------------------------------------------------------------
# optimal split of the square-function bound

@dataclass(frozen=True)
class HedbergInput:
    """Ingredients of the near/far split bound.

    M is the maximal-function value sup_y u_{|f|}(x, .), F the L^p norm of
    f, and the exponents must satisfy 0 < alpha < d/p.
    """

    M: float
    F: float
    alpha: float
    p: float
    d: float

    def __post_init__(self):
        if self.M < 0 or self.F < 0:
            raise ValueError("M and F must be nonnegative")
        if not 0 < self.alpha < self.d / self.p:
            raise ValueError("need 0 < alpha < d/p")


def hedberg_split(inp: HedbergInput):
    """Minimize psi(delta) = M delta^alpha + F delta^{alpha - d/p} in closed form.

    Returns (delta_star, psi(delta_star)) with
    delta_star = ((d/p - alpha) F / (alpha M))^{p/d}, so that the bound is
    proportional to M^{1 - alpha p / d} F^{alpha p / d}.  Degenerate inputs
    return sentinels instead of raising: M = 0 gives (inf, 0.0) and F = 0
    gives (0.0, 0.0), both consistent with the limiting bound.
    """
    if inp.F == 0.0:
        return 0.0, 0.0
    if inp.M == 0.0:
        return math.inf, 0.0
    beta = inp.d / inp.p - inp.alpha
    delta = (beta * inp.F / (inp.alpha * inp.M)) ** (inp.p / inp.d)
    value = inp.M * delta ** inp.alpha + inp.F * delta ** (inp.alpha - inp.d / inp.p)
    return delta, value


# ---------------------------------------------------------------------------
# weighted pairing 2 int int (y ^ s)(y^alpha ^ N) du_f du_h dy dm

def pairing_quadrature(hs_f: HalfSpaceField, hs_h: HalfSpaceField, alpha,
                       s=math.inf, truncation=math.inf, absolute=False) -> float:
    """2 sum_x m_x int (y ^ s) (y^alpha ^ N) du_f/dy du_h/dy dy.

    The signed pairing is the primary object; ``absolute=True`` integrates
    |du_f| |du_h| instead (the variant controlled by the square-function
    bound).  ``truncation`` is the cap N on the multiplier y^alpha.
    """
    if alpha <= 0 or not s > 0:
        raise ValueError("need alpha > 0 and s > 0")
    if hs_f.y_nodes.shape != hs_h.y_nodes.shape or \
            not np.array_equal(hs_f.y_nodes, hs_h.y_nodes):
        raise ValueError("pairing requires matching y-grids")
    y = hs_f.y_nodes
    mult = np.minimum(y, s) * np.minimum(y ** alpha, truncation)
    duf = hs_f.derivative(1)
    duh = hs_h.derivative(1)
    prod = np.abs(duf * duh) if absolute else duf * duh
    per_y = prod @ hs_f.dec.m
    return 2.0 * float(np.sum(hs_f.y_weights * mult * per_y))


def spectral_pairing_limit(dec, f, h, alpha) -> float:
    """Closed form of the pairing at s = N = inf:
    2 Gamma(alpha+2) 2^{-(alpha+2)} sum_{lambda>0} lambda^{-alpha/2} f^ h^."""
    cf = dec.coefficients(f)
    ch = dec.coefficients(h)
    pos = dec.lambdas > 0
    series = float(np.sum(dec.lambdas[pos] ** (-alpha / 2.0) * cf[pos] * ch[pos]))
    return 2.0 * gamma_fn(alpha + 2.0) * 2.0 ** -(alpha + 2.0) * series


# ---------------------------------------------------------------------------
# HLS-type stability check for the fractional square function (grid backend)

def hls_gfunction_check(backend, alpha, p, base_scale=1.0,
                        drift_tol=0.05) -> CheckReport:
    """||G_alpha f||_q / ||f||_p stability under refinement and dilation.

    ``backend`` must expose ``d``, ``gfunction_ratio(scale, alpha, p, q)``
    and ``refined()``; the exponent relation 1/q = 1/p - alpha/d > 0 is
    validated here.  The check passes iff the ratio is finite and drifts
    less than ``drift_tol`` relative under one grid refinement and across
    the dilation sweep scale * {0.5, 1, 2}.
    """
    q_inv = 1.0 / p - alpha / backend.d
    if q_inv <= 0 or not 1 < p:
        raise ValueError("exponents must satisfy 1/q = 1/p - alpha/d > 0, p > 1")
    q = 1.0 / q_inv
    if not p < q:
        raise ValueError("need p < q")
    base = backend.gfunction_ratio(base_scale, alpha, p, q)
    if base == 0.0:
        return CheckReport(name="hls-gfunction", anchor="||G_alpha f||_q <= C ||f||_p",
                           value=0.0, oracle=0.0, tolerance=0.0, status=PASS,
                           note="zero input")
    fine = backend.refined().gfunction_ratio(base_scale, alpha, p, q)
    sweep = [backend.gfunction_ratio(base_scale * r, alpha, p, q)
             for r in (0.5, 1.0, 2.0)]
    drift_refine = abs(fine - base) / base
    drift_sweep = (max(sweep) - min(sweep)) / min(sweep)
    ok = math.isfinite(base) and drift_refine < drift_tol and drift_sweep < drift_tol
    return CheckReport(
        name="hls-gfunction",
        anchor="||G_alpha f||_q <= C_{alpha,p,d} ||f||_p, 1/q = 1/p - alpha/d",
        value=max(drift_refine, drift_sweep), oracle=0.0, tolerance=drift_tol,
        details={"ratio": base, "ratio_refined": fine, "ratio_sweep": sweep},
        status=PASS if ok else "fail")


def export_profile_csv(hs: HalfSpaceField, path, k=1, exponent=None):
    """Dump (y, integrand per state) rows of the square-function integrand."""
    if exponent is None:
        exponent = 2 * k - 1
    du = hs.derivative(k)
    vals = hs.y_nodes[:, None] ** exponent * du * du
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"state_{i}" for i in range(hs.n_states)])
        for j, y in enumerate(hs.y_nodes):
            w.writerow([repr(float(y))] + [repr(float(v)) for v in vals[j]])
