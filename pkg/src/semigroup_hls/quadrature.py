"""Log-substitution trapezoidal quadrature for improper integrals on (0, inf).

All integrands handled here are smooth on (0, inf) with power-law or
essential singularities at 0 and exponential or heavy polynomial decay at
infinity.  Substituting s = exp(u) and applying the trapezoidal rule in u
gives spectral accuracy once both truncation ends are below tolerance, so
the driver doubles the node count until two successive refinements agree.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np


class QuadratureTailWarning(UserWarning):
    """Raised when a truncated end of an improper integral is not negligible."""


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for integrating f on (0, inf): sum(w * f(nodes)).

    Parameters
    ----------
    nodes : ndarray
        Strictly increasing positive abscissae.
    weights : ndarray
        Positive weights (trapezoidal in log s, already including ds/du).
    target_tol : float
        Tolerance the rule was refined to.
    substitution : str
        Human-readable descriptor of the change of variables.
    """

    nodes: np.ndarray
    weights: np.ndarray
    target_tol: float
    substitution: str

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if n.ndim != 1 or n.shape != w.shape:
            raise ValueError("nodes and weights must be matching 1-d arrays")
        if not np.all(np.diff(n) > 0):
            raise ValueError("nodes must be strictly increasing")
        if not np.all(w > 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "nodes", n)
        object.__setattr__(self, "weights", w)

    def integrate(self, values) -> np.ndarray | float:
        """Apply the rule to integrand values sampled at ``nodes``.

        ``values`` may be shape (n_nodes,) or (n_nodes, ...) for vector
        integrands; the node axis is always the first one.
        """
        v = np.asarray(values, dtype=float)
        if v.shape[0] != self.nodes.size:
            raise ValueError("values must be sampled at the rule's nodes")
        return np.tensordot(self.weights, v, axes=(0, 0))

    def to_csv(self, path):
        """Dump (node, weight) pairs for audit."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "weight"])
            for s, wt in zip(self.nodes, self.weights):
                w.writerow([repr(s), repr(wt)])


def log_trapezoid_rule(s_lo, s_hi, n, target_tol=0.0) -> QuadratureRule:
    """Trapezoidal rule in u = log(s) over [s_lo, s_hi] with n nodes."""
    if not (0.0 < s_lo < s_hi):
        raise ValueError("need 0 < s_lo < s_hi")
    if n < 2:
        raise ValueError("need at least 2 nodes")
    u = np.linspace(np.log(s_lo), np.log(s_hi), n)
    h = u[1] - u[0]
    s = np.exp(u)
    w = h * s
    w[0] *= 0.5
    w[-1] *= 0.5
    return QuadratureRule(s, w, target_tol, "s = exp(u), trapezoid in u")


def refine_log_quadrature(integrand, s_lo, s_hi, tol, n0=65, n_max=1 << 17,
                          name="integral", edge_check="both"):
    """Integrate ``integrand`` over (s_lo, s_hi), doubling nodes to tolerance.

    ``integrand(s_nodes)`` must accept a 1-d array of abscissae and return
    values with the node axis first (scalar integrands return shape (n,)).
    Returns ``(value, rule)``.  Convergence is measured in the max norm
    relative to max(1, |value|); failure to converge raises, failure of the
    truncated ends to be negligible warns with :class:`QuadratureTailWarning`.
    """
    prev = None
    vals = None
    n = n0
    while n <= n_max:
        rule = log_trapezoid_rule(s_lo, s_hi, n, target_tol=tol)
        if vals is None:
            vals = np.asarray(integrand(rule.nodes), dtype=float)
        else:
            # nodes nest under n -> 2n - 1: only odd positions are new
            new = np.asarray(integrand(rule.nodes[1::2]), dtype=float)
            merged = np.empty((n,) + new.shape[1:], dtype=float)
            merged[0::2] = vals
            merged[1::2] = new
            vals = merged
        est = rule.integrate(vals)
        scale = max(1.0, float(np.max(np.abs(est))))
        if prev is not None and float(np.max(np.abs(est - prev))) <= tol * scale:
            # end-point contributions bound the discarded tails for the
            # decaying integrands this driver is used with
            edge = 0.0
            if edge_check in ("both", "head"):
                edge = float(np.max(np.abs(rule.weights[0] * vals[0])))
            if edge_check in ("both", "tail"):
                edge = max(edge, float(np.max(np.abs(rule.weights[-1] * vals[-1]))))
            if edge > 10.0 * tol * scale:
                warnings.warn(
                    f"{name}: truncated end contribution {edge:.3e} exceeds "
                    f"tolerance {tol:.1e}; widen the integration window",
                    QuadratureTailWarning, stacklevel=2)
            return est, rule
        prev = est
        n = 2 * n - 1
    raise RuntimeError(f"{name}: quadrature did not converge to {tol:.1e} "
                       f"with {n_max} nodes")
