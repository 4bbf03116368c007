"""E-capacity of vertex sets and the equilibrium potential.

On a finite space every set is open, so

    cap(S) = min { E_1(f, f) : f >= 1 on S }.

For a Dirichlet form the minimizer equals 1 on S and is E_1-harmonic off S,
which reduces the problem to one positive-definite linear solve. The
projected-gradient solver is kept both as an oracle and as the fallback when
the KKT multipliers of the equality ansatz come out negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT, Tolerances
from .forms import SymmetricForm


@dataclass
class CapacityResult:
    vertices: tuple
    value: float
    potential: np.ndarray
    method: str
    kkt_residual: float = 0.0       # max |grad E_1| off S
    min_multiplier: float = 0.0     # min grad E_1 on S (must be >= 0)
    iterations: int = 0
    certificate: dict = field(default_factory=dict)

    @property
    def within_unit_interval(self) -> bool:
        return bool(self.certificate.get("bounds_ok", False))


def _as_set(form, S):
    S = sorted({int(v) for v in S})
    if S and (S[0] < 0 or S[-1] >= form.space.n):
        raise ValueError("capacity set has out-of-range vertices")
    return S


def _e1_value(form, f):
    # E(f, f) + (f, f)_mu; exact for f = 1 on graph-energy forms
    return form(f) + math.fsum(form.space.mu * f * f)


def _certify(form, f, S, tol):
    Q = form.e1_matrix
    grad = 2.0 * (Q @ f)
    n = form.space.n
    mask = np.zeros(n, dtype=bool)
    mask[S] = True
    kkt = float(np.max(np.abs(grad[~mask]), initial=0.0))
    mult = float(np.min(grad[mask], initial=0.0)) if S else 0.0
    slack = float(np.max(np.abs(grad[mask] * (f[mask] - 1.0)), initial=0.0))
    lo, hi = float(f.min()), float(f.max())
    return kkt, mult, {
        "kkt_residual": kkt,
        "min_multiplier": mult,
        "complementary_slackness": slack,
        "feasible": bool(np.all(f[mask] >= 1.0 - tol.capacity_bounds)),
        "bounds_ok": bool(lo >= -tol.capacity_bounds and hi <= 1.0 + tol.capacity_bounds),
        "min_potential": lo,
        "max_potential": hi,
    }


def capacity_by_solve(form: SymmetricForm, S) -> np.ndarray:
    """Equilibrium-potential ansatz: ``f = 1`` on S, ``(Q f)_U = 0`` off S."""
    n = form.space.n
    S = _as_set(form, S)
    f = np.zeros(n)
    if not S:
        return f
    f[S] = 1.0
    U = np.setdiff1d(np.arange(n), S)
    if U.size:
        Q = form.e1_matrix
        rhs = -Q[np.ix_(U, S)].sum(axis=1)
        f[U] = sla.solve(Q[np.ix_(U, U)], rhs, assume_a="pos")
    return f


def largest_eigenvalue(Q, iters=500, seed=0, rtol=1e-10) -> float:
    """Power-iteration estimate of the top eigenvalue of a PSD matrix."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(Q.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = Q @ v
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


def capacity_by_projected_gradient(form: SymmetricForm, S, tol: Tolerances = DEFAULT,
                                   x0=None):
    """Projected gradient on ``E_1(f, f) / 2`` over ``{f >= 1 on S}``.

    Step ``1 / lambda_max(E_1)``; stops when the projected-gradient step
    ``|f - P(f - grad)|_inf`` drops below ``tol.pg_residual`` or after
    ``tol.pg_max_iter`` iterations. Returns ``(f, iterations)``.
    """
    n = form.space.n
    S = _as_set(form, S)
    mask = np.zeros(n, dtype=bool)
    mask[S] = True
    Q = form.e1_matrix
    step = 1.0 / largest_eigenvalue(Q)
    f = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    f[mask] = np.maximum(f[mask], 1.0)
    for it in range(1, tol.pg_max_iter + 1):
        g = Q @ f
        nxt = f - step * g
        nxt[mask] = np.maximum(nxt[mask], 1.0)
        pg = f - g
        pg[mask] = np.maximum(pg[mask], 1.0)
        residual = np.max(np.abs(f - pg), initial=0.0)
        f = nxt
        if residual <= tol.pg_residual:
            return f, it
    return f, tol.pg_max_iter


def capacity(form: SymmetricForm, S, tol: Tolerances = DEFAULT, method: str = "auto") -> CapacityResult:
    """Capacity of ``S`` with its equilibrium potential and KKT certificate.

    ``method``: ``"solve"``, ``"projected-gradient"`` or ``"auto"`` (solve,
    then fall back to projected gradient if a multiplier on S is negative).
    """
    if method not in ("auto", "solve", "projected-gradient"):
        raise ValueError(f"unknown method {method!r}")
    S = _as_set(form, S)
    n = form.space.n
    if not S:
        f = np.zeros(n)
        _, _, cert = _certify(form, f, S, tol)
        return CapacityResult((), 0.0, f, "empty", certificate=cert)

    its = 0
    if method in ("auto", "solve"):
        f = capacity_by_solve(form, S)
        used = "solve"
        kkt, mult, cert = _certify(form, f, S, tol)
        scale = max(1.0, float(np.max(np.abs(form.e1_matrix))))
        if method == "auto" and mult < -1e-9 * scale:
            f, its = capacity_by_projected_gradient(form, S, tol, x0=f)
            used = "projected-gradient"
    else:
        f, its = capacity_by_projected_gradient(form, S, tol)
        used = "projected-gradient"
    kkt, mult, cert = _certify(form, f, S, tol)
    return CapacityResult(tuple(S), _e1_value(form, f), f, used, kkt, mult, its, cert)


def exceptional_set_check(form: SymmetricForm) -> dict:
    """Singleton capacities; all positive means no nonempty exceptional set."""
    caps = np.array([capacity(form, [i]).value for i in range(form.space.n)])
    return {
        "singleton_capacities": caps,
        "min_capacity": float(caps.min()),
        "argmin": int(caps.argmin()),
        "no_exceptional_sets": bool(np.all(caps > 0)),
    }

