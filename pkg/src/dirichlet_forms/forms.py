"""Symmetric forms, their generators, semigroups and resolvents.

On a finite space with measure ``M = diag(mu)`` a symmetric form is a
symmetric positive semidefinite matrix ``A`` with ``E(f, g) = f' A g``. The
associated positive self-adjoint operator on ``L^2(mu)`` is
``H = M^{-1} A``, the semigroup is ``T_t = exp(-t H)`` and the resolvent is
``G_alpha = (alpha + H)^{-1}``. All spectral work happens on the similar
symmetric matrix ``M^{1/2} H M^{-1/2} = M^{-1/2} A M^{-1/2}``.

Every form on a finite space is closed (the ``E_1`` norm is equivalent to the
Euclidean one), so closure is the identity and is not modelled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec

from .config import DEFAULT, Tolerances
from .state_space import StateSpace


class NotPositiveError(ValueError):
    """The operator or form has spectrum below the positivity tolerance."""


class NotSelfAdjointError(ValueError):
    pass


FORM_KINDS = ("graph-energy", "operator-induced", "custom")


def _psd_floor(matrix, tol):
    return -tol * max(1.0, float(np.max(np.abs(matrix), initial=0.0)) * matrix.shape[0])


@dataclass(frozen=True, eq=False)
class SymmetricForm:
    """``E(f, g) = f' A g`` on functions over ``space``.

    ``matrix`` is symmetrized on construction and must be positive
    semidefinite. Graph-energy forms keep their edge data so that
    ``E(f, g)`` is evaluated as an edge sum, which is exact on constants.
    """

    space: StateSpace
    matrix: np.ndarray
    kind: str = "custom"
    tol: Tolerances = field(default=DEFAULT, repr=False)
    _edges: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        n = self.space.n
        if a.shape != (n, n):
            raise ValueError(f"form matrix must be {n}x{n}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("form matrix has non-finite entries")
        if self.kind not in FORM_KINDS:
            raise ValueError(f"unknown form kind {self.kind!r}")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        if n and np.linalg.eigvalsh(a)[0] < _psd_floor(a, self.tol.psd):
            raise NotPositiveError("form is not positive semidefinite")

    def __call__(self, f, g=None) -> float:
        f = np.asarray(f, dtype=float)
        g = f if g is None else np.asarray(g, dtype=float)
        if self._edges is not None:
            ei, ej, w = self._edges
            return float(np.sum(w * (f[ei] - f[ej]) * (g[ei] - g[ej])))
        return float(f @ self.matrix @ g)

    def e1(self, f, g=None) -> float:
        """``E_1(f, g) = E(f, g) + (f, g)_mu``."""
        g = f if g is None else g
        return self(f, g) + self.space.inner(f, g)

    @property
    def e1_matrix(self) -> np.ndarray:
        return self.matrix + np.diag(self.space.mu)

    def energy_many(self, F) -> np.ndarray:
        """``E(f, f)`` for each column of ``F``."""
        F = np.asarray(F, dtype=float)
        return np.einsum("ik,ik->k", F, self.matrix @ F)


def zero_form(space: StateSpace) -> SymmetricForm:
    return SymmetricForm(space, np.zeros((space.n, space.n)), kind="custom")


def graph_laplacian(space: StateSpace) -> np.ndarray:
    """Unnormalized weighted Laplacian ``D - W``."""
    n = space.n
    L = np.zeros((n, n))
    ei, ej, w = space.edge_i, space.edge_j, space.weights
    np.add.at(L, (ei, ej), -w)
    np.add.at(L, (ej, ei), -w)
    np.add.at(L, (ei, ei), w)
    np.add.at(L, (ej, ej), w)
    return L


def form_from_graph(space: StateSpace) -> SymmetricForm:
    """Edge energy ``sum_edges w_ij (f_i - f_j)(g_i - g_j)``."""
    return SymmetricForm(space, graph_laplacian(space), kind="graph-energy",
                         _edges=(space.edge_i, space.edge_j, space.weights))


@dataclass(frozen=True, eq=False)
class Generator:
    """Operator ``H`` acting on ``L^2(mu)`` of ``space``.

    No positivity is enforced here: checkers need to inspect operators that
    fail it. Use :meth:`is_positive` and :meth:`is_self_adjoint`.
    """

    space: StateSpace
    matrix: np.ndarray

    def __post_init__(self):
        h = np.array(self.matrix, dtype=float)
        n = self.space.n
        if h.shape != (n, n):
            raise ValueError(f"generator matrix must be {n}x{n}, got {h.shape}")
        h.setflags(write=False)
        object.__setattr__(self, "matrix", h)

    def __call__(self, f):
        return self.matrix @ np.asarray(f, dtype=float)

    @cached_property
    def form_matrix(self) -> np.ndarray:
        """``M H``, symmetric iff ``H`` is self-adjoint in ``L^2(mu)``."""
        return self.space.mu[:, None] * self.matrix

    @cached_property
    def _sqrt_mu(self):
        return np.sqrt(self.space.mu)

    @cached_property
    def symmetric_matrix(self) -> np.ndarray:
        """``M^{1/2} H M^{-1/2}``, symmetrized."""
        s = self._sqrt_mu
        S = s[:, None] * self.matrix / s[None, :]
        return 0.5 * (S + S.T)

    def self_adjoint_defect(self) -> float:
        a = self.form_matrix
        return float(np.max(np.abs(a - a.T), initial=0.0))

    def is_self_adjoint(self, tol=1e-10) -> bool:
        a = self.form_matrix
        return self.self_adjoint_defect() <= tol * max(1.0, float(np.max(np.abs(a), initial=0.0)))

    @cached_property
    def eigh(self):
        """Eigenpairs in symmetric coordinates: ``S = V diag(lam) V'``."""
        lam, V = np.linalg.eigh(self.symmetric_matrix)
        return lam, V

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    @property
    def eigenfunctions(self) -> np.ndarray:
        """Columns are ``L^2(mu)``-orthonormal eigenfunctions of ``H``."""
        return self.eigh[1] / self._sqrt_mu[:, None]

    def is_positive(self, tol=1e-10) -> bool:
        return bool(self.eigenvalues[0] >= _psd_floor(self.symmetric_matrix, tol))


def generator_from_form(form: SymmetricForm) -> Generator:
    """``H = M^{-1} A``, so that ``(H f, g)_mu = E(f, g)``."""
    return Generator(form.space, form.matrix / form.space.mu[:, None])


def operator_sqrt(gen: Generator, tol=DEFAULT.psd) -> np.ndarray:
    """Spectral square root of a positive self-adjoint generator."""
    if not gen.is_self_adjoint():
        raise NotSelfAdjointError("generator is not self-adjoint in L^2(mu)")
    lam, V = gen.eigh
    if lam.size and lam[0] < _psd_floor(gen.symmetric_matrix, tol):
        raise NotPositiveError(f"generator has eigenvalue {lam[0]:.3e} < 0")
    root = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    s = gen._sqrt_mu
    return root * s[None, :] / s[:, None]


def form_from_generator(gen: Generator) -> SymmetricForm:
    """``E(f, g) = (sqrt(H) f, sqrt(H) g)_mu``."""
    R = operator_sqrt(gen)
    return SymmetricForm(gen.space, R.T @ (gen.space.mu[:, None] * R), kind="operator-induced")


class SemigroupEvaluator:
    """``T_t = exp(-t H)`` through the eigendecomposition of ``H``.

    Accuracy: relative error at the level of the eigensolver backward error
    (about 1e-13 for n <= 2000), well inside the 1e-10 contract.
    """

    def __init__(self, generator: Generator):
        self.generator = generator
        lam, V = generator.eigh
        s = generator._sqrt_mu
        self._lam = lam
        self._left = V / s[:, None]          # M^{-1/2} V
        self._right = V.T * s[None, :]       # V' M^{1/2}

    def kernel(self, t: float) -> np.ndarray:
        _check_time(t)
        return (self._left * np.exp(-t * self._lam)) @ self._right

    def apply(self, t: float, f):
        _check_time(t)
        f = np.asarray(f, dtype=float)
        if t == 0:
            return f.copy()
        c = self._right @ f
        decay = np.exp(-t * self._lam)
        c = c * (decay if c.ndim == 1 else decay[:, None])
        return self._left @ c

    __call__ = apply


def _check_time(t):
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")


def semigroup_apply(sg: SemigroupEvaluator, t: float, f):
    return sg.apply(t, f)


class ResolventEvaluator:
    """``G_alpha = (alpha + H)^{-1}``, solved as ``(alpha M + A) g = M f``."""

    def __init__(self, generator: Generator):
        self.generator = generator

    def apply(self, alpha: float, f):
        _check_alpha(alpha)
        gen = self.generator
        mu = gen.space.mu
        A = gen.form_matrix
        system = 0.5 * (A + A.T) + alpha * np.diag(mu)
        rhs = mu * np.asarray(f, dtype=float) if np.ndim(f) == 1 else mu[:, None] * f
        return sla.solve(system, rhs, assume_a="sym")

    __call__ = apply

    def quadrature(self, alpha: float, f, semigroup: Optional[SemigroupEvaluator] = None,
                   cutoff=1e-12, epsabs=1e-13, epsrel=1e-12):
        """Laplace transform of the semigroup, ``int_0^inf e^{-alpha s} T_s f ds``.

        Integrated adaptively up to ``s_max`` with ``e^{-alpha s_max} = cutoff``;
        the tail is closed with ``cutoff / alpha * T_{s_max} f`` (exact when
        ``H`` vanishes, an overestimate of size ``<= cutoff / alpha`` otherwise).
        Independent of :meth:`apply`; used to cross-check it.
        """
        _check_alpha(alpha)
        sg = semigroup or SemigroupEvaluator(self.generator)
        f = np.asarray(f, dtype=float)
        s_max = -np.log(cutoff) / alpha
        val, _ = quad_vec(lambda s: np.exp(-alpha * s) * sg.apply(s, f), 0.0, s_max,
                          epsabs=epsabs, epsrel=epsrel, limit=20000)
        return val + (cutoff / alpha) * sg.apply(s_max, f)


def _check_alpha(alpha):
    if not np.isfinite(alpha) or alpha <= 0:
        raise ValueError(f"resolvent parameter must be > 0, got {alpha}")


def resolvent_apply(rv: ResolventEvaluator, alpha: float, f):
    return rv.apply(alpha, f)


def unit_contraction(f) -> np.ndarray:
    """``f# = min(1, max(f, 0))`` componentwise."""
    return np.clip(np.asarray(f, dtype=float), 0.0, 1.0)


# -- Dirichlet / Markov checkers ---------------------------------------------

@dataclass
class Verdict:
    property: str
    verdict: str
    certified: bool
    trials: int
    seed: Optional[int]
    witness: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def sign_pattern_ok(A, tol=DEFAULT.sign_pattern) -> bool:
    """Nonpositive off-diagonal and nonnegative row sums.

    On a finite space this is exactly the Dirichlet property of ``f' A f``:
    the energy then splits into ``sum_{i<j} c_ij (f_i - f_j)^2 + sum_i k_i f_i^2``
    with ``c_ij, k_i >= 0``, and the unit clamp contracts each term.
    """
    A = np.asarray(A, dtype=float)
    scale = tol * max(1.0, float(np.max(np.abs(A), initial=0.0)))
    off = A - np.diag(np.diag(A))
    return bool(np.all(off <= scale) and np.all(A.sum(axis=1) >= -scale))


def _sign_violations(A, tol, limit):
    """The worst positive off-diagonal pairs and negative row sums."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    scale = tol * max(1.0, float(np.max(np.abs(A), initial=0.0)))
    off = np.triu(A, 1)
    i, j = np.nonzero(off > scale)
    order = np.argsort(-off[i, j], kind="stable")[:limit]
    pairs = [(int(i[k]), int(j[k])) for k in order]
    rows = A.sum(axis=1)
    bad = np.nonzero(rows < -scale)[0]
    bad = bad[np.argsort(rows[bad], kind="stable")][:limit]
    return pairs, [int(r) for r in bad], n


def _basic_probes(n):
    eye = np.eye(n)
    return [eye, 2.0 * eye, -2.0 * eye]


def _form_probes(A, tol, limit):
    """Vectors that witness a failed sign pattern for the clamp inequality."""
    pairs, rows, n = _sign_violations(A, tol, limit)
    cols = []
    for i, j in pairs:
        for a, b in ((i, j), (j, i)):
            f = np.zeros(n)
            f[a] = 1.0
            f[b] = -min(1.0, A[a, b] / A[b, b]) if A[b, b] > 0 else -1.0
            cols.append(f)
    rs = A.sum(axis=1)
    for i in rows:
        f = np.ones(n)
        f[i] += -rs[i] / A[i, i] if A[i, i] > 0 else 1.0
        cols.append(f)
    return np.array(cols).T if cols else np.zeros((n, 0))


def _operator_probes(A, tol, limit):
    pairs, rows, n = _sign_violations(A, tol, limit)
    cols = []
    for i, j in pairs:
        for a, b in ((i, j), (j, i)):
            f = np.zeros(n)
            f[a] = 1.5
            f[b] = -3.0 * max(A[a, a], 1e-300) / A[a, b]
            cols.append(f)
    rs = A.sum(axis=1)
    for i in rows:
        f = np.ones(n)
        f[i] += min(1.0, -rs[i] / (2 * A[i, i])) if A[i, i] > 0 else 1.0
        cols.append(f)
    return np.array(cols).T if cols else np.zeros((n, 0))


def _pair_probes(A):
    """``e_i - e_j / 2`` on every coupled pair (both orientations)."""
    n = A.shape[0]
    i, j = np.nonzero(np.triu(A, 1))
    if i.size == 0:
        return np.zeros((n, 0))
    k = np.arange(i.size)
    P = np.zeros((n, 2 * i.size))
    P[i, k] = 1.0
    P[j, k] = -0.5
    P[j, i.size + k] = 1.0
    P[i, i.size + k] = -0.5
    return P


def _witness(f, **extra):
    return {"f": [float(x) for x in f], **extra}


def probe_set(form_matrix, kind, trials, rng, tol=DEFAULT, limit=64):
    """Reproducible probe matrix (columns are test functions).

    Order: unit indicators, +-2 x indicators, ``e_i - e_j/2`` on coupled
    pairs, sign-pattern witnesses, then ``trials`` seeded Gaussian vectors.
    """
    A = np.asarray(form_matrix, dtype=float)
    n = A.shape[0]
    blocks = _basic_probes(n) + [_pair_probes(A)]
    if kind == "form":
        blocks.append(_form_probes(A, tol.sign_pattern, limit))
    else:
        blocks.append(_operator_probes(A, tol.sign_pattern, limit))
    blocks.append(rng.standard_normal((n, trials)))
    return np.hstack(blocks)


def is_dirichlet_form(form: SymmetricForm, trials: int = 256, seed: Optional[int] = 0,
                      tol: Tolerances = DEFAULT) -> Verdict:
    """Sampled test of ``E(f#, f#) <= E(f, f)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    A = form.matrix
    F = probe_set(A, "form", trials, rng, tol)
    C = np.clip(F, 0.0, 1.0)
    # E(c) - E(f) = (c - f)' A (c + f), no cancellation between large terms
    gain = np.einsum("ik,ik->k", C - F, A @ (C + F))
    bound = tol.dirichlet_form * np.einsum("ik,ik->k", F, F)
    bad = np.nonzero(gain > bound)[0]
    if bad.size:
        k = int(bad[0])
        return Verdict("dirichlet-form", "FAIL", False, trials, seed,
                       _witness(F[:, k], energy=float(form.energy_many(F[:, [k]])[0]),
                                clamped_energy=float(form.energy_many(C[:, [k]])[0])))
    return Verdict("dirichlet-form", "PASS", sign_pattern_ok(A, tol.sign_pattern), trials, seed)


def is_dirichlet_operator(gen: Generator, trials: int = 256, seed: Optional[int] = 0,
                          tol: Tolerances = DEFAULT) -> Verdict:
    """Sampled test of ``(H f, max(0, f - 1))_mu >= 0``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    A = gen.form_matrix
    F = probe_set(0.5 * (A + A.T), "operator", trials, rng, tol)
    excess = np.maximum(0.0, F - 1.0)
    pairing = np.einsum("ik,ik->k", excess, A @ F)
    bound = -tol.dirichlet_operator * np.einsum("ik,ik->k", F, F)
    bad = np.nonzero(pairing < bound)[0]
    if bad.size:
        k = int(bad[0])
        return Verdict("dirichlet-operator", "FAIL", False, trials, seed,
                       _witness(F[:, k], pairing=float(pairing[k])))
    certified = gen.is_self_adjoint() and sign_pattern_ok(A, tol.sign_pattern)
    return Verdict("dirichlet-operator", "PASS", certified, trials, seed)


def is_markovian_semigroup(sg: SemigroupEvaluator, times: Sequence[float], trials: int = 256,
                           seed: Optional[int] = 0, tol: Tolerances = DEFAULT) -> Verdict:
    """Sampled test of ``0 <= f <= 1  =>  0 <= T_t f <= 1``.

    Probes: indicators, the constant 1, ``1 - e_i``, and ``trials`` uniform
    vectors in ``[0, 1]^n``. When the generator's sign pattern fails, one
    extra short time ``0.01 / max|H_ii|`` is appended to ``times``, since the
    first-order violation ``-t H_ij`` is visible only for small ``t``.
    """
    times = [float(t) for t in times]
    if not times:
        raise ValueError("need at least one time")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for t in times:
        _check_time(t)
    gen = sg.generator
    H = gen.matrix
    n = gen.space.n
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    F = np.hstack([eye, np.ones((n, 1)), 1.0 - eye, rng.random((n, trials))])
    structural = sign_pattern_ok(H, tol.sign_pattern)
    probe_times = list(times)
    if not structural:
        probe_times.append(0.01 / max(float(np.max(np.abs(np.diag(H)))), 1e-300))
    for t in probe_times:
        TF = sg.apply(t, F)
        low = TF < -tol.markov_bounds
        high = TF > 1.0 + tol.markov_bounds
        viol = low | high
        if viol.any():
            cols = np.nonzero(viol.any(axis=0))[0]
            k = int(cols[0])
            idx = int(np.nonzero(viol[:, k])[0][0])
            return Verdict("markovian-semigroup", "FAIL", False, trials, seed,
                           _witness(F[:, k], t=t, index=idx, value=float(TF[idx, k])))
    certified = gen.is_self_adjoint() and structural
    return Verdict("markovian-semigroup", "PASS", certified, trials, seed)
