"""Ground-state representation of a real wave-function.

A strictly nonzero ``psi`` on a space with measure ``mu`` induces the weighted
space with measure ``mu_i psi_i^2`` and the edge energy

    E_psi(f, g) = sum_edges w_ij rho_ij (f_i - f_j)(g_i - g_j),
    rho_ij = (psi_i^2 + psi_j^2) / 2.

Its generator kills constants. Conjugating with ``(U f)_i = psi_i f_i``
carries it back to ``L^2(mu)``, where the zero mode is ``psi`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT
from .forms import (Generator, SymmetricForm, form_from_graph, generator_from_form)
from .state_space import DistanceUndefinedError, StateSpace


class DegenerateWeightError(ValueError):
    """The wave-function vanishes somewhere."""


@dataclass(frozen=True, eq=False)
class WaveFunction:
    space: StateSpace
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n,):
            raise ValueError("wave-function length does not match the space")
        if not np.all(np.isfinite(v)):
            raise ValueError("wave-function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.normalized and abs(self.norm_sq - 1.0) > DEFAULT.normalization:
            raise ValueError(f"wave-function flagged normalized but |psi|^2 = {self.norm_sq!r}")

    @property
    def norm_sq(self) -> float:
        return math.fsum(self.space.mu * self.values ** 2)

    def normalize(self) -> "WaveFunction":
        return WaveFunction(self.space, self.values / math.sqrt(self.norm_sq), normalized=True)

    @property
    def density(self) -> np.ndarray:
        """``mu_i psi_i^2``; a probability vector when normalized."""
        return self.space.mu * self.values ** 2


def harmonic_ground_state(x):
    """``pi^{-1/4} exp(-x^2 / 2)``."""
    x = np.asarray(x, dtype=float)
    return np.pi ** -0.25 * np.exp(-0.5 * x ** 2)


def gaussian_wavefunction(space: StateSpace, normalize: bool = True) -> WaveFunction:
    """Oscillator ground state sampled on a 1-d grid, renormalized on the grid."""
    if space.coords is None or space.coords.shape[1] != 1:
        raise ValueError("gaussian_wavefunction needs a 1-d grid with coordinates")
    psi = WaveFunction(space, harmonic_ground_state(space.coords[:, 0]))
    return psi.normalize() if normalize else psi


def geodesic_gaussian_wavefunction(space: StateSpace, p: int) -> WaveFunction:
    """``N(p) exp(-d(p, q)^2 / 2)`` with ``N(p)`` fixing unit ``L^2(mu)`` norm."""
    if not space.connected:
        raise DistanceUndefinedError("geodesic Gaussian needs a connected space")
    d = space.distances_from(p)
    return WaveFunction(space, np.exp(-0.5 * d ** 2)).normalize()


@dataclass(frozen=True, eq=False)
class GroundStateForm:
    """``E_psi`` as a graph-energy form over the reweighted space."""

    psi: WaveFunction
    form: SymmetricForm

    @property
    def space(self) -> StateSpace:
        return self.form.space

    @cached_property
    def generator(self) -> Generator:
        return generator_from_form(self.form)


def _require_nonzero(psi: WaveFunction):
    if np.any(psi.values == 0):
        k = int(np.nonzero(psi.values == 0)[0][0])
        raise DegenerateWeightError(f"psi vanishes at vertex {k}")


def ground_state_form(psi: WaveFunction) -> GroundStateForm:
    _require_nonzero(psi)
    sp = psi.space
    p2 = psi.values ** 2
    rho = 0.5 * (p2[sp.edge_i] + p2[sp.edge_j])
    weighted = sp.with_measure(sp.mu * p2, sp.weights * rho, name=f"{sp.name}|psi|^2")
    return GroundStateForm(psi, form_from_graph(weighted))


def rayleigh_quotient(form: SymmetricForm, f) -> float:
    """``E(f, f) / (f, f)`` in the form's own measure."""
    f = np.asarray(f, dtype=float)
    nsq = form.space.inner(f, f)
    if not nsq > 0:
        raise ValueError("Rayleigh quotient of the zero function")
    return form(f) / nsq


def rayleigh_gradient(form: SymmetricForm, f) -> np.ndarray:
    """Gradient of the Rayleigh quotient in the weighted inner product.

    ``2 (H f - R(f) f) / |f|^2``; the Euclidean gradient is ``mu`` times this.
    """
    f = np.asarray(f, dtype=float)
    nsq = form.space.inner(f, f)
    if not nsq > 0:
        raise ValueError("Rayleigh gradient of the zero function")
    Hf = (form.matrix @ f) / form.space.mu
    return 2.0 * (Hf - (form(f) / nsq) * f) / nsq


def variational_residual(form: SymmetricForm, f) -> float:
    """Weighted norm of :func:`rayleigh_gradient`; zero exactly at eigenvectors."""
    return form.space.norm(rayleigh_gradient(form, f))


def second_variation_min(form: SymmetricForm, f) -> float:
    """Smallest value of the second variation of the Rayleigh quotient at ``f``.

    Along a direction ``g`` orthogonal to ``f`` in the form's measure,
    ``R(f + eps g) = R(f) + eps <grad, g> + eps^2 Q(g) + O(eps^3)`` with
    ``Q(g) = (E(g, g) - R(f) |g|^2) / |f|^2``. Returns ``min Q`` over unit
    ``g`` orthogonal to ``f``. At the constant mode of a ground-state form
    this is the spectral gap.
    """
    f = np.asarray(f, dtype=float)
    mu = form.space.mu
    nsq = form.space.inner(f, f)
    if not nsq > 0:
        raise ValueError("second variation at the zero function")
    s = np.sqrt(mu)
    S = form.matrix / s[:, None] / s[None, :]
    S = 0.5 * (S + S.T)
    u = s * f
    Q = sla.null_space(u[None, :])
    B = Q.T @ S @ Q
    lam = np.linalg.eigvalsh(0.5 * (B + B.T))
    return float((lam[0] - form(f) / nsq) / nsq)


def conjugated_schroedinger_operator(psi: WaveFunction) -> Generator:
    """``U H_psi U^{-1}`` on ``L^2(mu)`` with ``(U f)_i = psi_i f_i``."""
    gs = ground_state_form(psi)
    v = psi.values
    return Generator(psi.space, v[:, None] * gs.generator.matrix / v[None, :])


def detailed_balance_defect(gs: GroundStateForm) -> float:
    """``max_{i != j} |pi_i H_ij - pi_j H_ji|`` with ``pi = mu psi^2``."""
    H = gs.generator.matrix
    pi = gs.space.mu
    flux = pi[:, None] * H
    return float(np.max(np.abs(flux - flux.T), initial=0.0))
