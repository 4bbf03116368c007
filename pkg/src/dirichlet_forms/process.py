"""Continuous-time Markov chains associated with Dirichlet generators.

The process generated by ``-H`` jumps from ``i`` to ``j`` at rate ``-H_ij``
and is killed (sent to the cemetery ``-1``) at rate ``(H 1)_i``. Functions
are extended by ``f(cemetery) = 0``, so ``E_x[f(X_t)] = (e^{-tH} f)(x)``
holds for killed chains too.

Random streams: a single path is driven by ``SeedSequence(seed,
spawn_key=(0, path_index))``; bulk sampling splits paths into fixed blocks
of :data:`BLOCK` and drives block ``b`` by ``spawn_key=(1, b)``. Results
therefore do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .config import DEFAULT
from .forms import Generator
from .ground_state import WaveFunction, ground_state_form, rayleigh_quotient

BLOCK = 4096
CEMETERY = -1


class NotMarkovGeneratorError(ValueError):
    pass


class NoStationaryLawError(ValueError):
    pass


def _seed_value(seed):
    if seed is None:
        return int(np.random.SeedSequence().entropy)
    return int(seed)


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, path_index)))


def block_rng(seed: int, block: int, stream: int = 1) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, block)))


@dataclass(frozen=True, eq=False)
class JumpChain:
    """Exit rates and jump law extracted from a Markovian generator."""

    generator: Generator
    rates: np.ndarray
    kill_rates: np.ndarray
    indptr: np.ndarray
    targets: np.ndarray
    cumprob: np.ndarray
    action: Optional[float] = None
    stationary: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.generator.space.n

    @property
    def absorbing(self) -> np.ndarray:
        return self.rates <= 0

    @property
    def conservative(self) -> bool:
        return not np.any(self.kill_rates > 0)

    @property
    def jump_matrix(self) -> np.ndarray:
        """Dense ``P`` over the live states (cemetery column dropped)."""
        P = np.zeros((self.n, self.n))
        prob = np.diff(np.concatenate([[0.0], self.cumprob]))
        for v in range(self.n):
            lo, hi = self.indptr[v], self.indptr[v + 1]
            if hi > lo:
                prob[lo] = self.cumprob[lo]
            for k in range(lo, hi):
                if self.targets[k] >= 0:
                    P[v, self.targets[k]] = prob[k]
        return P

    @property
    def kill_probability(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.rates > 0, self.kill_rates / self.rates, 0.0)

    def irreducible(self) -> bool:
        adj = (np.abs(self.generator.matrix) > 0).astype(float)
        np.fill_diagonal(adj, 0.0)
        ncomp, _ = connected_components(adj, directed=True, connection="strong")
        return ncomp == 1


def jump_chain_from_generator(gen: Generator, tol: float = DEFAULT.sign_pattern,
                              action: Optional[float] = None, stationary=None) -> JumpChain:
    H = np.asarray(gen.matrix, dtype=float)
    n = H.shape[0]
    scale = tol * max(1.0, float(np.max(np.abs(H), initial=0.0)))
    off = H - np.diag(np.diag(H))
    pos = np.argwhere(off > scale)
    if pos.size:
        i, j = (int(v) for v in pos[0])
        raise NotMarkovGeneratorError(
            f"positive off-diagonal entry H[{i},{j}] = {H[i, j]:.6g}; not a Markov generator")
    rowsum = H.sum(axis=1)
    if np.any(rowsum < -scale):
        i = int(np.argmin(rowsum))
        raise NotMarkovGeneratorError(f"row {i} of H sums to {rowsum[i]:.6g} < 0")
    jump = np.clip(-off, 0.0, None)
    kill = np.where(rowsum > scale, rowsum, 0.0)
    out = jump.sum(axis=1)
    rates = out + kill

    indptr = np.zeros(n + 1, dtype=np.int64)
    targets, cum = [], []
    for v in range(n):
        nbrs = np.nonzero(jump[v])[0]
        k_rates = list(jump[v, nbrs])
        tv = list(nbrs)
        if kill[v] > 0:
            tv.append(CEMETERY)
            k_rates.append(kill[v])
        if tv:
            c = np.cumsum(k_rates) / rates[v]
            c[-1] = 1.0
            targets.extend(tv)
            cum.extend(c)
        indptr[v + 1] = len(targets)
    return JumpChain(gen, rates, kill, indptr, np.array(targets, dtype=np.int64),
                     np.array(cum, dtype=float), action=action,
                     stationary=None if stationary is None else np.asarray(stationary, float))


def ground_state_chain(psi: WaveFunction) -> JumpChain:
    """Chain of ``E_psi``, carrying its action ``S_1`` and reversing measure."""
    gs = ground_state_form(psi)
    pi = gs.space.mu / math.fsum(gs.space.mu)
    s1 = rayleigh_quotient(gs.form, np.ones(gs.space.n))
    return jump_chain_from_generator(gs.generator, action=s1, stationary=pi)


def stochastic_action(chain: JumpChain) -> float:
    """The action attached to the process; equals ``S_1`` of its wave-function."""
    if chain.action is None:
        raise ValueError("chain was not built from a wave-function")
    return chain.action


@dataclass
class PathSample:
    start: int
    times: np.ndarray
    vertices: np.ndarray
    seed: int
    horizon: float
    path_index: int = 0

    @property
    def n_jumps(self) -> int:
        return int(self.times.size - 1)

    def state_at(self, t: float) -> int:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.vertices[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed} path_index={self.path_index} "
                  f"start={self.start} horizon={self.horizon!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "vertex"])
        for t, v in zip(self.times.tolist(), self.vertices.tolist()):
            w.writerow([repr(t), v])
        return buf.getvalue()


def _check_start(chain, v):
    if not (0 <= int(v) < chain.n):
        raise ValueError(f"invalid start vertex {v}")


def sample_path(chain: JumpChain, start: int, horizon: float, seed=None,
                path_index: int = 0) -> PathSample:
    _check_start(chain, start)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    seed = _seed_value(seed)
    cap = 1024
    while True:
        gen = path_rng(seed, path_index)
        times = np.empty(cap)
        verts = np.empty(cap, dtype=np.int64)
        m = _kernels.record_path(chain.indptr, chain.targets, chain.cumprob, chain.rates,
                                 int(start), float(horizon), gen, times, verts)
        if m >= 0:
            return PathSample(int(start), times[:m].copy(), verts[:m].copy(), seed,
                              float(horizon), path_index)
        cap *= 4


def sample_states(chain: JumpChain, starts, times, seed=None, workers: int = 1,
                  stream: int = 1) -> np.ndarray:
    """States of independent paths at the given observation times.

    ``starts`` holds one start vertex per path; the result has shape
    ``(n_paths, len(times))``.
    """
    starts = np.asarray(starts, dtype=np.int64)
    if starts.size and (starts.min() < 0 or starts.max() >= chain.n):
        raise ValueError("invalid start vertex")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("observation times must be >= 0")
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    seed = _seed_value(seed)
    out = np.empty((starts.size, times.size), dtype=np.int64)

    def run(b):
        lo, hi = b * BLOCK, min((b + 1) * BLOCK, starts.size)
        _kernels.states_at_times(chain.indptr, chain.targets, chain.cumprob, chain.rates,
                                 starts[lo:hi], sorted_times, block_rng(seed, b, stream),
                                 out[lo:hi])

    blocks = range(math.ceil(starts.size / BLOCK))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    res = np.empty_like(out)
    res[:, order] = out
    return res


def _extend(f):
    # index -1 (cemetery) picks the appended zero
    return np.append(np.asarray(f, dtype=float), 0.0)


def _mean_se(vals):
    if vals.size and np.all(vals == vals[0]):
        return float(vals[0]), 0.0
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.inf
    return float(np.mean(vals)), se


def empirical_semigroup(chain: JumpChain, x: int, t: float, f, n_paths: int, seed=None,
                        workers: int = 1):
    """Monte Carlo ``E_x[f(X_t)]`` and its standard error."""
    _check_start(chain, x)
    if t < 0:
        raise ValueError("t must be >= 0")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    states = sample_states(chain, np.full(n_paths, int(x)), [t], seed, workers)[:, 0]
    return _mean_se(_extend(f)[states])


@dataclass
class OccupationStats:
    occupation: np.ndarray       # time spent per vertex after burn-in
    jumps: np.ndarray            # jumps[i, j] = number of i -> j transitions after burn-in
    holding_sum: np.ndarray
    holding_count: np.ndarray
    horizon: float
    burn_in: float
    seed: int

    @property
    def histogram(self) -> np.ndarray:
        return self.occupation / self.occupation.sum()


def occupation_statistics(chain: JumpChain, horizon: float, burn_in: float = 0.0, seed=None,
                          start: Optional[int] = None) -> OccupationStats:
    if not horizon > burn_in >= 0:
        raise ValueError("need horizon > burn_in >= 0")
    if not chain.conservative:
        raise NoStationaryLawError("killed chain has no stationary law")
    if np.any(chain.absorbing):
        raise NoStationaryLawError("chain has absorbing vertices")
    if not chain.irreducible():
        raise NoStationaryLawError("chain is reducible")
    seed = _seed_value(seed)
    if start is None:
        start = int(np.argmax(chain.stationary)) if chain.stationary is not None else 0
    _check_start(chain, start)
    n = chain.n
    occ = np.zeros(n)
    counts = np.zeros(chain.targets.size, dtype=np.int64)
    holds = np.zeros(n)
    visits = np.zeros(n, dtype=np.int64)
    _kernels.occupation(chain.indptr, chain.targets, chain.cumprob, chain.rates, int(start),
                        float(horizon), float(burn_in), block_rng(seed, 0, stream=3),
                        occ, counts, holds, visits)
    jumps = np.zeros((n, n), dtype=np.int64)
    rows = np.repeat(np.arange(n), np.diff(chain.indptr))
    np.add.at(jumps, (rows, chain.targets), counts)
    return OccupationStats(occ, jumps, holds, visits, float(horizon), float(burn_in), seed)


def stationary_histogram(chain: JumpChain, horizon: float, burn_in: float = 0.0, seed=None,
                         start: Optional[int] = None) -> np.ndarray:
    """Occupation-time histogram of one long path, normalized to mass 1."""
    return occupation_statistics(chain, horizon, burn_in, seed, start).histogram


def tv_distance(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p, float) - np.asarray(q, float))))


# -- OU-type diagnostics ------------------------------------------------------

def autocorrelation(chain: JumpChain, observable, lags, n_paths: int, seed=None,
                    initial=None, workers: int = 1):
    """Stationary autocovariance ``Cov(g(X_0), g(X_t))`` at each lag.

    Paths start from ``initial`` (default: the chain's stationary law).
    Returns ``(cov, std_error)`` arrays.
    """
    pi = chain.stationary if initial is None else np.asarray(initial, float)
    if pi is None:
        raise ValueError("no initial distribution given and chain has no stationary law")
    seed = _seed_value(seed)
    rng = block_rng(seed, 0, stream=2)
    starts = rng.choice(chain.n, size=n_paths, p=pi / pi.sum())
    lags = np.asarray(lags, dtype=float)
    states = sample_states(chain, starts, lags, seed, workers)
    g = _extend(observable)
    x0 = g[starts]
    a = x0 - x0.mean()
    cov = np.empty(lags.size)
    se = np.empty(lags.size)
    for k in range(lags.size):
        xt = g[states[:, k]]
        prod = a * (xt - xt.mean())
        cov[k] = prod.mean()
        se[k] = prod.std(ddof=1) / math.sqrt(n_paths)
    return cov, se


def conditional_mean(chain: JumpChain, observable, start: int, lags, n_paths: int, seed=None,
                     workers: int = 1):
    """``E[g(X_t) | X_0 = start]`` at each lag, with standard errors."""
    _check_start(chain, start)
    states = sample_states(chain, np.full(n_paths, int(start)), lags, seed, workers)
    vals = _extend(observable)[states]
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(n_paths)


def fit_exponential(lags, values, sigma=None):
    """Least-squares fit of ``c exp(-rate t)``; returns ``(c, rate)``."""
    lags = np.asarray(lags, float)
    values = np.asarray(values, float)
    pos = values > 0
    slope, icpt = np.polyfit(lags[pos], np.log(values[pos]), 1)
    popt, _ = curve_fit(lambda t, c, r: c * np.exp(-r * t), lags, values,
                        p0=(math.exp(icpt), max(-slope, 1e-6)), sigma=sigma, maxfev=10000)
    return float(popt[0]), float(popt[1])
