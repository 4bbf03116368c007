"""Compiled inner loops for jump-chain simulation.

The chain is passed in CSR form: the targets of vertex ``v`` are
``targets[indptr[v]:indptr[v+1]]`` with cumulative jump probabilities
``cumprob`` over the same slice. Target ``-1`` is the cemetery.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _next_vertex(v, indptr, targets, cumprob, u):
    j = indptr[v]
    last = indptr[v + 1] - 1
    while j < last and cumprob[j] < u:
        j += 1
    return targets[j]


@njit(cache=True, nogil=True)
def states_at_times(indptr, targets, cumprob, rates, starts, times, gen, out):
    """Fill ``out[p, k]`` with the state of path ``p`` at ``times[k]`` (sorted)."""
    ntimes = times.shape[0]
    for p in range(starts.shape[0]):
        v = starts[p]
        t = 0.0
        k = 0
        while k < ntimes:
            q = rates[v] if v >= 0 else 0.0
            if q <= 0.0:
                while k < ntimes:
                    out[p, k] = v
                    k += 1
                break
            t_next = t + gen.exponential(1.0 / q)
            while k < ntimes and times[k] < t_next:
                out[p, k] = v
                k += 1
            if k >= ntimes:
                break
            v = _next_vertex(v, indptr, targets, cumprob, gen.random())
            t = t_next
    return out


@njit(cache=True, nogil=True)
def record_path(indptr, targets, cumprob, rates, start, horizon, gen, times, verts):
    """Jump times and states up to ``horizon``; returns the count or -1 if the buffer filled."""
    cap = times.shape[0]
    v = start
    t = 0.0
    times[0] = 0.0
    verts[0] = v
    m = 1
    while True:
        q = rates[v] if v >= 0 else 0.0
        if q <= 0.0:
            return m
        t = t + gen.exponential(1.0 / q)
        if t >= horizon:
            return m
        if m >= cap:
            return -1
        v = _next_vertex(v, indptr, targets, cumprob, gen.random())
        times[m] = t
        verts[m] = v
        m += 1


@njit(cache=True, nogil=True)
def occupation(indptr, targets, cumprob, rates, start, horizon, burn_in, gen,
               occ, counts, holds, visits):
    """One long path: occupation times and jump counts after ``burn_in``.

    ``counts`` is aligned with ``targets``; ``holds``/``visits`` accumulate
    completed holding times per vertex (for holding-time statistics).
    """
    v = start
    t = 0.0
    while t < horizon:
        q = rates[v]
        if q <= 0.0:
            lo = max(t, burn_in)
            if horizon > lo:
                occ[v] += horizon - lo
            return
        dt = gen.exponential(1.0 / q)
        t_next = t + dt
        lo = max(t, burn_in)
        hi = min(t_next, horizon)
        if hi > lo:
            occ[v] += hi - lo
        if t_next >= horizon:
            return
        holds[v] += dt
        visits[v] += 1
        j = indptr[v]
        last = indptr[v + 1] - 1
        u = gen.random()
        while j < last and cumprob[j] < u:
            j += 1
        if t_next >= burn_in:
            counts[j] += 1
        v = targets[j]
        t = t_next


def empty_states(n_paths, n_times):
    return np.empty((n_paths, n_times), dtype=np.int64)
