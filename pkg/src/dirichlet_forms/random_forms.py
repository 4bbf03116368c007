"""Seeded random spaces and forms for property checks and the roundtrip command."""

import numpy as np

from .forms import SymmetricForm, form_from_graph, graph_laplacian
from .state_space import StateSpace


def random_space(rng: np.random.Generator, n: int, extra_degree: float = 2.0) -> StateSpace:
    """Connected random graph: a random spanning path plus Erdos-Renyi extras."""
    perm = rng.permutation(n)
    pairs = {(min(a, b), max(a, b)) for a, b in zip(perm[:-1], perm[1:])}
    if n > 2:
        p = min(1.0, extra_degree / (n - 1))
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(iu.size) < p
        pairs |= set(zip(iu[keep].tolist(), ju[keep].tolist()))
    pairs = sorted(pairs)
    m = len(pairs)
    ei = np.array([a for a, _ in pairs], dtype=np.int64)
    ej = np.array([b for _, b in pairs], dtype=np.int64)
    return StateSpace(rng.uniform(0.5, 2.0, n), ei, ej, rng.uniform(0.1, 2.0, m),
                      rng.uniform(0.5, 1.5, m), name=f"random{n}")


def random_dirichlet_form(rng, n, killing: bool = False) -> SymmetricForm:
    space = random_space(rng, n)
    if not killing:
        return form_from_graph(space)
    A = graph_laplacian(space) + np.diag(rng.uniform(0.0, 0.5, n) * (rng.random(n) < 0.3))
    return SymmetricForm(space, A, kind="custom")


def positive_coupling_counterexample(rng, n) -> SymmetricForm:
    """Graph energy plus ``beta (f_i + f_j)^2`` with ``beta`` above ``w_ij``.

    PSD by construction; the coupling ``A_ij`` becomes positive.
    """
    space = random_space(rng, n)
    A = graph_laplacian(space)
    k = int(rng.integers(space.n_edges))
    i, j = int(space.edge_i[k]), int(space.edge_j[k])
    beta = space.weights[k] + rng.uniform(0.5, 1.5)
    A[i, i] += beta
    A[j, j] += beta
    A[i, j] += beta
    A[j, i] += beta
    return SymmetricForm(space, A, kind="custom")


def negative_killing_counterexample(rng, n) -> SymmetricForm:
    """Graph energy plus ``gamma (f_i - 2 f_j)^2``: row ``i`` sums to ``-gamma``."""
    space = random_space(rng, n)
    A = graph_laplacian(space)
    i, j = (int(v) for v in rng.choice(n, 2, replace=False))
    gamma = rng.uniform(0.5, 1.5)
    A[i, i] += gamma
    A[j, j] += 4 * gamma
    A[i, j] -= 2 * gamma
    A[j, i] -= 2 * gamma
    return SymmetricForm(space, A, kind="custom")


def counterexamples(seed: int, count: int = 10, n_range=(4, 40)):
    """Alternating positive-coupling and negative-killing non-Dirichlet forms."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(*n_range))
        make = positive_coupling_counterexample if k % 2 == 0 else negative_killing_counterexample
        out.append(make(rng, n))
    return out


def dirichlet_forms(seed: int, count: int = 50, n_range=(5, 201)):
    rng = np.random.default_rng(seed)
    return [random_dirichlet_form(rng, int(rng.integers(*n_range)), killing=bool(k % 3 == 2))
            for k in range(count)]
