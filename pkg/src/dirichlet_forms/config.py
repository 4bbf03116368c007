"""Numerical tolerances shared across the package.

Every threshold used by a checker or a verification routine lives here so
that a run can be reproduced (or tightened) from a single record.
"""

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class Tolerances:
    # positive semidefiniteness: f'Af >= -psd * max(1, ||A||) |f|^2
    psd: float = 1e-10
    # symmetric inverse-square-root round trip, entrywise
    roundtrip: float = 1e-10
    semigroup_law: float = 1e-9
    resolvent_identity: float = 1e-8
    resolvent_quadrature: float = 1e-8
    # Dirichlet checks, scaled by |f|^2
    dirichlet_form: float = 1e-12
    dirichlet_operator: float = 1e-12
    # order-interval bounds on T_t f
    markov_bounds: float = 1e-10
    # structural sign-pattern test, scaled by max |A_ij|
    sign_pattern: float = 1e-12
    zero_mode: float = 1e-10
    normalization: float = 1e-12
    capacity_bounds: float = 1e-8
    capacity_agreement: float = 1e-6
    pg_residual: float = 1e-10
    pg_max_iter: int = 1_000_000
    mc_sigmas: float = 3.0

    def as_dict(self):
        return asdict(self)


DEFAULT = Tolerances()
