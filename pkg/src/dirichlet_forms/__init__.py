"""Dirichlet forms, their semigroups and associated Markov chains on finite spaces."""

from .state_space import (StateSpace, build_circle_grid, build_line_grid, geodesic_distance,
                          read_state_space, write_state_space)
from .forms import (Generator, ResolventEvaluator, SemigroupEvaluator, SymmetricForm, Verdict,
                    form_from_generator, form_from_graph, generator_from_form,
                    is_dirichlet_form, is_dirichlet_operator, is_markovian_semigroup,
                    resolvent_apply, semigroup_apply, unit_contraction)
from .ground_state import (GroundStateForm, WaveFunction, conjugated_schroedinger_operator,
                           gaussian_wavefunction, geodesic_gaussian_wavefunction,
                           ground_state_form, rayleigh_quotient, variational_residual)
from .process import (JumpChain, PathSample, empirical_semigroup, ground_state_chain,
                      jump_chain_from_generator, sample_path, stationary_histogram)
from .capacity import CapacityResult, capacity, exceptional_set_check

__version__ = "0.1.0"
