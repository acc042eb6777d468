"""Numerical laboratory for adiabatic quantum algorithms.

Builds interpolating Hamiltonians ``H(s) = (1 - s) H0 + s H1``, tracks their
low-lying spectrum, checks ground-state positivity through product formulas and
propagates the time-dependent Schrodinger equation along the path.
"""
__version__ = "0.1.0"

from .builders import (
    CostSpec,
    InterpolatingFamily,
    RandomFinalSpec,
    TransverseFieldSpec,
    UniformInt,
    apply_grover_sign,
    build_cost,
    build_h0,
    build_random_final,
    cost_family,
    gh1_family,
    grover_family,
    grover_generator,
    separable_pair,
    shift_family,
    shift_variant,
)
from .eigen import dense_spectrum, lowest_two
from .errors import (
    ContractError,
    ConvergenceError,
    DegenerateBuilderError,
    DimensionError,
    FormatError,
    IntegratorError,
    SizeGuardError,
)
from .evolution import EvolutionSpec, evolve, runtime_scaling_study
from .gaps import (
    GapProfile,
    compare_profiles,
    detect_crossings,
    gap_sweep,
    reduced_search_subspace,
    separable_closed_form,
)
from .hilbert import (
    DiagonalOperator,
    SeparableOperator,
    SparseOperator,
    linear_combine,
    matvec,
    to_dense,
)
from .positivity import (
    single_qubit_factor,
    trotter_exp_action,
    verify_ground_positivity,
    verify_matrix_positivity,
)
from .sat import SatInstance, encode_energy, parse_dimacs, random_instance
