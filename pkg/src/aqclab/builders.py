"""Constructors for every Hamiltonian family used in the experiments.

Sign convention for the initial Hamiltonian: single-qubit blocks are
``a_j/2 * (I - sigma_x)``, so the ground state is the uniform superposition
with all amplitudes positive and ``exp(-H0)`` is entrywise positive.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ContractError, DegenerateBuilderError, FormatError
from .hilbert import (
    IDENTITY_2,
    PAULI_X,
    DiagonalOperator,
    Operator,
    SeparableOperator,
    dim_to_qubits,
    linear_combine,
    zero_bit_counts,
)
from .io import fmt

# Entries this close to the minimum count as ground energies.
DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class TransverseFieldSpec:
    couplings: tuple

    def __post_init__(self):
        c = tuple(self.couplings)
        for a in c:
            if int(a) != a or a < 0:
                raise ContractError(f"couplings must be non-negative integers, got {a!r}")
        if not c:
            raise ContractError("at least one qubit required")
        object.__setattr__(self, "couplings", tuple(int(a) for a in c))

    @property
    def n(self):
        return len(self.couplings)

    @classmethod
    def uniform(cls, n, a=1):
        return cls((a,) * n)


@dataclass(frozen=True, eq=False)
class CostSpec:
    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        dim_to_qubits(e.size)
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @property
    def n(self):
        return dim_to_qubits(self.energies.size)

    @property
    def ground_multiplicity(self):
        e = self.energies
        return int(np.count_nonzero(e <= e.min() + DEGENERACY_TOL * max(1.0, abs(e.min()))))

    @property
    def degenerate(self):
        return self.ground_multiplicity > 1


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi or self.lo > self.hi:
            raise ContractError(f"invalid integer law bounds [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class RandomFinalSpec:
    """Random final energy table.  ``law=None`` selects the search variant, UniformInt(1, n)."""

    n: int
    seed: int
    law: Optional[UniformInt] = None

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be a 64-bit unsigned integer")
        if not 1 <= self.n:
            raise ContractError("n must be positive")

    @property
    def resolved_law(self):
        return self.law if self.law is not None else UniformInt(1, self.n)


@dataclass(frozen=True, eq=False)
class InterpolatingFamily:
    """``H(s) = (1 - s) h0 + s h1``."""

    h0: Operator
    h1: Operator
    name: str = ""
    target: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h0.n != self.h1.n:
            raise ContractError(f"h0 acts on {self.h0.n} qubits, h1 on {self.h1.n}")

    @property
    def n(self):
        return self.h0.n

    def at(self, s):
        if s == 0:
            return self.h0
        if s == 1:
            return self.h1
        return linear_combine(1.0 - s, self.h0, s, self.h1)

    def combo(self, c0, c1):
        """``c0*h0 + c1*h1`` (used by integrators that average H over a step)."""
        return linear_combine(c0, self.h0, c1, self.h1)


def check_target(n, t):
    if int(t) != t or not 0 <= t < 2**n:
        raise ContractError(f"target {t!r} outside [0, 2**{n})")
    return int(t)


def rng_for(seed):
    """The package-wide generator: numpy PCG64 seeded with a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def build_h0(spec: Union[TransverseFieldSpec, tuple, list]) -> SeparableOperator:
    if not isinstance(spec, TransverseFieldSpec):
        spec = TransverseFieldSpec(tuple(spec))
    a = np.array(spec.couplings, dtype=float)
    if not np.any(a > 0):
        raise DegenerateBuilderError("all couplings are zero; the ground state is not unique")
    blocks = 0.5 * a[:, None, None] * (IDENTITY_2 - PAULI_X)[None]
    return SeparableOperator(blocks)


def build_cost(spec: Union[CostSpec, np.ndarray, list]) -> DiagonalOperator:
    """Diagonal final Hamiltonian from an energy table with ground energy zero."""
    if not isinstance(spec, CostSpec):
        spec = CostSpec(spec)
    e = spec.energies
    if np.any(e < 0):
        raise ContractError("cost table has negative entries")
    if e.min() != 0:
        raise ContractError(f"cost table minimum is {e.min()}, expected 0")
    return DiagonalOperator(e)


def cost_from_table(energies) -> DiagonalOperator:
    """Like :func:`build_cost` but shifts a positive minimum to zero with a warning."""
    e = np.asarray(energies, dtype=float)
    if e.min() != 0:
        warnings.warn(f"energy table minimum is {e.min()}; shifting to zero", stacklevel=2)
        e = e - e.min()
    return build_cost(e)


def grover_generator(n, t) -> DiagonalOperator:
    t = check_target(n, t)
    d = np.ones(2**n)
    d[t] = 0.0
    return DiagonalOperator(d)


def grover_sign(n, t) -> DiagonalOperator:
    """The oracle ``G``: -1 on the target, +1 elsewhere (``-exp(i pi A)``, a global phase)."""
    t = check_target(n, t)
    d = np.ones(2**n)
    d[t] = -1.0
    return DiagonalOperator(d)


def _diag_of(h1, what):
    if not isinstance(h1, DiagonalOperator):
        raise ContractError(f"{what} requires a diagonal operator, got {type(h1).__name__}")
    return h1.diag


def apply_grover_sign(h1: DiagonalOperator, t) -> DiagonalOperator:
    """``G h1``: negate the target energy so the target becomes the unique ground state."""
    d = _diag_of(h1, "apply_grover_sign")
    t = check_target(h1.n, t)
    if d[t] == 0:
        raise ContractError("target energy is zero, so the sign flip has no effect; "
                            "use shift_variant instead")
    if d[t] < 0:
        raise ContractError("target energy must be strictly positive")
    return DiagonalOperator(grover_sign(h1.n, t).diag * d)


def shift_variant(h1: DiagonalOperator, t) -> DiagonalOperator:
    """Target energy to 0, every other energy raised by 1."""
    d = _diag_of(h1, "shift_variant")
    t = check_target(h1.n, t)
    if np.any(d < 0):
        raise ContractError("shift_variant requires a non-negative table")
    out = d + 1.0
    out[t] = 0.0
    return DiagonalOperator(out)


def build_random_final(spec: RandomFinalSpec, t=None) -> DiagonalOperator:
    """Seeded random energy table.

    With a target the entry at ``t`` is 0 and the rest are i.i.d. draws from the
    law (which must then be bounded below by 1).  Without one the whole table is
    drawn and shifted so its minimum is 0.
    """
    law = spec.resolved_law
    n = spec.n
    rng = rng_for(spec.seed)
    draws = rng.integers(law.lo, law.hi, size=2**n, endpoint=True).astype(float)
    if t is not None:
        t = check_target(n, t)
        if law.lo < 1:
            raise ContractError("search variant needs a law with lo >= 1")
        draws[t] = 0.0
    else:
        draws -= draws.min()
    return DiagonalOperator(draws)


def separable_pair(n) -> InterpolatingFamily:
    """Unit couplings and ``h1 = sum_j (sigma_z(j) + I)/2`` (number of 0-bits)."""
    h0 = build_h0(TransverseFieldSpec.uniform(n))
    h1 = DiagonalOperator(zero_bit_counts(n).astype(float))
    return InterpolatingFamily(h0, h1, name="separable")


def grover_family(n, t=0, couplings=None) -> InterpolatingFamily:
    h0 = build_h0(couplings if couplings is not None else TransverseFieldSpec.uniform(n))
    return InterpolatingFamily(h0, grover_generator(n, t), name="grover", target=check_target(n, t))


def gh1_family(base: InterpolatingFamily, t) -> InterpolatingFamily:
    return InterpolatingFamily(base.h0, apply_grover_sign(base.h1, t),
                               name=f"{base.name}+gh1", target=int(t), meta=dict(base.meta))


def shift_family(base: InterpolatingFamily, t) -> InterpolatingFamily:
    return InterpolatingFamily(base.h0, shift_variant(base.h1, t),
                               name=f"{base.name}+shift", target=int(t), meta=dict(base.meta))


def cost_family(energies, couplings=None, name="cost", target=None) -> InterpolatingFamily:
    h1 = energies if isinstance(energies, DiagonalOperator) else DiagonalOperator(energies)
    h0 = build_h0(couplings if couplings is not None else TransverseFieldSpec.uniform(h1.n))
    return InterpolatingFamily(h0, h1, name=name, target=target)


def save_energies_csv(path, energies):
    e = np.asarray(energies.diag if isinstance(energies, DiagonalOperator) else energies)
    lines = ["index,energy"] + [f"{i},{fmt(x)}" for i, x in enumerate(e)]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def load_energies_csv(path):
    rows = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if rows and not rows[0][0].isdigit() and rows[0][0] not in "+-.":
        rows = rows[1:]
    values = []
    for lineno, row in enumerate(rows, start=2):
        parts = row.split(",")
        try:
            if len(parts) == 2:
                if int(parts[0]) != len(values):
                    raise FormatError(f"index {parts[0]} out of ascending order", lineno)
                values.append(float(parts[1]))
            elif len(parts) == 1:
                values.append(float(parts[0]))
            else:
                raise FormatError("expected 'index,energy' or a single value", lineno)
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(str(exc), lineno) from None
    e = np.array(values)
    try:
        dim_to_qubits(e.size)
    except ContractError as exc:
        raise FormatError(str(exc)) from None
    return e


def save_energies_bin(path, energies):
    e = np.asarray(energies.diag if isinstance(energies, DiagonalOperator) else energies)
    e.astype("<f8").tofile(path)
    return Path(path)


def load_energies_bin(path):
    e = np.fromfile(path, dtype="<f8")
    try:
        dim_to_qubits(e.size)
    except ContractError as exc:
        raise FormatError(str(exc)) from None
    return e
