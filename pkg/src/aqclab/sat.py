"""3-SAT instances and their violated-clause energy tables.

A literal is a signed variable index (DIMACS style): ``+v`` is satisfied when
variable ``v`` is true, ``-v`` when it is false.  Variable ``v`` is read from
bit ``k_v`` of the basis index, and bit 0 means *true*.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .builders import CostSpec, rng_for
from .errors import ContractError, FormatError, SizeGuardError
from .hilbert import MAX_QUBITS, bit_table


@dataclass(frozen=True)
class SatInstance:
    n: int
    clauses: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ContractError("need at least one variable")
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        for c in clauses:
            _check_clause(c, self.n)
        if len(clauses) > 8 * comb(self.n, 3):
            raise ContractError(f"{len(clauses)} clauses exceed the 8*C(n,3) distinct 3-clauses")
        object.__setattr__(self, "clauses", clauses)

    @property
    def m(self):
        return len(self.clauses)

    def to_dimacs(self):
        lines = [f"p cnf {self.n} {self.m}"]
        lines += [" ".join(str(l) for l in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def _check_clause(c, n, line=None):
    err = (lambda msg: FormatError(msg, line)) if line is not None else ContractError
    if len(c) != 3:
        raise err(f"clause {list(c)} has width {len(c)}, expected 3")
    for lit in c:
        if lit == 0 or abs(lit) > n:
            raise err(f"literal {lit} out of range for {n} variables")
    if len(set(c)) != 3:
        raise err(f"clause {list(c)} repeats a literal")


def parse_dimacs(text: str) -> SatInstance:
    n = declared = None
    clauses = []
    current, start_line = [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if n is not None:
                raise FormatError("second problem line", lineno)
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError(f"bad problem line {line!r}", lineno)
            try:
                n, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise FormatError(f"bad problem line {line!r}", lineno) from None
            continue
        if n is None:
            raise FormatError("clause before the problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise FormatError(f"non-integer token {tok!r}", lineno) from None
            if start_line is None:
                start_line = lineno
            if lit == 0:
                _check_clause(current, n, start_line)
                clauses.append(tuple(current))
                current, start_line = [], None
            else:
                current.append(lit)
    if n is None:
        raise FormatError("missing problem line")
    if current:
        raise FormatError("last clause is not terminated by 0", start_line)
    if len(clauses) != declared:
        raise FormatError(f"problem line declares {declared} clauses, found {len(clauses)}")
    return SatInstance(n, tuple(clauses))


def violated_counts(inst: SatInstance) -> np.ndarray:
    """Entry ``k`` is the number of clauses falsified by the assignment encoded in ``k``."""
    if inst.n > MAX_QUBITS:
        raise SizeGuardError(f"{inst.n} variables exceed the cap of {MAX_QUBITS}")
    bits = bit_table(inst.n)
    counts = np.zeros(2**inst.n, dtype=np.int64)
    for c in inst.clauses:
        violated = np.ones(2**inst.n, dtype=bool)
        for lit in c:
            value_true = bits[:, abs(lit) - 1] == 0
            violated &= ~value_true if lit > 0 else value_true
        counts += violated
    return counts


def encode_energy(inst: SatInstance) -> CostSpec:
    """Violated-clause table.  Unsatisfiable instances keep min > 0 and warn."""
    counts = violated_counts(inst)
    if counts.min() > 0:
        warnings.warn(f"instance is unsatisfiable (min energy {counts.min()})", stacklevel=2)
    return CostSpec(counts.astype(float))


def random_instance(n, m, seed) -> SatInstance:
    """``m`` clauses, each on 3 distinct variables chosen uniformly, polarities fair coins."""
    if n < 3:
        raise ContractError("3-clauses need at least 3 variables")
    if m < 1:
        raise ContractError("need at least one clause")
    rng = rng_for(seed)
    clauses = []
    for _ in range(m):
        vs = np.sort(rng.choice(n, size=3, replace=False)) + 1
        signs = rng.integers(0, 2, size=3) * 2 - 1
        clauses.append(tuple(int(v * s) for v, s in zip(vs, signs)))
    return SatInstance(n, tuple(clauses))
