"""Computational-basis conventions and the three operator representations.

Basis index ``i`` of an ``n``-qubit register encodes the bit string
``k_1 ... k_n`` with ``k_1`` as the most significant bit.  Bit value 0 is the
``sigma_z = +1`` eigenstate.

Every operator exposes ``matvec`` on arrays of shape ``(2**n,)`` or
``(2**n, k)``; the solvers only ever talk to that method.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DimensionError, SizeGuardError

MAX_QUBITS = 24
MAX_DENSE_QUBITS = 14
_TAIL_QUBITS = 6

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
IDENTITY_2 = np.eye(2)


def _check_n(n):
    if not 1 <= n <= MAX_QUBITS:
        raise SizeGuardError(f"qubit count {n} outside [1, {MAX_QUBITS}]")


def dim_to_qubits(dim):
    n = int(dim).bit_length() - 1
    if n < 1 or 2**n != dim:
        raise DimensionError(f"length {dim} is not a power of two >= 2")
    return n


def index_to_bits(index, n):
    """Bits ``(k_1, ..., k_n)`` of basis index ``index``, most significant first."""
    _check_n(n)
    if not 0 <= index < 2**n:
        raise ContractError(f"index {index} outside [0, 2**{n})")
    return tuple((index >> (n - 1 - j)) & 1 for j in range(n))


def bits_to_index(bits):
    index = 0
    for b in bits:
        if b not in (0, 1):
            raise ContractError(f"bit value {b!r} is not 0 or 1")
        index = (index << 1) | b
    return index


def bit_table(n):
    """Array of shape ``(2**n, n)``; row ``i`` holds ``index_to_bits(i, n)``."""
    _check_n(n)
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def zero_bit_counts(n):
    """Number of 0-bits of each basis index (the eigenvalue of sum_j (sigma_z(j) + I)/2)."""
    _check_n(n)
    ones = np.zeros(2**n, dtype=np.int64)
    idx = np.arange(2**n, dtype=np.int64)
    for j in range(n):
        ones += (idx >> j) & 1
    return n - ones


def uniform_state(n):
    _check_n(n)
    return np.full(2**n, 2.0 ** (-n / 2))


def basis_state(n, index, dtype=float):
    _check_n(n)
    if not 0 <= index < 2**n:
        raise ContractError(f"index {index} outside [0, 2**{n})")
    v = np.zeros(2**n, dtype=dtype)
    v[index] = 1.0
    return v


def normalize(v):
    v = np.asarray(v)
    nrm = np.linalg.norm(v)
    if nrm == 0 or not np.isfinite(nrm):
        raise ContractError("cannot normalize a zero or non-finite vector")
    return v / nrm


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _as_real(a, what):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        if np.any(a.imag != 0):
            raise ContractError(f"{what} must be real")
        a = a.real
    return a.astype(float)


class Operator:
    """Common surface of all operator forms.  Subclasses are immutable."""

    n: int

    @property
    def dim(self):
        return 2**self.n

    def matvec(self, v):
        v = np.asarray(v)
        if v.shape[0] != self.dim or v.ndim not in (1, 2):
            raise DimensionError(
                f"vector of shape {v.shape} does not act on {self.n} qubits (dim {self.dim})")
        return self._apply(v)

    def _apply(self, v):
        raise NotImplementedError

    def to_dense(self):
        if self.n > MAX_DENSE_QUBITS:
            raise SizeGuardError(
                f"dense form of a {self.n}-qubit operator exceeds the cap of {MAX_DENSE_QUBITS}")
        return self._dense()

    def _dense(self):
        return self._apply(np.eye(self.dim))

    def expectation(self, v):
        v = np.asarray(v)
        return np.vdot(v, self.matvec(v))


@dataclass(frozen=True, eq=False)
class DiagonalOperator(Operator):
    """Operator diagonal in the computational basis."""

    diag: np.ndarray

    def __post_init__(self):
        d = _as_real(self.diag, "diagonal")
        if d.ndim != 1:
            raise ContractError("diagonal must be one-dimensional")
        object.__setattr__(self, "n", dim_to_qubits(d.size))
        _check_n(self.n)
        object.__setattr__(self, "diag", _readonly(d))

    def _apply(self, v):
        return self.diag * v if v.ndim == 1 else self.diag[:, None] * v

    def _dense(self):
        return np.diag(self.diag)

    def __repr__(self):
        return f"DiagonalOperator(n={self.n})"


@dataclass(frozen=True, eq=False)
class SeparableOperator(Operator):
    """``sum_j I x ... x M_j x ... x I`` for ``n`` Hermitian 2x2 blocks ``M_j``."""

    blocks: np.ndarray

    def __post_init__(self):
        b = _as_real(self.blocks, "blocks")
        if b.ndim != 3 or b.shape[1:] != (2, 2):
            raise ContractError(f"blocks must have shape (n, 2, 2), got {b.shape}")
        if np.any(b != np.swapaxes(b, 1, 2)):
            raise ContractError("every block must be symmetric")
        object.__setattr__(self, "n", b.shape[0])
        _check_n(self.n)
        object.__setattr__(self, "blocks", _readonly(b))

    @property
    def diagonal(self):
        """Diagonal of the full operator (cached; length ``2**n``)."""
        d = self.__dict__.get("_diag")
        if d is None:
            n = self.n
            idx = np.arange(2**n, dtype=np.int64)
            d = np.zeros(2**n)
            for j, m in enumerate(self.blocks):
                bit = (idx >> (n - 1 - j)) & 1
                d += np.where(bit == 0, m[0, 0], m[1, 1])
            d.setflags(write=False)
            self.__dict__["_diag"] = d
        return d

    @property
    def _tail(self):
        """Off-diagonal part of the last few qubits as one small dense block (cached)."""
        t = self.__dict__.get("_tail_cache")
        if t is None:
            L = min(self.n, _TAIL_QUBITS)
            k = np.zeros((2**L, 2**L))
            for i, m in enumerate(self.blocks[self.n - L:]):
                off = m[0, 1] * PAULI_X
                k += np.kron(np.kron(np.eye(2**i), off), np.eye(2 ** (L - i - 1)))
            t = (L, k)
            self.__dict__["_tail_cache"] = t
        return t

    def _apply(self, v):
        n = self.n
        v = np.ascontiguousarray(v)
        d = self.diagonal
        out = d * v if v.ndim == 1 else d[:, None] * v
        trailing = v.shape[1] if v.ndim == 2 else 1
        L, k = self._tail
        # short strides: one dense product over the trailing qubits
        if v.ndim == 1:
            out.reshape(-1, 2**L)[...] += v.reshape(-1, 2**L) @ k
        else:
            out.reshape(-1, 2**L, trailing)[...] += k @ v.reshape(-1, 2**L, trailing)
        for j, m in enumerate(self.blocks[: n - L]):
            c = m[0, 1]
            if c == 0:
                continue
            w = v.reshape(2**j, 2, 2 ** (n - j - 1) * trailing)
            o = out.reshape(w.shape)
            o[:, 0] += c * w[:, 1]
            o[:, 1] += c * w[:, 0]
        return out

    def _dense(self):
        n = self.n
        out = np.zeros((self.dim, self.dim))
        for j, m in enumerate(self.blocks):
            out += np.kron(np.kron(np.eye(2**j), m), np.eye(2 ** (n - j - 1)))
        return out

    def __repr__(self):
        return f"SeparableOperator(n={self.n})"


@dataclass(frozen=True, eq=False)
class SparseOperator(Operator):
    """Real symmetric operator stored in compressed-row form."""

    matrix: sp.csr_array

    def __post_init__(self):
        m = sp.csr_array(self.matrix)
        if np.iscomplexobj(m.data):
            if np.any(m.data.imag != 0):
                raise ContractError("sparse operator must be real")
            m = sp.csr_array(m.real)
        m = m.astype(float)
        if m.shape[0] != m.shape[1]:
            raise ContractError("sparse operator must be square")
        if (m != m.T).nnz:
            raise ContractError("sparse operator is not exactly symmetric")
        object.__setattr__(self, "n", dim_to_qubits(m.shape[0]))
        _check_n(self.n)
        m.data.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_dense(cls, a):
        return cls(sp.csr_array(np.asarray(a)))

    def _apply(self, v):
        return self.matrix @ v

    def _dense(self):
        return self.matrix.toarray()

    def __repr__(self):
        return f"SparseOperator(n={self.n}, nnz={self.matrix.nnz})"


@dataclass(frozen=True, eq=False)
class SumOperator(Operator):
    """Lazy weighted sum; ``matvec`` applies every term and adds."""

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ContractError("empty sum")
        ns = {op.n for _, op in self.terms}
        if len(ns) != 1:
            raise DimensionError(f"summands act on different qubit counts {sorted(ns)}")
        object.__setattr__(self, "n", ns.pop())

    def _apply(self, v):
        v = np.ascontiguousarray(v)
        out = None
        for c, op in self.terms:
            if c == 0:
                continue
            w = c * op._apply(v)
            out = w if out is None else out + w
        if out is None:
            out = np.zeros(v.shape, dtype=np.result_type(v, float))
        return out

    def __repr__(self):
        return f"SumOperator(n={self.n}, terms={len(self.terms)})"


def matvec(op: Operator, v) -> np.ndarray:
    return op.matvec(v)


def to_dense(op: Operator) -> np.ndarray:
    return op.to_dense()


def _terms(coef, op):
    if isinstance(op, SumOperator):
        return [(coef * c, o) for c, o in op.terms]
    return [(coef, op)]


def linear_combine(a: float, op1: Operator, b: float, op2: Operator) -> Operator:
    """``a*op1 + b*op2``, keeping the structured form when both summands share it."""
    if op1.n != op2.n:
        raise DimensionError(f"cannot combine {op1.n}- and {op2.n}-qubit operators")
    a, b = float(a), float(b)
    if isinstance(op1, DiagonalOperator) and isinstance(op2, DiagonalOperator):
        return DiagonalOperator(a * op1.diag + b * op2.diag)
    if isinstance(op1, SeparableOperator) and isinstance(op2, SeparableOperator):
        return SeparableOperator(a * op1.blocks + b * op2.blocks)
    if isinstance(op1, SparseOperator) and isinstance(op2, SparseOperator):
        return SparseOperator(a * op1.matrix + b * op2.matrix)
    return SumOperator(tuple(_terms(a, op1) + _terms(b, op2)))


def apply_local_product(blocks: Sequence[np.ndarray], v):
    """Apply ``B_1 x B_2 x ... x B_n`` (one 2x2 matrix per qubit) to ``v``."""
    blocks = np.asarray(blocks)
    n = blocks.shape[0]
    v = np.asarray(v)
    if v.shape[0] != 2**n:
        raise DimensionError(f"vector of length {v.shape[0]} does not act on {n} qubits")
    trailing = v.shape[1] if v.ndim == 2 else 1
    out = np.array(v, dtype=np.result_type(v, blocks), copy=True)
    L = min(n, _TAIL_QUBITS)
    head = n - L
    for j, m in enumerate(blocks[:head]):
        w = out.reshape(2**j, 2, 2 ** (n - j - 1) * trailing)
        w0 = w[:, 0].copy()
        w1 = w[:, 1]
        w[:, 0] = m[0, 0] * w0 + m[0, 1] * w1
        w[:, 1] = m[1, 0] * w0 + m[1, 1] * w1
    # the trailing qubits have short strides: apply their product as one dense block
    tail = blocks[head]
    for m in blocks[head + 1:]:
        tail = np.kron(tail, m)
    if v.ndim == 1:
        return (out.reshape(-1, 2**L) @ tail.T).reshape(-1)
    return (tail @ out.reshape(-1, 2**L, trailing)).reshape(out.shape)
