"""Eigensolvers: a dense oracle and a block Lanczos solver for the two lowest levels."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, SizeGuardError
from .hilbert import Operator

MAX_SPECTRUM_QUBITS = 12
DEGENERACY_RTOL = 1e-8
# Basis vectors times vector length kept in memory by the Krylov solver.
KRYLOV_MEMORY_WORDS = 2**25


def same_level(a, b, rtol=DEGENERACY_RTOL):
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def group_levels(values, rtol=DEGENERACY_RTOL):
    """Collapse sorted eigenvalues into ``(level, multiplicity)`` pairs."""
    levels = []
    for v in np.sort(np.asarray(values)):
        if levels and same_level(levels[-1][0], v, rtol):
            e, k = levels[-1]
            levels[-1] = (e, k + 1)
        else:
            levels.append((float(v), 1))
    return levels


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    multiplicities: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def levels(self, rtol=DEGENERACY_RTOL):
        if self.multiplicities is not None:
            return list(zip(self.eigenvalues.tolist(), self.multiplicities.tolist()))
        return group_levels(self.eigenvalues, rtol)


def dense_spectrum(op: Operator, vectors=False) -> SpectrumResult:
    """All eigenvalues (ascending) of the dense symmetric form."""
    if op.n > MAX_SPECTRUM_QUBITS:
        raise SizeGuardError(f"dense spectrum limited to {MAX_SPECTRUM_QUBITS} qubits")
    h = op.to_dense()
    if vectors:
        w, v = np.linalg.eigh(h)
    else:
        w, v = np.linalg.eigvalsh(h), None
    meta = {"solver": "dense"}
    if v is not None:
        res = np.linalg.norm(h @ v - v * w, axis=0)
        meta["max_residual"] = float(res.max())
    return SpectrumResult(w, v, meta=meta)


@dataclass
class LowestTwo:
    e0: float
    e1: float
    vectors: np.ndarray
    residuals: np.ndarray
    degenerate: bool
    iterations: int = 0
    matvecs: int = 0

    @property
    def gap(self):
        return self.e1 - self.e0


def _dense_lowest_two(op, tol):
    h = op.to_dense()
    w, v = np.linalg.eigh(h)
    res = np.linalg.norm(h @ v[:, :2] - v[:, :2] * w[:2], axis=0)
    deg = same_level(w[0], w[1], max(tol, DEGENERACY_RTOL))
    return LowestTwo(float(w[0]), float(w[1]), v[:, :2], res, deg)


def _orthonormalize_against(basis, w, rng, breakdown=1e-13):
    """Orthonormalize the columns of ``w`` against ``basis`` and each other.

    Column-wise Gram-Schmidt, repeating a projection pass while it removes more
    than half of the remaining norm.  A column that vanishes (exact invariant
    subspace) is replaced by a random direction with zero coupling.  Returns
    ``(q, coeffs, r)`` with ``w = basis @ coeffs + q @ r``.
    """
    N, m = w.shape
    coeffs = np.zeros((basis.shape[1], m))
    r = np.zeros((m, m))
    q = np.zeros((N, m))
    for j in range(m):
        x = w[:, j].copy()
        orig = np.linalg.norm(x)
        nrm = orig
        for _ in range(4):
            c = basis.T @ x
            x -= basis @ c
            coeffs[:, j] += c
            if j:
                d = q[:, :j].T @ x
                x -= q[:, :j] @ d
                r[:j, j] += d
            before, nrm = nrm, np.linalg.norm(x)
            if nrm > 0.5 * before:
                break
        if orig > 0 and nrm > breakdown * orig:
            q[:, j] = x / nrm
            r[j, j] = nrm
            continue
        x = rng.standard_normal(N)
        for _ in range(2):
            x -= basis @ (basis.T @ x)
            if j:
                x -= q[:, :j] @ (q[:, :j].T @ x)
        q[:, j] = x / np.linalg.norm(x)
    return q, coeffs, r


def lowest_two(op: Operator, tol=1e-10, *, guess=None, seed=0, block_size=3,
               max_basis=None, max_restarts=500, dense_below=None) -> LowestTwo:
    """Two lowest eigenpairs by thick-restart block Lanczos with full reorthogonalization.

    The starting block is the uniform state plus a seeded random perturbation,
    then random columns; ``guess`` columns (e.g. eigenvectors from a nearby
    ``s``) replace the leading ones but the last column always stays random.
    Convergence requires the explicitly recomputed residual of both pairs to be
    at most ``tol * max(1, |E|)``.  Spaces no larger than the basis budget are
    diagonalized densely.
    """
    N = op.dim
    p = block_size
    if max_basis is None:
        max_basis = int(min(60, max(6 * p, KRYLOV_MEMORY_WORDS // N)))
    max_basis = max(max_basis, 3 * p)
    if dense_below is None:
        dense_below = max_basis
    if N <= dense_below:
        return _dense_lowest_two(op, tol)

    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((N, p))
    x0[:, 0] = 1.0 + 1e-2 * x0[:, 0]
    if guess is not None:
        g = np.asarray(guess, dtype=float).reshape(N, -1)[:, : p - 1]
        x0[:, : g.shape[1]] = g + 1e-6 * x0[:, : g.shape[1]]

    V = np.zeros((N, max_basis + p), order="F")
    T = np.zeros((max_basis + p, max_basis + p))
    V[:, :p] = np.linalg.qr(x0)[0]
    done, nv = 0, p
    matvecs = 0
    best = np.inf
    for restart in range(max_restarts):
        while nv <= max_basis:
            w = op.matvec(np.ascontiguousarray(V[:, done:nv]))
            matvecs += p
            q, coeffs, r = _orthonormalize_against(V[:, :nv], w, rng)
            T[:nv, done:nv] = coeffs
            T[done:nv, :nv] = coeffs.T
            V[:, nv:nv + p] = q
            T[nv:nv + p, done:nv] = r
            T[done:nv, nv:nv + p] = r.T
            done, nv = nv, nv + p
            if done < 2 * p:
                continue
            theta, S = np.linalg.eigh(T[:done, :done])
            scale = np.maximum(1.0, np.abs(theta[:2]))
            est = np.linalg.norm(T[done:nv, :done] @ S[:, :2], axis=0)
            best = min(best, float(est.max()))
            if np.all(est <= 0.5 * tol * scale):
                y = V[:, :done] @ S[:, :2]
                res = np.linalg.norm(op.matvec(y) - y * theta[:2], axis=0)
                matvecs += 2
                if np.all(res <= tol * scale):
                    deg = same_level(theta[0], theta[1], max(tol, DEGENERACY_RTOL))
                    return LowestTwo(float(theta[0]), float(theta[1]), y, res, deg,
                                     iterations=restart + 1, matvecs=matvecs)
                # Krylov relation has drifted: restart from the Ritz vectors.
                x0 = np.column_stack([y, rng.standard_normal((N, p - 2))])
                V[:, :p] = np.linalg.qr(x0)[0]
                T[:] = 0.0
                done, nv = 0, p
                break
        else:
            theta, S = np.linalg.eigh(T[:done, :done])
            keep = min(done - p, max(2 + p, done // 2))
            Y = V[:, :done] @ S[:, :keep]
            B = T[done:nv, :done] @ S[:, :keep]
            last = V[:, done:nv].copy()
            V[:, :keep] = Y
            V[:, keep:keep + p] = last
            T[:] = 0.0
            T[:keep, :keep] = np.diag(theta[:keep])
            T[keep:keep + p, :keep] = B
            T[:keep, keep:keep + p] = B.T
            done, nv = keep, keep + p
    raise ConvergenceError(f"block Lanczos did not converge in {max_restarts} restarts",
                           best_residual=best)


def ritz_pairs(op: Operator, basis: np.ndarray):
    """Rayleigh-Ritz projection onto an orthonormal basis; returns (values, vectors)."""
    hb = op.matvec(basis)
    w, s = sla.eigh(basis.T @ hb)
    return w, basis @ s
