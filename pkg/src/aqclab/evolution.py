"""Time-dependent Schrodinger propagation along H(s(t)) and adiabatic runtime studies.

The stepper is the fourth-order commutator-free Magnus scheme with two Gauss
nodes.  Each stage is an exponential ``exp(-i h B) psi`` of a fixed linear
combination ``B = c0 h0 + c1 h1``, computed by a Lanczos approximation whose
a-posteriori error bound is enforced.  Every stage is unitary up to that bound,
so the state is never renormalized and the norm drift is a genuine diagnostic.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .builders import InterpolatingFamily
from .eigen import MAX_SPECTRUM_QUBITS, DEGENERACY_RTOL, lowest_two
from .errors import ContractError, IntegratorError
from .gaps import gap_sweep
from .hilbert import (
    DiagonalOperator,
    Operator,
    SeparableOperator,
    apply_local_product,
    uniform_state,
)
from .io import write_csv, write_json

NORM_DRIFT_LIMIT = 1e-8
KRYLOV_TOL_FLOOR = 1e-15

_SQ3 = math.sqrt(3.0)
_C1, _C2 = 0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0
_A_BIG, _A_SMALL = (3.0 + 2.0 * _SQ3) / 12.0, (3.0 - 2.0 * _SQ3) / 12.0
# fourth-order triple-jump composition of the symmetric splitting
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1


def expm_krylov(op: Operator, v, tau, tol=1e-12, max_dim=40):
    """``exp(-1j * tau * op) @ v`` by Lanczos with full reorthogonalization.

    The subspace grows until ``|beta_0 beta_m e_m^T exp(-i tau T_m) e_1| <= tol * |v|``;
    if ``max_dim`` is not enough the interval is halved.  Returns ``(w, matvecs)``.
    """
    v = np.asarray(v, dtype=complex)
    # below this the error estimate is roundoff and can never pass
    tol = max(tol, KRYLOV_TOL_FLOOR)
    beta0 = np.linalg.norm(v)
    if beta0 == 0 or tau == 0:
        return v.copy(), 0
    N = v.shape[0]
    m_cap = min(max_dim, N)
    Q = np.zeros((N, m_cap + 1), dtype=complex)
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)
    Q[:, 0] = v / beta0
    matvecs = 0
    for j in range(m_cap):
        w = op.matvec(Q[:, j])
        matvecs += 1
        alpha[j] = np.vdot(Q[:, j], w).real
        for _ in range(2):
            w -= Q[:, : j + 1] @ (w.conj() @ Q[:, : j + 1]).conj()
        beta[j] = np.linalg.norm(w)
        k = j + 1
        scale = max(1.0, abs(alpha[j]) + beta[j] + (beta[j - 1] if j else 0.0))
        breakdown = beta[j] <= 1e-14 * scale
        # the error bound is evaluated on every other dimension to save small eigensolves
        if breakdown or k == m_cap or k % 2 == 0:
            theta, S = _tridiag_eigh(alpha[:k], beta[: k - 1])
            y = S @ (np.exp(-1j * tau * theta) * S[0])
            if breakdown or beta[j] * abs(y[-1]) <= tol:
                return beta0 * (Q[:, :k] @ y), matvecs
        Q[:, k] = w / beta[j]
    half, mv1 = expm_krylov(op, v, tau / 2, tol / 2, max_dim)
    out, mv2 = expm_krylov(op, half, tau / 2, tol / 2, max_dim)
    return out, matvecs + mv1 + mv2


def _tridiag_eigh(a, b):
    if a.size == 1:
        return a.copy(), np.ones((1, 1))
    return sla.eigh_tridiagonal(a, b)


def linear_schedule(u):
    return u


def _check_schedule(schedule):
    u = np.linspace(0.0, 1.0, 1001)
    s = np.array([schedule(x) for x in u], dtype=float)
    if abs(s[0]) > 1e-15 or abs(s[-1] - 1.0) > 1e-15:
        raise ContractError("schedule must map 0 to 0 and 1 to 1")
    if np.any(np.diff(s) < 0):
        raise ContractError("schedule must be monotone non-decreasing")


@dataclass
class EvolutionSpec:
    family: InterpolatingFamily
    T: float
    schedule: Callable[[float], float] = linear_schedule
    tol: float = 1e-8          # local error per step, 2-norm
    samples: int = 101         # trace points at t = k T / (samples - 1)
    track_overlap: bool = True
    krylov_tol: float = 1e-12
    propagator: str = "krylov"  # or "split" (needs a separable h0 and a diagonal h1)
    initial_step: Optional[float] = None
    min_step: float = 1e-12    # relative to T

    def __post_init__(self):
        if not self.T > 0:
            raise ContractError(f"total time must be positive, got {self.T}")
        if self.samples < 2:
            raise ContractError("trace needs at least the two endpoints")
        if self.tol <= 0:
            raise ContractError("tolerance must be positive")
        if self.propagator not in ("krylov", "split"):
            raise ContractError(f"unknown propagator {self.propagator!r}")
        _check_schedule(self.schedule)

    def s_at(self, t):
        return float(self.schedule(min(max(t / self.T, 0.0), 1.0)))


@dataclass
class EvolutionResult:
    t: np.ndarray
    s: np.ndarray
    overlap: np.ndarray        # instantaneous ground-space population (nan if untracked)
    norm2: np.ndarray          # <psi|psi> at each trace point
    fidelity: float
    state: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def norm_drift(self):
        return np.abs(self.norm2 - self.norm2[0])

    def to_csv(self, path):
        return write_csv(path, ["t", "s", "overlap", "norm"],
                         zip(self.t, self.s, self.overlap, self.norm2))


def ground_projector(op: Operator, tol=1e-10):
    """Orthonormal basis of the lowest eigenspace (columns), using the cheapest exact path."""
    if isinstance(op, DiagonalOperator):
        d = op.diag
        idx = np.flatnonzero(d <= d.min() + DEGENERACY_RTOL * max(1.0, abs(d.min())))
        basis = np.zeros((d.size, idx.size))
        basis[idx, np.arange(idx.size)] = 1.0
        return basis
    if isinstance(op, SeparableOperator) and np.all(op.blocks[:, 0, 1] < 0) and np.all(
            op.blocks[:, 0, 0] == -op.blocks[:, 0, 1]):
        return uniform_state(op.n)[:, None]
    if op.n <= MAX_SPECTRUM_QUBITS:
        w, v = np.linalg.eigh(op.to_dense())
        k = int(np.count_nonzero(w <= w[0] + DEGENERACY_RTOL * max(1.0, abs(w[0]))))
        return v[:, :k]
    res = lowest_two(op, tol=tol)
    return res.vectors if res.degenerate else res.vectors[:, :1]


def ground_population(basis, psi):
    return float(np.sum(np.abs(basis.T @ psi) ** 2))


class _Stepper:
    """Commutator-free Magnus step; each stage exponential by Krylov or by splitting."""

    def __init__(self, spec: EvolutionSpec):
        self.spec = spec
        self.fam = spec.family
        self.matvecs = 0
        split_ok = isinstance(self.fam.h0, SeparableOperator) and isinstance(
            self.fam.h1, DiagonalOperator)
        mode = spec.propagator
        if mode == "split" and not split_ok:
            raise ContractError("splitting needs a separable h0 and a diagonal h1")
        self.mode = mode
        if mode == "split":
            lam, vec = np.linalg.eigh(self.fam.h0.blocks)
            self._lam, self._vec = lam, vec
            self._e1 = np.asarray(self.fam.h1.diag)

    def _flow0(self, psi, tau):
        # exp(-i tau h0) as a product of exact single-qubit exponentials
        phases = np.exp(-1j * tau * self._lam)
        blocks = np.einsum("jab,jb,jcb->jac", self._vec, phases, self._vec)
        return apply_local_product(blocks, psi)

    def _split_exp(self, psi, h, c0, c1):
        e1 = self._e1
        for k, w in enumerate((_W1, _W0, _W1)):
            half = np.exp(-0.5j * w * h * c1 * e1)
            psi = half * psi
            psi = self._flow0(psi, w * h * c0)
            psi = half * psi
            self.matvecs += 1
        return psi

    def _stage(self, psi, h, ta, tb, wa, wb):
        sa, sb = self.spec.s_at(ta), self.spec.s_at(tb)
        c0 = wa * (1.0 - sa) + wb * (1.0 - sb)
        c1 = wa * sa + wb * sb
        if self.mode == "split":
            return self._split_exp(psi, h, c0, c1)
        out, mv = expm_krylov(self.fam.combo(c0, c1), psi, h, tol=self.spec.krylov_tol)
        self.matvecs += mv
        return out

    def step(self, psi, t, h):
        ta, tb = t + _C1 * h, t + _C2 * h
        psi = self._stage(psi, h, ta, tb, _A_BIG, _A_SMALL)
        return self._stage(psi, h, ta, tb, _A_SMALL, _A_BIG)


def evolve(spec: EvolutionSpec, initial=None) -> EvolutionResult:
    """Integrate ``i dpsi/dt = H(s(t)) psi`` from ``t=0`` to ``T`` with adaptive steps.

    Local error is estimated by step doubling (difference of one full step and
    two half steps, divided by 15) and kept below ``spec.tol``; the two-half-step
    state is propagated.
    """
    fam = spec.family
    T = spec.T
    if initial is None:
        basis0 = ground_projector(fam.h0)
        if basis0.shape[1] != 1:
            raise ContractError("initial Hamiltonian has a degenerate ground space; pass a state")
        psi = basis0[:, 0].astype(complex)
    else:
        psi = np.array(initial, dtype=complex)
        if psi.shape != (fam.h0.dim,):
            raise ContractError(f"initial state has shape {psi.shape}, expected ({fam.h0.dim},)")
    norm0 = float(np.vdot(psi, psi).real)
    stepper = _Stepper(spec)
    sample_t = np.linspace(0.0, T, spec.samples)
    s_vals = np.array([spec.s_at(x) for x in sample_t])
    overlap = np.full(spec.samples, np.nan)
    norm2 = np.zeros(spec.samples)
    energy0 = float(fam.at(spec.s_at(0.0)).expectation(psi).real / norm0)

    def record(k, psi):
        norm2[k] = float(np.vdot(psi, psi).real)
        if abs(norm2[k] - norm0) > NORM_DRIFT_LIMIT:
            raise IntegratorError(f"norm drift {abs(norm2[k] - norm0):.3e} exceeds "
                                  f"{NORM_DRIFT_LIMIT}", t=float(sample_t[k]))
        if spec.track_overlap and 0 < k < spec.samples - 1:
            overlap[k] = ground_population(ground_projector(fam.at(s_vals[k])), psi) / norm2[k]

    if spec.track_overlap:
        overlap[0] = ground_population(ground_projector(fam.at(s_vals[0])), psi) / norm0
    norm2[0] = norm0
    h = spec.initial_step or min(T / 10.0, 0.1)
    h_min = spec.min_step * T
    t = 0.0
    accepted = rejected = 0
    for k in range(1, spec.samples):
        t_next = sample_t[k]
        while t < t_next - 1e-14 * T:
            h_try = min(h, t_next - t)
            last = h_try >= t_next - t
            full = stepper.step(psi, t, h_try)
            half = stepper.step(stepper.step(psi, t, h_try / 2), t + h_try / 2, h_try / 2)
            err = float(np.linalg.norm(half - full)) / 15.0
            if err <= spec.tol:
                psi = half
                t = t_next if last else t + h_try
                accepted += 1
            else:
                rejected += 1
            factor = 2.0 if err == 0 else min(2.0, max(0.2, 0.9 * (spec.tol / err) ** 0.2))
            if err <= spec.tol and last:
                h = max(h, h_try * factor)
            else:
                h = h_try * factor
            if h < h_min:
                raise IntegratorError(f"step size {h:.3e} underflows at t={t:.6g}", t=t)
        record(k, psi)
    final_basis = ground_projector(fam.at(s_vals[-1]))
    fidelity = ground_population(final_basis, psi) / norm2[-1]
    if spec.track_overlap:
        overlap[-1] = fidelity
    stats = {"accepted": accepted, "rejected": rejected, "matvecs": stepper.matvecs,
             "energy0": energy0, "max_norm_drift": float(np.max(np.abs(norm2 - norm0))),
             "final_ground_dim": int(final_basis.shape[1]), "propagator": stepper.mode}
    return EvolutionResult(sample_t, s_vals, overlap, norm2, float(fidelity), psi, stats)


def final_fidelity(family: InterpolatingFamily, T, tol=1e-8, schedule=linear_schedule):
    """Ground-space population at ``t=T`` starting from the ground state of h0."""
    spec = EvolutionSpec(family, T, schedule=schedule, tol=tol, samples=2, track_overlap=False)
    return evolve(spec).fidelity


class BracketError(RuntimeError):
    """The fidelity target was not reached within the allowed runtimes."""

    def __init__(self, message, curve):
        super().__init__(message)
        self.curve = curve


@dataclass
class ScalingRow:
    n: int
    g_min: float
    s_star: float
    T_star: float
    fidelity: float
    bracket: tuple
    curve: list

    def to_dict(self):
        return {"n": self.n, "g_min": self.g_min, "s_star": self.s_star, "T_star": self.T_star,
                "fidelity": self.fidelity, "bracket": list(self.bracket),
                "curve": [list(c) for c in self.curve]}


def find_runtime(family, f_star, *, T_max=None, rel_width=0.02, tol=1e-6, expand=6):
    """Locate T* where the final fidelity first exceeds ``f_star``, to relative width ``rel_width``.

    A doubling scan from ``T=1`` up to ``T_max`` (default ``2**(n+6)``, then ``expand``
    more doublings) finds a bracket ``[T/2, T]``.  The bracket is then narrowed by
    interpolating ``ln(1 - F)`` linearly in ``T`` and evaluating a pair of points
    straddling the estimate, falling back to log-space bisection when the pair
    does not separate.  Returns ``(T_star, fidelity, bracket, curve)``; ``curve``
    lists every evaluated ``(T, F)``.
    """
    if not 0.5 < f_star < 1:
        raise ContractError(f"fidelity target must lie in (0.5, 1), got {f_star}")
    n = family.n
    T_max = float(2 ** (n + 6)) if T_max is None else float(T_max)
    curve = []

    def F(T):
        f = final_fidelity(family, T, tol=tol)
        curve.append((float(T), f))
        return f

    T = 1.0
    f = F(T)
    if f >= f_star:
        lo, f_lo = T, f
        while f_lo >= f_star and lo > 2.0**-10:
            lo /= 2
            f_lo = F(lo)
        if f_lo >= f_star:
            return lo, f_lo, (0.0, lo), curve
        hi, f_hi = 2 * lo, curve[-2][1]
    else:
        while f < f_star:
            if T >= T_max * 2**expand:
                raise BracketError(f"fidelity {f:.4g} < {f_star} up to T={T:g}", curve)
            T *= 2
            f = F(T)
        lo, f_lo, hi, f_hi = T / 2, curve[-2][1], T, f
    target = math.log(1.0 - f_star)
    while hi / lo > 1.0 + rel_width:
        g_lo, g_hi = math.log(max(1.0 - f_lo, 1e-300)), math.log(max(1.0 - f_hi, 1e-300))
        est = lo + (hi - lo) * (target - g_lo) / (g_hi - g_lo) if g_hi != g_lo else math.sqrt(lo * hi)
        half = 0.45 * rel_width
        a, b = est / (1.0 + half), est * (1.0 + half)
        if not lo < a < b < hi:
            a = b = math.sqrt(lo * hi)
        fa = F(a)
        if fa >= f_star:
            hi, f_hi = a, fa
            continue
        lo, f_lo = a, fa
        if b > a and hi / lo > 1.0 + rel_width:
            fb = F(b)
            if fb >= f_star:
                hi, f_hi = b, fb
            else:
                lo, f_lo = b, fb
    return hi, f_hi, (lo, hi), curve


@dataclass
class ScalingStudy:
    rows: list
    f_star: float
    family: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def ns(self):
        return np.array([r.n for r in self.rows])

    @property
    def T_star(self):
        return np.array([r.T_star for r in self.rows])

    @property
    def g_min(self):
        return np.array([r.g_min for r in self.rows])

    def fits(self):
        out = {}
        if len(self.rows) >= 2:
            out["log2_T_vs_n"] = _fit(self.ns, np.log2(self.T_star))
            x = np.log(1.0 / self.g_min)
            if np.ptp(x) > 1e-9:
                out["logT_vs_log_inv_gmin"] = _fit(x, np.log(self.T_star))
        return out

    def to_dict(self):
        return {"family": self.family, "f_star": self.f_star,
                "rows": [r.to_dict() for r in self.rows], "fits": self.fits(), "meta": self.meta}

    def to_csv(self, path):
        rows = [(r.n, r.g_min, r.s_star, r.T_star, r.fidelity, r.bracket[0], r.bracket[1])
                for r in self.rows]
        return write_csv(path, ["n", "g_min", "s_star", "T_star", "fidelity", "T_lo", "T_hi"], rows)

    def to_json(self, path):
        return write_json(path, self.to_dict())


def _fit(x, y):
    slope, intercept = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return {"slope": float(slope), "intercept": float(intercept)}


def runtime_scaling_study(make_family: Callable[[int], InterpolatingFamily], sizes: Sequence[int],
                          f_star=0.9, *, grid=101, tol=1e-6, rel_width=0.02, workers=1,
                          name="") -> ScalingStudy:
    """For each size: g_min from a gap sweep and the runtime T* reaching fidelity ``f_star``."""

    def one(n):
        fam = make_family(n)
        prof = gap_sweep(fam, grid)
        T_star, f, bracket, curve = find_runtime(fam, f_star, tol=tol, rel_width=rel_width)
        return ScalingRow(int(n), prof.g_min, prof.s_star, float(T_star), float(f),
                          tuple(float(b) for b in bracket), curve)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, sizes))
    else:
        rows = [one(n) for n in sizes]
    return ScalingStudy(rows, f_star, family=name,
                        meta={"grid": grid, "tol": tol, "rel_width": rel_width})
