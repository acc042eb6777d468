"""Gap profiles along the interpolation, minimum-gap refinement and level diagnostics."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .builders import InterpolatingFamily
from .eigen import (
    DEGENERACY_RTOL,
    MAX_SPECTRUM_QUBITS,
    SpectrumResult,
    lowest_two,
    same_level,
)
from .errors import ContractError, ConvergenceError, SizeGuardError
from .hilbert import basis_state, uniform_state
from .io import write_csv, write_json

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
CROSSING_TOL = 1e-10


def uniform_grid(count):
    if count < 3:
        raise ContractError("a gap sweep needs at least 3 grid points")
    return np.linspace(0.0, 1.0, int(count))


def golden_section(f, a, b, xtol=1e-6, ftol=1e-10, max_iter=200):
    """Minimize a unimodal ``f`` on ``[a, b]``.

    Stops once the bracket is narrower than ``xtol`` or the best value moved by
    less than ``ftol`` in an iteration.  Returns ``(x, fx, iterations, bracket)``.
    """
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 <= f2 else (x2, f2)
    it = 0
    while it < max_iter and b - a > xtol:
        it += 1
        prev = best_f
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
            if f1 < best_f:
                best_x, best_f = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
            if f2 < best_f:
                best_x, best_f = x2, f2
        if 0 < abs(prev - best_f) < ftol:
            break
    return best_x, best_f, it, (a, b)


def _is_unimodal(values):
    d = np.sign(np.diff(values))
    d = d[d != 0]
    return np.count_nonzero(np.diff(d) < 0) == 0  # never rises then falls


@dataclass
class GapProfile:
    family: str
    n: int
    s: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    residuals: np.ndarray
    degenerate: np.ndarray
    g_min: float
    s_star: float
    refinement: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def gaps(self):
        return self.e1 - self.e0

    def to_csv(self, path):
        rows = zip(self.s, self.e0, self.e1, self.gaps, self.residuals[:, 0], self.residuals[:, 1])
        return write_csv(path, ["s", "E0", "E1", "gap", "residual0", "residual1"], rows)

    def to_dict(self):
        return {
            "family": self.family,
            "n": self.n,
            "s": self.s.tolist(),
            "E0": self.e0.tolist(),
            "E1": self.e1.tolist(),
            "residuals": self.residuals.tolist(),
            "degenerate": [bool(d) for d in self.degenerate],
            "g_min": float(self.g_min),
            "s_star": float(self.s_star),
            "refinement": self.refinement,
            "meta": self.meta,
        }

    def to_json(self, path):
        return write_json(path, self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=d["family"], n=int(d["n"]),
            s=np.array(d["s"], dtype=float),
            e0=np.array(d["E0"], dtype=float), e1=np.array(d["E1"], dtype=float),
            residuals=np.array(d["residuals"], dtype=float).reshape(-1, 2),
            degenerate=np.array(d["degenerate"], dtype=bool),
            g_min=float(d["g_min"]), s_star=float(d["s_star"]),
            refinement=d.get("refinement", {}), meta=d.get("meta", {}),
        )

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


class _Evaluator:
    """Evaluates ``(E0, E1)`` of ``H(s)`` and caches eigenvectors for warm starts."""

    def __init__(self, family, tol, solver, seed):
        if solver not in ("iterative", "dense"):
            raise ContractError(f"unknown solver {solver!r}")
        if solver == "dense" and family.n > MAX_SPECTRUM_QUBITS:
            raise SizeGuardError(f"dense solver limited to {MAX_SPECTRUM_QUBITS} qubits")
        self.family, self.tol, self.solver, self.seed = family, tol, solver, seed
        self.vectors = {}
        self.count = 0

    def _nearest_guess(self, s):
        if not self.vectors:
            return None
        key = min(self.vectors, key=lambda x: abs(x - s))
        return self.vectors[key]

    def __call__(self, s, warm=True):
        self.count += 1
        h = self.family.at(s)
        if self.solver == "dense":
            m = h.to_dense()
            w, v = sla.eigh(m, subset_by_index=[0, 1])
            res = np.linalg.norm(m @ v - v * w, axis=0)
            out = (float(w[0]), float(w[1]), res, same_level(w[0], w[1]), v)
        else:
            guess = self._nearest_guess(s) if warm else None
            try:
                r = lowest_two(h, self.tol, guess=guess, seed=self.seed)
            except ConvergenceError as exc:
                raise ConvergenceError(f"solver failed at s={s}: {exc}",
                                       best_residual=exc.best_residual, s=s) from exc
            out = (r.e0, r.e1, r.residuals, r.degenerate, r.vectors)
        if warm:
            self.vectors[float(s)] = out[4]
        return out


def gap_sweep(family: InterpolatingFamily, grid=101, tol=1e-10, *, solver="iterative",
              mode="warm", workers=None, seed=0, xtol=1e-6, ftol=1e-10,
              max_densify=3) -> GapProfile:
    """Sample ``g(s) = E1 - E0`` on ``grid`` and refine its minimum by golden section.

    ``mode="warm"`` walks the grid sequentially reusing eigenvectors as starting
    blocks; ``mode="parallel"`` solves every sample cold on a thread pool.
    Before refining, the bracket around the smallest sampled gap is probed for
    unimodality and resampled ten times finer if the probe fails.
    """
    s = uniform_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    if s.size < 3 or np.any(np.diff(s) <= 0) or s[0] != 0.0 or s[-1] != 1.0:
        raise ContractError("grid must be increasing, have >= 3 points and include 0 and 1")
    ev = _Evaluator(family, tol, solver, seed)
    if mode == "warm":
        results = [ev(x) for x in s]
    elif mode == "parallel":
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x: ev(x, warm=False), s))
        for x, r in zip(s, results):
            ev.vectors[float(x)] = r[4]
    else:
        raise ContractError(f"unknown mode {mode!r}")
    e0 = np.array([r[0] for r in results])
    e1 = np.array([r[1] for r in results])
    res = np.array([r[2] for r in results])
    deg = np.array([r[3] for r in results])
    gaps = e1 - e0

    samples = dict(zip(s.tolist(), gaps.tolist()))

    def g(x):
        x = float(x)
        if x not in samples:
            a, b, *_ = ev(x)
            samples[x] = b - a
        return samples[x]

    i = int(np.argmin(gaps))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, s.size - 1)]
    densified = 0
    while densified < max_densify:
        probe = np.linspace(lo, hi, 5)
        if _is_unimodal([g(x) for x in probe]):
            break
        densified += 1
        fine = np.linspace(lo, hi, 21)
        vals = np.array([g(x) for x in fine])
        j = int(np.argmin(vals))
        lo, hi = fine[max(j - 1, 0)], fine[min(j + 1, fine.size - 1)]

    x_best, g_best, iters, final = golden_section(g, lo, hi, xtol=xtol, ftol=ftol)
    s_min_sample = min(samples, key=samples.get)
    if samples[s_min_sample] < g_best:
        x_best, g_best = s_min_sample, samples[s_min_sample]
    refinement = {
        "bracket": [float(lo), float(hi)],
        "final_interval": [float(final[0]), float(final[1])],
        "iterations": iters,
        "xtol": xtol,
        "ftol": ftol,
        "densified": densified,
        "evaluations": ev.count,
    }
    meta = {"solver": solver, "mode": mode, "tol": tol, "seed": seed,
            "max_residual": float(res.max())}
    return GapProfile(family.name, family.n, s, e0, e1, res, deg, float(g_best),
                      float(x_best), refinement, meta)


def separable_levels(n, s):
    """Distinct energies ``E_k(s) = (n/2)(1 - r) + k r`` with ``r = sqrt(1 - 2s + 2s^2)``."""
    r = math.sqrt(1.0 - 2.0 * s + 2.0 * s * s)
    return 0.5 * n * (1.0 - r) + r * np.arange(n + 1)


def separable_closed_form(n, s) -> SpectrumResult:
    if not 0.0 <= s <= 1.0:
        raise ContractError("s must lie in [0, 1]")
    mult = np.array([math.comb(n, k) for k in range(n + 1)])
    return SpectrumResult(separable_levels(n, s), multiplicities=mult,
                          meta={"solver": "closed-form"})


class SubspaceRankError(ContractError):
    """Invariant closure grew past the allowed dimension."""


@dataclass
class ReducedProblem:
    basis: np.ndarray
    h0: np.ndarray
    h1: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[1]

    def matrix(self, s):
        return (1.0 - s) * self.h0 + s * self.h1

    def spectrum(self, s):
        return np.linalg.eigvalsh(self.matrix(s))

    def gap(self, s):
        w = self.spectrum(s)
        return w[1] - w[0]


def reduced_search_subspace(family: InterpolatingFamily, t=None, rank_tol=1e-10,
                            max_dim=None) -> ReducedProblem:
    """Smallest subspace holding the target and uniform states that both generators preserve.

    Built by repeatedly applying ``h0`` and ``h1`` with twice-repeated
    Gram-Schmidt; a new direction counts when its norm after projection exceeds
    ``rank_tol`` relative to the norm before.
    """
    t = family.target if t is None else t
    if t is None:
        raise ContractError("a target index is required")
    n = family.n
    max_dim = n + 2 if max_dim is None else max_dim
    basis = []

    def add(w):
        before = np.linalg.norm(w)
        if before == 0:
            return False
        for _ in range(2):
            for q in basis:
                w = w - np.dot(q, w) * q
        after = np.linalg.norm(w)
        if after <= rank_tol * before:
            return False
        basis.append(w / after)
        if len(basis) > max_dim:
            raise SubspaceRankError(
                f"closure dimension exceeds {max_dim}; the family lacks the expected symmetry")
        return True

    add(basis_state(n, t))
    add(uniform_state(n))
    i = 0
    while i < len(basis):
        q = basis[i]
        add(family.h0.matvec(q))
        add(family.h1.matvec(q))
        i += 1
    B = np.column_stack(basis)
    r0 = B.T @ family.h0.matvec(B)
    r1 = B.T @ family.h1.matvec(B)
    return ReducedProblem(B, 0.5 * (r0 + r0.T), 0.5 * (r1 + r1.T))


def reduced_gap_minimum(problem: ReducedProblem, grid=201, xtol=1e-12):
    """Minimum of the reduced gap: grid scan then golden section on the bracketing triple."""
    s = uniform_grid(grid)
    gaps = np.array([problem.gap(x) for x in s])
    i = int(np.argmin(gaps))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, s.size - 1)]
    x, gx, _, _ = golden_section(problem.gap, lo, hi, xtol=xtol, ftol=0.0)
    if gaps[i] < gx:
        x, gx = s[i], gaps[i]
    return float(x), float(gx)


def _dense_eig(family, s, count):
    if family.n > MAX_SPECTRUM_QUBITS:
        raise SizeGuardError(f"level diagnostics limited to {MAX_SPECTRUM_QUBITS} qubits")
    m = family.at(s).to_dense()
    count = min(count, m.shape[0])
    return sla.eigh(m, subset_by_index=[0, count - 1])


@dataclass
class LevelScan:
    s: np.ndarray
    energies: np.ndarray   # (grid, levels), column j follows one tracked level
    labels: np.ndarray     # (grid, levels), sorted position -> tracked level id


def track_levels(family: InterpolatingFamily, grid, levels=4) -> LevelScan:
    """Follow the lowest ``levels`` states across ``grid`` by maximal eigenvector overlap."""
    s = np.asarray(grid, dtype=float)
    prev = None
    energies = np.zeros((s.size, levels))
    labels = np.zeros((s.size, levels), dtype=int)
    ids = np.arange(levels)
    for i, x in enumerate(s):
        w, v = _dense_eig(family, x, levels)
        if prev is not None:
            overlap = np.abs(prev.T @ v) ** 2
            rows, cols = linear_sum_assignment(-overlap)
            new_ids = np.empty(levels, dtype=int)
            new_ids[cols] = ids[rows]
            ids = new_ids
        labels[i] = ids
        energies[i, ids] = w
        prev = v
    return LevelScan(s, energies, labels)


@dataclass
class CrossingEvent:
    s: float
    lower: int
    upper: int
    separation: float
    kind: str
    swapped: bool
    heuristic: bool = True
    levels: tuple = ()
    target_overlap: Optional[tuple] = None

    def to_dict(self):
        return {"s": self.s, "lower": self.lower, "upper": self.upper,
                "separation": self.separation, "kind": self.kind, "swapped": self.swapped,
                "heuristic": self.heuristic, "levels": list(self.levels),
                "target_overlap": None if self.target_overlap is None else list(self.target_overlap)}


def _eigenspace(w, v, k):
    sel = [j for j in range(len(w)) if same_level(w[j], w[k])]
    return v[:, sel]


def detect_crossings(family: InterpolatingFamily, grid=201, window=0.1, levels=4,
                     target=None) -> list:
    """Dips of adjacent-level separation below ``window`` among the lowest ``levels``.

    Each dip is refined by golden section.  It is labelled ``crossing`` when the
    refined separation is below 1e-10 and the lower state before the dip moves
    into the upper level's eigenspace after it; otherwise ``avoided``.  The
    classification is a heuristic and every event says so.
    """
    s = uniform_grid(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    target = family.target if target is None else target
    levels = min(levels, 2**family.n - 1)
    depth = levels + 1
    spectra = [_dense_eig(family, x, depth + 1) for x in s]
    w_all = np.array([w[:depth] for w, _ in spectra])
    events = []
    for k in range(levels):
        d = w_all[:, k + 1] - w_all[:, k]
        for i in range(1, s.size - 1):
            # endpoint minima are symmetry degeneracies of h0 or h1, not dips
            if d[i] >= window:
                continue
            if not (d[i] <= d[i - 1] and d[i] < d[i + 1]):
                continue
            if max(d[i - 1], d[i + 1]) <= DEGENERACY_RTOL * max(1.0, abs(w_all[i, k])):
                continue  # persistent degeneracy, not a dip
            lo, hi = s[i - 1], s[i + 1]

            def sep(x, k=k):
                w = sla.eigh(family.at(x).to_dense(), subset_by_index=[k, k + 1],
                             eigvals_only=True)
                return w[1] - w[0]

            x, dx, _, _ = golden_section(sep, lo, hi, xtol=1e-13, ftol=0.0)
            if d[i] < dx:
                x, dx = s[i], d[i]
            wl, vl = _dense_eig(family, lo, depth + 1)
            wr, vr = _dense_eig(family, hi, depth + 1)
            before = vl[:, k]
            stay = np.linalg.norm(_eigenspace(wr, vr, k).T @ before) ** 2
            move = np.linalg.norm(_eigenspace(wr, vr, k + 1).T @ before) ** 2
            swapped = bool(move > stay)
            kind = "crossing" if dx < CROSSING_TOL and swapped else "avoided"
            wx, vx = _dense_eig(family, x, k + 2)
            overlap = None
            if target is not None:
                overlap = (float(vx[target, k] ** 2), float(vx[target, k + 1] ** 2))
            events.append(CrossingEvent(float(x), k, k + 1, float(dx), kind, swapped,
                                        levels=(float(wx[k]), float(wx[k + 1])),
                                        target_overlap=overlap))
    events.sort(key=lambda e: (e.s, e.lower))
    return events


def compare_profiles(a: GapProfile, b: GapProfile) -> dict:
    """Per-sample gap differences and the ratio / shift of the refined minima."""
    if a.s.shape != b.s.shape or np.any(a.s != b.s):
        raise ContractError("profiles were sampled on different grids")
    diff = a.gaps - b.gaps
    return {
        "families": [a.family, b.family],
        "s": a.s.tolist(),
        "gap_difference": diff.tolist(),
        "max_abs_difference": float(np.max(np.abs(diff))),
        "g_min": [a.g_min, b.g_min],
        "g_min_ratio": a.g_min / b.g_min if b.g_min != 0 else math.inf,
        "s_star_shift": b.s_star - a.s_star,
    }
