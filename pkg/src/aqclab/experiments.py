"""One runner per experiment kind.  Each writes its artifacts into ``out`` and
returns ``(files, summary)``; the CLI wraps them with the manifest."""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .builders import save_energies_csv
from .config import ConfigError, ExperimentConfig, base_family, build_family, sat_instance
from .errors import ContractError
from .evolution import EvolutionSpec, evolve, runtime_scaling_study
from .gaps import (
    compare_profiles,
    detect_crossings,
    gap_sweep,
    reduced_gap_minimum,
    reduced_search_subspace,
    separable_closed_form,
)
from .io import write_csv, write_json
from .positivity import (
    MAX_MATRIX_QUBITS,
    verify_ground_positivity,
    verify_matrix_positivity,
    write_jsonl,
)
from .sat import encode_energy


def _sweep(cfg, family):
    mode = "parallel" if cfg.threads > 1 else "warm"
    return gap_sweep(family, cfg.grid, cfg.tol, mode=mode, workers=cfg.threads, seed=cfg.seed)


def _profile_files(out, prof, stem="profile"):
    return [prof.to_csv(out / f"{stem}.csv"), prof.to_json(out / f"{stem}.json")]


def _profile_summary(prof):
    return {"family": prof.family, "n": prof.n, "g_min": prof.g_min, "s_star": prof.s_star}


def run_gap_sweep(cfg: ExperimentConfig, out: Path):
    prof = _sweep(cfg, build_family(cfg))
    return _profile_files(out, prof), _profile_summary(prof)


def run_separable(cfg, out):
    prof = _sweep(cfg, build_family(cfg))
    rows = []
    for s, g in zip(prof.s, prof.gaps):
        exact = np.sqrt(1.0 - 2.0 * s + 2.0 * s * s)
        rows.append((s, g, exact, g - exact))
    files = _profile_files(out, prof)
    files.append(write_csv(out / "closed_form.csv", ["s", "gap", "gap_exact", "difference"], rows))
    summary = _profile_summary(prof)
    summary["max_abs_gap_error"] = float(max(abs(r[3]) for r in rows))
    summary["levels_at_1"] = separable_closed_form(cfg.n, 1.0).levels()
    return files, summary


def run_grover(cfg, out):
    return run_gap_sweep(cfg, out)


def _modified(cfg, out):
    base = base_family(cfg)
    mod = build_family(cfg)
    pa, pb = _sweep(cfg, base), _sweep(cfg, mod)
    files = _profile_files(out, pa, "profile_base") + _profile_files(out, pb, "profile_modified")
    report = compare_profiles(pa, pb)
    files.append(write_json(out / "comparison.json", report))
    summary = {"base": _profile_summary(pa), "modified": _profile_summary(pb),
               "g_min_ratio": report["g_min_ratio"], "s_star_shift": report["s_star_shift"]}
    return base, mod, files, summary


def run_gh1(cfg, out):
    base, mod, files, summary = _modified(cfg, out)
    if cfg.base == "separable":
        red = reduced_search_subspace(mod, mod.target)
        s_red, g_red = reduced_gap_minimum(red)
        files.append(write_json(out / "reduced.json", {"dim": red.dim, "s_star": s_red,
                                                        "g_min": g_red}))
        summary["reduced"] = {"dim": red.dim, "g_min": g_red, "s_star": s_red}
    if mod.n <= 12:
        events = detect_crossings(mod, min(cfg.grid, 201), window=cfg.window)
        files.append(write_json(out / "crossings.json", [e.to_dict() for e in events]))
        summary["crossings"] = len(events)
    return files, summary


def run_shift(cfg, out):
    _, _, files, summary = _modified(cfg, out)
    return files, summary


def run_random_final(cfg, out):
    fam = build_family(cfg)
    files = [save_energies_csv(out / "energies.csv", fam.h1)]
    prof = _sweep(cfg, fam)
    files += _profile_files(out, prof)
    return files, _profile_summary(prof)


def run_sat_gap(cfg, out):
    inst = sat_instance(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = encode_energy(inst).energies
    (out / "instance.cnf").write_text(inst.to_dimacs())
    files = [out / "instance.cnf", save_energies_csv(out / "energies.csv", table)]
    fam = build_family(cfg.replace(n=inst.n))
    prof = _sweep(cfg, fam)
    files += _profile_files(out, prof)
    summary = _profile_summary(prof)
    summary.update({"variables": inst.n, "clauses": inst.m, "min_energy": int(table.min()),
                    "max_energy": int(table.max()),
                    "ground_multiplicity": int(np.count_nonzero(table == table.min()))})
    return files, summary


def run_positivity(cfg, out):
    fam = build_family(cfg)
    reports = []
    for s in cfg.s_values:
        if fam.n <= MAX_MATRIX_QUBITS:
            reports.append(verify_matrix_positivity(fam, s, cfg.steps, workers=cfg.threads))
        if s < 1:
            reports.append(verify_ground_positivity(fam, s, seed=cfg.seed))
    files = [write_jsonl(reports, out / "positivity.jsonl")]
    verdicts = {}
    for r in reports:
        verdicts.setdefault(r.check, []).append([r.s, r.verdict])
    return files, {"family": fam.name, "n": fam.n, "verdicts": verdicts}


def run_evolve(cfg, out):
    fam = build_family(cfg)
    res = evolve(EvolutionSpec(fam, cfg.T, tol=cfg.evolve_tol, samples=cfg.samples))
    files = [res.to_csv(out / "trace.csv")]
    record = {"T": cfg.T, "fidelity": res.fidelity,
              "stats": {k: v for k, v in res.stats.items()}}
    files.append(write_json(out / "result.json", record))
    return files, {"family": fam.name, "n": fam.n, "T": cfg.T, "fidelity": res.fidelity}


def run_scaling(cfg, out):
    study = runtime_scaling_study(lambda n: build_family(cfg, n), cfg.sizes, cfg.f_star,
                                  grid=cfg.grid, tol=cfg.evolve_tol, workers=cfg.threads,
                                  name=cfg.resolved_family())
    files = [study.to_csv(out / "scaling.csv"), study.to_json(out / "scaling.json")]
    return files, {"family": study.family, "f_star": cfg.f_star, "fits": study.fits(),
                   "T_star": study.T_star.tolist()}


RUNNERS = {
    "gap-sweep": run_gap_sweep,
    "separable": run_separable,
    "grover-search": run_grover,
    "gh1-search": run_gh1,
    "shift-search": run_shift,
    "random-final": run_random_final,
    "sat-gap": run_sat_gap,
    "positivity": run_positivity,
    "evolve": run_evolve,
    "scaling-study": run_scaling,
}


def run_experiment(cfg: ExperimentConfig, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind not in RUNNERS:
        raise ContractError(f"no runner for {cfg.kind!r}")
    if cfg.cnf is not None and not Path(cfg.cnf).is_file():
        raise ConfigError({"cnf": f"file {cfg.cnf} does not exist"})
    files, summary = RUNNERS[cfg.kind](cfg, out)
    return [Path(f) for f in files], summary

