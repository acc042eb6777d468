import json
import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from aqclab.builders import InterpolatingFamily, cost_family, grover_family, separable_pair
from aqclab.errors import ContractError, IntegratorError
from aqclab.evolution import (
    BracketError,
    EvolutionSpec,
    evolve,
    expm_krylov,
    final_fidelity,
    find_runtime,
    ground_projector,
    runtime_scaling_study,
)
from aqclab.hilbert import DiagonalOperator, to_dense
from aqclab.io import read_csv
from aqclab.sat import encode_energy, random_instance

from oracles import schrodinger_reference

# Final fidelity of the n=2 separable family from DOP853 at rtol 1e-12, atol 1e-13.
SEPARABLE_N2_REFERENCE = {
    1: 0.27088391220814884,
    2: 0.3336428871171534,
    4: 0.5657273370750605,
    8: 0.9714422964066871,
    16: 0.999440150407487,
    32: 0.9997646437195834,
    64: 0.9997472364928129,
    128: 0.9998790380041661,
}


def sat_family(n, m, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = encode_energy(random_instance(n, m, seed)).energies
    return cost_family(e - e.min(), name="sat")


# -- Krylov exponential ----------------------------------------------------------------

@given(seed=st.integers(0, 2**32 - 1), tau=st.floats(0.01, 20.0))
def test_krylov_matches_expm(seed, tau):
    op = sat_family(5, 12, seed).at(0.4)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    w, _ = expm_krylov(op, v, tau)
    ref = sla.expm(-1j * tau * to_dense(op)) @ v
    assert np.linalg.norm(w - ref) <= 1e-10 * np.linalg.norm(v)


def test_krylov_halves_when_subspace_is_small():
    op = separable_pair(8).at(0.5)
    v = np.random.default_rng(0).standard_normal(256).astype(complex)
    w, mv = expm_krylov(op, v, 40.0, max_dim=8)
    ref = sla.expm(-40j * to_dense(op)) @ v
    assert np.linalg.norm(w - ref) <= 1e-9 * np.linalg.norm(v)
    assert mv > 8


# -- evolve --------------------------------------------------------------------------------

@pytest.mark.parametrize("propagator", ["krylov", "split"])
def test_evolve_matches_reference_solver(propagator):
    fam = grover_family(3, 6)
    T = 12.0
    res = evolve(EvolutionSpec(fam, T, tol=1e-10, propagator=propagator, samples=5))
    ref = schrodinger_reference(to_dense(fam.h0), to_dense(fam.h1), T, np.full(8, 8**-0.5))
    assert np.linalg.norm(res.state - ref) <= 1e-7
    assert abs(res.fidelity - abs(ref[6]) ** 2) <= 1e-8


def test_separable_slow_evolution():
    assert final_fidelity(separable_pair(4), 200.0) >= 0.999


def test_sudden_limit():
    f = final_fidelity(grover_family(4, 11), 0.01)
    assert abs(f - 2**-4) <= 1e-3


def test_diagonal_evolution_keeps_populations():
    h1 = sat_family(4, 6, 1).h1
    fam = InterpolatingFamily(h1, h1)
    v = np.random.default_rng(3).standard_normal(16) + 0j
    v /= np.linalg.norm(v)
    res = evolve(EvolutionSpec(fam, 5.0, track_overlap=False), initial=v)
    assert np.max(np.abs(np.abs(res.state) ** 2 - np.abs(v) ** 2)) <= 1e-10


def test_trace_invariants(tmp_path):
    fam = sat_family(5, 10, 2)
    T = 30.0
    res = evolve(EvolutionSpec(fam, T, samples=11))
    assert abs(res.overlap[0] - 1.0) <= 1e-12
    assert abs(res.stats["energy0"]) <= 1e-10
    assert np.all(res.norm_drift <= 1e-10 * np.maximum(res.t, 1.0))
    assert np.all((res.overlap >= -1e-10) & (res.overlap <= 1 + 1e-10))
    assert res.overlap[-1] == res.fidelity
    header, rows = read_csv(res.to_csv(tmp_path / "trace.csv"))
    assert header == ["t", "s", "overlap", "norm"]
    assert len(rows) == 11 and float(rows[-1][1]) == 1.0


def test_tolerance_halving_changes_little():
    fam = sat_family(6, 20, 4)
    a = final_fidelity(fam, 25.0, tol=1e-8)
    b = final_fidelity(fam, 25.0, tol=5e-9)
    assert abs(a - b) <= 1e-6


def test_propagators_agree():
    fam = separable_pair(5)
    a = evolve(EvolutionSpec(fam, 15.0, propagator="krylov", samples=2))
    b = evolve(EvolutionSpec(fam, 15.0, propagator="split", samples=2))
    assert np.linalg.norm(a.state - b.state) <= 1e-6
    assert b.stats["propagator"] == "split"


def test_separable_fidelity_against_reference():
    fam = separable_pair(2)
    for T, ref in SEPARABLE_N2_REFERENCE.items():
        assert abs(final_fidelity(fam, float(T), tol=1e-10) - ref) <= 1e-8


@pytest.mark.parametrize("n", [2, 4])
def test_separable_fidelity_rises_under_doubling(n):
    fam = separable_pair(n)
    f = [final_fidelity(fam, 2.0**k) for k in range(6)]
    assert all(b >= a for a, b in zip(f, f[1:]))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_separable_infidelity_envelope(n):
    # each qubit is excited by the two endpoint boundary terms, each of
    # amplitude 1/(2T), so 1 - F <= n (1/2 + 1/2)^2 / T^2 to leading order
    fam = separable_pair(n)
    for T in (16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0, 256.0):
        assert 1 - final_fidelity(fam, T) <= 1.05 * n / T**2


def test_separable_fidelity_oscillates_at_large_runtime():
    # the per-qubit infidelity is an oscillating multiple of 1/T^2
    assert SEPARABLE_N2_REFERENCE[64] < SEPARABLE_N2_REFERENCE[32]
    fam = separable_pair(2)
    assert final_fidelity(fam, 64.0) < final_fidelity(fam, 32.0)


def test_custom_schedule():
    fam = separable_pair(3)
    slow_middle = lambda u: u + 0.1 * np.sin(2 * np.pi * u) / (2 * np.pi)  # noqa: E731
    res = evolve(EvolutionSpec(fam, 20.0, schedule=slow_middle, samples=3))
    assert abs(res.s[1] - 0.5) <= 1e-15
    assert 0.9 < res.fidelity <= 1.0


def test_spec_contract():
    fam = separable_pair(2)
    with pytest.raises(ContractError):
        EvolutionSpec(fam, 0.0)
    with pytest.raises(ContractError):
        EvolutionSpec(fam, 1.0, schedule=lambda u: 1 - u)
    with pytest.raises(ContractError):
        EvolutionSpec(fam, 1.0, schedule=lambda u: u + 0.3 * np.sin(2 * np.pi * u))
    with pytest.raises(ContractError):
        EvolutionSpec(fam, 1.0, propagator="rk4")
    flat = DiagonalOperator([0.0, 0.0, 1.0, 2.0])
    with pytest.raises(ContractError):
        evolve(EvolutionSpec(InterpolatingFamily(flat, fam.h1), 1.0))
    with pytest.raises(ContractError):
        evolve(EvolutionSpec(InterpolatingFamily(flat, fam.h1), 1.0, propagator="split"),
               initial=np.ones(4))
    with pytest.raises(ContractError):
        evolve(EvolutionSpec(fam, 1.0), initial=np.ones(8))


def test_step_underflow_reports_time():
    with pytest.raises(IntegratorError) as info:
        evolve(EvolutionSpec(grover_family(4), 50.0, tol=1e-300, min_step=1e-3))
    assert info.value.t is not None


def test_ground_projector_paths():
    assert ground_projector(DiagonalOperator([1.0, 0.0, 0.0, 2.0])).shape == (4, 2)
    u = ground_projector(separable_pair(3).h0)
    assert np.allclose(u[:, 0], 8**-0.5)
    b = ground_projector(separable_pair(3).at(0.4))
    w, v = np.linalg.eigh(to_dense(separable_pair(3).at(0.4)))
    assert abs(abs(b[:, 0] @ v[:, 0]) - 1) <= 1e-12


# -- runtime search --------------------------------------------------------------------------

def test_find_runtime_brackets_the_target():
    fam = separable_pair(2)
    T, f, (lo, hi), curve = find_runtime(fam, 0.9)
    assert f >= 0.9 and T == hi and hi / lo <= 1.02
    f_lo = dict(curve)[lo]
    assert f_lo < 0.9


def test_stricter_target_needs_longer_runtime():
    fam = separable_pair(3)
    assert find_runtime(fam, 0.99)[0] >= find_runtime(fam, 0.9)[0]


def test_bracket_failure_carries_curve():
    with pytest.raises(BracketError) as info:
        find_runtime(grover_family(6), 0.9, T_max=2.0, expand=1)
    assert [T for T, _ in info.value.curve] == [1.0, 2.0, 4.0]


def test_find_runtime_contract():
    with pytest.raises(ContractError):
        find_runtime(separable_pair(2), 0.4)


def test_scaling_study_outputs(tmp_path):
    study = runtime_scaling_study(separable_pair, [2, 3], 0.9, grid=21, name="separable")
    assert list(study.ns) == [2, 3]
    assert np.allclose(study.g_min, 0.5**0.5, atol=1e-6)
    assert "log2_T_vs_n" in study.fits()
    assert "logT_vs_log_inv_gmin" not in study.fits()  # g_min does not vary
    header, rows = read_csv(study.to_csv(tmp_path / "s.csv"))
    assert header[0] == "n" and [int(r[0]) for r in rows] == [2, 3]
    d = json.loads(study.to_json(tmp_path / "s.json").read_text())
    assert d["rows"][0]["curve"]
