import math

import numpy as np
import pytest

from aqclab.builders import (
    InterpolatingFamily,
    build_h0,
    cost_family,
    gh1_family,
    grover_family,
    separable_pair,
)
from aqclab.eigen import dense_spectrum
from aqclab.errors import ContractError
from aqclab.gaps import (
    GapProfile,
    SubspaceRankError,
    compare_profiles,
    detect_crossings,
    gap_sweep,
    golden_section,
    reduced_gap_minimum,
    reduced_search_subspace,
    separable_closed_form,
    track_levels,
    uniform_grid,
)
from aqclab.hilbert import DiagonalOperator

from oracles import GROVER_DENSE_GMIN

INV_SQRT2 = 0.707106781186547524400844362105


def exact_gap(s):
    return np.sqrt(1 - 2 * s + 2 * s * s)


def test_golden_section_quadratic():
    x, fx, _, _ = golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, xtol=1e-9, ftol=0)
    assert abs(x - 0.3) < 1e-8


@pytest.mark.parametrize("n", [2, 5, 9])
def test_separable_profile(n):
    p = gap_sweep(separable_pair(n), 41)
    assert np.max(np.abs(p.gaps - exact_gap(p.s))) <= 1e-9
    assert abs(p.s_star - 0.5) <= 1e-4 and abs(p.g_min - INV_SQRT2) <= 1e-6
    assert np.all(p.e1 >= p.e0)


def test_separable_gap_is_size_independent():
    grid = uniform_grid(11)
    a, b = gap_sweep(separable_pair(4), grid), gap_sweep(separable_pair(12), grid)
    assert np.max(np.abs(a.gaps - b.gaps)) <= 1e-10
    ground = 6 * (1 - exact_gap(grid))
    assert np.max(np.abs(b.e0 - ground)) <= 1e-10


def test_initial_gap_is_smallest_positive_coupling():
    fam = InterpolatingFamily(build_h0((3, 2, 4)), DiagonalOperator(np.arange(8.0)))
    assert abs(gap_sweep(fam, 5).gaps[0] - 2.0) <= 1e-10


@pytest.mark.parametrize("n", sorted(GROVER_DENSE_GMIN))
def test_grover_minimum_against_dense_oracle(n):
    p = gap_sweep(grover_family(n), 101)
    s_ref, g_ref = GROVER_DENSE_GMIN[n]
    assert abs(p.g_min - g_ref) <= 0.05 * g_ref
    # the iterative refinement is at least as deep as the 1e-3 grid
    assert p.g_min <= g_ref + 1e-9
    assert abs(p.s_star - s_ref) <= 2e-3


def test_refined_minimum_not_above_samples():
    p = gap_sweep(grover_family(6, t=9), 21)
    assert p.g_min <= p.gaps.min()
    assert 0 <= p.s_star <= 1
    lo, hi = p.refinement["bracket"]
    assert lo <= p.s_star <= hi


def test_warm_and_parallel_agree():
    fam = grover_family(7, t=3)
    a = gap_sweep(fam, 21, mode="warm")
    b = gap_sweep(fam, 21, mode="parallel", workers=2)
    assert np.max(np.abs(a.gaps - b.gaps)) <= 1e-9
    assert abs(a.g_min - b.g_min) <= 1e-8


def test_degenerate_final_ground_space_closes_gap():
    e = np.array([0, 0, 1, 2, 3, 1, 2, 2, 1, 3, 2, 1, 4, 2, 3, 1], float)
    p = gap_sweep(cost_family(e), 101)
    tail = p.gaps[p.s >= 0.9 - 1e-12]
    assert np.all(np.diff(tail) < 0)
    assert tail[-1] <= 1e-9
    assert p.degenerate[-1]


def test_grid_contract():
    with pytest.raises(ContractError):
        gap_sweep(separable_pair(2), [0.0, 0.5])
    with pytest.raises(ContractError):
        gap_sweep(separable_pair(2), [0.1, 0.5, 1.0])


def test_profile_io_round_trip(tmp_path):
    p = gap_sweep(separable_pair(3), 11)
    q = GapProfile.from_json(p.to_json(tmp_path / "p.json"))
    assert np.array_equal(p.gaps, q.gaps) and p.g_min == q.g_min
    csv = p.to_csv(tmp_path / "p.csv")
    assert csv.read_text().splitlines()[0] == "s,E0,E1,gap,residual0,residual1"


def test_compare_profiles():
    a = gap_sweep(separable_pair(4), 11)
    b = gap_sweep(gh1_family(separable_pair(4), 0), 11)
    r = compare_profiles(a, b)
    assert r["g_min_ratio"] > 1
    with pytest.raises(ContractError):
        compare_profiles(a, gap_sweep(separable_pair(4), 21))


# -- closed form -----------------------------------------------------------------

def test_closed_form_examples():
    lv = separable_closed_form(7, 0.5).levels()
    assert abs(lv[1][0] - lv[0][0] - math.sqrt(0.5)) <= 1e-15
    lv = separable_closed_form(5, 1.0).levels()
    assert [e for e, _ in lv] == pytest.approx([0, 1, 2, 3, 4, 5], abs=1e-15)
    assert [k for _, k in lv] == [1, 5, 10, 10, 5, 1]


# -- reduced search subspace -------------------------------------------------------

def test_reduced_dimension():
    assert reduced_search_subspace(gh1_family(separable_pair(6), 0), 0).dim == 7


def test_reduced_spectrum_inside_full():
    fam = gh1_family(separable_pair(8), 0)
    red = reduced_search_subspace(fam, 0)
    full = dense_spectrum(fam.at(0.4)).eigenvalues
    for e in red.spectrum(0.4):
        assert np.min(np.abs(full - e)) <= 1e-9


def test_reduced_needs_symmetric_target():
    # a target with both 0 and 1 bits only has the smaller symmetry S_w x S_(n-w)
    with pytest.raises(SubspaceRankError):
        reduced_search_subspace(gh1_family(separable_pair(8), 77), 77)
    # the all-ones string has zero energy, so the sign flip is rejected outright
    with pytest.raises(ContractError):
        gh1_family(separable_pair(8), 255)


def test_reduced_contains_full_ground_state():
    fam = gh1_family(separable_pair(6), 0)
    red = reduced_search_subspace(fam, 0)
    for s in (0.2, 0.6, 0.95):
        assert abs(red.spectrum(s)[0] - dense_spectrum(fam.at(s)).eigenvalues[0]) <= 1e-10


def test_reduced_gap_shrinks():
    g = [reduced_gap_minimum(reduced_search_subspace(gh1_family(separable_pair(n), 0), 0))[1]
         for n in range(4, 15)]
    assert np.polyfit(np.arange(4, 15), np.log(g), 1)[0] < 0


# -- level tracking and crossings ------------------------------------------------------

def test_separable_has_no_close_levels():
    assert detect_crossings(separable_pair(4), 101, window=0.1) == []


def test_gh1_has_avoided_crossing():
    # g_min is about 0.108 at n=8, so the window has to exceed it
    ev = detect_crossings(gh1_family(separable_pair(8), 0), 201, window=0.25)
    low = [e for e in ev if e.lower == 0]
    assert low and all(e.kind == "avoided" for e in low)
    assert all(e.heuristic for e in ev)


def test_exact_crossing_of_diagonal_pair():
    fam = InterpolatingFamily(DiagonalOperator([0.0, 1.0]), DiagonalOperator([2.0, 0.0]))
    (e,) = detect_crossings(fam, 201, window=0.1)
    assert e.kind == "crossing" and e.swapped
    assert abs(e.s - 1 / 3) <= 1e-9


def test_track_levels_follows_states_through_crossing():
    fam = InterpolatingFamily(DiagonalOperator([0.0, 1.0]), DiagonalOperator([2.0, 0.0]))
    scan = track_levels(fam, uniform_grid(31), levels=2)
    # the tracked level that starts lowest is the one that rises as 2s
    assert np.allclose(scan.energies[:, 0], 2 * scan.s)
