import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isacbeam import conic, designs
from isacbeam.designs import SearchSettings, outer_search, rank_one_extract
from isacbeam.errors import (DegenerateExtractionError, DomainError, ExtractionError, InfeasibleError,
                             SearchRangeError)
from isacbeam.model import (BeamDesign, Target, beampattern, make_scene, matching_error,
                            sinr_cu, sinr_eavesdropper)

from conftest import random_psd, random_vec, small_grid, small_scene

seeds = st.integers(0, 2**32 - 1)


# -- rank-one extraction -------------------------------------------------------------

def test_extract_rank_one_is_identity_up_to_phase():
    rng = np.random.default_rng(0)
    w, g = random_vec(rng, 4), random_vec(rng, 4)
    S = random_psd(rng, 4)
    d = rank_one_extract(np.outer(w, w.conj()), S, 0.7, g)
    ratio = d.info_beam / w
    assert np.allclose(abs(ratio), 1.0) and np.allclose(ratio, ratio[0])
    assert np.allclose(np.outer(d.info_beam, d.info_beam.conj()), np.outer(w, w.conj()), atol=1e-12)
    assert np.allclose(d.sensing_cov, S, atol=1e-12)
    assert d.scale == 0.7


def test_extract_identity_example():
    g = np.array([1.0, 0.0])
    d = rank_one_extract(np.eye(2), np.zeros((2, 2)), 1.0, g)
    assert np.allclose(np.outer(d.info_beam, d.info_beam.conj()), np.diag([1, 0]))
    assert np.allclose(d.sensing_cov, np.diag([0, 1]))


@given(seeds, st.integers(2, 8))
def test_extract_preserves_cu_and_never_helps_eavesdroppers(seed, n):
    rng = np.random.default_rng(seed)
    W = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
    S = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
    g = random_vec(rng, n)
    eves = [random_vec(rng, n) for _ in range(2)]
    d = rank_one_extract(W, S, 1.0, g, eves)
    cu_relaxed = np.vdot(g, W @ g).real / (np.vdot(g, S @ g).real + 1.0)
    cu_after = abs(np.vdot(g, d.info_beam)) ** 2 / (np.vdot(g, d.sensing_cov @ g).real + 1.0)
    # Same CU signal power; AN at the CU can only grow, so SINR differs only through S*.
    assert abs(np.vdot(g, d.info_beam)) ** 2 == pytest.approx(np.vdot(g, W @ g).real, rel=1e-9)
    assert cu_after <= cu_relaxed * (1 + 1e-9)
    for h in eves:
        relaxed = np.vdot(h, W @ h).real / (np.vdot(h, S @ h).real + 1.0)
        after = abs(np.vdot(h, d.info_beam)) ** 2 / (np.vdot(h, d.sensing_cov @ h).real + 1.0)
        assert after <= relaxed * (1 + 1e-9) + 1e-15
    assert not designs.extraction_violations(W, S, d, g, eves)


def test_extract_degenerate():
    g = np.array([1.0, 0.0])
    W = np.diag([0.0, 1.0])
    with pytest.raises(DegenerateExtractionError):
        rank_one_extract(W, np.eye(2), 1.0, g)
    d = rank_one_extract(W, np.eye(2), 1.0, g, allow_degenerate=True)
    assert np.all(d.info_beam == 0)
    assert np.allclose(d.sensing_cov, W + np.eye(2))


def test_extract_flags_broken_input():
    # An indefinite relaxed matrix breaks the info-dominance clause.
    with pytest.raises(ExtractionError) as exc:
        rank_one_extract(np.diag([1.0, -1.0]), np.eye(2), 1.0, np.array([1.0, 0.0]))
    assert exc.value.clause == "info_dominance"


# -- outer search -------------------------------------------------------------------

def test_outer_search_ties_go_to_smallest_gamma():
    trace, payload = outer_search(lambda g: (1.0, g), SearchSettings(n_grid=8, n_refine=1), 1.0)
    assert trace.gamma_star == trace.gammas.min()
    assert payload == trace.gamma_star


def test_outer_search_skips_infeasible_points():
    f = lambda g: (np.inf, None) if g < 0.1 else ((np.log(g) - np.log(0.3)) ** 2, g)
    trace, _ = outer_search(f, SearchSettings(), 1.0)
    assert trace.gamma_star == pytest.approx(0.3, rel=0.01)
    assert np.isfinite(trace.best)
    assert trace.best == trace.values.min()


def test_outer_search_all_infeasible():
    with pytest.raises(SearchRangeError):
        outer_search(lambda g: (np.inf, None), SearchSettings(n_grid=5), 1.0)


def test_outer_search_deterministic():
    f = lambda g: (np.sin(30 * g) + g, None)
    a, _ = outer_search(f, SearchSettings(), 2.0)
    b, _ = outer_search(f, SearchSettings(), 2.0)
    assert a.gamma_star == b.gamma_star and np.array_equal(a.gammas, b.gammas)


# -- maximum secrecy rate -----------------------------------------------------------------

def test_max_rate_aligned_is_zero():
    t = Target(0.3, is_eavesdropper=True, noise_power=1.0)
    sc = make_scene(2, [t], cu_angle=0.3, cu_noise_power=1.0, power_budget=4.0)
    assert designs.max_secrecy_rate(sc) == pytest.approx(0.0, abs=1e-4)


def test_max_rate_orthogonal_closed_form():
    sc = small_scene()
    g = sc.cu_channel
    want = np.log2(1 + sc.power_budget * np.vdot(g, g).real / sc.cu_noise_power)
    assert designs.max_secrecy_rate(sc) == pytest.approx(want, abs=1e-3)


def test_reference_max_rate_above_three(capacity0):
    assert capacity0.r_star > 3.0


# -- designs on a small scene ---------------------------------------------------------

SCENE = dict(n=6, eve_deg=(30.0, -45.0), trusted_deg=(0.0,), cu_deg=15.0)


@pytest.fixture(scope="module")
def setup():
    sc = small_scene(**SCENE)
    grid = small_grid(sc)
    cap = designs.secrecy_capacity(sc)
    base = designs.solve_sensing_only(sc, grid)
    return sc, grid, cap, base


@pytest.fixture(scope="module")
def sweep(setup):
    sc, grid, cap, _ = setup
    out = {}
    for r0 in (0.0, 0.5, 1.0, 2.0, 3.0, 4.0):
        out[r0] = {
            "optimal": designs.solve_optimal(sc, grid, r0, capacity=cap),
            "zf": designs.solve_zf(sc, grid, r0),
            "separate": designs.solve_separate(sc, grid, r0),
        }
    return out


def _eps(e_opt):
    return 1e-4 * e_opt + 1e-6 * (1 + e_opt)


def test_optimal_zero_rate_matches_benchmark(setup, sweep):
    base = setup[3].matching_error
    assert sweep[0.0]["optimal"].matching_error == pytest.approx(base, rel=1e-4)


def test_reports_meet_rate_and_objective(setup, sweep):
    sc, grid, _, _ = setup
    for r0, reps in sweep.items():
        for rep in reps.values():
            assert rep.secrecy_rate >= r0 - 1e-6
            assert rep.matching_error == pytest.approx(matching_error(rep.design, grid, sc), rel=1e-6)
        opt = reps["optimal"]
        assert opt.matching_error == pytest.approx(opt.diagnostics["relaxed_objective"], rel=1e-6)
        assert opt.design.scale >= 0


def test_design_ordering(setup, sweep):
    base = setup[3].matching_error
    for reps in sweep.values():
        e = reps["optimal"].matching_error
        assert e <= reps["zf"].matching_error + _eps(e)
        assert e <= reps["separate"].matching_error + _eps(e)
        assert base <= e + _eps(e)


def test_optimal_monotone_in_rate(sweep):
    errs = [sweep[r]["optimal"].matching_error for r in sorted(sweep)]
    for a, b in zip(errs, errs[1:]):
        assert b >= a - 1e-6 * (1 + a)


def test_feasibility_coherence(setup):
    sc, grid, cap, _ = setup
    with pytest.raises(InfeasibleError) as exc:
        designs.solve_optimal(sc, grid, cap.r_star + 0.05, capacity=cap)
    assert exc.value.r_star == pytest.approx(cap.r_star)
    rep = designs.solve_optimal(sc, grid, cap.r_star - 0.05, capacity=cap)
    assert rep.secrecy_rate >= cap.r_star - 0.05 - 1e-6


def test_optimal_rejects_negative_rate(setup):
    sc, grid, cap, _ = setup
    with pytest.raises(DomainError):
        designs.solve_optimal(sc, grid, -1.0, capacity=cap)


def test_report_beampatterns(setup, sweep):
    sc, grid, _, _ = setup
    rep = sweep[2.0]["optimal"]
    assert np.allclose(rep.total_gain, rep.info_gain + rep.sensing_gain)
    assert np.allclose(rep.total_gain, beampattern(rep.design.covariance(), grid.angles, sc))
    assert rep.trace is not None and rep.trace.gamma_star == rep.diagnostics["gamma_e_star"]


# -- zero forcing ------------------------------------------------------------------------

def test_zf_nulls_eavesdroppers(sweep):
    for r0, reps in sweep.items():
        rep = reps["zf"]
        w = rep.design.info_beam
        for h in small_scene(**SCENE).eve_channels():
            assert abs(np.vdot(h, w)) <= 1e-8 * np.linalg.norm(h) * max(np.linalg.norm(w), 1e-300)
        assert rep.diagnostics["info_power"] >= 0


def test_zf_orthogonal_keeps_direction():
    sc = small_scene()
    w, gain = designs.zf_direction(sc)
    g = sc.cu_channel
    assert abs(np.vdot(w, g)) == pytest.approx(np.linalg.norm(g), rel=1e-10)
    rep = designs.solve_zf(sc, small_grid(sc), 2.0)
    assert rep.eve_sinrs[0] == pytest.approx(0.0, abs=1e-20)


def test_zf_zero_rate_equals_benchmark(setup, sweep):
    assert sweep[0.0]["zf"].matching_error == pytest.approx(setup[3].matching_error, rel=1e-5)


def test_zf_needs_more_antennas():
    sc = small_scene(n=2, eve_deg=(30.0, -30.0), trusted_deg=())
    with pytest.raises(DomainError):
        designs.solve_zf(sc, small_grid(sc), 1.0)


def test_zf_infeasible_when_cu_in_eavesdropper_span():
    sc = small_scene(n=2, eve_deg=(30.0,), trusted_deg=(), cu_deg=30.0)
    with pytest.raises(InfeasibleError):
        designs.solve_zf(sc, small_grid(sc), 1.0)


# -- separate design -----------------------------------------------------------------------

def test_separate_noise_invisible_at_cu(sweep):
    g = small_scene(**SCENE).cu_channel
    for reps in sweep.values():
        S = reps["separate"].design.sensing_cov
        assert abs(np.vdot(g, S @ g)) <= 1e-8 * np.vdot(g, g).real * np.trace(S).real


def test_separate_zero_rate_is_restricted_benchmark(setup, sweep):
    sc, grid, _, _ = setup
    rep = sweep[0.0]["separate"]
    assert np.all(rep.design.info_beam == 0)
    n, q = sc.n_antennas, sc.power_budget
    Q2 = conic.cu_projector(sc)
    Sb = cp.Variable((n, n), hermitian=True)
    eta = cp.Variable()
    S = Q2 @ Sb @ Q2
    A = sc.steering(grid.angles)
    gains = cp.real(cp.sum(cp.multiply(A.conj(), S @ A), axis=0))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(eta * grid.desired - gains)),
                      [Sb >> 0, cp.real(cp.trace(S)) == q])
    # The component of Sb along g is free, which stalls interior-point methods; SCS copes.
    prob.solve(solver=cp.SCS, eps=1e-9, max_iters=100000)
    assert rep.matching_error == pytest.approx(prob.value, rel=1e-5)


def test_separate_orthogonal_power():
    sc = small_scene()
    g = sc.cu_channel
    r0 = 1.5
    rep = designs.solve_separate(sc, small_grid(sc), r0)
    want = sc.cu_noise_power * (2**r0 - 1) / np.vdot(g, g).real
    assert rep.design.info_power == pytest.approx(want, rel=1e-6)
    assert rep.diagnostics["p6_rank_one"]


def test_separate_infeasible_above_an_free_capacity():
    sc = small_scene(n=2, eve_deg=(30.0,), trusted_deg=(), cu_deg=30.0)
    with pytest.raises(InfeasibleError):
        designs.solve_separate(sc, small_grid(sc), 1.0)


def test_min_power_beam_randomised_path():
    sc = small_scene(**SCENE)
    W = random_psd(np.random.default_rng(5), 6, scale=sc.power_budget)
    w, flags = designs.min_power_beam(W, sc, 0.5)
    assert flags["p6_randomized"] and not flags["p6_rank_one"]
    d = BeamDesign(w, np.zeros((6, 6)), 0.0)
    cu = np.log2(1 + sinr_cu(d, sc))
    for k in sc.eavesdroppers:
        assert cu - np.log2(1 + sinr_eavesdropper(d, k, sc)) >= 0.5 - 1e-9


# -- sensing-only benchmark ------------------------------------------------------------------

def test_sensing_only_has_no_secrecy(setup):
    rep = setup[3]
    assert rep.secrecy_rate == 0.0
    assert np.all(rep.design.info_beam == 0)


def test_sensing_only_scales_with_power():
    a = small_scene(q=4.0)
    b = small_scene(q=8.0)
    ra = designs.solve_sensing_only(a, small_grid(a))
    rb = designs.solve_sensing_only(b, small_grid(b))
    assert rb.design.scale == pytest.approx(2 * ra.design.scale, rel=1e-6)
    assert np.allclose(rb.total_gain / rb.design.scale, ra.total_gain / ra.design.scale, atol=1e-6)


def test_sensing_only_beats_secrecy_design_off_beam():
    t = Target(0.0, is_eavesdropper=True, noise_power=1.0)
    sc = make_scene(10, [t], cu_angle=np.deg2rad(50.0), cu_noise_power=1.0, power_budget=4.0)
    grid = small_grid(sc)
    base = designs.solve_sensing_only(sc, grid)
    main = np.rad2deg(grid.angles[np.argmax(base.total_gain)])
    assert abs(main) < 3.0
    rep = designs.solve_optimal(sc, grid, 2.0)
    assert base.matching_error < rep.matching_error
