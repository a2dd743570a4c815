import numpy as np
import pytest

from isacbeam import designs, oracle
from isacbeam.errors import ConfigError, DomainError
from isacbeam.model import BeamDesign, Target, desired_beampattern, make_scene, matching_error, secrecy_rate
from isacbeam.oracle import BruteForceConfig, brute_force_p1


@pytest.fixture(scope="module")
def fixture0():
    name, scene, grid = oracle.n2_fixtures()[0]
    cap = designs.secrecy_capacity(scene)
    return scene, grid, cap


def test_config_guards():
    with pytest.raises(ConfigError):
        BruteForceConfig(n_antennas=4)
    with pytest.raises(ConfigError):
        BruteForceConfig(n_antennas=3)
    with pytest.raises(ConfigError):
        BruteForceConfig(power_levels=(1.5,))
    with pytest.raises(ConfigError):
        BruteForceConfig(max_candidates=10**8)


def test_candidate_budget_enforced():
    t = Target(0.3, is_eavesdropper=True, noise_power=1.0)
    sc = make_scene(3, [t], cu_angle=0.0, cu_noise_power=1.0, power_budget=1.0)
    grid = desired_beampattern(sc, np.deg2rad(10.0), 31)
    with pytest.raises(ConfigError):
        brute_force_p1(sc, grid, 0.5, BruteForceConfig(n_antennas=3, restrict_real=True))


def test_zero_rate_matches_benchmark(fixture0):
    scene, grid, _ = fixture0
    base = designs.solve_sensing_only(scene, grid).matching_error
    bf = brute_force_p1(scene, grid, 0.0)
    assert bf.feasible
    assert base * (1 - 1e-6) <= bf.matching_error <= 1.02 * base


def test_half_capacity_sandwich(fixture0):
    scene, grid, cap = fixture0
    r0 = 0.5 * cap.r_star
    bf = brute_force_p1(scene, grid, r0)
    sdr = designs.solve_optimal(scene, grid, r0, capacity=cap).matching_error
    assert bf.feasible
    assert sdr <= bf.matching_error * (1 + 1e-6)
    assert bf.matching_error <= 1.02 * sdr


def test_returned_design_is_genuine(fixture0):
    scene, grid, cap = fixture0
    r0 = 0.9 * cap.r_star
    bf = brute_force_p1(scene, grid, r0)
    assert bf.feasible
    d = bf.design
    assert secrecy_rate(d, scene) >= r0
    assert matching_error(d, grid, scene) == pytest.approx(bf.matching_error, rel=1e-9)
    assert np.linalg.eigvalsh(d.sensing_cov).min() >= -1e-9 * scene.power_budget
    assert np.trace(d.covariance()).real == pytest.approx(scene.power_budget)


def test_infeasible_rate(fixture0):
    scene, grid, cap = fixture0
    bf = brute_force_p1(scene, grid, 2 * cap.r_star)
    assert not bf.feasible and bf.design is None
    assert bf.n_evaluated <= oracle.MAX_CANDIDATES


def test_real_three_antenna_mode_is_an_upper_bound():
    t = Target(np.deg2rad(30.0), is_eavesdropper=True, noise_power=1.0)
    sc = make_scene(3, [t], cu_angle=np.deg2rad(-20.0), cu_noise_power=1.0, power_budget=2.0)
    grid = desired_beampattern(sc, np.deg2rad(10.0), 61)
    cap = designs.secrecy_capacity(sc)
    r0 = 0.3 * cap.r_star
    cfg = BruteForceConfig(n_antennas=3, discretization=10, restrict_real=True)
    bf = brute_force_p1(sc, grid, r0, cfg)
    sdr = designs.solve_optimal(sc, grid, r0, capacity=cap).matching_error
    assert bf.feasible
    assert bf.matching_error >= sdr * (1 - 1e-6)
    assert np.allclose(bf.design.covariance().imag, 0)


# -- fuzzing -----------------------------------------------------------------------------

def test_fuzz_clean():
    rep = oracle.fuzz_proposition1(6, 1000, 42)
    assert rep.ok, rep.summary()
    assert rep.n_rank_one == 100 and rep.n_degenerate == 100
    assert rep.max_rank_one_defect < 1e-12


def test_fuzz_deterministic():
    a = oracle.fuzz_proposition1(4, 200, 7)
    b = oracle.fuzz_proposition1(4, 200, 7)
    assert a.summary() == b.summary() and a.worst == b.worst


def test_fuzz_catches_mutation():
    def broken(W, S, eta, g, allow_degenerate=False):
        d = designs.extract_unchecked(W, S, eta, g, allow_degenerate)
        w = d.info_beam
        return BeamDesign(w, W + S + np.outer(w, w.conj()), eta)  # sign flipped

    rep = oracle.fuzz_proposition1(4, 50, 0, extractor=broken)
    assert not rep.ok
    assert "sum" in {c["clause"] for c in rep.counterexamples}
    assert "trial" in rep.summary()


def test_fuzz_escaping_exception_is_reported():
    def crash(*args, **kwargs):
        raise RuntimeError("boom")

    rep = oracle.fuzz_proposition1(2, 3, 0, extractor=crash)
    assert [c["clause"] for c in rep.counterexamples] == ["exception"] * 3


def test_fuzz_needs_trials():
    with pytest.raises(DomainError):
        oracle.fuzz_proposition1(2, 0, 0)


# -- analytic cases -----------------------------------------------------------------------

@pytest.mark.parametrize("case_id", oracle.ANALYTIC_CASE_IDS)
def test_analytic_cases(case_id):
    case = oracle.analytic_cases(case_id)
    got = oracle.run_analytic(case)
    for key, want in case.expected.items():
        assert got[key] == pytest.approx(want, rel=1e-6, abs=1e-12)
    assert case.derivation


def test_analytic_unknown_case():
    with pytest.raises(DomainError):
        oracle.analytic_cases("nope")
