import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from isacbeam import designs
from isacbeam.config import reference_config, parse_config
from isacbeam.model import Target, desired_beampattern, make_scene

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    X = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    P = X @ X.conj().T
    return scale * P / np.trace(P).real


def random_vec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def small_scene(n=4, eve_deg=(30.0,), trusted_deg=(-40.0,), cu_deg=0.0, noise=1.0, q=4.0):
    targets = [Target(np.deg2rad(a), is_eavesdropper=True, noise_power=noise) for a in eve_deg]
    targets += [Target(np.deg2rad(a)) for a in trusted_deg]
    return make_scene(n, targets, cu_angle=np.deg2rad(cu_deg), cu_noise_power=noise, power_budget=q)


def small_grid(scene, width_deg=10.0, m=61):
    return desired_beampattern(scene, np.deg2rad(width_deg), m)


@pytest.fixture(scope="session")
def ref0():
    return parse_config(reference_config(0.0))


@pytest.fixture(scope="session")
def ref60():
    return parse_config(reference_config(60.0))


@pytest.fixture(scope="session")
def sensing60(ref60):
    return designs.solve_sensing_only(ref60.scene, ref60.grid())


@pytest.fixture(scope="session")
def capacity0(ref0):
    return designs.secrecy_capacity(ref0.scene)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
