"""Array response, channels and performance metrics of the secrecy ISAC downlink.

All quantities are linear (watts, W/W) and angles are radians. Conversion
from the dB / degree figures used in scenario files happens in
:mod:`isacbeam.config`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

EPS_PSD = 1e-8
EPS_POW = 1e-6


def dbm_to_watts(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def db_loss_to_linear(x):
    """Attenuation in dB (positive number) to a linear power gain."""
    return 10.0 ** (-np.asarray(x, dtype=float) / 10.0)


def watts_to_db(x, floor=1e-12):
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), floor))


@dataclass(frozen=True)
class Target:
    angle: float
    distance: float = 1.0
    reference_pathloss: float = 1.0
    is_eavesdropper: bool = False
    noise_power: float | None = None

    def __post_init__(self):
        if not self.distance > 0:
            raise DomainError(f"target distance must be positive, got {self.distance}")
        if not self.reference_pathloss > 0:
            raise DomainError("reference path loss must be positive")
        if not -np.pi / 2 - 1e-12 <= self.angle <= np.pi / 2 + 1e-12:
            raise DomainError(f"target angle {self.angle} outside [-pi/2, pi/2]")
        if self.is_eavesdropper and not (self.noise_power and self.noise_power > 0):
            raise DomainError("eavesdropping targets need a positive noise power")

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(self.reference_pathloss / self.distance**2))


@dataclass(frozen=True, eq=False)
class Scene:
    n_antennas: int
    antenna_spacing_ratio: float
    targets: tuple[Target, ...]
    cu_channel: np.ndarray
    cu_noise_power: float
    power_budget: float

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        g = np.asarray(self.cu_channel, dtype=complex).reshape(-1)
        object.__setattr__(self, "cu_channel", g)
        if self.n_antennas < 2:
            raise DomainError("the array needs more than one antenna")
        if g.shape != (self.n_antennas,):
            raise DomainError(f"CU channel has length {g.size}, expected {self.n_antennas}")
        if not self.power_budget > 0 or not self.cu_noise_power > 0:
            raise DomainError("power budget and noise powers must be positive")
        if not self.eavesdroppers:
            raise DomainError("at least one target must be an eavesdropper")

    @property
    def eavesdroppers(self) -> list[int]:
        return [k for k, t in enumerate(self.targets) if t.is_eavesdropper]

    def target_channel(self, k: int) -> np.ndarray:
        return los_channel(self.targets[k], self.n_antennas, self.antenna_spacing_ratio)

    def eve_channels(self) -> list[np.ndarray]:
        return [self.target_channel(k) for k in self.eavesdroppers]

    def eve_noise(self) -> list[float]:
        return [self.targets[k].noise_power for k in self.eavesdroppers]

    def steering(self, angles) -> np.ndarray:
        return steering_matrix(angles, self.n_antennas, self.antenna_spacing_ratio)

    def channel_matrix(self) -> np.ndarray:
        """CU channel followed by every target channel, one per row."""
        rows = [self.cu_channel] + [self.target_channel(k) for k in range(len(self.targets))]
        return np.vstack(rows)


def make_scene(
    n_antennas: int,
    targets: Sequence[Target],
    *,
    cu_angle: float | None = None,
    cu_distance: float = 1.0,
    cu_pathloss: float = 1.0,
    cu_channel=None,
    cu_noise_power: float,
    power_budget: float,
    spacing_ratio: float = 0.5,
) -> Scene:
    """Build a Scene with either an explicit CU channel or a LoS one."""
    if cu_channel is None:
        if cu_angle is None:
            raise DomainError("give either cu_channel or cu_angle")
        cu = Target(cu_angle, cu_distance, cu_pathloss)
        cu_channel = los_channel(cu, n_antennas, spacing_ratio)
    return Scene(n_antennas, spacing_ratio, tuple(targets), cu_channel, cu_noise_power, power_budget)


@dataclass(frozen=True)
class SampleGrid:
    angles: np.ndarray
    desired: np.ndarray
    beam_width: float

    @property
    def size(self) -> int:
        return self.angles.size


@dataclass(frozen=True, eq=False)
class BeamDesign:
    info_beam: np.ndarray
    sensing_cov: np.ndarray
    scale: float

    def covariance(self) -> np.ndarray:
        w = self.info_beam
        return self.sensing_cov + np.outer(w, w.conj())

    @property
    def info_power(self) -> float:
        return float(np.vdot(self.info_beam, self.info_beam).real)

    @property
    def sensing_power(self) -> float:
        return float(np.trace(self.sensing_cov).real)

    @property
    def sensing_rank(self) -> int:
        ev = np.linalg.eigvalsh(self.sensing_cov)
        return int(np.sum(ev > 1e-9 * max(ev.max(), 1e-300)))


def check_design(design: BeamDesign, scene: Scene, eps_psd=EPS_PSD, eps_pow=EPS_POW) -> None:
    """Raise DomainError unless the design is PSD and spends exactly Q."""
    S = design.sensing_cov
    q = scene.power_budget
    if not np.allclose(S, S.conj().T, atol=1e-10 * max(q, 1.0)):
        raise DomainError("sensing covariance is not Hermitian")
    lam = np.linalg.eigvalsh((S + S.conj().T) / 2).min()
    if lam < -eps_psd * q:
        raise DomainError(f"sensing covariance not PSD (min eigenvalue {lam:.3e})")
    total = design.sensing_power + design.info_power
    if abs(total - q) > eps_pow * q:
        raise DomainError(f"transmit power {total:.9g} differs from budget {q:.9g}")


def steering_vector(angle: float, n_antennas: int, spacing_ratio: float) -> np.ndarray:
    n = np.arange(n_antennas)
    return np.exp(2j * np.pi * n * spacing_ratio * np.sin(angle))


def steering_matrix(angles, n_antennas: int, spacing_ratio: float) -> np.ndarray:
    """Steering vectors of ``angles`` as the columns of an N x M matrix."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = np.arange(n_antennas)[:, None]
    return np.exp(2j * np.pi * n * spacing_ratio * np.sin(angles)[None, :])


def los_channel(target: Target, n_antennas: int, spacing_ratio: float) -> np.ndarray:
    if target.distance == 0:
        raise DomainError("zero distance")
    return target.amplitude * steering_vector(target.angle, n_antennas, spacing_ratio)


def _quad(v, X):
    return float(np.real(np.vdot(v, X @ v)))


def sinr_cu(design: BeamDesign, scene: Scene) -> float:
    g = scene.cu_channel
    num = abs(np.vdot(g, design.info_beam)) ** 2
    return float(num / (_quad(g, design.sensing_cov) + scene.cu_noise_power))


def sinr_eavesdropper(design: BeamDesign, target_index: int, scene: Scene) -> float:
    if target_index not in scene.eavesdroppers:
        raise DomainError(f"target {target_index} is not an eavesdropper")
    h = scene.target_channel(target_index)
    sigma2 = scene.targets[target_index].noise_power
    num = abs(np.vdot(h, design.info_beam)) ** 2
    return float(num / (_quad(h, design.sensing_cov) + sigma2))


def secrecy_rate(design: BeamDesign, scene: Scene) -> float:
    c = np.log2(1.0 + sinr_cu(design, scene))
    rates = [c - np.log2(1.0 + sinr_eavesdropper(design, k, scene)) for k in scene.eavesdroppers]
    return float(max(min(rates), 0.0))


def beampattern(cov_total: np.ndarray, angles, scene: Scene) -> np.ndarray:
    """Beampattern gains at several angles (vectorised)."""
    A = scene.steering(angles)
    return np.real(np.einsum("nm,nk,km->m", A.conj(), cov_total, A))


def beampattern_gain(cov_total: np.ndarray, angle: float, scene: Scene) -> float:
    return float(beampattern(cov_total, [angle], scene)[0])


def desired_beampattern(scene: Scene, beam_width: float, n_samples: int) -> SampleGrid:
    if n_samples < 2:
        raise DomainError("need at least two sample angles")
    if not scene.targets:
        raise DomainError("scene has no targets")
    angles = np.linspace(-np.pi / 2, np.pi / 2, n_samples)
    theta = np.array([t.angle for t in scene.targets])
    inside = np.abs(angles[:, None] - theta[None, :]) < beam_width / 2
    desired = inside.any(axis=1).astype(int)
    if not desired.any():
        raise DomainError("no sample angle falls inside a target window; widen the beam or add samples")
    return SampleGrid(angles, desired, beam_width)


def matching_error_from_gains(gains, desired, eta) -> float:
    r = eta * np.asarray(desired, dtype=float) - np.asarray(gains, dtype=float)
    return float(np.dot(r, r))


def matching_error(design: BeamDesign, grid: SampleGrid, scene: Scene) -> float:
    gains = beampattern(design.covariance(), grid.angles, scene)
    return matching_error_from_gains(gains, grid.desired, design.scale)


def optimal_scale(cov_total: np.ndarray, grid: SampleGrid, scene: Scene) -> float:
    """Least-squares scaling factor for a fixed total covariance.

    With a 0/1 desired pattern the minimiser is the mean gain over the
    desired samples.
    """
    d = np.asarray(grid.desired, dtype=float)
    if not d.any():
        raise DomainError("desired beampattern is identically zero")
    gains = beampattern(cov_total, grid.angles, scene)
    return float(np.dot(d, gains) / np.dot(d, d))
