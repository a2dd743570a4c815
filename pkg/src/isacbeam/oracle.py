"""Independent verifiers: exhaustive small-instance search, extraction fuzzing, closed forms.

Nothing here calls the conic solver, except ``run_analytic``, which
compares the library against closed-form values.

Brute force parameterisation
----------------------------
Any pair ``(w0, S)`` with ``S = R - w0 w0^H`` PSD is ``w0 = R^{1/2} u`` with
``|u| <= 1``. The search therefore enumerates the total covariance ``R``
(eigenbasis on a rotation grid, eigenvalues on a simplex grid, trace Q) and,
inside each ``R``, the information direction ``u`` on a sphere grid scaled
by the levels in ``power_levels`` (``|u|^2``). The matching error depends on
``R`` only, so candidates are visited in order of increasing error and the
first feasible one is the minimum. Unit ``|u|`` suffices whenever the
secrecy rate is positive: each eavesdropper term is monotone in ``|u|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import conic, designs
from .errors import ConfigError, DomainError
from .model import BeamDesign, SampleGrid, Scene, Target, desired_beampattern, make_scene

MAX_CANDIDATES = 10_000_000


@dataclass(frozen=True)
class BruteForceConfig:
    n_antennas: int = 2
    discretization: int = 64
    power_levels: tuple[float, ...] = (1.0,)
    restrict_real: bool = False
    rate_slack: float = 0.0
    max_candidates: int = MAX_CANDIDATES

    def __post_init__(self):
        if not 2 <= self.n_antennas <= 3:
            raise ConfigError("brute force supports 2 or 3 antennas")
        if self.n_antennas == 3 and not self.restrict_real:
            raise ConfigError("three antennas require restrict_real=True")
        if self.discretization < 2:
            raise ConfigError("discretization needs at least 2 points")
        if not self.power_levels or any(not 0 < p <= 1 for p in self.power_levels):
            raise ConfigError("power levels are fractions |u|^2 in (0, 1]")
        if self.max_candidates > MAX_CANDIDATES:
            raise ConfigError(f"candidate budget is capped at {MAX_CANDIDATES}")


@dataclass
class BruteForceResult:
    feasible: bool
    design: BeamDesign | None
    matching_error: float
    secrecy_rate: float
    n_covariances: int
    n_evaluated: int
    rate_slack: float


def _rotations(cfg: BruteForceConfig) -> np.ndarray:
    """Orthonormal eigenbases, shape (n, N, N), columns are eigenvectors."""
    d = cfg.discretization
    if cfg.n_antennas == 2:
        if cfg.restrict_real:
            a = np.linspace(0, np.pi, d, endpoint=False)
            c, s = np.cos(a), np.sin(a)
            return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -1)
        a, p = np.meshgrid(np.linspace(0, np.pi / 2, d), 2 * np.pi * np.arange(d) / d, indexing="ij")
        a, p = a.ravel(), p.ravel()
        c, s, e = np.cos(a), np.sin(a), np.exp(1j * p)
        v1 = np.stack([c + 0j, e * s], -1)
        v2 = np.stack([-np.conj(e) * s, c + 0j], -1)
        return np.stack([v1, v2], -1)
    # Real 3x3 rotations from ZYZ Euler angles.
    ang = np.linspace(0, np.pi, d, endpoint=False)
    a, b, c = (x.ravel() for x in np.meshgrid(ang, ang, ang, indexing="ij"))

    def rz(t):
        o, z = np.ones_like(t), np.zeros_like(t)
        return np.stack([np.stack([np.cos(t), -np.sin(t), z], -1),
                         np.stack([np.sin(t), np.cos(t), z], -1),
                         np.stack([z, z, o], -1)], -2)

    def ry(t):
        o, z = np.ones_like(t), np.zeros_like(t)
        return np.stack([np.stack([np.cos(t), z, np.sin(t)], -1),
                         np.stack([z, o, z], -1),
                         np.stack([-np.sin(t), z, np.cos(t)], -1)], -2)

    return rz(a) @ ry(b) @ rz(c)


def _eigenvalues(cfg: BruteForceConfig) -> np.ndarray:
    """Eigenvalue fractions on a simplex grid, shape (n, N)."""
    d = cfg.discretization
    if cfg.n_antennas == 2:
        s = np.linspace(0.5, 1.0, d)
        return np.stack([s, 1 - s], -1)
    pts = [(i, j, d - 1 - i - j) for i in range(d) for j in range(d - i)]
    return np.array(pts, dtype=float) / (d - 1)


def _directions(cfg: BruteForceConfig) -> np.ndarray:
    """Unit information directions up to a global phase, shape (n, N)."""
    d = cfg.discretization
    if cfg.n_antennas == 2:
        if cfg.restrict_real:
            b = np.linspace(0, np.pi, d, endpoint=False)
            return np.stack([np.cos(b), np.sin(b)], -1).astype(complex)
        b, p = np.meshgrid(np.linspace(0, np.pi / 2, d), 2 * np.pi * np.arange(d) / d, indexing="ij")
        b, p = b.ravel(), p.ravel()
        return np.stack([np.cos(b) + 0j, np.exp(1j * p) * np.sin(b)], -1)
    b, p = np.meshgrid(np.linspace(0, np.pi / 2, d), 2 * np.pi * np.arange(d) / d, indexing="ij")
    b, p = b.ravel(), p.ravel()
    return np.stack([np.sin(b) * np.cos(p), np.sin(b) * np.sin(p), np.cos(b)], -1).astype(complex)


def _rate_bounds(V, L, Q, scene: Scene, real: bool) -> np.ndarray:
    """Upper bound on the secrecy rate over unit u, for every covariance candidate.

    For one eavesdropper the rate at ``w = R^{1/2} u`` is
    ``log2(G (H - u^H B u) / (H (G - u^H A u)))``; the ratio is a generalised
    Rayleigh quotient whose maximum is the top eigenvalue of the pencil.
    The minimum of the per-eavesdropper maxima bounds the joint maximum.
    """
    n = V.shape[-1]
    g = scene.cu_channel
    eye = np.eye(n)
    out = np.empty((len(V), len(L)))
    for iv, Vr in enumerate(V):
        roots = np.einsum("ij,lj,kj->lik", Vr, np.sqrt(Q * L), Vr.conj())
        Rs = roots @ roots
        G = np.einsum("i,lij,j->l", g.conj(), Rs, g).real + scene.cu_noise_power
        rg = roots @ g
        den = G[:, None, None] * eye - rg[:, :, None] * rg.conj()[:, None, :]
        if real:
            den = den.real
        chol = np.linalg.cholesky(den)
        bound = np.full(len(L), np.inf)
        for h, s2 in zip(scene.eve_channels(), scene.eve_noise()):
            H = np.einsum("i,lij,j->l", h.conj(), Rs, h).real + s2
            rh = roots @ h
            num = H[:, None, None] * eye - rh[:, :, None] * rh.conj()[:, None, :]
            if real:
                num = num.real
            X = np.linalg.solve(chol, num)
            M = np.linalg.solve(chol, X.conj().swapaxes(-1, -2))
            lam = np.linalg.eigvalsh((M + M.conj().swapaxes(-1, -2)) / 2)[:, -1]
            bound = np.minimum(bound, np.log2(G / H * np.maximum(lam, 1e-300)))
        out[iv] = bound
    return out.ravel()


def brute_force_p1(scene: Scene, grid: SampleGrid, r0: float,
                   cfg: BruteForceConfig = BruteForceConfig()) -> BruteForceResult:
    """Least matching error over a discretised set of feasible designs."""
    if scene.n_antennas != cfg.n_antennas:
        raise ConfigError(f"scene has {scene.n_antennas} antennas, config {cfg.n_antennas}")
    Q = scene.power_budget
    V = _rotations(cfg)
    L = _eigenvalues(cfg)
    n_cov = len(V) * len(L)
    if n_cov > cfg.max_candidates:
        raise ConfigError(f"{n_cov} covariance candidates exceed the budget {cfg.max_candidates}")

    A = scene.steering(grid.angles)
    proj = np.abs(np.einsum("nm,rni->rmi", A.conj(), V)) ** 2  # (nV, M, N)
    d = np.asarray(grid.desired, float)
    gains = Q * np.einsum("rmi,li->rlm", proj, L).reshape(n_cov, -1)
    eta = gains @ d / d.dot(d)
    err = np.sum((eta[:, None] * d[None, :] - gains) ** 2, axis=1)
    order = np.argsort(err, kind="stable")

    def covariance(idx):
        iv, il = divmod(int(idx), len(L))
        Vr, lam = V[iv], Q * L[il]
        return (Vr * lam) @ Vr.conj().T, (Vr * np.sqrt(lam)) @ Vr.conj().T

    if r0 <= 0:
        R, _ = covariance(order[0])
        design = BeamDesign(np.zeros(scene.n_antennas, complex), R, float(eta[order[0]]))
        return BruteForceResult(True, design, float(err[order[0]]), 0.0, n_cov, n_cov, cfg.rate_slack)

    target = r0 - cfg.rate_slack
    bounds = _rate_bounds(V, L, Q, scene, cfg.restrict_real)
    order = order[bounds[order] >= target]

    g = scene.cu_channel
    eves = scene.eve_channels()
    noise = scene.eve_noise()
    U = _directions(cfg)
    n_eval = n_cov
    for idx in order:
        R, root = covariance(idx)
        G = float(np.real(np.vdot(g, R @ g))) + scene.cu_noise_power
        Hs = [float(np.real(np.vdot(h, R @ h))) + s2 for h, s2 in zip(eves, noise)]
        best_rate, best_w = -np.inf, None
        for level in cfg.power_levels:
            n_eval += len(U)
            if n_eval > cfg.max_candidates:
                raise ConfigError(f"brute force exceeded {cfg.max_candidates} candidates")
            W = np.sqrt(level) * U @ root.T  # rows are R^{1/2} u
            a = np.abs(W @ g.conj()) ** 2
            rate = np.full(len(U), np.inf)
            for h, Hk in zip(eves, Hs):
                b = np.abs(W @ h.conj()) ** 2
                rate = np.minimum(rate, np.log2(G / (G - a)) - np.log2(Hk / (Hk - b)))
            j = int(np.argmax(rate))
            if rate[j] > best_rate:
                best_rate, best_w = float(rate[j]), W[j]
        if best_rate >= target:
            design = BeamDesign(best_w, R - np.outer(best_w, best_w.conj()), float(eta[idx]))
            return BruteForceResult(True, design, float(err[idx]), max(best_rate, 0.0), n_cov,
                                    n_eval, cfg.rate_slack)
    return BruteForceResult(False, None, np.inf, 0.0, n_cov, n_eval, cfg.rate_slack)


# -- extraction fuzzing ------------------------------------------------------------

@dataclass
class FuzzReport:
    n_antennas: int
    n_trials: int
    seed: int
    worst: dict = field(default_factory=dict)
    counterexamples: list = field(default_factory=list)
    n_rank_one: int = 0
    n_degenerate: int = 0
    max_rank_one_defect: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def summary(self) -> str:
        lines = [f"N={self.n_antennas} trials={self.n_trials} seed={self.seed} "
                 f"violations={len(self.counterexamples)}"]
        for c in self.counterexamples[:5]:
            lines.append(f"  trial {c['trial']}: {c['clause']} measured {c['measured']:.3e} "
                         f"allowed {c['allowed']:.3e}")
        return "\n".join(lines)


def _random_psd(rng, n, rank):
    X = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return X @ X.conj().T


def _null_psd(rng, g, rank):
    n = g.size
    B = scipy.linalg.null_space(g.conj()[None, :])
    X = B @ (rng.standard_normal((n - 1, rank)) + 1j * rng.standard_normal((n - 1, rank)))
    return X @ X.conj().T


def fuzz_proposition1(n_antennas: int, n_trials: int, seed: int,
                      extractor: Callable | None = None) -> FuzzReport:
    """Random relaxed pairs pushed through the rank-one construction.

    Every tenth draw has a rank-one information covariance and every tenth
    (offset by one) has one orthogonal to the CU channel. Inputs are scaled
    to unit total trace.
    """
    if n_trials < 1:
        raise DomainError("need at least one trial")
    extractor = extractor or designs.extract_unchecked
    rng = np.random.default_rng(seed)
    report = FuzzReport(n_antennas, n_trials, seed)
    n = n_antennas
    for trial in range(n_trials):
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        eves = [rng.standard_normal(n) + 1j * rng.standard_normal(n)
                for _ in range(int(rng.integers(1, 3)))]
        kind = trial % 10
        if kind == 9:
            W = _random_psd(rng, n, 1)
            report.n_rank_one += 1
        elif kind == 8:
            W = _null_psd(rng, g, int(rng.integers(1, n)))
            report.n_degenerate += 1
        else:
            W = _random_psd(rng, n, int(rng.integers(1, n + 1)))
        S = _random_psd(rng, n, int(rng.integers(1, n + 1)))
        scale = float(np.trace(W + S).real)
        W, S = W / scale, S / scale
        try:
            design = extractor(W, S, 1.0, g, allow_degenerate=True)
            bad = designs.extraction_violations(W, S, design, g, eves)
        except Exception as exc:  # noqa: BLE001 - any escape is a counterexample
            bad = [("exception", np.inf, 0.0)]
            design = None
            detail = repr(exc)
        else:
            detail = ""
        for clause, measured, allowed in bad:
            key = clause.split("[")[0]
            ratio = abs(measured) / max(abs(allowed), 1e-300)
            report.worst[key] = max(report.worst.get(key, 0.0), ratio)
            report.counterexamples.append({
                "trial": trial, "clause": clause, "measured": float(measured),
                "allowed": float(allowed), "W": W, "S": S, "g": g, "detail": detail,
            })
        if kind == 9 and design is not None:
            w0 = design.info_beam
            report.max_rank_one_defect = max(report.max_rank_one_defect,
                                             float(np.abs(np.outer(w0, w0.conj()) - W).max()))
    return report


# -- closed-form fixtures -----------------------------------------------------------

@dataclass
class AnalyticCase:
    case_id: str
    scene: Scene
    params: dict
    expected: dict
    derivation: str


def _orthogonal_scene(power_budget=4.0):
    # With N=4 and half-wavelength spacing, a(0) is orthogonal to a(30 deg).
    eve = Target(np.deg2rad(30.0), is_eavesdropper=True, noise_power=1.0)
    trusted = Target(np.deg2rad(-40.0))
    return make_scene(4, [eve, trusted], cu_angle=0.0, cu_noise_power=1.0,
                      power_budget=power_budget)


def analytic_cases(case_id: str) -> AnalyticCase:
    if case_id == "orthogonal_zf":
        scene = _orthogonal_scene()
        g = scene.cu_channel
        r = float(np.log2(1 + scene.power_budget * np.vdot(g, g).real / scene.cu_noise_power))
        return AnalyticCase(case_id, scene, {}, {"r_star": r},
                            "g orthogonal to h: beam along g gives the eavesdropper nothing, "
                            "so the maximum is the full-power CU rate")
    if case_id == "p6_orthogonal":
        scene = _orthogonal_scene()
        g = scene.cu_channel
        r0 = 2.0
        p = scene.cu_noise_power * (2 ** r0 - 1) / np.vdot(g, g).real
        return AnalyticCase(case_id, scene, {"r0": r0}, {"info_power": float(p)},
                            "only the CU constraint binds; matched filter along g at the "
                            "power that meets the SINR target exactly")
    if case_id == "projector_null":
        scene = _orthogonal_scene()
        rng = np.random.default_rng(7)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        return AnalyticCase(case_id, scene, {"s_bar": X @ X.conj().T}, {"cu_form": 0.0},
                            "Q2 g = 0, so g^H Q2 S Q2^H g vanishes for every S")
    raise DomainError(f"unknown analytic case {case_id!r}")


ANALYTIC_CASE_IDS = ("orthogonal_zf", "p6_orthogonal", "projector_null")


def run_analytic(case: AnalyticCase) -> dict:
    """Library value for each expected quantity."""
    scene = case.scene
    if case.case_id == "orthogonal_zf":
        return {"r_star": designs.max_secrecy_rate(scene)}
    if case.case_id == "p6_orthogonal":
        r0 = case.params["r0"]
        res = conic.solve(conic.build_p6_sdr(scene, r0, scene.power_budget))
        w, _ = designs.min_power_beam(res.values["W"], scene, r0)
        return {"info_power": float(np.vdot(w, w).real)}
    if case.case_id == "projector_null":
        Q2 = conic.cu_projector(scene)
        g = scene.cu_channel
        S = Q2 @ case.params["s_bar"] @ Q2.conj().T
        return {"cu_form": float(abs(np.vdot(g, S @ g)))}
    raise DomainError(f"unknown analytic case {case.case_id!r}")


def n2_fixtures() -> list[tuple[str, Scene, SampleGrid]]:
    """Two-antenna scenes with one eavesdropping target, for the brute-force sandwich."""
    specs = [  # (eve angle, trusted angle, cu angle, noise) in degrees / watts
        (30.0, None, 0.0, 1.0),
        (-40.0, None, 20.0, 1.0),
        (50.0, -20.0, -60.0, 0.5),
        (10.0, 60.0, -30.0, 2.0),
        (-20.0, 45.0, 70.0, 1.0),
    ]
    out = []
    for eve, trusted, cu, s2 in specs:
        targets = [Target(np.deg2rad(eve), is_eavesdropper=True, noise_power=s2)]
        if trusted is not None:
            targets.append(Target(np.deg2rad(trusted)))
        scene = make_scene(2, targets, cu_angle=np.deg2rad(cu), cu_noise_power=s2, power_budget=4.0)
        grid = desired_beampattern(scene, np.deg2rad(10.0), 91)
        out.append((f"eve{eve:+.0f}_cu{cu:+.0f}", scene, grid))
    return out
