"""Secrecy-constrained beampattern designs.

``solve_optimal`` is the global optimum (relaxation per eavesdropper SINR cap
plus an outer search over the cap, followed by rank-one extraction).
``solve_zf`` and ``solve_separate`` are the two low-complexity designs and
``solve_sensing_only`` is the benchmark that ignores the CU.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import conic
from .conic import SolverSettings
from .errors import (DegenerateExtractionError, DomainError, ExtractionError, InfeasibleError,
                     NumericalError, SearchRangeError)
from .model import (BeamDesign, SampleGrid, Scene, beampattern, check_design, matching_error,
                    secrecy_rate, sinr_cu, sinr_eavesdropper)

log = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-4
GAMMA_LO = 1e-6
P6_RANK_TOL = 1e-6
N_RANDOMIZATIONS = 200
ZF_RANK_TOL = 1e-10
POLISH_TOLS = (1e-10, 1e-9)


@dataclass(frozen=True)
class SearchSettings:
    n_grid: int = 64
    n_refine: int = 3
    n_subdivide: int = 16
    gamma_lo: float = GAMMA_LO
    gamma_hi: float | None = None


@dataclass
class OuterSearchTrace:
    gammas: np.ndarray
    values: np.ndarray
    interval: tuple[float, float]
    gamma_star: float

    @property
    def best(self) -> float:
        return float(self.values[np.searchsorted(self.gammas, self.gamma_star)])


@dataclass
class DesignReport:
    name: str
    design: BeamDesign
    matching_error: float
    secrecy_rate: float
    cu_sinr: float
    eve_sinrs: dict[int, float]
    angles: np.ndarray
    total_gain: np.ndarray
    info_gain: np.ndarray
    sensing_gain: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    trace: OuterSearchTrace | None = None

    @property
    def max_eve_sinr(self) -> float:
        return max(self.eve_sinrs.values())


@dataclass
class SecrecyCapacity:
    r_star: float
    gamma_e: float
    trace: OuterSearchTrace
    design: BeamDesign | None


def make_report(name, design: BeamDesign, scene: Scene, grid: SampleGrid, diagnostics=None,
                trace=None) -> DesignReport:
    check_design(design, scene)
    w = design.info_beam
    return DesignReport(
        name=name,
        design=design,
        matching_error=matching_error(design, grid, scene),
        secrecy_rate=secrecy_rate(design, scene),
        cu_sinr=sinr_cu(design, scene),
        eve_sinrs={k: sinr_eavesdropper(design, k, scene) for k in scene.eavesdroppers},
        angles=grid.angles,
        total_gain=beampattern(design.covariance(), grid.angles, scene),
        info_gain=beampattern(np.outer(w, w.conj()), grid.angles, scene),
        sensing_gain=beampattern(design.sensing_cov, grid.angles, scene),
        diagnostics=dict(diagnostics or {}),
        trace=trace,
    )


def _hermitize(X):
    X = np.asarray(X, dtype=complex)
    return (X + X.conj().T) / 2


# -- rank-one extraction ---------------------------------------------------------

def extract_unchecked(w_tilde, s_tilde, eta_tilde, g, allow_degenerate=False) -> BeamDesign:
    """Closed-form rank-one construction from a relaxed (W, S, eta)."""
    W = _hermitize(w_tilde)
    S = _hermitize(s_tilde)
    g = np.asarray(g, dtype=complex)
    gWg = float(np.real(np.vdot(g, W @ g)))
    total = float(np.trace(W + S).real)
    if gWg <= 1e-14 * np.vdot(g, g).real * max(total, 1e-300):
        if not allow_degenerate:
            raise DegenerateExtractionError(f"g^H W g = {gWg:.3e}: CU receives no information power")
        return BeamDesign(np.zeros_like(g), W + S, float(eta_tilde))
    w0 = W @ g / np.sqrt(gWg)
    return BeamDesign(w0, W + S - np.outer(w0, w0.conj()), float(eta_tilde))


def extraction_violations(w_tilde, s_tilde, design: BeamDesign, g, eve_channels=()) -> list:
    """Check the four guarantees of the rank-one construction.

    Returns ``(clause, measured, allowed)`` for every clause that fails.
    """
    W = _hermitize(w_tilde)
    S = _hermitize(s_tilde)
    g = np.asarray(g, dtype=complex)
    w0 = design.info_beam
    Wstar = np.outer(w0, w0.conj())
    Sstar = design.sensing_cov
    trW = float(np.trace(W).real)
    trT = float(np.trace(W + S).real)
    out = []

    defect = float(np.abs(Sstar + Wstar - W - S).max())
    if defect > 1e-10 * max(trT, 1e-300):
        out.append(("sum", defect, 1e-10 * trT))
    lam = float(np.linalg.eigvalsh(_hermitize(W - Wstar)).min())
    if lam < -1e-8 * trW:
        out.append(("info_dominance", lam, -1e-8 * trW))
    lam = float(np.linalg.eigvalsh(_hermitize(Sstar - S)).min())
    if lam < -1e-8 * trT:
        out.append(("sensing_dominance", lam, -1e-8 * trT))
    before = float(np.real(np.vdot(g, W @ g)))
    after = float(np.real(np.vdot(g, Wstar @ g)))
    if abs(after - before) > 1e-9 * before + 1e-15 * np.vdot(g, g).real * trT:
        out.append(("cu_form", after - before, 1e-9 * before))
    for k, h in enumerate(eve_channels):
        before = float(np.real(np.vdot(h, W @ h)))
        after = float(np.real(np.vdot(h, Wstar @ h)))
        allowed = 1e-9 * before + 1e-15 * np.vdot(h, h).real * trW
        if after - before > allowed:
            out.append((f"eve_form[{k}]", after - before, allowed))
    return out


def rank_one_extract(w_tilde, s_tilde, eta_tilde, g, eve_channels=(),
                     allow_degenerate=False) -> BeamDesign:
    """Rank-one design with the same total covariance, CU signal power and scale.

    Raises :class:`ExtractionError` naming the first violated guarantee.
    """
    design = extract_unchecked(w_tilde, s_tilde, eta_tilde, g, allow_degenerate)
    bad = extraction_violations(w_tilde, s_tilde, design, g, eve_channels)
    if bad:
        clause, measured, allowed = bad[0]
        raise ExtractionError(clause, f"measured {measured:.3e}, allowed {allowed:.3e}")
    return design


# -- outer search over the eavesdropper SINR cap -------------------------------

def gamma_e_upper(scene: Scene) -> float:
    """Largest eavesdropper SINR any design can produce (all power on it, no AN)."""
    Q = scene.power_budget
    return max(Q * np.vdot(h, h).real / s2 for h, s2 in zip(scene.eve_channels(), scene.eve_noise()))


def cu_snr_cap(scene: Scene) -> float:
    g = scene.cu_channel
    return scene.power_budget * np.vdot(g, g).real / scene.cu_noise_power


def outer_search(evaluate: Callable[[float], tuple[float, object]], search: SearchSettings,
                 gamma_hi: float, extra=()) -> tuple[OuterSearchTrace, object]:
    """Grid-then-refine minimisation of ``evaluate`` over gamma.

    ``evaluate`` returns ``(value, payload)`` with value = +inf for
    infeasible points. Ties go to the smallest gamma.
    """
    lo = search.gamma_lo
    hi = search.gamma_hi or gamma_hi
    if not hi > lo:
        hi = lo * 10
    seen: dict[float, tuple[float, object]] = {}

    def run(points):
        for gmm in points:
            gmm = float(gmm)
            if gmm not in seen:
                seen[gmm] = evaluate(gmm)

    run(np.geomspace(lo, hi, search.n_grid))
    run(float(np.clip(x, lo, hi)) for x in extra if np.isfinite(x) and x > 0)

    def incumbent():
        gs = np.array(sorted(seen))
        fs = np.array([seen[x][0] for x in gs])
        return gs, fs, int(np.argmin(fs))  # argmin returns the first (smallest gamma) tie

    gs, fs, i = incumbent()
    if not np.isfinite(fs[i]):
        raise SearchRangeError(f"no feasible point for gamma_E in [{lo:.3g}, {hi:.3g}]")
    interval = (gs[max(i - 1, 0)], gs[min(i + 1, len(gs) - 1)])
    for _ in range(search.n_refine):
        left, right = gs[max(i - 1, 0)], gs[min(i + 1, len(gs) - 1)]
        interval = (float(left), float(right))
        run(np.linspace(left, right, search.n_subdivide + 2)[1:-1])
        gs, fs, i = incumbent()
    trace = OuterSearchTrace(gs, fs, interval, float(gs[i]))
    return trace, seen[float(gs[i])][1]


# -- maximum secrecy rate -----------------------------------------------------------

def secrecy_capacity(scene: Scene, search: SearchSettings = SearchSettings(),
                     settings: SolverSettings = SolverSettings()) -> SecrecyCapacity:
    """Maximum achievable secrecy rate with the gamma_E at which it is reached.

    For each SINR cap the largest CU SINR is found by a conic solve; the
    resulting covariance pair is turned into a rank-one design whose secrecy
    rate is evaluated directly, so every reported rate is achievable.
    """
    g = scene.cu_channel
    eves = scene.eve_channels()
    Q = scene.power_budget

    def evaluate(gamma_e):
        res = conic.solve(conic.build_p2_sdr(scene, gamma_e), settings)
        if not res.ok:
            return np.inf, None
        tau = res.values["tau"]
        if not tau > 0:
            return np.inf, None
        W = Q * res.values["U"] / tau
        S = Q * res.values["V"] / tau
        try:
            design = rank_one_extract(W, S, 0.0, g, eves)
        except (DegenerateExtractionError, ExtractionError):
            return 0.0, None
        return -secrecy_rate(design, scene), design

    trace, design = outer_search(evaluate, search, gamma_e_upper(scene))
    r_star = max(0.0, -trace.best)
    gamma_e = 0.0
    if design is not None:
        gamma_e = max(sinr_eavesdropper(design, k, scene) for k in scene.eavesdroppers)
    return SecrecyCapacity(r_star, gamma_e, trace, design)


def max_secrecy_rate(scene: Scene, search: SearchSettings = SearchSettings(),
                     settings: SolverSettings = SolverSettings()) -> float:
    return secrecy_capacity(scene, search, settings).r_star


# -- the designs ---------------------------------------------------------------------

def solve_optimal(scene: Scene, grid: SampleGrid, r0: float,
                  search: SearchSettings = SearchSettings(),
                  settings: SolverSettings = SolverSettings(),
                  capacity: SecrecyCapacity | None = None) -> DesignReport:
    """Globally optimal design: relaxation + 1D search + rank-one extraction."""
    t0 = time.perf_counter()
    if r0 < 0:
        raise DomainError("secrecy rate threshold must be nonnegative")
    if capacity is None:
        capacity = secrecy_capacity(scene, search, settings)
    if capacity.r_star < r0 - FEASIBILITY_SLACK:
        raise InfeasibleError(
            f"secrecy rate {r0:.6g} bps/Hz exceeds the maximum {capacity.r_star:.6g} bps/Hz",
            capacity.r_star)
    cap = cu_snr_cap(scene)
    n_solves = 0

    def evaluate(gamma_e):
        nonlocal n_solves
        beta = 2.0 ** r0 * (1.0 + gamma_e) - 1.0
        if beta > cap * (1 + 1e-9):
            return np.inf, None  # CU cannot reach beta even with all power and no AN
        n_solves += 1
        res = conic.solve(conic.build_sdr41(scene, grid, gamma_e, r0), settings)
        if not res.ok:
            return np.inf, None
        return res.objective ** 2, res

    try:
        trace, res = outer_search(evaluate, search, gamma_e_upper(scene), extra=[capacity.gamma_e])
    except SearchRangeError as exc:
        exc.r_star = capacity.r_star
        raise
    # Re-solve the winner more tightly: the argmin over many solves favours
    # points whose reported objective sits at the low edge of the tolerance.
    problem = conic.build_sdr41(scene, grid, trace.gamma_star, r0)
    for tol in POLISH_TOLS:
        if tol >= settings.tol_feas:
            break
        tight = conic.solve(problem, SolverSettings(tol, tol, max(settings.max_iters, 400)))
        n_solves += 1
        if tight.ok:
            res = tight
            break
    v = res.values
    design = rank_one_extract(v["W"], v["S"], v["eta"], scene.cu_channel, scene.eve_channels(),
                              allow_degenerate=(r0 == 0))
    ev = np.linalg.eigvalsh(v["W"])
    diagnostics = {
        "solver_status": res.status,
        "gamma_e_star": trace.gamma_star,
        "relaxed_objective": res.objective ** 2,
        "relaxed_info_rank": int(np.sum(ev > 1e-6 * max(ev.max(), 1e-300))),
        "n_solves": n_solves,
        "r_star": capacity.r_star,
        "iterations": res.iterations,
        "wall_time_s": time.perf_counter() - t0,
    }
    return make_report("optimal", design, scene, grid, diagnostics, trace)


def zf_direction(scene: Scene) -> tuple[np.ndarray, float]:
    """Unit information direction in the eavesdroppers' null space, and |g^H w|."""
    H = np.vstack([h.conj() for h in scene.eve_channels()])
    if scene.n_antennas <= H.shape[0]:
        raise DomainError(
            f"zero-forcing needs more antennas ({scene.n_antennas}) than eavesdroppers ({H.shape[0]})")
    _, s, vh = np.linalg.svd(H, full_matrices=True)
    rank = int(np.sum(s > ZF_RANK_TOL * s.max()))
    V2 = vh.conj().T[:, rank:]
    proj = V2.conj().T @ scene.cu_channel
    norm = float(np.linalg.norm(proj))
    if norm <= 1e-12 * np.linalg.norm(scene.cu_channel):
        return V2[:, 0], 0.0
    return V2 @ proj / norm, norm


def solve_zf(scene: Scene, grid: SampleGrid, r0: float,
             settings: SolverSettings = SolverSettings()) -> DesignReport:
    t0 = time.perf_counter()
    w_dir, gain = zf_direction(scene)
    need = 2.0 ** r0 - 1.0
    if scene.power_budget * gain ** 2 / scene.cu_noise_power < need * (1 - 1e-12):
        raise InfeasibleError(f"zero-forcing cannot reach {r0:.6g} bps/Hz")
    res = conic.solve(conic.build_p5(scene, grid, w_dir, r0), settings)
    if res.status == conic.INFEASIBLE:
        raise InfeasibleError(f"zero-forcing subproblem infeasible at {r0:.6g} bps/Hz")
    if not res.ok:
        raise NumericalError(f"zero-forcing subproblem: solver status {res.status}")
    q0 = max(res.values["q0"], 0.0)
    S = _hermitize(res.values["S"])
    design = BeamDesign(np.sqrt(q0) * w_dir, S, res.values["eta"])
    diagnostics = {"solver_status": res.status, "info_power": q0, "iterations": res.iterations,
                   "wall_time_s": time.perf_counter() - t0}
    return make_report("zf", design, scene, grid, diagnostics)


def _secrecy_margin_per_watt(v, scene: Scene, r0: float) -> float:
    """min_k |g^H v|^2/s0 - 2^r0 |h_k^H v|^2/s_k for a unit vector v."""
    m = 2.0 ** r0
    cu = abs(np.vdot(scene.cu_channel, v)) ** 2 / scene.cu_noise_power
    return min(cu - m * abs(np.vdot(h, v)) ** 2 / s2
               for h, s2 in zip(scene.eve_channels(), scene.eve_noise()))


def min_power_beam(W: np.ndarray, scene: Scene, r0: float, seed: int = 0) -> tuple[np.ndarray, dict]:
    """Rank-one information beam from the relaxed minimum-power solution.

    Each candidate direction is scaled to the least power meeting every
    AN-free secrecy constraint. The principal eigenvector is used when the
    relaxation is rank one; otherwise Gaussian randomisation supplies extra
    candidates and the least-power feasible one wins.
    """
    need = 2.0 ** r0 - 1.0
    ev, U = np.linalg.eigh(_hermitize(W))
    ranked = bool(ev[-1] > 0 and (len(ev) < 2 or ev[-2] <= P6_RANK_TOL * ev[-1]))
    candidates = [U[:, -1]]
    if not ranked:
        rng = np.random.default_rng(seed)
        root = U * np.sqrt(np.clip(ev, 0, None))
        z = (rng.standard_normal((len(ev), N_RANDOMIZATIONS))
             + 1j * rng.standard_normal((len(ev), N_RANDOMIZATIONS))) / np.sqrt(2)
        candidates += list((root @ z).T)
    best, best_p = None, np.inf
    for v in candidates:
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v = v / nv
        margin = _secrecy_margin_per_watt(v, scene, r0)
        if margin <= 0:
            continue
        p = need / margin
        if p < best_p:
            best, best_p = v, p
    if best is None or best_p > scene.power_budget * (1 + 1e-9):
        raise NumericalError("no feasible rank-one information beam found")
    return np.sqrt(best_p) * best, {"p6_rank_one": ranked, "p6_randomized": not ranked}


def solve_separate(scene: Scene, grid: SampleGrid, r0: float,
                   settings: SolverSettings = SolverSettings()) -> DesignReport:
    t0 = time.perf_counter()
    diagnostics = {}
    if r0 == 0:
        w0 = np.zeros(scene.n_antennas, complex)
        diagnostics.update(p6_rank_one=True, p6_randomized=False)
    else:
        res = conic.solve(conic.build_p6_sdr(scene, r0, scene.power_budget), settings)
        if res.status == conic.INFEASIBLE:
            raise InfeasibleError(f"no AN-free beam reaches {r0:.6g} bps/Hz within the budget")
        if not res.ok:
            # An AN-free beam never beats the capacity, so the bound settles stalled solves.
            r_star = max_secrecy_rate(scene, settings=settings)
            if r0 > r_star + FEASIBILITY_SLACK:
                raise InfeasibleError(f"{r0:.6g} bps/Hz exceeds the maximum secrecy rate", r_star=r_star)
            raise NumericalError(f"minimum-power subproblem: solver status {res.status}")
        w0, flags = min_power_beam(res.values["W"], scene, r0)
        diagnostics.update(flags, p6_power=res.objective)
    # Guard against the beam exceeding the budget by rounding.
    p0 = float(np.vdot(w0, w0).real)
    if p0 > scene.power_budget:
        w0 = w0 * np.sqrt(scene.power_budget / p0)
    res = conic.solve(conic.build_p7(scene, grid, w0), settings)
    if not res.ok:
        raise NumericalError(f"sensing subproblem: solver status {res.status}")
    B = conic.cu_null_basis(scene)
    S = _hermitize(B @ res.values["T"] @ B.conj().T)
    design = BeamDesign(w0, S, res.values["eta"])
    diagnostics.update(solver_status=res.status, info_power=float(np.vdot(w0, w0).real),
                       iterations=res.iterations, wall_time_s=time.perf_counter() - t0)
    return make_report("separate", design, scene, grid, diagnostics)


def solve_sensing_only(scene: Scene, grid: SampleGrid,
                       settings: SolverSettings = SolverSettings()) -> DesignReport:
    t0 = time.perf_counter()
    res = conic.solve(conic.build_sensing_only(scene, grid), settings)
    if not res.ok:
        raise NumericalError(f"sensing-only problem: solver status {res.status}")
    design = BeamDesign(np.zeros(scene.n_antennas, complex), _hermitize(res.values["S"]),
                        res.values["eta"])
    diagnostics = {"solver_status": res.status, "iterations": res.iterations,
                   "wall_time_s": time.perf_counter() - t0}
    return make_report("sensing_only", design, scene, grid, diagnostics)


SOLVERS = {
    "optimal": solve_optimal,
    "zf": solve_zf,
    "separate": solve_separate,
}
