"""Standard-form conic compilation of the convex beamforming subproblems.

Hermitian matrix variables are stored through their N^2 real parameters
(real diagonal, real and imaginary strict upper triangle); each one is
constrained to the PSD cone through its real symmetric 2N x 2N embedding
``[[Re X, -Im X], [Im X, Re X]]``. A problem is a linear objective, linear
equalities/inequalities and at most one second-order cone ``t >= ||r||``.

Every builder works in units of the power budget Q (covariances divided by
Q, noise-normalised channels) so that the solver sees O(1) data; the
``scales`` map converts solver values back to watts.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import clarabel
import numpy as np
from scipy import sparse

from .errors import DomainError, NumericalError
from .model import Scene, SampleGrid

log = logging.getLogger(__name__)

EPS_BLK = 1e-7


# -- Hermitian <-> real symmetric embedding ---------------------------------

def embed_hermitian(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if not np.allclose(X, X.conj().T, rtol=0, atol=1e-10 * max(1.0, np.abs(X).max(initial=0))):
        raise DomainError("matrix is not Hermitian")
    re, im = X.real, X.imag
    return np.block([[re, -im], [im, re]])


def block_defect(E) -> float:
    """Largest departure of a 2N x 2N matrix from the embedding structure."""
    E = np.asarray(E, dtype=float)
    n = E.shape[0] // 2
    a, b, c, d = E[:n, :n], E[:n, n:], E[n:, :n], E[n:, n:]
    return float(max(np.abs(E - E.T).max(), np.abs(a - d).max(), np.abs(b + c).max()))


def extract_hermitian(E, eps_blk: float = EPS_BLK, warn: bool = True) -> np.ndarray:
    """Inverse of :func:`embed_hermitian`, projecting onto the block structure.

    Small structural defects (solver noise) are repaired; defects above
    ``eps_blk`` times the matrix scale raise :class:`NumericalError`.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1] or E.shape[0] % 2:
        raise DomainError(f"expected a 2N x 2N matrix, got shape {E.shape}")
    n = E.shape[0] // 2
    scale = max(1.0, np.abs(E).max(initial=0))
    defect = block_defect(E)
    if defect > eps_blk * scale:
        raise NumericalError(f"embedding block defect {defect:.3e} exceeds tolerance")
    if warn and defect > 1e-12 * scale:
        log.debug("repairing embedding block defect %.2e", defect)
    re = (E[:n, :n] + E[n:, n:]) / 2
    im = (E[n:, :n] - E[:n, n:]) / 2
    X = re + 1j * im
    return (X + X.conj().T) / 2


# -- parameterisation ----------------------------------------------------------

def hermitian_basis(n: int) -> list[np.ndarray]:
    """Basis of n x n Hermitian matrices matching the variable parameter order."""
    basis = []
    for i in range(n):
        E = np.zeros((n, n), complex)
        E[i, i] = 1
        basis.append(E)
    iu = list(zip(*np.triu_indices(n, 1)))
    for i, j in iu:
        E = np.zeros((n, n), complex)
        E[i, j] = E[j, i] = 1
        basis.append(E)
    for i, j in iu:
        E = np.zeros((n, n), complex)
        E[i, j], E[j, i] = 1j, -1j
        basis.append(E)
    return basis


def hvec_coeffs(C: np.ndarray) -> np.ndarray:
    """Coefficients c with Re tr(C X) = c . params(X) for Hermitian C."""
    n = C.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate([np.real(np.diag(C)), 2 * C[iu].real, 2 * C[iu].imag])


def params_to_hermitian(p: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    X = np.diag(p[:n]).astype(complex)
    X[iu] = p[n:n + k] + 1j * p[n + k:]
    X[(iu[1], iu[0])] = p[n:n + k] - 1j * p[n + k:]
    return X


def _svec_index(m: int):
    rows, cols = [], []
    for j in range(m):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def svec(M: np.ndarray) -> np.ndarray:
    """Upper triangle, column-major, off-diagonals scaled by sqrt(2)."""
    r, c = _svec_index(M.shape[0])
    return M[r, c] * np.where(r == c, 1.0, np.sqrt(2.0))


def unsvec(v: np.ndarray, m: int) -> np.ndarray:
    r, c = _svec_index(m)
    vals = v / np.where(r == c, 1.0, np.sqrt(2.0))
    M = np.zeros((m, m))
    M[r, c] = vals
    M[c, r] = vals
    return M


@lru_cache(maxsize=None)
def _embedding_operator(n: int) -> np.ndarray:
    """Linear map from Hermitian parameters to svec of the embedding."""
    return np.column_stack([svec(embed_hermitian(B)) for B in hermitian_basis(n)])


# -- affine expressions --------------------------------------------------------

class Affine:
    """const + sum_X Re tr(C_X X) + sum_x c_x x over named variables."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms = dict(terms or {})
        self.const = float(const)

    def __add__(self, other):
        if not isinstance(other, Affine):
            return Affine(self.terms, self.const + float(other))
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine({k: -v for k, v in self.terms.items()}, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, a):
        a = float(a)
        return Affine({k: a * v for k, v in self.terms.items()}, a * self.const)

    __rmul__ = __mul__

    def value(self, values: dict) -> float:
        total = self.const
        for k, c in self.terms.items():
            x = values[k]
            if np.ndim(c):
                total += float(np.real(np.trace(c @ x)))
            else:
                total += c * float(x)
        return total

    def __repr__(self):
        return f"Affine({sorted(self.terms)}, const={self.const:.4g})"


def scalar(name: str) -> Affine:
    return Affine({name: 1.0})


def inner(name: str, C) -> Affine:
    """Re tr(C X) for Hermitian variable ``name``."""
    C = np.asarray(C, dtype=complex)
    return Affine({name: (C + C.conj().T) / 2})


def quad(name: str, v) -> Affine:
    """v^H X v."""
    v = np.asarray(v, dtype=complex)
    return Affine({name: np.outer(v, v.conj())})


def trace(name: str, n: int) -> Affine:
    return Affine({name: np.eye(n, dtype=complex)})


# -- problem and result containers --------------------------------------------

@dataclass
class ConicProblem:
    name: str
    hermitian: dict[str, int]
    scalars: list[str]
    objective: Affine
    equalities: list[tuple[str, Affine]] = field(default_factory=list)
    inequalities: list[tuple[str, Affine]] = field(default_factory=list)
    soc: tuple[Affine, list[Affine]] | None = None
    scales: dict[str, float] = field(default_factory=dict)
    objective_scale: float = 1.0

    def counts(self) -> dict:
        return {
            "psd_blocks": [2 * n for n in self.hermitian.values()],
            "scalars": len(self.scalars),
            "equalities": len(self.equalities),
            "inequalities": len(self.inequalities),
            "soc_dim": 0 if self.soc is None else len(self.soc[1]) + 1,
        }

    def labels(self, kind: str) -> list[str]:
        return [lab for lab, _ in getattr(self, kind)]

    def check(self) -> None:
        declared = set(self.hermitian) | set(self.scalars)
        exprs = [self.objective] + [e for _, e in self.equalities + self.inequalities]
        if self.soc is not None:
            exprs += [self.soc[0], *self.soc[1]]
        for e in exprs:
            for k, c in e.terms.items():
                if k not in declared:
                    raise DomainError(f"{self.name}: undeclared variable {k!r}")
                if k in self.hermitian and np.shape(c) != (self.hermitian[k],) * 2:
                    raise DomainError(f"{self.name}: coefficient of {k!r} has shape {np.shape(c)}")
                if k in self.scalars and np.ndim(c):
                    raise DomainError(f"{self.name}: scalar {k!r} given a matrix coefficient")


@dataclass(frozen=True)
class SolverSettings:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iters: int = 200


@dataclass
class SolverResult:
    status: str
    values: dict
    raw: dict
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    solve_time: float
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"

_STATUS = {
    "Solved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "MaxIterations": MAX_ITERATIONS,
    "MaxTime": MAX_ITERATIONS,
}


# -- compilation and solve ------------------------------------------------------

def _layout(problem: ConicProblem):
    offsets, pos = {}, 0
    for name, n in problem.hermitian.items():
        offsets[name] = (pos, n * n)
        pos += n * n
    for name in problem.scalars:
        offsets[name] = (pos, 1)
        pos += 1
    return offsets, pos


def _row(expr: Affine, offsets, nvar) -> np.ndarray:
    a = np.zeros(nvar)
    for k, c in expr.terms.items():
        start, size = offsets[k]
        if size == 1 and not np.ndim(c):
            a[start] += c
        else:
            a[start:start + size] += hvec_coeffs(c)
    return a


def compile_problem(problem: ConicProblem):
    """Clarabel data (P, q, A, b, cones) for ``min q.x s.t. b - A x in K``."""
    problem.check()
    offsets, nvar = _layout(problem)
    blocks, rhs, cones = [], [], []

    if problem.equalities:
        rows = [_row(e, offsets, nvar) for _, e in problem.equalities]
        blocks.append(-np.array(rows))
        rhs.append(np.array([e.const for _, e in problem.equalities]))
        cones.append(clarabel.ZeroConeT(len(rows)))
    if problem.inequalities:
        rows = [_row(e, offsets, nvar) for _, e in problem.inequalities]
        blocks.append(-np.array(rows))
        rhs.append(np.array([e.const for _, e in problem.inequalities]))
        cones.append(clarabel.NonnegativeConeT(len(rows)))
    if problem.soc is not None:
        head, tail = problem.soc
        exprs = [head, *tail]
        blocks.append(-np.array([_row(e, offsets, nvar) for e in exprs]))
        rhs.append(np.array([e.const for e in exprs]))
        cones.append(clarabel.SecondOrderConeT(len(exprs)))
    for name, n in problem.hermitian.items():
        start, size = offsets[name]
        op = _embedding_operator(n)
        blk = np.zeros((op.shape[0], nvar))
        blk[:, start:start + size] = -op
        blocks.append(blk)
        rhs.append(np.zeros(op.shape[0]))
        cones.append(clarabel.PSDTriangleConeT(2 * n))

    A = sparse.csc_matrix(np.vstack(blocks))
    b = np.concatenate(rhs)
    q = _row(problem.objective, offsets, nvar)
    P = sparse.csc_matrix((nvar, nvar))
    return P, q, A, b, cones, offsets


# Alternate KKT settings tried in order when a solve stops short of the
# requested accuracy; the relaxed problems are dual degenerate (the W/S
# split is not unique, optima often sit where a whole block vanishes) and
# the default regularisation sometimes stalls short of 1e-8.
_RETRY_LADDER = (
    {"static_regularization_proportional": 1e-14},
    {},
    {"iterative_refinement_reltol": 1e-15, "iterative_refinement_abstol": 1e-15,
     "iterative_refinement_max_iter": 50},
    {"equilibrate_enable": False},
    {"equilibrate_enable": False, "iterative_refinement_reltol": 1e-15,
     "iterative_refinement_abstol": 1e-15, "iterative_refinement_max_iter": 50},
    {"static_regularization_constant": 1e-7},
    {"dynamic_regularization_enable": False},
)


def _clarabel_settings(settings: SolverSettings, extra: dict):
    opts = clarabel.DefaultSettings()
    opts.verbose = False
    opts.tol_feas = settings.tol_feas
    opts.tol_gap_abs = settings.tol_gap
    opts.tol_gap_rel = settings.tol_gap
    opts.max_iter = settings.max_iters
    opts.max_threads = 1
    for k, v in extra.items():
        setattr(opts, k, v)
    return opts


def solve(problem: ConicProblem, settings: SolverSettings = SolverSettings()) -> SolverResult:
    """Solve with the Clarabel interior-point method.

    Failures are reported through ``status``; this never raises for
    infeasible or numerically troubled problems. Deterministic: the retry
    ladder is fixed and the solver runs single-threaded.
    """
    P, q, A, b, cones, offsets = compile_problem(problem)
    t0 = time.perf_counter()
    sol, iters = None, 0
    for extra in _RETRY_LADDER:
        try:
            sol = clarabel.DefaultSolver(P, q, A, b, cones, _clarabel_settings(settings, extra)).solve()
        except Exception as exc:  # solver library errors become a status
            log.warning("%s: solver raised %s", problem.name, exc)
            continue
        iters += int(sol.iterations)
        if _STATUS.get(str(sol.status)) in (OPTIMAL, INFEASIBLE, MAX_ITERATIONS):
            break
    elapsed = time.perf_counter() - t0
    if sol is None:
        return SolverResult(NUMERICAL_FAILURE, {}, {}, np.nan, np.inf, np.inf, np.inf, 0, elapsed)
    status = _STATUS.get(str(sol.status), NUMERICAL_FAILURE)

    x = np.asarray(sol.x)
    s = np.asarray(sol.s)
    raw, warnings = {}, []
    # PSD blocks are read from the cone slacks, which the method keeps inside the cone.
    psd_start = len(b) - sum((2 * n) * (2 * n + 1) // 2 for n in problem.hermitian.values())
    for name, n in problem.hermitian.items():
        m = 2 * n
        size = m * (m + 1) // 2
        E = unsvec(s[psd_start:psd_start + size], m)
        psd_start += size
        if status == OPTIMAL:
            defect = block_defect(E) / max(1.0, np.abs(E).max())
            if defect > EPS_BLK:
                warnings.append(f"{name}: block defect {defect:.2e}")
                log.warning("%s: embedding block defect %.2e in %s", problem.name, defect, name)
            raw[name] = extract_hermitian(E, eps_blk=np.inf, warn=False)
        else:
            start, sz = offsets[name]
            raw[name] = params_to_hermitian(x[start:start + sz], n)
    for name in problem.scalars:
        raw[name] = float(x[offsets[name][0]])

    values = {k: v * problem.scales.get(k, 1.0) for k, v in raw.items()}
    obj = float(sol.obj_val) * problem.objective_scale
    gap = abs(float(sol.obj_val) - float(sol.obj_val_dual))
    return SolverResult(status, values, raw, obj, float(sol.r_prim), float(sol.r_dual), gap,
                        iters, elapsed, warnings)


# -- problem builders -----------------------------------------------------------

def _normalized_channels(scene: Scene):
    """Q h h^H / sigma^2 for the CU and for each eavesdropper."""
    Q = scene.power_budget
    g = scene.cu_channel
    c0 = Q * np.outer(g, g.conj()) / scene.cu_noise_power
    ck = [Q * np.outer(h, h.conj()) / s2 for h, s2 in zip(scene.eve_channels(), scene.eve_noise())]
    return c0, ck


def _residuals(grid: SampleGrid, scene: Scene, cov_terms, fixed_gain=None) -> list[Affine]:
    """r_m = eta * desired_m - (gain of the covariance terms at angle m)."""
    A = scene.steering(grid.angles)
    out = []
    for m in range(grid.size):
        a = A[:, m]
        aa = np.outer(a, a.conj())
        r = scalar("eta") * float(grid.desired[m])
        for name, transform in cov_terms:
            r = r - inner(name, aa if transform is None else transform(aa))
        if fixed_gain is not None:
            r = r - fixed_gain[m]
        out.append(r)
    return out


def _unit_scales(scene: Scene, names) -> dict:
    return {k: scene.power_budget for k in names}


def build_sdr41(scene: Scene, grid: SampleGrid, gamma_e: float, r0: float) -> ConicProblem:
    """Relaxed subproblem for a fixed eavesdropper SINR cap gamma_e."""
    if not gamma_e > 0:
        raise DomainError("gamma_e must be positive")
    n = scene.n_antennas
    beta = 2.0 ** r0 * (1.0 + gamma_e) - 1.0
    c0, ck = _normalized_channels(scene)
    eqs = [("power", trace("W", n) + trace("S", n) - 1.0)]
    ineqs = [(f"eve_{k}", gamma_e + gamma_e * inner("S", c) - inner("W", c))
             for k, c in zip(scene.eavesdroppers, ck)]
    ineqs.append(("cu", inner("W", c0) - beta * inner("S", c0) - beta))
    r = _residuals(grid, scene, [("W", None), ("S", None)])
    return ConicProblem(
        "sdr41", {"W": n, "S": n}, ["eta", "t"], scalar("t"), eqs, ineqs, (scalar("t"), r),
        scales=_unit_scales(scene, ["W", "S", "eta", "t"]), objective_scale=scene.power_budget,
    )


def build_sensing_only(scene: Scene, grid: SampleGrid) -> ConicProblem:
    n = scene.n_antennas
    r = _residuals(grid, scene, [("S", None)])
    return ConicProblem(
        "sensing_only", {"S": n}, ["eta", "t"], scalar("t"), [("power", trace("S", n) - 1.0)], [],
        (scalar("t"), r), scales=_unit_scales(scene, ["S", "eta", "t"]),
        objective_scale=scene.power_budget,
    )


def build_p5(scene: Scene, grid: SampleGrid, zf_direction, r0: float) -> ConicProblem:
    """ZF subproblem: information beam fixed to the unit direction, power q0 free."""
    w = np.asarray(zf_direction, dtype=complex)
    n = scene.n_antennas
    Q = scene.power_budget
    c0, _ = _normalized_channels(scene)
    cu_gain = Q * abs(np.vdot(scene.cu_channel, w)) ** 2 / scene.cu_noise_power
    need = 2.0 ** r0 - 1.0
    info_gain = np.abs(scene.steering(grid.angles).conj().T @ w) ** 2
    r = _residuals(grid, scene, [("S", None)])
    r = [rm - scalar("q0") * float(gm) for rm, gm in zip(r, info_gain)]
    return ConicProblem(
        "p5", {"S": n}, ["q0", "eta", "t"], scalar("t"),
        [("power", trace("S", n) + scalar("q0") - 1.0)],
        [("q0_nonneg", scalar("q0")),
         ("secrecy", cu_gain * scalar("q0") - need * inner("S", c0) - need)],
        (scalar("t"), r), scales=_unit_scales(scene, ["S", "q0", "eta", "t"]),
        objective_scale=Q,
    )


def cu_projector(scene: Scene) -> np.ndarray:
    g = scene.cu_channel
    return np.eye(scene.n_antennas) - np.outer(g, g.conj()) / np.vdot(g, g).real


def cu_null_basis(scene: Scene) -> np.ndarray:
    """Orthonormal N x (N-1) basis B of range(Q2), so that Q2 = B B^H."""
    g = scene.cu_channel / np.linalg.norm(scene.cu_channel)
    # Householder-free: the trailing left singular vectors of g span its complement.
    u, _, _ = np.linalg.svd(g[:, None], full_matrices=True)
    return u[:, 1:]


def build_p7(scene: Scene, grid: SampleGrid, w0_fixed) -> ConicProblem:
    """Sensing covariance confined to the CU-orthogonal subspace, w0 fixed.

    Q2 Sbar Q2 is parameterised as B T B^H with T an (N-1) x (N-1) PSD
    variable: every Q2 Sbar Q2 has this form (T = B^H Sbar B) and vice
    versa, while the component of Sbar along g, invisible to every
    constraint, is dropped so the problem has a strictly feasible point.
    """
    w0 = np.asarray(w0_fixed, dtype=complex)
    Q = scene.power_budget
    p0 = float(np.vdot(w0, w0).real)
    if p0 > Q * (1 + 1e-12):
        raise DomainError(f"fixed information beam uses {p0:.6g} W > budget {Q:.6g} W")
    n = scene.n_antennas
    B = cu_null_basis(scene)
    fixed = np.abs(scene.steering(grid.angles).conj().T @ w0) ** 2 / Q
    r = _residuals(grid, scene, [("T", lambda aa: B.conj().T @ aa @ B)], fixed_gain=fixed)
    return ConicProblem(
        "p7", {"T": n - 1}, ["eta", "t"], scalar("t"),
        [("power", trace("T", n - 1) + (p0 / Q - 1.0))], [], (scalar("t"), r),
        scales=_unit_scales(scene, ["T", "eta", "t"]), objective_scale=Q,
    )


def build_p6_sdr(scene: Scene, r0: float, power_cap: float) -> ConicProblem:
    """Minimum-power AN-free secrecy beamforming, rank constraint dropped."""
    if r0 < 0:
        raise DomainError("r0 must be nonnegative")
    n = scene.n_antennas
    c0, ck = _normalized_channels(scene)
    m = 2.0 ** r0
    ineqs = [(f"secrecy_{k}", inner("W", c0 - m * c) - (m - 1.0))
             for k, c in zip(scene.eavesdroppers, ck)]
    ineqs.append(("power_cap", power_cap / scene.power_budget - trace("W", n)))
    return ConicProblem(
        "p6", {"W": n}, [], trace("W", n), [], ineqs, None,
        scales={"W": scene.power_budget}, objective_scale=scene.power_budget,
    )


def build_p2_sdr(scene: Scene, gamma_e: float) -> ConicProblem:
    """Largest CU SINR with every eavesdropper SINR capped at gamma_e.

    The fractional objective is homogenised (Charnes-Cooper): U = tau W,
    V = tau S with tau = 1 / (CU interference-plus-noise). The optimum is
    the largest feasible beta of the relaxed subproblem.
    """
    n = scene.n_antennas
    c0, ck = _normalized_channels(scene)
    eqs = [("normalise", inner("V", c0) + scalar("tau") - 1.0),
           ("power", trace("U", n) + trace("V", n) - scalar("tau"))]
    ineqs = [("tau_nonneg", scalar("tau"))]
    ineqs += [(f"eve_{k}", gamma_e * (inner("V", c) + scalar("tau")) - inner("U", c))
              for k, c in zip(scene.eavesdroppers, ck)]
    return ConicProblem("p2", {"U": n, "V": n}, ["tau"], -inner("U", c0), eqs, ineqs, None)
