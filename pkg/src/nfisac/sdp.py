"""Dense primal-dual interior-point solver for small multi-block SDPs.

Problems have the inequality form::

    minimize    sum_j Tr(C_j X_j)
    subject to  sum_j Tr(A_ij X_j) + b_i <= 0,   i = 1..m
                X_j >= 0 (Hermitian PSD)

Internally every inequality gets a nonnegative slack, which turns the problem
into a standard-form conic program over PSD blocks and the nonnegative orthant.
The iteration is Mehrotra's predictor-corrector with the HKM search direction.
Because m is tiny in the beamforming problems, the Schur complement system is
an m x m dense solve and the per-iteration cost is dominated by O(m n^3)
block products.

Blocks may be real symmetric or complex Hermitian; nothing below depends on
which.  :func:`embed_real` maps a complex problem to its real symmetric
counterpart, mainly as a cross-check.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

_GAP_FLOOR = 1e-3   # in scaled units, where a well-posed optimum is O(1)
_TERMINAL = 1e-4    # residual level below which lack of progress means a precision floor


class SdpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SdpConstraint:
    """``sum_j Tr(coeffs[j] X_j) + b <= 0``; ``None`` entries are zero blocks."""

    coeffs: list[np.ndarray | None]
    b: float
    label: str = ""


@dataclass
class SdpProblem:
    block_dims: list[int]
    objective: list[np.ndarray]
    constraints: list[SdpConstraint] = field(default_factory=list)
    block_labels: list[str] | None = None

    def __post_init__(self):
        nb = len(self.block_dims)
        if len(self.objective) != nb:
            raise ValueError("one objective matrix per block is required")
        for j, (c, n) in enumerate(zip(self.objective, self.block_dims)):
            _check_hermitian(c, n, f"objective block {j}")
        for i, con in enumerate(self.constraints):
            if len(con.coeffs) != nb:
                raise ValueError(f"constraint {i} has {len(con.coeffs)} blocks, expected {nb}")
            for j, (a, n) in enumerate(zip(con.coeffs, self.block_dims)):
                if a is not None:
                    _check_hermitian(a, n, f"constraint {i} block {j}")

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def is_complex(self) -> bool:
        mats = list(self.objective) + [a for c in self.constraints for a in c.coeffs if a is not None]
        return any(np.iscomplexobj(a) for a in mats)

    def objective_value(self, blocks) -> float:
        return float(sum(_inner(c, x) for c, x in zip(self.objective, blocks)))

    def constraint_values(self, blocks) -> np.ndarray:
        """Left-hand sides ``sum_j Tr(A_ij X_j) + b_i`` (feasible when <= 0)."""
        return np.array([
            sum(_inner(a, x) for a, x in zip(con.coeffs, blocks) if a is not None) + con.b
            for con in self.constraints
        ])


@dataclass(frozen=True)
class SdpSettings:
    tol_gap: float = 1e-6
    tol_feas: float = 1e-7
    tol_psd: float = 1e-8
    tol_infeas: float = 1e-8
    max_iterations: int = 100
    step_fraction: float = 0.98
    embedding: str = "complex"   # or "real"

    def __post_init__(self):
        for name in ("tol_gap", "tol_feas", "tol_psd", "tol_infeas", "step_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.embedding not in ("complex", "real"):
            raise ValueError("embedding must be 'complex' or 'real'")

    def relaxed(self) -> "SdpSettings":
        """No stricter than the library defaults, with shorter steps and more iterations.

        Used after a solve stalls at its precision floor.
        """
        base = SdpSettings()
        return SdpSettings(max(self.tol_gap, base.tol_gap), max(self.tol_feas, base.tol_feas), self.tol_psd,
                           self.tol_infeas, self.max_iterations * 2, min(self.step_fraction, 0.9), self.embedding)

    def tightened(self, factor: float = 0.01) -> "SdpSettings":
        """Stricter tolerances and shorter steps, used when a solve needs a second attempt."""
        return SdpSettings(self.tol_gap * factor, self.tol_feas * factor, self.tol_psd,
                           self.tol_infeas, self.max_iterations * 2, min(self.step_fraction, 0.9), self.embedding)


@dataclass
class SdpSolution:
    blocks: list[np.ndarray]
    objective_value: float
    status: SdpStatus
    gap: float
    iterations: int
    dual: np.ndarray            # multipliers of the inequality rows, >= 0
    primal_infeasibility: float = np.nan
    dual_infeasibility: float = np.nan
    certificate: np.ndarray | None = None   # Farkas multipliers on Infeasible
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is SdpStatus.OPTIMAL


class SdpError(RuntimeError):
    def __init__(self, solution: SdpSolution, message: str = ""):
        super().__init__(message or f"SDP solve ended with status {solution.status.value}")
        self.solution = solution


def _check_hermitian(a: np.ndarray, n: int, what: str):
    if a.shape != (n, n):
        raise ValueError(f"{what} has shape {a.shape}, expected {(n, n)}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > 1e-12 * max(scale, 1e-300) and scale > 0:
        raise ValueError(f"{what} is not Hermitian")


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real trace inner product Re Tr(A^H B)."""
    return float(np.real(np.vdot(a, b)))


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with X + alpha dX PSD, for X positive definite."""
    lc = np.linalg.cholesky(x)
    t = sla.solve_triangular(lc, dx, lower=True)
    t = sla.solve_triangular(lc, t.conj().T, lower=True).conj().T
    lam = np.linalg.eigvalsh(_herm(t))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    return np.inf if not np.any(neg) else float(np.min(-x[neg] / dx[neg]))


# ---------------------------------------------------------------------------
# real embedding
# ---------------------------------------------------------------------------

def embed_matrix(a: np.ndarray) -> np.ndarray:
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def unembed_matrix(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] // 2
    re = 0.5 * (x[:n, :n] + x[n:, n:])
    im = 0.5 * (x[n:, :n] - x[:n, n:])
    return re + 1j * im


def embed_real(problem: SdpProblem) -> SdpProblem:
    """Real symmetric problem with the same optimal value.

    ``Tr(emb(A) emb(X)) = 2 Re Tr(A X)``, so every coefficient is halved.
    """
    def emb(a):
        return None if a is None else 0.5 * embed_matrix(np.asarray(a, dtype=complex))

    return SdpProblem(
        block_dims=[2 * n for n in problem.block_dims],
        objective=[emb(c) for c in problem.objective],
        constraints=[SdpConstraint([emb(a) for a in con.coeffs], con.b, con.label)
                     for con in problem.constraints],
        block_labels=problem.block_labels,
    )


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def solve(problem: SdpProblem, settings: SdpSettings | None = None) -> SdpSolution:
    settings = settings or SdpSettings()
    if settings.embedding == "real" and problem.is_complex:
        sol = _solve(embed_real(problem), settings)
        sol.blocks = [unembed_matrix(x) for x in sol.blocks]
        sol.objective_value = problem.objective_value(sol.blocks) if sol.ok else sol.objective_value
        return sol
    return _solve(problem, settings)


def _scalar_only(problem: SdpProblem, settings: SdpSettings) -> SdpSolution:
    b = np.array([c.b for c in problem.constraints])
    bad = b > settings.tol_feas * (1 + np.abs(b))
    m = len(b)
    if np.any(bad):
        cert = bad.astype(float) / max(1.0, bad.sum())
        return SdpSolution([], np.nan, SdpStatus.INFEASIBLE, np.inf, 0, np.zeros(m),
                           certificate=cert,
                           message="constant constraint(s) violated: " +
                                   ", ".join(problem.constraints[i].label or str(i) for i in np.flatnonzero(bad)))
    return SdpSolution([], 0.0, SdpStatus.OPTIMAL, 0.0, 0, np.zeros(m), 0.0, 0.0)


def _solve(problem: SdpProblem, settings: SdpSettings) -> SdpSolution:
    dims = list(problem.block_dims)
    nb, m = len(dims), problem.num_constraints
    if nb == 0:
        return _scalar_only(problem, settings)

    dtype = complex if problem.is_complex else float

    # -- scaling: X = t * Xs, row i divided by r_i, objective divided by cn
    rows = [[None if a is None else np.asarray(a, dtype=dtype) for a in con.coeffs]
            for con in problem.constraints]
    b = np.array([con.b for con in problem.constraints], dtype=float)
    row_norm = np.array([np.sqrt(sum(np.linalg.norm(a) ** 2 for a in r if a is not None)) for r in rows])
    # rows with b > 0 demand power and set the optimum's scale; rows already met at
    # X = 0 (b < 0) only cap it and can be off by orders of magnitude
    demanding = [bi / rn for bi, rn in zip(b, row_norm) if rn > 0 and bi > 0]
    ratios = demanding or [abs(bi) / rn for bi, rn in zip(b, row_norm) if rn > 0 and bi != 0]
    t = float(np.exp(np.mean(np.log(ratios)))) if ratios else 1.0
    r_scale = np.maximum(t * row_norm, np.abs(b))
    r_scale[r_scale == 0] = 1.0
    cn = max(np.linalg.norm(c) for c in problem.objective)
    cn = cn if cn > 0 else 1.0

    C = [np.asarray(c, dtype=dtype) / cn for c in problem.objective]
    A = [[None if a is None else a * (t / r_scale[i]) for a in r] for i, r in enumerate(rows)]
    c_rhs = -b / r_scale  # equality rhs after adding slacks
    # block -> list of (i, A_ij) with nonzero coefficient
    by_block = [[(i, A[i][j]) for i in range(m) if A[i][j] is not None and np.any(A[i][j])]
                for j in range(nb)]

    def apply_a(blocks, xs):
        out = xs.copy()
        for j in range(nb):
            for i, aij in by_block[j]:
                out[i] += _inner(aij, blocks[j])
        return out

    def apply_at(y, j):
        z = np.zeros((dims[j], dims[j]), dtype=dtype)
        for i, aij in by_block[j]:
            z += y[i] * aij
        return z

    nmax = max(dims)
    a_norms = [np.sqrt(sum(np.linalg.norm(a) ** 2 for a in r if a is not None) + 1.0) for r in A]
    xi = max(10.0, np.sqrt(nmax), *(np.sqrt(nmax) * (1 + abs(ci)) / (1 + an) for ci, an in zip(c_rhs, a_norms))) \
        if m else max(10.0, np.sqrt(nmax))
    eta = max(10.0, np.sqrt(nmax), max(a_norms, default=1.0), max(np.linalg.norm(c) for c in C))

    X = [xi * np.eye(n, dtype=dtype) for n in dims]
    Z = [eta * np.eye(n, dtype=dtype) for n in dims]
    xs = np.full(m, xi)
    zs = np.full(m, eta)
    y = np.zeros(m)

    n_total = sum(dims) + m
    c_norm = np.sqrt(sum(np.linalg.norm(c) ** 2 for c in C))
    b_norm = np.linalg.norm(c_rhs)
    status = SdpStatus.MAX_ITERATIONS
    certificate = None
    message = ""
    gap = pinf = dinf = np.inf
    it = 0
    gamma = settings.step_fraction
    best = None
    best_merit = np.inf
    stall = 0

    for it in range(1, settings.max_iterations + 1):
        rp = c_rhs - apply_a(X, xs)
        Rd = [C[j] - Z[j] - apply_at(y, j) for j in range(nb)]
        rds = -y - zs  # slack columns have zero cost and unit coefficient
        pobj = sum(_inner(C[j], X[j]) for j in range(nb))
        dobj = float(c_rhs @ y)
        xz = sum(_inner(X[j], Z[j]) for j in range(nb)) + float(xs @ zs)
        mu = xz / n_total
        # relative to the objective itself; the floor covers problems whose optimum is ~0
        gap = max(abs(pobj - dobj), xz) / max(abs(pobj), abs(dobj), _GAP_FLOOR)
        pinf = np.linalg.norm(rp) / (1.0 + b_norm)
        dinf = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd) + rds @ rds) / (1.0 + c_norm)
        log.debug("it %2d pobj %.10e dobj %.10e gap %.2e pinf %.2e dinf %.2e", it, pobj, dobj, gap, pinf, dinf)

        if gap <= settings.tol_gap and pinf <= settings.tol_feas and dinf <= settings.tol_feas:
            status = SdpStatus.OPTIMAL
            best = None
            break
        merit = max(gap / settings.tol_gap, pinf / settings.tol_feas, dinf / settings.tol_feas)
        # stalls only count once near the optimum; early phases may crawl for a while
        if merit < 0.9 * best_merit or max(gap, pinf, dinf) > _TERMINAL:
            stall = 0
        else:
            stall += 1
        if merit < best_merit:
            best_merit = merit
            best = ([x.copy() for x in X], y.copy(), gap, pinf, dinf)
        if stall >= 8:
            status = SdpStatus.NUMERICAL_FAILURE
            message = "progress stalled"
            break

        # primal infeasibility: dual ray with sum_i lam_i A_i >= 0 and rhs*lam > 0
        lam = -y
        if m and dobj > 0 and np.all(lam >= 0):
            scale = dobj
            ray = lam / scale
            worst = min(np.linalg.eigvalsh(_herm(apply_at(ray, j)))[0] for j in range(nb))
            if worst >= -settings.tol_infeas and dobj > 1.0 / settings.tol_infeas:
                status = SdpStatus.INFEASIBLE
                certificate = ray * (1.0 / r_scale) / np.linalg.norm(ray / r_scale)
                message = "dual objective diverged with a valid Farkas ray"
                break
        if pobj < -1.0 / settings.tol_infeas:
            status = SdpStatus.NUMERICAL_FAILURE
            message = "primal objective unbounded below"
            break

        try:
            Zinv = [np.linalg.inv(z) for z in Z]
            Zinv = [_herm(zi) for zi in Zinv]
            # Schur complement
            M = np.diag(xs / zs)
            for j in range(nb):
                ent = by_block[j]
                T = [(i, X[j] @ aij @ Zinv[j]) for i, aij in ent]
                for (i, aij) in ent:
                    for (k, tkj) in T:
                        M[i, k] += _inner(aij, tkj)
            M = 0.5 * (M + M.T)
            M_fact = sla.cho_factor(M + 1e-14 * np.trace(M) / max(m, 1) * np.eye(m)) if m else None
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_FAILURE
            message = "Schur complement factorization failed"
            break

        def direction(Rc, rcs):
            rhs = rp.copy()
            for j in range(nb):
                g = (Rc[j] - X[j] @ Rd[j]) @ Zinv[j]
                for i, aij in by_block[j]:
                    rhs[i] -= _inner(aij, g)
            rhs -= (rcs - xs * rds) / zs
            dy = sla.cho_solve(M_fact, rhs) if m else np.zeros(0)
            dZ = [Rd[j] - apply_at(dy, j) for j in range(nb)]
            dX = [_herm((Rc[j] - X[j] @ dZ[j]) @ Zinv[j]) for j in range(nb)]
            dzs = rds - dy
            dxs = (rcs - xs * dzs) / zs
            return dX, dy, dZ, dxs, dzs

        def steps(dX, dZ, dxs, dzs):
            ap = min([_max_step(X[j], dX[j]) for j in range(nb)] + [_max_step_lp(xs, dxs)])
            ad = min([_max_step(Z[j], dZ[j]) for j in range(nb)] + [_max_step_lp(zs, dzs)])
            return min(1.0, gamma * ap), min(1.0, gamma * ad)

        try:
            # predictor
            Rc = [-(X[j] @ Z[j]) for j in range(nb)]
            rcs = -xs * zs
            dX, dy, dZ, dxs, dzs = direction(Rc, rcs)
            ap, ad = steps(dX, dZ, dxs, dzs)
            mu_aff = (sum(_inner(X[j] + ap * dX[j], Z[j] + ad * dZ[j]) for j in range(nb))
                      + float((xs + ap * dxs) @ (zs + ad * dzs))) / n_total
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
            # corrector
            Rc = [sigma * mu * np.eye(dims[j]) - X[j] @ Z[j] - dX[j] @ dZ[j] for j in range(nb)]
            rcs = sigma * mu - xs * zs - dxs * dzs
            dX, dy, dZ, dxs, dzs = direction(Rc, rcs)
            ap, ad = steps(dX, dZ, dxs, dzs)
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_FAILURE
            message = "lost positive definiteness"
            break

        X = [_herm(X[j] + ap * dX[j]) for j in range(nb)]
        xs = xs + ap * dxs
        Z = [_herm(Z[j] + ad * dZ[j]) for j in range(nb)]
        zs = zs + ad * dzs
        y = y + ad * dy
        if max(ap, ad) < 1e-12:
            status = SdpStatus.NUMERICAL_FAILURE
            message = "step length collapsed"
            break

    if status not in (SdpStatus.OPTIMAL, SdpStatus.INFEASIBLE) and best is not None:
        # precision floor reached: fall back to the best iterate seen
        X, y, gap, pinf, dinf = best
        if best_merit <= 100.0:
            status = SdpStatus.OPTIMAL
            message = f"reduced accuracy ({message})"
    blocks = [t * x for x in X]
    dual = np.maximum(-y, 0.0) * t * cn / r_scale
    obj = problem.objective_value(blocks)
    if status is SdpStatus.MAX_ITERATIONS and not message:
        message = f"no convergence in {settings.max_iterations} iterations"
    return SdpSolution(blocks=blocks, objective_value=obj, status=status, gap=float(gap),
                       iterations=it, dual=dual, primal_infeasibility=float(pinf),
                       dual_infeasibility=float(dinf), certificate=certificate, message=message)


# ---------------------------------------------------------------------------
# independent verification
# ---------------------------------------------------------------------------

@dataclass
class SolutionReport:
    residuals: np.ndarray           # sum_j Tr(A_ij X_j) + b_i, feasible when <= 0
    normalized_residuals: np.ndarray  # residual / (1 + |b_i|)
    worst_constraint: int | None
    worst_violation: float
    min_eig_ratio: list[float]      # min eig / trace per block
    objective: float
    feasible: bool
    psd: bool

    @property
    def ok(self) -> bool:
        return self.feasible and self.psd


def check_solution(problem: SdpProblem, solution: SdpSolution, settings: SdpSettings | None = None,
                   blocks: list[np.ndarray] | None = None) -> SolutionReport:
    """Recompute residuals and eigenvalue floors of a solution from scratch."""
    settings = settings or SdpSettings()
    blocks = solution.blocks if blocks is None else blocks
    res = problem.constraint_values(blocks) if problem.constraints else np.zeros(0)
    bs = np.array([c.b for c in problem.constraints])
    norm_res = res / (1.0 + np.abs(bs)) if res.size else res
    worst = int(np.argmax(norm_res)) if res.size else None
    worst_v = float(norm_res[worst]) if res.size else -np.inf
    ratios = []
    for x in blocks:
        tr = float(np.trace(x).real)
        lam = float(np.linalg.eigvalsh(_herm(x))[0])
        ratios.append(lam / tr if tr > 0 else (0.0 if lam == 0 else -np.inf))
    return SolutionReport(
        residuals=res,
        normalized_residuals=norm_res,
        worst_constraint=worst,
        worst_violation=worst_v,
        min_eig_ratio=ratios,
        objective=problem.objective_value(blocks),
        feasible=bool(worst_v <= settings.tol_feas),
        psd=bool(all(r >= -settings.tol_psd for r in ratios)),
    )
