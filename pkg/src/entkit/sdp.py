"""Small dense semidefinite-program solver with duality-gap certificates.

Problems are stated in primal standard form over complex Hermitian
positive-semidefinite blocks X^b:

    minimize    sum_b tr(C^b X^b)
    subject to  sum_b tr(A_i^b X^b) = b_i,   i = 1..m
                X^b >= 0.

The solver is an infeasible-start primal-dual interior-point method with
the HKM search direction and a Mehrotra predictor-corrector step, using
dense factorizations throughout. Complex Hermitian blocks are embedded as
real symmetric blocks of doubled dimension [[Re, -Im], [Im, Re]], with
coefficient matrices halved so traces keep their complex-side values; the
returned primal blocks are projected back onto the embedded subspace
(which preserves feasibility and objective by symmetry averaging).

Infeasibility handling: an inconsistent linear system A(X) = b is
certified up front by a least-squares residual; conic infeasibility is
flagged when the dual objective diverges past 1e12 while the dual
residual keeps shrinking (and symmetrically for unboundedness).

A solver invocation owns its scratch arrays; distinct calls may run
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import opcore
from .errors import DomainError, ShapeError

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_FAILED = "numerical-failure"

_DIVERGENCE = 1e12


@dataclass
class SdpProblem:
    """Block SDP data. ``constraints`` rows are (per-block mats, rhs);
    a ``None`` entry stands for the zero matrix on that block."""

    blocks: list[int]
    objective: list[np.ndarray]
    constraints: list[tuple[list[np.ndarray | None], float]]


@dataclass
class SdpSolution:
    status: str
    primal_blocks: list[np.ndarray]
    dual: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    min_block_eig: float
    iterations: int
    message: str = ""


def _embed(h: np.ndarray) -> np.ndarray:
    """Complex Hermitian -> real symmetric [[Re, -Im], [Im, Re]]."""
    n = h.shape[0]
    out = np.empty((2 * n, 2 * n))
    re, im = np.real(h), np.imag(h)
    out[:n, :n] = re
    out[n:, n:] = re
    out[:n, n:] = -im
    out[n:, :n] = im
    return out


def _project_embedded(s: np.ndarray, n: int) -> np.ndarray:
    """Average a real symmetric 2n x 2n matrix onto the embedded subspace
    and return the corresponding complex Hermitian n x n matrix."""
    re = (s[:n, :n] + s[n:, n:]) / 2.0
    im = (s[n:, :n] - s[:n, n:]) / 2.0
    return opcore.hermitize(re + 1j * im)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with x + alpha dx >= 0, for x > 0."""
    try:
        ell = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        w, u = np.linalg.eigh(x)
        w = np.maximum(w, 1e-300)
        ell = u * np.sqrt(w)
    t = sla.solve_triangular(ell, dx, lower=True, check_finite=False)
    y = sla.solve_triangular(ell, t.T, lower=True, check_finite=False)
    lam = float(np.linalg.eigvalsh((y + y.T) / 2.0)[0])
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


class CompiledSdp:
    """Embedded constraint data reused across solves that share structure.

    Callers that rebuild the same feasible set with varying objectives
    (linear minimization oracles, robustness programs) compile once and
    solve many times.
    """

    def __init__(self, blocks: list[int],
                 constraints: list[tuple[list[np.ndarray | None], float]],
                 check_consistency: bool = False):
        if not blocks or any(n < 1 for n in blocks):
            raise DomainError(f"invalid block dimensions {blocks}")
        if not constraints:
            raise DomainError("at least one constraint is required")
        self.blocks = list(blocks)
        self.m = len(constraints)
        self.rhs = np.array([float(c[1]) for c in constraints])
        self.a_emb: list[np.ndarray] = []
        for bi, n in enumerate(self.blocks):
            rows = np.zeros((self.m, 2 * n, 2 * n))
            for i, (mats, _) in enumerate(constraints):
                mat = mats[bi]
                if mat is None:
                    continue
                a = opcore.require_hermitian(mat)
                if a.shape[0] != n:
                    raise ShapeError(f"constraint {i} block {bi} has dim {a.shape[0]}, expected {n}")
                rows[i] = _embed(a) / 2.0
            self.a_emb.append(rows)
        self._infeasible_rhs = False
        self._keep = np.arange(self.m)
        if check_consistency:
            self._consistency_check()

    def _consistency_check(self):
        g = np.hstack([a.reshape(self.m, -1) for a in self.a_emb])
        sol, _, rank, _ = np.linalg.lstsq(g, self.rhs, rcond=None)
        resid = float(np.linalg.norm(g @ sol - self.rhs, np.inf))
        if resid > 1e-8 * (1.0 + np.abs(self.rhs).max()):
            self._infeasible_rhs = True
            return
        if rank < self.m:
            # drop dependent rows; their duals are fixed at zero
            q, r, piv = sla.qr(g.T, mode="economic", pivoting=True)
            keep = np.sort(piv[:rank])
            self._keep = keep
            self.rhs = self.rhs[keep]
            self.a_emb = [a[keep] for a in self.a_emb]
            self.m = len(keep)

    def solve(self, objective: list[np.ndarray], rhs: np.ndarray | None = None,
              gap_tol: float = 1e-8, feas_tol: float = 1e-8,
              max_iter: int = 200) -> SdpSolution:
        m_orig = len(self._keep) if rhs is None else len(rhs)
        if self._infeasible_rhs:
            return SdpSolution(
                status=STATUS_INFEASIBLE,
                primal_blocks=[np.zeros((n, n), dtype=complex) for n in self.blocks],
                dual=np.zeros(m_orig), primal_objective=np.nan, dual_objective=np.nan,
                gap=np.nan, primal_residual=np.inf, dual_residual=np.inf,
                min_block_eig=0.0, iterations=0,
                message="equality system has no solution (least-squares certificate)")
        c_emb = []
        for bi, n in enumerate(self.blocks):
            c = opcore.require_hermitian(objective[bi])
            if c.shape[0] != n:
                raise ShapeError(f"objective block {bi} has dim {c.shape[0]}, expected {n}")
            c_emb.append(_embed(c) / 2.0)
        b = self.rhs if rhs is None else np.asarray(rhs, dtype=float)[self._keep]
        sol = _ipm(self.blocks, self.a_emb, b, c_emb, gap_tol, feas_tol, max_iter)
        if len(self._keep) != m_orig or rhs is not None:
            full = np.zeros(m_orig)
            full[self._keep] = sol.dual
            sol.dual = full
        return sol


def solve_sdp(problem: SdpProblem, gap_tol: float = 1e-8, feas_tol: float = 1e-8,
              max_iter: int = 200) -> SdpSolution:
    """Solve a block SDP, certifying optimality by duality gap and residuals."""
    compiled = CompiledSdp(problem.blocks, problem.constraints, check_consistency=True)
    return compiled.solve(problem.objective, gap_tol=gap_tol, feas_tol=feas_tol,
                          max_iter=max_iter)


def dump_problem(problem: SdpProblem) -> str:
    """Plain-text problem dump for debugging; not a stability guarantee."""
    lines = [f"blocks {problem.blocks}"]
    for bi, c in enumerate(problem.objective):
        lines.append(f"objective block {bi}:")
        lines.append(np.array_str(np.asarray(c), precision=6))
    for i, (mats, rhs) in enumerate(problem.constraints):
        lines.append(f"constraint {i}: rhs {rhs!r}")
        for bi, a in enumerate(mats):
            if a is not None:
                lines.append(f"  block {bi}:")
                lines.append("  " + np.array_str(np.asarray(a), precision=6))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Interior-point core (real symmetric blocks)
# ---------------------------------------------------------------------------

def _ipm(blocks_c: list[int], a_list: list[np.ndarray], b: np.ndarray,
         c_list: list[np.ndarray], gap_tol: float, feas_tol: float,
         max_iter: int) -> SdpSolution:
    m = len(b)
    dims = [2 * n for n in blocks_c]
    n_tot = sum(dims)
    a_flat = [a.reshape(m, -1) for a in a_list]

    # SDPT3-style starting point: multiples of the identity sized from data
    x_blocks, z_blocks = [], []
    b_scale = 1.0 + np.abs(b).max()
    for a, c, n in zip(a_list, c_list, dims):
        a_norms = np.sqrt(np.einsum("mij,mij->m", a, a))
        xi = max(10.0, np.sqrt(n), n * float(np.max(b_scale / (1.0 + a_norms))))
        eta = max(10.0, np.sqrt(n), (1.0 + max(float(np.linalg.norm(c)), float(a_norms.max()))) / np.sqrt(n))
        x_blocks.append(xi * np.eye(n))
        z_blocks.append(eta * np.eye(n))
    y = np.zeros(m)

    def apply_a(xs):
        out = np.zeros(m)
        for af, x in zip(a_flat, xs):
            out += af @ x.ravel()
        return out

    def apply_at(v):
        return [np.tensordot(v, a, axes=(0, 0)) for a in a_list]

    best = None
    best_score = np.inf
    status = STATUS_FAILED
    message = "iteration cap reached"
    it = 0
    for it in range(1, max_iter + 1):
        pobj = sum(float(np.sum(c * x)) for c, x in zip(c_list, x_blocks))
        dobj = float(b @ y)
        at_y = apply_at(y)
        rp = b - apply_a(x_blocks)
        rd = [c - aty - z for c, aty, z in zip(c_list, at_y, z_blocks)]
        feas_p = float(np.abs(rp).max()) if m else 0.0
        feas_d = max(float(np.abs(r).max()) for r in rd)
        gap = abs(pobj - dobj)
        score = max(feas_p, feas_d, gap / (1.0 + abs(pobj)))
        if score < best_score:
            best_score = score
            best = ([x.copy() for x in x_blocks], y.copy(), [z.copy() for z in z_blocks],
                    pobj, dobj, feas_p, feas_d, it)
        if gap <= gap_tol * (1.0 + abs(pobj)) and feas_p <= feas_tol and feas_d <= feas_tol:
            status = STATUS_OPTIMAL
            message = ""
            break
        if dobj > _DIVERGENCE * b_scale and feas_d <= 1e-6:
            status = STATUS_INFEASIBLE
            message = "dual objective diverged with vanishing dual residual"
            break
        if pobj < -_DIVERGENCE * max(1.0, max(float(np.abs(c).max()) for c in c_list)) \
                and feas_p <= 1e-6:
            status = STATUS_UNBOUNDED
            message = "primal objective diverged with vanishing primal residual"
            break

        mu = sum(float(np.sum(x * z)) for x, z in zip(x_blocks, z_blocks)) / n_tot
        z_inv = []
        for z in z_blocks:
            try:
                ell = np.linalg.cholesky(z)
                zi = sla.cho_solve((ell, True), np.eye(z.shape[0]), check_finite=False)
            except np.linalg.LinAlgError:
                w, u = np.linalg.eigh(z)
                zi = (u / np.maximum(w, 1e-300)) @ u.T
            z_inv.append((zi + zi.T) / 2.0)

        # Schur complement M_ij = sum_b tr(A_i Zinv A_j X), assembled with
        # two wide GEMMs per block: S_j = Zinv A_j X for all j at once.
        schur = np.zeros((m, m))
        for a, af, zi, x, n in zip(a_list, a_flat, z_inv, x_blocks, dims):
            left = (zi @ a.transpose(1, 0, 2).reshape(n, m * n)).reshape(n, m, n)
            s = (left.transpose(1, 0, 2).reshape(m * n, n) @ x).reshape(m, n, n)
            schur += af @ s.transpose(0, 2, 1).reshape(m, -1).T
        schur = (schur + schur.T) / 2.0
        cho = None
        reg = 0.0
        for attempt in range(4):
            try:
                cho = sla.cho_factor(schur + reg * np.eye(m), check_finite=False)
                break
            except np.linalg.LinAlgError:
                reg = max(reg * 100.0, 1e-12 * (1.0 + np.trace(schur) / m))
        if cho is None:
            message = "Schur complement factorization failed"
            break

        def direction(mu_target, u_corr):
            w1 = []
            for bi in range(len(dims)):
                t = -x_blocks[bi] - x_blocks[bi] @ rd[bi] @ z_inv[bi]
                if mu_target != 0.0:
                    t = t + mu_target * z_inv[bi]
                if u_corr is not None:
                    t = t - u_corr[bi] @ z_inv[bi]
                w1.append(t)
            rhs_vec = rp - apply_a(w1)
            dy = sla.cho_solve(cho, rhs_vec, check_finite=False)
            at_dy = apply_at(dy)
            dz = [r - a for r, a in zip(rd, at_dy)]
            dx = [w + x_blocks[bi] @ at_dy[bi] @ z_inv[bi] for bi, w in enumerate(w1)]
            dx = [(d + d.T) / 2.0 for d in dx]
            return dx, dy, dz

        dx_a, dy_a, dz_a = direction(0.0, None)
        ap = min(1.0, *(0.99 * _max_step(x, dx) for x, dx in zip(x_blocks, dx_a)))
        ad = min(1.0, *(0.99 * _max_step(z, dz) for z, dz in zip(z_blocks, dz_a)))
        mu_aff = sum(float(np.sum((x + ap * dx) * (z + ad * dz)))
                     for x, dx, z, dz in zip(x_blocks, dx_a, z_blocks, dz_a)) / n_tot
        sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-10))
        u_corr = [dx @ dz for dx, dz in zip(dx_a, dz_a)]
        dx_c, dy_c, dz_c = direction(sigma * mu, u_corr)

        gamma = 0.98 if score > 1e2 * gap_tol else 0.99
        ap = min(1.0, *(gamma * _max_step(x, dx) for x, dx in zip(x_blocks, dx_c)))
        ad = min(1.0, *(gamma * _max_step(z, dz) for z, dz in zip(z_blocks, dz_c)))
        if ap < 1e-10 and ad < 1e-10:
            message = "step lengths collapsed"
            break
        x_blocks = [(x + ap * dx) for x, dx in zip(x_blocks, dx_c)]
        x_blocks = [(x + x.T) / 2.0 for x in x_blocks]
        y = y + ad * dy_c
        z_blocks = [(z + ad * dz) for z, dz in zip(z_blocks, dz_c)]
        z_blocks = [(z + z.T) / 2.0 for z in z_blocks]

    if status in (STATUS_INFEASIBLE, STATUS_UNBOUNDED):
        return SdpSolution(
            status=status,
            primal_blocks=[_project_embedded(x, n) for x, n in zip(x_blocks, blocks_c)],
            dual=y.copy(), primal_objective=np.nan, dual_objective=np.nan, gap=np.nan,
            primal_residual=np.inf, dual_residual=np.inf, min_block_eig=np.nan,
            iterations=it, message=message)

    if status != STATUS_OPTIMAL and best is not None:
        x_blocks, y, z_blocks, pobj, dobj, feas_p, feas_d, it = best
    else:
        pobj = sum(float(np.sum(c * x)) for c, x in zip(c_list, x_blocks))
        dobj = float(b @ y)
        rp = b - apply_a(x_blocks)
        at_y = apply_at(y)
        feas_p = float(np.abs(rp).max()) if m else 0.0
        feas_d = max(float(np.abs(c - aty - z).max())
                     for c, aty, z in zip(c_list, at_y, z_blocks))

    primal_c = [_project_embedded(x, n) for x, n in zip(x_blocks, blocks_c)]
    min_eig = min(float(np.linalg.eigvalsh(p)[0]) if p.size else 0.0 for p in primal_c)
    return SdpSolution(
        status=status, primal_blocks=primal_c, dual=np.asarray(y, dtype=float),
        primal_objective=pobj, dual_objective=dobj, gap=abs(pobj - dobj),
        primal_residual=feas_p, dual_residual=feas_d, min_block_eig=min_eig,
        iterations=it, message=message)
