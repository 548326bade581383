"""Tractable representations of the separable set.

Outer relaxation: the spectrahedron of states with positive partial
transpose (PPT). Inner representation: convex hulls of pure product
states, grown by an alternating (seesaw) heuristic. For local dimensions
with dA*dB <= 6 the PPT test is an exact separability test; everywhere
else PPT-side results are relaxation bounds and are labeled as such by
callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import opcore, sdp
from .errors import ShapeError
from .states import BipartiteDims, DensityOperator, validate_state

PPT_ATOL = 1e-9
EXACT_DIM_LIMIT = 6     # dA*dB <= 6: PPT is equivalent to separability


@dataclass(frozen=True)
class PptVerdict:
    is_ppt: bool
    min_pt_eigenvalue: float


@dataclass(frozen=True)
class ProductVertex:
    """A pure product state |a> (x) |b>, both factors unit vectors."""

    vec_a: np.ndarray
    vec_b: np.ndarray

    def vector(self) -> np.ndarray:
        return np.kron(self.vec_a, self.vec_b)

    def density(self, dims: BipartiteDims) -> DensityOperator:
        v = self.vector()
        return DensityOperator(op=np.outer(v, v.conj()), dims=dims)

    def matrix(self) -> np.ndarray:
        v = self.vector()
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class LmoResult:
    """Linear-minimization answer with a certified lower bound on the
    true minimum (for the SDP oracle the certificate is rigorous; the
    seesaw reports its attained value)."""

    sigma: DensityOperator
    value: float
    certified_value: float


def is_ppt(rho: DensityOperator) -> PptVerdict:
    pt = opcore.partial_transpose(rho.op, rho.dims.as_tuple())
    lam = float(np.linalg.eigvalsh(pt)[0])
    return PptVerdict(is_ppt=lam >= -PPT_ATOL, min_pt_eigenvalue=lam)


def exact_for_dims(dims: BipartiteDims) -> bool:
    """Whether the PPT criterion decides separability exactly here."""
    return dims.total <= EXACT_DIM_LIMIT


# ---------------------------------------------------------------------------
# PPT linear-minimization oracle (SDP)
# ---------------------------------------------------------------------------

class _PptLmoStructure:
    """Compiled SDP for min tr(G sigma) over {sigma >= 0, sigma^PT >= 0,
    tr sigma = 1}, reused across objectives of the same shape."""

    def __init__(self, dims: BipartiteDims):
        d = dims.total
        self.dims = dims
        self.basis = opcore.hermitian_basis(d)
        constraints = [([np.eye(d, dtype=complex), None], 1.0)]
        for t in range(d * d):
            bt = self.basis[t]
            constraints.append(
                ([-opcore.partial_transpose(bt, dims.as_tuple()), bt], 0.0))
        self.compiled = sdp.CompiledSdp([d, d], constraints)

    def solve(self, g: np.ndarray, gap_tol: float = 1e-8, feas_tol: float = 1e-8):
        d = self.dims.total
        scale = float(np.max(np.abs(g)))
        if scale < 1e-300:
            scale = 1.0
        gn = g / scale
        sol = self.compiled.solve([gn, np.zeros((d, d), dtype=complex)],
                                  gap_tol=gap_tol, feas_tol=feas_tol)
        if sol.status != sdp.STATUS_OPTIMAL:
            from .errors import NumericalFailure
            raise NumericalFailure(
                f"PPT linear oracle did not certify optimality: {sol.status} {sol.message}",
                partial=sol)
        x = sol.primal_blocks[0]
        tr = float(np.real(np.trace(x)))
        sigma = validate_state(x / tr, self.dims)
        value = opcore.herm_inner(g, sigma.op)
        # rigorous lower bound from the dual slack spectra:
        #   <G, sigma> - y0 = <Z_X, sigma> + <Z_Y, sigma^PT> for every feasible sigma
        y0 = sol.dual[0]
        v = np.tensordot(sol.dual[1:], self.basis, axes=(0, 0))
        z_x = gn - y0 * np.eye(d) + opcore.partial_transpose(v, self.dims.as_tuple())
        z_y = -v
        lam_x = min(0.0, float(np.linalg.eigvalsh(opcore.hermitize(z_x))[0]))
        lam_y = min(0.0, float(np.linalg.eigvalsh(opcore.hermitize(z_y))[0]))
        cert = scale * (y0 + lam_x + lam_y)
        return LmoResult(sigma=sigma, value=value, certified_value=cert)


_PPT_LMO_CACHE: dict[tuple[int, int], _PptLmoStructure] = {}


def _ppt_structure(dims: BipartiteDims) -> _PptLmoStructure:
    key = dims.as_tuple()
    st = _PPT_LMO_CACHE.get(key)
    if st is None:
        st = _PptLmoStructure(dims)
        _PPT_LMO_CACHE[key] = st
    return st


def lmo_ppt(g, dims: BipartiteDims | tuple[int, int]) -> LmoResult:
    """Minimize tr(G sigma) over the PPT spectrahedron, SDP-certified."""
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    a = opcore.require_hermitian(g)
    if a.shape[0] != dims.total:
        raise ShapeError(f"dims {dims.as_tuple()} incompatible with operator dim {a.shape[0]}")
    return _ppt_structure(dims).solve(a)


# ---------------------------------------------------------------------------
# Product-state seesaw (inner hull vertex generator)
# ---------------------------------------------------------------------------

def _canonical_phase(v: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(v) > 1e-8)) if np.any(np.abs(v) > 1e-8) else 0
    ph = v[idx]
    if abs(ph) < 1e-300:
        return v
    return v * (ph.conj() / abs(ph))


def _min_eigvec(m: np.ndarray) -> tuple[float, np.ndarray]:
    w, u = np.linalg.eigh(opcore.hermitize(m))
    return float(w[0]), _canonical_phase(u[:, 0].copy())


@dataclass(frozen=True)
class SeesawResult:
    vertex: ProductVertex
    value: float


def lmo_product_seesaw(g, dims: BipartiteDims | tuple[int, int], restarts: int = 32,
                       seed: int = 0, stall_tol: float = 1e-10, max_sweeps: int = 200,
                       warm_starts: list[ProductVertex] | None = None) -> SeesawResult:
    """Minimize <a,b| G |a,b> over unit product vectors by alternating
    eigenvector updates; best result over deterministic restarts.

    For each fixed A-vector the optimal B-vector is the minimal eigenvector
    of the contracted operator, and vice versa; sweeps run to a 1e-10 stall.
    Heuristic: always returns the best vertex found.
    """
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    a_mat = opcore.require_hermitian(g)
    if a_mat.shape[0] != dims.total:
        raise ShapeError(f"dims {dims.as_tuple()} incompatible with operator dim {a_mat.shape[0]}")
    g4 = a_mat.reshape(dims.dA, dims.dB, dims.dA, dims.dB)

    def contract_b(avec):
        return np.einsum("i,ijkl,k->jl", avec.conj(), g4, avec)

    def contract_a(bvec):
        return np.einsum("j,ijkl,l->ik", bvec.conj(), g4, bvec)

    def sweep(avec):
        val_prev = np.inf
        bvec = None
        for _ in range(max_sweeps):
            val_b, bvec = _min_eigvec(contract_b(avec))
            val_a, avec = _min_eigvec(contract_a(bvec))
            if abs(val_prev - val_a) <= stall_tol:
                val_prev = val_a
                break
            val_prev = val_a
        return val_prev, avec, bvec

    candidates: list[tuple[np.ndarray, np.ndarray | None]] = []
    if warm_starts:
        candidates.extend((w.vec_a.copy(), w.vec_b) for w in warm_starts)
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        a0 = rng.standard_normal(dims.dA) + 1j * rng.standard_normal(dims.dA)
        candidates.append((a0 / np.linalg.norm(a0), None))

    best_val, best_a, best_b = np.inf, None, None
    for a0, _ in candidates:
        val, av, bv = sweep(a0)
        if val < best_val - 0.0:
            best_val, best_a, best_b = val, av, bv
    vert = ProductVertex(vec_a=best_a, vec_b=best_b)
    # evaluate exactly at the found vertex
    val = opcore.herm_inner(a_mat, vert.matrix())
    return SeesawResult(vertex=vert, value=val)


# ---------------------------------------------------------------------------
# Overlap bounds and decomposition search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapBounds:
    lower: float
    upper: float


def max_separable_overlap(target: DensityOperator, method: str = "both",
                          restarts: int = 32, seed: int = 0) -> OverlapBounds:
    """Bounds on max tr(target sigma) over separable sigma: attainable
    product-state value from below, PPT relaxation from above."""
    g = -target.op
    lower = -np.inf
    upper = np.inf
    if method in ("seesaw", "both"):
        ss = lmo_product_seesaw(g, target.dims, restarts=restarts, seed=seed)
        lower = -ss.value
    if method in ("ppt", "both"):
        res = lmo_ppt(g, target.dims)
        upper = -res.certified_value
    return OverlapBounds(lower=lower, upper=upper)


@dataclass
class DecompositionResult:
    success: bool
    residual_trace_distance: float
    vertices: list[ProductVertex]
    weights: np.ndarray


def decompose_separable(rho: DensityOperator, max_vertices: int = 100,
                        tol: float = 1e-6, seed: int = 0,
                        restarts: int = 4) -> DecompositionResult:
    """Try to rebuild ``rho`` as an explicit mixture of product states.

    Fully corrective conditional gradient on the squared Frobenius
    distance: the seesaw proposes a vertex, nonnegative least squares
    reoptimizes the mixture weights. Fails fast when the linearization
    bound certifies the distance cannot reach ``tol``.
    """
    dims = rho.dims
    d = dims.total
    verts: list[ProductVertex] = []
    mats: list[np.ndarray] = []
    weights = np.zeros(0)
    sigma = np.eye(d, dtype=complex) / d

    def reoptimize():
        nonlocal weights, sigma
        k = len(mats)
        cols = np.empty((2 * d * d + 1, k))
        for j, m in enumerate(mats):
            cols[:-1, j] = np.concatenate([np.real(m).ravel(), np.imag(m).ravel()])
        cols[-1, :] = 1e3
        target = np.concatenate([np.real(rho.op).ravel(), np.imag(rho.op).ravel(), [1e3]])
        w, _ = scipy.optimize.nnls(cols, target)
        s = w.sum()
        if s <= 0.0:
            w = np.ones(k) / k
        else:
            w = w / s
        weights = w
        sigma = np.einsum("k,kij->ij", w, np.stack(mats))

    for it in range(max_vertices):
        diff = sigma - rho.op
        f_val = opcore.herm_inner(diff, diff)
        if f_val <= (tol / 2.0) ** 2:
            break
        grad = 2.0 * diff
        ss = lmo_product_seesaw(grad, dims, restarts=restarts, seed=seed + it)
        gap = opcore.herm_inner(grad, sigma) - ss.value
        if f_val - gap > tol ** 2:
            # certified: no separable state is within tol (Frobenius) of rho
            break
        verts.append(ss.vertex)
        mats.append(ss.vertex.matrix())
        reoptimize()

    resid = opcore.trace_norm(sigma - rho.op)
    return DecompositionResult(success=resid <= tol, residual_trace_distance=resid,
                               vertices=verts, weights=weights)
