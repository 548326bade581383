"""Quantum hypothesis-testing quantities.

Two engines evaluate tr(rho^(x)n - 2^(y n) sigma^(x)n)_+:

* ``dense``: explicit tensor powers and an eigendecomposition, capped at
  a configurable dimension (default 4096);
* ``dp``: for commuting (classical) pairs, an exact type-class sum
  evaluated entirely in log space, fast up to n in the hundreds.

States here need no bipartite structure; any unit-trace positive matrix
(or a :class:`~entkit.states.DensityOperator`) is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import opcore
from .errors import DomainError, SizeCapError
from .states import DensityOperator

DENSE_CAP = 4096
ALPHABET_CAP = 8
LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class HypothesisTestPoint:
    n: int
    threshold: float
    beta1: float
    beta2: float


@dataclass(frozen=True)
class SteinPoint:
    n: int
    y: float
    value: float
    engine: str


@dataclass
class SteinCurve:
    rows: list[SteinPoint]

    def to_csv(self) -> str:
        lines = ["n,y,value,engine"]
        for r in self.rows:
            lines.append(f"{r.n},{r.y:.12e},{r.value:.12e},{r.engine}")
        return "\n".join(lines) + "\n"


def _as_state_matrix(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.op
    a = opcore.require_hermitian(np.asarray(x, dtype=complex))
    tr = float(np.real(np.trace(a)))
    if abs(tr - 1.0) > 1e-9:
        raise DomainError(f"state trace {tr!r} differs from 1")
    if float(np.linalg.eigvalsh(a)[0]) < -1e-9:
        raise DomainError("state has a negative eigenvalue beyond tolerance")
    return a


def _tensor_pow(a: np.ndarray, n: int, cap: int) -> np.ndarray:
    if a.shape[0] ** n > cap:
        raise SizeCapError(f"dimension {a.shape[0] ** n} exceeds dense cap {cap}")
    out = a
    for _ in range(n - 1):
        out = np.kron(out, a)
    return out


def _clamp01(x: float) -> float:
    if x < -1e-9 or x > 1.0 + 1e-9:
        raise DomainError(f"probability {x!r} escaped [0, 1] beyond tolerance")
    return min(max(x, 0.0), 1.0)


def neyman_pearson_point(rho, sigma, n: int, t: float,
                         dense_cap: int = DENSE_CAP) -> HypothesisTestPoint:
    """Optimal deterministic test of rho^(x)n against t sigma^(x)n.

    The test projector spans the strictly positive eigenspace of
    rho^(x)n - t sigma^(x)n (eigenvalues within 1e-12 of zero are left
    out). beta1 is the miss probability on rho, beta2 the false-alarm
    probability on sigma.
    """
    if t <= 0.0:
        raise DomainError(f"threshold must be positive, got {t}")
    r = _tensor_pow(_as_state_matrix(rho), n, dense_cap)
    s = _tensor_pow(_as_state_matrix(sigma), n, dense_cap)
    w, u = np.linalg.eigh(opcore.hermitize(r - t * s))
    pos = w > opcore.EIG_ZERO_TOL
    if not np.any(pos):
        return HypothesisTestPoint(n=n, threshold=t, beta1=1.0, beta2=0.0)
    up = u[:, pos]
    beta1 = 1.0 - float(np.real(np.einsum("ij,jk,ki->", up.conj().T, r, up)))
    beta2 = float(np.real(np.einsum("ij,jk,ki->", up.conj().T, s, up)))
    return HypothesisTestPoint(n=n, threshold=t, beta1=_clamp01(beta1), beta2=_clamp01(beta2))


def stein_quantity_dense(rho, sigma, n: int, y: float,
                         dense_cap: int = DENSE_CAP) -> float:
    """tr(rho^(x)n - 2^(yn) sigma^(x)n)_+ by explicit eigendecomposition."""
    r = _tensor_pow(_as_state_matrix(rho), n, dense_cap)
    s = _tensor_pow(_as_state_matrix(sigma), n, dense_cap)
    return opcore.positive_part_trace(r - (2.0 ** (y * n)) * s)


def _compositions_colex(n: int, d: int) -> np.ndarray:
    """All length-d compositions of n, in colex order (last coordinate
    most significant)."""
    if d == 1:
        return np.array([[n]], dtype=np.int64)
    if d == 2:
        k = np.arange(n + 1, dtype=np.int64)
        return np.stack([n - k, k], axis=1)
    blocks = []
    for v in range(n + 1):
        sub = _compositions_colex(n - v, d - 1)
        col = np.full((sub.shape[0], 1), v, dtype=np.int64)
        blocks.append(np.hstack([sub, col]))
    return np.vstack(blocks)


def stein_quantity_commuting(p, q, n: int, y: float) -> float:
    """Exact tr(P^(x)n - 2^(yn) Q^(x)n)_+ for distributions p, q.

    Sums over type classes: each composition k contributes
    multinomial(n; k) * max(0, prod p_i^k_i - 2^(yn) prod q_i^k_i),
    assembled in log space with a compensated final summation so the
    result does not depend on evaluation order.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 1 or p.shape != q.shape:
        raise DomainError(f"p and q must be equal-length vectors, got {p.shape} and {q.shape}")
    d = p.shape[0]
    if d > ALPHABET_CAP:
        raise DomainError(f"alphabet size {d} exceeds cap {ALPHABET_CAP}")
    if np.any(p < 0) or np.any(q < 0) or abs(p.sum() - 1) > 1e-12 or abs(q.sum() - 1) > 1e-12:
        raise DomainError("p and q must be probability distributions")
    if np.any((q <= 0.0) & (p > 0.0)) and np.isfinite(y):
        raise DomainError("support of p must lie inside support of q")

    comps = _compositions_colex(n, d).astype(float)
    log_w = gammaln(n + 1.0) - gammaln(comps + 1.0).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(p > 0.0, np.log(p), -np.inf)
        lq = np.where(q > 0.0, np.log(q), -np.inf)
        log_p = comps @ np.where(np.isfinite(lp), lp, 0.0)
        log_q = comps @ np.where(np.isfinite(lq), lq, 0.0)
    # excluded symbols: any k_i > 0 where the distribution vanishes
    dead_p = (comps[:, p <= 0.0] > 0).any(axis=1) if np.any(p <= 0.0) else np.zeros(len(comps), bool)
    dead_q = (comps[:, q <= 0.0] > 0).any(axis=1) if np.any(q <= 0.0) else np.zeros(len(comps), bool)
    log_p[dead_p] = -np.inf
    log_q[dead_q] = -np.inf

    delta = (y * n) * LN2 + log_q - log_p       # log of the subtracted ratio
    keep = np.isfinite(log_p) & (delta < 0.0)
    if not np.any(keep):
        return 0.0
    with np.errstate(over="ignore"):
        log_terms = log_w[keep] + log_p[keep] + np.log1p(-np.exp(delta[keep]))
    mx = float(np.max(log_terms))
    total = math.fsum(np.exp(log_terms - mx).tolist())
    return float(min(max(math.exp(mx) * total, 0.0), 1.0))


def stein_scan(source, y_grid, n_grid, engine: str = "dense",
               dense_cap: int = DENSE_CAP) -> SteinCurve:
    """Evaluate the positive-part curve on a grid.

    ``source`` is a (rho, sigma) pair of states for the dense engine or a
    (p, q) pair of distributions for the dp engine. Rows come out in grid
    order: n outer, y inner.
    """
    y_grid = list(y_grid)
    n_grid = list(n_grid)
    if not y_grid or not n_grid:
        raise DomainError("y_grid and n_grid must be non-empty")
    if engine not in ("dense", "dp"):
        raise DomainError(f"engine must be 'dense' or 'dp', got {engine!r}")
    a, b = source
    rows = []
    for n in n_grid:
        for y in y_grid:
            if engine == "dense":
                val = stein_quantity_dense(a, b, int(n), float(y), dense_cap=dense_cap)
            else:
                val = stein_quantity_commuting(a, b, int(n), float(y))
            rows.append(SteinPoint(n=int(n), y=float(y), value=val, engine=engine))
    return SteinCurve(rows=rows)
