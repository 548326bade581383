"""Dense complex Hermitian operator algebra: the numerical substrate.

Conventions used throughout the package:

* matrices are ``numpy`` ``complex128`` arrays (explicit re/im float64
  pairs), row-major;
* all logarithms are base 2, so the two-qubit maximally entangled state
  carries exactly one unit of entanglement;
* eigenvalues with magnitude below ``EIG_ZERO_TOL`` count as zero in
  positive-part sums, and matrix logarithms floor the spectrum at
  ``LOG_FLOOR``.

Functions accept either a plain ndarray or a :class:`HermitianOperator`;
results are plain ndarrays unless a richer object is warranted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    HermiticityError,
    NumericalFailure,
    ShapeError,
    SingularityWarning,
    SizeCapError,
)

HERM_ATOL = 1e-10        # max |H - H^dag| entry accepted at construction
EIG_ZERO_TOL = 1e-12     # |eigenvalue| treated as zero
LOG_FLOOR = 1e-12        # spectrum floor ahead of matrix logarithms
DIM_CAP = 2 ** 16        # hard cap on operator dimension
LN2 = float(np.log(2.0))


def _as_array(m) -> np.ndarray:
    if isinstance(m, HermitianOperator):
        return m.mat
    return np.asarray(m, dtype=complex)


def herm_deviation(m: np.ndarray) -> float:
    """Largest entry of |M - M^dag|."""
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def require_hermitian(m, atol: float = HERM_ATOL) -> np.ndarray:
    """Return ``m`` as a complex array, raising if it is not Hermitian."""
    a = _as_array(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    dev = herm_deviation(a)
    if dev > atol:
        raise HermiticityError(f"matrix deviates from Hermitian by {dev:.3e}")
    return a


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (M + M^dag) / 2."""
    return (m + m.conj().T) / 2.0


def herm_inner(a, b) -> float:
    """Real trace inner product tr(A B) of two Hermitian matrices."""
    return float(np.real(np.einsum("ij,ji->", _as_array(a), _as_array(b))))


@dataclass(frozen=True)
class HermitianOperator:
    """A validated square Hermitian matrix."""

    mat: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.mat, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {a.shape}")
        dev = herm_deviation(a)
        if dev > HERM_ATOL:
            raise HermiticityError(f"matrix deviates from Hermitian by {dev:.3e}")
        object.__setattr__(self, "mat", a)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (ascending) and a unitary of column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def hermitian_eig(h) -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix.

    Deterministic for fixed input bits: LAPACK's divide-and-conquer path is
    a pure function of the input on a fixed build, which is what the
    bit-reproducibility contract needs.
    """
    a = require_hermitian(h)
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    return EigenDecomposition(eigenvalues=w, eigenvectors=u)


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product A (x) B with a dimension cap."""
    am, bm = _as_array(a), _as_array(b)
    out_dim = am.shape[0] * bm.shape[0]
    if out_dim > DIM_CAP:
        raise SizeCapError(f"tensor product dimension {out_dim} exceeds cap {DIM_CAP}")
    return np.kron(am, bm)


def partial_trace(m, dims: tuple[int, int], which: str = "B") -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``which`` names the subsystem that is traced OUT; the result acts on
    the retained factor.
    """
    a = _as_array(m)
    da, db = dims
    if a.shape[0] != da * db:
        raise ShapeError(f"dims {dims} incompatible with operator dim {a.shape[0]}")
    t = a.reshape(da, db, da, db)
    if which.upper() == "B":
        return np.einsum("ikjk->ij", t)
    if which.upper() == "A":
        return np.einsum("kikj->ij", t)
    raise ShapeError(f"subsystem must be 'A' or 'B', got {which!r}")


def partial_transpose(m, dims: tuple[int, int]) -> np.ndarray:
    """Transpose the second factor of a bipartite operator."""
    a = _as_array(m)
    da, db = dims
    if a.shape[0] != da * db:
        raise ShapeError(f"dims {dims} incompatible with operator dim {a.shape[0]}")
    t = a.reshape(da, db, da, db)
    return np.einsum("ikjl->iljk", t).reshape(da * db, da * db)


def positive_part_trace(h) -> float:
    """Sum of the strictly positive eigenvalues of a Hermitian matrix."""
    w = hermitian_eig(h).eigenvalues
    w = np.where(np.abs(w) <= EIG_ZERO_TOL, 0.0, w)
    return float(np.sum(w[w > 0.0]))


def trace_norm(h) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    w = hermitian_eig(h).eigenvalues
    return float(np.sum(np.abs(w)))


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of d x d matrices, stacked (d^2, d, d).

    Fixed order: diagonal units first, then for each pair j < k the
    symmetric and antisymmetric combinations, all unit Frobenius norm.
    """
    out = np.zeros((d * d, d, d), dtype=complex)
    t = 0
    for j in range(d):
        out[t, j, j] = 1.0
        t += 1
    s = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            out[t, j, k] = s
            out[t, k, j] = s
            t += 1
            out[t, j, k] = -1j * s
            out[t, k, j] = 1j * s
            t += 1
    return out


def matrix_log2(h, floor: float = LOG_FLOOR) -> np.ndarray:
    """Base-2 matrix logarithm with the spectrum floored at ``floor``."""
    dec = hermitian_eig(h)
    w = np.maximum(dec.eigenvalues, floor)
    u = dec.eigenvectors
    return (u * np.log2(w)) @ u.conj().T


def log_frechet_adjoint(sigma, rho, floor: float = LOG_FLOOR) -> np.ndarray:
    """Gradient of sigma -> tr(rho log2 sigma) at ``sigma``.

    Computed by the divided-difference rule in sigma's eigenbasis: entry
    (i, j) of the rotated rho is scaled by
    (log2 a - log2 b)/(a - b), with 1/(a ln 2) on coincident eigenvalues.
    Eigenvalues are floored at ``floor``; flooring emits a
    :class:`SingularityWarning` because the result is then only a
    boundary surrogate.
    """
    dec = hermitian_eig(sigma)
    rho_m = require_hermitian(rho)
    w = dec.eigenvalues
    if np.any(w < floor):
        warnings.warn(
            "operator log gradient required eigenvalue flooring",
            SingularityWarning,
            stacklevel=2,
        )
    w = np.maximum(w, floor)
    u = dec.eigenvectors
    lw = np.log2(w)
    diff = w[:, None] - w[None, :]
    phi = np.empty_like(diff)
    close = np.abs(diff) < 1e-14 * np.maximum(w[:, None], w[None, :])
    # divided differences; the diagonal (and near-degenerate pairs) use 1/(a ln2)
    avg = (w[:, None] + w[None, :]) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = (lw[:, None] - lw[None, :]) / diff
    phi[close] = 1.0 / (avg[close] * LN2)
    rho_t = u.conj().T @ rho_m @ u
    out = u @ (rho_t * phi) @ u.conj().T
    return hermitize(out)
