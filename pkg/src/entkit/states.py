"""Density operators, bipartite metadata, the reference state zoo, file I/O.

Trace distance here is ``||rho - sigma||_1`` with NO factor 1/2. Most
textbooks halve it; this package does not.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import opcore
from .errors import (
    DomainError,
    FormatError,
    PositivityError,
    ShapeError,
    SizeCapError,
    TraceError,
)

STATE_ATOL = 1e-9          # positivity / trace tolerance for states
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BipartiteDims:
    """Local dimensions (dA, dB) of a bipartite system."""

    dA: int
    dB: int

    def __post_init__(self):
        if self.dA < 2 or self.dB < 2:
            raise ShapeError(f"local dimensions must be >= 2, got ({self.dA}, {self.dB})")

    @property
    def total(self) -> int:
        return self.dA * self.dB

    def as_tuple(self) -> tuple[int, int]:
        return (self.dA, self.dB)


@dataclass(frozen=True)
class DensityOperator:
    """A validated bipartite quantum state.

    ``clamped_mass`` records how much negative eigenvalue mass (within the
    -1e-9 floor) was zeroed and renormalized away during validation.
    """

    op: np.ndarray
    dims: BipartiteDims
    clamped_mass: float = field(default=0.0, compare=False)

    def __post_init__(self):
        a = opcore.require_hermitian(self.op)
        if a.shape[0] != self.dims.total:
            raise ShapeError(
                f"dims {self.dims.as_tuple()} incompatible with operator dim {a.shape[0]}"
            )
        w = np.linalg.eigvalsh(a)
        if w[0] < -STATE_ATOL:
            raise PositivityError(f"minimum eigenvalue {w[0]:.3e} below -{STATE_ATOL}")
        tr = float(np.real(np.trace(a)))
        if abs(tr - 1.0) > STATE_ATOL:
            raise TraceError(f"trace {tr!r} differs from 1 beyond {STATE_ATOL}")
        object.__setattr__(self, "op", a)

    @property
    def dim(self) -> int:
        return self.dims.total


def validate_state(m, dims: BipartiteDims | tuple[int, int]) -> DensityOperator:
    """Validate a matrix as a density operator, clamping tiny negatives.

    Eigenvalues in [-1e-9, 0) are clamped to zero and the state is
    renormalized; the removed mass is recorded on the result. Anything
    below -1e-9 raises :class:`PositivityError`.
    """
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    a = opcore.require_hermitian(m)
    if a.shape[0] != dims.total:
        raise ShapeError(f"dims {dims.as_tuple()} incompatible with operator dim {a.shape[0]}")
    tr = float(np.real(np.trace(a)))
    if abs(tr - 1.0) > STATE_ATOL:
        raise TraceError(f"trace {tr!r} differs from 1 beyond {STATE_ATOL}")
    w, u = np.linalg.eigh(a)
    if w[0] < -STATE_ATOL:
        raise PositivityError(f"minimum eigenvalue {w[0]:.3e} below -{STATE_ATOL}")
    clamped = 0.0
    if w[0] < 0.0:
        clamped = float(-np.sum(w[w < 0.0]))
        w = np.maximum(w, 0.0)
        a = (u * w) @ u.conj().T
        a = a / float(np.real(np.trace(a)))
        a = opcore.hermitize(a)
    return DensityOperator(op=a, dims=dims, clamped_mass=clamped)


def pure_state(vec: np.ndarray, dims: BipartiteDims | tuple[int, int]) -> DensityOperator:
    """Projector onto a (normalized) state vector."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return validate_state(np.outer(v, v.conj()), dims)


# ---------------------------------------------------------------------------
# Reference states
# ---------------------------------------------------------------------------

def bell_vectors() -> list[np.ndarray]:
    """The four Bell vectors, ordered (phi+, phi-, psi+, psi-)."""
    s = 1.0 / np.sqrt(2.0)
    return [
        s * np.array([1, 0, 0, 1], dtype=complex),
        s * np.array([1, 0, 0, -1], dtype=complex),
        s * np.array([0, 1, 1, 0], dtype=complex),
        s * np.array([0, 1, -1, 0], dtype=complex),
    ]


def make_max_entangled(k: int = 1) -> DensityOperator:
    """(phi+)^(x)k with all A qubits grouped first, dims (2^k, 2^k)."""
    if k < 1:
        raise DomainError(f"copy count must be >= 1, got {k}")
    d = 2 ** k
    if d * d > opcore.DIM_CAP:
        raise SizeCapError(f"dimension {d * d} exceeds cap {opcore.DIM_CAP}")
    amp = np.zeros(d * d, dtype=complex)
    for x in range(d):
        amp[x * d + x] = 1.0
    amp /= np.sqrt(d)
    return pure_state(amp, BipartiteDims(d, d))


def make_werner(p: float) -> DensityOperator:
    """p |psi-><psi-| + (1-p) I/4 on two qubits."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"werner parameter must lie in [0, 1], got {p}")
    psim = bell_vectors()[3]
    m = p * np.outer(psim, psim.conj()) + (1.0 - p) * np.eye(4) / 4.0
    return validate_state(m, BipartiteDims(2, 2))


def make_isotropic(f: float) -> DensityOperator:
    """f phi+ + (1-f)(I - phi+)/3 on two qubits."""
    if not 0.0 <= f <= 1.0:
        raise DomainError(f"isotropic fidelity must lie in [0, 1], got {f}")
    phip = bell_vectors()[0]
    proj = np.outer(phip, phip.conj())
    m = f * proj + (1.0 - f) * (np.eye(4) - proj) / 3.0
    return validate_state(m, BipartiteDims(2, 2))


def make_bell_diagonal(p1: float, p2: float, p3: float, p4: float) -> DensityOperator:
    """Mixture of the four Bell projectors with weights (p1..p4)."""
    ps = np.array([p1, p2, p3, p4], dtype=float)
    if np.any(ps < 0.0) or abs(ps.sum() - 1.0) > 1e-12:
        raise DomainError(f"weights must be nonnegative and sum to 1, got {ps.tolist()}")
    m = np.zeros((4, 4), dtype=complex)
    for w, v in zip(ps, bell_vectors()):
        m += w * np.outer(v, v.conj())
    return validate_state(m, BipartiteDims(2, 2))


def maximally_mixed(dims: BipartiteDims | tuple[int, int]) -> DensityOperator:
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    return DensityOperator(op=np.eye(dims.total, dtype=complex) / dims.total, dims=dims)


def tensor_power(rho: DensityOperator, n: int) -> DensityOperator:
    """n-fold tensor power, reordered so the A factors group first.

    The naive Kronecker power interleaves (A1 B1 A2 B2 ...); the result
    here acts on (A1..An | B1..Bn) with dims (dA^n, dB^n), which keeps the
    bipartite split meaningful for partial transposition.
    """
    if n < 1:
        raise DomainError(f"copy count must be >= 1, got {n}")
    da, db = rho.dims.as_tuple()
    if (da * db) ** n > opcore.DIM_CAP:
        raise SizeCapError(f"dimension {(da * db) ** n} exceeds cap {opcore.DIM_CAP}")
    if n == 1:
        return rho
    m = rho.op
    for _ in range(n - 1):
        m = np.kron(m, rho.op)
    # interleaved factor order (A1 B1 A2 B2 ...) -> (A1..An B1..Bn)
    factor_dims = [da, db] * n
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    t = m.reshape(factor_dims + factor_dims)
    t = np.transpose(t, perm + [2 * n + p for p in perm])
    out_dim = (da * db) ** n
    return validate_state(t.reshape(out_dim, out_dim), BipartiteDims(da ** n, db ** n))


# ---------------------------------------------------------------------------
# Random sampling helpers (seeded, used by tests, audits and sweeps)
# ---------------------------------------------------------------------------

def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d x d unitary via QR of a complex Gaussian."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_density(dims: BipartiteDims | tuple[int, int], rng: np.random.Generator,
                   rank: int | None = None) -> DensityOperator:
    """Ginibre-ensemble random state of the given (optional) rank."""
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    d = dims.total
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    m /= np.real(np.trace(m))
    return validate_state(opcore.hermitize(m), dims)


def random_product_vector(dims: BipartiteDims | tuple[int, int],
                          rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    a = rng.standard_normal(dims.dA) + 1j * rng.standard_normal(dims.dA)
    b = rng.standard_normal(dims.dB) + 1j * rng.standard_normal(dims.dB)
    return a / np.linalg.norm(a), b / np.linalg.norm(b)


def random_separable(dims: BipartiteDims | tuple[int, int], rng: np.random.Generator,
                     terms: int = 6) -> DensityOperator:
    """Explicit mixture of product states: sum_j p_j (a_j a_j*) (x) (b_j b_j*)."""
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    w = rng.dirichlet(np.ones(terms))
    m = np.zeros((dims.total, dims.total), dtype=complex)
    for j in range(terms):
        a, b = random_product_vector(dims, rng)
        v = np.kron(a, b)
        m += w[j] * np.outer(v, v.conj())
    return validate_state(opcore.hermitize(m), dims)


# ---------------------------------------------------------------------------
# Distance and file I/O
# ---------------------------------------------------------------------------

def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """||rho - sigma||_1 without the conventional 1/2."""
    if rho.dims != sigma.dims:
        raise ShapeError(f"dims mismatch: {rho.dims.as_tuple()} vs {sigma.dims.as_tuple()}")
    return opcore.trace_norm(rho.op - sigma.op)


def state_to_dict(rho: DensityOperator) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "dA": rho.dims.dA,
        "dB": rho.dims.dB,
        "re": np.real(rho.op).tolist(),
        "im": np.imag(rho.op).tolist(),
    }


def state_from_dict(doc: dict) -> DensityOperator:
    try:
        if int(doc["schema"]) != SCHEMA_VERSION:
            raise FormatError(f"unsupported schema version {doc['schema']!r}")
        da, db = int(doc["dA"]), int(doc["dB"])
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed state document: {exc}") from exc
    if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise FormatError(f"re/im must be equal square matrices, got {re.shape} and {im.shape}")
    if re.shape[0] != da * db:
        raise ShapeError(f"dims ({da}, {db}) incompatible with {re.shape[0]}x{re.shape[0]} entries")
    return validate_state(re + 1j * im, BipartiteDims(da, db))


def save_state(rho: DensityOperator, path: str | os.PathLike) -> None:
    """Write a state as JSON (UTF-8, LF). Floats round-trip exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(state_to_dict(rho), fh)
        fh.write("\n")


def load_state(path: str | os.PathLike) -> DensityOperator:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot parse state file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"state file {path} does not hold a JSON object")
    return state_from_dict(doc)
