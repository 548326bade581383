"""Entropic functionals: von Neumann entropy, quantum relative entropy,
and the pure-state entropy of entanglement. Everything is in bits.
"""

from __future__ import annotations

import math

import numpy as np

from . import opcore
from .errors import PurityError, ShapeError
from .states import DensityOperator

KERNEL_CUTOFF = 1e-12      # eigenvalues below this span the kernel
SUPPORT_LEAK_TOL = 1e-10   # admissible rho-mass on sigma's kernel


def von_neumann_entropy(rho: DensityOperator) -> float:
    """-sum lambda log2 lambda, with 0 log 0 = 0."""
    w = np.linalg.eigvalsh(rho.op)
    w = w[w > KERNEL_CUTOFF]
    return float(-np.sum(w * np.log2(w)))


def quantum_relative_entropy(rho: DensityOperator, sigma: DensityOperator) -> float:
    """tr(rho log2 rho - rho log2 sigma), or +inf outside sigma's support.

    The support test projects rho onto sigma's kernel (eigenvalues below
    1e-12) and allows at most 1e-10 of leaked mass; beyond that the value
    is the infinity sentinel ``math.inf``.
    """
    if rho.dims != sigma.dims:
        raise ShapeError(f"dims mismatch: {rho.dims.as_tuple()} vs {sigma.dims.as_tuple()}")
    ws, us = np.linalg.eigh(sigma.op)
    kernel = ws < KERNEL_CUTOFF
    if np.any(kernel):
        uk = us[:, kernel]
        leak = float(np.real(np.einsum("ij,ji->", uk.conj().T @ rho.op, uk)))
        if leak > SUPPORT_LEAK_TOL:
            return math.inf
    wr = np.linalg.eigvalsh(rho.op)
    wr = wr[wr > KERNEL_CUTOFF]
    ent_rho = float(np.sum(wr * np.log2(wr)))
    ws_f = np.maximum(ws, opcore.LOG_FLOOR)
    log_sigma = (us * np.log2(ws_f)) @ us.conj().T
    cross = opcore.herm_inner(rho.op, log_sigma)
    return ent_rho - cross


def entropy_of_entanglement(psi: DensityOperator) -> float:
    """Entropy of the reduced state of a pure bipartite state, in ebits."""
    purity = opcore.herm_inner(psi.op, psi.op)
    if purity < 1.0 - 1e-9:
        raise PurityError(f"state has purity {purity:.6f}; a pure state is required")
    reduced = opcore.partial_trace(psi.op, psi.dims.as_tuple(), which="B")
    w = np.linalg.eigvalsh(reduced)
    w = w[w > KERNEL_CUTOFF]
    return float(-np.sum(w * np.log2(w)))
