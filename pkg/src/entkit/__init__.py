"""Bipartite entanglement measures with certified bounds.

The package computes relative-entropy and robustness entanglement
quantifiers (with lower bounds from the positive-partial-transpose
relaxation and upper bounds from product-state hulls), regularized
per-copy sequences, quantum hypothesis-testing curves, and audits of
channels that cannot create entanglement.

Dense linear algebra here means many small factorizations; multithreaded
BLAS is counterproductive at these sizes and makes reductions
nondeterministic, so the import pins BLAS pools to one thread. Set the
usual *_NUM_THREADS variables beforehand to override.
"""

import os as _os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

try:  # also covers processes where numpy is already loaded
    import threadpoolctl as _threadpoolctl

    _blas_limit = _threadpoolctl.threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is optional
    _blas_limit = None

from . import entropy, hypotest, measures, opcore, reversibility, sdp, separability, states
from .errors import (
    DomainError,
    EntkitError,
    FormatError,
    HermiticityError,
    ModeError,
    NumericalFailure,
    PositivityError,
    PurityError,
    ShapeError,
    SizeCapError,
    TraceError,
    ValidationError,
)
from .states import BipartiteDims, DensityOperator

__all__ = [
    "BipartiteDims",
    "DensityOperator",
    "DomainError",
    "EntkitError",
    "FormatError",
    "HermiticityError",
    "ModeError",
    "NumericalFailure",
    "PositivityError",
    "PurityError",
    "ShapeError",
    "SizeCapError",
    "TraceError",
    "ValidationError",
    "entropy",
    "hypotest",
    "measures",
    "opcore",
    "reversibility",
    "sdp",
    "separability",
    "states",
]

__version__ = "0.1.0"
