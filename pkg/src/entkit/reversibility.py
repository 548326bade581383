"""Channel-level machinery: formation maps, audits of entanglement
generation, the dual singlet-fraction program, and a cost/distillation
bracket around the regularized relative entropy.

Channels are carried as Choi matrices on (output (x) input). A
measure-and-prepare formation map for a target state rho_n mixes rho_n
and the optimal robustness mixing state pi_n according to the overlap of
the input with a maximally entangled reference; on separable inputs that
overlap never exceeds 2^-k, which is what bounds the entanglement the
map can create.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import measures, opcore, separability
from .errors import DomainError, FormatError, ModeError, ShapeError
from .states import (
    BipartiteDims,
    DensityOperator,
    make_max_entangled,
    state_from_dict,
    state_to_dict,
    tensor_power,
    validate_state,
)

CHOI_PSD_ATOL = 1e-9
CHOI_TP_ATOL = 1e-8


@dataclass(frozen=True)
class TwoPointStructure:
    """Measure-and-prepare data: output = w * target + (1-w) * mixer with
    w the overlap of the input with k copies of the entanglement unit;
    separable inputs reach w in [0, overlap_cap]."""

    unit_copies: int
    target: DensityOperator
    mixer: DensityOperator
    overlap_cap: float


@dataclass(frozen=True)
class QuantumChannel:
    choi: np.ndarray
    in_dims: BipartiteDims
    out_dims: BipartiteDims
    structure: TwoPointStructure | None = None

    def __post_init__(self):
        j = opcore.require_hermitian(self.choi)
        din, dout = self.in_dims.total, self.out_dims.total
        if j.shape[0] != din * dout:
            raise ShapeError(
                f"Choi dim {j.shape[0]} != out {dout} x in {din}")
        lam = float(np.linalg.eigvalsh(j)[0])
        if lam < -CHOI_PSD_ATOL:
            raise DomainError(f"Choi matrix has eigenvalue {lam:.3e}; not completely positive")
        marg = np.einsum("axay->xy", j.reshape(dout, din, dout, din))
        dev = float(np.max(np.abs(marg - np.eye(din))))
        if dev > CHOI_TP_ATOL:
            raise DomainError(f"trace preservation violated by {dev:.3e}")
        object.__setattr__(self, "choi", j)

    def apply(self, rho: DensityOperator) -> DensityOperator:
        if rho.dims != self.in_dims:
            raise ShapeError(
                f"input dims {rho.dims.as_tuple()} != channel input {self.in_dims.as_tuple()}")
        din, dout = self.in_dims.total, self.out_dims.total
        j4 = self.choi.reshape(dout, din, dout, din)
        out = np.einsum("axby,yx->ab", j4, rho.op)
        return validate_state(opcore.hermitize(out), self.out_dims)

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        """Heisenberg-picture image of an output observable."""
        din, dout = self.in_dims.total, self.out_dims.total
        j4 = self.choi.reshape(dout, din, dout, din)
        m = np.einsum("ba,axby->xy", opcore.require_hermitian(w), j4)
        return opcore.hermitize(m)


def identity_channel(dims: BipartiteDims | tuple[int, int]) -> QuantumChannel:
    if not isinstance(dims, BipartiteDims):
        dims = BipartiteDims(*dims)
    d = dims.total
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    return QuantumChannel(choi=np.outer(v, v.conj()), in_dims=dims, out_dims=dims)


def constant_channel(tau: DensityOperator,
                     in_dims: BipartiteDims | tuple[int, int]) -> QuantumChannel:
    """Channel that discards its input and prepares ``tau``."""
    if not isinstance(in_dims, BipartiteDims):
        in_dims = BipartiteDims(*in_dims)
    j = np.kron(tau.op, np.eye(in_dims.total, dtype=complex))
    return QuantumChannel(choi=j, in_dims=in_dims, out_dims=tau.dims)


def mixed_channel(channels: list[QuantumChannel], weights) -> QuantumChannel:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError("mixture weights must be a probability vector")
    first = channels[0]
    j = sum(wi * ch.choi for wi, ch in zip(w, channels))
    return QuantumChannel(choi=j, in_dims=first.in_dims, out_dims=first.out_dims)


# ---------------------------------------------------------------------------
# Formation maps and non-entangling audits
# ---------------------------------------------------------------------------

def build_formation_map(rho_n: DensityOperator, k: int) -> tuple[QuantumChannel, DensityOperator]:
    """Measure-and-prepare map sending k entanglement units to rho_n.

    The input is measured against (phi+)^(x)k; on a hit the map prepares
    rho_n, otherwise the optimal robustness mixing state pi_n. Returns
    the channel and pi_n.
    """
    if k < 1:
        raise DomainError(f"unit copies must be >= 1, got {k}")
    rg = measures.global_robustness(rho_n)
    pi = rg.mixing_state
    phi = make_max_entangled(k)
    din = phi.dim
    proj = phi.op
    j = np.kron(rho_n.op, proj.T) + np.kron(pi.op, (np.eye(din) - proj).T)
    structure = TwoPointStructure(unit_copies=k, target=rho_n, mixer=pi,
                                  overlap_cap=2.0 ** (-k))
    ch = QuantumChannel(choi=opcore.hermitize(j), in_dims=phi.dims,
                        out_dims=rho_n.dims, structure=structure)
    return ch, pi


@dataclass
class NonEntanglingAudit:
    epsilon: float
    worst_input: separability.ProductVertex | None
    samples: list[float]
    exact: bool

    def to_json_dict(self) -> dict:
        return {"epsilon": self.epsilon, "exact": self.exact,
                "samples": self.samples}


def _structural_endpoints(st: TwoPointStructure) -> tuple[DensityOperator, DensityOperator]:
    out0 = st.mixer
    cap = st.overlap_cap
    m = cap * st.target.op + (1.0 - cap) * st.mixer.op
    out1 = validate_state(opcore.hermitize(m), st.target.dims)
    return out0, out1


def audit_non_entangling(channel: QuantumChannel, mode: str = "structural",
                         samples: int = 100, seed: int = 0, restarts: int = 8,
                         refine_rounds: int = 6) -> NonEntanglingAudit:
    """Largest robustness the channel creates on separable inputs.

    Structural mode (two-point measure-and-prepare channels only): on
    separable inputs the output moves on the segment between the mixer
    and the capped mixture, and robustness is convex along it, so the
    endpoints are the exact extremes (up to solver tolerance). Sampled
    mode searches product inputs: random draws plus witness-directed
    seesaw refinement; the result is a lower bound on the true epsilon.
    """
    if mode == "structural":
        st = channel.structure
        if st is None:
            raise ModeError("structural audit requires a two-point channel structure")
        out0, out1 = _structural_endpoints(st)
        r0 = measures.global_robustness(out0).s
        r1 = measures.global_robustness(out1).s
        k = st.unit_copies
        da = channel.in_dims.dA
        e0 = np.zeros(da, dtype=complex)
        e0[0] = 1.0
        e1 = np.zeros(channel.in_dims.dB, dtype=complex)
        e1[1] = 1.0
        on_vertex = separability.ProductVertex(e0, e0.copy())     # overlap 2^-k
        off_vertex = separability.ProductVertex(e0, e1)           # overlap 0
        worst = on_vertex if r1 >= r0 else off_vertex
        return NonEntanglingAudit(epsilon=max(r0, r1), worst_input=worst,
                                  samples=[r0, r1], exact=True)
    if mode != "sampled":
        raise ModeError(f"mode must be 'structural' or 'sampled', got {mode!r}")

    dims = channel.in_dims
    best_val = -np.inf
    best_vertex = None
    vals = []
    for i in range(samples):
        rng = np.random.default_rng([seed, 23, i])
        a = rng.standard_normal(dims.dA) + 1j * rng.standard_normal(dims.dA)
        b = rng.standard_normal(dims.dB) + 1j * rng.standard_normal(dims.dB)
        pv = separability.ProductVertex(a / np.linalg.norm(a), b / np.linalg.norm(b))
        r = measures.global_robustness(channel.apply(pv.density(dims))).s
        vals.append(r)
        if r > best_val:
            best_val, best_vertex = r, pv
    for rnd in range(refine_rounds):
        out = channel.apply(best_vertex.density(dims))
        witness = measures.global_robustness(out).dual_witness
        back = channel.adjoint(witness)
        ss = separability.lmo_product_seesaw(-back, dims, restarts=restarts,
                                             seed=seed + 31 * rnd,
                                             warm_starts=[best_vertex])
        cand = ss.vertex
        r = measures.global_robustness(channel.apply(cand.density(dims))).s
        vals.append(r)
        if r > best_val + 1e-12:
            best_val, best_vertex = r, cand
        else:
            break
    return NonEntanglingAudit(epsilon=float(best_val), worst_input=best_vertex,
                              samples=vals, exact=False)


@dataclass
class MonotonicityReport:
    lr_in: float
    lr_out: float
    lr_allowance: float
    lr_margin: float
    er_in_hull: float
    er_out_ppt: float
    er_allowance: float
    er_margin: float
    ok: bool

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "lr_in", "lr_out", "lr_allowance", "lr_margin",
            "er_in_hull", "er_out_ppt", "er_allowance", "er_margin", "ok")}


def monotonicity_check(channel: QuantumChannel, rho: DensityOperator, eps: float,
                       lr_tol: float = 1e-6, er_tol: float = 1e-4,
                       seed: int = 0) -> MonotonicityReport:
    """Check the log(1 + eps) allowance for robustness and relative
    entropy across one application of an eps-non-entangling channel."""
    out = channel.apply(rho)
    lr_in = measures.log_robustness(rho)
    lr_out = measures.log_robustness(out)
    lr_allow = lr_in + math.log2(1.0 + eps) + lr_tol
    er_in = measures.relative_entropy_of_entanglement(rho, "hull", seed=seed).value
    er_out = measures.relative_entropy_of_entanglement(out, "ppt", seed=seed).value
    er_allow = er_in + math.log2(1.0 + eps) + er_tol
    return MonotonicityReport(
        lr_in=lr_in, lr_out=lr_out, lr_allowance=lr_allow, lr_margin=lr_allow - lr_out,
        er_in_hull=er_in, er_out_ppt=er_out, er_allowance=er_allow,
        er_margin=er_allow - er_out, ok=(lr_out <= lr_allow and er_out <= er_allow))


# ---------------------------------------------------------------------------
# Dual singlet-fraction program
# ---------------------------------------------------------------------------

class InnerPositivePartMinimizer:
    """min over admissible sigma of tr(target - 2^(b n) sigma)_+.

    Subgradient conditional gradient: the subgradient at sigma is
    -2^(bn) P with P the projector onto the positive part; the linear
    oracle is the PPT spectrahedron (lower bounds) or the product-state
    seesaw (upper bounds). Runs a capped number of steps with diminishing
    step sizes, averages the tail iterates, keeps the best value seen,
    and stops early when the linearization gap certifies convergence.
    Results are cached per b so rate sweeps can share work.
    """

    def __init__(self, target: DensityOperator, n: int, feasible_set: str = "ppt",
                 iters: int = 300, seed: int = 0, restarts: int = 8,
                 gap_tol: float = 1e-7):
        if feasible_set not in ("ppt", "hull"):
            raise DomainError(f"feasible_set must be 'ppt' or 'hull', got {feasible_set!r}")
        self.target = target
        self.n = n
        self.feasible_set = feasible_set
        self.iters = iters
        self.seed = seed
        self.restarts = restarts
        self.gap_tol = gap_tol
        self.cache: dict[float, tuple[float, np.ndarray | None]] = {}

    def _objective(self, c: float, sigma: np.ndarray) -> float:
        return opcore.positive_part_trace(self.target.op - c * sigma)

    def solve(self, b: float) -> tuple[float, np.ndarray | None]:
        key = round(float(b), 12)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        c = 2.0 ** (b * self.n)
        if c <= 1e-9:
            # tr(target - c sigma)_+ is within c of 1 for every sigma; the
            # midpoint is accurate to c/2 < 5e-10
            result = (1.0 - c / 2.0, None)
            self.cache[key] = result
            return result
        dims = self.target.dims
        d = dims.total
        sigma = np.eye(d, dtype=complex) / d
        best_val = self._objective(c, sigma)
        best_sigma = sigma.copy()
        avg = np.zeros_like(sigma)
        avg_count = 0
        warm: list[separability.ProductVertex] = []
        for k in range(self.iters):
            w, u = np.linalg.eigh(self.target.op - c * sigma)
            pos = w > opcore.EIG_ZERO_TOL
            val = float(np.sum(w[pos]))
            if val < best_val:
                best_val, best_sigma = val, sigma.copy()
            up = u[:, pos]
            g = -c * (up @ up.conj().T)
            if self.feasible_set == "ppt":
                res = separability.lmo_ppt(g, dims)
                v, cert = res.sigma.op, res.certified_value
            else:
                ss = separability.lmo_product_seesaw(
                    g, dims, restarts=self.restarts, seed=self.seed + 13 * k,
                    warm_starts=warm[-3:])
                v, cert = ss.vertex.matrix(), ss.value
                warm.append(ss.vertex)
            gap = opcore.herm_inner(g, sigma) - cert
            if gap <= self.gap_tol:
                break
            gamma = 2.0 / (k + 2.0)
            sigma = (1.0 - gamma) * sigma + gamma * v
            if k >= self.iters - 50:
                avg += sigma
                avg_count += 1
        candidates = [best_sigma, sigma]
        if avg_count:
            candidates.append(avg / avg_count)
        vals = [self._objective(c, s) for s in candidates]
        j = int(np.argmin(vals))
        result = (float(vals[j]), candidates[j])
        self.cache[key] = result
        return result

    def value(self, b: float) -> float:
        return self.solve(b)[0]


@dataclass
class FsepDualResult:
    value: float
    b_star: float
    sigma: DensityOperator | None
    bound_kind: str
    n: int
    rate: float

    def to_json_dict(self) -> dict:
        return {"value": self.value, "b_star": self.b_star,
                "bound_kind": self.bound_kind, "n": self.n, "rate": self.rate}


def _default_b_grid(rho: DensityOperator, step: float = 0.01) -> np.ndarray:
    hi = math.log2(rho.dims.dA)
    return np.arange(-2.0, hi + 1e-12, step)


def singlet_fraction_dual(rho: DensityOperator, n: int = 1, rate: float = 1.0,
                          b_grid=None, feasible_set: str = "ppt",
                          inner_iters: int = 300, seed: int = 0,
                          restarts: int = 8, refine: bool = True,
                          solver: InnerPositivePartMinimizer | None = None) -> FsepDualResult:
    """Dual bound on the best singlet fraction reachable at the given
    rate by maps that cannot create entanglement:

        min over b of  [ min_sigma tr(rho^(x)n - 2^(bn) sigma)_+ ] + 2^((b - rate) n)

    The outer minimization runs on a grid with golden refinement; the
    grid floor extends automatically until the minimum is interior (deep
    negative b has a cheap certified evaluation).
    """
    if solver is None:
        solver = InnerPositivePartMinimizer(tensor_power(rho, n), n, feasible_set,
                                            iters=inner_iters, seed=seed,
                                            restarts=restarts)
    bs = list(_default_b_grid(rho) if b_grid is None else np.asarray(b_grid, dtype=float))
    bs = sorted(bs)

    def h(b: float) -> float:
        return solver.value(b) + 2.0 ** ((b - rate) * n)

    vals = [h(b) for b in bs]
    # extend the floor while the minimum sits on it
    ext = 1.0
    while int(np.argmin(vals)) == 0 and bs[0] > -40.0:
        b_new = bs[0] - ext
        bs.insert(0, b_new)
        vals.insert(0, h(b_new))
        ext *= 2.0
    j = int(np.argmin(vals))
    b_star, v_star = bs[j], vals[j]
    if refine and 0 < j < len(bs) - 1:
        b_ref, v_ref = measures.golden_min(h, bs[j - 1], bs[j + 1], tol=1e-4)
        if v_ref < v_star:
            b_star, v_star = b_ref, v_ref
    _, sig = solver.solve(b_star)
    sigma = None
    if sig is not None:
        sigma = validate_state(opcore.hermitize(sig), solver.target.dims)
    kind = measures.BOUND_LOWER_PPT if feasible_set == "ppt" else measures.BOUND_UPPER_HULL
    return FsepDualResult(value=float(v_star), b_star=float(b_star), sigma=sigma,
                          bound_kind=kind, n=n, rate=rate)


def singlet_fraction_dual_sweep(rho: DensityOperator, n: int, rate_grid,
                                feasible_set: str = "ppt", b_step: float = 0.1,
                                inner_iters: int = 300, seed: int = 0,
                                restarts: int = 8) -> list[FsepDualResult]:
    """Rate sweep sharing one inner-minimization cache.

    All rates see the same evaluated b set (no per-rate refinement), so
    the reported values are exactly non-increasing in the rate.
    """
    solver = InnerPositivePartMinimizer(tensor_power(rho, n), n, feasible_set,
                                        iters=inner_iters, seed=seed, restarts=restarts)
    grid = _default_b_grid(rho, step=b_step)
    out = []
    for rate in rate_grid:
        out.append(singlet_fraction_dual(rho, n, float(rate), b_grid=grid,
                                         feasible_set=feasible_set, refine=False,
                                         solver=solver))
    return out


# ---------------------------------------------------------------------------
# Cost/distillation bracket
# ---------------------------------------------------------------------------

@dataclass
class ReversibilityBracket:
    copies: int
    distill_lower: float
    cost_upper: float
    ree_rows: list[tuple[int, float, float]]
    fsep_curve: list[tuple[float, float]]
    consistency_tol: float
    consistent: bool

    def to_json_dict(self) -> dict:
        return {
            "copies": self.copies,
            "distill_lower": self.distill_lower,
            "cost_upper": self.cost_upper,
            "ree_rows": [{"n": n, "ppt": p, "hull": h} for n, p, h in self.ree_rows],
            "fsep_curve": [{"rate": d, "value": v} for d, v in self.fsep_curve],
            "consistent": self.consistent,
        }


def reversibility_bracket(rho: DensityOperator, copies: int = 2, seed: int = 0,
                          rate_grid=None, threshold: float = 0.99,
                          consistency_tol: float = 5e-2) -> ReversibilityBracket:
    """Numeric bracket [distillation estimate, cost estimate] around the
    per-copy relative-entropy band at small copy numbers.

    Distillation side: the largest rate on a grid whose dual singlet
    fraction stays above ``threshold`` at n = copies. Cost side: per-copy
    log-robustness of rho^(x)copies (the formation-map construction).
    """
    if rate_grid is None:
        rate_grid = np.arange(0.0, 2.0 + 1e-12, 0.05)
    er_ppt = measures.regularized_ree_sequence(rho, copies, "ppt", seed=seed)
    er_hull = measures.regularized_ree_sequence(rho, copies, "hull", seed=seed)
    ree_rows = [(r.n, r.value, h.value) for r, h in zip(er_ppt.rows, er_hull.rows)]
    cost_upper = measures.log_robustness(tensor_power(rho, copies)) / copies
    sweep = singlet_fraction_dual_sweep(rho, copies, rate_grid, feasible_set="hull",
                                        seed=seed)
    fsep_curve = [(r.rate, r.value) for r in sweep]
    passing = [d for d, v in fsep_curve if v >= threshold]
    distill_lower = max(passing) if passing else 0.0
    lo_band = min(min(p for _, p, _ in ree_rows), min(h for _, _, h in ree_rows))
    hi_band = max(max(p for _, p, _ in ree_rows), max(h for _, _, h in ree_rows))
    consistent = (distill_lower - consistency_tol <= lo_band
                  and hi_band <= cost_upper + consistency_tol)
    return ReversibilityBracket(copies=copies, distill_lower=distill_lower,
                                cost_upper=cost_upper, ree_rows=ree_rows,
                                fsep_curve=fsep_curve,
                                consistency_tol=consistency_tol, consistent=consistent)


# ---------------------------------------------------------------------------
# Channel file I/O
# ---------------------------------------------------------------------------

def channel_to_dict(ch: QuantumChannel) -> dict:
    doc = {
        "schema": 1,
        "kind": "channel",
        "in_dA": ch.in_dims.dA, "in_dB": ch.in_dims.dB,
        "out_dA": ch.out_dims.dA, "out_dB": ch.out_dims.dB,
        "re": np.real(ch.choi).tolist(),
        "im": np.imag(ch.choi).tolist(),
    }
    if ch.structure is not None:
        st = ch.structure
        doc["two_point"] = {
            "unit_copies": st.unit_copies,
            "overlap_cap": st.overlap_cap,
            "target": state_to_dict(st.target),
            "mixer": state_to_dict(st.mixer),
        }
    return doc


def channel_from_dict(doc: dict) -> QuantumChannel:
    try:
        if int(doc["schema"]) != 1 or doc.get("kind") != "channel":
            raise FormatError("not a channel document")
        in_dims = BipartiteDims(int(doc["in_dA"]), int(doc["in_dB"]))
        out_dims = BipartiteDims(int(doc["out_dA"]), int(doc["out_dB"]))
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed channel document: {exc}") from exc
    structure = None
    if "two_point" in doc:
        tp = doc["two_point"]
        structure = TwoPointStructure(
            unit_copies=int(tp["unit_copies"]),
            target=state_from_dict(tp["target"]),
            mixer=state_from_dict(tp["mixer"]),
            overlap_cap=float(tp["overlap_cap"]))
    return QuantumChannel(choi=re + 1j * im, in_dims=in_dims, out_dims=out_dims,
                          structure=structure)


def save_channel(ch: QuantumChannel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(channel_to_dict(ch), fh)
        fh.write("\n")


def load_channel(path: str | os.PathLike) -> QuantumChannel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot parse channel file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"channel file {path} does not hold a JSON object")
    return channel_from_dict(doc)
