"""Centralized iterative solvers for inverse filtering y -> H^{-1} y.

All four methods are instances of the quasi-Newton template

    e_m = H x_{m-1} - y,   x_m = x_{m-1} - G e_m

with a different approximate inverse G each:

    pgda   G = P^{-2} H^T      (P the hop-local max-degree diagonal)
    spgda  G = P_sym^{-1}      (P_sym the absolute-row-sum diagonal)
    opgd   G = beta H^T        (beta the optimal constant step)
    imia   G = diag(H(i,i) / sum_j H(i,j)^2)

The pgda and spgda updates are arranged entry-for-entry like the
vertex-level message-passing algorithms so the distributed simulator
reproduces these iterates bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg.lapack as lapack
import scipy.sparse as sparse

from .filters import (
    DiagonalPreconditioner,
    GraphFilter,
    Signal,
    SingularValues,
    SymmetricOperator,
    extreme_singular_values,
)
from .preconditioners import (
    build_pgda_preconditioner,
    build_spgda_preconditioner,
    normalized_filter,
)

__all__ = [
    "METHODS",
    "SolverConfig",
    "SolveTrace",
    "MethodParams",
    "NumericError",
    "solve",
    "iteration_matrix",
    "optimal_step",
    "imia_diagonal",
    "direct_solve_oracle",
    "prepare_params",
    "trace_summary",
]

METHODS = ("pgda", "spgda", "opgd", "imia")

SNR_CAP_DB = 300.0


class NumericError(RuntimeError):
    """Nonfinite values appeared during an iteration."""

    def __init__(self, method: str, iteration: int):
        super().__init__(
            f"{method}: nonfinite values at iteration {iteration}"
        )
        self.iteration = iteration


@dataclass
class SolverConfig:
    """Iteration budget and termination policy for `solve`.

    residual_tol, when set, stops early once ||H x - y|| <= residual_tol*||y||.
    divergence_factor aborts with status "diverged" once the residual exceeds
    that multiple of the initial residual.
    """

    method: str
    max_iter: int = 100
    residual_tol: float | None = None
    divergence_factor: float = 1e6
    initial: Signal | None = None
    keep_iterates: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.divergence_factor <= 1.0:
            raise ValueError("divergence_factor must be > 1")


@dataclass
class SolveTrace:
    """Per-iteration record of one solve, indexed m = 0..len-1.

    relative_error is ||x_m - x*|| / ||x*|| against the supplied reference,
    weighted_error applies the method's diagonal weight (P for pgda,
    sqrt(P_sym) for spgda, identity otherwise), and snr = -20 log10 of the
    relative error capped at 300 dB.
    """

    method: str
    residuals: list[float] = field(default_factory=list)
    relative_errors: list[float] | None = None
    weighted_errors: list[float] | None = None
    snrs: list[float] | None = None
    status: str = "max_iter"
    estimated_rate: float | None = None
    iterates: list[np.ndarray] | None = None

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


@dataclass
class MethodParams:
    """Precomputed per-method operators, reusable across solves of the
    same filter. One instance can be shared by all four methods."""

    pgda_preconditioner: DiagonalPreconditioner | None = None
    spgda_preconditioner: DiagonalPreconditioner | None = None
    step_length: float | None = None
    inverse_diagonal: np.ndarray | None = None
    singular_values: SingularValues | None = None


def prepare_params(h: GraphFilter, method: str,
                   params: MethodParams | None = None) -> MethodParams:
    """Fill in whatever the chosen method needs and is still missing."""
    params = params or MethodParams()
    if method == "pgda":
        if params.pgda_preconditioner is None:
            params.pgda_preconditioner = build_pgda_preconditioner(h)
        elif params.pgda_preconditioner.kind != "pgda":
            raise ValueError("pgda solve needs a kind='pgda' preconditioner")
    elif method == "spgda":
        if params.spgda_preconditioner is None:
            params.spgda_preconditioner = build_spgda_preconditioner(h)
        elif params.spgda_preconditioner.kind != "spgda":
            raise ValueError("spgda solve needs a kind='spgda' preconditioner")
    elif method == "opgd":
        if params.step_length is None:
            params.step_length, params.singular_values = optimal_step(
                h, return_singular_values=True
            )
    elif method == "imia":
        if params.inverse_diagonal is None:
            params.inverse_diagonal = imia_diagonal(h)
    return params


def optimal_step(h: GraphFilter, tol: float = 1e-10, max_iter: int = 20000,
                 rng_seed: int = 0, return_singular_values: bool = False):
    """Constant step length 2 / (sigma_max^2 + sigma_min^2), the minimizer
    of the spectral radius of I - beta H^T H."""
    sv = extreme_singular_values(h, tol=tol, max_iter=max_iter, rng_seed=rng_seed)
    if sv.sigma_max == 0.0 or sv.sigma_min / sv.sigma_max < 1e-10:
        raise ValueError(
            f"filter is numerically singular (sigma_min={sv.sigma_min:.3e}, "
            f"sigma_max={sv.sigma_max:.3e}); no stable step length exists"
        )
    beta = 2.0 / (sv.sigma_max**2 + sv.sigma_min**2)
    if return_singular_values:
        return beta, sv
    return beta


def imia_diagonal(h: GraphFilter) -> np.ndarray:
    """Diagonal approximate inverse H(i,i) / sum_j |H(i,j)|^2, the sum
    running over the stored width-neighborhood row entries."""
    diag = h.diagonal()
    zero = np.where(diag == 0.0)[0]
    if zero.size:
        bad = int(zero[0])
        raise ValueError(f"H({bad},{bad}) is zero; the diagonal approximate "
                         "inverse is undefined")
    indptr, data = h.csr.indptr, h.csr.data
    denom = np.zeros(h.graph.n)
    for i in range(h.graph.n):
        row = data[indptr[i]:indptr[i + 1]]
        denom[i] = (row * row).sum()
    return diag / denom


def direct_solve_oracle(h: GraphFilter, y: Signal) -> Signal:
    """Dense LU solve with partial pivoting, used as ground truth.

    Raises if the factorization hits a zero pivot or if the residual check
    ||H x - y|| <= 1e-8 ||y|| fails.
    """
    if y.graph is not h.graph:
        raise ValueError("filter and signal must share the same graph instance")
    dense = h.to_dense()
    lu, piv, info = lapack.dgetrf(dense)
    if info > 0:
        raise np.linalg.LinAlgError(
            f"filter is singular to working precision (zero pivot at index {info - 1})"
        )
    x, info = lapack.dgetrs(lu, piv, y.values)
    if info != 0:
        raise np.linalg.LinAlgError(f"LU solve failed with info={info}")
    resid = np.linalg.norm(h.matvec(x) - y.values)
    if resid > 1e-8 * np.linalg.norm(y.values):
        raise np.linalg.LinAlgError(
            f"oracle residual {resid:.3e} exceeds 1e-8 * ||y||; "
            "filter too ill-conditioned for a trustworthy reference"
        )
    return Signal(h.graph, x)


def _scale_rows_by_division(m: sparse.csr_matrix, divisors: np.ndarray) -> sparse.csr_matrix:
    """Divide every stored entry of row i by divisors[i] (entrywise division,
    matching what a vertex-level agent computes locally)."""
    out = m.copy()
    counts = np.diff(out.indptr)
    out.data = out.data / np.repeat(divisors, counts)
    return out


def _weight_vector(method: str, params: MethodParams) -> np.ndarray | None:
    if method == "pgda":
        return params.pgda_preconditioner.diag
    if method == "spgda":
        return np.sqrt(params.spgda_preconditioner.diag)
    return None


def solve(
    h: GraphFilter,
    y: Signal,
    cfg: SolverConfig,
    reference: Signal | None = None,
    params: MethodParams | None = None,
):
    """Run the configured iteration and return (solution, trace).

    The iteration is fully deterministic: identical inputs and config give
    bit-identical traces. Stops at max_iter, at the residual tolerance, or
    as soon as the residual exceeds divergence_factor times its initial
    value (status "diverged"). Nonfinite iterates raise NumericError.
    """
    if y.graph is not h.graph:
        raise ValueError("filter and signal must share the same graph instance")
    method = cfg.method
    params = prepare_params(h, method, params)

    ht = h.transpose()
    yv = y.values
    if cfg.initial is not None:
        if cfg.initial.graph is not h.graph:
            raise ValueError("initial signal on a different graph")
        x = cfg.initial.values.copy()
    else:
        x = np.zeros(h.graph.n)

    # method-specific update x_new = step(x, t) with t = H x
    if method == "pgda":
        p = params.pgda_preconditioner.diag
        scaled_ht = _scale_rows_by_division(ht.csr, p * p)

        def step(x, t):
            e = t - yv
            return x - scaled_ht @ e

    elif method == "spgda":
        p = params.spgda_preconditioner.diag
        h_tilde = _scale_rows_by_division(h.csr, p)
        y_tilde = yv / p

        def step(x, t):
            # association fixed as (x + y~) - H~ x to mirror the vertex update
            return (x + y_tilde) - h_tilde @ x

    elif method == "opgd":
        beta = params.step_length

        def step(x, t):
            e = t - yv
            return x - beta * (ht.csr @ e)

    else:  # imia
        d = params.inverse_diagonal

        def step(x, t):
            e = t - yv
            return x - d * e

    weight = _weight_vector(method, params)
    track = reference is not None
    ref = reference.values if track else None
    ref_norm = np.linalg.norm(ref) if track else None

    trace = SolveTrace(method=method)
    if track:
        trace.relative_errors = []
        trace.weighted_errors = []
        trace.snrs = []
    if cfg.keep_iterates:
        trace.iterates = []

    def record(x, resid):
        trace.residuals.append(float(resid))
        if track:
            diff = x - ref
            rel = float(np.linalg.norm(diff) / ref_norm) if ref_norm > 0 else float(
                np.linalg.norm(diff))
            w = float(np.linalg.norm(weight * diff)) if weight is not None else float(
                np.linalg.norm(diff))
            trace.relative_errors.append(rel)
            trace.weighted_errors.append(w)
            trace.snrs.append(_snr_db(rel))
        if cfg.keep_iterates:
            trace.iterates.append(x.copy())

    t = h.matvec(x)
    resid0 = np.linalg.norm(t - yv)
    record(x, resid0)
    ynorm = np.linalg.norm(yv)

    status = "max_iter"
    if resid0 == 0.0:
        status = "converged"
    else:
        # a diverging iterate is allowed to overflow; it is reported through
        # the status / NumericError, not through numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            for m in range(1, cfg.max_iter + 1):
                x = step(x, t)
                t = h.matvec(x)
                resid = np.linalg.norm(t - yv)
                if np.isnan(resid):
                    raise NumericError(method, m)
                record(x, resid)
                if cfg.residual_tol is not None and resid <= cfg.residual_tol * ynorm:
                    status = "converged"
                    break
                if resid > cfg.divergence_factor * resid0:
                    status = "diverged"
                    break
    trace.status = status

    if track:
        w = trace.weighted_errors
        steps = len(w) - 1
        if steps >= 1 and w[0] > 0 and w[-1] > 0:
            trace.estimated_rate = float((w[-1] / w[0]) ** (1.0 / steps))
    return Signal(h.graph, x), trace


def _snr_db(rel_error: float) -> float:
    if rel_error <= 0.0:
        return SNR_CAP_DB
    return float(min(-20.0 * np.log10(rel_error), SNR_CAP_DB))


def trace_summary(trace: SolveTrace, spectral_radius: float | None = None,
                  wall_time_s: float | None = None) -> dict:
    """JSON-compatible one-line record of a finished solve."""
    return {
        "method": trace.method,
        "status": trace.status,
        "iterations": trace.iterations,
        "final_residual": trace.residuals[-1] if trace.residuals else None,
        "estimated_rate": trace.estimated_rate,
        "spectral_radius": spectral_radius,
        "wall_time_s": wall_time_s,
    }


def iteration_matrix(h: GraphFilter, method: str,
                     params: MethodParams | None = None) -> SymmetricOperator:
    """Error-propagation operator of a method, in symmetric similarity form
    so its spectral radius can be estimated by power iteration.

    pgda:  I - P^{-1} H^T H P^{-1}
    spgda: I - P^{-1/2} H P^{-1/2}
    opgd:  I - beta H^T H
    imia:  I - D^{1/2} H D^{1/2}   (requires positive diagonal D)
    """
    params = prepare_params(h, method, params)
    n = h.graph.n
    if method == "pgda":
        p = params.pgda_preconditioner.diag
        ht = h.transpose()

        def mv(v):
            u = v / p
            return v - ht.matvec(h.matvec(u)) / p

    elif method == "spgda":
        h_hat = normalized_filter(h, params.spgda_preconditioner)

        def mv(v):
            return v - h_hat.matvec(v)

    elif method == "opgd":
        beta = params.step_length
        ht = h.transpose()

        def mv(v):
            return v - beta * ht.matvec(h.matvec(v))

    else:  # imia
        d = params.inverse_diagonal
        if np.any(d <= 0.0):
            raise ValueError(
                "imia diagonal has nonpositive entries; no symmetric "
                "similarity form exists"
            )
        sq = np.sqrt(d)

        def mv(v):
            return v - sq * h.matvec(sq * v)

    return SymmetricOperator(n=n, matvec=mv)
