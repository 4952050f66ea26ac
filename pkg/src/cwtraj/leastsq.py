"""Damped least-squares (Levenberg-Marquardt) with finite-difference Jacobians.

The residual function is treated as a black box. Jacobians use central
differences with a relative step and an absolute floor; all 2p
perturbed evaluations are submitted to a single batch callback so the
caller can vectorize them (and optionally evaluate the batch in a
capped thread pool). Damping follows Marquardt's diagonal scaling; a
step is taken only if it strictly decreases the residual norm, so the
sequence of accepted norms is monotone by construction.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

JACOBIAN_THREADS_ENV = "CW_SEED_THREADS"


@dataclass(frozen=True)
class SolverSettings:
    """Tuning knobs for the damped least-squares iteration."""
    tol: float = 1e-6
    max_iterations: int = 200
    fd_rel_step: float = 1e-7
    fd_abs_step: float = 1e-10
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    lambda_max: float = 1e12

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class LeastSquaresResult:
    """Best point found by solve_least_squares, with convergence metadata."""
    u: np.ndarray
    residual: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    accepted_norms: tuple[float, ...]
    message: str


def _jacobian_workers() -> int:
    raw = os.environ.get(JACOBIAN_THREADS_ENV, "").strip()
    if not raw:
        return 0
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


def finite_difference_jacobian(batch_fun, u: np.ndarray, r0: np.ndarray,
                               rel_step: float, abs_step) -> np.ndarray:
    """Central-difference Jacobian of a residual function.

    Per-parameter steps are max(rel_step * |u_j|, abs_step); abs_step may
    be a per-parameter array. The 2p perturbed parameter vectors go to
    batch_fun as a (2p, p) array; the callback returns (2p, n)
    residuals. Non-finite entries (failed evaluations) yield zero columns
    rather than poisoning the solve.

    When the CW_SEED_THREADS environment variable is a positive integer,
    the batch is split into that many chunks evaluated on a thread pool;
    results are assembled in deterministic order either way.
    """
    p = u.size
    h = np.maximum(rel_step * np.abs(u), abs_step)
    batch = np.repeat(u[None, :], 2 * p, axis=0)
    idx = np.arange(p)
    batch[2 * idx, idx] += h
    batch[2 * idx + 1, idx] -= h

    workers = _jacobian_workers()
    if workers > 1 and 2 * p >= workers:
        bounds = np.linspace(0, 2 * p, workers + 1, dtype=int)
        chunks = [batch[bounds[i]:bounds[i + 1]] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(batch_fun, chunks))
        res = np.vstack(parts)
    else:
        res = np.asarray(batch_fun(batch))

    J = (res[0::2] - res[1::2]).T / (2.0 * h)
    J[~np.isfinite(J)] = 0.0
    return J


def solve_least_squares(fun, batch_fun, u0: np.ndarray,
                        settings: SolverSettings = SolverSettings(),
                        fd_abs_step=None, param_scale=None) -> LeastSquaresResult:
    """Minimize ||fun(u)|| from u0 by damped Gauss-Newton steps.

    Args:
        fun: u (p,) -> residual vector (n,).
        batch_fun: U (B, p) -> residuals (B, n); must agree with fun and
            be safe to call from worker threads.
        u0: Starting parameter vector.
        settings: Iteration controls.
        fd_abs_step: Optional per-parameter absolute step floor
            overriding settings.fd_abs_step (callers use it to keep
            perturbations clear of model-switch boundaries).
        param_scale: Characteristic step sizes defining the damping
            metric: an array, or a callable u -> array evaluated each
            iteration. The damped step solves
            min ||J d + r||^2 + lambda ||d / param_scale||^2, so lambda
            of order one confines moves to the characteristic scale.
            Without it the columns are normalized by their norms, which
            lets parameters with weak influence take arbitrarily large
            raw steps (fine for mildly nonlinear problems only).

    Returns:
        LeastSquaresResult with the best (lowest-norm) point seen,
        whether or not the tolerance was met. ``iterations`` counts
        Jacobian evaluations; ``accepted_norms`` starts with the norm at
        u0 and appends one entry per accepted step (strictly
        decreasing).
    """
    u = np.asarray(u0, dtype=float).copy()
    r = np.asarray(fun(u), dtype=float)
    norm = float(np.linalg.norm(r))
    if not math.isfinite(norm):
        raise ValueError("residual at the initial guess is not finite")
    trace = [norm]
    lam = settings.lambda_init
    iterations = 0
    p = u.size
    floors = settings.fd_abs_step if fd_abs_step is None else fd_abs_step
    message = "reached max_iterations"

    while True:
        if norm <= settings.tol:
            message = "residual tolerance met"
            break
        if iterations >= settings.max_iterations:
            break
        J = finite_difference_jacobian(batch_fun, u, r,
                                       settings.fd_rel_step, floors)
        iterations += 1
        if param_scale is None:
            # Fallback: normalize columns by their norms (Marquardt's
            # diag(J^T J) damping in disguise).
            scale = np.linalg.norm(J, axis=0)
            if not np.any(scale > 0.0):
                message = "zero Jacobian: residual is locally insensitive to all parameters"
                break
            scale[scale <= 0.0] = 1.0
            scale = 1.0 / scale
        else:
            scale = np.asarray(param_scale(u) if callable(param_scale) else param_scale,
                               dtype=float)
            if not np.any(np.abs(J).sum(axis=0) > 0.0):
                message = "zero Jacobian: residual is locally insensitive to all parameters"
                break
        Js = J * scale
        rhs = np.concatenate([-r, np.zeros(p)])

        accepted = False
        while lam <= settings.lambda_max:
            aug = np.vstack([Js, math.sqrt(lam) * np.eye(p)])
            step = np.linalg.lstsq(aug, rhs, rcond=None)[0] * scale
            # Backtrack along the step before rotating it with more
            # damping: in strongly curved valleys a shortened Gauss-Newton
            # step makes far better progress than a near-gradient one.
            for frac in (1.0, 0.5, 0.25, 0.1):
                u_try = u + frac * step
                r_try = np.asarray(fun(u_try), dtype=float)
                norm_try = float(np.linalg.norm(r_try))
                if math.isfinite(norm_try) and norm_try < norm:
                    u, r, norm = u_try, r_try, norm_try
                    trace.append(norm)
                    if frac == 1.0:
                        lam = max(lam * settings.lambda_down, 1e-12)
                    elif frac < 0.25:
                        lam *= settings.lambda_up
                    accepted = True
                    break
            if accepted:
                break
            lam *= settings.lambda_up
        if not accepted:
            message = "damping saturated without finding a descent step"
            break

    converged = norm <= settings.tol
    if converged and message == "reached max_iterations":
        message = "residual tolerance met"
    return LeastSquaresResult(u=u, residual=r, residual_norm=norm,
                              iterations=iterations, converged=converged,
                              accepted_norms=tuple(trace), message=message)
