"""Time stepping for the filter ODEs.

The pose uses a 2-stage Crouch-Grossman scheme (products of exponentials,
so iterates stay on SE(3)); ``P`` uses Heun's method.  Within a substep the
two are advanced as one coupled 2-stage scheme: the second stage of both is
evaluated at the predicted pair ``(E exp(h K1), P + h F1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .camera import CheiralityError
from .filter import (
    FilterConfig,
    FilterState,
    ObservationBatch,
    init,
    reject_outliers,
    residuals,
    rhs,
    rhs_with_rate,
)
from .liegroup import exp_se3


@dataclass(frozen=True)
class StepPlan:
    h: float
    substeps: int

    def __post_init__(self):
        if not self.h > 0 or self.substeps < 1:
            raise ValueError(f"invalid step plan h={self.h}, substeps={self.substeps}")
        if abs(self.h * self.substeps - 1.0) > 1e-9:
            raise ValueError("h * substeps must span exactly one frame")


def cg2_step(E: np.ndarray, phi: Callable[[np.ndarray], np.ndarray], h: float) -> np.ndarray:
    """One step ``E exp(h/2 K1) exp(h/2 K2)``, ``K1 = phi(E)``, ``K2 = phi(E exp(h K1))``.

    ``phi`` returns the left-trivialized velocity as a twist 6-vector.
    """
    k1 = phi(E)
    k2 = phi(E @ exp_se3(h * k1))
    return E @ exp_se3(0.5 * h * k1) @ exp_se3(0.5 * h * k2)


def rk2_step(P: np.ndarray, f: Callable[[float, np.ndarray], np.ndarray], t: float, h: float) -> np.ndarray:
    """Heun step ``P + h/2 (f(t, P) + f(t + h, P + h f(t, P)))``."""
    f1 = f(t, P)
    f2 = f(t + h, P + h * f1)
    return P + 0.5 * h * (f1 + f2)


def coupled_substep(state: FilterState, batch: ObservationBatch, cfg: FilterConfig, h: float,
                    stage1=None) -> FilterState:
    """One coupled step of size ``h``; ``stage1`` may carry a precomputed ``rhs(state)``."""
    k1, f1 = rhs(state, batch, cfg) if stage1 is None else stage1
    pred = FilterState(E=state.E @ exp_se3(h * k1), P=state.P + h * f1, t=state.t + h)
    k2, f2 = rhs(pred, batch, cfg)
    E = state.E @ exp_se3(0.5 * h * k1) @ exp_se3(0.5 * h * k2)
    P = state.P + 0.5 * h * (f1 + f2)
    return FilterState(E=E, P=P, t=state.t + h)


MAX_SPLIT = 10_000


def _split(ratio: float, frame) -> int:
    if not np.isfinite(ratio):
        raise FloatingPointError(f"frame {frame}: filter state is not finite")
    m = max(1, int(np.ceil(ratio)))
    if m > MAX_SPLIT:
        raise FloatingPointError(f"frame {frame}: step would need {m} splits; filter diverging")
    return m


def step_frame(state: FilterState, batch: ObservationBatch, cfg: FilterConfig) -> FilterState:
    """Advance the filter across one frame with ``batch`` held constant.

    Each of the ``cfg.substeps`` steps of size ``cfg.h`` is split into ``m``
    equal steps when ``h * rho(P H)`` exceeds ``cfg.stability_limit``, so the
    explicit stages stay inside their stability region on stiff frames.
    """
    if len(batch) == 0:
        raise ValueError(f"frame {batch.frame}: empty observation batch")
    t0 = state.t
    cur = state
    try:
        for _ in range(cfg.substeps):
            omega, dP, rho = rhs_with_rate(cur, batch, cfg)
            m = _split(cfg.h * rho / cfg.stability_limit, batch.frame)
            for j in range(m):
                cur = coupled_substep(cur, batch, cfg, cfg.h / m, (omega, dP) if j == 0 else None)
                if cfg.symmetrize_p:
                    cur.P = 0.5 * (cur.P + cur.P.T)
    except CheiralityError as exc:
        raise CheiralityError(
            f"frame {batch.frame}: cheirality violation at observation indices "
            f"{list(exc.indices)}",
            exc.indices,
        ) from exc
    cur.t = t0 + 1.0
    return cur


def run_sequence(batches, cfg: FilterConfig, state: FilterState | None = None, callback=None):
    """Filter a sequence of batches, rejecting outliers against the current estimate.

    Returns ``(estimates, stats, state)``: the pose estimate after each frame,
    ``(mean residual norm, points used)`` per frame, and the final state.
    ``callback(frame_index, state)`` is called after each frame if given.
    """
    state = init(cfg) if state is None else state
    estimates, stats = [], []
    for i, batch in enumerate(batches):
        used = reject_outliers(state.E, batch, cfg)
        state = step_frame(state, used, cfg)
        r = np.linalg.norm(residuals(state.E, used), axis=1)
        estimates.append(state.E.copy())
        stats.append((float(r.mean()), len(used)))
        if callback is not None:
            callback(i, state)
    return estimates, stats, state
