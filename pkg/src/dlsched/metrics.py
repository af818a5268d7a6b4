"""Speedup and single-processor reference times."""
from __future__ import annotations

from .model import StepProfile


def speedup(t_fs: float, t_fp: float) -> float:
    if t_fs <= 0 or t_fp <= 0:
        raise ValueError("finishing times must be positive")
    return t_fs / t_fp


def sequential_time_invariant(w: float, t_cp: float) -> float:
    return w * t_cp


def sequential_time_varying(w0_profile: StepProfile, t_cp: float) -> float:
    """Time for the control processor alone to finish the whole load.

    The integral of ``1/W0`` is accumulated segment by segment until it
    reaches ``t_cp``.
    """
    if t_cp <= 0:
        raise ValueError("t_cp must be positive")
    return w0_profile.inverse_primitive(t_cp)
