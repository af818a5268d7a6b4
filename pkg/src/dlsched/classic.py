"""Closed-form schedule for a single-level tree with constant speeds."""
from __future__ import annotations

from typing import Sequence

from .model import NetworkSpec, Schedule


def forward_substitution(w: Sequence[float], z: Sequence[float],
                         t_cp: float, t_cm: float) -> Schedule:
    """Solve the equal-finish linear system for constant inverse speeds.

    Every unknown is linear in ``T_f``, so the system is solved once at
    ``T_f = 1`` and rescaled so the fractions sum to one.
    """
    fractions = [1.0 / (w[0] * t_cp)]
    stages = []
    t_prev = 0.0
    for w_i, z_i in zip(w[1:], z):
        # T_f - T_{i-1} = alpha_i (Z_i T_cm + W_i T_cp)
        a = (1.0 - t_prev) / (z_i * t_cm + w_i * t_cp)
        t_prev += a * z_i * t_cm
        fractions.append(a)
        stages.append(t_prev)
    scale = sum(fractions)
    return Schedule(
        fractions=[a / scale for a in fractions],
        stage_times=[t / scale for t in stages],
        finish_time=1.0 / scale,
    )


def solve_time_invariant(spec: NetworkSpec) -> Schedule:
    return forward_substitution(spec.base_w, spec.base_z, spec.t_cp, spec.t_cm)


def residuals(spec: NetworkSpec, sched: Schedule, w=None, z=None) -> list[float]:
    """Residuals of the ``N + 2`` linear equations, in equation order."""
    w = spec.base_w if w is None else w
    z = spec.base_z if z is None else z
    a, tf = sched.fractions, sched.finish_time
    out = [tf - a[0] * w[0] * spec.t_cp]
    comm = 0.0
    for i in range(1, len(a)):
        comm += a[i] * z[i - 1] * spec.t_cm
        out.append(tf - comm - a[i] * w[i] * spec.t_cp)
    out.append(sum(a) - 1.0)
    return out
