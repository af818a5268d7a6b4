"""Random specs, profiles and traces shared by the test modules."""
import numpy as np

from dlsched.model import (BackgroundTrace, ControlMode, NetworkSpec, StepProfile,
                           trace_to_profile)


def random_spec(rng: np.random.Generator, n_max: int = 6, mode=ControlMode.TIME_INVARIANT):
    n = int(rng.integers(1, n_max + 1))
    return NetworkSpec(tuple(rng.uniform(0.5, 3.0, n + 1)), tuple(rng.uniform(0.2, 2.0, n)),
                       float(rng.uniform(1.0, 6.0)), float(rng.uniform(0.5, 2.0)), mode)


def random_trace(rng: np.random.Generator, max_jobs: int = 60, horizon: float = 50.0):
    count = int(rng.integers(0, max_jobs + 1))
    pts = np.sort(rng.uniform(0.0, horizon, (count, 2)), axis=1)
    return BackgroundTrace(tuple((float(a), float(d)) for a, d in pts if a < d), horizon=horizon)


def random_profile(rng: np.random.Generator, pieces: int | None = None, span: float = 10.0):
    k = int(rng.integers(1, 30)) if pieces is None else pieces
    inner = np.sort(rng.uniform(0.0, span, k - 1))
    bps = np.unique(np.concatenate([[0.0], inner]))
    return StepProfile(tuple(bps), tuple(rng.uniform(0.2, 5.0, len(bps))))


def random_profiles(rng, spec: NetworkSpec, max_jobs: int = 60):
    """Full W (``N + 1``) and Z (``N``) profiles from random uniform traces."""
    varies = spec.control_mode is ControlMode.TIME_VARYING
    w = [trace_to_profile(random_trace(rng, max_jobs), b) if (i or varies)
         else StepProfile.constant(b) for i, b in enumerate(spec.base_w)]
    if varies:
        link = random_trace(rng, max_jobs)
        z = [trace_to_profile(link, b) for b in spec.base_z]
    else:
        z = [StepProfile.constant(b) for b in spec.base_z]
    return w, z


def quadrature(p: StepProfile, a: float, b: float, h: float = 1e-5) -> float:
    """Midpoint rule for the integral of ``1/p`` on a grid of spacing ``h``."""
    n = max(int(round((b - a) / h)), 1)
    mids = a + (np.arange(n) + 0.5) * ((b - a) / n)
    idx = np.searchsorted(np.asarray(p.breakpoints), mids, side="right") - 1
    return float(np.sum(1.0 / np.asarray(p.values)[idx]) * ((b - a) / n))
