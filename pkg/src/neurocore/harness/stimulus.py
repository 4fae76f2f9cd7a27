"""Input spike trains."""

from __future__ import annotations

import numpy as np

from ..aer import AerEvent
from ..errors import InvalidArgument

__all__ = ["periodic_train", "poisson_train"]


def periodic_train(rate: float, t_end: float, address: int, phase: float = 0.0) -> list[AerEvent]:
    """Events at ``phase + k / rate`` for every such time below ``t_end``."""
    if rate < 0:
        raise InvalidArgument(f"rate must be >= 0, got {rate!r}")
    if rate == 0:
        return []
    n = int(np.ceil((t_end - phase) * rate))
    times = phase + np.arange(max(n, 0)) / rate
    return [AerEvent(float(t), address) for t in times if t < t_end]


def poisson_train(rate: float, t_end: float, address: int, seed: int, stream: int = 0) -> list[AerEvent]:
    """Homogeneous Poisson train; ``(seed, stream)`` fixes the draw."""
    if rate < 0:
        raise InvalidArgument(f"rate must be >= 0, got {rate!r}")
    if rate == 0:
        return []
    rng = np.random.default_rng([seed, stream])
    times = []
    t = 0.0
    # draw in chunks so long trains stay vectorised
    while t < t_end:
        gaps = rng.exponential(1.0 / rate, size=max(16, int(rate * (t_end - t) * 1.2) + 16))
        for g in gaps:
            t += g
            if t >= t_end:
                break
            times.append(t)
    return [AerEvent(float(t), address) for t in times]
