"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError
from .autodiff import Tensor, backward, no_grad


def _value(f) -> float:
    with no_grad():
        out = f()
    value = float(out.data.reshape(-1)[0]) if isinstance(out, Tensor) else float(out)
    if not np.isfinite(value):
        raise NumericalError("objective is non-finite at a perturbed point")
    return value


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-6,
               max_coords: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Max over coordinates of ``|analytic - numeric| / max(1, |analytic|)``.

    ``f`` rebuilds the scalar objective from the current contents of
    ``params``, which are perturbed in place and restored.  With
    ``max_coords`` only that many randomly chosen coordinates per tensor are
    probed.
    """
    loss = f()
    analytic = backward(loss, list(params))
    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            up = _value(f)
            flat[i] = orig - eps
            down = _value(f)
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            worst = max(worst, abs(gflat[i] - numeric) / max(1.0, abs(gflat[i])))
    return worst
