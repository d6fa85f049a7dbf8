"""Uniform quantizer with saturation, dead zone and zoom."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import InfeasibleDesignError

SAT_RTOL = 1e-12


@dataclass(frozen=True)
class QuantizerConfig:
    """Quantizer constants.

    ``M`` is the saturation range, ``Delta`` the error bound inside the range
    and ``Delta0`` the dead-zone radius.  ``Delta0=None`` means "not given";
    :attr:`dead_zone` then falls back to ``Delta / 5``.
    """

    M: float
    Delta: float
    Delta0: float = None
    dim: int = 1

    def __post_init__(self):
        if not (self.M > 0 and self.Delta > 0):
            raise ValueError("M and Delta must be positive")
        if not self.M > 2 * self.Delta:
            raise InfeasibleDesignError(["range_condition"], 2 * self.Delta)
        if self.Delta0 is not None and not (0 < self.Delta0 <= self.Delta):
            raise ValueError("need 0 < Delta0 <= Delta")
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")

    @property
    def dead_zone(self):
        return self.Delta / 5.0 if self.Delta0 is None else float(self.Delta0)

    @property
    def step(self):
        # per-axis half step Delta/sqrt(p) composes to Euclidean error <= Delta
        return 2.0 * self.Delta / math.sqrt(self.dim)

    @property
    def levels(self):
        """Largest grid index per axis; indices run over ``-levels..levels``."""
        return math.ceil((self.M + self.Delta) / self.step)

    def codebook_size(self):
        return (2 * self.levels + 1) ** self.dim


def quantize(cfg, y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (cfg.dim,):
        raise ValueError(f"expected output of dimension {cfg.dim}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("quantizer input is not finite")
    if math.sqrt(float(y @ y)) <= cfg.dead_zone:
        return np.zeros_like(y)
    s = cfg.step
    idx = np.floor(y / s + 0.5)  # ties go toward +inf
    np.clip(idx, -cfg.levels, cfg.levels, out=idx)
    return idx * s


def zoomed_quantize(cfg, y, mu):
    if not mu > 0:
        raise ValueError("zoom parameter must be positive")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return mu * quantize(cfg, y / mu)


def saturation_test(cfg, qy, mu):
    """True when ``|qy| <= (M - Delta) mu``, i.e. the reading is certified unsaturated."""
    if not mu > 0:
        raise ValueError("zoom parameter must be positive")
    bound = (cfg.M - cfg.Delta) * mu
    return bool(np.linalg.norm(qy) <= bound * (1.0 + SAT_RTOL))
