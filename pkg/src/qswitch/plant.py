"""Switched linear plant, gains, jump maps and switching signals."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import MissingJumpError, NotHurwitzError, ObservabilityError, UnknownModeError
from .numerics import is_hurwitz, spectral_abscissa

OBS_RANK_RTOL = 1e-9


def _mat(a, rows=None, cols=None, name="matrix"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    if rows is not None and a.shape[0] != rows:
        raise ValueError(f"{name} has {a.shape[0]} rows, expected {rows}")
    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"{name} has {a.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def observability_matrix(A, C):
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    blocks, row = [], C
    for _ in range(A.shape[0]):
        blocks.append(row)
        row = row @ A
    return np.vstack(blocks)


def is_observable(A, C, rtol=OBS_RANK_RTOL):
    s = np.linalg.svd(observability_matrix(A, C), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return False
    return int(np.sum(s > rtol * s[0])) == np.asarray(A).shape[0]


@dataclass(frozen=True)
class ModeDynamics:
    """One mode: ``x' = A x + B u``, ``y = C x`` with gains ``u = K xi`` and observer gain ``L``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        A = _mat(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError("A must be square")
        B = _mat(self.B, rows=n, name="B")
        C = _mat(self.C, cols=n, name="C")
        K = _mat(self.K, rows=B.shape[1], cols=n, name="K")
        L = _mat(self.L, rows=n, cols=C.shape[0], name="L")
        for k, v in dict(A=A, B=B, C=C, K=K, L=L).items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def dims(self):
        return self.A.shape[0], self.B.shape[1], self.C.shape[0]

    def validate(self):
        """Raise if a gain is not stabilizing or ``(C, A)`` is unobservable."""
        for label, M in (("A+BK", self.A + self.B @ self.K), ("A+LC", self.A + self.L @ self.C)):
            if not is_hurwitz(M):
                raise NotHurwitzError(
                    f"{label} is not Hurwitz (spectral abscissa {spectral_abscissa(M):.4g})")
        if not is_observable(self.A, self.C):
            raise ObservabilityError("(C, A) is not observable")


@dataclass(frozen=True)
class SwitchedPlant:
    modes: dict
    jumps: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.modes:
            raise ValueError("plant needs at least one mode")
        modes = {str(k): v for k, v in self.modes.items()}
        dims = {m.dims for m in modes.values()}
        if len(dims) != 1:
            raise ValueError(f"modes have inconsistent dimensions: {sorted(dims)}")
        n = next(iter(dims))[0]
        jumps = {}
        for (p2, p1), R in self.jumps.items():
            p2, p1 = str(p2), str(p1)
            if p2 == p1:
                raise ValueError("jump matrices are only defined between distinct modes")
            for p in (p2, p1):
                if p not in modes:
                    raise UnknownModeError(p)
            R = _mat(R, rows=n, cols=n, name=f"R[{p2},{p1}]")
            R.setflags(write=False)
            jumps[(p2, p1)] = R
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dims(self):
        return next(iter(self.modes.values())).dims

    @property
    def mode_ids(self):
        return tuple(self.modes)

    def mode(self, p):
        try:
            return self.modes[str(p)]
        except KeyError:
            raise UnknownModeError(f"unknown mode {p!r}") from None

    def jump(self, p2, p1):
        try:
            return self.jumps[(str(p2), str(p1))]
        except KeyError:
            raise MissingJumpError(f"no jump matrix R[{p2},{p1}]") from None

    def validate(self, require_all_jumps=True):
        for m in self.modes.values():
            m.validate()
        if require_all_jumps:
            for p2 in self.modes:
                for p1 in self.modes:
                    if p2 != p1:
                        self.jump(p2, p1)


def closed_loop_matrix(plant, p):
    """Closed-loop matrix in coordinates ``z = (x, x - xi)``."""
    m = plant.mode(p)
    n = m.A.shape[0]
    BK = m.B @ m.K
    F = np.zeros((2 * n, 2 * n))
    F[:n, :n] = m.A + BK
    F[:n, n:] = -BK
    F[n:, n:] = m.A + m.L @ m.C
    return F


def closed_loop_jump(plant, p2, p1):
    R = plant.jump(p2, p1)
    n = R.shape[0]
    J = np.zeros((2 * n, 2 * n))
    J[:n, :n] = R
    J[n:, n:] = R
    return J


@dataclass(frozen=True)
class SwitchingSignal:
    """Right-continuous piecewise-constant mode schedule.

    ``switches`` holds ``(time, new_mode)`` pairs; the new mode is active
    from ``time`` on.
    """

    initial_mode: str
    switches: tuple = ()

    def __post_init__(self):
        sw = tuple((float(t), str(p)) for t, p in self.switches)
        prev_t, prev_p = 0.0, str(self.initial_mode)
        for t, p in sw:
            if not t > prev_t:
                raise ValueError("switch times must be strictly increasing and positive")
            if p == prev_p:
                raise ValueError(f"switch at t={t} does not change the mode")
            prev_t, prev_p = t, p
        object.__setattr__(self, "initial_mode", str(self.initial_mode))
        object.__setattr__(self, "switches", sw)

    @property
    def times(self):
        return np.array([t for t, _ in self.switches])

    def mode_at(self, t):
        mode = self.initial_mode
        for ts, p in self.switches:
            if ts <= t:
                mode = p
            else:
                break
        return mode

    def modes(self):
        return {self.initial_mode, *(p for _, p in self.switches)}

    def snapped(self, h):
        """Copy with switch times moved to the nearest multiple of ``h``."""
        out, last = [], 0
        for t, p in self.switches:
            k = max(int(round(t / h)), last + 1)
            out.append((k * h, p))
            last = k
        return SwitchingSignal(self.initial_mode, tuple(out))


def count_switches(signal, s, t):
    """Number of switch times in the half-open interval ``(s, t]``."""
    if not t > s:
        raise ValueError("count_switches needs t > s")
    times = signal.times
    return int(np.searchsorted(times, t, side="right") - np.searchsorted(times, s, side="right"))


@dataclass(frozen=True)
class ADTCheck:
    passed: bool
    witness: tuple = None   # (s, t): s is approached from below
    count: int = 0
    bound: float = 0.0


def verify_adt(signal, N0, tau_a, horizon):
    """Check ``N(t, s) <= N0 + (t - s)/tau_a`` for all ``0 <= s < t <= horizon``.

    The tightest pairs take ``s`` just below a switch ``t_i`` and ``t`` at a
    later (or the same) switch ``t_j``, so only those pairs are examined.
    """
    if N0 < 1 or tau_a <= 0:
        raise ValueError("need N0 >= 1 and tau_a > 0")
    times = [t for t in signal.times if t <= horizon]
    for i, ti in enumerate(times):
        for j in range(i, len(times)):
            count = j - i + 1
            bound = N0 + (times[j] - ti) / tau_a
            if count > bound * (1 + 1e-12):
                return ADTCheck(False, (ti, times[j]), count, bound)
    return ADTCheck(True)


def generate_adt_signal(modes, N0, tau_a, horizon, seed, grid=None):
    """Random switching signal that satisfies the ADT bound by construction.

    Candidate dwell times are exponential with mean ``tau_a``; each switch is
    then delayed to the earliest time compatible with every earlier switch.
    With ``grid`` set, times are rounded up to multiples of it, which keeps
    the bound intact.
    """
    modes = [str(m) for m in modes]
    if len(modes) < 2:
        raise ValueError("need at least two modes")
    if tau_a <= 0:
        raise ValueError("tau_a must be positive")
    rng = np.random.default_rng(seed)
    initial = modes[int(rng.integers(len(modes)))]
    current = initial
    times, switches = [], []
    t = 0.0
    while True:
        t = t + rng.exponential(tau_a)
        k = len(times)
        # switch k+1 against switch i needs (k - i + 1) <= N0 + (t - t_i)/tau_a
        for i, ti in enumerate(times):
            t = max(t, ti + tau_a * (k - i + 1 - N0))
        if grid is not None:
            k_grid = max(math.ceil(t / grid), 1)
            if times:
                k_grid = max(k_grid, round(times[-1] / grid) + 1)
            t = k_grid * grid
        if t > horizon:
            break
        current = rng.choice([m for m in modes if m != current])
        times.append(t)
        switches.append((t, str(current)))
    return SwitchingSignal(initial, tuple(switches))
