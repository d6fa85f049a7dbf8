"""Fixed-step hybrid simulation of the quantized closed loop.

The plant state ``x`` and the estimate ``xi`` are integrated jointly with
the classical fourth-order Runge-Kutta scheme.  The quantized reading is
sampled at the start of every step and held over it.  Switches and period
boundaries fall on grid points, so jumps are applied exactly between steps.
"""
from dataclasses import dataclass, field
import csv
import logging
import math

import numpy as np

from .controller import (ControllerState, Stage, advance_zoom_out, apply_zoom_out_schedule,
                         capture, zoom_in_on_period_end, zoom_in_on_switch)
from .quantizer import zoomed_quantize

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class Scenario:
    inputs: object
    signal: object
    x0: np.ndarray
    horizon: float
    h: float = 1e-3
    seed: int = 0
    mu_floor: float = None
    name: str = ""
    signal_spec: dict = None   # the signal block as written, kept for re-serialization

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = self.inputs.plant.dims[0]
        if x0.shape != (n,):
            raise ValueError(f"x0 must have length {n}")
        if not (self.h > 0 and self.horizon > 0):
            raise ValueError("h and horizon must be positive")
        for p in self.signal.modes():
            self.inputs.plant.mode(p)
        object.__setattr__(self, "x0", x0)

    @property
    def plant(self):
        return self.inputs.plant

    @property
    def n_steps(self):
        return int(round(self.horizon / self.h))

    def grid_signal(self):
        return self.signal.snapped(self.h)

    def period_steps(self, cert):
        """Zoom-in period in steps: ``T`` rounded up to the grid."""
        return max(1, math.ceil(cert.T / self.h - 1e-9))


@dataclass
class Event:
    t: float
    reason: str
    mu_before: float
    mu_after: float


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    sigma: list
    stage: list
    u: np.ndarray
    q: np.ndarray
    V: np.ndarray
    in_R1: np.ndarray
    in_R2: np.ndarray
    h: float
    period: float
    capture_time: float = None
    capture_index: int = None
    events: list = field(default_factory=list)
    diverged: bool = False
    diagnostic: str = ""

    @property
    def z(self):
        return np.hstack([self.x, self.x - self.xi])

    @property
    def z_norm(self):
        return np.linalg.norm(self.z, axis=1)

    def __len__(self):
        return len(self.t)

    def header(self):
        n, m, p = self.x.shape[1], self.u.shape[1], self.q.shape[1]
        return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"xi{i + 1}" for i in range(n)]
                + ["mu", "sigma", "stage"] + [f"u{i + 1}" for i in range(m)]
                + [f"q{i + 1}" for i in range(p)] + ["V", "in_R1", "in_R2"])

    def write_csv(self, fh):
        f = "{:.17g}".format
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header())
        for k in range(len(self.t)):
            w.writerow([f(self.t[k]), *map(f, self.x[k]), *map(f, self.xi[k]), f(self.mu[k]),
                        self.sigma[k], self.stage[k], *map(f, self.u[k]), *map(f, self.q[k]),
                        f(self.V[k]), str(bool(self.in_R1[k])).lower(), str(bool(self.in_R2[k])).lower()])

    def write_events_csv(self, fh):
        f = "{:.17g}".format
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "reason", "mu_before", "mu_after"])
        for e in self.events:
            w.writerow([f(e.t), e.reason, f(e.mu_before), f(e.mu_after)])


def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(G, H, h):
    """One RK4 step of ``s' = G s + H q`` with ``q`` held, as ``s -> Phi s + Psi q``.

    For a linear right-hand side the four stages collapse to a fixed matrix
    polynomial, so each step costs one matrix-vector product.
    """
    k = G.shape[0]
    Z = h * G
    Z2 = Z @ Z
    Z3 = Z2 @ Z
    eye = np.eye(k)
    Phi = eye + Z + Z2 / 2 + Z3 / 6 + Z3 @ Z / 24
    Psi = h * (eye + Z / 2 + Z2 / 6 + Z3 / 24) @ H
    return Phi, Psi


def loop_matrices(plant, p, active):
    """Joint ``(x, xi)`` dynamics for mode ``p``; ``active=False`` is the idle zoom-out loop."""
    m = plant.mode(p)
    n, _, pdim = plant.dims
    G = np.zeros((2 * n, 2 * n))
    H = np.zeros((2 * n, pdim))
    G[:n, :n] = m.A
    if active:
        BK = m.B @ m.K
        G[:n, n:] = BK
        G[n:, n:] = m.A + m.L @ m.C + BK
        H[n:, :] = -m.L
    return G, H


def region_membership(z, mu, p, cert, inputs):
    """``(in_R1, in_R2)`` for the level sets of ``V_p(z) = z^T P_p z``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    qz = inputs.quantizer
    V = float(z @ cert.P[str(p)] @ z)
    return V <= cert.r1_level(qz.M, mu), V <= cert.r2_level(qz.Delta, inputs.kappa, mu)


def simulate(scenario, cert, initial_state=None):
    """Run the closed loop over the scenario horizon.

    ``initial_state`` lets tests start from an arbitrary controller state
    (for instance directly in the zoom-in stage).
    """
    plant, inputs = scenario.plant, scenario.inputs
    qz = inputs.quantizer
    n, mdim, pdim = plant.dims
    h = scenario.h
    N = scenario.n_steps
    signal = scenario.grid_signal()
    switch_at = {int(round(t / h)): p for t, p in signal.switches}
    period_steps = scenario.period_steps(cert)

    t_arr = np.arange(N + 1) * h
    X = np.full((N + 1, n), np.nan)
    XI = np.full((N + 1, n), np.nan)
    MU = np.full(N + 1, np.nan)
    U = np.zeros((N + 1, mdim))
    Qo = np.zeros((N + 1, pdim))
    V = np.full(N + 1, np.nan)
    R1 = np.zeros(N + 1, dtype=bool)
    R2 = np.zeros(N + 1, dtype=bool)
    sigma, stages = [], []
    rec = TrajectoryRecord(t=t_arr, x=X, xi=XI, mu=MU, sigma=sigma, stage=stages, u=U, q=Qo,
                           V=V, in_R1=R1, in_R2=R2, h=h, period=period_steps * h)

    props = {}

    def propagator(p, active):
        key = (p, active)
        if key not in props:
            props[key] = rk4_propagator(*loop_matrices(plant, p, active), h)
        return props[key]

    st = initial_state or ControllerState.initial(signal.initial_mode, n)
    mode = st.mode = signal.initial_mode if initial_state is None else str(st.mode)
    x = scenario.x0.copy()
    next_period = None
    if st.stage is Stage.ZOOM_IN:
        st.period_anchor = 0.0 if st.period_anchor is None else st.period_anchor
        next_period = period_steps
        rec.capture_time, rec.capture_index = 0.0, 0

    M_r1 = cert.lambda_P_min * qz.M ** 2 / cert.C_max ** 2
    M_r2 = cert.lambda_P_max * (cert.Theta * qz.Delta * (1 + inputs.kappa)) ** 2

    last = N
    for k in range(N + 1):
        t = k * h
        if k in switch_at:
            p_new = switch_at[k]
            p_old = mode
            x = plant.jump(p_new, p_old) @ x
            mode = p_new
            if st.stage is Stage.ZOOM_IN:
                before = st.mu
                zoom_in_on_switch(st, cert, plant, p_new, p_old)
                rec.events.append(Event(t, "switch", before, st.mu))
            else:
                st.mode = p_new
        if st.stage is Stage.ZOOM_IN and next_period is not None and k == next_period:
            before = st.mu
            zoom_in_on_period_end(st, cert)
            rec.events.append(Event(t, "period", before, st.mu))
            next_period += period_steps

        m = plant.mode(mode)
        y = m.C @ x
        if st.stage is Stage.ZOOM_OUT:
            before = st.mu
            if apply_zoom_out_schedule(st, cert, inputs, t) and k > 0:
                rec.events.append(Event(t, "zoom-out", before, st.mu))
            q = zoomed_quantize(qz, y, st.mu)
            advance_zoom_out(st, cert, inputs, q, mode, t)
            if st.stage is Stage.CAPTURE:
                before = st.mu
                capture(st, cert, inputs, plant, t=t, mu_floor=scenario.mu_floor)
                rec.events.append(Event(t, "capture", before, st.mu))
                rec.capture_time, rec.capture_index = t, k
                next_period = k + period_steps
                log.debug("captured at t=%.6g, mu=%.6g", t, st.mu)
                q = zoomed_quantize(qz, y, st.mu)
        else:
            q = zoomed_quantize(qz, y, st.mu)

        active = st.stage is Stage.ZOOM_IN
        xi = st.xi
        z = np.concatenate([x, x - xi])
        Vk = float(z @ cert.P[mode] @ z)
        X[k], XI[k], MU[k], Qo[k], V[k] = x, xi, st.mu, q, Vk
        U[k] = m.K @ xi if active else 0.0
        R1[k] = Vk <= M_r1 * st.mu ** 2
        R2[k] = Vk <= M_r2 * st.mu ** 2
        sigma.append(mode)
        stages.append(st.stage.value)

        if not np.all(np.isfinite(z)) or np.linalg.norm(z) > DIVERGENCE_LIMIT:
            rec.diverged = True
            rec.diagnostic = f"state diverged at t={t:.6g} (|z|={np.linalg.norm(z):.3e})"
            log.warning(rec.diagnostic)
            last = k
            break
        if k == N:
            break
        Phi, Psi = propagator(mode, active)
        s = Phi @ np.concatenate([x, xi]) + Psi @ q
        x = s[:n]
        if active:
            st.xi = s[n:]

    if last < N:
        rec.t, rec.x, rec.xi, rec.mu = t_arr[:last + 1], X[:last + 1], XI[:last + 1], MU[:last + 1]
        rec.u, rec.q, rec.V = U[:last + 1], Qo[:last + 1], V[:last + 1]
        rec.in_R1, rec.in_R2 = R1[:last + 1], R2[:last + 1]
    return rec
