"""Quantized output-feedback controller.

The controller moves through three stages:

* ``zoom_out``: no control (``u = 0``, ``xi = 0``); the zoom parameter grows
  on a fixed schedule until a window of length ``tau`` is seen with no mode
  change and no saturated reading.
* ``capture``: the buffered readings are turned into a state estimate
  through the observability Gramian and ``mu`` is reset accordingly.
* ``zoom_in``: observer-based feedback; ``mu`` is multiplied by
  ``sqrt(c_{new,old})`` at each switch and by ``Omega`` at the end of every
  period of length ``T``.

The functions below update a :class:`ControllerState` in place and return
it, so the simulator can drive one state object for a whole run.
"""
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .errors import QSwitchError
from .numerics import matrix_exponential, observability_gramian, output_response_bound
from .quantizer import saturation_test

WINDOW_RTOL = 1e-9


class Stage(str, Enum):
    ZOOM_OUT = "zoom_out"
    CAPTURE = "capture"
    ZOOM_IN = "zoom_in"


@dataclass
class ControllerState:
    stage: Stage
    mu: float
    xi: np.ndarray
    mode: str
    zoom_out_k: int = 0
    switchfree_start: float = None
    window_mode: str = None
    capture_buffer: list = field(default_factory=list)   # (t, q, mu) samples
    period_anchor: float = None
    period_index: int = 0

    @classmethod
    def initial(cls, mode, n):
        return cls(stage=Stage.ZOOM_OUT, mu=1.0, xi=np.zeros(n), mode=str(mode))


def zoom_out_mu(cert, inputs, k):
    """Zoom level during the ``k``-th zoom-out interval ``[k tau_bar, (k+1) tau_bar)``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 1.0
    log_mu = (inputs.N0 * math.log(cert.Lambda)
              + (math.log(cert.Lambda) / inputs.tau_a + cert.Gamma) * (1 + inputs.chi) * k * inputs.tau_bar)
    return math.exp(log_mu)


def zoom_out_index(inputs, t):
    return int(math.floor(t / inputs.tau_bar + 1e-9))


def apply_zoom_out_schedule(state, cert, inputs, t):
    """Set ``mu`` to the zoom-out level in force at ``t``; return True if it changed."""
    k = zoom_out_index(inputs, t)
    if k == state.zoom_out_k and state.mu == zoom_out_mu(cert, inputs, k):
        return False
    state.zoom_out_k = k
    state.mu = zoom_out_mu(cert, inputs, k)
    return True


def _reset_window(state):
    state.switchfree_start = None
    state.window_mode = None
    state.capture_buffer = []


def advance_zoom_out(state, cert, inputs, q_out, sigma_now, t):
    """Feed one zoom-out reading taken at time ``t``.

    A saturated reading empties the window; a reading in a different mode
    than the window started in restarts the window at ``t``.  Once the
    buffered readings span ``tau``, the stage becomes ``capture``.
    """
    if state.stage is not Stage.ZOOM_OUT:
        raise QSwitchError(f"advance_zoom_out called in stage {state.stage.value}")
    sigma_now = str(sigma_now)
    state.mode = sigma_now
    if not saturation_test(inputs.quantizer, q_out, state.mu):
        _reset_window(state)
        return state
    if state.switchfree_start is None or state.window_mode != sigma_now:
        _reset_window(state)
        state.switchfree_start = t
        state.window_mode = sigma_now
    state.capture_buffer.append((t, np.array(q_out, dtype=float), state.mu))
    if t - state.switchfree_start >= inputs.tau * (1 - WINDOW_RTOL):
        state.stage = Stage.CAPTURE
    return state


def capture(state, cert, inputs, plant, t=None, mu_floor=None):
    """Reconstruct the state from the buffered readings and switch to zoom-in.

    The Gramian integral is evaluated with the trapezoidal rule on the
    buffered samples.  ``mu`` is set to the smallest value that provably
    places the closed-loop state in the outer invariant region, or to
    ``mu_floor`` if that is larger.
    """
    buf = state.capture_buffer
    if len(buf) < 2:
        raise QSwitchError("capture buffer incomplete")
    p = state.window_mode if state.window_mode is not None else state.mode
    m = plant.mode(p)
    s0 = buf[0][0]
    offsets = np.array([b[0] - s0 for b in buf])
    length = offsets[-1]
    if length < inputs.tau * (1 - WINDOW_RTOL):
        raise QSwitchError(f"capture buffer spans {length:.6g} < tau = {inputs.tau}")

    integrand = np.array([matrix_exponential(m.A.T, s) @ m.C.T @ b[1] for s, b in zip(offsets, buf)])
    integral = np.trapezoid(integrand, offsets, axis=0)
    if abs(length - inputs.tau) <= 1e-9 * inputs.tau:
        W, Ups, E = cert.W[p], cert.Upsilon[p], cert.expA_tau[p]
    else:
        W = observability_gramian(m.A, m.C, length)
        Ups = output_response_bound(m.A, m.C, length)
        E = matrix_exponential(m.A, length)
    xi = E @ np.linalg.solve(W, integral)

    mu_prev = buf[-1][2]
    Winv_norm = np.linalg.norm(np.linalg.inv(W), 2)
    qz = inputs.quantizer
    mu = (math.sqrt(cert.lambda_P_max / cert.lambda_P_min) * cert.C_max / qz.M
          * (np.linalg.norm(xi) + 2 * Winv_norm * length * Ups * np.linalg.norm(E, 2) * qz.Delta * mu_prev))
    if mu_floor is not None:
        mu = max(mu, float(mu_floor))

    state.xi = xi
    state.mu = float(mu)
    state.mode = p
    state.stage = Stage.ZOOM_IN
    state.period_anchor = buf[-1][0] if t is None else t
    state.period_index = 0
    _reset_window(state)
    return state


def zoom_in_on_switch(state, cert, plant, p_new, p_old):
    if state.stage is not Stage.ZOOM_IN:
        raise QSwitchError("zoom_in_on_switch requires the zoom-in stage")
    p_new, p_old = str(p_new), str(p_old)
    if p_new == p_old:
        raise ValueError("a switch must change the mode")
    try:
        c = cert.c_pairs[(p_new, p_old)]
    except KeyError:
        raise QSwitchError(f"no scaling factor for switch {p_old}->{p_new}") from None
    state.mu *= math.sqrt(c)
    state.xi = plant.jump(p_new, p_old) @ state.xi
    state.mode = p_new
    return state


def zoom_in_on_period_end(state, cert):
    if state.stage is not Stage.ZOOM_IN:
        raise QSwitchError("zoom_in_on_period_end requires the zoom-in stage")
    state.mu *= cert.Omega
    state.period_index += 1
    return state


def observer_derivative(state, plant, q_out):
    """Return ``(xi_dot, u)`` for the Luenberger observer with feedback ``u = K xi``.

    Outside the zoom-in stage the controller is idle: both are zero.
    """
    m = plant.mode(state.mode)
    n, mdim, _ = plant.dims
    if state.stage is not Stage.ZOOM_IN:
        return np.zeros(n), np.zeros(mdim)
    xi = state.xi
    u = m.K @ xi
    xi_dot = (m.A + m.L @ m.C) @ xi + m.B @ u - m.L @ np.atleast_1d(q_out)
    return xi_dot, u
