"""Design certificate: every constant the zoom protocol needs.

The certificate is computed once from the plant, the gains, the
per-mode weights ``Q_p`` and the quantizer constants, and is then shared
read-only by the controller, the simulator and the monitors.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InfeasibleDesignError, MarginsUndefinedError, NotPositiveDefiniteError
from .numerics import (check_spd, is_spd, matrix_exponential, min_scaling_factor,
                       observability_gramian, output_response_bound, solve_lyapunov)
from .plant import closed_loop_jump, closed_loop_matrix
from .quantizer import QuantizerConfig

T_MARGIN = 1e-6
LYAPUNOV_FORMS = ("standard", "transposed")


@dataclass(frozen=True)
class DesignInputs:
    """User-chosen design data.

    ``lyapunov_form`` selects which Lyapunov equation defines ``P_p``:
    ``"standard"`` solves ``F^T P + P F = -Q`` (the form under which
    ``z^T P z`` decreases along ``z' = F z``); ``"transposed"`` solves
    ``F P + P F^T = -Q``.  The transposed form exists only so that
    published constants computed that way can be reproduced; the
    certificate records whether the resulting ``P`` still certifies decrease.
    """

    plant: object
    Q: dict
    kappa: float
    quantizer: QuantizerConfig
    tau: float
    tau_bar: float
    chi: float
    N0: float
    tau_a: float
    lyapunov_form: str = "standard"

    def __post_init__(self):
        n, _, p = self.plant.dims
        if self.quantizer.dim != p:
            raise ValueError(f"quantizer dim {self.quantizer.dim} != output dim {p}")
        Q = {}
        for mode in self.plant.mode_ids:
            if mode not in {str(k) for k in self.Q}:
                raise ValueError(f"missing Q for mode {mode}")
        for k, v in self.Q.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (2 * n, 2 * n):
                raise ValueError(f"Q[{k}] must be {2 * n}x{2 * n}")
            if not is_spd(v):
                raise NotPositiveDefiniteError(f"Q[{k}] is not symmetric positive definite")
            Q[str(k)] = v
        object.__setattr__(self, "Q", Q)
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.chi > 0:
            raise ValueError("chi must be positive")
        if not (self.tau > 0 and self.tau_bar > 0 and self.tau_a > 0):
            raise ValueError("tau, tau_bar and tau_a must be positive")
        if not self.tau < self.tau_a:
            raise ValueError(f"capture window tau={self.tau} must be shorter than tau_a={self.tau_a}")
        if not self.N0 >= 1:
            raise ValueError("N0 must be >= 1")
        if self.lyapunov_form not in LYAPUNOV_FORMS:
            raise ValueError(f"lyapunov_form must be one of {LYAPUNOV_FORMS}")


@dataclass(frozen=True)
class DesignCertificate:
    P: dict
    lambda_P_max: float
    lambda_P_min: float
    lambda_Q_min: float
    C_max: float
    Theta: float
    Gamma: float
    Lambda: float
    Omega: float
    c_pairs: dict
    c: float
    T_bound: float
    T: float
    tau_a_min: float
    N: int
    W: dict
    Upsilon: dict
    expA_tau: dict
    lyapunov_form: str
    decrease_certified: dict
    conditions: dict = field(default_factory=dict)

    @property
    def c_min(self):
        """``min(1, min c_pairs)``, the smallest possible per-switch factor."""
        return min([1.0, *self.c_pairs.values()])

    def r1_level(self, M, mu):
        return self.lambda_P_min * M ** 2 * mu ** 2 / self.C_max ** 2

    def r2_level(self, Delta, kappa, mu):
        return self.lambda_P_max * (self.Theta * Delta * (1 + kappa)) ** 2 * mu ** 2

    def to_dict(self):
        return {
            "T": self.T,
            "T_bound": self.T_bound,
            "Omega": self.Omega,
            "c": self.c,
            "tau_a_min": self.tau_a_min,
            "Theta": self.Theta,
            "lambda_P_max": self.lambda_P_max,
            "lambda_P_min": self.lambda_P_min,
            "lambda_Q_min": self.lambda_Q_min,
            "C_max": self.C_max,
            "Gamma": self.Gamma,
            "Lambda": self.Lambda,
            "N": self.N,
            "c_pairs": {f"{p1}->{p2}": v for (p2, p1), v in self.c_pairs.items()},
            "Upsilon": dict(self.Upsilon),
            "P": {k: v.tolist() for k, v in self.P.items()},
            "W": {k: v.tolist() for k, v in self.W.items()},
            "lyapunov_form": self.lyapunov_form,
            "decrease_certified": dict(self.decrease_certified),
            "conditions": dict(self.conditions),
        }


def _lifted_gain(L):
    n = L.shape[0]
    return np.vstack([np.zeros((n, L.shape[1])), L])


def compute_theta(P, plant, lambda_Q):
    """``2 max_p ||P_p [0; L_p]|| / lambda_Q``."""
    worst = max(np.linalg.norm(P[p] @ _lifted_gain(plant.mode(p).L), 2) for p in plant.mode_ids)
    return 2.0 * worst / lambda_Q


def solve_mode_lyapunov(F, Q, form="standard"):
    if form == "standard":
        return solve_lyapunov(F, Q)
    return solve_lyapunov(F.T, Q)


def smallest_N(N0, tau, tau_a):
    """Smallest positive integer ``N > tau_a/(tau_a - tau) * (N0 - tau/tau_a)``."""
    bound = tau_a / (tau_a - tau) * (N0 - tau / tau_a)
    return max(1, math.floor(bound) + 1)


def minimum_range(lambda_ratio, Theta, Delta, kappa, C_max):
    """Infimum of saturation ranges ``M`` accepted by the design conditions."""
    return max(2 * Delta, math.sqrt(lambda_ratio) * Theta * Delta * C_max,
               math.sqrt(lambda_ratio) * Theta * Delta * (1 + kappa) * C_max)


def compute_certificate(inputs):
    plant = inputs.plant
    plant.validate()
    qz = inputs.quantizer
    M, Delta, kappa = qz.M, qz.Delta, inputs.kappa
    modes = plant.mode_ids

    P, decrease = {}, {}
    for p in modes:
        F = closed_loop_matrix(plant, p)
        P[p] = solve_mode_lyapunov(F, check_spd(inputs.Q[p], f"Q[{p}]"), inputs.lyapunov_form)
        S = F.T @ P[p] + P[p] @ F
        decrease[p] = bool(np.linalg.eigvalsh(0.5 * (S + S.T)).max() < 0)

    lam_P_max = max(np.linalg.eigvalsh(P[p]).max() for p in modes)
    lam_P_min = min(np.linalg.eigvalsh(P[p]).min() for p in modes)
    lam_Q = min(np.linalg.eigvalsh(inputs.Q[p]).min() for p in modes)
    C_max = max(np.linalg.norm(plant.mode(p).C, 2) for p in modes)
    Theta = compute_theta(P, plant, lam_Q)
    Gamma = max(np.linalg.norm(plant.mode(p).A, 2) for p in modes)
    Lambda = max([1.0, *(np.linalg.norm(R, 2) for R in plant.jumps.values())])

    ratio = lam_P_max / lam_P_min
    Omega = math.sqrt(ratio) * Theta * Delta * (1 + kappa) * C_max / M
    range_ok = M > max(2 * Delta, math.sqrt(ratio) * Theta * Delta * C_max)
    contraction_ok = Omega < 1
    if not (range_ok and contraction_ok):
        violations = [name for name, ok in (("range_condition", range_ok),
                                            ("contraction_condition", contraction_ok)) if not ok]
        raise InfeasibleDesignError(violations, minimum_range(ratio, Theta, Delta, kappa, C_max))

    c_pairs = {}
    for p2 in modes:
        for p1 in modes:
            if p1 != p2:
                c_pairs[(p2, p1)] = min_scaling_factor(P[p1], P[p2], closed_loop_jump(plant, p2, p1))
    c = max([1.0, *c_pairs.values()])

    ThDC = Theta * Delta * C_max
    T_bound = ((lam_P_min * M ** 2 - lam_P_max * (ThDC * (1 + kappa)) ** 2)
               / (lam_Q * kappa * (1 + kappa) * ThDC ** 2))
    T = (1 + T_MARGIN) * T_bound
    tau_a_min = math.log(c) / (2 * math.log(1 / Omega)) * T

    tau = inputs.tau
    W, Ups, E = {}, {}, {}
    for p in modes:
        m = plant.mode(p)
        W[p] = observability_gramian(m.A, m.C, tau)
        Ups[p] = output_response_bound(m.A, m.C, tau)
        E[p] = matrix_exponential(m.A, tau)

    conditions = {
        "range_condition": range_ok,
        "contraction_condition": contraction_ok,
        "dwell_time_condition": bool(inputs.tau_a > tau_a_min),
    }
    return DesignCertificate(
        P=P, lambda_P_max=float(lam_P_max), lambda_P_min=float(lam_P_min),
        lambda_Q_min=float(lam_Q), C_max=float(C_max), Theta=float(Theta),
        Gamma=float(Gamma), Lambda=float(Lambda), Omega=float(Omega),
        c_pairs=c_pairs, c=float(c), T_bound=float(T_bound), T=float(T),
        tau_a_min=float(tau_a_min), N=smallest_N(inputs.N0, tau, inputs.tau_a),
        W=W, Upsilon=Ups, expA_tau=E, lyapunov_form=inputs.lyapunov_form,
        decrease_certified=decrease, conditions=conditions)


@dataclass(frozen=True)
class StabilityMargins:
    eps: float
    alpha: float
    mu_bar: float
    m_bar: int
    eta: float
    delta: float
    contraction: float      # Omega * sqrt(c^(T/tau_a)), per-period envelope factor
    delta_bounds: tuple     # (dead zone in zoom-out, dead zone in zoom-in, radius)


def stability_margins(cert, inputs, eps, alpha, period=None):
    """Initial-state radius ``delta`` that keeps ``|z(t)| < eps`` for all time.

    ``period`` overrides ``cert.T`` when the controller runs with a slightly
    longer (grid-aligned) period.  All large powers are handled in log space.
    """
    if not (eps > 0 and alpha > 0):
        raise ValueError("eps and alpha must be positive")
    T = cert.T if period is None else float(period)
    tau, tau_a, N0, N = inputs.tau, inputs.tau_a, inputs.N0, cert.N
    qz = inputs.quantizer
    c, Omega, C_max = cert.c, cert.Omega, cert.C_max
    zeta = Omega * c ** (T / (2 * tau_a))
    if not zeta < 1:
        raise MarginsUndefinedError(
            f"Omega*sqrt(c^(T/tau_a)) = {zeta:.6g} >= 1; tau_a must exceed {cert.tau_a_min:.6g}")

    log_Lambda = math.log(cert.Lambda)
    growth = log_Lambda / tau_a + cert.Gamma   # log of Lambda^(1/tau_a) e^Gamma
    capture_term = max(np.linalg.norm(np.linalg.inv(cert.W[p]), 2) * cert.Upsilon[p]
                       * np.linalg.norm(cert.expA_tau[p], 2) for p in cert.P)
    mu_bar = max(alpha, 2 * math.sqrt(cert.lambda_P_max / cert.lambda_P_min) * qz.Delta * tau * C_max
                 * math.exp(N0 * log_Lambda + growth * (1 + inputs.chi) * N * tau) / qz.M
                 * capture_term)

    num = math.log(mu_bar * qz.M * math.sqrt(c ** (N0 + T / tau_a)) / (eps * C_max))
    m_bar = max(1, math.floor(num / math.log(1 / zeta)) + 1)

    c_low = cert.c_min
    eta = alpha * Omega ** m_bar * math.sqrt(c_low ** (N0 + m_bar * T / tau_a))

    d0 = qz.dead_zone
    log_short = N0 * log_Lambda + growth * N * tau
    log_long = N0 * log_Lambda + growth * (N * tau + m_bar * T)
    bounds = (
        math.exp(math.log(d0) - math.log(C_max) - log_short),
        math.exp(math.log(eta * d0) - math.log(C_max) - log_long),
        math.exp(math.log(eps / 2) - log_long),
    )
    return StabilityMargins(eps=eps, alpha=alpha, mu_bar=mu_bar, m_bar=m_bar, eta=eta,
                            delta=0.99 * min(bounds), contraction=zeta, delta_bounds=bounds)
