"""Post-hoc checks of a recorded trajectory against the certificate.

Four monitors are run:

* ``r1_membership``: every row from the capture instant on lies in the
  outer region ``V <= lambda_P M^2 mu^2 / C_max^2``.
* ``decrease_rate``: on stretches with fixed mode and fixed ``mu`` that stay
  outside the inner region, ``V`` falls at least linearly at the certified rate.
* ``zoom_out_bound``: while the controller is idle, ``|x(t)|`` stays below
  the open-loop growth bound.
* ``mu_envelope``: at period boundaries ``mu`` stays below the geometric
  envelope implied by the average dwell time.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .plant import verify_adt

REL_TOL = 1e-9


@dataclass
class MonitorResult:
    name: str
    passed: bool
    worst_margin: float      # smallest (bound - value); negative means violated
    checked: int = 0
    violations: int = 0
    first_violation_t: float = None

    def to_dict(self):
        margin = self.worst_margin if math.isfinite(self.worst_margin) else None
        return {"passed": self.passed, "worst_margin": margin, "checked": self.checked,
                "violations": self.violations, "first_violation_t": self.first_violation_t}


@dataclass
class MonitorReport:
    results: dict
    signal_adt: dict = field(default_factory=dict)
    diverged: bool = False

    @property
    def passed(self):
        return not self.diverged and all(r.passed for r in self.results.values())

    def failing(self):
        return [k for k, r in self.results.items() if not r.passed]

    def to_dict(self):
        return {"passed": self.passed, "failing": self.failing(), "diverged": self.diverged,
                "monitors": {k: r.to_dict() for k, r in self.results.items()},
                "signal_adt": self.signal_adt}


def _result(name, margins, times):
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return MonitorResult(name, True, math.inf)
    bad = np.flatnonzero(margins < 0)
    return MonitorResult(name, bad.size == 0, float(margins.min()), int(margins.size), int(bad.size),
                         float(times[bad[0]]) if bad.size else None)


def check_r1(traj, cert, inputs):
    zi = np.array(traj.stage) == "zoom_in"
    level = cert.r1_level(inputs.quantizer.M, traj.mu[zi])
    margins = (level * (1 + REL_TOL) - traj.V[zi]) / level
    return _result("r1_membership", margins, traj.t[zi])


def check_decrease(traj, cert, inputs, slack=None):
    """Linear decrease of ``V`` outside the inner region, compared against segment starts."""
    h = traj.h
    slack = 1e-6 + 10 * h if slack is None else slack
    qz = inputs.quantizer
    rate_coef = cert.lambda_Q_min * inputs.kappa * (1 + inputs.kappa) * (cert.Theta * qz.Delta) ** 2
    stage = np.array(traj.stage)
    sigma = np.array(traj.sigma)
    eligible = (stage == "zoom_in") & ~traj.in_R2
    margins, times = [], []
    start = None
    for k in range(len(traj.t)):
        same = (start is not None and eligible[k] and sigma[k] == sigma[start]
                and traj.mu[k] == traj.mu[start])
        if not same:
            start = k if eligible[k] else None
            continue
        bound = traj.V[start] - (traj.t[k] - traj.t[start]) * rate_coef * traj.mu[start] ** 2 + slack
        margins.append(bound - traj.V[k])
        times.append(traj.t[k])
    return _result("decrease_rate", margins, np.array(times))


def check_zoom_out(traj, cert, inputs):
    zo = np.array(traj.stage) == "zoom_out"
    t = traj.t[zo]
    x0 = np.linalg.norm(traj.x[0])
    log_growth = math.log(cert.Lambda) * (inputs.N0 + t / inputs.tau_a) + cert.Gamma * t
    bound = np.exp(log_growth) * x0
    norms = np.linalg.norm(traj.x[zo], axis=1)
    margins = bound * (1 + REL_TOL) + 1e-300 - norms
    return _result("zoom_out_bound", margins, t)


def check_envelope(traj, cert, inputs):
    if traj.capture_index is None:
        return MonitorResult("mu_envelope", True, math.inf)
    T = traj.period
    c, tau_a, N0 = cert.c, inputs.tau_a, inputs.N0
    mu0 = traj.mu[traj.capture_index]
    t0 = traj.t[traj.capture_index]
    log_ratio = math.log(cert.Omega) + 0.5 * T / tau_a * math.log(c)
    margins, times = [], []
    for e in traj.events:
        if e.reason != "period":
            continue
        m = int(round((e.t - t0) / T))
        log_env = 0.5 * (N0 + T / tau_a) * math.log(c) + m * log_ratio
        # compare in log space: margin is log(envelope) - log(mu)
        margins.append(log_env + REL_TOL - math.log(e.mu_after / mu0))
        times.append(e.t)
    return _result("mu_envelope", margins, np.array(times))


def monitor_invariants(traj, cert, inputs, signal=None):
    results = {
        "r1_membership": check_r1(traj, cert, inputs),
        "decrease_rate": check_decrease(traj, cert, inputs),
        "zoom_out_bound": check_zoom_out(traj, cert, inputs),
        "mu_envelope": check_envelope(traj, cert, inputs),
    }
    adt = {}
    if signal is not None:
        chk = verify_adt(signal, inputs.N0, inputs.tau_a, float(traj.t[-1]))
        adt = {"passed": chk.passed, "tau_a": inputs.tau_a, "N0": inputs.N0,
               "tau_a_min": cert.tau_a_min, "above_minimum": inputs.tau_a > cert.tau_a_min}
        if not chk.passed:
            adt["witness"] = list(chk.witness)
    return MonitorReport(results, adt, traj.diverged)
