import dataclasses
import json

import numpy as np

from qswitch.design import compute_certificate
from qswitch.monitor import check_envelope, check_r1, monitor_invariants
from qswitch.plant import SwitchingSignal
from qswitch.simulator import Scenario, simulate

from conftest import single_mode


def test_benchmark_all_pass(benchmark, benchmark_cert, benchmark_traj):
    rep = monitor_invariants(benchmark_traj, benchmark_cert, benchmark.inputs, benchmark.grid_signal())
    assert rep.passed and rep.failing() == []
    assert rep.results["r1_membership"].checked == len(benchmark_traj) - 500
    assert rep.results["mu_envelope"].checked > 60
    assert rep.signal_adt["passed"] and rep.signal_adt["above_minimum"]
    json.dumps(rep.to_dict(), allow_nan=False)


def test_dense_switching_flags_envelope(benchmark, benchmark_cert):
    times = tuple((round(0.7 + 0.3 * k, 3), "2" if k % 2 == 0 else "1") for k in range(30))
    sc = dataclasses.replace(benchmark, signal=SwitchingSignal("1", times), horizon=12.0)
    tr = simulate(sc, benchmark_cert)
    rep = monitor_invariants(tr, benchmark_cert, sc.inputs, sc.grid_signal())
    assert not rep.passed
    assert "mu_envelope" in rep.failing()
    assert not rep.signal_adt["passed"]
    assert rep.results["mu_envelope"].first_violation_t is not None


def test_single_mode_decrease_rate(benchmark):
    inp = single_mode(benchmark, M=20.0)
    cert = compute_certificate(inp)
    assert cert.decrease_certified == {"1": True}
    sc = Scenario(inputs=inp, signal=SwitchingSignal("1"), x0=np.array([5.0, -10.0]), horizon=20.0)
    rep = monitor_invariants(simulate(sc, cert), cert, inp)
    res = rep.results["decrease_rate"]
    assert res.checked > 0 and res.passed
    assert rep.passed


def test_r1_violation_detected(benchmark, benchmark_cert, benchmark_traj):
    tr = dataclasses.replace(benchmark_traj, V=benchmark_traj.V.copy())
    k = benchmark_traj.capture_index + 10
    tr.V[k] = 10 * benchmark_cert.r1_level(benchmark.inputs.quantizer.M, tr.mu[k])
    res = check_r1(tr, benchmark_cert, benchmark.inputs)
    assert not res.passed and res.violations == 1
    assert res.first_violation_t == tr.t[k]


def test_envelope_without_capture(benchmark, benchmark_cert, benchmark_traj):
    tr = dataclasses.replace(benchmark_traj, capture_index=None)
    assert check_envelope(tr, benchmark_cert, benchmark.inputs).passed
