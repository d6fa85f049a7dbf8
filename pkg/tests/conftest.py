import numpy as np
import pytest

from qswitch.design import DesignInputs, compute_certificate
from qswitch.plant import SwitchedPlant
from qswitch.quantizer import QuantizerConfig
from qswitch.scenario import load_bundled
from qswitch.simulator import simulate


@pytest.fixture(scope="session")
def benchmark():
    return load_bundled()


@pytest.fixture(scope="session")
def benchmark_cert(benchmark):
    return compute_certificate(benchmark.inputs)


@pytest.fixture(scope="session")
def benchmark_traj(benchmark, benchmark_cert):
    return simulate(benchmark, benchmark_cert)


def random_hurwitz(rng, k, margin=0.1):
    """``-R^T R - margin I`` plus a skew part: always Hurwitz."""
    R = rng.normal(size=(k, k))
    S = rng.normal(size=(k, k))
    return -R.T @ R - margin * np.eye(k) + (S - S.T)


def random_spd(rng, k, floor=0.1):
    X = rng.normal(size=(k, k))
    return X @ X.T + floor * np.eye(k)


def single_mode(benchmark, M=10.0, Delta=0.05):
    """Mode 1 of the benchmark on its own, with the standard Lyapunov form."""
    plant = SwitchedPlant({"1": benchmark.plant.mode("1")})
    inp = DesignInputs(plant=plant, Q={"1": benchmark.inputs.Q["1"]}, kappa=4.5,
                       quantizer=QuantizerConfig(M=M, Delta=Delta), tau=0.5, tau_bar=1.0, chi=0.1,
                       N0=1, tau_a=3.5)
    return inp


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.VERDICTS:
            terminalreporter.write_line(line)
