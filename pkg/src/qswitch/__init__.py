"""Quantized output-feedback stabilization of switched linear systems."""
from .design import DesignCertificate, DesignInputs, compute_certificate, stability_margins
from .plant import ModeDynamics, SwitchedPlant, SwitchingSignal, generate_adt_signal, verify_adt
from .quantizer import QuantizerConfig, quantize, zoomed_quantize
from .scenario import load_bundled, load_scenario
from .simulator import Scenario, TrajectoryRecord, simulate

__version__ = "0.1.0"
