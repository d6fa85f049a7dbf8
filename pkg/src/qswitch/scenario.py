"""Scenario files: JSON documents describing plant, design, quantizer, signal and run."""
import copy
import json
from importlib import resources

import jsonschema
import numpy as np

from .design import DesignInputs
from .errors import ScenarioError
from .plant import ModeDynamics, SwitchedPlant, SwitchingSignal, generate_adt_signal
from .quantizer import QuantizerConfig
from .simulator import Scenario

_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["plant", "design", "quantizer", "signal", "sim"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "plant": {
            "type": "object",
            "required": ["modes", "jumps"],
            "additionalProperties": False,
            "properties": {
                "modes": {
                    "type": "object", "minProperties": 1,
                    "additionalProperties": {
                        "type": "object", "required": ["A", "B", "C", "K", "L"],
                        "additionalProperties": False,
                        "properties": {k: _matrix for k in ("A", "B", "C", "K", "L")},
                    },
                },
                "jumps": {
                    "type": "array",
                    "items": {
                        "type": "object", "required": ["from", "to", "R"],
                        "additionalProperties": False,
                        "properties": {"from": {"type": "string"}, "to": {"type": "string"}, "R": _matrix},
                    },
                },
            },
        },
        "design": {
            "type": "object",
            "required": ["Q", "kappa", "tau", "tau_bar", "chi", "N0", "tau_a"],
            "additionalProperties": False,
            "properties": {
                "Q": {"type": "object", "additionalProperties": _matrix},
                "kappa": _pos, "tau": _pos, "tau_bar": _pos, "chi": _pos, "tau_a": _pos,
                "N0": {"type": "number", "minimum": 1},
                "lyapunov_form": {"enum": ["standard", "transposed"]},
            },
        },
        "quantizer": {
            "type": "object", "required": ["M", "Delta"], "additionalProperties": False,
            "properties": {"M": _pos, "Delta": _pos, "Delta0": _pos},
        },
        "signal": {
            "oneOf": [
                {"type": "object", "required": ["initial_mode", "switches"], "additionalProperties": False,
                 "properties": {
                     "initial_mode": {"type": "string"},
                     "switches": {"type": "array", "items": {
                         "type": "array", "prefixItems": [_pos, {"type": "string"}],
                         "minItems": 2, "maxItems": 2}},
                 }},
                {"type": "object", "required": ["generate"], "additionalProperties": False,
                 "properties": {"generate": {
                     "type": "object", "required": ["tau_a", "N0", "horizon", "seed"],
                     "additionalProperties": False,
                     "properties": {"tau_a": _pos, "N0": {"type": "number", "minimum": 1},
                                    "horizon": _pos, "seed": {"type": "integer"}},
                 }}},
            ],
        },
        "sim": {
            "type": "object", "required": ["x0", "horizon", "h"], "additionalProperties": False,
            "properties": {
                "x0": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                "horizon": _pos, "h": _pos, "seed": {"type": "integer"}, "mu_floor": _pos,
            },
        },
    },
}


def parse_json(text, source="<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def validate_document(doc):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ScenarioError(f"field {where}: {e.message}")


def build_plant(doc):
    modes = {str(k): ModeDynamics(**{m: np.array(v[m], dtype=float) for m in "ABCKL"})
             for k, v in doc["modes"].items()}
    jumps = {(j["to"], j["from"]): np.array(j["R"], dtype=float) for j in doc["jumps"]}
    return SwitchedPlant(modes, jumps)


def build_signal(doc, modes, grid=None):
    if "generate" in doc:
        g = doc["generate"]
        return generate_adt_signal(modes, g["N0"], g["tau_a"], g["horizon"], g["seed"], grid=grid)
    return SwitchingSignal(doc["initial_mode"], tuple((t, p) for t, p in doc["switches"]))


def scenario_from_document(doc):
    """Validate a parsed document and build a :class:`Scenario`."""
    validate_document(doc)
    try:
        plant = build_plant(doc["plant"])
        d, qd = doc["design"], doc["quantizer"]
        qz = QuantizerConfig(M=qd["M"], Delta=qd["Delta"], Delta0=qd.get("Delta0"), dim=plant.dims[2])
        inputs = DesignInputs(
            plant=plant, Q={k: np.array(v, dtype=float) for k, v in d["Q"].items()},
            kappa=d["kappa"], quantizer=qz, tau=d["tau"], tau_bar=d["tau_bar"], chi=d["chi"],
            N0=d["N0"], tau_a=d["tau_a"], lyapunov_form=d.get("lyapunov_form", "standard"))
        sim = doc["sim"]
        signal = build_signal(doc["signal"], plant.mode_ids, grid=sim["h"])
        return Scenario(inputs=inputs, signal=signal, x0=np.array(sim["x0"], dtype=float),
                        horizon=sim["horizon"], h=sim["h"], seed=sim.get("seed", 0),
                        mu_floor=sim.get("mu_floor"), name=doc.get("name", ""),
                        signal_spec=copy.deepcopy(doc["signal"]))
    except ScenarioError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        if getattr(exc, "violations", None) is not None:
            raise
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return scenario_from_document(parse_json(text, str(path)))


def _list(a):
    return np.asarray(a).tolist()


def _num(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def scenario_to_document(sc):
    """Inverse of :func:`scenario_from_document`."""
    plant, inputs = sc.plant, sc.inputs
    modes = {p: {k: _list(getattr(plant.mode(p), k)) for k in "ABCKL"} for p in plant.mode_ids}
    jumps = [{"from": p1, "to": p2, "R": _list(R)} for (p2, p1), R in plant.jumps.items()]
    design = {"Q": {k: _list(v) for k, v in inputs.Q.items()}, "kappa": _num(inputs.kappa),
              "tau": _num(inputs.tau), "tau_bar": _num(inputs.tau_bar), "chi": _num(inputs.chi),
              "N0": _num(inputs.N0), "tau_a": _num(inputs.tau_a)}
    if inputs.lyapunov_form != "standard":
        design["lyapunov_form"] = inputs.lyapunov_form
    qz = inputs.quantizer
    quant = {"M": _num(qz.M), "Delta": _num(qz.Delta)}
    if qz.Delta0 is not None:
        quant["Delta0"] = _num(qz.Delta0)
    if sc.signal_spec is not None and "generate" in sc.signal_spec:
        signal = copy.deepcopy(sc.signal_spec)
    else:
        signal = {"initial_mode": sc.signal.initial_mode,
                  "switches": [[_num(t), p] for t, p in sc.signal.switches]}
    sim = {"x0": [_num(v) for v in sc.x0], "horizon": _num(sc.horizon), "h": _num(sc.h)}
    if sc.seed:
        sim["seed"] = sc.seed
    if sc.mu_floor is not None:
        sim["mu_floor"] = _num(sc.mu_floor)
    doc = {"plant": {"modes": modes, "jumps": jumps}, "design": design, "quantizer": quant,
           "signal": signal, "sim": sim}
    if sc.name:
        doc = {"name": sc.name, **doc}
    return doc


def bundled_path(name="paper_sec5.json"):
    return resources.files("qswitch") / "data" / name


def load_bundled(name="paper_sec5.json"):
    return scenario_from_document(parse_json(bundled_path(name).read_text(), name))
