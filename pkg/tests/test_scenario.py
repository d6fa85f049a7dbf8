import copy
import json

import numpy as np
import pytest

from qswitch.errors import InfeasibleDesignError, ScenarioError
from qswitch.plant import verify_adt
from qswitch.scenario import (bundled_path, load_scenario, parse_json, scenario_from_document,
                              scenario_to_document)


@pytest.fixture
def doc():
    return json.loads(bundled_path().read_text())


def test_bundled_roundtrip(doc):
    assert scenario_to_document(scenario_from_document(doc)) == doc


def test_roundtrip_optional_fields(doc):
    doc["quantizer"]["Delta0"] = 0.02
    doc["sim"]["mu_floor"] = 1.5
    doc["sim"]["seed"] = 4
    del doc["name"]
    doc["signal"] = {"generate": {"tau_a": 3.0, "N0": 2, "horizon": 30, "seed": 9}}
    sc = scenario_from_document(copy.deepcopy(doc))
    assert scenario_to_document(sc) == doc
    assert sc.inputs.quantizer.dead_zone == 0.02 and sc.mu_floor == 1.5
    assert verify_adt(sc.signal, 2, 3.0, 30).passed


def test_bundled_contents(benchmark):
    assert benchmark.signal.switches == ((3.5, "2"), (7.0, "1"), (20.0, "2"))
    assert np.array_equal(benchmark.x0, [5.0, -10.0])
    assert benchmark.inputs.lyapunov_form == "transposed"
    assert benchmark.inputs.quantizer.dead_zone == pytest.approx(0.01)


def test_parse_error_location():
    with pytest.raises(ScenarioError, match="line 2"):
        parse_json('{\n  "plant": ,\n}')


def test_schema_error_names_field(doc):
    doc["design"]["kappa"] = -1
    with pytest.raises(ScenarioError, match="design/kappa"):
        scenario_from_document(doc)


def test_missing_block(doc):
    del doc["sim"]
    with pytest.raises(ScenarioError):
        scenario_from_document(doc)


def test_shape_mismatch(doc):
    doc["plant"]["modes"]["2"]["B"] = [[0], [1], [2]]
    with pytest.raises(ScenarioError):
        scenario_from_document(doc)


def test_unknown_mode_in_signal(doc):
    doc["signal"]["switches"][0][1] = "5"
    with pytest.raises(ScenarioError):
        scenario_from_document(doc)


def test_infeasible_range_propagates(doc):
    doc["quantizer"]["M"] = 0.05
    with pytest.raises(InfeasibleDesignError):
        scenario_from_document(doc)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "none.json")
