import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ripplesim import (GridPlant, ScenarioError, WaterPlant, load_scenario,
                       save_scenario)
from ripplesim.scenario_io import (bundled_scenario_path, scenario_from_dict,
                                   scenario_to_dict)

MINIMAL_LINEAR = {
    "schema": "ripplesim-scenario/1",
    "plant": {
        "type": "linear",
        "labels": ["a", "b"],
        "sensitivity": [[1.0, 1.0]],
        "offset": [0.0],
        "u_lower": [0.0, 0.0],
        "u_upper": [0.5, 1.0],
        "y_lower": [1.0],
        "measured": ["a"],
    },
    "comm_graph": {"edges": [["a", "b"]]},
    "gains": {"eta1": 1.0, "eta2": 0.5, "eta3": 1.0},
    "initial": {"u0": [0.0, 0.0]},
    "run": {"budget": 500},
}


def test_bundled_scenarios_load():
    for name in ("pjm5", "wds10", "twobus", "linear_cascade"):
        scenario = load_scenario(name)
        assert scenario.labels is not None
    assert bundled_scenario_path("pjm5").is_file()


def test_power_scenario_units_and_labels():
    scenario = load_scenario("pjm5")
    plant = scenario.plant
    assert isinstance(plant, GridPlant)
    assert plant.grid.generators == (0, 1)
    assert plant.grid.loads == (2, 3, 4)
    # -98.61 MVAr on a 100 MVA base
    assert_allclose(scenario.u0[2], -0.9861)
    assert_allclose(plant.u_upper[2] - plant.u_lower[2], 0.1)
    assert_allclose(plant.y_lower, [0.94, 0.94, 0.94])


def test_water_scenario_roles():
    scenario = load_scenario("wds10")
    plant = scenario.plant
    assert isinstance(plant, WaterPlant)
    assert plant.model.pressure_nodes == (0,)
    assert plant.measured_nodes == tuple(range(2, 10))
    assert_allclose(plant.y_lower, [10, 7, 10, 10, 5, 10, 10, 10])
    # inelastic consumer at node 6 (label "7")
    assert plant.u_lower[6] == plant.u_upper[6] == -200.0


def test_round_trip_preserves_scenario(tmp_path):
    scenario = load_scenario("wds10")
    out = tmp_path / "copy.json"
    save_scenario(scenario, out)
    again = load_scenario(out)
    assert scenario_to_dict(scenario) == scenario_to_dict(again)
    assert_allclose(again.u0, scenario.u0)
    assert again.labels == scenario.labels
    assert len(again.disruptions) == len(scenario.disruptions)


def test_dict_scenario_runs():
    from ripplesim import run

    scenario = scenario_from_dict(json.loads(json.dumps(MINIMAL_LINEAR)))
    outcome, records = run(scenario)
    assert outcome.status == "converged"


def test_unknown_label_rejected():
    doc = json.loads(json.dumps(MINIMAL_LINEAR))
    doc["comm_graph"]["edges"] = [["a", "zz"]]
    with pytest.raises(ScenarioError, match="zz"):
        scenario_from_dict(doc)


def test_bad_schema_rejected():
    doc = json.loads(json.dumps(MINIMAL_LINEAR))
    doc["schema"] = "something-else"
    with pytest.raises(ScenarioError, match="schema"):
        scenario_from_dict(doc)


def test_missing_section_pinpointed():
    doc = json.loads(json.dumps(MINIMAL_LINEAR))
    del doc["plant"]["u_upper"]
    with pytest.raises(ScenarioError, match="u_upper"):
        scenario_from_dict(doc)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"schema": "ripplesim-scenario/1",,}')
    with pytest.raises(ScenarioError, match=r":1:"):
        load_scenario(path)


def test_mixed_auto_gains_rejected():
    doc = json.loads(json.dumps(MINIMAL_LINEAR))
    doc["gains"] = {"eta1": 1.0, "eta2": "auto", "eta3": 1.0}
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_pump_direction_survives_label_order():
    # pump declared from a later label into an earlier one keeps its boost
    doc = {
        "schema": "ripplesim-scenario/1",
        "plant": {
            "type": "water",
            "nodes": [
                {"label": "sink", "role": "consumer",
                 "injection": {"initial": -100.0, "min": -100.0,
                               "max": -100.0},
                 "pressure_min": 0.0},
                {"label": "mid", "role": "junction"},
                {"label": "src", "role": "reservoir",
                 "pressure": {"initial": 5.0, "min": 0.0, "max": 5.0}},
            ],
            "edges": [
                {"from": "src", "to": "mid", "kind": "pipe",
                 "coefficient": 1e-4},
                {"from": "mid", "to": "sink", "kind": "pump", "gain": 20.0},
            ],
        },
        "comm_graph": {"edges": [["src", "mid"], ["mid", "sink"]]},
        "gains": {"eta1": 1.0, "eta2": 0.1, "eta3": 1.0},
        "run": {},
    }
    scenario = scenario_from_dict(doc)
    from ripplesim import solve_network

    sol = solve_network(scenario.u0, scenario.plant.model)
    # boost from "mid" (index 1) into "sink" (index 0): 20 m rise
    assert_allclose(sol.pressures[0] - sol.pressures[1], 20.0, atol=1e-6)
