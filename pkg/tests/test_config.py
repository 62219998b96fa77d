import json
import math

import pytest

from pathplace.config import (
    ConfigError,
    default_config_path,
    dump_config,
    load_config,
    load_config_text,
    locate_line,
    parse_config,
    quantity,
)
from pathplace.manipulator import Orthoglide

from conftest import config_dict


@pytest.mark.parametrize("name", ["orthoglide", "gantry"])
def test_round_trip(name):
    cfg = load_config(default_config_path(name))
    again = parse_config(json.loads(json.dumps(dump_config(cfg))))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


def test_units_converted_to_si(orthoglide_cfg):
    cfg = orthoglide_cfg
    assert math.isclose(cfg.path.speed, 40 / 60)
    assert math.isclose(cfg.path.length, 0.06) and math.isclose(cfg.path.width, 0.03)
    assert math.isclose(cfg.manipulator.params["leg_length"], 0.31)
    assert math.isclose(cfg.placement.upper["phi"], math.pi / 2)
    assert math.isclose(cfg.motor[0]["inductance"], 8.5e-3)
    assert isinstance(cfg.build_model(), Orthoglide)


def test_case_study_values(orthoglide_cfg):
    f = orthoglide_cfg.build_forces()
    assert (f.f_feed, f.f_axial, f.f_radial) == (10.0, 25.0, 215.0)
    lim = orthoglide_cfg.build_limits()
    assert (lim.q_min, lim.q_max, lim.v_max, lim.tau_max) == (0.126, 0.383, 1.0, 1.274)
    pb = orthoglide_cfg.build_problem()
    assert pb.free_names == ["x_op", "y_op", "z_op", "phi"]


@pytest.mark.parametrize("node, dim, expected", [
    ({"value": 40, "unit": "m/min"}, "speed", 40 / 60),
    ({"value": 12, "unit": "mm"}, "length", 0.012),
    ({"value": 90, "unit": "deg"}, "angle", math.pi / 2),
    ({"value": [1, 2], "unit": "g"}, "mass", (1e-3, 2e-3)),
])
def test_quantity(node, dim, expected):
    assert quantity(node, dim, ()) == pytest.approx(expected)


@pytest.mark.parametrize("node, dim", [
    (40, "speed"),
    ({"value": 40}, "speed"),
    ({"value": 40, "unit": "furlong"}, "length"),
    ({"value": 40, "unit": "kg"}, "length"),
    ({"value": "x", "unit": "m"}, "length"),
    ({"value": True, "unit": "m"}, "length"),
])
def test_quantity_errors(node, dim):
    with pytest.raises(ConfigError):
        quantity(node, dim, ("a",))


def test_error_is_line_anchored():
    data = config_dict("gantry")
    data["path"]["speed"] = 1.0  # bare number where a unit is required
    text = json.dumps(data, indent=2)
    with pytest.raises(ConfigError) as exc:
        load_config_text(text)
    err = exc.value
    assert err.path == ("path", "speed")
    lines = text.splitlines()
    assert '"speed"' in lines[err.line - 1]
    assert str(err).startswith(f"line {err.line}: path.speed:")


def test_invalid_json_reports_line():
    with pytest.raises(ConfigError) as exc:
        load_config_text('{\n  "manipulator": {,\n}')
    assert exc.value.line == 2


def test_missing_section():
    data = config_dict("gantry")
    del data["forces"]
    with pytest.raises(ConfigError, match="forces"):
        parse_config(data)


@pytest.mark.parametrize("mutate", [
    lambda d: d["manipulator"].update(model="scara"),
    lambda d: d["manipulator"]["limits"].update(q_min={"value": 1, "unit": "m"}),
    lambda d: d["motor"].update(phases=2.5),
    lambda d: d["path"].update(type="circle"),
    lambda d: d["placement"].update(free=["x_op", "spin"]),
    lambda d: d["placement"]["bounds"]["x_op"].update(min=300),
    lambda d: d["forces"].update(feed=10),
])
def test_invalid_sections(mutate):
    data = config_dict("gantry")
    mutate(data)
    with pytest.raises(ConfigError):
        parse_config(data)


def test_locate_line():
    text = '{\n "a": {\n  "b": 1,\n  "c": 2\n }\n}'
    assert locate_line(text, ("a", "c")) == 4
    assert locate_line(text, ("zzz",)) is None


def test_per_axis_motors():
    data = config_dict("gantry")
    m = data["motor"]
    data["motor"] = [m, dict(m, resistance={"value": 4, "unit": "ohm"}), m]
    cfg = parse_config(data)
    motors = cfg.build_motors()
    assert [x.resistance for x in motors] == [2.9, 4.0, 2.9]
    assert parse_config(json.loads(json.dumps(dump_config(cfg)))) == cfg


def test_polyline_path():
    data = config_dict("gantry")
    data["path"] = {
        "type": "polyline",
        "waypoints": {"value": [0, 0, 0, 40, 0, 0, 40, 30, 0], "unit": "mm"},
        "speed": {"value": 1, "unit": "m/s"},
        "sample_dt": {"value": 1, "unit": "ms"},
    }
    cfg = parse_config(data)
    assert math.isclose(cfg.build_path().length, 0.07)
