import json
from dataclasses import replace

import pytest
from hypothesis import settings

from pathplace.config import default_config_path, load_config
from pathplace.manipulator import ActuatorLimits, Gantry, GantryParams
from pathplace.motor import MotorParams
from pathplace.path import CuttingForces, FeedSpec, RectPath
from pathplace.placement import PlacementProblem

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

MILLING_FORCES = CuttingForces(f_feed=10.0, f_axial=25.0, f_radial=215.0)


def config_dict(name: str) -> dict:
    return json.loads(default_config_path(name).read_text())


def write_config(tmp_path, data: dict, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


@pytest.fixture(scope="session")
def orthoglide_cfg():
    return load_config(default_config_path("orthoglide"))


@pytest.fixture(scope="session")
def gantry_cfg():
    return load_config(default_config_path("gantry"))


@pytest.fixture(scope="session")
def orthoglide_problem(orthoglide_cfg):
    return orthoglide_cfg.build_problem()


def gantry_problem(
    slider=(2.0, 3.0, 1.5),
    platform=1.0,
    gravity_axis=2,
    forces=MILLING_FORCES,
    motors=None,
    size=(0.1, 0.05),
    speed=1.0,
    dt=1e-3,
    **kw,
) -> PlacementProblem:
    return PlacementProblem(
        model=Gantry(GantryParams(tuple(slider), platform, gravity_axis)),
        limits=ActuatorLimits(-0.5, 0.5, 2.0, 5.0),
        motors=motors or MotorParams(),
        path=RectPath(*size),
        feed=FeedSpec(speed, dt),
        forces=forces,
        **kw,
    )


def anisotropic_gantry(**kw) -> PlacementProblem:
    """Gantry whose energy depends on phi only, with a single interior minimum."""
    m = MotorParams()
    return gantry_problem(
        motors=(replace(m, resistance=4.0), replace(m, resistance=2.0), m),
        mask=(False, False, False, True, False, False),
        lower=(0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        upper=(0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        **kw,
    )


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str, seconds: float) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail} ({seconds:.2f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
