"""Energy objective over path placements, its optimisation and grid sweeps."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import motor as mt
from .frames import Placement
from .manipulator import (
    ActuatorLimits,
    ActuatorTrace,
    ConstraintReport,
    Manipulator,
    NearSingularityError,
    OutOfWorkspaceError,
    check_limits,
)
from .path import (
    CuttingForces,
    FeedSpec,
    Trajectory,
    attach_cutting_forces,
    localize_trajectory,
    sample_path,
)

log = logging.getLogger(__name__)

# failure reasons
OUT_OF_WORKSPACE = "out-of-workspace"
NEAR_SINGULAR = "near-singular"
LIMIT_VIOLATION = "limit-violation"
NONE = "none"

# (theta, psi) fixed: the planar case study
DEFAULT_MASK = (True, True, True, True, False, False)

VARIABLE_NAMES = Placement.FIELDS


class NoFeasibleSolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlacementProblem:
    model: Manipulator
    limits: ActuatorLimits
    motors: tuple  # one MotorParams per actuator
    path: object  # RectPath or PolylinePath
    feed: FeedSpec
    forces: CuttingForces = field(default_factory=CuttingForces)
    mask: tuple = DEFAULT_MASK
    lower: tuple = (-0.1, -0.1, -0.1, -math.pi, -math.pi, -math.pi)
    upper: tuple = (0.1, 0.1, 0.1, math.pi, math.pi, math.pi)
    fixed: Placement = field(default_factory=Placement)
    penalty_weight: float = 1e6
    death_penalty: float = 1e9

    def __post_init__(self):
        if isinstance(self.motors, mt.MotorParams):
            object.__setattr__(self, "motors", (self.motors,) * 3)
        if len(self.motors) != 3:
            raise ValueError("need one motor per actuator")
        if len(self.mask) != 6 or not any(self.mask):
            raise ValueError("mask needs six flags with at least one free variable")
        object.__setattr__(self, "mask", tuple(bool(m) for m in self.mask))
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != (6,) or hi.shape != (6,):
            raise ValueError("bounds must have six entries")
        free = np.asarray(self.mask)
        if not (np.all(np.isfinite(lo[free])) and np.all(np.isfinite(hi[free]))):
            raise ValueError("bounds of free variables must be finite")
        if np.any(lo[free] > hi[free]):
            raise ValueError("lower bound above upper bound")

    @cached_property
    def path_samples(self) -> Trajectory:
        return sample_path(self.path, self.feed)

    @property
    def free_index(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def free_names(self) -> list[str]:
        return [VARIABLE_NAMES[i] for i in self.free_index]

    @property
    def free_lower(self) -> np.ndarray:
        return np.asarray(self.lower, float)[self.free_index]

    @property
    def free_upper(self) -> np.ndarray:
        return np.asarray(self.upper, float)[self.free_index]

    def placement_from_free(self, x) -> Placement:
        full = self.fixed.as_array()
        full[self.free_index] = np.asarray(x, dtype=float)
        return Placement.from_array(full)

    def free_values(self, placement: Placement) -> np.ndarray:
        return placement.as_array()[self.free_index]


@dataclass(frozen=True)
class PipelineResult:
    trajectory: Trajectory
    actuators: ActuatorTrace
    electric: tuple
    energy: mt.EnergyReport
    constraints: ConstraintReport


@dataclass(frozen=True)
class EvaluationOutcome:
    placement: Placement
    feasible: bool
    energy: float | None
    report: mt.EnergyReport | None
    constraints: ConstraintReport | None
    reason: str
    detail: str = ""
    pipeline: PipelineResult | None = None

    def to_dict(self) -> dict:
        d = {
            "placement": dict(zip(VARIABLE_NAMES, self.placement.as_array().tolist())),
            "feasible": self.feasible,
            "failure_reason": self.reason,
            "energy_J": self.energy,
        }
        if self.detail:
            d["detail"] = self.detail
        if self.report is not None:
            d["energy_report"] = self.report.to_dict()
        if self.constraints is not None:
            d["margins"] = self.constraints.margins
        return d


def run_pipeline(problem: PlacementProblem, placement: Placement) -> PipelineResult:
    """Localise the path, run the inverse models, convert to electric energy.

    Raises OutOfWorkspaceError / NearSingularityError when the trajectory
    cannot be followed at all.
    """
    traj = localize_trajectory(problem.path_samples, placement)
    traj = attach_cutting_forces(traj, problem.forces)
    act = problem.model.idm(traj.position, traj.velocity, traj.acceleration, traj.external_force)
    tau = np.column_stack([m.torque(act.force[:, i]) for i, m in enumerate(problem.motors)])
    act = ActuatorTrace(act.q, act.q_dot, act.q_ddot, act.force, tau)

    slices = traj.segment_slices()
    electric, reports = [], []
    for i, m in enumerate(problem.motors):
        tr = mt.electrify(m, tau[:, i], act.q_dot[:, i], traj.t, slices)
        electric.append(tr)
        reports.append(mt.integrate_energy(tr, traj.t, slices, phases=m.phases))
    energy = mt.total_energy(reports)
    constraints = check_limits(problem.limits, act.q, act.q_dot, tau)
    return PipelineResult(traj, act, tuple(electric), energy, constraints)


def evaluate(problem: PlacementProblem, placement: Placement, keep_pipeline=False) -> EvaluationOutcome:
    try:
        res = run_pipeline(problem, placement)
    except OutOfWorkspaceError as e:
        return EvaluationOutcome(placement, False, None, None, None, OUT_OF_WORKSPACE, str(e))
    except NearSingularityError as e:
        return EvaluationOutcome(placement, False, None, None, None, NEAR_SINGULAR, str(e))
    feasible = res.constraints.feasible
    return EvaluationOutcome(
        placement,
        feasible,
        res.energy.total,
        res.energy,
        res.constraints,
        NONE if feasible else LIMIT_VIOLATION,
        pipeline=res if keep_pipeline else None,
    )


def penalty(problem: PlacementProblem, constraints: ConstraintReport) -> float:
    """Quadratic penalty on limit violations, each normalised by its bound scale."""
    lim = problem.limits
    scales = {
        "displacement": lim.q_max - lim.q_min,
        "velocity": lim.v_max,
        "torque": lim.tau_max,
    }
    total = 0.0
    for k, margin in constraints.margins.items():
        total += (max(0.0, -margin) / scales[k]) ** 2
    return problem.penalty_weight * total


def objective_value(problem: PlacementProblem, outcome: EvaluationOutcome, sense: float = 1.0) -> float:
    if outcome.energy is None:
        return problem.death_penalty
    return sense * outcome.energy + penalty(problem, outcome.constraints)


@dataclass(frozen=True)
class OptimizerSettings:
    xatol: float = 1e-6  # simplex size, in box-normalised units
    fatol: float = 1e-9  # J
    max_evaluations: int = 2000
    initial_step: float = 0.05  # box-normalised

    def __post_init__(self):
        if not (self.xatol > 0 and self.fatol > 0 and self.max_evaluations > 0 and self.initial_step > 0):
            raise ValueError("optimizer settings must be positive")


@dataclass(frozen=True)
class StartRecord:
    start: list
    best: list | None
    energy: float | None
    evaluations: int
    status: str

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "best": self.best,
            "energy_J": self.energy,
            "evaluations": self.evaluations,
            "status": self.status,
        }


@dataclass(frozen=True)
class OptimizationResult:
    placement: Placement
    energy: float
    outcome: EvaluationOutcome
    evaluations: int
    iterations: int
    history: list
    termination: str
    best_start: int
    sense: str = "min"

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        x = self.placement.as_array().tolist()
        return {
            "sense": self.sense,
            "x_star": dict(zip(VARIABLE_NAMES, x)),
            "E_J": self.energy,
            "evaluations": self.evaluations,
            "iterations": self.iterations,
            "termination": self.termination,
            "best_start": self.best_start,
            "starts": [h.to_dict() for h in self.history],
        }


def _initial_simplex(u0: np.ndarray, step: float) -> np.ndarray:
    k = len(u0)
    sim = np.tile(u0, (k + 1, 1))
    for i in range(k):
        # step away from the nearer box face so the vertex stays inside
        sim[i + 1, i] += step if u0[i] <= 0.5 else -step
    return np.clip(sim, 0.0, 1.0)


def _local_search(problem, x0, settings, sense, evaluate_fn):
    lo, hi = problem.free_lower, problem.free_upper
    width = np.where(hi > lo, hi - lo, 1.0)
    best = {"f": math.inf, "x": None, "outcome": None}
    nfev = 0

    def to_x(u):
        return lo + np.clip(u, 0.0, 1.0) * width

    def f(u):
        nonlocal nfev
        nfev += 1
        x = to_x(u)
        out = evaluate_fn(problem.placement_from_free(x))
        if out.feasible and out.energy is not None:
            val = sense * out.energy
            if val < best["f"]:
                best.update(f=val, x=x.copy(), outcome=out)
        return objective_value(problem, out, sense)

    u0 = np.clip((np.asarray(x0, float) - lo) / width, 0.0, 1.0)
    res = minimize(
        f,
        u0,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * len(u0),
        options={
            "xatol": settings.xatol,
            "fatol": settings.fatol,
            "maxfev": settings.max_evaluations,
            "initial_simplex": _initial_simplex(u0, settings.initial_step),
        },
    )
    status = "converged" if res.status == 0 else "max-evaluations"
    return best, nfev, int(res.nit), status


def optimize(
    problem: PlacementProblem,
    starts: Sequence,
    settings: OptimizerSettings | None = None,
    maximize: bool = False,
    threads: int = 1,
    evaluate_fn: Callable | None = None,
) -> OptimizationResult:
    """Multi-start Nelder-Mead over the free placement variables.

    ``starts`` are Placements or free-variable vectors. Infeasible pipeline
    points get ``problem.death_penalty``; limit violations a quadratic penalty.
    The returned point is the best *feasible* point visited by any start;
    ties go to the lowest start index. ``maximize`` searches for the highest
    energy under the same constraints.
    """
    settings = settings or OptimizerSettings()
    if not starts:
        raise ValueError("need at least one start")
    evaluate_fn = evaluate_fn or (lambda pl: evaluate(problem, pl))
    sense = -1.0 if maximize else 1.0
    x0s = [
        problem.free_values(s) if isinstance(s, Placement) else np.asarray(s, float)
        for s in starts
    ]

    def run(x0):
        return _local_search(problem, x0, settings, sense, evaluate_fn)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            runs = list(pool.map(run, x0s))
    else:
        runs = [run(x0) for x0 in x0s]

    history, best_idx = [], None
    total_fev = total_it = 0
    for i, (best, nfev, nit, status) in enumerate(runs):
        total_fev += nfev
        total_it += nit
        ok = best["x"] is not None
        history.append(StartRecord(
            x0s[i].tolist(),
            best["x"].tolist() if ok else None,
            best["outcome"].energy if ok else None,
            nfev,
            status if ok else "no-feasible-point",
        ))
        if ok and (best_idx is None or best["f"] < runs[best_idx][0]["f"]):
            best_idx = i
    if best_idx is None:
        raise NoFeasibleSolutionError("no feasible placement found from any start")
    best, _, _, status = runs[best_idx]
    outcome = best["outcome"]
    return OptimizationResult(
        placement=outcome.placement,
        energy=outcome.energy,
        outcome=outcome,
        evaluations=total_fev,
        iterations=total_it,
        history=history,
        termination=status,
        best_start=best_idx,
        sense="max" if maximize else "min",
    )


@dataclass(frozen=True)
class GridAxis:
    min: float
    max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if self.min > self.max:
            raise ValueError("grid min above max")

    @property
    def count(self) -> int:
        return int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1

    def values(self) -> np.ndarray:
        return self.min + self.step * np.arange(self.count)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple  # one GridAxis per free variable, mask order

    @property
    def shape(self) -> tuple:
        return tuple(a.count for a in self.axes)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def nodes(self):
        return itertools.product(*(a.values() for a in self.axes))


def sweep(problem: PlacementProblem, grid: GridSpec, threads: int = 1) -> list[EvaluationOutcome]:
    """Evaluate every grid node, row-major over the free variables."""
    if len(grid.axes) != len(problem.free_index):
        raise ValueError(
            f"grid has {len(grid.axes)} axes but the problem has {len(problem.free_index)} free variables"
        )
    placements = [problem.placement_from_free(np.array(n)) for n in grid.nodes()]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda pl: evaluate(problem, pl), placements))
    return [evaluate(problem, pl) for pl in placements]


def percent_saving(e_min: float, e_max: float) -> float:
    if not (math.isfinite(e_min) and math.isfinite(e_max)):
        raise ValueError("energies must be finite")
    if e_max <= 0 or e_min < 0 or e_min > e_max:
        raise ValueError(f"need 0 <= e_min <= e_max and e_max > 0, got ({e_min}, {e_max})")
    return 100.0 * (e_max - e_min) / e_max
