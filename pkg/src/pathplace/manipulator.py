"""Manipulator models: inverse geometric, kinematic and dynamic models.

Two models share one interface (``igm``, ``ikm``, ``ikm_accel``, ``idm``):

* :class:`Gantry` - a Cartesian XYZ machine, q = p. Used as an exact oracle.
* :class:`Orthoglide` - a translational Delta-type PKM with three orthogonal
  prismatic actuators. Leg ``i`` joins the slider at ``(q_i + offset_i) e_i``
  to the platform point ``p`` with a rod of fixed length, so

      (q_i + offset_i - p_i)^2 + p_j^2 + p_k^2 = leg_length^2

  and the elbow-out root gives ``q_i = p_i + sqrt(l^2 - p_j^2 - p_k^2) - offset_i``.

All functions are vectorised over samples: positions are (N, 3) arrays.
Actuator forces are link-side (N); motor torques come from the motor
transmission, see :mod:`pathplace.motor`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81

# the other two axes for each actuator axis
_OTHERS = ((1, 2), (0, 2), (0, 1))


class OutOfWorkspaceError(ValueError):
    pass


class NearSingularityError(ValueError):
    pass


@dataclass(frozen=True)
class ActuatorLimits:
    q_min: float
    q_max: float
    v_max: float
    tau_max: float

    def __post_init__(self):
        if not self.q_min < self.q_max:
            raise ValueError(f"q_min ({self.q_min}) must be below q_max ({self.q_max})")
        if not (self.v_max > 0 and self.tau_max > 0):
            raise ValueError("v_max and tau_max must be positive")


# Orthoglide actuator bounds: rho_min, rho_max, v_max, tau_max
ORTHOGLIDE_LIMITS = ActuatorLimits(q_min=0.126, q_max=0.383, v_max=1.00, tau_max=1.274)


@dataclass(frozen=True)
class ActuatorTrace:
    """Actuator-space time series, arrays of shape (N, 3)."""

    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    force: np.ndarray
    tau: np.ndarray | None = None


@dataclass(frozen=True)
class ConstraintReport:
    """Worst slack per constraint class; negative means violated.

    Margins are in the constraint's own units (m, m/s, N m).
    """

    displacement_margin: float
    velocity_margin: float
    torque_margin: float

    @property
    def margins(self) -> dict[str, float]:
        return {
            "displacement": self.displacement_margin,
            "velocity": self.velocity_margin,
            "torque": self.torque_margin,
        }

    @property
    def violations(self) -> dict[str, bool]:
        return {k: v < 0.0 for k, v in self.margins.items()}

    @property
    def feasible(self) -> bool:
        return all(v >= 0.0 for v in self.margins.values())


def check_limits(limits: ActuatorLimits, q, q_dot, tau) -> ConstraintReport:
    q, q_dot, tau = (np.asarray(a, dtype=float) for a in (q, q_dot, tau))
    disp = min(float(np.min(q - limits.q_min)), float(np.min(limits.q_max - q)))
    vel = float(np.min(limits.v_max - np.abs(q_dot)))
    trq = float(np.min(limits.tau_max - np.abs(tau)))
    return ConstraintReport(disp, vel, trq)


class Manipulator:
    """Common pieces of the inverse models."""

    name = "base"
    max_condition = 1e6

    def igm(self, p) -> np.ndarray:
        raise NotImplementedError

    def jacobian_inverse(self, p) -> np.ndarray:
        """dq/dp at each position, shape (N, 3, 3)."""
        raise NotImplementedError

    def ikm(self, p, v) -> np.ndarray:
        p, v = _as2d(p), _as2d(v)
        Jinv = self.jacobian_inverse(p)
        self._check_conditioning(Jinv)
        return np.einsum("nij,nj->ni", Jinv, v)

    def ikm_accel(self, p, v, a) -> np.ndarray:
        raise NotImplementedError

    def idm(self, p, v, a, external_force) -> ActuatorTrace:
        raise NotImplementedError

    def actuator_trace(self, p, v, a, external_force) -> ActuatorTrace:
        return self.idm(p, v, a, external_force)

    def _check_conditioning(self, Jinv):
        cond = np.linalg.cond(Jinv)
        bad = ~np.isfinite(cond) | (cond > self.max_condition)
        if np.any(bad):
            worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
            raise NearSingularityError(f"Jacobian condition number {worst:.3g} exceeds cap")


def _as2d(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class GantryParams:
    slider_mass: tuple[float, float, float] = (0.0, 0.0, 0.0)
    platform_mass: float = 0.0
    gravity_axis: int | None = None  # 0, 1, 2 or None; gravity pulls toward -axis

    def __post_init__(self):
        if len(self.slider_mass) != 3 or min(self.slider_mass) < 0 or self.platform_mass < 0:
            raise ValueError("gantry masses must be three non-negative slider masses and a platform mass")
        if self.gravity_axis not in (None, 0, 1, 2):
            raise ValueError("gravity_axis must be 0, 1, 2 or None")


@dataclass(frozen=True)
class Gantry(Manipulator):
    params: GantryParams = field(default_factory=GantryParams)
    name = "gantry"

    def igm(self, p):
        return _as2d(p).copy()

    def jacobian_inverse(self, p):
        return np.broadcast_to(np.eye(3), (len(_as2d(p)), 3, 3)).copy()

    def ikm(self, p, v):
        return _as2d(v).copy()

    def ikm_accel(self, p, v, a):
        return _as2d(a).copy()

    def moving_mass(self) -> np.ndarray:
        return np.asarray(self.params.slider_mass, dtype=float) + self.params.platform_mass

    def idm(self, p, v, a, external_force):
        p, v, a, fe = (_as2d(x) for x in (p, v, a, external_force))
        m = self.moving_mass()
        force = m * a - fe
        g = self.params.gravity_axis
        if g is not None:
            force[:, g] += m[g] * GRAVITY
        return ActuatorTrace(q=p.copy(), q_dot=v.copy(), q_ddot=a.copy(), force=force)


@dataclass(frozen=True)
class OrthoglideParams:
    leg_length: float = 0.31
    foot_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    slider_mass: float = 1.0
    platform_mass: float = 1.0
    leg_mass: float = 0.5
    gravity: bool = True
    # workspace anchor points in the base frame (m)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    center: tuple[float, float, float] = (-0.027, -0.027, -0.027)
    q_plus: tuple[float, float, float] = (0.073, 0.073, 0.073)
    q_minus: tuple[float, float, float] = (-0.127, -0.127, -0.127)
    workspace_size: float = 0.2

    def __post_init__(self):
        if not self.leg_length > 0:
            raise ValueError("leg_length must be positive")
        if min(self.slider_mass, self.platform_mass, self.leg_mass) < 0:
            raise ValueError("masses must be non-negative")
        if len(self.foot_offset) != 3:
            raise ValueError("foot_offset needs three entries")

    @property
    def joint_side_mass(self) -> float:
        return self.slider_mass + 0.5 * self.leg_mass

    @property
    def platform_side_mass(self) -> float:
        return self.platform_mass + 1.5 * self.leg_mass


@dataclass(frozen=True)
class Orthoglide(Manipulator):
    params: OrthoglideParams = field(default_factory=OrthoglideParams)
    name = "orthoglide"

    def _radicals(self, p) -> np.ndarray:
        """sqrt(l^2 - p_j^2 - p_k^2) per actuator, shape (N, 3)."""
        p2 = p * p
        s = p2.sum(axis=1, keepdims=True)
        rad = self.params.leg_length ** 2 - (s - p2)
        if np.any(rad <= 0.0):
            raise OutOfWorkspaceError("point out of reach of a leg (negative radicand)")
        return np.sqrt(rad)

    def igm(self, p):
        p = _as2d(p)
        return p + self._radicals(p) - np.asarray(self.params.foot_offset, dtype=float)

    def jacobian_inverse(self, p):
        p = _as2d(p)
        r = self._radicals(p)
        # dq_i/dp_i = 1, dq_i/dp_j = -p_j / r_i
        Jinv = -p[:, None, :] / r[:, :, None]
        idx = np.arange(3)
        Jinv[:, idx, idx] = 1.0
        return Jinv

    def forward(self, q, guess=None, tol=1e-13, max_iter=50) -> np.ndarray:
        """Solve the leg constraints for the platform position (Newton)."""
        q = _as2d(q)
        p = np.zeros_like(q) if guess is None else _as2d(guess).copy()
        s = q + np.asarray(self.params.foot_offset, dtype=float)
        l2 = self.params.leg_length ** 2
        for _ in range(max_iter):
            res = (s - p) ** 2 + (p * p).sum(axis=1, keepdims=True) - p * p - l2
            # d res_i / d p_i = -2 (s_i - p_i); d res_i / d p_j = 2 p_j
            J = 2.0 * np.broadcast_to(p[:, None, :], (len(p), 3, 3)).copy()
            idx = np.arange(3)
            J[:, idx, idx] = -2.0 * (s - p)
            step = np.linalg.solve(J, res[..., None])[..., 0]
            p = p - step
            if np.max(np.abs(step)) < tol:
                break
        return p

    def ikm_accel(self, p, v, a):
        p, v, a = _as2d(p), _as2d(v), _as2d(a)
        r = self._radicals(p)
        qdd = np.empty_like(p)
        for i, (j, k) in enumerate(_OTHERS):
            r_dot = -(p[:, j] * v[:, j] + p[:, k] * v[:, k]) / r[:, i]
            r_ddot = -(v[:, j] ** 2 + p[:, j] * a[:, j] + v[:, k] ** 2 + p[:, k] * a[:, k]) / r[:, i] \
                - r_dot ** 2 / r[:, i]
            qdd[:, i] = a[:, i] + r_ddot
        return qdd

    def idm(self, p, v, a, external_force):
        """Lumped-mass inverse dynamics.

        Slider plus half of each leg ride the actuator; the platform plus the
        other leg halves are projected to the actuators through J^-T (virtual
        work). Gravity pulls along -Z_b on the platform and on the Z slider.
        """
        p, v, a, fe = (_as2d(x) for x in (p, v, a, external_force))
        pr = self.params
        q = self.igm(p)
        Jinv = self.jacobian_inverse(p)
        self._check_conditioning(Jinv)
        q_dot = np.einsum("nij,nj->ni", Jinv, v)
        q_ddot = self.ikm_accel(p, v, a)

        g = np.array([0.0, 0.0, GRAVITY if pr.gravity else 0.0])
        platform_load = pr.platform_side_mass * (a + g) - fe
        # f_q = J^-T f_p  with  J^-1 = dq/dp  ->  (dq/dp)^T f_q = f_p
        JinvT = np.transpose(Jinv, (0, 2, 1))
        force = np.linalg.solve(JinvT, platform_load[..., None])[..., 0]
        force += pr.joint_side_mass * q_ddot
        force[:, 2] += pr.joint_side_mass * g[2]
        return ActuatorTrace(q=q, q_dot=q_dot, q_ddot=q_ddot, force=force)


def make_model(name: str, **params) -> Manipulator:
    if name == "gantry":
        return Gantry(GantryParams(**params))
    if name == "orthoglide":
        return Orthoglide(OrthoglideParams(**params))
    raise ValueError(f"unknown manipulator model {name!r}")
