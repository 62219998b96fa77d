"""Placement of the path frame in the manipulator base frame.

Angles follow the Z-Y-X layout: ``R = Rz(phi) @ Ry(theta) @ Rx(psi)``,
written out entrywise in :func:`placement_to_transform`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidPlacementError(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class Placement:
    x_op: float = 0.0
    y_op: float = 0.0
    z_op: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise InvalidPlacementError(f"non-finite placement: {vals.tolist()}")
        for name in ("phi", "theta", "psi"):
            object.__setattr__(self, name, wrap_angle(float(getattr(self, name))))
        for name in ("x_op", "y_op", "z_op"):
            object.__setattr__(self, name, float(getattr(self, name)))

    FIELDS = ("x_op", "y_op", "z_op", "phi", "theta", "psi")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS], dtype=float)

    @classmethod
    def from_array(cls, x) -> "Placement":
        x = np.asarray(x, dtype=float)
        if x.shape != (6,):
            raise InvalidPlacementError(f"expected 6 values, got shape {x.shape}")
        return cls(*x.tolist())

    @property
    def origin(self) -> np.ndarray:
        return np.array([self.x_op, self.y_op, self.z_op])


@dataclass(frozen=True)
class Transform:
    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Transform":
        Rt = self.rotation.T
        return Transform(Rt, -Rt @ self.translation)


def placement_to_transform(p: Placement) -> Transform:
    cf, sf = math.cos(p.phi), math.sin(p.phi)
    ct, st = math.cos(p.theta), math.sin(p.theta)
    cs, ss = math.cos(p.psi), math.sin(p.psi)
    R = np.array([
        [cf * ct, cf * st * ss - sf * cs, cf * st * cs + sf * ss],
        [sf * ct, sf * st * ss + cf * cs, sf * st * cs - cf * ss],
        [-st, ct * ss, ct * cs],
    ])
    return Transform(R, p.origin)


def transform_point(t: Transform, p) -> np.ndarray:
    """Map point(s) given in the path frame to the base frame.

    Accepts a single 3-vector or an (N, 3) array.
    """
    p = np.asarray(p, dtype=float)
    return p @ t.rotation.T + t.translation


def transform_vector(t: Transform, v) -> np.ndarray:
    # free vectors (velocity, acceleration, force): rotate only
    v = np.asarray(v, dtype=float)
    return v @ t.rotation.T
