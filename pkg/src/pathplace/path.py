"""Tool paths, constant-feed sampling and localisation in the base frame.

A path is an ordered polyline in the path frame. Each segment is traversed
at constant speed and sampled on its own, so the corner point appears twice:
once closing segment ``k`` and once opening segment ``k + 1``. Those two
samples share a timestamp and differ only in velocity (and force).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .frames import Placement, placement_to_transform, transform_point, transform_vector

FRAME_PATH = "Fp"
FRAME_BASE = "Fb"


class InvalidPathError(ValueError):
    pass


class FrameMismatchError(ValueError):
    pass


class FeedDirectionError(ValueError):
    pass


@dataclass(frozen=True)
class PolylinePath:
    waypoints: np.ndarray  # (K, 3) meters, in the path frame

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 3 or len(w) < 2:
            raise InvalidPathError("a polyline needs at least two 3-D waypoints")
        if not np.all(np.isfinite(w)):
            raise InvalidPathError("non-finite waypoint")
        seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
        if np.any(seg <= 0.0):
            raise InvalidPathError("zero-length segment in polyline")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    def to_polyline(self) -> "PolylinePath":
        return self

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())


@dataclass(frozen=True)
class RectPath:
    """Rectangle of length ``length`` along X_p and width ``width`` along Y_p,
    centred on the path-frame origin, traversed A -> B -> C -> D -> A."""

    length: float
    width: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0) or not (
            math.isfinite(self.length) and math.isfinite(self.width)
        ):
            raise InvalidPathError(f"degenerate rectangle L={self.length}, W={self.width}")

    def corners(self) -> np.ndarray:
        hl, hw = 0.5 * self.length, 0.5 * self.width
        return np.array([
            [-hl, -hw, 0.0],  # A
            [hl, -hw, 0.0],   # B
            [hl, hw, 0.0],    # C
            [-hl, hw, 0.0],   # D
        ])

    def to_polyline(self) -> PolylinePath:
        c = self.corners()
        return PolylinePath(np.vstack([c, c[:1]]))

    @property
    def length_total(self) -> float:
        return 2.0 * (self.length + self.width)


@dataclass(frozen=True)
class FeedSpec:
    speed: float  # m/s
    sample_dt: float  # s

    def __post_init__(self):
        if not (self.speed > 0 and math.isfinite(self.speed)):
            raise InvalidPathError(f"feed speed must be positive, got {self.speed}")
        if not (self.sample_dt > 0 and math.isfinite(self.sample_dt)):
            raise InvalidPathError(f"sample_dt must be positive, got {self.sample_dt}")


@dataclass(frozen=True)
class CuttingForces:
    f_feed: float = 0.0
    f_axial: float = 0.0
    f_radial: float = 0.0
    # sign flags for the direction conventions (see attach_cutting_forces)
    feed_sign: float = 1.0
    axial_sign: float = 1.0
    radial_sign: float = 1.0

    def __post_init__(self):
        vals = (self.f_feed, self.f_axial, self.f_radial)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("cutting forces must be finite")
        for s in (self.feed_sign, self.axial_sign, self.radial_sign):
            if s not in (1.0, -1.0):
                raise ValueError("sign flags must be +1 or -1")

    @property
    def is_zero(self) -> bool:
        return self.f_feed == 0 and self.f_axial == 0 and self.f_radial == 0


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    external_force: np.ndarray
    frame: str
    segment: int


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory stored column-wise.

    ``segment[k]`` is the index of the path segment sample ``k`` belongs to.
    Timestamps are strictly increasing inside a segment and repeat at corners.
    """

    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    external_force: np.ndarray
    segment: np.ndarray
    frame: str

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k) -> TrajectorySample:
        return TrajectorySample(
            float(self.t[k]), self.position[k], self.velocity[k],
            self.acceleration[k], self.external_force[k], self.frame, int(self.segment[k]),
        )

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    def segment_slices(self) -> list[slice]:
        """Contiguous index ranges, one per path segment."""
        edges = np.flatnonzero(np.diff(self.segment)) + 1
        bounds = np.concatenate([[0], edges, [len(self.segment)]])
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def sample_path(path, feed: FeedSpec) -> Trajectory:
    """Sample ``path`` at constant ``feed.speed``.

    Each segment gets ``n = ceil(len / (speed * dt))`` equal intervals, so the
    spacing never exceeds ``dt`` and the last sample lands exactly on the corner.
    """
    poly = path.to_polyline()
    w = poly.waypoints
    t_start = 0.0
    ts, ps, vs, segs = [], [], [], []
    for k in range(len(w) - 1):
        a, b = w[k], w[k + 1]
        seg_len = float(np.linalg.norm(b - a))
        if feed.sample_dt > seg_len / (2.0 * feed.speed):
            raise InvalidPathError(
                f"sample_dt {feed.sample_dt} s too coarse for a {seg_len} m segment at {feed.speed} m/s"
            )
        n = max(1, math.ceil(seg_len / (feed.speed * feed.sample_dt) - 1e-9))
        u = np.linspace(0.0, 1.0, n + 1)
        direction = (b - a) / seg_len
        pos = a + np.outer(u, b - a)
        pos[-1] = b
        duration = seg_len / feed.speed
        ts.append(t_start + u * duration)
        ps.append(pos)
        vs.append(np.tile(direction * feed.speed, (n + 1, 1)))
        segs.append(np.full(n + 1, k))
        t_start += duration
    t = np.concatenate(ts)
    position = np.vstack(ps)
    velocity = np.vstack(vs)
    return Trajectory(
        t=t,
        position=position,
        velocity=velocity,
        acceleration=np.zeros_like(position),
        external_force=np.zeros_like(position),
        segment=np.concatenate(segs),
        frame=FRAME_PATH,
    )


def localize_trajectory(traj: Trajectory, placement: Placement) -> Trajectory:
    if traj.frame != FRAME_PATH:
        raise FrameMismatchError(f"expected a path-frame trajectory, got frame {traj.frame!r}")
    T = placement_to_transform(placement)
    return replace(
        traj,
        position=transform_point(T, traj.position),
        velocity=transform_vector(T, traj.velocity),
        acceleration=transform_vector(T, traj.acceleration),
        external_force=transform_vector(T, traj.external_force),
        frame=FRAME_BASE,
    )


def cutting_force_directions(velocity, need_radial: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit feed, axial and radial directions for base-frame velocities.

    feed = v/|v|, axial = -Z_b (tool axis pointing down), radial = Z_b x feed
    normalised. A velocity parallel to Z_b leaves the radial direction
    undefined and raises unless ``need_radial`` is false, in which case a
    zero vector stands in for it.
    """
    v = np.atleast_2d(np.asarray(velocity, dtype=float))
    speed = np.linalg.norm(v, axis=1)
    if np.any(speed <= 0.0):
        raise FeedDirectionError("zero velocity sample: feed direction undefined")
    feed = v / speed[:, None]
    z = np.array([0.0, 0.0, 1.0])
    radial = np.cross(z, feed)
    rn = np.linalg.norm(radial, axis=1)
    degenerate = rn < 1e-12
    if need_radial and np.any(degenerate):
        raise FeedDirectionError("feed along Z_b: radial direction undefined")
    radial = np.divide(radial, rn[:, None], out=np.zeros_like(radial), where=~degenerate[:, None])
    axial = np.tile(-z, (len(v), 1))
    return feed, axial, radial


def attach_cutting_forces(traj: Trajectory, forces: CuttingForces) -> Trajectory:
    """Set the machining reaction acting on the end-effector at every sample.

    F = f_feed * (-feed) + f_axial * (-Z_b) + f_radial * (Z_b x feed),
    each term multiplied by its sign flag.
    """
    if traj.frame != FRAME_BASE:
        raise FrameMismatchError("cutting forces are resolved in the base frame")
    if forces.is_zero:
        return replace(traj, external_force=np.zeros_like(traj.position))
    feed, axial, radial = cutting_force_directions(traj.velocity, need_radial=forces.f_radial != 0)
    F = (
        -forces.feed_sign * forces.f_feed * feed
        + forces.axial_sign * forces.f_axial * axial
        + forces.radial_sign * forces.f_radial * radial
    )
    return replace(traj, external_force=F)
