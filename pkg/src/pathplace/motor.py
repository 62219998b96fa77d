"""Electrical model of brushless actuators and energy integration.

Per phase:  I = tau / K_t,  V_e = K_e * omega,
            P_J = R I^2,  P_L = L I dI/dt,  P_EM = V_e I.
The actuator draws ``phases * (P_J + P_L + P_EM)``.

Prismatic actuators are bridged to motor shafts through ``transmission_ratio``
(motor radians per meter): ``omega = q_dot * ratio`` and, by power balance,
``tau = force / ratio``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TERMS = ("joule", "inductive", "emf")


class InvalidTraceError(ValueError):
    pass


class InconsistentTraceError(ValueError):
    pass


@dataclass(frozen=True)
class MotorParams:
    k_t: float = 0.44  # N m / A
    k_e: float = 0.15  # V s / rad
    resistance: float = 2.9  # ohm
    inductance: float = 8.5e-3  # H
    phases: int = 3
    transmission_ratio: float = 209.0  # rad / m

    def __post_init__(self):
        if not self.k_t > 0:
            raise ValueError("k_t must be positive")
        if self.k_e < 0 or self.resistance < 0 or self.inductance < 0:
            raise ValueError("k_e, resistance and inductance must be non-negative")
        if int(self.phases) != self.phases or self.phases < 1:
            raise ValueError("phases must be a positive integer")
        if not self.transmission_ratio > 0:
            raise ValueError("transmission_ratio must be positive")
        vals = (self.k_t, self.k_e, self.resistance, self.inductance, self.transmission_ratio)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("motor parameters must be finite")

    def torque(self, force):
        return np.asarray(force, dtype=float) / self.transmission_ratio

    def omega(self, q_dot):
        return np.asarray(q_dot, dtype=float) * self.transmission_ratio


@dataclass(frozen=True)
class ElectricTrace:
    current: np.ndarray
    voltage: np.ndarray
    p_joule: np.ndarray
    p_inductive: np.ndarray
    p_emf: np.ndarray
    p_total: np.ndarray


@dataclass(frozen=True)
class EnergyReport:
    energy: np.ndarray  # per actuator, J
    total: float  # J
    breakdown: dict = field(default_factory=dict)  # term -> J (phase scaled)
    duration: float = 0.0  # s

    def to_dict(self) -> dict:
        return {
            "per_actuator_J": [float(e) for e in self.energy],
            "total_J": float(self.total),
            "breakdown_J": {k: float(v) for k, v in self.breakdown.items()},
            "duration_s": float(self.duration),
        }


def _segments(t: np.ndarray, segments) -> list[slice]:
    if segments is None:
        return [slice(0, len(t))]
    return list(segments)


def _check_times(t: np.ndarray, segments: list[slice]):
    for s in segments:
        ts = t[s]
        if len(ts) < 2:
            raise InvalidTraceError("each segment needs at least two samples")
        if not np.all(np.diff(ts) > 0):
            raise InvalidTraceError("timestamps must be strictly increasing within a segment")


def electrify(motor: MotorParams, tau, q_dot, t, segments=None) -> ElectricTrace:
    """Electric quantities for one actuator.

    ``tau`` is motor torque (N m), ``q_dot`` the actuator rate (m/s), ``t``
    the timestamps. ``segments`` is an optional list of slices; dI/dt is taken
    inside each slice only (central differences, one-sided at the ends) so
    current jumps at path corners are never differenced.
    """
    tau = np.asarray(tau, dtype=float)
    omega = motor.omega(q_dot)
    t = np.asarray(t, dtype=float)
    if not (tau.shape == omega.shape == t.shape) or tau.ndim != 1:
        raise InvalidTraceError("tau, q_dot and t must be 1-D arrays of equal length")
    segs = _segments(t, segments)
    _check_times(t, segs)

    current = tau / motor.k_t
    voltage = motor.k_e * omega
    di_dt = np.empty_like(current)
    for s in segs:
        di_dt[s] = np.gradient(current[s], t[s], edge_order=1)

    p_joule = motor.resistance * current ** 2
    p_inductive = motor.inductance * current * di_dt
    p_emf = voltage * current
    p_total = motor.phases * (p_joule + p_inductive + p_emf)
    return ElectricTrace(current, voltage, p_joule, p_inductive, p_emf, p_total)


def trapezoid_weights(t, segments=None) -> np.ndarray:
    """Weights ``w`` with ``w @ y`` equal to the segment-wise trapezoid rule."""
    t = np.asarray(t, dtype=float)
    w = np.zeros_like(t)
    for s in _segments(t, segments):
        h = np.diff(t[s])
        ws = np.zeros(len(h) + 1)
        ws[:-1] += 0.5 * h
        ws[1:] += 0.5 * h
        w[s] += ws
    return w


def trapezoid(y, t, segments=None) -> float:
    return float(trapezoid_weights(t, segments) @ np.asarray(y, dtype=float))


def integrate_energy(trace: ElectricTrace, t, segments=None, phases: int = 1) -> EnergyReport:
    """Energy drawn by one actuator: trapezoid rule on each segment, summed.

    ``phases`` only scales the per-term breakdown so that it adds up to the
    total; ``trace.p_total`` already carries the phase factor.
    """
    t = np.asarray(t, dtype=float)
    segs = _segments(t, segments)
    w = trapezoid_weights(t, segs)
    e = float(w @ trace.p_total)
    breakdown = {
        "joule": phases * float(w @ trace.p_joule),
        "inductive": phases * float(w @ trace.p_inductive),
        "emf": phases * float(w @ trace.p_emf),
    }
    duration = float(t[segs[-1]][-1] - t[segs[0]][0])
    return EnergyReport(np.array([e]), e, breakdown, duration)


def total_energy(reports, rtol: float = 1e-12) -> EnergyReport:
    reports = list(reports)
    if not reports:
        raise InconsistentTraceError("no actuator reports to combine")
    T = reports[0].duration
    for r in reports[1:]:
        if not math.isclose(r.duration, T, rel_tol=rtol, abs_tol=1e-15):
            raise InconsistentTraceError(f"trace durations differ: {T} vs {r.duration}")
    energy = np.concatenate([np.atleast_1d(r.energy) for r in reports])
    breakdown = {k: float(sum(r.breakdown.get(k, 0.0) for r in reports)) for k in TERMS}
    return EnergyReport(energy, float(energy.sum()), breakdown, T)
