"""Rotary-wing UAV propulsion power and trajectory energy accounting.

Power at forward speed v is the sum of three terms:

* blade profile:  G * (1 + 3 * (v * tip_speed / speed_ref)^2)
* parasite:       0.5 * air_density * drag_area * v^3
* induced:        W * sqrt( (-v^2 + sqrt(v^4 + (W / (air_density * disc_area))^2)) / 2 )

with W = mass * gravity. The tip_speed / speed_ref ratio is a dimensionless
blend factor; the defaults make the blade correction 3*v^2/120^2, i.e. a
120 m/s tip speed. The curve is bowl shaped: hovering costs more than slow
forward flight, fast flight pays the cubic parasite term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class UAVPowerParams:
    """Propulsion constants for a ~20 N class rotary-wing platform.

    blade_profile  G, blade profile power at hover (W)
    drag_area      H, equivalent flat-plate drag area (m^2)
    tip_speed      blade tip speed (m/s)
    speed_ref      rotor speed reference; tip_speed/speed_ref scales the
                   blade-profile speed correction
    mass           airframe mass (kg)
    gravity        m/s^2
    disc_area      rotor disc area (m^2)
    air_density    kg/m^3
    """

    blade_profile: float = 79.86
    drag_area: float = 0.0151
    tip_speed: float = 120.0
    speed_ref: float = 14400.0
    mass: float = 2.04
    gravity: float = 9.8
    disc_area: float = 0.503
    air_density: float = 1.225

    def __post_init__(self):
        for name in ("blade_profile", "drag_area", "tip_speed", "speed_ref",
                     "mass", "gravity", "disc_area", "air_density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def weight(self):
        return self.mass * self.gravity


@dataclass(frozen=True)
class PathSegment:
    """A straight run at constant speed, or a hover of fixed duration."""

    distance: float = 0.0
    speed: float = 0.0
    hover_time: float = 0.0

    def __post_init__(self):
        if self.distance < 0 or self.speed < 0 or self.hover_time < 0:
            raise ValueError("segment quantities cannot be negative")
        if self.distance > 0 and self.speed <= 0:
            raise ValueError("a moving segment needs a positive speed")


def power_components(v, params):
    """(blade, parasite, induced) watts at forward speed v."""
    if v < 0:
        raise ValueError("speed cannot be negative")
    blade = params.blade_profile * (1.0 + 3.0 * (v * params.tip_speed / params.speed_ref) ** 2)
    parasite = 0.5 * params.air_density * params.drag_area * v ** 3
    w = params.weight
    hover_sq = w / (params.air_density * params.disc_area)
    induced = w * math.sqrt((-v ** 2 + math.sqrt(v ** 4 + hover_sq ** 2)) / 2.0)
    return blade, parasite, induced


def power(v, params):
    """Propulsion power (W) at forward speed v (m/s)."""
    return sum(power_components(v, params))


def hover_power(params):
    """power(0) in closed form: blade profile plus induced hover power."""
    w = params.weight
    return params.blade_profile + w * math.sqrt(w / (2.0 * params.air_density * params.disc_area))


def segment_energy(segment, params):
    """Joules spent on one path segment."""
    joules = power(0.0, params) * segment.hover_time
    if segment.distance > 0:
        joules += power(segment.speed, params) * segment.distance / segment.speed
    return joules


def trajectory_energy(positions, slot_seconds, params):
    """Energy for a slotted trajectory given per-slot (x, y) positions.

    positions has one entry per slot boundary (n slots -> n+1 points); each
    slot is flown at constant speed displacement/slot_seconds, so a slot with
    no displacement is charged hover power.
    """
    if slot_seconds <= 0:
        raise ValueError("slot_seconds must be positive")
    if len(positions) < 2:
        return 0.0
    total = 0.0
    for (x0, y0), (x1, y1) in zip(positions, positions[1:]):
        v = math.hypot(x1 - x0, y1 - y0) / slot_seconds
        total += power(v, params) * slot_seconds
    return total


def energy_efficiency(served_bits, total_energy):
    """Bits delivered inside their deadlines per joule of propulsion energy."""
    if total_energy <= 0:
        raise ValueError("total_energy must be positive")
    if served_bits < 0:
        raise ValueError("served_bits cannot be negative")
    return served_bits / total_energy
