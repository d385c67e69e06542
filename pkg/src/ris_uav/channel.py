"""Air-to-ground channel models for a UAV collecting data from ground devices,
with an optional reflect path through a reconfigurable intelligent surface (RIS).

Two propagation routes are modeled:

* Direct UAV-device link: probabilistic line-of-sight. The LoS probability is a
  logistic function of the elevation angle, and the expected gain blends the
  LoS power law with an attenuated NLoS variant.
* RIS-assisted link: the RIS-UAV and RIS-device segments are pure-LoS Rician
  channels over a uniform linear array of M passive elements; the surface
  applies one discrete phase shift per element.

All distances are meters, angles degrees unless noted, gains linear (not dB).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

MIN_ELEMENT_SPACING = 0.0  # spacing and wavelength must both be positive


@dataclass(frozen=True)
class Vec3:
    """Position in meters. x, y in the service area plane, z is height."""

    x: float
    y: float
    z: float

    def __sub__(self, other):
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def norm(self):
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def horizontal_distance(self, other):
        return math.hypot(self.x - other.x, self.y - other.y)

    def distance(self, other):
        return (self - other).norm()


@dataclass
class RadioParams:
    """Radio constants shared by every link in one scenario.

    All values are linear. Config files keep the dB/dBm forms and convert on
    load (see harness.load_config).

    eta1, eta2      LoS-probability logistic constants (environment dependent)
    beta1           direct-link path-loss exponent
    beta2           extra NLoS attenuation on the direct link, in (0, 1]
    rho             reference path gain of the RIS segments at 1 m
    alpha           path-loss exponent of the RIS segments
    rician_k        Rician factor of the RIS segments (linear)
    wavelength      carrier wavelength in meters
    spacing         RIS element spacing in meters (default half wavelength)
    tx_power        device transmit power in watts
    sigma2          receiver noise power in watts
    num_elements    RIS element count M (0 disables the surface)
    phase_bits      b; each element picks from Q = 2**b phases
    direct_amplitude  'gain' adds the expected direct gain to the reflect sum
                      as-is; 'sqrt_gain' adds its square root instead.
    """

    eta1: float = 11.95
    eta2: float = 0.136
    beta1: float = 3.0
    beta2: float = 0.2
    rho: float = 10.0
    alpha: float = 4.0
    rician_k: float = 10.0
    wavelength: float = 0.1
    spacing: float = 0.05
    tx_power: float = 0.1
    sigma2: float = 1e-14
    num_elements: int = 100
    phase_bits: int = 2
    direct_amplitude: str = "gain"

    def __post_init__(self):
        positive = [
            ("eta1", self.eta1), ("eta2", self.eta2), ("beta1", self.beta1),
            ("beta2", self.beta2), ("rho", self.rho), ("alpha", self.alpha),
            ("rician_k", self.rician_k), ("wavelength", self.wavelength),
            ("spacing", self.spacing), ("tx_power", self.tx_power),
            ("sigma2", self.sigma2),
        ]
        for name, val in positive:
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val}")
        if self.beta2 > 1:
            raise ValueError("beta2 is an attenuation factor, must be <= 1")
        if self.num_elements < 0:
            raise ValueError("num_elements must be >= 0")
        if self.phase_bits < 1:
            raise ValueError("phase_bits must be >= 1")
        if self.direct_amplitude not in ("gain", "sqrt_gain"):
            raise ValueError("direct_amplitude must be 'gain' or 'sqrt_gain'")

    @property
    def num_phases(self):
        """Q, size of the discrete phase alphabet per element."""
        return 2 ** self.phase_bits


@dataclass(frozen=True)
class EnvGeometry:
    """Snapshot of all node positions for one time slot."""

    uav: Vec3
    ris: Vec3
    devices: tuple = field(default_factory=tuple)


class CompositeGain(NamedTuple):
    amplitude: complex
    power: float


def elevation_angle(uav, device):
    """Elevation of the UAV as seen from the device, degrees in (0, 90].

    Uses the height difference, so a device on a mast sees a shallower angle
    than one on the ground. The UAV must be strictly above the device.
    """
    dz = uav.z - device.z
    if dz <= 0:
        raise ValueError(f"UAV must be above the device (dz={dz})")
    d_horiz = uav.horizontal_distance(device)
    return math.degrees(math.atan2(dz, d_horiz))


def los_probability(theta_deg, params):
    """Probability of line of sight on the direct link at elevation theta_deg."""
    if not 0 < theta_deg <= 90:
        raise ValueError(f"elevation must be in (0, 90], got {theta_deg}")
    return 1.0 / (1.0 + params.eta1 * math.exp(-params.eta2 * (theta_deg - params.eta1)))


def mixed_gain(p_los, distance, params):
    """Expected direct-link gain: LoS power law, NLoS attenuated by beta2."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    path = distance ** -params.beta1
    return p_los * path + (1.0 - p_los) * params.beta2 * path


def direct_gain(uav, device, params):
    """Expected gain of the direct UAV-device link."""
    d = uav.distance(device)
    if d == 0:
        raise ValueError("UAV and device positions coincide")
    p = los_probability(elevation_angle(uav, device), params)
    return mixed_gain(p, d, params)


def direct_amplitude(uav, device, params):
    """Direct-link term entering the composite sum.

    The default convention adds the expected gain itself; 'sqrt_gain' adds its
    square root, treating the gain as a power rather than an amplitude.
    """
    g = direct_gain(uav, device, params)
    return math.sqrt(g) if params.direct_amplitude == "sqrt_gain" else g


def array_response(phi, m_count, params):
    """Steering vector of the RIS line array toward direction cosine phi.

    Element m contributes exp(-j * 2*pi/wavelength * m * spacing * phi).
    """
    if abs(phi) > 1:
        raise ValueError(f"direction cosine must be in [-1, 1], got {phi}")
    m = np.arange(m_count)
    return np.exp(-1j * (2.0 * math.pi / params.wavelength) * m * params.spacing * phi)


def _ris_segment(ris, other, params):
    d = ris.distance(other)
    if d == 0:
        raise ValueError("RIS and endpoint positions coincide")
    phi = (ris.x - other.x) / d
    amp = math.sqrt(params.rho * d ** -params.alpha) * math.sqrt(
        params.rician_k / (1.0 + params.rician_k))
    return amp * array_response(phi, params.num_elements, params)


def ris_uav_channel(uav, ris, params):
    """Deterministic (LoS component) channel vector RIS -> UAV, shape (M,)."""
    return _ris_segment(ris, uav, params)


def ris_device_channel(ris, device, params):
    """Deterministic (LoS component) channel vector device -> RIS, shape (M,)."""
    return _ris_segment(ris, device, params)


def cascade_coefficients(h_ru, h_ri):
    """Per-element products conj(h_ru) * h_ri; the reflect sum is
    sum_m coeff[m] * exp(j*theta[m])."""
    h_ru = np.asarray(h_ru)
    h_ri = np.asarray(h_ri)
    if h_ru.shape != h_ri.shape:
        raise ValueError("segment vectors must have matching length")
    return np.conj(h_ru) * h_ri


def composite_gain(direct, h_ru, theta, h_ri):
    """Combined direct-plus-reflect channel for one device.

    direct  real or complex direct-link term (see direct_amplitude)
    h_ru    RIS->UAV segment vector, shape (M,)
    h_ri    device->RIS segment vector, shape (M,)
    theta   per-element phase shifts in radians, shape (M,)

    Returns the complex composite and its squared magnitude.
    """
    coeff = cascade_coefficients(h_ru, h_ri)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != coeff.shape:
        raise ValueError("theta length must match the element count")
    amp = complex(direct) + np.sum(coeff * np.exp(1j * theta))
    return CompositeGain(amp, abs(amp) ** 2)


def snr(gain_sq, params):
    """Receive SNR for a squared channel magnitude."""
    if gain_sq < 0:
        raise ValueError("squared gain cannot be negative")
    return params.tx_power * gain_sq / params.sigma2


def rate(snr_value, scheduled=True):
    """Bits uploaded in one unit slot on a unit-bandwidth channel."""
    if snr_value < 0:
        raise ValueError("SNR cannot be negative")
    if not scheduled:
        return 0.0
    return math.log2(1.0 + snr_value)
