"""Channel model tests.

Frozen expected values were computed by hand from the closed-form expressions
(logistic LoS probability, power-law gains, Rician LoS segments) and are
asserted to near machine precision.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ris_uav.channel import (
    RadioParams,
    Vec3,
    array_response,
    cascade_coefficients,
    composite_gain,
    direct_amplitude,
    direct_gain,
    elevation_angle,
    los_probability,
    mixed_gain,
    rate,
    ris_device_channel,
    ris_uav_channel,
    snr,
)


@pytest.fixture
def params():
    return RadioParams()


# ---------------------------------------------------------------- elevation

def test_elevation_straight_above():
    assert elevation_angle(Vec3(0, 0, 50), Vec3(0, 0, 1)) == pytest.approx(90.0)


def test_elevation_45_degrees():
    assert elevation_angle(Vec3(50, 0, 50), Vec3(0, 0, 0)) == pytest.approx(45.0)


def test_elevation_arctan_half():
    # atan(50/100) in degrees
    got = elevation_angle(Vec3(100, 0, 50), Vec3(0, 0, 0))
    assert got == pytest.approx(26.56505117707799, abs=1e-12)


def test_elevation_uses_height_difference():
    # device on a 10 m mast sees a shallower angle than one on the ground
    low = elevation_angle(Vec3(100, 0, 50), Vec3(0, 0, 10))
    ground = elevation_angle(Vec3(100, 0, 50), Vec3(0, 0, 0))
    assert low < ground


def test_elevation_rejects_uav_below_device():
    with pytest.raises(ValueError):
        elevation_angle(Vec3(0, 0, 1), Vec3(10, 0, 5))


# ----------------------------------------------------------- LoS probability

def test_los_probability_at_eta1(params):
    # theta == eta1 collapses the exponential to 1
    assert los_probability(11.95, params) == pytest.approx(1 / 12.95, abs=1e-15)


def test_los_probability_overhead(params):
    assert los_probability(90.0, params) == pytest.approx(0.9997067139222499, abs=1e-12)


def test_los_probability_mid(params):
    assert los_probability(30.0, params) == pytest.approx(0.49351754365204, abs=1e-12)


def test_los_probability_domain(params):
    for bad in (0.0, -5.0, 90.0001):
        with pytest.raises(ValueError):
            los_probability(bad, params)


@given(st.floats(min_value=0.01, max_value=89.98))
def test_los_probability_monotone_in_elevation(theta):
    p = RadioParams()
    lo = los_probability(theta, p)
    hi = los_probability(theta + 0.01, p)
    assert 0.0 < lo < hi < 1.0


# ----------------------------------------------------------------- direct link

def test_mixed_gain_pure_los(params):
    assert mixed_gain(1.0, 1.0, params) == pytest.approx(1.0)
    assert mixed_gain(1.0, 10.0, params) == pytest.approx(1e-3)


def test_mixed_gain_pure_nlos(params):
    assert mixed_gain(0.0, 1.0, params) == pytest.approx(params.beta2)


def test_direct_gain_overhead_frozen(params):
    # UAV 49 m straight above the device: theta=90, D=49
    got = direct_gain(Vec3(0, 0, 50), Vec3(0, 0, 1), params)
    assert got == pytest.approx(8.497865439891541e-06, rel=1e-12)


def test_direct_gain_composes_oracles(params):
    uav, dev = Vec3(80, -30, 50), Vec3(10, 40, 1)
    d = uav.distance(dev)
    p = los_probability(elevation_angle(uav, dev), params)
    assert direct_gain(uav, dev, params) == pytest.approx(
        (p + (1 - p) * params.beta2) * d ** -params.beta1, rel=1e-14)


def test_direct_gain_rejects_coincident(params):
    with pytest.raises(ValueError):
        direct_gain(Vec3(1, 2, 3), Vec3(1, 2, 3), params)


@given(st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=1.0, max_value=500.0))
def test_mixed_gain_bracketed_by_pure_cases(p_los, dist):
    params = RadioParams()
    g = mixed_gain(p_los, dist, params)
    nlos = params.beta2 * dist ** -params.beta1
    los = dist ** -params.beta1
    assert nlos - 1e-18 <= g <= los + 1e-18


@given(st.floats(min_value=1.0, max_value=400.0),
       st.floats(min_value=1.01, max_value=2.0))
def test_mixed_gain_decreasing_in_distance(dist, factor):
    params = RadioParams()
    assert mixed_gain(0.5, dist * factor, params) < mixed_gain(0.5, dist, params)


def test_direct_amplitude_modes():
    uav, dev = Vec3(0, 0, 50), Vec3(0, 0, 1)
    lit = RadioParams()
    srt = RadioParams(direct_amplitude="sqrt_gain")
    g = direct_gain(uav, dev, lit)
    assert direct_amplitude(uav, dev, lit) == pytest.approx(g)
    assert direct_amplitude(uav, dev, srt) == pytest.approx(math.sqrt(g))


# ---------------------------------------------------------------- array factor

def test_array_response_single_element(params):
    np.testing.assert_allclose(array_response(0.7, 1, params), [1.0 + 0j])


def test_array_response_broadside(params):
    np.testing.assert_allclose(array_response(0.0, 5, params), np.ones(5))


def test_array_response_half_wavelength_endfire(params):
    # spacing = lambda/2 and phi = 1 puts adjacent elements pi apart
    got = array_response(1.0, 2, params)
    np.testing.assert_allclose(got, [1.0, -1.0], atol=1e-15)


def test_array_response_rejects_bad_cosine(params):
    with pytest.raises(ValueError):
        array_response(1.2, 4, params)


@given(st.floats(min_value=-1.0, max_value=1.0), st.integers(min_value=1, max_value=64))
def test_array_response_unit_modulus(phi, m):
    got = array_response(phi, m, RadioParams())
    assert np.max(np.abs(np.abs(got) - 1.0)) <= 1e-12


# ------------------------------------------------------------- RIS segments

def test_ris_segment_modulus_frozen():
    # rho=1, alpha=4, D=10, K=10: per-element modulus sqrt(1e-4 * 10/11)
    p = RadioParams(rho=1.0, rician_k=10.0, num_elements=8)
    h = ris_device_channel(Vec3(0, 0, 1), Vec3(6, 0, 9), p)  # distance 10
    np.testing.assert_allclose(np.abs(h), 0.009534625892455923, rtol=1e-12)


def test_ris_segment_direction_cosine(params):
    # phi is the x-offset over distance, measured from the RIS
    ris, uav = Vec3(0, 150, 1), Vec3(30, 150, 41)  # dx=-30, dz=40, d=50
    h = ris_uav_channel(uav, ris, params)
    phi = (ris.x - uav.x) / ris.distance(uav)
    expect = (math.sqrt(params.rho * 50.0 ** -params.alpha)
              * math.sqrt(params.rician_k / (1 + params.rician_k))
              * np.exp(-1j * 2 * math.pi / params.wavelength
                       * np.arange(params.num_elements) * params.spacing * phi))
    np.testing.assert_allclose(h, expect, rtol=1e-12)


def test_ris_segment_large_k_limit():
    p = RadioParams(rician_k=1e12, num_elements=4)
    h = ris_uav_channel(Vec3(10, 0, 50), Vec3(0, 0, 1), p)
    d = Vec3(10, 0, 50).distance(Vec3(0, 0, 1))
    np.testing.assert_allclose(np.abs(h), math.sqrt(p.rho * d ** -p.alpha), rtol=1e-9)


def test_ris_segment_rejects_coincident(params):
    with pytest.raises(ValueError):
        ris_device_channel(Vec3(0, 0, 1), Vec3(0, 0, 1), params)


# ------------------------------------------------------------ composite gain

def test_composite_no_elements_is_direct():
    amp, power = composite_gain(0.25, np.array([]), np.array([]), np.array([]))
    assert amp == 0.25
    assert power == pytest.approx(0.0625)


def test_composite_aligned_phasors():
    # equal real coefficients a, zero phases: |M*a|^2
    a = 3e-4
    h = np.full(5, math.sqrt(a))  # conj(h)*h = a per element
    amp, power = composite_gain(0.0, h, np.zeros(5), h)
    assert power == pytest.approx((5 * a) ** 2, rel=1e-12)


def test_composite_opposed_phasors_cancel():
    h = np.ones(2)
    _, power = composite_gain(0.0, h, np.array([0.0, math.pi]), h)
    assert power == pytest.approx(0.0, abs=1e-24)


def test_composite_matches_manual_sum(params):
    uav, ris, dev = Vec3(100, 120, 50), Vec3(0, 150, 1), Vec3(40, 200, 1)
    p = RadioParams(num_elements=6)
    h_ru = ris_uav_channel(uav, ris, p)
    h_ri = ris_device_channel(ris, dev, p)
    theta = 2 * math.pi * np.array([0, 1, 2, 3, 0, 1]) / 4
    d = direct_amplitude(uav, dev, p)
    amp, power = composite_gain(d, h_ru, theta, h_ri)
    manual = d + sum(np.conj(h_ru[m]) * np.exp(1j * theta[m]) * h_ri[m] for m in range(6))
    assert amp == pytest.approx(manual, rel=1e-12)
    assert power == pytest.approx(abs(manual) ** 2, rel=1e-12)


def test_composite_rejects_length_mismatch():
    with pytest.raises(ValueError):
        composite_gain(0.0, np.ones(3), np.zeros(3), np.ones(4))
    with pytest.raises(ValueError):
        composite_gain(0.0, np.ones(3), np.zeros(2), np.ones(3))


@settings(max_examples=60)
@given(st.floats(min_value=0.0, max_value=2 * math.pi), st.integers(min_value=1, max_value=12),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_composite_global_phase_invariance(rot, m, seed):
    # rotating every cascaded term and the direct term together keeps |.|^2
    rng = np.random.default_rng(seed)
    h_ru = rng.normal(size=m) + 1j * rng.normal(size=m)
    h_ri = rng.normal(size=m) + 1j * rng.normal(size=m)
    theta = rng.uniform(0, 2 * math.pi, size=m)
    d = rng.normal()
    _, base = composite_gain(d, h_ru, theta, h_ri)
    # absorb the rotation into the device-side segment and the direct term
    _, spun = composite_gain(d * np.exp(1j * rot), h_ru, theta, h_ri * np.exp(1j * rot))
    assert spun == pytest.approx(base, rel=1e-9, abs=1e-12)


@settings(max_examples=60)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=4),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_composite_quantized_alignment_bound(m, bits, seed):
    # with equal moduli a and the best Q-quantized phases, the aligned sum
    # M*a is reached within the quantization bound 2*M*a*sin(pi/Q)
    rng = np.random.default_rng(seed)
    q = 2 ** bits
    a = 1.7e-5
    psi = rng.uniform(0, 2 * math.pi, size=m)
    h_ru = np.ones(m)
    h_ri = a * np.exp(1j * psi)
    theta = (2 * math.pi / q) * np.round(-psi * q / (2 * math.pi)) % (2 * math.pi)
    amp, power = composite_gain(0.0, h_ru, theta, h_ri)
    best = m * a
    assert power <= best ** 2 * (1 + 1e-12)
    assert abs(amp) >= best - 2 * best * math.sin(math.pi / q) - 1e-15


# ----------------------------------------------------------------- snr / rate

def test_snr_frozen(params):
    assert snr(1e-10, params) == pytest.approx(1e3, rel=1e-12)


def test_snr_rejects_negative(params):
    with pytest.raises(ValueError):
        snr(-1e-12, params)


def test_rate_values():
    assert rate(0.0) == 0.0
    assert rate(1.0) == pytest.approx(1.0)
    assert rate(3.0) == pytest.approx(2.0)
    assert rate(1e9, scheduled=False) == 0.0


@given(st.floats(min_value=0.0, max_value=1e6), st.floats(min_value=0.01, max_value=10.0))
def test_rate_monotone(s, bump):
    assert rate(s + bump) > rate(s)


def test_params_validation():
    with pytest.raises(ValueError):
        RadioParams(beta2=1.5)
    with pytest.raises(ValueError):
        RadioParams(sigma2=0.0)
    with pytest.raises(ValueError):
        RadioParams(num_elements=-1)
    with pytest.raises(ValueError):
        RadioParams(direct_amplitude="copy")
    assert RadioParams(phase_bits=3).num_phases == 8
