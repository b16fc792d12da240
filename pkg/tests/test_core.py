import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from qndsim.core import (EXCITED, GROUND, PLUS_Y, AmpParams, BlochVector, CavityParams,
                         DriveParams, Outcome, ParameterError, QubitParams, StrengthParams,
                         apparent_strength, dispersive_angle, purity, relax, rotate,
                         strength_params, update_eq1, update_general)

DEVICE = CavityParams.from_hz(5.8e6, 5.4e6)
finite = st.floats(-50, 50, allow_nan=False)
strengths = st.floats(0, 6, allow_nan=False)


def test_dispersive_angle_device_and_symmetric():
    assert dispersive_angle(DEVICE) == pytest.approx(oracles.THETA_DISP, abs=1e-12)
    assert dispersive_angle(CavityParams(1.0, 1.0)) == pytest.approx(math.pi / 2)
    assert dispersive_angle(CavityParams(1.0, 1e-12)) < 1e-11


def test_apparent_strength_values():
    d = DriveParams(5.0, 240e-9, 20e-9)
    assert apparent_strength(DEVICE, d, 0.2) == pytest.approx(oracles.S_NBAR5_ETA02, rel=1e-12)
    assert apparent_strength(DEVICE, d, 1.0) == pytest.approx(oracles.S_NBAR5_ETA1, rel=1e-12)
    assert apparent_strength(DEVICE, DriveParams(0.0, 240e-9, 20e-9), 0.2) == 0.0


def test_apparent_strength_monotone():
    base = apparent_strength(DEVICE, DriveParams(1.0, 240e-9, 20e-9), 0.3)
    assert apparent_strength(DEVICE, DriveParams(2.0, 240e-9, 20e-9), 0.3) > base
    assert apparent_strength(DEVICE, DriveParams(1.0, 480e-9, 20e-9), 0.3) > base
    assert apparent_strength(DEVICE, DriveParams(1.0, 240e-9, 20e-9), 0.4) > base


def test_strength_params_q_ratio_default_and_override():
    d = DriveParams(5.0, 240e-9, 20e-9)
    geo = strength_params(DEVICE, d, AmpParams(0.2))
    assert geo.qbar / geo.s == pytest.approx(1 / math.tan(oracles.THETA_DISP / 2))
    fixed = strength_params(DEVICE, d, AmpParams(0.2, 1.28))
    assert fixed.qbar == pytest.approx(1.28 * fixed.s)


@pytest.mark.parametrize("make, match", [
    (lambda: CavityParams(0.0, 1.0), "cavity.kappa"),
    (lambda: CavityParams(1.0, -1.0), "cavity.chi"),
    (lambda: DriveParams(-1.0, 240e-9, 20e-9), "drive.nbar"),
    (lambda: DriveParams(1.0, 250e-9, 20e-9), "duration/dt"),
    (lambda: AmpParams(0.0), "amp.eta"),
    (lambda: AmpParams(1.5), "amp.eta"),
    (lambda: AmpParams(0.5, math.inf), "amp.q_ratio"),
    (lambda: QubitParams(1e-6, 3e-6, 0.1), "t2 <= 2"),
    (lambda: QubitParams(1e-6, 1e-6, 0.5), "qubit.p_eq"),
    (lambda: QubitParams(-1e-6, 1e-6, 0.1), "qubit.t1"),
    (lambda: StrengthParams(-0.1), "strength s"),
])
def test_parameter_validation(make, match):
    with pytest.raises(ParameterError, match=match):
        make()


def test_eq1_examples():
    b = update_eq1(Outcome(0.0, 0.0), StrengthParams(2.0), 1.0)
    assert tuple(b) == (0.0, 1.0, 0.0)
    b = update_eq1(Outcome(1.0, 0.5), StrengthParams(1.0), 1.0)
    np.testing.assert_allclose(tuple(b), oracles.eq1(1, 0.5, 1), rtol=1e-14)
    np.testing.assert_allclose(tuple(b), (0.3107, 0.5687, 0.7616), atol=5e-5)
    assert purity(b) == pytest.approx(1.0, abs=1e-12)
    b = update_eq1(Outcome(1.0, 0.5), StrengthParams(1.0, 1.28), 0.5)
    np.testing.assert_allclose(tuple(b), oracles.eq1(1, 0.5, 1, 1.28, 0.5), rtol=1e-13)
    np.testing.assert_allclose(tuple(b), (0.2332, -0.0495, 0.7616), atol=5e-5)
    assert update_eq1(Outcome(1e6, 0.0), StrengthParams(1.0)).z == 1.0


@settings(max_examples=200, deadline=None)
@given(finite, finite, strengths, st.floats(-3, 3), st.floats(0.05, 1.0))
def test_eq1_matches_oracle(i, q, s, ratio, eta):
    b = update_eq1(Outcome(i, q), StrengthParams(s, ratio * s), eta)
    ref = oracles.eq1(i, q, s, ratio * s, eta) if abs(i * s) < 300 else None
    if ref is not None:
        np.testing.assert_allclose(tuple(b), ref, atol=1e-12)


def test_update_general_examples():
    for i, q in [(0.3, -1.0), (2.0, 4.0), (-5.0, 0.1)]:
        sp = StrengthParams(1.3, 1.7)
        assert tuple(update_general(PLUS_Y, Outcome(i, q), sp, 0.4)) == \
            tuple(update_eq1(Outcome(i, q), sp, 0.4))
    assert tuple(update_general(EXCITED, Outcome(-3.0, 2.0), StrengthParams(2.0))) == (0.0, 0.0, 1.0)
    b = update_general(BlochVector(0.0, 0.0, 0.5), Outcome(1.0, 0.0), StrengthParams(1.0))
    assert b.z == pytest.approx(oracles.bayes_z(0.5, 1.0, 1.0), abs=1e-14)
    assert round(b.z, 4) == 0.9137


unit_vectors = st.tuples(st.floats(-1, 1), st.floats(0, 2 * math.pi)).map(
    lambda a: BlochVector(math.sqrt(1 - a[0] ** 2) * math.cos(a[1]),
                          math.sqrt(1 - a[0] ** 2) * math.sin(a[1]), a[0]))


@settings(max_examples=300, deadline=None)
@given(unit_vectors, finite, finite, strengths)
def test_update_general_preserves_purity(b, i, q, s):
    out = update_general(b, Outcome(i, q), StrengthParams(s, 0.7 * s), 1.0)
    assert abs(purity(out) - purity(b)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(unit_vectors, st.floats(-8, 8), finite, st.floats(0.01, 4))
def test_update_general_population_is_bayes(b, i, q, s):
    out = update_general(b, Outcome(i, q), StrengthParams(s), 1.0)
    if abs(b.z) < 1 - 1e-9 and abs(2 * i * s) < 30:
        assert out.z == pytest.approx(oracles.bayes_z(b.z, i, s), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.floats(0.01, 3), st.floats(0.05, 1.0))
def test_eta_damping_ratio(i, q, s, eta):
    sp = StrengthParams(s, 0.9 * s)
    a = update_eq1(Outcome(i, q), sp, eta)
    b = update_eq1(Outcome(i, q), sp, 1.0)
    ca, cb = math.hypot(a.x, a.y), math.hypot(b.x, b.y)
    if cb > 1e-200:
        assert ca / cb == pytest.approx(math.exp(-s * s * (1 - eta) / eta), rel=1e-9)


@given(st.lists(st.integers(-20000, 20000), min_size=2, max_size=20, unique=True),
       st.floats(0.01, 3))
def test_z_monotone_in_i(iv, s):
    iv = np.sort(np.array(iv)) / 1000.0
    z = update_eq1(Outcome(iv, np.zeros_like(iv)), StrengthParams(s)).z
    assert np.all(np.diff(z) >= 0)
    assert np.all(np.diff(z)[np.abs(iv[1:] * s) < 15] > 0)


def test_eigenstates_fixed_for_any_outcome():
    i = np.linspace(-40, 40, 101)
    for pole in (GROUND, EXCITED):
        b = BlochVector(*(np.full_like(i, v) for v in pole))
        out = update_general(b, Outcome(i, -i), StrengthParams(2.4, 1.0), 0.3)
        assert np.all(out.z == pole.z) and np.all(out.x == 0) and np.all(out.y == 0)


def test_no_overflow_at_extreme_outcomes():
    out = update_eq1(Outcome(np.array([-1e4, 1e4]), np.zeros(2)), StrengthParams(5.0))
    assert np.all(np.isfinite(out.x)) and list(out.z) == [-1.0, 1.0]


def test_rotations():
    b = rotate(GROUND, "x", math.pi / 2)
    np.testing.assert_allclose(tuple(b), (0, 1, 0), atol=1e-15)
    assert tuple(rotate(PLUS_Y, "x", 0.0)) == tuple(PLUS_Y)
    np.testing.assert_allclose(tuple(rotate(GROUND, "x", math.pi)), (0, 0, 1), atol=1e-15)
    # tomography pre-rotations map the measured axis onto z
    np.testing.assert_allclose(rotate(BlochVector(1, 0, 0), "y", -math.pi / 2).z, 1, atol=1e-15)
    np.testing.assert_allclose(rotate(PLUS_Y, "x", math.pi / 2).z, 1, atol=1e-15)


def test_purity_examples():
    assert purity(PLUS_Y) == 1.0
    assert purity(BlochVector(0.0, 0.0, 0.0)) == 0.0


def test_relax():
    qp = QubitParams(2.8e-6, 0.698e-6, 0.08, 380e-9)
    b = relax(BlochVector(0.0, 1.0, 0.0), 380e-9, qp)
    assert b.y == pytest.approx(math.exp(-380 / 698))
    b = relax(EXCITED, 1.0, qp)
    assert b.z == pytest.approx(qp.z_eq)
