import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from vzsim.gates import (
    NAMED_GATES,
    NAMED_MATRICES,
    VZ,
    XP,
    FrameState,
    Su2Params,
    apply_virtual_z,
    effective_drive_phase,
    equal_up_to_phase,
    format_schedule,
    frame_tracked_unitary,
    parse_schedule,
    phase_distance,
    r_axis,
    rx,
    rz,
    schedule_unitary,
    two_qubit_drive_phase,
    u_from_zxz,
    xtheta_expand,
    zxzxz_decompose,
    zxzxz_schedule,
)

angles = st.floats(-10, 10, allow_nan=False)


def direct_zxz(theta, phi, lam):
    # oracle: literal product of rotation matrices
    return rz(phi) @ rx(theta) @ rz(lam)


@pytest.mark.parametrize("name", list(NAMED_GATES))
def test_table_rows(name):
    u = u_from_zxz(NAMED_GATES[name])
    assert phase_distance(u, NAMED_MATRICES[name]) <= 1e-10
    sched = zxzxz_schedule(Su2Params(*NAMED_GATES[name]))
    assert phase_distance(schedule_unitary(sched), NAMED_MATRICES[name]) <= 1e-10


@pytest.mark.parametrize("name", list(NAMED_GATES))
def test_decompose_named(name):
    p = zxzxz_decompose(NAMED_MATRICES[name])
    assert phase_distance(u_from_zxz(p), NAMED_MATRICES[name]) <= 1e-10


def test_explicit_examples():
    assert np.allclose(u_from_zxz((0, 0, 0)), np.eye(2))
    p = zxzxz_decompose(NAMED_MATRICES["H"])
    assert np.allclose(p.as_tuple(), (math.pi / 2,) * 3)
    p = zxzxz_decompose(NAMED_MATRICES["X"])
    assert np.allclose(p.as_tuple(), (math.pi, 0, 0))
    p = zxzxz_decompose(NAMED_MATRICES["T"])
    assert np.allclose(p.as_tuple(), (0, math.pi / 8, math.pi / 8))


def test_explicit_matrix_entries():
    th, ph, la = 0.7, -1.3, 2.1
    u = u_from_zxz((th, ph, la))
    c, s = math.cos(th / 2), math.sin(th / 2)
    expected = np.array([[c, -1j * np.exp(1j * la) * s], [-1j * np.exp(1j * ph) * s, np.exp(1j * (la + ph)) * c]])
    assert np.allclose(u, expected)
    assert equal_up_to_phase(u, direct_zxz(th, ph, la))


def test_haar_roundtrip():
    us = unitary_group.rvs(2, size=1000, random_state=1234)
    worst = 0.0
    for u in us:
        p = zxzxz_decompose(u)
        worst = max(worst, phase_distance(u_from_zxz(p), u))
        worst = max(worst, phase_distance(schedule_unitary(zxzxz_schedule(p)), u))
        assert 0 <= p.theta <= math.pi
        assert -math.pi < p.phi <= math.pi and -math.pi < p.lam <= math.pi
    assert worst <= 1e-10


@given(angles, angles, angles)
def test_canonical_unique(th, ph, la):
    p = zxzxz_decompose(u_from_zxz((th, ph, la)))
    assert phase_distance(u_from_zxz(p), direct_zxz(th, ph, la)) <= 1e-9
    # canonical form is a fixed point
    q = p.canonical()
    assert np.allclose(p.as_tuple(), q.as_tuple(), atol=1e-9)


@pytest.mark.parametrize("theta", [0.0, math.pi])
def test_degenerate_split(theta):
    p = zxzxz_decompose(u_from_zxz((theta, 0.4, 0.2)))
    assert p.theta == theta
    if theta == 0.0:
        assert p.phi == pytest.approx(p.lam)
    else:
        assert p.phi == pytest.approx(-p.lam)
    assert phase_distance(u_from_zxz(p), u_from_zxz((theta, 0.4, 0.2))) <= 1e-10


def test_rejects_non_unitary():
    with pytest.raises(ValueError):
        zxzxz_decompose(np.array([[1, 0], [0, 2]]))
    with pytest.raises(ValueError):
        zxzxz_decompose(np.eye(3))
    with pytest.raises(ValueError):
        u_from_zxz((math.inf, 0, 0))


@pytest.mark.parametrize("theta", [math.pi / 2, math.pi, math.pi / 4, 1.234])
def test_xtheta_expand(theta):
    sched = xtheta_expand(theta)
    assert sum(isinstance(op, XP) for op in sched) == 2
    assert phase_distance(schedule_unitary(sched), rx(theta)) <= 1e-12


def test_group_closure_of_named_gates():
    names = list(NAMED_GATES)
    for a in names:
        for b in names:
            m = u_from_zxz(NAMED_GATES[a]) @ u_from_zxz(NAMED_GATES[b])
            p = zxzxz_decompose(m)
            assert phase_distance(u_from_zxz(p), m) <= 1e-10
            assert sum(isinstance(op, XP) for op in zxzxz_schedule(p)) <= 2


def test_vz_between_pulses():
    th, phi = 0.9, 0.35
    sched = [XP("d0", th), VZ("d0", phi), XP("d0", th)]
    played, _ = frame_tracked_unitary(sched)
    assert phase_distance(played, rz(-phi) @ rx(th) @ rz(phi) @ rx(th)) <= 1e-12


def random_schedule(data_rng, n):
    ops = []
    for _ in range(n):
        if data_rng.random() < 0.5:
            ops.append(VZ("d0", data_rng.uniform(-4, 4)))
        else:
            ops.append(XP("d0", data_rng.uniform(0, 4), data_rng.uniform(-4, 4)))
    return ops


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_vz_equivalence(seed, n):
    rng = np.random.default_rng(seed)
    sched = random_schedule(rng, n)
    played, frame = frame_tracked_unitary(sched)
    literal = schedule_unitary(sched)
    # trailing Z restores the literal circuit
    assert phase_distance(rz(-frame.phase()) @ played, literal) <= 1e-10
    # Z measurement populations do not see the trailing Z
    psi = np.array([1, 0], complex)
    assert np.allclose(np.abs(played @ psi) ** 2, np.abs(literal @ psi) ** 2, atol=1e-12)


def test_frame_state():
    f = FrameState.zeros("d0")
    f = apply_virtual_z(f, "d0", math.pi / 2)
    assert f.phase() == pytest.approx(math.pi / 2)
    f = apply_virtual_z(f, "d0", math.pi / 2)
    assert f.phase() == pytest.approx(math.pi)
    f = apply_virtual_z(f, "d0", 3 * math.pi)
    assert f.phase() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(KeyError):
        apply_virtual_z(f, "d1", 0.1)


@given(angles, angles)
def test_frame_additivity(a, b):
    f0 = FrameState.zeros()
    one = apply_virtual_z(apply_virtual_z(f0, "d0", a), "d0", b).phase()
    two = apply_virtual_z(f0, "d0", a + b).phase()
    assert math.isclose(math.cos(one), math.cos(two), abs_tol=1e-9)
    assert math.isclose(math.sin(one), math.sin(two), abs_tol=1e-9)


def test_effective_drive_phase():
    f0 = FrameState.zeros()
    assert effective_drive_phase(f0, "d0", 0.0) == 0.0
    assert effective_drive_phase(f0, "d0", math.pi / 2) == pytest.approx(math.pi / 2)
    assert phase_distance(r_axis(math.pi / 2, math.pi / 2), NAMED_MATRICES["Y90"]) <= 1e-12
    f = apply_virtual_z(f0, "d0", math.pi / 2)
    assert effective_drive_phase(f, "d0", 0.0) == pytest.approx(math.pi / 2)


def test_two_qubit_phase():
    f1 = FrameState.zeros()
    f2 = FrameState.zeros()
    assert two_qubit_drive_phase("CR", f1, f2) == 0.0
    assert two_qubit_drive_phase("ISWAP", f1, f2) == 0.0
    f2b = apply_virtual_z(f2, "d0", 0.3)
    assert two_qubit_drive_phase("CR", f1, f2b) - two_qubit_drive_phase("CR", f1, f2) == pytest.approx(0.3)
    a, b = FrameState({"d0": 1.1}), FrameState({"d0": 0.4})
    assert two_qubit_drive_phase("iswap", a, b) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        two_qubit_drive_phase("CZ", a, b)


def test_schedule_text_roundtrip():
    sched = zxzxz_schedule(zxzxz_decompose(unitary_group.rvs(2, random_state=7)))
    text = format_schedule(sched)
    assert parse_schedule(text) == sched
    assert text.splitlines()[1].startswith("XP d0 1.5707963267948966 0")
    with pytest.raises(ValueError):
        parse_schedule("XZ d0 1")
