import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar, k as k_B

from vzsim.calibration import calibrate_amplitude
from vzsim.device import (
    CalibratedGate,
    DeviceParams,
    GateChannel,
    IntegrationError,
    _commutator_super,
    annihilation,
    apply_superop,
    basis_state,
    check_state,
    dissipator_super,
    drive_hamiltonian,
    evolve,
    gate_infidelity,
    ground_state,
    invert_povm,
    leakage_of,
    lindblad_dissipators,
    measure_populations,
    run_schedule,
    simulate_gate,
    static_hamiltonian,
    superoperator_propagator,
    thermal_equilibrium,
    thermal_occupation,
    thermal_state,
    unitary_propagator,
)
from vzsim.gates import SIGMA_X, SIGMA_Y, VZ, XP, phase_distance, r_axis, rx
from vzsim.pulses import PulseSpec, SignalChainParams, Waveform, idle_waveform, render_pulse

IDEAL = SignalChainParams().ideal


def constant_waveform(value, duration, n=64):
    dt = duration / n
    t = (np.arange(n) + 0.5) * dt
    env = np.full(n, value, dtype=complex)
    return Waveform(duration / 4, np.zeros(4, complex), t, env.real, env.imag, env, duration)


@pytest.fixture(scope="module")
def qubit_gate():
    # closed two-level device, ideal chain, no sideband (the held SSB tone adds a Z error)
    dev = DeviceParams(dims=2, rwa=True, decoherence=False)
    spec = PulseSpec(family="Gaussian", duration=13.33e-9, ssb_freq=0.0)
    amp = calibrate_amplitude(spec, dev, IDEAL)
    return dev, CalibratedGate(replace(spec, amplitude=amp))


def test_params_validation():
    with pytest.raises(ValueError):
        DeviceParams(T1=0)
    with pytest.raises(ValueError):
        DeviceParams(dims=1)
    with pytest.raises(ValueError):
        DeviceParams(temperature=-1)


def test_hamiltonian_examples():
    dev2 = DeviceParams(dims=2, rwa=True)
    assert not np.any(drive_hamiltonian(1e-9, 0.0, dev2))
    omega = 2e8
    h = drive_hamiltonian(1e-9, omega, dev2)
    assert np.allclose(h, 0.5 * omega * SIGMA_X)
    h = drive_hamiltonian(1e-9, omega * np.exp(-0.5j * math.pi), dev2)
    assert np.allclose(h, 0.5 * omega * SIGMA_Y)
    dev3 = DeviceParams(dims=3)
    assert static_hamiltonian(dev3)[2, 2] == pytest.approx(dev3.alpha)
    det = DeviceParams(dims=3, drive_detuning=2 * math.pi * 1e6)
    assert static_hamiltonian(det)[1, 1] == pytest.approx(-det.drive_detuning)


def test_counter_rotating_term():
    dev = DeviceParams(dims=2, rwa=False)
    t = 0.37e-9
    c = 1e8
    h = drive_hamiltonian(t, c, dev)
    ce = c + c * np.exp(-2j * dev.omega_drive * t)
    a = annihilation(2)
    assert np.allclose(h, 0.5 * (ce * a + np.conj(ce) * a.conj().T) + static_hamiltonian(dev))


def test_thermal_numbers():
    dev = DeviceParams()
    x = hbar * dev.omega01 / k_B
    assert x == pytest.approx(0.2417, abs=2e-4)
    nbar = thermal_occupation(dev.omega01, dev.temperature)
    assert nbar / (1 + nbar) == pytest.approx(math.exp(-x / 0.046), rel=1e-9)
    assert math.exp(-x / 0.046) == pytest.approx(5.2e-3, abs=0.05e-3)
    p = thermal_equilibrium(dev)
    assert p[1] / p[0] == pytest.approx(math.exp(-x / 0.046), rel=1e-9)
    assert p[2] / p[0] == pytest.approx((p[2] / p[1]) * (p[1] / p[0]), rel=1e-12)
    assert thermal_equilibrium(replace(dev, temperature=0.0))[0] == 1.0
    assert thermal_occupation(dev.omega01, 0.0) == 0.0


def test_zero_temperature_no_heating():
    ops = lindblad_dissipators(DeviceParams(temperature=0.0, dims=3))
    for L in ops:
        assert np.allclose(np.tril(L, -1), 0)


def test_dissipator_rates():
    dev = DeviceParams(dims=2, temperature=0.0)
    D = dissipator_super(lindblad_dissipators(dev))
    rho = np.array([[0.3, 0.2], [0.2, 0.7]], complex)
    drho = (D @ rho.ravel()).reshape(2, 2)
    assert drho[1, 1].real == pytest.approx(-0.7 / dev.T1)
    assert drho[0, 1].real == pytest.approx(-0.2 * (1 / (2 * dev.T1) + 1 / dev.Tphi))


def test_detailed_balance_steady_state():
    dev = DeviceParams(dims=4)
    L = _commutator_super(static_hamiltonian(dev)) + dissipator_super(lindblad_dissipators(dev))
    w, v = np.linalg.eig(L)
    ss = v[:, np.argmin(np.abs(w))].reshape(4, 4)
    ss = ss / np.trace(ss)
    assert np.allclose(np.diag(ss).real, thermal_equilibrium(dev), rtol=1e-8, atol=1e-15)
    p = np.diag(ss).real
    for n in range(1, 3):
        ratio = math.exp(-hbar * dev.transition_frequency(n) / (k_B * dev.temperature))
        assert p[n] / p[n - 1] == pytest.approx(ratio, rel=1e-8)


def test_t1_decay():
    dev = DeviceParams(dims=3)
    wf = idle_waveform(dev.T1)
    s = superoperator_propagator(wf, dev, n_steps=64)
    rho = apply_superop(s, basis_state(3, 1))
    nbar = thermal_occupation(dev.omega01, dev.temperature)
    assert rho[1, 1].real == pytest.approx(math.exp(-1) * (1 - nbar), rel=0.01)
    check_state(rho)


def test_idle_closed_identity():
    dev = DeviceParams(dims=3)
    u = unitary_propagator(idle_waveform(20e-9), dev)
    # only the anharmonic drift acts; populations stay put
    assert np.allclose(np.abs(u), np.eye(3), atol=1e-12)
    rho = evolve(ground_state(3), idle_waveform(20e-9), dev, open=False)
    assert np.allclose(rho, ground_state(3))


def test_resonant_pi_rotation():
    dev = DeviceParams(dims=2, rwa=True, decoherence=False)
    T = 20e-9
    wf = constant_waveform(math.pi / T, T)
    u = unitary_propagator(wf, dev)
    assert phase_distance(u, rx(math.pi)) < 1e-10
    rho = evolve(ground_state(2), wf, dev, open=False)
    assert rho[1, 1].real == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("rwa", [True, False])
def test_unitarity_and_trace(rwa):
    dev = DeviceParams(rwa=rwa)
    spec = PulseSpec(family="DRAG", amplitude=2.3e8, drag_beta=-3e-10, drive_phase=0.4)
    wf = render_pulse(spec)
    u = unitary_propagator(wf, dev)
    assert np.linalg.norm(u @ u.conj().T - np.eye(4)) <= 1e-9
    s = superoperator_propagator(wf, dev)
    eye = np.eye(4).ravel()
    assert np.max(np.abs(eye @ s - eye)) <= 1e-9
    rho = thermal_state(dev)
    for _ in range(5):
        rho = apply_superop(s, rho)
        rho = 0.5 * (rho + rho.conj().T)
        check_state(rho)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.5e8, 4e8))
def test_positivity_random_pulses(gamma, amp):
    dev = DeviceParams(dims=3)
    wf = render_pulse(PulseSpec(family="DRAG", amplitude=amp, drag_beta=2e-10, drive_phase=gamma))
    rho = evolve(thermal_state(dev), wf, dev)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10
    assert abs(np.trace(rho) - 1) <= 1e-9


def test_split_matches_magnus():
    dev = DeviceParams(dims=3)
    wf = render_pulse(PulseSpec(family="DRAG", amplitude=2.3e8, drag_beta=-3e-10))
    a = superoperator_propagator(wf, dev, method="split")
    b = superoperator_propagator(wf, dev, method="magnus")
    assert np.max(np.abs(a - b)) < 1e-9
    with pytest.raises(ValueError):
        superoperator_propagator(wf, dev, method="euler")


def test_integration_error_reported():
    dev = DeviceParams(dims=3, rwa=True)
    wf = render_pulse(PulseSpec(amplitude=2.3e8))
    s = superoperator_propagator(wf, dev)
    from vzsim.device import check_trace_preserving

    with pytest.raises(IntegrationError):
        check_trace_preserving(s * 1.001, 3)
    with pytest.raises(IntegrationError):
        check_state(np.diag([1.1, -0.1, 0.0]).astype(complex))


def test_convergence_order():
    dev = DeviceParams(dims=3, rwa=True)
    wf = render_pulse(PulseSpec(family="DRAG", amplitude=2.3e8, drag_beta=-3e-10), IDEAL)
    ref = unitary_propagator(wf, dev, n_steps=3200)
    e1 = np.linalg.norm(unitary_propagator(wf, dev, n_steps=100) - ref)
    e2 = np.linalg.norm(unitary_propagator(wf, dev, n_steps=200) - ref)
    assert math.log2(e1 / e2) >= 3.5


def test_default_step_converged():
    dev = DeviceParams(dims=3)
    wf = render_pulse(PulseSpec(family="DRAG", amplitude=2.3e8, drag_beta=-3e-10))
    u = unitary_propagator(wf, dev)
    from vzsim.device import step_count

    fine = unitary_propagator(wf, dev, n_steps=2 * step_count(wf, dev))
    assert np.linalg.norm(u - fine) < 1e-6


def test_detuned_frame_gauge():
    delta = 2 * math.pi * 7e6
    spec = PulseSpec(family="DRAG", amplitude=2.3e8, drag_beta=-3e-10, drive_phase=0.3)
    wf = render_pulse(spec)
    res = DeviceParams(dims=3)
    det = replace(res, drive_detuning=delta)
    # same lab field expressed in a frame rotating delta faster
    wf_det = replace(wf, envelope=wf.envelope * np.exp(-1j * delta * wf.t))
    n = 6000
    rho0 = thermal_state(res)
    for open_ in (False, True):
        a = evolve(rho0, wf, res, open=open_, n_steps=n)
        b = evolve(rho0, wf_det, det, open=open_, n_steps=n)
        assert np.allclose(np.diag(a).real, np.diag(b).real, atol=1e-8)


@pytest.fixture(scope="module")
def transmon_gz():
    dev = DeviceParams(dims=3, decoherence=False)
    spec = PulseSpec(family="Gaussian")
    amp = calibrate_amplitude(spec, dev, SignalChainParams())
    return dev, replace(spec, amplitude=amp)


def test_two_level_calibrated_gate(qubit_gate):
    dev, gate = qubit_gate
    res = simulate_gate(gate.spec, dev, IDEAL)
    assert res.distance <= 1e-6
    assert res.leakage == 0.0


def test_stark_phase_error(transmon_gz):
    dev, spec = transmon_gz
    res = simulate_gate(spec, dev)
    # the rotation angle is calibrated, but the |1> Stark shift leaves a Z error
    assert res.distance > 1e-2
    blk = res.projected
    target = r_axis(math.pi / 2, 0.0)
    z_err = np.angle((blk @ target.conj().T)[1, 1] / (blk @ target.conj().T)[0, 0])
    assert abs(z_err) > 1e-2


def test_truncation_convergence():
    base = DeviceParams(decoherence=False)
    spec = PulseSpec(family="DRAG", drag_beta=1 / (2 * base.alpha))
    chain = SignalChainParams()
    amp = calibrate_amplitude(spec, replace(base, dims=4), chain)
    spec = replace(spec, amplitude=amp)
    leaks = {d: leakage_of(unitary_propagator(render_pulse(spec, chain), replace(base, dims=d))) for d in (3, 4, 5)}
    assert leaks[3] == pytest.approx(leaks[4], rel=0.10)
    assert leaks[5] == pytest.approx(leaks[4], rel=0.01)


def test_run_schedule_examples(qubit_gate):
    dev, gate = qubit_gate
    ch = GateChannel(gate.spec, dev, IDEAL, open=False)
    half = math.pi / 2
    rho, frame = run_schedule([VZ("d0", half)], dev, gate, IDEAL, channel_cache=ch)
    assert rho[0, 0].real == pytest.approx(1.0)
    assert frame.phase() == pytest.approx(2 * math.pi - half)
    rho, _ = run_schedule([XP("d0", half), VZ("d0", math.pi), XP("d0", half)], dev, gate, IDEAL, channel_cache=ch)
    assert rho[0, 0].real == pytest.approx(1.0, abs=1e-6)
    rho, _ = run_schedule([XP("d0", half), XP("d0", half)], dev, gate, IDEAL, channel_cache=ch)
    assert rho[1, 1].real == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        run_schedule([XP("d0", 1.0)], dev, gate, IDEAL, channel_cache=ch)


def test_gate_channel_phase_interpolation():
    dev = DeviceParams(dims=3)
    spec = PulseSpec(family="DRAG", amplitude=2.3e8, drag_beta=-3e-10)
    ch = GateChannel(spec, dev, SignalChainParams(), open=False)
    assert ch.n_phase == 8
    gamma = 1.234
    direct = unitary_propagator(render_pulse(replace(spec, drive_phase=gamma)), dev)
    from vzsim.device import unitary_to_superop

    assert np.max(np.abs(ch.superop(gamma) - unitary_to_superop(direct))) < 1e-6
    cov = GateChannel(spec, replace(dev, rwa=True), replace(SignalChainParams(), lo_leakage_dbm=None), open=False)
    assert cov.n_phase == 1


def test_gate_infidelity_formula():
    u = r_axis(math.pi / 2, 0.0)
    assert gate_infidelity(u, u) == pytest.approx(0.0, abs=1e-15)
    assert gate_infidelity(0.9 * u, u) > 0
    # fully leaked block: fidelity 0
    assert gate_infidelity(np.zeros((2, 2)), u) == pytest.approx(1.0)


def test_measure_populations():
    rho = np.diag([0.7, 0.2, 0.08, 0.02]).astype(complex)
    assert np.allclose(measure_populations(rho), [0.7, 0.2, 0.08])
    assert np.allclose(measure_populations(rho, np.eye(3)), [0.7, 0.2, 0.1])
    conf = np.array([[0.95, 0.04, 0.01], [0.06, 0.9, 0.04], [0.02, 0.08, 0.9]])
    p = np.array([0.6, 0.3, 0.1])
    meas = measure_populations(np.diag(p).astype(complex), conf)
    assert np.allclose(invert_povm(meas, conf), p, atol=1e-12)
    with pytest.raises(np.linalg.LinAlgError):
        invert_povm(meas, np.ones((3, 3)) / 3)
    with pytest.raises(ValueError):
        measure_populations(rho, np.full((3, 3), 0.5))


def test_shot_noise_bounds():
    p = np.array([0.6, 0.3, 0.1])
    rho = np.diag(p).astype(complex)
    for seed in range(20):
        est = measure_populations(rho, np.eye(3), shots=1000, seed=seed)
        sigma = np.sqrt(p * (1 - p) / 1000)
        assert np.all(np.abs(est - p) <= 4 * sigma)
    a = measure_populations(rho, shots=1000, seed=3)
    b = measure_populations(rho, shots=1000, seed=3)
    assert np.array_equal(a, b)
