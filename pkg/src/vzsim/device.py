"""Open-system simulation of a driven, truncated anharmonic oscillator.

States are d x d density matrices. Open-system propagators are superoperators
acting on the row-major flattening of the density matrix, so that
``flat(A rho B) = kron(A, B.T) @ flat(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.constants import hbar, k as k_B
from scipy.interpolate import CubicSpline

from .gates import VZ, XP, FrameState, apply_virtual_z, effective_drive_phase, phase_distance, r_axis, rz
from .pulses import PulseSpec, SignalChainParams, Waveform, render_pulse

TWO_PI = 2 * math.pi


class IntegrationError(RuntimeError):
    """Raised when a propagator fails its trace or unitarity check."""


@dataclass(frozen=True)
class DeviceParams:
    omega01: float = TWO_PI * 5.0353e9
    alpha: float = TWO_PI * -235.5e6
    T1: float = 54e-6
    Tphi: float = 135e-6
    temperature: float = 0.046
    dims: int = 4
    drive_detuning: float = 0.0  # omega_D - omega01, rad/s
    rwa: bool = False
    decoherence: bool = True
    max_step: float | None = None

    def __post_init__(self):
        if not (self.T1 > 0 and self.Tphi > 0):
            raise ValueError("T1 and Tphi must be positive")
        if self.dims < 2:
            raise ValueError("need at least two levels")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def omega_drive(self) -> float:
        return self.omega01 + self.drive_detuning

    def transition_frequency(self, n: int) -> float:
        """Angular frequency of the ``|n-1> -> |n>`` transition."""
        return self.omega01 + (n - 1) * self.alpha


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose factor ``1 / (exp(hbar omega / k T) - 1)``."""
    if temperature <= 0:
        return 0.0
    x = hbar * omega / (k_B * temperature)
    return 0.0 if x > 700 else 1.0 / math.expm1(x)


def level_energies(device: DeviceParams) -> np.ndarray:
    n = np.arange(device.dims)
    return hbar * (device.omega01 * n + 0.5 * device.alpha * (n - 1) * n)


def thermal_equilibrium(device: DeviceParams) -> np.ndarray:
    """Boltzmann populations of the ``d`` anharmonic levels."""
    if device.temperature == 0:
        p = np.zeros(device.dims)
        p[0] = 1.0
        return p
    e = level_energies(device)
    w = np.exp(-(e - e[0]) / (k_B * device.temperature))
    return w / w.sum()


# ---------------------------------------------------------------------------
# operators


def annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)


def number(d: int) -> np.ndarray:
    return np.diag(np.arange(d)).astype(complex)


def static_hamiltonian(device: DeviceParams) -> np.ndarray:
    """Drift in the frame rotating at the drive frequency (rad/s)."""
    n = np.arange(device.dims)
    return np.diag(-device.drive_detuning * n + 0.5 * device.alpha * (n - 1) * n).astype(complex)


def drive_hamiltonian(t, envelope, device: DeviceParams) -> np.ndarray:
    """``H(t)`` in the drive frame for complex envelope value(s) ``envelope``.

    The lab-frame drive ``Re[c exp(i w_D t)] (a + a^dag)`` becomes
    ``(c a + c* a^dag) / 2`` plus, unless ``device.rwa``, the counter-rotating
    part ``(c* exp(-2i w_D t) a + h.c.) / 2``.
    """
    a = annihilation(device.dims)
    c = _effective_envelope(np.asarray(t, dtype=float), np.asarray(envelope, dtype=complex), device)
    h0 = static_hamiltonian(device)
    drive = 0.5 * (c[..., None, None] * a + np.conj(c)[..., None, None] * a.conj().T)
    return h0 + drive


def _effective_envelope(t, c, device: DeviceParams):
    if device.rwa:
        return c
    return c + np.conj(c) * np.exp(-2j * device.omega_drive * t)


def lindblad_dissipators(device: DeviceParams) -> list[np.ndarray]:
    """Collapse operators with rates folded in.

    Each ladder transition ``|n-1> <-> |n>`` relaxes at ``n (1 + nbar_n) / T1``
    and is excited at ``n nbar_n / T1`` with ``nbar_n`` the Bose factor at that
    transition's frequency; pure dephasing is ``sqrt(2 / Tphi) n``.
    """
    if not device.decoherence:
        return []
    d = device.dims
    ops = []
    for n in range(1, d):
        nbar = thermal_occupation(device.transition_frequency(n), device.temperature)
        down = np.zeros((d, d), complex)
        down[n - 1, n] = math.sqrt(n)
        ops.append(math.sqrt((1 + nbar) / device.T1) * down)
        if nbar > 0:
            ops.append(math.sqrt(nbar / device.T1) * down.conj().T)
    if math.isfinite(device.Tphi):
        ops.append(math.sqrt(2.0 / device.Tphi) * number(d))
    return ops


def _commutator_super(x: np.ndarray) -> np.ndarray:
    eye = np.eye(x.shape[0])
    return -1j * (np.kron(x, eye) - np.kron(eye, x.T))


def dissipator_super(ops) -> np.ndarray | None:
    if not ops:
        return None
    d = ops[0].shape[0]
    eye = np.eye(d)
    out = np.zeros((d * d, d * d), complex)
    for L in ops:
        LdL = L.conj().T @ L
        out += np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)
    return out


# ---------------------------------------------------------------------------
# integration


def chain_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product ``M[N-1] ... M[1] M[0]`` by pairwise reduction."""
    mats = np.asarray(mats)
    while len(mats) > 1:
        if len(mats) % 2:
            eye = np.broadcast_to(np.eye(mats.shape[-1], dtype=mats.dtype), (1,) + mats.shape[1:])
            mats = np.concatenate([mats, eye])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _spectral_estimate(device: DeviceParams, cmax: float) -> float:
    e = np.diag(static_hamiltonian(device)).real
    spread = 0.5 * (e.max() - e.min())
    factor = 1.0 if device.rwa else 2.0
    return spread + factor * cmax * math.sqrt(device.dims - 1)


def step_count(waveform: Waveform, device: DeviceParams, n_steps: int | None = None) -> int:
    if n_steps is not None:
        return int(n_steps)
    cmax = float(np.max(np.abs(waveform.envelope))) if len(waveform.envelope) else 0.0
    h = min(waveform.sample_period / 8, 1.0 / (40.0 * max(_spectral_estimate(device, cmax), 1.0)))
    if not device.rwa and cmax > 0:
        # resolve the counter-rotating phase exp(-2i w_D t)
        h = min(h, 0.15 / (2.0 * device.omega_drive))
    if device.max_step is not None:
        h = min(h, device.max_step)
    return max(1, math.ceil(waveform.duration / h - 1e-9))


def _nodes(waveform: Waveform, n_steps: int):
    """Envelope at step starts, midpoints and ends (Simpson nodes)."""
    T = waveform.duration
    grid = np.linspace(0.0, T, 2 * n_steps + 1)
    env = waveform.envelope
    if not np.any(env):
        c = np.zeros_like(grid, dtype=complex)
    else:
        spline = CubicSpline(waveform.t, env, extrapolate=True)
        c = spline(grid)
        # beyond the first/last grid sample the drive is held at its edge value
        c[grid < waveform.t[0]] = env[0]
        c[grid > waveform.t[-1]] = env[-1]
    return grid, c, T / n_steps


@dataclass
class Propagator:
    """Closed-system unitary and, when requested, the open-system superoperator."""

    unitary: np.ndarray | None = None
    superop: np.ndarray | None = None
    n_steps: int = 0

    @property
    def dims(self) -> int:
        if self.unitary is not None:
            return self.unitary.shape[0]
        return int(round(math.sqrt(self.superop.shape[0])))


def _magnus_steps(waveform: Waveform, device: DeviceParams, n_steps: int | None) -> np.ndarray:
    """Per-step unitaries from the fourth-order Magnus expansion."""
    n_steps = step_count(waveform, device, n_steps)
    grid, c, h = _nodes(waveform, n_steps)
    H = drive_hamiltonian(grid, c, device)
    H1, H2, H3 = H[0:-1:2], H[1::2], H[2::2]
    comm = H3 @ H1 - H1 @ H3
    K = (h / 6) * (H1 + 4 * H2 + H3) - 1j * (h * h / 12) * comm
    K = 0.5 * (K + K.conj().transpose(0, 2, 1))
    w, v = np.linalg.eigh(K)
    return (v * np.exp(-1j * w)[:, None, :]) @ v.conj().transpose(0, 2, 1)


def unitary_propagator(waveform: Waveform, device: DeviceParams, n_steps: int | None = None) -> np.ndarray:
    """Fourth-order Magnus propagator of the closed system over the waveform."""
    u = chain_product(_magnus_steps(waveform, device, n_steps))
    res = np.linalg.norm(u @ u.conj().T - np.eye(device.dims))
    if res > 1e-9:
        raise IntegrationError(f"unitarity residual {res:.3e} exceeds 1e-9")
    return u


def superoperator_propagator(waveform: Waveform, device: DeviceParams, n_steps: int | None = None,
                             method: str = "split") -> np.ndarray:
    """Propagator of the Lindblad equation over the waveform.

    ``method="split"`` wraps each Magnus unitary step in half-steps of the
    (time-independent) dissipator, ``exp(D h/2) U_k exp(D h/2)``; this is second
    order in the step but the dissipative rates are tiny on the step scale.
    ``method="magnus"`` applies the fourth-order Magnus expansion to the full
    Lindbladian and is several times slower.
    """
    d = device.dims
    n = step_count(waveform, device, n_steps)
    D = dissipator_super(lindblad_dissipators(device))
    if method == "split":
        u = _magnus_steps(waveform, device, n)
        steps = u[:, :, None, :, None] * u.conj()[:, None, :, None, :]
        steps = steps.reshape(n, d * d, d * d)
        if D is None:
            s = chain_product(steps)
        else:
            # time order: half, U_1, full, U_2, ..., full, U_N, half
            half = scipy.linalg.expm(D * (waveform.duration / n) / 2)
            full = half @ half
            factors = steps @ full[None]
            factors[0] = steps[0] @ half
            s = half @ chain_product(factors)
    elif method == "magnus":
        grid, c, h = _nodes(waveform, n)
        a = annihilation(d)
        ce = _effective_envelope(grid, c, device)
        L0 = _commutator_super(static_hamiltonian(device))
        if D is not None:
            L0 = L0 + D
        Sa = 0.5 * _commutator_super(a)
        Sad = 0.5 * _commutator_super(a.conj().T)
        L = L0[None] + ce[:, None, None] * Sa[None] + np.conj(ce)[:, None, None] * Sad[None]
        L1, L2, L3 = L[0:-1:2], L[1::2], L[2::2]
        omega = (h / 6) * (L1 + 4 * L2 + L3) + (h * h / 12) * (L3 @ L1 - L1 @ L3)
        s = chain_product(scipy.linalg.expm(omega))
    else:
        raise ValueError(f"unknown method {method!r}")
    check_trace_preserving(s, d)
    return s


def check_trace_preserving(s: np.ndarray, d: int, tol: float = 1e-9) -> None:
    t = np.eye(d).ravel()
    res = float(np.max(np.abs(t @ s - t)))
    if res > tol:
        raise IntegrationError(f"trace-preservation residual {res:.3e} exceeds {tol}")


def unitary_to_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def apply_superop(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return (s @ rho.ravel()).reshape(d, d)


def propagator(waveform: Waveform, device: DeviceParams, open: bool = True, n_steps: int | None = None) -> Propagator:
    if open:
        return Propagator(superop=superoperator_propagator(waveform, device, n_steps), n_steps=step_count(waveform, device, n_steps))
    return Propagator(unitary=unitary_propagator(waveform, device, n_steps), n_steps=step_count(waveform, device, n_steps))


# ---------------------------------------------------------------------------
# states


def ground_state(d: int) -> np.ndarray:
    rho = np.zeros((d, d), complex)
    rho[0, 0] = 1.0
    return rho


def basis_state(d: int, n: int) -> np.ndarray:
    rho = np.zeros((d, d), complex)
    rho[n, n] = 1.0
    return rho


def thermal_state(device: DeviceParams) -> np.ndarray:
    return np.diag(thermal_equilibrium(device)).astype(complex)


def initial_state(device: DeviceParams) -> np.ndarray:
    """Thermal equilibrium when decoherence is modeled, else the ground state."""
    if device.decoherence and device.temperature > 0:
        return thermal_state(device)
    return ground_state(device.dims)


def check_state(rho: np.ndarray, trace_tol: float = 1e-9, psd_tol: float = 1e-10) -> None:
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise IntegrationError(f"trace drifted to {np.trace(rho).real!r}")
    herm = np.linalg.norm(rho - rho.conj().T)
    if herm > 1e-12 * max(1.0, np.linalg.norm(rho)) * rho.shape[0]:
        raise IntegrationError(f"hermiticity residual {herm:.3e}")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w.min() < -psd_tol:
        raise IntegrationError(f"negative eigenvalue {w.min():.3e}")


def evolve(state: np.ndarray, waveform: Waveform, device: DeviceParams, open: bool = True, n_steps: int | None = None) -> np.ndarray:
    """Evolve a density matrix across a rendered waveform (buffer included)."""
    if open:
        out = apply_superop(superoperator_propagator(waveform, device, n_steps), state)
    else:
        u = unitary_propagator(waveform, device, n_steps)
        out = u @ state @ u.conj().T
    out = 0.5 * (out + out.conj().T)
    check_state(out)
    return out


# ---------------------------------------------------------------------------
# gates


@dataclass
class GateResult:
    unitary: np.ndarray
    projected: np.ndarray
    target: np.ndarray
    distance: float
    leakage: float
    superop: np.ndarray | None = None


def projected_unitary(u: np.ndarray) -> np.ndarray:
    """Computational 2x2 block of a d-level unitary (not unitary if leaky)."""
    return np.asarray(u)[:2, :2]


def closest_unitary(m: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(m)
    return w @ vh


def gate_infidelity(m: np.ndarray, target: np.ndarray) -> float:
    """Average gate infidelity of a (possibly leaky) 2x2 block ``m`` w.r.t. ``target``."""
    d = 2
    tr = np.trace(target.conj().T @ m)
    f = (np.trace(m.conj().T @ m).real + abs(tr) ** 2) / (d * (d + 1))
    return float(1.0 - f)


def leakage_of(u: np.ndarray) -> float:
    """Population leaving the qubit subspace, averaged over |0> and |1>."""
    blk = np.abs(np.asarray(u)[2:, :2]) ** 2
    return float(blk.sum() / 2)


def simulate_gate(
    spec: PulseSpec,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    open: bool = False,
    target: np.ndarray | None = None,
) -> GateResult:
    """Closed-system propagator of one pulse slot plus its qubit-block diagnostics."""
    wf = render_pulse(spec, chain)
    u = unitary_propagator(wf, device)
    proj = projected_unitary(u)
    if spec.uses_vz and spec.vz_correction:
        zc = np.diag(np.exp(1j * spec.vz_correction * np.arange(2)))
        proj = zc @ proj @ zc
    if target is None:
        target = r_axis(math.pi / 2, spec.drive_phase)
    s = superoperator_propagator(wf, device) if open else None
    return GateResult(u, proj, target, phase_distance(closest_unitary(proj), target), leakage_of(u), s)


def frame_rotation(d: int, phi: float) -> np.ndarray:
    """``exp(i phi n)``: the d-level extension of ``Z_phi`` (up to phase)."""
    return np.diag(np.exp(1j * phi * np.arange(d)))


class GateChannel:
    """Superoperators of one calibrated pulse slot as a function of drive phase.

    ``C(g) = Z(g) K(g) Z(-g)``. K is constant for a phase-covariant chain under
    the rotating-wave approximation. Otherwise it is a low-order trigonometric
    polynomial in ``g``: mixer image, carrier leakage and counter-rotating terms
    enter through ``e^{ig}`` and ``e^{2ig}``. K is sampled at ``n_phase`` phases
    and interpolated. Passing ``n_phase=1`` forces the covariant approximation.
    """

    def __init__(self, spec: PulseSpec, device: DeviceParams, chain: SignalChainParams | None = None,
                 open: bool = True, n_phase: int | None = None):
        self.spec = spec
        self.device = device
        self.chain = chain or SignalChainParams()
        self.open = open
        if n_phase is None:
            n_phase = 1 if (self.chain.phase_covariant and device.rwa) else 8
        self.n_phase = int(n_phase)
        d = device.dims
        self.d = d
        phases = TWO_PI * np.arange(self.n_phase) / self.n_phase
        ks = []
        for g in phases:
            wf = render_pulse(replace(spec, drive_phase=float(g)), self.chain)
            if open:
                c = superoperator_propagator(wf, device)
            else:
                c = unitary_to_superop(unitary_propagator(wf, device))
            z = frame_rotation(d, -g)
            ks.append(np.kron(z, z.conj()) @ c @ np.kron(z.conj(), z))
        ks = np.array(ks)
        self._coef = np.fft.fft(ks, axis=0) / self.n_phase
        self._harm = np.fft.fftfreq(self.n_phase, 1.0 / self.n_phase)
        self._zdiag = np.arange(d)[:, None] - np.arange(d)[None, :]
        self._cache: dict[float, np.ndarray] = {}

    @cached_property
    def mean_kernel(self) -> np.ndarray:
        return self._coef[0]

    def kernel(self, gamma: float) -> np.ndarray:
        if self.n_phase == 1:
            return self._coef[0]
        w = np.exp(1j * self._harm * gamma)
        if self.n_phase % 2 == 0:
            # split the Nyquist term symmetrically so real phases stay real
            w[self.n_phase // 2] = math.cos(self.n_phase // 2 * gamma)
        return np.tensordot(w, self._coef, axes=1)

    def superop(self, gamma: float) -> np.ndarray:
        key = round(gamma % TWO_PI, 12)
        s = self._cache.get(key)
        if s is None:
            ph = np.exp(1j * gamma * self._zdiag).ravel()
            s = ph[:, None] * self.kernel(gamma) * np.conj(ph)[None, :]
            if len(self._cache) < 4096:
                self._cache[key] = s
        return s

    def covariant_superop(self, gamma: float) -> np.ndarray:
        ph = np.exp(1j * gamma * self._zdiag).ravel()
        return ph[:, None] * self.mean_kernel * np.conj(ph)[None, :]


@dataclass
class CalibratedGate:
    """An X_pi/2 pulse with its symmetric virtual-Z correction ``xi``."""

    spec: PulseSpec
    xi: float = 0.0
    info: dict = field(default_factory=dict)


def run_schedule(
    schedule,
    device: DeviceParams,
    gate: CalibratedGate,
    chain: SignalChainParams | None = None,
    frame: FrameState | None = None,
    state: np.ndarray | None = None,
    open: bool = True,
    channel_cache: GateChannel | None = None,
) -> tuple[np.ndarray, FrameState]:
    """Execute a VZ/XP schedule on the device; returns the final state and frame.

    VZ gates only move the frame. Every XP must be a pi/2 rotation; it is played
    as ``Z_xi``, the calibrated pulse at the effective drive phase, ``Z_xi``.
    """
    chain = chain or SignalChainParams()
    d = device.dims
    frame = frame or FrameState.zeros()
    rho = ground_state(d) if state is None else state
    ch = channel_cache or GateChannel(gate.spec, device, chain, open=open)
    vec = rho.ravel()
    for op in schedule:
        if isinstance(op, VZ):
            frame = apply_virtual_z(frame, op.channel, -op.phase)
        elif isinstance(op, XP):
            if abs(op.theta - math.pi / 2) > 1e-12:
                raise ValueError("only calibrated pi/2 rotations can be played")
            frame = apply_virtual_z(frame, op.channel, -gate.xi)
            g = effective_drive_phase(frame, op.channel, op.gamma)
            vec = ch.superop(g) @ vec
            frame = apply_virtual_z(frame, op.channel, -gate.xi)
        else:
            raise TypeError(f"unknown schedule entry {op!r}")
    out = vec.reshape(d, d)
    return 0.5 * (out + out.conj().T), frame


# ---------------------------------------------------------------------------
# readout


def measure_populations(state: np.ndarray, confusion: np.ndarray | None = None,
                        shots: int | None = None, seed: int | None = None) -> np.ndarray:
    """Populations ``(p0, p1, p2)``.

    Without ``shots`` and ``confusion`` these are the exact diagonals. Otherwise
    levels above |2> are read as "2", ``shots`` outcomes are drawn and the
    row-stochastic ``confusion[true, measured]`` is applied.
    """
    diag = np.real(np.diag(state))
    p = np.zeros(3)
    p[: min(3, len(diag))] = diag[:3]
    if confusion is None and shots is None:
        return p
    q = np.array([diag[0], diag[1] if len(diag) > 1 else 0.0, max(0.0, 1.0 - diag[0] - (diag[1] if len(diag) > 1 else 0.0))])
    q = np.clip(q, 0, None)
    q = q / q.sum()
    if confusion is not None:
        confusion = np.asarray(confusion, dtype=float)
        if np.any(confusion < 0) or not np.allclose(confusion.sum(axis=1), 1.0):
            raise ValueError("confusion matrix must be row-stochastic")
    if shots is None:
        return q @ confusion
    rng = np.random.Generator(np.random.Philox(seed or 0))
    if confusion is not None:
        q = q @ confusion
    counts = rng.multinomial(int(shots), q / q.sum())
    return counts / shots


def invert_povm(measured, confusion: np.ndarray) -> np.ndarray:
    """Undo assignment errors: the left inverse of ``p @ confusion``."""
    confusion = np.asarray(confusion, dtype=float)
    if abs(np.linalg.det(confusion)) < 1e-12:
        raise np.linalg.LinAlgError("confusion matrix is singular")
    return np.asarray(measured) @ np.linalg.inv(confusion)
