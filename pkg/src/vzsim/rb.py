"""Randomized benchmarking experiments on the simulated device."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .clifford import BASES, CliffordTable, build_clifford_table, interleave, rb_sequence
from .device import (
    CalibratedGate,
    DeviceParams,
    GateChannel,
    _commutator_super,
    dissipator_super,
    frame_rotation,
    initial_state,
    lindblad_dissipators,
    measure_populations,
    static_hamiltonian,
)
from .fitting import FitResult, epc, epc_stderr, epg, epg_stderr, fit_rb, lpg, lpg_stderr
from .gates import VZ, XP, r_axis
from .pulses import SignalChainParams, render_pulse
from .serialize import write_csv, write_json


@dataclass
class RbConfig:
    lengths: list
    n_seeds: int = 5
    seed: int = 0
    basis: str = "XY"
    interleaved_gate: int | None = None
    open: bool = True
    shots: int | None = None
    confusion: np.ndarray | None = None

    def __post_init__(self):
        lengths = [int(m) for m in self.lengths]
        if not lengths or any(m < 1 for m in lengths):
            raise ValueError("lengths must be positive")
        if any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise ValueError("lengths must be strictly increasing")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.lengths = lengths


@dataclass
class RbResult:
    config: RbConfig
    records: list  # (m, seed_index, p0, p1, p2)
    n_g: float
    fit_p0: FitResult
    fit_p2: FitResult | None
    EPC: float
    EPG: float
    LPG: float | None
    stderr_EPC: float
    stderr_EPG: float
    stderr_LPG: float | None
    extra: dict = field(default_factory=dict)

    def populations(self) -> np.ndarray:
        return np.array([r[2:] for r in self.records])

    def summary(self) -> dict:
        f = self.fit_p0
        out = {
            "A": f.A, "r": f.r, "B": f.B,
            "stderr_A": f.stderr_A, "stderr_r": f.stderr_r, "stderr_B": f.stderr_B,
            "EPC": self.EPC, "EPG": self.EPG, "LPG": self.LPG,
            "stderr_EPC": self.stderr_EPC, "stderr_EPG": self.stderr_EPG, "stderr_LPG": self.stderr_LPG,
            "n_g": self.n_g, "basis": self.config.basis, "converged": f.converged,
        }
        if self.fit_p2 is not None:
            out.update(leak_A=self.fit_p2.A, leak_r=self.fit_p2.r, leak_B=self.fit_p2.B)
        out.update(self.extra)
        return out

    def write_csv(self, path: str | Path) -> None:
        write_csv(path, ["m", "seed", "p0", "p1", "p2"], self.records)

    def write_summary(self, path: str | Path) -> None:
        write_json(path, self.summary())


class IdealGateChannel:
    """Error-free X_pi/2 rotation sandwiched between idle halves of a slot.

    Only decoherence (and the drift of the levels above |1>) acts during the
    idle halves, so RB on this channel measures the coherence limit.
    """

    def __init__(self, device: DeviceParams, slot_duration: float = 20e-9, open: bool = True):
        d = device.dims
        self.d = d
        lind = _commutator_super(static_hamiltonian(device))
        D = dissipator_super(lindblad_dissipators(device)) if open else None
        if D is not None:
            lind = lind + D
        self._half = scipy.linalg.expm(lind * slot_duration / 2)
        self._cache: dict = {}

    def superop(self, gamma: float) -> np.ndarray:
        key = round(gamma % (2 * math.pi), 12)
        s = self._cache.get(key)
        if s is None:
            u = np.eye(self.d, dtype=complex)
            u[:2, :2] = r_axis(math.pi / 2, gamma)
            s = self._half @ np.kron(u, u.conj()) @ self._half
            if len(self._cache) < 4096:
                self._cache[key] = s
        return s


def _thread_count() -> int:
    env = os.environ.get("VZSIM_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ValueError(f"VZSIM_THREADS must be an integer, got {env!r}") from None
    return n


def ordered_map(fn, items) -> list:
    """Map preserving input order; parallel across ``VZSIM_THREADS`` workers."""
    items = list(items)
    n = min(_thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _compiled_words(table: CliffordTable, basis: str):
    """Per Clifford: list of ``("z", phi)`` and ``("x", gamma)`` steps."""
    gates = BASES[basis]
    out = []
    for word in table.words[basis]:
        steps = []
        for g in word:
            for op in gates[g]:
                if isinstance(op, VZ):
                    steps.append(("z", op.phase))
                elif isinstance(op, XP):
                    steps.append(("x", op.gamma))
        out.append(steps)
    return out


def simulate_sequence(sequence, table: CliffordTable, basis: str, channel, xi: float, rho0: np.ndarray) -> np.ndarray:
    """Final density matrix of a Clifford index sequence with frame tracking.

    Frame convention matches ``run_schedule``: ``VZ(phi)`` shifts the frame by
    ``-phi``; a pulse plays as ``Z_xi``, pulse at the frame phase, ``Z_xi``.
    """
    words = _compiled_words(table, basis)
    d = rho0.shape[0]
    vec = rho0.ravel().astype(complex)
    frame = 0.0
    for c in sequence:
        for kind, val in words[c]:
            if kind == "z":
                frame -= val
            else:
                frame -= xi
                vec = channel.superop(val + frame) @ vec
                frame -= xi
    out = vec.reshape(d, d)
    return 0.5 * (out + out.conj().T)


def make_channel(gate: CalibratedGate | None, device: DeviceParams, chain: SignalChainParams | None,
                 open: bool, ideal_slot: float | None = None):
    if gate is None:
        return IdealGateChannel(device, ideal_slot or 20e-9, open=open)
    return GateChannel(gate.spec, device, chain, open=open)


def slot_duration(gate: CalibratedGate, chain: SignalChainParams | None = None) -> float:
    return render_pulse(gate.spec, chain).duration


def run_rb_experiment(
    config: RbConfig,
    device: DeviceParams,
    gate: CalibratedGate | None = None,
    chain: SignalChainParams | None = None,
    channel=None,
    ideal_slot: float | None = None,
    fit_leakage: bool | None = None,
) -> RbResult:
    """Simulate, measure and fit an RB (or interleaved RB) experiment.

    ``gate=None`` uses error-free rotations (see ``IdealGateChannel``).
    The |0> population is fitted for EPC/EPG; the |2> population for LPG when
    the device has more than two levels.
    """
    table = build_clifford_table()
    chain = chain or SignalChainParams()
    channel = channel or make_channel(gate, device, chain, config.open, ideal_slot)
    xi = gate.xi if gate is not None else 0.0
    rho0 = initial_state(device) if config.open else _ground(device.dims)
    n_g = table.mean_gate_count(config.basis)

    work = [(m, s) for m in config.lengths for s in range(config.n_seeds)]

    def one(item):
        m, s = item
        seq = rb_sequence(m, config.seed, table, seed_index=s)
        if config.interleaved_gate is not None:
            seq = interleave(seq, config.interleaved_gate, table)
        rho = simulate_sequence(seq, table, config.basis, channel, xi, rho0)
        shot_seed = None
        if config.shots is not None:
            shot_seed = int(np.random.SeedSequence([config.seed, m, s]).generate_state(1, np.uint64)[0])
        p = measure_populations(rho, config.confusion, config.shots, shot_seed)
        return (m, s, float(p[0]), float(p[1]), float(p[2]))

    records = ordered_map(one, work)
    pts0 = [(m, p0) for m, _, p0, _, _ in records]
    fit0 = fit_rb(pts0)
    e = epc(fit0.r)
    g = epg(fit0.r, n_g)
    fit2 = None
    leak = leak_se = None
    if fit_leakage is None:
        fit_leakage = device.dims > 2
    if fit_leakage:
        fit2 = fit_rb([(m, p2) for m, _, _, _, p2 in records])
        B = min(max(fit2.B, 0.0), 1.0)
        leak = lpg(fit2.r, B, n_g)
        leak_se = lpg_stderr(fit2, n_g)
    return RbResult(config, records, n_g, fit0, fit2, e, g, leak, epc_stderr(fit0), epg_stderr(fit0, n_g),
                    leak_se)


def _ground(d: int) -> np.ndarray:
    rho = np.zeros((d, d), complex)
    rho[0, 0] = 1.0
    return rho


@dataclass
class ExpectedLeakage:
    lengths: list
    p2: np.ndarray
    fit: FitResult
    LPG: float
    n_g: float


def expected_leakage_curve(
    gate: CalibratedGate,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    lengths=(1, 50, 100, 200, 400, 700, 1000, 1500, 2200, 3000),
    basis: str = "XY",
    channel: GateChannel | None = None,
) -> ExpectedLeakage:
    """Seed-averaged |2> population of leakage RB and its LPG fit.

    Each random Clifford (recovery included) contributes the average Clifford
    channel, so ``p2(m) = [avg^(m+1) rho0]_22``. Pulse channels are taken as
    phase covariant.
    """
    from .calibration import average_clifford_superop

    channel = channel or GateChannel(gate.spec, device, chain, open=True, n_phase=1)
    avg = average_clifford_superop(gate, channel, basis)
    d = device.dims
    vec = initial_state(device).ravel()
    lengths = [int(m) for m in lengths]
    p2 = []
    prev = 0
    vec = avg @ vec  # recovery Clifford
    for m in lengths:
        vec = np.linalg.matrix_power(avg, m - prev) @ vec
        prev = m
        p2.append(float(vec.reshape(d, d)[2, 2].real))
    p2 = np.array(p2)
    fit = fit_rb(list(zip(lengths, p2)))
    n_g = build_clifford_table().mean_gate_count(basis)
    B = min(max(fit.B, 0.0), 1.0)
    return ExpectedLeakage(lengths, p2, fit, lpg(fit.r, B, n_g), n_g)
