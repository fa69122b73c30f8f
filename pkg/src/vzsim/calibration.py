"""Gate calibration: ORR correction, amplitude, virtual-Z phase and DRAG beta."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, minimize_scalar

from .clifford import BASES, build_clifford_table
from .gates import SIGMA_X, SIGMA_Z, VZ, XP, phase_distance, r_axis, rx, rz, zxzxz_decompose
from .pulses import PulseSpec, SignalChainParams, render_pulse
from .serialize import write_json
from .device import (
    CalibratedGate,
    DeviceParams,
    GateChannel,
    closest_unitary,
    frame_rotation,
    gate_infidelity,
    initial_state,
    unitary_propagator,
)

HALF_PI = math.pi / 2

Propagate = Callable[[PulseSpec], np.ndarray]


class CalibrationError(RuntimeError):
    """Raised when a root bracket or a minimization cannot be established."""


# ---------------------------------------------------------------------------
# analytic ORR correction


@dataclass(frozen=True)
class OrrSolution:
    rotation_angle: float
    z_correction: float
    feasible: bool


def orr_correct(theta: float, lam: float) -> OrrSolution:
    """Rotation angle and symmetric Z correction that turn an ORR into ``X_theta``.

    ``lam`` is the axis tilt, ``tan(lam) = Delta / Omega``. Solutions exist when
    ``sin(theta / 2) / cos(lam) <= 1``; otherwise the result is flagged
    infeasible with NaN angles.
    """
    if not abs(lam) < HALF_PI:
        raise ValueError("tilt must satisfy |lambda| < pi/2")
    ratio = math.sin(theta / 2) / math.cos(lam)
    if ratio > 1.0 or ratio < -1.0:
        return OrrSolution(math.nan, math.nan, False)
    a = 2.0 * math.asin(ratio)
    # atan2 form stays finite at the boundary a = pi
    xi = math.atan2(math.sin(lam) * math.sin(a / 2), math.cos(a / 2)) if lam != 0 else 0.0
    if xi > HALF_PI:
        xi -= math.pi
    elif xi < -HALF_PI:
        xi += math.pi
    return OrrSolution(a, xi, True)


def orr_unitary(rotation_angle: float, lam: float) -> np.ndarray:
    """``exp(-i a/2 [cos(lam) X + sin(lam) Z'])`` with ``Z' = |1><1| - |0><0|``.

    ``Z'`` is the qubit energy operator, so ``lam > 0`` means the qubit sits
    above the drive.
    """
    gen = math.cos(lam) * SIGMA_X - math.sin(lam) * SIGMA_Z
    return scipy.linalg.expm(-0.5j * rotation_angle * gen)


def verify_orr(theta: float, lam: float, solution: OrrSolution) -> float:
    """Phase-gauged distance of ``Z_xi U1 Z_xi`` to ``X_theta``."""
    if not solution.feasible:
        raise ValueError("solution is infeasible")
    z = rz(solution.z_correction)
    return phase_distance(z @ orr_unitary(solution.rotation_angle, lam) @ z, rx(theta))


# ---------------------------------------------------------------------------
# coherence limit


def coherence_limit_epg(T1: float, Tphi: float, gate_time: float) -> float:
    """Average gate error of amplitude plus phase damping over ``gate_time``."""
    if T1 <= 0 or Tphi <= 0 or gate_time < 0:
        raise ValueError("T1, Tphi must be positive and gate_time non-negative")
    inv_t2 = 1.0 / (2.0 * T1) + 1.0 / Tphi
    return 1.0 - (3.0 + 2.0 * math.exp(-gate_time * inv_t2) + math.exp(-gate_time / T1)) / 6.0


# ---------------------------------------------------------------------------
# simulated gate helpers


def default_propagate(device: DeviceParams, chain: SignalChainParams | None = None) -> Propagate:
    chain = chain or SignalChainParams()

    def propagate(spec: PulseSpec) -> np.ndarray:
        return unitary_propagator(render_pulse(spec, chain), device)

    return propagate


def rotation_angle(u: np.ndarray) -> float:
    """Rotation angle of the polar-unitarized qubit block of ``u``."""
    return zxzxz_decompose(closest_unitary(np.asarray(u)[:2, :2])).theta


def symmetric_z(block: np.ndarray, xi: float) -> np.ndarray:
    z = np.diag(np.exp(1j * xi * np.arange(2)))
    return z @ block @ z


def analytic_xi(u: np.ndarray) -> float:
    """Symmetric correction ``-(phi + lambda) / 2`` of the unitarized qubit block."""
    p = zxzxz_decompose(closest_unitary(np.asarray(u)[:2, :2]))
    return -0.5 * (p.phi + p.lam)


def area_estimate(spec: PulseSpec, chain: SignalChainParams | None = None, target: float = HALF_PI) -> float:
    """Amplitude whose rendered envelope area equals ``target`` (two-level limit)."""
    wf = render_pulse(replace(spec, amplitude=1.0), chain)
    area = float(np.sum(np.abs(wf.envelope)) * wf.dt)
    if area <= 0:
        raise CalibrationError("pulse has zero area")
    return target / area


def calibrate_amplitude(
    spec: PulseSpec,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    target: float = HALF_PI,
    propagate: Propagate | None = None,
    initial: float | None = None,
    xtol: float = 1e-4,
) -> float:
    """Drive amplitude whose simulated rotation angle equals ``target``.

    The root of ``theta(Omega) - target`` is found by Brent's method inside a
    bracket of +-1 % around a proportional estimate; the bracket widens
    geometrically (at most eight times) until it changes sign.
    """
    propagate = propagate or default_propagate(device, chain)
    a0 = initial if initial is not None else area_estimate(spec, chain, target)

    def f(a):
        return rotation_angle(propagate(replace(spec, amplitude=a))) - target

    f0 = f(a0)
    a1 = a0 * target / (f0 + target) if f0 + target > 0 else a0
    lo, hi, width = a1 * 0.99, a1 * 1.01, 0.01
    flo, fhi = f(lo), f(hi)
    for _ in range(8):
        if flo < 0 < fhi:
            break
        width *= 2
        lo, hi = a1 * (1 - width), a1 * (1 + width)
        flo, fhi = f(lo), f(hi)
    else:
        raise CalibrationError("could not bracket the amplitude")
    return float(brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=100))


def trim_amplitude(spec: PulseSpec, propagate: Propagate, target: float = HALF_PI, steps: int = 2):
    """Cheap proportional re-trim ``Omega <- Omega target / theta``; returns (spec, u)."""
    u = propagate(spec)
    for _ in range(steps):
        spec = replace(spec, amplitude=spec.amplitude * target / rotation_angle(u))
        u = propagate(spec)
    return spec, u


def vz_objective(u: np.ndarray, xi: float, gamma: float = 0.0) -> float:
    return phase_distance(symmetric_z(np.asarray(u)[:2, :2], xi), r_axis(HALF_PI, gamma))


def calibrate_vz_phase(
    spec: PulseSpec,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    propagate: Propagate | None = None,
    u: np.ndarray | None = None,
) -> float:
    """Symmetric virtual-Z correction ``xi`` minimizing the distance to ``X_pi/2``.

    Starts from the analytic value for the unitarized block and refines it by a
    bounded scalar minimization of the leaky block's distance (the rotation
    angle is invariant under the symmetric correction, so the amplitude does
    not need re-trimming).
    """
    if u is None:
        propagate = propagate or default_propagate(device, chain)
        u = propagate(spec)
    x0 = analytic_xi(u)
    res = minimize_scalar(
        lambda x: vz_objective(u, x, spec.drive_phase),
        bounds=(x0 - 0.05, x0 + 0.05),
        method="bounded",
        options={"xatol": 1e-12, "maxiter": 200},
    )
    if not res.success:
        raise CalibrationError("virtual-Z phase minimization did not converge")
    xi = float(res.x)
    return 0.0 if abs(xi) < 1e-13 else xi


# ---------------------------------------------------------------------------
# leakage proxy


def average_clifford_superop(gate: CalibratedGate, channel: GateChannel, basis: str = "XY") -> np.ndarray:
    """Mean over the 24 Cliffords of their compiled channels (covariant pulses).

    For phase-covariant pulse channels a frame shift is identical to a physical
    Z rotation, so every Clifford can be evaluated from frame zero.
    """
    d = channel.d
    table = build_clifford_table()
    gates = BASES[basis]

    def zsup(phi):
        z = frame_rotation(d, phi)
        return np.kron(z, z.conj())

    zx = zsup(gate.xi)
    gate_sup = {}
    for name, ops in gates.items():
        s = np.eye(d * d, dtype=complex)
        for op in ops:
            if isinstance(op, VZ):
                s = zsup(op.phase) @ s
            else:
                s = zx @ channel.covariant_superop(op.gamma) @ zx @ s
        gate_sup[name] = s
    total = np.zeros((d * d, d * d), complex)
    for word in table.words[basis]:
        s = np.eye(d * d, dtype=complex)
        for g in word:
            s = gate_sup[g] @ s
        total += s
    return total / len(table)


def leakage_proxy(
    gate: CalibratedGate,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    n_cliffords: int = 2901,
    basis: str = "XY",
    channel: GateChannel | None = None,
) -> float:
    """Expected |2> population after ``n_cliffords`` random Cliffords."""
    channel = channel or GateChannel(gate.spec, device, chain, open=True, n_phase=1)
    avg = average_clifford_superop(gate, channel, basis)
    rho0 = initial_state(device)
    d = device.dims
    out = np.linalg.matrix_power(avg, n_cliffords) @ rho0.ravel()
    return float(out.reshape(d, d)[2, 2].real)


# ---------------------------------------------------------------------------
# DRAG beta


@dataclass
class BetaScan:
    beta: float
    value: float
    objective: str
    betas: list = field(default_factory=list)
    values: list = field(default_factory=list)
    refine_betas: list = field(default_factory=list)
    refine_values: list = field(default_factory=list)
    flat: bool = False
    refined: bool = False


def beta_bounds(device: DeviceParams, scale: float = 3.0) -> tuple[float, float]:
    b = scale / abs(device.alpha)
    return -b, b


def calibrate_beta(
    spec: PulseSpec,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    objective: str = "fidelity",
    bounds: tuple[float, float] | None = None,
    n_coarse: int = 61,
    n_cliffords: int = 2901,
    propagate: Propagate | None = None,
    refine_iter: int = 40,
    flat_tol: float = 1e-3,
) -> BetaScan:
    """Coarse scan and golden-section refine of the DRAG parameter.

    ``objective="fidelity"``: average gate infidelity of the simulated qubit
    block (virtual-Z corrected when the family uses it) after re-trimming the
    amplitude. ``objective="leakage"``: the long-sequence |2> population proxy.
    A scan whose relative spread is below ``flat_tol`` is flagged as flat.
    """
    if objective not in ("fidelity", "leakage"):
        raise ValueError(f"unknown objective {objective!r}")
    if not spec.uses_drag:
        raise ValueError(f"family {spec.family} has no DRAG quadrature")
    chain = chain or SignalChainParams()
    propagate = propagate or default_propagate(device, chain)
    lo, hi = bounds or beta_bounds(device)
    target = r_axis(HALF_PI, spec.drive_phase)
    state = {"amp": spec.amplitude or area_estimate(spec, chain)}

    def evaluate(beta: float) -> float:
        s = replace(spec, drag_beta=float(beta), amplitude=state["amp"])
        s, u = trim_amplitude(s, propagate, steps=2 if objective == "fidelity" else 1)
        state["amp"] = s.amplitude
        xi = calibrate_vz_phase(s, device, chain, u=u) if spec.uses_vz else 0.0
        if objective == "fidelity":
            return gate_infidelity(symmetric_z(u[:2, :2], xi), target)
        gate = CalibratedGate(replace(s, vz_correction=xi), xi)
        return leakage_proxy(gate, device, chain, n_cliffords)

    betas = np.linspace(lo, hi, n_coarse)
    values = np.array([evaluate(b) for b in betas])
    i = int(np.argmin(values))
    spread = float(values.max() - values.min())
    flat = spread <= flat_tol * max(abs(float(values.mean())), 1e-300)
    scan = BetaScan(float(betas[i]), float(values[i]), objective, betas.tolist(), values.tolist(), flat=flat)
    if flat or i in (0, n_coarse - 1):
        return scan
    trace_b, trace_v = [], []

    def tracked(b):
        v = evaluate(b)
        trace_b.append(float(b))
        trace_v.append(float(v))
        return v

    state["amp"] = spec.amplitude or state["amp"]
    res = minimize_scalar(
        tracked,
        bracket=(betas[i - 1], betas[i], betas[i + 1]),
        method="golden",
        options={"xtol": 1e-6, "maxiter": refine_iter},
    )
    scan.refine_betas, scan.refine_values = trace_b, trace_v
    if res.fun <= values[i]:
        scan.beta, scan.value, scan.refined = float(res.x), float(res.fun), True
    return scan


# ---------------------------------------------------------------------------
# family pipelines


def calibrate_gate(
    family: str,
    device: DeviceParams,
    chain: SignalChainParams | None = None,
    base: PulseSpec | None = None,
    beta_objective: str | None = None,
    n_coarse: int = 61,
    n_cliffords: int = 2901,
) -> CalibratedGate:
    """Calibrate an X_pi/2 pulse of ``family`` and attach a report in ``info``.

    DRAG optimizes beta for fidelity and DRAGZ for leakage unless
    ``beta_objective`` overrides it. VZ families get the symmetric correction.
    """
    chain = chain or SignalChainParams()
    spec = replace(base or PulseSpec(), family=family, drag_beta=0.0, vz_correction=0.0)
    propagate = default_propagate(device, chain)
    info: dict = {"family": family}
    if spec.uses_drag:
        objective = beta_objective or ("leakage" if spec.uses_vz else "fidelity")
        spec = replace(spec, drag_beta=1.0 / (2.0 * device.alpha))
        spec = replace(spec, amplitude=calibrate_amplitude(spec, device, chain, propagate=propagate))
        scan = calibrate_beta(spec, device, chain, objective, n_coarse=n_coarse,
                              n_cliffords=n_cliffords, propagate=propagate)
        spec = replace(spec, drag_beta=scan.beta)
        info[f"beta_{objective}"] = scan.beta
        info["beta_scan"] = asdict(scan)
    amp = calibrate_amplitude(spec, device, chain, propagate=propagate, initial=spec.amplitude or None)
    spec = replace(spec, amplitude=amp)
    u = propagate(spec)
    xi = calibrate_vz_phase(spec, device, chain, u=u) if spec.uses_vz else 0.0
    spec = replace(spec, vz_correction=xi)
    block = symmetric_z(u[:2, :2], xi)
    info.update(
        amplitude=amp,
        xi=xi,
        drag_beta=spec.drag_beta,
        duration=spec.duration,
        distance=vz_objective(u, xi, spec.drive_phase),
        infidelity=gate_infidelity(block, r_axis(HALF_PI, spec.drive_phase)),
        leakage=float(np.sum(np.abs(u[2:, :2]) ** 2) / 2),
    )
    return CalibratedGate(spec, xi, info)


def calibration_report(gates: list[CalibratedGate]) -> dict:
    out = []
    for g in gates:
        entry = {"Omega0": g.spec.amplitude, "xi": g.xi, "beta_fidelity": g.info.get("beta_fidelity"),
                 "beta_leakage": g.info.get("beta_leakage")}
        entry.update({k: v for k, v in g.info.items() if k not in entry})
        out.append(entry)
    return {"gates": out}


def write_calibration_json(path: str | Path, gates: list[CalibratedGate]) -> None:
    write_json(path, calibration_report(gates))
