"""SU(2) algebra, ZXZXZ decomposition and virtual-Z frame bookkeeping.

Conventions used throughout the package:

* ``Z_phi = exp(-i phi sigma_z / 2)``, i.e. ``diag(1, e^{i phi})`` up to phase.
* ``X_theta = exp(-i theta sigma_x / 2)``.
* A drive with phase ``gamma`` rotates about the axis ``cos(gamma) x + sin(gamma) y``,
  which equals ``Z_gamma X_theta Z_-gamma``; ``gamma = pi/2`` is the Y axis.
* A virtual ``Z_phi`` gate is executed by shifting the software frame of the
  channel by ``-phi``. The physically played pulse train then differs from the
  literal circuit only by a trailing ``Z_{-frame}``, which commutes with a
  measurement along Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
UNITARITY_TOL = 1e-8
DEFAULT_CHANNEL = "d0"

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


def wrap_angle(x: float) -> float:
    """Map an angle onto (-pi, pi]."""
    w = math.pi - math.fmod(math.pi - x, TWO_PI)
    if w > math.pi:
        w -= TWO_PI
    elif w <= -math.pi:
        w += TWO_PI
    return w + 0.0


def wrap_2pi(x: float) -> float:
    """Map an angle onto [0, 2 pi)."""
    w = math.fmod(x, TWO_PI)
    if w < 0:
        w += TWO_PI
    if w >= TWO_PI:
        w -= TWO_PI
    return w


def rz(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def r_axis(theta: float, gamma: float) -> np.ndarray:
    """Rotation by ``theta`` about the equatorial axis at angle ``gamma``."""
    n = math.cos(gamma) * SIGMA_X + math.sin(gamma) * SIGMA_Y
    return math.cos(theta / 2) * IDENTITY - 1j * math.sin(theta / 2) * n


# ---------------------------------------------------------------------------
# phase-gauged comparisons


def phase_align(a: np.ndarray, b: np.ndarray) -> complex:
    """Unit phase ``g`` maximising ``|tr(a^dag g b)|``, i.e. ``a ~ g b``."""
    t = np.vdot(b, a)  # tr(b^dag a)
    if abs(t) < 1e-300:
        return 1.0 + 0j
    return t / abs(t)


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between ``a`` and ``b`` after the optimal global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return float(np.linalg.norm(a - phase_align(a, b) * b))


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-10) -> bool:
    return phase_distance(a, b) <= atol


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])))


# ---------------------------------------------------------------------------
# Su(2) parameterisation


@dataclass(frozen=True)
class Su2Params:
    """Angles of ``U(theta, phi, lambda) = Z_phi X_theta Z_lambda``."""

    theta: float
    phi: float
    lam: float

    def canonical(self) -> "Su2Params":
        return zxzxz_decompose(u_from_zxz(self))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta, self.phi, self.lam)


def u_from_zxz(params: Su2Params | Sequence[float]) -> np.ndarray:
    """Explicit matrix of ``Z_phi X_theta Z_lambda`` (no global phase factor)."""
    if isinstance(params, Su2Params):
        theta, phi, lam = params.as_tuple()
    else:
        theta, phi, lam = params
    if not all(math.isfinite(v) for v in (theta, phi, lam)):
        raise ValueError("angles must be finite")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -1j * np.exp(1j * lam) * s],
            [-1j * np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c],
        ]
    )


def zxzxz_decompose(u: np.ndarray, degenerate_tol: float = 1e-12) -> Su2Params:
    """Canonical ``(theta, phi, lambda)`` of a 2x2 unitary.

    ``theta`` lies in [0, pi] and both phases in (-pi, pi]. When ``theta`` is 0
    only ``phi + lambda`` is defined and it is split evenly; when ``theta`` is pi
    only ``phi - lambda`` is defined and ``phi = -lambda`` is chosen.

    Raises
    ------
    ValueError
        If ``u`` is not a 2x2 unitary to within 1e-8.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {u.shape}")
    if unitarity_residual(u) > UNITARITY_TOL:
        raise ValueError("matrix is not unitary")
    c_abs, s_abs = abs(u[0, 0]), abs(u[1, 0])
    theta = 2.0 * math.atan2(s_abs, c_abs)
    if s_abs <= degenerate_tol:
        total = wrap_angle(float(np.angle(u[1, 1] / u[0, 0])))
        return Su2Params(0.0, total / 2, total / 2)
    if c_abs <= degenerate_tol:
        diff = wrap_angle(float(np.angle(u[1, 0] / u[0, 1])))
        return Su2Params(math.pi, diff / 2, -diff / 2)
    v = u * (abs(u[0, 0]) / u[0, 0])
    phi = wrap_angle(float(np.angle(1j * v[1, 0])))
    lam = wrap_angle(float(np.angle(1j * v[0, 1])))
    return Su2Params(theta, phi, lam)


# Table of common gates with their (theta, phi, lambda).
NAMED_GATES: dict[str, tuple[float, float, float]] = {
    "I": (0.0, 0.0, 0.0),
    "X": (math.pi, 0.0, 0.0),
    "Y": (math.pi, math.pi / 2, -math.pi / 2),
    "Z": (0.0, math.pi / 2, math.pi / 2),
    "X90": (math.pi / 2, 0.0, 0.0),
    "Y90": (math.pi / 2, math.pi / 2, -math.pi / 2),
    "S": (0.0, math.pi / 4, math.pi / 4),
    "H": (math.pi / 2, math.pi / 2, math.pi / 2),
    "X45": (math.pi / 4, 0.0, 0.0),
    "T": (0.0, math.pi / 8, math.pi / 8),
}

NAMED_MATRICES: dict[str, np.ndarray] = {
    "I": IDENTITY,
    "X": SIGMA_X,
    "Y": SIGMA_Y,
    "Z": SIGMA_Z,
    "X90": rx(math.pi / 2),
    "Y90": ry(math.pi / 2),
    "S": np.diag([1, 1j]),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "X45": rx(math.pi / 4),
    "T": np.diag([1, np.exp(0.25j * math.pi)]),
}


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class VZ:
    """Virtual ``Z_phase`` gate on a drive channel (zero duration)."""

    channel: str
    phase: float

    def to_line(self) -> str:
        return f"VZ {self.channel} {self.phase:.17g}"


@dataclass(frozen=True)
class XP:
    """Physical rotation by ``theta`` about the equatorial axis ``gamma``."""

    channel: str
    theta: float
    gamma: float = 0.0

    def to_line(self) -> str:
        return f"XP {self.channel} {self.theta:.17g} {self.gamma:.17g}"


ScheduleOp = VZ | XP


def xtheta_expand(theta: float, channel: str = DEFAULT_CHANNEL) -> list[ScheduleOp]:
    """Time-ordered five-gate schedule realising ``X_theta`` from two ``X_pi/2``.

    Matrix form: ``Z_-pi/2 . X_pi/2 . Z_(pi - theta) . X_pi/2 . Z_-pi/2``.
    """
    half = math.pi / 2
    return [
        VZ(channel, -half),
        XP(channel, half, 0.0),
        VZ(channel, math.pi - theta),
        XP(channel, half, 0.0),
        VZ(channel, -half),
    ]


def zxzxz_schedule(params: Su2Params, channel: str = DEFAULT_CHANNEL) -> list[ScheduleOp]:
    """Time-ordered schedule ``Z_(lam-pi/2), X_pi/2, Z_(pi-theta), X_pi/2, Z_(phi-pi/2)``."""
    half = math.pi / 2
    return [
        VZ(channel, wrap_angle(params.lam - half)),
        XP(channel, half, 0.0),
        VZ(channel, wrap_angle(math.pi - params.theta)),
        XP(channel, half, 0.0),
        VZ(channel, wrap_angle(params.phi - half)),
    ]


def schedule_unitary(schedule: Iterable[ScheduleOp]) -> np.ndarray:
    """Literal matrix product of a single-channel schedule (later gates on the left)."""
    u = IDENTITY.copy()
    for op in schedule:
        if isinstance(op, VZ):
            u = rz(op.phase) @ u
        else:
            u = r_axis(op.theta, op.gamma) @ u
    return u


def frame_tracked_unitary(
    schedule: Iterable[ScheduleOp], channel: str = DEFAULT_CHANNEL
) -> tuple[np.ndarray, "FrameState"]:
    """Product of the physically played pulses, with VZ gates absorbed into the frame.

    Returns the pulse-only unitary and the final frame. The literal circuit is
    ``rz(-frame) @ unitary``.
    """
    frame = FrameState({channel: 0.0})
    u = IDENTITY.copy()
    for op in schedule:
        if isinstance(op, VZ):
            frame = apply_virtual_z(frame, op.channel, -op.phase)
        else:
            gamma = effective_drive_phase(frame, op.channel, op.gamma)
            u = r_axis(op.theta, gamma) @ u
    return u, frame


def format_schedule(schedule: Iterable[ScheduleOp]) -> str:
    return "".join(op.to_line() + "\n" for op in schedule)


def parse_schedule(text: str) -> list[ScheduleOp]:
    ops: list[ScheduleOp] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "VZ" and len(parts) == 3:
            ops.append(VZ(parts[1], float(parts[2])))
        elif parts[0] == "XP" and len(parts) == 4:
            ops.append(XP(parts[1], float(parts[2]), float(parts[3])))
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    return ops


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True)
class FrameState:
    """Accumulated software phase per drive channel, stored in [0, 2 pi)."""

    channel_phase: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "channel_phase", {k: wrap_2pi(v) for k, v in self.channel_phase.items()}
        )

    @classmethod
    def zeros(cls, *channels: str) -> "FrameState":
        return cls({c: 0.0 for c in (channels or (DEFAULT_CHANNEL,))})

    def phase(self, channel: str = DEFAULT_CHANNEL) -> float:
        try:
            return self.channel_phase[channel]
        except KeyError:
            raise KeyError(f"unknown channel {channel!r}") from None


def apply_virtual_z(frame: FrameState, channel: str, phi: float) -> FrameState:
    """Return a new frame with ``phi`` added to ``channel``'s phase."""
    if channel not in frame.channel_phase:
        raise KeyError(f"unknown channel {channel!r}")
    phases = dict(frame.channel_phase)
    phases[channel] = phases[channel] + phi
    return FrameState(phases)


def effective_drive_phase(frame: FrameState, channel: str, gamma_nominal: float) -> float:
    return wrap_2pi(gamma_nominal + frame.channel_phase.get(channel, 0.0))


def two_qubit_drive_phase(
    kind: str,
    frame1: FrameState,
    frame2: FrameState,
    channel1: str = DEFAULT_CHANNEL,
    channel2: str = DEFAULT_CHANNEL,
) -> float:
    """Phase a two-qubit drive must carry given the single-qubit frames.

    Cross-resonance follows the target (second) qubit's frame; the parametric
    iSWAP drive follows the difference ``phi1 - phi2``.
    """
    kind = kind.upper()
    if kind == "CR":
        return frame2.phase(channel2)
    if kind == "ISWAP":
        return wrap_2pi(frame1.phase(channel1) - frame2.phase(channel2))
    raise ValueError(f"unsupported two-qubit drive kind {kind!r}")
