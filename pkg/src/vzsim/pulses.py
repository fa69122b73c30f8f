"""Pulse shapes and the AWG -> filter -> IQ mixer signal chain.

Waveforms are carried as a complex envelope in the frame of the drive
frequency ``omega_D = omega_LO + omega_SSB``; the physical RF signal is
``Re[envelope * exp(i omega_D t)]``. The carrier itself is never sampled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.special import ndtr

FAMILIES = ("Gaussian", "DRAG", "GZ", "DRAGZ", "FILTZ")
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class SignalChainParams:
    """AWG, filter and mixer model.

    ``lo_leakage_dbm`` is taken relative to ``lo_reference_dbm``, the power of
    the peak calibrated drive envelope, so the carrier-leakage amplitude is
    ``10**((lo_leakage_dbm - lo_reference_dbm) / 20)`` times the pulse peak.
    """

    awg_sample_period: float = 1 / 1.2e9
    awg_filter_bandwidth: float | None = 300e6  # Gaussian low-pass, -3 dB point
    eps_q: float = 0.0
    eps_phi: float = 0.0
    lo_leakage_dbm: float | None = -65.0
    lo_reference_dbm: float = 0.0
    external_filter_cutoff: float | None = None  # Butterworth -3 dB point
    external_filter_order: int = 5
    compensate_filter_delay: bool = True
    compensate_filter_phase: bool = True
    oversample: int = 16

    def __post_init__(self):
        if self.awg_sample_period <= 0:
            raise ValueError("sample period must be positive")
        for name in ("awg_filter_bandwidth", "external_filter_cutoff"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")

    @property
    def eps_lo(self) -> float:
        if self.lo_leakage_dbm is None:
            return 0.0
        return 10.0 ** ((self.lo_leakage_dbm - self.lo_reference_dbm) / 20.0)

    @property
    def dt(self) -> float:
        return self.awg_sample_period / self.oversample

    @property
    def ideal(self) -> "SignalChainParams":
        """Same chain with every imperfection removed."""
        return replace(
            self,
            awg_filter_bandwidth=None,
            eps_q=0.0,
            eps_phi=0.0,
            lo_leakage_dbm=None,
            external_filter_cutoff=None,
        )

    @property
    def phase_covariant(self) -> bool:
        return self.eps_q == 0 and self.eps_phi == 0 and self.eps_lo == 0


@dataclass(frozen=True)
class PulseSpec:
    family: str = "DRAG"
    amplitude: float = 0.0  # peak of the Gaussian quadrature, rad/s
    duration: float = 13.33e-9
    sigma: float | None = None  # defaults to duration / 4
    drag_beta: float = 0.0  # s
    drive_phase: float = 0.0
    ssb_freq: float = TWO_PI * -120e6  # rad/s
    buffer: float = 6.7e-9
    vz_correction: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown pulse family {self.family!r}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.buffer < 0:
            raise ValueError("buffer must be non-negative")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def width(self) -> float:
        return self.sigma if self.sigma is not None else self.duration / 4

    @property
    def uses_drag(self) -> bool:
        return self.family in ("DRAG", "DRAGZ")

    @property
    def uses_vz(self) -> bool:
        return self.family in ("GZ", "DRAGZ", "FILTZ")


@dataclass(frozen=True)
class Waveform:
    """A rendered pulse slot.

    ``samples`` are the AWG points (I real, Q imaginary). ``t``, ``i`` and ``q``
    hold the filtered AWG outputs on the simulation grid and ``envelope`` the
    resulting drive-frame complex envelope.
    """

    sample_period: float
    samples: np.ndarray
    t: np.ndarray
    i: np.ndarray
    q: np.ndarray
    envelope: np.ndarray
    duration: float
    pulse_window: tuple[float, float] = (0.0, 0.0)
    spec: PulseSpec | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else self.duration

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ns", "I", "Q"])
            for tt, ii, qq in zip(self.t, self.i, self.q):
                w.writerow([f"{tt * 1e9:.17g}", f"{ii:.17g}", f"{qq:.17g}"])


# ---------------------------------------------------------------------------
# envelopes


def _lift(sigma: float, duration: float) -> float:
    return math.exp(-((duration / 2) ** 2) / (2 * sigma**2))


def gaussian_envelope(t, amplitude: float, sigma: float, duration: float):
    """Lifted Gaussian centred on ``t = 0``: zero at ``|t| = T/2``, peak ``amplitude``."""
    t = np.asarray(t, dtype=float)
    lift = _lift(sigma, duration)
    g = (np.exp(-(t**2) / (2 * sigma**2)) - lift) / (1 - lift)
    return np.where(np.abs(t) <= duration / 2, amplitude * g, 0.0)


def gaussian_derivative(t, amplitude: float, sigma: float, duration: float):
    t = np.asarray(t, dtype=float)
    lift = _lift(sigma, duration)
    d = -t / sigma**2 * np.exp(-(t**2) / (2 * sigma**2)) / (1 - lift)
    return np.where(np.abs(t) <= duration / 2, amplitude * d, 0.0)


def drag_quadrature(t, beta: float, amplitude: float, sigma: float, duration: float):
    """``beta`` times the analytic time derivative of the Gaussian envelope."""
    return beta * gaussian_derivative(t, amplitude, sigma, duration)


def ssb_modulate(envelope, gamma: float, omega_ssb: float, t):
    """AWG quadratures ``(V_I, V_Q)`` shifting a real envelope by ``omega_ssb``."""
    envelope = np.asarray(envelope, dtype=float)
    arg = omega_ssb * np.asarray(t, dtype=float) - gamma
    return envelope * np.cos(arg), -envelope * np.sin(arg)


# ---------------------------------------------------------------------------
# signal chain


def gaussian_filter_sigma(bandwidth: float | None) -> float:
    """Impulse-response width (s) of a Gaussian filter with -3 dB point ``bandwidth``."""
    if bandwidth is None or math.isinf(bandwidth):
        return 0.0
    return math.sqrt(math.log(2)) / (TWO_PI * bandwidth)


def awg_render(samples, sample_period: float, t, bandwidth: float | None = None):
    """Zero-order hold of ``samples`` convolved with a Gaussian low-pass filter.

    Sample ``k`` is held on ``[k T, (k + 1) T)``. The convolution of the hold
    with a Gaussian kernel is evaluated in closed form, so ``t`` may be any set
    of output times.
    """
    samples = np.asarray(samples, dtype=float)
    t = np.asarray(t, dtype=float)
    s = gaussian_filter_sigma(bandwidth)
    edges = np.arange(len(samples) + 1) * sample_period
    if s == 0.0:
        idx = np.floor(t / sample_period).astype(int)
        ok = (idx >= 0) & (idx < len(samples))
        out = np.zeros_like(t)
        out[ok] = samples[idx[ok]]
        return out
    # step response at every hold edge
    cdf = ndtr((t[:, None] - edges[None, :]) / s)
    return (cdf[:, :-1] - cdf[:, 1:]) @ samples


def butterworth_response(freq, cutoff: float | None, order: int = 5, compensate_delay: bool = True):
    """Complex transfer function of an analog Butterworth low-pass at ``freq`` (Hz)."""
    freq = np.asarray(freq, dtype=float)
    if cutoff is None or math.isinf(cutoff):
        return np.ones_like(freq, dtype=complex)
    wc = TWO_PI * cutoff
    z, p, k = signal.butter(order, wc, btype="low", analog=True, output="zpk")
    _, h = signal.freqs_zpk(z, p, k, worN=TWO_PI * np.abs(freq))
    h = np.where(freq < 0, np.conj(h), h)
    if compensate_delay:
        tau = float(np.sum(-np.real(1.0 / p)))
        h = h * np.exp(1j * TWO_PI * freq * tau)
    return h


def external_filter(x, dt: float, cutoff: float | None, order: int = 5, compensate_delay: bool = True):
    """Butterworth low-pass applied in the frequency domain with 4x zero padding.

    The low-frequency group delay is removed when ``compensate_delay`` is set,
    as if the AWG timing had been advanced to keep the pulse centred.
    """
    x = np.asarray(x)
    if cutoff is None or math.isinf(cutoff):
        return x.copy()
    n = len(x)
    nfft = int(2 ** math.ceil(math.log2(4 * n)))
    f = np.fft.fftfreq(nfft, dt)
    h = butterworth_response(f, cutoff, order, compensate_delay)
    y = np.fft.ifft(np.fft.fft(x, nfft) * h)[:n]
    return y.real if np.isrealobj(x) else y


def mixer_output(v_i, v_q, t, omega_ssb: float, eps_q: float = 0.0, eps_phi: float = 0.0, lo_amp: float = 0.0):
    """Drive-frame complex envelope of the IQ-mixer output.

    Equivalent to ``V_I cos(w_LO t) + V_Q (1 + eps_q) sin(w_LO t + eps_phi)
    + lo_amp cos(w_LO t)`` written as ``Re[c(t) exp(i w_D t)]``.
    """
    kappa = (1.0 + eps_q) * np.exp(1j * eps_phi)
    t = np.asarray(t, dtype=float)
    return (np.asarray(v_i) - 1j * kappa * np.asarray(v_q) + lo_amp) * np.exp(-1j * omega_ssb * t)


def mixer_rf(v_i, v_q, t, omega_lo: float, eps_q: float = 0.0, eps_phi: float = 0.0, lo_amp: float = 0.0):
    """Literal RF voltage at the mixer output (for cross-checks at low carrier)."""
    t = np.asarray(t, dtype=float)
    return (
        np.asarray(v_i) * np.cos(omega_lo * t)
        + np.asarray(v_q) * (1 + eps_q) * np.sin(omega_lo * t + eps_phi)
        + lo_amp * np.cos(omega_lo * t)
    )


def rf_from_envelope(envelope, t, omega_d: float):
    return np.real(np.asarray(envelope) * np.exp(1j * omega_d * np.asarray(t)))


def spectrum(x, dt: float | None = None, pad: int = 8):
    """Power spectrum ``|dt * FFT|**2`` with ``pad``-fold zero padding.

    Accepts a :class:`Waveform` (its drive-frame envelope is used) or samples
    with spacing ``dt``. Normalised so that ``sum(power) * df == sum(|x|**2) * dt``.
    """
    if isinstance(x, Waveform):
        dt = x.dt
        x = x.envelope
    if dt is None:
        raise ValueError("dt is required for raw samples")
    x = np.asarray(x)
    nfft = int(2 ** math.ceil(math.log2(max(pad, 8) * len(x))))
    X = np.fft.fftshift(np.fft.fft(x, nfft)) * dt
    f = np.fft.fftshift(np.fft.fftfreq(nfft, dt))
    return f, np.abs(X) ** 2


def spectral_amplitude(x, dt: float, freq: float) -> complex:
    """Continuous-time Fourier transform of samples at a single frequency (Hz)."""
    x = np.asarray(x)
    t = np.arange(len(x)) * dt
    return complex(np.sum(x * np.exp(-1j * TWO_PI * freq * t)) * dt)


# ---------------------------------------------------------------------------
# rendering


def slot_layout(spec: PulseSpec, sample_period: float) -> tuple[int, int, int]:
    """AWG sample counts ``(pre, pulse, post)`` of a slot; the buffer is split around the pulse."""
    n_pulse = int(round(spec.duration / sample_period))
    if n_pulse < 1:
        raise ValueError(f"pulse duration {spec.duration:g} s is shorter than one AWG sample")
    n_buf = int(round(spec.buffer / sample_period))
    n_delay = int(round(spec.delay / sample_period))
    pre = n_buf // 2 + n_delay
    return pre, n_pulse, n_buf - n_buf // 2


def awg_samples(spec: PulseSpec, chain: SignalChainParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Ideal AWG I/Q points of a slot and the pulse-centre time."""
    ts = chain.awg_sample_period
    pre, n_pulse, post = slot_layout(spec, ts)
    n = pre + n_pulse + post
    centre = (pre + n_pulse / 2) * ts
    tau = (np.arange(n) + 0.5) * ts - centre
    sigma, T, amp = spec.width, spec.duration, spec.amplitude
    env = gaussian_envelope(tau, amp, sigma, T)
    vi, vq = ssb_modulate(env, spec.drive_phase, spec.ssb_freq, tau)
    if spec.uses_drag and spec.drag_beta != 0.0:
        quad = drag_quadrature(tau, spec.drag_beta, amp, sigma, T)
        # quadrature axis chosen so the fidelity optimum sits at beta = 1 / (2 alpha)
        di, dq = ssb_modulate(quad, spec.drive_phase - math.pi / 2, spec.ssb_freq, tau)
        vi, vq = vi + di, vq + dq
    return vi, vq, centre


def render_pulse(spec: PulseSpec, chain: SignalChainParams | None = None) -> Waveform:
    """Render one pulse slot (buffer included) through the full chain."""
    chain = chain or SignalChainParams()
    ts = chain.awg_sample_period
    vi_s, vq_s, centre = awg_samples(spec, chain)
    n = len(vi_s)
    dt = chain.dt
    t = (np.arange(n * chain.oversample) + 0.5) * dt
    vi = awg_render(vi_s, ts, t, chain.awg_filter_bandwidth)
    vq = awg_render(vq_s, ts, t, chain.awg_filter_bandwidth)
    cutoff = chain.external_filter_cutoff
    if spec.family == "FILTZ" and cutoff is None:
        cutoff = 270e6
    if spec.family != "FILTZ":
        cutoff = None
    if cutoff is not None:
        z = external_filter(vi + 1j * vq, dt, cutoff, chain.external_filter_order, chain.compensate_filter_delay)
        if chain.compensate_filter_phase:
            # the filter's phase at the sideband tone is absorbed into the drive-phase reference
            f_tone = -spec.ssb_freq / TWO_PI
            h0 = butterworth_response(np.array([f_tone]), cutoff, chain.external_filter_order,
                                      chain.compensate_filter_delay)[0]
            z = z * np.exp(-1j * np.angle(h0))
        vi, vq = z.real, z.imag
    lo_amp = chain.eps_lo * abs(spec.amplitude)
    env = mixer_output(vi, vq, t - centre, spec.ssb_freq, chain.eps_q, chain.eps_phi, lo_amp)
    pre, n_pulse, _ = slot_layout(spec, ts)
    return Waveform(
        sample_period=ts,
        samples=vi_s + 1j * vq_s,
        t=t,
        i=vi,
        q=vq,
        envelope=env,
        duration=n * ts,
        pulse_window=(pre * ts, (pre + n_pulse) * ts),
        spec=spec,
    )


def idle_waveform(duration: float, chain: SignalChainParams | None = None) -> Waveform:
    chain = chain or SignalChainParams()
    n = max(1, int(round(duration / chain.awg_sample_period)))
    t = (np.arange(n * chain.oversample) + 0.5) * chain.dt
    z = np.zeros_like(t)
    return Waveform(chain.awg_sample_period, np.zeros(n, complex), t, z, z, z.astype(complex), n * chain.awg_sample_period)


def write_spectrum_csv(path: str | Path, freq, power) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f_MHz", "power_dB"])
        ref = max(float(np.max(power)), 1e-300)
        for f, p in zip(freq, power):
            w.writerow([f"{f / 1e6:.17g}", f"{10 * math.log10(max(p, 1e-300) / ref):.17g}"])
