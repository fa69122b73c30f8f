"""Command-line entry point: ``vzsim decompose|rb|sweep|calibrate``."""

from __future__ import annotations

import argparse
import datetime
import logging
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .calibration import (
    calibrate_amplitude,
    calibrate_beta,
    calibrate_gate,
    calibrate_vz_phase,
    calibration_report,
    default_propagate,
)
from .clifford import build_clifford_table
from .config import ConfigError, ExperimentConfig, load_config, serialize_config
from .device import CalibratedGate
from .fitting import interleaved_gate_error, interleaved_gate_error_stderr
from .gates import NAMED_GATES, NAMED_MATRICES, format_schedule, unitarity_residual, zxzxz_decompose, zxzxz_schedule
from .pulses import render_pulse
from .rb import RbConfig, run_rb_experiment
from .serialize import write_csv, write_json

log = logging.getLogger("vzsim")


class CommandError(RuntimeError):
    """Failure that maps to a non-zero exit code."""


def _clifford_index(name: str) -> int:
    table = build_clifford_table()
    if name in NAMED_MATRICES:
        return table.index_of(NAMED_MATRICES[name])
    try:
        idx = int(name)
    except ValueError:
        raise CommandError(f"unknown interleaved gate {name!r}") from None
    if not 0 <= idx < len(table):
        raise CommandError(f"Clifford index {idx} out of range")
    return idx


def _rb_config(cfg: ExperimentConfig, interleaved: int | None = None) -> RbConfig:
    r = cfg.rb
    return RbConfig(list(r.lengths), r.n_seeds, cfg.seed, r.basis, interleaved, r.open, r.shots)


def _gate_for(cfg: ExperimentConfig, family: str | None = None) -> CalibratedGate:
    return calibrate_gate(family or cfg.pulse.family, cfg.device, cfg.chain, base=cfg.pulse,
                          n_coarse=cfg.calibrate.n_coarse)


def _write_waveform(out: Path, gate: CalibratedGate, cfg: ExperimentConfig) -> None:
    render_pulse(gate.spec, cfg.chain).to_csv(out / "waveform.csv")


# ---------------------------------------------------------------------------
# commands


def cmd_decompose(cfg: ExperimentConfig, out: Path | None, gate: str | None = None, matrix=None) -> int:
    gate = gate or cfg.decompose.gate
    matrix = matrix if matrix is not None else cfg.decompose.matrix
    if gate is not None:
        if gate not in NAMED_MATRICES:
            raise CommandError(f"unknown gate {gate!r}; known: {', '.join(NAMED_GATES)}")
        u = NAMED_MATRICES[gate]
    elif matrix is not None:
        vals = np.asarray(matrix, dtype=float)
        if vals.shape != (8,):
            raise CommandError("matrix needs 8 reals")
        u = (vals[0::2] + 1j * vals[1::2]).reshape(2, 2)
    else:
        raise CommandError("nothing to decompose: give a gate name or a matrix")
    if unitarity_residual(u) > 1e-8:
        raise CommandError("input matrix is not unitary")
    p = zxzxz_decompose(u)
    sched = zxzxz_schedule(p)
    print(f"theta = {p.theta:.17g}")
    print(f"phi = {p.phi:.17g}")
    print(f"lambda = {p.lam:.17g}")
    print(format_schedule(sched), end="")
    if out is not None:
        write_json(out / "summary.json", {"theta": p.theta, "phi": p.phi, "lambda": p.lam,
                                          "schedule": [op.to_line() for op in sched]})
    return 0


def cmd_rb(cfg: ExperimentConfig, out: Path) -> int:
    gate = None if cfg.rb.ideal_pulses else _gate_for(cfg)
    res = run_rb_experiment(_rb_config(cfg), cfg.device, gate, cfg.chain, ideal_slot=cfg.rb.ideal_slot)
    res.write_csv(out / "rb_curve.csv")
    summary = res.summary()
    summary["family"] = "ideal" if gate is None else gate.spec.family
    ok = res.fit_p0.converged
    if cfg.rb.interleaved_gate is not None:
        idx = _clifford_index(cfg.rb.interleaved_gate)
        inter = run_rb_experiment(_rb_config(cfg, idx), cfg.device, gate, cfg.chain, ideal_slot=cfg.rb.ideal_slot)
        inter.write_csv(out / "rb_curve_interleaved.csv")
        summary["interleaved_gate"] = cfg.rb.interleaved_gate
        summary["interleaved_r"] = inter.fit_p0.r
        summary["interleaved_error"] = interleaved_gate_error(res.fit_p0.r, inter.fit_p0.r)
        summary["interleaved_error_stderr"] = interleaved_gate_error_stderr(res.fit_p0, inter.fit_p0)
        ok = ok and inter.fit_p0.converged
    write_json(out / "summary.json", summary)
    if gate is not None:
        write_json(out / "calibration.json", calibration_report([gate]))
        _write_waveform(out, gate, cfg)
    if not ok:
        print("RB fit did not converge: " + (res.fit_p0.message or "see summary.json"), file=sys.stderr)
        return 1
    print(f"EPC = {res.EPC:.6e} +- {res.stderr_EPC:.1e}  EPG = {res.EPG:.6e} +- {res.stderr_EPG:.1e}")
    if res.LPG is not None:
        print(f"LPG = {res.LPG:.6e} +- {res.stderr_LPG:.1e}")
    return 0


def _apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "duration":
        return replace(cfg, pulse=replace(cfg.pulse, duration=value))
    if axis == "ssb_freq":
        return replace(cfg, pulse=replace(cfg.pulse, ssb_freq=value))
    if axis == "drag_beta":
        return replace(cfg, pulse=replace(cfg.pulse, drag_beta=value))
    raise CommandError(f"unknown sweep axis {axis!r}")


def _fit_status(res) -> str:
    fits = [res.fit_p0] + ([res.fit_p2] if res.fit_p2 is not None else [])
    if any(not f.converged for f in fits):
        return "fit not converged"
    if res.fit_p0.degenerate:
        return "fit degenerate"
    return "ok"


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    sw = cfg.sweep
    if sw.axis is None or sw.points < 1:
        raise CommandError("config has no sweep axis")
    families = sw.families or (cfg.pulse.family,)
    rows = []
    for family in families:
        for value in sw.values():
            point = _apply_axis(cfg, sw.axis, float(value))
            try:
                if sw.axis == "drag_beta":
                    # beta is the swept variable, so only amplitude and xi are calibrated
                    gate = _calibrate_fixed_beta(point, family)
                else:
                    gate = _gate_for(point, family)
                res = run_rb_experiment(_rb_config(point), point.device, gate, point.chain)
                rows.append([value, res.EPG, res.LPG, res.stderr_EPG, res.stderr_LPG, family, _fit_status(res)])
            except Exception as exc:  # per-point failures are recorded, the sweep continues
                log.warning("sweep point %s=%g failed: %s", sw.axis, value, exc)
                rows.append([value, math.nan, math.nan, math.nan, math.nan, family, f"error: {exc}"])
    write_csv(out / "sweep.csv", [sw.axis, "EPG", "LPG", "stderr_EPG", "stderr_LPG", "family", "status"], rows)
    return 0


def _calibrate_fixed_beta(cfg: ExperimentConfig, family: str) -> CalibratedGate:
    spec = replace(cfg.pulse, family=family, vz_correction=0.0)
    prop = default_propagate(cfg.device, cfg.chain)
    spec = replace(spec, amplitude=calibrate_amplitude(spec, cfg.device, cfg.chain, propagate=prop))
    xi = calibrate_vz_phase(spec, cfg.device, cfg.chain, propagate=prop) if spec.uses_vz else 0.0
    spec = replace(spec, vz_correction=xi)
    return CalibratedGate(spec, xi, {"family": family, "amplitude": spec.amplitude, "xi": xi,
                                     "drag_beta": spec.drag_beta})


def cmd_calibrate(cfg: ExperimentConfig, out: Path) -> int:
    what = cfg.calibrate.what
    dev, chain = cfg.device, cfg.chain
    prop = default_propagate(dev, chain)
    spec = cfg.pulse
    if what == "all":
        gate = _gate_for(cfg)
    else:
        spec = replace(spec, amplitude=calibrate_amplitude(spec, dev, chain, propagate=prop))
        info: dict = {"family": spec.family, "amplitude": spec.amplitude}
        xi = 0.0
        if what == "beta":
            scan = calibrate_beta(spec, dev, chain, cfg.calibrate.objective, n_coarse=cfg.calibrate.n_coarse,
                                  propagate=prop)
            spec = replace(spec, drag_beta=scan.beta)
            spec = replace(spec, amplitude=calibrate_amplitude(spec, dev, chain, propagate=prop,
                                                               initial=spec.amplitude))
            info[f"beta_{cfg.calibrate.objective}"] = scan.beta
            info["beta_scan"] = asdict(scan)
            info["amplitude"] = spec.amplitude
        if what == "vz" or (what == "beta" and spec.uses_vz):
            xi = calibrate_vz_phase(spec, dev, chain, propagate=prop)
        info["xi"] = xi
        spec = replace(spec, vz_correction=xi)
        gate = CalibratedGate(spec, xi, info)
    write_json(out / "calibration.json", calibration_report([gate]))
    _write_waveform(out, gate, cfg)
    print(f"Omega0 = {gate.spec.amplitude:.17g} rad/s  xi = {gate.xi:.17g}  beta = {gate.spec.drag_beta:.17g} s")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vzsim", description="Pulse-level virtual-Z gate simulator.")
    p.add_argument("command", choices=["decompose", "rb", "sweep", "calibrate"])
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--out", type=Path, help="output directory (default: output.dir from the config)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--gate", help="decompose: named gate such as H or T")
    p.add_argument("--matrix", help="decompose: 8 comma-separated reals (re, im of a row-major 2x2)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        out = args.out or (Path(cfg.output_dir) if (args.config or args.command != "decompose") else None)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            if not out.is_dir():
                raise ConfigError(f"output directory {out} is not writable")
            (out / "config.used").write_text(serialize_config(cfg))
            with open(out / "run.log", "a") as fh:  # timestamps live only here
                fh.write(f"{datetime.datetime.now().isoformat()} vzsim {args.command} seed={cfg.seed}\n")
        if args.command == "decompose":
            matrix = [float(x) for x in args.matrix.split(",")] if args.matrix else None
            return cmd_decompose(cfg, out, args.gate, matrix)
        handler = {"rb": cmd_rb, "sweep": cmd_sweep, "calibrate": cmd_calibrate}[args.command]
        return handler(cfg, out)
    except (ConfigError, CommandError, ValueError) as exc:
        print(f"vzsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
