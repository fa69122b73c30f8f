"""
Compiling single-qubit gates with virtual Z rotations
=====================================================

Any SU(2) gate can be written as Z X90 Z X90 Z. Only the X90 pulse is
physical; the Z rotations are absorbed into the phase of later pulses.
"""

import math

import numpy as np

from vzsim.gates import (
    NAMED_MATRICES,
    format_schedule,
    frame_tracked_unitary,
    phase_distance,
    rz,
    schedule_unitary,
    zxzxz_decompose,
    zxzxz_schedule,
)

# decompose a few named gates into their Euler angles
for name in ("H", "T", "Y90"):
    p = zxzxz_decompose(NAMED_MATRICES[name])
    print(f"{name:4s} theta={p.theta:.4f} phi={p.phi:.4f} lambda={p.lam:.4f}")

# the five-step schedule for a Hadamard
sched = zxzxz_schedule(zxzxz_decompose(NAMED_MATRICES["H"]))
print()
print(format_schedule(sched))

# the schedule reproduces the gate up to a global phase
print("\ndistance to H:", phase_distance(schedule_unitary(sched), NAMED_MATRICES["H"]))

# on hardware the Z steps only move the software frame; the pulses are played
# at shifted drive phases and a final frame rotation is left pending
played, frame = frame_tracked_unitary(sched)
print("pending frame phase:", round(frame.phase(), 6))
print("distance after frame correction:", phase_distance(rz(-frame.phase()) @ played, NAMED_MATRICES["H"]))

# a random unitary works just as well
rng = np.random.default_rng(7)
z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
u, _ = np.linalg.qr(z)
p = zxzxz_decompose(u)
print(f"\nrandom unitary: theta={p.theta:.4f}, "
      f"residual {phase_distance(schedule_unitary(zxzxz_schedule(p)), u):.1e}")
print("X90 pulses per gate: 2, whatever the target; pi/2 =", math.pi / 2)
