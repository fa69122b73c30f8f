"""
Leakage versus pulse length
===========================

The edge-zero Gaussian has a zero in its spectrum. When that zero lands on
the |1>-|2> transition the leakage per gate drops sharply, near 11 ns for the
default transmon. For long pulses, thermal excitation sets a floor.
"""

from dataclasses import replace

from vzsim.calibration import calibrate_gate
from vzsim.device import DeviceParams
from vzsim.pulses import PulseSpec, SignalChainParams
from vzsim.rb import expected_leakage_curve

device = DeviceParams()
chain = SignalChainParams()
ts = chain.awg_sample_period

# seed-averaged leakage RB for GZ pulses, one AWG sample apart
print("  T/ns    LPG(46 mK)")
for k in range(9, 17):
    gate = calibrate_gate("GZ", device, chain, base=replace(PulseSpec(), duration=k * ts))
    print(f"{k * ts * 1e9:6.2f}    {expected_leakage_curve(gate, device, chain).LPG:.2e}")

# long pulses: heating at 46 mK versus a cold device
cold = replace(device, temperature=0.0)
print("\n  T/ns    LPG(46 mK)   LPG(0 K)")
for T in (30e-9, 45e-9, 60e-9):
    base = replace(PulseSpec(), duration=T)
    hot = expected_leakage_curve(calibrate_gate("GZ", device, chain, base=base), device, chain).LPG
    zero = expected_leakage_curve(calibrate_gate("GZ", cold, chain, base=base), cold, chain).LPG
    print(f"{T * 1e9:6.1f}    {hot:.2e}     {zero:.2e}")
