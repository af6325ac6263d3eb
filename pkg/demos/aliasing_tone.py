"""A single reference tone through the multirate benchmark loop.

The controller runs at 80 Hz while the plant is driven and sampled at 240 Hz.
A 60 Hz reference therefore produces output at 60 Hz and at its images
60 +- 80 Hz, folded into the 0..120 Hz band. This script lists those output
lines from a simulation and compares the measured power gain with the
closed-form PFG.

Run: python demos/aliasing_tone.py
"""
import numpy as np

from mrident import Signal, benchmark_loop, dft, simulate_loop
from mrident.pfg import pfg_brute_force, pfg_coefficients, pfg_true
from mrident.signals import bin_grid
from mrident.systems import frf

loop = benchmark_loop()
n = 2400                                   # 10 s, 0.1 Hz bins
k = 600                                    # 60 Hz
periods = 2 + loop.transient_samples(30.0) // n  # settle, then keep the last period
t = np.arange(periods * n)
r = np.cos(2 * np.pi * k * t / n)
_, y = simulate_loop(loop, Signal(r, loop.h_high))
Y = dft(Signal(y.samples[-n:], loop.h_high)).bins

print("output lines for a 60 Hz reference (one-sided, |Y| normalised by |R|):")
R = dft(Signal(r[-n:], loop.h_high)).bins
lines = np.flatnonzero(np.abs(Y[: n // 2 + 1]) > 1e-8 * np.abs(Y).max())
for b in lines:
    print(f"  {b * 0.1:6.1f} Hz   {abs(Y[b]) / abs(R[k]):.4e}")

omega = bin_grid(n, loop.h_high)
c = pfg_coefficients(frf(loop.plant, omega), frf(loop.controller, bin_grid(n // 3, loop.h_low)), 3)
print(f"\n|c_0| at 60 Hz (direct gain)     {abs(c[0, k, 0, 0]):.6e}")
print(f"closed-form PFG at 60 Hz         {pfg_true(loop, n).values[k]:.6e}")
print(f"simulated power gain at 60 Hz    {pfg_brute_force(loop, omega[k], n):.6e}")
