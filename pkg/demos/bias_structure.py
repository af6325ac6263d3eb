"""How an error in a lifted estimate spreads over the high-rate grid.

An error at one bin of a time-lifted plant estimate returns, after inverse
lifting, at the F high-rate bins that fold onto that low-rate bin. The same
error in one diagonal entry of a frequency-lifted estimate touches a single
high-rate bin. Bins above the 120 Hz Nyquist frequency are the
negative-frequency images of bins below it.

Run: python demos/bias_structure.py
"""
from mrident import benchmark_loop
from mrident.diagnostics import affected_bins, highrate_bias_from_lifted, single_bin_probe
from mrident.lifting import convert_time_to_freq
from mrident.multirate import analytic_lifted_js

loop = benchmark_loop()
K = 400                                    # low-rate bins; 1200 high-rate bins
J, S = analytic_lifted_js(loop, K)
for name, (Jk, Sk) in (("time-lifted", (J, S)),
                       ("frequency-lifted", (convert_time_to_freq(J), convert_time_to_freq(S)))):
    bias = highrate_bias_from_lifted(single_bin_probe(Jk, Sk, k=37))
    hit = affected_bins(bias)
    hz = ", ".join(f"{bias.omega[b] / 6.283185307179586:.2f} Hz" for b in hit)
    print(f"{name:>17}: error injected at bin 37 reaches {len(hit)} bin(s): {hz}")
