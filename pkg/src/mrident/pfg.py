"""Performance Frequency Gain (PFG) of a multirate loop.

For a single-frequency reference ``r = c exp(j omega_k h t)`` the loop output
contains the ``F`` frequencies ``omega_k + f omega_s / F`` with amplitudes
``c_f c``::

    c_0 = P - (1/F) P I_ZOH Q_d P
    c_f = -(1/F) P(omega_k + f omega_s/F) I_ZOH(omega_k + f omega_s/F) Q_d P

(``P`` and ``Q_d`` at ``omega_k`` unless shifted). The PFG is the power-norm
gain ``sqrt(lambda_max(sum_f c_f^H c_f))``, which for SISO loops is
``sqrt(sum_f |c_f|^2)``. :func:`pfg_brute_force` measures the same quantity by
simulating the loop with a complex tone.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NotDivisible, OffGrid
from .lifting import time_lift_from_highrate
from .multirate import MultirateLoop, q_d_from, simulate_loop, zoh_frf
from .signals import Signal, bin_grid
from .systems import Frf, LtiSystem, frf


class Provenance(str, enum.Enum):
    CLOSED_FORM = "closed-form"
    BRUTE_FORCE = "brute-force"


@dataclass(frozen=True, eq=False)
class PfgCurve:
    omega: np.ndarray
    values: np.ndarray
    provenance: Provenance
    loop_hash: str = ""
    nan_count: int = field(init=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if np.any(v[np.isfinite(v)] < 0):
            raise ValueError("PFG values are nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "nan_count", int(np.isnan(v).sum()))

    def __len__(self):
        return self.values.shape[0]


def descriptor_hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p).tobytes())
        elif isinstance(p, LtiSystem):
            h.update(json.dumps(p.to_dict(), sort_keys=True).encode())
        else:
            h.update(repr(p).encode())
    return h.hexdigest()[:16]


def pfg_coefficients(P: np.ndarray, Kf: np.ndarray, F: int) -> np.ndarray:
    """Output amplitudes ``c_f`` for every bin of a full high-rate grid.

    ``P`` is the plant FRF, shape ``(N, ny, nu)``; ``Kf`` the controller FRF
    on the ``N/F`` low-rate grid. Returns shape ``(F, N, ny, nu)``.
    """
    N = P.shape[0]
    if N % F:
        raise NotDivisible(f"grid size {N} is not divisible by F={F}")
    K = N // F
    lifted = time_lift_from_highrate(P, F, 1.0)
    Pl = sum(lifted.block(0, q) for q in range(F))
    Q = q_d_from(Kf, Pl)[np.arange(N) % K]
    Iz = zoh_frf(bin_grid(N, 1.0), 1.0, F)
    QP = Q @ P
    c = np.empty((F,) + P.shape, dtype=complex)
    for f in range(F):
        Ps = np.roll(P, -f * K, axis=0)
        Is = np.roll(Iz, -f * K)
        c[f] = -(Ps * Is[:, None, None]) @ QP / F
    c[0] += P
    return c


def _gain(c: np.ndarray) -> np.ndarray:
    if c.shape[2:] == (1, 1):
        return np.sqrt(np.sum(np.abs(c[:, :, 0, 0]) ** 2, axis=0))
    M = np.einsum("fkji,fkjl->kil", np.conj(c), c)
    out = np.full(M.shape[0], np.nan)
    ok = np.all(np.isfinite(M), axis=(1, 2))
    out[ok] = np.sqrt(np.maximum(np.linalg.eigvalsh(M[ok])[:, -1], 0.0))
    return out


def pfg_closed_form(P_h: Frf, K_l: LtiSystem, F: int) -> PfgCurve:
    """PFG at every bin of ``P_h``'s grid, which must be a full DFT grid."""
    N = len(P_h)
    h = K_l.sample_period / F
    if not np.allclose(P_h.omega, bin_grid(N, h), rtol=1e-9, atol=1e-9):
        raise OffGrid("plant FRF must be given on the full high-rate DFT grid")
    Kf = frf(K_l, bin_grid(N // F, K_l.sample_period))
    c = pfg_coefficients(P_h.values, Kf, F)
    with np.errstate(invalid="ignore"):
        vals = _gain(c)
    return PfgCurve(P_h.omega, vals, Provenance.CLOSED_FORM,
                    descriptor_hash(P_h.values, K_l, F))


def pfg_true(loop: MultirateLoop, n_bins: int) -> PfgCurve:
    """Closed-form PFG of a loop from its exact plant FRF."""
    omega = bin_grid(n_bins, loop.h_high)
    return pfg_closed_form(Frf(omega, frf(loop.plant, omega)), loop.controller, loop.F)


def _probe_period(omega: float, h: float, n_bins: int, F: int) -> int:
    """Shortest record length that holds an integer number of periods of
    every output frequency of the tone (a multiple of ``F``)."""
    x = omega * h * n_bins / (2 * np.pi)
    k = int(round(x))
    if abs(x - k) > 1e-6:
        raise OffGrid(f"omega={omega!r} rad/s is not a bin of the {n_bins}-bin grid")
    b = Fraction(k, n_bins).denominator
    return int(np.lcm(b, F))


def pfg_brute_force(loop: MultirateLoop, omega_k: float, n_bins: int,
                    transient_factor: float = 30.0) -> float:
    """PFG at one bin by time-domain simulation of the power-norm ratio.

    The loop is driven by ``cos`` and ``sin`` at ``omega_k``; by linearity the
    complex tone's response is ``y_cos + j y_sin``. Power norms are taken over
    an integer number of periods after discarding the closed-loop transient.
    The default discard leaves ``exp(-30)`` of it, so that bins where the PFG
    is small are still measured accurately in relative terms.
    """
    F, h = loop.F, loop.h_high
    period = _probe_period(omega_k, h, n_bins, F)
    skip = loop.transient_samples(transient_factor)
    skip = -(-skip // period) * period
    window = period * max(1, -(-64 // period))
    t = np.arange(skip + window)
    _, yc = simulate_loop(loop, Signal(np.cos(omega_k * h * t), h))
    _, ys = simulate_loop(loop, Signal(np.sin(omega_k * h * t), h), check_stability=False)
    y = (yc.samples + 1j * ys.samples)[skip:]
    r = np.exp(1j * omega_k * h * t[skip:])
    num = np.mean(np.sum(np.abs(y.reshape(window, -1)) ** 2, axis=1))
    den = np.mean(np.abs(r) ** 2)
    return float(np.sqrt(num / den))


def pfg_from_estimate(est, K_l: LtiSystem, F: int) -> PfgCurve:
    """Closed-form PFG using an estimated plant FRF (``est.frf``); NaN bins
    of the estimate propagate."""
    return pfg_closed_form(est.frf, K_l, F)


def write_pfg_csv(path, curve: PfgCurve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "pfg", "provenance"])
        for om, v in zip(curve.omega, curve.values):
            w.writerow(["%.17g" % (om / (2 * np.pi)), "%.17g" % v, curve.provenance.value])
