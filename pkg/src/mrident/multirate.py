"""Multirate feedback loop: high-rate plant, low-rate controller, sampler and ZOH.

Loop equations (reference injected at the plant input)::

    u_h = r_h - H_u K_l S_d y_h,     y_h = P_h u_h + v_h

where ``S_d`` keeps every ``F``-th sample (phase 0) and ``H_u`` holds each
low-rate sample for ``F`` high-rate samples.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotDivisible, SingularSensitivity, UnstableLoop
from .lifting import lifted_state_space, time_lift
from .signals import Signal, Spectrum, bin_grid
from .systems import LtiSystem, frf, spectral_radius, system_from_dict, transient_samples

SENSITIVITY_COND_LIMIT = 1e12


def downsample(signal: Signal, F: int) -> Signal:
    if len(signal) % F:
        raise NotDivisible(f"length {len(signal)} is not divisible by F={F}")
    return Signal(signal.samples[::F], signal.sample_period * F)


def zoh_upsample(signal: Signal, F: int) -> Signal:
    return Signal(np.repeat(signal.samples, F, axis=0), signal.sample_period / F)


def zoh_frf(omega, sample_period: float, F: int) -> np.ndarray:
    """``I_ZOH(e^{j omega h}) = sum_f e^{-j omega h f}``, the finite sum itself."""
    omega = np.asarray(omega, dtype=float)
    f = np.arange(F)
    return np.exp(-1j * np.multiply.outer(omega * sample_period, f)).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class MultirateLoop:
    plant: LtiSystem
    controller: LtiSystem
    F: int

    def __post_init__(self):
        if self.F < 1:
            raise ValueError("F must be a positive integer")
        if not math.isclose(self.controller.sample_period, self.F * self.plant.sample_period, rel_tol=1e-12):
            raise DimensionMismatch("controller sample period must equal F times the plant's")
        if (self.controller.nu, self.controller.ny) != (self.plant.ny, self.plant.nu):
            raise DimensionMismatch("controller must map plant outputs to plant inputs")

    @property
    def h_high(self) -> float:
        return self.plant.sample_period

    @property
    def h_low(self) -> float:
        return self.controller.sample_period

    @property
    def sampling_frequency(self) -> float:
        """High-rate sampling frequency in rad/s."""
        return 2 * np.pi / self.h_high

    @classmethod
    def from_dict(cls, d: dict) -> "MultirateLoop":
        return cls(system_from_dict(d["plant"]), system_from_dict(d["controller"]), int(d["F"]))

    def to_dict(self) -> dict:
        return {"plant": self.plant.to_dict(), "controller": self.controller.to_dict(), "F": self.F}

    def with_plant(self, plant: LtiSystem) -> "MultirateLoop":
        return MultirateLoop(plant, self.controller, self.F)

    def with_controller(self, controller: LtiSystem) -> "MultirateLoop":
        return MultirateLoop(self.plant, controller, self.F)

    def lifted_closed_loop(self) -> LtiSystem:
        return lifted_closed_loop(self)

    @property
    def spectral_radius(self) -> float:
        """Spectral radius of the closed loop per high-rate sample."""
        rho = spectral_radius(self.lifted_closed_loop().A)
        return rho ** (1.0 / self.F)

    def is_stable(self) -> bool:
        return self.spectral_radius < 1

    def transient_samples(self, factor: float = 10.0) -> int:
        """High-rate samples until the closed-loop transient counts as decayed."""
        if not self.is_stable():
            raise UnstableLoop("closed loop is not internally stable")
        return transient_samples(self.spectral_radius, factor)


def load_loop(path) -> MultirateLoop:
    with open(path) as fh:
        return MultirateLoop.from_dict(json.load(fh))


def lifted_closed_loop(loop: MultirateLoop) -> LtiSystem:
    """Exact low-rate state-space model of the lifted closed loop.

    Inputs ``[r_L; v_L]`` (lifted reference and output noise), outputs
    ``[y_L; u_L]`` (lifted measured output and plant input). The algebraic
    loop through ``D_P D_K`` is solved in closed form.
    """
    F = loop.F
    P, K = loop.plant, loop.controller
    Pl = lifted_state_space(P, F)
    nu, ny = P.nu, P.ny
    npx, nkx = Pl.n_states, K.n_states
    E = np.kron(np.eye(F)[:1], np.eye(ny))          # first sample of the block
    Hh = np.kron(np.ones((F, 1)), np.eye(nu))        # hold over the block
    Phi = np.linalg.inv(np.eye(ny) + P.D @ K.D)
    Ce = Phi @ np.hstack([E @ Pl.C, -P.D @ K.C])
    De = Phi @ np.hstack([E @ Pl.D, E])
    Cc = np.hstack([np.zeros((nu, npx)), K.C]) + K.D @ Ce
    Dc = K.D @ De
    Cu = -Hh @ Cc
    Du = np.hstack([np.eye(F * nu), np.zeros((F * nu, F * ny))]) - Hh @ Dc
    Cy = np.hstack([Pl.C, np.zeros((F * ny, nkx))]) + Pl.D @ Cu
    Dy = Pl.D @ Du + np.hstack([np.zeros((F * ny, F * nu)), np.eye(F * ny)])
    A = np.block([[Pl.A, np.zeros((npx, nkx))], [np.zeros((nkx, npx)), K.A]])
    A = A + np.vstack([Pl.B @ Cu, K.B @ Ce])
    B = np.vstack([Pl.B @ Du, K.B @ De])
    with warnings.catch_warnings():
        # candidate loops may be unstable; callers check that explicitly
        warnings.simplefilter("ignore", RuntimeWarning)
        return LtiSystem(A, B, np.vstack([Cy, Cu]), np.vstack([Dy, Du]), loop.h_low)


def simulate_loop(loop: MultirateLoop, r_h: Signal, noise: Signal | None = None,
                  check_stability: bool = True) -> tuple[Signal, Signal]:
    """Sample-by-sample simulation from zero initial state.

    Returns ``(u_h, y_h)``; ``y_h`` is the measured output, i.e. it includes
    ``noise`` and is what the sampler feeds back.
    """
    F, P, K = loop.F, loop.plant, loop.controller
    N = len(r_h)
    if N % F:
        raise NotDivisible(f"record length {N} is not divisible by F={F}")
    if not math.isclose(r_h.sample_period, loop.h_high, rel_tol=1e-12):
        raise DimensionMismatch("reference sample period differs from the plant's")
    if check_stability and not loop.is_stable():
        raise UnstableLoop("closed loop is not internally stable")
    r = r_h.samples.reshape(N, -1)
    v = np.zeros((N, P.ny)) if noise is None else noise.samples.reshape(N, -1)
    if r.shape[1] != P.nu or v.shape != (N, P.ny):
        raise DimensionMismatch("reference/noise channels do not match the plant")
    A, B, C, D = P.A, P.B, P.C, P.D
    Ak, Bk, Ck, Dk = K.A, K.B, K.C, K.D
    Phi = np.linalg.inv(np.eye(P.ny) + D @ Dk)
    x = np.zeros(P.n_states)
    xk = np.zeros(K.n_states)
    u = np.empty((N, P.nu))
    y = np.empty((N, P.ny))
    for l in range(N // F):
        t0 = l * F
        # sampled output depends on the held control through D; solve for it
        e = Phi @ (C @ x + D @ (r[t0] - Ck @ xk) + v[t0])
        c = Ck @ xk + Dk @ e
        for t in range(t0, t0 + F):
            u[t] = r[t] - c
            y[t] = C @ x + D @ u[t] + v[t]
            x = A @ x + B @ u[t]
        xk = Ak @ xk + Bk @ e
    h = r_h.sample_period
    squeeze = r_h.samples.ndim == 1 and P.nu == 1 and P.ny == 1
    return (Signal(u[:, 0] if squeeze else u, h), Signal(y[:, 0] if squeeze else y, h))


# -- frequency domain -------------------------------------------------------------

def low_rate_plant_frf(loop: MultirateLoop, omega_low) -> np.ndarray:
    """``P_l``: hold, high-rate plant, then sample the first of each block.

    Computed as the first block row of the time-lifted plant times the stacked
    identity of the hold. Scalar ``omega_low`` gives one ``(ny, nu)`` matrix,
    an array gives shape ``(K, ny, nu)``.
    """
    scalar = np.ndim(omega_low) == 0
    lifted = time_lift(loop.plant, loop.F, np.atleast_1d(np.asarray(omega_low, dtype=float)))
    out = sum(lifted.block(0, q) for q in range(loop.F))
    return out[0] if scalar else out


def q_d(loop: MultirateLoop, omega_low) -> np.ndarray:
    """``Q_d = (I + K_l P_l)^-1 K_l`` on an array of low-rate frequencies."""
    omega_low = np.atleast_1d(np.asarray(omega_low, dtype=float))
    Kf = frf(loop.controller, omega_low)
    Pl = low_rate_plant_frf(loop, omega_low)
    return q_d_from(Kf, Pl)


def q_d_from(Kf: np.ndarray, Pl: np.ndarray) -> np.ndarray:
    """``Q_d`` from controller and low-rate plant FRFs; bins with non-finite
    input stay NaN."""
    Mx = np.eye(Kf.shape[1]) + Kf @ Pl
    ok = np.all(np.isfinite(Mx), axis=(1, 2))
    if np.any(np.linalg.cond(Mx[ok]) > SENSITIVITY_COND_LIMIT):
        raise SingularSensitivity("I + K_l P_l is numerically singular at some bin")
    out = np.full(Kf.shape, np.nan, dtype=complex)
    out[ok] = np.linalg.solve(Mx[ok], Kf[ok])
    return out


def closed_loop_output_spectrum(loop: MultirateLoop, R_h: Spectrum) -> Spectrum:
    """Steady-state output spectrum of the loop for reference spectrum ``R_h``.

    ``Y(k) = P R(k) - P I_ZOH Q_d (1/F) sum_f P(k - f N/F) R(k - f N/F)``
    on the full DFT grid (``F | N``).
    """
    F = loop.F
    N = len(R_h)
    if N % F:
        raise NotDivisible(f"grid size {N} is not divisible by F={F}")
    h = loop.h_high
    omega = bin_grid(N, h)
    P = frf(loop.plant, omega)
    R = R_h.bins.reshape(N, -1)
    PR = np.einsum("kij,kj->ki", P, R)
    K_ = N // F
    alias = sum(np.roll(PR, f * K_, axis=0) for f in range(F)) / F
    Q = q_d(loop, bin_grid(K_, loop.h_low))[np.arange(N) % K_]
    fb = np.einsum("kij,kj->ki", Q, alias)
    Y = PR - zoh_frf(omega, h, F)[:, None] * np.einsum("kij,kj->ki", P, fb)
    return Spectrum(Y[:, 0] if R_h.bins.ndim == 1 else Y, h)


def analytic_lifted_js(loop: MultirateLoop, n_low: int):
    """Exact time-lifted ``J`` (r -> y) and ``S`` (r -> u) on the ``n_low`` grid.

    Uses the lifted-domain FRF algebra ``S = (I + H K E P)^-1``, ``J = P S``.
    """
    from .lifting import LiftKind, LiftedFrf

    F, P, K = loop.F, loop.plant, loop.controller
    Pl = time_lift(P, F, n_low)
    Kf = frf(K, Pl.omega)
    E = np.kron(np.eye(F)[:1], np.eye(P.ny))
    Hh = np.kron(np.ones((F, 1)), np.eye(P.nu))
    loopgain = Hh @ Kf @ E @ Pl.values
    S = np.linalg.inv(np.eye(F * P.nu) + loopgain)
    J = Pl.values @ S
    mk = lambda v, ny, nu: LiftedFrf(LiftKind.TIME, Pl.omega, v, F, ny, nu, Pl.sample_period)
    return mk(J, P.ny, P.nu), mk(S, P.nu, P.nu)


def alias_transfer(loop: MultirateLoop, N: int) -> np.ndarray:
    """Coefficients ``C[f, k]`` with ``Y(k) = sum_f C[f, k] R(k - f N/F)`` (SISO).

    ``C[0]`` is the direct term; ``C[f > 0]`` carry the aliased contributions
    that a multirate loop mixes into bin ``k``.
    """
    F = loop.F
    h = loop.h_high
    omega = bin_grid(N, h)
    P = frf(loop.plant, omega)[:, 0, 0]
    K_ = N // F
    Q = q_d(loop, bin_grid(K_, loop.h_low))[np.arange(N) % K_, 0, 0]
    g = P * zoh_frf(omega, h, F) * Q / F
    C = np.empty((F, N), dtype=complex)
    for f in range(F):
        C[f] = -g * np.roll(P, f * K_)
    C[0] += P
    return C
