"""Benchmark loop and random test systems.

The benchmark is a two-mass motion system driven by a force on the first mass
and measured at the same mass, with modes at 6 Hz and 55 Hz. With
``fs = 240 Hz`` and ``F = 3`` the low-rate Nyquist frequency is 40 Hz, so the
upper resonance lies above it. A lead controller at the low rate closes the
loop.
"""
from __future__ import annotations

import numpy as np
from scipy import signal

from .multirate import MultirateLoop
from .systems import LtiSystem


def _stiffness(m1: float, m2: float, f1: float, f2: float) -> tuple[float, float]:
    """Spring constants giving undamped modes ``f1 < f2`` (Hz).

    The eigenvalues of ``M^-1 K`` have sum ``k1/m1 + k2 (1/m1 + 1/m2)`` and
    product ``k1 k2 / (m1 m2)``; eliminating ``k1`` leaves a quadratic in
    ``k2`` whose larger root is the stiff coupling.
    """
    l1, l2 = (2 * np.pi * f1) ** 2, (2 * np.pi * f2) ** 2
    s, p = l1 + l2, l1 * l2 * m1 * m2
    k2 = max(np.roots([1 / m1 + 1 / m2, -s, p / m1]).real)
    return p / k2, k2


def two_mass_plant(fs: float = 240.0, m1: float = 1.0, m2: float = 0.25, f1: float = 6.0,
                   f2: float = 55.0, zeta: float = 0.03) -> LtiSystem:
    """ZOH discretisation of the collocated two-mass system.

    Rayleigh damping gives relative damping ``zeta`` at both modes; the input
    is scaled so the static gain is one.
    """
    k1, k2 = _stiffness(m1, m2, f1, f2)
    M = np.diag([m1, m2])
    K = np.array([[k1 + k2, -k2], [-k2, k2]])
    w1, w2 = 2 * np.pi * f1, 2 * np.pi * f2
    beta = 2 * zeta / (w1 + w2)
    C = beta * w1 * w2 * M + beta * K
    A = np.block([[np.zeros((2, 2)), np.eye(2)],
                  [-np.linalg.solve(M, K), -np.linalg.solve(M, C)]])
    B = np.vstack([np.zeros((2, 1)), np.linalg.solve(M, [[k1], [0.0]])])
    Cm = np.array([[1.0, 0.0, 0.0, 0.0]])
    Ad, Bd, Cd, Dd, _ = signal.cont2discrete((A, B, Cm, np.zeros((1, 1))), 1 / fs, "zoh")
    return LtiSystem(Ad, Bd, Cd, Dd, 1 / fs)


def lead_controller(sample_period: float, kp: float = 2.0, fz: float = 5.0,
                    fp: float = 30.0) -> LtiSystem:
    """Bilinear discretisation of ``kp (1 + s/wz) / (1 + s/wp)``."""
    num = kp * np.array([1 / (2 * np.pi * fz), 1.0])
    den = np.array([1 / (2 * np.pi * fp), 1.0])
    nd, dd, _ = signal.cont2discrete((num, den), sample_period, "bilinear")
    A, B, C, D = signal.tf2ss(np.ravel(nd), np.ravel(dd))
    return LtiSystem(A, B, C, D, sample_period)


def benchmark_loop(F: int = 3, fs: float = 240.0, **controller) -> MultirateLoop:
    """Two-mass plant at ``fs`` with the lead controller at ``fs / F``."""
    return MultirateLoop(two_mass_plant(fs), lead_controller(F / fs, **controller), F)


def random_stable_lti(rng: np.random.Generator, n_states: int = 4, nu: int = 1, ny: int = 1,
                      sample_period: float = 1.0, radius: float = 0.9) -> LtiSystem:
    """Random state-space system with spectral radius ``radius``."""
    A = rng.standard_normal((n_states, n_states))
    A *= radius / max(np.abs(np.linalg.eigvals(A)))
    return LtiSystem(A, rng.standard_normal((n_states, nu)), rng.standard_normal((ny, n_states)),
                     rng.standard_normal((ny, nu)), sample_period)
