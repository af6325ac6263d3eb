"""Discrete LTI and LPTV state-space systems.

FRFs are evaluated as ``D + C (zI - A)^-1 B`` with ``z = exp(j omega h)``.
LPTV systems are stored in periodic state-space form (one ``(A, B, C, D)``
quadruple per phase); the impulse-response coefficients ``M_i[t]`` of the
input-output description are derived from it on demand.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, SingularResolvent
from .signals import Signal

RESOLVENT_COND_LIMIT = 1e14


def _mat(a, shape) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        if m.size != shape[0] * shape[1]:
            raise DimensionMismatch(f"cannot shape {m.size} entries as {shape}")
        m = m.reshape(shape)
    m.setflags(write=False)
    return m


def spectral_radius(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def transient_samples(rho: float, factor: float = 10.0) -> int:
    """Samples to discard before a response counts as steady state.

    ``rho**n <= exp(-n (1 - rho))``, so ``factor / (1 - rho)`` samples shrink
    the initial-condition response by at least ``exp(-factor)``.
    """
    if rho >= 1:
        raise ValueError("no steady state for spectral radius >= 1")
    return int(math.ceil(factor / (1.0 - rho)))


@dataclass(frozen=True, eq=False)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    sample_period: float = 1.0

    def __post_init__(self):
        D = np.atleast_2d(np.array(self.D, dtype=float))
        D.setflags(write=False)
        ny, nu = D.shape
        A = np.array(self.A, dtype=float)
        n = A.shape[0] if A.ndim == 2 else int(round(math.sqrt(A.size)))
        A, B, C = _mat(A, (n, n)), _mat(self.B, (n, nu)), _mat(self.C, (ny, n))
        if A.shape != (n, n) or B.shape != (n, nu) or C.shape != (ny, n):
            raise DimensionMismatch("inconsistent state-space dimensions")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)
        if spectral_radius(A) >= 1:
            warnings.warn("LtiSystem has spectral radius >= 1; FRF-based checks will refuse it",
                          RuntimeWarning, stacklevel=3)

    @classmethod
    def gain(cls, g, sample_period: float = 1.0) -> "LtiSystem":
        g = np.atleast_2d(np.array(g, dtype=float))
        return cls(np.zeros((0, 0)), np.zeros((0, g.shape[1])), np.zeros((g.shape[0], 0)), g, sample_period)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def nu(self) -> int:
        return self.D.shape[1]

    @property
    def ny(self) -> int:
        return self.D.shape[0]

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.A)

    def scaled(self, alpha: float) -> "LtiSystem":
        return LtiSystem(self.A, self.B, alpha * self.C, alpha * self.D, self.sample_period)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(),
                "D": self.D.tolist(), "h": self.sample_period}


@dataclass(frozen=True, eq=False)
class LptvSystem:
    """F-periodic state-space system; phase ``t mod F`` is active at time ``t``."""

    phases: tuple
    sample_period: float = 1.0

    def __post_init__(self):
        ph = tuple(p if isinstance(p, LtiSystem) else LtiSystem(*p, sample_period=self.sample_period)
                   for p in self.phases)
        if not ph:
            raise ValueError("an LPTV system needs at least one phase")
        n, nu, ny = ph[0].n_states, ph[0].nu, ph[0].ny
        if any((p.n_states, p.nu, p.ny) != (n, nu, ny) for p in ph):
            raise DimensionMismatch("all phases must share state, input and output dimensions")
        object.__setattr__(self, "phases", ph)

    @classmethod
    def from_lti(cls, sys: LtiSystem, F: int = 1) -> "LptvSystem":
        return cls((sys,) * F, sys.sample_period)

    @property
    def period(self) -> int:
        return len(self.phases)

    @property
    def n_states(self) -> int:
        return self.phases[0].n_states

    @property
    def nu(self) -> int:
        return self.phases[0].nu

    @property
    def ny(self) -> int:
        return self.phases[0].ny

    def phase(self, t: int) -> LtiSystem:
        return self.phases[t % self.period]

    def monodromy(self) -> np.ndarray:
        """State transition over one period, ``A_{F-1} ... A_1 A_0``."""
        Phi = np.eye(self.n_states)
        for p in self.phases:
            Phi = p.A @ Phi
        return Phi

    def to_dict(self) -> dict:
        return {"phases": [{k: v for k, v in p.to_dict().items() if k != "h"} for p in self.phases],
                "h": self.sample_period}


@dataclass(frozen=True, eq=False)
class Frf:
    """Frequency response on a grid of angular frequencies (rad/s).

    ``values`` has shape ``(K, ny, nu)``. NaN entries mark bins an estimator
    flagged as unusable.
    """

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.array(self.omega, dtype=float)
        v = np.array(self.values, dtype=complex)
        if v.ndim == 1:
            v = v.reshape(-1, 1, 1)
        if v.shape[0] != w.shape[0]:
            raise DimensionMismatch("one FRF matrix per grid point is required")
        if np.any(np.diff(w) <= 0):
            raise ValueError("FRF grid must be strictly increasing")
        if np.any(np.isinf(v)):
            raise ValueError("FRF values must be finite (NaN marks flagged bins)")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    @property
    def siso(self) -> np.ndarray:
        return self.values[:, 0, 0]

    def __len__(self):
        return self.omega.shape[0]


def frf_eval(sys: LtiSystem, omega: float) -> np.ndarray:
    """Frequency response ``D + C (zI - A)^-1 B`` at one frequency (rad/s)."""
    return frf(sys, np.array([omega]))[0]


def frf(sys: LtiSystem, omega) -> np.ndarray:
    """Vectorised :func:`frf_eval`; returns shape ``(K, ny, nu)``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    z = np.exp(1j * omega * sys.sample_period)
    return frf_z(sys, z)


def frf_z(sys: LtiSystem, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.broadcast_to(sys.D.astype(complex), (z.size, sys.ny, sys.nu)).copy()
    n = sys.n_states
    if n == 0:
        return out
    M = z[:, None, None] * np.eye(n) - sys.A
    if np.any(np.linalg.cond(M) > RESOLVENT_COND_LIMIT):
        raise SingularResolvent("zI - A is numerically singular on the requested grid")
    out += sys.C @ np.linalg.solve(M, np.broadcast_to(sys.B.astype(complex), (z.size, n, sys.nu)))
    return out


def _as_inputs(sys, u: Signal) -> np.ndarray:
    if not math.isclose(u.sample_period, sys.sample_period, rel_tol=1e-12):
        raise DimensionMismatch("input sample period differs from the system's")
    x = u.samples.reshape(len(u), -1)
    if x.shape[1] != sys.nu:
        raise DimensionMismatch(f"system has {sys.nu} inputs, signal has {x.shape[1]} channels")
    return x


def simulate(sys: LtiSystem | LptvSystem, u: Signal, x0=None) -> Signal:
    """Run ``x+ = A_t x + B_t u``, ``y = C_t x + D_t u`` with ``t mod F`` phases.

    Scalar-output systems return a 1-D signal.
    """
    lptv = sys if isinstance(sys, LptvSystem) else LptvSystem.from_lti(sys)
    uu = _as_inputs(lptv, u)
    n = lptv.n_states
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).reshape(n)
    y = np.empty((uu.shape[0], lptv.ny))
    mats = [(p.A, p.B, p.C, p.D) for p in lptv.phases]
    F = lptv.period
    for t in range(uu.shape[0]):
        A, B, C, D = mats[t % F]
        ut = uu[t]
        y[t] = C @ x + D @ ut
        x = A @ x + B @ ut
    return Signal(y[:, 0] if lptv.ny == 1 else y, u.sample_period)


def impulse_response(sys: LtiSystem, count: int) -> np.ndarray:
    """Markov parameters ``D, CB, CAB, ...``, shape ``(count, ny, nu)``."""
    return lptv_impulse_coefficients(LptvSystem.from_lti(sys), 0, count)


def lptv_impulse_coefficients(sys: LptvSystem, phase: int, count: int) -> np.ndarray:
    """Coefficients ``M_0[phase] ... M_{count-1}[phase]``.

    ``y[t] = sum_i M_i[t] u[t - i]``, so ``M_0[t] = D_t`` and for ``i >= 1``
    ``M_i[t] = C_t A_{t-1} ... A_{t-i+1} B_{t-i}`` (phases taken mod F).
    """
    if not 0 <= phase < sys.period:
        raise ValueError("phase must lie in [0, F)")
    out = np.zeros((count, sys.ny, sys.nu))
    if count == 0:
        return out
    out[0] = sys.phase(phase).D
    # left factor C_t A_{t-1} ... A_{t-i+1}, grown one step per i
    left = sys.phase(phase).C
    for i in range(1, count):
        out[i] = left @ sys.phase(phase - i).B
        left = left @ sys.phase(phase - i).A
    return out


# -- JSON / CSV --------------------------------------------------------------

def system_from_dict(d: dict) -> LtiSystem | LptvSystem:
    h = float(d.get("h", 1.0))
    if "phases" in d:
        return LptvSystem(tuple(LtiSystem(p["A"], p["B"], p["C"], p["D"], h) for p in d["phases"]), h)
    return LtiSystem(d["A"], d["B"], d["C"], d["D"], h)


def load_system(path) -> LtiSystem | LptvSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def save_system(path, sys: LtiSystem | LptvSystem):
    with open(path, "w") as fh:
        json.dump(sys.to_dict(), fh, indent=1)


def write_frf_csv(path, frf_: Frf, extra: dict[str, Sequence] | None = None):
    """Long-format FRF CSV: ``freq_hz,row,col,re,im`` (plus per-bin extras)."""
    extra = extra or {}
    names = list(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "row", "col", "re", "im"] + names)
        f_hz = frf_.omega / (2 * np.pi)
        _, ny, nu = frf_.values.shape
        for k in range(len(frf_)):
            for i in range(ny):
                for j in range(nu):
                    v = frf_.values[k, i, j]
                    w.writerow(["%.17g" % f_hz[k], i, j, "%.17g" % v.real, "%.17g" % v.imag]
                               + ["%.17g" % extra[n][k] for n in names])


def read_frf_csv(path) -> Frf:
    from .signals import read_csv_columns

    c = read_csv_columns(path)
    f = c["freq_hz"]
    rows, cols = c["row"].astype(int), c["col"].astype(int)
    ny, nu = rows.max() + 1, cols.max() + 1
    K = f.size // (ny * nu)
    vals = (c["re"] + 1j * c["im"]).reshape(K, ny, nu)
    return Frf(2 * np.pi * f.reshape(K, ny * nu)[:, 0], vals)
