"""Time- and frequency-lifted FRFs of (periodic) systems and their inverses.

All lifted FRFs live on full DFT bin grids. A time-lifted FRF sits on the
``K``-bin low-rate grid (sample period ``F h``); the matching frequency-lifted
FRF sits on the ``F K``-bin high-rate grid (sample period ``h``), so every
shift by ``phi = exp(2j pi / F)`` is a shift by ``K`` bins and every map from a
high-rate frequency to its low-rate image is ``k -> k mod K``.

Block ``(i, f)`` of the modulation matrix ``M(z)`` is ``(z phi**i)**-f``:
row blocks index frequency shifts, column blocks index sample phases within a
period, so that a frequency-lifted spectrum equals ``M(z)`` times the spectrum
of the time-lifted signal (up to the ``1/sqrt(F)`` that the unitary DFT
convention introduces).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BadIndex, OffGrid, OffUnitCircle, WrongKind
from .signals import bin_grid
from .systems import Frf, LptvSystem, LtiSystem, frf


class LiftKind(str, enum.Enum):
    TIME = "time-lifted"
    FREQUENCY = "frequency-lifted"

    @classmethod
    def _missing_(cls, value):
        # accept the short names "time" and "frequency"
        if isinstance(value, str):
            for m in cls:
                if m.value == f"{value.lower()}-lifted":
                    return m
        return None


@dataclass(frozen=True, eq=False)
class LiftedFrf:
    """Lifted FRF: one ``(F ny) x (F nu)`` complex matrix per grid point."""

    kind: LiftKind
    omega: np.ndarray
    values: np.ndarray
    F: int
    ny: int
    nu: int
    sample_period: float

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        w = np.array(self.omega, dtype=float)
        if v.shape[1:] != (self.F * self.ny, self.F * self.nu) or v.shape[0] != w.shape[0]:
            raise ValueError(f"lifted values of shape {v.shape} do not match F={self.F}, "
                             f"ny={self.ny}, nu={self.nu}, {w.shape[0]} grid points")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "kind", LiftKind(self.kind))

    def __len__(self):
        return self.values.shape[0]

    def block(self, i: int, j: int) -> np.ndarray:
        """Block ``(i, j)`` (0-based) across the grid, shape ``(K, ny, nu)``."""
        return self.values[:, i * self.ny:(i + 1) * self.ny, j * self.nu:(j + 1) * self.nu]

    def with_values(self, values) -> "LiftedFrf":
        return LiftedFrf(self.kind, self.omega, values, self.F, self.ny, self.nu, self.sample_period)

    @property
    def high_rate_period(self) -> float:
        return self.sample_period / self.F if self.kind is LiftKind.TIME else self.sample_period

    @property
    def n_high(self) -> int:
        """Number of bins of the associated high-rate grid."""
        return len(self) * self.F if self.kind is LiftKind.TIME else len(self)

    def high_rate_grid(self) -> np.ndarray:
        return bin_grid(self.n_high, self.high_rate_period)


def _grid(grid, sample_period):
    if np.ndim(grid) == 0:
        return bin_grid(int(grid), sample_period)
    return np.asarray(grid, dtype=float)


# -- time lifting ------------------------------------------------------------

def lifted_state_space(sys: LtiSystem | LptvSystem, F: int) -> LtiSystem:
    """Exact ``F``-step block state-space lifting.

    The returned system runs at ``F h`` and maps the lifted input
    ``[u[lF], ..., u[lF+F-1]]`` to the lifted output. ``sys`` may be LPTV with
    a period dividing ``F``.
    """
    lptv = sys if isinstance(sys, LptvSystem) else LptvSystem.from_lti(sys)
    if F % lptv.period:
        raise ValueError(f"system period {lptv.period} does not divide F={F}")
    n, nu, ny = lptv.n_states, lptv.nu, lptv.ny
    ph = [lptv.phase(t) for t in range(F)]
    # trans[i] = A_{i-1} ... A_0 ; state at lF+i from state at lF
    trans = [np.eye(n)]
    for t in range(F):
        trans.append(ph[t].A @ trans[-1])
    Bl = np.zeros((n, F * nu))
    Cl = np.zeros((F * ny, n))
    Dl = np.zeros((F * ny, F * nu))
    for j in range(F):
        # contribution of u[lF+j] to the state at lF+i (i > j): A_{i-1}..A_{j+1} B_j
        prop = ph[j].B
        for i in range(j + 1, F + 1):
            if i == F:
                Bl[:, j * nu:(j + 1) * nu] = prop
            else:
                Dl[i * ny:(i + 1) * ny, j * nu:(j + 1) * nu] = ph[i].C @ prop
                prop = ph[i].A @ prop
        Dl[j * ny:(j + 1) * ny, j * nu:(j + 1) * nu] = ph[j].D
    for i in range(F):
        Cl[i * ny:(i + 1) * ny] = ph[i].C @ trans[i]
    return LtiSystem(trans[F], Bl, Cl, Dl, F * lptv.sample_period)


def time_lift(sys: LtiSystem | LptvSystem, F: int, grid) -> LiftedFrf:
    """Time-lifted FRF of ``sys`` on a low-rate grid.

    ``grid`` is either a bin count ``K`` (full low-rate DFT grid) or an array
    of low-rate angular frequencies in rad/s.
    """
    lifted = lifted_state_space(sys, F)
    omega = _grid(grid, lifted.sample_period)
    vals = frf(lifted, omega)
    return LiftedFrf(LiftKind.TIME, omega, vals, F, lifted.ny // F, lifted.nu // F, lifted.sample_period)


def time_lift_lti(sys: LtiSystem, F: int, grid) -> LiftedFrf:
    if not isinstance(sys, LtiSystem):
        raise TypeError("time_lift_lti expects an LtiSystem; use time_lift for LPTV systems")
    return time_lift(sys, F, grid)


def polyphase_from_highrate(P: np.ndarray, F: int) -> np.ndarray:
    """Polyphase components ``P^(s)`` of an LTI FRF given on a full high-rate grid.

    ``P`` has shape ``(N, ny, nu)`` with ``F | N``. Returns shape
    ``(F, N/F, ny, nu)`` with ``P^(s)`` on the low-rate grid, computed as
    ``z**s / F * sum_i P(z phi**i) phi**(i s)``.
    """
    N = P.shape[0]
    K = N // F
    phi = np.exp(2j * np.pi / F)
    z = np.exp(2j * np.pi * np.arange(K) / N)
    # shifted[i, k] = P at bin k + i K
    shifted = P.reshape(F, K, *P.shape[1:])
    out = np.empty_like(shifted)
    for s in range(F):
        w = phi ** (np.arange(F) * s)
        acc = np.tensordot(w, shifted, axes=(0, 0))
        out[s] = (z ** s)[:, None, None] * acc / F
    return out


def time_lift_from_highrate(P: np.ndarray, F: int, sample_period: float) -> LiftedFrf:
    """Time-lifted FRF of an LTI system from its high-rate FRF samples.

    Block ``(p, q)`` is ``P^(p-q)`` below and on the diagonal and
    ``w**-1 P^(F+p-q)`` above it, ``w = exp(j omega F h)``.
    """
    N, ny, nu = P.shape
    K = N // F
    poly = polyphase_from_highrate(P, F)
    w = np.exp(2j * np.pi * np.arange(K) / K)
    vals = np.zeros((K, F * ny, F * nu), dtype=complex)
    for p in range(F):
        for q in range(F):
            blk = poly[p - q] if p >= q else poly[F + p - q] / w[:, None, None]
            vals[:, p * ny:(p + 1) * ny, q * nu:(q + 1) * nu] = blk
    return LiftedFrf(LiftKind.TIME, bin_grid(K, F * sample_period), vals, F, ny, nu, F * sample_period)


# -- frequency lifting ---------------------------------------------------------

def modulation_matrix(F: int, z: complex, n: int = 1) -> np.ndarray:
    """``M(z)`` with block ``(i, f) = (z phi**i)**-f * I_n``."""
    if abs(abs(z) - 1.0) > 1e-12:
        raise OffUnitCircle(f"|z| = {abs(z)!r} is not 1")
    phi = np.exp(2j * np.pi / F)
    i = np.arange(F)[:, None]
    f = np.arange(F)[None, :]
    return np.kron((z * phi ** i) ** (-f), np.eye(n))


def _modulation_stack(F: int, z: np.ndarray, n: int) -> np.ndarray:
    phi = np.exp(2j * np.pi / F)
    i = np.arange(F)[None, :, None]
    f = np.arange(F)[None, None, :]
    core = (z[:, None, None] * phi ** i) ** (-f)
    return np.einsum("kif,ab->kiafb", core, np.eye(n)).reshape(z.size, F * n, F * n)


def freq_lift(sys: LtiSystem | LptvSystem, F: int, n_bins: int) -> LiftedFrf:
    """Frequency-lifted FRF on the ``n_bins`` high-rate grid.

    LTI systems use the diagonal form directly; LPTV systems go through the
    time lift and :func:`convert_time_to_freq`.
    """
    if isinstance(sys, LptvSystem):
        if n_bins % F:
            raise ValueError("F must divide the number of high-rate bins")
        return convert_time_to_freq(time_lift(sys, F, n_bins // F))
    return freq_lift_lti(sys, F, n_bins)


def freq_lift_lti(sys: LtiSystem, F: int, n_bins: int) -> LiftedFrf:
    """``diag{G(z phi**p)}`` on the full ``n_bins`` high-rate grid (``F | n_bins``)."""
    if n_bins % F:
        raise ValueError("F must divide the number of high-rate bins")
    h = sys.sample_period
    omega = bin_grid(n_bins, h)
    G = frf(sys, omega)
    return LiftedFrf(LiftKind.FREQUENCY, omega, _diag_lift(G, F), F, sys.ny, sys.nu, h)


def _diag_lift(G: np.ndarray, F: int) -> np.ndarray:
    N, ny, nu = G.shape
    step = N // F
    vals = np.zeros((N, F * ny, F * nu), dtype=complex)
    for p in range(F):
        vals[:, p * ny:(p + 1) * ny, p * nu:(p + 1) * nu] = np.roll(G, -p * step, axis=0)
    return vals


def convert_time_to_freq(lifted: LiftedFrf) -> LiftedFrf:
    """``G~(z) = M(z) G_(z**F) M(z)^-1`` on the high-rate grid."""
    if lifted.kind is not LiftKind.TIME:
        raise WrongKind("expected a time-lifted FRF")
    F, K = lifted.F, len(lifted)
    N = F * K
    z = np.exp(2j * np.pi * np.arange(N) / N)
    My = _modulation_stack(F, z, lifted.ny)
    Mu = _modulation_stack(F, z, lifted.nu)
    G = lifted.values[np.arange(N) % K]
    # M G M^-1 = (M^-T (M G)^T)^T
    MG = My @ G
    vals = np.swapaxes(np.linalg.solve(np.swapaxes(Mu, 1, 2), np.swapaxes(MG, 1, 2)), 1, 2)
    h = lifted.sample_period / F
    return LiftedFrf(LiftKind.FREQUENCY, bin_grid(N, h), vals, F, lifted.ny, lifted.nu, h)


def convert_freq_to_time(lifted: LiftedFrf) -> LiftedFrf:
    """Inverse of :func:`convert_time_to_freq`, read off at bins ``0 .. K-1``."""
    if lifted.kind is not LiftKind.FREQUENCY:
        raise WrongKind("expected a frequency-lifted FRF")
    F, N = lifted.F, len(lifted)
    K = N // F
    z = np.exp(2j * np.pi * np.arange(K) / N)
    My = _modulation_stack(F, z, lifted.ny)
    Mu = _modulation_stack(F, z, lifted.nu)
    vals = np.linalg.solve(My, lifted.values[:K] @ Mu)
    h = lifted.sample_period * F
    return LiftedFrf(LiftKind.TIME, bin_grid(K, h), vals, F, lifted.ny, lifted.nu, h)


# -- inverse lifting -----------------------------------------------------------

def _bin_index(omega: float, n: int, h: float) -> int:
    x = omega * h * n / (2 * np.pi)
    k = int(np.round(x))
    if abs(x - k) > 1e-6:
        raise OffGrid(f"omega={omega!r} rad/s is not on the {n}-bin grid")
    return k % n


def inverse_time_lift(lifted: LiftedFrf, omega: float) -> np.ndarray:
    """High-rate FRF at ``omega`` from a time-lifted LTI FRF.

    ``P(e^{j omega h}) = sum_s P^(s)(e^{j omega F h}) e^{-j s omega h}``, where
    ``P^(s)`` is block ``(s, 0)`` of the lifted FRF.
    """
    if lifted.kind is not LiftKind.TIME:
        raise WrongKind("expected a time-lifted FRF")
    h = lifted.high_rate_period
    k = _bin_index(omega, lifted.n_high, h)
    return _inverse_time_at(lifted, k)


def _inverse_time_at(lifted: LiftedFrf, k) -> np.ndarray:
    K, F, N = len(lifted), lifted.F, lifted.n_high
    k = np.asarray(k)
    kl = k % K
    out = 0
    for s in range(F):
        out = out + lifted.block(s, 0)[kl] * np.exp(-2j * np.pi * s * k / N)[..., None, None]
    return out


def inverse_time_lift_grid(lifted: LiftedFrf) -> Frf:
    """:func:`inverse_time_lift` at every bin of the high-rate grid."""
    if lifted.kind is not LiftKind.TIME:
        raise WrongKind("expected a time-lifted FRF")
    k = np.arange(lifted.n_high)
    return Frf(lifted.high_rate_grid(), _inverse_time_at(lifted, k))


def inverse_freq_lift(lifted: LiftedFrf, omega: float, p: int) -> np.ndarray:
    """``P(e^{j omega h}) = P~(e^{j omega h} phi**-p)[p, p]``."""
    if lifted.kind is not LiftKind.FREQUENCY:
        raise WrongKind("expected a frequency-lifted FRF")
    if not 0 <= p < lifted.F:
        raise BadIndex(f"p={p} outside 0..{lifted.F - 1}")
    N = len(lifted)
    k = _bin_index(omega, N, lifted.sample_period)
    return lifted.block(p, p)[(k - p * N // lifted.F) % N]


def inverse_freq_lift_grid(lifted: LiftedFrf, p: int | str = 0) -> Frf:
    """:func:`inverse_freq_lift` on the whole grid; ``p="average"`` averages all p."""
    if lifted.kind is not LiftKind.FREQUENCY:
        raise WrongKind("expected a frequency-lifted FRF")
    N, F = len(lifted), lifted.F
    ps = range(F) if p == "average" else [p]
    acc = 0
    for q in ps:
        if not 0 <= q < F:
            raise BadIndex(f"p={q} outside 0..{F - 1}")
        acc = acc + np.roll(lifted.block(q, q), q * N // F, axis=0)
    return Frf(lifted.omega, acc / len(ps))


def lti_consistency(lifted: LiftedFrf) -> float:
    """How far a lifted FRF is from the structure of a lifted LTI system.

    Frequency-lifted: largest ratio of off-diagonal to diagonal block norm.
    Time-lifted: largest relative deviation from the block-Toeplitz pattern
    generated by the first block column. Returns 0 for an exact LTI lift.
    """
    F, ny, nu = lifted.F, lifted.ny, lifted.nu
    V = lifted.values
    mask = np.kron(np.eye(F), np.ones((ny, nu))).astype(bool)
    if lifted.kind is LiftKind.FREQUENCY:
        diag = np.linalg.norm(np.where(mask, V, 0), axis=(1, 2))
        off = np.linalg.norm(np.where(mask, 0, V), axis=(1, 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(off == 0, 0.0, off / diag)
        return float(np.nanmax(r))
    w = np.exp(1j * lifted.omega * lifted.sample_period)
    ideal = np.zeros_like(V)
    for p in range(F):
        for q in range(F):
            blk = lifted.block(p - q, 0) if p >= q else lifted.block(F + p - q, 0) / w[:, None, None]
            ideal[:, p * ny:(p + 1) * ny, q * nu:(q + 1) * nu] = blk
    num = np.linalg.norm(V - ideal, axis=(1, 2))
    den = np.linalg.norm(V, axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(num == 0, 0.0, num / den)
    return float(np.nanmax(r))


def write_lifted_csv(path, lifted: LiftedFrf):
    """Long-format CSV ``freq_hz,row,col,re,im`` plus a JSON sidecar."""
    import csv
    import json

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "row", "col", "re", "im"])
        f_hz = lifted.omega / (2 * np.pi)
        for k in range(len(lifted)):
            for i in range(lifted.values.shape[1]):
                for j in range(lifted.values.shape[2]):
                    v = lifted.values[k, i, j]
                    w.writerow(["%.17g" % f_hz[k], i, j, "%.17g" % v.real, "%.17g" % v.imag])
    with open(str(path) + ".json", "w") as fh:
        json.dump({"kind": lifted.kind.value, "F": lifted.F, "ny": lifted.ny, "nu": lifted.nu,
                   "sample_period": lifted.sample_period}, fh)
