"""Closed-loop identification of the high-rate plant of a multirate loop.

The loop is excited through ``r_h`` only. Both closed-loop maps ``J: r -> y``
and ``S: r -> u`` are LPTV, so they are lifted (in time or in frequency),
estimated with the LPM, and combined by the indirect method
``P = J S^-1``. Inverse lifting then returns the high-rate plant FRF.

Two baselines ignore the LPTV structure: the ETFE ``Y/U`` and a naive LPM
that fits ``J`` and ``S`` on the unlifted data.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NotDivisible, SingularS, ZeroInput, DimensionMismatch
from .lifting import (LiftKind, LiftedFrf, inverse_freq_lift_grid, inverse_time_lift_grid)
from .lpm import LpmConfig, LpmFit, lpm_estimate
from .multirate import MultirateLoop, alias_transfer, simulate_loop
from .signals import Signal, bin_grid, dft, lift_frequency, lift_time
from .systems import Frf, frf

S_COND_LIMIT = 1e12


class Method(str, enum.Enum):
    ETFE = "etfe"
    NAIVE_LPM = "naive-lpm"
    TIME_LIFTED = "time-lifted"
    FREQUENCY_LIFTED = "frequency-lifted"


# -- excitation ----------------------------------------------------------------

@dataclass(frozen=True)
class Excitation:
    """Reference signal recipe.

    ``kind`` is ``"multisine"`` (random phases, flat amplitude on every bin
    including DC and Nyquist) or ``"white"`` (Gaussian). ``amplitude`` is the
    RMS value. ``noise_std`` adds white Gaussian output noise.
    """

    kind: str = "multisine"
    seed: int = 1
    amplitude: float = 1.0
    noise_std: float = 0.0

    def __post_init__(self):
        if self.kind not in ("multisine", "white"):
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if self.amplitude < 0 or self.noise_std < 0:
            raise ValueError("amplitude and noise_std must be nonnegative")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "amplitude": self.amplitude,
                "noise_std": self.noise_std}


def _streams(seed: int):
    ex, noise = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(ex), np.random.default_rng(noise)


def multisine(n: int, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    """Random-phase multisine exciting every bin of an ``n``-point grid."""
    m = n // 2 + 1
    spec = np.exp(2j * np.pi * rng.random(m))
    spec[0] = rng.choice([-1.0, 1.0])
    if n % 2 == 0:
        spec[-1] = rng.choice([-1.0, 1.0])
    x = np.fft.irfft(spec, n)
    return amplitude * x / np.sqrt(np.mean(x ** 2))


def reference_signal(excitation: Excitation, n: int, sample_period: float) -> tuple[Signal, Signal | None]:
    """Reference and (optional) output noise for an ``n``-sample record."""
    rng_ex, rng_noise = _streams(excitation.seed)
    if excitation.kind == "multisine":
        r = multisine(n, rng_ex, excitation.amplitude)
    else:
        r = excitation.amplitude * rng_ex.standard_normal(n)
    if excitation.amplitude == 0:
        warnings.warn("no excitation: reference amplitude is zero", UserWarning, stacklevel=2)
    noise = None
    if excitation.noise_std > 0:
        noise = Signal(excitation.noise_std * rng_noise.standard_normal(n), sample_period)
    return Signal(r, sample_period), noise


# -- records and estimates -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentRecord:
    r: Signal
    u: Signal
    y: Signal
    F: int
    excitation: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.r)
        if len(self.u) != n or len(self.y) != n:
            raise DimensionMismatch("r, u and y must have equal lengths")
        if n % self.F:
            raise NotDivisible(f"record length {n} is not divisible by F={self.F}")

    @property
    def n_samples(self) -> int:
        return len(self.r)

    @property
    def sample_period(self) -> float:
        return self.r.sample_period

    @property
    def duration(self) -> float:
        return self.n_samples * self.sample_period

    @property
    def omega(self) -> np.ndarray:
        return bin_grid(self.n_samples, self.sample_period)


def run_experiment(loop: MultirateLoop, excitation: Excitation, duration: float) -> ExperimentRecord:
    """Simulate the loop from rest for ``duration`` seconds."""
    n = int(round(duration / loop.h_high))
    if n % loop.F:
        raise NotDivisible(f"{n} samples is not divisible by F={loop.F}")
    r, noise = reference_signal(excitation, n, loop.h_high)
    u, y = simulate_loop(loop, r, noise)
    return ExperimentRecord(r, u, y, loop.F, excitation.to_dict())


@dataclass(frozen=True, eq=False)
class PlantEstimate:
    """High-rate plant FRF estimate.

    ``cond`` holds, per high-rate bin, the worst LPM regressor condition
    number that fed the bin (NaN for the ETFE); ``flagged`` counts NaN bins.
    """

    method: Method
    frf: Frf
    cond: np.ndarray | None = None
    flagged: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        bad = np.any(np.isnan(self.frf.values), axis=(1, 2))
        object.__setattr__(self, "flagged", int(bad.sum()))


# -- lifted estimates --------------------------------------------------------------

def _matrix(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1)


def lifted_dfts(rec: ExperimentRecord, kind: LiftKind):
    """Lifted DFTs ``(R, U, Y)``, each of shape ``(bins, F * channels)``.

    Time lifting gives ``N/F`` low-rate bins, frequency lifting ``N``
    high-rate bins.
    """
    F = rec.F
    out = []
    for s in (rec.r, rec.u, rec.y):
        if kind is LiftKind.TIME:
            out.append(_matrix(dft(lift_time(s, F).as_signal()).bins))
        else:
            out.append(lift_frequency(dft(s), F).stacked())
    return tuple(out)


def _fit_config(config: LpmConfig, nu_eff: int, ny_eff: int) -> LpmConfig:
    # the caller's config supplies R and n; the dimensions come from the data
    return LpmConfig.escalated(config.R, config.n, nu_eff, ny_eff)


def estimate_lifted_JS(rec: ExperimentRecord, kind: LiftKind | str, config: LpmConfig,
                       return_fits: bool = False):
    """LPM estimates of the lifted ``J`` (r -> y) and ``S`` (r -> u).

    Returns ``(J, S)`` as :class:`LiftedFrf`, or ``(J, S, fit_J, fit_S)``
    when ``return_fits`` is true.
    """
    kind = LiftKind(kind)
    F = rec.F
    R, U, Y = lifted_dfts(rec, kind)
    nu, ny = R.shape[1] // F, Y.shape[1] // F
    fit_j = lpm_estimate(R, Y, _fit_config(config, F * nu, F * ny))
    fit_s = lpm_estimate(R, U, _fit_config(config, F * nu, F * nu))
    h = F * rec.sample_period if kind is LiftKind.TIME else rec.sample_period
    omega = bin_grid(R.shape[0], h)
    J = LiftedFrf(kind, omega, fit_j.G, F, ny, nu, h)
    S = LiftedFrf(kind, omega, fit_s.G, F, nu, nu, h)
    if return_fits:
        return J, S, fit_j, fit_s
    return J, S


def _indirect(J: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``J S^-1`` per bin via a solve; NaN where ``S`` is singular."""
    P = np.full(J.shape, np.nan, dtype=complex)
    finite = np.all(np.isfinite(J), axis=(1, 2)) & np.all(np.isfinite(S), axis=(1, 2))
    cond = np.full(S.shape[0], np.inf)
    cond[finite] = np.linalg.cond(S[finite])
    ok = cond <= S_COND_LIMIT
    if np.any(ok):
        St = np.swapaxes(S[ok], 1, 2)
        P[ok] = np.swapaxes(np.linalg.solve(St, np.swapaxes(J[ok], 1, 2)), 1, 2)
    n_bad = int(np.sum(finite & ~ok))
    if n_bad:
        warnings.warn(f"{n_bad} bins have singular S (cond > {S_COND_LIMIT:g}); flagged as NaN",
                      UserWarning, stacklevel=3)
    return P


def recover_plant(J: LiftedFrf, S: LiftedFrf) -> LiftedFrf:
    """Indirect estimate ``P = J S^-1`` per bin."""
    if J.kind is not S.kind or J.F != S.F or not np.array_equal(J.omega, S.omega):
        raise DimensionMismatch("J and S must share kind, F and grid")
    return J.with_values(_indirect(J.values, S.values))


def singular_s_check(S: LiftedFrf):
    """Raise :class:`SingularS` if every bin of ``S`` is singular."""
    c = np.linalg.cond(S.values)
    if not np.any(c <= S_COND_LIMIT):
        raise SingularS("S is singular at every bin")


def recover_highrate_frf(P: LiftedFrf, p_choice: int | str = 0, cond=None) -> PlantEstimate:
    """Inverse lifting to the high-rate grid.

    For frequency-lifted estimates ``p_choice`` picks one diagonal entry or
    ``"average"``; it is ignored for time-lifted ones.
    """
    if P.kind is LiftKind.TIME:
        out = inverse_time_lift_grid(P)
        method = Method.TIME_LIFTED
    else:
        out = inverse_freq_lift_grid(P, p_choice)
        method = Method.FREQUENCY_LIFTED
    return PlantEstimate(method, out, cond)


def _highrate_cond(fits: tuple[LpmFit, ...], kind: LiftKind, F: int, n: int) -> np.ndarray:
    c = np.maximum.reduce([f.cond for f in fits])
    if kind is LiftKind.TIME:
        return c[np.arange(n) % (n // F)]
    return c


def lifted_estimate(rec: ExperimentRecord, kind: LiftKind | str, config: LpmConfig,
                    p_choice: int | str = 0) -> PlantEstimate:
    """Lift, estimate ``J`` and ``S``, recover and inverse-lift the plant."""
    kind = LiftKind(kind)
    J, S, fj, fs = estimate_lifted_JS(rec, kind, config, return_fits=True)
    P = recover_plant(J, S)
    cond = _highrate_cond((fj, fs), kind, rec.F, rec.n_samples)
    return recover_highrate_frf(P, p_choice, cond)


# -- baselines -----------------------------------------------------------------------

def etfe(rec: ExperimentRecord) -> PlantEstimate:
    """Unwindowed ETFE ``(Y/R)(U/R)^-1``, i.e. ``Y/U`` for SISO loops.

    Bins where ``|R|`` is below ``1e-14`` of its peak are NaN; if all bins
    are, :class:`ZeroInput` is raised.
    """
    R = _matrix(dft(rec.r).bins)
    U = _matrix(dft(rec.u).bins)
    Y = _matrix(dft(rec.y).bins)
    if R.shape[1] != 1 or Y.shape[1] != 1:
        raise DimensionMismatch("the ETFE from a single experiment needs a SISO loop")
    mag = np.abs(R[:, 0])
    excited = mag >= 1e-14 * mag.max() if mag.max() > 0 else np.zeros(mag.shape, bool)
    if not excited.any():
        raise ZeroInput("reference has no energy at any bin")
    vals = np.full((R.shape[0], 1, 1), np.nan, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals[excited, 0, 0] = Y[excited, 0] / U[excited, 0]
    return PlantEstimate(Method.ETFE, Frf(rec.omega, vals), np.full(R.shape[0], np.nan))


def naive_lpm(rec: ExperimentRecord, config: LpmConfig) -> PlantEstimate:
    """LPM of ``J`` and ``S`` on the unlifted high-rate data, then ``J S^-1``."""
    R = _matrix(dft(rec.r).bins)
    U = _matrix(dft(rec.u).bins)
    Y = _matrix(dft(rec.y).bins)
    fj = lpm_estimate(R, Y, _fit_config(config, R.shape[1], Y.shape[1]))
    fs = lpm_estimate(R, U, _fit_config(config, R.shape[1], U.shape[1]))
    P = _indirect(fj.G, fs.G)
    return PlantEstimate(Method.NAIVE_LPM, Frf(rec.omega, P), np.maximum(fj.cond, fs.cond))


# -- evaluation ------------------------------------------------------------------------

def model_error(est: PlantEstimate, truth: Frf) -> np.ndarray:
    """Per-bin ``|P - P_hat|`` (spectral norm for MIMO)."""
    d = est.frf.values - truth.values
    if d.shape[1:] == (1, 1):
        return np.abs(d[:, 0, 0])
    out = np.full(d.shape[0], np.nan)
    ok = np.all(np.isfinite(d), axis=(1, 2))
    out[ok] = np.linalg.norm(d[ok], ord=2, axis=(1, 2))
    return out


def evaluation_bins(n: int) -> np.ndarray:
    """Bins ``1 .. N/2``: positive frequencies up to Nyquist, DC excluded."""
    return np.arange(1, n // 2 + 1)


def alias_coupled_bins(loop: MultirateLoop, n: int, threshold: float = 1e-2) -> np.ndarray:
    """Bins in ``1 .. N/2`` whose aliased loop content is significant.

    A bin counts when ``sum_{f>0} |C_f|^2 / |C_0|^2`` exceeds ``threshold``,
    with ``C_f`` from :func:`alias_transfer`: there the output holds a
    non-negligible share of reference content from the shifted bins.
    """
    C = alias_transfer(loop, n)
    ratio = np.sum(np.abs(C[1:]) ** 2, axis=0) / np.abs(C[0]) ** 2
    bins = evaluation_bins(n)
    return bins[ratio[bins] > threshold]


# -- pipeline ----------------------------------------------------------------------

ALL_METHODS = (Method.ETFE, Method.NAIVE_LPM, Method.TIME_LIFTED, Method.FREQUENCY_LIFTED)


@dataclass(frozen=True, eq=False)
class PipelineResult:
    record: ExperimentRecord
    truth: Frf
    estimates: dict
    pfg_truth: object
    pfg: dict
    errors: dict
    pfg_errors: dict

    def medians(self, which: str = "model") -> dict:
        """Median error over evaluation bins per method name."""
        src = self.errors if which == "model" else self.pfg_errors
        bins = evaluation_bins(self.record.n_samples)
        return {m: float(np.nanmedian(e[bins])) for m, e in src.items()}


def estimate_all(rec: ExperimentRecord, config: LpmConfig, methods=ALL_METHODS,
                 p_choice: int | str = 0) -> dict:
    """Plant estimates keyed by method name."""
    out = {}
    for m in (Method(x) for x in methods):
        if m is Method.ETFE:
            out[m.value] = etfe(rec)
        elif m is Method.NAIVE_LPM:
            out[m.value] = naive_lpm(rec, config)
        elif m is Method.TIME_LIFTED:
            out[m.value] = lifted_estimate(rec, LiftKind.TIME, config)
        else:
            out[m.value] = lifted_estimate(rec, LiftKind.FREQUENCY, config, p_choice)
    return out


def run_pipeline(loop: MultirateLoop, excitation: Excitation, config: LpmConfig,
                 duration: float, methods=ALL_METHODS, p_choice: int | str = 0) -> PipelineResult:
    """Excite, identify with every method, and compute their PFG curves."""
    from .pfg import pfg_closed_form, pfg_from_estimate

    rec = run_experiment(loop, excitation, duration)
    truth = Frf(rec.omega, frf(loop.plant, rec.omega))
    estimates = estimate_all(rec, config, methods, p_choice)
    pfg_truth = pfg_closed_form(truth, loop.controller, loop.F)
    pfgs = {m: pfg_from_estimate(e, loop.controller, loop.F) for m, e in estimates.items()}
    errors = {m: model_error(e, truth) for m, e in estimates.items()}
    pfg_errors = {m: np.abs(c.values - pfg_truth.values) for m, c in pfgs.items()}
    return PipelineResult(rec, truth, estimates, pfg_truth, pfgs, errors, pfg_errors)
