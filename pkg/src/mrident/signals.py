"""Sampled signals, the unitary DFT, and time/frequency lifting of signals.

The DFT convention is

    V[k] = 1/sqrt(N) * sum_t v[t] exp(-2j pi t k / N)

and the inverse carries the same ``1/sqrt(N)`` factor, so Parseval holds
without extra scaling. Bin ``k`` sits at ``2 pi k / (N h)`` rad/s.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestError, NotDivisible


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled real signal.

    ``samples`` has shape ``(N,)`` for a scalar signal or ``(N, n_ch)`` for a
    multichannel one.
    """

    samples: np.ndarray
    sample_period: float

    def __post_init__(self):
        s = _frozen(self.samples, float)
        if s.ndim not in (1, 2) or s.shape[0] < 1:
            raise ValueError(f"samples must be (N,) or (N, n_ch) with N >= 1, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_period", float(self.sample_period))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def time(self) -> np.ndarray:
        return np.arange(len(self)) * self.sample_period


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DFT bins of a :class:`Signal`, shape ``(N,)`` or ``(N, n_ch)``."""

    bins: np.ndarray
    sample_period: float

    def __post_init__(self):
        object.__setattr__(self, "bins", _frozen(self.bins, complex))

    def __len__(self):
        return self.bins.shape[0]

    def bin_frequency(self, k) -> np.ndarray:
        """Angular frequency of bin ``k`` in rad/s."""
        return 2 * np.pi * np.asarray(k) / (len(self) * self.sample_period)

    @property
    def omega(self) -> np.ndarray:
        return self.bin_frequency(np.arange(len(self)))


@dataclass(frozen=True, eq=False)
class LiftedSignal:
    """Time-lifted signal; block ``l`` stacks samples ``lF ... lF+F-1``.

    ``blocks`` has shape ``(N/F, F*n_ch)``; within a block the sample vectors
    follow one another in time order.
    """

    blocks: np.ndarray
    lift_factor: int
    sample_period: float
    n_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "blocks", _frozen(self.blocks, float))

    @property
    def block_period(self) -> float:
        return self.lift_factor * self.sample_period

    def as_signal(self) -> Signal:
        """The lifted sequence viewed as an ``F*n_ch``-channel low-rate signal."""
        return Signal(self.blocks, self.block_period)


@dataclass(frozen=True, eq=False)
class LiftedSpectrum:
    """Frequency-lifted spectrum.

    ``components[i]`` is the original spectrum shifted by ``phi**i``, i.e.
    ``components[i][k] = V[(k + i*N/F) % N]`` with ``phi = exp(2j pi / F)``.
    """

    components: np.ndarray
    lift_factor: int
    sample_period: float

    def __post_init__(self):
        object.__setattr__(self, "components", _frozen(self.components, complex))

    @property
    def phase_root(self) -> complex:
        return np.exp(2j * np.pi / self.lift_factor)

    def stacked(self) -> np.ndarray:
        """Per-bin lifted vectors, shape ``(N, F*n_ch)``."""
        c = self.components
        if c.ndim == 2:
            return c.T.copy()
        # (F, N, n_ch) -> (N, F, n_ch) -> (N, F*n_ch)
        return np.moveaxis(c, 0, 1).reshape(c.shape[1], -1)


def dft(signal: Signal) -> Spectrum:
    return Spectrum(np.fft.fft(signal.samples, axis=0, norm="ortho"), signal.sample_period)


def idft(spectrum: Spectrum, tol: float = 1e-9) -> Signal:
    """Inverse DFT back to a real signal.

    Raises ``ValueError`` if the spectrum is not Hermitian to within ``tol``
    relative, since the result would not be real.
    """
    x = np.fft.ifft(spectrum.bins, axis=0, norm="ortho")
    scale = max(np.max(np.abs(x)), 1e-300)
    if np.max(np.abs(x.imag)) > tol * scale:
        raise ValueError("spectrum is not Hermitian; inverse DFT is not real")
    return Signal(x.real, spectrum.sample_period)


def _check_factor(n: int, F: int):
    if F < 1:
        raise ValueError("lift factor must be a positive integer")
    if n % F:
        raise NotDivisible(f"length {n} is not divisible by F={F}")


def lift_time(signal: Signal, F: int) -> LiftedSignal:
    n = len(signal)
    _check_factor(n, F)
    s = signal.samples.reshape(n, -1)
    blocks = s.reshape(n // F, F * s.shape[1])
    return LiftedSignal(blocks, F, signal.sample_period, s.shape[1])


def unlift_time(lifted: LiftedSignal) -> Signal:
    b = lifted.blocks
    samples = b.reshape(b.shape[0] * lifted.lift_factor, lifted.n_channels)
    if lifted.n_channels == 1:
        samples = samples[:, 0]
    return Signal(samples, lifted.sample_period)


def lift_frequency(spectrum: Spectrum, F: int) -> LiftedSpectrum:
    n = len(spectrum)
    _check_factor(n, F)
    step = n // F
    comps = np.stack([np.roll(spectrum.bins, -i * step, axis=0) for i in range(F)])
    return LiftedSpectrum(comps, F, spectrum.sample_period)


def bin_grid(n: int, sample_period: float) -> np.ndarray:
    """Angular frequencies ``2 pi k / (n h)`` of a full DFT grid."""
    return 2 * np.pi * np.arange(n) / (n * sample_period)


# -- CSV ---------------------------------------------------------------------

def _fmt(x) -> str:
    # 17 significant digits round-trip every double exactly
    return "%.17g" % float(x)


def write_signal_csv(path, signal: Signal):
    s = signal.samples.reshape(len(signal), -1)
    header = ["t", "value"] if signal.samples.ndim == 1 else ["t"] + [f"ch{i}" for i in range(s.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, row in zip(signal.time, s):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def read_csv_columns(path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestError(f"{path}: {exc}") from exc
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = {}
    for j, name in enumerate(header):
        try:
            data[name] = np.array([float(r[j]) for r in rows[1:]])
        except (ValueError, IndexError) as exc:
            raise IngestError(f"{path}: bad value in column '{name}'") from exc
    return data


def read_signal_csv(path, sample_period: float | None = None) -> Signal:
    """Read a signal CSV. The sample period is taken from the time column
    unless given explicitly."""
    cols = read_csv_columns(path)
    if "t" not in cols:
        raise IngestError(f"{path}: missing column 't'")
    t = cols.pop("t")
    if sample_period is None:
        if len(t) < 2:
            raise IngestError(f"{path}: need at least two samples to infer the sample period")
        sample_period = float((t[-1] - t[0]) / (len(t) - 1))
    h = sample_period
    if "value" in cols:
        return Signal(cols["value"], h)
    chans = sorted((k for k in cols if k.startswith("ch")), key=lambda k: int(k[2:]))
    if not chans:
        raise IngestError(f"{path}: missing column 'value'")
    return Signal(np.column_stack([cols[k] for k in chans]), h)


def write_spectrum_csv(path, spectrum: Spectrum):
    if spectrum.bins.ndim != 1:
        raise ValueError("spectrum CSV holds a single channel")
    f_hz = spectrum.omega / (2 * np.pi)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "re", "im"])
        for f, v in zip(f_hz, spectrum.bins):
            w.writerow([_fmt(f), _fmt(v.real), _fmt(v.imag)])
