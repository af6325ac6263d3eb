"""First-order bias structure of the lifted indirect estimate.

A perturbation of the lifted estimates ``J -> J + eps J_d``,
``S -> S + eps S_d`` moves ``P = J S^-1`` by::

    eps (J_d - P S_d) S^-1 + O(eps^2)

Inverse time lifting sums the first block column with weights
``exp(-j sigma omega h)``, so an error at one low-rate bin reaches the ``F``
high-rate bins that fold onto it. Inverse frequency lifting reads one diagonal
entry, so an error there reaches a single high-rate bin.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularS
from .lifting import LiftKind, LiftedFrf, inverse_freq_lift_grid, inverse_time_lift_grid
from .systems import Frf

S_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class PerturbationProbe:
    """Base lifted pair ``(J, S)``, directions ``(J_d, S_d)`` and scale ``eps``.

    ``J_d`` and ``S_d`` are arrays shaped like ``J.values`` and ``S.values``.
    """

    J: LiftedFrf
    S: LiftedFrf
    J_delta: np.ndarray
    S_delta: np.ndarray
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.J.kind is not self.S.kind or not np.array_equal(self.J.omega, self.S.omega):
            raise DimensionMismatch("J and S must share kind and grid")
        jd = np.asarray(self.J_delta, dtype=complex)
        sd = np.asarray(self.S_delta, dtype=complex)
        if jd.shape != self.J.values.shape or sd.shape != self.S.values.shape:
            raise DimensionMismatch("perturbations must match the shapes of J and S")
        object.__setattr__(self, "J_delta", jd)
        object.__setattr__(self, "S_delta", sd)

    def with_eps(self, eps: float) -> "PerturbationProbe":
        return PerturbationProbe(self.J, self.S, self.J_delta, self.S_delta, eps)


def _right_divide(A: np.ndarray, S: np.ndarray) -> np.ndarray:
    if np.any(np.linalg.cond(S) > S_COND_LIMIT):
        raise SingularS("S is numerically singular at some bin")
    return np.swapaxes(np.linalg.solve(np.swapaxes(S, 1, 2), np.swapaxes(A, 1, 2)), 1, 2)


def first_order_bias_lifted(probe: PerturbationProbe):
    """Predicted and actual change of ``J S^-1``.

    Returns
    -------
    predicted, actual : LiftedFrf
        ``eps (J_d - P S_d) S^-1`` and ``(J + eps J_d)(S + eps S_d)^-1 - J S^-1``.
    remainder_ratio : float
        ``max_k ||actual - predicted|| / eps^2``.
    """
    J, S, eps = probe.J.values, probe.S.values, probe.eps
    P = _right_divide(J, S)
    pred = eps * _right_divide(probe.J_delta - P @ probe.S_delta, S)
    act = _right_divide(J + eps * probe.J_delta, S + eps * probe.S_delta) - P
    rem = np.linalg.norm(act - pred, axis=(1, 2)).max() / eps ** 2
    return probe.J.with_values(pred), probe.J.with_values(act), float(rem)


def highrate_bias(lifted_bias: LiftedFrf, p: int | str = 0) -> Frf:
    """Map a lifted error to the high-rate grid (inverse lifting is linear)."""
    if lifted_bias.kind is LiftKind.TIME:
        return inverse_time_lift_grid(lifted_bias)
    return inverse_freq_lift_grid(lifted_bias, p)


def highrate_bias_from_lifted(probe: PerturbationProbe, kind: LiftKind | str | None = None,
                              p: int | str = 0) -> Frf:
    """First-order high-rate error implied by the probe.

    ``kind`` defaults to the probe's own and must match it when given.
    """
    if kind is not None and LiftKind(kind) is not probe.J.kind:
        raise DimensionMismatch(f"probe is {probe.J.kind.value}, not {LiftKind(kind).value}")
    predicted, _, _ = first_order_bias_lifted(probe)
    return highrate_bias(predicted, p)


def affected_bins(bias: Frf, tol: float = 0.0) -> np.ndarray:
    """High-rate bins where ``bias`` is nonzero (above ``tol``)."""
    mag = np.abs(bias.values).max(axis=(1, 2))
    return np.flatnonzero(mag > tol)


# -- report --------------------------------------------------------------------------

def _check(name, predicted, actual, ratio, passed):
    return {"name": name, "predicted_norm": float(predicted), "actual_norm": float(actual),
            "remainder_ratio": None if ratio is None else float(ratio), "passed": bool(passed)}


def random_probe(J: LiftedFrf, S: LiftedFrf, rng: np.random.Generator, eps: float = 1e-2) -> PerturbationProbe:
    """Random directions scaled per bin: ``||J_d|| = ||J||`` and
    ``||S_d|| = sigma_min(S)``, so that ``eps`` measures the perturbation
    relative to the distance of ``S`` from singularity."""
    def rand(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    Jd, Sd = rand(J.values.shape), rand(S.values.shape)
    Jd *= (np.linalg.norm(J.values, 2, axis=(1, 2)) / np.linalg.norm(Jd, 2, axis=(1, 2)))[:, None, None]
    smin = np.linalg.svd(S.values, compute_uv=False)[:, -1]
    Sd *= (smin / np.linalg.norm(Sd, 2, axis=(1, 2)))[:, None, None]
    return PerturbationProbe(J, S, Jd, Sd, eps)


def single_bin_probe(J: LiftedFrf, S: LiftedFrf, k: int, block: int = 0,
                     eps: float = 1e-3) -> PerturbationProbe:
    """Perturb the ``(block, block)`` entry of ``J`` at bin ``k`` only."""
    Jd = np.zeros_like(J.values)
    ny, nu = J.ny, J.nu
    Jd[k, block * ny:(block + 1) * ny, block * nu:(block + 1) * nu] = 1.0
    return PerturbationProbe(J, S, Jd, np.zeros_like(S.values), eps)


def structure_checks(J: LiftedFrf, S: LiftedFrf, seed: int = 0) -> list[dict]:
    """Single-bin spread, epsilon sweep and cancellation checks on one pair."""
    rng = np.random.default_rng(seed)
    F = J.F
    checks = []
    k = int(rng.integers(1, len(J)))
    expect = F if J.kind is LiftKind.TIME else 1
    bias = highrate_bias_from_lifted(single_bin_probe(J, S, k))
    n_hit = len(affected_bins(bias))
    checks.append(_check(f"{J.kind.value}: single-bin spread ({n_hit} bins, expect {expect})",
                         expect, n_hit, None, n_hit == expect))
    rp = random_probe(J, S, rng)
    ratios = [first_order_bias_lifted(rp.with_eps(e))[2] for e in (1e-2, 1e-3)]
    q = max(ratios) / min(ratios)
    pred, act, _ = first_order_bias_lifted(rp.with_eps(1e-3))
    checks.append(_check(f"{J.kind.value}: second-order remainder (ratio spread {q:.3g})",
                         np.linalg.norm(pred.values), np.linalg.norm(act.values), ratios[-1], q <= 3))
    P = _right_divide(J.values, S.values)
    Sd = rp.S_delta
    cp = PerturbationProbe(J, S, P @ Sd, Sd, 1e-3)
    pred, act, rem = first_order_bias_lifted(cp)
    checks.append(_check(f"{J.kind.value}: cancellation direction", np.linalg.norm(pred.values),
                         np.linalg.norm(act.values), rem, np.abs(pred.values).max() <= 1e-12))
    return checks


def write_report(path, checks: list[dict]):
    with open(path, "w") as fh:
        json.dump({"checks": checks, "passed": all(c["passed"] for c in checks)}, fh, indent=2)
