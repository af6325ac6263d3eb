import json

import numpy as np
import pytest

from mrident.diagnostics import (PerturbationProbe, affected_bins, first_order_bias_lifted,
                                 highrate_bias, highrate_bias_from_lifted, random_probe,
                                 single_bin_probe, structure_checks, write_report)
from mrident.errors import DimensionMismatch, SingularS
from mrident.lifting import LiftKind, convert_time_to_freq
from mrident.multirate import analytic_lifted_js

N_LOW = 30


@pytest.fixture(scope="module", params=list(LiftKind))
def pair(request, loop):
    J, S = analytic_lifted_js(loop, N_LOW)
    if request.param is LiftKind.FREQUENCY:
        J, S = convert_time_to_freq(J), convert_time_to_freq(S)
    return J, S


def _rand(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_affine_case_is_exact(pair, rng):
    J, S = pair
    probe = PerturbationProbe(J, S, _rand(rng, J.values.shape), np.zeros_like(S.values), 1e-2)
    pred, act, rem = first_order_bias_lifted(probe)
    scale = np.abs(act.values).max()
    assert np.abs(pred.values - act.values).max() <= 1e-12 * max(scale, 1.0)


def test_remainder_is_second_order(pair, rng):
    J, S = pair
    probe = random_probe(J, S, rng)
    ratios = [first_order_bias_lifted(probe.with_eps(e))[2] for e in (1e-2, 1e-3)]
    assert max(ratios) / min(ratios) <= 3.0
    # the first-order term itself scales linearly
    p1 = first_order_bias_lifted(probe.with_eps(1e-2))[0].values
    p2 = first_order_bias_lifted(probe.with_eps(1e-3))[0].values
    np.testing.assert_allclose(p1, 10 * p2, rtol=1e-12)


def test_cancellation_direction(pair, rng):
    J, S = pair
    P = np.linalg.solve(np.swapaxes(S.values, 1, 2), np.swapaxes(J.values, 1, 2)).swapaxes(1, 2)
    Sd = random_probe(J, S, rng).S_delta
    # J + eps P S_d = P (S + eps S_d), so the change vanishes at every order,
    # not only the first
    for eps in (1e-2, 1e-3):
        pred, act, _ = first_order_bias_lifted(PerturbationProbe(J, S, P @ Sd, Sd, eps))
        assert np.abs(pred.values).max() <= 1e-12
        assert np.abs(act.values).max() <= 1e-12 * np.abs(P).max()


def test_single_bin_spread(pair):
    J, S = pair
    k = 7
    bins = affected_bins(highrate_bias_from_lifted(single_bin_probe(J, S, k)))
    if J.kind is LiftKind.TIME:
        np.testing.assert_array_equal(bins, [k + s * N_LOW for s in range(3)])
    else:
        np.testing.assert_array_equal(bins, [k])


def test_frequency_lift_block_maps_to_shifted_bin(loop):
    J, S = analytic_lifted_js(loop, N_LOW)
    J, S = convert_time_to_freq(J), convert_time_to_freq(S)
    probe = single_bin_probe(J, S, 4, block=1)
    # entry (1, 1) at bin k is read for high-rate bin k + N/F when p = 1
    np.testing.assert_array_equal(affected_bins(highrate_bias_from_lifted(probe, p=1)), [4 + N_LOW])
    assert len(affected_bins(highrate_bias_from_lifted(probe, p=0))) == 0


def test_zero_perturbation_gives_zero_bias(pair):
    J, S = pair
    probe = PerturbationProbe(J, S, np.zeros_like(J.values), np.zeros_like(S.values), 1e-3)
    assert not np.any(highrate_bias_from_lifted(probe).values)


def test_highrate_bias_matches_actual_change_to_first_order(pair, rng):
    J, S = pair
    probe = random_probe(J, S, rng)
    gaps = []
    for eps in (1e-3, 1e-4):
        _, act, _ = first_order_bias_lifted(probe.with_eps(eps))
        pred_h = highrate_bias_from_lifted(probe.with_eps(eps)).values
        gaps.append(np.abs(highrate_bias(act).values - pred_h).max())
    # the gap is second order: ten times smaller eps, about a hundred times smaller gap
    assert 30 <= gaps[0] / gaps[1] <= 300


def test_singular_s(pair):
    J, S = pair
    Sv = S.values.copy()
    Sv[2] = 0.0
    probe = PerturbationProbe(J, S.with_values(Sv), np.zeros_like(J.values), np.zeros_like(Sv), 1e-3)
    with pytest.raises(SingularS):
        first_order_bias_lifted(probe)


def test_probe_validation(pair):
    J, S = pair
    with pytest.raises(ValueError):
        PerturbationProbe(J, S, np.zeros_like(J.values), np.zeros_like(S.values), 0.0)
    with pytest.raises(DimensionMismatch):
        PerturbationProbe(J, S, np.zeros((2, 3, 3)), np.zeros_like(S.values), 1e-3)
    other = LiftKind.FREQUENCY if J.kind is LiftKind.TIME else LiftKind.TIME
    probe = PerturbationProbe(J, S, np.zeros_like(J.values), np.zeros_like(S.values), 1e-3)
    with pytest.raises(DimensionMismatch):
        highrate_bias_from_lifted(probe, other)


def test_structure_checks_pass_and_report(pair, tmp_path):
    J, S = pair
    checks = structure_checks(J, S, seed=3)
    assert len(checks) == 3 and all(c["passed"] for c in checks)
    p = tmp_path / "diag.json"
    write_report(p, checks)
    data = json.loads(p.read_text())
    assert data["passed"] is True and len(data["checks"]) == 3
