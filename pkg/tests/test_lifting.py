import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrident.errors import BadIndex, OffGrid, OffUnitCircle, WrongKind
from mrident.fixtures import random_stable_lti
from mrident.lifting import (LiftKind, LiftedFrf, convert_freq_to_time, convert_time_to_freq,
                             freq_lift, freq_lift_lti, inverse_freq_lift, inverse_freq_lift_grid,
                             inverse_time_lift, inverse_time_lift_grid, lifted_state_space,
                             lti_consistency, modulation_matrix, time_lift, time_lift_from_highrate,
                             time_lift_lti, write_lifted_csv)
from mrident.signals import bin_grid
from mrident.systems import LptvSystem, LtiSystem, frf, lptv_impulse_coefficients


def test_unit_delay_lift_f2():
    d = LtiSystem([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    L = time_lift_lti(d, 2, 8)
    w = np.exp(1j * L.omega * 2)
    for k in range(8):
        np.testing.assert_allclose(L.values[k], [[0, 1 / w[k]], [1, 0]], atol=1e-14)


def test_lift_kind_accepts_short_names():
    assert LiftKind("time") is LiftKind.TIME
    assert LiftKind("frequency-lifted") is LiftKind.FREQUENCY
    with pytest.raises(ValueError):
        LiftKind("space")


def test_lifted_frf_shape_check():
    with pytest.raises(ValueError):
        LiftedFrf(LiftKind.TIME, [0.0], np.zeros((1, 2, 3)), 2, 1, 1, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_round_trips_and_conversion(F, nu, ny, seed):
    rng = np.random.default_rng(seed)
    sys = random_stable_lti(rng, int(rng.integers(1, 5)), nu, ny, 0.01)
    K = 6
    N = F * K
    P = frf(sys, bin_grid(N, 0.01))
    T = time_lift_lti(sys, F, K)
    Fq = freq_lift_lti(sys, F, N)
    np.testing.assert_allclose(inverse_time_lift_grid(T).values, P, atol=1e-10 * np.abs(P).max())
    for p in range(F):
        np.testing.assert_allclose(inverse_freq_lift_grid(Fq, p).values, P, atol=1e-10 * np.abs(P).max())
    np.testing.assert_allclose(convert_time_to_freq(T).values, Fq.values, atol=1e-9 * np.abs(P).max())
    np.testing.assert_allclose(convert_freq_to_time(Fq).values, T.values, atol=1e-9 * np.abs(P).max())
    assert lti_consistency(T) < 1e-10
    assert lti_consistency(Fq) < 1e-12


def test_polyphase_lift_matches_state_space_lift(rng):
    sys = random_stable_lti(rng, 4, 2, 2, 0.5)
    F, K = 3, 10
    a = time_lift_lti(sys, F, K)
    b = time_lift_from_highrate(frf(sys, bin_grid(F * K, 0.5)), F, 0.5)
    np.testing.assert_allclose(b.values, a.values, atol=1e-12)
    np.testing.assert_allclose(b.omega, a.omega)


def test_pointwise_inverse_lifts(rng):
    sys = random_stable_lti(rng, 3, 1, 1, 0.1)
    F, K = 2, 8
    T = time_lift_lti(sys, F, K)
    Fq = freq_lift_lti(sys, F, F * K)
    w = bin_grid(F * K, 0.1)[5]
    ref = frf(sys, w)[0]
    np.testing.assert_allclose(inverse_time_lift(T, w), ref, atol=1e-12)
    np.testing.assert_allclose(inverse_freq_lift(Fq, w, 1), ref, atol=1e-12)
    with pytest.raises(OffGrid):
        inverse_time_lift(T, w * 1.03)
    with pytest.raises(BadIndex):
        inverse_freq_lift(Fq, w, 2)
    with pytest.raises(WrongKind):
        inverse_freq_lift(T, w, 0)
    with pytest.raises(WrongKind):
        inverse_time_lift_grid(Fq)


def test_modulation_matrix_inverse():
    for F in (1, 2, 3, 4):
        z = np.exp(0.37j)
        M = modulation_matrix(F, z, 2)
        np.testing.assert_allclose(M @ np.linalg.inv(M), np.eye(2 * F), atol=1e-12)
        # M / sqrt(F) is unitary on the unit circle
        np.testing.assert_allclose(M.conj().T @ M / F, np.eye(2 * F), atol=1e-12)
    with pytest.raises(OffUnitCircle):
        modulation_matrix(2, 1.1)


def _lifted_from_coefficients(sys: LptvSystem, F: int, omega_low, count=400):
    """Block-Toeplitz sum of lifted Markov parameters of an LPTV system."""
    h_low = F * sys.sample_period
    w = np.exp(1j * np.asarray(omega_low) * h_low)
    M = [lptv_impulse_coefficients(sys, p % sys.period, count * F)[:, 0, 0] for p in range(F)]
    out = np.zeros((len(w), F, F), dtype=complex)
    for p in range(F):
        for q in range(F):
            for l in range(count):
                lag = l * F + p - q
                if lag >= 0:
                    out[:, p, q] += M[p][lag] * w ** -l
    return out


def test_lptv_time_lift_matches_markov_sum(rng):
    ph = tuple(random_stable_lti(rng, 2, 1, 1, radius=0.5) for _ in range(2))
    sys = LptvSystem(ph)
    L = time_lift(sys, 2, 5)
    oracle = _lifted_from_coefficients(sys, 2, L.omega)
    np.testing.assert_allclose(L.values, oracle, atol=1e-10)
    # a period that divides F also lifts
    L4 = time_lift(sys, 4, 3)
    np.testing.assert_allclose(L4.values, _lifted_from_coefficients(sys, 4, L4.omega), atol=1e-10)


def test_lptv_lifts_are_not_lti_shaped(rng):
    ph = tuple(random_stable_lti(rng, 2, 1, 1, radius=0.5) for _ in range(3))
    sys = LptvSystem(ph)
    T = time_lift(sys, 3, 6)
    Fq = freq_lift(sys, 3, 18)
    assert lti_consistency(T) > 1e-2
    assert lti_consistency(Fq) > 1e-2
    np.testing.assert_allclose(convert_freq_to_time(Fq).values, T.values, atol=1e-10)


def test_lptv_with_identical_phases_is_lti(rng):
    sys = random_stable_lti(rng, 3, 1, 1)
    a = time_lift(LptvSystem.from_lti(sys, 3), 3, 5)
    b = time_lift_lti(sys, 3, 5)
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_lifted_state_space_rejects_incompatible_period(rng):
    sys = LptvSystem(tuple(random_stable_lti(rng, 1) for _ in range(3)))
    with pytest.raises(ValueError):
        lifted_state_space(sys, 2)


def test_write_lifted_csv(tmp_path, rng):
    L = time_lift_lti(random_stable_lti(rng), 2, 4)
    p = tmp_path / "l.csv"
    write_lifted_csv(p, L)
    meta = json.loads((tmp_path / "l.csv.json").read_text())
    assert meta["kind"] == "time-lifted" and meta["F"] == 2
    assert len(p.read_text().splitlines()) == 1 + 4 * 4
