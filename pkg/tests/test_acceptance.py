"""Acceptance criteria 1-11 at their stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import contextlib
import time

import numpy as np
import pytest

from mrident.diagnostics import (affected_bins, first_order_bias_lifted, highrate_bias_from_lifted,
                                 random_probe, single_bin_probe)
from mrident.errors import NotIdentifiable
from mrident.fixtures import benchmark_loop, random_stable_lti
from mrident.ident import (Excitation, alias_coupled_bins, recover_plant, run_pipeline)
from mrident.lifting import (convert_time_to_freq, freq_lift_lti, inverse_freq_lift,
                             inverse_freq_lift_grid, inverse_time_lift, inverse_time_lift_grid,
                             modulation_matrix, time_lift_lti)
from mrident.lpm import LpmConfig, lpm_estimate
from mrident.multirate import MultirateLoop, analytic_lifted_js, closed_loop_output_spectrum, simulate_loop
from mrident.pfg import pfg_brute_force, pfg_true
from mrident.signals import Signal, bin_grid, dft
from mrident.systems import LtiSystem, frf, frf_eval

from conftest import ACCEPTANCE

DESK = 100.0          # s, desk-scale record
N_DESK = 24000        # high-rate samples at 240 Hz
CFG = LpmConfig(2, 8)


@contextlib.contextmanager
def criterion(number, title):
    """Record PASS/FAIL for a criterion; ``detail`` collects measured values."""
    detail = {}
    t0 = time.perf_counter()
    try:
        yield detail
    except BaseException:
        ACCEPTANCE[number] = (False, title, _fmt(detail, t0))
        raise
    ACCEPTANCE[number] = (True, title, _fmt(detail, t0))


def _fmt(detail, t0):
    parts = [f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items()]
    return ", ".join(parts + [f"time={time.perf_counter() - t0:.1f}s"])


def _fixtures():
    """Five random stable LTI systems with assorted sizes and sample periods."""
    rng = np.random.default_rng(2024)
    dims = [(3, 1, 1, 0.01), (5, 1, 1, 1.0), (2, 2, 1, 0.5), (4, 1, 2, 0.1), (4, 2, 2, 1 / 240)]
    return [random_stable_lti(rng, n, nu, ny, h) for n, nu, ny, h in dims]


def _single_rate(loop):
    K = loop.controller
    return MultirateLoop(loop.plant, LtiSystem(K.A, K.B, K.C, K.D, loop.h_high), 1)


@pytest.fixture(scope="module")
def loop():
    return benchmark_loop()


@pytest.fixture(scope="module")
def desk_run(loop):
    """Noise-free desk-scale benchmark run with a white-noise reference."""
    t0 = time.perf_counter()
    res = run_pipeline(loop, Excitation(kind="white", seed=1), CFG, DESK)
    return res, time.perf_counter() - t0


def test_criterion_01_lifting_round_trips():
    with criterion(1, "lifting round trips, 5 systems x F in 1..4, rel 1e-9") as d:
        t0 = time.perf_counter()
        worst = 0.0
        for sys in _fixtures():
            for F in (1, 2, 3, 4):
                K = 12
                N = F * K
                omega = bin_grid(N, sys.sample_period)
                ref = np.stack([frf_eval(sys, w) for w in omega])
                scale = np.abs(ref).max()
                T = time_lift_lti(sys, F, K)
                Fq = freq_lift_lti(sys, F, N)
                worst = max(worst, np.abs(inverse_time_lift_grid(T).values - ref).max() / scale,
                            np.abs(inverse_freq_lift_grid(Fq).values - ref).max() / scale)
                for k in (0, 1, N // 2, N - 1):
                    worst = max(worst,
                                np.abs(inverse_time_lift(T, omega[k]) - ref[k]).max() / scale,
                                np.abs(inverse_freq_lift(Fq, omega[k], F - 1) - ref[k]).max() / scale)
        elapsed = time.perf_counter() - t0
        d["max_rel_err"], d["runtime"] = float(worst), f"{elapsed:.2f}s"
        assert worst <= 1e-9
        assert elapsed < 10.0


def test_criterion_02_modulation_conversion():
    with criterion(2, "frequency lift = M (time lift) M^-1 to 1e-9, M M^-1 = I to 1e-12") as d:
        worst, worst_inv = 0.0, 0.0
        for sys in _fixtures():
            for F in (1, 2, 3, 4):
                K = 12
                N = F * K
                T = time_lift_lti(sys, F, K)
                Fq = freq_lift_lti(sys, F, N)
                scale = np.abs(Fq.values).max()
                for k in range(N):
                    z = np.exp(2j * np.pi * k / N)
                    Mu = modulation_matrix(F, z, sys.nu)
                    My = modulation_matrix(F, z, sys.ny)
                    conj = My @ T.values[k % K] @ np.linalg.inv(Mu)
                    worst = max(worst, np.abs(conj - Fq.values[k]).max() / scale)
                    worst_inv = max(worst_inv, np.abs(Mu @ np.linalg.inv(Mu) - np.eye(F * sys.nu)).max())
        d["max_rel_err"], d["max_MMinv_err"] = float(worst), float(worst_inv)
        assert worst <= 1e-9
        assert worst_inv <= 1e-12


def test_criterion_03_block_diagonal_structure():
    with criterion(3, "LTI frequency lifts: off-diagonal blocks <= 1e-10 of diagonal") as d:
        # the direct lift is diagonal by construction; the lift obtained by
        # modulating the time lift is where the structure is a numerical fact
        worst = {"direct": 0.0, "modulated": 0.0}
        for sys in _fixtures():
            for F in (2, 3, 4):
                ny, nu = sys.ny, sys.nu
                mask = np.kron(np.eye(F), np.ones((ny, nu))).astype(bool)
                lifts = {"direct": freq_lift_lti(sys, F, F * 12),
                         "modulated": convert_time_to_freq(time_lift_lti(sys, F, 12))}
                for name, Fq in lifts.items():
                    for V in Fq.values:
                        diag = np.linalg.norm(np.where(mask, V, 0))
                        off = np.linalg.norm(np.where(mask, 0, V))
                        worst[name] = max(worst[name], off / diag)
        d.update({f"{k}_max_ratio": float(v) for k, v in worst.items()})
        assert max(worst.values()) <= 1e-10


def test_criterion_04_output_spectrum_oracle(loop):
    with criterion(4, "closed-loop output spectrum vs steady-state simulation, 3 tones, rel 1e-6") as d:
        n = 2400
        t = np.arange(4 * n)
        r = sum(a * np.cos(2 * np.pi * k * t / n + ph) for a, k, ph in
                ((1.0, 100, 0.2), (0.5, 550, 1.1), (0.8, 910, -0.7)))
        _, y = simulate_loop(loop, Signal(r, loop.h_high))
        Y = dft(Signal(y.samples[-n:], loop.h_high)).bins
        Yo = closed_loop_output_spectrum(loop, dft(Signal(r[-n:], loop.h_high))).bins
        err = np.abs(Y - Yo).max() / np.abs(Yo).max()
        d["rel_err"] = float(err)
        assert err <= 1e-6


def test_criterion_05_lpm_exactness_and_identifiability(rng):
    with criterion(5, "LPM exact on degree-R polynomials to 1e-8; identifiability enforced") as d:
        worst = 0.0
        for R in (0, 1, 2, 3):
            K = 200
            k = np.arange(K, dtype=float)
            U = rng.standard_normal(K) + 1j * rng.standard_normal(K)
            gc = rng.standard_normal(R + 1) * 10.0 ** -(2 * np.arange(R + 1))
            tc = rng.standard_normal(R + 1) * 10.0 ** -(2 * np.arange(R + 1))
            G = np.polyval(gc[::-1], k) * (1 + 0.5j)
            T = np.polyval(tc[::-1], k)
            fit = lpm_estimate(U, G * U + T, LpmConfig(R, 8))
            worst = max(worst, np.abs(fit.G[:, 0, 0] - G).max() / np.abs(G).max())
        d["max_rel_err"] = float(worst)
        assert worst <= 1e-8
        F = 3
        cfg = LpmConfig(2, 8, F, F)
        d["margin"] = f"{cfg.dof}>{F}"
        assert cfg.dof == 5 and cfg.dof > F
        with pytest.raises(NotIdentifiable):
            LpmConfig(2, 7, F, F)          # 15 - 12 = 3, not > 3


def test_criterion_06_indirect_method_exact(loop):
    with criterion(6, "exact lifted J S^-1 equals the lifted plant to 1e-9, both kinds") as d:
        n_low = N_DESK // 3
        J, S = analytic_lifted_js(loop, n_low)
        Pt = time_lift_lti(loop.plant, 3, n_low).values
        et = np.abs(recover_plant(J, S).values - Pt).max() / np.abs(Pt).max()
        Pf = freq_lift_lti(loop.plant, 3, N_DESK).values
        ef = np.abs(recover_plant(convert_time_to_freq(J), convert_time_to_freq(S)).values - Pf).max()
        ef /= np.abs(Pf).max()
        d["time_rel_err"], d["freq_rel_err"] = float(et), float(ef)
        assert et <= 1e-9 and ef <= 1e-9


def test_criterion_07_model_error_ordering(loop, desk_run):
    with criterion(7, "desk-scale model error: freq < time < {naive, ETFE}; >= 10x at alias bins") as d:
        res, elapsed = desk_run
        med = res.medians()
        alias = alias_coupled_bins(loop, N_DESK)
        ratio = np.nanmedian(res.errors["naive-lpm"][alias]) / np.nanmedian(res.errors["frequency-lifted"][alias])
        d.update({m: med[m] for m in med})
        d["alias_bins"], d["alias_ratio"] = len(alias), float(ratio)
        d["pipeline"] = f"{elapsed:.1f}s"
        assert med["frequency-lifted"] < med["time-lifted"] < min(med["naive-lpm"], med["etfe"])
        assert ratio >= 10
        assert elapsed < 120


def test_criterion_07_holds_for_multisine_reference(loop):
    res = run_pipeline(loop, Excitation(seed=1), CFG, DESK)
    med = res.medians()
    assert med["frequency-lifted"] < med["time-lifted"] < min(med["naive-lpm"], med["etfe"])


def test_criterion_07_noisy_ordering_is_reported(loop, capsys):
    # with output noise the lifted fits (F(nu+1)(R+1) parameters per window)
    # carry more variance than the naive fit; reported, not asserted
    res = run_pipeline(loop, Excitation(kind="white", seed=1, noise_std=1e-3), CFG, DESK)
    med = res.medians()
    order = sorted(med, key=med.get)
    with capsys.disabled():
        print("\n  noisy run (noise_std 1e-3) median model error ordering: "
              + " < ".join(f"{m} ({med[m]:.2g})" for m in order))
    assert med["frequency-lifted"] < med["time-lifted"] < med["etfe"]


def test_criterion_08_bias_structure(loop):
    with criterion(8, "single-bin spread F (time) / 1 (frequency); remainder O(eps^2) within 3x") as d:
        J, S = analytic_lifted_js(loop, 200)
        pairs = {"time": (J, S), "frequency": (convert_time_to_freq(J), convert_time_to_freq(S))}
        rng = np.random.default_rng(8)
        for name, (Jk, Sk) in pairs.items():
            counts = {len(affected_bins(highrate_bias_from_lifted(single_bin_probe(Jk, Sk, k))))
                      for k in (1, 50, 117, 199)}
            d[f"{name}_spread"] = ",".join(map(str, sorted(counts)))
            assert counts == ({3} if name == "time" else {1})
            probe = random_probe(Jk, Sk, rng)
            ratios = [first_order_bias_lifted(probe.with_eps(e))[2] for e in (1e-2, 1e-3)]
            q = max(ratios) / min(ratios)
            d[f"{name}_ratio_spread"] = float(q)
            assert q <= 3


def test_criterion_09_pfg_equivalence(loop):
    with criterion(9, "PFG closed form vs brute force rel 1e-3 at 20 bins; F=1 equals |P/(1+PK)| to 1e-9") as d:
        t0 = time.perf_counter()
        curve = pfg_true(loop, N_DESK)
        probes = np.unique(np.linspace(1, N_DESK // 2, 20).round().astype(int))
        probes = np.union1d(probes, [6000])          # 60 Hz
        rel = [abs(pfg_brute_force(loop, curve.omega[k], N_DESK) - curve.values[k]) / curve.values[k]
               for k in probes]
        l1 = _single_rate(loop)
        c1 = pfg_true(l1, N_DESK)
        P = frf(l1.plant, c1.omega)[:, 0, 0]
        Kf = frf(l1.controller, c1.omega)[:, 0, 0]
        ref = np.abs(P / (1 + P * Kf))
        e1 = np.abs(c1.values - ref).max() / ref.max()
        elapsed = time.perf_counter() - t0
        d["probes"], d["max_rel_err"], d["f1_rel_err"] = len(probes), float(max(rel)), float(e1)
        assert len(probes) >= 20
        assert max(rel) <= 1e-3
        assert e1 <= 1e-9
        assert elapsed < 180


def test_criterion_10_pfg_ordering_matches(desk_run):
    with criterion(10, "PFG-estimate error ordering matches the model-error ordering") as d:
        res, _ = desk_run
        mm, pm = res.medians(), res.medians("pfg")
        mo, po = sorted(mm, key=mm.get), sorted(pm, key=pm.get)
        d["model"], d["pfg"] = " < ".join(mo), " < ".join(po)
        assert mo == po


def test_criterion_11_determinism(loop, desk_run, monkeypatch):
    with criterion(11, "pipeline bit-identical across reruns and thread counts") as d:
        base, _ = desk_run
        for threads in ("1", "4"):
            monkeypatch.setenv("MRIDENT_THREADS", threads)
            res = run_pipeline(loop, Excitation(kind="white", seed=1), CFG, DESK)
            assert np.array_equal(res.record.y.samples, base.record.y.samples)
            for m in base.estimates:
                assert np.array_equal(res.estimates[m].frf.values, base.estimates[m].frf.values, equal_nan=True)
                assert np.array_equal(res.pfg[m].values, base.pfg[m].values, equal_nan=True)
        d["reruns"] = "threads 1 and 4"
