"""Acceptance suite: one test per criterion, each reporting a pass/fail line.

The lines are printed as they complete and repeated in the terminal summary.
Criterion 10 is long-running and only runs with LPRECEIVER_EXTENDED=1.
"""

import math
import os
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from _graphs import check_equivalence, random_graph
from conftest import ACCEPTANCE, CODEWORDS, ROOT6
from lpreceiver import (IsiChannel, JointSystem, ReceiverFailure, awgn_pseudoweight, bpsk, hamming_7_4, proakis_b,
                        pseudodistance, realize_cover, verify_cover)
from lpreceiver.codes import low_density_105
from lpreceiver.errors import NotRealizableError
from lpreceiver.equalizer import snr_to_sigma
from lpreceiver.harness import ExperimentConfig, receive, run_experiment, trial_rng
from lpreceiver.relaxation import indicator_point
from lpreceiver.pseudo import cover_to_normalized_vector, point_from_dict, snap_point, tmv
from lpreceiver.simplex import solve

SEED = 2024
RATE = 4 / 7


@contextmanager
def criterion(n, title):
    """Record a PASS/FAIL/SKIP line for criterion n around the test body."""
    detail = []
    try:
        yield detail
    except pytest.skip.Exception as exc:
        line = f"criterion {n:2d} SKIP  {title}: {exc.msg}"
        raise
    except BaseException as exc:
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        line = f"criterion {n:2d} FAIL  {title}: {'; '.join(detail + [reason])}"
        raise
    else:
        line = f"criterion {n:2d} PASS  {title}" + (f": {'; '.join(detail)}" if detail else "")
    finally:
        ACCEPTANCE[n] = line
        print(line)


def hamming_system(eb_n0_db):
    return JointSystem.get(hamming_7_4(), proakis_b(snr_to_sigma(eb_n0_db, RATE)), bpsk())


def draw(system, snr_index, trial, zero=False):
    rng = trial_rng(SEED, snr_index, trial)
    c = np.zeros(system.n, dtype=np.int64) if zero else system.code.encode(rng.integers(0, 2, size=system.code.k))
    return system.simulate(c, rng=rng)


def outcome(out, system):
    return "failure" if isinstance(out, ReceiverFailure) else tuple(system.codeword_of(out).tolist())


# ------------------------------------------------------------------ 1, 2

PRINTED = {
    1: ([2, -2, -4, -2, 0, 0, 2], [2, -2, -3, -1, 0, 0, 0], [2 / 3, 2 / 3, 5 / 3, 1 / 3, 0, 0, 0]),
    3: ([4, 4, 4, 2, 0, 0, -2], [4, 4, 3, 1, 0, 0, 0], [8 / 3, 8 / 3, 5 / 3, 1 / 3, 0, 0, 0]),
}


def test_criterion_01_golden_four_thirds(system, kappas, codeword_configs):
    with criterion(1, "pseudodistance(c1, k1) = pseudodistance(c3, k3) = 4/3 with printed t, m, v") as detail:
        for i, (t, m, v) in PRINTED.items():
            got_t, got_m, got_v = tmv(codeword_configs[i], kappas[i], system.signal_map)
            assert np.allclose(got_t * ROOT6, t, atol=1e-9), f"t for k{i}"
            assert np.allclose(got_m * ROOT6, m, atol=1e-9), f"m for k{i}"
            assert np.allclose(got_v, v, atol=1e-9), f"v for k{i}"
            d = pseudodistance(codeword_configs[i], kappas[i], system.signal_map)
            detail.append(f"k{i}: {d:.12f}")
            assert abs(d - 4 / 3) <= 1e-9


def test_criterion_02_golden_root_two(system, kappas, codeword_configs):
    with criterion(2, "pseudodistance = sqrt(2) for (c1, c2), (c3, c4), (c2, k2), (c4, k4)") as detail:
        x = codeword_configs
        pairs = {"c1,c2": (x[1], x[2]), "c3,c4": (x[3], x[4]), "c2,k2": (x[2], kappas[2]), "c4,k4": (x[4], kappas[4])}
        for name, (a, b) in pairs.items():
            d = pseudodistance(a, b, system.signal_map)
            detail.append(f"{name}: {d:.12f}")
            assert abs(d - math.sqrt(2)) <= 1e-9, name


# ------------------------------------------------------------------ 3

def test_criterion_03_lp2_lp3_equivalence():
    with criterion(3, "LP2 and LP3 agree on 200 random graphs, value offset exact, integral outputs ML") as detail:
        integral = 0
        for seed in range(200):
            graph = random_graph(np.random.default_rng([SEED, seed]))
            integral += not isinstance(check_equivalence(graph), ReceiverFailure)
        detail.append(f"{integral} integral, {200 - integral} failures")


# ------------------------------------------------------------------ 4, 6

@pytest.fixture(scope="module")
def certificate_run():
    """2000 random-codeword trials at 3 and 7 dB: LP4 outcome, brute-force outcome, fractional points."""
    records = {}
    for snr_index, snr in enumerate((3.0, 7.0)):
        system = hamming_system(snr)
        rows = []
        for trial in range(2000):
            _, y = draw(system, snr_index, trial)
            lp = system.lp("lp4", y)
            out = system.decode("lp4", lp, solve(lp))
            ml = system.brute_force(y)
            rows.append((out, ml))
        records[snr] = (system, rows)
    return records


def test_criterion_04_ml_certificate(certificate_run):
    with criterion(4, "integral LP4 outputs equal brute-force ML at 3 and 7 dB (2000 trials each)") as detail:
        mismatches = 0
        for snr, (system, rows) in certificate_run.items():
            integral = [(out, ml) for out, ml in rows if not isinstance(out, ReceiverFailure)]
            bad = sum(1 for out, ml in integral if out != ml.configuration)
            mismatches += bad
            detail.append(f"{snr:g} dB: {len(integral)} integral, {len(rows) - len(integral)} fractional, "
                          f"{bad} mismatches")
        assert mismatches == 0


def test_criterion_06_cover_round_trip(certificate_run, system, kappas):
    with criterion(6, "fractional events and k1 (M=2), k2 (M=3) realize as verifying graph covers") as detail:
        graph = system.base_graph
        realized, degrees, skipped = 0, set(), 0
        for _, rows in certificate_run.values():
            for out, _ in rows:
                if not isinstance(out, ReceiverFailure):
                    continue
                try:
                    exact = snap_point(out.point, graph)
                except NotRealizableError:
                    skipped += 1
                    continue
                cover = realize_cover(exact, graph)
                assert verify_cover(cover, graph)
                gbar = cover_to_normalized_vector(cover, graph)
                assert all(gbar[v].tolist() == exact.g[v].tolist() for v in graph.var_ids)
                realized += 1
                degrees.add(cover.degree)
        detail.append(f"{realized} fractional events realized, degrees {sorted(degrees)}, {skipped} not rational")
        assert realized > 0
        failures = []
        for i, want in ((1, 2), (2, 3)):
            cover = realize_cover(kappas[i], graph)
            ok = verify_cover(cover, graph) and all(
                cover_to_normalized_vector(cover, graph)[v].tolist() == kappas[i].g[v].tolist()
                for v in graph.var_ids)
            detail.append(f"k{i}: degree {cover.degree}, verifies {ok}")
            if not ok or cover.degree != want:
                failures.append(f"k{i} expected degree {want}")
        assert not failures, ", ".join(failures)


# ------------------------------------------------------------------ 5

def test_criterion_05_receiver_equivalence():
    with criterion(5, "LP4 = LP5 and LP4 = generic LP3 on 500 paired trials each") as detail:
        system = hamming_system(3.0)
        for other, snr_index in (("lp5", 10), ("lp3", 11)):
            differ, failures = 0, 0
            for trial in range(500):
                _, y = draw(system, snr_index, trial)
                a = outcome(receive(system, "lp4", y), system)
                b = outcome(receive(system, other, y), system)
                differ += a != b
                failures += a == "failure"
            detail.append(f"lp4 vs {other}: {differ} differ ({failures} failures)")
            assert differ == 0, f"lp4 vs {other}"


# ------------------------------------------------------------------ 7, 8

@pytest.fixture(scope="module")
def fer_run():
    cfg = ExperimentConfig(snr_db=[3.0, 7.0, 11.0], trials=10**7, target_errors=500, seed=SEED).validate()
    return run_experiment(cfg)


def test_criterion_07_fer_bound(fer_run):
    with criterion(7, "FER >= lower bound - 3 standard errors at 3, 7, 11 dB (500 errors each)") as detail:
        ok = True
        for pr in fer_run.points:
            se = pr.standard_error()
            detail.append(f"{pr.snr_db:g} dB: FER {pr.fer:.3e} over {pr.tally.trials} trials, "
                          f"bound {pr.fer_lower_bound:.3e}")
            ok &= pr.tally.frame_errors >= 500 and pr.fer >= pr.fer_lower_bound - 3 * se
        assert ok


def test_criterion_08_spectrum_structure(fer_run):
    with criterion(8, "spectrum at 11 dB: 4/3 non-configurations-only, sqrt(2) both") as detail:
        k = fer_run.config.snr_db.index(11.0)
        sp = fer_run.spectra()[k]
        assert sp.total >= 200
        low, mid = sp.at(4 / 3), sp.at(math.sqrt(2))
        assert low is not None and mid is not None
        detail.append(f"4/3: {low.count} events {low.classification}; sqrt(2): {mid.count} events "
                      f"({mid.integral} integral) {mid.classification}")
        assert low.classification == "non-configurations-only"
        assert mid.classification == "both"


# ------------------------------------------------------------------ 9

def test_criterion_09_pseudoweight_floor():
    with criterion(9, "memoryless Hamming LP decoding: every fractional vertex has AWGN pseudoweight >= 3") as detail:
        cfg = ExperimentConfig(channel=[1.0], snr_db=[2.0], trials=10**6, target_errors=200, seed=SEED,
                               codeword="zero", keep_points=True).validate()
        rec = run_experiment(cfg)
        events = rec.points[0].tally.events
        system = JointSystem.get(hamming_7_4(), IsiChannel(np.array([1.0])), bpsk())
        cvars = [f"c{i}" for i in range(1, 8)]
        fractional = [awgn_pseudoweight(point_from_dict(ev.point), system.base_graph, cvars)
                      for ev in events if not ev.integral]
        # integral outputs are codewords, whose pseudoweight is their Hamming weight
        integral = [awgn_pseudoweight(indicator_point(system.base_graph, system.configuration(ev.output_codeword)),
                                      system.base_graph, cvars) for ev in events if ev.integral]
        assert len(events) >= 200
        detail.append(f"{len(fractional)} fractional vertices among {len(events)} events"
                      + (f", min pseudoweight {min(fractional):.6f}" if fractional else "")
                      + f"; integral outputs min weight {min(integral):g}")
        assert all(w >= 3 - 1e-6 for w in fractional + integral)


# ------------------------------------------------------------------ 10

def test_criterion_10_low_density_pseudodistance():
    with criterion(10, "[105,60] code with LP5: smallest event pseudodistance within 10% of 36.80") as detail:
        if os.environ.get("LPRECEIVER_EXTENDED") != "1":
            pytest.skip("optional; set LPRECEIVER_EXTENDED=1 to run")
        snr = float(os.environ.get("LPRECEIVER_EXTENDED_SNR", "4"))
        cfg = ExperimentConfig(code=low_density_105(), snr_db=[snr], receiver="lp5", trials=10**7,
                               target_errors=100, seed=SEED).validate()
        rec = run_experiment(cfg)
        d = [ev.d_eff for ev in rec.points[0].tally.events]
        detail.append(f"{snr:g} dB: {len(d)} events, min d_eff {min(d):.3f}")
        assert abs(min(d) - 36.80) <= 0.1 * 36.80
