"""Monte Carlo error-rate simulation with pseudodistance spectra of error events.

Trial ``t`` at SNR index ``k`` draws everything (information word, noise)
from ``numpy.random.default_rng(SeedSequence([seed, k, t]))``, so any
trial can be reproduced in isolation and results do not depend on how
trials are split among workers.  Trials are tallied in index order and a
point stops after ``trials`` trials or at the trial producing the
``target_errors``-th frame error, whichever comes first.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .codes import LinearCode, load_code
from .equalizer import IsiChannel, JointSystem, Modulation, bpsk, channel_from_spec, snr_to_sigma
from .errors import ConfigurationError, IdenticalPseudoconfigurationError, UnsupportedModeError
from .pseudo import pairwise_error_probability, point_to_dict, pseudodistance, snap_value
from .relaxation import DEFAULT_INTEGRALITY_TOL, ReceiverFailure, build_lp2, build_lp3, extract_output
from .simplex import solve

CONFIG_FORMAT = "lpreceiver-experiment/1"
SPECTRUM_FORMAT = "lpreceiver-spectrum/1"
RECEIVERS = ("lp4", "lp5", "lp3", "lp2", "ml")
RECEIVER_ALIASES = {"lp3-generic": "lp3", "brute-force": "ml"}
BIN_WIDTH = 0.01
CHUNK = 256

HAMMING_PROAKIS_DISTANCES = (4 / 3, math.sqrt(2))


def fer_lower_bound(sigma: float, preset: str = "hamming-proakis-b") -> float:
    """(1/8) Q(d1 / 2 sigma) + (1/8) Q(d2 / 2 sigma) with d1 = 4/3, d2 = sqrt(2).

    Only meaningful for the [7,4] Hamming code (circulant checks) over the
    Proakis B channel with BPSK; the constants are specific to that system.
    """
    if preset != "hamming-proakis-b":
        raise UnsupportedModeError("the FER lower bound is only defined for the Hamming/Proakis-B system")
    if sigma <= 0:
        return 0.0
    if math.isinf(sigma):
        return 1 / 8
    return sum(pairwise_error_probability(d, sigma) for d in HAMMING_PROAKIS_DISTANCES) / 8


# ----------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    code: object = "hamming-7-4"          # preset name, code document or path
    channel: object = "proakis-b"         # preset name or tap list
    modulation: str = "bpsk"
    receiver: str = "lp4"
    snr_db: list = field(default_factory=lambda: [3.0, 7.0, 11.0, 14.0])
    trials: int = 10**6                   # cap per SNR point
    target_errors: int = 500
    seed: int = 0
    workers: int = 1
    codeword: str = "random"              # "random" (uniform codebook draw) or "zero"
    integrality_tol: float = DEFAULT_INTEGRALITY_TOL
    keep_points: bool = False             # store fractional error-event points in the records

    def validate(self):
        self.receiver = RECEIVER_ALIASES.get(self.receiver, self.receiver)
        if self.receiver not in RECEIVERS:
            raise ConfigurationError(f"receiver must be one of {RECEIVERS}")
        if self.modulation != "bpsk":
            raise ConfigurationError("only bpsk modulation is available from config files")
        if self.codeword not in ("random", "zero"):
            raise ConfigurationError("codeword must be 'random' or 'zero'")
        if self.trials < 0 or self.target_errors < 1 or self.workers < 1:
            raise ConfigurationError("trials >= 0, target_errors >= 1 and workers >= 1 are required")
        if not self.snr_db:
            raise ConfigurationError("at least one SNR point is required")
        return self

    def build(self):
        code = self.code if isinstance(self.code, LinearCode) else load_code(self.code)
        channel = self.channel if isinstance(self.channel, IsiChannel) else channel_from_spec(self.channel)
        return code, channel, bpsk()

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        doc = dict(doc)
        fmt = doc.pop("format", CONFIG_FORMAT)
        if fmt != CONFIG_FORMAT:
            raise ConfigurationError(f"unsupported config format {fmt!r}")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
        return cls(**doc).validate()

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["format"] = CONFIG_FORMAT
        return doc


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


# ----------------------------------------------------------------------- trials


@dataclass
class ErrorEvent:
    snr_index: int
    trial: int
    codeword: list
    integral: bool
    d_eff: float | None
    d2_exact: str | None          # exact rational d_eff^2 when it snaps
    info_bit_errors: int
    coded_bit_errors: int
    point: dict | None = None     # pseudoconfiguration dump (fractional events, when kept)
    output_codeword: list | None = None


@dataclass
class Tally:
    trials: int = 0
    frame_errors: int = 0
    info_bit_errors: int = 0
    coded_bit_errors: int = 0
    events: list = field(default_factory=list)

    def add(self, ev: ErrorEvent | None):
        self.trials += 1
        if ev is not None:
            self.frame_errors += 1
            self.info_bit_errors += ev.info_bit_errors
            self.coded_bit_errors += ev.coded_bit_errors
            self.events.append(ev)

    def merge(self, other: "Tally") -> "Tally":
        out = Tally(self.trials + other.trials, self.frame_errors + other.frame_errors,
                    self.info_bit_errors + other.info_bit_errors, self.coded_bit_errors + other.coded_bit_errors,
                    sorted(self.events + other.events, key=lambda e: (e.snr_index, e.trial)))
        return out


def trial_rng(seed: int, snr_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, trial]))


def receive(system: JointSystem, receiver: str, y, tol: float = DEFAULT_INTEGRALITY_TOL):
    """Run one receiver on y.  Returns (configuration or ReceiverFailure)."""
    if receiver == "ml":
        return system.brute_force(y).configuration
    if receiver in ("lp4", "lp5"):
        lp = system.lp(receiver, y)
        return system.decode(receiver, lp, solve(lp), tol)
    graph = system.graph(y)
    lp = build_lp3(graph) if receiver == "lp3" else build_lp2(graph)
    return extract_output(solve(lp), lp, graph, tol)


def bit_errors(system: JointSystem, c, out) -> tuple[int, int]:
    """(information, coded) symbol errors; fractional marginals are thresholded at 1/2."""
    n = system.n
    if isinstance(out, ReceiverFailure):
        g = np.array([np.asarray(out.point.g[system.c(i)], dtype=float) for i in range(1, n + 1)])
        hard = np.argmax(g, axis=1)
        ambiguous = np.max(g, axis=1) <= 0.5 + 1e-9
        wrong = (hard != c) | ambiguous
    else:
        wrong = system.codeword_of(out) != c
    info = list(system.code.info_positions)
    return int(wrong[info].sum()), int(wrong.sum())


def run_trial(system: JointSystem, cfg: ExperimentConfig, snr_index: int, trial: int) -> ErrorEvent | None:
    rng = trial_rng(cfg.seed, snr_index, trial)
    code = system.code
    if cfg.codeword == "zero":
        c = np.zeros(code.n, dtype=np.int64)
    else:
        c = code.encode(rng.integers(0, code.q, size=code.k))
    x, y = system.simulate(c, rng=rng)
    out = receive(system, cfg.receiver, y, cfg.integrality_tol)
    if not isinstance(out, ReceiverFailure) and np.array_equal(system.codeword_of(out), c):
        return None
    integral = not isinstance(out, ReceiverFailure)
    kappa = out if integral else out.point
    try:
        d = pseudodistance(x, kappa, system.signal_map)
    except IdenticalPseudoconfigurationError:
        d = 0.0
    snapped = snap_value(d * d)
    info_err, coded_err = bit_errors(system, c, out)
    return ErrorEvent(snr_index, trial, c.tolist(), integral, d, None if snapped is None else str(snapped),
                      info_err, coded_err,
                      point_to_dict(out.point) if (cfg.keep_points and not integral) else None,
                      system.codeword_of(out).tolist() if integral else None)


def _run_chunk(args):
    cfg, sigma, snr_index, start, stop = args
    code, channel, mod = cfg.build()
    system = JointSystem.get(code, channel.with_sigma(sigma), mod)
    return [run_trial(system, cfg, snr_index, t) for t in range(start, stop)]


# --------------------------------------------------------------------- spectra


@dataclass
class SpectrumBin:
    key: str            # "exact:<d^2 as fraction>" or "bin:<index>"
    center: float
    count: int = 0
    integral: int = 0
    fractional: int = 0

    @property
    def classification(self) -> str:
        if self.fractional == 0:
            return "configurations-only"
        if self.integral == 0:
            return "non-configurations-only"
        return "both"


@dataclass
class Spectrum:
    snr_db: float
    bins: dict = field(default_factory=dict)

    def add(self, ev: ErrorEvent):
        if ev.d2_exact is not None:
            key, center = f"exact:{ev.d2_exact}", math.sqrt(float(Fraction(ev.d2_exact)))
        else:
            idx = int(math.floor(ev.d_eff / BIN_WIDTH))
            key, center = f"bin:{idx}", (idx + 0.5) * BIN_WIDTH
        b = self.bins.setdefault(key, SpectrumBin(key, center))
        b.count += 1
        if ev.integral:
            b.integral += 1
        else:
            b.fractional += 1

    def sorted_bins(self) -> list[SpectrumBin]:
        return sorted(self.bins.values(), key=lambda b: (b.center, b.key))

    def at(self, d: float, tol: float = 1e-6) -> SpectrumBin | None:
        hits = [b for b in self.bins.values() if b.key.startswith("exact:") and abs(b.center - d) <= tol]
        return hits[0] if hits else None

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins.values())

    def to_dict(self) -> dict:
        return {"format": SPECTRUM_FORMAT, "snr_db": self.snr_db, "bins": [
            {"d_eff": b.center, "d_eff_squared_exact": b.key[6:] if b.key.startswith("exact:") else None,
             "count": b.count, "integral": b.integral, "fractional": b.fractional,
             "classification": b.classification} for b in self.sorted_bins()]}


@dataclass
class PointResult:
    snr_db: float
    sigma: float
    tally: Tally
    fer_lower_bound: float | None

    @property
    def fer(self) -> float:
        return self.tally.frame_errors / self.tally.trials if self.tally.trials else float("nan")

    def ber(self, n: int, k: int) -> tuple[float, float]:
        t = self.tally.trials
        if not t:
            return float("nan"), float("nan")
        return self.tally.coded_bit_errors / (t * n), self.tally.info_bit_errors / (t * k)

    def standard_error(self) -> float:
        p, t = self.fer, self.tally.trials
        return math.sqrt(p * (1 - p) / t) if t else float("nan")


@dataclass
class ExperimentRecord:
    config: ExperimentConfig
    n: int
    k: int
    points: list

    def table(self) -> list[dict]:
        rows = []
        for pr in self.points:
            ber_coded, ber_info = pr.ber(self.n, self.k)
            rows.append({"snr_db": pr.snr_db, "trials": pr.tally.trials, "frame_errors": pr.tally.frame_errors,
                         "fer": pr.fer, "ber": ber_coded, "ber_info": ber_info, "ber_coded": ber_coded,
                         "fer_lower_bound": pr.fer_lower_bound})
        return rows

    def spectra(self) -> list[Spectrum]:
        out = []
        for pr in self.points:
            sp = Spectrum(pr.snr_db)
            for ev in pr.tally.events:
                sp.add(ev)
            out.append(sp)
        return out


def _is_hamming_proakis(code: LinearCode, channel: IsiChannel, cfg: ExperimentConfig) -> bool:
    from .codes import hamming_7_4
    ref = hamming_7_4()
    same_code = code.H.shape == ref.H.shape and {tuple(r) for r in code.H} == {tuple(r) for r in ref.H}
    taps = np.asarray(channel.taps)
    return (same_code and cfg.modulation == "bpsk" and taps.ndim == 1 and taps.shape == (3,)
            and np.allclose(taps, np.array([1, 2, 1]) / math.sqrt(6)))


def run_point(cfg: ExperimentConfig, snr_index: int, progress=None) -> PointResult:
    code, channel, mod = cfg.build()
    snr = float(cfg.snr_db[snr_index])
    sigma = snr_to_sigma(snr, code.rate)
    system = JointSystem.get(code, channel.with_sigma(sigma), mod)
    tally = Tally()
    bound = fer_lower_bound(sigma) if _is_hamming_proakis(code, channel, cfg) else None
    if cfg.workers == 1:
        for t in range(cfg.trials):
            tally.add(run_trial(system, cfg, snr_index, t))
            if progress and (t + 1) % 10000 == 0:
                progress(snr, tally)
            if tally.frame_errors >= cfg.target_errors:
                break
        return PointResult(snr, sigma, tally, bound)
    start = 0
    with ProcessPoolExecutor(cfg.workers) as pool:
        while start < cfg.trials and tally.frame_errors < cfg.target_errors:
            bounds = [(s, min(s + CHUNK, cfg.trials))
                      for s in range(start, min(start + CHUNK * cfg.workers * 4, cfg.trials), CHUNK)]
            chunks = pool.map(_run_chunk, [(cfg, sigma, snr_index, a, b) for a, b in bounds])
            for outcomes in chunks:
                for ev in outcomes:
                    if tally.frame_errors >= cfg.target_errors:
                        break
                    tally.add(ev)
            start = bounds[-1][1]
            if progress:
                progress(snr, tally)
    return PointResult(snr, sigma, tally, bound)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentRecord:
    """Simulate every SNR point of the configuration."""
    cfg.validate()
    code, _, _ = cfg.build()
    points = [run_point(cfg, k, progress) for k in range(len(cfg.snr_db))]
    return ExperimentRecord(cfg, code.n, code.k, points)


# ---------------------------------------------------------------------- output


CSV_COLUMNS = ("snr_db", "trials", "frame_errors", "fer", "ber", "ber_info", "ber_coded", "fer_lower_bound")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(table: list[dict], spectra: list[Spectrum], path) -> list[Path]:
    """Write results.csv and one spectrum_<k>.json per SNR point into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv"]
    with open(written[0], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in table:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    for k, sp in enumerate(spectra):
        p = out / f"spectrum_{k}.json"
        p.write_text(json.dumps(sp.to_dict(), indent=1) + "\n")
        written.append(p)
    return written


def read_results(path) -> list[dict]:
    """Parse a results.csv written by :func:`emit_results`."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for c in CSV_COLUMNS:
                v = rec[c]
                if v == "":
                    row[c] = None
                elif c in ("trials", "frame_errors"):
                    row[c] = int(v)
                else:
                    row[c] = float(v)
            rows.append(row)
    return rows


def write_events(record: ExperimentRecord, path):
    """All error events as JSON lines (for cross-checks and cover realization)."""
    with open(path, "w") as fh:
        for pr in record.points:
            for ev in pr.tally.events:
                fh.write(json.dumps(asdict(ev)) + "\n")
