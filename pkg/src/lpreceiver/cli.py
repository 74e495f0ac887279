"""Command-line entry point: ``lpreceiver run|bound|pseudodistance|verify-cover``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .equalizer import EDGES_FORMAT, JointSystem, edges_from_dict, load_system, system_from_dict
from .errors import LPReceiverError
from .harness import emit_results, fer_lower_bound, load_config, run_experiment, write_events
from .pseudo import (POINT_FORMAT, cover_to_normalized_vector, point_from_dict, pseudodistance, realize_cover,
                     snap_point, verify_cover)

log = logging.getLogger("lpreceiver")


def _read_json(path):
    return json.loads(Path(path).read_text())


def _load_point(system: JointSystem, path):
    doc = _read_json(path)
    if doc.get("format") == EDGES_FORMAT:
        return system.point_from_edges(edges_from_dict(doc))
    if doc.get("format") == POINT_FORMAT:
        return point_from_dict(doc)
    raise ValueError(f"{path}: expected a {POINT_FORMAT!r} or {EDGES_FORMAT!r} document")


def _load_codeword(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    if text.startswith("["):
        return np.array(json.loads(text), dtype=np.int64)
    return np.array([int(ch) for ch in text if not ch.isspace() and ch != ","], dtype=np.int64)


def cmd_run(args):
    cfg = load_config(args.config)
    for name in ("trials", "target_errors", "seed", "receiver", "workers"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.snr:
        cfg.snr_db = list(args.snr)
    cfg.validate()

    def progress(snr, tally):
        log.info("snr %.2f dB: %d trials, %d errors", snr, tally.trials, tally.frame_errors)

    record = run_experiment(cfg, progress)
    out = Path(args.out)
    for p in emit_results(record.table(), record.spectra(), out):
        print(p)
    write_events(record, out / "events.jsonl")
    for row in record.table():
        print(f"{row['snr_db']:6.2f} dB  trials={row['trials']}  errors={row['frame_errors']}  "
              f"fer={row['fer']:.4g}  ber={row['ber']:.4g}")
    return 0


def cmd_bound(args):
    print(repr(fer_lower_bound(args.sigma)))
    return 0


def cmd_pseudodistance(args):
    system = load_system(args.system)
    c = _load_codeword(args.codeword)
    if not system.code.is_codeword(c):
        raise ValueError("the transmitted word is not a codeword")
    point = _load_point(system, args.point)
    d = pseudodistance(system.configuration(c), point, system.signal_map, args.mode)
    print(repr(d))
    return 0


def cmd_verify_cover(args):
    system = load_system(args.system) if args.system else system_from_dict({})
    graph = system.base_graph
    point = _load_point(system, args.point)
    cover = realize_cover(point, graph)
    ok = verify_cover(cover, graph)
    gbar = cover_to_normalized_vector(cover, graph)
    exact = snap_point(point, graph)
    roundtrip = all(list(gbar[v]) == list(exact.g[v]) for v in graph.var_ids)
    print(f"degree {cover.degree}")
    print(f"valid {ok}")
    print(f"normalized vector matches {roundtrip}")
    return 0 if ok and roundtrip else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpreceiver", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate error rates and pseudodistance spectra")
    r.add_argument("--config", required=True)
    r.add_argument("--snr", type=float, nargs="+")
    r.add_argument("--trials", type=int)
    r.add_argument("--target-errors", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--receiver")
    r.add_argument("--workers", type=int)
    r.add_argument("--out", default="results")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bound", help="FER lower bound of the Hamming/Proakis-B system")
    b.add_argument("--sigma", type=float, required=True)
    b.set_defaults(func=cmd_bound)

    p = sub.add_parser("pseudodistance", help="system pseudodistance of a point from a codeword")
    p.add_argument("--system", required=True)
    p.add_argument("--codeword", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--mode", choices=("real", "complex"), default="real")
    p.set_defaults(func=cmd_pseudodistance)

    v = sub.add_parser("verify-cover", help="realize a rational point as a graph cover and check it")
    v.add_argument("--point", required=True)
    v.add_argument("--system", help="system file (default: Hamming code over Proakis B)")
    v.set_defaults(func=cmd_verify_cover)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (LPReceiverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
