"""Command-line front end.

Subcommands ``beamform``, ``robust``, ``ci`` and ``sweep`` read a scenario
config and write their artifacts (JSON records, CSV tables and an SVG
figure next to each table) under ``--out``. Exit status is 0 on success,
1 on usage or config errors and 2 when the scenario is infeasible.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .array import angle_grid
from .config import ConfigError, load_config
from .secure import InfeasibleScenario

log = logging.getLogger("isac_lab")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2
EXPORT_GRID_DEG = 0.5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isac-lab", description="Secure ISAC transmit design and evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("config", help="scenario config file")
        sp.add_argument("--out", default=None, help="output directory (default: [run].output_dir or ./out)")
        sp.add_argument("--seed", type=int, default=None, help="override [run].seed")
        sp.add_argument("--threads", type=_positive_int, default=1, help="worker cap (work is serial)")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("beamform", help="secure beamforming design"))
    sp = sub.add_parser("robust", help="robust design with Monte-Carlo audit")
    common(sp)
    sp.add_argument("--audit-draws", type=_positive_int, default=None)
    sp = sub.add_parser("ci", help="symbol-level CI/DI precoding of a random frame")
    common(sp)
    sp.add_argument("--frame", default=None, help="frame CSV (slot,stream,symbol_index)")
    sp.add_argument("--slots", type=_positive_int, default=None)
    sp.add_argument("--trials", type=_positive_int, default=None)
    sp = sub.add_parser("sweep", help="secrecy rate against transmit power")
    common(sp)
    sp.add_argument("--powers", type=float, nargs="+", default=None, help="power points in dBm")
    return p


# -- records ------------------------------------------------------------------

def _complex_pairs(M):
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def design_record(d, cfg) -> dict:
    return _clean({
        "config_hash": cfg.config_hash,
        "seed": cfg.run.seed,
        "eve_sinr_bound": d.eve_sinr_bound,
        "sdr_gap": d.sdr_gap,
        "flags": d.flags,
        "achieved": d.achieved,
        "solver": d.solver,
        "bisection_trace": d.bisection_trace,
        "covariances": [_complex_pairs(R) for R in d.covariances],
        "beamformers": None if d.beamformers is None else _complex_pairs(d.beamformers.T),
    })


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


def _write_json(path: Path, data):
    _write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _export_beampattern(out: Path, d, cfg, stem="beampattern"):
    from .evaluation import beampattern_csv, beampattern_export, beamwidth_3db
    from .plotting import beampattern_svg

    sc = cfg.scenario
    table = beampattern_export(d.total_covariance, sc.geometry, angle_grid(EXPORT_GRID_DEG))
    _write(out / f"{stem}.csv", beampattern_csv(table, cfg.config_hash, cfg.run.seed))
    beampattern_svg(out / f"{stem}.svg", {"design": (table["angle_deg"], table["power_db"])})
    return beamwidth_3db(table["angle_deg"], table["power_linear"])


# -- commands -------------------------------------------------------------------

def cmd_beamform(cfg, out: Path, args) -> int:
    from .robust import robust_spec
    from .secure import design

    sc = cfg.scenario
    d = design(sc, robust_spec(sc), secure=True, candidates=cfg.run.candidates, seed=cfg.run.seed)
    bw = _export_beampattern(out, d, cfg)
    rec = design_record(d, cfg)
    rec["beamwidth_3db_deg"] = bw
    _write_json(out / "design.json", rec)
    a = d.achieved
    print(f"eavesdropping SINR bound {d.eve_sinr_bound:.6g}, achieved {a['eve_sinr']:.6g}, "
          f"secrecy rate {a['secrecy_rate']:.4f} bit/s/Hz, flags {d.flags or '-'}")
    return EXIT_OK


def cmd_robust(cfg, out: Path, args) -> int:
    from .robust import audit_csv, solve_robust_design

    draws = args.audit_draws or cfg.run.audit_draws
    d, report = solve_robust_design(cfg.scenario, audit_draws=draws, candidates=cfg.run.candidates,
                                    seed=cfg.run.seed)
    _export_beampattern(out, d, cfg)
    rec = design_record(d, cfg)
    rec["robust_report"] = _clean(report.as_dict())
    _write_json(out / "design.json", rec)
    if report.audit is not None:
        _write(out / "audit.csv", audit_csv(report.audit))
        au = report.audit
        print(f"{au['kind']} CSI audit: {au['draws']} draws, {au['violations']} violating, "
              f"worst per-user outage {au['outage']:.4g}")
    print(f"max eavesdropping SINR over the interval {report.eve_sinr_max:.6g}, "
          f"secrecy rate {d.achieved['secrecy_rate']:.4f} bit/s/Hz, flags {d.flags or '-'}")
    return EXIT_OK


def cmd_ci(cfg, out: Path, args) -> int:
    from .ci import (CiProblem, noiseless_ser, random_frame, read_frame_csv, slots_csv, solve_ci_frame,
                     write_frame_csv)
    from .evaluation import ci_frame_ser
    from .plotting import constellation_svg, ser_svg

    sc = cfg.scenario
    problem = CiProblem.from_scenario(sc)
    if args.frame:
        try:
            frame = read_frame_csv(Path(args.frame).read_text(), sc.modulation_order)
        except OSError as exc:
            raise ConfigError(f"{args.frame}: cannot read frame: {exc.strerror}") from None
        if frame.symbols.shape[0] != sc.num_users:
            raise ConfigError(f"{args.frame}: frame has {frame.symbols.shape[0]} streams, "
                              f"scenario has {sc.num_users} users")
    else:
        frame = random_frame(sc.num_users, args.slots or cfg.run.slots, sc.modulation_order, cfg.run.seed)
    slots = solve_ci_frame(problem, frame, mode=cfg.run.ci_mode)
    _write(out / "frame.csv", write_frame_csv(frame))
    _write(out / "slots.csv", slots_csv(slots))
    feasible = [s for s in slots if s.feasible]
    if not feasible:
        print("no slot admits a CI/DI precoder", file=sys.stderr)
        return EXIT_INFEASIBLE
    clean = noiseless_ser(problem, frame, slots)
    keep = [t for t, s in enumerate(slots) if s.feasible]
    X = np.column_stack([slots[t].x for t in keep])
    pts = {f"user {k + 1}": h.conj() @ X for k, h in enumerate(problem.user_channels)}
    pts["eavesdropper"] = problem.eve_channel.conj() @ X
    constellation_svg(out / "constellation.svg", pts)
    snr = cfg.run.snr_db or [0.0, 5.0, 10.0, 15.0]
    trials = args.trials or cfg.run.trials
    res = ci_frame_ser(problem, frame, slots, snr, trials, cfg.run.seed)
    K = sc.num_users
    names = [f"user_{k + 1}" for k in range(K)] + ["eve"]
    lines = [f"# config_hash={cfg.config_hash}, seed={cfg.run.seed}",
             "snr_db," + ",".join(f"ser_{n},ser_{n}_lo,ser_{n}_hi" for n in names)]
    for j, s in enumerate(snr):
        cells = [f"{s:.10g}"]
        for r in range(K + 1):
            lo, hi = res["intervals"][r][j]
            cells += [f"{res['ser'][r][j]:.10g}", f"{lo:.10g}", f"{hi:.10g}"]
        lines.append(",".join(cells))
    _write(out / "ser.csv", "\n".join(lines) + "\n")
    ser_svg(out / "ser.svg", snr, {n.replace("_", " "): res["ser"][r] for r, n in enumerate(names)})
    summary = {"config_hash": cfg.config_hash, "seed": cfg.run.seed, "slots": frame.num_slots,
               "feasible_slots": len(feasible), "noiseless": clean,
               "mean_power": float(np.mean([s.power for s in feasible])), "di_margin": problem.di_margin}
    _write_json(out / "ci.json", _clean(summary))
    print(f"{len(feasible)}/{frame.num_slots} feasible slots; noiseless SER users "
          f"{clean['ser_lu']}, eavesdropper {clean['ser_eve']}")
    return EXIT_OK


def cmd_sweep(cfg, out: Path, args) -> int:
    from .evaluation import secrecy_rate_sweep
    from .plotting import sweep_svg

    powers = args.powers or cfg.run.sweep_power_dbm
    if not powers:
        raise ConfigError(f"{cfg.source}: no power points ([run].sweep_power_dbm or --powers)")
    res = secrecy_rate_sweep(cfg.scenario, sorted(powers), cfg.noise_floor_dbm, candidates=cfg.run.candidates,
                             seed=cfg.run.seed, config_hash=cfg.config_hash)
    _write(out / "sweep.csv", res.to_csv())
    sweep_svg(out / "sweep.svg", res.values, {"secure design": res.metrics["secrecy_rate"],
                                              "no eavesdropper cap": res.metrics["baseline_secrecy_rate"]})
    for p, s, b, t in zip(res.values, res.metrics["secrecy_rate"], res.metrics["baseline_secrecy_rate"],
                          res.wall_time):
        print(f"{p:6.2f} dBm: secrecy {s:.4f}, baseline {b:.4f} bit/s/Hz ({t:.1f} s)")
    return EXIT_OK


COMMANDS = {"beamform": cmd_beamform, "robust": cmd_robust, "ci": cmd_ci, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        seed = args.seed
        env = os.environ.get("ISAC_LAB_SEED")
        if seed is None and env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"ISAC_LAB_SEED must be an integer, got {env!r}") from None
        if seed is not None:
            cfg.run.seed = seed
            cfg.data["run"]["seed"] = seed
        out = Path(args.out or cfg.run.output_dir or "out")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleScenario as exc:
        report = {"status": "infeasible", "binding_families": exc.families, "detail": _clean(exc.detail)}
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
