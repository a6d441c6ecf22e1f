"""Command-line front end.

Exit codes: 0 completed without exact violations, 1 usage or input error,
2 at least one exact violation (the report is still written).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import DomainEscape, EmptySample, NotNormalizable
from .lipnorm import composite, lip_refine, lip_sampled
from .model import GeneratorConfig, Instance, Mode, generate_instance
from .space import NormSpec
from .uncertainty import (
    DEFAULT_ATOL,
    DEFAULT_REFINE_BUDGET,
    VIOLATION,
    hilbert_reduction_check,
    nabla,
    nabla_upper_bound,
)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _pos_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _exponent(text):
    try:
        return NormSpec(text).p
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _tol(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"tolerance must be non-negative, got {text}")
    return value


def _mode(text):
    try:
        return Mode.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown mode {text!r}") from None


def _add_campaign_flags(p, mode_default="hilbert", trials_default=1000):
    p.add_argument("--mode", type=_mode, default=mode_default,
                   help="instance family: hilbert, banach-linear or banach-nonlinear")
    p.add_argument("--trials", type=_nonneg_int, default=trials_default, help="number of trials")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="campaign seed")
    p.add_argument("--dim", type=int, default=3, help="space dimension (>= 2)")
    p.add_argument("--dim-max", type=int, default=None,
                   help="if set, trial dimensions cycle through dim..dim-max")
    p.add_argument("--p", type=_exponent, default=2.0,
                   help="l^p exponent in [1, inf]; 'inf' for the max norm (hilbert forces 2)")
    p.add_argument("--cloud-size", type=int, default=64, help="sample points per domain")
    p.add_argument("--budget", type=_nonneg_int, default=DEFAULT_REFINE_BUDGET,
                   help="refinement probes per Lipschitz estimate")
    p.add_argument("--tol", type=_tol, default=DEFAULT_ATOL,
                   help="absolute and relative chain tolerance")
    p.add_argument("--workers", type=_pos_int, default=1,
                   help="worker processes (results do not depend on this)")


def _add_output_flags(p):
    p.add_argument("--format", choices=["json", "csv"], default="json",
                   help="report format for --out (json is JSON Lines)")
    p.add_argument("--out", type=Path, default=None, help="report destination; omitted: no file")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="lipuncertainty", description=__doc__.splitlines()[0],
                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="run a seeded verification campaign", formatter_class=fmt)
    _add_campaign_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("search", help="probe the nonlinear final form for counterexamples",
                       formatter_class=fmt)
    _add_campaign_flags(p, mode_default="banach-nonlinear", trials_default=10_000)
    p.add_argument("--out", type=Path, default=None,
                   help="where to write the replayable witness document (JSON)")

    p = sub.add_parser("reduce", help="compare nabla(f, A, h) with delta_h(A) on Hermitian A",
                       formatter_class=fmt)
    p.add_argument("--trials", type=_nonneg_int, default=1000, help="number of random instances")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="campaign seed")
    p.add_argument("--dim", type=int, default=3, help="space dimension (>= 2)")
    p.add_argument("--dim-max", type=int, default=None,
                   help="if set, trial dimensions cycle through dim..dim-max")
    p.add_argument("--out", type=Path, default=None, help="JSON Lines destination")

    p = sub.add_parser("lipnorm", help="estimate nabla and ||fB|| for one instance",
                       formatter_class=fmt)
    _add_campaign_flags(p, trials_default=1)
    p.add_argument("--instance", type=Path, default=None,
                   help="instance or witness JSON; overrides the generated instance")
    p.add_argument("--out", type=Path, default=None, help="JSON destination")

    p = sub.add_parser("replay", help="re-evaluate a saved witness or instance",
                       formatter_class=fmt)
    p.add_argument("--instance", type=Path, required=True, default=argparse.SUPPRESS,
                   help="witness or instance JSON")
    p.add_argument("--out", type=Path, default=None, help="JSON destination for the replay")
    return parser


def _campaign_config(args) -> harness.CampaignConfig:
    return harness.CampaignConfig(
        mode=args.mode, trials=args.trials, seed=args.seed, dim=args.dim, p=args.p,
        cloud_size=args.cloud_size, refine_budget=args.budget, atol=args.tol, rtol=args.tol,
        dim_max=args.dim_max, workers=args.workers)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _load_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_verify(args) -> int:
    cfg = _campaign_config(args)
    report = harness.run_campaign(cfg)
    c = report.counts
    print(f"mode={cfg.mode.value} trials={cfg.trials} seed={cfg.seed} dim={cfg.dim} "
          f"p={NormSpec(cfg.p)}")
    print(f"passed={c['passed']} empirical_negative={c['empirical_negative']} "
          f"violations={c['violations']} skipped={c['skipped']}")
    for key, val in sorted(report.min_slack.items()):
        print(f"  min slack {key}: {val:.6g}")
    if args.out is not None:
        harness.emit_report(report, args.format, args.out)
        print(f"report written to {args.out}")
    return EXIT_VIOLATION if report.violations else EXIT_OK


def cmd_search(args) -> int:
    cfg = _campaign_config(args)
    result = harness.search_counterexample(cfg)
    if result.found:
        print(f"certified negative final-form slack at trial {result.min_trial} "
              f"(slack {result.min_slack:.6g}) after {result.trials_run} trials")
    elif result.min_slack is None:
        print(f"no evaluable trials in {result.trials_run}")
    else:
        print(f"no certified counterexample in {result.trials_run} trials; "
              f"min final-form slack {result.min_slack:.6g} at trial {result.min_trial}")
    print(f"empirical_negative={result.empirical_negative} skipped={result.skipped}")
    if args.out is not None:
        _write_json(args.out, result.to_json())
        print(f"witness written to {args.out}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    cfg = harness.CampaignConfig(mode=Mode.HILBERT, trials=args.trials, seed=args.seed,
                                 dim=args.dim, dim_max=args.dim_max)
    worst, failures, lines = 0.0, 0, []
    for i in range(cfg.trials):
        seed = harness.trial_seed(cfg.seed, i)
        inst = generate_instance(seed, cfg.generator(i))
        r = hilbert_reduction_check(inst.A.matrix, inst.x)
        rel = r.discrepancy / (1.0 + r.delta)
        worst = max(worst, rel)
        failures += rel > harness.REDUCTION_TOL
        lines.append({"trial": i, "seed": seed, "dim": inst.dim, "nabla": r.nabla,
                      "delta": r.delta, "discrepancy": r.discrepancy})
    print(f"trials={cfg.trials} max relative discrepancy={worst:.3g} failures={failures}")
    if args.out is not None:
        with args.out.open("w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
            fh.write(json.dumps({"type": "summary", "max_relative_discrepancy": worst,
                                 "failures": failures}, sort_keys=True) + "\n")
    return EXIT_VIOLATION if failures else EXIT_OK


def _instance_from(args) -> Instance:
    if args.instance is not None:
        doc = _load_json(args.instance)
        if "witness" in doc and isinstance(doc["witness"], dict):
            doc = doc["witness"]
        return Instance.from_json(doc.get("instance", doc))
    gen = GeneratorConfig(args.mode, args.dim, args.p, args.cloud_size)
    return generate_instance(args.seed, gen)


def cmd_lipnorm(args) -> int:
    inst = _instance_from(args)
    spec, f, A, B, x = inst.norm, inst.f, inst.A, inst.B, inst.x
    c = complex(f(A(x)))
    out = {"seed": inst.seed, "mode": inst.mode.value, "dim": inst.dim, "p": spec.to_json()}
    est = nabla(f, A, x, inst.M, spec, budget=args.budget, seed=inst.seed)
    out["nabla"] = est.to_json()
    if not est.is_exact:
        g = composite(f, A, c)
        sampled = lip_sampled(g, inst.M.augmented(0 * x, x), spec)
        out["nabla_sampled"] = sampled.lower
        out["nabla_refined"] = lip_refine(g, sampled, spec, inst.M, args.budget,
                                          inst.seed).lower
        out["nabla_upper"] = nabla_upper_bound(inst, c)
    fb = composite(f, B, 0.0)
    fb_est = lip_refine(fb, lip_sampled(fb, inst.N.augmented(0 * x, x), spec), spec, inst.N,
                        args.budget, inst.seed + 1)
    out["fb_norm_lower"] = fb_est.lower
    for key, val in out.items():
        if key == "nabla":
            print(f"nabla: {val['lower']:.12g} ({val['method']})")
        elif isinstance(val, float):
            print(f"{key}: {val:.12g}")
    if args.out is not None:
        _write_json(args.out, out)
    return EXIT_OK


def cmd_replay(args) -> int:
    doc = _load_json(args.instance)
    if "witness" in doc and isinstance(doc["witness"], dict):
        doc = doc["witness"]
    chains = harness.replay(doc)
    status = harness.trial_status(chains)
    replayed = {name: c.to_json() for name, c in chains.items()}
    if "chains" in doc:
        same = replayed == doc["chains"]
        print(f"replay {'matches' if same else 'DIFFERS FROM'} the stored chains")
    for name, c in chains.items():
        print(f"{name}: status={c.status} min slack={c.min_slack:.6g}")
    if args.out is not None:
        _write_json(args.out, {"status": status, "chains": replayed})
    return EXIT_VIOLATION if status == VIOLATION else EXIT_OK


COMMANDS = {"verify": cmd_verify, "search": cmd_search, "reduce": cmd_reduce,
            "lipnorm": cmd_lipnorm, "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, DomainEscape, NotNormalizable, EmptySample) as exc:
        print(f"lipuncertainty: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
