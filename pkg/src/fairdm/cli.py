"""Command-line entry point: ``fairdm {audit,game,triviality,synthesize,verify}``.

Exit status is 0 on success, 1 on invalid input or arguments, 2 when a size
guard stops a computation.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from fairdm import io as fio
from fairdm.context import joint_outcome_model
from fairdm.errors import GuardError
from fairdm.game import optimal_fair_strategy, rational_fairness_lower_bound, rational_fairness_upper_bound
from fairdm.metrics import audit
from fairdm.triviality import synthesize_trivial_classifier, triviality_error
from fairdm.verify import TrialConfig, run_suite

DEFAULT_TOL = 1e-9
TOL_ENV = "FAIRDM_TOL"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def default_tolerance() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise UsageError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not (tol > 0 and math.isfinite(tol)):
        raise UsageError(f"{TOL_ENV} must be a positive number, got {raw!r}")
    return tol


def _emit(report: dict, out: str | None) -> None:
    text = fio.dumps(report)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_audit(args) -> int:
    ctx = fio.load_context(args.context, args.mode)
    clf = fio.load_classifier(args.classifier)
    body = {"audit": audit(ctx, clf), "labels": {"groups": ctx.groups, "classes": ctx.classes}}
    inputs = {"context": fio.file_digest(args.context), "classifier": fio.file_digest(args.classifier)}
    _emit(fio.envelope("audit", body, inputs), args.out)
    return 0


def cmd_game(args) -> int:
    ctx = fio.load_context(args.context, args.mode)
    clf = fio.load_classifier(args.classifier)
    game = fio.load_game(args.game)
    model = joint_outcome_model(ctx, clf)
    lower, witness = rational_fairness_lower_bound(ctx, model)
    body = {
        "analysis": optimal_fair_strategy(model, game),
        "bounds": {
            "upper": rational_fairness_upper_bound(ctx, model),
            "lower": lower,
            "lower_witness": None if witness is None else {
                "outcome": witness.outcome,
                "groups": [witness.group, witness.other_group],
                "class": witness.y_star,
                "delta": witness.delta,
            },
        },
    }
    inputs = {name: fio.file_digest(getattr(args, name)) for name in ("context", "classifier", "game")}
    _emit(fio.envelope("game", body, inputs), args.out)
    return 0


def cmd_triviality(args) -> int:
    ctx = fio.load_context(args.context, args.mode)
    body = {"certificate": triviality_error(ctx), "classes": ctx.classes}
    _emit(fio.envelope("triviality", body, {"context": fio.file_digest(args.context)}), args.out)
    return 0


def cmd_synthesize(args) -> int:
    ctx = fio.load_context(args.context, args.mode)
    if args.partition == "auto":
        partition = triviality_error(ctx).partition
    else:
        partition = fio.load_partition(args.partition)
    clf = synthesize_trivial_classifier(ctx, partition)
    Path(args.out).write_text(fio.serialize_classifier(clf), encoding="utf-8")
    return 0


def cmd_verify(args) -> int:
    tol = args.tolerance if args.tolerance is not None else default_tolerance()
    config = TrialConfig(seed=args.seed, trials=args.trials, tolerance=tol)
    report = run_suite(config)
    body = {"report": report}
    _emit(fio.envelope("verify", body, {"config": fio.digest(fio.dumps(config))}), args.out)
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairdm", description="Fairness audits for classifiers used in decision making.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_context(p):
        p.add_argument("--context", required=True, help="context CSV (group,class,observable,weight)")
        p.add_argument("--mode", choices=("count", "mass"), default="count",
                       help="treat weights as counts (normalized) or as probability masses")

    p = sub.add_parser("audit", help="fairness metrics of a classifier")
    with_context(p)
    p.add_argument("--classifier", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("game", help="optimal fair strategy for a utility game")
    with_context(p)
    p.add_argument("--classifier", required=True)
    p.add_argument("--game", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("triviality", help="triviality certificate of a context")
    with_context(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_triviality)

    p = sub.add_parser("synthesize", help="block-index classifier for a class partition")
    with_context(p)
    p.add_argument("--partition", required=True, help="'auto' or a JSON partition file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="randomized property checks")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=None, help=f"defaults to ${TOL_ENV} or {DEFAULT_TOL}")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GuardError as exc:
        print(f"fairdm: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"fairdm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
