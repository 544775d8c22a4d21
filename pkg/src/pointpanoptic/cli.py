"""Command-line entry point.

Subcommands: project, refine, eval, synth, ablate. All take --config; a
few common settings can be overridden per invocation. Exit codes:
0 success, 1 configuration error, 2 data error, 3 internal invariant
violation.
"""

import argparse
import json
import sys
import traceback

from .config import load_config
from .errors import ConfigError, DataError, InternalError, PipelineError
from .metrics import report_diff
from .pipeline import run_ablate, run_eval, run_project, run_refine, run_synth

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--workers", type=int, default=None, help="process pool size (0 = all cores)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--dataset", default=None, help="override the dataset root")
    p.add_argument("--output", default=None, help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pointpanoptic",
        description="Panoptic point-cloud pseudo-labels: projection, 3D refinement, evaluation.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project label images onto scans (primal labels)")
    _add_common(p)

    p = sub.add_parser("refine", help="refine primal labels via scene clustering and voting")
    _add_common(p)
    p.add_argument("--labels", default="primal", help="input label set name")

    p = sub.add_parser("eval", help="evaluate labels against ground truth")
    _add_common(p)
    p.add_argument("--pred", default="refined", help="predicted label set name")
    p.add_argument("--gt", default="gt", help="ground-truth label set name")
    p.add_argument("--diff-against", default=None, help="second label set for a delta table")

    p = sub.add_parser("synth", help="materialize a synthetic dataset")
    _add_common(p)
    p.add_argument("--world", default=None, help="world spec JSON (default: built-in suite world)")
    p.add_argument("--suite-seed", dest="suite_seed", type=int, default=None)

    p = sub.add_parser("ablate", help="sweep min cluster size; refine + eval per value")
    _add_common(p)
    p.add_argument("--labels", default="primal", help="input label set name")
    p.add_argument("--gt", default="gt", help="ground-truth label set name")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "workers": args.workers,
        "seed": args.seed,
        "dataset": args.dataset,
        "output": args.output,
    }
    if getattr(args, "world", None) is not None:
        overrides["world"] = args.world
    if getattr(args, "suite_seed", None) is not None:
        overrides["suite_seed"] = args.suite_seed
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "project":
            n = run_project(cfg)
            print(f"projected labels for {n} scans")
        elif args.command == "refine":
            logs = run_refine(cfg, src_name=args.labels)
            total = sum(log["points"] for log in logs)
            print(f"refined {len(logs)} scenes ({total} points)")
        elif args.command == "eval":
            report = run_eval(cfg, pred_name=args.pred, gt_name=args.gt)
            print(report.to_text())
            if args.diff_against:
                other = run_eval(
                    cfg, pred_name=args.diff_against, gt_name=args.gt,
                    report_name=f"report_{args.diff_against}",
                )
                print(report_diff(report, other)["text"])
        elif args.command == "synth":
            n = run_synth(cfg)
            print(f"wrote synthetic dataset with {n} scans to {cfg.dataset}")
        elif args.command == "ablate":
            summary = run_ablate(cfg, src_name=args.labels, gt_name=args.gt)
            print(json.dumps(summary, indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL
    except PipelineError as exc:  # fallback for future error kinds
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
