"""tokenprune command line.

Subcommands:
  run                one variant over a seeded episode suite
  compare            full / fixed_interval / shallow_only on the same suite
  sweep              analytic FLOPs over a (rho, prune_layer) grid, CSV by default
  forecast-accuracy  forecast cosine and KL against steps since the keyframe
  gen-episodes       export the suite as JSON fixtures, one file per episode

Exit codes: 0 success, 1 internal failure, 2 configuration error, 3 I/O error.
"""

import argparse
import sys

from ..cost_model import sweep_csv
from ..errors import ConfigError, ContractError
from . import config as hconfig
from . import io as hio
from . import runner

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

COMPARE_MODES = ("full", "fixed_interval", "shallow_only")

_EVAL_HEADER = [
    "variant", "rho", "steps", "keyframes_mean", "flops_mean_per_step",
    "tflops_mean_per_step", "speedup", "mean_keep_count", "core_token_loss",
]


def _eval_csv(doc):
    rows = []
    for mode, entry in doc["variants"].items():
        for rho, c in entry["by_rho"].items():
            rows.append([
                mode, rho, c["steps"], c["keyframes"]["mean_count"], c["flops_mean_per_step"],
                c["tflops_mean_per_step"], c["speedup"], c["mean_keep_count"],
                c["core_token_loss"],
            ])
    return hio.csv_text(_EVAL_HEADER, rows)


def _format(cfg):
    fmt = cfg["format"]
    if fmt not in ("json", "csv"):
        raise ConfigError(f"[run] format: must be json or csv, got {fmt!r}")
    return fmt


def cmd_run(cfg, modes=None):
    modes = modes or (cfg["variant"],)
    command = "run" if len(modes) == 1 else "compare"
    fmt = _format(cfg)
    doc = runner.envelope(command, cfg, runner.evaluate(cfg, modes))
    return hio.dumps(doc) if fmt == "json" else _eval_csv(doc)


def cmd_compare(cfg):
    return cmd_run(cfg, COMPARE_MODES)


def cmd_sweep(cfg, fmt_given):
    fmt = _format(cfg) if fmt_given else "csv"
    rows = runner.sweep_rows(cfg)
    if fmt == "csv":
        return sweep_csv(rows)
    body = {
        "continuous": cfg["continuous"],
        "rows": [
            {"rho": r.rho, "prune_layer": r.prune_layer, "flops": r.flops, "speedup": r.speedup}
            for r in rows
        ],
    }
    return hio.dumps(runner.envelope("sweep", cfg, body))


def cmd_forecast(cfg):
    fmt = _format(cfg)
    doc = runner.envelope("forecast-accuracy", cfg, runner.forecast_report(cfg))
    if fmt == "json":
        return hio.dumps(doc)
    return hio.csv_text(
        ["offset", "cosine", "kl", "count", "skipped"],
        [[r["offset"], r["cosine"], r["kl"], r["count"], r["skipped"]] for r in doc["curve"]],
    )


def cmd_gen(cfg):
    if _format(cfg) != "json":
        raise ConfigError("[run] format: gen-episodes writes json only")
    if not cfg["out"]:
        raise ConfigError("[run] out: gen-episodes needs an output directory")
    episodes = runner.build_suite(cfg, runner.model_config(cfg))
    paths = hio.write_episodes(cfg["out"], episodes)
    return "".join(p + "\n" for p in paths)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="tokenprune", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, helptext in (
        ("run", "run one pipeline variant"),
        ("compare", "run all three variants on the same episodes"),
        ("sweep", "cost-model grid over rho and prune layer"),
        ("forecast-accuracy", "forecast quality vs. offset from the keyframe"),
        ("gen-episodes", "write the episode suite as JSON files into --out DIR"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", metavar="PATH", help="INI file with [model] [episode] "
                       "[pruner] [variant] [run] sections")
        hconfig.add_key_flags(p)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = hconfig.resolve(args)
        if args.cmd == "run":
            text = cmd_run(cfg)
        elif args.cmd == "compare":
            text = cmd_compare(cfg)
        elif args.cmd == "sweep":
            text = cmd_sweep(cfg, cfg.source["format"] != "default")
        elif args.cmd == "forecast-accuracy":
            text = cmd_forecast(cfg)
        else:
            sys.stdout.write(cmd_gen(cfg))
            return EXIT_OK
        hio.write_text(text, cfg["out"])
    except ConfigError as e:
        print(f"tokenprune: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"tokenprune: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ContractError as e:
        print(f"tokenprune: {e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
