"""Command-line interface.

Subcommands:
  run        one trajectory from a JSON config (CSV + JSON + figures)
  bench      baseline-vs-candidate sweep over seeds (speedup table)
  gen-graph  write a generated graph as an edge-list file
  gen-cloud  write a sampled point cloud as CSV

Exit codes: 0 success, 1 configuration/validation error, 2 runtime
abort (non-finite loss or similar).
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .config import parse_config, parse_graph_spec, serialize_config
from .errors import GraphFlowError, NonFiniteLoss, ParseError, ValidationError
from .graphs import generate, write_edge_list
from .persistence import sample_cloud, write_cloud_csv


def _load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _cmd_run(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_dir = args.out or cfg.out_dir or "run_out"
    record = pipeline.execute_run(cfg)
    paths = pipeline.write_run_outputs(cfg, record, out_dir, cfg.seed,
                                       figures=not args.no_figures)
    final = record.rows[-1][2] if record.rows else float("nan")
    print(f"mode={cfg.mode} seed={cfg.seed} iterations={record.iterations_run} "
          f"converged={record.converged} final_loss={final:.6g}")
    for p in paths:
        print(f"  wrote {p}")
    if record.aborted:
        raise NonFiniteLoss("run aborted on a non-finite loss")
    return 0


def _fmt(value):
    if value is None:
        return "n/a"
    return f"{value:.3f}"


def _cmd_bench(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_dir = Path(args.out or cfg.out_dir or "bench_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    results = pipeline.run_bench(cfg, args.seeds, quantile=args.quantile)
    header = f"{'seed':>6} {'iter_speedup':>13} {'wall_speedup':>13} " \
             f"{'baseline_loss':>14} {'candidate_loss':>15}"
    print(header)
    rows = []
    for seed, _, _, rep in results:
        print(f"{seed:>6} {_fmt(rep.iter_speedup_to_threshold):>13} "
              f"{_fmt(rep.wallclock_speedup):>13} {rep.baseline_final_loss:>14.6g} "
              f"{rep.candidate_final_loss:>15.6g}")
        rows.append({
            "seed": seed,
            "iter_speedup": rep.iter_speedup_to_threshold,
            "wall_speedup": rep.wallclock_speedup,
            "threshold_loss": rep.threshold_loss,
            "baseline_final_loss": rep.baseline_final_loss,
            "candidate_final_loss": rep.candidate_final_loss,
            "baseline_reached": rep.baseline_reached,
            "candidate_reached": rep.candidate_reached,
        })
    iter_med, wall_med, n_ok = pipeline.median_speedups(results)
    print(f"median iter_speedup={_fmt(iter_med)} wall_speedup={_fmt(wall_med)} "
          f"({n_ok}/{len(results)} runs reached the threshold)")
    with open(out_dir / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    summary = {
        "config": serialize_config(cfg),
        "seeds": args.seeds,
        "quantile": args.quantile,
        "median_iter_speedup": iter_med,
        "median_wall_speedup": wall_med,
        "runs": rows,
    }
    (out_dir / "bench.json").write_text(json.dumps(summary, indent=2) + "\n",
                                        encoding="utf-8")
    print(f"  wrote {out_dir / 'bench.csv'}")
    print(f"  wrote {out_dir / 'bench.json'}")
    if not args.no_figures:
        from . import plots
        fig = plots.save_bench_figure(results, out_dir / "speedups.png")
        curves = {f"linear seed {results[0][0]}": results[0][1],
                  f"{cfg.mode} seed {results[0][0]}": results[0][2]}
        fig2 = plots.save_comparison_figure(curves, out_dir / "loss_curves.png")
        print(f"  wrote {fig}")
        print(f"  wrote {fig2}")
    return 0


def _cmd_gen_graph(args):
    spec = parse_graph_spec(args.spec)
    graph = generate(spec, seed=args.seed)
    write_edge_list(graph, args.out)
    print(f"wrote {args.out}: n={graph.n} edges={graph.n_edges}")
    return 0


def _cmd_gen_cloud(args):
    cloud = sample_cloud(args.n, args.range, args.seed)
    write_cloud_csv(cloud, args.out)
    print(f"wrote {args.out}: n={cloud.n} range={args.range}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphflow",
        description="GCN-reparametrized gradient flows on sparse graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one trajectory from a config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--no-figures", action="store_true")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="baseline vs candidate speedup sweep")
    bench.add_argument("--config", required=True)
    bench.add_argument("--seeds", type=int, required=True)
    bench.add_argument("--seed", type=int, default=None, help="base seed override")
    bench.add_argument("--quantile", type=float, default=0.01)
    bench.add_argument("--out", default=None)
    bench.add_argument("--no-figures", action="store_true")
    bench.set_defaults(func=_cmd_bench)

    gg = sub.add_parser("gen-graph", help="export a generated graph as an edge list")
    gg.add_argument("--spec", required=True,
                    help="e.g. circle:5, lattice2d:25,25, tree:2,9, "
                         "sbm:60+60+60+60,0.2,0.01, rgg:100,0.2,2")
    gg.add_argument("--seed", type=int, default=0)
    gg.add_argument("--out", required=True)
    gg.set_defaults(func=_cmd_gen_graph)

    gc = sub.add_parser("gen-cloud", help="export a sampled point cloud as CSV")
    gc.add_argument("--n", type=int, required=True)
    gc.add_argument("--range", type=float, required=True)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--out", required=True)
    gc.set_defaults(func=_cmd_gen_cloud)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonFiniteLoss as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 2
    except GraphFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
