"""Command-line entry point: ``tensile <command> [options]``.

Exit status is 0 on success, 2 for configuration errors and 3 for runtime or
training failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import pipeline
from .config import ConfigError, ExperimentConfig
from .evaluation import TIMING_FIELDS, summarize, write_pair_details, write_reports
from .graphs import CalibrationError, ParameterError, save_graph
from .policies import NeuralQ, TwoLinearAction
from .qnet import QNetwork, SchemaError, TrainingDivergence
from .ranking import DIST, DIST_NS, M1, M2, sim_points
from .rl import write_episode_metrics
from .symbolic import fit_two_plane, surface_export

log = logging.getLogger("tensile")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _cell(text):
    try:
        n, d = text.lower().split("x")
        return int(n), float(d)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cell must look like 64x5, got {text!r}") from None


def _add_config_flags(p):
    g = p.add_argument_group("experiment config (override the config file)")
    g.add_argument("--config", help="JSON config file")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in ("overrides", "phi"):
            continue
        default = f.default
        if isinstance(default, tuple) or f.name == "N_e":
            kind = int if f.name in ("N_test", "N_e") else float
            g.add_argument(f"--{f.name}", nargs="+", type=kind, default=None)
        else:
            g.add_argument(f"--{f.name}", type=type(default), default=None)
    g.add_argument("--phi", default=None, help="nodes per subsample, or 'all'")


def _config(args) -> ExperimentConfig:
    over = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(ExperimentConfig) if f.name != "overrides"}
    if over["phi"] is not None and over["phi"] != "all":
        try:
            over["phi"] = int(over["phi"])
        except ValueError:
            raise ConfigError(f"phi must be an integer or 'all', got {over['phi']!r}") from None
    if getattr(args, "features", None):
        over["Omega"] = 2 if args.features == DIST else 4
    if args.config:
        return ExperimentConfig.load(args.config, over)
    return ExperimentConfig.from_dict({}, over)


def _prepare(cfg: ExperimentConfig, command: str) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    header = {"command": command, "config": cfg.to_dict(), "overrides": cfg.overrides}
    (out / f"{command}.config.json").write_text(json.dumps(header, indent=1, default=str) + "\n")
    with open(out / "run.log", "a") as fh:  # timestamps live only here
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {command} overrides={json.dumps(cfg.overrides, default=str)}\n")
    if cfg.overrides:
        log.info("config overrides: %s", cfg.overrides)
    return out


def cmd_gen_graph(cfg, args):
    out = _prepare(cfg, "gen-graph") / "graphs"
    out.mkdir(exist_ok=True)
    written = []
    if not args.cells:
        g = pipeline.seed_graph(cfg)
        path = out / f"seed_{cfg.space}_n{cfg.N_train}_d{cfg.rho_train:g}.json"
        save_graph(g, path)
        written.append(path)
    for n, d in args.cells or []:
        for i, g in enumerate(pipeline.cell_graphs(cfg, cfg.space, n, d)):
            path = out / f"{cfg.space}_n{n}_d{d:g}_{i:03d}.json"
            save_graph(g, path)
            written.append(path)
    print(f"wrote {len(written)} graph file(s) to {out}")


def cmd_analyze_sim(cfg, args):
    if cfg.graphs_per_cell < 1:
        raise ConfigError("empty candidate list: graphs_per_cell must be >= 1")
    out = _prepare(cfg, "analyze-sim")
    metric = M1 if args.metric == "m1" else M2
    graphs = pipeline.cell_graphs(cfg, cfg.space, cfg.N_train, cfg.rho_train)
    rows, points = [], []
    for g in graphs:
        pts = sim_points(g, metric, cfg.epsilon, cfg.C, rng=np.random.default_rng(g.seed))
        pts = pts[np.isfinite(pts)]
        rows.append({"seed": g.seed, "n": g.n, "density": cfg.rho_train, "metric": metric.name,
                     "sim_g": float(pts.mean()), "frac_ge_0.9": float(np.mean(pts >= 0.9)), "points": int(pts.size)})
        points.extend((g.seed, float(p)) for p in pts)
    with open(out / f"sim_graphs_{args.metric}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    with open(out / f"sim_points_{args.metric}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "sim_v"])
        w.writerows(points)
    sims = [r["sim_g"] for r in rows]
    pooled = np.mean([p >= 0.9 for _, p in points])
    print(f"{metric.name}: SIM_G min {min(sims):.4f} mean {np.mean(sims):.4f}; pooled fraction >= 0.9: {pooled:.4f}")


def cmd_train(cfg, args):
    out = _prepare(cfg, "train" if args.mode == "supervised" else "train-rl")
    models = out / "models"
    models.mkdir(exist_ok=True)
    tag = "all" if cfg.phi is None else cfg.phi
    name = args.name or (f"supervised_{cfg.schema}_phi{tag}" if args.mode == "supervised" else f"rl_{cfg.schema}")
    if args.mode == "supervised":
        net, trace, samples = pipeline.train_supervised_model(cfg, phi="all" if cfg.phi is None else cfg.phi)
        with open(out / f"{name}.log.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "loss"])
            w.writerows(enumerate(trace))
        msg = f"{len(samples)} samples, final loss {trace[-1]:.6g}"
    else:
        net, hist = pipeline.train_rl_model(cfg)
        write_episode_metrics(hist, out / f"{name}.episodes.csv")
        msg = f"{len(hist)} episodes, final TD error {hist[-1].mean_td_error:.4g}"
    net.provenance["name"] = name
    net.save(models / f"{name}.json")
    print(f"saved {models / (name + '.json')}: {msg}")


def _load_policies(names):
    base = pipeline.baseline_policies()
    pols = []
    for item in names:
        if item in base:
            pols.append(base[item])
        elif item.endswith(".json"):
            try:
                net = QNetwork.load(item)
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"cannot load model {item}: {exc}") from exc
            pols.append(NeuralQ(net, Path(item).stem))
        else:
            raise ConfigError(f"unknown policy {item!r}; use one of {sorted(base)} or a model .json path")
    return pols


def cmd_eval(cfg, args):
    pols = _load_policies(args.policies)
    out = _prepare(cfg, "eval")
    cells = [(cfg.space, n, d) for n, d in args.cells] if args.cells else None
    reports = pipeline.evaluate_cells(cfg, pols, cells, fallback=args.fallback)
    write_reports(reports, out / "eval_reports.csv")
    write_reports(reports, out / "eval_timing.csv", TIMING_FIELDS)
    if args.pair_details:
        det = out / "pairs"
        det.mkdir(exist_ok=True)
        for r in reports:
            write_pair_details(r, det / f"{r.policy}_{r.graph['space']}_n{r.graph['n']}_d{r.graph['density']:g}_{r.graph['seed']}.csv")
    table = summarize(reports)
    with open(out / "accuracy_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "space", "n", "density", "mean_accuracy"])
        for (p, s, n, d), acc in table.items():
            w.writerow([p, s, n, d, f"{acc:.6f}"])
    for (p, s, n, d), acc in table.items():
        print(f"{p:>24} {s} n={n:<4} density={d:<4g} accuracy={acc:.4f}")


def _scorer(path):
    if path == "TwoLinear":
        return TwoLinearAction()
    try:
        return QNetwork.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load model {path}: {exc}") from exc


def cmd_export_policy(cfg, args):
    scorer = _scorer(args.model)
    params = fit_two_plane(scorer)
    out = _prepare(cfg, "export-policy")
    stem = Path(args.model).stem
    (out / f"{stem}.two_plane.json").write_text(json.dumps(params.to_dict(), indent=1) + "\n")
    surface_export(scorer, out / f"{stem}.surface.csv", args.d_v, args.ns_v)
    kind = "single plane" if params.single_plane else "two planes"
    print(f"{kind}: guard {np.round(params.guard, 4).tolist()} branch1 {np.round(params.branch1, 4).tolist()} "
          f"branch2 {np.round(params.branch2, 4).tolist()} residual {params.residual:.4g}")


def cmd_surface(cfg, args):
    scorer = _scorer(args.model)
    out = _prepare(cfg, "surface")
    path = out / f"{Path(args.model).stem}.surface.csv"
    Z = surface_export(scorer, path, args.d_v, args.ns_v)
    print(f"wrote {Z.size} grid values to {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensile", description="Seeded routing-policy experiments on random geometric graphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="write seeded graphs")
    p.add_argument("--cells", nargs="+", type=_cell, help="cells as NxDENSITY, e.g. 27x2 64x5")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("analyze-sim", help="ranking similarity of a local metric to Q*")
    p.add_argument("--metric", choices=["m1", "m2"], default="m1")
    p.set_defaults(func=cmd_analyze_sim)

    for name, mode in (("train", None), ("train-rl", "rl")):
        p = sub.add_parser(name, help="train a Q-network" + (" by reinforcement learning" if mode else ""))
        p.add_argument("--mode", choices=["supervised", "rl"], default=mode or "supervised")
        p.add_argument("--features", choices=[DIST, DIST_NS], default=None)
        p.add_argument("--name", help="model file stem")
        p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="APNSP accuracy of policies over the test grid")
    p.add_argument("--policies", nargs="+", default=["GF", "SR-NS"],
                   help="GF, SR-NS, TwoLinear or paths to model files")
    p.add_argument("--cells", nargs="+", type=_cell)
    p.add_argument("--fallback", choices=["dfs"], default=None)
    p.add_argument("--pair-details", action="store_true")
    p.set_defaults(func=cmd_eval)

    for name, func in (("export-policy", cmd_export_policy), ("surface", cmd_surface)):
        p = sub.add_parser(name, help="two-plane fit and surface grid" if name == "export-policy" else "surface grid")
        p.add_argument("model", help="model file, or TwoLinear for the published command")
        p.add_argument("--d_v", type=float, default=4.0)
        p.add_argument("--ns_v", type=float, default=1.2)
        p.set_defaults(func=func)

    for p in sub.choices.values():
        _add_config_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        args.func(cfg, args)
    except (ConfigError, SchemaError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDivergence, CalibrationError, RuntimeError, OSError, ValueError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
