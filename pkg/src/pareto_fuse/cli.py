"""Command-line orchestration: seeded configs, one subcommand per pipeline
stage, and deterministic JSON/CSV/SVG reports."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import svg
from .config import ExperimentConfig, load_config
from .datagen import (Batch, generate_universe, read_jsonl, stream_impressions,
                      write_jsonl)
from .errors import (ConfigurationError, MissingArtifactError, NumericError,
                     ParetoFuseError)
from .formula import formula_score, tune_params
from .ippo import run_ippo, write_trail
from .metrics import (EvalWindow, fit_calibration, gauc_report, kendall_tau)
from .pantheon import PantheonModel, WeightVector
from .pipeline import JointEnvironment, StreamCursor, pretrain_ranking
from .ranking import RankingModel

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERIC = 4


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(str(path))
    return path


def _universe(cfg: ExperimentConfig):
    dg = cfg.datagen
    return generate_universe(cfg.universe_seed, dg.n_users, dg.n_items,
                             dg.latent_dim, cfg.objectives, dg.target_rates,
                             objective_correlation=dg.objective_correlation)


def _build_ranking(cfg: ExperimentConfig) -> RankingModel:
    dg = cfg.datagen
    return RankingModel(cfg.ranking, cfg.objectives, dg.n_users, dg.n_items,
                        dg.n_features, cfg.ranking_seed)


def _build_pantheon(cfg: ExperimentConfig) -> PantheonModel:
    dg = cfg.datagen
    return PantheonModel(cfg.pantheon, cfg.objectives, dg.n_users, dg.n_items,
                         cfg.pantheon_seed)


def _load_batch(cfg: ExperimentConfig, name: str) -> Batch:
    return Batch.from_logs(read_jsonl(_require(cfg.out_path(name))),
                           cfg.objectives)


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_generate(cfg: ExperimentConfig) -> None:
    uni = _universe(cfg)
    dg = cfg.datagen
    specs = [("train.jsonl", cfg.train_seed, dg.n_train, 0),
             ("valid.jsonl", cfg.valid_seed, dg.n_valid, dg.n_train),
             ("eval.jsonl", cfg.eval_seed, dg.n_eval, dg.n_train + dg.n_valid)]
    for name, seed, n, start in specs:
        logs = stream_impressions(uni, seed, n, start_ordinal=start)
        write_jsonl(logs, cfg.out_path(name))
    print(f"generated {dg.n_train}/{dg.n_valid}/{dg.n_eval} impressions "
          f"in {cfg.output_dir}")


def cmd_train_ranking(cfg: ExperimentConfig) -> None:
    train = _load_batch(cfg, "train.jsonl")
    model = _build_ranking(cfg)
    cursor = StreamCursor(train, cfg.batch_size, cycle=True)
    curve = pretrain_ranking(model, cursor, cfg.ranking_pretrain_steps)
    model.store.save(cfg.out_path("ranking_snapshot.json"), "ranking")
    with open(cfg.out_path("ranking_curve.jsonl"), "w") as fh:
        for rec in curve:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    last = curve[-1]["losses"] if curve else {}
    print(f"pretrained ranking model for {len(curve)} steps; "
          f"final losses {json.dumps(last, sort_keys=True)}")


def cmd_run_ippo(cfg: ExperimentConfig) -> None:
    train = _load_batch(cfg, "train.jsonl")
    valid = _load_batch(cfg, "valid.jsonl")
    ranking = _build_ranking(cfg)
    ranking.store.load(_require(cfg.out_path("ranking_snapshot.json")))
    pantheon = _build_pantheon(cfg)
    initial_weights = cfg.ippo.initial_weight_vector(cfg.objectives)
    pantheon.store.save(cfg.out_path("pantheon_initial_snapshot.json"),
                        "pantheon",
                        header={"weights": initial_weights.to_dict()})
    window = EvalWindow.from_batch(valid, cfg.objectives, "valid")
    # The ranking model is frozen during the weight search so the fusion head
    # trains against the same tower states it is later evaluated with.
    env = JointEnvironment(ranking, pantheon,
                           StreamCursor(train, cfg.batch_size, cycle=True),
                           window, train_ranking=False)
    env.attach_window_batch(valid)
    state = run_ippo(env, cfg.objectives, cfg.ippo)
    write_trail(state, cfg.out_path("ippo_trail.jsonl"))
    base_rank, base_pant = env.base_snapshots()
    ranking.store.restore(base_rank)
    pantheon.store.restore(base_pant)
    ranking.store.save(cfg.out_path("ranking_final_snapshot.json"), "ranking")
    pantheon.store.save(cfg.out_path("pantheon_snapshot.json"), "pantheon",
                        header={"weights": state.weights.to_dict()})
    replacements = sum(1 for r in state.history
                       if r["action"]["kind"] == "replace_base")
    print(f"ran {len(state.history)} rounds, {replacements} base replacements"
          + (" (truncated)" if state.truncated else ""))


def _final_ranking(cfg: ExperimentConfig) -> RankingModel:
    ranking = _build_ranking(cfg)
    final = cfg.out_path("ranking_final_snapshot.json")
    path = final if final.exists() else cfg.out_path("ranking_snapshot.json")
    ranking.store.load(_require(path))
    return ranking


def cmd_tune_formula(cfg: ExperimentConfig) -> None:
    valid = _load_batch(cfg, "valid.jsonl")
    ranking = _final_ranking(cfg)
    window = EvalWindow.from_batch(valid, cfg.objectives, "valid")
    window.pxtrs = ranking.predict(valid)
    workers = int(os.environ.get("PARETO_FUSE_THREADS", "1"))
    best, metric, trace = tune_params(cfg.formula, window, cfg.metric_spec(),
                                      budget=cfg.formula_budget,
                                      seed=cfg.search_seed,
                                      max_workers=max(workers, 1))
    _write_json(cfg.out_path("formula_params.json"),
                {"params": best, "metric": metric})
    with open(cfg.out_path("formula_trace.jsonl"), "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"best formula params {json.dumps(best, sort_keys=True)} "
          f"with metric {metric:.6f}")


def cmd_evaluate(cfg: ExperimentConfig) -> None:
    eval_batch = _load_batch(cfg, "eval.jsonl")
    ranking = _build_ranking(cfg)
    ranking.store.load(_require(cfg.out_path("ranking_final_snapshot.json")))
    pantheon = _build_pantheon(cfg)
    header = pantheon.store.load(_require(cfg.out_path("pantheon_snapshot.json")))
    with open(_require(cfg.out_path("formula_params.json"))) as fh:
        formula_params = json.load(fh)["params"]

    window = EvalWindow.from_batch(eval_batch, cfg.objectives, "eval")
    pxtrs = ranking.predict(eval_batch)
    formula_scores = formula_score(pxtrs, formula_params, cfg.formula)
    pantheon_scores = pantheon.score(ranking, eval_batch)

    names = list(cfg.objectives.names)
    ranking_row = {n: gauc_report(pxtrs[n], window).gauc[n] for n in names}
    formula_row = gauc_report(formula_scores, window).gauc
    pantheon_row = gauc_report(pantheon_scores, window).gauc
    improvement = {n: pantheon_row[n] - formula_row[n] for n in names}
    tau = {
        "formula": {n: kendall_tau(pxtrs[n], formula_scores) for n in names},
        "pantheon": {n: kendall_tau(pxtrs[n], pantheon_scores) for n in names},
    }
    doc = {
        "objectives": names,
        "rows": {"ranking": ranking_row, "formula": dict(formula_row),
                 "pantheon": dict(pantheon_row), "improvement": improvement},
        "average_improvement": float(np.mean(list(improvement.values()))),
        "kendall_tau": tau,
        "weights": header.get("weights"),
    }
    _write_json(cfg.out_path("evaluation.json"), doc)
    print(f"average improvement over formula: {doc['average_improvement']:+.5f}")


def cmd_calibrate(cfg: ExperimentConfig) -> None:
    eval_batch = _load_batch(cfg, "eval.jsonl")
    ranking_final = _build_ranking(cfg)
    ranking_final.store.load(_require(cfg.out_path("ranking_final_snapshot.json")))
    pantheon_final = _build_pantheon(cfg)
    pantheon_final.store.load(_require(cfg.out_path("pantheon_snapshot.json")))
    ranking_init = _build_ranking(cfg)
    ranking_init.store.load(_require(cfg.out_path("ranking_snapshot.json")))
    pantheon_init = _build_pantheon(cfg)
    pantheon_init.store.load(_require(cfg.out_path("pantheon_initial_snapshot.json")))

    experimental = pantheon_final.score(ranking_final, eval_batch)
    baseline = pantheon_init.score(ranking_init, eval_batch)
    transform = fit_calibration(experimental, baseline)
    calibrated = transform.apply(experimental)
    _write_json(cfg.out_path("calibration.json"), transform.to_dict())
    with open(cfg.out_path("calibrated_scores.jsonl"), "w") as fh:
        for ordinal, raw, cal in zip(eval_batch.ordinals.tolist(),
                                     experimental.tolist(), calibrated.tolist()):
            fh.write(json.dumps({"ordinal": ordinal, "score": raw,
                                 "calibrated": cal}, sort_keys=True) + "\n")
    print(f"calibration scale {transform.scale:.6f} shift {transform.shift:.6f}")


def cmd_report(cfg: ExperimentConfig) -> None:
    with open(_require(cfg.out_path("evaluation.json"))) as fh:
        evaluation = json.load(fh)
    trail = []
    trail_path = cfg.out_path("ippo_trail.jsonl")
    if trail_path.exists():
        with open(trail_path) as fh:
            trail = [json.loads(line) for line in fh]

    names = evaluation["objectives"]
    rows = evaluation["rows"]
    _write_json(cfg.out_path("report.json"),
                {"evaluation": evaluation, "ippo_rounds": len(trail),
                 "ippo_trail": trail})
    with open(cfg.out_path("report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method"] + names)
        for label in ("ranking", "formula", "pantheon", "improvement"):
            writer.writerow([label] + [f"{rows[label][n]:.6f}" for n in names])

    bars = svg.grouped_bars(
        "GAUC per objective", names,
        {label: [rows[label][n] for n in names]
         for label in ("ranking", "formula", "pantheon")})
    cfg.out_path("gauc_bars.svg").write_text(bars)
    if trail:
        weights = {n: [rec["weights"][n] for rec in trail] for n in names}
        chart = svg.line_chart("Objective weight trajectory",
                               [rec["round"] for rec in trail], weights)
        cfg.out_path("weight_trajectory.svg").write_text(chart)
    tau = evaluation["kendall_tau"]
    table = svg.table_chart("Kendall tau: pxtr vs fused score", names,
                            ["formula", "pantheon"],
                            [[tau["formula"][n], tau["pantheon"][n]]
                             for n in names])
    cfg.out_path("tau_table.svg").write_text(table)
    print(f"report written to {cfg.output_dir}")


COMMANDS = {
    "generate": cmd_generate,
    "train-ranking": cmd_train_ranking,
    "tune-formula": cmd_tune_formula,
    "run-ippo": cmd_run_ippo,
    "evaluate": cmd_evaluate,
    "calibrate": cmd_calibrate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pareto-fuse",
        description="Neural multi-objective ensemble-sort laboratory")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--seed", type=int, default=None, help="override seed")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed,
                          out_override=args.out)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ParetoFuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
