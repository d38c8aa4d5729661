"""``lapool`` command line: one subcommand per experiment, config file + overrides.

Each run writes ``resolved_config.json`` next to its outputs and keeps
wall-clock data in a separate ``run_meta.json`` so every other output is
byte-identical across reruns of the same resolved config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import integrated_gradients, interpretability_score
from .config import ConfigError, RunConfig, dump_resolved, load_file, resolve
from .data import generate_dataset, load_dataset, motif_nodes, save_dataset, split_dataset
from .gradcheck import certify
from .gradcheck import CASES as GRADCHECK_CASES
from .graph import graph_to_dict, importance_to_dot, load_graph, pooling_to_dot
from .model import build_model, load_checkpoint, save_checkpoint
from .pooling import lapool_layer
from .signal_demo import MODES, rows_to_csv, run_demo
from .train import evaluate, train

log = logging.getLogger("lapool_lab")

LOG_ENV = "LAPOOL_LOG_LEVEL"
METRIC_COLUMNS = ["epoch", "split", "loss", "F1", "ROC-AUC", "PR-AUC"]


class CommandFailed(RuntimeError):
    """A run finished but its check failed (non-zero exit, no traceback)."""


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _num(v) -> str:
    return "" if v is None else repr(float(v))


def _metric_row(epoch, split, result: dict) -> dict:
    return {
        "epoch": epoch,
        "split": split,
        "loss": _num(result.get("loss")),
        "F1": _num(result.get("micro_f1")),
        "ROC-AUC": _num(result.get("roc_auc")),
        "PR-AUC": _num(result.get("pr_auc")),
    }


def _metrics_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _dataset(cfg: RunConfig):
    if cfg.data.dir is not None:
        graphs, _ = load_dataset(cfg.data.dir)
        return graphs
    return generate_dataset(cfg.data.task, cfg.data.count)


def _splits(cfg: RunConfig):
    graphs = _dataset(cfg)
    if not graphs:
        raise ValueError("dataset is empty")
    return split_dataset(graphs, seed=cfg.seed)


def _final_metrics(model, splits) -> dict:
    return {name: evaluate(model, part) for name, part in zip(("train", "valid", "test"), splits)}


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"{name} must be set (e.g. --set {name}=PATH)")
    if not Path(value).exists():
        raise FileNotFoundError(f"{name}: {value} does not exist")
    return value


# ---------------------------------------------------------------- subcommands


def cmd_gen_data(cfg: RunConfig, out: Path) -> dict:
    graphs = generate_dataset(cfg.data.task, cfg.data.count)
    save_dataset(graphs, out / "data", cfg.data.task)
    positives = np.array([g.label_vector(cfg.data.task.n_labels) for g in graphs])
    summary = {"count": len(graphs), "label_rate": positives.mean(axis=0).tolist(), "dir": "data"}
    _write(out / "dataset_summary.json", _dump(summary))
    return summary


def cmd_train(cfg: RunConfig, out: Path) -> dict:
    splits = _splits(cfg)
    model = build_model(cfg.model)
    report = train(model, splits[0], splits[1], cfg.train, test_set=splits[2])
    save_checkpoint(model, out / "checkpoint.json")
    report["model_id"] = _file_hash(out / "checkpoint.json")
    report["num_parameters"] = model.num_parameters()
    _write(out / "report.json", _dump(report))
    rows = [_metric_row(0, "valid", report["initial_valid"])]
    for h in report["history"]:
        rows.append(_metric_row(h["epoch"], "train", {"loss": h["train_loss"]}))
        rows.append(_metric_row(h["epoch"], "valid", h["valid"]))
    rows += [_metric_row("final", split, res) for split, res in report["final"].items()]
    _write(out / "metrics.csv", _metrics_csv(rows))
    return {"best_epoch": report["best_epoch"], "final": report["final"]}


def cmd_eval(cfg: RunConfig, out: Path) -> dict:
    path = _require(cfg.eval.checkpoint, "eval.checkpoint")
    model = load_checkpoint(path)
    final = _final_metrics(model, _splits(cfg))
    _write(out / "eval.json", _dump({"model_id": _file_hash(path), "final": final}))
    _write(out / "metrics.csv", _metrics_csv([_metric_row("final", s, r) for s, r in final.items()]))
    return final


def cmd_pool(cfg: RunConfig, out: Path) -> dict:
    g = load_graph(_require(cfg.pool.graph, "pool.graph"))
    pooled, _, info = lapool_layer(g, g.node_features, cfg.pool.config)
    _write(out / "pooled_graph.json", _dump(graph_to_dict(pooled)))
    _write(out / "assignment.json", _dump(info.to_dict()))
    _write(out / "pooling.dot", pooling_to_dot(g, info.centroids, info.affinity, pooled.adjacency))
    return {"n": g.n, "pooled_n": pooled.n, "centroids": [int(c) for c in info.centroids]}


def cmd_explain(cfg: RunConfig, out: Path) -> dict:
    ex = cfg.explain
    path = _require(ex.checkpoint, "explain.checkpoint")
    model = load_checkpoint(path)
    g = load_graph(_require(ex.graph, "explain.graph"))
    attr = integrated_gradients(model, g, ex.target, ex.steps, adjacency=ex.adjacency, objective=ex.objective)
    report = attr.to_dict()
    report["model_id"] = _file_hash(path)
    report["probability"] = float(model.predict_proba(g)[ex.target])
    report["pr_auc"] = None
    if g.node_labels is not None:
        mask = motif_nodes(g, ex.target)
        if 0 < mask.sum() < mask.size:
            report["pr_auc"] = interpretability_score(attr, mask)
    _write(out / "attribution.json", _dump(report))
    _write(out / "importance.dot", importance_to_dot(g, attr.node_importance))
    return {"pr_auc": report["pr_auc"], "completeness_error": report["completeness_error"]}


def cmd_signal_demo(cfg: RunConfig, out: Path) -> dict:
    result = run_demo(cfg.signal_demo)
    _write(out / "signal_demo.csv", rows_to_csv(result["rows"]))
    _write(out / "summary.json", _dump(result["summary"]))
    plot = {
        str(k): {
            mode: [abs(r["delta_E"]) for r in result["rows"] if r["k"] == k and r["mode"] == mode] for mode in MODES
        }
        for k in cfg.signal_demo.ks
    }
    _write(out / "plot_data.json", _dump({"abs_delta_E": plot, "x": "seed", "y": "|delta_E|"}))
    return result["summary"]


def cmd_gradcheck(cfg: RunConfig, out: Path) -> dict:
    gc = cfg.gradcheck
    results = [certify(name, gc.points, gc.eps, cfg.seed) for name in GRADCHECK_CASES]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case", "max_rel_error", "tolerance", "points", "redrawn", "coordinates", "passed"])
    for r in results:
        writer.writerow([r.name, repr(r.max_error), repr(r.tolerance), r.points, r.redrawn, r.coordinates, r.passed])
    _write(out / "gradcheck.csv", buf.getvalue())
    width = max(len(r.name) for r in results)
    print(f"{'case':<{width}}  {'max rel err':>11}  {'tol':>7}  status")
    for r in results:
        print(f"{r.name:<{width}}  {r.max_error:11.3e}  {r.tolerance:7.0e}  {'PASS' if r.passed else 'FAIL'}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CommandFailed(f"gradient check failed for: {', '.join(failed)}")
    return {"cases": len(results), "failed": failed}


COMMANDS = {
    "gen-data": (cmd_gen_data, "generate a planted-motif dataset directory"),
    "train": (cmd_train, "train a model; writes checkpoint.json, report.json, metrics.csv"),
    "eval": (cmd_eval, "evaluate eval.checkpoint on the configured dataset splits"),
    "pool": (cmd_pool, "pool one graph file (identity feature map); JSON + DOT"),
    "explain": (cmd_explain, "integrated-gradients attribution for one graph; JSON + DOT"),
    "signal-demo": (cmd_signal_demo, "Laplacian maxima vs minima downsampling on 1-D signals"),
    "gradcheck": (cmd_gradcheck, "finite-difference certification of every layer"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lapool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, help="global seed (section seeds inherit it unless set)")
    common.add_argument("--out", help="output directory (default runs/<command>)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="dotted override, repeatable"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get(LOG_ENV, "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        raw = load_file(args.config) if args.config else {}
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = resolve(raw, args.overrides, seed=args.seed, out=args.out)
    except (ConfigError, FileNotFoundError) as exc:
        return _error(exc, 2)

    out = Path(cfg.out or Path("runs") / args.command)
    fn = COMMANDS[args.command][0]
    started = time.time()
    status, code = "ok", 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "resolved_config.json", dump_resolved(cfg))
        summary = fn(cfg, out)
        print(json.dumps({"command": args.command, "out": str(out), "summary": summary}, sort_keys=True))
    except CommandFailed as exc:
        status, code = "failed", _error(exc, 1)
    except (ConfigError, FileNotFoundError) as exc:
        status, code = "error", _error(exc, 2)
    except Exception as exc:  # anything else still leaves a JSON error and run_meta.json
        status, code = "error", _error(exc, 1)
    finally:
        if out.is_dir():
            meta = {
                "command": args.command,
                "argv": list(sys.argv[1:] if argv is None else argv),
                "started": started,
                "finished": time.time(),
                "status": status,
                "version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            }
            (out / "run_meta.json").write_text(_dump(meta))
    return code


if __name__ == "__main__":
    sys.exit(main())
