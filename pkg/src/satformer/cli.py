"""Command-line entry point: gen, label, train, eval, attn, predict, solve, compare.

Settings resolve as flags > ``--config`` JSON > built-in defaults.  Every
command that writes ``--out`` also writes ``<out>.manifest.json`` recording
the resolved settings.  Exit codes: 0 ok, 1 internal error, 2 usage or
configuration error, 3 I/O or input-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import metadata as importlib_metadata

import numpy as np

from .checkpoint import CheckpointError
from .cnf import DimacsError, read_dimacs, var_clause_adjacency
from .generate import GenParams, _summary, generate_records, label_instance, load_dataset, write_jsonl
from .model import ModelConfig
from .solver import SolverConfig, compare_runs, init_scores, solve
from .train import ModelCheckpoint, TrainConfig, TrainingError, attention_breakdown, evaluate, train

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("satformer")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


def _version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "0+unknown"


# Built-in defaults per subcommand.  Keys use the flag names with underscores.
DEFAULTS: dict[str, dict] = {
    "gen": {"m_min": 3, "m_max": 10, "count": 100, "cv": None, "p_bernoulli": 0.3, "p_geometric": 0.4},
    "label": {},
    "train": {
        "epochs": 80, "batch": 16, "lr": 1e-4, "wd": 1e-10, "p_clause": 1.0, "p_sat": 1.0,
        "shuffle_period": 10, "normalize_core_target": False, "max_iterations": None,
        "dim": 128, "iterations": 10, "window": 4, "levels": 4, "heads": 8,
    },
    "eval": {"threshold": 0.5, "batch": 64},
    "attn": {"batch": 64},
    "predict": {},
    "solve": {"conflict_limit": None, "threshold": 0.5, "phase_saving": True},
    "compare": {"conflict_limit": None, "threshold": 0.5},
}

SEEDED = {"gen", "train"}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of settings (flags override it)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: logical cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satformer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled SR(m) dataset")
    _add_common(p)
    p.add_argument("--m-min", type=int)
    p.add_argument("--m-max", type=int)
    p.add_argument("--count", type=int, help="number of pairs (or of each label with --cv)")
    p.add_argument("--cv", type=int, help="truncate to a fixed clause/variable ratio")
    p.add_argument("--p-bernoulli", type=float)
    p.add_argument("--p-geometric", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("label", help="label DIMACS files with the exhaustive oracle")
    _add_common(p)
    p.add_argument("--cnf", nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--wd", type=float)
    p.add_argument("--p-clause", type=float)
    p.add_argument("--p-sat", type=float)
    p.add_argument("--shuffle-period", type=int)
    p.add_argument("--normalize-core-target", action="store_true", default=None)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--iterations", type=int, help="message-passing rounds")
    p.add_argument("--window", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    for name, help_ in (("eval", "accuracy by bucket"), ("attn", "C/U attention breakdown")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.add_argument("--ckpt")
        p.add_argument("--data")
        p.add_argument("--batch", type=int)
        if name == "eval":
            p.add_argument("--threshold", type=float)
        p.add_argument("--out")

    p = sub.add_parser("predict", help="write clause/sat scores for one instance")
    _add_common(p)
    p.add_argument("--ckpt")
    p.add_argument("--cnf")
    p.add_argument("--out")

    p = sub.add_parser("solve", help="run the CDCL solver")
    _add_common(p)
    p.add_argument("--cnf")
    p.add_argument("--scores", help="scores JSON from predict")
    p.add_argument("--conflict-limit", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--no-phase-saving", dest="phase_saving", action="store_false", default=None)
    p.add_argument("--stats-out")

    p = sub.add_parser("compare", help="solver stats with and without model scores")
    _add_common(p)
    p.add_argument("--cnf")
    p.add_argument("--ckpt")
    p.add_argument("--conflict-limit", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out")
    return parser


# ---------------------------------------------------------------- plumbing


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None


def _write_json(path: str, obj) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the --config file and explicit flags."""
    cmd = args.command
    settings = dict(DEFAULTS[cmd])
    if args.config:
        conf = _read_json(args.config)
        if not isinstance(conf, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
        if "subcommand" in conf and isinstance(conf.get("config"), dict):
            # a run manifest: replay its resolved settings
            if conf["subcommand"] != cmd:
                raise UsageError(f"{args.config} is a manifest for {conf['subcommand']!r}, not {cmd!r}")
            conf = conf["config"]
        conf = {k.replace("-", "_"): v for k, v in conf.items()}
        conf.pop("config", None)
        settings.update(conf)
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        settings[key] = value
    if settings.get("jobs") is None:
        settings["jobs"] = os.cpu_count() or 1
    if cmd in SEEDED and settings.get("seed") is None:
        env = os.environ.get("SATFORMER_SEED")
        try:
            settings["seed"] = int(env) if env is not None else 0
        except ValueError:
            raise UsageError(f"SATFORMER_SEED must be an integer, got {env!r}") from None
    known = set(DEFAULTS[cmd]) | {k for k in vars(args) if k not in ("command", "config", "verbose")}
    unknown = sorted(set(settings) - known)
    if unknown:
        raise UsageError(f"unknown setting(s) for {cmd}: {', '.join(unknown)}")
    return settings


def _require(settings: dict, *names: str) -> None:
    missing = [n for n in names if not settings.get(n)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _manifest(cmd: str, settings: dict, inputs: list, outputs: list) -> dict:
    # jobs only changes scheduling, never the output, so it stays out of the manifest
    resolved = {k: v for k, v in sorted(settings.items()) if k != "jobs"}
    return {
        "subcommand": cmd,
        "config": resolved,
        "seed": settings.get("seed"),
        "inputs": inputs,
        "outputs": outputs,
        "version": _version(),
    }


def _write_manifest(cmd: str, settings: dict, inputs: list, outputs: list) -> None:
    _write_json(outputs[0] + ".manifest.json", _manifest(cmd, settings, inputs, outputs))


def _load_records(path: str):
    try:
        return load_dataset(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed dataset: {exc}") from None


def _load_ckpt(path: str) -> ModelCheckpoint:
    try:
        return ModelCheckpoint.load(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except (CheckpointError, KeyError) as exc:
        raise InputError(f"{path}: bad checkpoint: {exc}") from None


def _load_cnf(path: str):
    try:
        return read_dimacs(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except DimacsError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- subcommands


def cmd_gen(s: dict) -> int:
    _require(s, "out")
    params = GenParams(s["m_min"], s["m_max"], s["p_bernoulli"], s["p_geometric"], s["seed"])
    records = generate_records(params, s["count"], cv=s["cv"], jobs=s["jobs"])
    try:
        write_jsonl(records, s["out"])
    except OSError as exc:
        raise InputError(f"cannot write {s['out']}: {exc}") from None
    _write_manifest("gen", s, [], [s["out"]])
    print(json.dumps(_summary(records), sort_keys=True))
    return EXIT_OK


def cmd_label(s: dict) -> int:
    _require(s, "cnf", "out")
    records = []
    for i, path in enumerate(s["cnf"]):
        rec = label_instance(_load_cnf(path), id=os.path.basename(path) or f"cnf{i}")
        records.append(rec.to_record())
    try:
        write_jsonl(records, s["out"])
    except OSError as exc:
        raise InputError(f"cannot write {s['out']}: {exc}") from None
    _write_manifest("label", s, list(s["cnf"]), [s["out"]])
    print(json.dumps(_summary(records), sort_keys=True))
    return EXIT_OK


def train_config_from(s: dict) -> TrainConfig:
    model = ModelConfig.make(s["dim"], s["iterations"], s["window"], s["levels"], s["heads"])
    return TrainConfig(
        epochs=s["epochs"], batch_size=s["batch"], lr=s["lr"], weight_decay=s["wd"],
        clause_shuffle_period=s["shuffle_period"], seed=s["seed"], p_clause=s["p_clause"],
        p_sat=s["p_sat"], normalize_core_target=bool(s["normalize_core_target"]),
        max_iterations=s["max_iterations"], model=model,
    )


def cmd_train(s: dict) -> int:
    _require(s, "data", "out")
    config = train_config_from(s)
    records = _load_records(s["data"])
    if not records:
        raise UsageError(f"{s['data']}: empty dataset")

    def progress(epoch, it, loss):
        log.debug("epoch %d iteration %d loss %.5f", epoch, it, loss)

    result = train(records, config, progress)
    try:
        result.checkpoint.save(s["out"])
    except OSError as exc:
        raise InputError(f"cannot write {s['out']}: {exc}") from None
    curve_path = s["out"] + ".curve.json"
    _write_json(curve_path, {"loss_curve": result.loss_curve, "epoch_losses": result.epoch_losses})
    _write_manifest("train", s, [s["data"]], [s["out"], curve_path])
    print(json.dumps({"iterations": len(result.loss_curve), "final_epoch_loss": result.epoch_losses[-1],
                      "params": result.checkpoint.model.num_params()}))
    return EXIT_OK


def cmd_eval(s: dict) -> int:
    _require(s, "ckpt", "data", "out")
    model = _load_ckpt(s["ckpt"]).model
    records = _load_records(s["data"])
    if not records:
        raise UsageError(f"{s['data']}: empty dataset")
    report = evaluate(model, records, threshold=s["threshold"], batch_size=s["batch"], check_attention=True)
    _write_json(s["out"], report.to_json())
    _write_manifest("eval", s, [s["ckpt"], s["data"]], [s["out"]])
    print(f"accuracy {report.accuracy:.4f} ({report.correct}/{report.total})")
    for key, b in report.buckets.items():
        print(f"  {key}: {b['accuracy']:.4f} ({b['correct']}/{b['count']})")
    return EXIT_OK


def cmd_attn(s: dict) -> int:
    _require(s, "ckpt", "data", "out")
    model = _load_ckpt(s["ckpt"]).model
    records = _load_records(s["data"])
    if not records:
        raise UsageError(f"{s['data']}: empty dataset")
    result = attention_breakdown(model, records, batch_size=s["batch"])
    _write_json(s["out"], result.to_json())
    _write_manifest("attn", s, [s["ckpt"], s["data"]], [s["out"]])
    print(" ".join(f"{k}={v:.2f}" for k, v in result.to_json().items() if k != "instances"))
    return EXIT_OK


def cmd_predict(s: dict) -> int:
    _require(s, "ckpt", "cnf", "out")
    model = _load_ckpt(s["ckpt"]).model
    pred = model.predict(_load_cnf(s["cnf"]))
    _write_json(s["out"], {"y_sat": pred["y_sat"], "y_clause": pred["y_clause"]})
    _write_manifest("predict", s, [s["ckpt"], s["cnf"]], [s["out"]])
    print(f"y_sat {pred['y_sat']:.4f}")
    return EXIT_OK


def _scores_vector(instance, scores: dict, threshold: float) -> np.ndarray:
    if not isinstance(scores, dict) or "y_sat" not in scores or "y_clause" not in scores:
        raise InputError('scores file must hold {"y_sat": float, "y_clause": [floats]}')
    if len(scores["y_clause"]) != instance.num_clauses:
        raise InputError(f"scores list {len(scores['y_clause'])} clauses, instance has {instance.num_clauses}")
    return init_scores(var_clause_adjacency(instance), scores["y_clause"], float(scores["y_sat"]), threshold)


def cmd_solve(s: dict) -> int:
    _require(s, "cnf")
    instance = _load_cnf(s["cnf"])
    initial = None
    if s.get("scores"):
        initial = _scores_vector(instance, _read_json(s["scores"]), s["threshold"])
    config = SolverConfig(conflict_limit=s["conflict_limit"], phase_saving=s["phase_saving"])
    result = solve(instance, config, initial)
    print(result.verdict)
    if s.get("stats_out"):
        _write_json(s["stats_out"], result.to_json())
        inputs = [s["cnf"]] + ([s["scores"]] if s.get("scores") else [])
        _write_manifest("solve", s, inputs, [s["stats_out"]])
    return EXIT_OK


def cmd_compare(s: dict) -> int:
    _require(s, "cnf", "ckpt")
    instance = _load_cnf(s["cnf"])
    model = _load_ckpt(s["ckpt"]).model
    pred = model.predict(instance)
    initial = _scores_vector(instance, pred, s["threshold"])
    report = compare_runs(instance, SolverConfig(conflict_limit=s["conflict_limit"]), initial)
    report["y_sat"] = pred["y_sat"]
    if s.get("out"):
        _write_json(s["out"], report)
        _write_manifest("compare", s, [s["cnf"], s["ckpt"]], [s["out"]])
    print(f"verdict {report['with']['verdict']}  lemmas {report['without']['stats']['learnt_clauses']}"
          f" -> {report['with']['stats']['learnt_clauses']}  lemma reduction {report['lemma_reduction_pct']:.2f}%"
          f"  decision reduction {report['decision_reduction_pct']:.2f}%")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "label": cmd_label, "train": cmd_train, "eval": cmd_eval, "attn": cmd_attn,
    "predict": cmd_predict, "solve": cmd_solve, "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve(args)
        return COMMANDS[args.command](settings)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, TypeError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
