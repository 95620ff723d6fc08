"""Command-line surface: extract, train, eval, predict, probe, synth.

Every subcommand accepts the shared flags --config, --seed, --mode, and
--task (they may also be given before the subcommand). Exit codes:
0 success, 2 bad input, 3 training diverged, 4 missing artifact
(checkpoint, config, or data file).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .config import HiTConfig, TrainSchedule, parse_config_text
from .data import SYNTH_TASKS, TASKS, generate_synthetic, load_dataset, write_jsonl
from .encoding import subtokenize_name
from .errors import (
    DivergedTraining,
    HiercodeError,
    MalformedRecord,
    MissingCheckpoint,
    MissingFile,
)
from .estimators import HiTClassifier, HiTNameGenerator, tokenize_strict
from .metrics import accuracy, corpus_subtoken_prf, map_at_r, subtoken_prf
from .model import HiTClassifierModel, param_report
from .nn.checkpoint import load_checkpoint
from .pointer import join_camel_case
from .syntax import HIERARCHY_MODES, program_to_record, project_hierarchy

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_DIVERGED = 3
EXIT_MISSING_ARTIFACT = 4

_MODEL_KEYS = {f.name for f in fields(HiTConfig)}
_SCHEDULE_KEYS = {f.name for f in fields(TrainSchedule)}
# Sizes derived from the training data; a config file cannot pin them.
_DERIVED_KEYS = {"num_categories", "node_vocab_size"}


def _add_common_flags(parser: argparse.ArgumentParser, top_level: bool) -> None:
    # Top-level flags carry the real defaults; subcommand copies default
    # to SUPPRESS so they override only when given after the subcommand.
    default = None if top_level else argparse.SUPPRESS
    parser.add_argument("--config", default=default, metavar="PATH",
                        help="key=value config file (model and schedule fields)")
    parser.add_argument("--seed", type=int, default=default,
                        help="random seed (default 0)")
    parser.add_argument("--mode", choices=HIERARCHY_MODES, default=default,
                        help="hierarchy ablation mode (default full)")
    parser.add_argument("--task", default=default,
                        help="task name; see each subcommand for accepted values")


def _read_config_values(path: str | None) -> dict:
    if path is None:
        return {}
    file = Path(path)
    if not file.exists():
        raise MissingFile(f"config file {file} does not exist")
    values = parse_config_text(file.read_text(encoding="utf-8"))
    unknown = set(values) - _MODEL_KEYS - _SCHEDULE_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return values


def _resolve_mode(args, config_values: dict) -> str:
    if args.mode is not None:
        return args.mode
    return config_values.get("hierarchy_mode", "full")


def _resolve_seed(args, config_values: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(config_values.get("seed", 0))


def _require_task(args, allowed: tuple[str, ...]) -> str:
    if args.task is None:
        raise ValueError(f"--task is required; choose from {', '.join(allowed)}")
    if args.task not in allowed:
        raise ValueError(
            f"task {args.task!r} not supported here; choose from {', '.join(allowed)}"
        )
    return args.task


def _open_out(path: str | None):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _emit(handle, obj) -> None:
    handle.write(json.dumps(obj) + "\n")


def _iter_input_programs(args) -> list[tuple[str, str]]:
    """Collect (origin, code) pairs from --in files and --code flags.

    A .jsonl input contributes one program per record's "code" field;
    any other file is read whole as a single program.
    """
    items: list[tuple[str, str]] = []
    for path in args.inputs or []:
        file = Path(path)
        if not file.exists():
            raise MissingFile(f"input file {file} does not exist")
        if file.suffix == ".jsonl":
            with file.open(encoding="utf-8") as handle:
                for lineno, line in enumerate(handle, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError as err:
                        raise MalformedRecord(
                            f"{file}:{lineno}: invalid JSON: {err}", line_number=lineno
                        ) from err
                    if not isinstance(record, dict) or "code" not in record:
                        raise MalformedRecord(
                            f"{file}:{lineno}: record must be an object with a "
                            "\"code\" field", line_number=lineno,
                        )
                    items.append((f"{file}:{lineno}", record["code"]))
        else:
            items.append((str(file), file.read_text(encoding="utf-8")))
    for i, code in enumerate(args.code or []):
        items.append((f"--code[{i}]", code))
    if not items:
        raise ValueError("no input programs; pass files or --code")
    return items


def _estimator_kwargs(config_values: dict, allowed: set[str]) -> dict:
    kwargs = {}
    for key, value in config_values.items():
        if key in _DERIVED_KEYS:
            print(f"warning: config key {key} is derived from data; ignored",
                  file=sys.stderr)
        elif key in allowed:
            kwargs[key] = value
        else:
            print(f"warning: config key {key} does not apply to this task; ignored",
                  file=sys.stderr)
    return kwargs


_SHARED_KEYS = {
    "token_dim", "hier_dim", "seq_model_dim", "heads", "hier_layers",
    "seq_layers", "ff_factor", "max_len", "max_path_depth", "dropout",
    "vocab_size", "lr", "weight_decay", "beta1", "beta2", "eps",
    "batch_size", "epochs", "patience", "clip_norm", "seed",
}
_CLASSIFIER_KEYS = _SHARED_KEYS
_GENERATOR_KEYS = _SHARED_KEYS | {"dec_layers", "target_vocab_size"}


def _load_estimator(checkpoint: str):
    """Load the right estimator for a checkpoint, returning (estimator, task)."""
    _, _, extra = load_checkpoint(checkpoint)
    task = extra.get("task", "classify")
    if task == "namegen":
        return HiTNameGenerator.load(checkpoint), task
    return HiTClassifier.load(checkpoint), task


def _json_scalar(value):
    """Coerce numpy scalars to plain Python for JSON output."""
    return value.item() if hasattr(value, "item") else value


def cmd_extract(args) -> int:
    config_values = _read_config_values(args.config)
    mode = _resolve_mode(args, config_values)
    records = []
    for origin, code in _iter_input_programs(args):
        try:
            program = tokenize_strict(code, args.language)
        except Exception as err:
            raise ValueError(f"{origin}: {err}") from err
        records.append(program_to_record(project_hierarchy(program, mode)))
    out = _open_out(args.out)
    try:
        for record in records:
            _emit(out, record)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_train(args) -> int:
    config_values = _read_config_values(args.config)
    mode = _resolve_mode(args, config_values)
    seed = _resolve_seed(args, config_values)

    if args.data is None:
        if not args.param_report:
            raise ValueError("--data is required to train")
        # Report-only invocation: size the model from config alone.
        model_values = {
            k: v for k, v in config_values.items()
            if k in _MODEL_KEYS and k != "hierarchy_mode"
        }
        config = HiTConfig(**model_values, hierarchy_mode=mode)
        report = param_report(HiTClassifierModel(config))
        _emit(sys.stdout, {"param_report": report})
        return EXIT_OK

    task = _require_task(args, ("classify", "clone", "namegen"))
    dataset = load_dataset(args.data, task, seed=seed, language=args.language)
    if not dataset.train:
        raise ValueError(f"no training examples in {args.data}")

    X_train = [ex.program for ex in dataset.train]
    if args.valid_data is not None:
        valid_examples = load_dataset(
            args.valid_data, task, seed=seed, language=args.language
        ).all_examples()
    else:
        valid_examples = dataset.valid
    X_valid = [ex.program for ex in valid_examples] or None

    if task == "namegen":
        est = HiTNameGenerator(
            **_estimator_kwargs(config_values, _GENERATOR_KEYS),
            hierarchy_mode=mode, language=args.language,
        )
        y_train = [ex.name for ex in dataset.train]
        y_valid = [ex.name for ex in valid_examples] if X_valid else None
    else:
        est = HiTClassifier(
            **_estimator_kwargs(config_values, _CLASSIFIER_KEYS),
            hierarchy_mode=mode, language=args.language,
        )
        y_train = [dataset.label_names[ex.label] for ex in dataset.train]
        y_valid = (
            [dataset.label_names[ex.label] for ex in valid_examples]
            if X_valid else None
        )
    if args.seed is not None:
        est.seed = args.seed

    est.fit(X_train, y_train, X_valid=X_valid, y_valid=y_valid,
            report_path=args.report)
    if task == "namegen":
        est.save(args.out)
    else:
        est.save(args.out, task=task)

    result = est.result_
    summary = {
        "task": task,
        "checkpoint": str(args.out),
        "hierarchy_mode": mode,
        "train_examples": len(X_train),
        "valid_examples": len(X_valid) if X_valid else 0,
        "skipped_records": dataset.skipped,
        "epochs_run": len(result.history),
        "best_epoch": result.best_epoch,
        "best_metric": result.best_metric,
        "stopped_early": result.stopped_early,
    }
    if args.param_report:
        summary["param_report"] = param_report(est.model_)
    _emit(sys.stdout, summary)
    return EXIT_OK


def _eval_examples(dataset, split: str):
    if split == "all":
        return dataset.all_examples()
    return dataset.split(split)


def cmd_eval(args) -> int:
    config_values = _read_config_values(args.config)
    seed = _resolve_seed(args, config_values)
    task = _require_task(args, ("classify", "clone", "namegen"))
    dataset = load_dataset(args.data, task, seed=seed, language=args.language)
    examples = _eval_examples(dataset, args.split)
    if not examples:
        raise ValueError(f"split {args.split!r} of {args.data} is empty")

    est, ckpt_task = _load_estimator(args.checkpoint)
    if task == "namegen" and not isinstance(est, HiTNameGenerator):
        raise ValueError(f"checkpoint {args.checkpoint} holds a {ckpt_task} model")
    if task != "namegen" and isinstance(est, HiTNameGenerator):
        raise ValueError(f"checkpoint {args.checkpoint} holds a namegen model")

    X = [ex.program for ex in examples]
    breakdown_path = Path(args.out).with_suffix(".per_query.jsonl")
    rows = []

    if task == "classify":
        predictions = [_json_scalar(p) for p in est.predict(X)]
        targets = [dataset.label_names[ex.label] for ex in examples]
        metrics = {"accuracy": accuracy(predictions, targets)}
        rows = [
            {"index": i, "target": t, "predicted": p, "correct": p == t}
            for i, (t, p) in enumerate(zip(targets, predictions))
        ]
    elif task == "clone":
        labels = [ex.label for ex in examples]
        result = map_at_r(est.embed(X), labels)
        metrics = {
            "map_at_r": result.mean,
            "skipped_queries": len(result.skipped),
        }
        rows = [
            {"index": i, "label": labels[i], "ap_at_r": ap}
            for i, ap in enumerate(result.per_query)
        ]
    else:
        predicted = est.predict_subtokens(X)
        targets = [subtokenize_name(ex.name) for ex in examples]
        micro = corpus_subtoken_prf(list(zip(predicted, targets)))
        exact = sum(p == t for p, t in zip(predicted, targets)) / len(targets)
        metrics = {
            "precision": micro.precision, "recall": micro.recall,
            "f1": micro.f1, "exact_match": exact,
        }
        for i, (p, t) in enumerate(zip(predicted, targets)):
            prf = subtoken_prf(p, t)
            rows.append({
                "index": i, "target": t, "predicted": p,
                "precision": prf.precision, "recall": prf.recall, "f1": prf.f1,
            })

    with breakdown_path.open("w", encoding="utf-8") as handle:
        for row in rows:
            _emit(handle, row)
    report = {
        "task": task,
        "split": args.split,
        "n_examples": len(examples),
        "metrics": metrics,
        "breakdown_path": str(breakdown_path),
    }
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _emit(sys.stdout, report)
    return EXIT_OK


def cmd_predict(args) -> int:
    est, ckpt_task = _load_estimator(args.checkpoint)
    task = args.task if args.task is not None else ckpt_task
    if task not in ("classify", "clone", "namegen"):
        raise ValueError(f"cannot predict for task {task!r}")
    if (task == "namegen") != isinstance(est, HiTNameGenerator):
        raise ValueError(
            f"checkpoint {args.checkpoint} holds a {ckpt_task} model, "
            f"which cannot serve task {task!r}"
        )

    codes = [code for _, code in _iter_input_programs(args)]
    out = _open_out(args.out)
    try:
        if task == "namegen":
            for subs in est.predict_subtokens(codes):
                _emit(out, {"name_subtokens": subs, "name": join_camel_case(subs)})
        elif task == "clone":
            for row in est.embed(codes):
                _emit(out, {"embedding": [float(x) for x in row]})
        else:
            proba = est.predict_proba(codes)
            for row in proba:
                label = est.classes_[int(row.argmax())]
                _emit(out, {
                    "label": _json_scalar(label),
                    "probs": [float(x) for x in row],
                })
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_probe(args) -> int:
    from .scope import run_probe

    config_values = _read_config_values(args.config)
    mode = _resolve_mode(args, config_values)
    seed = _resolve_seed(args, config_values)
    dataset = load_dataset(args.data, "scope", seed=seed, language=args.language)
    programs = [ex.program for ex in dataset.all_examples()]
    if not programs:
        raise ValueError(f"no usable programs in {args.data}")
    report = run_probe(
        args.checkpoint, programs, mode=mode,
        pairs_per_program=args.pairs_per_program, seed=seed,
        epochs=args.epochs, lr=args.lr,
    )
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n",
                                  encoding="utf-8")
    _emit(sys.stdout, report)
    return EXIT_OK


def cmd_synth(args) -> int:
    config_values = _read_config_values(args.config)
    seed = _resolve_seed(args, config_values)
    task = _require_task(args, SYNTH_TASKS)
    records = generate_synthetic(task, args.size, seed)
    count = write_jsonl(records, args.out)
    _emit(sys.stdout, {"task": task, "size": count, "path": str(args.out)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiercode",
        description="Hierarchy-aware transformer models over concrete syntax trees",
    )
    _add_common_flags(parser, top_level=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="emit tokens and hierarchy paths as JSONL")
    _add_common_flags(p, top_level=False)
    p.add_argument("inputs", nargs="*", metavar="FILE",
                   help="source files, or .jsonl files with a \"code\" field")
    p.add_argument("--code", action="append", metavar="SRC",
                   help="inline source string (repeatable)")
    p.add_argument("--language", default="python")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    _add_common_flags(p, top_level=False)
    p.add_argument("--data", default=None, metavar="JSONL",
                   help="training dataset (required unless only --param-report)")
    p.add_argument("--valid-data", default=None, metavar="JSONL",
                   help="validation dataset (default: the data file's valid split)")
    p.add_argument("--out", default="model.hit", metavar="CKPT",
                   help="checkpoint path to write")
    p.add_argument("--language", default="python")
    p.add_argument("--report", default=None, metavar="CSV",
                   help="per-epoch training report path")
    p.add_argument("--param-report", action="store_true",
                   help="print parameter counts (usable without --data)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and write a JSON report")
    _add_common_flags(p, top_level=False)
    p.add_argument("--data", required=True, metavar="JSONL")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--out", default="report.json", metavar="JSON")
    p.add_argument("--split", default="test",
                   choices=("train", "valid", "test", "all"))
    p.add_argument("--language", default="python")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("predict", help="run inference over programs")
    _add_common_flags(p, top_level=False)
    p.add_argument("inputs", nargs="*", metavar="FILE",
                   help="source files, or .jsonl files with a \"code\" field")
    p.add_argument("--code", action="append", metavar="SRC",
                   help="inline source string (repeatable)")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("probe", help="variable-scope probe over a frozen encoder")
    _add_common_flags(p, top_level=False)
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--data", required=True, metavar="JSONL",
                   help="scope dataset (records with \"code\")")
    p.add_argument("--pairs-per-program", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--language", default="python")
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(handler=cmd_probe)

    p = sub.add_parser("synth", help="write a synthetic dataset as JSONL")
    _add_common_flags(p, top_level=False)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--out", required=True, metavar="JSONL")
    p.set_defaults(handler=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (MissingFile, MissingCheckpoint) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except DivergedTraining as err:
        print(f"error: training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except MalformedRecord as err:
        where = f" (line {err.line_number})" if err.line_number is not None else ""
        print(f"error: {err}{where}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (HiercodeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
