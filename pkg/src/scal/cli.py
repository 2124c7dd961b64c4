"""``scal`` command line: corpus synthesis, fingerprints, decomposition,
training, prediction, evaluation, attacks, pruning and the risk lab.

Every subcommand accepts ``--seed``, ``--threads``, ``--config`` (a
``key = value`` file whose keys are flag names) and ``-v``/``-q``. Flags on
the command line override the config file. The effective configuration is
echoed into every artifact, either as ``# key=value`` lines or inside the
model manifest. Output paths are not echoed, so the same run written to
two places gives identical bytes.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .adversarial import AttackBudget, FeatureScaler, attack_sweep
from .cart import TreeParams
from .cascade import (
    BaselineModel,
    CompressionParams,
    ScalModel,
    fit_cascade,
    load_model,
    prune_model,
    save_model,
    train,
    train_forest,
    train_global_tree,
    train_pseudo,
)
from .compressor import profile, save_models, train_class_models
from .dataset import DataError, Dataset, block_spec, generate_synthetic, load_csv, save_csv, split
from .decomposition import SubproblemPartition, cluster, correlation_matrix, select_k
from .metrics import evaluate, fmt, mean_std, write_table
from .risk_lab import disjoint_world, estimate_risks, learned_world, sweep_correlation, world_for_rho

log = logging.getLogger("scal")

SCALER_FILE = "scaler.bin"
MODES = ("scal", "pseudo", "global-tree", "forest")
# never echoed: where things are written and how chatty the run is
_NOT_ECHOED = {"command", "func", "config", "out", "verbose", "quiet"}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument parsing


def _k_value(text: str):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be >= 1")
    return k


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("train fraction must be in (0, 1)")
    return v


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    g.add_argument("--threads", type=int, default=None, help="cap on worker threads (default: all cores)")
    g.add_argument("--config", type=Path, default=None, help="key = value file; flags override it")
    g.add_argument("-v", "--verbose", action="count", default=0)
    g.add_argument("-q", "--quiet", action="store_true")
    return p


def _data_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--data", type=Path, required=required, help="CSV: label,ttl,total_length,protocol,duration,payload_b64")
    p.add_argument("--train-fraction", type=_fraction, default=0.75)


def _tree_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--min-gain", type=float, default=1e-7)
    p.add_argument("--estimators", type=int, default=100, help="forest size (mode forest)")


def _compression_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dict-size", type=int, default=CompressionParams.dict_size)
    p.add_argument("--max-dict-samples", type=int, default=CompressionParams.max_dict_samples)
    p.add_argument("--level", type=int, default=CompressionParams.level)


def _subset_arg(p: argparse.ArgumentParser, default: str) -> None:
    p.add_argument("--subset", choices=("test", "all"), default=default,
                   help="rows of --data to use: the held-out split of the model's training run, or all")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="scal", description="Correlation-aware divide-and-conquer payload classifier")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic block-correlated corpus")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--per-class", type=int, default=1000)
    p.add_argument("--counts", type=_ints, default=None, help="per-class sizes, overriding --per-class")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--source", choices=("markov", "template"), default="markov")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fingerprint", parents=[common], help="train per-class compressors and fingerprint held-out rows")
    _data_args(p)
    _compression_args(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("decompose", parents=[common], help="class correlation and subproblem partition")
    _data_args(p)
    _compression_args(p)
    _tree_args(p)
    p.add_argument("--k", type=_k_value, default="auto")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--out", type=Path, required=True, help="partition JSON")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", parents=[common], help="train a model directory")
    _data_args(p)
    _compression_args(p)
    _tree_args(p)
    p.add_argument("--mode", choices=MODES, default="scal")
    p.add_argument("--k", type=_k_value, default="auto")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--prune-budget", type=float, default=None,
                   help="grow on 80%% of the training split and prune on the rest with this accuracy-loss budget")
    p.add_argument("--out", type=Path, required=True, help="model directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="per-row predictions as CSV row,route,pred,prob_max")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    _subset_arg(p, "all")
    p.add_argument("--out", type=Path, default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="accuracy, macro F1, per-class F1 and model cost")
    p.add_argument("--model", type=Path, default=None)
    _data_args(p)
    _compression_args(p)
    _tree_args(p)
    p.add_argument("--mode", choices=MODES, default=None, help="retrain this mode (needed without --model)")
    p.add_argument("--k", type=_k_value, default="auto")
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--repeats", type=int, default=1, help="retrain with seeds 0..N-1 and report mean and std")
    _subset_arg(p, "test")
    p.add_argument("--record-time", action="store_true", help="include training seconds (not reproducible)")
    p.add_argument("--out", type=Path, default=None, help="CSV report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", parents=[common], help="black-box or grey-box L-inf attack")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--eps", type=_floats, required=True, help="budget(s) in normalized units; a list runs a warm-started sweep")
    p.add_argument("--iters", type=int, default=1000, help="query budget per instance (grey-box splits it over two phases)")
    p.add_argument("--p-init", type=float, default=0.1)
    p.add_argument("--mode", choices=("auto", "blackbox", "greybox"), default="auto")
    p.add_argument("--limit", type=int, default=None, help="attack a seeded random sample of N rows of the subset")
    _subset_arg(p, "test")
    p.add_argument("--out", type=Path, required=True, help="report CSV")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("prune", parents=[common], help="cost-complexity prune a model against held-out rows")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--prune-budget", type=float, default=0.0, help="allowed holdout accuracy loss")
    _subset_arg(p, "test")
    p.add_argument("--out", type=Path, required=True, help="pruned model directory")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("theory-check", parents=[common], help="Monte-Carlo excess-risk table over subtask correlation")
    p.add_argument("--rho-levels", type=_floats, default=[0.0, 0.2, 0.5, 0.8])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--p1", type=float, default=0.3)
    p.add_argument("--p2", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--learned", action="store_true", help="use CART subtasks instead of the exact region classifiers")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_theory_check)
    return parser


def read_config(path: Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:  # store_true / count
            defaults[key] = value.lower() in ("1", "true", "yes", "on") if action.const is True else int(value)
        else:
            try:
                defaults[key] = action.type(value) if action.type else value
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
    sub.set_defaults(**defaults)


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, cfg)
        args = parser.parse_args(argv)
    return args


def effective_config(args: argparse.Namespace) -> dict[str, str]:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in _NOT_ECHOED:
            continue
        if value is None:
            value = "auto" if key == "threads" else "none"
        elif isinstance(value, list):
            value = ",".join(fmt(v) for v in value)
        else:
            value = fmt(value)
        out[key] = value
    return out


# --------------------------------------------------------------------------
# helpers shared by commands


def _tree_params(args) -> TreeParams:
    return TreeParams(max_depth=args.max_depth, min_leaf=args.min_leaf, min_gain=args.min_gain)


def _compression(args) -> CompressionParams:
    return CompressionParams(args.dict_size, args.max_dict_samples, args.level)


def _load_data(path: Path) -> Dataset:
    return load_csv(path)


def _fit(mode: str, data: Dataset, args, seed: int):
    params = _tree_params(args)
    if mode == "scal":
        return train(data, args.k, params, seed=seed, k_max=args.k_max, compression=_compression(args),
                     threads=args.threads)
    if mode == "pseudo":
        if args.k == "auto":
            raise UsageError("pseudo mode needs an integer --k")
        if args.k == 1:
            return fit_cascade(data, SubproblemPartition.single(data.n_classes), params, seed=seed,
                               threads=args.threads, mode="pseudo")
        return train_pseudo(data, args.k, params, seed=seed, threads=args.threads)
    if mode == "global-tree":
        return train_global_tree(data, params, seed=seed)
    return train_forest(data, args.estimators, replace(params, max_features="sqrt"), seed=seed,
                        threads=args.threads)


def _model_split(model, data: Dataset, subset: str) -> Dataset:
    """The rows named by ``subset``, recomputing the model's own train/test split."""
    if list(model.classes) != list(data.classes):
        raise DataError(f"class domain mismatch: model {list(model.classes)} vs data {list(data.classes)}")
    if subset == "all":
        return data
    cfg = model.config or {}
    fraction = float(cfg.get("train_fraction", 0.75))
    seed = int(cfg.get("seed", model.seed))
    return split(data, fraction, seed)[1]


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _table_text(rows, preamble) -> str:
    buf = io.StringIO()
    write_table(rows, buf, preamble)
    return buf.getvalue()


_quiet = False


def _say(text: str) -> None:
    """Human-readable summary line; -q drops these but never data written to stdout."""
    if not _quiet:
        print(text)


def _print_pairs(pairs: Sequence[tuple[str, object]]) -> None:
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        _say(f"{k:<{width}}  {fmt(v)}")


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> None:
    if args.groups < 1 or args.classes % args.groups:
        raise UsageError("--classes must be a positive multiple of --groups")
    per_group = args.classes // args.groups
    counts = args.counts if args.counts is not None else args.per_class
    spec = block_spec(args.groups, per_group, counts, args.overlap, args.source, args.noise)
    data = generate_synthetic(spec, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(data, args.out)
    sidecar = args.out.with_name(args.out.name + ".config")
    sidecar.write_text("".join(f"# {k}={v}\n" for k, v in effective_config(args).items()), encoding="utf-8")
    log.info("wrote %d rows over %d classes to %s", len(data), data.n_classes, args.out)


def cmd_fingerprint(args) -> None:
    data = _load_data(args.data)
    tr, te = split(data, args.train_fraction, args.seed)
    models = train_class_models(tr, args.dict_size, args.max_dict_samples, args.level, seed=args.seed,
                                threads=args.threads)
    save_models(models, args.out, data.classes, args.max_dict_samples, args.seed)
    prof = profile(te, models)
    own_min = prof.rows.argmin(axis=1) == te.y
    rows = []
    for i in range(len(te)):
        row = {"row": i, "label": te.classes[te.y[i]]}
        row.update({f"len[{c}]": int(v) for c, v in zip(te.classes, prof.rows[i])})
        row["own_is_min"] = int(own_min[i])
        rows.append(row)
    pre = effective_config(args)
    pre["own_class_min_fraction"] = fmt(float(own_min.mean()))
    _write_text(args.out / "fingerprints.csv", _table_text(rows, pre))
    _print_pairs([("held_out_rows", len(te)), ("own_class_min_fraction", float(own_min.mean()))])


def cmd_decompose(args) -> None:
    data = _load_data(args.data)
    tr, _ = split(data, args.train_fraction, args.seed)
    models = train_class_models(tr, args.dict_size, args.max_dict_samples, args.level, seed=args.seed,
                                threads=args.threads)
    prof = profile(tr, models)
    corr = correlation_matrix(prof)
    if args.k == "auto":
        part = select_k(tr, prof, corr, args.k_max, seed=args.seed, params=_tree_params(args),
                        threads=args.threads)
    else:
        if args.k > data.n_classes:
            raise UsageError(f"--k must be at most the number of classes ({data.n_classes})")
        part = cluster(corr, args.k)
    out = {
        "config": effective_config(args),
        "classes": list(data.classes),
        "correlation": [[float(fmt(v)) for v in row] for row in corr],
        "partition": part.to_dict(data.classes),
    }
    _write_text(args.out, json.dumps(out, indent=1, sort_keys=True) + "\n")
    _say(f"k={part.k} groups=" + " | ".join(",".join(data.classes[c] for c in g) for g in part.groups))


def cmd_train(args) -> None:
    data = _load_data(args.data)
    tr, _ = split(data, args.train_fraction, args.seed)
    grow, holdout = (tr, None) if args.prune_budget is None else split(tr, 0.8, args.seed)
    model = _fit(args.mode, grow, args, args.seed)
    if holdout is not None:
        model = prune_model(model, holdout, args.prune_budget)
    model.config = effective_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    (args.out / SCALER_FILE).write_bytes(FeatureScaler.fit(tr.X).to_bytes())
    pairs = [("mode", args.mode), ("n_nodes", model.n_nodes), ("model_bytes", model.serialized_bytes)]
    if isinstance(model, ScalModel):
        pairs.insert(1, ("k", model.k))
    _print_pairs(pairs)


def cmd_predict(args) -> None:
    model = load_model(args.model)
    data = _model_split(model, _load_data(args.data), args.subset)
    if isinstance(model, ScalModel):
        pred, proba, routes = model.infer_batch(data.X)
    else:
        proba = model.predict_proba(data.X)
        pred, routes = model.predict(data.X), np.zeros(len(data), dtype=np.int64)
    rows = [{"row": i, "route": int(routes[i]), "pred": model.classes[pred[i]], "prob_max": float(proba[i].max())}
            for i in range(len(data))]
    _write_text(args.out, _table_text(rows, effective_config(args)))


def _report_pairs(report) -> list[tuple[str, object]]:
    return list(report.summary().items())


def cmd_eval(args) -> None:
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    data = _load_data(args.data)
    model = load_model(args.model) if args.model is not None else None
    pre = effective_config(args)
    if args.repeats == 1 and model is not None:
        test = _model_split(model, data, args.subset)
        rep = evaluate(model, test, record_time=args.record_time)
        pre["model_mode"] = model.mode
        pre["probabilities"] = "leaf class frequencies (uncalibrated)"
        pre["f1_averaging"] = "macro"
        rows = [{"metric": k, "value": v} for k, v in rep.summary().items()]
        _print_pairs(_report_pairs(rep))
        if args.out is not None:
            _write_text(args.out, _table_text(rows, pre))
        return

    mode = args.mode or (model.mode if model is not None else None)
    if mode is None:
        raise UsageError("eval needs --model or --mode")
    if model is not None and args.mode is None:
        # retrain with the stored model's hyperparameters
        stored = model.config or {}
        for key in ("k", "k_max", "max_depth", "min_leaf", "min_gain", "estimators", "dict_size",
                    "max_dict_samples", "level", "train_fraction"):
            if key in stored and stored[key] != "none":
                setattr(args, key, _k_value(stored[key]) if key == "k" else type_of(key)(stored[key]))
        pre = effective_config(args)
    summaries = []
    for seed in range(args.repeats):
        tr, te = split(data, args.train_fraction, seed)
        m = _fit(mode, tr, args, seed)
        summaries.append(evaluate(m, te, record_time=args.record_time).summary())
        log.info("repeat %d: macro_f1=%.4f", seed, summaries[-1]["macro_f1"])
    rows = []
    for key in summaries[0]:
        mean, std = mean_std([s[key] for s in summaries])
        rows.append({"metric": key, "mean": mean, "std": std})
    pre["model_mode"] = mode
    pre["f1_averaging"] = "macro"
    pre["repeat_seeds"] = f"0..{args.repeats - 1}"
    width = max(len(r["metric"]) for r in rows)
    for r in rows:
        _say(f"{r['metric']:<{width}}  {fmt(r['mean'])} ± {fmt(r['std'])}")
    if args.out is not None:
        _write_text(args.out, _table_text(rows, pre))


def type_of(key: str):
    return {"max_depth": int, "min_leaf": int, "min_gain": float, "estimators": int, "dict_size": int,
            "max_dict_samples": int, "level": int, "train_fraction": float, "k_max": int}[key]


def cmd_attack(args) -> None:
    model = load_model(args.model)
    data = _load_data(args.data)
    test = _model_split(model, data, args.subset)
    if args.limit is not None:
        pick = np.random.default_rng(args.seed).permutation(len(test))[:args.limit]
        test = test.subset(np.sort(pick))
    scaler_path = args.model / SCALER_FILE
    if scaler_path.exists():
        scaler = FeatureScaler.from_bytes(scaler_path.read_bytes())
    else:
        cfg = model.config or {}
        tr, _ = split(data, float(cfg.get("train_fraction", 0.75)), int(cfg.get("seed", model.seed)))
        scaler = FeatureScaler.fit(tr.X)
    if args.mode == "greybox" and not isinstance(model, ScalModel):
        raise UsageError("grey-box mode needs a scal or pseudo model")
    budget = AttackBudget(epsilon=0.0, n_iters=args.iters, p_init=args.p_init, seed=args.seed)
    reports = attack_sweep(model, test, args.eps, budget, scaler, args.mode, args.threads)
    clean = model.predict(test.X)
    rows = []
    for rep in reports:
        adv = model.predict(rep.X_adv)
        for i, r in enumerate(rep.results):
            rows.append({
                "epsilon": rep.epsilon, "row": i, "label": test.classes[test.y[i]],
                "clean_pred": test.classes[clean[i]], "adv_pred": test.classes[adv[i]],
                "success": int(r.success), "queries": r.queries_used, "phase": r.phase,
                "linf": scaler.linf(test.X[i], r.adversarial_example),
            })
    text = _table_text(rows, effective_config(args))
    text += "".join(
        f"# aggregate epsilon={fmt(rep.epsilon)} "
        + " ".join(f"{k}={fmt(v)}" for k, v in rep.summary().items() if k != "epsilon")
        + f" mean_queries={fmt(float(np.mean([r.queries_used for r in rep.results])))}\n"
        for rep in reports
    )
    _write_text(args.out, text)
    for rep in reports:
        _print_pairs(list(rep.summary().items()))


def cmd_prune(args) -> None:
    model = load_model(args.model)
    holdout = _model_split(model, _load_data(args.data), args.subset)
    before = model.n_nodes
    acc_before = float(np.mean(model.predict(holdout.X) == holdout.y))
    pruned = prune_model(model, holdout, args.prune_budget)
    acc_after = float(np.mean(pruned.predict(holdout.X) == holdout.y))
    cfg = dict(pruned.config or {})
    cfg.update({f"prune_{k}": v for k, v in effective_config(args).items() if k != "model"})
    pruned.config = cfg
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(pruned, args.out)
    scaler_path = args.model / SCALER_FILE
    if scaler_path.exists():
        (args.out / SCALER_FILE).write_bytes(scaler_path.read_bytes())
    _print_pairs([("nodes_before", before), ("nodes_after", pruned.n_nodes),
                  ("holdout_acc_before", acc_before), ("holdout_acc_after", acc_after)])


def cmd_theory_check(args) -> None:
    if args.learned:
        ests = []
        for i, rho in enumerate(args.rho_levels):
            world = world_for_rho(rho, args.p1, args.p2, noise=args.noise, n_samples=args.samples, seed=args.seed + i)
            est = estimate_risks(learned_world(world, seed=args.seed + i))
            est.target_rho = rho
            ests.append(est)
    else:
        ests = sweep_correlation(args.rho_levels, args.p1, args.p2, args.noise, args.samples, args.seed)
    rows = []
    for est in ests:
        rows.append({"world": f"rho={fmt(est.target_rho)}", **est.summary()})
    dj = disjoint_world(args.p1, args.p2, noise=args.noise, n_samples=args.samples,
                        seed=args.seed + len(args.rho_levels))
    if args.learned:
        dj = learned_world(dj, seed=args.seed + len(args.rho_levels))
    rows.append({"world": "disjoint", **estimate_risks(dj).summary(), "target_rho": ""})
    columns = ["world", "target_rho", "n", "p1", "p2", "p", "rho", "pr_conflict", "err_composite", "err_joint",
               "excess_risk", "predicted_excess", "se_excess", "se_gap", "se_p", "se_p1", "se_p2"]
    rows = [{c: r.get(c, "") for c in columns} for r in rows]
    text = _table_text(rows, effective_config(args))
    _write_text(args.out, text)
    if args.out is not None:
        for r in rows:
            sig = abs(r["excess_risk"] - r["predicted_excess"]) / max(r["se_gap"], 1e-300)
            _say(f"{r['world']:<10} excess={fmt(r['excess_risk'])} predicted={fmt(r['predicted_excess'])} "
                  f"gap/se={sig:.2f}")


# --------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    global _quiet
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"scal: error: usage: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"scal: error: io: {exc}", file=sys.stderr)
        return 1
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    _quiet = args.quiet
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            args.func(args)
    except UsageError as exc:
        print(f"scal: error: usage: {exc}", file=sys.stderr)
        return 2
    except (OSError, DataError) as exc:
        print(f"scal: error: io: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"scal: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
