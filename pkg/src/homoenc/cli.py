"""Command line entry point: gen-data, train, eval, sweep, verify.

Every option can also come from a JSON file passed as --config; explicit
flags win over file values, which win over built-in defaults. The env
var HOMOENC_SEED supplies the seed when no flag or file sets one. Exit
codes: 0 ok, 1 verification failure, 2 usage, 3 I/O, 4 numeric abort.
Output directories are self-describing: the resolved configuration is
written before any compute starts.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import multiprocessing
import os
import sys

from .errors import (
    ConfigError,
    DomainError,
    GradCheckError,
    NumericError,
    ParseError,
    UsageError,
)
from .eval import (
    CSV_HEADER,
    EvalConfig,
    MetricRecord,
    quadrature_joint_nll,
    read_metrics_csv,
    run_metric_suite,
    write_metrics_csv,
)
from .model import FLAT, ModelView, build_model, load_model, save_model
from .objectives import KINDS, ObjectiveSpec
from .synthdata import generate, generate_factorial, generate_hierarchical, load, save
from .train import MODE_FOR_KIND, TrainConfig, select_best, train_multi
from .verify import SUITES, run_suites

_DONE_MARKER = "DONE"
_FAILED_MARKER = "FAILED"


# --- option plumbing ----------------------------------------------------

def _env_seed() -> int:
    raw = os.environ.get("HOMOENC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"HOMOENC_SEED must be an integer, got {raw!r}")


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})")
    if not isinstance(blob, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return blob


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        for key, val in _load_json(args.config).items():
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r}")
            cfg[key] = val
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if "seed" in cfg and cfg["seed"] is None:
        cfg["seed"] = _env_seed()
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    for key in keys:
        if cfg[key] is None:
            flag = "--" + key.replace("_", "-")
            raise UsageError(f"{flag} is required")


def _int_list(value, flag: str) -> list[int]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [p for p in str(value).split(",") if p.strip()]
    try:
        out = [int(v) for v in items]
    except (TypeError, ValueError):
        raise UsageError(f"{flag} expects comma-separated integers, got {value!r}")
    if not out:
        raise UsageError(f"{flag} must list at least one value")
    return out


def _str_list(value, flag: str) -> list[str]:
    if isinstance(value, (list, tuple)):
        items = [str(v) for v in value]
    else:
        items = [p.strip() for p in str(value).split(",") if p.strip()]
    if not items:
        raise UsageError(f"{flag} must list at least one value")
    return items


def _hyper_dict(value) -> dict | None:
    if value is None or isinstance(value, dict):
        return value
    try:
        blob = json.loads(value)
    except json.JSONDecodeError:
        raise UsageError(f"--hyper expects a JSON object, got {value!r}")
    if not isinstance(blob, dict):
        raise UsageError("--hyper expects a JSON object")
    return blob


def _write_config(path: str, cfg: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- gen-data -----------------------------------------------------------

_GEN_DEFAULTS = {
    "structure": "flat", "family": None, "classes": None, "per_class": 20,
    "groups": None, "classes_per_group": None, "contents": None,
    "styles": None, "hyper": None, "seed": None, "out": None,
}

_HYPER_KEYS = {
    "hierarchical": ("tau", "sigma_c", "sigma_x"),
    "factorial": ("content_std", "style_std", "scale"),
}


def _reject_flags(cfg: dict, structure: str, names: tuple) -> None:
    for name in names:
        if cfg[name] is not None:
            flag = "--" + name.replace("_", "-")
            raise UsageError(f"{flag} does not apply to structure {structure!r}")


def cmd_gen_data(cfg: dict) -> int:
    _require(cfg, "out")
    structure = cfg["structure"]
    hyper = _hyper_dict(cfg["hyper"])
    seed = cfg["seed"]
    if structure == "flat":
        _reject_flags(cfg, structure,
                      ("groups", "classes_per_group", "contents", "styles"))
        family = cfg["family"] or "gaussian"
        classes = cfg["classes"] if cfg["classes"] is not None else 20
        dataset = generate(family, classes, cfg["per_class"], seed, hyper)
    elif structure in _HYPER_KEYS:
        _reject_flags(cfg, structure, ("family", "classes"))
        allowed = _HYPER_KEYS[structure]
        extra = {}
        for key, val in (hyper or {}).items():
            if key not in allowed:
                raise UsageError(
                    f"hyper key {key!r} not valid for {structure!r}; "
                    f"valid: {', '.join(allowed)}")
            extra[key] = float(val)
        if structure == "hierarchical":
            _reject_flags(cfg, structure, ("contents", "styles"))
            groups = cfg["groups"] if cfg["groups"] is not None else 4
            cpg = (cfg["classes_per_group"]
                   if cfg["classes_per_group"] is not None else 3)
            dataset = generate_hierarchical(groups, cpg, cfg["per_class"],
                                            seed, **extra)
        else:
            _reject_flags(cfg, structure, ("groups", "classes_per_group"))
            contents = cfg["contents"] if cfg["contents"] is not None else 4
            styles = cfg["styles"] if cfg["styles"] is not None else 3
            dataset = generate_factorial(contents, styles, cfg["per_class"],
                                         seed, **extra)
    else:
        raise UsageError(f"unknown structure {cfg['structure']!r}")
    save(dataset, cfg["out"])
    n_elements = sum(len(rec.elements) for rec in dataset.classes)
    print(f"wrote {cfg['out']}: {len(dataset.classes)} classes, "
          f"{n_elements} elements, structure {structure}, seed {seed}")
    return 0


# --- train --------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "data": None, "objective": None, "d_size": 1, "mc_samples": 1,
    "kl_weight": None, "latent_dim": 1, "z_sees_c": False,
    "epochs": 200, "anneal_epochs": 50, "M": 16, "lr": 1e-2,
    "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "runs": 3,
    "seed": None, "out": None,
}


def _train_into(out_dir: str, cfg: dict):
    """Train per the resolved options and write model/history files."""
    dataset = load(cfg["data"])
    spec = ObjectiveSpec(cfg["objective"], d_size=cfg["d_size"],
                         kl_weight_override=cfg["kl_weight"],
                         mc_samples=cfg["mc_samples"])
    mode = MODE_FOR_KIND.get(spec.kind, FLAT)
    family = dataset.meta["family"]
    z_sees_c = bool(cfg["z_sees_c"])
    train_cfg = TrainConfig(objective=spec, M=cfg["M"], epochs=cfg["epochs"],
                            anneal_epochs=cfg["anneal_epochs"], lr=cfg["lr"],
                            beta1=cfg["beta1"], beta2=cfg["beta2"],
                            eps=cfg["eps"], seed=cfg["seed"],
                            runs=cfg["runs"])

    def init_fn(run_seed: int):
        return build_model(family, latent_dim=cfg["latent_dim"], mode=mode,
                           seed=run_seed, z_sees_c=z_sees_c)

    try:
        histories = train_multi(dataset, init_fn, train_cfg)
    except NumericError as exc:
        with open(os.path.join(out_dir, _FAILED_MARKER), "w",
                  encoding="utf-8") as fh:
            fh.write(f"{exc}\n")
        raise
    best = select_best(histories)
    save_model(best.model, os.path.join(out_dir, "model.json"))
    if best.aux is not None:
        save_model(best.aux, os.path.join(out_dir, "aux.json"))
    with open(os.path.join(out_dir, "history.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "epoch", "loss", "kl", "weight"])
        for run, hist in enumerate(histories):
            for epoch, (loss, kl, w) in enumerate(
                    zip(hist.losses, hist.kls, hist.weights)):
                writer.writerow([run, epoch, f"{loss:.17g}", f"{kl:.17g}",
                                 f"{w:.17g}"])
    return best, histories


def cmd_train(cfg: dict) -> int:
    _require(cfg, "data", "objective", "out")
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    resolved = dict(cfg, command="train")
    _write_config(os.path.join(out_dir, "config.json"), resolved)
    best, histories = _train_into(out_dir, cfg)
    run = histories.index(best)
    print(f"trained {cfg['objective']} on {cfg['data']}: best of "
          f"{len(histories)} runs is run {run} (seed {best.seed}), "
          f"final loss {best.losses[-1]:.6g}; wrote {out_dir}")
    return 0


# --- eval ---------------------------------------------------------------

_EVAL_DEFAULTS = {
    "model": None, "data": None, "d_sizes": "1", "objective": None,
    "k": 200, "mc_outer": 20, "n_way": 2, "episodes_per_class": 10,
    "held_per_class": 10, "nodes": 64, "oracle": None,
    "seed": None, "out": None,
}


def _objective_tag(cfg: dict) -> str:
    if cfg["objective"] is not None:
        return cfg["objective"]
    sidecar = os.path.join(os.path.dirname(cfg["model"]) or ".", "config.json")
    if os.path.exists(sidecar):
        tag = _load_json(sidecar).get("objective")
        if tag:
            return str(tag)
    raise UsageError("cannot determine the objective tag for the metrics "
                     "rows; pass --objective")


def _eval_records(view: ModelView, dataset, cfg: dict,
                  objective: str) -> list[MetricRecord]:
    d_sizes = _int_list(cfg["d_sizes"], "--d-sizes")
    latent_dim = view.meta["latent_dim"]
    oracle = cfg["oracle"]
    if oracle is not None and oracle != "quadrature":
        raise UsageError(f"unknown oracle {oracle!r}; valid: quadrature")
    if oracle == "quadrature" and latent_dim > 2:
        raise UsageError("the quadrature oracle supports latent_dim <= 2, "
                         f"got {latent_dim}")
    records = []
    for d in d_sizes:
        eval_cfg = EvalConfig(d_size=d, k=cfg["k"], mc_outer=cfg["mc_outer"],
                              n_way=cfg["n_way"], nodes=cfg["nodes"],
                              seed=cfg["seed"],
                              held_per_class=cfg["held_per_class"],
                              episodes_per_class=cfg["episodes_per_class"])
        records.extend(run_metric_suite(view, dataset, eval_cfg, objective))
        if oracle == "quadrature":
            vals = [quadrature_joint_nll(view, rec.elements, cfg["nodes"])
                    for rec in dataset.classes]
            records.append(MetricRecord(
                objective, dataset.meta["family"], d, latent_dim,
                cfg["seed"], "quadrature_joint_nll",
                sum(vals) / len(vals)))
    return records


def _write_or_append(records: list[MetricRecord], path: str) -> None:
    if os.path.exists(path) and os.path.getsize(path) > 0:
        read_metrics_csv(path)  # existing rows must parse under the schema
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for r in records:
                writer.writerow([r.objective, r.family, r.d_size,
                                 r.latent_dim, r.seed, r.metric,
                                 f"{r.value:.17g}"])
    else:
        write_metrics_csv(records, path)


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "model", "data", "out")
    view = ModelView(load_model(cfg["model"]))
    dataset = load(cfg["data"])
    objective = _objective_tag(cfg)
    records = _eval_records(view, dataset, cfg, objective)
    _write_or_append(records, cfg["out"])
    print(f"evaluated {cfg['model']} on {cfg['data']}: "
          f"{len(records)} rows -> {cfg['out']}")
    return 0


# --- sweep --------------------------------------------------------------

_SWEEP_DEFAULTS = {
    "objectives": None, "families": None, "d_sizes": None, "out": None,
    "classes": 20, "per_class": 20, "latent_dim": 1, "mc_samples": 1,
    "kl_weight": None, "epochs": 30, "anneal_epochs": 10, "M": 16,
    "lr": 1e-2, "runs": 1, "jobs": 1, "eval_d_sizes": None, "k": 50,
    "mc_outer": 10, "n_way": 2, "episodes_per_class": 5,
    "held_per_class": 5, "seed": None,
}


def _error_code(exc: Exception) -> int:
    if isinstance(exc, (UsageError, ConfigError, DomainError)):
        return 2
    if isinstance(exc, (ParseError, OSError)):
        return 3
    if isinstance(exc, NumericError):
        return 4
    return 1


def _run_cell(payload: dict):
    """One sweep cell: train, then evaluate, then drop the marker file."""
    cell_dir = payload["dir"]
    try:
        os.makedirs(cell_dir, exist_ok=True)
        _write_config(os.path.join(cell_dir, "config.json"),
                      {k: v for k, v in payload.items() if k != "dir"})
        best, _ = _train_into(cell_dir, payload)
        dataset = load(payload["data"])
        view = ModelView(best.model)
        eval_cfg = dict(payload, d_sizes=payload["eval_d_sizes"], oracle=None)
        records = _eval_records(view, dataset, eval_cfg, payload["objective"])
        write_metrics_csv(records, os.path.join(cell_dir, "metrics.csv"))
        with open(os.path.join(cell_dir, _DONE_MARKER), "w",
                  encoding="utf-8") as fh:
            fh.write("done\n")
        return payload["cell"], 0, ""
    except (UsageError, ConfigError, DomainError, ParseError, NumericError,
            OSError) as exc:
        return payload["cell"], _error_code(exc), str(exc)


def cmd_sweep(cfg: dict) -> int:
    _require(cfg, "objectives", "families", "d_sizes", "out")
    objectives = _str_list(cfg["objectives"], "--objectives")
    families = _str_list(cfg["families"], "--families")
    d_sizes = _int_list(cfg["d_sizes"], "--d-sizes")
    for obj in objectives:
        if obj not in KINDS:
            raise UsageError(f"unknown objective {obj!r}")
        if MODE_FOR_KIND.get(obj, FLAT) != FLAT and obj != "vhe_z":
            raise UsageError(
                f"objective {obj!r} needs structured data; the sweep grid "
                "runs flat families only")
    if "vhe_z" in objectives:
        bad = [f for f in families if f != "gaussian"]
        if bad:
            raise UsageError(
                f"objective 'vhe_z' is defined on the gaussian family only; "
                f"drop it or remove {', '.join(bad)}")
    if cfg["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")

    out_dir = cfg["out"]
    data_dir = os.path.join(out_dir, "data")
    cells_dir = os.path.join(out_dir, "cells")
    os.makedirs(data_dir, exist_ok=True)
    os.makedirs(cells_dir, exist_ok=True)
    _write_config(os.path.join(out_dir, "config.json"),
                  dict(cfg, command="sweep"))

    seed = cfg["seed"]
    data_paths = {}
    for i, family in enumerate(families):
        path = os.path.join(data_dir, f"{family}.jsonl")
        if not os.path.exists(path):
            save(generate(family, cfg["classes"], cfg["per_class"], seed + i),
                 path)
        data_paths[family] = path

    grid = list(itertools.product(objectives, families, d_sizes))
    payloads, skipped = [], 0
    for idx, (obj, family, d) in enumerate(grid):
        cell = f"{obj}-{family}-d{d}"
        cell_dir = os.path.join(cells_dir, cell)
        if os.path.exists(os.path.join(cell_dir, _DONE_MARKER)):
            skipped += 1
            continue
        payloads.append({
            "cell": cell, "dir": cell_dir, "data": data_paths[family],
            "objective": obj, "d_size": d, "latent_dim": cfg["latent_dim"],
            "mc_samples": cfg["mc_samples"], "kl_weight": cfg["kl_weight"],
            "z_sees_c": False, "epochs": cfg["epochs"],
            "anneal_epochs": cfg["anneal_epochs"], "M": cfg["M"],
            "lr": cfg["lr"], "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
            "runs": cfg["runs"], "seed": seed + 101 + idx,
            "eval_d_sizes": (cfg["eval_d_sizes"] or str(d)), "k": cfg["k"],
            "mc_outer": cfg["mc_outer"], "n_way": cfg["n_way"],
            "episodes_per_class": cfg["episodes_per_class"],
            "held_per_class": cfg["held_per_class"], "nodes": 64,
        })

    if cfg["jobs"] > 1 and len(payloads) > 1:
        with multiprocessing.Pool(cfg["jobs"]) as pool:
            outcomes = pool.map(_run_cell, payloads)
    else:
        outcomes = [_run_cell(p) for p in payloads]

    failures = [{"cell": cell, "code": code, "error": message}
                for cell, code, message in outcomes if code != 0]
    with open(os.path.join(out_dir, "failures.json"), "w",
              encoding="utf-8") as fh:
        json.dump(sorted(failures, key=lambda f: f["cell"]), fh, indent=2)
        fh.write("\n")

    merged = []
    completed = 0
    for obj, family, d in grid:
        cell_dir = os.path.join(cells_dir, f"{obj}-{family}-d{d}")
        if os.path.exists(os.path.join(cell_dir, _DONE_MARKER)):
            merged.extend(read_metrics_csv(os.path.join(cell_dir,
                                                        "metrics.csv")))
            completed += 1
    write_metrics_csv(merged, os.path.join(out_dir, "metrics.csv"))

    print(f"sweep over {len(grid)} cells: {completed} complete "
          f"({skipped} reused), {len(failures)} failed; "
          f"{len(merged)} metric rows -> {os.path.join(out_dir, 'metrics.csv')}")
    for failure in failures:
        print(f"  failed {failure['cell']}: {failure['error']}",
              file=sys.stderr)
    return failures[0]["code"] if failures else 0


# --- verify -------------------------------------------------------------

def cmd_verify(cfg: dict) -> int:
    results = run_suites(cfg["suite"])
    width = max(len(f"{r.suite}/{r.name}") for r in results)
    for r in results:
        flag = "ok" if r.passed else "FAIL"
        print(f"{r.suite + '/' + r.name:<{width}}  "
              f"{r.value: .3e} <= {r.tolerance: .3e}  {flag}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results)} properties, {len(failed)} failed")
    for r in failed:
        print(f"failed: {r.suite}/{r.name} measured {r.value:.6e} "
              f"exceeds tolerance {r.tolerance:.6e}", file=sys.stderr)
    return 1 if failed else 0


# --- parser & dispatch --------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file of option values; "
                        "explicit flags win")
    parser.add_argument("--seed", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homoenc",
        description="episodic variational objectives on tractable 1D "
                    "families: data generation, training, evaluation, "
                    "sweeps, and self-checks")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic dataset as JSONL")
    _add_common(g)
    g.add_argument("--structure",
                   choices=("flat", "hierarchical", "factorial"))
    g.add_argument("--family",
                   choices=("gaussian", "mixture2", "von_mises", "gamma",
                            "discrete"))
    g.add_argument("--classes", type=int)
    g.add_argument("--per-class", dest="per_class", type=int)
    g.add_argument("--groups", type=int)
    g.add_argument("--classes-per-group", dest="classes_per_group", type=int)
    g.add_argument("--contents", type=int)
    g.add_argument("--styles", type=int)
    g.add_argument("--hyper", help="JSON object of hyperparameter overrides")
    g.add_argument("--out")

    t = sub.add_parser("train", help="fit a model and write a checkpoint")
    _add_common(t)
    t.add_argument("--data")
    t.add_argument("--objective", choices=KINDS)
    t.add_argument("--d-size", dest="d_size", type=int)
    t.add_argument("--mc-samples", dest="mc_samples", type=int)
    t.add_argument("--kl-weight", dest="kl_weight", type=float)
    t.add_argument("--latent-dim", dest="latent_dim", type=int)
    t.add_argument("--z-sees-c", dest="z_sees_c",
                   action=argparse.BooleanOptionalAction)
    t.add_argument("--epochs", type=int)
    t.add_argument("--anneal-epochs", dest="anneal_epochs", type=int)
    t.add_argument("--batch", dest="M", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--beta1", type=float)
    t.add_argument("--beta2", type=float)
    t.add_argument("--eps", type=float)
    t.add_argument("--runs", type=int)
    t.add_argument("--out")

    e = sub.add_parser("eval", help="score a checkpoint and append metrics")
    _add_common(e)
    e.add_argument("--model")
    e.add_argument("--data")
    e.add_argument("--d-sizes", dest="d_sizes")
    e.add_argument("--objective", help="tag for the metric rows; defaults "
                   "to the checkpoint's sidecar config")
    e.add_argument("--k", type=int)
    e.add_argument("--mc-outer", dest="mc_outer", type=int)
    e.add_argument("--n-way", dest="n_way", type=int)
    e.add_argument("--episodes-per-class", dest="episodes_per_class",
                   type=int)
    e.add_argument("--held-per-class", dest="held_per_class", type=int)
    e.add_argument("--nodes", type=int)
    e.add_argument("--oracle", choices=("quadrature",))
    e.add_argument("--out")

    s = sub.add_parser("sweep", help="train+eval a grid of cells, merge CSVs")
    _add_common(s)
    s.add_argument("--objectives")
    s.add_argument("--families")
    s.add_argument("--d-sizes", dest="d_sizes")
    s.add_argument("--eval-d-sizes", dest="eval_d_sizes")
    s.add_argument("--classes", type=int)
    s.add_argument("--per-class", dest="per_class", type=int)
    s.add_argument("--latent-dim", dest="latent_dim", type=int)
    s.add_argument("--mc-samples", dest="mc_samples", type=int)
    s.add_argument("--kl-weight", dest="kl_weight", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--anneal-epochs", dest="anneal_epochs", type=int)
    s.add_argument("--batch", dest="M", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--runs", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--mc-outer", dest="mc_outer", type=int)
    s.add_argument("--n-way", dest="n_way", type=int)
    s.add_argument("--episodes-per-class", dest="episodes_per_class",
                   type=int)
    s.add_argument("--held-per-class", dest="held_per_class", type=int)
    s.add_argument("--out")

    v = sub.add_parser("verify", help="run the self-check property suites")
    v.add_argument("--config", help=argparse.SUPPRESS)
    v.add_argument("--suite", action="append", choices=tuple(SUITES),
                   help="run only this suite (repeatable)")
    return parser


_COMMANDS = {
    "gen-data": (cmd_gen_data, _GEN_DEFAULTS),
    "train": (cmd_train, _TRAIN_DEFAULTS),
    "eval": (cmd_eval, _EVAL_DEFAULTS),
    "sweep": (cmd_sweep, _SWEEP_DEFAULTS),
    "verify": (cmd_verify, {"suite": None}),
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command, defaults = _COMMANDS[args.command]
    try:
        return command(_resolve(args, defaults))
    except (UsageError, ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GradCheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
