"""Command-line entry points: generate / train / project / evaluate /
compare / inspect.

Every command is reproducible: identical flags and seed give identical
numeric report fields. Validation problems exit with code 2, numerical
divergence with code 3; with --json the error goes to stderr as one JSON
object. A --config file (TOML or JSON) supplies defaults that explicit
flags override. TEMPHENO_THREADS caps worker parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as tio
from .errors import FeatureMismatch, NonFiniteLoss, TemphenoError
from .metrics import diversity, fit, fit_report, match_phenotypes
from .optim import TrainConfig, project, split, train
from .synth import GenConfig, NoiseSpec, add_noise, generate, generate_repeated_event_phenotypes
from .tensor import (
    HyperParams,
    IrregularTensor,
    PathwayCollection,
    PhenotypeTensor,
    reconstruct_all,
    validate_tensor,
)

_HP_DEFAULTS = {
    "rank": 4,
    "window": 3,
    "alpha": 1.0,
    "beta": 0.5,
    "lr": 1e-3,
    "batch": 50,
    "epochs": 200,
    "seed": 0,
    "test_fraction": 0.3,
}


def _load_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def _pick(args, config: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _hyperparams(args, config: dict) -> HyperParams:
    return HyperParams(
        rank=int(_pick(args, config, "rank", _HP_DEFAULTS["rank"])),
        window=int(_pick(args, config, "window", _HP_DEFAULTS["window"])),
        sparsity_weight=float(_pick(args, config, "alpha", _HP_DEFAULTS["alpha"])),
        nonsuccession_weight=float(_pick(args, config, "beta", _HP_DEFAULTS["beta"])),
        learning_rate=float(_pick(args, config, "lr", _HP_DEFAULTS["lr"])),
        batch_size=int(_pick(args, config, "batch", _HP_DEFAULTS["batch"])),
        epochs=int(_pick(args, config, "epochs", _HP_DEFAULTS["epochs"])),
        rng_seed=int(_pick(args, config, "seed", _HP_DEFAULTS["seed"])),
    )


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out_dir", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, doc: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        for key, value in doc.items():
            print(f"{key}: {value}")


def _loss_history_rows(model) -> list:
    return [
        [epoch, b.total, b.reconstruction, b.sparsity, b.nonsuccession]
        for epoch, b in model.loss_history
    ]


# --- commands ----------------------------------------------------------------

def _generate_config(args, config: dict) -> GenConfig:
    # flags/config override GenConfig's own defaults rather than restating them
    casts = {
        "individuals": int, "features": int, "rank": int, "window": int,
        "duration": int, "occurrence_p": float, "feature_density": float,
    }
    kwargs = {}
    for key, cast in casts.items():
        value = _pick(args, config, key, None)
        if value is not None:
            kwargs[key] = cast(value)
    seed = _pick(args, config, "seed", None)
    if seed is not None:
        kwargs["rng_seed"] = int(seed)
    return GenConfig(**kwargs)


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    cfg = _generate_config(args, config)
    rng = np.random.default_rng(cfg.rng_seed)
    if args.repeated is not None:
        X, P_true, W_true = generate_repeated_event_phenotypes(cfg, rng, repeated=int(args.repeated))
    else:
        X, P_true, W_true = generate(cfg, rng)
    noise_level = 0.0
    if args.noise is not None:
        spec = NoiseSpec(
            kind=args.noise,
            additive_lambda=float(args.noise_lambda or 0.0),
            destructive_p=float(args.noise_p or 0.0),
        )
        X, noise_level = add_noise(X, spec, rng)
    out = _out_dir(args)
    data_path = out / ("events.jsonl" if args.format == "jsonl" else "events.csv")
    tio.write_events(X, data_path, format=args.format)
    truth_hp = HyperParams(rank=cfg.rank, window=cfg.window, rng_seed=cfg.rng_seed)
    tio.save_model(
        tio.ModelFile(
            phenotypes=P_true,
            hyperparameters=truth_hp,
            provenance={"rng_seed": cfg.rng_seed, "epochs": 0, "dataset_digest": tio.dataset_digest(X)},
        ),
        out / "truth_model.json",
    )
    tio.save_pathways(W_true, X.individual_ids, cfg.window, out / "truth_pathways.json")
    _emit(args, {
        "dataset": str(data_path),
        "individuals": cfg.individuals,
        "features": cfg.features,
        "noise_level": noise_level,
        "dataset_digest": tio.dataset_digest(X),
    })
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    hp = _hyperparams(args, config)
    test_fraction = float(_pick(args, config, "test_fraction", _HP_DEFAULTS["test_fraction"]))
    X = tio.load_events(args.data)
    validate_tensor(X)
    digest = tio.dataset_digest(X)
    started = time.perf_counter()
    X_train, X_test = split(X, test_fraction, rng=np.random.default_rng(hp.rng_seed))
    cfg = TrainConfig(hp=hp)
    model = train(X_train, cfg)
    w_test = project(model, X_test)
    fit_train = fit(X_train, reconstruct_all(model.phenotypes, model.pathways))
    fit_test = fit(X_test, reconstruct_all(model.phenotypes, w_test))
    elapsed = time.perf_counter() - started

    out = _out_dir(args)
    tio.save_model(
        tio.ModelFile(
            phenotypes=model.phenotypes,
            hyperparameters=hp,
            provenance={"rng_seed": hp.rng_seed, "epochs": hp.epochs, "dataset_digest": digest},
        ),
        out / "model.json",
    )
    tio.save_pathways(model.pathways, X_train.individual_ids, hp.window, out / "train_pathways.json")
    report = tio.RunReport(
        command="train",
        config={
            "rank": hp.rank, "window": hp.window,
            "alpha": hp.sparsity_weight, "beta": hp.nonsuccession_weight,
            "lr": hp.learning_rate, "batch": hp.batch_size,
            "epochs": hp.epochs, "seed": hp.rng_seed,
            "test_fraction": test_fraction, "data": str(args.data),
        },
        results={
            "fit_x_train": fit_train,
            "fit_x_test": fit_test,
            "final_loss": model.loss_history[-1][1].total,
        },
        loss_history=_loss_history_rows(model),
        wall_seconds=elapsed,
        dataset_digest=digest,
    )
    tio.save_report(report, out / "report.json")
    _emit(args, {"model": str(out / "model.json"), **report.results, "wall_seconds": elapsed})
    return 0


def cmd_project(args) -> int:
    config = _load_config(args.config)
    mf = tio.load_model(args.model)
    X = tio.load_events(args.data)
    validate_tensor(X)
    if X.feature_names != mf.phenotypes.feature_names:
        X = _align_features(X, mf.phenotypes.feature_names)
    hp = mf.hyperparameters
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = int(args.epochs)
    if args.seed is not None:
        overrides["rng_seed"] = int(args.seed)
    if overrides:
        hp = replace(hp, **overrides)
    started = time.perf_counter()
    w_new = project(mf.phenotypes, X, cfg=TrainConfig(hp=hp))
    fit_x = fit(X, reconstruct_all(mf.phenotypes, w_new))
    elapsed = time.perf_counter() - started
    out = _out_dir(args)
    tio.save_pathways(w_new, X.individual_ids, hp.window, out / "pathways.json")
    digest = tio.dataset_digest(X)
    report = tio.RunReport(
        command="project",
        config={"model": str(args.model), "data": str(args.data), "epochs": hp.epochs, "seed": hp.rng_seed},
        results={
            "fit_x": fit_x,
            "train_dataset_digest": mf.provenance.get("dataset_digest"),
        },
        wall_seconds=elapsed,
        dataset_digest=digest,
    )
    tio.save_report(report, out / "report.json")
    _emit(args, {"pathways": str(out / "pathways.json"), "fit_x": fit_x,
                 "dataset_digest": digest,
                 "train_dataset_digest": mf.provenance.get("dataset_digest")})
    return 0


def _align_features(X, names):
    """Reorder/embed X's feature rows into the model's feature universe."""
    index = {f: i for i, f in enumerate(names)}
    missing = [f for f in X.feature_names if f not in index]
    if missing:
        raise FeatureMismatch(f"dataset features {missing} unknown to the model")
    mats = []
    for m in X.matrices:
        out = np.zeros((len(names), m.shape[1]))
        for i, f in enumerate(X.feature_names):
            out[index[f]] = m[i]
        mats.append(out)
    return IrregularTensor(mats, feature_names=list(names), individual_ids=list(X.individual_ids))


def _align_phenotypes(phenotypes: PhenotypeTensor, names) -> PhenotypeTensor:
    """Embed a phenotype tensor into a larger feature universe (zero rows)."""
    if phenotypes.feature_names == list(names):
        return phenotypes
    index = {f: i for i, f in enumerate(names)}
    missing = [f for f in phenotypes.feature_names if f not in index]
    if missing:
        raise FeatureMismatch(f"model features {missing} unknown to the target universe")
    data = np.zeros((phenotypes.rank, len(names), phenotypes.window))
    for i, f in enumerate(phenotypes.feature_names):
        data[:, index[f], :] = phenotypes.data[:, i, :]
    return PhenotypeTensor(data, feature_names=list(names))


def cmd_evaluate(args) -> int:
    mf = tio.load_model(args.model)
    X = tio.load_events(args.data)
    validate_tensor(X)
    if X.feature_names != mf.phenotypes.feature_names:
        X = _align_features(X, mf.phenotypes.feature_names)
    hp = mf.hyperparameters
    if args.pathways:
        mats, ids, _ = tio.load_pathways(args.pathways)
        w_eval = PathwayCollection(mats, individual_ids=ids)
    else:
        w_eval = project(mf.phenotypes, X, cfg=TrainConfig(hp=hp))
    truth_p = tio.load_model(args.truth_model).phenotypes if args.truth_model else None
    truth_w = None
    if args.truth_pathways:
        t_mats, t_ids, _ = tio.load_pathways(args.truth_pathways)
        truth_w = PathwayCollection(t_mats, individual_ids=t_ids)
    learned_p = mf.phenotypes
    if truth_p is not None and learned_p.feature_names != truth_p.feature_names:
        # a dataset file may not mention every feature the truth knows; the
        # learned model then lives in the observed sub-universe
        learned_p = _align_phenotypes(learned_p, truth_p.feature_names)
    report = fit_report(
        X,
        reconstruct_all(mf.phenotypes, w_eval),
        truth_phenotypes=truth_p,
        learned_phenotypes=learned_p if truth_p is not None else None,
        truth_pathways=truth_w,
        learned_pathways=w_eval if truth_w is not None else None,
    )
    doc = {"fit_x": report.fit_x}
    if report.fit_p is not None:
        doc["fit_p"] = report.fit_p
    if report.fit_w is not None:
        doc["fit_w"] = report.fit_w
    if report.matching is not None:
        doc["matching"] = report.matching
    if args.out_dir:
        tio.save_report(
            tio.RunReport(
                command="evaluate",
                config={"model": str(args.model), "data": str(args.data)},
                results={k: v for k, v in doc.items() if k != "matching"},
                dataset_digest=tio.dataset_digest(X),
            ),
            _out_dir(args) / "report.json",
        )
    _emit(args, doc)
    return 0


def cmd_compare(args) -> int:
    if len(args.models) < 2:
        raise ValueError("compare needs at least two model files")
    models = [tio.load_model(p) for p in args.models]
    names = [str(p) for p in args.models]
    pairs = [(i, j) for i in range(len(models)) for j in range(i + 1, len(models))]

    def _sim(pair):
        i, j = pair
        a, b = models[i].phenotypes, models[j].phenotypes
        if a.feature_names != b.feature_names:
            union = sorted(set(a.feature_names) | set(b.feature_names))
            a = _align_phenotypes(a, union)
            b = _align_phenotypes(b, union)
        _, sim = match_phenotypes(a, b)
        return sim

    with ThreadPoolExecutor(max_workers=tio.worker_cap()) as pool:
        sims = list(pool.map(_sim, pairs))
    doc = {
        "models": names,
        "similarity": [
            {"a": names[i], "b": names[j], "similarity": s}
            for (i, j), s in zip(pairs, sims)
        ],
        "diversity": [
            {"model": name, "diversity": diversity(m.phenotypes) if m.phenotypes.rank > 1 else None}
            for name, m in zip(names, models)
        ],
    }
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        for entry in doc["similarity"]:
            print(f"similarity {entry['a']} ~ {entry['b']}: {entry['similarity']:.6f}")
        for entry in doc["diversity"]:
            print(f"diversity {entry['model']}: {entry['diversity']}")
    return 0


def cmd_inspect(args) -> int:
    mf = tio.load_model(args.model)
    out = _out_dir(args)
    data = mf.phenotypes.data
    for r in range(data.shape[0]):
        print(f"phenotype {r}")
        print(tio.render_phenotype_text(data[r], mf.phenotypes.feature_names))
        print()
        svg = tio.render_phenotype_svg(data[r], mf.phenotypes.feature_names)
        (out / f"phenotype_{r:02d}.svg").write_text(svg)
    if not getattr(args, "json", False):
        print(f"wrote {data.shape[0]} SVG heatmap(s) to {out}")
    return 0


# --- parser -------------------------------------------------------------------

def _add_common(sub) -> None:
    sub.add_argument("--json", action="store_true", help="machine-readable output and errors")
    sub.add_argument("--out-dir", help="directory for output files (default: current)")
    sub.add_argument("--config", help="TOML or JSON file of defaults; flags win")


def _add_hp_flags(sub) -> None:
    sub.add_argument("--rank", "-R", type=int, help="number of phenotypes")
    sub.add_argument("--window", "-w", type=int, help="phenotype window length")
    sub.add_argument("--alpha", type=float, help="sparsity weight")
    sub.add_argument("--beta", type=float, help="non-succession weight")
    sub.add_argument("--lr", type=float, help="learning rate")
    sub.add_argument("--batch", type=int, help="mini-batch size")
    sub.add_argument("--epochs", type=int, help="training epochs")
    sub.add_argument("--seed", type=int, help="RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempheno",
        description="Temporal phenotype discovery by convolutional tensor decomposition.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("generate", help="write a planted synthetic dataset")
    p.add_argument("--individuals", "-K", type=int)
    p.add_argument("--features", "-n", type=int)
    p.add_argument("--rank", "-R", type=int)
    p.add_argument("--window", "-w", type=int)
    p.add_argument("--duration", "-T", type=int)
    p.add_argument("--occurrence-p", dest="occurrence_p", type=float)
    p.add_argument("--density", dest="feature_density", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--repeated", type=int, help="phenotypes repeating one feature across the window")
    p.add_argument("--noise", choices=["additive", "destructive"])
    p.add_argument("--noise-lambda", type=float, help="Poisson mean of added events per individual")
    p.add_argument("--noise-p", type=float, help="per-event deletion probability")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = subs.add_parser("train", help="decompose a dataset into phenotypes and pathways")
    p.add_argument("--data", required=True, help="events file (.csv or .jsonl)")
    _add_hp_flags(p)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("project", help="fit pathways for new data with phenotypes frozen")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_project)

    p = subs.add_parser("evaluate", help="FIT of a model on a dataset (and against truth files)")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--pathways", help="precomputed pathways file; projected if absent")
    p.add_argument("--truth-model", dest="truth_model")
    p.add_argument("--truth-pathways", dest="truth_pathways")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("compare", help="similarity and diversity across model files")
    p.add_argument("models", nargs="+", help="two or more model files")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("inspect", help="render phenotypes as text grids and SVG heatmaps")
    p.add_argument("--model", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        _report_error(args, exc)
        return 3
    except (TemphenoError, ValueError, OSError) as exc:
        _report_error(args, exc)
        return 2


def _report_error(args, exc: Exception) -> None:
    if getattr(args, "json", False):
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(doc), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
