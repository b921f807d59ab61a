"""Config-driven runs of the experimental arms.

Config files are INI-style (``key = value`` under ``[section]`` headers).
See ``configs/`` in the repository and the README for every key.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import itertools
import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__
from .dataset import (
    TEST,
    TRAIN,
    VALIDATION,
    Dataset,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    log_transform,
    read_schema,
    select_features,
    split_fixed,
    standardize,
)
from .knn import DEFAULT_K_LIST, build_index, predict_batch
from .metrics import (
    ARM_ORDER,
    OLFACTORY_E_THRESHOLDS,
    OLFACTORY_Y_THRESHOLDS,
    ArmResult,
    Discretizer,
    MetricsReport,
    compile_report,
    evaluate,
)
from .network import (
    Network,
    SupervisedLoss,
    TrainConfig,
    build_network,
    embed,
    forward,
    save_checkpoint,
    train,
)
from .pairloss import LossParams, NeighborSpec, sample_pairs, train_pairwise

log = logging.getLogger(__name__)

ARMS = ARM_ORDER
KNN_ARMS = {
    "embed_Y_knn": ("baseline", "y"),
    "embed_E_knn": ("baseline", "e"),
    "pairwise_Y_knn": ("pairwise", "Y"),
    "pairwise_E_knn": ("pairwise", "E"),
    "pairwise_YE_knn": ("pairwise", "YE"),
}
DEFAULT_LAMBDAS = (0.01, 0.1, 1, 10, 25, 50, 100, 250, 500)

# Published olfactory baselines, shown only when reference_rows = true.
CITED_ROWS = {
    "cited_lasso_Y": {"y_acc": 0.4928, "y_mae_disc": 0.5072, "y_mae_cont": 8.6483},
    "cited_rf_Y": {"y_acc": 0.5217, "y_mae_disc": 0.4783, "y_mae_cont": 8.9447},
}


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class DataSource:
    kind: str  # "csv" or "synthetic"
    path: Path | None = None
    schema: Path | None = None
    split: tuple[int, int, int] | None = None
    synthetic: SyntheticSpec | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    data: DataSource
    arms: tuple[str, ...]
    seed: int = 0
    output_dir: Path = Path("runs")
    eval_split: str = TEST
    reference_rows: bool = False
    log_transform: bool = False
    standardize: bool = True
    select_k: int | None = None
    select_method: str = "corr"
    k_list: tuple[int, ...] = DEFAULT_K_LIST
    knn_vote: str = "kernel"
    knn_bandwidth: str | float = "median"
    metric_baseline: str = "euclidean"
    metric_pairwise: str = "cosine"
    y_thresholds: tuple[float, float] | str = OLFACTORY_Y_THRESHOLDS
    e_thresholds: tuple[float, float] | str = OLFACTORY_E_THRESHOLDS
    embedding_dim: int = 64
    hidden: tuple[int, ...] = ()
    hidden_activation: str = "relu"
    embedding_activation: str = "identity"
    train: TrainConfig = field(default_factory=TrainConfig)
    train_pairwise: TrainConfig | None = None
    warm_start: bool = False
    lambdas: tuple[float, ...] | None = None
    neighbor: NeighborSpec | None = None
    loss: LossParams | None = None
    n_pairs: int = 100_000
    balance_pairs: bool = False
    config_hash: str = ""

    def validate(self) -> None:
        if not self.arms:
            raise ConfigError("no arms requested")
        unknown = [a for a in self.arms if a not in ARMS]
        if unknown:
            raise ConfigError(f"unknown arms {unknown}; choose from {list(ARMS)}")
        if self.eval_split not in (TEST, VALIDATION):
            raise ConfigError("eval_split must be 'test' or 'validation'")
        if not self.k_list or min(self.k_list) < 1:
            raise ConfigError("k_list must hold positive integers")
        if "multitask" in self.arms and not self.lambdas:
            raise ConfigError("arm 'multitask' needs a [multitask] section with lambdas")
        if any(a.startswith("pairwise") for a in self.arms):
            missing = [
                s
                for s, v in (
                    ("[pairloss] neighbor thresholds", self.neighbor),
                    ("[pairloss] margins", self.loss),
                    ("[train.pairwise]", self.train_pairwise),
                )
                if v is None
            ]
            if missing:
                raise ConfigError(f"pairwise arms need {', '.join(missing)}")
        self.train.validate()
        if self.train_pairwise is not None:
            self.train_pairwise.validate()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _thresholds(text: str):
    text = text.strip()
    if text == "auto":
        return "auto"
    vals = _floats(text)
    if len(vals) != 2:
        raise ConfigError(f"thresholds need two numbers or 'auto', got {text!r}")
    return vals


def _train_config(sect, seed: int) -> TrainConfig:
    rates = {}
    if "embedding_learning_rate" in sect:
        rates["embedding"] = sect.getfloat("embedding_learning_rate")
    return TrainConfig(
        epochs=sect.getint("epochs", 100),
        batch_size=sect.getint("batch_size", 64),
        learning_rate=sect.getfloat("learning_rate", 1e-3),
        layer_learning_rates=rates,
        seed=seed,
        dropout=sect.getfloat("dropout", 0.0),
    )


def _synthetic_spec(sect) -> SyntheticSpec:
    kw = {}
    for f in fields(SyntheticSpec):
        if f.name not in sect:
            continue
        raw = sect[f.name].strip()
        if f.name == "split":
            kw["split"] = _ints(raw)
        elif f.name in ("explanation_kind", "label_kind"):
            kw[f.name] = raw
        elif f.name in ("label_noise", "feature_noise", "label_scale", "label_offset"):
            kw[f.name] = float(raw)
        else:
            kw[f.name] = int(raw)
    return SyntheticSpec(**kw)


def read_synthetic_spec(path: str | Path) -> SyntheticSpec:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"synthetic spec not found: {path}")
    parser = configparser.ConfigParser()
    text = path.read_text()
    if not text.lstrip().startswith("["):
        text = "[synthetic]\n" + text
    parser.read_string(text, source=str(path))
    return _synthetic_spec(parser[parser.sections()[0]])


def _apply_overrides(parser: configparser.ConfigParser, overrides: Mapping[str, str]):
    for dotted, value in overrides.items():
        section, _, key = dotted.rpartition(".")
        if not section or not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key] = str(value)


def _canonical(parser: configparser.ConfigParser) -> str:
    lines = []
    for s in sorted(parser.sections()):
        lines.append(f"[{s}]")
        lines += [f"{k} = {v}" for k, v in sorted(parser[s].items())]
    return "\n".join(lines) + "\n"


def load_config(path: str | Path, overrides: Mapping[str, str] | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from None
    _apply_overrides(parser, overrides or {})
    try:
        return _from_parser(parser, path.parent)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise ConfigError(f"{path}: {exc}") from None
        raise ConfigError(f"{path}: malformed config: {exc}") from None


def _from_parser(parser: configparser.ConfigParser, base: Path) -> ExperimentConfig:
    def section(name):
        return parser[name] if parser.has_section(name) else parser[parser.default_section]

    exp = section("experiment")
    seed = exp.getint("seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")

    data = section("data")
    kind = data.get("source", "synthetic").strip()
    if kind == "csv":
        if "path" not in data or "schema" not in data:
            raise ConfigError("[data] source = csv needs path and schema")
        source = DataSource(
            "csv",
            path=(base / data["path"].strip()),
            schema=(base / data["schema"].strip()),
            split=_ints(data["split"]) if "split" in data else None,
        )
    elif kind == "synthetic":
        source = DataSource("synthetic", synthetic=_synthetic_spec(data))
    else:
        raise ConfigError(f"[data] source must be csv or synthetic, got {kind!r}")

    arms = tuple(a.strip() for a in exp.get("arms", "").split(",") if a.strip())
    pre = section("preprocess")
    knn = section("knn")
    met = section("metrics")
    netw = section("network")
    train_cfg = _train_config(section("train"), seed)

    train_pw = neighbor = loss = None
    warm = False
    n_pairs, balance = 100_000, False
    if parser.has_section("train.pairwise"):
        train_pw = _train_config(parser["train.pairwise"], seed)
        warm = parser["train.pairwise"].getboolean("warm_start", False)
    if parser.has_section("pairloss"):
        pl = parser["pairloss"]
        neighbor = NeighborSpec(
            kind=pl.get("kind", "continuous").strip(),
            c1=pl.getfloat("c1", 0.0),
            c2=pl.getfloat("c2", 0.0),
            c3=pl.getfloat("c3", 0.0),
            c4=pl.getfloat("c4", 0.0),
        )
        loss = LossParams(m1=pl.getfloat("m1", 0.25), m2=pl.getfloat("m2", 0.25), w=pl.getfloat("w", 1.0))
        n_pairs = pl.getint("n_pairs", 100_000)
        balance = pl.getboolean("balance", False)
    lambdas = None
    if parser.has_section("multitask"):
        lambdas = _floats(parser["multitask"].get("lambdas", ",".join(map(str, DEFAULT_LAMBDAS))))

    bw = knn.get("bandwidth", "median").strip()
    cfg = ExperimentConfig(
        name=exp.get("name", "experiment").strip(),
        data=source,
        arms=arms,
        seed=seed,
        output_dir=base / exp.get("output_dir", "runs").strip(),
        eval_split=exp.get("eval_split", TEST).strip(),
        reference_rows=exp.getboolean("reference_rows", False),
        log_transform=pre.getboolean("log_transform", False),
        standardize=pre.getboolean("standardize", True),
        select_k=pre.getint("select_k") if pre.get("select_k", "").strip() else None,
        select_method=pre.get("select_method", "corr").strip(),
        k_list=_ints(knn.get("k_list", ",".join(map(str, DEFAULT_K_LIST)))),
        knn_vote=knn.get("vote", "kernel").strip(),
        knn_bandwidth=bw if bw == "median" else float(bw),
        metric_baseline=knn.get("metric_baseline", "euclidean").strip(),
        metric_pairwise=knn.get("metric_pairwise", "cosine").strip(),
        y_thresholds=_thresholds(met.get("y_thresholds", "33.66, 49.68")),
        e_thresholds=_thresholds(met.get("e_thresholds", "2.72, 6.57")),
        embedding_dim=netw.getint("embedding_dim", 64),
        hidden=_ints(netw.get("hidden", "")),
        hidden_activation=netw.get("hidden_activation", "relu").strip(),
        embedding_activation=netw.get("embedding_activation", "identity").strip(),
        train=train_cfg,
        train_pairwise=train_pw,
        warm_start=warm,
        lambdas=lambdas,
        neighbor=neighbor,
        loss=loss,
        n_pairs=n_pairs,
        balance_pairs=balance,
        config_hash=hashlib.sha256(_canonical(parser).encode()).hexdigest(),
    )
    return cfg


def derive_seed(master: int, *parts: str) -> int:
    """Per-arm seed from the master seed; independent of which arms run."""
    digest = hashlib.sha256(":".join([str(master), *parts]).encode()).digest()
    return int.from_bytes(digest[:8], "little")


# -- data preparation ----------------------------------------------------------


@dataclass
class LabelAudit:
    """Gatekeeper for evaluation-split targets; counts reads per stage."""

    _y: np.ndarray
    _e: np.ndarray
    reads: Counter = field(default_factory=Counter)

    def read(self, stage: str):
        self.reads[stage] += 1
        return self._y, self._e


@dataclass
class PreparedData:
    data: Dataset
    train_rows: np.ndarray
    eval_rows: np.ndarray
    y_disc: Discretizer | None
    e_disc: Discretizer | None
    selected: np.ndarray | None

    @property
    def x_train(self):
        return self.data.features[self.train_rows]

    @property
    def x_eval(self):
        return self.data.features[self.eval_rows]

    @property
    def y_train(self):
        return self.data.labels[self.train_rows]

    @property
    def e_train(self):
        return self.data.explanations[self.train_rows]

    @property
    def y_categorical(self):
        return self.data.label_kind == "categorical"

    @property
    def e_categorical(self):
        return self.data.explanation_kind == "categorical"

    @property
    def has_e(self):
        e = self.data.explanations
        return e.ndim == 1 or e.shape[1] > 0


def load_dataset(config: ExperimentConfig) -> Dataset:
    src = config.data
    if src.kind == "synthetic":
        spec = src.synthetic
        if spec.split is None:
            n_val = n_test = spec.n_samples // 5
            spec = replace(spec, split=(spec.n_samples - n_val - n_test, n_val, n_test))
        return generate_synthetic(spec)
    d = load_csv(src.path, read_schema(src.schema))
    if src.split is not None:
        d = split_fixed(d, src.split)
    return d


def prepare(config: ExperimentConfig, d: Dataset | None = None) -> tuple[PreparedData, LabelAudit]:
    d = load_dataset(config) if d is None else d
    if config.log_transform:
        d = log_transform(d)
    if config.standardize:
        d, _ = standardize(d)
    selected = None
    if config.select_k is not None:
        d, selected = select_features(d, config.select_k, config.select_method)
    train_rows = d.rows(TRAIN)
    eval_rows = d.rows(config.eval_split)
    if len(train_rows) == 0 or len(eval_rows) == 0:
        raise ConfigError(f"need non-empty train and {config.eval_split} splits")

    def disc(setting, values, categorical):
        if categorical:
            return None
        if setting == "auto":
            return Discretizer.from_training_tertiles(values)
        return Discretizer(*setting)

    y_disc = disc(config.y_thresholds, d.labels[train_rows], d.label_kind == "categorical")
    has_e = d.explanations.ndim == 1 or d.explanations.shape[1] > 0
    e_disc = (
        disc(config.e_thresholds, d.explanations[train_rows], d.explanation_kind == "categorical")
        if has_e
        else None
    )
    audit = LabelAudit(d.labels[eval_rows], d.explanations[eval_rows])
    return PreparedData(d, train_rows, eval_rows, y_disc, e_disc, selected), audit


# -- arms ----------------------------------------------------------------------


def _head_spec(p: PreparedData, head: str):
    """(loss kind, output width, training target) for head 'y' or 'e'."""
    if head == "y":
        if p.y_categorical:
            return "ce", p.data.n_label_classes, p.y_train
        return "mse", 1, p.y_train.astype(float)[:, None]
    if not p.has_e:
        raise ConfigError("dataset has no explanation columns")
    if p.e_categorical:
        return "ce", p.data.n_explanation_classes, p.e_train
    return "mse", p.e_train.shape[1], p.e_train.astype(float)


def _new_net(config: ExperimentConfig, p: PreparedData, heads, seed: int) -> Network:
    sizes = {h: _head_spec(p, h)[1] for h in heads}
    return build_network(
        p.data.n_features,
        sizes,
        embedding_dim=config.embedding_dim,
        hidden=config.hidden,
        hidden_activation=config.hidden_activation,
        embedding_activation=config.embedding_activation,
        seed=seed,
    )


def _fit_supervised(config, p: PreparedData, weights: Mapping[str, float], seed: int) -> Network:
    net = _new_net(config, p, tuple(weights), derive_seed(seed, "init"))
    terms = {}
    for head, w in weights.items():
        kind, _, target = _head_spec(p, head)
        terms[head] = (kind, target, w)
    tc = replace(config.train, seed=derive_seed(seed, "batches"))
    return train(net, p.x_train, SupervisedLoss(terms), tc)


def _decode(p: PreparedData, head: str, out: np.ndarray):
    categorical = p.y_categorical if head == "y" else p.e_categorical
    if categorical:
        return np.argmax(out, axis=1)
    return out[:, 0] if head == "y" else out


@dataclass
class ArmOutput:
    results: list[ArmResult]
    predictions: list[tuple[float | None, np.ndarray | None, np.ndarray | None]]
    networks: dict[str, Network] = field(default_factory=dict)
    pairs: object = None
    index: object = None
    embeddings: dict[str, np.ndarray] = field(default_factory=dict)


def _score(p: PreparedData, audit: LabelAudit, arm, param, y_pred, e_pred) -> ArmResult:
    y_true, e_true = audit.read("metrics")
    m = evaluate(
        y_pred,
        y_true if y_pred is not None else None,
        e_pred,
        e_true if e_pred is not None else None,
        p.y_disc,
        p.e_disc,
        p.y_categorical,
        p.e_categorical,
    )
    return ArmResult(arm, param, len(p.eval_rows), m)


def run_arm(config: ExperimentConfig, arm: str, p: PreparedData, audit: LabelAudit) -> ArmOutput:
    seed = derive_seed(config.seed, arm)
    preds: list = []

    if arm in ("baseline_Y", "baseline_E"):
        head = "y" if arm == "baseline_Y" else "e"
        net = _fit_supervised(config, p, {head: 1.0}, seed)
        _, outs = forward(net, p.x_eval)
        pred = _decode(p, head, outs[head])
        y_pred, e_pred = (pred, None) if head == "y" else (None, pred)
        preds.append((None, y_pred, e_pred))
        return ArmOutput([_score(p, audit, arm, None, y_pred, e_pred)], preds, {"": net})

    if arm == "multitask":
        results, nets = [], {}
        for lam in config.lambdas:
            net = _fit_supervised(config, p, {"y": 1.0, "e": lam}, seed)
            _, outs = forward(net, p.x_eval)
            y_pred, e_pred = _decode(p, "y", outs["y"]), _decode(p, "e", outs["e"])
            preds.append((lam, y_pred, e_pred))
            results.append(_score(p, audit, arm, lam, y_pred, e_pred))
            nets[f"lambda_{lam:g}"] = net
        return ArmOutput(results, preds, nets)

    family, which = KNN_ARMS[arm]
    pairs = None
    if family == "baseline":
        net = _fit_supervised(config, p, {which: 1.0}, seed)
        metric = config.metric_baseline
    else:
        pairs = sample_pairs(
            p.y_train,
            p.e_train if p.has_e else None,
            config.neighbor,
            config.n_pairs,
            seed=derive_seed(seed, "pairs"),
            mode=which,
            balance=config.balance_pairs,
        )
        if config.warm_start:
            net = _fit_supervised(config, p, {"y": 1.0}, derive_seed(config.seed, "baseline_Y"))
        else:
            net = _new_net(config, p, ("y",), derive_seed(seed, "init"))
        tc = replace(config.train_pairwise, seed=derive_seed(seed, "batches"))
        net = train_pairwise(net, p.x_train, pairs, config.loss, tc, mode=which)
        metric = config.metric_pairwise

    emb_train, emb_eval = embed(net, p.x_train), embed(net, p.x_eval)
    index = build_index(
        emb_train,
        p.y_train,
        p.e_train if p.has_e else None,
        metric=metric,
        bandwidth=config.knn_bandwidth,
    )
    n_classes = (p.data.n_label_classes, p.data.n_explanation_classes)
    results = []
    for k in sorted(set(config.k_list)):
        y_pred, e_pred = predict_batch(index, emb_eval, k, config.knn_vote, n_classes)
        preds.append((k, y_pred, e_pred))
        results.append(_score(p, audit, arm, k, y_pred, e_pred))
    return ArmOutput(
        results, preds, {"": net}, pairs, index, {"train": emb_train, "eval": emb_eval}
    )


# -- artifacts -----------------------------------------------------------------


def _write_predictions(path: Path, p: PreparedData, preds) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "row", "y_pred", "e_pred"])
        for param, y_pred, e_pred in preds:
            for i, row in enumerate(p.eval_rows):
                y = "" if y_pred is None else repr(np.asarray(y_pred[i]).item())
                if e_pred is None:
                    e = ""
                else:
                    e = " ".join(repr(v) for v in np.atleast_1d(e_pred[i]).tolist())
                w.writerow(["" if param is None else repr(float(param)), int(row), y, e])


def _write_arm(arm_dir: Path, p: PreparedData, out: ArmOutput) -> list[str]:
    arm_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for tag, net in out.networks.items():
        name = f"checkpoint{'_' + tag if tag else ''}.npz"
        save_checkpoint(net, arm_dir / name)
        files.append(name)
    if out.pairs is not None:
        out.pairs.save(arm_dir / "pairs.txt")
        files.append("pairs.txt")
    if out.index is not None:
        out.index.save(arm_dir / "index.npz")
        files.append("index.npz")
    if out.embeddings:
        with (arm_dir / "embeddings.npz").open("wb") as fh:
            np.savez(fh, train_rows=p.train_rows, eval_rows=p.eval_rows, **out.embeddings)
        files.append("embeddings.npz")
    _write_predictions(arm_dir / "predictions.csv", p, out.predictions)
    files.append("predictions.csv")
    return files


@dataclass
class RunResult:
    report: MetricsReport | None
    out_dir: Path
    failures: dict[str, str]
    manifest: dict


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    dataset: Dataset | None = None,
    figures: bool = True,
) -> RunResult:
    """Run every requested arm, then write the report, figures and manifest.

    An arm that raises is recorded in the manifest and the remaining arms
    still run.
    """
    config.validate()
    out = Path(out_dir) if out_dir is not None else config.output_dir / config.name
    out.mkdir(parents=True, exist_ok=True)
    p, audit = prepare(config, dataset)

    results: list[ArmResult] = []
    failures: dict[str, str] = {}
    arm_files: dict[str, list[str]] = {}
    for arm in config.arms:
        log.info("running arm %s", arm)
        try:
            arm_out = run_arm(config, arm, p, audit)
        except Exception as exc:  # keep completed arms; see manifest
            failures[arm] = f"{arm}: {type(exc).__name__}: {exc}"
            log.error("arm %s failed: %s", arm, exc)
            continue
        results.extend(arm_out.results)
        arm_files[arm] = _write_arm(out / "arms" / arm, p, arm_out)

    if config.reference_rows:
        for name, metrics in CITED_ROWS.items():
            results.append(ArmResult(name, None, 0, dict(metrics), cited=True))

    report = None
    figs: list[str] = []
    if any(not r.cited for r in results):
        report = compile_report(results, config.name, config.eval_split)
        report.write(out)
        if figures:
            from .plotting import render_figures

            figs = [str(f.relative_to(out)) for f in render_figures(report, out)]

    manifest = {
        "experiment": config.name,
        "version": __version__,
        "config_hash": config.config_hash,
        "master_seed": config.seed,
        "arm_seeds": {a: derive_seed(config.seed, a) for a in config.arms},
        "arms": {a: ("failed" if a in failures else "ok") for a in config.arms},
        "failures": failures,
        "eval_split": config.eval_split,
        "n_train": int(len(p.train_rows)),
        "n_eval": int(len(p.eval_rows)),
        "selected_features": None if p.selected is None else p.selected.tolist(),
        "eval_label_reads": dict(sorted(audit.reads.items())),
        "files": {"arms": arm_files, "figures": figs},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(report, out, failures, manifest)


def run_sweep(
    config_path: str | Path,
    grid: Mapping[str, list[str]],
    out_dir: str | Path,
    overrides: Mapping[str, str] | None = None,
) -> list[dict]:
    """Evaluate every grid combination on the validation split.

    Returns one record per combination with the best validation Y accuracy
    reached by each arm.
    """
    out_dir = Path(out_dir)
    keys = sorted(grid)
    records = []
    for i, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        combo = dict(zip(keys, values))
        cfg = load_config(
            config_path,
            {**(overrides or {}), **combo, "experiment.eval_split": VALIDATION},
        )
        res = run_experiment(cfg, out_dir / f"combo_{i:03d}", figures=False)
        best = {}
        if res.report is not None:
            for r in res.report.rows:
                if r["y_acc"] is not None:
                    best[r["arm"]] = max(best.get(r["arm"], -1.0), r["y_acc"])
        records.append({"combo": combo, "best_y_acc": best, "failures": res.failures})
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    return records
