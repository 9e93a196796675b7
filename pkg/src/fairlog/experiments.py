"""Config-driven sweeps: cross-validated method comparisons over bias grids.

A sweep iterates over (bias probability, assumed bias probability, seed)
cells. Each cell generates one dataset, splits it into folds, trains
every requested method per fold, and appends one result row per
(method, fold). Results land in a CSV; plots are regenerated from the
CSV alone. Cells are independent and individually seeded, so sweeps can
run in a worker pool and interrupted sweeps resume (completed rows are
detected and skipped).
"""

from __future__ import annotations

import csv
import hashlib
import json
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import (
    error_parity_thresholds,
    massage,
    run_lower,
    run_unawareness,
    run_upper,
)
from .datagen import Dataset, GenConfig, generate, to_training_views
from .metrics import EvalReport, evaluate_scores
from .net import TrainConfig
from .templates import (
    BiasSpec,
    build_model,
    derive_forward_feature_params,
    derive_forward_label_params,
    derive_reverse_feature_params,
)
from .training import historical_mode, train_plain, train_through_program

METHODS = ("ours", "upper", "lower", "unawareness", "massaging", "error_parity")
SCENARIOS = ("label", "measurement", "historical")

# noise levels injected alongside each mechanism (historical runs keep the
# channel pure so the test-time inversion matches the generating process)
SCENARIO_NOISE = {"label": 0.1, "measurement": 0.1, "historical": 0.0}


@dataclass
class ExperimentConfig:
    scenario: str
    beta_grid: "list[float]" = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    alpha_a: float = 0.0
    methods: "list[str]" = field(default_factory=lambda: list(METHODS))
    folds: int = 5
    seeds: "list[int]" = field(default_factory=lambda: [0, 1, 2, 3, 4])
    assumed_beta_grid: "Optional[list[float]]" = None  # None: use the true beta
    bias_spec: Optional[dict] = None  # explicit BiasSpec for "ours" (overrides derivation)
    gen: dict = field(default_factory=dict)  # GenConfig overrides
    train: dict = field(default_factory=dict)  # TrainConfig overrides
    hidden: "list[int]" = field(default_factory=lambda: [32, 32, 32])
    dropout: float = 0.0
    out_dir: str = "sweep_out"
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.beta_grid:
            raise ValueError("beta grid must be nonempty")
        if self.assumed_beta_grid is not None and not self.assumed_beta_grid:
            raise ValueError("assumed beta grid must be nonempty when given")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


RESULT_FIELDS = [
    "method",
    "scenario",
    "beta",
    "beta_hat",
    "fold",
    "seed",
    "accuracy",
    "f1",
    "disparity_score",
    "disparity_label",
    "eo_gap",
    "pos_rate_sensitive",
    "pos_rate_other",
    "tpr_sensitive",
    "tpr_other",
    "fpr_sensitive",
    "fpr_other",
    "n_sensitive",
    "n_other",
]


@dataclass
class ResultRow:
    method: str
    scenario: str
    beta: float
    beta_hat: float
    fold: int
    seed: int
    report: EvalReport

    def to_csv_row(self) -> "list":
        base = [self.method, self.scenario, self.beta, self.beta_hat, self.fold, self.seed]
        rep = self.report.to_dict()
        return base + [("" if rep[k] is None else rep[k]) for k in RESULT_FIELDS[6:]]

    @property
    def key(self) -> tuple:
        return (self.method, float(self.beta), float(self.beta_hat), self.fold, self.seed)


def stable_seed(*parts) -> int:
    """Deterministic 32-bit seed from arbitrary hashable coordinates."""
    text = json.dumps(parts, sort_keys=True, default=str)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


def split_cv(n_rows: int, folds: int, seed: int) -> np.ndarray:
    """Deterministic shuffled partition into folds of near-equal size."""
    if folds > n_rows:
        raise ValueError(f"cannot split {n_rows} rows into {folds} folds")
    perm = np.random.default_rng([seed, 2]).permutation(n_rows)
    assignment = np.empty(n_rows, dtype=np.int64)
    for fold, chunk in enumerate(np.array_split(perm, folds)):
        assignment[chunk] = fold
    return assignment


def make_gen_config(config: ExperimentConfig, beta: float, seed: int) -> GenConfig:
    overrides = dict(config.gen)
    overrides.setdefault("n_rows", 10_000)
    overrides["alpha_a"] = config.alpha_a
    overrides["seed"] = stable_seed("data", config.scenario, beta, seed, config.alpha_a)
    noise = SCENARIO_NOISE[config.scenario]
    if config.scenario == "label":
        overrides.update(beta_label=beta, p_noise_y=overrides.get("p_noise_y", noise))
    elif config.scenario == "measurement":
        overrides.update(
            beta_measure_r=beta,
            beta_measure_q=beta,
            p_noise_r=overrides.get("p_noise_r", noise),
            p_noise_q=overrides.get("p_noise_q", noise),
        )
    else:
        overrides.update(beta_hist_r=beta, beta_hist_q=beta)
    return GenConfig(**overrides)


def bias_model_for(
    config: ExperimentConfig, gen: GenConfig, beta_hat: float
):
    """The mitigation model with parameters derived from an assumed beta.

    An explicit ``bias_spec`` in the config (serialized BiasSpec) takes
    precedence, e.g. for simplified-assumption programs.
    """
    if config.bias_spec is not None:
        return build_model(BiasSpec.from_dict(config.bias_spec))
    if config.scenario == "label":
        flips = derive_forward_label_params(beta_hat, gen.p_noise_y)
        return build_model(BiasSpec("label", ("a",), label_flips={"a": flips}))
    noise = gen.p_noise_r if config.scenario == "measurement" else 0.0
    forward = derive_forward_feature_params(beta_hat, noise)
    marginals = [gen.p_r] + [
        min(1.0, gen.p_q[i] + gen.alpha_qr[i] * gen.p_r) for i in range(gen.n_q)
    ]
    flips = [derive_reverse_feature_params(forward, m, m) for m in marginals]
    return build_model(BiasSpec(config.scenario, ("a",), feature_flips=flips))


def _with_group(X, groups):
    return np.column_stack([X, np.asarray(groups, dtype=np.float64)])


def run_cell(config: ExperimentConfig, beta: float, beta_hat: float, seed: int) -> "list[ResultRow]":
    """Train and evaluate every method over all folds of one dataset."""
    gen = make_gen_config(config, beta, seed)
    dataset = generate(gen)
    assignment = split_cv(dataset.n_rows, config.folds, stable_seed("cv", beta, seed))
    include_sensitive = config.alpha_a != 0.0
    rows: "list[ResultRow]" = []
    for fold in range(config.folds):
        test = dataset.subset(np.flatnonzero(assignment == fold))
        train = dataset.subset(np.flatnonzero(assignment != fold))
        for method in config.methods:
            report = _run_method(
                config, gen, method, train, test, beta_hat, fold, seed, include_sensitive
            )
            rows.append(ResultRow(method, config.scenario, beta, beta_hat, fold, seed, report))
    return rows


def _train_config(config: ExperimentConfig, method: str, beta: float, beta_hat, fold: int, seed: int) -> TrainConfig:
    overrides = dict(config.train)
    overrides["seed"] = stable_seed("train", method, beta, beta_hat, fold, seed)
    return TrainConfig(**overrides)


def _run_method(
    config: ExperimentConfig,
    gen: GenConfig,
    method: str,
    train: Dataset,
    test: Dataset,
    beta_hat: float,
    fold: int,
    seed: int,
    include_sensitive: bool,
) -> EvalReport:
    scenario = config.scenario
    beta = (
        gen.beta_label
        if scenario == "label"
        else gen.beta_measure_r if scenario == "measurement" else gen.beta_hist_r
    )
    cfg = _train_config(config, method, beta, beta_hat, fold, seed)
    hidden = tuple(config.hidden)
    dropout = config.dropout

    observed = to_training_views(train, scenario, "train_biased")
    fair = to_training_views(train, scenario, "test_unbiased")
    test_role = "test_biased" if scenario == "historical" else "test_unbiased"
    test_view = to_training_views(test, scenario, test_role)
    group_tr = observed.sensitive[:, 0]
    group_te = test_view.sensitive[:, 0]
    thresholds: "float | tuple[float, float]" = 0.5

    if method == "ours":
        model = bias_model_for(config, gen, beta_hat)
        X_tr = _with_group(observed.X, group_tr) if include_sensitive else observed.X
        X_te = _with_group(test_view.X, group_te) if include_sensitive else test_view.X
        if scenario == "historical":
            result = train_plain(X_tr, observed.y, cfg, hidden, dropout)
            predictor = historical_mode(result.classifier, model)
            scores = predictor.predict_proba(X_te, group_te)
        else:
            result = train_through_program(model, X_tr, observed.y, group_tr, cfg, hidden, dropout)
            scores = result.classifier.predict_proba(X_te)
    elif method == "upper":
        # oracle: fair features and labels, fair features at test
        fair_test = to_training_views(test, scenario, "test_unbiased")
        result = train_plain(_with_group(fair.X, group_tr), fair.y, cfg, hidden, dropout)
        scores = result.classifier.predict_proba(_with_group(fair_test.X, group_te))
        test_view = fair_test
    elif method == "lower":
        result = train_plain(_with_group(observed.X, group_tr), observed.y, cfg, hidden, dropout)
        scores = result.classifier.predict_proba(_with_group(test_view.X, group_te))
    elif method == "unawareness":
        result = run_unawareness(observed.X, observed.y, group_tr, cfg, hidden, dropout)
        scores = result.classifier.predict_proba(test_view.X)
    elif method == "massaging":
        relabeled, _ = massage(observed.X, observed.y, group_tr, cfg, hidden)
        result = train_plain(_with_group(observed.X, group_tr), relabeled, cfg, hidden, dropout)
        scores = result.classifier.predict_proba(_with_group(test_view.X, group_te))
    elif method == "error_parity":
        result = train_plain(_with_group(observed.X, group_tr), observed.y, cfg, hidden, dropout)
        val_idx = result.val_indices
        val_scores = result.classifier.predict_proba(
            _with_group(observed.X, group_tr)[val_idx]
        )
        parity = error_parity_thresholds(val_scores, observed.y[val_idx], group_tr[val_idx])
        thresholds = (parity.threshold_other, parity.threshold_sensitive)
        scores = result.classifier.predict_proba(_with_group(test_view.X, group_te))
    else:
        raise ValueError(f"unknown method {method!r}")
    return evaluate_scores(scores, test_view.y, group_te, thresholds)


# -- sweep driver --------------------------------------------------------------------


def _cell_worker(args):
    config_dict, beta, beta_hat, seed = args
    config = ExperimentConfig.from_dict(config_dict)
    try:
        rows = run_cell(config, beta, beta_hat, seed)
        return ("ok", beta, beta_hat, seed, [asdict_row(r) for r in rows])
    except Exception as exc:  # cell failures are recorded, not fatal
        return ("error", beta, beta_hat, seed, f"{exc}\n{traceback.format_exc()}")


def asdict_row(row: ResultRow) -> dict:
    return {
        "method": row.method,
        "scenario": row.scenario,
        "beta": row.beta,
        "beta_hat": row.beta_hat,
        "fold": row.fold,
        "seed": row.seed,
        "report": row.report.to_dict(),
    }


def row_from_dict(data: dict) -> ResultRow:
    return ResultRow(
        data["method"],
        data["scenario"],
        data["beta"],
        data["beta_hat"],
        data["fold"],
        data["seed"],
        EvalReport(**data["report"]),
    )


def run_sweep(config: ExperimentConfig):
    """Execute all cells, append results.csv, emit SVG plots.

    Returns (rows, failures); failures is a list of (cell, message).
    Existing complete rows in results.csv are not recomputed.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    csv_path = out / "results.csv"
    done = set()
    if csv_path.exists():
        for row in read_results(csv_path):
            done.add((row["method"], row["beta"], row["beta_hat"], row["fold"], row["seed"]))
    else:
        with csv_path.open("w", newline="") as handle:
            csv.writer(handle).writerow(RESULT_FIELDS)

    beta_hats = config.assumed_beta_grid
    cells = []
    for beta in config.beta_grid:
        for beta_hat in beta_hats if beta_hats is not None else [beta]:
            for seed in config.seeds:
                expected = {
                    (m, float(beta), float(beta_hat), f, seed)
                    for m in config.methods
                    for f in range(config.folds)
                }
                if not expected <= done:
                    cells.append((beta, beta_hat, seed))

    failures = []
    rows: "list[ResultRow]" = []

    def record(payload):
        status, beta, beta_hat, seed, data = payload
        if status == "error":
            failures.append(((beta, beta_hat, seed), data))
            return
        cell_rows = [row_from_dict(d) for d in data]
        rows.extend(cell_rows)
        with csv_path.open("a", newline="") as handle:
            writer = csv.writer(handle)
            for row in cell_rows:
                if row.key not in done:
                    writer.writerow(row.to_csv_row())
                    done.add(row.key)

    if config.workers > 1 and len(cells) > 1:
        tasks = [(config.to_dict(), b, bh, s) for b, bh, s in cells]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_cell_worker, task) for task in tasks]
            for future in as_completed(futures):
                record(future.result())
    else:
        for beta, beta_hat, seed in cells:
            record(_cell_worker((config.to_dict(), beta, beta_hat, seed)))

    plot_results(csv_path, out, x_axis="beta_hat" if beta_hats is not None else "beta")
    if failures:
        (out / "failures.json").write_text(
            json.dumps([{"cell": c, "error": e} for c, e in failures], indent=2)
        )
    return rows, failures


def read_results(csv_path) -> "list[dict]":
    rows = []
    with Path(csv_path).open() as handle:
        for record in csv.DictReader(handle):
            row = dict(record)
            for key in RESULT_FIELDS[2:4]:
                row[key] = float(row[key])
            row["fold"] = int(row["fold"])
            row["seed"] = int(row["seed"])
            for key in RESULT_FIELDS[6:]:
                row[key] = float(row[key]) if row[key] != "" else None
            rows.append(row)
    return rows


def aggregate(rows: "list[dict]", metric: str, x_axis: str = "beta"):
    """mean and standard error of a metric per (method, x) point."""
    buckets: "dict[tuple, list[float]]" = {}
    for row in rows:
        value = row[metric]
        if value is None:
            continue
        buckets.setdefault((row["method"], row[x_axis]), []).append(value)
    table: "dict[str, list]" = {}
    for (method, x), values in sorted(buckets.items()):
        arr = np.asarray(values)
        stderr = arr.std(ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else 0.0
        table.setdefault(method, []).append((x, float(arr.mean()), float(stderr)))
    return table


PLOT_METRICS = ("accuracy", "f1", "disparity_score", "eo_gap")


def plot_results(csv_path, out_dir, x_axis: str = "beta") -> "list[Path]":
    """SVG line plots (mean with stderr band) derived purely from the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_results(csv_path)
    out_dir = Path(out_dir)
    written = []
    for metric in PLOT_METRICS:
        table = aggregate(rows, metric, x_axis)
        if not table:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for method, points in table.items():
            xs = [p[0] for p in points]
            means = np.asarray([p[1] for p in points])
            errs = np.asarray([p[2] for p in points])
            ax.plot(xs, means, marker="o", label=method)
            ax.fill_between(xs, means - errs, means + errs, alpha=0.2)
        ax.set_xlabel("assumed bias probability" if x_axis == "beta_hat" else "bias probability")
        ax.set_ylabel(metric.replace("_", " "))
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{metric}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
