"""Synthetic tabular data with controllable bias channels.

Per row the generator draws a sensitive bit A, a resource bit R, and
n_Q resource-correlated bits Q_i; the fair label thresholds a noisy
linear score. Three corruption channels then produce the observed
columns:

* historical: flips R/Q_i themselves downward for the sensitive group
  (the label is computed from the corrupted features, so it inherits
  the bias); the stored unbiased columns are the counterfactual fair
  world computed from the same underlying draws,
* measurement: flips the observed copies of R/Q_i downward for the
  sensitive group, plus gated XOR noise,
* label: flips the observed label downward for the sensitive group,
  plus ungated XOR noise.

All randomness is counter-based (one hash per (seed, slot, row)), so any
row subset can be generated independently and deterministically.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri


# -- counter-based uniforms ----------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def uniforms(seed: int, slot: int, n: int, start: int = 0) -> np.ndarray:
    """Deterministic U[0,1) values for rows start..start+n of a slot's stream."""
    with np.errstate(over="ignore"):
        base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * np.uint64(2654435761) + np.uint64(slot)
        key = _splitmix64(base)
        rows = np.arange(start, start + n, dtype=np.uint64)
        bits = _splitmix64(key + rows)
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


# -- configuration --------------------------------------------------------------------


def _as_list(value, n: int, name: str) -> "list[float]":
    if np.isscalar(value):
        return [float(value)] * n
    values = [float(v) for v in value]
    if len(values) != n:
        raise ValueError(f"{name} needs {n} entries, got {len(values)}")
    return values


@dataclass
class GenConfig:
    """Generator knobs; defaults reproduce the standard synthetic setup."""

    n_rows: int = 10_000
    n_q: int = 3
    p_a: float = 0.5
    p_r: float = 0.5
    p_q: "float | Sequence[float]" = 0.5
    alpha_a: float = 0.0
    alpha_r: float = 1.0
    alpha_q: "float | Sequence[float]" = 1.0
    alpha_qr: "Optional[Sequence[float]]" = None  # default i/10
    sigma_y: float = 2.0
    s_bar: Optional[float] = None  # default 1.5 if alpha_a == 0 else 2.5
    beta_hist_r: float = 0.0
    beta_hist_q: "float | Sequence[float]" = 0.0
    beta_measure_r: float = 0.0
    beta_measure_q: "float | Sequence[float]" = 0.0
    beta_label: float = 0.0
    p_noise_y: float = 0.0
    p_noise_r: float = 0.0
    p_noise_q: "float | Sequence[float]" = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 0 or self.n_q < 0:
            raise ValueError("n_rows and n_q must be nonnegative")
        if self.sigma_y < 0:
            raise ValueError("sigma_y must be nonnegative")
        for name in ("p_a", "p_r", "beta_hist_r", "beta_measure_r", "beta_label",
                     "p_noise_y", "p_noise_r"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} = {value} outside [0, 1]")
        if self.alpha_qr is None:
            self.alpha_qr = [i / 10.0 for i in range(1, self.n_q + 1)]
        if self.s_bar is None:
            self.s_bar = 1.5 if self.alpha_a == 0.0 else 2.5
        for name in ("p_q", "alpha_q", "alpha_qr", "beta_hist_q", "beta_measure_q", "p_noise_q"):
            setattr(self, name, _as_list(getattr(self, name), self.n_q, name))
        for name in ("p_q", "beta_hist_q", "beta_measure_q", "p_noise_q"):
            for value in getattr(self, name):
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"{name} entry {value} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        return cls(**data)


# -- dataset container ------------------------------------------------------------------


@dataclass
class Dataset:
    """Aligned unbiased/biased columns plus role metadata."""

    columns: "dict[str, np.ndarray]"
    roles: dict = field(default_factory=dict)
    config: Optional[GenConfig] = None

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.columns[n] for n in names]).astype(np.float64)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            {name: col[idx] for name, col in self.columns.items()},
            roles=self.roles,
            config=self.config,
        )

    @property
    def header(self) -> "list[str]":
        return list(self.columns.keys())

    def to_csv(self, path, manifest: bool = True) -> None:
        path = Path(path)
        names = self.header
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(names)
            data = np.column_stack([self.columns[n] for n in names]).astype(int)
            writer.writerows(data.tolist())
        if manifest:
            doc = {
                "roles": self.roles,
                "config": self.config.to_dict() if self.config else None,
            }
            manifest_path = path.with_suffix(path.suffix + ".manifest.json")
            manifest_path.write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path, roles: Optional[dict] = None) -> "Dataset":
        path = Path(path)
        with path.open() as handle:
            reader = csv.reader(handle)
            names = next(reader)
            rows = [[int(v) for v in row] for row in reader if row]
        data = np.asarray(rows, dtype=np.int8)
        columns = {name: data[:, i] for i, name in enumerate(names)}
        config = None
        if roles is None:
            manifest_path = path.with_suffix(path.suffix + ".manifest.json")
            if manifest_path.exists():
                doc = json.loads(manifest_path.read_text())
                roles = doc.get("roles")
                if doc.get("config"):
                    config = GenConfig.from_dict(doc["config"])
        if roles is None:
            raise ValueError("no role mapping: pass roles= or provide a manifest file")
        return cls(columns, roles=roles, config=config)


def standard_roles(n_q: int) -> dict:
    q_names = [f"q{i}" for i in range(1, n_q + 1)]
    return {
        "sensitive": ["a"],
        "features": ["r"] + q_names,
        "features_biased": ["r_t"] + [f"{q}_t" for q in q_names],
        "label": "y",
        "label_biased": "y_t",
    }


# -- generation ----------------------------------------------------------------------

# slot layout for the counter-based streams (per row)
_SLOT_A = 0
_SLOT_R = 1
_SLOT_HIST_R = 2
_SLOT_MEAS_R = 3
_SLOT_NOISE_R = 4
_SLOT_EPS = 5
_SLOT_LABEL = 6
_SLOT_NOISE_Y = 7
_SLOT_Q = 8  # four slots per q feature


def _bernoulli(u: np.ndarray, p) -> np.ndarray:
    return u < p


def generate(config: GenConfig, start_row: int = 0, n_rows: Optional[int] = None) -> Dataset:
    """Sample a dataset; fully determined by (config.seed, row index).

    The unbiased columns hold the counterfactual fair world (identical
    to the observed chain when all historical betas are zero); the
    biased columns hold the observed world after historical, measurement
    and label corruption.
    """
    n = config.n_rows if n_rows is None else n_rows
    seed = config.seed

    def stream(slot: int) -> np.ndarray:
        return uniforms(seed, slot, n, start=start_row)

    a = _bernoulli(stream(_SLOT_A), config.p_a)
    a_f = a.astype(np.float64)

    r_fair = _bernoulli(stream(_SLOT_R), config.p_r)
    hist_flip_r = _bernoulli(stream(_SLOT_HIST_R), config.beta_hist_r * a_f)
    r_hist = r_fair & ~hist_flip_r

    q_fair = []
    q_hist = []
    for i in range(config.n_q):
        base = stream(_SLOT_Q + 4 * i)
        p_fair = config.p_q[i] + config.alpha_qr[i] * r_fair.astype(np.float64)
        p_hist = config.p_q[i] + config.alpha_qr[i] * r_hist.astype(np.float64)
        if p_fair.max(initial=0.0) > 1.0 or p_hist.max(initial=0.0) > 1.0:
            warnings.warn(
                f"q{i + 1} Bernoulli parameter exceeds 1; clipping", stacklevel=2
            )
            p_fair = np.clip(p_fair, 0.0, 1.0)
            p_hist = np.clip(p_hist, 0.0, 1.0)
        qf = _bernoulli(base, p_fair)
        qh_base = _bernoulli(base, p_hist)  # same draw: coupled counterfactual
        hist_flip = _bernoulli(stream(_SLOT_Q + 4 * i + 1), config.beta_hist_q[i] * a_f)
        q_fair.append(qf)
        q_hist.append(qh_base & ~hist_flip)

    eps = config.sigma_y * ndtri(np.clip(stream(_SLOT_EPS), 1e-15, 1.0 - 1e-15))
    group_term = config.alpha_a * (1.0 - a_f)

    def score(r, qs) -> np.ndarray:
        total = group_term + config.alpha_r * r.astype(np.float64)
        for i, q in enumerate(qs):
            total = total + config.alpha_q[i] * q.astype(np.float64)
        return total + eps

    y_fair = score(r_fair, q_fair) > config.s_bar
    y_hist = score(r_hist, q_hist) > config.s_bar

    meas_flip_r = _bernoulli(stream(_SLOT_MEAS_R), config.beta_measure_r * a_f)
    noise_r = _bernoulli(stream(_SLOT_NOISE_R), config.p_noise_r * a_f)
    r_obs = (r_hist & ~meas_flip_r) ^ noise_r

    q_obs = []
    for i in range(config.n_q):
        meas_flip = _bernoulli(stream(_SLOT_Q + 4 * i + 2), config.beta_measure_q[i] * a_f)
        noise = _bernoulli(stream(_SLOT_Q + 4 * i + 3), config.p_noise_q[i] * a_f)
        q_obs.append((q_hist[i] & ~meas_flip) ^ noise)

    label_flip = _bernoulli(stream(_SLOT_LABEL), config.beta_label * a_f)
    noise_y = _bernoulli(stream(_SLOT_NOISE_Y), config.p_noise_y)  # ungated
    y_obs = (y_hist & ~label_flip) ^ noise_y

    columns = {"a": a.astype(np.int8), "r": r_fair.astype(np.int8)}
    for i, q in enumerate(q_fair, start=1):
        columns[f"q{i}"] = q.astype(np.int8)
    columns["y"] = y_fair.astype(np.int8)
    columns["r_t"] = r_obs.astype(np.int8)
    for i, q in enumerate(q_obs, start=1):
        columns[f"q{i}_t"] = q.astype(np.int8)
    columns["y_t"] = y_obs.astype(np.int8)
    return Dataset(columns, roles=standard_roles(config.n_q), config=config)


# -- training views -----------------------------------------------------------------

_SCENARIOS = ("label", "measurement", "historical")
_ROLES = ("train_biased", "test_unbiased", "test_biased")


@dataclass
class View:
    X: np.ndarray  # model-input features, sensitive columns excluded
    y: np.ndarray
    sensitive: np.ndarray  # (n, k) sensitive attribute values
    feature_names: "list[str]"


def to_training_views(dataset: Dataset, scenario: str, role: str) -> View:
    """Feature/label selection for a scenario.

    Training always pairs the scenario's observed features with the
    observed labels; unbiased tests use fair features and labels; biased
    tests pair observed features with fair labels (the historical
    evaluation: predict the fair label from corrupted features).
    """
    if scenario not in _SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {_SCENARIOS}")
    if role not in _ROLES:
        raise ValueError(f"unknown role {role!r}; expected one of {_ROLES}")
    roles = dataset.roles
    fair_names = roles["features"]
    biased_names = roles["features_biased"]
    if role == "train_biased":
        names = fair_names if scenario == "label" else biased_names
        label = roles["label_biased"]
    elif role == "test_unbiased":
        names = fair_names
        label = roles["label"]
    else:  # test_biased
        names = biased_names
        label = roles["label"]
    sens = dataset.matrix(roles["sensitive"])
    return View(
        X=dataset.matrix(names),
        y=dataset.column(label).astype(np.float64),
        sensitive=sens,
        feature_names=list(names),
    )


def apply_label_bias_chain(
    dataset: Dataset,
    attrs: Sequence[str],
    betas: Sequence[float],
    p_noise: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Re-corrupt the observed label with one bias stage per attribute.

    Stage i demotes the running label with probability betas[i] when
    attribute attrs[i] is 1; a final ungated XOR noise is applied. New
    attribute columns not yet in the dataset are drawn Bernoulli(0.5).
    Returns a new dataset whose y_t column carries the chained bias.
    """
    if len(attrs) != len(betas):
        raise ValueError("need one beta per attribute")
    columns = dict(dataset.columns)
    n = dataset.n_rows
    roles = dict(dataset.roles)
    sensitive = list(roles.get("sensitive", []))
    label = columns[roles["label"]].astype(bool)
    running = label.copy()
    chain_slot = 1_000_000  # clear of the generator's per-feature slots
    for i, (attr, beta) in enumerate(zip(attrs, betas)):
        if attr not in columns:
            columns[attr] = _bernoulli(uniforms(seed, chain_slot + 3 * i, n), 0.5).astype(np.int8)
        if attr not in sensitive:
            sensitive.append(attr)
        gate = columns[attr].astype(np.float64)
        flip = _bernoulli(uniforms(seed, chain_slot + 3 * i + 1, n), beta * gate)
        running = running & ~flip
    noise = _bernoulli(uniforms(seed, chain_slot - 1, n), p_noise)
    columns[roles["label_biased"]] = (running ^ noise).astype(np.int8)
    roles["sensitive"] = sensitive
    return Dataset(columns, roles=roles, config=dataset.config)
