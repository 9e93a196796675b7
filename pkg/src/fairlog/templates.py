"""Bias-mechanism programs and their parameters.

Three mechanisms are modeled as small logic programs over a classifier
fact ``y_h``:

* label bias: the observed label is a group-dependent corruption of the
  fair label; the program predicts the *observed* label from the
  classifier's fair prediction, so training on observed labels teaches
  the classifier the fair ones.
* measurement bias: observed features are corruptions of fair features;
  the program mixes classifier predictions over candidate fair feature
  vectors, weighted by reverse (observed -> fair) flip probabilities.
* historical bias: corruption affects features and, through them,
  labels; a classifier trained directly on the observed data is wrapped
  with the measurement mechanism at prediction time.

Each mechanism is parameterized by four conditional flip probabilities
per affected attribute: negative / positive flips for the sensitive and
non-sensitive group.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .logic import ParameterTable, Program, Struct, parse


class DegenerateInputError(ValueError):
    """A conditional is requested for an event of probability zero."""


@dataclass(frozen=True)
class FlipProbs:
    """The four conditionals of one binary corruption channel.

    neg_* is the probability of corrupting 1 -> 0, pos_* of 0 -> 1, for
    the sensitive (A = 1) and other (A = 0) group respectively.
    """

    neg_sensitive: float = 0.0
    neg_other: float = 0.0
    pos_sensitive: float = 0.0
    pos_other: float = 0.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} = {value} outside [0, 1]")

    def as_dict(self) -> dict:
        return {
            "neg_sensitive": self.neg_sensitive,
            "neg_other": self.neg_other,
            "pos_sensitive": self.pos_sensitive,
            "pos_other": self.pos_other,
        }

    def as_tuple(self) -> tuple:
        return (self.neg_sensitive, self.neg_other, self.pos_sensitive, self.pos_other)


@dataclass
class BiasSpec:
    """A bias mechanism with its flip probabilities.

    ``label_flips`` maps each sensitive attribute to the label channel
    it drives (label kind, one entry per chained attribute).
    ``feature_flips`` holds one channel per feature, 1-based order
    (measurement/historical kinds).
    """

    kind: str
    sensitive: "tuple[str, ...]" = ("a",)
    label_flips: "Optional[dict[str, FlipProbs]]" = None
    feature_flips: "Optional[list[FlipProbs]]" = None

    def __post_init__(self):
        if self.kind not in ("label", "measurement", "historical"):
            raise ValueError(f"unknown bias kind {self.kind!r}")
        self.sensitive = tuple(self.sensitive)
        if self.kind == "label":
            if not self.label_flips or set(self.label_flips) != set(self.sensitive):
                raise ValueError("label bias needs one FlipProbs per sensitive attribute")
            if self.feature_flips:
                raise ValueError("label bias affects exactly the label, not features")
        else:
            if not self.feature_flips:
                raise ValueError(f"{self.kind} bias must affect at least one feature")
            if self.label_flips:
                raise ValueError(f"{self.kind} bias affects features, not the label")

    @property
    def n_features(self) -> int:
        return len(self.feature_flips) if self.feature_flips else 0

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "sensitive": list(self.sensitive)}
        if self.label_flips is not None:
            doc["label_flips"] = {k: list(v.as_tuple()) for k, v in self.label_flips.items()}
        if self.feature_flips is not None:
            doc["feature_flips"] = [list(v.as_tuple()) for v in self.feature_flips]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "BiasSpec":
        label_flips = doc.get("label_flips")
        feature_flips = doc.get("feature_flips")
        return cls(
            kind=doc["kind"],
            sensitive=tuple(doc.get("sensitive", ("a",))),
            label_flips=(
                {k: FlipProbs(*v) for k, v in label_flips.items()} if label_flips else None
            ),
            feature_flips=(
                [FlipProbs(*v) for v in feature_flips] if feature_flips else None
            ),
        )


def simplify(spec: BiasSpec, assumption: str) -> BiasSpec:
    """Zero parameter cells under a simplifying assumption.

    ``no_positive_bias`` zeroes the positive cells (p3, p4);
    ``no_bias_on_nonsensitive`` zeroes the non-sensitive cells (p2, p4).
    """
    if spec.kind != "label":
        raise ValueError("simplifying assumptions are defined for label bias")
    if assumption == "no_positive_bias":
        fix = lambda f: replace(f, pos_sensitive=0.0, pos_other=0.0)
    elif assumption == "no_bias_on_nonsensitive":
        fix = lambda f: replace(f, neg_other=0.0, pos_other=0.0)
    else:
        raise ValueError(f"unknown assumption {assumption!r}")
    return BiasSpec(
        kind=spec.kind,
        sensitive=spec.sensitive,
        label_flips={name: fix(f) for name, f in spec.label_flips.items()},
    )


# -- program builders -------------------------------------------------------------


def build_label_bias_program(sensitive_attrs: Sequence[str]) -> Program:
    """Label-bias program for one or more sensitive attributes.

    One attribute yields the single-stage program (classifier fact,
    attribute selector, four bias facts, two rules defining the observed
    label). Several attributes chain one stage per attribute, in list
    order; order matters and is preserved.
    """
    attrs = list(sensitive_attrs)
    if not attrs:
        raise ValueError("need at least one sensitive attribute")
    lines = ["nn(h,X) :: y_h(X).", ""]
    if len(attrs) == 1:
        name = attrs[0]
        lines[1:1] = [f"nn({name},X) :: {name}(X)."]
        lines += [
            f"p1 :: label_neg_bias(X) :- {name}(X).",
            f"p2 :: label_neg_bias(X) :- \\+{name}(X).",
            f"p3 :: label_pos_bias(X) :- {name}(X).",
            f"p4 :: label_pos_bias(X) :- \\+{name}(X).",
            "",
            "y_(X) :- y_h(X), \\+label_neg_bias(X).",
            "y_(X) :- \\+y_h(X), label_pos_bias(X).",
            "",
            "?- y_(x).",
        ]
        return parse("\n".join(lines))
    for name in attrs:
        lines.append(f"nn({name},X) :: {name}(X).")
    lines.append("")
    for name in attrs:
        lines += [
            f"p1_{name} :: label_neg_bias_{name}(X):- {name}(X).",
            f"p2_{name} :: label_neg_bias_{name}(X):- \\+{name}(X).",
            f"p3_{name} :: label_pos_bias_{name}(X):- {name}(X).",
            f"p4_{name} :: label_pos_bias_{name}(X):- \\+{name}(X).",
            "",
        ]
    previous = "y_h"
    for stage, name in enumerate(attrs, start=1):
        current = f"y{stage}" if stage < len(attrs) else "y_"
        lines += [
            f"{current}(X) :- {previous}(X), \\+label_neg_bias_{name}(X).",
            f"{current}(X) :- \\+{previous}(X), label_pos_bias_{name}(X).",
            "",
        ]
        previous = current
    lines.append("?- y_(x).")
    return parse("\n".join(lines))


def build_measurement_bias_program(n_features: int) -> Program:
    """Measurement-bias program debiasing features n..1 recursively.

    The prediction is the mixture over all candidate fair vectors: each
    observed feature independently flips with its reverse-direction
    probability, and the classifier scores every resulting vector.
    """
    if n_features < 1:
        raise ValueError("need at least one feature")
    n = n_features
    lines = [
        "nn(h,X)    :: y_h(X).",
        "nn(n,X_,N) :: n(X_,N).",
        "nn(a,X_)   :: a(X_).",
        "",
    ]
    for i in range(1, n + 1):
        before = ",".join("0" if j == i else f"V{j}" for j in range(1, n + 1))
        after = ",".join("1" if j == i else f"V{j}" for j in range(1, n + 1))
        lines.append(f"debias_n({i}, x_({before}), x_({after})).")
    lines += [
        "",
        "p1(N) :: n_neg_bias(X_,N) :- a(X_).",
        "p2(N) :: n_neg_bias(X_,N) :- \\+a(X_).",
        "p3(N) :: n_pos_bias(X_,N) :- a(X_).",
        "p4(N) :: n_pos_bias(X_,N) :- \\+a(X_).",
        "",
        "n_biased(X_,N) :- \\+n(X_,N), n_neg_bias(X_,N).",
        "n_biased(X_,N) :- n(X_,N), n_pos_bias(X_,N).",
        "",
        "debias(X_, X_, 0).",
        "debias(X_, X, N) :- >(N,0), is(N2,N-1), n_biased(X_,N), debias_n(N,X_,Xf), debias(Xf,X,N2).",
        "debias(X_, X, N) :- >(N,0), is(N2,N-1), \\+n_biased(X_,N), debias(X_,X,N2).",
        "",
        f"y(X_) :- debias(X_,X,{n}), y_h(X).",
        "",
        f"?- y(x_({','.join(['0'] * n)})).",
    ]
    return parse("\n".join(lines))


# -- bias model bundle ---------------------------------------------------------------


@dataclass
class BiasModel:
    """A program plus everything needed to train or predict through it.

    ``sensitive_nets`` are ground-time attribute selectors, in the
    column order of the sensitive matrix handed to the engine.
    """

    program: Program
    params: ParameterTable
    query: Struct
    sensitive_nets: "tuple[str, ...]"
    kind: str
    n_features: int = 0


def spec_to_parameter_table(spec: BiasSpec) -> ParameterTable:
    entries = {}
    if spec.kind == "label":
        attrs = spec.sensitive
        for name in attrs:
            flips = spec.label_flips[name]
            suffix = "" if len(attrs) == 1 else f"_{name}"
            entries[(f"p1{suffix}", 0)] = flips.neg_sensitive
            entries[(f"p2{suffix}", 0)] = flips.neg_other
            entries[(f"p3{suffix}", 0)] = flips.pos_sensitive
            entries[(f"p4{suffix}", 0)] = flips.pos_other
    else:
        for i, flips in enumerate(spec.feature_flips, start=1):
            entries[("p1", i)] = flips.neg_sensitive
            entries[("p2", i)] = flips.neg_other
            entries[("p3", i)] = flips.pos_sensitive
            entries[("p4", i)] = flips.pos_other
    return ParameterTable(entries)


def build_model(spec: BiasSpec) -> BiasModel:
    """Program + parameter table + selector layout for a BiasSpec."""
    if spec.kind == "label":
        program = build_label_bias_program(spec.sensitive)
        n_features = 0
    else:
        if len(spec.sensitive) != 1:
            raise ValueError("measurement/historical templates use one sensitive attribute")
        program = build_measurement_bias_program(spec.n_features)
        n_features = spec.n_features
    return BiasModel(
        program=program,
        params=spec_to_parameter_table(spec),
        query=program.queries[0],
        sensitive_nets=spec.sensitive if spec.kind == "label" else ("a",),
        kind=spec.kind,
        n_features=n_features,
    )


# -- parameter derivation ---------------------------------------------------------------


def derive_forward_label_params(beta_label: float, p_noise: float) -> FlipProbs:
    """Forward label channel: demotion gated by A, XOR noise ungated.

    P(obs 0 | true 1, A=1) composes the two stages: beta + p - 2*beta*p.
    """
    for value in (beta_label, p_noise):
        if not 0.0 <= value <= 1.0:
            raise ValueError("channel probabilities must be in [0, 1]")
    composite = beta_label + p_noise - 2.0 * beta_label * p_noise
    return FlipProbs(
        neg_sensitive=composite,
        neg_other=p_noise,
        pos_sensitive=p_noise,
        pos_other=p_noise,
    )


def derive_forward_feature_params(beta: float, p_noise: float) -> FlipProbs:
    """Forward feature channel: demotion and XOR noise both gated by A."""
    for value in (beta, p_noise):
        if not 0.0 <= value <= 1.0:
            raise ValueError("channel probabilities must be in [0, 1]")
    composite = beta + p_noise - 2.0 * beta * p_noise
    return FlipProbs(
        neg_sensitive=composite,
        neg_other=0.0,
        pos_sensitive=p_noise,
        pos_other=0.0,
    )


def _reverse_one_group(marginal: float, f_neg: float, f_pos: float) -> "tuple[float, float]":
    """Bayes inversion of one group's 2x2 channel.

    Returns (P(true=1 | obs=0), P(true=0 | obs=1)): the reverse flip
    probabilities conditioned on the observed value.
    """
    joint_11 = marginal * (1.0 - f_neg)
    joint_10 = marginal * f_neg  # true 1, observed 0
    joint_01 = (1.0 - marginal) * f_pos  # true 0, observed 1
    joint_00 = (1.0 - marginal) * (1.0 - f_pos)
    p_obs0 = joint_10 + joint_00
    p_obs1 = joint_11 + joint_01
    if p_obs0 <= 0.0 or p_obs1 <= 0.0:
        raise DegenerateInputError(
            "an observed value has probability zero; reverse conditionals undefined"
        )
    return joint_10 / p_obs0, joint_01 / p_obs1


def derive_reverse_feature_params(
    forward: FlipProbs,
    marginal_sensitive: float,
    marginal_other: float,
) -> FlipProbs:
    """Invert a forward (fair -> observed) channel by exact Bayes.

    ``marginal_*`` is P(fair value = 1 | group). The result holds the
    reverse conditionals P(fair != observed | observed, group), which is
    what the measurement template's facts mean.
    """
    rev_neg_s, rev_pos_s = _reverse_one_group(
        marginal_sensitive, forward.neg_sensitive, forward.pos_sensitive
    )
    rev_neg_o, rev_pos_o = _reverse_one_group(
        marginal_other, forward.neg_other, forward.pos_other
    )
    return FlipProbs(
        neg_sensitive=rev_neg_s,
        neg_other=rev_neg_o,
        pos_sensitive=rev_pos_s,
        pos_other=rev_pos_o,
    )


# -- estimation from paired data ------------------------------------------------------


@dataclass
class EstimatedParams:
    """Empirical flip frequencies plus the evidence behind them.

    ``values`` holds None for cells with no observations (unestimated);
    ``counts`` holds the number of rows conditioning each cell, which is
    what hoeffding_n bounds should be applied to.
    """

    values: "dict[str, Optional[float]]"
    counts: "dict[str, int]"

    @property
    def unestimated(self) -> "tuple[str, ...]":
        return tuple(name for name, value in self.values.items() if value is None)

    def to_flip_probs(self, default: float = 0.0) -> FlipProbs:
        if self.unestimated:
            warnings.warn(
                f"cells {self.unestimated} had no data; defaulting to {default}",
                stacklevel=2,
            )
        filled = {k: (default if v is None else v) for k, v in self.values.items()}
        return FlipProbs(**filled)


def estimate_params(
    sensitive: np.ndarray,
    true_values: np.ndarray,
    observed_values: np.ndarray,
    direction: str = "forward",
) -> EstimatedParams:
    """Estimate the four channel cells from paired (true, observed) data.

    ``forward`` conditions on the true value (label-bias parameters);
    ``reverse`` conditions on the observed value (measurement-template
    parameters).
    """
    a = np.asarray(sensitive).astype(bool)
    v = np.asarray(true_values).astype(bool)
    o = np.asarray(observed_values).astype(bool)
    if not (len(a) == len(v) == len(o)) or len(a) == 0:
        raise ValueError("paired data must be nonempty and aligned")
    if direction == "forward":
        cond, flipped_to = v, o
    elif direction == "reverse":
        cond, flipped_to = o, v
    else:
        raise ValueError(f"unknown direction {direction!r}")
    values: "dict[str, Optional[float]]" = {}
    counts: "dict[str, int]" = {}
    cells = {
        "neg_sensitive": (a, cond),
        "neg_other": (~a, cond),
        "pos_sensitive": (a, ~cond),
        "pos_other": (~a, ~cond),
    }
    for name, (group_mask, cond_mask) in cells.items():
        mask = group_mask & cond_mask
        count = int(mask.sum())
        counts[name] = count
        if count == 0:
            values[name] = None
        elif name.startswith("neg"):
            values[name] = float((~flipped_to[mask]).mean())
        else:
            values[name] = float(flipped_to[mask].mean())
    return EstimatedParams(values, counts)


def hoeffding_n(eps: float, gamma: float) -> int:
    """Sample count guaranteeing estimation error <= eps at confidence gamma.

    Ceiling of ln(2 / (1 - gamma)) / (2 eps^2). At eps=0.1, gamma=0.95
    this is 185 (184.44 before rounding).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    return math.ceil(math.log(2.0 / (1.0 - gamma)) / (2.0 * eps * eps))
