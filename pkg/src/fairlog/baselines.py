"""Reference mitigation methods the logic-based approach is compared to.

* lower: train on the observed (possibly biased) features and labels.
* upper: train on the fair features and labels (oracle).
* unawareness: lower, with the sensitive column dropped from the input.
* massaging: relabel borderline examples until group positive rates
  match, then train on the massaged labels.
* error parity: train the lower model, then pick per-group decision
  thresholds on a calibration split so hard positive rates match.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .net import TrainConfig
from .training import TrainResult, train_plain


def _with_group(X: np.ndarray, groups: np.ndarray) -> np.ndarray:
    return np.column_stack([X, np.asarray(groups, dtype=np.float64)])


def run_lower(X, y, groups, config: TrainConfig, hidden=(32, 32, 32), dropout=0.0) -> TrainResult:
    """Observed features (including the sensitive column) and observed labels."""
    return train_plain(_with_group(X, groups), y, config, hidden, dropout)


def run_upper(X, y, groups, config: TrainConfig, hidden=(32, 32, 32), dropout=0.0) -> TrainResult:
    """Fair features and labels; callers pass the unbiased view."""
    return train_plain(_with_group(X, groups), y, config, hidden, dropout)


def run_unawareness(X, y, groups, config: TrainConfig, hidden=(32, 32, 32), dropout=0.0) -> TrainResult:
    """Observed features and labels without the sensitive column."""
    return train_plain(np.asarray(X, dtype=np.float64), y, config, hidden, dropout)


@dataclass
class MassageInfo:
    n_swaps: int
    promoted: np.ndarray  # indices relabeled 0 -> 1 (sensitive group)
    demoted: np.ndarray  # indices relabeled 1 -> 0 (other group)


def massage(
    X: np.ndarray,
    y: np.ndarray,
    groups: np.ndarray,
    config: TrainConfig,
    hidden=(32, 32, 32),
) -> "tuple[np.ndarray, MassageInfo]":
    """Equalize group positive rates by swapping borderline labels.

    A ranker (same architecture, BCE) is fitted to the observed data;
    the M highest-scored negatives of the sensitive group are promoted
    and the M lowest-scored positives of the other group are demoted,
    with M minimizing the post-swap rate gap.
    """
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(groups).astype(bool)
    if not mask.any() or mask.all():
        raise ValueError("massaging needs both groups nonempty")
    ranker_cfg = TrainConfig(
        lr=config.lr,
        batch_size=config.batch_size,
        epochs=config.epochs,
        loss="bce",
        weight_decay=config.weight_decay,
        val_fraction=config.val_fraction,
        seed=config.seed,
    )
    ranker = train_plain(_with_group(X, mask), y, ranker_cfg, hidden).classifier
    scores = ranker.predict_proba(_with_group(X, mask))

    n1, n0 = int(mask.sum()), int((~mask).sum())
    pos1 = int(y[mask].sum())
    pos0 = int(y[~mask].sum())
    candidates_promote = np.flatnonzero(mask & (y == 0))
    candidates_demote = np.flatnonzero(~mask & (y == 1))
    feasible = min(len(candidates_promote), len(candidates_demote))

    swaps = np.arange(feasible + 1)
    gap = np.abs((pos1 + swaps) / n1 - (pos0 - swaps) / n0)
    n_swaps = int(np.argmin(gap))
    if n_swaps == feasible and gap[n_swaps] > 1.0 / min(n1, n0):
        warnings.warn(
            f"massaging ran out of candidates after {feasible} swaps; "
            f"residual rate gap {gap[feasible]:.4f}",
            stacklevel=2,
        )

    promote = candidates_promote[np.argsort(-scores[candidates_promote], kind="stable")][:n_swaps]
    demote = candidates_demote[np.argsort(scores[candidates_demote], kind="stable")][:n_swaps]
    relabeled = y.copy()
    relabeled[promote] = 1.0
    relabeled[demote] = 0.0
    return relabeled, MassageInfo(n_swaps, promote, demote)


@dataclass
class ErrorParityResult:
    threshold_other: float
    threshold_sensitive: float
    rate_gap: float
    fallback: bool = False


def error_parity_thresholds(
    scores: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    tolerance: "float | None" = None,
) -> ErrorParityResult:
    """Per-group thresholds equalizing hard positive rates on calibration data.

    Candidate thresholds are all midpoints between consecutive distinct
    scores within each group (plus the extremes); among pairs whose rate
    gap is within tolerance (default 1/min group size), the pair with
    the highest calibration accuracy wins.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    mask = np.asarray(groups).astype(bool)
    if not mask.any() or mask.all():
        raise ValueError("error parity needs both groups nonempty")
    if tolerance is None:
        tolerance = 1.0 / min(mask.sum(), (~mask).sum())

    if np.unique(scores).size == 1:
        warnings.warn("degenerate scores: falling back to one global threshold", stacklevel=2)
        cut = float(scores[0])
        return ErrorParityResult(cut, cut, 0.0, fallback=True)

    def candidates(values: np.ndarray) -> np.ndarray:
        distinct = np.unique(values)
        mids = (distinct[:-1] + distinct[1:]) / 2.0
        return np.concatenate(([distinct[0] - 1.0], mids, [distinct[-1] + 1.0]))

    def stats(values: np.ndarray, truth: np.ndarray, cuts: np.ndarray):
        # rate and #correct as a function of threshold
        rates = np.empty(len(cuts))
        correct = np.empty(len(cuts))
        for i, cut in enumerate(cuts):
            hard = values > cut
            rates[i] = hard.mean()
            correct[i] = (hard == truth).sum()
        return rates, correct

    cuts0 = candidates(scores[~mask])
    cuts1 = candidates(scores[mask])
    rates0, correct0 = stats(scores[~mask], labels[~mask], cuts0)
    rates1, correct1 = stats(scores[mask], labels[mask], cuts1)

    best = None
    order0 = np.argsort(rates0, kind="stable")
    sorted_rates0 = rates0[order0]
    for j, rate1 in enumerate(rates1):
        lo = np.searchsorted(sorted_rates0, rate1 - tolerance, side="left")
        hi = np.searchsorted(sorted_rates0, rate1 + tolerance, side="right")
        if lo >= hi:
            continue
        window = order0[lo:hi]
        i = window[np.argmax(correct0[window])]
        total = correct0[i] + correct1[j]
        gap = abs(rates0[i] - rate1)
        key = (total, -gap)
        if best is None or key > best[0]:
            best = (key, float(cuts0[i]), float(cuts1[j]), gap)
    if best is None:
        warnings.warn(
            "no threshold pair satisfies the parity tolerance; using closest-rate pair",
            stacklevel=2,
        )
        i, j = 0, 0
        gap_matrix = np.abs(rates0[:, None] - rates1[None, :])
        i, j = np.unravel_index(np.argmin(gap_matrix), gap_matrix.shape)
        return ErrorParityResult(float(cuts0[i]), float(cuts1[j]), float(gap_matrix[i, j]), fallback=True)
    _, t0, t1, gap = best
    return ErrorParityResult(t0, t1, float(gap))
