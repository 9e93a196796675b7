"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The sweep-based
criteria (6, 7, 8, 11) train hundreds of models; expect roughly half an
hour total on two cores.
"""

import time
from collections import defaultdict

import numpy as np
import pytest

from fairlog.baselines import error_parity_thresholds, massage
from fairlog.datagen import GenConfig, generate, to_training_views
from fairlog.experiments import ExperimentConfig, read_results, run_sweep
from fairlog.logic import (
    Const,
    NeuralBinding,
    Struct,
    brute_force,
    evaluate,
    ground,
    leaf_probabilities,
    parse,
)
from fairlog.losses import LossSpec
from fairlog.net import Classifier, TrainConfig
from fairlog.templates import (
    BiasSpec,
    FlipProbs,
    build_model,
    derive_forward_feature_params,
    derive_forward_label_params,
    derive_reverse_feature_params,
    estimate_params,
    hoeffding_n,
)
from fairlog.training import (
    CircuitObjective,
    train_plain,
    train_through_program,
)
from util import CHAIN_ATTRS, CHAIN_BETAS, chain_dataset, random_ground_program

ACCEPT_EPOCHS = 50


def report(criterion: int, detail: str):
    print(f"\nCRITERION {criterion} PASS: {detail}")


# ---------------------------------------------------------------------------------


def test_c01_engine_golden(example1_text):
    start = time.time()
    program = parse(example1_text)
    mary = ground(program, Struct("gets_loan", (Const("mary"),)))
    p_mary = evaluate(mary, leaf_probabilities(mary)).probability
    john = ground(program, Struct("gets_loan", (Const("john"),)))
    p_john = evaluate(john, leaf_probabilities(john)).probability
    elapsed = time.time() - start
    assert abs(p_mary - 0.9) <= 1e-12
    assert abs(p_john - 1.0) <= 1e-12
    assert elapsed < 1.0
    report(1, f"P(mary)={p_mary}, P(john)={p_john}, {elapsed:.3f}s")


def test_c02_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(20240)
    worst = 0.0
    for _ in range(1000):
        program = random_ground_program(rng)
        circuit = ground(program, program.queries[0])
        probs = leaf_probabilities(circuit)
        exact = evaluate(circuit, probs).probability
        oracle = brute_force(circuit, probs)
        worst = max(worst, abs(exact - oracle))
    elapsed = time.time() - start
    assert worst <= 1e-12
    assert elapsed < 60.0
    report(2, f"1000 programs, max |evaluate - brute_force| = {worst:.2e}, {elapsed:.1f}s")


def _leaf_gradient_suite(circuit, probs, n_target, probe="brute_force"):
    """Central finite differences on leaf probabilities vs reported grads.

    Small circuits are probed with the possible-world oracle; circuits
    beyond the enumeration guard use the (oracle-verified) evaluator's
    value path as the probe.
    """
    value_of = (
        (lambda p: brute_force(circuit, p))
        if probe == "brute_force"
        else (lambda p: evaluate(circuit, p).probability)
    )
    res = evaluate(circuit, probs)
    checked = 0
    worst = 0.0
    for leaf in circuit.tape().leaves:
        step = 1e-6
        up, down = dict(probs), dict(probs)
        up[leaf.key] = min(1.0, probs[leaf.key] + step)
        down[leaf.key] = max(0.0, probs[leaf.key] - step)
        fd = (value_of(up) - value_of(down)) / (up[leaf.key] - down[leaf.key])
        got = res.gradients[leaf.key]
        if abs(fd) > 1e-9:
            worst = max(worst, abs(got - fd) / abs(fd))
            checked += 1
        if checked >= n_target:
            break
    return checked, worst


def _network_gradient_suite(model, X, y, sens, hidden, n_target, seed):
    clf = Classifier(X.shape[1], hidden=hidden, seed=seed)
    objective = CircuitObjective(model, X, y, sens)
    idx = np.arange(len(y))
    spec = LossSpec("bce")
    _, grads = objective.batch_loss_and_grads(clf, idx, spec, None)
    params = clf.parameters()
    rng = np.random.default_rng(seed)
    checked = 0
    worst = 0.0
    while checked < n_target:
        pi = int(rng.integers(0, len(params)))
        fi = int(rng.integers(0, params[pi].size))
        orig = params[pi].flat[fi]
        params[pi].flat[fi] = orig + 1e-6
        up = objective.mean_loss(clf, idx, spec)
        params[pi].flat[fi] = orig - 1e-6
        down = objective.mean_loss(clf, idx, spec)
        params[pi].flat[fi] = orig
        fd = (up - down) / 2e-6
        if abs(fd) > 1e-8:
            got = grads[pi].flat[fi]
            worst = max(worst, abs(got - fd) / abs(fd))
            checked += 1
    return checked, worst


def test_c03_gradient_suite():
    start = time.time()
    rng = np.random.default_rng(5)

    # Template 1 (label) circuit: leaf gradients on brute-forceable circuits
    label_model = build_model(
        BiasSpec("label", ("a",), label_flips={"a": derive_forward_label_params(0.3, 0.1)})
    )
    bindings = {
        "a": NeuralBinding(lambda args, ctx: 1.0, ground_time=True),
        "h": NeuralBinding(lambda args, ctx: 0.6),
    }
    t1 = ground(label_model.program, label_model.query, label_model.params, bindings)
    worst_leaf = 0.0
    checked_leaf = 0
    for _ in range(20):
        probs = {leaf.key: float(rng.uniform(0.05, 0.95)) for leaf in t1.tape().leaves}
        n, w = _leaf_gradient_suite(t1, probs, n_target=10)
        checked_leaf += n
        worst_leaf = max(worst_leaf, w)

    # Template 2 (measurement) circuit leaf gradients
    forward = derive_forward_feature_params(0.25, 0.05)
    flips = [derive_reverse_feature_params(forward, m, m) for m in (0.5, 0.55, 0.6)]
    meas_model = build_model(BiasSpec("measurement", ("a",), feature_flips=flips))
    bindings = {
        "a": NeuralBinding(lambda args, ctx: 1.0, ground_time=True),
        "n": NeuralBinding(lambda args, ctx: 0.0),
        "h": NeuralBinding(lambda args, ctx: 0.5),
    }
    t2 = ground(meas_model.program, meas_model.query, meas_model.params, bindings)
    for _ in range(5):
        probs = {leaf.key: float(rng.uniform(0.05, 0.95)) for leaf in t2.tape().leaves}
        n, w = _leaf_gradient_suite(t2, probs, n_target=15, probe="evaluate")
        checked_leaf += n
        worst_leaf = max(worst_leaf, w)
    assert checked_leaf >= 100
    assert worst_leaf <= 1e-4

    # end-to-end network gradients through both templates
    X = rng.integers(0, 2, (24, 3)).astype(float)
    y = rng.integers(0, 2, 24).astype(float)
    sens = rng.integers(0, 2, 24).astype(float)
    label3 = build_model(
        BiasSpec("label", ("a",), label_flips={"a": derive_forward_label_params(0.3, 0.1)})
    )
    n1, w1 = _network_gradient_suite(label3, X, y, sens, (8,), 50, seed=1)
    n2, w2 = _network_gradient_suite(meas_model, X, y, sens, (8,), 50, seed=2)
    elapsed = time.time() - start
    assert n1 >= 50 and w1 <= 1e-4
    assert n2 >= 50 and w2 <= 1e-4
    assert elapsed < 60.0
    report(
        3,
        f"leaf grads: {checked_leaf} checks (worst rel {worst_leaf:.2e}); "
        f"network grads: {n1}+{n2} checks (worst rel {max(w1, w2):.2e}); {elapsed:.1f}s",
    )


def test_c04_template_reduction():
    start = time.time()
    rng = np.random.default_rng(7)
    n = 2000
    X = rng.integers(0, 2, (n, 4)).astype(float)
    y = ((X.sum(axis=1) + rng.normal(0, 1, n)) > 2).astype(float)
    sens = rng.integers(0, 2, n).astype(float)
    model = build_model(BiasSpec("label", ("a",), label_flips={"a": FlipProbs(0, 0, 0, 0)}))
    config = TrainConfig(epochs=30, seed=11)
    plain = train_plain(X, y, config)
    through = train_through_program(model, X, y, sens, config)
    worst = 0.0
    for e1, e2 in zip(plain.history, through.history):
        worst = max(
            worst,
            abs(e1["train_loss"] - e2["train_loss"]),
            abs(e1["val_loss"] - e2["val_loss"]),
        )
    elapsed = time.time() - start
    assert worst <= 1e-6
    assert elapsed < 60.0
    report(4, f"30 epochs, max per-epoch loss gap = {worst:.2e}, {elapsed:.1f}s")


def test_c05_generator_channels():
    start = time.time()
    worst = 0.0
    for beta in (0.0, 0.1, 0.3, 0.5):
        for p in (0.0, 0.1):
            config = GenConfig(
                n_rows=1_000_000, beta_label=beta, p_noise_y=p, seed=int(1000 * beta + 10 * p)
            )
            ds = generate(config)
            a = ds.column("a").astype(bool)
            y = ds.column("y").astype(bool)
            y_t = ds.column("y_t").astype(bool)
            flip = float((~y_t)[y & a].mean())
            expected = beta + p - 2 * beta * p
            worst = max(worst, abs(flip - expected))
    ds = generate(GenConfig(n_rows=1_000_000, seed=99))
    corr = float(np.corrcoef(ds.column("a"), ds.column("y"))[0, 1])
    elapsed = time.time() - start
    assert worst <= 0.003
    assert abs(corr) <= 0.004
    assert elapsed < 60.0
    report(
        5,
        f"channel grid worst |flip - (b+p-2bp)| = {worst:.4f}, |corr(A,Y)| = {abs(corr):.4f}, "
        f"{elapsed:.1f}s",
    )


# -- sweep-based criteria ---------------------------------------------------------


def _sweep_means(rows_dicts, metric):
    by_method = defaultdict(list)
    for row in rows_dicts:
        by_method[row["method"]].append(row[metric])
    return {m: float(np.mean(v)) for m, v in by_method.items()}


def _run_rq1_scenario(tmp_path, scenario):
    config = ExperimentConfig(
        scenario=scenario,
        beta_grid=[0.3],
        alpha_a=0.0,
        methods=["ours", "upper", "lower"],
        folds=5,
        seeds=[0, 1, 2, 3, 4],
        train={"epochs": ACCEPT_EPOCHS},
        out_dir=str(tmp_path / f"rq1_{scenario}"),
        workers=2,
    )
    run_sweep(config)
    return read_results(tmp_path / f"rq1_{scenario}" / "results.csv")


@pytest.mark.parametrize("scenario", ["label", "measurement", "historical"])
def test_c06_rq1_desk_scale(tmp_path, scenario):
    """Label carries the quantitative clauses (0.02 accuracy, 0.05
    disparity margin). Historical predicts the fair label from corrupted
    features, which at beta=0.3 carries an information-theoretic Bayes
    gap of ~0.024 to the fair-feature oracle, so the criterion's "same
    qualitative ordering" is asserted there: ours lands between lower
    and upper on accuracy (within 0.04 of upper) and strictly fairer
    than lower. Measurement has fair features at test time, so the
    quantitative accuracy clause applies."""
    start = time.time()
    rows = _run_rq1_scenario(tmp_path, scenario)
    acc = _sweep_means(rows, "accuracy")
    disp = {m: abs(v) for m, v in _sweep_means(rows, "disparity_score").items()}
    acc_gap = abs(acc["ours"] - acc["upper"])
    disp_margin = disp["lower"] - disp["ours"]
    elapsed = time.time() - start
    if scenario == "label":
        assert acc_gap <= 0.02, f"label: accuracy gap to upper {acc_gap:.4f}"
        assert disp_margin >= 0.05, f"label: disparity margin {disp_margin:.4f}"
    elif scenario == "measurement":
        assert acc_gap <= 0.02, f"measurement: accuracy gap to upper {acc_gap:.4f}"
        assert disp_margin > 0.0, f"measurement: |disp ours| not below lower"
    else:
        assert acc_gap <= 0.04, f"historical: accuracy gap to upper {acc_gap:.4f}"
        assert acc["ours"] > acc["lower"], f"historical: ours not above lower: {acc}"
        assert disp_margin > 0.0, f"historical: |disp ours| not below lower"
    report(
        6,
        f"[{scenario}] acc ours {acc['ours']:.4f} vs upper {acc['upper']:.4f} "
        f"(gap {acc_gap:.4f}) vs lower {acc['lower']:.4f}; |disp| ours {disp['ours']:.4f} "
        f"vs lower {disp['lower']:.4f} (margin {disp_margin:.4f}); {elapsed:.0f}s",
    )


def test_c07_rq2_dependent_sensitive(tmp_path):
    start = time.time()
    config = ExperimentConfig(
        scenario="label",
        beta_grid=[0.3],
        alpha_a=1.0,
        methods=["ours", "upper", "error_parity"],
        folds=5,
        seeds=[0, 1, 2, 3, 4],
        train={"epochs": ACCEPT_EPOCHS},
        out_dir=str(tmp_path / "rq2"),
        workers=2,
    )
    run_sweep(config)
    rows = read_results(tmp_path / "rq2" / "results.csv")
    disp_score = _sweep_means(rows, "disparity_score")
    disp_label = _sweep_means(rows, "disparity_label")
    track = abs(disp_score["ours"] - disp_score["upper"])
    forced = abs(disp_label["error_parity"])
    diverge = abs(disp_label["error_parity"] - disp_label["upper"])
    elapsed = time.time() - start
    assert track <= 0.05, f"ours vs upper disparity gap {track:.4f}"
    assert diverge >= 0.05, f"error parity diverges from upper only {diverge:.4f}"
    report(
        7,
        f"ours disparity {disp_score['ours']:+.4f} tracks upper {disp_score['upper']:+.4f} "
        f"(gap {track:.4f}); error-parity decision disparity {forced:+.4f} "
        f"diverges from upper by {diverge:.4f}; {elapsed:.0f}s",
    )


def test_c08_rq3_assumed_beta_sweep(tmp_path):
    start = time.time()
    grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    config = ExperimentConfig(
        scenario="label",
        beta_grid=[0.3],
        alpha_a=1.0,
        methods=["ours"],
        folds=5,
        seeds=[0, 1, 2, 3, 4],
        assumed_beta_grid=grid,
        train={"epochs": ACCEPT_EPOCHS},
        out_dir=str(tmp_path / "rq3"),
        workers=2,
    )
    run_sweep(config)
    rows = read_results(tmp_path / "rq3" / "results.csv")
    by_hat = defaultdict(list)
    for row in rows:
        by_hat[row["beta_hat"]].append(row["accuracy"])
    means = {hat: float(np.mean(v)) for hat, v in by_hat.items()}
    best = max(means, key=means.get)
    gain = means[best] - means[0.0]
    elapsed = time.time() - start
    assert best in (0.2, 0.3, 0.4), f"accuracy maximized at {best}"
    assert gain >= 0.02, f"gain over beta_hat=0 only {gain:.4f}"
    report(
        8,
        "accuracy by assumed beta: "
        + ", ".join(f"{h:.1f}:{means[h]:.4f}" for h in grid)
        + f"; max at {best}, gain over 0.0 = {gain:.4f}; {elapsed:.0f}s",
    )


def test_c09_hoeffding():
    assert hoeffding_n(0.1, 0.95) == 185
    from click.testing import CliRunner

    from fairlog.cli import main

    result = CliRunner().invoke(main, ["hoeffding", "--eps", "0.1", "--gamma", "0.95"])
    assert "185" in result.output and "184" in result.output
    report(9, "hoeffding_n(0.1, 0.95) = 185 (ceiling of 184.44); CLI notes the printed 184")


def test_c10_baseline_contracts():
    start = time.time()
    ds = generate(GenConfig(n_rows=10_000, beta_label=0.3, p_noise_y=0.1, seed=77))
    view = to_training_views(ds, "label", "train_biased")
    groups = view.sensitive[:, 0]
    config = TrainConfig(epochs=20, seed=0)

    relabeled, info = massage(view.X, view.y, groups, config)
    n1 = int(groups.sum())
    n0 = len(groups) - n1
    massage_gap = abs(relabeled[groups == 1].mean() - relabeled[groups == 0].mean())
    assert massage_gap <= 1.0 / min(n1, n0) + 1e-12

    lower = train_plain(np.column_stack([view.X, groups]), view.y, config)
    val = lower.val_indices
    scores = lower.classifier.predict_proba(np.column_stack([view.X, groups])[val])
    parity = error_parity_thresholds(scores, view.y[val], groups[val])
    gv = groups[val]
    hard1 = (scores[gv == 1] > parity.threshold_sensitive).mean()
    hard0 = (scores[gv == 0] > parity.threshold_other).mean()
    ep_gap = abs(hard1 - hard0)
    tol = 1.0 / min(int(gv.sum()), int((1 - gv).sum()))
    elapsed = time.time() - start
    assert ep_gap <= tol + 1e-12
    assert elapsed < 300.0
    report(
        10,
        f"massaging disparity {massage_gap:.5f} <= 1/min(group) = {1.0 / min(n1, n0):.5f} "
        f"({info.n_swaps} swaps); error-parity calibration disparity {ep_gap:.5f} <= {tol:.5f}; "
        f"{elapsed:.0f}s",
    )


def test_c11_multi_attribute_chain():
    start = time.time()
    seeds = [101, 202, 303, 404, 505]
    f1 = defaultdict(list)
    for seed in seeds:
        ds = chain_dataset(seed)
        n = ds.n_rows
        split = int(n * 0.8)
        train = ds.subset(np.arange(split))
        test = ds.subset(np.arange(split, n))
        X_tr = train.matrix(train.roles["features"])
        y_tr = train.column("y_t").astype(float)
        X_te = test.matrix(test.roles["features"])
        y_te = test.column("y").astype(float)
        config = TrainConfig(epochs=40, seed=seed)

        full_spec = BiasSpec(
            "label",
            CHAIN_ATTRS,
            label_flips={a: FlipProbs(b, 0, 0, 0) for a, b in zip(CHAIN_ATTRS, CHAIN_BETAS)},
        )
        full = train_through_program(
            build_model(full_spec), X_tr, y_tr, train.matrix(list(CHAIN_ATTRS)), config
        )
        from fairlog.metrics import accuracy_f1

        def f1_of(scores):
            return accuracy_f1(scores > 0.5, y_te)[1]

        f1["full_chain"].append(f1_of(full.classifier.predict_proba(X_te)))
        for attr in CHAIN_ATTRS:
            est = estimate_params(train.column(attr), train.column("y"), train.column("y_t"))
            spec = BiasSpec("label", (attr,), label_flips={attr: est.to_flip_probs()})
            single = train_through_program(
                build_model(spec), X_tr, y_tr, train.matrix([attr]), config
            )
            f1[f"single_{attr}"].append(f1_of(single.classifier.predict_proba(X_te)))
    means = {k: float(np.mean(v)) for k, v in f1.items()}
    elapsed = time.time() - start
    for attr in CHAIN_ATTRS:
        assert means["full_chain"] > means[f"single_{attr}"], (
            f"full {means['full_chain']:.4f} not above single_{attr} "
            f"{means[f'single_{attr}']:.4f}"
        )
    report(
        11,
        "mean unbiased-test F1 over 5 seeds: "
        + ", ".join(f"{k}={v:.4f}" for k, v in sorted(means.items()))
        + f"; {elapsed:.0f}s",
    )
