"""Command-line interface.

Exit codes: 0 success, 1 usage/config errors, 2 sweep cells failed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

# exit-code contract: 0 success, 1 usage errors, 2 failed sweep cells
click.UsageError.exit_code = 1

from .datagen import Dataset, GenConfig, generate, to_training_views
from .experiments import ExperimentConfig, run_cell, run_sweep
from .logic import (
    NeuralBinding,
    ParameterTable,
    evaluate,
    ground,
    leaf_probabilities,
    parse,
)
from .metrics import evaluate_scores
from .net import TrainConfig, load_checkpoint, save_checkpoint
from .templates import hoeffding_n, estimate_params
from . import kernels


@click.group()
def main():
    """Neurosymbolic bias mitigation toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), help="GenConfig JSON file.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output CSV path.")
@click.option("--rows", type=int, default=None, help="Override n_rows.")
@click.option("--seed", type=int, default=None, help="Override seed.")
@click.option("--beta-label", type=float, default=None)
@click.option("--beta-measure", type=float, default=None)
@click.option("--beta-hist", type=float, default=None)
def gen(config_path, out_path, rows, seed, beta_label, beta_measure, beta_hist):
    """Generate a synthetic dataset (CSV plus manifest sidecar)."""
    overrides = json.loads(Path(config_path).read_text()) if config_path else {}
    if rows is not None:
        overrides["n_rows"] = rows
    if seed is not None:
        overrides["seed"] = seed
    if beta_label is not None:
        overrides["beta_label"] = beta_label
    if beta_measure is not None:
        overrides["beta_measure_r"] = beta_measure
        overrides["beta_measure_q"] = beta_measure
    if beta_hist is not None:
        overrides["beta_hist_r"] = beta_hist
        overrides["beta_hist_q"] = beta_hist
    dataset = generate(GenConfig(**overrides))
    dataset.to_csv(out_path)
    click.echo(f"wrote {dataset.n_rows} rows to {out_path}")


def _load_views(data_path, scenario, role):
    dataset = Dataset.from_csv(data_path)
    return dataset, to_training_views(dataset, scenario, role)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--method", type=str, default="lower", help="ours|upper|lower|unawareness.")
@click.option("--scenario", type=click.Choice(["label", "measurement", "historical"]), default="label")
@click.option("--beta-hat", type=float, default=0.0, help="Assumed bias probability (method=ours).")
@click.option("--epochs", type=int, default=100)
@click.option("--lr", type=float, default=3e-4)
@click.option("--batch-size", type=int, default=64)
@click.option("--seed", type=int, default=0)
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path())
def train(data_path, method, scenario, beta_hat, epochs, lr, batch_size, seed, ckpt_path):
    """Train one method on a dataset and write a checkpoint."""
    from .experiments import bias_model_for
    from .training import train_plain, train_through_program

    dataset, view = _load_views(data_path, scenario, "train_biased")
    config = TrainConfig(lr=lr, batch_size=batch_size, epochs=epochs, seed=seed)
    groups = view.sensitive[:, 0]
    if method == "ours":
        if scenario == "historical":
            result = train_plain(view.X, view.y, config)
        else:
            exp = ExperimentConfig(scenario=scenario, beta_grid=[beta_hat], seeds=[seed])
            model = bias_model_for(exp, dataset.config or GenConfig(), beta_hat)
            result = train_through_program(model, view.X, view.y, groups, config)
    elif method == "upper":
        fair = to_training_views(dataset, scenario, "test_unbiased")
        result = train_plain(np.column_stack([fair.X, groups]), fair.y, config)
    elif method == "lower":
        result = train_plain(np.column_stack([view.X, groups]), view.y, config)
    elif method == "unawareness":
        result = train_plain(view.X, view.y, config)
    else:
        raise click.UsageError(f"unknown method {method!r}")
    save_checkpoint(ckpt_path, result.classifier, config)
    best = result.history[result.best_epoch]
    click.echo(
        f"trained {method} ({scenario}); best epoch {result.best_epoch} "
        f"val_loss {best['val_loss']:.4f}; checkpoint {ckpt_path}"
    )


@main.command("eval")
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", type=click.Choice(["label", "measurement", "historical"]), default="label")
@click.option("--view", "role", type=click.Choice(["test_unbiased", "test_biased"]), default="test_unbiased")
@click.option("--with-sensitive", is_flag=True, help="Append the sensitive column to the input.")
def eval_cmd(ckpt_path, data_path, scenario, role, with_sensitive):
    """Score a checkpoint against a dataset view and print metrics."""
    classifier, _ = load_checkpoint(ckpt_path)
    _, view = _load_views(data_path, scenario, role)
    X = np.column_stack([view.X, view.sensitive[:, 0]]) if with_sensitive else view.X
    scores = classifier.predict_proba(X)
    report = evaluate_scores(scores, view.y, view.sensitive[:, 0])
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def sweep(config_path):
    """Run a cross-validated sweep from a JSON experiment config."""
    config = ExperimentConfig.from_json(config_path)
    rows, failures = run_sweep(config)
    click.echo(f"completed {len(rows)} result rows -> {config.out_dir}/results.csv")
    if failures:
        for cell, message in failures:
            click.echo(f"cell {cell} failed: {message.splitlines()[0]}", err=True)
        sys.exit(2)


@main.command("estimate-params")
@click.option("--paired", "paired_path", required=True, type=click.Path(exists=True),
              help="CSV with columns a,v,v_t (sensitive, true, observed).")
@click.option("--direction", type=click.Choice(["forward", "reverse"]), default="forward")
def estimate_params_cmd(paired_path, direction):
    """Estimate the four flip probabilities from paired observations."""
    import csv as csv_module

    with open(paired_path) as handle:
        reader = csv_module.DictReader(handle)
        rows = [(int(r["a"]), int(r["v"]), int(r["v_t"])) for r in reader]
    if not rows:
        raise click.UsageError("paired CSV is empty")
    data = np.asarray(rows)
    result = estimate_params(data[:, 0], data[:, 1], data[:, 2], direction=direction)
    click.echo(json.dumps({"values": result.values, "counts": result.counts}, indent=2))


@main.command()
@click.option("--eps", type=float, required=True, help="Estimation error bound.")
@click.option("--gamma", type=float, required=True, help="Confidence level.")
def hoeffding(eps, gamma):
    """Sample-size bound for estimating one bias parameter."""
    n = hoeffding_n(eps, gamma)
    click.echo(f"n >= {n}")
    if (eps, gamma) == (0.1, 0.95):
        click.echo(
            "note: the source text reports 184 for eps=0.1, gamma=0.95; "
            "the ceiling of the bound (184.44) is 185"
        )


@main.command()
@click.option("--program", "program_path", required=True, type=click.Path(exists=True))
@click.option("--query", "query_text", default=None,
              help="Ground query atom; defaults to the program's ?- query.")
@click.option("--params", "params_json", default=None,
              help='JSON parameter table, e.g. {"p1": 0.1} or {"p1(2)": 0.1}.')
@click.option("--nn", "nn_values", multiple=True,
              help="Constant probability per network, e.g. h=0.7 (repeatable).")
@click.option("--grad", is_flag=True, help="Also print dP/dp per leaf.")
def infer(program_path, query_text, params_json, nn_values, grad):
    """Evaluate a program's query probability (engine debugging)."""
    program = parse(Path(program_path).read_text())
    if query_text:
        query_program = parse(f"?- {query_text}.")
        query = query_program.queries[0]
    elif program.queries:
        query = program.queries[0]
    else:
        raise click.UsageError("program has no query; pass --query")
    params = {}
    if params_json:
        for key, value in json.loads(params_json).items():
            if "(" in key:
                name, index = key.rstrip(")").split("(")
                params[(name, int(index))] = value
            else:
                params[key] = value
    neural = {}
    for item in nn_values:
        name, _, value = item.partition("=")
        neural[name] = NeuralBinding((lambda v: lambda args, ctx: float(v))(value))
    table = ParameterTable(params)
    circuit = ground(program, query, table, neural)
    probs = leaf_probabilities(circuit, table, neural, clamp=0.0)
    result = evaluate(circuit, probs)
    click.echo(f"P({query!r}) = {result.probability:.10g}")
    if grad:
        for key, value in result.gradients.items():
            click.echo(f"  d/d{key} = {value:+.6g}")


@main.command()
def backend():
    """Print which tape kernel lane is active."""
    click.echo(kernels.backend_name())


if __name__ == "__main__":
    main()
