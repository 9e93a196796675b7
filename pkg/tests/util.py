"""Shared test helpers: random program corpus and chain-data fixture."""

import numpy as np

from fairlog.datagen import Dataset, GenConfig, apply_label_bias_chain, generate, uniforms
from fairlog.logic import parse


def random_ground_program(rng: np.random.Generator):
    """Acyclic stratified propositional program with <= 10 probabilistic facts.

    Atoms are layered; rule bodies only reference strictly lower layers,
    so the dependency graph is acyclic and negation is stratified.
    """
    n_facts = int(rng.integers(1, 11))
    lines = []
    atoms = []
    for i in range(n_facts):
        prob = float(np.round(rng.uniform(0.05, 0.95), 3))
        lines.append(f"{prob} :: f{i}.")
        atoms.append(f"f{i}")
    n_layers = int(rng.integers(1, 4))
    for layer in range(n_layers):
        new_atoms = []
        for r in range(3):
            head = f"d{layer}_{r}"
            for _ in range(int(rng.integers(1, 3))):
                body_size = int(rng.integers(1, min(4, len(atoms)) + 1))
                chosen = rng.choice(len(atoms), size=body_size, replace=False)
                literals = []
                for c in chosen:
                    name = atoms[int(c)]
                    literals.append(f"\\+{name}" if rng.random() < 0.3 else name)
                lines.append(f"{head} :- {', '.join(literals)}.")
            new_atoms.append(head)
        atoms.extend(new_atoms)
    lines.append(f"?- {atoms[-1]}.")
    return parse("\n".join(lines))


CHAIN_ATTRS = ("a", "a2", "a3")
CHAIN_BETAS = (0.3, 0.5, 0.5)


def chain_dataset(seed: int, n_rows: int = 10_000) -> Dataset:
    """Fair data plus three per-attribute label-demotion channels.

    The two extra attributes are correlated with features (as in
    multi-attribute settings where attributes are functions of the
    input); each channel independently demotes the label for its group.
    """
    config = GenConfig(
        n_rows=n_rows,
        n_q=6,
        alpha_qr=[i / 20 for i in range(1, 7)],
        s_bar=4.0,
        seed=seed,
    )
    ds = generate(config)
    columns = dict(ds.columns)
    q1 = columns["q1"].astype(float)
    q2 = columns["q2"].astype(float)
    columns["a2"] = (uniforms(seed, 2_000_000, n_rows) < 0.1 + 0.8 * q1).astype(np.int8)
    columns["a3"] = (uniforms(seed, 2_000_001, n_rows) < 0.1 + 0.8 * q2).astype(np.int8)
    with_attrs = Dataset(columns, roles=dict(ds.roles), config=config)
    return apply_label_bias_chain(
        with_attrs, list(CHAIN_ATTRS), list(CHAIN_BETAS), p_noise=0.0, seed=seed + 77
    )
