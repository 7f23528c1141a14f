"""Planted instance generators for experiments and calibration sweeps."""

from __future__ import annotations

import numpy as np

from .core import Assignment, Constraint, Instance, Literal, Template, ValidationError


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def planted_instance(
    template: Template,
    n: int,
    m: int,
    eps: float,
    seed: int,
    max_negations: int | None = None,
) -> tuple[Instance, Assignment]:
    """Random instance with a hidden assignment strongly satisfying 1-eps of it.

    Exactly floor(eps*m) constraints are corrupted (their evaluated tuple is
    forced outside the strong relation).  ``max_negations`` restricts the
    number of negated literals per constraint (e.g. 1 for dual-Horn shape);
    corrupted constraints are resampled until the restriction holds.
    """
    if not 0 <= eps < 1:
        raise ValidationError("eps must be in [0, 1)")
    if n < template.max_arity:
        raise ValidationError("need at least max-arity many variables")
    rng = _rng(seed)
    plant = tuple(1 if b else -1 for b in rng.integers(0, 2, size=n))
    num_bad = int(eps * m)
    constraints = []
    for j in range(m):
        corrupt = j < num_bad
        for _ in range(10000):
            pi = int(rng.integers(len(template.pairs)))
            pair = template.pairs[pi]
            k = pair.arity
            pool = pair.strong.excluded_tuples() if corrupt else pair.strong.tuples()
            if not pool:
                continue  # e.g. corrupting a full strong relation is impossible
            variables = rng.choice(n, size=k, replace=False) + 1
            t = pool[int(rng.integers(len(pool)))]
            lits = tuple(
                Literal(int(v), t[i] * plant[v - 1]) for i, v in enumerate(variables)
            )
            if max_negations is not None:
                if sum(1 for l in lits if l.sign == -1) > max_negations:
                    continue
            constraints.append(Constraint(pi, lits))
            break
        else:
            raise ValidationError("could not sample a constraint under the restrictions")
    order = rng.permutation(m)
    constraints = tuple(constraints[i] for i in order)
    return Instance(n, template, constraints), Assignment(plant)
