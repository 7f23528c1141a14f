"""Instance and template transformations.

Covers the k-SAT-form rewrite (every weak relation becomes the cube minus
the all -1 tuple), constant pinning, generic gadget substitution with
brute-force validated gadgets, and the reduction of alternating-threshold
templates to weighted-hyperplane plus constant constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    Constraint,
    Instance,
    Literal,
    PcspError,
    Predicate,
    PredicatePair,
    Template,
    ValidationError,
    code_of_tuple,
    eval_literal_tuple,
    ksat,
    tuple_of_code,
    Assignment,
)
from .poly import weighted_hyperplane_cover

GADGET_BRUTE_LIMIT = 20

PIN_PAIR = PredicatePair(
    Predicate.from_tuples(1, [(1,)]), Predicate.from_tuples(1, [(1,)])
)


class MissingGadgetError(PcspError):
    pass


class GadgetValidationError(PcspError):
    pass


@dataclass(frozen=True)
class Gadget:
    """A ppp gadget realizing ``target`` over a host template.

    The gadget instance uses variables 1..k as the interface (in target
    coordinate order) and k+1..k+aux_count as fresh auxiliaries.  Both ppp
    conditions are brute-force checked at construction:

    1. every strong tuple of the target extends to an assignment strongly
       satisfying all gadget constraints;
    2. every assignment weakly satisfying all gadget constraints restricts
       to a weak tuple of the target.
    """

    target: PredicatePair
    aux_count: int
    instance: Instance

    def __post_init__(self):
        k = self.target.arity
        if self.instance.num_vars != k + self.aux_count:
            raise GadgetValidationError("gadget instance has the wrong variable count")
        if k + self.aux_count > GADGET_BRUTE_LIMIT:
            raise GadgetValidationError(
                f"gadget too large to validate ({k + self.aux_count} > {GADGET_BRUTE_LIMIT})"
            )
        self._validate()

    def _validate(self):
        k, l = self.target.arity, self.aux_count
        inst = self.instance
        m = inst.num_constraints

        def sat_all(values, mode):
            a = Assignment(values)
            return all(
                eval_literal_tuple(c, a)
                in (
                    inst.template.pairs[c.pair_index].strong
                    if mode == "strong"
                    else inst.template.pairs[c.pair_index].weak
                )
                for c in inst.constraints
            )

        for x in self.target.strong.tuples():
            if not any(
                sat_all(x + tuple_of_code(y, l) if l else x, "strong") for y in range(1 << l)
            ):
                raise GadgetValidationError(f"strong tuple {x} has no strong extension")
        for z in range(1 << (k + l)):
            values = tuple_of_code(z, k + l)
            if sat_all(values, "weak") and values[:k] not in self.target.weak:
                raise GadgetValidationError(
                    f"weak assignment {values} escapes the target weak relation"
                )


def identity_gadget(pair: PredicatePair, template: Template) -> Gadget:
    idx = template.pairs.index(pair)
    lits = tuple(Literal.pos(i) for i in range(1, pair.arity + 1))
    inst = Instance(pair.arity, template, (Constraint(idx, lits),))
    return Gadget(pair, 0, inst)


@dataclass(frozen=True)
class ReductionTrace:
    """Bookkeeping for a reduction step: loss factors and constraint provenance.

    ``constraint_map[j]`` is the source-constraint index behind output
    constraint j, or None for synthetic constraints (e.g. constant pins).
    """

    completeness_factor: Fraction
    soundness_factor: Fraction
    constraint_map: tuple[int | None, ...]
    dropped_fraction: Fraction = Fraction(0)

    def __post_init__(self):
        if self.completeness_factor < 1 or self.soundness_factor < 1:
            raise ValidationError("loss factors must be >= 1")

    @staticmethod
    def identity(m: int) -> "ReductionTrace":
        return ReductionTrace(Fraction(1), Fraction(1), tuple(range(m)))

    def then(self, later: "ReductionTrace") -> "ReductionTrace":
        """Trace of applying ``later`` after self; loss factors multiply."""
        mapped = tuple(
            self.constraint_map[j] if j is not None else None for j in later.constraint_map
        )
        return ReductionTrace(
            self.completeness_factor * later.completeness_factor,
            self.soundness_factor * later.soundness_factor,
            mapped,
            self.dropped_fraction,
        )


def to_negform(inst: Instance) -> tuple[Instance, ReductionTrace]:
    """Rewrite so every weak relation is the cube minus the all -1 tuple.

    Constraints whose pair has a full-cube weak relation are vacuous and
    dropped (the dropped fraction is recorded).  Each surviving constraint
    spawns one child per excluded weak tuple x: the strong relation is
    multiplied entrywise by -x and literals are negated where x is +1, so a
    child is weakly violated exactly when the source evaluates to x.
    """
    m = inst.num_constraints
    pair_cache: dict[tuple[int, int], int] = {}
    new_pairs: list[PredicatePair] = []
    children: list[Constraint] = []
    cmap: list[int | None] = []
    dropped = 0
    for j, c in enumerate(inst.constraints):
        pair = inst.template.pairs[c.pair_index]
        if pair.weak.is_full:
            dropped += 1
            continue
        k = pair.arity
        for x in pair.weak.excluded_tuples():
            strong = pair.strong.odot(tuple(-v for v in x))
            key = (k, strong.bits)
            if key not in pair_cache:
                pair_cache[key] = len(new_pairs)
                new_pairs.append(PredicatePair(strong, ksat(k)))
            lits = tuple(
                lit.negated() if x[p] == 1 else lit for p, lit in enumerate(c.literals)
            )
            children.append(Constraint(pair_cache[key], lits))
            cmap.append(j)
    if not new_pairs:
        new_pairs = [PredicatePair(ksat(1), ksat(1))]  # placeholder, no constraints use it
    out = Instance(inst.num_vars, Template(tuple(new_pairs), inst.template.idempotent), tuple(children))
    max_k = max((inst.template.pairs[c.pair_index].arity for c in inst.constraints), default=1)
    factor = Fraction(2**max_k)
    trace = ReductionTrace(
        factor, factor, tuple(cmap), Fraction(dropped, m) if m else Fraction(0)
    )
    return out, trace


def pin_constants(inst: Instance) -> tuple[Instance, ReductionTrace]:
    """Replace constant literals by one pinned fresh variable.

    The pin variable carries a unary ({+1},{+1}) constraint; -1 constants
    become its negated literal, which keeps the folded semantics intact.
    """
    if not any(lit.is_const for c in inst.constraints for lit in c.literals):
        return inst, ReductionTrace.identity(inst.num_constraints)
    n = inst.num_vars
    pin_var = n + 1
    pairs = list(inst.template.pairs)
    if PIN_PAIR in pairs:
        pin_idx = pairs.index(PIN_PAIR)
    else:
        pin_idx = len(pairs)
        pairs.append(PIN_PAIR)
    new_constraints = []
    for c in inst.constraints:
        lits = tuple(
            Literal(pin_var, lit.sign) if lit.is_const else lit for lit in c.literals
        )
        new_constraints.append(Constraint(c.pair_index, lits))
    new_constraints.append(Constraint(pin_idx, (Literal.pos(pin_var),)))
    out = Instance(n + 1, Template(tuple(pairs), idempotent=False), tuple(new_constraints))
    m = inst.num_constraints
    trace = ReductionTrace(
        Fraction(1),
        Fraction(m + 1, m) if m else Fraction(1),
        tuple(range(m)) + (None,),
    )
    return out, trace


def apply_gadget(inst: Instance, gadgets: dict[int, Gadget]) -> tuple[Instance, ReductionTrace]:
    """Substitute every constraint by its pair's gadget, with fresh auxiliaries."""
    used = {c.pair_index for c in inst.constraints}
    missing = sorted(used - set(gadgets))
    if missing:
        raise MissingGadgetError(f"no gadget for pair indices {missing}")
    templates = {id(g.instance.template): g.instance.template for g in gadgets.values()}
    if len({tuple(t.pairs) for t in templates.values()}) > 1:
        raise ValidationError("gadgets target different templates")
    target_template = next(iter(templates.values())) if templates else inst.template
    n = inst.num_vars
    new_constraints: list[Constraint] = []
    cmap: list[int | None] = []
    for j, c in enumerate(inst.constraints):
        g = gadgets[c.pair_index]
        k = g.target.arity
        aux_base = n
        n += g.aux_count
        for gc in g.instance.constraints:
            lits = []
            for glit in gc.literals:
                if glit.is_const:
                    lits.append(glit)
                elif glit.var <= k:
                    src = c.literals[glit.var - 1]
                    if src.is_const:
                        lits.append(Literal.const(glit.sign * src.sign))
                    else:
                        lits.append(Literal(src.var, glit.sign * src.sign))
                else:
                    lits.append(Literal(aux_base + (glit.var - k), glit.sign))
            new_constraints.append(Constraint(gc.pair_index, tuple(lits)))
            cmap.append(j)
    out = Instance(n, target_template, tuple(new_constraints))
    gmax = max((g.instance.num_constraints for g in gadgets.values()), default=1)
    factor = Fraction(max(1, gmax))
    return out, ReductionTrace(factor, factor, tuple(cmap))


@dataclass(frozen=True)
class AtReduction:
    template: Template
    gadgets: dict[int, Gadget] = field(hash=False)


def at_reduction(template: Template, max_check_arity: int = 7) -> AtReduction:
    """Reduce an alternating-threshold template to hyperplane + pin pairs.

    Every pair must pass alternating-threshold polymorphism checks up to
    ``max_check_arity`` (odd arities).  Fixed strong coordinates become pin
    constraints; the free part is covered by weighted hyperplanes whose
    weak relations intersect inside the original weak relation.  Gadgets
    use no auxiliary variables, and their ppp conditions are re-verified by
    brute force at construction.
    """
    plans = []  # per pair: (pins: list[(coord, value)], hyperplanes)
    new_pairs: list[PredicatePair] = [PIN_PAIR]
    pair_index: dict[tuple[int, int, int], int] = {}

    def intern_pair(pair: PredicatePair) -> int:
        key = (pair.arity, pair.strong.bits, pair.weak.bits)
        if key not in pair_index:
            pair_index[key] = len(new_pairs)
            new_pairs.append(pair)
        return pair_index[key]

    for pair in template.pairs:
        if pair.weak.is_full:
            plans.append(([], []))
            continue
        fixed = pair.strong.fixed_coordinates()
        pins = sorted(fixed.items())
        free = [i for i in range(pair.arity) if i not in fixed]
        hyperplanes = []
        if free:
            proj = pair.strong.project_out(sorted(fixed))
            weak_members = []
            for t in pair.weak.tuples():
                if all(t[i] == v for i, v in fixed.items()):
                    weak_members.append(tuple(t[i] for i in free))
            sub = PredicatePair(proj, Predicate.from_tuples(len(free), set(weak_members)))
            for hp in weighted_hyperplane_cover(sub, max_check_arity):
                coords = tuple(free[s] for s in hp.support)
                hyperplanes.append((coords, hp))
        plans.append((pins, hyperplanes))

    gadgets: dict[int, Gadget] = {}
    # second pass: intern constraint pairs first so the shared template is complete
    constraint_specs = []
    for pair, (pins, hyperplanes) in zip(template.pairs, plans):
        specs = []
        for coord, value in pins:
            specs.append((0, (Literal(coord + 1, value),)))
        for coords, hp in hyperplanes:
            cp = PredicatePair(hp.strong_predicate(), hp.weak_predicate())
            idx = intern_pair(cp)
            specs.append((idx, tuple(Literal.pos(c + 1) for c in coords)))
        constraint_specs.append(specs)
    shared = Template(tuple(new_pairs), idempotent=False)
    for pi, (pair, specs) in enumerate(zip(template.pairs, constraint_specs)):
        inst = Instance(
            pair.arity, shared, tuple(Constraint(idx, lits) for idx, lits in specs)
        )
        gadgets[pi] = Gadget(pair, 0, inst)
    return AtReduction(shared, gadgets)
