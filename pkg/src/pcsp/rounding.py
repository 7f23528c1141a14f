"""Rounding schemes for basic-SDP solutions and the end-to-end robust solver.

Three randomized rounders plus the exact warm-up rule:

* Gaussian threshold rounding in the style of Charikar-Makarychev-
  Makarychev for templates with majority polymorphisms (after the k-SAT
  -form rewrite);
* random geometric threshold rounding for dual-Horn shaped templates;
* the delta-grid rounding for weighted-hyperplane (alternating-threshold)
  templates.

All Gaussian draws come from a counter-based generator keyed by
(seed, trial), so any trial can be replayed bit-for-bit; per-variable
values are read off one shared draw in a fixed order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .core import (
    Assignment,
    Instance,
    PcspError,
    Template,
    ValidationError,
    constraint_satisfied,
    ksat,
    satisfied_fraction,
)
from .poly import MAJ, PolymorphismError, contains_family
from .reduce import ReductionTrace, apply_gadget, at_reduction, pin_constants, to_negform
from .sdp import DEFAULT_TOL, SdpSolution, build_basic_sdp, solve_basic_sdp

_M64 = (1 << 64) - 1


class NoApplicableAlgorithmError(PcspError):
    pass


def _rng(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed & _M64) | (trial << 64)))


@dataclass(frozen=True)
class CmmParams:
    gamma: float
    seed: int

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValidationError("gamma must lie in (0, 1]")


@dataclass(frozen=True)
class ThresholdParams:
    thresholds: tuple[float, ...]
    seed: int

    @staticmethod
    def from_eps(eps: float, max_arity: int, seed: int) -> "ThresholdParams":
        """Geometric grid from sqrt(eps) up to 1/K with uniform ratio >= K.

        Both endpoints are included exactly; the point count is the largest
        one keeping the common ratio at least K.
        """
        K = max(max_arity, 2)
        lo, hi = math.sqrt(eps), 1.0 / K
        if lo >= hi:
            return ThresholdParams((hi,), seed)
        steps = max(1, int(math.floor(math.log(hi / lo) / math.log(K))))
        ratio = (hi / lo) ** (1.0 / steps)
        ts = [lo * ratio**i for i in range(steps)] + [hi]
        return ThresholdParams(tuple(ts), seed)


@dataclass(frozen=True)
class AtParams:
    eps: float
    seed: int
    c1: float = 0.2
    c2: float = 0.05
    grid: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if not 0 < self.c2 < self.c1 < 0.25:
            raise ValidationError("need 0 < c2 < c1 < 0.25")
        if not 0 < self.eps < 1:
            raise ValidationError("eps must lie in (0, 1)")
        # kappa solves kappa*ln(kappa) = (c1-c2)*ln(1/eps) (bisection); the
        # ratio is then adjusted so both endpoints eps^c1, eps^c2 are exact.
        target = (self.c1 - self.c2) * math.log(1.0 / self.eps)
        lo, hi = 1.0, 2.0
        while hi * math.log(hi) < target:
            hi *= 2
        for _ in range(60):
            mid = (lo + hi) / 2
            if mid * math.log(max(mid, 1e-9)) < target:
                lo = mid
            else:
                hi = mid
        kappa = max(1, round(hi))
        p, q = self.eps**self.c1, self.eps**self.c2
        r = (q / p) ** (1.0 / kappa)
        object.__setattr__(self, "grid", tuple(p * r**t for t in range(kappa + 1)))


def round_exact_2sat_style(sol: SdpSolution, seed: int) -> Assignment:
    """Sign of the first moment, with a Gaussian tie-break near zero."""
    mu = sol.mu()
    g = _rng(seed).standard_normal(sol.dim)
    zeta = sol.vectors[1:] @ g
    out = np.where(mu > sol.tol, 1, np.where(mu < -sol.tol, -1, np.where(zeta > 0, 1, -1)))
    return Assignment(tuple(int(v) for v in out))


def round_cmm(sol: SdpSolution, params: CmmParams) -> Assignment:
    """sigma(u_i) = +1 iff zeta_i >= -mu_i / gamma, zeta ~ N(0, Sigma).

    zeta is realized as <g, v_i> with one shared standard Gaussian g, which
    gives the N(0, Sigma) law and makes the output antipodal under
    negation of the variable vectors.
    """
    mu = sol.mu()
    g = _rng(params.seed).standard_normal(sol.dim)
    zeta = sol.vectors[1:] @ g
    out = np.where(zeta >= -mu / params.gamma, 1, -1)
    return Assignment(tuple(int(v) for v in out))


def round_threshold(sol: SdpSolution, params: ThresholdParams) -> Assignment:
    """sigma(x_i) = +1 iff mu_i >= t - 1 for one uniformly drawn t."""
    mu = sol.mu()
    rng = _rng(params.seed)
    t = params.thresholds[int(rng.integers(len(params.thresholds)))]
    out = np.where(mu >= t - 1.0, 1, -1)
    return Assignment(tuple(int(v) for v in out))


def round_at(sol: SdpSolution, params: AtParams) -> Assignment:
    """Delta-grid rounding for weighted-hyperplane templates.

    With v_i = alpha_i v0 + v'_i: output -1 iff <g, v'_i> >= delta *
    alpha_i * |<g, v0>| for one delta drawn from the geometric grid.
    """
    rng = _rng(params.seed)
    g = rng.standard_normal(sol.dim)
    delta = params.grid[int(rng.integers(len(params.grid)))]
    alpha = sol.mu()
    z0 = float(sol.vectors[0] @ g)
    zp = sol.vectors[1:] @ g - alpha * z0
    out = np.where(zp >= delta * alpha * abs(z0), -1, 1)
    return Assignment(tuple(int(v) for v in out))


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class RoundingReport:
    algorithm: str
    assignment: Assignment
    weak_fraction: Fraction
    violated: tuple[bool, ...]
    params: dict
    sdp_objective: float
    eps_schedule: float
    trials: int
    seed: int
    trace_factors: tuple[str, str]

    def to_json(self) -> str:
        doc = {
            "format": "pcsp-rounding-report v1",
            "algorithm": self.algorithm,
            "assignment": "".join("+" if v == 1 else "-" for v in self.assignment.values),
            "weak_fraction": str(self.weak_fraction),
            "weak_fraction_float": float(self.weak_fraction),
            "violated": ["01"[v] for v in self.violated],
            "params": self.params,
            "sdp_objective": format(self.sdp_objective, ".17g"),
            "eps_schedule": format(self.eps_schedule, ".17g"),
            "trials": self.trials,
            "seed": self.seed,
            "completeness_factor": self.trace_factors[0],
            "soundness_factor": self.trace_factors[1],
        }
        return json.dumps(doc, indent=1)


def template_is_dual_horn(template: Template) -> bool:
    """Every weak relation k-SAT shaped (instances must also negate <= 1 literal)."""
    return all(pair.weak == ksat(pair.arity) for pair in template.pairs)


def instance_is_dual_horn(inst: Instance) -> bool:
    if not template_is_dual_horn(inst.template):
        return False
    return all(
        sum(1 for lit in c.literals if not lit.is_const and lit.sign == -1) <= 1
        for c in inst.constraints
    )


def template_has_majorities(template: Template, max_check_arity: int) -> bool:
    return all(contains_family(p, MAJ, max_check_arity).ok for p in template.pairs)


def choose_algorithm(inst: Instance, max_check_arity: int = 7) -> str:
    """auto order: alternating threshold, then majority, then dual-Horn."""
    pinned, _ = pin_constants(inst)
    try:
        at_reduction(pinned.template, max_check_arity)
        return "at"
    except PcspError:
        pass
    neg, _ = to_negform(pinned)
    if template_has_majorities(neg.template, max_check_arity):
        return "cmm"
    if instance_is_dual_horn(pinned):
        return "threshold"
    raise NoApplicableAlgorithmError(
        "template has neither alternating-threshold nor majority polymorphisms "
        "and is not dual-Horn shaped"
    )


def _trial_seed(seed: int, trial: int) -> int:
    return (seed & _M64) | ((trial + 1) << 64)


@dataclass
class PipelineState:
    """Everything needed to round one more trial of a prepared instance."""

    instance: Instance
    algorithm: str
    reduced: Instance
    trace: ReductionTrace
    solution: SdpSolution
    eps: float
    params: object
    exact_cmm: bool


def prepare_pipeline(
    inst: Instance,
    algo: str = "auto",
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_check_arity: int = 7,
    solver: str | None = None,
    sdp_solution: SdpSolution | None = None,
) -> PipelineState:
    """Run the reductions and the single SDP solve behind the rounders."""
    if algo == "auto":
        algo = choose_algorithm(inst, max_check_arity)
    pinned, trace = pin_constants(inst)
    if algo == "at":
        red = at_reduction(pinned.template, max_check_arity)
        reduced, tr2 = apply_gadget(pinned, red.gadgets)
        trace = trace.then(tr2)
    elif algo == "cmm":
        reduced, tr2 = to_negform(pinned)
        if not template_has_majorities(reduced.template, max_check_arity):
            raise NoApplicableAlgorithmError("majority polymorphism check failed")
        trace = trace.then(tr2)
    elif algo == "threshold":
        if not instance_is_dual_horn(pinned):
            raise NoApplicableAlgorithmError("instance is not dual-Horn shaped")
        reduced = pinned
    else:
        raise ValidationError(f"unknown algorithm {algo!r}")

    sol = sdp_solution
    if sol is None:
        sol = solve_basic_sdp(build_basic_sdp(reduced), tol=tol, solver=solver)
    m_red = max(1, reduced.num_constraints)
    eps = max(sol.objective / m_red, 10 * tol)
    if algo == "at":
        params: object = AtParams(eps=min(eps, 0.5), seed=seed)
    elif algo == "cmm":
        params = CmmParams(gamma=min(1.0, eps ** (2.0 / 3.0)), seed=seed)
    else:
        params = ThresholdParams.from_eps(eps, reduced.template.max_arity, seed)
    # at near-zero measured error the warm-up rounder replaces the Gaussian
    # one: gamma = eps^(2/3) degenerates there
    exact_cmm = algo == "cmm" and sol.objective <= 10 * tol * m_red
    return PipelineState(inst, algo, reduced, trace, sol, eps, params, exact_cmm)


def round_trial(state: PipelineState, seed: int, trial: int) -> Assignment:
    """One rounding draw, restricted back to the original variables."""
    ts = _trial_seed(seed, trial)
    if state.algorithm == "at":
        a = round_at(state.solution, replace(state.params, seed=ts))
    elif state.algorithm == "cmm":
        if state.exact_cmm:
            a = round_exact_2sat_style(state.solution, ts)
        else:
            a = round_cmm(state.solution, replace(state.params, seed=ts))
    else:
        a = round_threshold(state.solution, replace(state.params, seed=ts))
    return Assignment(a.values[: state.instance.num_vars])


def trial_fractions(state: PipelineState, trials: int, seed: int) -> list[Fraction]:
    """Weak-satisfied fraction of every trial on the original instance."""
    return [
        satisfied_fraction(state.instance, round_trial(state, seed, t), "weak")
        for t in range(trials)
    ]


def robust_solve(
    inst: Instance,
    algo: str = "auto",
    trials: int = 20,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_check_arity: int = 7,
    solver: str | None = None,
    sdp_solution: SdpSolution | None = None,
) -> RoundingReport:
    """Reduce, solve the relaxation once, round ``trials`` times, keep the best.

    The schedule parameter eps is the measured average SDP error floored at
    10*tol.  Assignments are mapped back by restriction (reductions only
    append variables) and scored exactly on the original instance.
    ``sdp_solution`` short-circuits the solve for repeated-rounding runs; it
    must come from the same reduced instance.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    n = inst.num_vars
    if inst.num_constraints == 0:
        return RoundingReport(
            algo, Assignment((1,) * n), Fraction(1), (), {}, 0.0, 10 * tol, trials, seed, ("1", "1")
        )
    state = prepare_pipeline(inst, algo, seed, tol, max_check_arity, solver, sdp_solution)
    best: tuple[Fraction, Assignment] | None = None
    for t in range(trials):
        a = round_trial(state, seed, t)
        frac = satisfied_fraction(inst, a, "weak")
        if best is None or frac > best[0]:
            best = (frac, a)
        if best[0] == 1:
            break
    frac, a = best
    violated = tuple(
        not constraint_satisfied(inst, j, a, "weak") for j in range(inst.num_constraints)
    )
    pdict = {"kind": type(state.params).__name__, **{
        k: (list(v) if isinstance(v, tuple) else v) for k, v in state.params.__dict__.items()
    }}
    if state.exact_cmm:
        pdict["exact_rounding"] = True
    return RoundingReport(
        algorithm=state.algorithm,
        assignment=a,
        weak_fraction=frac,
        violated=violated,
        params=pdict,
        sdp_objective=state.solution.objective,
        eps_schedule=state.eps,
        trials=trials,
        seed=seed,
        trace_factors=(
            str(state.trace.completeness_factor),
            str(state.trace.soundness_factor),
        ),
    )
