import numpy as np
import pytest

from pcsp.core import (
    Constraint,
    Instance,
    Literal,
    PredicatePair,
    Template,
    make_ham,
    three_lin,
)
from pcsp.minion import (
    MinionError,
    MinorMap,
    SdpMinionElement,
    make_element,
    minor,
    sdp_solution_to_elements,
)
from pcsp.sdp import solve_instance


def random_element(rng, arity, dim=None):
    dim = dim or arity + rng.integers(0, 4)
    G = rng.standard_normal((dim, dim))
    Q, _ = np.linalg.qr(G)
    w = rng.dirichlet(np.ones(arity))
    return make_element(Q[:arity] * np.sqrt(w)[:, None])


class TestElements:
    def test_valid_orthonormal_scaled(self):
        e = make_element([[1 / np.sqrt(2), 0], [0, 1 / np.sqrt(2)]])
        assert e.arity == 2

    def test_single_unit_vector(self):
        make_element([[0.6, 0.8]])

    def test_non_orthogonal_rejected(self):
        with pytest.raises(MinionError):
            make_element([[0.5, 0.0], [0.5, 0.0]])

    def test_wrong_total_norm_rejected(self):
        with pytest.raises(MinionError):
            make_element([[1.0, 0.0], [0.0, 1.0]])

    def test_zero_vector_allowed(self):
        e = make_element([[1.0, 0.0], [0.0, 0.0]])
        assert e.arity == 2


class TestMinor:
    def test_identity(self):
        rng = np.random.default_rng(0)
        e = random_element(rng, 3)
        pi = MinorMap(3, 3, (0, 1, 2))
        assert minor(e, pi).close_to(e, 0.0)

    def test_collapse_all(self):
        rng = np.random.default_rng(1)
        e = random_element(rng, 4)
        out = minor(e, MinorMap(4, 1, (0, 0, 0, 0)))
        assert abs(np.linalg.norm(out.vectors[0]) - 1.0) < 1e-12

    def test_norm_addition(self):
        rng = np.random.default_rng(2)
        e = random_element(rng, 3)
        out = minor(e, MinorMap(3, 2, (0, 0, 1)))
        n0 = np.linalg.norm(e.vectors[0]) ** 2 + np.linalg.norm(e.vectors[1]) ** 2
        assert np.linalg.norm(out.vectors[0]) ** 2 == pytest.approx(n0, abs=1e-12)

    def test_closure_randomized(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            arity = int(rng.integers(1, 7))
            e = random_element(rng, arity)
            tgt = int(rng.integers(1, arity + 1))
            pi = MinorMap(arity, tgt, tuple(int(x) for x in rng.integers(0, tgt, arity)))
            minor(e, pi)  # constructor validates closure

    def test_commuting_diagram_randomized(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            a = int(rng.integers(1, 7))
            b = int(rng.integers(1, 7))
            c = int(rng.integers(1, 7))
            e = random_element(rng, a)
            pi = MinorMap(a, b, tuple(int(x) for x in rng.integers(0, b, a)))
            eta = MinorMap(b, c, tuple(int(x) for x in rng.integers(0, c, b)))
            lhs = minor(minor(e, pi), eta)
            rhs = minor(e, pi.compose(eta))
            assert lhs.close_to(rhs, 1e-9)

    def test_arity_mismatch(self):
        rng = np.random.default_rng(5)
        e = random_element(rng, 3)
        with pytest.raises(Exception):
            minor(e, MinorMap(2, 1, (0, 0)))


class TestSolutionElements:
    def three_lin_gap(self):
        lin = three_lin()
        tmpl = Template((PredicatePair(lin, lin),))
        return Instance(
            3,
            tmpl,
            (
                Constraint(0, (Literal.pos(1), Literal.pos(2), Literal.pos(3))),
                Constraint(0, (Literal.neg(1), Literal.neg(2), Literal.neg(3))),
            ),
        )

    def test_boolean_split_identities(self):
        inst = self.three_lin_gap()
        sol = solve_instance(inst)
        els = sdp_solution_to_elements(sol, inst)
        for e in els.variable_elements:
            norms = np.linalg.norm(e.vectors, axis=1) ** 2
            assert norms.sum() == pytest.approx(1.0, abs=1e-9)
            assert abs(e.vectors[0] @ e.vectors[1]) < 1e-9

    def test_minor_relations_hold(self):
        inst = self.three_lin_gap()
        sol = solve_instance(inst)
        els = sdp_solution_to_elements(sol, inst)
        assert els.max_minor_residual <= 1e-6
        assert len(els.constraint_elements) == 2
        assert els.constraint_elements[0].arity == 8

    def test_pinned_variable_element(self):
        pin = PredicatePair(
            make_ham(1, {1}), make_ham(1, {1})
        )
        inst = Instance(1, Template((pin,)), (Constraint(0, (Literal.pos(1),)),))
        sol = solve_instance(inst)
        els = sdp_solution_to_elements(sol, inst)
        u = els.variable_elements[0]
        assert np.linalg.norm(u.vectors[0]) < 1e-4  # u_{x,-1} vanishes
        assert np.linalg.norm(u.vectors[1]) == pytest.approx(1.0, abs=1e-4)

    def test_nonzero_error_rejected(self):
        pin = PredicatePair(make_ham(1, {1}), make_ham(1, {1}))
        pin_neg = PredicatePair(make_ham(1, {0}), make_ham(1, {0}))
        inst = Instance(
            1,
            Template((pin, pin_neg)),
            (Constraint(0, (Literal.pos(1),)), Constraint(1, (Literal.pos(1),))),
        )
        sol = solve_instance(inst)
        with pytest.raises(MinionError):
            sdp_solution_to_elements(sol, inst)

    def test_constants_in_constraints(self):
        tmpl = Template(
            (PredicatePair(make_ham(2, {1}), make_ham(2, {1})),), idempotent=True
        )
        inst = Instance(
            1, tmpl, (Constraint(0, (Literal.const(-1), Literal.pos(1))),)
        )
        sol = solve_instance(inst)
        els = sdp_solution_to_elements(sol, inst)
        assert els.max_minor_residual <= 1e-6
