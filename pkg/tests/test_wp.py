import random

from robovalid.logic import (
    Do, Fluent, Not, Obj, S0, TRUE, evaluate, format_formula, parse_formula,
    substitute,
)
from robovalid.tasks import enumerate_derivations, execute, parse_task
from robovalid.theory import GroundOp, StateView, possible, progress
from robovalid.wp import (
    SIT, holds_at, poss_formula, regress, satisfying_worlds, unfold_derived, wp,
)


def test_wp_nil_is_postcondition(kitchen):
    phi = parse_formula("IsOpen(o_m)@s", kitchen.objects)
    assert wp(phi, parse_task("nil", kitchen), kitchen).formula == phi


def test_open_then_close(kitchen, kitchen_worlds):
    """WP of [open(o_m); close(o_m)] picks exactly the closed, idle worlds."""
    tau = parse_task("[open(o_m) ; close(o_m)]", kitchen)
    got = wp(TRUE, tau, kitchen).formula
    want = parse_formula("!IsOpen(o_m)@s & !Running(o_m)@s", kitchen.objects)
    for w in kitchen_worlds:
        assert holds_at(got, kitchen, w) == holds_at(want, kitchen, w)
    assert any(holds_at(got, kitchen, w) for w in kitchen_worlds)


def test_open_twice_is_false(kitchen):
    tau = parse_task("[open(o_m) ; open(o_m)]", kitchen)
    assert format_formula(wp(TRUE, tau, kitchen).formula) == "false"


def test_wp_of_test_conjoins(kitchen, kitchen_worlds):
    tau = parse_task("[IsOpen(o_m)@s ? ; close(o_m)]", kitchen)
    got = wp(TRUE, tau, kitchen).formula
    sat = satisfying_worlds(got, kitchen)
    assert all(("IsOpen", ("o_m",)) in w.true_atoms for w in sat)
    assert len(sat) == 6


def test_wp_choice_disjoins(kitchen, kitchen_worlds):
    tau = parse_task("[open(o_m) | close(o_m)]", kitchen)
    got = wp(TRUE, tau, kitchen).formula
    # one of the two door moves is always possible initially
    assert all(holds_at(got, kitchen, w) for w in kitchen_worlds)


def test_unfold_derived_bounds_chains(kitchen):
    phi = parse_formula("In(o_b,o_t)@s", kitchen.objects)
    unfolded = unfold_derived(phi, kitchen)
    text = format_formula(unfolded)
    assert "In(" not in text
    assert text.count("Loc(") >= 3  # 1-, 2-, 3-hop chains over 4 objects


def test_poss_formula_matches_possible(kitchen, kitchen_worlds):
    for op in kitchen.ground_ops():
        phi = poss_formula(kitchen, op)
        for w in kitchen_worlds:
            assert holds_at(phi, kitchen, w) == possible(kitchen, w, op)


def _random_formula(rng, kitchen, sit):
    atoms = [Fluent("IsOpen", (Obj("o_m"),), sit),
             Fluent("Running", (Obj("o_m"),), sit),
             Fluent("Loc", (Obj("o_b"), Obj("o_p")), sit),
             parse_formula("exists x . Loc(o_b,x)@s", kitchen.objects),
             parse_formula("forall x . !Running(x)@s", kitchen.objects)]
    phi = rng.choice(atoms)
    for _ in range(rng.randint(0, 2)):
        other = rng.choice(atoms)
        phi = rng.choice([lambda: Not(phi),
                          lambda: parse_formula(
                              "(%s) & (%s)" % (format_formula(phi), format_formula(other)),
                              kitchen.objects)])()
    return phi


def test_regression_progression_duality(kitchen, kitchen_worlds):
    """evaluate(w, Regr(phi)) == evaluate(progress(w, op), phi) on 200 triples."""
    rng = random.Random(11)
    checked = 0
    while checked < 200:
        w = rng.choice(kitchen_worlds)
        op = rng.choice(kitchen.ground_ops())
        if not possible(kitchen, w, op):
            continue
        phi = unfold_derived(_random_formula(rng, kitchen, SIT), kitchen)
        shifted = substitute(phi, "s", Do(op.term(), S0))
        regr = regress(shifted, kitchen)
        before = evaluate(StateView(kitchen, w, S0), regr)
        after = evaluate(StateView(kitchen, progress(kitchen, w, op), S0),
                         substitute(phi, "s", S0))
        assert before == after
        checked += 1


def test_wp_equals_execution_depth4(kitchen, kitchen_grammar, kitchen_worlds):
    for _, task in enumerate_derivations(kitchen_grammar, 4, kitchen):
        phi = wp(TRUE, task, kitchen).formula
        for w in kitchen_worlds:
            assert holds_at(phi, kitchen, w) == execute(kitchen, w, task)
