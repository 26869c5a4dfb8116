import itertools

import pytest

from robovalid.logic import (
    And, FALSE, Fluent, Implies, Not, Obj, Or, S0, SubstitutionError,
    TotalityError, TRUE, World, evaluate, evaluate3, fold, format_formula,
    parse_formula, substitute,
)

OBJECTS = ("o_b", "o_p", "o_m", "o_t")
PREDICATES = {"Placeable": (2, "rigid"), "IsOpen": (1, "fluent"),
              "Running": (1, "fluent"), "Loc": (2, "fluent")}


def world(loc=(), isopen=()):
    rigid = {("Placeable", pair): pair in {("o_b", "o_p"), ("o_b", "o_t")}
             for pair in itertools.product(OBJECTS, repeat=2)}
    fluents = {}
    for a, b in itertools.product(OBJECTS, repeat=2):
        fluents[("Loc", (a, b), "s0")] = (a, b) in set(loc)
    for o in OBJECTS:
        fluents[("IsOpen", (o,), "s0")] = o in set(isopen)
        fluents[("Running", (o,), "s0")] = False
    return World(OBJECTS, PREDICATES, rigid, fluents)


def test_parse_format_roundtrip():
    texts = [
        "IsOpen(o_m)@s0",
        "!IsOpen(o_m)@s0 & !Running(o_m)@s0",
        "forall x . Placeable(x,o_t) -> Loc(x,o_t)@s0",
        "exists x . exists y . Loc(x,y)@s0 & x != y",
        "(IsOpen(o_m)@s <-> Running(o_m)@s) | false",
    ]
    for t in texts:
        phi = parse_formula(t, OBJECTS)
        assert parse_formula(format_formula(phi), OBJECTS) == phi


def test_evaluate_quantifiers():
    w = world(loc=[("o_b", "o_p")])
    assert evaluate(w, parse_formula("exists x . Loc(o_b,x)@s0", OBJECTS))
    assert not evaluate(w, parse_formula("forall x . Loc(o_b,x)@s0", OBJECTS))
    assert evaluate(w, parse_formula("forall x . Loc(x,o_m)@s0 -> false", OBJECTS))


def test_evaluate_equality_and_rigids():
    w = world()
    assert evaluate(w, parse_formula("o_b != o_p", OBJECTS))
    assert evaluate(w, parse_formula("Placeable(o_b,o_p)", OBJECTS))
    assert not evaluate(w, parse_formula("Placeable(o_p,o_b)", OBJECTS))


def test_substitute_respects_binding():
    phi = parse_formula("Loc(x,o_p)@s0 & (exists x . Loc(x,o_m)@s0)", OBJECTS)
    text = format_formula(substitute(phi, "x", Obj("o_b")))
    assert "Loc(o_b,o_p)" in text
    assert "exists x . Loc(x,o_m)" in text  # bound occurrence untouched


def test_substitute_sort_errors():
    with pytest.raises(SubstitutionError):
        # situation term into an object slot
        substitute(parse_formula("x != o_p", OBJECTS), "x", S0)
    with pytest.raises(SubstitutionError):
        # object constant into a situation slot
        substitute(parse_formula("IsOpen(o_m)@s", OBJECTS), "s", Obj("o_b"))


def test_fold_constants():
    phi = And(TRUE, Or(FALSE, Not(Not(Fluent("IsOpen", (Obj("o_m"),), S0)))))
    assert format_formula(fold(phi)) == "IsOpen(o_m)@s0"
    assert fold(And(FALSE, TRUE)) == FALSE
    assert fold(Implies(FALSE, Fluent("Running", (Obj("o_m"),), S0))) == TRUE


def test_unassigned_atom_is_an_error():
    w = World(OBJECTS, PREDICATES, {}, {})
    with pytest.raises(TotalityError):
        evaluate(w, parse_formula("IsOpen(o_m)@s0", OBJECTS))


class _PartialView:
    """Minimal view with one unknown atom, for three-valued checks."""

    objects = OBJECTS

    def rigid_value(self, name, args):
        return False

    def fluent_value(self, name, args, sit):
        return None if (name, args) == ("IsOpen", ("o_m",)) else False


def test_three_valued_kleene():
    v = _PartialView()
    unknown = parse_formula("IsOpen(o_m)@s0", OBJECTS)
    known = parse_formula("IsOpen(o_b)@s0", OBJECTS)
    assert evaluate3(v, unknown) is None
    assert evaluate3(v, And(unknown, FALSE)) is False
    assert evaluate3(v, Or(unknown, Not(known))) is True
    # Kleene, not supervaluation: the excluded middle stays unknown
    assert evaluate3(v, Or(unknown, Not(unknown))) is None
    assert evaluate3(v, parse_formula("exists x . IsOpen(x)@s0", OBJECTS)) is None
    assert evaluate3(v, parse_formula("forall x . !Running(x)@s0", OBJECTS)) is True


def test_three_valued_agrees_with_classical_on_total_worlds():
    w = world(loc=[("o_b", "o_p")], isopen=["o_m"])
    for text in ["exists x . Loc(o_b,x)@s0",
                 "forall x . forall y . Loc(x,y)@s0 -> Placeable(x,y)",
                 "IsOpen(o_m)@s0 | !IsOpen(o_m)@s0",
                 "(IsOpen(o_m)@s0 <-> Running(o_m)@s0) -> o_b != o_b"]:
        phi = parse_formula(text, OBJECTS)
        assert evaluate3(w, phi) is evaluate(w, phi)
