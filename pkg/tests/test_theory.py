import pytest

from robovalid.logic import Do, S0, evaluate, parse_formula
from robovalid.theory import (
    GroundOp, ModelError, PreconditionViolation, StateView, WorldState,
    compute_derived, enumerate_initial_worlds, possible, progress,
    satisfies_init,
)


def test_kitchen_declarations(kitchen):
    assert set(kitchen.objects) == {"o_b", "o_p", "o_m", "o_t"}
    assert kitchen.predicates["Placeable"].kind == "rigid"
    assert kitchen.predicates["Loc"].kind == "primitive"
    assert kitchen.predicates["In"].kind == "derived"
    assert set(kitchen.operations) == {"put", "open", "close", "turn_on"}
    assert set(kitchen.successor) == {"Loc", "IsOpen", "Running"}


def test_kitchen_rigid_truths(kitchen):
    assert kitchen.rigid_value("HasDoor", ("o_m",))
    assert not kitchen.rigid_value("HasDoor", ("o_t",))
    assert kitchen.rigid_value("Placeable", ("o_b", "o_p"))
    assert not kitchen.rigid_value("Placeable", ("o_t", "o_b"))


def test_initial_world_count(kitchen, kitchen_worlds):
    # 3 bread locations x 2 plate locations x open-or-closed microwave
    assert len(kitchen_worlds) == 12
    keys = {frozenset(w.true_atoms) for w in kitchen_worlds}
    assert len(keys) == 12
    for w in kitchen_worlds:
        assert satisfies_init(kitchen, w)  # independent re-check
        assert ("Running", ("o_m",)) not in w.true_atoms


def test_enumeration_is_deterministic(kitchen, kitchen_worlds):
    again = list(enumerate_initial_worlds(kitchen))
    assert [w.true_atoms for w in again] == [w.true_atoms for w in kitchen_worlds]


def test_non_worlds_rejected(kitchen):
    # bread in two places at once violates the uniqueness axiom
    bad = WorldState(frozenset({("Loc", ("o_b", "o_p")), ("Loc", ("o_b", "o_t")),
                                ("Loc", ("o_p", "o_t")),
                                ("IsOpen", ("o_b",)), ("IsOpen", ("o_p",)),
                                ("IsOpen", ("o_t",))}))
    assert not satisfies_init(kitchen, bad)


def test_derived_transitive_closure(kitchen):
    w = WorldState(frozenset({("Loc", ("o_b", "o_p")), ("Loc", ("o_p", "o_m"))}))
    derived = compute_derived(kitchen, w)
    assert ("In", ("o_b", "o_p")) in derived
    assert ("In", ("o_b", "o_m")) in derived  # two hops
    assert ("In", ("o_p", "o_m")) in derived
    assert ("In", ("o_m", "o_b")) not in derived


def test_possible_and_progress(kitchen, kitchen_worlds):
    w = next(w for w in kitchen_worlds
             if ("IsOpen", ("o_m",)) not in w.true_atoms)
    open_m = GroundOp("open", ("o_m",))
    assert possible(kitchen, w, open_m)
    w2 = progress(kitchen, w, open_m)
    assert ("IsOpen", ("o_m",)) in w2.true_atoms
    assert not possible(kitchen, w2, open_m)  # already open
    with pytest.raises(PreconditionViolation):
        progress(kitchen, w2, open_m)
    assert not possible(kitchen, w, GroundOp("open", ("o_t",)))  # no door


def test_put_moves_exactly_one_location(kitchen, kitchen_worlds):
    w = next(w for w in kitchen_worlds if ("Loc", ("o_b", "o_t")) in w.true_atoms
             and ("Loc", ("o_p", "o_t")) in w.true_atoms)
    w2 = progress(kitchen, w, GroundOp("put", ("o_b", "o_p")))
    assert ("Loc", ("o_b", "o_p")) in w2.true_atoms
    assert ("Loc", ("o_b", "o_t")) not in w2.true_atoms
    assert ("Loc", ("o_p", "o_t")) in w2.true_atoms  # plate untouched


def test_state_view_situation_anchor(kitchen, kitchen_worlds):
    w = kitchen_worlds[0]
    view = StateView(kitchen, w, S0)
    phi = parse_formula("IsOpen(o_b)@s0", kitchen.objects)
    evaluate(view, phi)  # anchored query is fine
    wrong = parse_formula("IsOpen(o_b)@s1", kitchen.objects)
    with pytest.raises(ModelError):
        evaluate(view, wrong)


def test_model_errors():
    with pytest.raises(Exception):
        from robovalid.theory import load_model
        load_model("/nonexistent/model.sc")
