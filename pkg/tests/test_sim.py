import random

import pytest

from robovalid import sim
from robovalid.sim import (
    InstantiationError, Scenario, box_dimension, instantiate, run_policy,
    signal_values,
)
from robovalid.stl import Trace, bool_sat, chi
from robovalid.theory import GroundOp, WorldState


def midpoint(scn):
    return tuple([0.5] * box_dimension(scn))


def closed_world(worlds):
    return next(w for w in worlds if ("IsOpen", ("o_m",)) not in w.true_atoms)


def test_box_dimension(scenario):
    # 2 placement dofs x 2 movables + 1 door + 3 knobs
    assert box_dimension(scenario) == 8


def test_closed_door_angle_below_one_degree(kitchen, kitchen_worlds, scenario, pmap):
    w = closed_world(kitchen_worlds)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    assert s.q0.door_angles["o_m"] < 1.0
    assert s.q0.door_angles["o_m"] > 0.0


def test_open_door_angle_above_threshold(kitchen, kitchen_worlds, scenario, pmap):
    w = next(w for w in kitchen_worlds if ("IsOpen", ("o_m",)) in w.true_atoms)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    assert s.q0.door_angles["o_m"] > 80.0


def test_roundtrip_consistency_100_samples(kitchen, kitchen_worlds, scenario, pmap):
    """Every produced q0 maps back to w0 under chi (the constructor checks,
    so survival alone is the property)."""
    rng = random.Random(5)
    for _ in range(100):
        w = rng.choice(kitchen_worlds)
        pt = tuple(rng.random() for _ in range(box_dimension(scenario)))
        s = instantiate(kitchen, w, scenario, pmap, pt)
        tr = Trace((0.0,), {k: (v,) for k, v in
                            signal_values(scenario, s.q0).items()})
        assert bool_sat(chi(kitchen, w, pmap), tr, 0.0)


def test_bad_sample_rejected(kitchen, kitchen_worlds, scenario, pmap):
    with pytest.raises(sim.SimError):
        instantiate(kitchen, kitchen_worlds[0], scenario, pmap, (0.5,))
    with pytest.raises(sim.SimError):
        instantiate(kitchen, kitchen_worlds[0], scenario, pmap,
                    tuple([1.5] * box_dimension(scenario)))


def test_unlocated_world_is_instantiation_error(kitchen, scenario, pmap):
    ghost = WorldState(frozenset({("IsOpen", ("o_b",)), ("IsOpen", ("o_p",)),
                                  ("IsOpen", ("o_t",)), ("IsOpen", ("o_m",))}))
    with pytest.raises(InstantiationError):
        instantiate(kitchen, ghost, scenario, pmap, midpoint(scenario))


def test_zero_length_task(kitchen, kitchen_worlds, scenario, pmap):
    w = closed_world(kitchen_worlds)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    tr, truncated = run_policy(kitchen, scenario, s, [], 0.25, 0.0)
    assert not truncated
    assert len(tr.times) == 1


def test_healthy_open_crosses_threshold(kitchen, kitchen_worlds, scenario, pmap):
    w = closed_world(kitchen_worlds)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    tr, truncated = run_policy(kitchen, scenario, s,
                               [GroundOp("open", ("o_m",))], 0.25, 5.0)
    assert not truncated
    angles = tr.signals["DoorAngle_o_m"]
    assert angles[0] < 1.0
    assert angles[-1] > 80.0
    # crossing happens within the controller stroke (2 s), well inside delta t
    crossing = next(t for t, a in zip(tr.times, angles) if a > 80.0)
    assert crossing <= 2.0


def test_door_fault_plateaus(kitchen, kitchen_worlds, fault_scenario, pmap):
    w = closed_world(kitchen_worlds)
    s = instantiate(kitchen, w, fault_scenario, pmap, midpoint(fault_scenario))
    tr, _ = run_policy(kitchen, fault_scenario, s,
                       [GroundOp("open", ("o_m",))], 0.25, 5.0)
    assert max(tr.signals["DoorAngle_o_m"]) < 80.0


def test_grasp_fault_drops_put(kitchen, kitchen_worlds, scenario, pmap):
    bad = Scenario(scenario.objects, scenario.workspace,
                   dict(scenario.policy_ranges, graspSuccessMargin=(0.001, 0.001)))
    w = next(w for w in kitchen_worlds if ("Loc", ("o_b", "o_t")) in w.true_atoms
             and ("Loc", ("o_p", "o_t")) in w.true_atoms)
    s = instantiate(kitchen, w, bad, pmap, midpoint(bad))
    tr, _ = run_policy(kitchen, bad, s, [GroundOp("put", ("o_b", "o_p"))], 0.25, 5.0)
    assert tr.signals["dist_o_b_o_p"][-1] > 0.05  # never arrived


def test_carried_object_tracks_carrier(kitchen, kitchen_worlds, scenario, pmap):
    # move the plate with bread on it; bread keeps its offset to the plate
    w = next(w for w in kitchen_worlds if ("Loc", ("o_b", "o_p")) in w.true_atoms
             and ("Loc", ("o_p", "o_t")) in w.true_atoms
             and ("IsOpen", ("o_m",)) in w.true_atoms)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    tr, _ = run_policy(kitchen, scenario, s, [GroundOp("put", ("o_p", "o_m"))],
                       0.25, 5.0)
    assert tr.signals["dist_o_p_o_m"][-1] <= 0.01
    assert tr.signals["contain_o_b_o_m"][-1] <= 0.0  # bread rode along
    for i in range(len(tr.times)):
        dx = tr.signals["dist_o_b_o_p"][i]
        assert dx <= 0.01 + 1e-9  # containment preserved while attached


def test_truncation_flag(kitchen, kitchen_worlds, scenario, pmap):
    w = closed_world(kitchen_worlds)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    tr, truncated = run_policy(kitchen, scenario, s,
                               [GroundOp("open", ("o_m",))], 0.25, 1.0)
    assert truncated  # horizon shorter than the 2 s stroke


def test_trace_determinism(kitchen, kitchen_worlds, scenario, pmap):
    w = closed_world(kitchen_worlds)
    s = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    ops = [GroundOp("open", ("o_m",)), GroundOp("turn_on", ("o_m",))]
    a, _ = run_policy(kitchen, scenario, s, ops, 0.25, 10.0)
    s2 = instantiate(kitchen, w, scenario, pmap, midpoint(scenario))
    b, _ = run_policy(kitchen, scenario, s2, ops, 0.25, 10.0)
    assert a.to_csv() == b.to_csv()
