"""Deterministic toy kitchen: concrete state, abstract-to-concrete
instantiation, scripted kinematic controllers with fault knobs, and
fixed-rate trace emission.

Everything is closed-form kinematics driven by a sample point in the unit
box, so identical inputs give byte-identical traces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .stl import PredicateMap, Trace, bool_sat, chi, format_stl
from .theory import ActionTheory, GroundOp, WorldState


class SimError(Exception):
    pass


class InstantiationError(SimError):
    """The sampled concrete state cannot satisfy the abstract world."""


KNOB_NAMES = ("doorTorqueLimit", "graspSuccessMargin", "timingScale")
KNOB_LEGAL = {"doorTorqueLimit": (0.0, 2.0),
              "graspSuccessMargin": (0.0, 0.05),
              "timingScale": (0.5, 2.0)}

# controller timing (seconds at timingScale 1)
_OP_DURATION = {"put": 3.0, "open": 2.0, "close": 2.0, "turn_on": 1.0}
_DWELL = 0.5
_OPEN_TARGET_CAP = 120.0
_CLOSE_TARGET = 0.3
_GRASP_MIN_MARGIN = 0.004
_JITTER_RADIUS = 0.008


# ---------------------------------------------------------------------------
# Scenario geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectGeometry:
    name: str
    fixed: bool
    height: float
    support_radius: float
    support_dz: float
    region_radius: float
    region_dzlo: float
    region_dzhi: float
    position: Optional[tuple[float, float, float]] = None  # fixed objects only
    zones: dict[str, tuple[float, float]] = field(default_factory=dict)
    zone_radius: float = 0.0
    door_closed: Optional[tuple[float, float]] = None
    door_open: Optional[tuple[float, float]] = None

    @property
    def has_door(self) -> bool:
        return self.door_closed is not None


@dataclass(frozen=True)
class Scenario:
    objects: dict[str, ObjectGeometry]
    workspace: dict[str, tuple[float, float]]
    policy_ranges: dict[str, tuple[float, float]]

    def movable(self) -> list[str]:
        return sorted(n for n, g in self.objects.items() if not g.fixed)

    def doors(self) -> list[str]:
        return sorted(n for n, g in self.objects.items() if g.has_door)


def load_scenario(path) -> Scenario:
    with open(path) as f:
        raw = json.load(f)
    objects = {}
    for name, o in raw["objects"].items():
        door = o.get("door")
        objects[name] = ObjectGeometry(
            name=name,
            fixed=o["fixed"],
            height=o["height"],
            support_radius=o["support"]["radius"],
            support_dz=o["support"]["dz"],
            region_radius=o["region"]["radius"],
            region_dzlo=o["region"]["dzlo"],
            region_dzhi=o["region"]["dzhi"],
            position=tuple(o["position"]) if "position" in o else None,
            zones={k: tuple(v) for k, v in o.get("zones", {}).items()},
            zone_radius=o.get("zone_radius", 0.0),
            door_closed=tuple(door["closed"]) if door else None,
            door_open=tuple(door["open"]) if door else None,
        )
        if objects[name].fixed and objects[name].position is None:
            raise SimError("fixed object %s needs a position" % name)
    ranges = {}
    for knob in KNOB_NAMES:
        lo, hi = raw["policy"][knob]
        legal = KNOB_LEGAL[knob]
        if not (legal[0] <= lo <= hi <= legal[1]):
            raise SimError("knob %s range [%g, %g] outside legal %r"
                           % (knob, lo, hi, legal))
        ranges[knob] = (lo, hi)
    workspace = {k: tuple(v) for k, v in raw["workspace"].items()}
    return Scenario(objects, workspace, ranges)


# ---------------------------------------------------------------------------
# Concrete state and signals
# ---------------------------------------------------------------------------

@dataclass
class ConcreteState:
    positions: dict[str, tuple[float, float, float]]
    door_angles: dict[str, float]  # door-bearing objects only
    running: dict[str, float]
    knobs: dict[str, float]

    def copy(self) -> "ConcreteState":
        return ConcreteState(dict(self.positions), dict(self.door_angles),
                             dict(self.running), dict(self.knobs))


def support_point(scn: Scenario, state: ConcreteState, name: str) -> tuple[float, float, float]:
    g = scn.objects[name]
    x, y, z = state.positions[name]
    return (x, y, z + g.support_dz)


def signal_values(scn: Scenario, state: ConcreteState) -> dict[str, float]:
    names = sorted(scn.objects)
    out: dict[str, float] = {}
    for n in names:
        g = scn.objects[n]
        out["DoorAngle_%s" % n] = state.door_angles.get(n, 180.0)
        out["running_%s" % n] = state.running.get(n, 0.0)
    for a in names:
        ax, ay, az = state.positions[a]
        ga = scn.objects[a]
        bottom = az - ga.height / 2.0
        for b in names:
            gb = scn.objects[b]
            bx, by, bz = state.positions[b]
            horiz = math.hypot(ax - bx, ay - by)
            out["dist_%s_%s" % (a, b)] = max(
                max(0.0, horiz - gb.support_radius),
                abs(bottom - (bz + gb.support_dz)))
            out["contain_%s_%s" % (a, b)] = max(
                horiz - gb.region_radius,
                (bz + gb.region_dzlo) - az,
                az - (bz + gb.region_dzhi))
    return out


# ---------------------------------------------------------------------------
# Instantiation: unit box -> concrete initial state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSample:
    q0: ConcreteState
    sample_point: tuple[float, ...]
    bounds_used: dict[str, tuple[float, float]]
    parents: dict[str, Optional[str]]  # initial support object per movable


def box_dimension(scn: Scenario) -> int:
    """Placement (2 per movable) + door angles + the three policy knobs."""
    return 2 * len(scn.movable()) + len(scn.doors()) + len(KNOB_NAMES)


def _loc_parent(theory: ActionTheory, w0: WorldState, obj: str) -> Optional[str]:
    for (f, args) in w0.true_atoms:
        if f == "Loc" and args[0] == obj:
            return args[1]
    return None


def instantiate(theory: ActionTheory, w0: WorldState, scn: Scenario,
                pmap: PredicateMap, sample: tuple[float, ...]) -> ScenarioSample:
    """Map a unit-box point to a concrete initial state consistent with w0.

    Movable objects are placed support-first: on a fixed surface inside
    the object's own zone, or on a movable carrier with a small jitter
    around its top anchor.  Door angles come from the closed or open
    interval chosen by IsOpen, knobs from the scenario ranges.
    """
    d = box_dimension(scn)
    if len(sample) != d:
        raise SimError("sample has dimension %d, expected %d" % (len(sample), d))
    if any(not (0.0 <= u <= 1.0) for u in sample):
        raise SimError("sample point outside the unit box")
    it = iter(sample)
    bounds: dict[str, tuple[float, float]] = {}

    positions: dict[str, tuple[float, float, float]] = {
        n: g.position for n, g in scn.objects.items() if g.fixed}
    parents: dict[str, Optional[str]] = {}
    for m in scn.movable():
        parents[m] = _loc_parent(theory, w0, m)

    # support-first order: carriers before the objects they carry
    def depth(m: str) -> int:
        k, cur = 0, parents.get(m)
        while cur in parents:
            k += 1
            cur = parents[cur]
        return k

    placement = {m: (next(it), next(it)) for m in scn.movable()}
    for m in sorted(scn.movable(), key=lambda m: (depth(m), m)):
        u1, u2 = placement[m]
        p = parents[m]
        if p is None:
            raise InstantiationError("movable object %s has no location in w0" % m)
        gp = scn.objects[p]
        gm = scn.objects[m]
        if gp.fixed:
            zone = gp.zones.get(m)
            if zone is None:
                raise InstantiationError("surface %s has no placement zone for %s"
                                         % (p, m))
            r = gp.zone_radius * math.sqrt(u2)
            cx, cy = zone
            sz = gp.position[2] + gp.support_dz
        else:
            if p not in positions:
                raise InstantiationError("carrier %s placed after %s" % (p, m))
            r = _JITTER_RADIUS * math.sqrt(u2)
            cx, cy, pz = positions[p]
            sz = pz + gp.support_dz
        ang = 2.0 * math.pi * u1
        positions[m] = (cx + r * math.cos(ang), cy + r * math.sin(ang),
                        sz + gm.height / 2.0)
        bounds["place_%s" % m] = (0.0, r if gp.fixed else _JITTER_RADIUS)

    door_angles: dict[str, float] = {}
    for dname in scn.doors():
        u = next(it)
        g = scn.objects[dname]
        is_open = (dname, ) in {args for (f, args) in w0.true_atoms if f == "IsOpen"}
        lo, hi = g.door_open if is_open else g.door_closed
        door_angles[dname] = lo + u * (hi - lo)
        bounds["door_%s" % dname] = (lo, hi)

    knobs: dict[str, float] = {}
    for knob in KNOB_NAMES:
        u = next(it)
        lo, hi = scn.policy_ranges[knob]
        knobs[knob] = lo + u * (hi - lo)
        bounds["knob_%s" % knob] = (lo, hi)

    running = {n: 0.0 for n in scn.objects}
    # abstract worlds cannot start with anything running; a running object
    # would contradict a Running atom absent from every initial world
    for (f, args) in w0.true_atoms:
        if f == "Running":
            running[args[0]] = 1.0

    q0 = ConcreteState(positions, door_angles, running, knobs)
    _check_workspace(scn, q0)
    _check_roundtrip(theory, w0, scn, pmap, q0)
    return ScenarioSample(q0, tuple(sample), bounds, parents)


def _check_workspace(scn: Scenario, state: ConcreteState) -> None:
    for n, (x, y, z) in state.positions.items():
        for axis, v in (("x", x), ("y", y), ("z", z)):
            lo, hi = scn.workspace[axis]
            if not (lo <= v <= hi):
                raise InstantiationError("%s is outside the workspace on %s (%g)"
                                         % (n, axis, v))
    for n, ang in state.door_angles.items():
        if not (0.0 <= ang <= 180.0):
            raise InstantiationError("door angle of %s out of range: %g" % (n, ang))


def _check_roundtrip(theory: ActionTheory, w0: WorldState, scn: Scenario,
                     pmap: PredicateMap, state: ConcreteState) -> None:
    trace = Trace((0.0,), {k: (v,) for k, v in signal_values(scn, state).items()})
    formula = chi(theory, w0, pmap)
    violated = [format_stl(lit) for lit in formula.parts
                if not bool_sat(lit, trace, 0.0)]
    if violated:
        raise InstantiationError(
            "concrete state inconsistent with the abstract world: "
            + "; ".join(violated))


# ---------------------------------------------------------------------------
# Scripted policy execution
# ---------------------------------------------------------------------------

@dataclass
class _OpRun:
    op: GroundOp
    start: float
    end: float
    captured: Optional[dict] = None


def _descendants(parents: dict[str, Optional[str]], root: str) -> list[str]:
    out = []
    for m in parents:
        cur = parents.get(m)
        while cur is not None:
            if cur == root:
                out.append(m)
                break
            cur = parents.get(cur)
    return sorted(out)


def run_policy(theory: ActionTheory, scn: Scenario, sample: ScenarioSample,
               ops: list[GroundOp], dt: float, horizon: float) -> tuple[Trace, bool]:
    """Execute an op-only branch with scripted controllers.

    Returns the fixed-rate trace and a truncation flag set when the
    horizon ends before the last operation completes.
    """
    if dt <= 0 or horizon < 0:
        raise SimError("dt must be positive and horizon nonnegative")
    knobs = sample.q0.knobs
    ts = knobs["timingScale"]

    schedule: list[_OpRun] = []
    t = 0.0
    for op in ops:
        if op.name not in _OP_DURATION:
            raise SimError("no controller for operation %s" % op.name)
        dur = _OP_DURATION[op.name] * ts
        schedule.append(_OpRun(op, t, t + dur))
        t += dur + _DWELL * ts
    makespan = schedule[-1].end if schedule else 0.0
    truncated = horizon < makespan

    state = sample.q0.copy()
    parents = dict(sample.parents)

    def capture(run: _OpRun) -> None:
        if run.captured is not None:
            return
        op = run.op
        cap: dict = {}
        if op.name == "put":
            obj, dest = op.args
            moved = [obj] + _descendants(parents, obj)
            cap["moved"] = {m: state.positions[m] for m in moved}
            gd = scn.objects[dest]
            gm = scn.objects[obj]
            if gd.fixed:
                zx, zy = gd.zones[obj]
                sz = gd.position[2] + gd.support_dz
            else:
                zx, zy, dz = state.positions[dest]
                sz = dz + gd.support_dz
            cap["target"] = (zx, zy, sz + gm.height / 2.0)
            cap["grasped"] = knobs["graspSuccessMargin"] >= _GRASP_MIN_MARGIN
        elif op.name in ("open", "close"):
            (obj,) = op.args
            if obj not in state.door_angles:
                raise SimError("%s has no door to %s" % (obj, op.name))
            cap["angle0"] = state.door_angles[obj]
            if op.name == "open":
                cap["target"] = min(_OPEN_TARGET_CAP, 180.0 * knobs["doorTorqueLimit"])
            else:
                cap["target"] = _CLOSE_TARGET
        run.captured = cap

    def apply_partial(snap: ConcreteState, run: _OpRun, now: float) -> None:
        capture(run)
        f = min(1.0, max(0.0, (now - run.start) / (run.end - run.start)))
        _apply(snap, run, f, parents, final=False)

    def finalize(run: _OpRun) -> None:
        capture(run)
        _apply(state, run, 1.0, parents, final=True)

    times: list[float] = []
    rows: list[dict[str, float]] = []
    idx = 0
    n_steps = int(math.floor(horizon / dt + 1e-9))
    for i in range(n_steps + 1):
        now = i * dt
        while idx < len(schedule) and now >= schedule[idx].end:
            finalize(schedule[idx])
            idx += 1
        snap = state
        if idx < len(schedule) and now >= schedule[idx].start:
            snap = state.copy()
            apply_partial(snap, schedule[idx], now)
        times.append(now)
        rows.append(signal_values(scn, snap))
    signals = {name: tuple(r[name] for r in rows) for name in rows[0]}
    return Trace(tuple(times), signals), truncated


def _apply(st: ConcreteState, run: _OpRun, f: float,
           parents: dict[str, Optional[str]], final: bool) -> None:
    op, cap = run.op, run.captured
    if op.name == "put":
        if not cap["grasped"]:
            return
        obj = op.args[0]
        x0, y0, z0 = cap["moved"][obj]
        tx, ty, tz = cap["target"]
        dx, dy, dz = f * (tx - x0), f * (ty - y0), f * (tz - z0)
        for m, (mx, my, mz) in cap["moved"].items():
            st.positions[m] = (mx + dx, my + dy, mz + dz)
        if final:
            parents[obj] = op.args[1]
    elif op.name in ("open", "close"):
        obj = op.args[0]
        a0, target = cap["angle0"], cap["target"]
        st.door_angles[obj] = a0 + f * (target - a0)
    elif op.name == "turn_on":
        if f >= 1.0:
            st.running[op.args[0]] = 1.0
