"""Constraint-aware combinatorial model and greedy t-way covering arrays.

The model's parameters jointly encode an initial world state (boolean
parameters for unary fluents, symmetry-broken tuple parameters for n-ary
fluent families) and a bounded grammar derivation.  Constraints come from
the initial axioms, grammar validity, and per-derivation weakest
preconditions, so every valid assignment decodes to an accomplishable
world-task configuration.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .logic import (
    And, Eq, FALSE, Fluent, Formula, Forall, Exists, Iff, Implies, Not, Obj,
    Or, Rigid, TRUE, TrueF, FalseF, substitute,
)
from .tasks import (
    Derivation, EPSILON, Grammar, Task, enumerate_derivations, format_task,
)
from .theory import (
    ActionTheory, GroundAtom, WorldState, enumerate_initial_worlds,
    satisfies_init,
)
from .wp import holds_at, unfold_derived, wp as compute_wp, _anchor_to, SIT


class CtError(Exception):
    """Inconsistent combinatorial model or assignment."""


EPS = "eps"


# ---------------------------------------------------------------------------
# Parameter-constraint formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PTrue:
    pass


@dataclass(frozen=True)
class PFalse:
    pass


@dataclass(frozen=True)
class PEq:
    param: str
    value: str


@dataclass(frozen=True)
class PNot:
    body: "PFormula"


@dataclass(frozen=True)
class PAnd:
    parts: tuple["PFormula", ...]


@dataclass(frozen=True)
class POr:
    parts: tuple["PFormula", ...]


PFormula = Union[PTrue, PFalse, PEq, PNot, PAnd, POr]


def peval(phi: PFormula, assignment: dict[str, str]) -> Optional[bool]:
    """Kleene evaluation over a partial assignment; None = undetermined."""
    if isinstance(phi, PTrue):
        return True
    if isinstance(phi, PFalse):
        return False
    if isinstance(phi, PEq):
        v = assignment.get(phi.param)
        return None if v is None else (v == phi.value)
    if isinstance(phi, PNot):
        v = peval(phi.body, assignment)
        return None if v is None else (not v)
    if isinstance(phi, PAnd):
        saw_none = False
        for p in phi.parts:
            v = peval(p, assignment)
            if v is False:
                return False
            if v is None:
                saw_none = True
        return None if saw_none else True
    if isinstance(phi, POr):
        saw_none = False
        for p in phi.parts:
            v = peval(p, assignment)
            if v is True:
                return True
            if v is None:
                saw_none = True
        return None if saw_none else False
    raise TypeError("unknown constraint node %r" % (phi,))


def pparams(phi: PFormula) -> frozenset[str]:
    if isinstance(phi, PEq):
        return frozenset((phi.param,))
    if isinstance(phi, PNot):
        return pparams(phi.body)
    if isinstance(phi, (PAnd, POr)):
        out: frozenset[str] = frozenset()
        for p in phi.parts:
            out |= pparams(p)
        return out
    return frozenset()


@dataclass(frozen=True)
class CtParameter:
    name: str
    domain: tuple[str, ...]

    def __post_init__(self):
        if not self.domain:
            raise CtError("parameter %s has an empty domain" % self.name)


@dataclass(frozen=True)
class CtConstraint:
    label: str
    formula: PFormula


@dataclass
class CtModel:
    parameters: list[CtParameter]
    constraints: list[CtConstraint]
    strength: Union[int, str]
    # decode metadata
    theory: ActionTheory = None
    grammar: Grammar = None
    depth: int = 0
    derivations: dict[tuple[str, ...], Task] = field(default_factory=dict)
    unary_params: dict[str, GroundAtom] = field(default_factory=dict)
    tuple_params: dict[str, list[list[str]]] = field(default_factory=dict)  # family -> [instance][component]

    def param_index(self) -> dict[str, int]:
        return {p.name: i for i, p in enumerate(self.parameters)}


@dataclass(frozen=True)
class Configuration:
    """An accomplishable world-task pair decoded from a valid assignment."""
    initial_world: WorldState
    task: Task
    source_assignment: tuple[str, ...]  # values in parameter order


# ---------------------------------------------------------------------------
# Formula -> parameter-constraint translation
# ---------------------------------------------------------------------------

class _Translator:
    def __init__(self, model: CtModel):
        self.model = model
        self.theory = model.theory
        self.atom_to_p: dict[GroundAtom, PFormula] = {}
        for pname, atom in model.unary_params.items():
            self.atom_to_p[atom] = PEq(pname, "true")

    def atom(self, name: str, args: tuple[str, ...]) -> PFormula:
        key = (name, args)
        if key in self.atom_to_p:
            return self.atom_to_p[key]
        comps = self.model.tuple_params.get(name)
        if comps is None:
            raise CtError("fluent %s has no parameter encoding" % name)
        return POr(tuple(
            PAnd(tuple(PEq(inst[j], args[j]) for j in range(len(args))))
            for inst in comps))

    def translate(self, phi: Formula) -> PFormula:
        """Ground formula (one situation, primitives + rigids) to P-form."""
        if isinstance(phi, TrueF):
            return PTrue()
        if isinstance(phi, FalseF):
            return PFalse()
        if isinstance(phi, Rigid):
            names = tuple(a.name for a in phi.args)
            return PTrue() if self.theory.rigid_value(phi.name, names) else PFalse()
        if isinstance(phi, Fluent):
            names = tuple(a.name for a in phi.args)
            return self.atom(phi.name, names)
        if isinstance(phi, Eq):
            return PTrue() if phi.left.name == phi.right.name else PFalse()
        if isinstance(phi, Not):
            return PNot(self.translate(phi.body))
        if isinstance(phi, And):
            return PAnd((self.translate(phi.left), self.translate(phi.right)))
        if isinstance(phi, Or):
            return POr((self.translate(phi.left), self.translate(phi.right)))
        if isinstance(phi, Implies):
            return POr((PNot(self.translate(phi.left)), self.translate(phi.right)))
        if isinstance(phi, Iff):
            l, r = self.translate(phi.left), self.translate(phi.right)
            return POr((PAnd((l, r)), PAnd((PNot(l), PNot(r)))))
        if isinstance(phi, Exists):
            return POr(tuple(self.translate(substitute(phi.body, phi.var, Obj(o)))
                             for o in self.theory.objects))
        if isinstance(phi, Forall):
            return PAnd(tuple(self.translate(substitute(phi.body, phi.var, Obj(o)))
                              for o in self.theory.objects))
        raise CtError("cannot translate formula node %r" % (phi,))


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------

def build_model(theory: ActionTheory, grammar: Grammar, depth: int,
                strength: Union[int, str]) -> CtModel:
    """Assemble parameters and constraints for (initial world, task) pairs."""
    if depth < 1:
        raise CtError("derivation depth must be at least 1")
    worlds = list(enumerate_initial_worlds(theory))

    model = CtModel(parameters=[], constraints=[], strength=strength,
                    theory=theory, grammar=grammar, depth=depth)
    rule_ids = sorted(r.id for r in grammar.rules)

    # (c) derivation-step parameters
    for k in range(1, depth + 1):
        model.parameters.append(CtParameter("d%d" % k, tuple(rule_ids) + (EPS,)))

    # (b) n-ary fluent-family tuple parameters with symmetry breaking
    obj_domain = tuple(sorted(theory.objects)) + (EPS,)
    for fam in theory.primitive_fluents():
        arity = theory.predicates[fam].arity
        if arity < 2:
            continue
        bound = _instance_bound(theory, fam, worlds)
        insts: list[list[str]] = []
        for i in range(1, bound + 1):
            comp_names = []
            for j in range(1, arity + 1):
                name = "%s_%d_%d" % (fam, i, j)
                model.parameters.append(CtParameter(name, obj_domain))
                comp_names.append(name)
            insts.append(comp_names)
        model.tuple_params[fam] = insts
        for i, inst in enumerate(insts):
            model.constraints.append(CtConstraint(
                "%s instance %d all-or-none epsilon" % (fam, i + 1),
                _all_or_none_eps(inst)))
        for a, b in zip(insts, insts[1:]):
            model.constraints.append(CtConstraint(
                "%s symmetry break %s < %s" % (fam, a[0], b[0]),
                _lex_less_or_both_eps(a, b, sorted(theory.objects))))

    # (a) unary-fluent boolean parameters
    for fam in theory.primitive_fluents():
        if theory.predicates[fam].arity != 1:
            continue
        for o in sorted(theory.objects):
            name = "%s_%s" % (fam, o)
            model.parameters.append(CtParameter(name, ("false", "true")))
            model.unary_params[name] = (fam, (o,))

    for fam in theory.primitive_fluents():
        arity = theory.predicates[fam].arity
        if arity == 0:
            name = fam
            model.parameters.append(CtParameter(name, ("false", "true")))
            model.unary_params[name] = (fam, ())

    tr = _Translator(model)

    # (d) initial-axiom constraints
    for i, ax in enumerate(theory.init_axioms):
        grounded = _anchor_to(unfold_derived(ax, theory), SIT)
        model.constraints.append(CtConstraint(
            "initial axiom %d" % (i + 1), tr.translate(grounded)))

    # grammar validity and (e) weakest-precondition constraints
    valid_ants = []
    for deriv, task in enumerate_derivations(grammar, depth, theory):
        steps = _pad(deriv.steps, depth)
        model.derivations[steps] = task
        ant = PAnd(tuple(PEq("d%d" % (k + 1), steps[k]) for k in range(depth)))
        valid_ants.append(ant)
        wpf = compute_wp(TRUE, task, theory).formula
        if any(holds_at(wpf, theory, w) for w in worlds):
            model.constraints.append(CtConstraint(
                "WP of derivation %s" % ",".join(deriv.steps),
                POr((PNot(ant), tr.translate(wpf)))))
        else:
            model.constraints.append(CtConstraint(
                "block unaccomplishable derivation %s" % ",".join(deriv.steps),
                PNot(ant)))
    model.constraints.append(CtConstraint(
        "grammar validity", POr(tuple(valid_ants)) if valid_ants else PFalse()))
    return model


def _pad(steps: tuple[str, ...], depth: int) -> tuple[str, ...]:
    return steps + (EPSILON,) * (depth - len(steps))


def _instance_bound(theory: ActionTheory, fam: str, worlds: list[WorldState]) -> int:
    counts = [sum(1 for (f, _) in w.true_atoms if f == fam) for w in worlds]
    if counts and max(counts) > 0:
        return max(counts)
    arity = theory.predicates[fam].arity
    warnings.warn("no instance bound derivable for %s from the initial axioms; "
                  "falling back to |O|^%d" % (fam, arity))
    return len(theory.objects) ** arity


def _all_or_none_eps(comps: list[str]) -> PFormula:
    all_eps = PAnd(tuple(PEq(c, EPS) for c in comps))
    none_eps = PAnd(tuple(PNot(PEq(c, EPS)) for c in comps))
    return POr((all_eps, none_eps))


def _lex_less_or_both_eps(a: list[str], b: list[str], objects: list[str]) -> PFormula:
    """tuple(a) strictly below tuple(b), or both are the epsilon tuple.

    Component order is object-name order with epsilon as the maximum.
    """
    order = list(objects) + [EPS]
    rank = {v: i for i, v in enumerate(order)}
    cases = []
    for j in range(len(a)):
        prefix = tuple(POr(tuple(PAnd((PEq(a[i], v), PEq(b[i], v))) for v in order))
                       for i in range(j))
        less = POr(tuple(PAnd((PEq(a[j], v), PEq(b[j], w)))
                         for v in order for w in order if rank[v] < rank[w]))
        cases.append(PAnd(prefix + (less,)))
    both_eps = PAnd(tuple(PEq(c, EPS) for c in a) + tuple(PEq(c, EPS) for c in b))
    return POr(tuple(cases) + (both_eps,))


# ---------------------------------------------------------------------------
# Valid-assignment enumeration
# ---------------------------------------------------------------------------

def enumerate_valid(model: CtModel) -> Iterator[tuple[str, ...]]:
    """All assignments satisfying every constraint, in deterministic
    (parameter-order lexicographic) order, by pruned backtracking.

    The derivation parameters come first in parameter order, so their
    grammar-validity disjunction is checked as a prefix-set membership
    test, and once they are fixed the constraints already decided true
    (every other derivation's implication) are dropped for the subtree.
    """
    params = model.parameters
    index = model.param_index()
    depth = model.depth
    assert all(params[k].name == "d%d" % (k + 1) for k in range(depth))

    prefixes: list[set[tuple[str, ...]]] = [set() for _ in range(depth + 1)]
    for steps in model.derivations:
        padded = steps
        for k in range(depth + 1):
            prefixes[k].add(padded[:k])

    def build_watch(formulas: list[PFormula], start: int) -> list[list[PFormula]]:
        w: list[list[PFormula]] = [[] for _ in params]
        for f in formulas:
            for p in pparams(f):
                i = index[p]
                if i >= start:
                    w[i].append(f)
        return w

    # the prefix-set test subsumes the flat grammar-validity disjunction
    all_formulas = [c.formula for c in model.constraints
                    if c.label != "grammar validity"]
    d_names = {"d%d" % (k + 1) for k in range(depth)}
    d_only = [f for f in all_formulas if pparams(f) <= d_names]
    d_watch = build_watch(d_only, 0)
    assignment: dict[str, str] = {}

    def rec(i: int, watch) -> Iterator[tuple[str, ...]]:
        if i == len(params):
            yield tuple(assignment[p.name] for p in params)
            return
        pname = params[i].name
        for value in params[i].domain:
            if i < depth:
                pfx = tuple(assignment["d%d" % (k + 1)] for k in range(i)) + (value,)
                if pfx not in prefixes[i + 1]:
                    continue
            assignment[pname] = value
            if all(peval(f, assignment) is not False for f in watch[i]):
                if i + 1 == depth:
                    # derivation now fixed: drop the constraints it decides
                    live, dead = [], False
                    for f in all_formulas:
                        v = peval(f, assignment)
                        if v is False:
                            dead = True
                            break
                        if v is None:
                            live.append(f)
                    if not dead:
                        yield from rec(i + 1, build_watch(live, depth))
                else:
                    yield from rec(i + 1, watch)
            del assignment[pname]

    if not model.derivations:
        return
    yield from rec(0, d_watch)


def check_assignment(model: CtModel, row: tuple[str, ...]) -> bool:
    """Full (non-incremental) constraint check of one assignment."""
    assignment = {p.name: v for p, v in zip(model.parameters, row)}
    return all(peval(c.formula, assignment) is True for c in model.constraints)


# ---------------------------------------------------------------------------
# Covering arrays
# ---------------------------------------------------------------------------

def coverable_tuples(model: CtModel, t: int,
                     valid: Optional[list[tuple[str, ...]]] = None) -> set[tuple]:
    """Every t-tuple of (parameter index, value) pairs extendable to a
    valid full assignment."""
    if valid is None:
        valid = list(enumerate_valid(model))
    n = len(model.parameters)
    out: set[tuple] = set()
    combos = list(itertools.combinations(range(n), t))
    for row in valid:
        for combo in combos:
            out.add(tuple((i, row[i]) for i in combo))
    return out


def generate_covering_array(model: CtModel, t: Union[int, str],
                            valid: Optional[list[tuple[str, ...]]] = None) -> list[tuple[str, ...]]:
    """Greedy one-row-at-a-time covering array over the valid assignments.

    Among equally covering candidates the lexicographically smallest row
    wins, so arrays are reproducible across runs and platforms.
    """
    valid = sorted(enumerate_valid(model)) if valid is None else sorted(valid)
    if t == "full":
        return valid
    if not isinstance(t, int) or t < 1:
        raise CtError("coverage strength must be a positive integer or 'full'")
    t = min(t, len(model.parameters))
    combos = list(itertools.combinations(range(len(model.parameters)), t))
    row_tuples = [frozenset(tuple((i, row[i]) for i in combo) for combo in combos)
                  for row in valid]
    uncovered = set().union(*row_tuples) if row_tuples else set()
    rows: list[tuple[str, ...]] = []
    while uncovered:
        best_i, best_gain = None, -1
        for i, rt in enumerate(row_tuples):
            gain = len(rt & uncovered)
            if gain > best_gain:
                best_i, best_gain = i, gain
        if best_gain <= 0:
            raise CtError("uncoverable tuples remain; internal inconsistency")
        rows.append(valid[best_i])
        uncovered -= row_tuples[best_i]
    return rows


def verify_covering_array(model: CtModel, rows: list[tuple[str, ...]], t: int,
                          valid: Optional[list[tuple[str, ...]]] = None) -> bool:
    """Independent soundness + coverage pass over a generated array."""
    for row in rows:
        if not check_assignment(model, row):
            return False
    need = coverable_tuples(model, t, valid)
    combos = list(itertools.combinations(range(len(model.parameters)), min(t, len(model.parameters))))
    have: set[tuple] = set()
    for row in rows:
        for combo in combos:
            have.add(tuple((i, row[i]) for i in combo))
    return need <= have


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def realize_configuration(model: CtModel, row: tuple[str, ...]) -> Configuration:
    """Decode a valid assignment into its accomplishable configuration."""
    theory = model.theory
    assignment = {p.name: v for p, v in zip(model.parameters, row)}

    true_atoms: set[GroundAtom] = set()
    for pname, atom in model.unary_params.items():
        if assignment[pname] == "true":
            true_atoms.add(atom)
    for fam, insts in model.tuple_params.items():
        for inst in insts:
            vals = tuple(assignment[c] for c in inst)
            if all(v == EPS for v in vals):
                continue
            if any(v == EPS for v in vals):
                raise CtError("mixed-epsilon tuple for %s: %r" % (fam, vals))
            true_atoms.add((fam, vals))
    w0 = WorldState(frozenset(true_atoms))

    steps = tuple(assignment["d%d" % (k + 1)] for k in range(model.depth))
    task = model.derivations.get(steps)
    if task is None:
        raise CtError("assignment's derivation %r is not a valid one" % (steps,))

    if not satisfies_init(theory, w0):
        raise CtError("decoded world violates the initial axioms (encoding bug)")
    wpf = compute_wp(TRUE, task, theory).formula
    if not holds_at(wpf, theory, w0):
        raise CtError("decoded configuration is not accomplishable (encoding bug)")
    return Configuration(w0, task, row)
