"""Action theories: declarations, derived fluents, executability, progression.

An ActionTheory bundles the object set, predicate and operation
declarations, initial axioms, successor-state effect conditions and
derived-fluent definitions, loaded from a line-oriented model file.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .logic import (
    FALSE, TRUE, And, Do, Eq, Fluent, Formula, ModelError, Not, Obj, OpEq,
    OpTerm, Or, ParseError, S0, SitTerm, SitVar, Var,
    FormulaParser, check_axioms, conj, evaluate, evaluate3, fold,
    free_object_vars, substitute,
)


class TheoryError(Exception):
    """Malformed action theory or model file."""


class PreconditionViolation(Exception):
    """progress() called for an operation that is not possible."""


GroundAtom = tuple[str, tuple[str, ...]]  # (fluent name, object names)


@dataclass(frozen=True)
class GroundOp:
    name: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "%s(%s)" % (self.name, ",".join(self.args))

    def term(self) -> OpTerm:
        return OpTerm(self.name, tuple(Obj(a) for a in self.args))


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arity: int
    kind: str  # rigid | primitive | derived

    def __post_init__(self):
        if self.arity < 0:
            raise TheoryError("negative arity for %s" % self.name)
        if self.kind not in ("rigid", "primitive", "derived"):
            raise TheoryError("bad predicate kind %r" % self.kind)


@dataclass(frozen=True)
class OperationDecl:
    name: str
    params: tuple[str, ...]
    precondition: Formula  # free vars: params plus situation variable s


@dataclass(frozen=True)
class SuccessorAxiom:
    fluent: str
    params: tuple[str, ...]
    gamma_plus: Formula
    gamma_minus: Formula


@dataclass(frozen=True)
class DerivedFluentDef:
    fluent: str
    arity: int
    closure_of: Optional[str] = None     # transitive closure of a primitive fluent
    params: tuple[str, ...] = ()
    definition: Optional[Formula] = None  # explicit definition over primitives/rigids


@dataclass(frozen=True)
class GrammarRule:
    id: str
    lhs: str
    rhs: tuple[str, ...]


@dataclass
class ActionTheory:
    objects: tuple[str, ...]
    predicates: dict[str, PredicateDecl]
    operations: dict[str, OperationDecl]
    successor: dict[str, SuccessorAxiom]
    derived: dict[str, DerivedFluentDef]
    init_axioms: list[Formula]
    rigid_truths: frozenset[tuple[str, tuple[str, ...]]]
    grammar: list[GrammarRule] = field(default_factory=list)

    def __post_init__(self):
        for name, sa in self.successor.items():
            decl = self.predicates.get(name)
            if decl is None or decl.kind != "primitive":
                raise TheoryError("successor axiom for non-primitive fluent %s" % name)
        for name, d in self.derived.items():
            if d.closure_of is not None:
                base = self.predicates.get(d.closure_of)
                if base is None or base.kind != "primitive":
                    raise TheoryError(
                        "%s is a closure of undeclared or non-primitive %s"
                        % (name, d.closure_of))
            elif d.definition is not None:
                for other in self.derived:
                    if _mentions_fluent(d.definition, other):
                        raise TheoryError(
                            "derived fluent %s depends on derived fluent %s" % (name, other))
            else:
                raise TheoryError("derived fluent %s has no definition" % name)
        for f in self.primitive_fluents():
            if f not in self.successor:
                raise TheoryError("primitive fluent %s has no successor axiom" % f)

    def primitive_fluents(self) -> list[str]:
        return sorted(n for n, d in self.predicates.items() if d.kind == "primitive")

    def derived_fluents(self) -> list[str]:
        return sorted(n for n, d in self.predicates.items() if d.kind == "derived")

    def rigid_predicates(self) -> list[str]:
        return sorted(n for n, d in self.predicates.items() if d.kind == "rigid")

    def ground_atoms(self, fluent: str) -> list[GroundAtom]:
        arity = self.predicates[fluent].arity
        return [(fluent, combo)
                for combo in itertools.product(self.objects, repeat=arity)]

    def all_primitive_atoms(self) -> list[GroundAtom]:
        out = []
        for f in self.primitive_fluents():
            out.extend(self.ground_atoms(f))
        return out

    def ground_ops(self) -> list[GroundOp]:
        out = []
        for name in sorted(self.operations):
            decl = self.operations[name]
            for combo in itertools.product(self.objects, repeat=len(decl.params)):
                out.append(GroundOp(name, combo))
        return out

    def rigid_value(self, name: str, args: tuple[str, ...]) -> bool:
        return (name, args) in self.rigid_truths


def _mentions_fluent(phi: Formula, name: str) -> bool:
    if isinstance(phi, Fluent):
        return phi.name == name
    if isinstance(phi, Not):
        return _mentions_fluent(phi.body, name)
    if isinstance(phi, (And, Or)) or hasattr(phi, "left"):
        return _mentions_fluent(phi.left, name) or _mentions_fluent(phi.right, name)
    if hasattr(phi, "body"):
        return _mentions_fluent(phi.body, name)
    return False


# ---------------------------------------------------------------------------
# World states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorldState:
    """Truth over all ground primitive-fluent atoms at one situation.

    Only the true atoms are stored; the theory's declarations make the
    assignment total.  Derived fluents are always recomputed, never stored.
    """
    true_atoms: frozenset[GroundAtom]

    def holds(self, atom: GroundAtom) -> bool:
        return atom in self.true_atoms

    def sorted_atoms(self) -> list[GroundAtom]:
        return sorted(self.true_atoms)


class StateView:
    """Adapter presenting a WorldState (plus derived atoms) as a World.

    Fluent atoms are accepted at any situation term syntactically equal to
    the anchor; other situation terms are a ModelError, which keeps
    progression bugs from silently reading the wrong situation.
    """

    def __init__(self, theory: ActionTheory, state: WorldState,
                 sit: SitTerm = S0, derived: Optional[frozenset[GroundAtom]] = None):
        self.theory = theory
        self.state = state
        self.sit_key = str(sit)
        self.derived = compute_derived(theory, state) if derived is None else derived
        self.objects = theory.objects

    def rigid_value(self, name: str, args: tuple[str, ...]) -> bool:
        decl = self.theory.predicates.get(name)
        if decl is None or decl.kind != "rigid" or decl.arity != len(args):
            raise ModelError("bad rigid atom %s%r" % (name, args))
        return self.theory.rigid_value(name, args)

    def fluent_value(self, name: str, args: tuple[str, ...], sit: SitTerm) -> bool:
        decl = self.theory.predicates.get(name)
        if decl is None or decl.kind == "rigid" or decl.arity != len(args):
            raise ModelError("bad fluent atom %s%r" % (name, args))
        if str(sit) != self.sit_key:
            raise ModelError("fluent %s queried at %s, view anchored at %s"
                             % (name, sit, self.sit_key))
        if decl.kind == "derived":
            return (name, args) in self.derived
        return self.state.holds((name, args))


class _PartialStateView(StateView):
    """StateView over a partially assigned state; unknown atoms yield None."""

    def __init__(self, theory: ActionTheory, assigned: dict[GroundAtom, bool],
                 sit: SitTerm = S0):
        self.theory = theory
        self.assigned = assigned
        self.sit_key = str(sit)
        self.objects = theory.objects

    def fluent_value(self, name, args, sit):
        decl = self.theory.predicates.get(name)
        if decl is None or decl.kind != "primitive":
            raise ModelError("partial view supports only primitive fluents, got %s" % name)
        if str(sit) != self.sit_key:
            raise ModelError("fluent %s queried at %s, view anchored at %s"
                             % (name, sit, self.sit_key))
        return self.assigned.get((name, args))


# ---------------------------------------------------------------------------
# Derived fluents
# ---------------------------------------------------------------------------

def compute_derived(theory: ActionTheory, state: WorldState) -> frozenset[GroundAtom]:
    """All true derived-fluent atoms for `state`.

    Transitive closures are computed to fixpoint by BFS; explicit
    definitions are evaluated over the primitives.
    """
    out: set[GroundAtom] = set()
    for name in theory.derived_fluents():
        d = theory.derived[name]
        if d.closure_of is not None:
            edges: dict[str, set[str]] = {}
            for (f, args) in state.true_atoms:
                if f == d.closure_of:
                    edges.setdefault(args[0], set()).add(args[1])
            for src in theory.objects:
                seen: set[str] = set()
                frontier = list(edges.get(src, ()))
                while frontier:
                    nxt = frontier.pop()
                    if nxt in seen:
                        continue
                    seen.add(nxt)
                    frontier.extend(edges.get(nxt, ()))
                for dst in seen:
                    out.add((name, (src, dst)))
        else:
            view = StateView(theory, state, derived=frozenset())
            for (_, args) in theory.ground_atoms(name):
                phi = d.definition
                for p, a in zip(d.params, args):
                    phi = substitute(phi, p, Obj(a))
                phi = _anchor(phi, S0)
                if evaluate(view, phi):
                    out.add((name, args))
    return frozenset(out)


def _anchor(phi: Formula, sit: SitTerm) -> Formula:
    """Replace every free situation variable in phi by `sit`."""
    from .logic import _free_sit_vars
    for sv in _free_sit_vars(phi):
        phi = substitute(phi, sv, sit)
    return phi


# ---------------------------------------------------------------------------
# Executability and progression
# ---------------------------------------------------------------------------

def instantiate_op_equalities(phi: Formula, op: GroundOp) -> Formula:
    """Fold alpha-equality atoms for a known ground operation.

    alpha = f(t...) becomes the conjunction of argument equalities when f
    matches op's name, else false.
    """
    if isinstance(phi, OpEq):
        if phi.name != op.name:
            return FALSE
        if len(phi.args) != len(op.args):
            raise TheoryError("arity mismatch in operation equality %s" % (phi,))
        return conj([Eq(t, Obj(a)) for t, a in zip(phi.args, op.args)])
    if isinstance(phi, Not):
        return Not(instantiate_op_equalities(phi.body, op))
    if isinstance(phi, (And, Or)) or type(phi).__name__ in ("Implies", "Iff"):
        return type(phi)(instantiate_op_equalities(phi.left, op),
                         instantiate_op_equalities(phi.right, op))
    if hasattr(phi, "body") and hasattr(phi, "var"):
        return type(phi)(phi.var, instantiate_op_equalities(phi.body, op))
    return phi


def instantiate_gamma(gamma: Formula, params: tuple[str, ...],
                      atom_args: tuple[str, ...], op: GroundOp) -> Formula:
    """Instantiate an effect condition for one ground atom and operation."""
    phi = gamma
    for p, a in zip(params, atom_args):
        phi = substitute(phi, p, Obj(a))
    return instantiate_op_equalities(phi, op)


def possible(theory: ActionTheory, state: WorldState, op: GroundOp) -> bool:
    """Whether `op` is executable in `state` (its precondition holds)."""
    decl = theory.operations.get(op.name)
    if decl is None:
        raise TheoryError("undeclared operation %s" % op.name)
    if len(op.args) != len(decl.params):
        raise TheoryError("operation %s expects %d arguments, got %d"
                          % (op.name, len(decl.params), len(op.args)))
    for a in op.args:
        if a not in theory.objects:
            raise TheoryError("undeclared object %s" % a)
    phi = decl.precondition
    for p, a in zip(decl.params, op.args):
        phi = substitute(phi, p, Obj(a))
    phi = _anchor(phi, S0)
    return evaluate(StateView(theory, state), phi)


def progress(theory: ActionTheory, state: WorldState, op: GroundOp) -> WorldState:
    """Forward state update: new truth is gamma+ or (old and not gamma-)."""
    if not possible(theory, state, op):
        raise PreconditionViolation("%s is not possible here" % op)
    view = StateView(theory, state)
    new_true: set[GroundAtom] = set()
    for atom in theory.all_primitive_atoms():
        fname, args = atom
        sa = theory.successor[fname]
        gplus = _anchor(instantiate_gamma(sa.gamma_plus, sa.params, args, op), S0)
        gminus = _anchor(instantiate_gamma(sa.gamma_minus, sa.params, args, op), S0)
        if evaluate(view, gplus) or (state.holds(atom) and not evaluate(view, gminus)):
            new_true.add(atom)
    return WorldState(frozenset(new_true))


# ---------------------------------------------------------------------------
# Initial world enumeration
# ---------------------------------------------------------------------------

def enumerate_initial_worlds(theory: ActionTheory) -> Iterator[WorldState]:
    """All WorldStates satisfying the initial axioms, in deterministic order.

    Backtracks over ground primitive atoms with three-valued pruning:
    a partial assignment that already falsifies some initial axiom is
    abandoned, which avoids the 2^N generate-then-filter blowup.
    """
    atoms = theory.all_primitive_atoms()
    axioms = [_anchor(a, S0) for a in theory.init_axioms]
    assigned: dict[GroundAtom, bool] = {}
    view = _PartialStateView(theory, assigned)

    def consistent() -> bool:
        return all(evaluate3(view, ax) is not False for ax in axioms)

    def rec(i: int) -> Iterator[WorldState]:
        if i == len(atoms):
            yield WorldState(frozenset(a for a, v in assigned.items() if v))
            return
        for value in (False, True):
            assigned[atoms[i]] = value
            if consistent():
                yield from rec(i + 1)
            del assigned[atoms[i]]

    yield from rec(0)


def satisfies_init(theory: ActionTheory, state: WorldState) -> bool:
    """Independent check that `state` satisfies every initial axiom."""
    return check_axioms(StateView(theory, state), theory.init_axioms, S0)


# ---------------------------------------------------------------------------
# Model file loading
# ---------------------------------------------------------------------------

def load_model(path) -> ActionTheory:
    """Parse the line-oriented model file format.

    Sections: objects:, rigid:, rigidtrue:, fluent:, op:, successor:,
    init:, grammar:.  '#' starts a comment.
    """
    objects: list[str] = []
    predicates: dict[str, PredicateDecl] = {}
    operations: dict[str, OperationDecl] = {}
    successor: dict[str, SuccessorAxiom] = {}
    derived: dict[str, DerivedFluentDef] = {}
    init_axioms: list[Formula] = []
    rigid_truths: set[tuple[str, tuple[str, ...]]] = set()
    grammar: list[GrammarRule] = []
    pending: list[tuple[int, str, str]] = []

    with open(path) as fh:
        raw_lines = fh.readlines()

    for lineno, raw in enumerate(raw_lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, rest = line.split(":", 1)
        except ValueError:
            raise TheoryError("%s:%d: missing section keyword" % (path, lineno))
        key, rest = key.strip(), rest.strip()
        if key == "objects":
            objects.extend(rest.split())
        elif key == "rigid":
            name, arity = rest.split("/")
            predicates[name.strip()] = PredicateDecl(name.strip(), int(arity), "rigid")
        elif key == "rigidtrue":
            for atom in rest.split():
                name, args = _parse_ground_atom(atom)
                rigid_truths.add((name, args))
        elif key == "fluent":
            parts = rest.split()
            name, arity = parts[0].split("/")
            name = name.strip()
            if len(parts) >= 2 and parts[1] == "primitive":
                predicates[name] = PredicateDecl(name, int(arity), "primitive")
            elif len(parts) >= 3 and parts[1] == "closure-of":
                predicates[name] = PredicateDecl(name, int(arity), "derived")
                derived[name] = DerivedFluentDef(name, int(arity), closure_of=parts[2])
            else:
                raise TheoryError("%s:%d: bad fluent declaration %r" % (path, lineno, rest))
        elif key in ("op", "successor", "init", "grammar"):
            pending.append((lineno, key, rest))
        else:
            raise TheoryError("%s:%d: unknown section %r" % (path, lineno, key))

    if not objects:
        raise TheoryError("%s: no objects declared" % path)
    parser = FormulaParser(objects)

    for lineno, key, rest in pending:
        try:
            if key == "op":
                head, pre = rest.split("pre:", 1)
                name, params = _parse_signature(head.strip())
                operations[name] = OperationDecl(name, params, parser.parse(pre))
            elif key == "successor":
                head, tail = rest.split("plus:", 1)
                plus_text, minus_text = tail.split("minus:", 1)
                name, params = _parse_signature(head.strip())
                successor[name] = SuccessorAxiom(
                    name, params, parser.parse(plus_text), parser.parse(minus_text))
            elif key == "init":
                init_axioms.append(parser.parse(rest))
            elif key == "grammar":
                rid, rule = rest.split(":", 1)
                lhs, rhs = rule.split("::=", 1)
                grammar.append(GrammarRule(rid.strip(), lhs.strip(), tuple(rhs.split())))
        except (ValueError, ParseError) as exc:
            raise TheoryError("%s:%d: %s" % (path, lineno, exc)) from exc

    return ActionTheory(
        objects=tuple(objects),
        predicates=predicates,
        operations=operations,
        successor=successor,
        derived=derived,
        init_axioms=init_axioms,
        rigid_truths=frozenset(rigid_truths),
        grammar=grammar,
    )


def _parse_ground_atom(text: str) -> tuple[str, tuple[str, ...]]:
    if "(" not in text or not text.endswith(")"):
        raise TheoryError("bad ground atom %r" % text)
    name, argtext = text[:-1].split("(", 1)
    return name, tuple(a.strip() for a in argtext.split(","))


def _parse_signature(text: str) -> tuple[str, tuple[str, ...]]:
    name, args = _parse_ground_atom(text)
    return name, args
