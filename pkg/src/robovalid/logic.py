"""Finite-domain sorted first-order logic over rigid and fluent atoms.

Formulas are immutable trees with structural equality, so they can be
hashed, deduplicated and compared syntactically.  Evaluation expands
quantifiers over the finite object domain supplied by the world.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union


class LogicError(Exception):
    """Base class for errors raised by the logic kernel."""


class ModelError(LogicError):
    """An atom references an undeclared predicate or has the wrong arity."""


class TotalityError(LogicError):
    """A ground atom was queried that the world does not assign."""


class SubstitutionError(LogicError):
    """Sort mismatch during substitution (object vs. situation)."""


class ParseError(LogicError):
    """Malformed formula or term text."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Obj:
    """An object constant, element of the finite object set."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    """An object variable."""
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Obj, Var]


@dataclass(frozen=True)
class SitConst:
    """A named situation constant (in practice only the initial one, s0)."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SitVar:
    """A situation variable."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class OpTerm:
    """An operation instance, possibly with variable arguments."""
    name: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return "%s(%s)" % (self.name, ",".join(str(a) for a in self.args))


@dataclass(frozen=True)
class Do:
    """The successor situation do(op, s)."""
    op: OpTerm
    prev: "SitTerm"

    def __str__(self) -> str:
        return "do(%s,%s)" % (self.op, self.prev)


SitTerm = Union[SitConst, SitVar, Do]

S0 = SitConst("s0")


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Rigid:
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Fluent:
    name: str
    args: tuple[Term, ...]
    sit: SitTerm


@dataclass(frozen=True)
class Eq:
    """Equality between two object terms."""
    left: Term
    right: Term


@dataclass(frozen=True)
class OpEq:
    """Equality between the operation variable alpha and op(args).

    Only meaningful inside successor-axiom effect conditions; it is folded
    to object equalities once a ground operation is known and must never
    reach the evaluator.
    """
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Union[
    TrueF, FalseF, Rigid, Fluent, Eq, OpEq,
    Not, And, Or, Implies, Iff, Exists, Forall,
]

TRUE = TrueF()
FALSE = FalseF()

_BINARY = (And, Or, Implies, Iff)
_QUANT = (Exists, Forall)


def conj(parts) -> Formula:
    """Right-nested conjunction of an iterable of formulas (True if empty)."""
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disj(parts) -> Formula:
    """Right-nested disjunction of an iterable of formulas (False if empty)."""
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


def free_object_vars(phi: Formula) -> set[str]:
    """Names of free object variables in phi."""
    out: set[str] = set()

    def term_vars(ts) -> set[str]:
        return {t.name for t in ts if isinstance(t, Var)}

    def walk(f: Formula, bound: frozenset[str]) -> None:
        if isinstance(f, (TrueF, FalseF)):
            return
        if isinstance(f, Rigid):
            out.update(term_vars(f.args) - bound)
        elif isinstance(f, Fluent):
            out.update(term_vars(f.args) - bound)
            out.update(_sit_object_vars(f.sit) - bound)
        elif isinstance(f, Eq):
            out.update(term_vars((f.left, f.right)) - bound)
        elif isinstance(f, OpEq):
            out.update(term_vars(f.args) - bound)
        elif isinstance(f, Not):
            walk(f.body, bound)
        elif isinstance(f, _BINARY):
            walk(f.left, bound)
            walk(f.right, bound)
        elif isinstance(f, _QUANT):
            walk(f.body, bound | {f.var})
        else:
            raise ModelError("unknown formula node: %r" % (f,))

    walk(phi, frozenset())
    return out


def _sit_object_vars(s: SitTerm) -> set[str]:
    if isinstance(s, Do):
        return {t.name for t in s.op.args if isinstance(t, Var)} | _sit_object_vars(s.prev)
    return set()


def situation_terms(phi: Formula) -> set[SitTerm]:
    """All situation terms attached to fluent atoms in phi."""
    out: set[SitTerm] = set()

    def walk(f: Formula) -> None:
        if isinstance(f, Fluent):
            out.add(f.sit)
        elif isinstance(f, Not):
            walk(f.body)
        elif isinstance(f, _BINARY):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, _QUANT):
            walk(f.body)

    walk(phi)
    return out


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute(phi: Formula, var: str, value: Union[Obj, Var, SitTerm]) -> Formula:
    """Replace every free occurrence of `var` in phi by `value`.

    Object variables accept object constants or other object variables;
    situation variables accept only situation terms.  Bound occurrences
    are untouched.
    """
    if isinstance(value, (Obj, Var)):
        return _subst_obj(phi, var, value)
    if isinstance(value, (SitConst, SitVar, Do)):
        return _subst_sit(phi, var, value)
    raise SubstitutionError("cannot substitute value of type %s" % type(value).__name__)


def _subst_term(t: Term, var: str, value: Term) -> Term:
    if isinstance(t, Var) and t.name == var:
        return value
    return t


def _subst_obj(phi: Formula, var: str, value: Term) -> Formula:
    def sub_args(args):
        return tuple(_subst_term(a, var, value) for a in args)

    def sub_sit(s: SitTerm) -> SitTerm:
        if isinstance(s, Do):
            return Do(OpTerm(s.op.name, sub_args(s.op.args)), sub_sit(s.prev))
        if isinstance(s, (SitVar, SitConst)) and s.name == var:
            raise SubstitutionError(
                "object constant %s substituted into situation slot %s" % (value, var))
        return s

    if isinstance(phi, (TrueF, FalseF)):
        return phi
    if isinstance(phi, Rigid):
        return Rigid(phi.name, sub_args(phi.args))
    if isinstance(phi, Fluent):
        return Fluent(phi.name, sub_args(phi.args), sub_sit(phi.sit))
    if isinstance(phi, Eq):
        return Eq(_subst_term(phi.left, var, value), _subst_term(phi.right, var, value))
    if isinstance(phi, OpEq):
        return OpEq(phi.name, sub_args(phi.args))
    if isinstance(phi, Not):
        return Not(_subst_obj(phi.body, var, value))
    if isinstance(phi, _BINARY):
        return type(phi)(_subst_obj(phi.left, var, value), _subst_obj(phi.right, var, value))
    if isinstance(phi, _QUANT):
        if phi.var == var:
            return phi
        return type(phi)(phi.var, _subst_obj(phi.body, var, value))
    raise ModelError("unknown formula node: %r" % (phi,))


def _subst_sit(phi: Formula, var: str, value: SitTerm) -> Formula:
    def sub_sit(s: SitTerm) -> SitTerm:
        if isinstance(s, (SitVar, SitConst)) and s.name == var:
            return value
        if isinstance(s, Do):
            return Do(s.op, sub_sit(s.prev))
        return s

    if isinstance(phi, (TrueF, FalseF, Rigid, OpEq)):
        return phi
    if isinstance(phi, Eq):
        for t in (phi.left, phi.right):
            if isinstance(t, Var) and t.name == var:
                raise SubstitutionError(
                    "situation term substituted into object slot %s" % var)
        return phi
    if isinstance(phi, Fluent):
        return Fluent(phi.name, phi.args, sub_sit(phi.sit))
    if isinstance(phi, Not):
        return Not(_subst_sit(phi.body, var, value))
    if isinstance(phi, _BINARY):
        return type(phi)(_subst_sit(phi.left, var, value), _subst_sit(phi.right, var, value))
    if isinstance(phi, _QUANT):
        if phi.var == var:
            return phi
        return type(phi)(phi.var, _subst_sit(phi.body, var, value))
    raise ModelError("unknown formula node: %r" % (phi,))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class World:
    """Truth assignment over all ground predicate instances.

    rigid_truth maps (name, arg-names) to bool; fluent_truth maps
    (name, arg-names, sit-key) to bool where sit-key is str(sit).
    Querying an unassigned atom is a TotalityError, never a default.
    """

    def __init__(self, objects, predicates, rigid_truth=None, fluent_truth=None):
        self.objects = tuple(objects)
        self.predicates = dict(predicates)  # name -> (arity, kind)
        self.rigid_truth = dict(rigid_truth or {})
        self.fluent_truth = dict(fluent_truth or {})

    def check_atom(self, name: str, arity: int, fluent: bool) -> None:
        decl = self.predicates.get(name)
        if decl is None:
            raise ModelError("undeclared predicate %s" % name)
        want_arity, kind = decl
        if arity != want_arity:
            raise ModelError("%s expects %d arguments, got %d" % (name, want_arity, arity))
        if fluent == (kind == "rigid"):
            raise ModelError("%s used with wrong predicate kind" % name)

    def rigid_value(self, name: str, args: tuple[str, ...]) -> Optional[bool]:
        self.check_atom(name, len(args), fluent=False)
        key = (name, args)
        if key not in self.rigid_truth:
            raise TotalityError("rigid atom %s%r unassigned" % (name, args))
        return self.rigid_truth[key]

    def fluent_value(self, name: str, args: tuple[str, ...], sit: SitTerm) -> Optional[bool]:
        self.check_atom(name, len(args), fluent=True)
        key = (name, args, str(sit))
        if key not in self.fluent_truth:
            raise TotalityError("fluent atom %s%r at %s unassigned" % (name, args, sit))
        return self.fluent_truth[key]


def _ground_names(args: tuple[Term, ...]) -> tuple[str, ...]:
    names = []
    for a in args:
        if not isinstance(a, Obj):
            raise ModelError("formula is not variable-free: free variable %s" % a)
        names.append(a.name)
    return tuple(names)


def evaluate(world, phi: Formula) -> bool:
    """Truth of a variable-free formula in `world` (w |= phi)."""
    v = evaluate3(world, phi, partial=False)
    assert v is not None
    return v


def evaluate3(world, phi: Formula, partial: bool = True) -> Optional[bool]:
    """Kleene three-valued evaluation; None means undetermined.

    With partial=False an unassigned atom raises TotalityError instead of
    yielding None, which gives classical two-valued evaluation.
    """
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, FalseF):
        return False
    if isinstance(phi, Rigid):
        return world.rigid_value(phi.name, _ground_names(phi.args))
    if isinstance(phi, Fluent):
        if partial:
            v = world.fluent_value(phi.name, _ground_names(phi.args), phi.sit)
        else:
            v = world.fluent_value(phi.name, _ground_names(phi.args), phi.sit)
            if v is None:
                raise TotalityError("fluent atom %s undetermined" % (phi,))
        return v
    if isinstance(phi, Eq):
        l, r = phi.left, phi.right
        if not isinstance(l, Obj) or not isinstance(r, Obj):
            raise ModelError("equality over non-ground terms: %s = %s" % (l, r))
        return l.name == r.name
    if isinstance(phi, OpEq):
        raise ModelError("operation-equality atom reached the evaluator "
                         "(missing gamma instantiation)")
    if isinstance(phi, Not):
        v = evaluate3(world, phi.body, partial)
        return None if v is None else (not v)
    if isinstance(phi, And):
        l = evaluate3(world, phi.left, partial)
        if l is False:
            return False
        r = evaluate3(world, phi.right, partial)
        if r is False:
            return False
        if l is None or r is None:
            return None
        return True
    if isinstance(phi, Or):
        l = evaluate3(world, phi.left, partial)
        if l is True:
            return True
        r = evaluate3(world, phi.right, partial)
        if r is True:
            return True
        if l is None or r is None:
            return None
        return False
    if isinstance(phi, Implies):
        return evaluate3(world, Or(Not(phi.left), phi.right), partial)
    if isinstance(phi, Iff):
        l = evaluate3(world, phi.left, partial)
        r = evaluate3(world, phi.right, partial)
        if l is None or r is None:
            return None
        return l == r
    if isinstance(phi, Exists):
        saw_none = False
        for o in world.objects:
            v = evaluate3(world, substitute(phi.body, phi.var, Obj(o)), partial)
            if v is True:
                return True
            if v is None:
                saw_none = True
        return None if saw_none else False
    if isinstance(phi, Forall):
        saw_none = False
        for o in world.objects:
            v = evaluate3(world, substitute(phi.body, phi.var, Obj(o)), partial)
            if v is False:
                return False
            if v is None:
                saw_none = True
        return None if saw_none else True
    raise ModelError("unknown formula node: %r" % (phi,))


def check_axioms(world, axioms, sit: SitTerm) -> bool:
    """True iff every axiom holds in `world` after anchoring to `sit`.

    Axioms may mention any single free situation variable; it is replaced
    by `sit` before evaluation.
    """
    for psi in axioms:
        anchored = psi
        for sv in _free_sit_vars(psi):
            anchored = substitute(anchored, sv, sit)
        if not evaluate(world, anchored):
            return False
    return True


def _free_sit_vars(phi: Formula) -> set[str]:
    out = set()
    for s in situation_terms(phi):
        while isinstance(s, Do):
            s = s.prev
        if isinstance(s, SitVar):
            out.add(s.name)
    return out


# ---------------------------------------------------------------------------
# Constant folding
# ---------------------------------------------------------------------------

def fold(phi: Formula) -> Formula:
    """Constant folding of True/False plus double-negation elimination.

    No other simplification is performed, so folded output stays close to
    a hand calculation.
    """
    if isinstance(phi, Eq):
        if isinstance(phi.left, Obj) and isinstance(phi.right, Obj):
            return TRUE if phi.left.name == phi.right.name else FALSE
        return phi
    if isinstance(phi, Not):
        b = fold(phi.body)
        if isinstance(b, TrueF):
            return FALSE
        if isinstance(b, FalseF):
            return TRUE
        if isinstance(b, Not):
            return b.body
        return Not(b)
    if isinstance(phi, And):
        l, r = fold(phi.left), fold(phi.right)
        if isinstance(l, FalseF) or isinstance(r, FalseF):
            return FALSE
        if isinstance(l, TrueF):
            return r
        if isinstance(r, TrueF):
            return l
        return And(l, r)
    if isinstance(phi, Or):
        l, r = fold(phi.left), fold(phi.right)
        if isinstance(l, TrueF) or isinstance(r, TrueF):
            return TRUE
        if isinstance(l, FalseF):
            return r
        if isinstance(r, FalseF):
            return l
        return Or(l, r)
    if isinstance(phi, Implies):
        l, r = fold(phi.left), fold(phi.right)
        if isinstance(l, FalseF) or isinstance(r, TrueF):
            return TRUE
        if isinstance(l, TrueF):
            return r
        if isinstance(r, FalseF):
            return fold(Not(l))
        return Implies(l, r)
    if isinstance(phi, Iff):
        l, r = fold(phi.left), fold(phi.right)
        if isinstance(l, TrueF):
            return r
        if isinstance(r, TrueF):
            return l
        if isinstance(l, FalseF):
            return fold(Not(r))
        if isinstance(r, FalseF):
            return fold(Not(l))
        return Iff(l, r)
    if isinstance(phi, _QUANT):
        b = fold(phi.body)
        if isinstance(b, (TrueF, FalseF)):
            return b
        return type(phi)(phi.var, b)
    return phi


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _print_term(t: Term) -> str:
    return t.name


def format_formula(phi: Formula) -> str:
    """Canonical text form; `parse_formula` round-trips it."""
    return _fmt(phi, 0)


# precedence: iff 1 < implies 2 < or 3 < and 4 < unary 5
def _fmt(phi: Formula, prec: int) -> str:
    if isinstance(phi, TrueF):
        return "true"
    if isinstance(phi, FalseF):
        return "false"
    if isinstance(phi, Rigid):
        return "%s(%s)" % (phi.name, ",".join(_print_term(a) for a in phi.args))
    if isinstance(phi, Fluent):
        return "%s(%s)@%s" % (phi.name, ",".join(_print_term(a) for a in phi.args), phi.sit)
    if isinstance(phi, Eq):
        return "%s = %s" % (_print_term(phi.left), _print_term(phi.right))
    if isinstance(phi, OpEq):
        return "alpha = %s(%s)" % (phi.name, ",".join(_print_term(a) for a in phi.args))
    if isinstance(phi, Not):
        return "!" + _fmt(phi.body, 5)
    if isinstance(phi, And):
        s = "%s & %s" % (_fmt(phi.left, 4), _fmt(phi.right, 3))
        return s if prec <= 3 else "(%s)" % s
    if isinstance(phi, Or):
        s = "%s | %s" % (_fmt(phi.left, 3), _fmt(phi.right, 2))
        return s if prec <= 2 else "(%s)" % s
    if isinstance(phi, Implies):
        s = "%s -> %s" % (_fmt(phi.left, 2), _fmt(phi.right, 1))
        return s if prec <= 1 else "(%s)" % s
    if isinstance(phi, Iff):
        s = "%s <-> %s" % (_fmt(phi.left, 1), _fmt(phi.right, 0))
        return s if prec <= 0 else "(%s)" % s
    if isinstance(phi, Exists):
        s = "exists %s . %s" % (phi.var, _fmt(phi.body, 0))
        return s if prec <= 0 else "(%s)" % s
    if isinstance(phi, Forall):
        s = "forall %s . %s" % (phi.var, _fmt(phi.body, 0))
        return s if prec <= 0 else "(%s)" % s
    raise ModelError("unknown formula node: %r" % (phi,))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_PUNCT = ("<->", "->", "!=", "(", ")", ",", "&", "|", "!", ".", "@", "=", "?", ";", "[", "]")


def tokenize(text: str) -> list[str]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(p)
                i += len(p)
                break
        else:
            if c.isalnum() or c == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                toks.append(text[i:j])
                i = j
            else:
                raise ParseError("unexpected character %r in %r" % (c, text))
    return toks


class _TokenStream:
    def __init__(self, toks: list[str]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> str:
        if self.pos >= len(self.toks):
            raise ParseError("unexpected end of input")
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, tok: str) -> None:
        t = self.next()
        if t != tok:
            raise ParseError("expected %r, got %r" % (tok, t))

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)


class FormulaParser:
    """Recursive-descent parser for the formula text syntax.

    `objects` decides which identifiers are constants; every other
    identifier in a term slot is an object variable.
    """

    def __init__(self, objects):
        self.objects = set(objects)

    def parse(self, text: str) -> Formula:
        ts = _TokenStream(tokenize(text))
        phi = self.formula(ts)
        if not ts.at_end():
            raise ParseError("trailing tokens after formula: %r" % ts.toks[ts.pos:])
        return phi

    def formula(self, ts: _TokenStream) -> Formula:
        return self.iff(ts)

    def iff(self, ts: _TokenStream) -> Formula:
        f = self.implies(ts)
        while ts.peek() == "<->":
            ts.next()
            f = Iff(f, self.implies(ts))
        return f

    def implies(self, ts: _TokenStream) -> Formula:
        f = self.disjunction(ts)
        if ts.peek() == "->":
            ts.next()
            return Implies(f, self.implies(ts))
        return f

    def disjunction(self, ts: _TokenStream) -> Formula:
        f = self.conjunction(ts)
        while ts.peek() == "|":
            ts.next()
            f = Or(f, self.conjunction(ts))
        return f

    def conjunction(self, ts: _TokenStream) -> Formula:
        f = self.unary(ts)
        while ts.peek() == "&":
            ts.next()
            f = And(f, self.unary(ts))
        return f

    def unary(self, ts: _TokenStream) -> Formula:
        t = ts.peek()
        if t == "!":
            ts.next()
            return Not(self.unary(ts))
        if t == "(":
            ts.next()
            f = self.formula(ts)
            ts.expect(")")
            return f
        if t in ("forall", "exists"):
            ts.next()
            var = ts.next()
            ts.expect(".")
            body = self.formula(ts)
            return (Forall if t == "forall" else Exists)(var, body)
        if t == "true":
            ts.next()
            return TRUE
        if t == "false":
            ts.next()
            return FALSE
        return self.atom(ts)

    def term(self, ts: _TokenStream) -> Term:
        name = ts.next()
        if not name or not (name[0].isalpha() or name[0] == "_"):
            raise ParseError("expected a term, got %r" % name)
        return Obj(name) if name in self.objects else Var(name)

    def sit_term(self, ts: _TokenStream) -> SitTerm:
        name = ts.next()
        if name == "do":
            ts.expect("(")
            opname = ts.next()
            ts.expect("(")
            args = self.term_list(ts)
            ts.expect(")")
            ts.expect(",")
            prev = self.sit_term(ts)
            ts.expect(")")
            return Do(OpTerm(opname, args), prev)
        if name == "s0":
            return S0
        return SitVar(name)

    def term_list(self, ts: _TokenStream) -> tuple[Term, ...]:
        args = [self.term(ts)]
        while ts.peek() == ",":
            ts.next()
            args.append(self.term(ts))
        return tuple(args)

    def atom(self, ts: _TokenStream) -> Formula:
        name = ts.next()
        if name == "alpha":
            ts.expect("=")
            opname = ts.next()
            ts.expect("(")
            args = self.term_list(ts)
            ts.expect(")")
            return OpEq(opname, args)
        if ts.peek() == "(":
            ts.next()
            args = self.term_list(ts)
            ts.expect(")")
            if ts.peek() == "@":
                ts.next()
                sit = self.sit_term(ts)
                return Fluent(name, args, sit)
            return Rigid(name, args)
        # bare term: equality or inequality
        left = Obj(name) if name in self.objects else Var(name)
        nxt = ts.peek()
        if nxt == "=":
            ts.next()
            return Eq(left, self.term(ts))
        if nxt == "!=":
            ts.next()
            return Not(Eq(left, self.term(ts)))
        raise ParseError("expected atom at %r" % name)


def parse_formula(text: str, objects) -> Formula:
    return FormulaParser(objects).parse(text)
