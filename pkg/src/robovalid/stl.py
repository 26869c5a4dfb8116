"""Signal temporal logic: quantitative robustness over timed traces and
specification synthesis from world-task configurations.

Signals are piecewise-constant between strictly increasing sample times.
Window extrema are taken over the samples inside the window plus the
window endpoints, so monitoring is reproducible bit for bit.
"""

from __future__ import annotations

import bisect
import io
from dataclasses import dataclass, field
from typing import Union

from .ctgen import Configuration
from .logic import TRUE
from .tasks import Op, Task, Test, branch_to_task, normalize
from .theory import ActionTheory, WorldState, compute_derived, progress
from .wp import holds_at, wp


class StlError(Exception):
    """Malformed specification, trace, or predicate map."""


class TruncationError(StlError):
    """The evaluation window lies entirely past the end of the trace."""


class SynthesisError(StlError):
    """A fluent family has no concrete-signal mapping."""


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

_COMPARATORS = (">", ">=", "<", "<=")


@dataclass(frozen=True)
class STrue:
    pass


@dataclass(frozen=True)
class Atom:
    signal: str
    comparator: str
    threshold: float

    def __post_init__(self):
        if self.comparator not in _COMPARATORS:
            raise StlError("unknown comparator %r" % self.comparator)

    def margin(self, value: float) -> float:
        if self.comparator in (">", ">="):
            return value - self.threshold
        return self.threshold - value

    def holds(self, value: float) -> bool:
        if self.comparator == ">":
            return value > self.threshold
        if self.comparator == ">=":
            return value >= self.threshold
        if self.comparator == "<":
            return value < self.threshold
        return value <= self.threshold


@dataclass(frozen=True)
class SNot:
    body: "StlFormula"


@dataclass(frozen=True)
class SAnd:
    parts: tuple["StlFormula", ...]


@dataclass(frozen=True)
class SOr:
    parts: tuple["StlFormula", ...]


@dataclass(frozen=True)
class _Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi):
            raise StlError("bad interval [%g, %g]" % (self.lo, self.hi))


@dataclass(frozen=True)
class Eventually(_Interval):
    body: "StlFormula" = None


@dataclass(frozen=True)
class Always(_Interval):
    body: "StlFormula" = None


@dataclass(frozen=True)
class Until(_Interval):
    left: "StlFormula" = None
    right: "StlFormula" = None


StlFormula = Union[STrue, Atom, SNot, SAnd, SOr, Eventually, Always, Until]


def format_stl(phi: StlFormula) -> str:
    """Canonical prefix text form."""
    if isinstance(phi, STrue):
        return "true"
    if isinstance(phi, Atom):
        return "(%s %s %.10g)" % (phi.comparator, phi.signal, phi.threshold)
    if isinstance(phi, SNot):
        return "(not %s)" % format_stl(phi.body)
    if isinstance(phi, SAnd):
        return "(and %s)" % " ".join(format_stl(p) for p in phi.parts)
    if isinstance(phi, SOr):
        return "(or %s)" % " ".join(format_stl(p) for p in phi.parts)
    if isinstance(phi, Eventually):
        return "(ev %.10g %.10g %s)" % (phi.lo, phi.hi, format_stl(phi.body))
    if isinstance(phi, Always):
        return "(alw %.10g %.10g %s)" % (phi.lo, phi.hi, format_stl(phi.body))
    if isinstance(phi, Until):
        return "(until %.10g %.10g %s %s)" % (
            phi.lo, phi.hi, format_stl(phi.left), format_stl(phi.right))
    raise TypeError("unknown formula node %r" % (phi,))


def stl_signals(phi: StlFormula) -> frozenset[str]:
    if isinstance(phi, Atom):
        return frozenset((phi.signal,))
    if isinstance(phi, SNot):
        return stl_signals(phi.body)
    if isinstance(phi, (SAnd, SOr)):
        out: frozenset[str] = frozenset()
        for p in phi.parts:
            out |= stl_signals(p)
        return out
    if isinstance(phi, (Eventually, Always)):
        return stl_signals(phi.body)
    if isinstance(phi, Until):
        return stl_signals(phi.left) | stl_signals(phi.right)
    return frozenset()


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trace:
    times: tuple[float, ...]
    signals: dict[str, tuple[float, ...]]

    def __post_init__(self):
        if not self.times:
            raise StlError("empty trace")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise StlError("timestamps must be strictly increasing")
        for name, vals in self.signals.items():
            if len(vals) != len(self.times):
                raise StlError("signal %s has %d samples for %d timestamps"
                               % (name, len(vals), len(self.times)))

    @property
    def end(self) -> float:
        return self.times[-1]

    def value(self, signal: str, t: float) -> float:
        vals = self.signals.get(signal)
        if vals is None:
            raise StlError("unknown signal %r" % signal)
        if t < self.times[0]:
            raise StlError("time %g precedes the trace start" % t)
        i = bisect.bisect_right(self.times, t) - 1
        return vals[i]

    def window_times(self, lo: float, hi: float) -> list[float]:
        """Evaluation instants for a window: its start plus every strictly
        later sample time up to its end, clipped to the trace."""
        if lo > self.end:
            raise TruncationError(
                "window [%g, %g] starts past the trace end %g" % (lo, hi, self.end))
        out = [lo]
        i = bisect.bisect_right(self.times, lo)
        while i < len(self.times) and self.times[i] <= hi:
            out.append(self.times[i])
            i += 1
        return out

    def to_csv(self) -> str:
        names = sorted(self.signals)
        buf = io.StringIO()
        buf.write("time," + ",".join(names) + "\n")
        for i, t in enumerate(self.times):
            row = [_fmt(t)] + [_fmt(self.signals[n][i]) for n in names]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise StlError("empty trace file")
        header = lines[0].split(",")
        if header[0] != "time":
            raise StlError("trace header must start with 'time'")
        names = header[1:]
        times: list[float] = []
        cols: list[list[float]] = [[] for _ in names]
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != len(header):
                raise StlError("ragged trace row: %r" % ln)
            times.append(float(parts[0]))
            for c, v in zip(cols, parts[1:]):
                c.append(float(v))
        return Trace(tuple(times), {n: tuple(c) for n, c in zip(names, cols)})


def _fmt(x: float) -> str:
    return "%.10g" % x


# ---------------------------------------------------------------------------
# Robustness and boolean satisfaction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessResult:
    value: float
    truncated: bool


def robustness(phi: StlFormula, trace: Trace, t: float = 0.0) -> RobustnessResult:
    """Quantitative semantics; `truncated` is set when any window had to be
    clipped at the end of the trace."""
    if t > trace.end:
        raise TruncationError("evaluation time %g past trace end %g" % (t, trace.end))
    return _rho(phi, trace, t)


def _rho(phi: StlFormula, trace: Trace, t: float) -> RobustnessResult:
    if isinstance(phi, STrue):
        return RobustnessResult(float("inf"), False)
    if isinstance(phi, Atom):
        return RobustnessResult(phi.margin(trace.value(phi.signal, t)), False)
    if isinstance(phi, SNot):
        r = _rho(phi.body, trace, t)
        return RobustnessResult(-r.value, r.truncated)
    if isinstance(phi, (SAnd, SOr)):
        if not phi.parts:
            v = float("inf") if isinstance(phi, SAnd) else float("-inf")
            return RobustnessResult(v, False)
        rs = [_rho(p, trace, t) for p in phi.parts]
        agg = min if isinstance(phi, SAnd) else max
        return RobustnessResult(agg(r.value for r in rs), any(r.truncated for r in rs))
    if isinstance(phi, (Eventually, Always)):
        lo, hi = t + phi.lo, t + phi.hi
        pts = trace.window_times(lo, hi)
        truncated = hi > trace.end
        rs = [_rho(phi.body, trace, u) for u in pts]
        agg = max if isinstance(phi, Eventually) else min
        return RobustnessResult(agg(r.value for r in rs),
                                truncated or any(r.truncated for r in rs))
    if isinstance(phi, Until):
        lo, hi = t + phi.lo, t + phi.hi
        pts = trace.window_times(lo, hi)
        truncated = hi > trace.end
        best = float("-inf")
        for u in pts:
            right = _rho(phi.right, trace, u)
            lefts = [_rho(phi.left, trace, v) for v in trace.window_times(t, u)]
            inner = min([right.value] + [r.value for r in lefts])
            truncated = truncated or right.truncated or any(r.truncated for r in lefts)
            best = max(best, inner)
        return RobustnessResult(best, truncated)
    raise TypeError("unknown formula node %r" % (phi,))


def bool_sat(phi: StlFormula, trace: Trace, t: float = 0.0) -> bool:
    """Boolean satisfaction, implemented independently of robustness so the
    two semantics can be cross-checked."""
    if isinstance(phi, STrue):
        return True
    if isinstance(phi, Atom):
        return phi.holds(trace.value(phi.signal, t))
    if isinstance(phi, SNot):
        return not bool_sat(phi.body, trace, t)
    if isinstance(phi, SAnd):
        return all(bool_sat(p, trace, t) for p in phi.parts)
    if isinstance(phi, SOr):
        return any(bool_sat(p, trace, t) for p in phi.parts)
    if isinstance(phi, Eventually):
        return any(bool_sat(phi.body, trace, u)
                   for u in trace.window_times(t + phi.lo, t + phi.hi))
    if isinstance(phi, Always):
        return all(bool_sat(phi.body, trace, u)
                   for u in trace.window_times(t + phi.lo, t + phi.hi))
    if isinstance(phi, Until):
        for u in trace.window_times(t + phi.lo, t + phi.hi):
            if bool_sat(phi.right, trace, u) and \
               all(bool_sat(phi.left, trace, v) for v in trace.window_times(t, u)):
                return True
        return False
    raise TypeError("unknown formula node %r" % (phi,))


# ---------------------------------------------------------------------------
# Predicate map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredicateTemplate:
    family: str
    params: tuple[str, ...]
    signal_template: str  # with {param} placeholders
    comparator: str
    threshold: float

    def atom(self, args: tuple[str, ...]) -> Atom:
        if len(args) != len(self.params):
            raise SynthesisError("%s expects %d arguments, got %d"
                                 % (self.family, len(self.params), len(args)))
        signal = self.signal_template.format(**dict(zip(self.params, args)))
        return Atom(signal, self.comparator, self.threshold)


@dataclass(frozen=True)
class PredicateMap:
    templates: dict[str, PredicateTemplate]
    delta_t: float

    def atom(self, family: str, args: tuple[str, ...]) -> Atom:
        tpl = self.templates.get(family)
        if tpl is None:
            raise SynthesisError("no concrete-signal mapping for fluent family %s"
                                 % family)
        return tpl.atom(args)


def load_pmap(path) -> PredicateMap:
    """File format: `pmap: Fluent(a,b) := signal_{a}_{b} <cmp> <threshold>`
    lines plus one `deltat: <seconds>` line.  '#' starts a comment."""
    templates: dict[str, PredicateTemplate] = {}
    delta_t = None
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                key, rest = line.split(":", 1)
            except ValueError:
                raise StlError("%s:%d: missing ':'" % (path, lineno))
            key, rest = key.strip(), rest.strip()
            if key == "deltat":
                delta_t = float(rest)
                if delta_t <= 0:
                    raise StlError("%s:%d: deltat must be positive" % (path, lineno))
            elif key == "pmap":
                head, expr = rest.split(":=", 1)
                name, paren = head.strip().split("(", 1)
                params = tuple(p.strip() for p in paren.rstrip(") ").split(",") if p.strip())
                toks = expr.split()
                if len(toks) != 3 or toks[1] not in _COMPARATORS:
                    raise StlError("%s:%d: expected '<signal> <cmp> <threshold>'"
                                   % (path, lineno))
                templates[name.strip()] = PredicateTemplate(
                    name.strip(), params, toks[0], toks[1], float(toks[2]))
            else:
                raise StlError("%s:%d: unknown section %r" % (path, lineno, key))
    if delta_t is None:
        raise StlError("%s: no deltat line" % path)
    return PredicateMap(templates, delta_t)


# ---------------------------------------------------------------------------
# Specification synthesis
# ---------------------------------------------------------------------------

def chi(theory: ActionTheory, state: WorldState, pmap: PredicateMap) -> StlFormula:
    """Propositional encoding of a total world state: one literal per
    ground fluent instance, primitive and derived alike."""
    derived_true = compute_derived(theory, state)
    literals: list[StlFormula] = []
    for fam in theory.primitive_fluents() + theory.derived_fluents():
        truths = state.true_atoms if theory.predicates[fam].kind == "primitive" \
            else derived_true
        for atom in theory.ground_atoms(fam):
            lit = pmap.atom(fam, atom[1])
            literals.append(lit if atom in truths else SNot(lit))
    return SAnd(tuple(literals))


@dataclass(frozen=True)
class BranchSpec:
    ops: tuple  # GroundOp sequence after stripping tests
    checkpoints: tuple[tuple[int, StlFormula], ...]  # (situation index, chi)
    formula: StlFormula


@dataclass(frozen=True)
class SpecSynthesisResult:
    formula: StlFormula
    branches: tuple[BranchSpec, ...]
    delta_t: float


def synthesize(config: Configuration, theory: ActionTheory, pmap: PredicateMap,
               delta_t: float = None) -> SpecSynthesisResult:
    """Nested-Eventually specification for an accomplishable configuration.

    The task is normalized into choice-free branches, branches whose
    weakest precondition fails at the initial world are pruned, tests are
    stripped, and each surviving branch contributes one nested formula
    over the checkpoint states reached by progressing its operations.
    The result is the disjunction over surviving branches.
    """
    if delta_t is None:
        delta_t = pmap.delta_t
    if delta_t <= 0:
        raise StlError("delta_t must be positive")
    w0 = config.initial_world
    specs: list[BranchSpec] = []
    for branch in normalize(config.task):
        branch_task = branch_to_task(branch)
        if not holds_at(wp(TRUE, branch_task, theory).formula, theory, w0):
            continue
        ops = tuple(a.op for a in branch if isinstance(a, Op))
        state = w0
        checkpoints = []
        for i, op in enumerate(ops, 1):
            state = progress(theory, state, op)
            checkpoints.append((i, chi(theory, state, pmap)))
        formula: StlFormula = None
        for _, ck in reversed(checkpoints):
            inner = ck if formula is None else SAnd((ck, formula))
            formula = Eventually(0.0, delta_t, inner)
        if formula is None:
            formula = STrue()
        specs.append(BranchSpec(ops, tuple(checkpoints), formula))
    if not specs:
        raise StlError("all branches pruned for an accomplishable configuration; "
                       "encoding bug")
    top = specs[0].formula if len(specs) == 1 else SOr(tuple(s.formula for s in specs))
    return SpecSynthesisResult(top, tuple(specs), delta_t)
