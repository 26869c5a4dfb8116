"""Regression over successor situations and inductive weakest preconditions.

Derived fluents are unfolded to primitives before any regression, and
executability atoms are macro-expanded to their defining conditions, so a
weakest precondition is always a pure fluent/rigid formula over one
situation variable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .logic import (
    And, Do, Fluent, Formula, Not, Obj, Or, S0, SitVar, TRUE,
    LogicError, conj, disj, evaluate, fold, substitute,
)
from .theory import (
    ActionTheory, GroundOp, StateView, WorldState, _anchor,
    enumerate_initial_worlds, instantiate_gamma,
)
from .tasks import Choice, Nil, Op, Seq, Task, Test

SIT = SitVar("s")


class RegressionError(LogicError):
    """Formula shape violates the regression contract."""


def unfold_derived(phi: Formula, theory: ActionTheory) -> Formula:
    """Replace derived-fluent atoms by formulas over primitive fluents.

    A transitive closure is expanded exactly by bounding chains at
    |objects| - 1 compositions; explicit definitions are inlined.
    """
    if isinstance(phi, Fluent) and phi.name in theory.derived:
        d = theory.derived[phi.name]
        if d.closure_of is not None:
            src, dst = phi.args
            base = d.closure_of
            hops = max(1, len(theory.objects) - 1)
            terms = [Fluent(base, (src, dst), phi.sit)]
            for length in range(2, hops + 1):
                mids = ["_c%d" % i for i in range(1, length)]
                chain = [Fluent(base, (src, __t(mids[0])), phi.sit)]
                for a, b in zip(mids, mids[1:]):
                    chain.append(Fluent(base, (__t(a), __t(b)), phi.sit))
                chain.append(Fluent(base, (__t(mids[-1]), dst), phi.sit))
                body = conj(chain)
                for m in reversed(mids):
                    from .logic import Exists
                    body = Exists(m, body)
                terms.append(body)
            return disj(terms)
        body = d.definition
        for p, a in zip(d.params, phi.args):
            body = substitute(body, p, a if isinstance(a, Obj) else a)
        # re-anchor the definition's situation variable to the atom's
        from .logic import _free_sit_vars
        for sv in _free_sit_vars(body):
            body = substitute(body, sv, phi.sit)
        return body
    if hasattr(phi, "left") and hasattr(phi, "right"):
        return type(phi)(unfold_derived(phi.left, theory), unfold_derived(phi.right, theory))
    if isinstance(phi, Not):
        return Not(unfold_derived(phi.body, theory))
    if hasattr(phi, "var") and hasattr(phi, "body"):
        return type(phi)(phi.var, unfold_derived(phi.body, theory))
    return phi


def __t(name: str):
    from .logic import Var
    return Var(name)


def regress(phi: Formula, theory: ActionTheory) -> Formula:
    """One regression step: every fluent at do(a, s) for a single known
    ground operation is rewritten to gamma+ or (F and not gamma-) at s.
    """
    if isinstance(phi, Fluent):
        if phi.name in theory.derived:
            raise RegressionError("derived fluent %s must be unfolded before "
                                  "regression" % phi.name)
        sit = phi.sit
        if not isinstance(sit, Do):
            raise RegressionError("fluent %s is not at a successor situation" % (phi,))
        if isinstance(sit.prev, Do):
            raise RegressionError("regression must be applied innermost-out; "
                                  "%s nests two do terms" % (phi,))
        if any(not isinstance(a, Obj) for a in sit.op.args):
            raise RegressionError("operation term %s is not ground" % (sit.op,))
        op = GroundOp(sit.op.name, tuple(a.name for a in sit.op.args))
        sa = theory.successor[phi.name]
        args = phi.args
        gplus = _inst(sa.gamma_plus, sa.params, args, op, sit.prev)
        gminus = _inst(sa.gamma_minus, sa.params, args, op, sit.prev)
        return fold(Or(gplus, And(Fluent(phi.name, args, sit.prev), Not(gminus))))
    if hasattr(phi, "left") and hasattr(phi, "right"):
        return type(phi)(regress(phi.left, theory), regress(phi.right, theory))
    if isinstance(phi, Not):
        return Not(regress(phi.body, theory))
    if hasattr(phi, "var") and hasattr(phi, "body"):
        return type(phi)(phi.var, regress(phi.body, theory))
    return phi


def _inst(gamma, params, args, op, sit):
    from .theory import instantiate_op_equalities
    # fresh bound-variable names so variable fluent arguments cannot be
    # captured by the template's own quantifiers
    phi = _rename_bound(gamma)
    for p, a in zip(params, args):
        phi = substitute(phi, p, a)
    phi = instantiate_op_equalities(phi, op)
    from .logic import _free_sit_vars
    for sv in _free_sit_vars(phi):
        phi = substitute(phi, sv, sit)
    return phi


_fresh_counter = 0


def _rename_bound(phi: Formula) -> Formula:
    global _fresh_counter
    if hasattr(phi, "var") and hasattr(phi, "body"):
        _fresh_counter += 1
        fresh = "_g%d" % _fresh_counter
        from .logic import Var
        body = substitute(phi.body, phi.var, Var(fresh))
        return type(phi)(fresh, _rename_bound(body))
    if hasattr(phi, "left") and hasattr(phi, "right"):
        return type(phi)(_rename_bound(phi.left), _rename_bound(phi.right))
    if isinstance(phi, Not):
        return Not(_rename_bound(phi.body))
    return phi


def poss_formula(theory: ActionTheory, op: GroundOp) -> Formula:
    """The defining executability condition of a ground operation at s,
    with derived fluents unfolded."""
    decl = theory.operations[op.name]
    phi = decl.precondition
    for p, a in zip(decl.params, op.args):
        phi = substitute(phi, p, Obj(a))
    phi = _anchor_to(phi, SIT)
    return unfold_derived(phi, theory)


def _anchor_to(phi: Formula, sit) -> Formula:
    from .logic import _free_sit_vars
    for sv in _free_sit_vars(phi):
        phi = substitute(phi, sv, sit)
    return phi


@dataclass(frozen=True)
class WpResult:
    formula: Formula
    source_task: Task


def wp(phi: Formula, tau: Task, theory: ActionTheory) -> WpResult:
    """Weakest precondition of postcondition `phi` under task `tau`.

    The result references only primitive fluents at the situation variable
    s plus rigid atoms; do terms and executability atoms are all expanded.
    """
    return WpResult(fold(_wp(unfold_derived(_anchor_to(phi, SIT), theory), tau, theory)), tau)


def _wp(phi: Formula, tau: Task, theory: ActionTheory) -> Formula:
    if isinstance(tau, Nil):
        return phi
    if isinstance(tau, Test):
        psi = unfold_derived(_anchor_to(tau.formula, SIT), theory)
        return And(phi, psi)
    if isinstance(tau, Op):
        op = tau.op
        for a in op.args:
            if a not in theory.objects:
                raise RegressionError("operation %s has ungrounded or unknown "
                                      "argument %s" % (op, a))
        shifted = substitute(phi, SIT.name, Do(op.term(), SIT))
        return fold(And(poss_formula(theory, op), regress(shifted, theory)))
    if isinstance(tau, Seq):
        return _wp(fold(_wp(phi, tau.second, theory)), tau.first, theory)
    if isinstance(tau, Choice):
        return Or(_wp(phi, tau.left, theory), _wp(phi, tau.right, theory))
    raise TypeError("unknown task node %r" % (tau,))


def accomplishable(tau: Task, theory: ActionTheory) -> list[WorldState]:
    """Initial worlds from which `tau` can complete, per its weakest
    precondition over the enumerated initial-world space."""
    result = wp(TRUE, tau, theory)
    return satisfying_worlds(result.formula, theory)


def satisfying_worlds(phi: Formula, theory: ActionTheory) -> list[WorldState]:
    anchored = _anchor_to(phi, S0)
    out = []
    for w in enumerate_initial_worlds(theory):
        if evaluate(StateView(theory, w), anchored):
            out.append(w)
    return out


def holds_at(phi: Formula, theory: ActionTheory, state: WorldState) -> bool:
    """Evaluate a one-situation formula (typically a WP) at a world state."""
    return evaluate(StateView(theory, state), _anchor_to(phi, S0))
