"""Constraint negation and canonical forms for structural equality.

negate() builds the logical complement of a ground constraint tree:
relational operators flip, De Morgan pushes through And/Or, and each global
atom has a dedicated complement (allDifferent becomes a disjunction of
equalities, a pack constraint becomes "some bin load is off", and so on).
The result is again a ground constraint tree that the solver can post.

canonical_key() maps a tree to a hashable key such that two trees with equal
keys are logically equivalent.  Arithmetic is expanded into a multivariate
polynomial normal form, which absorbs commutativity, associativity,
distribution, identity and annihilator elements in one step.  Relations are
oriented to {<, <=, ==, !=} with a fixed sign for the two symmetric
operators.  And/Or trees are flattened, sorted, deduplicated, and common
factors are pulled out greedily until a fixpoint, which covers the
distributive laws.  The equivalence is deliberately incomplete: unequal keys
prove nothing.
"""

from dataclasses import dataclass

from .errors import EvaluationError
from .grounding import (
    AllDiffC,
    AllMinDistC,
    AndC,
    Const,
    CountC,
    FALSE_C,
    InverseC,
    OrC,
    PackBinC,
    PackC,
    Prod,
    RelAtom,
    Sum,
    TableC,
    TRUE_C,
    Var,
    expansion,
    mk_diff,
)
from .ops import FLIP, add64, mul64, rel_holds

# ---------------------------------------------------------------------------
# Negation


@dataclass(frozen=True)
class NegationResult:
    ok: bool
    tree: object = None
    reason: str = None


def negate(tree):
    """Complement of a ground constraint, as a NegationResult."""
    if isinstance(tree, RelAtom):
        return NegationResult(True, RelAtom(FLIP[tree.op], tree.left, tree.right))
    if isinstance(tree, AndC):
        parts = []
        for it in tree.items:
            r = negate(it)
            if not r.ok:
                return r
            parts.append(r.tree)
        return NegationResult(True, OrC(tuple(parts)))
    if isinstance(tree, OrC):
        parts = []
        for it in tree.items:
            r = negate(it)
            if not r.ok:
                return r
            parts.append(r.tree)
        return NegationResult(True, AndC(tuple(parts)))
    if isinstance(tree, AllDiffC):
        pairs = []
        for i in range(len(tree.items)):
            for j in range(i + 1, len(tree.items)):
                pairs.append(RelAtom("==", tree.items[i], tree.items[j]))
        return NegationResult(True, OrC(tuple(pairs)))
    if isinstance(tree, AllMinDistC):
        g = Const(tree.gap)
        pairs = []
        for i in range(len(tree.items)):
            for j in range(i + 1, len(tree.items)):
                a, b = tree.items[i], tree.items[j]
                # |a - b| < gap
                pairs.append(
                    AndC((RelAtom("<", mk_diff(a, b), g), RelAtom("<", mk_diff(b, a), g)))
                )
        return NegationResult(True, OrC(tuple(pairs)))
    if isinstance(tree, TableC):
        other = "forbidden" if tree.kind == "allowed" else "allowed"
        return NegationResult(True, TableC(other, tree.items, tree.rows))
    if isinstance(tree, CountC):
        return NegationResult(
            True, CountC(tree.items, tree.value, FLIP[tree.op], tree.rhs)
        )
    if isinstance(tree, PackC):
        bins = []
        for pos, b in enumerate(tree.bins):
            bins.append(PackBinC(b, tree.loads[pos], tree.assigns, tree.sizes, "!="))
        return NegationResult(True, OrC(tuple(bins)))
    if isinstance(tree, PackBinC):
        op = "!=" if tree.op == "==" else "=="
        return NegationResult(
            True, PackBinC(tree.bin_key, tree.load_vid, tree.assigns, tree.sizes, op)
        )
    if isinstance(tree, InverseC):
        return negate(expansion(tree))
    return NegationResult(False, None, f"cannot negate {type(tree).__name__}")


# ---------------------------------------------------------------------------
# Polynomial normal form
#
# A polynomial is a dict from monomial to coefficient, where a monomial is a
# sorted tuple of variable ids (repeats encode powers) and () is the constant
# term.  Zero coefficients are dropped.


def poly_of(e):
    if isinstance(e, Const):
        return {(): e.value} if e.value != 0 else {}
    if isinstance(e, Var):
        return {(e.vid,): 1}
    if isinstance(e, Sum):
        acc = {}
        for it in e.items:
            for mono, c in poly_of(it).items():
                nc = add64(acc.get(mono, 0), c)
                if nc == 0:
                    acc.pop(mono, None)
                else:
                    acc[mono] = nc
        return acc
    if isinstance(e, Prod):
        acc = {(): 1}
        for it in e.items:
            p = poly_of(it)
            nxt = {}
            for m1, c1 in acc.items():
                for m2, c2 in p.items():
                    mono = tuple(sorted(m1 + m2))
                    nc = add64(nxt.get(mono, 0), mul64(c1, c2))
                    if nc == 0:
                        nxt.pop(mono, None)
                    else:
                        nxt[mono] = nc
            acc = nxt
        return acc
    raise TypeError(f"not a ground expression: {e!r}")


def _poly_neg(p):
    return {m: -c for m, c in p.items()}


def _poly_sub(p, q):
    acc = dict(p)
    for m, c in q.items():
        nc = add64(acc.get(m, 0), -c)
        if nc == 0:
            acc.pop(m, None)
        else:
            acc[m] = nc
    return acc


def _mono_order(m):
    return (len(m), m)


def _poly_key(p):
    return ("poly",) + tuple(
        (m, p[m]) for m in sorted(p.keys(), key=_mono_order)
    )


def _leading_coef(p):
    best = None
    for m in p:
        if m == ():
            continue
        if best is None or _mono_order(m) > _mono_order(best):
            best = m
    return p[best] if best is not None else p.get((), 0)


def gexpr_key(e):
    """Canonical key of a ground expression (its polynomial)."""
    return _poly_key(poly_of(e))


# ---------------------------------------------------------------------------
# Tree canonicalization

TRUE_KEY = ("true",)
FALSE_KEY = ("false",)


def _sorted_keys(keys):
    return tuple(sorted(keys, key=repr))


def _rel_key(op, left, right):
    p = _poly_sub(poly_of(left), poly_of(right))  # left - right, compared to 0
    if op == ">":
        op, p = "<", _poly_neg(p)
    elif op == ">=":
        op, p = "<=", _poly_neg(p)
    if not p or set(p.keys()) == {()}:
        return TRUE_KEY if rel_holds(op, p.get((), 0), 0) else FALSE_KEY
    if op in ("==", "!=") and _leading_coef(p) < 0:
        p = _poly_neg(p)
    return ("rel", op, _poly_key(p))


def _conjuncts(key):
    return set(key[1]) if key[0] == "and" else {key}


def _disjuncts(key):
    return set(key[1]) if key[0] == "or" else {key}


def _mk_and(keys):
    items = []
    for k in keys:
        if k == TRUE_KEY:
            continue
        if k == FALSE_KEY:
            return FALSE_KEY
        if k[0] == "and":
            items.extend(k[1])
        else:
            items.append(k)
    items = _sorted_keys(set(items))
    if not items:
        return TRUE_KEY
    if len(items) == 1:
        return items[0]
    common = None
    for k in items:
        d = _disjuncts(k)
        common = d if common is None else common & d
        if not common:
            break
    if common:
        # And of Ors sharing disjuncts: pull them out, (a|b) & (a|c) = a | (b&c)
        rest = []
        for k in items:
            rest.append(_mk_or(_disjuncts(k) - common))
        return _mk_or(_sorted_keys(common) + (_mk_and(rest),))
    return ("and", items)


def _mk_or(keys):
    items = []
    for k in keys:
        if k == FALSE_KEY:
            continue
        if k == TRUE_KEY:
            return TRUE_KEY
        if k[0] == "or":
            items.extend(k[1])
        else:
            items.append(k)
    items = _sorted_keys(set(items))
    if not items:
        return FALSE_KEY
    if len(items) == 1:
        return items[0]
    common = None
    for k in items:
        c = _conjuncts(k)
        common = c if common is None else common & c
        if not common:
            break
    if common:
        # Or of Ands sharing conjuncts: (a&b) | (a&c) = a & (b|c)
        rest = []
        for k in items:
            rest.append(_mk_and(_conjuncts(k) - common))
        return _mk_and(_sorted_keys(common) + (_mk_or(rest),))
    return ("or", items)


def canonical_key(tree):
    """Hashable canonical key; equal keys imply logically equal constraints."""
    if isinstance(tree, RelAtom):
        return _rel_key(tree.op, tree.left, tree.right)
    if isinstance(tree, AndC):
        return _mk_and([canonical_key(it) for it in tree.items])
    if isinstance(tree, OrC):
        return _mk_or([canonical_key(it) for it in tree.items])
    if isinstance(tree, AllDiffC):
        if len(tree.items) < 2:
            return TRUE_KEY
        return ("alldiff", _sorted_keys(gexpr_key(it) for it in tree.items))
    if isinstance(tree, AllMinDistC):
        if len(tree.items) < 2 or tree.gap <= 0:
            return TRUE_KEY
        return (
            "allmindist",
            _sorted_keys(gexpr_key(it) for it in tree.items),
            tree.gap,
        )
    if isinstance(tree, InverseC):
        return ("inverse", tree.f_vids, tree.g_vids, tree.f_idx, tree.g_idx)
    if isinstance(tree, TableC):
        return (
            "table",
            tree.kind,
            tuple(gexpr_key(it) for it in tree.items),
            tuple(sorted(set(tree.rows))),
        )
    if isinstance(tree, CountC):
        return (
            "count",
            _sorted_keys(gexpr_key(it) for it in tree.items),
            gexpr_key(tree.value),
            tree.op,
            gexpr_key(tree.rhs),
        )
    if isinstance(tree, PackC):
        return ("pack", tree.loads, tree.assigns, tree.sizes, tree.bins)
    if isinstance(tree, PackBinC):
        return (
            "packbin",
            tree.bin_key,
            tree.load_vid,
            tree.assigns,
            tree.sizes,
            tree.op,
        )
    raise TypeError(f"not a ground constraint: {tree!r}")


def ac_equal(t1, t2):
    """Sound structural equivalence: True only when both trees canonicalize
    to the same key; False on any doubt (including arithmetic overflow)."""
    try:
        return canonical_key(t1) == canonical_key(t2)
    except (EvaluationError, TypeError):
        return False
