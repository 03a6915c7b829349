"""Conformity checking of a constraint program against a reference model.

Both models are grounded into one shared variable space (the program under
test claims the numbering, the reference model must reuse it), then checked
under one of four relations:

  one     the program has a solution and every solution, projected to the
          reference variables, satisfies the reference model
  all     projection equality of the two solution sets, plus nonemptiness
  bounds  like "one" but restricted to solutions whose objective value lies
          in a given interval (both models' objectives are constrained)
  best    "bounds" plus proofs that neither side can beat the lower bound

The workhorse enumerates the constraints of one side in declaration order
and asks, for each, whether the other side's solutions can violate it:
solve D and not(C_i).  Constraints structurally equal to one on the solving
side are skipped (a sound, deliberately incomplete test).  When C_i mentions
variables the solving side does not have, the channeling definitions that
give them meaning are pulled in, and candidate witnesses are re-validated by
the independent evaluator; false alarms are excluded with a disequality cut
over the reference variables and the search resumes.  Domain membership is
itself checked as one synthetic constraint per direction, so a point outside
the other side's declared bounds counts as a violation too.

The first genuine witness decides NonConf.  If every subproblem is
unsatisfiable the verdict is Conf, a per-instance certificate.  Otherwise
the verdict is Unknown, with the reason (timeout or unsupported negation)
in the report.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import UsageError
from .grounding import (
    AndC,
    Const,
    OrC,
    Prod,
    RelAtom,
    Sum,
    Var,
    VarSpace,
    build_instance,
    ctr_vars,
    gexpr_vars,
    ground,
    parse_var_name,
)
from .solver import SearchConfig, SolveOutcome, solve
from .transform import canonical_key, negate


@dataclass
class CheckOptions:
    relation: str = "one"
    time_limit: float = None  # overall wall-clock budget in seconds
    node_limit: int = None  # per solver call
    bounds: tuple = None  # (lo, hi) for the bounds/best relations
    use_skip: bool = True
    var_order: str = "dom"
    jobs: int = 1
    seed: int = None


@dataclass
class SubReport:
    label: str
    origin: str  # "reference" | "program"
    status: str  # skipped | unsat | witness | resource_out | unsupported-negation | undecided
    nodes: int = 0
    elapsed: float = 0.0
    false_alarms: int = 0

    def to_dict(self):
        return {
            "label": self.label,
            "origin": self.origin,
            "status": self.status,
            "nodes": self.nodes,
            "elapsed": round(self.elapsed, 6),
            "false_alarms": self.false_alarms,
        }


@dataclass
class Verdict:
    kind: str  # Conf | NonConf | Unknown
    relation: str
    reason: str = None
    witness: dict = None  # variable name -> value
    violated: str = None  # label of the constraint witnessed against
    direction: str = None  # extra-solution | missing-solution
    notes: tuple = ()
    subreports: tuple = ()
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "verdict": self.kind,
            "relation": self.relation,
            "reason": self.reason,
            "witness": self.witness,
            "violated": self.violated,
            "direction": self.direction,
            "notes": list(self.notes),
            "subproblems": [s.to_dict() for s in self.subreports],
            "stats": self.stats,
        }


class _Budget:
    def __init__(self, seconds):
        self.start = time.monotonic()
        self.deadline = None if seconds is None else self.start + seconds

    def remaining(self):
        if self.deadline is None:
            return None
        return max(0.0, self.deadline - time.monotonic())

    def expired(self):
        r = self.remaining()
        return r is not None and r <= 0.0

    def elapsed(self):
        return time.monotonic() - self.start


class _Acc:
    """Aggregate solver effort across all calls of one check."""

    def __init__(self):
        self.solves = 0
        self.nodes = 0
        self.failures = 0

    def add(self, stats):
        self.solves += 1
        self.nodes += stats.nodes
        self.failures += stats.failures

    def merge(self, result):
        self.solves += result.get("solves", 0)
        self.nodes += result.get("nodes", 0)
        self.failures += result.get("failures", 0)


def ground_pair(oracle_model, cput_model, data=None, overrides=None):
    """Ground both models into a shared variable space.

    Instance parameters are bound per model from the same data and overrides
    (each model may add its own computed parameters).  The program under test
    is grounded first and owns the numbering; every reference-model variable
    must then resolve to an existing cell.
    """
    space = VarSpace()
    cput_gm = ground(cput_model, build_instance(cput_model, data, overrides), space)
    oracle_gm = ground(
        oracle_model,
        build_instance(oracle_model, data, overrides),
        space,
        require_existing=True,
    )
    return oracle_gm, cput_gm


def _timed_solve(acc, budget, domains, hard, extras=(), opts=None):
    rem = budget.remaining()
    if rem is not None and rem <= 0:
        return SolveOutcome("RESOURCE_OUT")
    cfg = SearchConfig(
        time_limit=rem,
        node_limit=opts.node_limit if opts else None,
        var_order=opts.var_order if opts else "dom",
    )
    out = solve(domains, hard, extras, cfg)
    acc.add(out.stats)
    return out


def _domain_tree(gm, vids):
    """v in lo..hi for every given variable, as one conjunction."""
    atoms = []
    for v in vids:
        lo, hi = gm.domains[v]
        atoms.append(RelAtom(">=", Var(v), Const(lo)))
        atoms.append(RelAtom("<=", Var(v), Const(hi)))
    return AndC(tuple(atoms))


def _gexpr_interval(e, box):
    if isinstance(e, Const):
        return e.value, e.value
    if isinstance(e, Var):
        return box[e.vid]
    if isinstance(e, Sum):
        lo = hi = 0
        for it in e.items:
            a, b = _gexpr_interval(it, box)
            lo += a
            hi += b
        return lo, hi
    if isinstance(e, Prod):
        lo = hi = 1
        for it in e.items:
            a, b = _gexpr_interval(it, box)
            cands = (lo * a, lo * b, hi * a, hi * b)
            lo, hi = min(cands), max(cands)
        return lo, hi
    raise TypeError(f"not a ground expression: {e!r}")


def _channel_closure(cput_gm, base_vids, v_need):
    """Channeling trees (in declaration order) defining the needed variables,
    plus every auxiliary variable those trees touch."""
    defs_by_vid = {}
    for cd in cput_gm.channel_defs:
        defs_by_vid.setdefault(cd.vid, []).append(cd)
    needed = set(v_need)
    labels = []
    seen = set()
    frontier = list(v_need)
    while frontier:
        v = frontier.pop()
        for cd in defs_by_vid.get(v, ()):
            if cd.label in seen:
                continue
            seen.add(cd.label)
            labels.append(cd.label)
            tree = cput_gm.constraint(cd.label).tree
            for u in ctr_vars(tree):
                if u not in needed and u not in base_vids:
                    needed.add(u)
                    frontier.append(u)
    order = {c.label: i for i, c in enumerate(cput_gm.constraints)}
    labels.sort(key=lambda lb: order[lb])
    return needed, [cput_gm.constraint(lb).tree for lb in labels]


def _widened_box(oracle_gm, cput_gm, aux_vids):
    """Domains for a missing-solution subproblem.

    Channeled auxiliaries get their interval hull widened by what their
    definitions can produce over the reference domains, so a forced value
    outside the program's declared bounds is representable (and caught by
    the synthetic domain constraint).
    """
    box = {v: oracle_gm.domains[v] for v in oracle_gm.vids}
    for v in aux_vids:
        box[v] = cput_gm.domains[v]
    defs = [cd for cd in cput_gm.channel_defs if cd.vid in aux_vids]
    for _ in range(len(defs) + 1):
        changed = False
        for cd in defs:
            if not gexpr_vars(cd.rhs) <= box.keys():
                continue
            lo, hi = _gexpr_interval(cd.rhs, box)
            clo, chi = box[cd.vid]
            nlo, nhi = min(clo, lo), max(chi, hi)
            if (nlo, nhi) != (clo, chi):
                box[cd.vid] = (nlo, nhi)
                changed = True
        if not changed:
            break
    return box


def _plan_subproblems(oracle_gm, cput_gm, direction, extra_atoms, use_skip):
    """One work item per constraint of the negated side, plus the synthetic
    domain-membership constraint, each with its full solving context."""
    plan = []
    base_vids = set(oracle_gm.vids)
    if direction == "extra":
        d_gm, c_gm = cput_gm, oracle_gm
        origin = "reference"
    else:
        d_gm, c_gm = oracle_gm, cput_gm
        origin = "program"
    d_keys = set()
    if use_skip:
        for c in d_gm.constraints:
            try:
                d_keys.add(canonical_key(c.tree))
            except Exception:
                pass
    d_trees = [c.tree for c in d_gm.constraints] + list(extra_atoms)

    def item_for(label, tree):
        skipped = False
        if use_skip and d_keys:
            try:
                skipped = canonical_key(tree) in d_keys
            except Exception:
                skipped = False
        if direction == "extra":
            domains = dict(cput_gm.domains)
            hard = d_trees
        else:
            v_need = {v for v in ctr_vars(tree) if v not in base_vids}
            aux, chans = _channel_closure(cput_gm, base_vids, v_need)
            domains = _widened_box(oracle_gm, cput_gm, aux)
            hard = d_trees + chans
        return {
            "label": label,
            "origin": origin,
            "tree": tree,
            "hard": hard,
            "domains": domains,
            "skipped": skipped,
        }

    for c in c_gm.constraints:
        plan.append(item_for(c.label, c.tree))
    # membership in the other side's declared bounds, as a constraint
    if direction == "extra":
        dom_tree = _domain_tree(oracle_gm, oracle_gm.vids)
    else:
        dom_tree = _domain_tree(cput_gm, cput_gm.vids)
    plan.append(item_for("(domains)", dom_tree))
    return plan


def _fix_atoms(assignment, vids):
    return [RelAtom("==", Var(v), Const(assignment[v])) for v in vids]


def _genuine_extra(oracle_gm, cput_gm, w):
    """Does w prove an extra solution: program-valid but reference-invalid?"""
    if not cput_gm.in_domains(w) or not cput_gm.evaluate(w):
        return False
    wo = {v: w[v] for v in oracle_gm.vids}
    return not (oracle_gm.in_domains(wo) and oracle_gm.evaluate(wo))


def _genuine_missing(oracle_gm, cput_gm, w, budget, acc, opts):
    """Does w prove a missing solution?  True / False / None (undecided)."""
    wo = {v: w[v] for v in oracle_gm.vids}
    if not (oracle_gm.in_domains(wo) and oracle_gm.evaluate(wo)):
        return False
    full, open_vids = cput_gm.extend_assignment(wo)
    if not open_vids:
        return not (cput_gm.in_domains(full) and cput_gm.evaluate(full))
    # auxiliaries not pinned by channelings: decide by search
    hard = [c.tree for c in cput_gm.constraints] + _fix_atoms(full, list(full))
    out = _timed_solve(acc, budget, dict(cput_gm.domains), hard, (), opts)
    if out.status == "SAT":
        return False
    if out.status == "UNSAT":
        return True
    return None


def _run_subproblem(item, oracle_gm, cput_gm, direction, time_limit, opts):
    """Solve D and not(C); returns a result dict with any genuine witness."""
    res = {
        "label": item["label"],
        "origin": item["origin"],
        "status": "unsat",
        "witness": None,
        "nodes": 0,
        "failures": 0,
        "solves": 0,
        "elapsed": 0.0,
        "false_alarms": 0,
        "reason": None,
    }
    t0 = time.monotonic()
    if item["skipped"]:
        res["status"] = "skipped"
        return res
    neg = negate(item["tree"])
    if not neg.ok:
        res["status"] = "unsupported-negation"
        res["reason"] = neg.reason
        return res
    budget = _Budget(time_limit)
    acc = _Acc()
    hard = list(item["hard"])
    base = list(oracle_gm.vids)
    while True:
        out = _timed_solve(acc, budget, item["domains"], hard, [neg.tree], opts)
        if out.status == "UNSAT":
            break
        if out.status == "RESOURCE_OUT":
            res["status"] = "resource_out"
            break
        w = out.assignment
        if direction == "extra":
            genuine = _genuine_extra(oracle_gm, cput_gm, w)
        else:
            genuine = _genuine_missing(oracle_gm, cput_gm, w, budget, acc, opts)
        if genuine is None:
            res["status"] = "undecided"
            break
        if genuine:
            res["status"] = "witness"
            res["witness"] = w
            break
        # false alarm: exclude this projection and keep looking
        res["false_alarms"] += 1
        hard = hard + [OrC(tuple(RelAtom("!=", Var(v), Const(w[v])) for v in base))]
    res["nodes"] = acc.nodes
    res["failures"] = acc.failures
    res["solves"] = acc.solves
    res["elapsed"] = time.monotonic() - t0
    return res


_WORKER = None


def _init_worker(oracle_gm, cput_gm, direction, extra_atoms, opts):
    global _WORKER
    plan = _plan_subproblems(oracle_gm, cput_gm, direction, extra_atoms, opts.use_skip)
    _WORKER = (plan, oracle_gm, cput_gm, direction, opts)


def _worker_run(args):
    idx, time_limit = args
    plan, oracle_gm, cput_gm, direction, opts = _WORKER
    return _run_subproblem(plan[idx], oracle_gm, cput_gm, direction, time_limit, opts)


def _one_negated(oracle_gm, cput_gm, direction, budget, acc, opts, extra_atoms=()):
    """Run all witness subproblems for one direction.

    Returns (witness_assignment_or_None, violated_label, subreports,
    any_resource_out, any_unsupported).
    """
    plan = _plan_subproblems(oracle_gm, cput_gm, direction, extra_atoms, opts.use_skip)
    results = []
    if opts.jobs > 1 and len(plan) > 1:
        with ProcessPoolExecutor(
            max_workers=opts.jobs,
            initializer=_init_worker,
            initargs=(oracle_gm, cput_gm, direction, extra_atoms, opts),
        ) as pool:
            rem = budget.remaining()
            futs = [pool.submit(_worker_run, (i, rem)) for i in range(len(plan))]
            for i in range(len(plan)):
                r = futs[i].result()
                results.append(r)
                if r["status"] == "witness":
                    pool.shutdown(cancel_futures=True)
                    break
    else:
        for item in plan:
            r = _run_subproblem(
                item, oracle_gm, cput_gm, direction, budget.remaining(), opts
            )
            results.append(r)
            if r["status"] == "witness":
                break
    witness = None
    violated = None
    any_ro = False
    any_unsup = False
    reports = []
    for r in results:
        acc.merge(r)
        reports.append(
            SubReport(
                r["label"],
                r["origin"],
                r["status"],
                r["nodes"],
                r["elapsed"],
                r["false_alarms"],
            )
        )
        if r["status"] == "witness" and witness is None:
            witness = r["witness"]
            violated = r["label"]
        if r["status"] in ("resource_out", "undecided"):
            any_ro = True
        if r["status"] == "unsupported-negation":
            any_unsup = True
    return witness, violated, reports, any_ro, any_unsup


def witness_names(space, assignment):
    return {space.pretty(v): assignment[v] for v in sorted(assignment)}


def _final(budget, acc, verdict):
    verdict.stats = {
        "solves": acc.solves,
        "nodes": acc.nodes,
        "failures": acc.failures,
        "elapsed": round(budget.elapsed(), 6),
    }
    return verdict


def _bounds_atoms(gm, lo, hi, what):
    if gm.objective is None:
        raise UsageError(f"the {what} model has no objective, required by this relation")
    return [
        RelAtom(">=", gm.objective, Const(lo)),
        RelAtom("<=", gm.objective, Const(hi)),
    ]


def check(oracle_model, cput_model, data=None, overrides=None, opts=None):
    """Check one conformity relation; returns a Verdict with a full report."""
    opts = opts or CheckOptions()
    relation = opts.relation
    if relation not in ("one", "all", "bounds", "best"):
        raise UsageError(f"unknown relation {relation!r}")
    oracle_gm, cput_gm = ground_pair(oracle_model, cput_model, data, overrides)
    space = cput_gm.space
    budget = _Budget(opts.time_limit)
    acc = _Acc()

    def name_witness(w):
        return witness_names(space, w) if w is not None else None

    if relation in ("bounds", "best"):
        if opts.bounds is None:
            raise UsageError("this relation needs --bounds lo:hi")
        blo, bhi = opts.bounds
        f_atoms = _bounds_atoms(oracle_gm, blo, bhi, "reference")
        fp_atoms = _bounds_atoms(cput_gm, blo, bhi, "program")
        cput_trees = [c.tree for c in cput_gm.constraints]
        ne = _timed_solve(
            acc, budget, dict(cput_gm.domains), cput_trees + fp_atoms, (), opts
        )
        if ne.status == "RESOURCE_OUT":
            return _final(budget, acc, Verdict("Unknown", relation, reason="timeout"))
        if ne.status == "UNSAT":
            return _final(
                budget,
                acc,
                Verdict(
                    "NonConf",
                    relation,
                    reason="no-solution-within-bounds",
                    notes=(
                        "the program under test has no solution with its "
                        f"objective in [{blo}, {bhi}]",
                    ),
                ),
            )
        witness, violated, reports, any_ro, any_unsup = _one_negated(
            oracle_gm, cput_gm, "extra", budget, acc, opts,
            extra_atoms=tuple(f_atoms + fp_atoms),
        )
        if witness is not None:
            return _final(
                budget,
                acc,
                Verdict(
                    "NonConf",
                    relation,
                    reason="extra-solution",
                    witness=name_witness(witness),
                    violated=violated,
                    direction="extra-solution",
                    subreports=tuple(reports),
                ),
            )
        if any_ro:
            return _final(
                budget,
                acc,
                Verdict("Unknown", relation, reason="timeout", subreports=tuple(reports)),
            )
        if any_unsup:
            return _final(
                budget,
                acc,
                Verdict(
                    "Unknown",
                    relation,
                    reason="unsupported-negation",
                    subreports=tuple(reports),
                ),
            )
        if relation == "bounds":
            return _final(
                budget, acc, Verdict("Conf", relation, subreports=tuple(reports))
            )
        # best: neither side may beat the lower bound
        oracle_trees = [c.tree for c in oracle_gm.constraints]
        odoms = {v: oracle_gm.domains[v] for v in oracle_gm.vids}
        better = RelAtom("<", oracle_gm.objective, Const(blo))
        ob = _timed_solve(acc, budget, odoms, oracle_trees + [better], (), opts)
        if ob.status == "RESOURCE_OUT":
            return _final(
                budget,
                acc,
                Verdict("Unknown", relation, reason="timeout", subreports=tuple(reports)),
            )
        if ob.status == "SAT":
            return _final(
                budget,
                acc,
                Verdict(
                    "NonConf",
                    relation,
                    reason="reference-beats-lower-bound",
                    witness=name_witness(ob.assignment),
                    notes=(
                        f"the reference model reaches an objective below {blo}, "
                        "so the given interval is not its optimum",
                    ),
                    subreports=tuple(reports),
                ),
            )
        pbetter = RelAtom("<", cput_gm.objective, Const(blo))
        pb = _timed_solve(
            acc, budget, dict(cput_gm.domains), cput_trees + [pbetter], (), opts
        )
        if pb.status == "RESOURCE_OUT":
            return _final(
                budget,
                acc,
                Verdict("Unknown", relation, reason="timeout", subreports=tuple(reports)),
            )
        if pb.status == "SAT":
            return _final(
                budget,
                acc,
                Verdict(
                    "NonConf",
                    relation,
                    reason="program-beats-lower-bound",
                    witness=name_witness(pb.assignment),
                    notes=(
                        f"the program under test reaches an objective below {blo}",
                    ),
                    subreports=tuple(reports),
                ),
            )
        return _final(budget, acc, Verdict("Conf", relation, subreports=tuple(reports)))

    # one / all
    odoms = {v: oracle_gm.domains[v] for v in oracle_gm.vids}
    oracle_trees = [c.tree for c in oracle_gm.constraints]
    pre = _timed_solve(acc, budget, odoms, oracle_trees, (), opts)
    if pre.status == "UNSAT":
        raise UsageError("the reference model is unsatisfiable on this instance")
    if pre.status == "RESOURCE_OUT":
        return _final(
            budget,
            acc,
            Verdict(
                "Unknown",
                relation,
                reason="timeout",
                notes=("budget exhausted while checking the reference model",),
            ),
        )
    cput_trees = [c.tree for c in cput_gm.constraints]
    ne = _timed_solve(acc, budget, dict(cput_gm.domains), cput_trees, (), opts)
    if ne.status == "RESOURCE_OUT":
        return _final(
            budget,
            acc,
            Verdict(
                "Unknown",
                relation,
                reason="timeout",
                notes=("budget exhausted while checking the program for solutions",),
            ),
        )
    if ne.status == "UNSAT":
        return _final(
            budget,
            acc,
            Verdict(
                "NonConf",
                relation,
                reason="unsatisfiable-program",
                notes=(
                    "the program under test has no solution on this instance, "
                    "so its projected solution set cannot match the reference",
                ),
            ),
        )
    witness, violated, reports, any_ro, any_unsup = _one_negated(
        oracle_gm, cput_gm, "extra", budget, acc, opts
    )
    all_reports = list(reports)
    if witness is not None:
        return _final(
            budget,
            acc,
            Verdict(
                "NonConf",
                relation,
                reason="extra-solution",
                witness=name_witness(witness),
                violated=violated,
                direction="extra-solution",
                subreports=tuple(all_reports),
            ),
        )
    if relation == "all":
        witness, violated, reports2, ro2, un2 = _one_negated(
            oracle_gm, cput_gm, "missing", budget, acc, opts
        )
        all_reports.extend(reports2)
        any_ro = any_ro or ro2
        any_unsup = any_unsup or un2
        if witness is not None:
            return _final(
                budget,
                acc,
                Verdict(
                    "NonConf",
                    relation,
                    reason="missing-solution",
                    witness=name_witness(witness),
                    violated=violated,
                    direction="missing-solution",
                    subreports=tuple(all_reports),
                ),
            )
    if any_ro:
        return _final(
            budget,
            acc,
            Verdict("Unknown", relation, reason="timeout", subreports=tuple(all_reports)),
        )
    if any_unsup:
        return _final(
            budget,
            acc,
            Verdict(
                "Unknown",
                relation,
                reason="unsupported-negation",
                subreports=tuple(all_reports),
            ),
        )
    return _final(budget, acc, Verdict("Conf", relation, subreports=tuple(all_reports)))


# ---------------------------------------------------------------------------
# Witness validation


@dataclass
class ValidationReport:
    genuine: bool
    direction: str = None
    program_satisfied: bool = None  # None: undecided within budget
    reference_satisfied: bool = None
    program_violations: tuple = ()
    reference_violations: tuple = ()
    notes: tuple = ()

    def to_dict(self):
        return {
            "genuine": self.genuine,
            "direction": self.direction,
            "program_satisfied": self.program_satisfied,
            "reference_satisfied": self.reference_satisfied,
            "program_violations": list(self.program_violations),
            "reference_violations": list(self.reference_violations),
            "notes": list(self.notes),
        }


def expand_witness(space, raw):
    """Resolve a {name: value} mapping to variable ids.

    Names may be scalars ("cost"), cells ("x[3]"), or whole arrays given as
    lists ({"x": [0, 1, 3]}), matched against declaration order.
    """
    out = {}
    by_base = {}
    for vid, (base, key) in enumerate(space.keys):
        by_base.setdefault(base, []).append(vid)
    for name, value in raw.items():
        if isinstance(value, list):
            vids = by_base.get(name)
            if vids is None:
                raise UsageError(f"witness names unknown array {name!r}")
            if len(vids) != len(value):
                raise UsageError(
                    f"witness array {name!r} has {len(value)} values, "
                    f"model has {len(vids)} cells"
                )
            for vid, v in zip(vids, value):
                out[vid] = _as_int(name, v)
            continue
        base, key = parse_var_name(name)
        vid = space.lookup(base, key)
        if vid is None:
            raise UsageError(f"witness names unknown variable {name!r}")
        out[vid] = _as_int(name, value)
    return out


def _as_int(name, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise UsageError(f"witness value for {name!r} must be an integer")
    return v


def validate_witness(oracle_gm, cput_gm, assignment, opts=None):
    """Decide whether an assignment is a genuine non-conformity witness.

    The assignment may give only part of the variables; the rest is derived
    through the program's channelings.  After derivation it must cover every
    reference variable.  Program-side satisfaction of a still-incomplete
    assignment is decided by search.
    """
    opts = opts or CheckOptions()
    budget = _Budget(opts.time_limit)
    acc = _Acc()
    notes = []
    full, open_vids = cput_gm.extend_assignment(dict(assignment))
    missing = [v for v in oracle_gm.vids if v not in full]
    if missing:
        names = ", ".join(oracle_gm.space.pretty(v) for v in missing[:5])
        raise UsageError(f"witness does not cover reference variables: {names}")
    wo = {v: full[v] for v in oracle_gm.vids}
    oracle_ok = oracle_gm.in_domains(wo) and oracle_gm.evaluate(wo)
    oracle_viol = tuple(oracle_gm.evaluate_with_failures(wo)) if not oracle_ok else ()
    if not open_vids:
        cput_ok = cput_gm.in_domains(full) and cput_gm.evaluate(full)
        cput_viol = tuple(cput_gm.evaluate_with_failures(full)) if not cput_ok else ()
    else:
        notes.append(
            "variables left open by the channelings, deciding by search: "
            + ", ".join(cput_gm.space.pretty(v) for v in open_vids[:5])
        )
        hard = [c.tree for c in cput_gm.constraints] + _fix_atoms(full, list(full))
        out = _timed_solve(acc, budget, dict(cput_gm.domains), hard, (), opts)
        if out.status == "SAT":
            cput_ok, cput_viol = True, ()
        elif out.status == "UNSAT":
            cput_ok, cput_viol = False, ()
        else:
            cput_ok, cput_viol = None, ()
    if cput_ok and not oracle_ok:
        return ValidationReport(
            True, "extra-solution", True, False, (), oracle_viol, tuple(notes)
        )
    if oracle_ok and cput_ok is False:
        return ValidationReport(
            True, "missing-solution", False, True, cput_viol, (), tuple(notes)
        )
    return ValidationReport(
        False, None, cput_ok, oracle_ok, cput_viol, oracle_viol, tuple(notes)
    )
