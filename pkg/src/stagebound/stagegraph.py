"""Stage-tree construction for population protocols.

A stage is a triple (Phi, pi, T): a propositional constraint on the current
configuration, a persistent valuation (atom values that hold in every
reachable configuration), and a set of permanently disabled transition
heads.  Starting from the stage denoting exactly the initial configurations,
each stage is split into the valuations satisfying its formula; for every
valuation a successor stage is computed by

  1. extending the persistent valuation with a greatest fixed point,
  2. detecting stable / dead successors,
  3. otherwise analyzing the transformation graph (which states can still
     turn into which), whose SCC-crossing transitions must eventually die
     out, and
  4. deriving the successor's formula from a case analysis of how those
     transitions get disabled.

Successors that a root-path ancestor already covers are pruned, which
guarantees termination.  Construction is deterministic: valuations are
enumerated in canonical order and stages are numbered breadth-first.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

from . import bounds as bounds_mod
from .logic import (
    Formula,
    PRESENCE,
    SINGLETON,
    Valuation,
    atom,
    conj,
    disj,
    enumerate_satisfying_valuations,
    heads_formula,
    implies,
    is_tautology,
    neg,
    presence,
    pretty,
    singleton,
    valuation_formula,
    xi,
)
from .protocol import Head, PopulationProtocol, Transition

INTERNAL = "internal"
TERMINAL_STABLE = "terminal-stable"
TERMINAL_DEAD = "terminal-dead"
TERMINAL_EXHAUSTED = "terminal-exhausted"


@dataclass
class TransformationGraph:
    """States still allowed by pi, with "A can turn into B" edges.

    Each edge carries the transitions generating it.  `scc` maps every
    vertex to its strongly connected component id; `bottom` marks component
    ids with no edge leaving the component.
    """

    vertices: tuple[int, ...]
    edges: dict[tuple[int, int], list[Transition]]
    gen_edges: dict[Transition, tuple[tuple[int, int], ...]]
    scc: dict[int, int]
    bottom: set[int]

    def crossing(self, edge: tuple[int, int]) -> bool:
        return self.scc[edge[0]] != self.scc[edge[1]]


@dataclass
class CaseAnalysis:
    """Everything computed while deriving one successor stage; the edge
    (parent, via-valuation) -> child is classified from these fields."""

    nu: Valuation
    pi_nu: Valuation
    parent_disabled: frozenset[Head]
    stable: int | None = None  # consensus output when stable
    dead: bool = False
    graph: TransformationGraph | None = None
    exp: frozenset[Head] = frozenset()
    j: frozenset[Head] = frozenset()
    t_nu: frozenset[Head] = frozenset()
    k: frozenset[Head] = frozenset()
    i_states: frozenset[int] = frozenset()
    l: frozenset[Head] = frozenset()
    u_states: frozenset[int] = frozenset()
    nu_disabled: bool = False
    nu_enabled: bool = False
    fast: bool = False
    very_fast: bool = False

    @property
    def exp_empty(self) -> bool:
        return self.stable is None and not self.dead and not self.exp


@dataclass
class Stage:
    id: int
    phi: Formula
    pi: Valuation
    disabled: frozenset[Head]  # T: permanently disabled heads
    parent: int | None
    kind: str = INTERNAL
    via: Valuation | None = None
    analysis: CaseAnalysis | None = None
    children: list[int] = field(default_factory=list)


@dataclass
class StageGraph:
    protocol: PopulationProtocol
    stages: list[Stage]
    root: int = 0

    def stage(self, i: int) -> Stage:
        return self.stages[i]

    def terminals(self) -> list[Stage]:
        return [s for s in self.stages if s.kind != INTERNAL]

    def path_to_root(self, i: int) -> list[Stage]:
        out = []
        cur: int | None = i
        while cur is not None:
            out.append(self.stages[cur])
            cur = self.stages[cur].parent
        return out


class StageLimitError(RuntimeError):
    """Stage or time budget exceeded; carries the partial tree."""

    def __init__(self, message: str, partial: StageGraph):
        super().__init__(message)
        self.partial = partial


def pi_formula(val: Valuation) -> Formula:
    return valuation_formula(val)


def initial_stage(p: PopulationProtocol) -> Stage:
    """Stage denoting exactly the initial configurations: the input states'
    presence disjunction plus absence of every other state."""
    inputs = sorted(p.input_states())
    others = [i for i in range(len(p.states)) if i not in p.input_states()]
    phi = conj(
        [disj([atom(presence(p, i)) for i in inputs])]
        + [neg(atom(presence(p, i))) for i in others]
    )
    return Stage(id=0, phi=phi, pi={}, disabled=frozenset(), parent=None)


# ---------------------------------------------------------------------------
# The persistent-valuation fixed point


def mn_fixpoint(
    p: PopulationProtocol, disabled: frozenset[Head], nu: Valuation
) -> tuple[set[int], set[int]]:
    """Greatest fixed point (M, N): states provably never populated again /
    forever holding exactly one agent, for configurations satisfying nu with
    the given permanently disabled heads."""
    m = {a.index for a, v in nu.items() if a.kind == PRESENCE and v is False}
    n = {a.index for a, v in nu.items() if a.kind == SINGLETON and v is True}

    def head_blocked(lhs: Head, m: set[int], n: set[int]) -> bool:
        x, y = lhs
        if x in m or y in m:
            return True
        if lhs in disabled:
            return True
        return x == y and x in n

    def m_ok(a: int, m: set[int], n: set[int]) -> bool:
        # every rule putting `a` on its right-hand side must be unfireable
        return all(
            head_blocked(t.lhs, m, n) for t in p.non_idle if a in t.rhs
        )

    def n_ok(a: int, m: set[int], n: set[int]) -> bool:
        for t in p.non_idle:
            x, y = t.lhs
            c, d = t.rhs
            if a in (x, y):
                if x == y:
                    continue  # needs two a-agents; cannot fire with one
                # consuming the unique a-agent is fine only if exactly one
                # a comes back out
                if (c == a) + (d == a) != 1:
                    other = y if x == a else x
                    if other not in m and t.lhs not in disabled:
                        return False
            elif a in (c, d):
                # produces an extra a-agent without consuming one
                if not head_blocked(t.lhs, m, n):
                    return False
        return True

    while True:
        m2 = {a for a in m if m_ok(a, m, n)}
        n2 = {a for a in n if n_ok(a, m, n)}
        if m2 == m and n2 == n:
            return m, n
        m, n = m2, n2


def compute_pi_nu(
    p: PopulationProtocol, disabled: frozenset[Head], nu: Valuation
) -> Valuation:
    """Extend the persistent valuation with the permanent part of nu."""
    m, n = mn_fixpoint(p, disabled, nu)
    pi: Valuation = {}
    for a in sorted(m):
        pi[presence(p, a)] = False
    # E: states with exactly one agent because no still-enabled rule
    # consumes their unique agent without restoring it.
    for a in range(len(p.states)):
        av = nu.get(presence(p, a))
        if av is not True:
            continue
        ok = True
        for t in p.non_idle:
            x, y = t.lhs
            if a not in (x, y):
                continue
            c, d = t.rhs
            if c == a or d == a:
                continue
            other = y if x == a else x
            if other in m or t.lhs in disabled or (x == y and a in n):
                continue
            ok = False
            break
        if ok:
            pi[presence(p, a)] = True
    for a in sorted(n):
        pi[presence(p, a)] = True
        pi[singleton(p, a)] = True
    return pi


# ---------------------------------------------------------------------------
# Stable / dead detection


def is_stable(
    p: PopulationProtocol, pi_nu: Valuation, disabled: frozenset[Head]
) -> int | None:
    """Consensus output if (pi_nu, T) forces a lasting consensus, else None."""
    base = conj([pi_formula(pi_nu), heads_formula(p, disabled)])
    for x in (0, 1):
        possibly_present = [
            s
            for s in range(len(p.states))
            if pi_nu.get(presence(p, s)) is not False
        ]
        if any(p.output(s) != x for s in possibly_present):
            continue
        ok = True
        for t in p.non_idle:
            e, f = t.rhs
            if p.output(e) == x and p.output(f) == x:
                continue
            if not is_tautology(implies(base, xi(p, t.lhs))):
                ok = False
                break
        if ok:
            return x
    return None


def is_dead(
    p: PopulationProtocol, pi_nu: Valuation, disabled: frozenset[Head]
) -> bool:
    """True when no non-idle rule can ever fire again, yet no consensus holds."""
    if is_stable(p, pi_nu, disabled) is not None:
        return False
    base = conj([pi_formula(pi_nu), heads_formula(p, disabled)])
    return all(
        is_tautology(implies(base, xi(p, t.lhs))) for t in p.non_idle
    )


# ---------------------------------------------------------------------------
# Transformation graph and its derived sets


def _residue(t: Transition) -> list[tuple[int, int]]:
    """Edges generated by a non-idle rule: either the four lhs-to-rhs pairs,
    or, when the sides share a state, the single residue edge."""
    a, b = t.lhs
    c, d = t.rhs
    lhs = [a, b]
    rhs = [c, d]
    for s in (a, b):
        if s in rhs:
            l2 = list(lhs)
            r2 = list(rhs)
            l2.remove(s)
            r2.remove(s)
            return [(l2[0], r2[0])]
    return sorted({(x, y) for x in lhs for y in rhs})


def build_transformation_graph(
    p: PopulationProtocol, pi_nu: Valuation, disabled: frozenset[Head]
) -> TransformationGraph:
    vertices = tuple(
        s
        for s in range(len(p.states))
        if pi_nu.get(presence(p, s)) is not False
    )
    base = conj([pi_formula(pi_nu), heads_formula(p, disabled)])
    edges: dict[tuple[int, int], list[Transition]] = {}
    gen_edges: dict[Transition, tuple[tuple[int, int], ...]] = {}
    for t in p.non_idle:
        if is_tautology(implies(base, xi(p, t.lhs))):
            continue
        es = [e for e in _residue(t) if e[0] != e[1]]
        gen_edges[t] = tuple(es)
        for e in es:
            edges.setdefault(e, []).append(t)
    scc = _scc_map(vertices, set(edges.keys()))
    bottom = set(scc.values())
    for (x, y) in edges:
        if scc[x] != scc[y]:
            bottom.discard(scc[x])
    return TransformationGraph(vertices, edges, gen_edges, scc, bottom)


def _scc_map(vertices: tuple[int, ...], edges: set[tuple[int, int]]) -> dict[int, int]:
    """Tarjan SCC (iterative); component ids are arbitrary but deterministic."""
    adj: dict[int, list[int]] = {v: [] for v in vertices}
    for (x, y) in sorted(edges):
        adj[x].append(y)
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comp: dict[int, int] = {}
    counter = [0]
    ncomp = [0]

    for root in vertices:
        if root in index:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            v, pi_ = work[-1]
            if pi_ == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on_stack.add(v)
            recurse = False
            for i in range(pi_, len(adj[v])):
                w = adj[v][i]
                if w not in index:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    recurse = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            work.pop()
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp[w] = ncomp[0]
                    if w == v:
                        break
                ncomp[0] += 1
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
    return comp


def compute_exp(g: TransformationGraph) -> frozenset[Head]:
    """Heads whose rules generate SCC-crossing edges; those rules become
    simultaneously disabled eventually with probability one."""
    out = set()
    for t, es in g.gen_edges.items():
        if any(g.crossing(e) for e in es):
            out.add(t.lhs)
    return frozenset(out)


def compute_j(
    p: PopulationProtocol,
    pi_nu: Valuation,
    disabled: frozenset[Head],
    exp: frozenset[Head],
) -> frozenset[Head]:
    """Largest subset of exp whose disabling is irreversible: once all its
    rules are disabled, no still-enabled rule can re-enable any of them."""
    m = set(exp)
    pi_f = pi_formula(pi_nu)
    psi_t = heads_formula(p, disabled)

    def head_ok(ef: Head, m: set[Head]) -> bool:
        e, f = ef
        base = conj([pi_f, psi_t, heads_formula(p, m)])
        for t in p.non_idle:
            c, d = t.rhs
            if t.rhs == ef:
                if not is_tautology(implies(base, xi(p, t.lhs))):
                    return False
                continue
            for prod, partner in ((e, f), (f, e)) if e != f else ((e, f),):
                if prod not in (c, d):
                    continue
                if e != f:
                    guard = conj(
                        [
                            neg(atom(presence(p, prod))),
                            atom(presence(p, partner)),
                            base,
                        ]
                    )
                    if not is_tautology(implies(guard, xi(p, t.lhs))):
                        return False
                else:
                    # head {E,E}: a rule producing one more E re-enables it
                    # unless E was consumed by the rule or two E's never
                    # coexist afterwards
                    x, y = t.lhs
                    if x == e or y == e:
                        continue
                    guard = conj([atom(singleton(p, e)), base])
                    if not is_tautology(implies(guard, xi(p, t.lhs))):
                        return False
        return True

    while True:
        keep = {ef for ef in m if head_ok(ef, m)}
        if keep == m:
            return frozenset(m)
        m = keep


def classify_nu_mode(
    p: PopulationProtocol, nu: Valuation, j: frozenset[Head]
) -> str:
    """"nu-disabled" / "nu-enabled" / "neither" per the formula of nu."""
    if not j:
        return "neither"
    nu_f = valuation_formula(nu)
    if all(is_tautology(implies(nu_f, xi(p, h))) for h in sorted(j)):
        return "nu-disabled"
    if any(is_tautology(implies(nu_f, neg(xi(p, h)))) for h in sorted(j)):
        return "nu-enabled"
    return "neither"


def compute_k(
    p: PopulationProtocol, g: TransformationGraph, j: frozenset[Head]
) -> frozenset[Head]:
    """Right-hand sides of rules transforming a state that occurs in j."""
    q_nu = {s for h in j for s in h}
    out = set()
    for t, es in g.gen_edges.items():
        if any(x in q_nu for (x, _) in es):
            out.add(t.rhs)
    return frozenset(out)


def compute_i_and_l(
    p: PopulationProtocol, g: TransformationGraph, pi_nu: Valuation
) -> tuple[frozenset[int], frozenset[Head]]:
    """Stable-edge analysis for the case without SCC-crossing rules.

    An edge is stable when some generating rule keeps a permanently present
    partner on its left-hand side.  The partner must be a different state
    than the edge's source: a rule consuming two agents of the source state
    stops firing at count one and therefore never drains the source.  I is
    the union of non-bottom SCCs of the stable subgraph: those states must
    eventually drain for good, because a stable edge out of them stays
    fireable for as long as they are populated.

    L collects the right-hand sides of every still-enabled rule generating
    any edge that leaves I.  The step that empties the last I state may be
    any such rule, not only a stable-edge witness, so restricting L to
    stable edges would let that step land outside the successor's formula.
    """
    stable_edges = set()
    for (x, y), ts in g.edges.items():
        for t in ts:
            a, b = t.lhs
            partner = b if a == x else a
            if partner != x and pi_nu.get(presence(p, partner)) is True:
                stable_edges.add((x, y))
                break
    scc = _scc_map(g.vertices, stable_edges)
    bottom = set(scc.values())
    for (x, y) in stable_edges:
        if scc[x] != scc[y]:
            bottom.discard(scc[x])
    i_states = frozenset(v for v in g.vertices if scc[v] not in bottom)
    l = set()
    for (x, y), ts in g.edges.items():
        if x in i_states and y not in i_states:
            for t in ts:
                l.add(t.rhs)
    return i_states, frozenset(l)


# ---------------------------------------------------------------------------
# Successor construction (one valuation)


def build_child(
    p: PopulationProtocol, sg: StageGraph, parent: Stage, nu: Valuation
) -> Stage | None:
    """Construct the successor stage for one valuation of the parent's
    formula; returns None when the result is redundant."""
    t_parent = parent.disabled
    ca = CaseAnalysis(nu=nu, pi_nu={}, parent_disabled=t_parent)
    pi_nu = compute_pi_nu(p, t_parent, nu)
    ca.pi_nu = pi_nu

    stable = is_stable(p, pi_nu, t_parent)
    if stable is not None:
        ca.stable = stable
        return Stage(
            id=-1,
            phi=pi_formula(pi_nu),
            pi=pi_nu,
            disabled=t_parent,
            parent=parent.id,
            kind=TERMINAL_STABLE,
            via=nu,
            analysis=ca,
        )
    if is_dead(p, pi_nu, t_parent):
        ca.dead = True
        return Stage(
            id=-1,
            phi=pi_formula(pi_nu),
            pi=pi_nu,
            disabled=t_parent,
            parent=parent.id,
            kind=TERMINAL_DEAD,
            via=nu,
            analysis=ca,
        )

    g = build_transformation_graph(p, pi_nu, t_parent)
    ca.graph = g
    ca.u_states = frozenset(v for v in g.vertices if g.scc[v] not in g.bottom)
    exp = compute_exp(g)
    ca.exp = exp
    j = compute_j(p, pi_nu, t_parent, exp)
    ca.j = j

    pi_f = pi_formula(pi_nu)
    if exp:
        t_nu = frozenset(t_parent | (j if j else exp))
        ca.t_nu = t_nu
        psi_tnu = heads_formula(p, t_nu)
        mode = classify_nu_mode(p, nu, j)
        ca.nu_disabled = mode == "nu-disabled"
        ca.nu_enabled = mode == "nu-enabled"
        if ca.nu_disabled:
            phi = conj([pi_f, psi_tnu, valuation_formula(nu)])
        elif ca.nu_enabled:
            k = compute_k(p, g, j)
            ca.k = k
            phi = conj(
                [pi_f, psi_tnu, disj([neg(xi(p, h)) for h in sorted(k)])]
            )
        else:
            phi = conj([pi_f, psi_tnu])
        ca.fast = bounds_mod.is_fast(p, g, exp, ca.u_states, pi_nu, t_parent)
        ca.very_fast = bounds_mod.is_very_fast(p, g, ca.u_states, pi_nu, t_parent)
    else:
        t_nu = t_parent
        ca.t_nu = t_nu
        psi_tnu = heads_formula(p, t_nu)
        i_states, l = compute_i_and_l(p, g, pi_nu)
        ca.i_states = i_states
        ca.l = l
        not_i = [neg(atom(presence(p, s))) for s in sorted(i_states)]
        if any(nu.get(presence(p, s)) is True for s in i_states):
            phi = conj(
                [pi_f, psi_tnu]
                + not_i
                + [disj([neg(xi(p, h)) for h in sorted(l)])]
            )
        elif all(nu.get(presence(p, s)) is False for s in i_states):
            phi = conj([pi_f, psi_tnu, valuation_formula(nu)])
        else:
            phi = conj([pi_f, psi_tnu] + not_i)

    child = Stage(
        id=-1,
        phi=phi,
        pi=pi_nu,
        disabled=t_nu,
        parent=parent.id,
        kind=INTERNAL,
        via=nu,
        analysis=ca,
    )
    for anc in sg.path_to_root(parent.id):
        if (
            anc.pi == pi_nu
            and anc.disabled == t_nu
            and is_tautology(implies(anc.phi, phi))
        ):
            return None
    return child


# ---------------------------------------------------------------------------
# The worklist


def build_stage_graph(
    p: PopulationProtocol,
    max_stages: int = 100_000,
    timeout: float = 1000.0,
) -> StageGraph:
    """Breadth-first construction of the full stage tree."""
    start = time.monotonic()
    sg = StageGraph(protocol=p, stages=[initial_stage(p)])
    work: deque[int] = deque([0])
    while work:
        sid = work.popleft()
        stage = sg.stages[sid]
        if stage.kind != INTERNAL:
            continue
        nus = enumerate_satisfying_valuations(stage.phi)
        for nu in nus:
            if len(sg.stages) >= max_stages:
                raise StageLimitError(
                    f"stage limit {max_stages} exceeded", sg
                )
            if time.monotonic() - start > timeout:
                raise StageLimitError(f"timeout {timeout}s exceeded", sg)
            child = build_child(p, sg, stage, nu)
            if child is None:
                continue
            child.id = len(sg.stages)
            sg.stages.append(child)
            stage.children.append(child.id)
            if child.kind == INTERNAL:
                work.append(child.id)
        if not stage.children:
            stage.kind = TERMINAL_EXHAUSTED
    return sg


# ---------------------------------------------------------------------------
# Export


def _val_repr(val: Valuation | None) -> list[list]:
    if val is None:
        return []
    return [
        [a.name, bool(v)] for a, v in sorted(val.items(), key=lambda kv: kv[0].sort_key())
    ]


def _heads_repr(p: PopulationProtocol, heads) -> list[str]:
    return [p.head_name(h) for h in sorted(heads)]


def to_json_dict(sg: StageGraph) -> dict:
    """Full tree with case-analysis fields, suitable for machine diffing."""
    p = sg.protocol
    stages = []
    for s in sg.stages:
        entry: dict = {
            "id": s.id,
            "parent": s.parent,
            "kind": s.kind,
            "phi": pretty(s.phi),
            "pi": _val_repr(s.pi),
            "disabled": _heads_repr(p, s.disabled),
            "children": list(s.children),
            "via": _val_repr(s.via),
        }
        ca = s.analysis
        if ca is not None:
            entry["analysis"] = {
                "stable": ca.stable,
                "dead": ca.dead,
                "exp": _heads_repr(p, ca.exp),
                "j": _heads_repr(p, ca.j),
                "t_nu": _heads_repr(p, ca.t_nu),
                "k": _heads_repr(p, ca.k),
                "l": _heads_repr(p, ca.l),
                "i_states": [p.states[i] for i in sorted(ca.i_states)],
                "u_states": [p.states[i] for i in sorted(ca.u_states)],
                "nu_disabled": ca.nu_disabled,
                "nu_enabled": ca.nu_enabled,
                "fast": ca.fast,
                "very_fast": ca.very_fast,
                "bound": bounds_mod.edge_bound(ca).label,
            }
        stages.append(entry)
    return {
        "protocol": p.name,
        "states": list(p.states),
        "stages": stages,
    }


def to_dot(sg: StageGraph) -> str:
    """Graphviz rendering: one node per stage, labeled with its triple."""
    p = sg.protocol
    lines = ["digraph stages {", '  node [shape=box, fontname="monospace"];']
    for s in sg.stages:
        pi_s = " ".join(
            ("" if v else "!") + a.name
            for a, v in sorted(s.pi.items(), key=lambda kv: kv[0].sort_key())
        )
        t_s = " ".join(_heads_repr(p, s.disabled))
        label = f"S{s.id} [{s.kind}]\\nPhi: {pretty(s.phi)}\\npi: {pi_s or '-'}\\nT: {t_s or '-'}"
        if s.analysis is not None:
            label += f"\\nbound: {bounds_mod.edge_bound(s.analysis).label}"
        label = label.replace('"', '\\"')
        lines.append(f'  s{s.id} [label="{label}"];')
    for s in sg.stages:
        for c in s.children:
            lines.append(f"  s{s.id} -> s{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"
