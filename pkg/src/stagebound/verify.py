"""Finite-instance oracle: explicit-state exploration of the induced Markov
chain, probability-one modal checks, exact expected hitting times, stage-tree
validation, and seeded Monte Carlo simulation.

Almost-sure reachability on a finite chain reduces to a graph criterion:
with the target made absorbing, the target must stay reachable from every
configuration reachable along target-avoiding runs.  That is the bridge
used for both the eventually-operator and the stage progress condition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .logic import (
    Formula,
    atom,
    config_satisfies,
    conj,
    heads_formula,
    out_atom,
    valuation_formula,
)
from .protocol import (
    Configuration,
    PopulationProtocol,
    initial_configuration,
    step_distribution,
)
from .stagegraph import Stage, StageGraph


class ExplorationLimitError(RuntimeError):
    pass


@dataclass
class ReachGraph:
    """Finite chain over the configurations reachable from the roots."""

    protocol: PopulationProtocol
    nodes: list[Configuration]
    index: dict[Configuration, int]
    succ: list[list[tuple[int, Fraction]]]
    roots: list[int]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def predecessors(self) -> list[list[int]]:
        pred: list[list[int]] = [[] for _ in self.nodes]
        for v, outs in enumerate(self.succ):
            for u, _ in outs:
                pred[u].append(v)
        return pred

    def sat(self, phi: Formula) -> set[int]:
        p = self.protocol
        return {
            i for i, c in enumerate(self.nodes) if config_satisfies(p, c, phi)
        }

    def backward_reach(self, seed: set[int]) -> set[int]:
        """Nodes that can reach the seed set (seed included)."""
        pred = self.predecessors()
        seen = set(seed)
        work = deque(seed)
        while work:
            v = work.popleft()
            for u in pred[v]:
                if u not in seen:
                    seen.add(u)
                    work.append(u)
        return seen

    def box_set(self, sat: set[int]) -> set[int]:
        """Nodes from which every reachable node lies in `sat`."""
        bad = set(range(self.size)) - sat
        return set(range(self.size)) - self.backward_reach(bad)

    def almost_sure_reach(self, target: set[int]) -> set[int]:
        """Nodes whose runs hit the target with probability one.

        The target is made absorbing first: a run counts as soon as it
        touches the target, whatever happens afterwards.  On the cut chain
        the criterion is "no reachable node misses the target"."""
        tgt = set(target)
        cut = [([] if v in tgt else outs) for v, outs in enumerate(self.succ)]
        pred: list[list[int]] = [[] for _ in self.nodes]
        for v, outs in enumerate(cut):
            for u, _ in outs:
                pred[u].append(v)
        can = set(tgt)
        work = deque(can)
        while work:
            v = work.popleft()
            for u in pred[v]:
                if u not in can:
                    can.add(u)
                    work.append(u)
        cannot = set(range(self.size)) - can
        doomed = set(cannot)
        work = deque(doomed)
        while work:
            v = work.popleft()
            for u in pred[v]:
                if u not in doomed:
                    doomed.add(u)
                    work.append(u)
        return set(range(self.size)) - doomed


def explore(
    p: PopulationProtocol,
    roots: Configuration | list[Configuration],
    cap: int = 200_000,
) -> ReachGraph:
    """BFS closure of the root configuration(s) under the step relation."""
    if isinstance(roots, Configuration):
        roots = [roots]
    for c in roots:
        if c.size < 2:
            raise ValueError("configurations need at least two agents")
    nodes: list[Configuration] = []
    index: dict[Configuration, int] = {}
    succ: list[list[tuple[int, Fraction]]] = []
    work: deque[int] = deque()
    root_ids = []
    for c in roots:
        if c not in index:
            index[c] = len(nodes)
            nodes.append(c)
            work.append(index[c])
        root_ids.append(index[c])
    while work:
        v = work.popleft()
        while len(succ) <= v:
            succ.append([])
        outs = []
        for succ_cfg, prob in sorted(step_distribution(p, nodes[v]).items()):
            if succ_cfg not in index:
                if len(nodes) >= cap:
                    raise ExplorationLimitError(
                        f"exploration cap {cap} exceeded"
                    )
                index[succ_cfg] = len(nodes)
                nodes.append(succ_cfg)
                work.append(index[succ_cfg])
            outs.append((index[succ_cfg], prob))
        succ[v] = outs
    while len(succ) < len(nodes):
        succ.append([])
    return ReachGraph(p, nodes, index, succ, root_ids)


def holds_box(g: ReachGraph, phi: Formula) -> bool:
    """True iff every configuration of the closure satisfies phi."""
    p = g.protocol
    return all(config_satisfies(p, c, phi) for c in g.nodes)


def holds_diamond_as(g: ReachGraph, target: set[int]) -> bool:
    """True iff runs from the exploration roots hit the target almost surely
    (on the finite chain: no target-avoiding path may escape to a region
    from which the target is unreachable)."""
    good = g.almost_sure_reach(target)
    return all(r in good for r in g.roots)


def stable_set(g: ReachGraph) -> set[int]:
    """Nodes from which all reachable configurations agree on one output."""
    sat0 = g.sat(atom(out_atom(0)))
    sat1 = g.sat(atom(out_atom(1)))
    return g.box_set(sat0) | g.box_set(sat1)


# ---------------------------------------------------------------------------
# Exact expected hitting times


def _scc_condensation(succ: list[list[int]]) -> tuple[list[int], list[list[int]]]:
    """Iterative Tarjan; returns (component id per node, members per id),
    component ids in reverse topological order (id 0 has no successors
    outside itself... ids increase towards the roots)."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comp = [-1] * n
    members: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for i in range(pi, len(succ[v])):
                w = succ[v][i]
                if index[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                cid = len(members)
                group = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = cid
                    group.append(w)
                    if w == v:
                        break
                members.append(group)
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
    return comp, members


def expected_steps_exact(g: ReachGraph, target: set[int]) -> Fraction:
    """Expected number of interactions from the first root until the target.

    Exact rational arithmetic on chains up to 5000 nodes (larger chains fall
    back to a checked floating-point solve).  Requires almost-sure
    reachability of the target.  The system is solved per strongly connected
    component in topological order, so only small dense blocks are
    eliminated.
    """
    return expected_steps_all(g, target)[g.roots[0]]


def expected_steps_all(g: ReachGraph, target: set[int]) -> list:
    """First-hitting expectations for every node; the target is absorbing.

    Solved exactly over the rationals up to 5000 nodes; beyond that a
    floating-point pass with a residual check below 1e-9 is used.  Nodes
    from which the target is not almost surely reached make the expectation
    diverge, which is reported as an error."""
    if not holds_diamond_as(g, target):
        raise ValueError("target not almost surely reachable; expectation diverges")
    exact = g.size <= 5000
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    n = g.size
    tgt = set(target)
    good = g.almost_sure_reach(tgt)
    expect: list = [None] * n
    for v in tgt:
        expect[v] = zero
    for v in range(n):
        if v not in good and v not in tgt:
            expect[v] = zero  # outside the almost-sure region; never read
    plain = [
        [] if v in tgt or v not in good else [u for u, _ in outs]
        for v, outs in enumerate(g.succ)
    ]
    _, members = _scc_condensation(plain)
    # members[] is produced in reverse topological order already
    for group in members:
        todo = [v for v in group if expect[v] is None]
        if not todo:
            continue
        pos = {v: i for i, v in enumerate(todo)}
        k = len(todo)
        # rows: E[v] - sum_{u in block} P(v,u) E[u] = 1 + sum_{u solved} P(v,u) E[u]
        mat = [[zero] * k for _ in range(k)]
        rhs = [one] * k
        for v in todo:
            i = pos[v]
            mat[i][i] = one
            for u, prob in g.succ[v]:
                pval = prob if exact else float(prob)
                if u in pos:
                    mat[i][pos[u]] -= pval
                else:
                    rhs[i] += pval * expect[u]
        sol = _solve_dense(mat, rhs)
        for v in todo:
            expect[v] = sol[pos[v]]
    if not exact:
        _check_residual(g, tgt, good, expect)
    return [e if e is not None else zero for e in expect]


def _check_residual(g: ReachGraph, tgt: set[int], good: set[int], expect: list) -> None:
    worst = 0.0
    for v in good:
        if v in tgt:
            continue
        acc = 1.0
        for u, prob in g.succ[v]:
            acc += float(prob) * expect[u]
        scale = max(1.0, abs(float(expect[v])))
        worst = max(worst, abs(acc - float(expect[v])) / scale)
    if worst > 1e-9:
        raise ArithmeticError(
            f"floating-point hitting-time solve residual {worst:.2e} exceeds 1e-9"
        )


def _solve_dense(mat: list[list], rhs: list) -> list:
    """Gauss-Jordan with magnitude pivoting; works over Fraction or float."""
    k = len(mat)
    for col in range(k):
        piv = max(range(col, k), key=lambda r: abs(mat[r][col]))
        if mat[piv][col] == 0:
            raise ValueError("singular hitting-time system")
        if piv != col:
            mat[col], mat[piv] = mat[piv], mat[col]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1 / mat[col][col]
        mat[col] = [x * inv for x in mat[col]]
        rhs[col] *= inv
        for r in range(k):
            if r != col and mat[r][col] != 0:
                f = mat[r][col]
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[col])]
                rhs[r] -= f * rhs[col]
    return rhs


# ---------------------------------------------------------------------------
# Stage-tree validation (conditions (a) and (b))


@dataclass
class Violation:
    size: int
    condition: str  # "initial-membership" | "progress"
    stage: int
    config: Configuration

    def __str__(self) -> str:
        return (
            f"n={self.size}: condition {self.condition} fails at stage "
            f"{self.stage} for configuration {self.config.counts}"
        )


def initial_configurations(p: PopulationProtocol, n: int) -> list[Configuration]:
    """All initial configurations of size n (inputs are compositions of n
    over the input alphabet)."""
    syms = list(p.input_symbols)
    out = []
    seen = set()
    for combo in _compositions(n, len(syms)):
        c = initial_configuration(p, dict(zip(syms, combo)))
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def _compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for rest in _compositions(n - head, k - 1):
            yield (head,) + rest


def stage_denotation(g: ReachGraph, stage: Stage, p: PopulationProtocol) -> set[int]:
    """Nodes in [[S]]: satisfy Phi now, and pi plus the disabled heads from
    now on (evaluated over the finite closure)."""
    phi_sat = g.sat(stage.phi)
    persist = conj(
        [valuation_formula(stage.pi), heads_formula(p, stage.disabled)]
    )
    return phi_sat & g.box_set(g.sat(persist))


def check_stage_graph(
    p: PopulationProtocol,
    sg: StageGraph,
    max_n: int,
    cap: int = 200_000,
) -> list[Violation]:
    """Check the two stage-graph conditions for every initial configuration
    of size 2..max_n: (a) the root stage covers every initial configuration;
    (b) from every reachable configuration in a non-terminal stage, the union
    of its children's denotations is reached almost surely."""
    violations: list[Violation] = []
    for n in range(2, max_n + 1):
        inits = initial_configurations(p, n)
        if not inits:
            continue
        g = explore(p, inits, cap=cap)
        denote = {s.id: stage_denotation(g, s, p) for s in sg.stages}
        root_den = denote[sg.root]
        for i in g.roots:
            if i not in root_den:
                violations.append(
                    Violation(n, "initial-membership", sg.root, g.nodes[i])
                )
        for s in sg.stages:
            if not s.children:
                continue
            target = set()
            for cid in s.children:
                target |= denote[cid]
            good = g.almost_sure_reach(target)
            for i in sorted(denote[s.id]):
                if i not in good:
                    violations.append(
                        Violation(n, "progress", s.id, g.nodes[i])
                    )
    return violations


# ---------------------------------------------------------------------------
# Monte Carlo simulation


@dataclass
class SimResult:
    trials: int
    steps: tuple[int, ...]
    seed: int
    consensus: tuple[int | None, ...]  # output value at the stopping config

    @property
    def mean(self) -> float:
        return sum(self.steps) / len(self.steps) if self.steps else float("nan")

    @property
    def variance(self) -> float:
        """Unbiased sample variance of the interaction counts."""
        k = len(self.steps)
        if k < 2:
            return float("nan")
        m = self.mean
        return sum((s - m) ** 2 for s in self.steps) / (k - 1)

    @property
    def stderr(self) -> float:
        k = len(self.steps)
        if k < 2:
            return float("nan")
        return (self.variance / k) ** 0.5


def all_configurations(p: PopulationProtocol, n: int) -> list[Configuration]:
    k = len(p.states)
    return [Configuration(c) for c in _compositions(n, k)]


def _consensus_value(p: PopulationProtocol, c: Configuration) -> int | None:
    outs = {p.output(s) for s, k in enumerate(c.counts) if k > 0}
    if len(outs) == 1:
        return outs.pop()
    return None


def simulate(
    p: PopulationProtocol,
    c0: Configuration,
    trials: int,
    seed: int,
    target: str | Formula = "stable",
    max_steps: int = 1_000_000,
) -> SimResult:
    """Independent runs counting interactions (idle ones included) until the
    target: either membership in the stable set of the size-n configuration
    space, or a configuration satisfying a formula.

    Deterministic: trial t uses a counter-based generator keyed by
    (seed, t), so results are reproducible and independent of scheduling.
    """
    n = c0.size
    if n < 2:
        raise ValueError("simulation needs at least two agents")
    if isinstance(target, str):
        if target != "stable":
            raise ValueError(f"unknown target {target!r}")
        space = explore(p, all_configurations(p, n), cap=10_000_000)
        stable_ids = stable_set(space)
        members = frozenset(space.nodes[i] for i in stable_ids)
        in_target = lambda c: c in members
    else:
        phi = target
        in_target = lambda c: config_satisfies(p, c, phi)

    steps_out = []
    consensus = []
    total_pairs = n * (n - 1)
    for t in range(trials):
        rng = np.random.Generator(np.random.Philox(key=(seed << 64) + t))
        c = list(c0.counts)
        steps = 0
        cfg = Configuration(tuple(c))
        while not in_target(cfg):
            if steps >= max_steps:
                raise RuntimeError(
                    f"trial {t} exceeded {max_steps} interactions; target "
                    f"may not be almost surely reachable"
                )
            r = int(rng.integers(0, total_pairs))
            acc = 0
            head = None
            present = [s for s in range(len(c)) if c[s] > 0]
            for ai, a in enumerate(present):
                for b in present[ai:]:
                    w = c[a] * (c[a] - 1) if a == b else 2 * c[a] * c[b]
                    acc += w
                    if r < acc:
                        head = (a, b)
                        break
                if head is not None:
                    break
            rules = p.rules_by_head[head]
            rule = rules[0] if len(rules) == 1 else rules[int(rng.integers(0, len(rules)))]
            c[rule.lhs[0]] -= 1
            c[rule.lhs[1]] -= 1
            c[rule.rhs[0]] += 1
            c[rule.rhs[1]] += 1
            steps += 1
            cfg = Configuration(tuple(c))
        steps_out.append(steps)
        consensus.append(_consensus_value(p, cfg))
    return SimResult(trials, tuple(steps_out), seed, tuple(consensus))


def expectation_csv(rows: list[tuple[int, float, float]]) -> str:
    """CSV emitter for (n, expectation-or-mean, stderr) scaling sweeps."""
    out = ["n,expected_interactions,stderr"]
    for n, val, err in rows:
        out.append(f"{n},{val},{err}")
    return "\n".join(out) + "\n"
