"""Population protocol model: states, transitions, configurations, step semantics.

A protocol is a finite set of states, a transition relation over unordered
pairs of states (multisets of size two), an input alphabet mapped onto
states, and a 0/1 output per state.  Configurations are count vectors; the
induced Markov chain picks an ordered pair of distinct agents uniformly at
random and then one of the rules for that pair's head uniformly at random.

All probability arithmetic is exact (fractions.Fraction).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

# A head is an unordered pair of state indices, canonically sorted.
Head = tuple[int, int]


def make_head(i: int, j: int) -> Head:
    return (i, j) if i <= j else (j, i)


@dataclass(frozen=True)
class Transition:
    """A rule lhs -> rhs over heads. `explicit` is False for materialized idles."""

    lhs: Head
    rhs: Head
    explicit: bool = True

    @property
    def is_idle(self) -> bool:
        return self.lhs == self.rhs


@dataclass(frozen=True, order=True)
class Configuration:
    """Immutable count vector over the protocol's states."""

    counts: tuple[int, ...]

    @property
    def size(self) -> int:
        return sum(self.counts)

    def count(self, state: int) -> int:
        return self.counts[state]


class ProtocolError(ValueError):
    """Raised on malformed protocol sources; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PopulationProtocol:
    """Immutable protocol description with idle rules materialized.

    `transitions` holds every rule: the explicit ones from the source plus
    one implicit idle rule for each head that has no explicit rule.  The
    number of rules sharing a head is the uniform-choice denominator in the
    step semantics.
    """

    def __init__(
        self,
        name: str,
        states: tuple[str, ...],
        explicit_rules: list[tuple[Head, Head]],
        input_map: dict[str, int],
        output1: frozenset[int],
    ):
        if not states:
            raise ProtocolError("protocol needs at least one state")
        if not input_map:
            raise ProtocolError("protocol needs at least one input symbol")
        self.name = name
        self.states = states
        self.input_symbols = tuple(input_map.keys())
        self.input_map = dict(input_map)
        self.output1 = output1

        n = len(states)
        by_head: dict[Head, list[Transition]] = {}
        seen: set[tuple[Head, Head]] = set()
        explicit: list[Transition] = []
        for lhs, rhs in explicit_rules:
            if (lhs, rhs) in seen:
                continue
            seen.add((lhs, rhs))
            t = Transition(lhs, rhs, explicit=True)
            explicit.append(t)
            by_head.setdefault(lhs, []).append(t)
        all_rules = list(explicit)
        for i in range(n):
            for j in range(i, n):
                head = (i, j)
                if head not in by_head:
                    idle = Transition(head, head, explicit=False)
                    by_head[head] = [idle]
                    all_rules.append(idle)
        self.transitions: tuple[Transition, ...] = tuple(all_rules)
        self.rules_by_head: dict[Head, tuple[Transition, ...]] = {
            h: tuple(ts) for h, ts in by_head.items()
        }
        self.non_idle: tuple[Transition, ...] = tuple(
            t for t in all_rules if not t.is_idle
        )
        self.explicit_count = len(explicit)

    # -- naming helpers -------------------------------------------------

    def state_index(self, name: str) -> int:
        try:
            return self.states.index(name)
        except ValueError:
            raise ProtocolError(f"unknown state {name!r}") from None

    def head_name(self, head: Head) -> str:
        return f"{self.states[head[0]]},{self.states[head[1]]}"

    def output(self, state: int) -> int:
        return 1 if state in self.output1 else 0

    def input_states(self) -> frozenset[int]:
        return frozenset(self.input_map.values())

    def rule_count(self, head: Head) -> int:
        return len(self.rules_by_head[head])

    def __repr__(self) -> str:
        return f"PopulationProtocol({self.name!r}, |Q|={len(self.states)}, |T|={self.explicit_count})"


# ---------------------------------------------------------------------------
# Parsing


def _parse_json(text: str) -> PopulationProtocol:
    data = json.loads(text)
    for key in ("states", "inputs", "output1", "transitions"):
        if key not in data:
            raise ProtocolError(f"missing key {key!r} in JSON protocol")
    states = list(data["states"])
    if len(set(states)) != len(states):
        raise ProtocolError("duplicate state names")
    index = {s: i for i, s in enumerate(states)}

    def look(name: str) -> int:
        if name not in index:
            raise ProtocolError(f"undeclared state {name!r}")
        return index[name]

    input_map = {sym: look(st) for sym, st in data["inputs"].items()}
    if not input_map:
        raise ProtocolError("empty input mapping")
    output1 = frozenset(look(s) for s in data["output1"])
    rules = []
    for quad in data["transitions"]:
        if len(quad) != 4:
            raise ProtocolError(f"transition {quad!r} must have 4 state names")
        a, b, c, d = (look(s) for s in quad)
        rules.append((make_head(a, b), make_head(c, d)))
    return PopulationProtocol(
        data.get("name", "protocol"), tuple(states), rules, input_map, output1
    )


def parse_protocol(text: str) -> PopulationProtocol:
    """Parse the text protocol format (or its JSON equivalent).

    Text format::

        protocol <name>
        states: A B a b
        inputs: x -> A, y -> B
        output1: B b
        transitions:
          A B -> a b
          ...

    `#` starts a comment.  Symmetric multiset semantics: `A B -> C D` and
    `B A -> D C` denote the same rule; exact duplicates are collapsed.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_json(text)

    name = "protocol"
    states: list[str] | None = None
    input_map: dict[str, int] | None = None
    output1: frozenset[int] | None = None
    rules: list[tuple[Head, Head]] = []
    in_transitions = False
    index: dict[str, int] = {}

    def look(state_name: str, lineno: int) -> int:
        if state_name not in index:
            raise ProtocolError(f"undeclared state {state_name!r}", lineno)
        return index[state_name]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("protocol"):
            name = line[len("protocol"):].strip() or name
            in_transitions = False
        elif line.startswith("states:"):
            names = line[len("states:"):].split()
            if len(set(names)) != len(names):
                raise ProtocolError("duplicate state names", lineno)
            if not names:
                raise ProtocolError("empty state list", lineno)
            states = names
            index = {s: i for i, s in enumerate(names)}
            in_transitions = False
        elif line.startswith("inputs:"):
            input_map = {}
            for part in line[len("inputs:"):].split(","):
                part = part.strip()
                if not part:
                    continue
                if "->" not in part:
                    raise ProtocolError(f"bad input mapping {part!r}", lineno)
                sym, st = (x.strip() for x in part.split("->", 1))
                if not sym or not st:
                    raise ProtocolError(f"bad input mapping {part!r}", lineno)
                if sym in input_map:
                    raise ProtocolError(f"duplicate input symbol {sym!r}", lineno)
                input_map[sym] = look(st, lineno)
            if not input_map:
                raise ProtocolError("input symbol without mapping", lineno)
            in_transitions = False
        elif line.startswith("output1:"):
            output1 = frozenset(look(s, lineno) for s in line[len("output1:"):].split())
            in_transitions = False
        elif line.startswith("transitions:"):
            in_transitions = True
        elif in_transitions:
            if "->" not in line:
                raise ProtocolError(f"bad transition {line!r}", lineno)
            left, right = line.split("->", 1)
            ls, rs = left.split(), right.split()
            if len(ls) != 2 or len(rs) != 2:
                raise ProtocolError(
                    f"transition {line!r} must have two states on each side", lineno
                )
            lhs = make_head(look(ls[0], lineno), look(ls[1], lineno))
            rhs = make_head(look(rs[0], lineno), look(rs[1], lineno))
            rules.append((lhs, rhs))
        else:
            raise ProtocolError(f"unrecognized line {line!r}", lineno)

    if states is None:
        raise ProtocolError("missing states declaration")
    if input_map is None:
        raise ProtocolError("missing inputs declaration")
    if output1 is None:
        raise ProtocolError("missing output declaration (output1: ...)")
    return PopulationProtocol(name, tuple(states), rules, input_map, output1)


# ---------------------------------------------------------------------------
# Configurations and step semantics


def initial_configuration(
    p: PopulationProtocol, input_counts: dict[str, int]
) -> Configuration:
    """Map an input (counts per input symbol) to its initial configuration."""
    counts = [0] * len(p.states)
    for sym, k in input_counts.items():
        if sym not in p.input_map:
            raise ProtocolError(f"unknown input symbol {sym!r}")
        if k < 0:
            raise ProtocolError(f"negative input count for {sym!r}")
        counts[p.input_map[sym]] += k
    return Configuration(tuple(counts))


def enabled(c: Configuration, t: Transition) -> bool:
    a, b = t.lhs
    if a == b:
        return c.counts[a] >= 2
    return c.counts[a] >= 1 and c.counts[b] >= 1


def fire(c: Configuration, t: Transition) -> Configuration:
    if not enabled(c, t):
        raise ValueError(f"transition {t} not enabled in {c}")
    counts = list(c.counts)
    counts[t.lhs[0]] -= 1
    counts[t.lhs[1]] -= 1
    counts[t.rhs[0]] += 1
    counts[t.rhs[1]] += 1
    return Configuration(tuple(counts))


def transition_probability(
    p: PopulationProtocol, c: Configuration, t: Transition
) -> Fraction:
    """Probability that the next interaction executes `t` (exact)."""
    n = c.size
    if n < 2:
        raise ValueError("configuration must have at least two agents")
    if not enabled(c, t):
        raise ValueError(f"transition {t} not enabled in {c}")
    a, b = t.lhs
    k = p.rule_count(t.lhs)
    if a == b:
        num = c.counts[a] * (c.counts[a] - 1)
    else:
        num = 2 * c.counts[a] * c.counts[b]
    return Fraction(num, (n * n - n) * k)


def step_distribution(
    p: PopulationProtocol, c: Configuration
) -> dict[Configuration, Fraction]:
    """One-step successor distribution, merging rules with equal successors."""
    n = c.size
    if n < 2:
        raise ValueError("configuration must have at least two agents")
    dist: dict[Configuration, Fraction] = {}
    for head, rules in p.rules_by_head.items():
        a, b = head
        if a == b:
            num = c.counts[a] * (c.counts[a] - 1)
        else:
            num = 2 * c.counts[a] * c.counts[b]
        if num == 0:
            continue
        base = Fraction(num, (n * n - n) * len(rules))
        for t in rules:
            succ = fire(c, t)
            dist[succ] = dist.get(succ, Fraction(0)) + base
    return dist
