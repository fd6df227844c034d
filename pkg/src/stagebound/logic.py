"""Propositional formulas over presence/singleton atoms, with the coupling
"exactly-one(A) implies present(A)" built into satisfiability.

Atoms:
  * presence   A   -- state A is populated (count > 0)
  * singleton  A!  -- state A holds exactly one agent (count == 1)
  * Out_0/Out_1    -- all populated states output 0 (resp. 1); only used by
                      the finite-instance verifier, never inside the static
                      analysis.

Formulas are immutable tagged tuples, so they hash and compare structurally,
which keeps stage construction deterministic.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .protocol import Configuration, Head, PopulationProtocol

PRESENCE = "st"
SINGLETON = "one"
OUT = "out"


class Atom(NamedTuple):
    kind: str  # PRESENCE | SINGLETON | OUT
    index: int  # state index (or output value for OUT)
    name: str

    def sort_key(self) -> tuple[int, int, int]:
        # Out atoms last; presence before singleton for the same state.
        if self.kind == OUT:
            return (1, self.index, 0)
        return (0, self.index, 0 if self.kind == PRESENCE else 1)


def presence(p: PopulationProtocol, state: int) -> Atom:
    return Atom(PRESENCE, state, p.states[state])


def singleton(p: PopulationProtocol, state: int) -> Atom:
    return Atom(SINGLETON, state, p.states[state] + "!")


def out_atom(value: int) -> Atom:
    return Atom(OUT, value, f"Out_{value}")


# Formula = ("tt",) | ("ff",) | ("atom", Atom) | ("not", f)
#         | ("and", (f, ...)) | ("or", (f, ...)) | ("implies", f, f)
Formula = tuple

TT: Formula = ("tt",)
FF: Formula = ("ff",)


def atom(a: Atom) -> Formula:
    return ("atom", a)


def neg(f: Formula) -> Formula:
    if f == TT:
        return FF
    if f == FF:
        return TT
    return ("not", f)


def conj(fs: Iterable[Formula]) -> Formula:
    parts = [f for f in fs if f != TT]
    if any(f == FF for f in parts):
        return FF
    if not parts:
        return TT
    if len(parts) == 1:
        return parts[0]
    return ("and", tuple(parts))


def disj(fs: Iterable[Formula]) -> Formula:
    parts = [f for f in fs if f != FF]
    if any(f == TT for f in parts):
        return TT
    if not parts:
        return FF
    if len(parts) == 1:
        return parts[0]
    return ("or", tuple(parts))


def implies(f: Formula, g: Formula) -> Formula:
    return ("implies", f, g)


def atoms_of(f: Formula) -> set[Atom]:
    tag = f[0]
    if tag == "atom":
        return {f[1]}
    if tag in ("tt", "ff"):
        return set()
    if tag == "not":
        return atoms_of(f[1])
    if tag == "implies":
        return atoms_of(f[1]) | atoms_of(f[2])
    out: set[Atom] = set()
    for g in f[1]:
        out |= atoms_of(g)
    return out


def _evaluate(f: Formula, asg: dict[Atom, bool]) -> bool | None:
    """Three-valued evaluation under a partial assignment."""
    tag = f[0]
    if tag == "tt":
        return True
    if tag == "ff":
        return False
    if tag == "atom":
        return asg.get(f[1])
    if tag == "not":
        v = _evaluate(f[1], asg)
        return None if v is None else not v
    if tag == "implies":
        a = _evaluate(f[1], asg)
        if a is False:
            return True
        b = _evaluate(f[2], asg)
        if b is True:
            return True
        if a is True and b is False:
            return False
        return None
    if tag == "and":
        pending = False
        for g in f[1]:
            v = _evaluate(g, asg)
            if v is False:
                return False
            if v is None:
                pending = True
        return None if pending else True
    if tag == "or":
        pending = False
        for g in f[1]:
            v = _evaluate(g, asg)
            if v is True:
                return True
            if v is None:
                pending = True
        return None if pending else False
    raise ValueError(f"bad formula node {f!r}")


def evaluation_domain(f: Formula) -> list[Atom]:
    """Atoms of f, closed under adding the presence companion of every
    singleton atom, in canonical order."""
    dom = set(atoms_of(f))
    for a in list(dom):
        if a.kind == SINGLETON:
            dom.add(Atom(PRESENCE, a.index, a.name[:-1]))
    return sorted(dom, key=Atom.sort_key)


def _consistent_choices(a: Atom, asg: dict[Atom, bool]) -> tuple[bool, ...]:
    """Values atom `a` may take given the singleton->presence coupling.

    tt is tried before ff so enumeration is lexicographic with tt < ff.
    """
    if a.kind == SINGLETON:
        comp = asg.get(Atom(PRESENCE, a.index, a.name[:-1]))
        if comp is False:
            return (False,)
    elif a.kind == PRESENCE:
        if asg.get(Atom(SINGLETON, a.index, a.name + "!")) is True:
            return (True,)
    return (True, False)


def is_tautology(f: Formula) -> bool:
    """True iff f holds under every consistent total assignment of its atoms."""
    domain = evaluation_domain(f)

    def search(i: int, asg: dict[Atom, bool]) -> bool:
        # Returns True if a consistent countermodel exists below this node.
        v = _evaluate(f, asg)
        if v is True:
            return False
        if v is False:
            return True
        if i == len(domain):
            return False
        a = domain[i]
        for val in _consistent_choices(a, asg):
            asg[a] = val
            if search(i + 1, asg):
                return True
            del asg[a]
        return False

    return not search(0, {})


def is_satisfiable(f: Formula) -> bool:
    return not is_tautology(neg(f))


Valuation = dict[Atom, bool]


def enumerate_satisfying_valuations(f: Formula) -> list[Valuation]:
    """All consistent total assignments over the evaluation domain of f that
    satisfy f, in canonical order (atoms by state index, tt before ff)."""
    domain = evaluation_domain(f)
    results: list[Valuation] = []

    def walk(i: int, asg: dict[Atom, bool]) -> None:
        if _evaluate(f, asg) is False:
            return
        if i == len(domain):
            if _evaluate(f, asg) is True:
                results.append(dict(asg))
            return
        a = domain[i]
        for val in _consistent_choices(a, asg):
            asg[a] = val
            walk(i + 1, asg)
            del asg[a]

    walk(0, {})
    return results


def valuation_formula(val: Valuation) -> Formula:
    """The conjunction of literals a valuation fixes, in canonical atom order."""
    parts = []
    for a in sorted(val.keys(), key=Atom.sort_key):
        parts.append(atom(a) if val[a] else neg(atom(a)))
    return conj(parts)


def xi(p: PopulationProtocol, head: Head) -> Formula:
    """Formula stating that every rule with this head is disabled.

    For a head {A,B} with A != B that is "no A or no B"; for {A,A} it is
    "no A, or exactly one A".  Singleton atoms are meaningful for every
    state (count == 1), so the same shape is used uniformly.
    """
    a, b = head
    if a != b:
        return disj([neg(atom(presence(p, a))), neg(atom(presence(p, b)))])
    return disj([neg(atom(presence(p, a))), atom(singleton(p, a))])


def heads_formula(p: PopulationProtocol, heads: Iterable[Head]) -> Formula:
    """Conjunction of xi over a set of heads (tt for the empty set)."""
    return conj([xi(p, h) for h in sorted(set(heads))])


def config_satisfies(p: PopulationProtocol, c: Configuration, f: Formula) -> bool:
    tag = f[0]
    if tag == "tt":
        return True
    if tag == "ff":
        return False
    if tag == "atom":
        a = f[1]
        if a.kind == PRESENCE:
            return c.counts[a.index] > 0
        if a.kind == SINGLETON:
            return c.counts[a.index] == 1
        # Out_x: every populated state outputs x.
        return all(
            p.output(s) == a.index for s, k in enumerate(c.counts) if k > 0
        )
    if tag == "not":
        return not config_satisfies(p, c, f[1])
    if tag == "implies":
        return (not config_satisfies(p, c, f[1])) or config_satisfies(p, c, f[2])
    if tag == "and":
        return all(config_satisfies(p, c, g) for g in f[1])
    if tag == "or":
        return any(config_satisfies(p, c, g) for g in f[1])
    raise ValueError(f"bad formula node {f!r}")


def pretty(f: Formula) -> str:
    """Infix rendering: atoms `A`/`A!`, operators `!`, `&`, `|`, `=>`."""

    def go(g: Formula, parent: str) -> str:
        tag = g[0]
        if tag == "tt":
            return "true"
        if tag == "ff":
            return "false"
        if tag == "atom":
            return g[1].name
        if tag == "not":
            inner = go(g[1], "not")
            return f"!{inner}"
        if tag == "and":
            s = " & ".join(go(x, "and") for x in g[1])
            return f"({s})" if parent in ("not", "or", "implies") else s
        if tag == "or":
            s = " | ".join(go(x, "or") for x in g[1])
            return f"({s})" if parent in ("not", "and", "implies") else s
        if tag == "implies":
            s = f"{go(g[1], 'implies')} => {go(g[2], 'implies')}"
            return f"({s})" if parent != "top" else s
        raise ValueError(f"bad formula node {g!r}")

    return go(f, "top")
