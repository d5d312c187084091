"""Attack-defense trees.

Semantics: an attack leaf holds when it is in the satisfied set, a defense
leaf when it is in the active set. An inner node combines its same-kind
children with OR (disjunctive) or AND (conjunctive). Countermeasures are
opposite-kind nodes attached to a node; if any of them holds, the node is
negated. So a defense is switched off by a successful attack hanging under
it, and an attack is blocked by a working defense.

Nodes are stored by id and may be shared (a DAG), so one real-world
measure can counter several attacks. Cycles are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import CatalogError, load_json

ATTACK, DEFENSE = "attack", "defense"
OR, AND = "disjunctive", "conjunctive"
ENUMERATION_CAP = 20


class AdtError(CatalogError):
    pass


@dataclass
class AdtNode:
    id: str
    label: str
    kind: str
    refinement: str = OR
    children: list[str] = field(default_factory=list)
    countermeasures: list[str] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


class AttackDefenseTree:
    def __init__(self, nodes, root: str):
        self.nodes: dict[str, AdtNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise AdtError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.root = root
        self._validate()

    def _validate(self) -> None:
        if self.root not in self.nodes:
            raise AdtError(f"root {self.root!r} not defined")
        if self.nodes[self.root].kind != ATTACK:
            raise AdtError("root must be an attack node")
        for n in self.nodes.values():
            if n.kind not in (ATTACK, DEFENSE):
                raise AdtError(f"{n.id}: kind must be attack or defense")
            if n.refinement not in (OR, AND):
                raise AdtError(f"{n.id}: refinement must be disjunctive or conjunctive")
            for c in n.children + n.countermeasures:
                if c not in self.nodes:
                    raise AdtError(f"{n.id}: references unknown node {c!r}")
            for c in n.children:
                if self.nodes[c].kind != n.kind:
                    raise AdtError(f"{n.id}: child {c} must be a {n.kind} node")
            for c in n.countermeasures:
                if self.nodes[c].kind == n.kind:
                    raise AdtError(f"{n.id}: countermeasure {c} must be of the opposite kind")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}

        def visit(nid, path):
            s = state.get(nid)
            if s == 1:
                raise AdtError("cycle detected: " + " -> ".join(path + [nid]))
            if s == 2:
                return
            state[nid] = 1
            n = self.nodes[nid]
            for c in n.children + n.countermeasures:
                visit(c, path + [nid])
            state[nid] = 2

        for nid in self.nodes:
            visit(nid, [])

    def reachable(self) -> list[str]:
        seen, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.append(nid)
            n = self.nodes[nid]
            stack.extend(reversed(n.children + n.countermeasures))
        return seen

    def attack_leaves(self) -> list[str]:
        return sorted(i for i in self.reachable()
                      if self.nodes[i].kind == ATTACK and self.nodes[i].is_leaf)

    def defense_leaves(self) -> list[str]:
        return sorted(i for i in self.reachable()
                      if self.nodes[i].kind == DEFENSE and self.nodes[i].is_leaf)

    # -- serialization

    @classmethod
    def from_dict(cls, data: dict) -> "AttackDefenseTree":
        """Schema: ``{"root": id, "nodes": [{"id", "label", "kind", "refinement",
        "children": [id], "countermeasures": [id]}]}``."""
        if not isinstance(data, dict) or "root" not in data or not isinstance(data.get("nodes"), list):
            raise AdtError("ADT document needs 'root' and a 'nodes' list")
        nodes = []
        for d in data["nodes"]:
            try:
                nodes.append(AdtNode(
                    id=d["id"], label=d.get("label", d["id"]), kind=d["kind"],
                    refinement=d.get("refinement", OR),
                    children=list(d.get("children", [])),
                    countermeasures=list(d.get("countermeasures", [])),
                ))
            except (KeyError, TypeError):
                raise AdtError(f"malformed ADT node {d!r}") from None
        return cls(nodes, data["root"])

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "nodes": [
                {"id": n.id, "label": n.label, "kind": n.kind, "refinement": n.refinement,
                 "children": list(n.children), "countermeasures": list(n.countermeasures)}
                for n in self.nodes.values()
            ],
        }


def load_adt(path=None) -> AttackDefenseTree:
    """Load an ADT file, or the bundled tree ``demis_adt.json``."""
    return AttackDefenseTree.from_dict(load_json(path, "demis_adt.json"))


def _check_sets(tree: AttackDefenseTree, attacks, defenses) -> None:
    bad = set(attacks) - set(tree.attack_leaves())
    if bad:
        raise AdtError(f"unknown attack leaf id(s): {sorted(bad)}")
    bad = set(defenses) - set(tree.defense_leaves())
    if bad:
        raise AdtError(f"unknown defense leaf id(s): {sorted(bad)}")


def adt_evaluate(tree: AttackDefenseTree, satisfied_attacks=(), active_defenses=()) -> bool:
    """True when the root attack goal is reached."""
    satisfied_attacks, active_defenses = set(satisfied_attacks), set(active_defenses)
    _check_sets(tree, satisfied_attacks, active_defenses)
    memo: dict[str, bool] = {}

    def value(nid: str) -> bool:
        if nid in memo:
            return memo[nid]
        n = tree.nodes[nid]
        if n.is_leaf:
            v = nid in (satisfied_attacks if n.kind == ATTACK else active_defenses)
        else:
            vals = [value(c) for c in n.children]
            v = all(vals) if n.refinement == AND else any(vals)
        if v and any(value(c) for c in n.countermeasures):
            v = False
        memo[nid] = v
        return v

    return value(tree.root)


def truth_table(tree: AttackDefenseTree, universe, active_defenses=()) -> np.ndarray:
    """Root value for every subset of ``universe`` (bit i of the index = universe[i])."""
    universe = list(universe)
    n = len(universe)
    if n > ENUMERATION_CAP:
        raise AdtError(f"{n} attack leaves exceed the enumeration cap of {ENUMERATION_CAP}")
    _check_sets(tree, universe, active_defenses)
    active = set(active_defenses)
    idx = np.arange(1 << n, dtype=np.int64)
    leaf_bits = {leaf: ((idx >> i) & 1).astype(bool) for i, leaf in enumerate(universe)}
    false = np.zeros(1 << n, dtype=bool)
    true = ~false
    memo: dict[str, np.ndarray] = {}

    def value(nid):
        if nid in memo:
            return memo[nid]
        node = tree.nodes[nid]
        if node.is_leaf:
            if node.kind == ATTACK:
                v = leaf_bits.get(nid, false)
            else:
                v = true if nid in active else false
        else:
            vals = np.stack([value(c) for c in node.children])
            v = vals.all(axis=0) if node.refinement == AND else vals.any(axis=0)
        for c in node.countermeasures:
            v = v & ~value(c)
        memo[nid] = v
        return v

    return value(tree.root)


def adt_enumerate(tree: AttackDefenseTree, universe=None, active_defenses=()) -> set[frozenset]:
    """All minimal sets of attack leaves (from ``universe``) that compromise the root."""
    universe = sorted(tree.attack_leaves() if universe is None else set(universe))
    table = truth_table(tree, universe, active_defenses)
    minimal = table.copy()
    idx = np.arange(table.size)
    for i in range(len(universe)):
        has = ((idx >> i) & 1).astype(bool)
        without = table[idx & ~(1 << i)]
        minimal &= ~(has & without)
    return {frozenset(universe[i] for i in range(len(universe)) if m >> i & 1)
            for m in np.flatnonzero(minimal)}
