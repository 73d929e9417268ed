"""The bounded Scene/Event/AMU forest and its budget accounting.

Nodes live in a flat id map with parent/children links. Ids grow
monotonically and are never reused, so audit logs stay unambiguous.
The cached total cost covers every level: scene and event summaries
spend tokens just like the atomic facts below them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError, NotFoundError, PreconditionError, StructuralError


class Level(IntEnum):
    """Hierarchy layers; child level is exactly one below its parent."""

    AMU = 1
    EVENT = 2
    SCENE = 3


LEVEL_NAMES = {Level.SCENE: "scene", Level.EVENT: "event", Level.AMU: "amu"}
LEVEL_BY_NAME = {v: k for k, v in LEVEL_NAMES.items()}


@dataclass
class MemoryNode:
    id: int
    level: Level
    label: str
    embedding: np.ndarray
    cost: int
    freq: int = 0
    last_touch: int = 0
    relations: list[tuple[str, int]] = field(default_factory=list)
    parent: int | None = None
    children: set[int] = field(default_factory=set)


class Hierarchy:
    """Forest store with O(1) id lookup and cached cost accounting."""

    def __init__(self, budget: int, dim: int):
        if budget < 0:
            raise ConfigError(f"budget must be >= 0, got {budget}")
        if dim < 1:
            raise ConfigError(f"embedding dimension must be >= 1, got {dim}")
        self.budget = budget
        self.dim = dim
        self.nodes: dict[int, MemoryNode] = {}
        self.roots: set[int] = set()
        self.total_cost = 0
        self.next_id = 1
        # Events whose AMU membership changed since the last merge scan.
        self.dirty_events: set[int] = set()
        # Nodes examined since the last reset; drives the bounded-work check.
        self.examined = 0
        self._matrix_cache: dict[Level, tuple[list[int], np.ndarray] | None] = {
            Level.SCENE: None,
            Level.EVENT: None,
            Level.AMU: None,
        }

    # -- basic accessors -------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> MemoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NotFoundError(f"no node with id {node_id}") from None

    def ids_at(self, level: Level) -> list[int]:
        return sorted(nid for nid, n in self.nodes.items() if n.level == level)

    def embedding_matrix(self, level: Level) -> tuple[list[int], np.ndarray]:
        """Ids (ascending) and stacked embeddings for one level; cached."""
        cached = self._matrix_cache[level]
        if cached is None:
            ids = self.ids_at(level)
            if ids:
                matrix = np.stack([self.nodes[i].embedding for i in ids])
            else:
                matrix = np.empty((0, self.dim))
            cached = (ids, matrix)
            self._matrix_cache[level] = cached
        return cached

    def note_examined(self, n: int) -> None:
        self.examined += n

    # -- mutations --------------------------------------------------------

    def insert(
        self,
        level: Level,
        label: str,
        embedding: np.ndarray,
        cost: int,
        parent: int | None = None,
        freq: int = 0,
        last_touch: int = 0,
        relations: list[tuple[str, int]] | None = None,
    ) -> int:
        """Insert a node, link it under ``parent``, and return its new id."""
        if cost < 1:
            raise StructuralError(f"node cost must be >= 1, got {cost}")
        embedding = np.asarray(embedding, dtype=np.float64)
        if embedding.shape != (self.dim,):
            raise ConfigError(
                f"embedding has shape {embedding.shape}, engine dimension is {self.dim}"
            )
        if relations and level is not Level.AMU:
            raise StructuralError("relations are only stored on AMU nodes")
        if parent is None:
            if level is not Level.SCENE:
                raise StructuralError(
                    f"{LEVEL_NAMES[level]} node requires a parent one level up"
                )
        else:
            parent_node = self.node(parent)
            if parent_node.level != level + 1:
                raise StructuralError(
                    f"cannot attach {LEVEL_NAMES[level]} under "
                    f"{LEVEL_NAMES[parent_node.level]} (id {parent})"
                )
        node_id = self.next_id
        self.next_id += 1
        node = MemoryNode(
            id=node_id,
            level=level,
            label=label,
            embedding=embedding,
            cost=cost,
            freq=freq,
            last_touch=last_touch,
            relations=list(relations or []),
            parent=parent,
        )
        self.nodes[node_id] = node
        if parent is None:
            self.roots.add(node_id)
        else:
            self.nodes[parent].children.add(node_id)
            if level is Level.AMU:
                self.dirty_events.add(parent)
        self.total_cost += cost
        self._matrix_cache[level] = None
        return node_id

    def touch(self, node_id: int, now: int) -> None:
        """Record one access: bump freq, advance last_touch."""
        node = self.node(node_id)
        if now < node.last_touch:
            raise PreconditionError(
                f"touch at turn {now} precedes node {node_id} last_touch "
                f"{node.last_touch}"
            )
        node.freq += 1
        node.last_touch = now

    def remove_subtree(self, node_id: int) -> list[int]:
        """Remove a node and all descendants; returns removed ids in DFS order."""
        root = self.node(node_id)
        removed: list[int] = []
        stack = [node_id]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            removed.append(nid)
            stack.extend(sorted(node.children, reverse=True))
        for nid in removed:
            node = self.nodes.pop(nid)
            self.total_cost -= node.cost
            self._matrix_cache[node.level] = None
            if node.level is Level.EVENT:
                self.dirty_events.discard(nid)
        if root.parent is not None and root.parent in self.nodes:
            self.nodes[root.parent].children.discard(node_id)
            if root.level is Level.AMU:
                self.dirty_events.add(root.parent)
        self.roots.discard(node_id)
        return removed

    # -- snapshot support --------------------------------------------------

    @classmethod
    def restore(
        cls,
        budget: int,
        dim: int,
        nodes: list[MemoryNode],
        next_id: int,
        dirty_events: set[int],
    ) -> "Hierarchy":
        """Rebuild a hierarchy with its original ids from snapshot state."""
        h = cls(budget, dim)
        for node in nodes:
            h.nodes[node.id] = node
            if node.parent is None:
                h.roots.add(node.id)
        h.total_cost = h.recomputed_cost()
        h.next_id = next_id
        h.dirty_events = set(dirty_events)
        h.validate()
        return h

    # -- integrity helpers (used by tests and snapshot load) --------------

    def recomputed_cost(self) -> int:
        return sum(n.cost for n in self.nodes.values())

    def validate(self) -> None:
        """Raise StructuralError if any structural invariant is broken."""
        if self.total_cost != self.recomputed_cost():
            raise StructuralError(
                f"cached total_cost {self.total_cost} != recomputed "
                f"{self.recomputed_cost()}"
            )
        for nid, node in self.nodes.items():
            if node.parent is None:
                if node.level is not Level.SCENE or nid not in self.roots:
                    raise StructuralError(f"non-scene root or unregistered root {nid}")
            else:
                parent = self.nodes.get(node.parent)
                if parent is None:
                    raise StructuralError(f"node {nid} has missing parent {node.parent}")
                if parent.level != node.level + 1:
                    raise StructuralError(f"level mismatch between {nid} and parent")
                if nid not in parent.children:
                    raise StructuralError(f"parent of {nid} does not list it as child")
            for child in node.children:
                if child not in self.nodes or self.nodes[child].parent != nid:
                    raise StructuralError(f"broken child link {nid} -> {child}")
        # Cycle check: every node must reach a root in <= 3 hops.
        for nid, node in self.nodes.items():
            depth, cur = 0, node
            while cur.parent is not None:
                cur = self.nodes[cur.parent]
                depth += 1
                if depth > 3:
                    raise StructuralError(f"node {nid} is not within forest depth")
