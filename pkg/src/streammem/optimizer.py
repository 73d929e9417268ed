"""Budgeted retention: utility scoring, admission, and the eviction loop.

Utilities are always computed on demand from a node's access counters, so
there is no cached value to go stale. When the stored cost exceeds the
budget, validity is restored by repeating three passes until the budget
holds: evict the node with minimal utility density (utility per token),
collapse near-duplicate sibling AMUs into a centroid node, and remove
events and scenes left without descendants.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

from .config import UtilityParams
from .distillation import PendingNodes, nearest_amu, novelty_check
from .errors import PreconditionError
from .hierarchy import Hierarchy, Level, MemoryNode
from .types import normalize, token_cost

UtilityFn = Callable[[MemoryNode], float]


def utility(node: MemoryNode, now: int, p: UtilityParams) -> float:
    """Retention utility: log-frequency prior plus exponential recency decay."""
    if now < node.last_touch:
        raise PreconditionError(
            f"utility evaluated at turn {now} before node {node.id} last_touch"
        )
    return p.alpha * math.log(node.freq + 1) + p.beta * math.exp(
        -(now - node.last_touch) / p.tau
    )


@dataclass
class PruneReport:
    """Audit record of one optimization pass."""

    admitted_ids: list[int] = field(default_factory=list)
    pruned_ids: list[int] = field(default_factory=list)
    merged_pairs: list[tuple[int, int, int]] = field(default_factory=list)
    cascaded_ids: list[int] = field(default_factory=list)
    utility_before: float = 0.0
    utility_after: float = 0.0
    cost_before: int = 0
    cost_after: int = 0
    # (id, utility, cost) of every node present before enforcement, and of
    # the survivors; consumed by offline regret reporting.
    candidates: list[tuple[int, float, int]] = field(default_factory=list)
    retained: list[tuple[int, float, int]] = field(default_factory=list)

    @property
    def mutated(self) -> bool:
        return bool(self.pruned_ids or self.merged_pairs or self.cascaded_ids)

    def to_dict(self, turn: int | None = None, t_max: int | None = None) -> dict:
        data = {
            "admitted": self.admitted_ids,
            "pruned": self.pruned_ids,
            "merged": [list(t) for t in self.merged_pairs],
            "cascaded": self.cascaded_ids,
            "utility_before": self.utility_before,
            "utility_after": self.utility_after,
            "cost_before": self.cost_before,
            "cost_after": self.cost_after,
            "candidates": [list(t) for t in self.candidates],
            "retained": [list(t) for t in self.retained],
        }
        if turn is not None:
            data["turn"] = turn
        if t_max is not None:
            data["t_max"] = t_max
        return data


def victim_order_key(density: float, cost: int, node_id: int) -> tuple:
    """Eviction priority: lowest density, then larger cost, then older id."""
    return (density, -cost, node_id)


def admit(
    h: Hierarchy,
    pending: PendingNodes,
    now: int,
    p: UtilityParams,
) -> list[int]:
    """Mount a distilled block: resolve the scene, create the event, gate AMUs.

    An incoming scene label joins an existing scene when the labels match
    case-insensitively or their embeddings meet the concept threshold.
    Candidates failing the novelty gate are not mounted; their nearest
    existing AMU is touched instead, so repeated mention still counts.
    Plugin-free by construction: all embeddings arrive with the pending block.
    """
    if pending.admitted:
        raise PreconditionError("pending block was already admitted")
    mounted: list[int] = []
    scene_id = _resolve_scene(h, pending.scene_label, pending.scene_embedding, p.theta_concept)
    if scene_id is None:
        scene_id = h.insert(
            Level.SCENE,
            pending.scene_label,
            pending.scene_embedding,
            token_cost(pending.scene_label),
            last_touch=now,
        )
        mounted.append(scene_id)

    event_id = h.insert(
        Level.EVENT,
        pending.event_label,
        pending.event_embedding,
        token_cost(pending.event_label),
        parent=scene_id,
        last_touch=now,
    )
    mounted.append(event_id)

    # Surface form -> node id, for resolving relations after the gate.
    resolved: dict[str, int] = {}
    for cand in pending.amu_candidates:
        if novelty_check(cand.embedding, h, p.theta_concept):
            node_id = h.insert(
                Level.AMU,
                cand.surface,
                cand.embedding,
                token_cost(cand.surface),
                parent=event_id,
                last_touch=now,
            )
            mounted.append(node_id)
        else:
            node_id = nearest_amu(cand.embedding, h)
            h.touch(node_id, now)
        resolved[cand.surface] = node_id

    for cand in pending.amu_candidates:
        node = h.node(resolved[cand.surface])
        if node.id not in mounted:
            continue
        for relation, peer_surface in cand.relations:
            link = (relation, resolved[peer_surface])
            if link not in node.relations:
                node.relations.append(link)

    pending.admitted = True
    return mounted


def _resolve_scene(
    h: Hierarchy, label: str, embedding, theta_concept: float
) -> int | None:
    ids, matrix = h.embedding_matrix(Level.SCENE)
    h.note_examined(len(ids))
    if not ids:
        return None
    lowered = label.lower()
    for nid in ids:
        if h.nodes[nid].label.lower() == lowered:
            return nid
    sims = matrix @ embedding
    best = int(sims.argmax())
    if float(sims[best]) >= theta_concept:
        return ids[best]
    return None


def enforce_budget(
    h: Hierarchy,
    now: int,
    p: UtilityParams,
    utility_fn: UtilityFn | None = None,
    pass_order: tuple[str, ...] = ("prune", "merge", "cascade"),
) -> PruneReport:
    """Restore the token budget; no-op (and no mutation) when already under it.

    Each loop iteration applies, in ``pass_order``: one least-regret
    eviction, a merge sweep over events whose membership changed, and a
    cascade removing childless events and scenes. An unsatisfiable budget
    empties the hierarchy, which is a valid outcome, not an error.
    """
    ufn = utility_fn or (lambda node: utility(node, now, p))
    report = PruneReport(cost_before=h.total_cost, cost_after=h.total_cost)
    report.candidates = [
        (nid, ufn(node), node.cost) for nid, node in sorted(h.nodes.items())
    ]
    report.utility_before = sum(u for _, u, _ in report.candidates)
    if h.total_cost <= p.t_max:
        report.utility_after = report.utility_before
        report.retained = list(report.candidates)
        return report

    heap: list[tuple[float, int, int]] = []
    for nid, node in h.nodes.items():
        if _prunable(node):
            heapq.heappush(heap, victim_order_key(ufn(node) / node.cost, node.cost, nid))
    h.note_examined(len(h.nodes))

    passes = {
        "prune": lambda: _prune_one(h, heap, report),
        "merge": lambda: _merge_pass(h, now, p, ufn, heap, report),
        "cascade": lambda: _cascade_pass(h, report),
    }
    rebuilt = False
    while h.total_cost > p.t_max and h.nodes:
        nodes_before = len(h.nodes)
        for name in pass_order:
            passes[name]()
        if len(h.nodes) == nodes_before and h.total_cost > p.t_max:
            # Every live leaf should carry a heap entry; rebuilding once
            # guards the loop against that invariant ever breaking.
            if rebuilt:
                raise RuntimeError("budget enforcement stalled over budget")
            for nid, node in h.nodes.items():
                if _prunable(node):
                    heapq.heappush(
                        heap, victim_order_key(ufn(node) / node.cost, node.cost, nid)
                    )
            rebuilt = True

    report.cost_after = h.total_cost
    report.retained = [
        (nid, ufn(node), node.cost) for nid, node in sorted(h.nodes.items())
    ]
    report.utility_after = sum(u for _, u, _ in report.retained)
    return report


def _prunable(node: MemoryNode) -> bool:
    return node.level is Level.AMU or not node.children


def _prune_one(h: Hierarchy, heap: list, report: PruneReport) -> None:
    while heap:
        _, _, nid = heapq.heappop(heap)
        h.note_examined(1)
        node = h.nodes.get(nid)
        if node is None or not _prunable(node):
            continue
        h.remove_subtree(nid)
        report.pruned_ids.append(nid)
        return


def _merge_pass(
    h: Hierarchy,
    now: int,
    p: UtilityParams,
    ufn: UtilityFn,
    heap: list,
    report: PruneReport,
) -> None:
    # Pruning never creates a qualifying pair (embeddings are immutable and
    # removal only shrinks the sibling set), so only events whose AMU
    # membership changed since the last sweep need rescanning.
    for event_id in sorted(h.dirty_events):
        if event_id not in h.nodes:
            continue
        while True:
            pair = _find_merge_pair(h, event_id, p.theta_sim)
            if pair is None:
                break
            new_id = _merge(h, now, ufn, event_id, *pair)
            report.merged_pairs.append((pair[0], pair[1], new_id))
            node = h.nodes[new_id]
            heapq.heappush(
                heap, victim_order_key(ufn(node) / node.cost, node.cost, new_id)
            )
    h.dirty_events.clear()


def _find_merge_pair(h: Hierarchy, event_id: int, theta_sim: float) -> tuple[int, int] | None:
    ids = sorted(h.nodes[event_id].children)
    h.note_examined(len(ids) * max(0, len(ids) - 1) // 2)
    for i, a in enumerate(ids):
        emb_a = h.nodes[a].embedding
        for b in ids[i + 1:]:
            if float(emb_a @ h.nodes[b].embedding) >= theta_sim:
                return a, b
    return None


def _merge(h: Hierarchy, now: int, ufn: UtilityFn, event_id: int, a: int, b: int) -> int:
    """Collapse two sibling AMUs into a fresh centroid node."""
    na, nb = h.nodes[a], h.nodes[b]
    ua, ub = ufn(na), ufn(nb)
    keeper = na if (ua, -na.id) >= (ub, -nb.id) else nb
    relations = list(na.relations)
    relations.extend(r for r in nb.relations if r not in relations)
    embedding = normalize(na.embedding + nb.embedding)
    freq = na.freq + nb.freq
    last_touch = max(na.last_touch, nb.last_touch)
    cost = max(na.cost, nb.cost)
    label = keeper.label
    h.remove_subtree(a)
    h.remove_subtree(b)
    return h.insert(
        Level.AMU,
        label,
        embedding,
        cost,
        parent=event_id,
        freq=freq,
        last_touch=last_touch,
        relations=relations,
    )


def _cascade_pass(h: Hierarchy, report: PruneReport) -> None:
    while True:
        empty = sorted(
            nid
            for nid, node in h.nodes.items()
            if node.level is not Level.AMU and not node.children
        )
        h.note_examined(sum(1 for n in h.nodes.values() if n.level is not Level.AMU))
        if not empty:
            return
        for nid in empty:
            if nid in h.nodes:
                h.remove_subtree(nid)
                report.cascaded_ids.append(nid)


def step(
    h: Hierarchy,
    pending_queue: list[PendingNodes],
    now: int,
    p: UtilityParams,
    utility_fn: UtilityFn | None = None,
    pass_order: tuple[str, ...] = ("prune", "merge", "cascade"),
) -> PruneReport:
    """Per-flush optimization: admit all pending blocks, then enforce budget."""
    admitted: list[int] = []
    for pending in list(pending_queue):
        admitted.extend(admit(h, pending, now, p))
    pending_queue.clear()
    report = enforce_budget(h, now, p, utility_fn=utility_fn, pass_order=pass_order)
    report.admitted_ids = admitted
    return report
