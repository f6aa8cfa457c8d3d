"""Per-agent private execution state and deterministic issue detection.

The private state is updated only on trigger events (init, verified action
outcomes, recovery-mode entry, mode-level resets) and never from another
agent's unverified claims. Replaying the same ordered events always rebuilds
the same state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .world import Inventory, Position, TaskGraph, VerifiedOutcome, WorldView, dist_sq


class IssueType(str, Enum):
    MISSING_MATERIAL = "missing_material"
    SUPPORT_FAILURE = "support_failure"
    DEPENDENCY_BLOCK = "dependency_block"
    TRANSFER_NEEDED = "transfer_needed"
    CO_CRAFT_REQUIRED = "co_craft_required"


# Detection priority when several classes match at once (highest first).
ISSUE_PRIORITY = (
    IssueType.DEPENDENCY_BLOCK,
    IssueType.CO_CRAFT_REQUIRED,
    IssueType.TRANSFER_NEEDED,
    IssueType.MISSING_MATERIAL,
    IssueType.SUPPORT_FAILURE,
)

# Issues where the blockage is literally a missing item in hand; only these
# clear when a verified inventory gain covers the requirement.
MATERIAL_SHAPED_ISSUES = (
    IssueType.MISSING_MATERIAL,
    IssueType.TRANSFER_NEEDED,
    IssueType.CO_CRAFT_REQUIRED,
)


@dataclass
class BlockageRecord:
    issue: IssueType
    node_id: int
    item: str | None = None  # missing item, when the issue is material-shaped
    count: int = 0
    detected_at: int = 0

    def to_dict(self) -> dict:
        return {
            "issue": self.issue.value,
            "node_id": self.node_id,
            "item": self.item,
            "count": self.count,
            "detected_at": self.detected_at,
        }


@dataclass
class HistoryEntry:
    """Compressed summary of one verified outcome kept in bounded history."""

    kind: str
    status: str
    reason: str | None
    sim_time: int
    node_id: int | None = None


@dataclass
class TaskFocus:
    """T_t: the active subtask plus its unfinished material requirements."""

    active_subtask: int | None = None  # node id
    unfinished_requirements: dict[str, int] = field(default_factory=dict)


@dataclass
class PrivateState:
    """m_priv = <inventory, task focus, position, blockage, bounded history>."""

    agent_id: str
    inventory: Inventory = field(default_factory=Inventory)
    task: TaskFocus = field(default_factory=TaskFocus)
    position: Position = (0, 0, 0)
    blockage: BlockageRecord | None = None
    history: list[HistoryEntry] = field(default_factory=list)
    h_max: int = 8

    def _push_history(self, entry: HistoryEntry) -> None:
        self.history.append(entry)
        if len(self.history) > self.h_max:
            del self.history[: len(self.history) - self.h_max]


@dataclass(frozen=True)
class StateEvent:
    """A private-state trigger event.

    kind: "init" | "outcome" | "recovery_entry" | "mode_reset"
    The event carries everything the update needs, so a replay of the same
    ordered events reconstructs the same state.
    """

    kind: str
    view: WorldView | None = None
    outcome: VerifiedOutcome | None = None
    target_node: int | None = None
    requirements: dict[str, int] | None = None
    reason: str | None = None


def update_private_state(state: PrivateState, event: StateEvent) -> PrivateState:
    """Apply one trigger event in place and return the state."""
    if event.kind == "init":
        view = event.view
        if view is None:
            raise ValueError("init event requires a view")
        state.inventory = view.inventory.copy()
        state.position = view.position
        state.task = TaskFocus()
        state.blockage = None
        state.history = []
        return state

    if event.kind == "outcome":
        out = event.outcome
        if out is None:
            raise ValueError("outcome event requires a VerifiedOutcome")
        deltas = out.deltas or {}
        inv_deltas = deltas.get("inventory", {}).get(state.agent_id)
        if inv_deltas:
            for item, n in inv_deltas.items():
                if n >= 0:
                    state.inventory.add(item, n)
                else:
                    state.inventory.remove(item, -n)
        pos_delta = deltas.get("position", {}).get(state.agent_id)
        if pos_delta:
            state.position = tuple(pos_delta[1])
        state._push_history(
            HistoryEntry(kind=out.kind, status=out.status, reason=out.reason,
                         sim_time=out.sim_time, node_id=out.node_id)
        )
        if out.ok and out.kind == "place" and out.node_id is not None:
            if state.blockage and state.blockage.node_id == out.node_id:
                state.blockage = None
            if state.task.active_subtask == out.node_id:
                state.task.active_subtask = None
        if state.blockage and state.blockage.item and state.blockage.issue in MATERIAL_SHAPED_ISSUES:
            # A verified inventory gain can satisfy the missing requirement.
            if state.inventory.count(state.blockage.item) >= max(1, state.blockage.count):
                state.blockage = None
        return state

    if event.kind == "recovery_entry":
        state._push_history(
            HistoryEntry(kind="recovery_entry", status="success", reason=event.reason, sim_time=0)
        )
        return state

    if event.kind == "mode_reset":
        if event.target_node is not None:
            state.task.active_subtask = event.target_node
            state.task.unfinished_requirements = dict(event.requirements or {})
        if event.reason == "clear_blockage":
            state.blockage = None
        return state

    raise ValueError(f"unknown state event kind {event.kind!r}")


def _local_route_exists(view: WorldView, state: PrivateState, item: str, recipes, far_threshold: int) -> bool:
    """True if the agent could plausibly obtain `item` without a teammate:
    a visible source/chest within far_threshold, or a recipe whose every input
    is either held or collectable from a nearby source/chest."""
    far_sq = far_threshold * far_threshold
    for _, src in view.sources:
        if src.item == item and src.remaining > 0 and dist_sq(view.position, src.position) <= far_sq:
            return True
    for _, chest in view.chests:
        if chest.inventory.count(item) > 0 and dist_sq(view.position, chest.position) <= far_sq:
            return True
    for recipe in recipes.producing(item):
        if all(
            state.inventory.count(i) >= n or _any_source_for(view, i, far_threshold)
            for i, n in recipe.inputs
        ):
            return True
    return False


def detect_issue(
    state: PrivateState,
    view: WorldView,
    graph: TaskGraph,
    recipes,
    far_threshold: int = 40,
    last_outcome: VerifiedOutcome | None = None,
    ignore: set[int] | frozenset[int] = frozenset(),
) -> BlockageRecord | None:
    """Classify the agent's current blockage, if any.

    Exactly one issue class is returned, chosen by the fixed priority
    dependency_block > co_craft_required > transfer_needed > missing_material
    > support_failure. Returns None when execution can proceed normally.
    Nodes in `ignore` (e.g. formally abandoned ones) never trigger detection.
    """
    materials = view.plan.materials
    placed = _placed_nodes(view)
    mine = sorted(
        n for n, a in view.plan.assignments.items()
        if a == view.agent_id and n not in placed and n not in ignore
    )

    # dependency_block: nothing of mine is ready, and some unplaced node of mine
    # waits on a teammate-assigned (or unassigned) prerequisite.
    ready = [n for n in mine if all(p in placed for p in graph.preds[n])]
    if mine and not ready:
        for n in mine:
            for p in graph.preds[n]:
                if p in placed or p in ignore:
                    continue
                if view.plan.assignments.get(p, view.agent_id) != view.agent_id:
                    return BlockageRecord(
                        issue=IssueType.DEPENDENCY_BLOCK, node_id=p,
                        item=materials.get(p), count=1, detected_at=view.sim_time,
                    )

    target = state.task.active_subtask
    if target is None or target in placed or target in ignore:
        target = ready[0] if ready else None
    if target is None:
        return None

    material = materials[target]
    if state.inventory.count(material) < 1:
        # co_craft_required: every recipe route needs a station that sits only in
        # teammates' work regions.
        producing = recipes.producing(material)
        if producing and not _any_source_for(view, material, far_threshold):
            stations = {r.station for r in producing if r.station}
            if stations and all(
                _station_owner(view, s) not in (None, view.agent_id) for s in sorted(stations)
            ):
                return BlockageRecord(
                    issue=IssueType.CO_CRAFT_REQUIRED, node_id=target,
                    item=material, count=1, detected_at=view.sim_time,
                )
        # transfer_needed: the item exists only in a teammate-designated partition.
        owner = view.plan.partition.get(material)
        if owner is not None and owner != view.agent_id:
            if not _local_route_exists(view, state, material, recipes, far_threshold):
                return BlockageRecord(
                    issue=IssueType.TRANSFER_NEEDED, node_id=target,
                    item=material, count=1, detected_at=view.sim_time,
                )
        return BlockageRecord(
            issue=IssueType.MISSING_MATERIAL, node_id=target,
            item=material, count=1, detected_at=view.sim_time,
        )

    if (
        last_outcome is not None
        and last_outcome.kind == "place"
        and last_outcome.status == "failure"
        and last_outcome.reason == "prerequisite_unplaced"
        and last_outcome.node_id is not None
    ):
        node = last_outcome.node_id
        if node not in ignore and view.plan.assignments.get(node) == view.agent_id:
            unplaced_preds = [p for p in graph.preds[node] if p not in placed]
            if unplaced_preds and all(
                view.plan.assignments.get(p, view.agent_id) == view.agent_id for p in unplaced_preds
            ):
                return BlockageRecord(
                    issue=IssueType.SUPPORT_FAILURE, node_id=node,
                    item=materials.get(node), count=1, detected_at=view.sim_time,
                )
    return None


def _placed_nodes(view: WorldView) -> set[int]:
    placed = set()
    for node_id, mat in view.plan.materials.items():
        pos = view.plan.node_positions.get(node_id)
        if pos is not None and view.placed.get(pos) == mat:
            placed.add(node_id)
    return placed


def _any_source_for(view: WorldView, item: str, far_threshold: int) -> bool:
    far_sq = far_threshold * far_threshold
    for _, src in view.sources:
        if src.item == item and src.remaining > 0 and dist_sq(view.position, src.position) <= far_sq:
            return True
    for _, chest in view.chests:
        if chest.inventory.count(item) > 0 and dist_sq(view.position, chest.position) <= far_sq:
            return True
    return False


def _station_owner(view: WorldView, station: str) -> str | None:
    """Which agent's work region contains a station of this kind (smallest id wins);
    None if no station is visible or it sits in unclaimed ground."""
    positions = [pos for pos, mat in view.plan.station_positions.items() if mat == station]
    for pos in sorted(positions):
        for aid in sorted(view.plan.work_regions):
            center, radius = view.plan.work_regions[aid]
            if dist_sq(pos, center) <= radius * radius:
                return aid
    return None


def render_decision_card(
    blockage: BlockageRecord,
    features: dict[str, int],
    score_norm: float,
    local_candidates: list[str],
    escalate_request: dict,
) -> str:
    """Serialize the adjudicator request card. Byte-identical for identical inputs;
    carries no history dump or free text."""
    card = {
        "issue": blockage.issue.value,
        "features": {k: features[k] for k in ("C", "R", "I", "L", "H")},
        "score_norm": score_norm,
        "missing": {"item": blockage.item, "count": blockage.count},
        "candidates": {
            "local": list(local_candidates),
            "escalate_request": dict(escalate_request),
        },
    }
    return json.dumps(card, sort_keys=True, separators=(",", ":"))
