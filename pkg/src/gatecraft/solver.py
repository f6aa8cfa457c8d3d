"""Local recovery: deterministic plans, skip targeting, and coordination cooldowns.

Plan search walks a strict cost-kind order (craft, then smelt, then collect,
then detour chains) and returns the first satisfiable route. All costs are
deterministic estimates from distance/speed arithmetic plus per-step constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .memory import BlockageRecord, IssueType, PrivateState
from .world import (
    Position,
    RecipeBook,
    TaskGraph,
    WorldView,
    dist_sq,
    travel_steps,
)

# Preference ranking; RecoveryPlan steps must be non-decreasing in this order.
KIND_RANK = {"craft": 0, "smelt": 1, "collect": 2, "plan_detour": 3}


@dataclass(frozen=True)
class RecoveryStep:
    """One executable recovery leg.

    kind is the plan-level classification (craft/smelt/collect/plan_detour);
    for detour chains every step is kind plan_detour and `op` names the
    micro-action the executor should run for that leg.
    """

    kind: str
    op: str  # "craft" | "smelt" | "collect"
    estimated_cost: int
    recipe_id: str | None = None
    source_ref: tuple | None = None  # ("source", idx) or ("chest", idx, item)
    station: str | None = None
    units: int = 1

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "op": self.op, "estimated_cost": self.estimated_cost, "units": self.units}
        if self.recipe_id:
            d["recipe_id"] = self.recipe_id
        if self.source_ref:
            d["source_ref"] = list(self.source_ref)
        if self.station:
            d["station"] = self.station
        return d


@dataclass
class RecoveryPlan:
    item: str
    count: int
    steps: list[RecoveryStep]

    @property
    def total_cost(self) -> int:
        return sum(s.estimated_cost for s in self.steps)

    def to_dict(self) -> dict:
        return {"item": self.item, "count": self.count, "total_cost": self.total_cost,
                "steps": [s.to_dict() for s in self.steps]}


def _nearest_station(view: WorldView, station: str | None) -> tuple[Position | None, float]:
    if station is None:
        return None, 0.0
    best: Position | None = None
    best_d2 = None
    for pos in sorted(p for p, mat in view.plan.station_positions.items() if mat == station):
        d2 = dist_sq(view.position, pos)
        if best_d2 is None or d2 < best_d2:
            best, best_d2 = pos, d2
    if best is None:
        return None, math.inf
    return best, math.sqrt(best_d2)


def _nearest_supply(view: WorldView, item: str, max_dist: float) -> tuple[tuple | None, float, int]:
    """Closest source/chest holding `item` within max_dist: (ref, distance, available)."""
    best_ref: tuple | None = None
    best_d2 = None
    avail = 0
    for idx, src in view.sources:
        if src.item == item and src.remaining > 0:
            d2 = dist_sq(view.position, src.position)
            if d2 <= max_dist * max_dist and (best_d2 is None or d2 < best_d2):
                best_ref, best_d2, avail = ("source", idx), d2, src.remaining
    for idx, chest in view.chests:
        n = chest.inventory.count(item)
        if n > 0:
            d2 = dist_sq(view.position, chest.position)
            if d2 <= max_dist * max_dist and (best_d2 is None or d2 < best_d2):
                best_ref, best_d2, avail = ("chest", idx, item), d2, n
    if best_ref is None:
        return None, math.inf, 0
    return best_ref, math.sqrt(best_d2), avail


def plan_local_recovery(
    state: PrivateState,
    view: WorldView,
    recipes: RecipeBook,
    blockage: BlockageRecord | None = None,
    interaction_radius: int = 3,
    speed: int = 5,
    far_threshold: int = 40,
) -> RecoveryPlan | None:
    """Cheapest-kind-first plan for the blocked requirement, or None.

    Routes, in strict preference order:
      craft  — a recipe whose inputs are all held (single step)
      smelt  — a smelt recipe whose inputs are held, station within far range
      collect — a visible source/chest of the item within far range
      plan_detour — a collect-inputs-then-craft chain when nothing simpler works
    """
    blockage = blockage or state.blockage
    if blockage is None or not blockage.item:
        return None
    item = blockage.item
    need = max(1, blockage.count)

    # craft (and smelt) directly from held inputs
    for op in ("craft", "smelt"):
        for recipe in recipes.producing(item):
            if recipe.kind != op:
                continue
            if not all(state.inventory.count(i) >= n for i, n in recipe.inputs):
                continue
            station_pos, station_dist = _nearest_station(view, recipe.station)
            if recipe.station is not None and station_pos is None:
                continue
            if station_dist > far_threshold:
                continue
            crafts = math.ceil(need / recipe.output[1])
            cost = travel_steps(station_dist, interaction_radius, speed) + crafts
            return RecoveryPlan(
                item=item, count=need,
                steps=[RecoveryStep(kind=op, op=op, estimated_cost=cost,
                                    recipe_id=recipe.recipe_id, station=recipe.station, units=crafts)],
            )

    # collect the item itself
    ref, dist, avail = _nearest_supply(view, item, far_threshold)
    if ref is not None and avail >= need:
        cost = travel_steps(dist, interaction_radius, speed) + need
        return RecoveryPlan(
            item=item, count=need,
            steps=[RecoveryStep(kind="collect", op="collect", estimated_cost=cost,
                                source_ref=ref, units=need)],
        )

    # detour: gather missing recipe inputs from visible supplies, then craft
    for recipe in recipes.producing(item):
        station_pos, station_dist = _nearest_station(view, recipe.station)
        if recipe.station is not None and station_pos is None:
            continue
        if station_dist > far_threshold:
            continue
        crafts = math.ceil(need / recipe.output[1])
        steps: list[RecoveryStep] = []
        feasible = True
        cursor = view.position
        for inp_item, inp_n in recipe.inputs:
            missing = inp_n * crafts - state.inventory.count(inp_item)
            if missing <= 0:
                continue
            ref, d, avail = _nearest_supply_from(view, cursor, inp_item, far_threshold)
            if ref is None or avail < missing:
                feasible = False
                break
            leg = travel_steps(d, interaction_radius, speed) + missing
            steps.append(RecoveryStep(kind="plan_detour", op="collect", estimated_cost=leg,
                                      source_ref=ref, units=missing))
            cursor = _ref_position(view, ref) or cursor
        if not feasible or not steps:
            continue
        craft_travel = travel_steps(_dist_from(cursor, station_pos), interaction_radius, speed) if station_pos else 0
        steps.append(RecoveryStep(kind="plan_detour", op=recipe.kind, estimated_cost=craft_travel + crafts,
                                  recipe_id=recipe.recipe_id, station=recipe.station, units=crafts))
        return RecoveryPlan(item=item, count=need, steps=steps)

    return None


def _nearest_supply_from(view: WorldView, origin: Position, item: str, max_dist: float):
    best_ref, best_d2, avail = None, None, 0
    for idx, src in view.sources:
        if src.item == item and src.remaining > 0:
            d2 = dist_sq(origin, src.position)
            if d2 <= max_dist * max_dist and (best_d2 is None or d2 < best_d2):
                best_ref, best_d2, avail = ("source", idx), d2, src.remaining
    for idx, chest in view.chests:
        n = chest.inventory.count(item)
        if n > 0:
            d2 = dist_sq(origin, chest.position)
            if d2 <= max_dist * max_dist and (best_d2 is None or d2 < best_d2):
                best_ref, best_d2, avail = ("chest", idx, item), d2, n
    if best_ref is None:
        return None, math.inf, 0
    return best_ref, math.sqrt(best_d2), avail


def _ref_position(view: WorldView, ref: tuple) -> Position | None:
    if ref[0] == "source":
        for idx, src in view.sources:
            if idx == ref[1]:
                return src.position
    else:
        for idx, chest in view.chests:
            if idx == ref[1]:
                return chest.position
    return None


def _dist_from(a: Position, b: Position | None) -> float:
    if b is None:
        return 0.0
    return math.sqrt(dist_sq(a, b))


def local_skip(
    state: PrivateState,
    graph: TaskGraph,
    placed: set[int],
    blocked: int | None = None,
    allowed: set[int] | None = None,
) -> int | None:
    """Smallest-id unplaced node whose prerequisites are all placed and which does
    not depend on the blocked node. `allowed` optionally restricts candidates
    (agents pass their own assignment)."""
    blocked = blocked if blocked is not None else (state.blockage.node_id if state.blockage else None)
    for n in graph.nodes:  # sorted ascending
        if n in placed or n == blocked:
            continue
        if allowed is not None and n not in allowed:
            continue
        if not all(p in placed for p in graph.preds[n]):
            continue
        if blocked is not None and graph.depends_on(n, blocked):
            continue
        return n
    return None


class CoordinationOutcome(str, Enum):
    FULFILLED = "fulfilled"
    CANNOT_SUPPLY = "cannot_supply"
    TIMEOUT = "timed_out"


@dataclass
class CooldownEntry:
    level: int = 0
    expires_at: int = 0
    consecutive_failures: int = 0

    def effective_level(self, now: int) -> int:
        return self.level if now < self.expires_at else 0


class CooldownTable:
    """Per (agent, issue) escalation hygiene: levels decay at expiry, zero-yield
    streaks persist until a fulfilled window resets them."""

    def __init__(self, duration: int = 30):
        self.duration = duration
        self.entries: dict[tuple[str, str], CooldownEntry] = {}

    def _key(self, agent: str, issue: IssueType | str) -> tuple[str, str]:
        return (agent, issue.value if isinstance(issue, IssueType) else str(issue))

    def entry(self, agent: str, issue: IssueType | str) -> CooldownEntry:
        return self.entries.setdefault(self._key(agent, issue), CooldownEntry())

    def level(self, agent: str, issue: IssueType | str, now: int) -> int:
        key = self._key(agent, issue)
        e = self.entries.get(key)
        return e.effective_level(now) if e else 0

    def blocked(self, agent: str, issue: IssueType | str, now: int) -> bool:
        """True when window opening is suppressed: an unexpired level>=2 cooldown,
        or a persistent zero-yield streak of 2+ failures."""
        key = self._key(agent, issue)
        e = self.entries.get(key)
        if e is None:
            return False
        if e.consecutive_failures >= 2:
            return True
        return now < e.expires_at and e.level >= 2

    def register_failure(self, agent: str, issue: IssueType | str, outcome: CoordinationOutcome, now: int) -> CooldownEntry:
        """Record a zero-yield coordination outcome. Timeout bumps to at least
        level 1 (level 2 on the second consecutive miss); an explicit
        CANNOT_SUPPLY jumps straight to level 3."""
        if outcome == CoordinationOutcome.FULFILLED:
            raise ValueError("use register_success for fulfilled windows")
        e = self.entry(agent, issue)
        e.consecutive_failures += 1
        if outcome == CoordinationOutcome.CANNOT_SUPPLY:
            e.level = 3
        else:
            e.level = max(e.level, 1)
            if e.consecutive_failures >= 2:
                e.level = max(e.level, 2)
        e.expires_at = now + self.duration
        return e

    def register_success(self, agent: str, issue: IssueType | str) -> CooldownEntry:
        """A fulfilled window resets the pair to a clean slate."""
        e = self.entry(agent, issue)
        e.level = 0
        e.expires_at = 0
        e.consecutive_failures = 0
        return e
