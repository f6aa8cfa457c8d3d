"""Deterministic block-construction world: blueprints, task DAGs, inventories, actions.

Everything here is pure bookkeeping on plain Python data. The same
(world, agent, action) triple always yields the same successor state and
outcome; failures are returned as statuses, never raised.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

Position = tuple[int, int, int]


def dist_sq(a: Position, b: Position) -> int:
    """Exact squared Euclidean distance between two lattice positions."""
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2


def within(a: Position, b: Position, radius: float) -> bool:
    return dist_sq(a, b) <= radius * radius


def euclid(a: Position, b: Position) -> float:
    return math.sqrt(dist_sq(a, b))


def travel_steps(distance: float, radius: float, speed: int) -> int:
    """Estimated move actions to bring `distance` down to `radius` at `speed` blocks/step."""
    if distance <= radius:
        return 0
    return math.ceil((distance - radius) / speed)


class Inventory:
    """Non-negative item counts. Zero-count keys are dropped eagerly."""

    __slots__ = ("counts",)

    def __init__(self, counts: dict[str, int] | None = None):
        self.counts: dict[str, int] = {}
        if counts:
            for item, n in counts.items():
                if n < 0:
                    raise ValueError(f"negative count for {item!r}")
                if n > 0:
                    self.counts[item] = n

    def count(self, item: str) -> int:
        return self.counts.get(item, 0)

    def add(self, item: str, n: int) -> None:
        if n < 0:
            raise ValueError("add() takes a non-negative count")
        if n:
            self.counts[item] = self.counts.get(item, 0) + n

    def remove(self, item: str, n: int) -> None:
        have = self.counts.get(item, 0)
        if n < 0 or n > have:
            raise ValueError(f"cannot remove {n} x {item!r} (have {have})")
        left = have - n
        if left:
            self.counts[item] = left
        else:
            self.counts.pop(item, None)

    def copy(self) -> "Inventory":
        return Inventory(dict(self.counts))

    def to_dict(self) -> dict[str, int]:
        return {k: self.counts[k] for k in sorted(self.counts)}

    def total(self) -> int:
        return sum(self.counts.values())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Inventory) and self.counts == other.counts

    def __repr__(self) -> str:
        return f"Inventory({self.to_dict()})"


@dataclass(frozen=True)
class BlockSpec:
    """One blueprint block: a node in the task graph with a material and a position."""

    node_id: int
    material: str
    position: Position


@dataclass(frozen=True)
class Blueprint:
    name: str
    blocks: tuple[BlockSpec, ...]

    def __post_init__(self):
        ids = [b.node_id for b in self.blocks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids in blueprint")
        positions = [b.position for b in self.blocks]
        if len(set(positions)) != len(positions):
            raise ValueError("duplicate positions in blueprint")

    def node(self, node_id: int) -> BlockSpec:
        for b in self.blocks:
            if b.node_id == node_id:
                return b
        raise KeyError(node_id)

    @property
    def node_ids(self) -> list[int]:
        return [b.node_id for b in self.blocks]


class TaskGraph:
    """Prerequisite DAG over blueprint nodes: edge (u, v) means u must be placed before v."""

    def __init__(self, nodes: list[int], edges: list[tuple[int, int]]):
        node_set = set(nodes)
        for u, v in edges:
            if u not in node_set or v not in node_set:
                raise ValueError(f"edge ({u}, {v}) references unknown node")
        self.nodes = sorted(nodes)
        self.edges = sorted(set((u, v) for u, v in edges))
        self.preds: dict[int, tuple[int, ...]] = {n: () for n in self.nodes}
        self.succs: dict[int, tuple[int, ...]] = {n: () for n in self.nodes}
        pred_acc: dict[int, list[int]] = {n: [] for n in self.nodes}
        succ_acc: dict[int, list[int]] = {n: [] for n in self.nodes}
        for u, v in self.edges:
            pred_acc[v].append(u)
            succ_acc[u].append(v)
        for n in self.nodes:
            self.preds[n] = tuple(sorted(pred_acc[n]))
            self.succs[n] = tuple(sorted(succ_acc[n]))
        self._topo = self._toposort()

    def _toposort(self) -> list[int]:
        indeg = {n: len(self.preds[n]) for n in self.nodes}
        ready = sorted(n for n in self.nodes if indeg[n] == 0)
        order: list[int] = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            inserted = False
            for s in self.succs[n]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
                    inserted = True
            if inserted:
                ready.sort()
        if len(order) != len(self.nodes):
            raise ValueError("task graph contains a cycle")
        return order

    @property
    def topo_order(self) -> list[int]:
        return list(self._topo)

    def descendants(self, node: int) -> set[int]:
        out: set[int] = set()
        stack = list(self.succs[node])
        while stack:
            n = stack.pop()
            if n not in out:
                out.add(n)
                stack.extend(self.succs[n])
        return out

    def ancestors(self, node: int) -> set[int]:
        out: set[int] = set()
        stack = list(self.preds[node])
        while stack:
            n = stack.pop()
            if n not in out:
                out.add(n)
                stack.extend(self.preds[n])
        return out

    def depends_on(self, node: int, maybe_ancestor: int) -> bool:
        return maybe_ancestor in self.ancestors(node)


@dataclass(frozen=True)
class Recipe:
    """A crafting or smelting rule. `station` names a scaffold block that must be in range."""

    recipe_id: str
    kind: str  # "craft" | "smelt"
    output: tuple[str, int]
    inputs: tuple[tuple[str, int], ...]
    station: str | None = None

    def __post_init__(self):
        if self.kind not in ("craft", "smelt"):
            raise ValueError(f"bad recipe kind {self.kind!r}")
        if self.output[1] <= 0:
            raise ValueError("recipe output count must be positive")


class RecipeBook:
    def __init__(self, recipes: list[Recipe]):
        self.recipes = {r.recipe_id: r for r in recipes}
        if len(self.recipes) != len(recipes):
            raise ValueError("duplicate recipe ids")

    def get(self, recipe_id: str) -> Recipe | None:
        return self.recipes.get(recipe_id)

    def producing(self, item: str) -> list[Recipe]:
        """Recipes that output `item`, in deterministic id order."""
        return [self.recipes[k] for k in sorted(self.recipes) if self.recipes[k].output[0] == item]


@dataclass
class Source:
    item: str
    position: Position
    remaining: int


@dataclass
class Chest:
    position: Position
    inventory: Inventory


@dataclass
class AgentBody:
    agent_id: str
    position: Position
    inventory: Inventory


@dataclass(frozen=True)
class CoordinationMessage:
    """Typed board message. Exactly these seven fields, nothing optional added."""

    protocol: str  # REQUEST_MATERIAL | OFFER_TRANSFER | CONFIRM_TRANSFER | CANNOT_SUPPLY
    sender: str
    target: str
    item: str
    count: int
    reason: str  # need_for_node | handover_complete | no_surplus | timeout
    time: int  # sim_time when posted

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "from": self.sender,
            "target": self.target,
            "item": self.item,
            "count": self.count,
            "reason": self.reason,
            "time": self.time,
        }


# Source references for collect: ("source", index) or ("chest", index, item).
SourceRef = tuple


@dataclass(frozen=True)
class Action:
    """Kind-discriminated agent action."""

    kind: str
    target: Position | None = None  # move
    node_id: int | None = None  # place / skip
    source: SourceRef | None = None  # collect
    recipe_id: str | None = None  # craft / smelt
    item: str | None = None  # transfer
    count: int | None = None  # transfer
    to_agent: str | None = None  # transfer
    message: CoordinationMessage | None = None  # send_message

    KINDS = ("move", "place", "collect", "craft", "smelt", "transfer", "send_message", "skip", "idle")

    @staticmethod
    def move(target: Position) -> "Action":
        return Action(kind="move", target=target)

    @staticmethod
    def place(node_id: int) -> "Action":
        return Action(kind="place", node_id=node_id)

    @staticmethod
    def collect(source: SourceRef) -> "Action":
        return Action(kind="collect", source=source)

    @staticmethod
    def craft(recipe_id: str) -> "Action":
        return Action(kind="craft", recipe_id=recipe_id)

    @staticmethod
    def smelt(recipe_id: str) -> "Action":
        return Action(kind="smelt", recipe_id=recipe_id)

    @staticmethod
    def transfer(item: str, count: int, to_agent: str) -> "Action":
        return Action(kind="transfer", item=item, count=count, to_agent=to_agent)

    @staticmethod
    def send_message(message: CoordinationMessage) -> "Action":
        return Action(kind="send_message", message=message)

    @staticmethod
    def skip(node_id: int) -> "Action":
        return Action(kind="skip", node_id=node_id)

    @staticmethod
    def idle() -> "Action":
        return Action(kind="idle")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.target is not None:
            d["target"] = list(self.target)
        if self.node_id is not None:
            d["node_id"] = self.node_id
        if self.source is not None:
            d["source"] = list(self.source)
        if self.recipe_id is not None:
            d["recipe_id"] = self.recipe_id
        if self.item is not None:
            d["item"] = self.item
        if self.count is not None:
            d["count"] = self.count
        if self.to_agent is not None:
            d["to_agent"] = self.to_agent
        if self.message is not None:
            d["message"] = self.message.to_dict()
        return d


@dataclass
class VerifiedOutcome:
    """System-verified result of applying one action. The only channel agents trust."""

    agent: str
    kind: str
    status: str  # "success" | "failure"
    reason: str | None = None
    deltas: dict = field(default_factory=dict)
    sim_time: int = 0
    node_id: int | None = None

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict:
        d = {"agent": self.agent, "kind": self.kind, "status": self.status, "sim_time": self.sim_time}
        if self.reason is not None:
            d["reason"] = self.reason
        if self.deltas:
            d["deltas"] = self.deltas
        if self.node_id is not None:
            d["node_id"] = self.node_id
        return d


@dataclass
class WorldState:
    """Full simulator state. `placed` maps positions to materials; `scaffold` positions
    (stations and other pre-existing blocks) are allowed alongside blueprint positions."""

    blueprint: Blueprint
    graph: TaskGraph
    recipes: RecipeBook
    agents: dict[str, AgentBody]
    sources: list[Source]
    chests: list[Chest]
    placed: dict[Position, str] = field(default_factory=dict)
    scaffold: dict[Position, str] = field(default_factory=dict)
    sim_time: int = 0
    interaction_radius: int = 3
    speed: int = 5

    def __post_init__(self):
        bp_positions = {b.position for b in self.blueprint.blocks}
        for pos in self.placed:
            if pos not in bp_positions and pos not in self.scaffold:
                raise ValueError(f"placed block at non-blueprint, non-scaffold position {pos}")

    # -- queries ---------------------------------------------------------

    def node_placed(self, node_id: int) -> bool:
        b = self.blueprint.node(node_id)
        return self.placed.get(b.position) == b.material

    def placed_nodes(self) -> set[int]:
        return {b.node_id for b in self.blueprint.blocks if self.placed.get(b.position) == b.material}

    def prereqs_placed(self, node_id: int) -> bool:
        return all(self.node_placed(p) for p in self.graph.preds[node_id])

    def stations_of(self, station: str) -> list[Position]:
        out = [pos for pos, mat in self.scaffold.items() if mat == station]
        out.extend(pos for pos, mat in self.placed.items() if mat == station and pos not in self.scaffold)
        return sorted(out)

    def station_in_range(self, agent: AgentBody, station: str | None) -> bool:
        if station is None:
            return True
        return any(within(agent.position, pos, self.interaction_radius) for pos in self.stations_of(station))

    def serialize(self) -> str:
        """Canonical JSON of the whole state; equal states serialize byte-identically."""
        d = {
            "sim_time": self.sim_time,
            "placed": [[list(k), v] for k, v in sorted(self.placed.items())],
            "scaffold": [[list(k), v] for k, v in sorted(self.scaffold.items())],
            "agents": {
                a: {"position": list(b.position), "inventory": b.inventory.to_dict()}
                for a, b in sorted(self.agents.items())
            },
            "sources": [
                {"item": s.item, "position": list(s.position), "remaining": s.remaining} for s in self.sources
            ],
            "chests": [{"position": list(c.position), "inventory": c.inventory.to_dict()} for c in self.chests],
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _fail(agent: AgentBody, action: Action, reason: str, sim_time: int) -> VerifiedOutcome:
    return VerifiedOutcome(
        agent=agent.agent_id, kind=action.kind, status="failure", reason=reason,
        sim_time=sim_time, node_id=action.node_id,
    )


def _move_towards(pos: Position, target: Position, speed: int) -> Position:
    # Per-axis greedy unit steps, largest remaining |delta| first (tie order x, y, z).
    cur = list(pos)
    for _ in range(speed):
        deltas = [target[i] - cur[i] for i in range(3)]
        axis = max(range(3), key=lambda i: (abs(deltas[i]), -i))
        if deltas[axis] == 0:
            break
        cur[axis] += 1 if deltas[axis] > 0 else -1
    return (cur[0], cur[1], cur[2])


def apply_action(world: WorldState, agent_id: str, action: Action) -> tuple[WorldState, VerifiedOutcome]:
    """Advance the world by one action. Mutates and returns `world`.

    sim_time increments exactly once per call, success or failure. All failure
    modes come back as VerifiedOutcome statuses.
    """
    agent = world.agents[agent_id]
    t = world.sim_time
    world.sim_time = t + 1
    kind = action.kind

    if kind == "idle" or kind == "send_message":
        return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", sim_time=t)

    if kind == "skip":
        return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", sim_time=t, node_id=action.node_id)

    if kind == "move":
        if action.target is None:
            return world, _fail(agent, action, "invalid_action", t)
        old = agent.position
        agent.position = _move_towards(old, tuple(action.target), world.speed)
        deltas = {"position": {agent_id: [list(old), list(agent.position)]}}
        return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", deltas=deltas, sim_time=t)

    if kind == "place":
        if action.node_id is None or action.node_id not in set(world.blueprint.node_ids):
            return world, _fail(agent, action, "invalid_action", t)
        block = world.blueprint.node(action.node_id)
        if world.node_placed(action.node_id):
            return world, _fail(agent, action, "invalid_action", t)
        if not world.prereqs_placed(action.node_id):
            return world, _fail(agent, action, "prerequisite_unplaced", t)
        if not within(agent.position, block.position, world.interaction_radius):
            return world, _fail(agent, action, "out_of_range", t)
        if agent.inventory.count(block.material) < 1:
            return world, _fail(agent, action, "missing_material", t)
        agent.inventory.remove(block.material, 1)
        world.placed[block.position] = block.material
        deltas = {
            "inventory": {agent_id: {block.material: -1}},
            "placed": [[list(block.position), block.material]],
        }
        return world, VerifiedOutcome(
            agent=agent_id, kind=kind, status="success", deltas=deltas, sim_time=t, node_id=action.node_id
        )

    if kind == "collect":
        ref = action.source
        if not ref or ref[0] not in ("source", "chest"):
            return world, _fail(agent, action, "invalid_action", t)
        if ref[0] == "source":
            idx = ref[1]
            if not (0 <= idx < len(world.sources)):
                return world, _fail(agent, action, "invalid_action", t)
            src = world.sources[idx]
            if not within(agent.position, src.position, world.interaction_radius):
                return world, _fail(agent, action, "out_of_range", t)
            if src.remaining < 1:
                return world, _fail(agent, action, "source_empty", t)
            src.remaining -= 1
            agent.inventory.add(src.item, 1)
            deltas = {"inventory": {agent_id: {src.item: 1}}, "source": {str(idx): -1}}
            return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", deltas=deltas, sim_time=t)
        idx, item = ref[1], ref[2]
        if not (0 <= idx < len(world.chests)) or not isinstance(item, str):
            return world, _fail(agent, action, "invalid_action", t)
        chest = world.chests[idx]
        if not within(agent.position, chest.position, world.interaction_radius):
            return world, _fail(agent, action, "out_of_range", t)
        if chest.inventory.count(item) < 1:
            return world, _fail(agent, action, "source_empty", t)
        chest.inventory.remove(item, 1)
        agent.inventory.add(item, 1)
        deltas = {"inventory": {agent_id: {item: 1}}, "chest": {str(idx): {item: -1}}}
        return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", deltas=deltas, sim_time=t)

    if kind in ("craft", "smelt"):
        recipe = world.recipes.get(action.recipe_id or "")
        if recipe is None or recipe.kind != kind:
            return world, _fail(agent, action, "invalid_action", t)
        if not world.station_in_range(agent, recipe.station):
            return world, _fail(agent, action, "out_of_range", t)
        for item, n in recipe.inputs:
            if agent.inventory.count(item) < n:
                return world, _fail(agent, action, "recipe_inputs_missing", t)
        inv_delta: dict[str, int] = {}
        for item, n in recipe.inputs:
            agent.inventory.remove(item, n)
            inv_delta[item] = inv_delta.get(item, 0) - n
        out_item, out_n = recipe.output
        agent.inventory.add(out_item, out_n)
        inv_delta[out_item] = inv_delta.get(out_item, 0) + out_n
        deltas = {"inventory": {agent_id: inv_delta}}
        return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", deltas=deltas, sim_time=t)

    if kind == "transfer":
        if action.item is None or action.count is None or action.count < 1 or action.to_agent not in world.agents:
            return world, _fail(agent, action, "invalid_action", t)
        other = world.agents[action.to_agent]
        if other.agent_id == agent_id:
            return world, _fail(agent, action, "invalid_action", t)
        if not within(agent.position, other.position, world.interaction_radius):
            return world, _fail(agent, action, "out_of_range", t)
        if agent.inventory.count(action.item) < action.count:
            return world, _fail(agent, action, "missing_material", t)
        agent.inventory.remove(action.item, action.count)
        other.inventory.add(action.item, action.count)
        deltas = {
            "inventory": {
                agent_id: {action.item: -action.count},
                action.to_agent: {action.item: action.count},
            }
        }
        return world, VerifiedOutcome(agent=agent_id, kind=kind, status="success", deltas=deltas, sim_time=t)

    return world, _fail(agent, action, "invalid_action", t)


@dataclass
class PlanInfo:
    """Static, scripted plan knowledge shared by every agent at episode start:
    the blueprint layout, node assignments, the declared item partition, and
    per-agent work regions. Never carries live inventories."""

    assignments: dict[int, str] = field(default_factory=dict)  # node_id -> agent_id
    partition: dict[str, str] = field(default_factory=dict)  # item -> owner agent_id
    work_regions: dict[str, tuple[Position, int]] = field(default_factory=dict)  # agent -> (center, radius)
    materials: dict[int, str] = field(default_factory=dict)  # node_id -> material
    node_positions: dict[int, Position] = field(default_factory=dict)
    station_positions: dict[Position, str] = field(default_factory=dict)

    @staticmethod
    def for_world(world: "WorldState", assignments: dict[int, str],
                  partition: dict[str, str] | None = None,
                  work_regions: dict[str, tuple[Position, int]] | None = None) -> "PlanInfo":
        return PlanInfo(
            assignments=dict(assignments),
            partition=dict(partition or {}),
            work_regions=dict(work_regions or {}),
            materials={b.node_id: b.material for b in world.blueprint.blocks},
            node_positions={b.node_id: b.position for b in world.blueprint.blocks},
            station_positions=dict(world.scaffold),
        )


@dataclass
class WorldView:
    """What one agent can see. Never includes live teammate inventories unless the
    information partition has been explicitly disabled for an ablation run."""

    agent_id: str
    position: Position
    inventory: Inventory
    placed: dict[Position, str]
    sources: list[tuple[int, Source]]  # (index, source) within observe radius
    chests: list[tuple[int, Chest]]
    teammates: dict[str, Position]  # only those within observe radius
    teammate_inventories: dict[str, Inventory] | None  # populated only when partition is off
    plan: PlanInfo
    sim_time: int

    def digest(self) -> str:
        """Cheap deterministic observation digest for traces."""
        import zlib

        parts = [
            self.agent_id,
            str(self.position),
            str(sorted(self.inventory.counts.items())),
            str(len(self.placed)),
            str([(i, s.remaining) for i, s in self.sources]),
            str(sorted(self.teammates.items())),
            str(self.sim_time),
        ]
        return format(zlib.crc32("|".join(parts).encode()), "08x")


def observe(world: WorldState, agent_id: str, radius: int = 50, plan: PlanInfo | None = None,
            partition_on: bool = True) -> WorldView:
    """Build the agent's filtered view of the world.

    Entities (sources, chests, teammate positions) are included only within
    `radius`. Teammate inventories appear only if partition_on is False.
    """
    if radius <= 0:
        raise ValueError("observe radius must be positive")
    me = world.agents[agent_id]
    sources = [(i, s) for i, s in enumerate(world.sources) if within(me.position, s.position, radius)]
    chests = [(i, c) for i, c in enumerate(world.chests) if within(me.position, c.position, radius)]
    teammates: dict[str, Position] = {}
    teammate_invs: dict[str, Inventory] | None = None if partition_on else {}
    for aid in sorted(world.agents):
        if aid == agent_id:
            continue
        body = world.agents[aid]
        if within(me.position, body.position, radius):
            teammates[aid] = body.position
        if teammate_invs is not None:
            teammate_invs[aid] = body.inventory.copy()
    return WorldView(
        agent_id=agent_id,
        position=me.position,
        inventory=me.inventory.copy(),
        placed=dict(world.placed),
        sources=sources,
        chests=chests,
        teammates=teammates,
        teammate_inventories=teammate_invs,
        plan=plan or PlanInfo(),
        sim_time=world.sim_time,
    )


def critical_path(graph: TaskGraph, placed: set[int]) -> list[int]:
    """Longest prerequisite chain through unplaced nodes.

    Ties resolve to the lexicographically smallest node-id sequence among the
    longest paths (equivalently: smallest id at every choice point).
    """
    unplaced = [n for n in graph.topo_order if n not in placed]
    if not unplaced:
        return []
    unplaced_set = set(unplaced)
    # depth[n] = number of nodes on the longest unplaced path starting at n
    depth: dict[int, int] = {}
    for n in reversed(unplaced):
        best = 0
        for s in graph.succs[n]:
            if s in unplaced_set:
                best = max(best, depth[s])
        depth[n] = best + 1
    max_depth = max(depth.values())
    start = min(n for n in unplaced if depth[n] == max_depth)
    path = [start]
    cur = start
    while True:
        nxt = [s for s in graph.succs[cur] if s in unplaced_set and depth[s] == depth[cur] - 1]
        if not nxt:
            break
        cur = min(nxt)
        path.append(cur)
    return path


@dataclass(frozen=True)
class Criticality:
    descendant_count: int
    on_critical_path: bool
    dependent_depth: int


def criticality_of(graph: TaskGraph, node: int, placed: set[int]) -> Criticality:
    """Structural importance of `node` given current placement progress."""
    unplaced_desc = {d for d in graph.descendants(node) if d not in placed}
    # longest unplaced chain strictly below `node`
    depth = 0
    if unplaced_desc:
        order = [n for n in graph.topo_order if n in unplaced_desc]
        d: dict[int, int] = {}
        for n in reversed(order):
            best = 0
            for s in graph.succs[n]:
                if s in unplaced_desc:
                    best = max(best, d[s])
            d[n] = best + 1
        depth = max(d.values())
    on_cp = node in critical_path(graph, placed)
    return Criticality(descendant_count=len(unplaced_desc), on_critical_path=on_cp, dependent_depth=depth)


def blueprint_completion(world: WorldState) -> float:
    """Fraction of blueprint blocks whose position holds the correct material."""
    total = len(world.blueprint.blocks)
    if total == 0:
        return 1.0
    good = sum(1 for b in world.blueprint.blocks if world.placed.get(b.position) == b.material)
    return good / total


def default_recipes() -> RecipeBook:
    """The scripted recipe book shared by generated scenarios."""
    return RecipeBook(
        [
            Recipe("planks_from_log", "craft", ("oak_planks", 4), (("oak_log", 1),)),
            Recipe("stick_from_planks", "craft", ("stick", 4), (("oak_planks", 2),)),
            Recipe("smelt_iron", "smelt", ("iron_ingot", 1), (("iron_ore", 1), ("coal", 1)), station="furnace"),
            Recipe("smelt_glass", "smelt", ("glass", 1), (("sand", 1), ("coal", 1)), station="furnace"),
            Recipe("smooth_sandstone", "craft", ("smooth_sandstone", 1), (("sandstone", 2),), station="crafting_table"),
        ]
    )
