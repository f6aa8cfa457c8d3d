"""Agent step loop and episode runtime.

Each agent's turn: observe and refresh private state, detect an issue,
featurize and gate it, then route — open a coordination window, run the local
solver, or do opportunistic skip work. The episode runtime owns the world,
the public board, windows, cooldowns, and the ordered trace.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

from .gate import (
    FeatureConfig,
    GateDecision,
    GateThresholds,
    GateWeights,
    MockAdjudicator,
    extract_features,
    gate_decide,
    validate_weights,
)
from .memory import (
    MATERIAL_SHAPED_ISSUES,
    BlockageRecord,
    IssueType,
    PrivateState,
    StateEvent,
    detect_issue,
    update_private_state,
)
from .protocol import (
    CoordinationWindow,
    MessageType,
    ReasonTag,
    TeamPublicView,
    WindowState,
    confirm_message,
    open_window,
    respond_policy,
    settle_window,
    validate_message,
)
from .solver import (
    CooldownTable,
    CoordinationOutcome,
    RecoveryPlan,
    local_skip,
    plan_local_recovery,
)
from .world import (
    Action,
    CoordinationMessage,
    PlanInfo,
    Position,
    VerifiedOutcome,
    WorldState,
    apply_action,
    blueprint_completion,
    dist_sq,
    observe,
)


@dataclass
class RunConfig:
    weights: GateWeights = GateWeights()
    thresholds: GateThresholds = GateThresholds()
    rules_on: bool = True
    score_on: bool = True
    adjudicator_on: bool = True
    rule_toggles: tuple[bool, bool, bool] = (True, True, True)
    partition_on: bool = True
    window_timeout: int = 20
    cooldown_duration: int = 30
    step_budget: int = 300  # round-robin rounds, not individual actions
    seed: int = 0
    observe_radius: int = 50
    features: FeatureConfig = FeatureConfig()
    allow_unvalidated: bool = False

    def __post_init__(self):
        if self.step_budget < 1:
            raise ValueError("step_budget must be >= 1")
        if self.window_timeout < 1:
            raise ValueError("window_timeout must be >= 1")
        if self.cooldown_duration < 0:
            raise ValueError("cooldown_duration must be >= 0")
        if self.observe_radius < 1:
            raise ValueError("observe_radius must be >= 1")
        ok, problems = validate_weights(self.weights)
        if not ok and not self.allow_unvalidated:
            raise ValueError("weight vector rejected: " + "; ".join(problems))

    def describe(self) -> dict:
        return {
            "weights": list(self.weights.as_tuple()),
            "thresholds": [self.thresholds.t_low, self.thresholds.t_high],
            "rules_on": self.rules_on,
            "score_on": self.score_on,
            "adjudicator_on": self.adjudicator_on,
            "rule_toggles": list(self.rule_toggles),
            "partition_on": self.partition_on,
            "window_timeout": self.window_timeout,
            "cooldown_duration": self.cooldown_duration,
            "step_budget": self.step_budget,
            "seed": self.seed,
            "observe_radius": self.observe_radius,
            "interaction_radius": self.features.interaction_radius,
            "speed": self.features.speed,
            "far_threshold": self.features.far_threshold,
            "near_radius": self.features.near_radius,
        }


@dataclass
class Trace:
    """Ordered event log of one episode. Serializes to canonical JSONL."""

    events: list[dict] = field(default_factory=list)

    def emit(self, step: int, agent: str, kind: str, payload: dict) -> None:
        self.events.append({"step": step, "agent": agent, "kind": kind, "payload": payload})

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events)

    @staticmethod
    def from_jsonl(text: str) -> "Trace":
        events = [json.loads(line) for line in text.splitlines() if line.strip()]
        return Trace(events=events)


@dataclass
class IssueInstance:
    """Lifecycle bookkeeping for one detected blockage (feeds the metrics)."""

    agent: str
    issue: str
    node_id: int
    detected_at: int
    windows_opened: int = 0
    recovery_activated: bool = False
    closed: bool = False


@dataclass
class AgentRuntime:
    agent_id: str
    state: PrivateState
    assigned: set[int]
    mode: str = "standard"  # standard | recovering | coordinating | skipping | stalled
    plan: RecoveryPlan | None = None
    plan_idx: int = 0
    plan_collect_goal: dict[int, int] = field(default_factory=dict)
    window_id: int | None = None
    skip_target: int | None = None
    skip_exhausted: set[int] = field(default_factory=set)
    abandoned: set[int] = field(default_factory=set)
    gate_pending: bool = False
    regate_after: int | None = None
    last_outcome: VerifiedOutcome | None = None
    current_instance: IssueInstance | None = None
    script_cursor: int = 0
    script_choice: dict[int, str] = field(default_factory=dict)
    view_digest: str = ""


class EpisodeRuntime:
    """Owns all cross-agent state for one episode run."""

    def __init__(self, spec, config: RunConfig, backend=None):
        self.spec = spec
        self.config = config
        if backend is None and config.adjudicator_on:
            backend = MockAdjudicator(config.thresholds)
        self.backend = backend
        self.world: WorldState = spec.build_world()
        self.graph = self.world.graph
        self.recipes = self.world.recipes
        self.plan_info: PlanInfo = spec.plan_info(self.world)
        self.board: list[CoordinationMessage] = []
        self.windows: dict[int, CoordinationWindow] = {}
        self._window_seq = 0
        self.cooldowns = CooldownTable(duration=config.cooldown_duration)
        self.trace = Trace()
        self.runtimes: dict[str, AgentRuntime] = {}
        self.advertised: dict[str, dict[str, int]] = {}
        self._total_nodes = len(self.world.blueprint.blocks)
        self._placed_count = len(self.world.placed_nodes())
        for aid in sorted(self.world.agents):
            rt = AgentRuntime(agent_id=aid, state=PrivateState(agent_id=aid),
                              assigned=set(spec.assigned.get(aid, [])))
            update_private_state(rt.state, StateEvent(kind="init", view=self.view_for(aid)))
            self.runtimes[aid] = rt

    # -- views -------------------------------------------------------------

    def view_for(self, agent_id: str):
        return observe(self.world, agent_id, radius=self.config.observe_radius,
                       plan=self.plan_info, partition_on=self.config.partition_on)

    def team_view(self, agent_id: str) -> TeamPublicView:
        me = self.world.agents[agent_id]
        positions: dict[str, Position] = {}
        r = self.config.observe_radius
        for aid in sorted(self.world.agents):
            if aid == agent_id:
                continue
            body = self.world.agents[aid]
            if dist_sq(me.position, body.position) <= r * r:
                positions[aid] = body.position
        if self.config.partition_on:
            surplus = {a: dict(items) for a, items in self.advertised.items() if a != agent_id}
        else:
            # merged-context ablation: live inventories stand in for adverts
            surplus = {a: dict(b.inventory.counts) for a, b in self.world.agents.items() if a != agent_id}
        return TeamPublicView(
            positions=positions,
            advertised_surplus=surplus,
            designated_owner=dict(self.spec.partition),
        )

    # -- window plumbing ----------------------------------------------------

    def new_window(self, issue: str, requester: str, responder: str, item: str,
                   count: int) -> tuple[CoordinationWindow, CoordinationMessage]:
        wid = self._window_seq
        self._window_seq += 1
        window, request = open_window(
            wid, issue, requester, responder, item, count,
            now=self.world.sim_time, timeout=self.config.window_timeout,
        )
        self.windows[wid] = window
        self.trace.emit(self.world.sim_time, requester, "window_state",
                        {**window.to_dict(), "event": "opened"})
        return window, request

    def open_windows(self) -> list[CoordinationWindow]:
        return [self.windows[k] for k in sorted(self.windows) if self.windows[k].state == WindowState.OPEN]

    def requirements_of(self, agent_id: str) -> dict[str, int]:
        """Materials the agent still needs for its own unplaced assigned nodes."""
        rt = self.runtimes[agent_id]
        placed = self.world.placed_nodes()
        need: dict[str, int] = {}
        for n in sorted(rt.assigned):
            if n in placed or n in rt.abandoned:
                continue
            mat = self.plan_info.materials[n]
            need[mat] = need.get(mat, 0) + 1
        return need

    def complete(self) -> bool:
        return self._placed_count >= self._total_nodes


# ---------------------------------------------------------------------------
# step-loop helpers
# ---------------------------------------------------------------------------


def _choose_escalation_target(ep: EpisodeRuntime, rt: AgentRuntime, blockage: BlockageRecord) -> str | None:
    """Best responder: the blocked dependency's assignee, else the designated or
    advertised holder of the item, else the nearest teammate."""
    me = ep.world.agents[rt.agent_id]
    others = [a for a in sorted(ep.world.agents) if a != rt.agent_id]
    if not others:
        return None
    if blockage.issue == IssueType.DEPENDENCY_BLOCK:
        assignee = ep.plan_info.assignments.get(blockage.node_id)
        if assignee and assignee != rt.agent_id:
            return assignee
    team = ep.team_view(rt.agent_id)
    item, need = blockage.item, max(1, blockage.count)
    if item:
        holders = []
        for aid in others:
            if team.designated_owner.get(item) == aid or team.surplus(aid, item) >= need:
                holders.append((dist_sq(me.position, ep.world.agents[aid].position), aid))
        if holders:
            return min(holders)[1]
    return min((dist_sq(me.position, ep.world.agents[aid].position), aid) for aid in others)[1]


def _build_toward(ep: EpisodeRuntime, rt: AgentRuntime, node_id: int) -> Action:
    block = ep.world.blueprint.node(node_id)
    me = ep.world.agents[rt.agent_id]
    r = ep.world.interaction_radius
    if dist_sq(me.position, block.position) <= r * r:
        return Action.place(node_id)
    return Action.move(block.position)


def _standard_target(ep: EpisodeRuntime, rt: AgentRuntime) -> int | None:
    placed = ep.world.placed_nodes()
    for n in ep.graph.topo_order:
        if n in placed or n in rt.abandoned or n not in rt.assigned:
            continue
        if all(p in placed for p in ep.graph.preds[n]):
            return n
    return None


def _next_skip_target(ep: EpisodeRuntime, rt: AgentRuntime) -> int | None:
    placed = ep.world.placed_nodes()
    blocked = rt.state.blockage.node_id if rt.state.blockage else None
    allowed = {
        n for n in rt.assigned
        if n not in rt.abandoned and n not in rt.skip_exhausted
        and ep.world.agents[rt.agent_id].inventory.count(ep.plan_info.materials[n]) >= 1
    }
    return local_skip(rt.state, ep.graph, placed, blocked=blocked, allowed=allowed)


def _plan_step_action(ep: EpisodeRuntime, rt: AgentRuntime) -> Action | None:
    """Translate the current recovery-plan leg into a concrete action."""
    if rt.plan is None or rt.plan_idx >= len(rt.plan.steps):
        return None
    step_ = rt.plan.steps[rt.plan_idx]
    me = ep.world.agents[rt.agent_id]
    r = ep.world.interaction_radius
    if step_.op == "collect":
        ref = step_.source_ref
        pos: Position | None = None
        if ref and ref[0] == "source" and 0 <= ref[1] < len(ep.world.sources):
            pos = ep.world.sources[ref[1]].position
        elif ref and ref[0] == "chest" and 0 <= ref[1] < len(ep.world.chests):
            pos = ep.world.chests[ref[1]].position
        if pos is None:
            return None
        if dist_sq(me.position, pos) <= r * r:
            return Action.collect(tuple(ref))
        return Action.move(pos)
    recipe = ep.recipes.get(step_.recipe_id or "")
    if recipe is None:
        return None
    if recipe.station is not None:
        stations = ep.world.stations_of(recipe.station)
        if not stations:
            return None
        pos = min(stations, key=lambda p: (dist_sq(me.position, p), p))
        if dist_sq(me.position, pos) > r * r:
            return Action.move(pos)
    return Action.craft(step_.recipe_id) if recipe.kind == "craft" else Action.smelt(step_.recipe_id)


def _collect_item_of(ep: EpisodeRuntime, ref: tuple | None) -> str | None:
    if not ref:
        return None
    if ref[0] == "source" and 0 <= ref[1] < len(ep.world.sources):
        return ep.world.sources[ref[1]].item
    if ref[0] == "chest" and len(ref) > 2:
        return ref[2]
    return None


def _set_collect_goals(ep: EpisodeRuntime, rt: AgentRuntime) -> None:
    """Record per-leg inventory goals so leg completion is checkable later."""
    rt.plan_collect_goal = {}
    inv = ep.world.agents[rt.agent_id].inventory
    if rt.plan is None:
        return
    for i, step_ in enumerate(rt.plan.steps):
        if step_.op != "collect":
            continue
        item = _collect_item_of(ep, step_.source_ref)
        if item is not None:
            rt.plan_collect_goal[i] = inv.count(item) + step_.units


def _plan_leg_done(ep: EpisodeRuntime, rt: AgentRuntime) -> bool:
    """A leg is finished once its goods are in hand."""
    step_ = rt.plan.steps[rt.plan_idx]
    inv = ep.world.agents[rt.agent_id].inventory
    if step_.op == "collect":
        item = _collect_item_of(ep, step_.source_ref)
        if item is None:
            return True
        return inv.count(item) >= rt.plan_collect_goal.get(rt.plan_idx, 0)
    return inv.count(rt.plan.item) >= max(1, rt.plan.count)


def _responder_duty(ep: EpisodeRuntime, rt: AgentRuntime) -> Action | None:
    """Answer requests and carry out confirmed transfers before own work.

    Never advances window lifecycle itself — settlement after each applied
    action owns every terminal transition.
    """
    now = ep.world.sim_time
    me = ep.world.agents[rt.agent_id]
    r = ep.world.interaction_radius
    for window in ep.open_windows():
        if window.responder != rt.agent_id or now >= window.deadline:
            continue
        if not window.has(MessageType.OFFER_TRANSFER) and not window.has(MessageType.CANNOT_SUPPLY):
            script = ep.spec.responder_script.get(rt.agent_id)
            if script:
                if window.window_id not in rt.script_choice:
                    rt.script_choice[window.window_id] = script[min(rt.script_cursor, len(script) - 1)]
                    rt.script_cursor += 1
                behavior = rt.script_choice[window.window_id]
                if behavior == "silent":
                    continue
                if behavior == "cannot_supply":
                    msg = CoordinationMessage(
                        protocol=MessageType.CANNOT_SUPPLY.value, sender=rt.agent_id,
                        target=window.requester, item=window.item, count=window.count,
                        reason=ReasonTag.NO_SURPLUS.value, time=now,
                    )
                    return Action.send_message(msg)
                # any other entry means honest policy behaviour
            request = window.last(MessageType.REQUEST_MATERIAL)
            if request is None:
                continue
            return Action.send_message(respond_policy(
                me.inventory, ep.requirements_of(rt.agent_id), request, now))
        if window.has(MessageType.OFFER_TRANSFER) and window.has(MessageType.CONFIRM_TRANSFER) \
                and not window.transfer_done:
            requester_pos = ep.world.agents[window.requester].position
            if dist_sq(me.position, requester_pos) <= r * r:
                return Action.transfer(window.item, window.count, window.requester)
            return Action.move(requester_pos)
    return None


def _solver_context(ep: EpisodeRuntime, rt: AgentRuntime, view, blockage: BlockageRecord) -> dict:
    """Everything needed to replay the local plan probe at this decision point."""
    return {
        "position": list(view.position),
        "inventory": view.inventory.to_dict(),
        "sources": [[i, s.item, list(s.position), s.remaining] for i, s in view.sources],
        "chests": [[i, list(c.position), c.inventory.to_dict()] for i, c in view.chests],
        "stations": [[list(p), m] for p, m in sorted(view.plan.station_positions.items())],
        "recipes": [
            {"recipe_id": r.recipe_id, "kind": r.kind, "output": list(r.output),
             "inputs": [list(pair) for pair in r.inputs], "station": r.station}
            for r in (ep.world.recipes.recipes[k] for k in sorted(ep.world.recipes.recipes))
        ],
        "item": blockage.item,
        "count": max(1, blockage.count),
        "issue": blockage.issue.value,
        "node_id": blockage.node_id,
        "params": {
            "interaction_radius": ep.config.features.interaction_radius,
            "speed": ep.config.features.speed,
            "far_threshold": ep.config.features.far_threshold,
        },
    }


def _abandon(ep: EpisodeRuntime, rt: AgentRuntime, blockage: BlockageRecord) -> None:
    node = blockage.node_id
    rt.abandoned.add(node)
    inst = rt.current_instance
    ep.trace.emit(ep.world.sim_time, rt.agent_id, "issue",
                  {"event": "abandoned", "issue": blockage.issue.value, "node_id": node,
                   "windows": inst.windows_opened if inst else 0,
                   "recovery_activated": inst.recovery_activated if inst else False})
    if rt.current_instance is not None:
        rt.current_instance.closed = True
        rt.current_instance = None
    if rt.state.task.active_subtask == node:
        rt.state.task.active_subtask = None
    rt.state.blockage = None
    rt.mode = "standard"
    rt.regate_after = None
    rt.gate_pending = False


def _close_instance(ep: EpisodeRuntime, rt: AgentRuntime, resolved: bool) -> None:
    inst = rt.current_instance
    if inst is None or inst.closed:
        rt.current_instance = None
        return
    inst.closed = True
    if resolved:
        via = "coordination" if inst.windows_opened else "local"
        ep.trace.emit(ep.world.sim_time, rt.agent_id, "issue", {
            "event": "resolved", "issue": inst.issue, "node_id": inst.node_id,
            "via": via, "windows": inst.windows_opened,
            "recovery_activated": inst.recovery_activated,
            "duration": ep.world.sim_time - inst.detected_at,
        })
    rt.current_instance = None
    rt.regate_after = None
    rt.skip_exhausted.clear()


def _can_ever_retry(ep: EpisodeRuntime, rt: AgentRuntime, blockage: BlockageRecord) -> bool:
    return ep.cooldowns.entry(rt.agent_id, blockage.issue).consecutive_failures < 2


def _enter_recovery(ep: EpisodeRuntime, rt: AgentRuntime, plan: RecoveryPlan, reason: str) -> None:
    rt.plan = plan
    rt.plan_idx = 0
    _set_collect_goals(ep, rt)
    rt.mode = "recovering"
    if rt.current_instance is not None:
        rt.current_instance.recovery_activated = True
    update_private_state(rt.state, StateEvent(kind="recovery_entry", reason=reason))


def _stall_or_abandon(ep: EpisodeRuntime, rt: AgentRuntime, blockage: BlockageRecord) -> Action:
    """No plan and no skip work left: wait for a retry window or give the node up."""
    rt.mode = "stalled"
    entry = ep.cooldowns.entry(rt.agent_id, blockage.issue)
    if entry.consecutive_failures >= 2:
        if blockage.issue in MATERIAL_SHAPED_ISSUES or blockage.issue == IssueType.DEPENDENCY_BLOCK:
            _abandon(ep, rt, blockage)
    elif entry.expires_at > ep.world.sim_time:
        rt.regate_after = entry.expires_at
    return Action.idle()


def _gate_and_route(ep: EpisodeRuntime, rt: AgentRuntime, view) -> Action:
    """Featurize the blockage, run the gate, and route the verdict."""
    blockage = rt.state.blockage
    assert blockage is not None
    config = ep.config
    rt.gate_pending = False
    now = ep.world.sim_time

    material_issue = blockage.issue in MATERIAL_SHAPED_ISSUES
    plan = None
    if material_issue:
        plan = plan_local_recovery(
            rt.state, view, ep.recipes, blockage,
            interaction_radius=config.features.interaction_radius,
            speed=config.features.speed, far_threshold=config.features.far_threshold,
        )

    hard_blocked = ep.cooldowns.blocked(rt.agent_id, blockage.issue, now)
    gating_enabled = config.rules_on or config.score_on or config.adjudicator_on
    others_exist = len(ep.world.agents) > 1

    decision: GateDecision | None = None
    if not others_exist or hard_blocked:
        verdict = "stay_local"  # gate skipped; cooldown discipline owns the issue
    elif not gating_enabled:
        verdict = "escalate"  # communication-first baseline: every issue escalates
        ep.trace.emit(now, rt.agent_id, "gate_decision", {
            "issue": blockage.issue.value, "node_id": blockage.node_id,
            "verdict": verdict, "tier": "disabled",
            "solver_ctx": _solver_context(ep, rt, view, blockage),
            "local_plan_cost": plan.total_cost if plan else None,
        })
    else:
        fv, plan = extract_features(
            view, ep.graph, rt.state, ep.team_view(rt.agent_id), ep.cooldowns,
            ep.recipes, blockage=blockage, plan=plan, config=config.features,
        )
        decision = gate_decide(
            blockage.issue, fv, config.weights, config.thresholds,
            adjudicator=ep.backend,
            rules_on=config.rules_on, score_on=config.score_on,
            adjudicator_on=config.adjudicator_on, rule_toggles=config.rule_toggles,
            blockage=blockage, plan=plan,
        )
        verdict = decision.verdict
        payload = {"issue": blockage.issue.value, "node_id": blockage.node_id, **decision.to_dict()}
        if verdict == "escalate":
            payload["solver_ctx"] = _solver_context(ep, rt, view, blockage)
            payload["local_plan_cost"] = plan.total_cost if plan else None
        ep.trace.emit(now, rt.agent_id, "gate_decision", payload)

    if verdict == "escalate":
        target = _choose_escalation_target(ep, rt, blockage)
        if target is not None:
            item = blockage.item or ep.plan_info.materials.get(blockage.node_id, "")
            window, request = ep.new_window(
                blockage.issue.value, rt.agent_id, target, item, max(1, blockage.count))
            rt.window_id = window.window_id
            rt.mode = "coordinating"
            if rt.current_instance is not None:
                rt.current_instance.windows_opened += 1
                rt.current_instance.recovery_activated = True
            update_private_state(rt.state, StateEvent(kind="recovery_entry", reason="escalate"))
            return Action.send_message(request)
        # nobody to ask; fall through to the local routes

    if material_issue and plan is not None:
        _enter_recovery(ep, rt, plan, reason="local_plan")
        action = _plan_step_action(ep, rt)
        if action is not None:
            return action
        rt.plan = None
        rt.mode = "stalled"
    skip = _next_skip_target(ep, rt)
    if skip is not None:
        rt.skip_target = skip
        rt.mode = "skipping"
        return Action.skip(skip)
    return _stall_or_abandon(ep, rt, blockage)


def _advance_plan(ep: EpisodeRuntime, rt: AgentRuntime) -> Action:
    while rt.plan is not None and rt.plan_idx < len(rt.plan.steps) and _plan_leg_done(ep, rt):
        rt.plan_idx += 1
    if rt.plan is None or rt.plan_idx >= len(rt.plan.steps):
        rt.plan = None
        rt.plan_idx = 0
        rt.mode = "standard"
        return _resume_after_recovery(ep, rt)
    action = _plan_step_action(ep, rt)
    if action is None:
        # leg impossible (world changed); drop the plan and re-decide
        rt.plan = None
        rt.plan_idx = 0
        rt.mode = "stalled"
        rt.gate_pending = True
        return Action.idle()
    return action


def _resume_after_recovery(ep: EpisodeRuntime, rt: AgentRuntime) -> Action:
    blockage = rt.state.blockage
    if blockage is None:
        # requirement already verified satisfied; back to the task
        target = rt.state.task.active_subtask
        if target is not None and not ep.world.node_placed(target):
            return _build_toward(ep, rt, target)
        target = _standard_target(ep, rt)
        return _build_toward(ep, rt, target) if target is not None else Action.idle()
    if blockage.issue in MATERIAL_SHAPED_ISSUES and blockage.item:
        have = ep.world.agents[rt.agent_id].inventory.count(blockage.item)
        if have >= max(1, blockage.count):
            rt.state.blockage = None
            _close_instance(ep, rt, resolved=True)
            target = rt.state.task.active_subtask
            if target is not None and not ep.world.node_placed(target):
                return _build_toward(ep, rt, target)
            return Action.idle()
    # plan ran dry without satisfying the requirement; re-enter the gate
    rt.gate_pending = True
    rt.mode = "stalled"
    return Action.idle()


def _skip_work_or_idle(ep: EpisodeRuntime, rt: AgentRuntime) -> Action:
    if rt.skip_target is not None:
        node = rt.skip_target
        if ep.world.node_placed(node):
            rt.skip_target = None
        elif ep.world.agents[rt.agent_id].inventory.count(ep.plan_info.materials[node]) < 1:
            rt.skip_exhausted.add(node)
            rt.skip_target = None
    if rt.skip_target is None:
        nxt = _next_skip_target(ep, rt)
        if nxt is None:
            if rt.mode == "skipping":
                rt.mode = "stalled"
            return Action.idle()
        rt.skip_target = nxt
        return Action.skip(nxt)
    return _build_toward(ep, rt, rt.skip_target)


def step(rt: AgentRuntime, ep: EpisodeRuntime) -> tuple[AgentRuntime, Action]:
    """Choose this agent's next action (decision phases in fixed order)."""
    config = ep.config
    now = ep.world.sim_time
    view = ep.view_for(rt.agent_id)
    rt.view_digest = view.digest()
    if not config.partition_on:
        board_tail = "|".join(m.protocol for m in ep.board[-8:])
        rt.view_digest = format(zlib.crc32((rt.view_digest + board_tail).encode()), "08x")

    # protocol liveness before own work
    duty = _responder_duty(ep, rt)
    if duty is not None:
        return rt, duty

    # requester-side window upkeep
    if rt.window_id is not None:
        window = ep.windows[rt.window_id]
        if window.state == WindowState.OPEN:
            if window.has(MessageType.OFFER_TRANSFER) and not window.has(MessageType.CONFIRM_TRANSFER):
                return rt, Action.send_message(confirm_message(window, now))
            return rt, _skip_work_or_idle(ep, rt)
        rt.window_id = None  # settlement closed it and already re-routed us

    blockage = rt.state.blockage
    if blockage is None and rt.mode in ("skipping", "stalled", "coordinating"):
        rt.mode = "standard"
        rt.gate_pending = False

    if blockage is None and rt.mode == "standard":
        target = _standard_target(ep, rt)
        if target is not None and rt.state.task.active_subtask != target:
            update_private_state(rt.state, StateEvent(
                kind="mode_reset", target_node=target,
                requirements=ep.requirements_of(rt.agent_id), reason="assign"))
        issue = detect_issue(
            rt.state, view, ep.graph, ep.recipes,
            far_threshold=config.features.far_threshold,
            last_outcome=rt.last_outcome, ignore=rt.abandoned,
        )
        if issue is not None:
            rt.state.blockage = issue
            blockage = issue
            rt.gate_pending = True
            rt.current_instance = IssueInstance(
                agent=rt.agent_id, issue=issue.issue.value, node_id=issue.node_id, detected_at=now)
            ep.trace.emit(now, rt.agent_id, "issue", {
                "event": "detected", "issue": issue.issue.value, "node_id": issue.node_id,
                "item": issue.item, "count": issue.count,
            })

    if blockage is not None:
        if rt.mode == "standard" and not rt.gate_pending:
            rt.gate_pending = True  # e.g. a delivery that only partially covered
        if (rt.regate_after is not None and now >= rt.regate_after
                and rt.mode in ("skipping", "stalled")):
            rt.regate_after = None
            if _can_ever_retry(ep, rt, blockage):
                rt.gate_pending = True
        if rt.mode == "recovering":
            return rt, _advance_plan(ep, rt)
        if rt.gate_pending:
            return rt, _gate_and_route(ep, rt, view)
        if rt.mode == "skipping":
            return rt, _skip_work_or_idle(ep, rt)
        return rt, Action.idle()

    # standard execution
    target = rt.state.task.active_subtask
    if target is None or ep.world.node_placed(target) or target in rt.abandoned:
        target = _standard_target(ep, rt)
        if target is None:
            return rt, Action.idle()
    return rt, _build_toward(ep, rt, target)


def _handle_window_close(ep: EpisodeRuntime, window: CoordinationWindow) -> None:
    """Terminal bookkeeping: cooldowns, requester routing, trace events."""
    now = ep.world.sim_time
    ep.trace.emit(now, window.requester, "window_state",
                  {**window.to_dict(), "event": "closed"})
    rt = ep.runtimes[window.requester]
    issue = window.issue
    if window.state == WindowState.FULFILLED:
        e = ep.cooldowns.entry(window.requester, issue)
        had = (e.level, e.consecutive_failures) != (0, 0)
        ep.cooldowns.register_success(window.requester, issue)
        if had:
            ep.trace.emit(now, window.requester, "cooldown_update", {
                "issue": issue, "level": 0, "consecutive_failures": 0,
                "expires_at": 0, "cause": "fulfilled",
            })
        if rt.window_id == window.window_id:
            rt.window_id = None
            if rt.state.blockage is None:
                rt.mode = "standard"
            else:
                rt.mode = "stalled"
                rt.gate_pending = True  # delivery did not fully cover the need
        return
    outcome = (CoordinationOutcome.CANNOT_SUPPLY if window.state == WindowState.CANNOT_SUPPLY
               else CoordinationOutcome.TIMEOUT)
    entry = ep.cooldowns.register_failure(window.requester, issue, outcome, now)
    ep.trace.emit(now, window.requester, "cooldown_update", {
        "issue": issue, "level": entry.level, "consecutive_failures": entry.consecutive_failures,
        "expires_at": entry.expires_at, "cause": outcome.value,
    })
    if rt.window_id == window.window_id:
        rt.window_id = None
    blockage = rt.state.blockage
    if blockage is None:
        rt.mode = "standard"
        return
    # mandatory local fallback, no fresh gate pass
    plan = None
    if blockage.issue in MATERIAL_SHAPED_ISSUES:
        plan = plan_local_recovery(
            rt.state, ep.view_for(rt.agent_id), ep.recipes, blockage,
            interaction_radius=ep.config.features.interaction_radius,
            speed=ep.config.features.speed,
            far_threshold=ep.config.features.far_threshold,
        )
    if plan is not None:
        _enter_recovery(ep, rt, plan, reason="fallback")
        return
    rt.mode = "skipping"
    rt.skip_target = None
    rt.regate_after = entry.expires_at if entry.consecutive_failures < 2 else None
    if entry.consecutive_failures >= 2 and _next_skip_target(ep, rt) is None:
        _abandon(ep, rt, blockage)


def _window_for_message(ep: EpisodeRuntime, msg: CoordinationMessage) -> CoordinationWindow | None:
    requester_sends = {MessageType.REQUEST_MATERIAL.value, MessageType.CONFIRM_TRANSFER.value}
    for window in ep.open_windows():
        if window.item != msg.item:
            continue
        if msg.protocol in requester_sends:
            if window.requester == msg.sender and window.responder == msg.target:
                return window
        else:
            if window.responder == msg.sender and window.requester == msg.target:
                return window
    return None


def _post_action(ep: EpisodeRuntime, rt: AgentRuntime, action: Action, outcome: VerifiedOutcome) -> None:
    """Board/window/private-state effects after the world applied an action."""
    if action.kind == "send_message" and action.message is not None:
        msg = action.message
        if not validate_message(msg.to_dict()):
            raise ValueError(f"invalid protocol message emitted: {msg.to_dict()}")
        ep.board.append(msg)
        window = _window_for_message(ep, msg)
        if window is not None and msg not in window.messages:
            window.append(msg)
        ep.trace.emit(outcome.sim_time, msg.sender, "coordination_message",
                      {**msg.to_dict(), "window_id": window.window_id if window else None})
        if window is not None and msg.protocol == MessageType.OFFER_TRANSFER.value:
            inv = ep.world.agents[msg.sender].inventory
            reqs = ep.requirements_of(msg.sender)
            spare = max(msg.count, inv.count(msg.item) - reqs.get(msg.item, 0))
            ep.advertised.setdefault(msg.sender, {})[msg.item] = spare

    # private-state trigger: own verified outcome
    update_private_state(rt.state, StateEvent(kind="outcome", outcome=outcome))
    rt.last_outcome = outcome

    if outcome.ok and outcome.kind == "place":
        ep._placed_count += 1

    if not outcome.ok and rt.mode == "recovering":
        # a recovery leg failed against the live world; replan from scratch
        rt.plan = None
        rt.plan_idx = 0
        rt.mode = "stalled"
        rt.gate_pending = True

    # transfers also update the recipient's private state
    if outcome.ok and outcome.kind == "transfer" and action.to_agent:
        recipient = ep.runtimes[action.to_agent]
        update_private_state(recipient.state, StateEvent(kind="outcome", outcome=outcome))
        if recipient.state.blockage is None and recipient.current_instance is not None:
            _close_instance(ep, recipient, resolved=True)
        ep.advertised.get(rt.agent_id, {}).pop(action.item, None)
        for window in ep.open_windows():
            if (window.responder == rt.agent_id and window.requester == action.to_agent
                    and window.item == action.item and (action.count or 0) >= window.count
                    and window.has(MessageType.CONFIRM_TRANSFER)):
                window.transfer_done = True
                break

    # blockage satisfied by this outcome (plan leg, passive gain, ...)
    if rt.state.blockage is None and rt.current_instance is not None and not rt.current_instance.closed:
        _close_instance(ep, rt, resolved=True)

    # structural issues clear when the awaited node lands
    blockage = rt.state.blockage
    if blockage is not None and blockage.issue in (IssueType.DEPENDENCY_BLOCK, IssueType.SUPPORT_FAILURE):
        if ep.world.node_placed(blockage.node_id):
            rt.state.blockage = None
            _close_instance(ep, rt, resolved=True)
            rt.mode = "standard"
            rt.gate_pending = False

    # settle every open window after each applied action
    for window in ep.open_windows():
        result = settle_window(window, ep.world, ep.world.sim_time)
        if result.state != WindowState.OPEN:
            _handle_window_close(ep, window)


def run_episode(spec, config: RunConfig, backend=None) -> Trace:
    """Round-robin the agents until the blueprint completes or the budget runs out."""
    ep = EpisodeRuntime(spec, config, backend)
    agent_ids = sorted(ep.world.agents)
    rounds = 0
    while rounds < config.step_budget and not ep.complete():
        for aid in agent_ids:
            if ep.complete():
                break
            rt = ep.runtimes[aid]
            pre_time = ep.world.sim_time
            rt, action = step(rt, ep)
            _, outcome = apply_action(ep.world, aid, action)
            ep.trace.emit(pre_time, aid, "action",
                          {"action": action.to_dict(), "obs_digest": rt.view_digest, "mode": rt.mode})
            ep.trace.emit(pre_time, aid, "outcome", outcome.to_dict())
            _post_action(ep, rt, action, outcome)
        rounds += 1
    ep.trace.emit(ep.world.sim_time, "", "episode_end", {
        "reason": "completed" if ep.complete() else "budget",
        "completion": blueprint_completion(ep.world),
        "rounds": rounds,
        "config": config.describe(),
        "episode_id": getattr(spec, "episode_id", None),
        "class_label": getattr(spec, "class_label", None),
    })
    return ep.trace
