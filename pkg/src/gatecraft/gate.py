"""Three-tier gated escalation: hard rules, weighted ordinal score, gray-zone adjudication.

The score is a linear form over five ordinal features in {0,1,2,3}:
criticality and resource/impact features push toward escalation, local
solvability and recent-escalation history push away. Normalization maps the
attainable raw range onto [0,1] so thresholds are weight-independent.
"""

from __future__ import annotations

import json
import urllib.request
from dataclasses import dataclass

from .memory import BlockageRecord, IssueType, PrivateState, render_decision_card
from .protocol import TeamPublicView
from .solver import CooldownTable, RecoveryPlan, plan_local_recovery
from .world import RecipeBook, TaskGraph, WorldView, criticality_of, dist_sq

FEATURE_NAMES = ("C", "R", "I", "L", "H")


@dataclass(frozen=True)
class FeatureVector:
    C: int  # criticality of the blocked node
    R: int  # teammate resource availability
    I: int  # downstream delay impact
    L: int  # local solvability
    H: int  # recent escalation history (cooldown level)

    def __post_init__(self):
        for name in FEATURE_NAMES:
            v = getattr(self, name)
            if not isinstance(v, int) or not (0 <= v <= 3):
                raise ValueError(f"feature {name} must be an int in 0..3, got {v!r}")

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.C, self.R, self.I, self.L, self.H)

    def to_dict(self) -> dict[str, int]:
        return {"C": self.C, "R": self.R, "I": self.I, "L": self.L, "H": self.H}


@dataclass(frozen=True)
class GateWeights:
    wC: int = 4
    wR: int = 2
    wI: int = 2
    wL: int = 2
    wH: int = 1

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.wC, self.wR, self.wI, self.wL, self.wH)

    @staticmethod
    def from_sequence(seq) -> "GateWeights":
        vals = list(seq)
        if len(vals) != 5:
            raise ValueError("weights need exactly 5 entries [wC, wR, wI, wL, wH]")
        return GateWeights(*[int(v) for v in vals])


def validate_weights(w: GateWeights) -> tuple[bool, list[str]]:
    """Check the weight hierarchy: criticality dominates, history is the weakest
    signal, and the middle band stays within one unit of spread."""
    problems: list[str] = []
    vals = w.as_tuple()
    if any(not isinstance(v, int) or v < 0 for v in vals):
        problems.append("weights must be non-negative integers")
    if not (w.wC > max(w.wR, w.wI, w.wL)):
        problems.append("wC must exceed max(wR, wI, wL)")
    if not (min(w.wR, w.wI, w.wL) > w.wH):
        problems.append("min(wR, wI, wL) must exceed wH")
    if abs(w.wR - w.wI) > 1:
        problems.append("|wR - wI| must be <= 1")
    if abs(w.wI - w.wL) > 1:
        problems.append("|wI - wL| must be <= 1")
    return (not problems, problems)


@dataclass(frozen=True)
class GateThresholds:
    t_low: float = 0.4
    t_high: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.t_low <= self.t_high <= 1.0):
            raise ValueError("need 0 <= t_low <= t_high <= 1")

    @property
    def midpoint(self) -> float:
        return (self.t_low + self.t_high) / 2.0


def score_bounds(w: GateWeights) -> tuple[int, int]:
    """Attainable raw-score range: minimum with penalties maxed, maximum with
    positive features maxed."""
    return (-3 * (w.wL + w.wH), 3 * (w.wC + w.wR + w.wI))


def escalation_score(fv: FeatureVector, w: GateWeights) -> int:
    return w.wC * fv.C + w.wR * fv.R + w.wI * fv.I - w.wL * fv.L - w.wH * fv.H


def normalize_score(raw: int, w: GateWeights) -> float:
    s_min, s_max = score_bounds(w)
    if s_max <= s_min:
        raise ValueError("degenerate weights: empty score range")
    return (raw - s_min) / (s_max - s_min)


@dataclass(frozen=True)
class FeatureConfig:
    structural_threshold: int = 3  # descendant count above which C reads structural
    near_radius: int = 8  # L=3: item physically at hand
    quick_cost: int = 4  # L=2: single craft/smelt within this estimate
    detour_cost: int = 3  # I>=1 when the local fix costs at least this
    viable_radius: int = 50  # R: teammate viability distance
    immediate_radius: int = 10  # R=3 inside this distance (strict)
    interaction_radius: int = 3
    speed: int = 5
    far_threshold: int = 40


def _teammates_with_exact(team: TeamPublicView, view: WorldView, item: str, need: int) -> list[tuple[int, str]]:
    """(dist_sq, agent) pairs for teammates believed to hold the exact item."""
    out = []
    for aid in sorted(team.positions):
        pos = team.positions[aid]
        if team.surplus(aid, item) >= need or team.designated_owner.get(item) == aid:
            out.append((dist_sq(view.position, pos), aid))
    out.sort()
    return out


def _teammates_with_raw(team: TeamPublicView, view: WorldView, recipes: RecipeBook, item: str) -> list[tuple[int, str]]:
    out = []
    raw_items = set()
    for recipe in recipes.producing(item):
        for inp, _ in recipe.inputs:
            raw_items.add(inp)
    for aid in sorted(team.positions):
        pos = team.positions[aid]
        for raw in sorted(raw_items):
            if team.surplus(aid, raw) >= 1 or team.designated_owner.get(raw) == aid:
                out.append((dist_sq(view.position, pos), aid))
                break
    out.sort()
    return out


def extract_features(
    view: WorldView,
    graph: TaskGraph,
    state: PrivateState,
    team: TeamPublicView,
    cooldowns: CooldownTable,
    recipes: RecipeBook,
    blockage: BlockageRecord | None = None,
    plan: RecoveryPlan | None = None,
    config: FeatureConfig = FeatureConfig(),
) -> tuple[FeatureVector, RecoveryPlan | None]:
    """Project the blockage into the ordinal feature space.

    Returns the feature vector together with the local recovery plan probed
    for L (so callers never pay for the plan search twice).
    """
    blockage = blockage or state.blockage
    if blockage is None:
        raise ValueError("no blockage to featurize")
    node = blockage.node_id
    placed = {n for n, p in view.plan.node_positions.items() if view.placed.get(p) == view.plan.materials[n]}

    # --- C: structural criticality -------------------------------------
    crit = criticality_of(graph, node, placed)
    closure = graph.descendants(node) | {node}
    ready_outside = any(
        n not in placed and n not in closure and all(p in placed for p in graph.preds[n])
        for n in graph.nodes
    )
    if crit.on_critical_path and not ready_outside:
        C = 3
    elif crit.descendant_count > config.structural_threshold or crit.dependent_depth >= 2:
        C = 2
    elif crit.descendant_count >= 1:
        C = 1
    else:
        C = 0

    # --- L: local solvability (probe the solver once) -------------------
    if plan is None:
        plan = plan_local_recovery(
            state, view, recipes, blockage,
            interaction_radius=config.interaction_radius, speed=config.speed,
            far_threshold=config.far_threshold,
        )
    if plan is None:
        L = 0
    elif len(plan.steps) == 1:
        step = plan.steps[0]
        if step.kind == "collect" and _supply_within(view, step.source_ref, config.near_radius):
            L = 3
        elif step.kind in ("craft", "smelt") and step.estimated_cost <= config.quick_cost:
            L = 2
        else:
            L = 1
    else:
        L = 1

    # --- R: teammate resources ------------------------------------------
    item = blockage.item
    R = 0
    if item:
        exact = _teammates_with_exact(team, view, item, max(1, blockage.count))
        viable_sq = config.viable_radius * config.viable_radius
        immediate_sq = config.immediate_radius * config.immediate_radius
        exact_viable = [e for e in exact if e[0] <= viable_sq]
        if any(d2 < immediate_sq for d2, _ in exact_viable):
            R = 3
        elif exact_viable:
            R = 2
        elif any(d2 <= viable_sq for d2, _ in _teammates_with_raw(team, view, recipes, item)):
            R = 1

    # --- I: downstream delay ---------------------------------------------
    unplaced_desc = {d for d in graph.descendants(node) if d not in placed}
    teammate_desc = any(view.plan.assignments.get(d, view.agent_id) != view.agent_id for d in unplaced_desc)
    if not ready_outside:
        I = 3
    elif teammate_desc:
        I = 2
    elif unplaced_desc or (plan is not None and plan.total_cost >= config.detour_cost):
        I = 1
    else:
        I = 0

    # --- H: escalation history -------------------------------------------
    H = cooldowns.level(view.agent_id, blockage.issue, view.sim_time)

    return FeatureVector(C=C, R=R, I=I, L=L, H=min(3, H)), plan


def _supply_within(view: WorldView, ref: tuple | None, radius: int) -> bool:
    if ref is None:
        return False
    r_sq = radius * radius
    if ref[0] == "source":
        for idx, src in view.sources:
            if idx == ref[1]:
                return dist_sq(view.position, src.position) <= r_sq
    else:
        for idx, chest in view.chests:
            if idx == ref[1]:
                return dist_sq(view.position, chest.position) <= r_sq
    return False


# Tier-1 rules, individually toggleable. Order matters: first hit wins.
RULE_STAY_SOLVED_LOCALLY = 0  # L=3 and C<=1: trivially local
RULE_ESCALATE_CRITICAL_DEAD_END = 1  # C=3, L=0, H=0: hard bottleneck, clean history
RULE_ESCALATE_TRANSFER_SHAPED = 2  # transfer/co-craft issue with a viable partner


def tier1_rules(
    issue: IssueType | str,
    fv: FeatureVector,
    enabled: tuple[bool, bool, bool] = (True, True, True),
) -> tuple[str, int] | None:
    """Unambiguous fast paths. Returns (verdict, rule_index) or None to defer."""
    issue_val = issue.value if isinstance(issue, IssueType) else str(issue)
    if enabled[0] and fv.L == 3 and fv.C <= 1:
        return ("stay_local", RULE_STAY_SOLVED_LOCALLY)
    if enabled[1] and fv.C == 3 and fv.L == 0 and fv.H == 0:
        return ("escalate", RULE_ESCALATE_CRITICAL_DEAD_END)
    if (
        enabled[2]
        and issue_val in (IssueType.TRANSFER_NEEDED.value, IssueType.CO_CRAFT_REQUIRED.value)
        and fv.R >= 2
        and fv.H <= 1
    ):
        return ("escalate", RULE_ESCALATE_TRANSFER_SHAPED)
    return None


# ---------------------------------------------------------------------------
# Adjudicator wire format and backends
# ---------------------------------------------------------------------------

REPLY_FIELDS = {"decision", "confidence"}
VALID_DECISIONS = ("stay_local", "escalate")


def parse_adjudicator_reply(reply: bytes | str) -> tuple[str, float] | None:
    """Strict reply schema: a JSON object with exactly {decision, confidence}.

    Anything else — extra fields, free text, wrong types — is malformed and
    returns None (the caller falls back to stay_local with confidence 0).
    """
    if isinstance(reply, bytes):
        try:
            reply = reply.decode("utf-8")
        except UnicodeDecodeError:
            return None
    try:
        data = json.loads(reply)
    except (json.JSONDecodeError, TypeError):
        return None
    if not isinstance(data, dict) or set(data.keys()) != REPLY_FIELDS:
        return None
    decision = data["decision"]
    confidence = data["confidence"]
    if decision not in VALID_DECISIONS:
        return None
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        return None
    return decision, min(1.0, max(0.0, float(confidence)))


class MockAdjudicator:
    """Deterministic stand-in: escalate iff the card's normalized score clears
    the threshold midpoint; confidence grows linearly with distance from it."""

    name = "mock"

    def __init__(self, thresholds: GateThresholds):
        self.thresholds = thresholds

    def adjudicate(self, request: bytes) -> bytes:
        card = json.loads(request.decode("utf-8"))
        score_norm = float(card["score_norm"])
        mid = self.thresholds.midpoint
        width = self.thresholds.t_high - self.thresholds.t_low
        decision = "escalate" if score_norm >= mid else "stay_local"
        confidence = 1.0 if width <= 0 else min(1.0, max(0.0, abs(score_norm - mid) * 2.0 / width))
        return json.dumps({"decision": decision, "confidence": confidence}, sort_keys=True).encode("utf-8")


class ScriptedAdjudicator:
    """Replays a fixed reply sequence; raises when exhausted (treated as failure)."""

    name = "scripted"

    def __init__(self, replies: list):
        self._replies = [self._coerce(r) for r in replies]
        self._cursor = 0

    @staticmethod
    def _coerce(reply) -> bytes:
        if isinstance(reply, bytes):
            return reply
        if isinstance(reply, str):
            return reply.encode("utf-8")
        if isinstance(reply, dict):
            return json.dumps(reply, sort_keys=True).encode("utf-8")
        raise TypeError(f"unsupported scripted reply {reply!r}")

    def adjudicate(self, request: bytes) -> bytes:
        if self._cursor >= len(self._replies):
            raise RuntimeError("scripted adjudicator exhausted")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


class RemoteAdjudicator:
    """POSTs the decision card to an HTTP endpoint and returns the raw body."""

    name = "remote"

    def __init__(self, url: str, timeout: float = 3.0):
        self.url = url
        self.timeout = timeout

    def adjudicate(self, request: bytes) -> bytes:
        req = urllib.request.Request(
            self.url, data=request, headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read()


@dataclass
class GateDecision:
    verdict: str  # "stay_local" | "escalate"
    tier: str  # "rule" | "score" | "adjudicator"
    score_raw: int
    score_norm: float
    fv: FeatureVector
    rule_index: int | None = None  # which tier-1 rule fired; None for the
    # rule tier's fall-through default when the score tier is disabled
    confidence: float | None = None
    adjudicator_request: str | None = None
    adjudicator_reply: str | None = None
    adjudicator_ok: bool | None = None

    def to_dict(self) -> dict:
        d = {
            "verdict": self.verdict,
            "tier": self.tier,
            "score_raw": self.score_raw,
            "score_norm": self.score_norm,
            "fv": self.fv.to_dict(),
        }
        if self.rule_index is not None:
            d["rule_index"] = self.rule_index
        if self.confidence is not None:
            d["confidence"] = self.confidence
        if self.adjudicator_request is not None:
            d["adjudicator_request"] = self.adjudicator_request
        if self.adjudicator_reply is not None:
            d["adjudicator_reply"] = self.adjudicator_reply
        if self.adjudicator_ok is not None:
            d["adjudicator_ok"] = self.adjudicator_ok
        return d


def build_request_card(
    issue: IssueType | str,
    fv: FeatureVector,
    score_norm: float,
    blockage: BlockageRecord | None = None,
    plan: RecoveryPlan | None = None,
    escalate_request: dict | None = None,
) -> str:
    block = blockage or BlockageRecord(
        issue=issue if isinstance(issue, IssueType) else IssueType(issue), node_id=-1, item=None, count=0
    )
    local = [f"{s.op}:{s.recipe_id or (s.source_ref and s.source_ref[0]) or ''}" for s in plan.steps] if plan else []
    esc = escalate_request or {"item": block.item, "count": max(1, block.count)}
    return render_decision_card(block, fv.to_dict(), score_norm, local, esc)


def gate_decide(
    issue: IssueType | str,
    fv: FeatureVector,
    weights: GateWeights,
    thresholds: GateThresholds,
    adjudicator=None,
    *,
    rules_on: bool = True,
    score_on: bool = True,
    adjudicator_on: bool = True,
    rule_toggles: tuple[bool, bool, bool] = (True, True, True),
    blockage: BlockageRecord | None = None,
    plan: RecoveryPlan | None = None,
    escalate_request: dict | None = None,
) -> GateDecision:
    """Asymmetric three-tier decision.

    Tier 1 rules short-circuit when enabled. The score tier stays local at or
    below t_low, escalates at or above t_high, and hands the open interval to
    the adjudicator exactly once; without an adjudicator the gray zone stays
    local (conservative bias). With the score tier disabled, anything the
    rules don't catch escalates (communication-first degenerate).
    """
    raw = escalation_score(fv, weights)
    norm = normalize_score(raw, weights)

    if rules_on:
        hit = tier1_rules(issue, fv, rule_toggles)
        if hit is not None:
            verdict, idx = hit
            return GateDecision(verdict=verdict, tier="rule", score_raw=raw, score_norm=norm,
                                fv=fv, rule_index=idx)

    if not score_on:
        return GateDecision(verdict="escalate", tier="rule", score_raw=raw, score_norm=norm, fv=fv)

    if norm <= thresholds.t_low:
        return GateDecision(verdict="stay_local", tier="score", score_raw=raw, score_norm=norm, fv=fv)
    if norm >= thresholds.t_high:
        return GateDecision(verdict="escalate", tier="score", score_raw=raw, score_norm=norm, fv=fv)

    if not adjudicator_on or adjudicator is None:
        return GateDecision(verdict="stay_local", tier="score", score_raw=raw, score_norm=norm, fv=fv)

    card = build_request_card(issue, fv, norm, blockage=blockage, plan=plan, escalate_request=escalate_request)
    request_bytes = card.encode("utf-8")
    try:
        reply_bytes = adjudicator.adjudicate(request_bytes)
    except Exception:
        return GateDecision(
            verdict="stay_local", tier="adjudicator", score_raw=raw, score_norm=norm, fv=fv,
            confidence=0.0, adjudicator_request=card, adjudicator_reply=None, adjudicator_ok=False,
        )
    parsed = parse_adjudicator_reply(reply_bytes)
    reply_text = reply_bytes.decode("utf-8", errors="replace")
    if parsed is None:
        return GateDecision(
            verdict="stay_local", tier="adjudicator", score_raw=raw, score_norm=norm, fv=fv,
            confidence=0.0, adjudicator_request=card, adjudicator_reply=reply_text, adjudicator_ok=False,
        )
    decision, confidence = parsed
    return GateDecision(
        verdict=decision, tier="adjudicator", score_raw=raw, score_norm=norm, fv=fv,
        confidence=confidence, adjudicator_request=card, adjudicator_reply=reply_text, adjudicator_ok=True,
    )
