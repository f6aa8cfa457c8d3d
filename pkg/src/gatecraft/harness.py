"""Trace metrics, aggregation, grid-search calibration, and dataset splits.

`compute_metrics` is a pure function of a finished trace: it counts, it never
re-simulates — with one deliberate exception. The unnecessary-escalation rate
replays the local planner on the solver context recorded *at the decision
step*, so the feasibility judgment uses exactly what the agent could see then
and nothing that happened afterwards.
"""

from __future__ import annotations

import csv
import io
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .agent import RunConfig, Trace, run_episode
from .gate import (
    GateThresholds,
    GateWeights,
    RemoteAdjudicator,
    ScriptedAdjudicator,
    validate_weights,
)
from .memory import BlockageRecord, IssueType, PrivateState
from .scenarios import EpisodeSpec
from .solver import RecoveryPlan, plan_local_recovery
from .world import Chest, Inventory, PlanInfo, Recipe, RecipeBook, Source, WorldView

ENV_ACTION_KINDS = ("move", "place", "collect", "craft", "smelt", "transfer")

# Cost cap that makes "a feasible local solution existed" decidable.
LOCAL_BUDGET = 30

RATIO_FIELDS = ("lrr", "uer", "ecr", "rsr", "recovery_time_avg")
MEAN_FIELDS = ("tsr", "cs", "msg", "escalations", "adjudicator_calls", "token_cost")


@dataclass
class EpisodeMetrics:
    episode_id: str | None
    class_label: str | None
    tsr: float
    cs: int
    msg: int
    escalations: int
    adjudicator_calls: int
    token_cost: float
    windows_opened: int
    windows_fulfilled: int
    issues_resolved: int
    issues_abandoned: int
    lrr: float | None = None
    uer: float | None = None
    ecr: float | None = None
    rsr: float | None = None
    recovery_time_avg: float | None = None

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "class_label": self.class_label,
            "tsr": self.tsr,
            "cs": self.cs,
            "msg": self.msg,
            "escalations": self.escalations,
            "adjudicator_calls": self.adjudicator_calls,
            "token_cost": self.token_cost,
            "windows_opened": self.windows_opened,
            "windows_fulfilled": self.windows_fulfilled,
            "issues_resolved": self.issues_resolved,
            "issues_abandoned": self.issues_abandoned,
            "lrr": self.lrr,
            "uer": self.uer,
            "ecr": self.ecr,
            "rsr": self.rsr,
            "recovery_time_avg": self.recovery_time_avg,
        }


def replay_local_feasibility(ctx: dict) -> RecoveryPlan | None:
    """Re-run the local planner on a recorded decision-step context.

    The context is self-contained (inventory, visible supplies, stations,
    recipe book, blockage), so this works on a bare trace with no world."""
    inventory = Inventory({k: int(v) for k, v in ctx["inventory"].items()})
    state = PrivateState(agent_id="replay", inventory=inventory)
    sources = [
        (int(i), Source(item=item, position=tuple(p), remaining=int(r)))
        for i, item, p, r in ctx.get("sources", [])
    ]
    chests = [
        (int(i), Chest(position=tuple(p), inventory=Inventory({k: int(v) for k, v in inv.items()})))
        for i, p, inv in ctx.get("chests", [])
    ]
    plan = PlanInfo(station_positions={tuple(p): m for p, m in ctx.get("stations", [])})
    view = WorldView(
        agent_id="replay",
        position=tuple(ctx["position"]),
        inventory=inventory,
        placed={},
        sources=sources,
        chests=chests,
        teammates={},
        teammate_inventories=None,
        plan=plan,
        sim_time=0,
    )
    recipes = RecipeBook(
        [
            Recipe(
                recipe_id=r["recipe_id"],
                kind=r["kind"],
                output=(r["output"][0], int(r["output"][1])),
                inputs=tuple((i, int(n)) for i, n in r["inputs"]),
                station=r.get("station"),
            )
            for r in ctx.get("recipes", [])
        ]
    )
    blockage = BlockageRecord(
        issue=IssueType(ctx["issue"]),
        node_id=int(ctx["node_id"]),
        item=ctx["item"],
        count=int(ctx["count"]),
    )
    params = ctx.get("params", {})
    return plan_local_recovery(
        state, view, recipes, blockage,
        interaction_radius=int(params.get("interaction_radius", 3)),
        speed=int(params.get("speed", 5)),
        far_threshold=int(params.get("far_threshold", 40)),
    )


def compute_metrics(
    trace: Trace, spec: EpisodeSpec | None = None, local_budget: int = LOCAL_BUDGET
) -> EpisodeMetrics:
    """Count one finished trace into EpisodeMetrics. Ratio fields are None
    (absent) when their denominator is zero."""
    end = next((e for e in trace.events if e["kind"] == "episode_end"), None)
    if end is None:
        raise ValueError("incomplete trace: no episode_end event")

    cs = msg = opened = fulfilled = adj = escalations = unnecessary = 0
    resolved = local_resolved = abandoned = abandoned_after_recovery = 0
    token_bytes = 0
    durations: list[int] = []

    for e in trace.events:
        kind, p = e["kind"], e["payload"]
        if kind == "action":
            if p["action"]["kind"] in ENV_ACTION_KINDS:
                cs += 1
        elif kind == "coordination_message":
            msg += 1
        elif kind == "window_state":
            if p.get("event") == "opened":
                opened += 1
            elif p.get("event") == "closed" and p.get("state") == "fulfilled":
                fulfilled += 1
        elif kind == "gate_decision":
            if p.get("tier") == "adjudicator":
                adj += 1
            if p.get("adjudicator_request"):
                token_bytes += len(p["adjudicator_request"].encode("utf-8"))
            if p.get("adjudicator_reply"):
                token_bytes += len(p["adjudicator_reply"].encode("utf-8"))
            if p.get("verdict") == "escalate":
                escalations += 1
                ctx = p.get("solver_ctx")
                if ctx is not None:
                    replayed = replay_local_feasibility(ctx)
                    if replayed is not None and replayed.total_cost <= local_budget:
                        unnecessary += 1
        elif kind == "issue":
            event = p.get("event")
            if event == "resolved":
                resolved += 1
                if p.get("windows", 0) == 0:
                    local_resolved += 1
                durations.append(int(p.get("duration", 0)))
            elif event == "abandoned":
                abandoned += 1
                if p.get("recovery_activated") or p.get("windows", 0) > 0:
                    abandoned_after_recovery += 1

    payload = end["payload"]
    return EpisodeMetrics(
        episode_id=payload.get("episode_id") or (spec.episode_id if spec else None),
        class_label=payload.get("class_label") or (spec.class_label if spec else None),
        tsr=float(payload["completion"]),
        cs=cs,
        msg=msg,
        escalations=escalations,
        adjudicator_calls=adj,
        token_cost=token_bytes / 4,
        windows_opened=opened,
        windows_fulfilled=fulfilled,
        issues_resolved=resolved,
        issues_abandoned=abandoned,
        lrr=(local_resolved / resolved) if resolved else None,
        uer=(unnecessary / escalations) if escalations else None,
        ecr=(fulfilled / opened) if opened else None,
        # of issues where a recovery attempt concluded, the share resolved;
        # abandonments that never activated recovery do not count against it
        rsr=(resolved / (resolved + abandoned_after_recovery))
        if (resolved + abandoned_after_recovery)
        else None,
        recovery_time_avg=(sum(durations) / len(durations)) if durations else None,
    )


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def _aggregate_rows(metrics: list[EpisodeMetrics]) -> dict:
    row: dict = {"n": len(metrics)}
    for name in MEAN_FIELDS:
        row[name] = _mean([getattr(m, name) for m in metrics])
    for name in RATIO_FIELDS:
        defined = [getattr(m, name) for m in metrics if getattr(m, name) is not None]
        row[name] = _mean(defined)
    return row


def aggregate(metrics: list[EpisodeMetrics]) -> dict:
    """Unweighted means; episodes whose ratio denominator was zero are left out
    of that ratio's mean. Includes a per-class breakdown."""
    if not metrics:
        raise ValueError("cannot aggregate zero episodes")
    out = _aggregate_rows(metrics)
    classes = sorted({m.class_label for m in metrics if m.class_label})
    out["per_class"] = {
        c: _aggregate_rows([m for m in metrics if m.class_label == c]) for c in classes
    }
    return out


def metrics_to_csv(metrics: list[EpisodeMetrics]) -> str:
    """One row per episode, then ALL + per-class aggregate rows."""
    fields = [
        "episode_id", "class_label", "tsr", "cs", "msg", "escalations",
        "adjudicator_calls", "token_cost", "windows_opened", "windows_fulfilled",
        "issues_resolved", "issues_abandoned", "lrr", "uer", "ecr", "rsr",
        "recovery_time_avg",
    ]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for m in metrics:
        writer.writerow({k: ("" if v is None else v) for k, v in m.to_dict().items()})
    agg = aggregate(metrics)
    per_class = agg.pop("per_class")

    def agg_row(label: str, row: dict) -> dict:
        out = {k: "" for k in fields}
        out["episode_id"] = label
        out["class_label"] = ""
        for k, v in row.items():
            if k in fields and v is not None:
                out[k] = v
        return out

    writer.writerow(agg_row("ALL", agg))
    for c, row in per_class.items():
        writer.writerow(agg_row(f"CLASS_{c}", row))
    return buf.getvalue()


# -- calibration ---------------------------------------------------------------


@dataclass
class CalibrationConfig:
    """The Θ search space plus the utility's penalty coefficients."""

    weight_grid: list[tuple[int, int, int, int, int]]
    threshold_grid: list[tuple[float, float]]
    lam_time: float = 0.1
    lam_redundant: float = 0.2
    lam_llm: float = 0.05
    local_budget: int = LOCAL_BUDGET

    def __post_init__(self):
        if not self.weight_grid or not self.threshold_grid:
            raise ValueError("calibration grids must be non-empty")
        if min(self.lam_time, self.lam_redundant, self.lam_llm) < 0:
            raise ValueError("penalty coefficients must be non-negative")
        for w in self.weight_grid:
            ok, problems = validate_weights(GateWeights.from_sequence(w))
            if not ok:
                raise ValueError(f"weight grid entry {w} rejected: {'; '.join(problems)}")
        for lo, hi in self.threshold_grid:
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"bad threshold pair ({lo}, {hi})")

    def cells(self) -> list[tuple[tuple[int, ...], tuple[float, float]]]:
        return sorted(
            (tuple(w), (float(lo), float(hi)))
            for w in self.weight_grid
            for lo, hi in self.threshold_grid
        )


def _cell_raw_scores(
    episodes: list[EpisodeSpec],
    weights: tuple[int, ...],
    thresholds: tuple[float, float],
    backend,
    base: RunConfig | None,
    local_budget: int,
) -> dict:
    """Run every calibration episode under one Θ and average the raw terms."""
    base = base or RunConfig()
    cfg_kwargs = dict(
        weights=GateWeights.from_sequence(weights),
        thresholds=GateThresholds(*thresholds),
        rules_on=base.rules_on,
        score_on=base.score_on,
        adjudicator_on=base.adjudicator_on,
        rule_toggles=base.rule_toggles,
        partition_on=base.partition_on,
        window_timeout=base.window_timeout,
        cooldown_duration=base.cooldown_duration,
        step_budget=base.step_budget,
        seed=base.seed,
        observe_radius=base.observe_radius,
        features=base.features,
        allow_unvalidated=base.allow_unvalidated,
    )
    cfg = RunConfig(**cfg_kwargs)
    metrics = [compute_metrics(run_episode(e, cfg, backend), e, local_budget) for e in episodes]
    tsr = _mean([m.tsr for m in metrics])
    rec = [m.recovery_time_avg for m in metrics if m.recovery_time_avg is not None]
    zero_yield = [
        (m.windows_opened - m.windows_fulfilled) / m.windows_opened
        for m in metrics
        if m.windows_opened
    ]
    llm = _mean([m.token_cost for m in metrics])
    return {
        "weights": list(weights),
        "thresholds": list(thresholds),
        "tsr": tsr,
        "c_time": _mean(rec) or 0.0,
        "c_redundant": _mean(zero_yield) or 0.0,
        "c_llm": llm or 0.0,
    }


def _cell_worker(args: tuple) -> dict:
    spec_dicts, weights, thresholds, local_budget = args
    episodes = [EpisodeSpec.from_dict(d) for d in spec_dicts]
    return _cell_raw_scores(episodes, weights, thresholds, None, None, local_budget)


def calibrate(
    episodes: list[EpisodeSpec],
    config: CalibrationConfig,
    backend=None,
    base: RunConfig | None = None,
    jobs: int = 1,
) -> tuple[dict, list[dict]]:
    """Grid-search Θ = (weights, thresholds) maximizing
    mean TSR − λ1·Ĉ_time − λ2·Ĉ_redundant − λ3·Ĉ_LLM,
    with each Ĉ normalized to [0, 1] by its maximum over the grid.

    Returns (best Θ, full objective table). Ties go to the lexicographically
    smallest Θ, so the argmax never depends on enumeration order."""
    if not episodes:
        raise ValueError("calibration needs at least one episode")
    cells = config.cells()

    if jobs > 1 and backend is None and base is None:
        spec_dicts = [e.to_dict() for e in episodes]
        args = [(spec_dicts, w, t, config.local_budget) for w, t in cells]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cell_worker, args))
    else:
        rows = [
            _cell_raw_scores(episodes, w, t, backend, base, config.local_budget)
            for w, t in cells
        ]

    max_time = max(r["c_time"] for r in rows)
    max_red = max(r["c_redundant"] for r in rows)
    max_llm = max(r["c_llm"] for r in rows)
    for r in rows:
        r["c_time_hat"] = r["c_time"] / max_time if max_time > 0 else 0.0
        r["c_redundant_hat"] = r["c_redundant"] / max_red if max_red > 0 else 0.0
        r["c_llm_hat"] = r["c_llm"] / max_llm if max_llm > 0 else 0.0
        r["objective"] = (
            r["tsr"]
            - config.lam_time * r["c_time_hat"]
            - config.lam_redundant * r["c_redundant_hat"]
            - config.lam_llm * r["c_llm_hat"]
        )

    def theta_key(row: dict) -> tuple:
        return (tuple(row["weights"]), tuple(row["thresholds"]))

    best_objective = max(r["objective"] for r in rows)
    chosen = min((r for r in rows if r["objective"] == best_objective), key=theta_key)
    theta = {"weights": list(chosen["weights"]), "thresholds": list(chosen["thresholds"])}
    return theta, rows


def split_templates(
    episodes: list[EpisodeSpec], calib_fraction: float, seed: int = 0
) -> dict[str, list[int]]:
    """Template-level calib/test split, stratified by (class, agent count).
    All seeds of one template land on the same side."""
    if not (0.0 < calib_fraction < 1.0):
        raise ValueError("calib_fraction must be in (0, 1)")
    strata: dict[tuple, set[int]] = {}
    for e in episodes:
        key = (e.class_label, e.meta.get("agent_count"))
        strata.setdefault(key, set()).add(e.template_id)
    rng = random.Random(seed)
    calib: set[int] = set()
    for key in sorted(strata):
        tids = sorted(strata[key])
        rng.shuffle(tids)
        calib.update(tids[: round(calib_fraction * len(tids))])
    all_tids = {e.template_id for e in episodes}
    test = all_tids - calib
    if not calib or not test:
        raise ValueError("calib_fraction leaves an empty partition")
    return {"calib": sorted(calib), "test": sorted(test)}


# -- adjudicator backends -------------------------------------------------------


def make_backend(name: str | None):
    """Backend factory for run configs.

    mock (default)    — None; the runtime installs the threshold-midpoint mock.
    scripted:<file>   — replays recorded replies, one JSON object per line.
    remote:<url>      — POSTs decision cards to an HTTP adjudicator.
    """
    if name in (None, "", "mock"):
        return None
    if name.startswith("scripted:"):
        path = Path(name.split(":", 1)[1])
        replies = [line for line in path.read_text().splitlines() if line.strip()]
        return ScriptedAdjudicator(replies)
    if name.startswith("remote:"):
        return RemoteAdjudicator(name.split(":", 1)[1])
    raise ValueError(f"unknown backend {name!r} (use mock, scripted:<file>, remote:<url>)")


def adjudicator_replies(trace: Trace) -> list[str]:
    """The reply transcript of a run, in call order — feed to a scripted
    backend to replay the run without the original adjudicator."""
    return [
        e["payload"]["adjudicator_reply"]
        for e in trace.events
        if e["kind"] == "gate_decision" and e["payload"].get("adjudicator_reply")
    ]
