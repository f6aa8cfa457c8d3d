"""Benchmark scenario templates and the generated episode dataset.

Episodes come in four blockage classes, each engineered around one injected
bottleneck node (always node 0, assigned to agent a0):

  A — locally recoverable: the missing item is at hand or one craft away.
  B — genuine transfer bottleneck: the item sits in a teammate's partition
      with no local route, so the gate's deterministic rules escalate.
  C — ambiguous middle ground: a local route exists but is expensive, and the
      normalized score lands in the gray band between the two thresholds.
  D — coordination fault: structurally class B, but the designated holder is
      scripted to refuse or ignore requests.

Every generated spec is checked by `validate_class_property`, which rebuilds
the first decision a0 faces at sim time zero and asserts the class-defining
structure (issue type, feature vector, verdict, local-plan cost band).
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .gate import (
    FeatureConfig,
    GateThresholds,
    GateWeights,
    MockAdjudicator,
    extract_features,
    gate_decide,
)
from .memory import PrivateState, StateEvent, detect_issue, update_private_state
from .protocol import TeamPublicView
from .solver import CooldownTable
from .world import (
    AgentBody,
    BlockSpec,
    Blueprint,
    Chest,
    Inventory,
    PlanInfo,
    Recipe,
    RecipeBook,
    Source,
    TaskGraph,
    WorldState,
    default_recipes,
    observe,
)

SEEDS_PER_TEMPLATE = 5
REGION_RADIUS = 12

FAMILIES = ("tower", "wall", "house", "courtyard", "workshop")
A_FLAVORS = ("stay", "eq_driver", "nol_driver")

BULK_MATERIAL = {"a0": "stone_bricks", "a1": "spruce_planks", "a2": "birch_planks"}
REGION_CENTERS = {"a0": (0, 0, 0), "a1": (24, 0, 0), "a2": (0, 0, 24)}

# Family shapes: block offsets from the region center plus intra-component
# prerequisite edges (local indices). Components never span agents.
FAMILY_SHAPES: dict[str, tuple[list[tuple[int, int, int]], list[tuple[int, int]]]] = {
    "tower": (
        [(0, 0, 1), (0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)],
        [(0, 1), (1, 2), (2, 3), (3, 4)],
    ),
    "wall": (
        [(0, 0, 1), (1, 0, 1), (2, 0, 1), (0, 1, 1), (1, 1, 1), (2, 1, 1)],
        [(0, 3), (1, 4), (2, 5)],
    ),
    "house": (
        [(0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1), (0, 2, 1), (1, 2, 1)],
        [(0, 2), (1, 3), (2, 4), (3, 4), (4, 5)],
    ),
    "courtyard": (
        [(0, 0, 1), (2, 0, 1), (0, 0, 3), (2, 0, 3)],
        [(0, 1), (0, 2), (1, 3), (2, 3)],
    ),
    "workshop": (
        [(0, 0, 1), (1, 0, 2), (-1, 0, 2), (0, 1, 2), (0, 2, 2)],
        [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)],
    ),
}

# Offsets whose distance lies in [5, 8]: close enough for L=3, never adjacent.
_NEAR_SOURCE_OFFSETS = [
    (3, 4), (4, 4), (5, 3), (4, 5), (6, 2), (5, 5), (6, 4), (0, 6), (6, 0), (7, 0), (8, 0),
]

# Responder spawn offsets with distance < 10 (strict), for R=3 setups.
_IMMEDIATE_SPAWN_OFFSETS = [
    (8, 0), (0, 8), (6, 4), (4, 6), (6, 3), (3, 6), (7, 0), (0, 7), (5, 5), (9, 0), (6, 6),
]


@dataclass(frozen=True)
class Template:
    """One scenario family instance; five seeds expand it into five episodes."""

    template_id: int
    class_label: str
    variant: str
    agent_count: int
    family: str


def dataset_templates() -> list[Template]:
    """The fixed 40-template roster: 10 per class, 6 two-agent + 4 three-agent."""
    out: list[Template] = []
    tid = 0
    for cls in "ABCD":
        for i in range(10):
            agent_count = 2 if i < 6 else 3
            family = FAMILIES[i % 5]
            if cls == "A":
                variant = A_FLAVORS[i % 3]
            elif cls == "B":
                variant = "standard"
            elif cls == "C":
                variant = "v1" if i % 2 == 0 else "v2"
            else:
                variant = "cannot_supply" if i % 2 == 0 else "silent"
            out.append(Template(tid, cls, variant, agent_count, family))
            tid += 1
    return out


@dataclass
class EpisodeSpec:
    """A fully serialized, self-contained episode definition.

    JSON-safe throughout: positions are 3-int lists, recipes plain dicts.
    `build_world` and `plan_info` reconstruct the simulator inputs.
    """

    episode_id: str
    template_id: int
    seed_index: int
    class_label: str
    variant: str
    agents: dict[str, dict]  # aid -> {"position": [x,y,z], "inventory": {item: n}}
    blocks: list  # [node_id, material, [x,y,z]]
    edges: list  # [u, v] pairs
    assigned: dict[str, list[int]]
    partition: dict[str, str]
    work_regions: dict[str, list]  # aid -> [[x,y,z], radius]
    recipes: list  # recipe dicts
    sources: list = field(default_factory=list)  # [item, [x,y,z], remaining]
    chests: list = field(default_factory=list)  # [[x,y,z], {item: n}]
    scaffold: list = field(default_factory=list)  # [[x,y,z], material]
    responder_script: dict[str, list[str]] = field(default_factory=dict)
    injected: list[int] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    # -- reconstruction ----------------------------------------------------

    def build_world(self) -> WorldState:
        blueprint = Blueprint(
            name=self.episode_id,
            blocks=tuple(
                BlockSpec(node_id=n, material=m, position=tuple(pos)) for n, m, pos in self.blocks
            ),
        )
        graph = TaskGraph([b[0] for b in self.blocks], [(u, v) for u, v in self.edges])
        recipes = RecipeBook(
            [
                Recipe(
                    recipe_id=r["recipe_id"],
                    kind=r["kind"],
                    output=(r["output"][0], int(r["output"][1])),
                    inputs=tuple((i, int(n)) for i, n in r["inputs"]),
                    station=r.get("station"),
                )
                for r in self.recipes
            ]
        )
        agents = {
            aid: AgentBody(
                agent_id=aid,
                position=tuple(cfg["position"]),
                inventory=Inventory({k: int(v) for k, v in cfg["inventory"].items()}),
            )
            for aid, cfg in sorted(self.agents.items())
        }
        sources = [Source(item=i, position=tuple(p), remaining=int(r)) for i, p, r in self.sources]
        chests = [Chest(position=tuple(p), inventory=Inventory(dict(inv))) for p, inv in self.chests]
        scaffold = {tuple(p): m for p, m in self.scaffold}
        return WorldState(
            blueprint=blueprint,
            graph=graph,
            recipes=recipes,
            agents=agents,
            sources=sources,
            chests=chests,
            scaffold=scaffold,
        )

    def plan_info(self, world: WorldState) -> PlanInfo:
        assignments = {n: aid for aid, nodes in self.assigned.items() for n in nodes}
        regions = {aid: (tuple(c), int(r)) for aid, (c, r) in self.work_regions.items()}
        return PlanInfo.for_world(world, assignments, partition=self.partition, work_regions=regions)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "template_id": self.template_id,
            "seed_index": self.seed_index,
            "class_label": self.class_label,
            "variant": self.variant,
            "agents": self.agents,
            "blocks": self.blocks,
            "edges": self.edges,
            "assigned": self.assigned,
            "partition": self.partition,
            "work_regions": self.work_regions,
            "recipes": self.recipes,
            "sources": self.sources,
            "chests": self.chests,
            "scaffold": self.scaffold,
            "responder_script": self.responder_script,
            "injected": self.injected,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeSpec":
        return cls(
            episode_id=d["episode_id"],
            template_id=int(d["template_id"]),
            seed_index=int(d["seed_index"]),
            class_label=d["class_label"],
            variant=d["variant"],
            agents=d["agents"],
            blocks=[[int(n), m, list(p)] for n, m, p in d["blocks"]],
            edges=[[int(u), int(v)] for u, v in d["edges"]],
            assigned={aid: [int(n) for n in nodes] for aid, nodes in d["assigned"].items()},
            partition=dict(d["partition"]),
            work_regions=d["work_regions"],
            recipes=d["recipes"],
            sources=d.get("sources", []),
            chests=d.get("chests", []),
            scaffold=d.get("scaffold", []),
            responder_script=d.get("responder_script", {}),
            injected=[int(n) for n in d.get("injected", [])],
            meta=d.get("meta", {}),
        )


def _recipe_dicts(extra: list[Recipe] | None = None) -> list[dict]:
    book = default_recipes()
    recipes = [book.recipes[k] for k in sorted(book.recipes)] + list(extra or [])
    return [
        {
            "recipe_id": r.recipe_id,
            "kind": r.kind,
            "output": [r.output[0], r.output[1]],
            "inputs": [[i, n] for i, n in r.inputs],
            "station": r.station,
        }
        for r in recipes
    ]


def _jitter(rng: random.Random | None, lo: int, hi: int, default: int = 0) -> int:
    return default if rng is None else rng.randint(lo, hi)


def _assemble(template: Template, seed_index: int, rng: random.Random | None) -> EpisodeSpec:
    """Lay out one candidate episode. With rng=None the canonical (unjittered)
    layout is produced; the canonical form of every template is valid by
    construction and serves as the fallback when jitter sampling fails."""
    cls, variant = template.class_label, template.variant
    aids = [f"a{i}" for i in range(template.agent_count)]

    spawn: dict[str, tuple[int, int, int]] = {}
    sx, sz = _jitter(rng, -1, 1), _jitter(rng, -1, 1)
    spawn["a0"] = (sx, 0, sz)
    for aid in aids[1:]:
        cx, cy, cz = REGION_CENTERS[aid]
        spawn[aid] = (cx + _jitter(rng, -1, 1), cy, cz + _jitter(rng, -1, 1))

    # Class-specific responder placement (a1 is always the counterparty).
    if cls in ("B", "D"):
        spawn["a1"] = (sx + _jitter(rng, 11, 14, default=12), 0, sz)
    elif cls == "C" and variant == "v1":
        ox, oz = (8, 0) if rng is None else rng.choice(_IMMEDIATE_SPAWN_OFFSETS)
        spawn["a1"] = (sx + ox, 0, sz + oz)

    # Injected bottleneck chain: node 0 plus `dep_count` dependents, all a0's.
    if cls == "A":
        item = "oak_planks" if variant == "eq_driver" else "sandstone"
        dep_count = 4 if variant == "nol_driver" else 1
    elif cls in ("B", "D"):
        item, dep_count = "iron_ingot", 4
    elif variant == "v1":
        item, dep_count = "ornate_sandstone", 0
    else:
        item, dep_count = "stained_glass", 1

    blocks: list = []
    edges: list = []
    injected = list(range(dep_count + 1))
    blocks.append([0, item, [sx + 1, 0, sz - 2]])
    for i in range(1, dep_count + 1):
        blocks.append([i, BULK_MATERIAL["a0"], [sx + 1, 0, sz - 2 - i]])
        edges.append([i - 1, i])

    # Per-agent family components, prerequisite-closed within each agent.
    assigned = {aid: [] for aid in aids}
    assigned["a0"] = list(injected)
    next_id = len(injected)
    shape_offsets, shape_edges = FAMILY_SHAPES[template.family]
    for aid in aids:
        cx, cy, cz = REGION_CENTERS[aid]
        base = next_id
        for dx, dy, dz in shape_offsets:
            blocks.append([next_id, BULK_MATERIAL[aid], [cx + dx, cy + dy, cz + dz]])
            assigned[aid].append(next_id)
            next_id += 1
        edges.extend([base + u, base + v] for u, v in shape_edges)

    # Exact preloads: every assigned node's material except the bottleneck's.
    loads: dict[str, Counter] = {aid: Counter() for aid in aids}
    owner_of = {n: aid for aid, nodes in assigned.items() for n in nodes}
    for node_id, material, _pos in blocks:
        if node_id == 0:
            continue
        loads[owner_of[node_id]][material] += 1

    partition = {BULK_MATERIAL[aid]: aid for aid in aids}
    sources: list = []
    scaffold: list = []
    extra_recipes: list[Recipe] = []
    responder_script: dict[str, list[str]] = {}

    if cls == "A":
        if variant == "eq_driver":
            loads["a0"]["oak_log"] += 1
            partition["oak_log"] = "a1"
            partition["oak_planks"] = "a0"
        else:
            ox, oz = (3, 4) if rng is None else rng.choice(_NEAR_SOURCE_OFFSETS)
            sources.append(["sandstone", [sx + ox, 0, sz + oz], 1 + _jitter(rng, 0, 2)])
            partition["sandstone"] = "a0"
    elif cls in ("B", "D"):
        loads["a1"]["iron_ingot"] += 1
        partition["iron_ingot"] = "a1"
        if cls == "D":
            responder_script["a1"] = [variant] * 3
    else:  # class C: an expensive two-leg collect detour plus one craft/smelt
        j = (lambda: _jitter(rng, -2, 2)) if rng is not None else (lambda: 0)
        near = ["sandstone" if variant == "v1" else "sand", [sx + 38 + j(), 0, sz + j()], 4 + _jitter(rng, 0, 2)]
        far = ["coal", [sx + 19 + j(), 0, sz + 33 + j()], 2 + _jitter(rng, 0, 2)]
        sources.extend([near, far])
        if variant == "v1":
            scaffold.append([[sx - 20 + j(), 0, sz + j()], "crafting_table"])
            extra_recipes.append(
                Recipe(
                    "ornate_sandstone_assembly", "craft", ("ornate_sandstone", 1),
                    (("sandstone", 4), ("coal", 2)), station="crafting_table",
                )
            )
            loads["a1"]["ornate_sandstone"] += 1
            partition["ornate_sandstone"] = "a1"
        else:
            scaffold.append([[sx - 20 + j(), 0, sz + j()], "furnace"])
            extra_recipes.append(
                Recipe(
                    "stained_glass_mix", "smelt", ("stained_glass", 1),
                    (("sand", 4), ("coal", 2)), station="furnace",
                )
            )
            partition["sand"] = "a1"

    agents = {
        aid: {"position": list(spawn[aid]), "inventory": {k: int(v) for k, v in sorted(loads[aid].items())}}
        for aid in aids
    }
    regions = {aid: [list(REGION_CENTERS[aid]), REGION_RADIUS] for aid in aids}

    return EpisodeSpec(
        episode_id=f"{cls.lower()}{template.template_id:02d}s{seed_index}",
        template_id=template.template_id,
        seed_index=seed_index,
        class_label=cls,
        variant=variant,
        agents=agents,
        blocks=blocks,
        edges=edges,
        assigned=assigned,
        partition=partition,
        work_regions=regions,
        recipes=_recipe_dicts(extra_recipes),
        sources=sources,
        scaffold=scaffold,
        responder_script=responder_script,
        injected=injected,
        meta={
            "family": template.family,
            "agent_count": template.agent_count,
            "class": cls,
            "variant": variant,
        },
    )


def _rng_for(dataset_seed: int, template_id: int, seed_index: int) -> random.Random:
    return random.Random((dataset_seed * 10007 + template_id) * 101 + seed_index)


def build_episode(template: Template, seed_index: int, dataset_seed: int = 0) -> EpisodeSpec:
    """Sample a jittered instance of the template whose class property holds;
    fall back to the canonical layout if sampling keeps missing (it cannot
    miss structurally, only on geometric cost bands)."""
    rng = _rng_for(dataset_seed, template.template_id, seed_index)
    for _ in range(100):
        spec = _assemble(template, seed_index, rng)
        try:
            validate_class_property(spec)
        except ValueError:
            continue
        return spec
    spec = _assemble(template, seed_index, None)
    validate_class_property(spec)
    return spec


# -- class-property validation ----------------------------------------------

C_COST_BAND = (31, 38)
_PROBE_THRESHOLDS = GateThresholds(0.4, 0.5)


def probe_bottleneck(
    spec: EpisodeSpec,
    weights: GateWeights | None = None,
    thresholds: GateThresholds | None = None,
) -> dict:
    """Rebuild the decision a0 faces at sim time zero and run the real gate on
    it (mock adjudicator). Returns the measured facts for assertions."""
    world = spec.build_world()
    plan = spec.plan_info(world)
    view = observe(world, "a0", radius=50, plan=plan, partition_on=True)
    state = PrivateState(agent_id="a0")
    update_private_state(state, StateEvent(kind="init", view=view))
    blockage = detect_issue(state, view, world.graph, world.recipes)
    if blockage is None:
        return {"issue": None}
    team = TeamPublicView(positions=dict(view.teammates), designated_owner=dict(spec.partition))
    fv, recovery = extract_features(
        view, world.graph, state, team, CooldownTable(), world.recipes,
        blockage=blockage, config=FeatureConfig(),
    )
    th = thresholds or _PROBE_THRESHOLDS
    decision = gate_decide(
        blockage.issue, fv, weights or GateWeights(), th,
        adjudicator=MockAdjudicator(th), blockage=blockage, plan=recovery,
    )
    return {
        "issue": blockage.issue.value,
        "item": blockage.item,
        "node_id": blockage.node_id,
        "fv": fv.as_tuple() if hasattr(fv, "as_tuple") else (fv.C, fv.R, fv.I, fv.L, fv.H),
        "plan_cost": recovery.total_cost if recovery is not None else None,
        "verdict": decision.verdict,
        "tier": decision.tier,
        "score_norm": decision.score_norm,
    }


def _require(cond: bool, spec: EpisodeSpec, msg: str) -> None:
    if not cond:
        raise ValueError(f"{spec.episode_id}: {msg}")


def validate_class_property(spec: EpisodeSpec) -> dict:
    """Assert the class-defining structure of a spec; returns the probe facts.

    Raises ValueError with a precise reason when any check fails, so the
    generator's sampling loop can reject a bad jitter and try again.
    """
    _require(spec.injected and spec.injected[0] == 0, spec, "bottleneck must be node 0")
    _require(0 in spec.assigned.get("a0", []), spec, "node 0 must belong to a0")
    world = spec.build_world()  # also runs blueprint/graph well-formedness checks
    _require(
        len(spec.agents) == spec.meta.get("agent_count"), spec, "agent count mismatch"
    )

    # Preloads cover every assigned node except the bottleneck.
    owner_of = {n: aid for aid, nodes in spec.assigned.items() for n in nodes}
    need: dict[str, Counter] = {aid: Counter() for aid in spec.agents}
    for node_id, material, _pos in spec.blocks:
        if node_id != 0:
            need[owner_of[node_id]][material] += 1
    for aid, counts in need.items():
        inv = spec.agents[aid]["inventory"]
        for material, n in counts.items():
            _require(inv.get(material, 0) >= n, spec, f"{aid} preload misses {material}")

    probe = probe_bottleneck(spec)
    _require(probe["issue"] is not None, spec, "no issue detected at t=0")
    _require(probe["node_id"] == 0, spec, "issue must bind to the bottleneck node")
    fv = probe["fv"]
    cls, variant = spec.class_label, spec.variant

    if cls == "A":
        _require(probe["issue"] == "missing_material", spec, f"A must miss material, got {probe['issue']}")
        _require(probe["verdict"] == "stay_local", spec, "A must stay local under defaults")
        if variant == "stay":
            _require(fv[3] == 3 and fv[0] <= 1, spec, f"stay flavor needs L=3, C<=1, got {fv}")
            _require(probe["tier"] == "rule", spec, "stay flavor must short-circuit on rules")
        elif variant == "eq_driver":
            _require(fv == (1, 1, 1, 2, 0), spec, f"eq_driver fv drifted: {fv}")
            _require(probe["tier"] == "score", spec, "eq_driver must be decided by score")
        else:
            _require(fv == (2, 0, 1, 3, 0), spec, f"nol_driver fv drifted: {fv}")
            _require(probe["tier"] == "score", spec, "nol_driver must be decided by score")
        _require(probe["plan_cost"] is not None and probe["plan_cost"] <= 4, spec, "A local fix must be cheap")
    elif cls in ("B", "D"):
        _require(probe["issue"] == "transfer_needed", spec, f"{cls} must need a transfer, got {probe['issue']}")
        _require(probe["verdict"] == "escalate" and probe["tier"] == "rule", spec, "transfer rule must fire")
        _require(fv[1] >= 2, spec, f"responder must read as resource-viable, got {fv}")
        _require(probe["plan_cost"] is None, spec, "no local route may exist")
        holder_inv = spec.agents["a1"]["inventory"]
        _require(holder_inv.get(probe["item"], 0) >= 1, spec, "designated holder must own the item")
        if cls == "D":
            script = spec.responder_script.get("a1", [])
            _require(len(script) >= 2 and all(s == variant for s in script), spec, "bad responder script")
    else:
        _require(probe["issue"] == "missing_material", spec, f"C must miss material, got {probe['issue']}")
        _require(probe["tier"] == "adjudicator", spec, f"C must reach the adjudicator, got {probe['tier']}")
        _require(probe["verdict"] == "escalate", spec, "mock adjudicator should lean escalate here")
        _require(0.4 < probe["score_norm"] < 0.5, spec, f"score {probe['score_norm']} left the gray band")
        lo, hi = C_COST_BAND
        _require(
            probe["plan_cost"] is not None and lo <= probe["plan_cost"] <= hi,
            spec, f"local detour cost {probe['plan_cost']} outside [{lo}, {hi}]",
        )
        expected = (0, 3, 1, 1, 0) if variant == "v1" else (1, 1, 1, 1, 0)
        _require(fv == expected, spec, f"{variant} fv drifted: {fv}")

    # Stations must sit outside every work region (they are shared detour
    # infrastructure, not anyone's claim).
    for pos, _mat in spec.scaffold:
        for aid, (center, radius) in spec.work_regions.items():
            dx = pos[0] - center[0]
            dy = pos[1] - center[1]
            dz = pos[2] - center[2]
            _require(dx * dx + dy * dy + dz * dz > radius * radius, spec,
                     f"station at {pos} inside {aid}'s region")
    return probe


# -- dataset assembly ---------------------------------------------------------


def generate_dataset(dataset_seed: int = 0) -> tuple[dict, list[EpisodeSpec]]:
    """All templates x seeds, plus a manifest summarizing the composition."""
    templates = dataset_templates()
    episodes = [
        build_episode(t, s, dataset_seed) for t in templates for s in range(SEEDS_PER_TEMPLATE)
    ]
    manifest = {
        "dataset_seed": dataset_seed,
        "templates": len(templates),
        "seeds_per_template": SEEDS_PER_TEMPLATE,
        "total_episodes": len(episodes),
        "per_class": {c: sum(1 for e in episodes if e.class_label == c) for c in "ABCD"},
        "two_agent_episodes": sum(1 for e in episodes if e.meta["agent_count"] == 2),
        "three_agent_episodes": sum(1 for e in episodes if e.meta["agent_count"] == 3),
        "episode_ids": [e.episode_id for e in episodes],
    }
    return manifest, episodes


def save_dataset(manifest: dict, episodes: list[EpisodeSpec], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with (out / "episodes.jsonl").open("w") as fh:
        for spec in episodes:
            fh.write(json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
    return out


def load_dataset(path: str | Path) -> tuple[dict, list[EpisodeSpec]]:
    root = Path(path)
    if root.is_file():  # accept either the directory or the episodes file
        episodes_file, manifest_file = root, root.parent / "manifest.json"
    else:
        episodes_file, manifest_file = root / "episodes.jsonl", root / "manifest.json"
    manifest = json.loads(manifest_file.read_text()) if manifest_file.exists() else {}
    episodes = [
        EpisodeSpec.from_dict(json.loads(line))
        for line in episodes_file.read_text().splitlines()
        if line.strip()
    ]
    return manifest, episodes
