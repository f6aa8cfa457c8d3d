import pytest

from gatecraft import (
    Chest,
    Inventory,
    IssueType,
    PrivateState,
    StateEvent,
    local_skip,
    observe,
    plan_local_recovery,
    update_private_state,
)
from gatecraft.memory import BlockageRecord
from gatecraft.solver import CooldownTable, CoordinationOutcome

from conftest import make_world, plan_for


def _blocked_state(world, item, agent_id="a0", node=0, count=1):
    plan = plan_for(world)
    view = observe(world, agent_id, plan=plan)
    state = PrivateState(agent_id=agent_id)
    update_private_state(state, StateEvent(kind="init", view=view))
    blockage = BlockageRecord(issue=IssueType.MISSING_MATERIAL, node_id=node,
                              item=item, count=count)
    return state, view, blockage


def test_craft_from_held_inputs_is_preferred():
    world = make_world(
        [(0, (0, 0, 1), "oak_planks")],
        agents={"a0": ((0, 0, 0), {"oak_log": 1})},
        sources=[("oak_planks", (10, 0, 0), 8)],
    )
    state, view, blockage = _blocked_state(world, "oak_planks")
    plan = plan_local_recovery(state, view, world.recipes, blockage)
    assert plan is not None
    assert plan.steps[0].kind == "craft" and plan.steps[0].recipe_id == "planks_from_log"
    assert plan.total_cost == 1  # stationless, inputs in hand


def test_collect_oracle_cost_travel_plus_units():
    world = make_world(
        [(0, (0, 0, 1), "sandstone")],
        sources=[("sandstone", (18, 0, 0), 5)],
    )
    state, view, blockage = _blocked_state(world, "sandstone", count=2)
    plan = plan_local_recovery(state, view, world.recipes, blockage)
    # travel ceil((18-3)/5)=3 plus 2 collects
    assert plan is not None and plan.total_cost == 5
    assert plan.steps[0].kind == "collect" and plan.steps[0].units == 2


def test_far_sources_are_ignored():
    world = make_world(
        [(0, (0, 0, 1), "sandstone")],
        sources=[("sandstone", (60, 0, 0), 5)],
    )
    state, view, blockage = _blocked_state(world, "sandstone")
    assert plan_local_recovery(state, view, world.recipes, blockage,
                               far_threshold=40) is None


def test_smelt_requires_visible_station():
    world = make_world(
        [(0, (0, 0, 1), "iron_ingot")],
        agents={"a0": ((0, 0, 0), {"iron_ore": 1, "coal": 1})},
    )
    state, view, blockage = _blocked_state(world, "iron_ingot")
    assert plan_local_recovery(state, view, world.recipes, blockage) is None
    world2 = make_world(
        [(0, (0, 0, 1), "iron_ingot")],
        agents={"a0": ((0, 0, 0), {"iron_ore": 1, "coal": 1})},
        scaffold={(10, 0, 0): "furnace"},
    )
    state, view, blockage = _blocked_state(world2, "iron_ingot")
    plan = plan_local_recovery(state, view, world2.recipes, blockage)
    # travel ceil((10-3)/5)=2 plus one smelt
    assert plan is not None and plan.steps[0].kind == "smelt" and plan.total_cost == 3


def test_detour_chains_collect_legs_from_moving_cursor():
    world = make_world(
        [(0, (0, 0, 1), "oak_planks")],
        sources=[("oak_log", (13, 0, 0), 2)],
    )
    state, view, blockage = _blocked_state(world, "oak_planks")
    plan = plan_local_recovery(state, view, world.recipes, blockage)
    assert plan is not None and len(plan.steps) == 2
    legs = plan.steps
    assert legs[0].op == "collect" and legs[0].units == 1  # one log yields 4 planks
    assert legs[1].op == "craft" and legs[1].recipe_id == "planks_from_log"
    # travel ceil(10/5)=2 + 1 collect, then stationless craft
    assert plan.total_cost == 4


def test_chest_counts_as_supply():
    world = make_world(
        [(0, (0, 0, 1), "sandstone")],
        chests=[Chest(position=(4, 0, 0), inventory=Inventory({"sandstone": 3}))],
    )
    state, view, blockage = _blocked_state(world, "sandstone")
    plan = plan_local_recovery(state, view, world.recipes, blockage)
    assert plan is not None and plan.steps[0].source_ref == ("chest", 0, "sandstone")


def test_insufficient_supply_is_not_planned():
    world = make_world(
        [(0, (0, 0, 1), "sandstone")],
        sources=[("sandstone", (5, 0, 0), 1)],
    )
    state, view, blockage = _blocked_state(world, "sandstone", count=3)
    assert plan_local_recovery(state, view, world.recipes, blockage) is None


def test_no_blockage_no_plan():
    world = make_world([(0, (0, 0, 1), "stone")])
    plan = plan_for(world)
    view = observe(world, "a0", plan=plan)
    state = PrivateState(agent_id="a0")
    assert plan_local_recovery(state, view, world.recipes, None) is None


# -- skip selection -----------------------------------------------------------------


def test_local_skip_picks_smallest_independent_ready_node():
    from gatecraft import TaskGraph
    g = TaskGraph([0, 1, 2, 3], [(0, 1), (0, 2)])
    state = PrivateState(agent_id="a0")
    assert local_skip(state, g, placed=set(), blocked=0) == 3
    assert local_skip(state, g, placed={3}, blocked=0) is None  # 1,2 depend on 0
    assert local_skip(state, g, placed=set(), blocked=3) == 0
    assert local_skip(state, g, placed=set(), blocked=0, allowed={1, 2}) is None


# -- cooldown discipline ---------------------------------------------------------------


def test_cooldown_levels_escalate_and_expire():
    table = CooldownTable(duration=30)
    e = table.register_failure("a0", IssueType.TRANSFER_NEEDED, CoordinationOutcome.TIMEOUT, now=0)
    assert e.level == 1 and e.expires_at == 30
    assert table.level("a0", IssueType.TRANSFER_NEEDED, now=10) == 1
    assert table.level("a0", IssueType.TRANSFER_NEEDED, now=30) == 0  # expired
    e = table.register_failure("a0", IssueType.TRANSFER_NEEDED, CoordinationOutcome.TIMEOUT, now=30)
    assert e.level == 2 and e.consecutive_failures == 2


def test_cannot_supply_jumps_to_max_level():
    table = CooldownTable()
    e = table.register_failure("a0", "transfer_needed", CoordinationOutcome.CANNOT_SUPPLY, now=0)
    assert e.level == 3


def test_blocked_after_two_consecutive_failures_persists():
    table = CooldownTable(duration=10)
    table.register_failure("a0", "x", CoordinationOutcome.TIMEOUT, now=0)
    assert not table.blocked("a0", "x", now=1)
    table.register_failure("a0", "x", CoordinationOutcome.TIMEOUT, now=1)
    assert table.blocked("a0", "x", now=2)
    # the zero-yield streak outlives the timed cooldown
    assert table.blocked("a0", "x", now=100)


def test_fulfilled_window_resets_pair():
    table = CooldownTable()
    table.register_failure("a0", "x", CoordinationOutcome.CANNOT_SUPPLY, now=0)
    table.register_failure("a0", "x", CoordinationOutcome.TIMEOUT, now=1)
    table.register_success("a0", "x")
    e = table.entry("a0", "x")
    assert (e.level, e.consecutive_failures, e.expires_at) == (0, 0, 0)
    assert not table.blocked("a0", "x", now=2)


def test_register_failure_rejects_fulfilled():
    table = CooldownTable()
    with pytest.raises(ValueError):
        table.register_failure("a0", "x", CoordinationOutcome.FULFILLED, now=0)
