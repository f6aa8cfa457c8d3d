import pytest

from gatecraft import (
    Action,
    CoordinationMessage,
    Inventory,
    apply_action,
    open_window,
    respond_policy,
    settle_window,
    validate_message,
)
from gatecraft.protocol import (
    MAX_WINDOW_MESSAGES,
    MessageType,
    ReasonTag,
    TeamPublicView,
    WindowState,
    confirm_message,
    surplus_of,
)

from conftest import make_world


def _msg(**overrides):
    base = {
        "protocol": "REQUEST_MATERIAL",
        "from": "a0",
        "target": "a1",
        "item": "iron_ingot",
        "count": 1,
        "reason": "need_for_node",
        "time": 0,
    }
    base.update(overrides)
    return base


# -- message schema -----------------------------------------------------------


def test_valid_message_passes():
    assert validate_message(_msg())


def test_missing_field_rejected():
    m = _msg()
    del m["item"]
    assert not validate_message(m)


def test_extra_field_rejected():
    assert not validate_message(_msg(priority="high"))


def test_unknown_protocol_and_reason_rejected():
    assert not validate_message(_msg(protocol="SHOUT"))
    assert not validate_message(_msg(reason="because"))


def test_degenerate_values_rejected():
    assert not validate_message(_msg(count=0))
    assert not validate_message(_msg(count=True))
    assert not validate_message(_msg(time=-1))
    assert not validate_message(_msg(target="a0"))  # self-addressed
    assert not validate_message(_msg(item=""))
    assert not validate_message("not a dict")


# -- window lifecycle ------------------------------------------------------------


def test_open_window_posts_request():
    window, request = open_window(0, "transfer_needed", "a0", "a1", "iron_ingot", 1,
                                  now=5, timeout=20)
    assert window.state == WindowState.OPEN and window.deadline == 25
    assert request.protocol == MessageType.REQUEST_MATERIAL.value
    assert window.messages == [request]


def test_open_window_rejects_self_and_zero_count():
    with pytest.raises(ValueError):
        open_window(0, "transfer_needed", "a0", "a0", "x", 1, now=0)
    with pytest.raises(ValueError):
        open_window(0, "transfer_needed", "a0", "a1", "x", 0, now=0)


def test_window_caps_messages():
    window, request = open_window(0, "transfer_needed", "a0", "a1", "x", 1, now=0)
    for i in range(MAX_WINDOW_MESSAGES - 1):
        window.append(CoordinationMessage(
            protocol=MessageType.OFFER_TRANSFER.value, sender="a1", target="a0",
            item="x", count=1, reason=ReasonTag.NEED_FOR_NODE.value, time=i + 1))
    with pytest.raises(ValueError):
        window.append(request)


def test_respond_policy_offers_only_from_surplus():
    _, request = open_window(0, "transfer_needed", "a0", "a1", "iron_ingot", 2, now=0)
    offer = respond_policy(Inventory({"iron_ingot": 3}), {}, request, now=1)
    assert offer.protocol == MessageType.OFFER_TRANSFER.value and offer.count == 2
    # holder needs 2 of the 3 for its own nodes -> cannot cover the request
    refusal = respond_policy(Inventory({"iron_ingot": 3}), {"iron_ingot": 2}, request, now=1)
    assert refusal.protocol == MessageType.CANNOT_SUPPLY.value
    assert refusal.reason == ReasonTag.NO_SURPLUS.value


def test_surplus_of_subtracts_own_requirements():
    assert surplus_of(Inventory({"x": 5}), {"x": 2}, "x") == 3
    assert surplus_of(Inventory(), {"x": 1}, "x") == -1


def test_settle_cannot_supply_closes_window():
    world = make_world([(0, (0, 0, 1), "stone")],
                       agents={"a0": ((0, 0, 0), {}), "a1": ((1, 0, 0), {})})
    window, request = open_window(0, "transfer_needed", "a0", "a1", "x", 1, now=0)
    window.append(CoordinationMessage(
        protocol=MessageType.CANNOT_SUPPLY.value, sender="a1", target="a0",
        item="x", count=1, reason=ReasonTag.NO_SURPLUS.value, time=1))
    result = settle_window(window, world, now=1)
    assert result.state == WindowState.CANNOT_SUPPLY and window.closed_at == 1


def test_settle_times_out_at_deadline():
    world = make_world([(0, (0, 0, 1), "stone")],
                       agents={"a0": ((0, 0, 0), {}), "a1": ((1, 0, 0), {})})
    window, _ = open_window(0, "transfer_needed", "a0", "a1", "x", 1, now=0, timeout=10)
    assert settle_window(window, world, now=9).state == WindowState.OPEN
    assert settle_window(window, world, now=10).state == WindowState.TIMED_OUT


def test_settle_directs_responder_through_handshake():
    world = make_world([(0, (0, 0, 1), "stone")],
                       agents={"a0": ((0, 0, 0), {}), "a1": ((40, 0, 0), {"x": 1})})
    window, request = open_window(0, "transfer_needed", "a0", "a1", "x", 1, now=0)
    window.append(respond_policy(world.agents["a1"].inventory, {}, request, now=1))
    window.append(confirm_message(window, now=2))
    far = settle_window(window, world, now=3)
    assert far.responder_should_approach and not far.responder_should_transfer
    world.agents["a1"].position = (2, 0, 0)
    near = settle_window(window, world, now=4)
    assert near.responder_should_transfer
    # the verified transfer closes the exchange as fulfilled
    world, out = apply_action(world, "a1", Action.transfer("x", 1, "a0"))
    assert out.ok
    window.transfer_done = True
    assert settle_window(window, world, now=5).state == WindowState.FULFILLED


def test_settled_window_state_is_sticky():
    world = make_world([(0, (0, 0, 1), "stone")],
                       agents={"a0": ((0, 0, 0), {}), "a1": ((1, 0, 0), {})})
    window, _ = open_window(0, "transfer_needed", "a0", "a1", "x", 1, now=0, timeout=5)
    settle_window(window, world, now=5)
    assert window.state == WindowState.TIMED_OUT
    assert settle_window(window, world, now=50).state == WindowState.TIMED_OUT
    with pytest.raises(ValueError):
        window.append(CoordinationMessage(
            protocol=MessageType.OFFER_TRANSFER.value, sender="a1", target="a0",
            item="x", count=1, reason=ReasonTag.NEED_FOR_NODE.value, time=6))


# -- team public view ----------------------------------------------------------------


def test_team_view_advertised_surplus_lifecycle():
    team = TeamPublicView()
    assert team.surplus("a1", "x") == 0
    team.record_offer("a1", "x", 3)
    assert team.surplus("a1", "x") == 3
    team.consume_advert("a1", "x", 2)
    assert team.surplus("a1", "x") == 1
    team.consume_advert("a1", "x", 5)
    assert team.surplus("a1", "x") == 0
