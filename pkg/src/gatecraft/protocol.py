"""Typed coordination protocol: four message kinds, bounded windows, public team view.

A window is the unit of coordination accounting: opened by an escalation,
closed by exactly one terminal outcome (fulfilled, cannot_supply, timed_out)
no later than its deadline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .world import CoordinationMessage, Inventory, Position, WorldState, dist_sq


class MessageType(str, Enum):
    REQUEST_MATERIAL = "REQUEST_MATERIAL"
    OFFER_TRANSFER = "OFFER_TRANSFER"
    CONFIRM_TRANSFER = "CONFIRM_TRANSFER"
    CANNOT_SUPPLY = "CANNOT_SUPPLY"


class ReasonTag(str, Enum):
    NEED_FOR_NODE = "need_for_node"
    HANDOVER_COMPLETE = "handover_complete"
    NO_SURPLUS = "no_surplus"
    TIMEOUT = "timeout"


class WindowState(str, Enum):
    OPEN = "open"
    FULFILLED = "fulfilled"
    CANNOT_SUPPLY = "cannot_supply"
    TIMED_OUT = "timed_out"


MESSAGE_FIELDS = ("protocol", "from", "target", "item", "count", "reason", "time")
MAX_WINDOW_MESSAGES = 4


def validate_message(msg: dict) -> bool:
    """Schema check for one board message (dict form).

    Exactly the seven protocol fields, enum-valid protocol and reason tags,
    a positive integer count, distinct endpoints, non-negative time.
    """
    if not isinstance(msg, dict):
        return False
    if set(msg.keys()) != set(MESSAGE_FIELDS):
        return False
    if msg["protocol"] not in {m.value for m in MessageType}:
        return False
    if msg["reason"] not in {r.value for r in ReasonTag}:
        return False
    if not isinstance(msg["from"], str) or not isinstance(msg["target"], str):
        return False
    if not msg["from"] or not msg["target"] or msg["from"] == msg["target"]:
        return False
    if not isinstance(msg["item"], str) or not msg["item"]:
        return False
    if not isinstance(msg["count"], int) or isinstance(msg["count"], bool) or msg["count"] < 1:
        return False
    if not isinstance(msg["time"], int) or isinstance(msg["time"], bool) or msg["time"] < 0:
        return False
    return True


@dataclass
class CoordinationWindow:
    window_id: int
    issue: str
    requester: str
    responder: str
    item: str
    count: int
    opened_at: int
    deadline: int
    state: WindowState = WindowState.OPEN
    messages: list[CoordinationMessage] = field(default_factory=list)
    transfer_done: bool = False
    closed_at: int | None = None

    def append(self, msg: CoordinationMessage) -> None:
        if self.state != WindowState.OPEN:
            raise ValueError(f"window {self.window_id} is closed")
        if len(self.messages) >= MAX_WINDOW_MESSAGES:
            raise ValueError(f"window {self.window_id} already holds {MAX_WINDOW_MESSAGES} messages")
        if not validate_message(msg.to_dict()):
            raise ValueError("message failed schema validation")
        self.messages.append(msg)

    def has(self, mtype: MessageType) -> bool:
        return any(m.protocol == mtype.value for m in self.messages)

    def last(self, mtype: MessageType) -> CoordinationMessage | None:
        for m in reversed(self.messages):
            if m.protocol == mtype.value:
                return m
        return None

    def to_dict(self) -> dict:
        return {
            "window_id": self.window_id,
            "issue": self.issue,
            "requester": self.requester,
            "responder": self.responder,
            "item": self.item,
            "count": self.count,
            "opened_at": self.opened_at,
            "deadline": self.deadline,
            "state": self.state.value,
        }


def open_window(
    window_id: int,
    issue: str,
    requester: str,
    responder: str,
    item: str,
    count: int,
    now: int,
    timeout: int = 20,
) -> tuple[CoordinationWindow, CoordinationMessage]:
    """Open a request window and produce the REQUEST_MATERIAL message to post."""
    if count < 1:
        raise ValueError("request count must be >= 1")
    if requester == responder:
        raise ValueError("cannot open a window to oneself")
    window = CoordinationWindow(
        window_id=window_id, issue=issue, requester=requester, responder=responder,
        item=item, count=count, opened_at=now, deadline=now + timeout,
    )
    request = CoordinationMessage(
        protocol=MessageType.REQUEST_MATERIAL.value, sender=requester, target=responder,
        item=item, count=count, reason=ReasonTag.NEED_FOR_NODE.value, time=now,
    )
    window.append(request)
    return window, request


def surplus_of(inventory: Inventory, own_requirements: dict[str, int], item: str) -> int:
    """Units of `item` the holder can spare after its own unfinished requirements."""
    return inventory.count(item) - own_requirements.get(item, 0)


def respond_policy(
    inventory: Inventory,
    own_requirements: dict[str, int],
    request: CoordinationMessage,
    now: int,
) -> CoordinationMessage:
    """Deterministic responder rule: OFFER iff surplus covers the request,
    else CANNOT_SUPPLY."""
    spare = surplus_of(inventory, own_requirements, request.item)
    if spare >= request.count:
        return CoordinationMessage(
            protocol=MessageType.OFFER_TRANSFER.value, sender=request.target, target=request.sender,
            item=request.item, count=request.count, reason=ReasonTag.NEED_FOR_NODE.value, time=now,
        )
    return CoordinationMessage(
        protocol=MessageType.CANNOT_SUPPLY.value, sender=request.target, target=request.sender,
        item=request.item, count=request.count, reason=ReasonTag.NO_SURPLUS.value, time=now,
    )


def confirm_message(window: CoordinationWindow, now: int) -> CoordinationMessage:
    return CoordinationMessage(
        protocol=MessageType.CONFIRM_TRANSFER.value, sender=window.requester, target=window.responder,
        item=window.item, count=window.count, reason=ReasonTag.HANDOVER_COMPLETE.value, time=now,
    )


@dataclass
class SettleResult:
    state: WindowState
    responder_should_transfer: bool = False
    responder_should_approach: bool = False


def settle_window(window: CoordinationWindow, world: WorldState, now: int) -> SettleResult:
    """Advance a window's lifecycle.

    Terminal checks run in order: explicit refusal, verified transfer,
    deadline. Otherwise reports what the responder owes the exchange
    (approach or execute the transfer once in interaction range).
    """
    if window.state != WindowState.OPEN:
        return SettleResult(state=window.state)
    if window.has(MessageType.CANNOT_SUPPLY):
        window.state = WindowState.CANNOT_SUPPLY
        window.closed_at = now
        return SettleResult(state=window.state)
    if window.transfer_done:
        window.state = WindowState.FULFILLED
        window.closed_at = now
        return SettleResult(state=window.state)
    if now >= window.deadline:
        window.state = WindowState.TIMED_OUT
        window.closed_at = now
        return SettleResult(state=window.state)
    if window.has(MessageType.OFFER_TRANSFER) and window.has(MessageType.CONFIRM_TRANSFER):
        requester = world.agents[window.requester]
        responder = world.agents[window.responder]
        r = world.interaction_radius
        if dist_sq(requester.position, responder.position) <= r * r:
            return SettleResult(state=window.state, responder_should_transfer=True)
        return SettleResult(state=window.state, responder_should_approach=True)
    return SettleResult(state=window.state)


@dataclass
class TeamPublicView:
    """Shared, non-private team knowledge: teammate positions within observe
    radius and surpluses advertised through OFFER_TRANSFER messages. Under the
    partition-off ablation the runtime substitutes live inventories here."""

    positions: dict[str, Position] = field(default_factory=dict)
    advertised_surplus: dict[str, dict[str, int]] = field(default_factory=dict)  # agent -> item -> count
    designated_owner: dict[str, str] = field(default_factory=dict)  # item -> agent

    def surplus(self, agent: str, item: str) -> int:
        return self.advertised_surplus.get(agent, {}).get(item, 0)

    def record_offer(self, agent: str, item: str, count: int) -> None:
        self.advertised_surplus.setdefault(agent, {})[item] = count

    def consume_advert(self, agent: str, item: str, count: int) -> None:
        have = self.surplus(agent, item)
        if have:
            left = max(0, have - count)
            if left:
                self.advertised_surplus[agent][item] = left
            else:
                self.advertised_surplus[agent].pop(item, None)
