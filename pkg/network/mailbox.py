"""
Synchronous message rounds over a CommGraph.

A message sent in round k is delivered, and readable, in round k only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping

from network.comm_graph import CommGraph
from network.exceptions import NotNeighbor

logger = logging.getLogger(__name__)

BROADCAST = -1


class MessageKind:
    TRACK_INFO = 'track_info'
    MAP_SHARE = 'map_share'
    ALIGNMENT_UPDATE = 'alignment_update'

    ALL = (TRACK_INFO, MAP_SHARE, ALIGNMENT_UPDATE)


@dataclass(frozen=True, eq=False)
class Message:
    sender: int
    recipient: int
    kind: str
    payload: Any
    seq: int = 0

    @property
    def is_broadcast(self) -> bool:
        return self.recipient == BROADCAST

    def nbytes(self) -> int:
        size = getattr(self.payload, 'nbytes', None)
        return 16 + (size() if callable(size) else 0)


@dataclass
class RoundMailbox:
    frame: int
    inboxes: Dict[int, List[Message]] = field(default_factory=dict)

    def inbox(self, robot: int) -> List[Message]:
        return self.inboxes.get(robot, [])

    def delivered(self) -> int:
        return sum(len(messages) for messages in self.inboxes.values())


def exchange_round(outboxes: Mapping[int, Iterable[Message]], g: CommGraph, frame: int = 0) -> RoundMailbox:
    """
    Deliver every outbox message to its addressed neighbors.

    Inboxes are ordered by (sender, seq). Raises NotNeighbor for a directed
    message to a robot that is not adjacent to the sender.
    """
    inboxes: Dict[int, List[Message]] = {robot: [] for robot in range(g.n)}
    for sender in sorted(outboxes):
        for message in outboxes[sender]:
            if message.sender != sender:
                raise ValueError(f'message in outbox of robot {sender} claims sender {message.sender}')
            if message.is_broadcast:
                recipients = sorted(g.neighbors(sender))
            elif 0 <= message.recipient < g.n and g.are_neighbors(sender, message.recipient):
                recipients = [message.recipient]
            else:
                raise NotNeighbor(f'robot {sender} cannot message robot {message.recipient}: not a neighbor')
            for recipient in recipients:
                inboxes[recipient].append(message)

    for robot in inboxes:
        inboxes[robot].sort(key=lambda m: (m.sender, m.seq))
    mailbox = RoundMailbox(frame, inboxes)
    logger.debug(f'Round {frame}: {mailbox.delivered()} deliveries')
    return mailbox


def schedule_map_shares(frame: int, rate_hz: float, frame_rate_hz: float) -> bool:
    """True on frames where floor(frame · rate / frame_rate) steps up; never on frame 0"""
    if rate_hz > frame_rate_hz:
        raise ValueError('map share rate cannot exceed the frame rate')
    if rate_hz <= 0 or frame <= 0:
        return False
    ratio = rate_hz / frame_rate_hz
    return math.floor(frame * ratio + 1e-9) > math.floor((frame - 1) * ratio + 1e-9)


def message_trace(mailbox: RoundMailbox) -> List[dict]:
    """One row per delivered copy: frame, sender, recipient, kind, estimated bytes"""
    rows = []
    for recipient in sorted(mailbox.inboxes):
        for message in mailbox.inboxes[recipient]:
            rows.append({
                'frame': mailbox.frame,
                'sender': message.sender,
                'recipient': recipient,
                'kind': message.kind,
                'bytes': message.nbytes(),
            })
    return rows
