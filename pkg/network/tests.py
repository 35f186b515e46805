import numpy as np
from django.test import SimpleTestCase

from network.comm_graph import CommGraph, neighbors
from network.exceptions import DisconnectedGraph, NotNeighbor
from network.mailbox import (
    BROADCAST, Message, MessageKind, exchange_round, message_trace, schedule_map_shares,
)


class CommGraphTests(SimpleTestCase):
    def test_neighbor_sets(self):
        self.assertEqual(neighbors(CommGraph.complete(3), 0), {1, 2})
        self.assertEqual(neighbors(CommGraph.line(3), 1), {0, 2})
        self.assertEqual(neighbors(CommGraph.line(3), 0), {1})

    def test_disconnected_graph_rejected(self):
        with self.assertRaises(DisconnectedGraph):
            CommGraph.from_edges(4, [(0, 1), (2, 3)])

    def test_asymmetric_or_self_loop_rejected(self):
        with self.assertRaises(ValueError):
            CommGraph(np.array([[False, True], [False, False]]))
        with self.assertRaises(ValueError):
            CommGraph(np.array([[True, True], [True, False]]))

    def test_single_robot_is_connected(self):
        self.assertEqual(neighbors(CommGraph.complete(1), 0), frozenset())

    def test_diameter(self):
        self.assertEqual(CommGraph.line(4).diameter(), 3)
        self.assertEqual(CommGraph.complete(4).diameter(), 1)


class ExchangeRoundTests(SimpleTestCase):
    def test_broadcast_reaches_neighbors_only(self):
        message = Message(0, BROADCAST, MessageKind.TRACK_INFO, 'hello')
        mailbox = exchange_round({0: [message]}, CommGraph.complete(3), frame=4)
        self.assertEqual(mailbox.inbox(1), [message])
        self.assertEqual(mailbox.inbox(2), [message])
        self.assertEqual(mailbox.inbox(0), [])

    def test_directed_message_to_non_neighbor(self):
        with self.assertRaises(NotNeighbor):
            exchange_round({0: [Message(0, 2, MessageKind.MAP_SHARE, None)]}, CommGraph.line(3))

    def test_directed_message_delivered_once(self):
        g = CommGraph.line(3)
        mailbox = exchange_round({1: [Message(1, 2, MessageKind.ALIGNMENT_UPDATE, None)]}, g)
        self.assertEqual(len(mailbox.inbox(2)), 1)
        self.assertEqual(mailbox.delivered(), 1)

    def test_conservation(self):
        g = CommGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
        outboxes = {i: [Message(i, BROADCAST, MessageKind.TRACK_INFO, i, seq) for seq in range(3)]
                    for i in range(4)}
        mailbox = exchange_round(outboxes, g)
        self.assertEqual(mailbox.delivered(), sum(3 * len(g.neighbors(i)) for i in range(4)))
        for robot in range(4):
            for sender in g.neighbors(robot):
                self.assertEqual(sum(m.sender == sender for m in mailbox.inbox(robot)), 3)

    def test_deterministic_ordering(self):
        g = CommGraph.complete(3)
        first = {2: [Message(2, BROADCAST, MessageKind.TRACK_INFO, 'b', 1),
                     Message(2, BROADCAST, MessageKind.TRACK_INFO, 'a', 0)],
                 0: [Message(0, BROADCAST, MessageKind.TRACK_INFO, 'c', 0)]}
        second = {0: first[0], 2: list(reversed(first[2]))}
        inbox_a = [(m.sender, m.seq) for m in exchange_round(first, g).inbox(1)]
        inbox_b = [(m.sender, m.seq) for m in exchange_round(second, g).inbox(1)]
        self.assertEqual(inbox_a, [(0, 0), (2, 0), (2, 1)])
        self.assertEqual(inbox_a, inbox_b)

    def test_trace_rows(self):
        mailbox = exchange_round({0: [Message(0, BROADCAST, MessageKind.MAP_SHARE, None)]},
                                 CommGraph.complete(3), frame=9)
        rows = message_trace(mailbox)
        self.assertEqual([(r['frame'], r['sender'], r['recipient'], r['kind']) for r in rows],
                         [(9, 0, 1, 'map_share'), (9, 0, 2, 'map_share')])


class MapShareScheduleTests(SimpleTestCase):
    def test_one_hertz_at_ten_hertz(self):
        frames = [k for k in range(41) if schedule_map_shares(k, 1.0, 10.0)]
        self.assertEqual(frames, [10, 20, 30, 40])

    def test_rate_equal_to_frame_rate(self):
        self.assertTrue(all(schedule_map_shares(k, 10.0, 10.0) for k in range(1, 50)))

    def test_zero_rate(self):
        self.assertFalse(any(schedule_map_shares(k, 0.0, 10.0) for k in range(100)))

    def test_rate_above_frame_rate_rejected(self):
        with self.assertRaises(ValueError):
            schedule_map_shares(1, 20.0, 10.0)
