"""
Per-robot tracking pipeline, split around the neighbor exchange.

associate() and info_messages() run before the exchange; fuse() consumes
the inbox and leaves every track holding its prior for the next frame.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from geometry.transforms import transform_point, transform_state
from geometry.uncertainty import NoisyTransform, propagate_into_neighbor
from registration.frame_alignment import CoDetection
from tracking.association import Association, gnn_associate
from tracking.exceptions import TrackingError
from tracking.gating import GateState
from tracking.kcf import DEFAULT_CONSENSUS_GAIN_CAP, advance, kcf_correct, to_information
from tracking.motion_models import MotionModel
from tracking.track_manager import LifecycleEvents, TrackBank, TrackLifecycle, manage_tracks
from tracking.tracks import InfoMessage, Measurement, Track, TrackId

logger = logging.getLogger(__name__)


@dataclass
class FusionOutcome:
    events: LifecycleEvents
    codetections: Dict[int, List[CoDetection]] = field(default_factory=dict)
    neighbor_alignments: Dict[int, NoisyTransform] = field(default_factory=dict)


class LocalTracker:
    def __init__(self, owner: int, model: MotionModel, gate: GateState,
                 lifecycle: TrackLifecycle = TrackLifecycle(),
                 consensus_gain_cap: Optional[float] = DEFAULT_CONSENSUS_GAIN_CAP,
                 use_alignment_covariance: bool = True):
        self.owner = owner
        self.model = model
        self.gate = gate
        self.lifecycle = lifecycle
        self.consensus_gain_cap = consensus_gain_cap
        self.use_alignment_covariance = use_alignment_covariance
        self.bank = TrackBank(owner)
        self._measurements: List[Measurement] = []
        self._association = Association()
        self._tracks: List[Track] = []

    def associate(self, measurements: Sequence[Measurement]) -> Association:
        self._measurements = list(measurements)
        self._tracks = self.bank.ordered()
        self._association = gnn_associate(self._measurements, self._tracks, self.gate, self.model)
        return self._association

    def matched_measurement(self, track_id: TrackId) -> Optional[Measurement]:
        for m, t in self._association.matches:
            if self._tracks[t].id == track_id:
                return self._measurements[m]
        return None

    def info_messages(self, recipient: int, alignment: NoisyTransform, frame: int) -> List[InfoMessage]:
        """Confirmed tracks expressed in the recipient's frame through alignment"""
        messages = []
        for t, track in enumerate(self._tracks):
            if not track.is_confirmed:
                continue
            prior = transform_state(alignment.pose, track.x)
            u, U = np.zeros(4), np.zeros((4, 4))
            z_tilde = None
            measurement = self.matched_measurement(track.id)
            if measurement is not None:
                if self.use_alignment_covariance:
                    z_tilde, R_tilde = propagate_into_neighbor(alignment, measurement.pos, measurement.cov)
                else:
                    rotation = alignment.pose.rotation
                    z_tilde = transform_point(alignment.pose, measurement.pos)
                    R_tilde = rotation @ measurement.cov @ rotation.T
                try:
                    u, U = to_information(z_tilde, R_tilde, self.model)
                except TrackingError as exc:
                    logger.warning(f'Robot {self.owner}: measurement of {track.id} not shared ({exc})')
                    z_tilde = None
            messages.append(InfoMessage(track.id, prior, u, U, self.owner, frame, z_tilde, alignment))
        return messages

    def fuse(self, inbox: Sequence[InfoMessage], frame: int) -> FusionOutcome:
        local = {}
        for m, t in self._association.matches:
            measurement = self._measurements[m]
            local[self._tracks[t].id] = measurement

        # One message per (track, sender): a neighbor's own duplicates must not count twice.
        contributions: Dict[TrackId, Dict[int, InfoMessage]] = {}
        unknown: List[InfoMessage] = []
        neighbor_alignments: Dict[int, NoisyTransform] = {}
        for message in inbox:
            if message.alignment is not None:
                neighbor_alignments[message.sender] = message.alignment
            track_id = self.bank.resolve(message.track_id)
            if track_id not in self.bank.tracks:
                unknown.append(message)
                continue
            by_sender = contributions.setdefault(track_id, {})
            held = by_sender.get(message.sender)
            if held is None or (message.has_measurement and not held.has_measurement):
                by_sender[message.sender] = message
            else:
                logger.debug(f'Robot {self.owner}: second message from {message.sender} '
                             f'for {track_id} ignored ({message.track_id})')

        codetections: Dict[int, List[CoDetection]] = {}
        for track in self.bank.ordered():
            y, Y = np.zeros(4), np.zeros((4, 4))
            measurement = local.get(track.id)
            if measurement is not None:
                try:
                    u, U = to_information(measurement.pos, measurement.cov, self.model)
                    y, Y = y + u, Y + U
                except TrackingError as exc:
                    logger.warning(f'Robot {self.owner}: local measurement of {track.id} dropped ({exc})')
                    measurement = None
            received = list(contributions.get(track.id, {}).values())
            for message in received:
                y, Y = y + message.u, Y + message.U
            priors = [message.prior for message in received]

            try:
                x, M = kcf_correct(track, y, Y, priors, self.consensus_gain_cap)
            except TrackingError as exc:
                logger.warning(f'Robot {self.owner}: KCF skipped for {track.id} ({exc})')
                x, M, Y = track.x, track.P, np.zeros((4, 4))

            if measurement is not None:
                for message in received:
                    if message.has_measurement:
                        codetections.setdefault(message.sender, []).append(
                            CoDetection(frame, x.copy(), measurement.pos, message.z_tilde))

            self.bank.put(advance(track, x, M, self.model, contributed=bool(np.any(Y != 0))))

        unmatched = [self._measurements[m] for m in self._association.unmatched_measurements]
        events = manage_tracks(self.bank, unmatched, unknown, self.lifecycle, self.model, self.gate)
        return FusionOutcome(events, codetections, neighbor_alignments)
