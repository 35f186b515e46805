"""
Track lifecycle: creation, confirmation, deletion, and id agreement with neighbors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from tracking.association import innovation, squared_distance
from tracking.exceptions import SingularInnovation
from tracking.gating import GateState
from tracking.motion_models import MotionModel
from tracking.tracks import (
    DEFAULT_MAX_SPEED, InfoMessage, Measurement, Track, TrackId, TrackStatus,
    initial_covariance, initial_track, predict,
)

logger = logging.getLogger(__name__)

# Full-state residuals carry four degrees of freedom against the gate's two.
STATE_DOF_RATIO = 2.0


@dataclass(frozen=True)
class TrackLifecycle:
    n_confirm: int = 3
    n_miss_max: int = 10
    max_speed: float = DEFAULT_MAX_SPEED


class TrackBank:
    """
    One robot's tracks keyed by TrackId, plus the alias table.

    An alias always points from a larger id to a smaller one, so resolve()
    terminates.
    """

    def __init__(self, owner: int):
        self.owner = owner
        self.tracks: Dict[TrackId, Track] = {}
        self.aliases: Dict[TrackId, TrackId] = {}
        self.next_seq = 0

    def __len__(self):
        return len(self.tracks)

    def __iter__(self) -> Iterator[Track]:
        return iter(self.ordered())

    def __contains__(self, track_id: TrackId) -> bool:
        return self.resolve(track_id) in self.tracks

    def ordered(self) -> List[Track]:
        return [self.tracks[k] for k in sorted(self.tracks)]

    def confirmed(self) -> List[Track]:
        return [t for t in self.ordered() if t.is_confirmed]

    def get(self, track_id: TrackId) -> Optional[Track]:
        return self.tracks.get(self.resolve(track_id))

    def resolve(self, track_id: TrackId) -> TrackId:
        track_id = TrackId(*track_id)
        while track_id in self.aliases:
            track_id = self.aliases[track_id]
        return track_id

    def new_id(self) -> TrackId:
        track_id = TrackId(self.owner, self.next_seq)
        self.next_seq += 1
        return track_id

    def put(self, track: Track):
        self.tracks[track.id] = track

    def remove(self, track_id: TrackId):
        """Delete a track; ids aliased onto it become unknown again"""
        self.tracks.pop(track_id, None)
        stale = [a for a in self.aliases if self.resolve(a) == track_id]
        for a in stale:
            del self.aliases[a]

    def alias(self, a: TrackId, b: TrackId) -> TrackId:
        """Make a and b name the same track; the survivor is the smaller id"""
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return a
        if a in self.tracks and b in self.tracks:
            return self.merge(a, b)
        keep, drop = min(a, b), max(a, b)
        if drop in self.tracks:
            self.tracks[keep] = self.tracks.pop(drop).with_id(keep)
        self.aliases[drop] = keep
        return keep

    def merge(self, a: TrackId, b: TrackId) -> TrackId:
        """
        Fold two live tracks into one under the smaller id.

        The state of the track missed for fewer frames survives, ties going
        to the one with more hits. The result is confirmed if either was.
        """
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return a
        first, second = self.tracks[a], self.tracks[b]
        survivor = min((first, second), key=lambda t: (t.missed, -t.hits, t.id))
        confirmed = first.is_confirmed or second.is_confirmed
        keep, drop = min(a, b), max(a, b)
        self.tracks.pop(drop)
        self.tracks[keep] = replace(
            survivor,
            id=keep,
            hits=max(first.hits, second.hits),
            lifetime=max(first.lifetime, second.lifetime),
            status=TrackStatus.CONFIRMED if confirmed else survivor.status,
        )
        self.aliases[drop] = keep
        return keep


@dataclass
class LifecycleEvents:
    created: List[TrackId] = field(default_factory=list)
    adopted: List[TrackId] = field(default_factory=list)
    aliased: List[TrackId] = field(default_factory=list)
    merged: List[TrackId] = field(default_factory=list)
    confirmed: List[TrackId] = field(default_factory=list)
    deleted: List[TrackId] = field(default_factory=list)


def message_position(message: InfoMessage, model: MotionModel):
    """Predicted position of a neighbor's track with the covariance of its measurement"""
    position = model.H @ model.A @ message.prior
    if message.has_measurement:
        cov = np.linalg.inv(message.U[:2, :2])
    else:
        cov = np.zeros((2, 2))
    return position, cov


def nearest_track(bank: TrackBank, position, cov, gate: GateState, model: MotionModel) -> Optional[TrackId]:
    best, best_d = None, np.inf
    for track in bank.ordered():
        residual, S = innovation(position, cov, track, model)
        try:
            d = squared_distance(residual, S)
        except SingularInnovation:
            continue
        if d <= gate.tau and d < best_d:
            best, best_d = track.id, d
    return best


def track_distance(a: Track, b: Track) -> float:
    """Squared Mahalanobis distance between two track states under their summed covariance"""
    return squared_distance(a.x - b.x, a.P + b.P)


def merge_duplicates(bank: TrackBank, gate: GateState) -> List[TrackId]:
    """
    Merge every pair of local tracks lying within each other's gate, closest pairs first.

    The distance is taken over the full state, so two objects crossing at
    different velocities stay apart. Returns the surviving ids.
    """
    threshold = STATE_DOF_RATIO * gate.tau
    tracks = bank.ordered()
    candidates = []
    for k, a in enumerate(tracks):
        for b in tracks[k + 1:]:
            offset = a.position - b.position
            # The position block alone bounds the full-state distance from below.
            if offset @ offset > threshold * (np.trace(a.P[:2, :2]) + np.trace(b.P[:2, :2])):
                continue
            try:
                d = track_distance(a, b)
            except SingularInnovation:
                continue
            if d <= threshold:
                candidates.append((d, a.id, b.id))

    merged = []
    for _, a, b in sorted(candidates):
        a, b = bank.resolve(a), bank.resolve(b)
        if a == b or a not in bank.tracks or b not in bank.tracks:
            continue
        try:
            if track_distance(bank.tracks[a], bank.tracks[b]) > threshold:
                continue
        except SingularInnovation:
            continue
        keep = bank.merge(a, b)
        merged.append(keep)
        logger.debug(f'Robot {bank.owner}: duplicate tracks {a} and {b} merged as {keep}')
    return merged


def adopt(message: InfoMessage, model: MotionModel, max_speed: float) -> Track:
    position_cov = np.linalg.inv(message.U[:2, :2])
    x = np.concatenate([message.z_tilde, message.prior[2:]])
    track = Track(TrackId(*message.track_id), x, initial_covariance(position_cov, max_speed))
    return predict(track, model)


def manage_tracks(bank: TrackBank, unmatched_measurements: Sequence[Measurement],
                  incoming: Sequence[InfoMessage], lifecycle: TrackLifecycle,
                  model: MotionModel, gate: GateState) -> LifecycleEvents:
    """
    Runs after the KCF update, when every track already holds its prior for the next frame.

    Spawns tracks from unmatched measurements, aliases or adopts neighbors'
    unknown tracks, merges local duplicates, confirms and deletes.
    """
    events = LifecycleEvents()

    for measurement in unmatched_measurements:
        track = predict(initial_track(measurement, bank.new_id(), lifecycle.max_speed), model)
        bank.put(track)
        events.created.append(track.id)

    for message in sorted(incoming, key=lambda m: (m.sender, m.track_id)):
        if message.track_id in bank:
            continue
        position, cov = message_position(message, model)
        match = nearest_track(bank, position, cov, gate, model)
        if match is not None:
            keep = bank.alias(match, message.track_id)
            events.aliased.append(keep)
            logger.debug(f'Robot {bank.owner}: {match} and {message.track_id} merged as {keep}')
        elif message.has_measurement:
            track = adopt(message, model, lifecycle.max_speed)
            bank.put(track)
            events.adopted.append(track.id)

    events.merged.extend(merge_duplicates(bank, gate))

    for track in bank.ordered():
        if track.missed > lifecycle.n_miss_max:
            bank.remove(track.id)
            events.deleted.append(track.id)
            if track.is_confirmed:
                logger.info(f'Robot {bank.owner}: track {track.id} deleted after {track.missed} missed frames')
        elif track.status == TrackStatus.TENTATIVE and track.hits >= lifecycle.n_confirm:
            bank.put(replace(track, status=TrackStatus.CONFIRMED))
            events.confirmed.append(track.id)
            logger.info(f'Robot {bank.owner}: track {track.id} confirmed')

    return events
