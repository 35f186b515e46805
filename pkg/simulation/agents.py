"""
One robot's state and per-frame work.

A RobotAgent is the only writer of its own state. Between the exchange
barriers it touches nothing but its own fields, its own RNG substream and
the messages addressed to it.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from geometry.transforms import Pose2, inverse, transform_point
from geometry.uncertainty import NoisyTransform
from network.mailbox import BROADCAST, Message, MessageKind
from registration.exceptions import DegenerateInput, RegistrationError
from registration.frame_alignment import (
    AlignmentCovarianceScale, CoDetection, CorrectionMagnitude, align_dynamic, align_static,
)
from registration.landmark_maps import LandmarkMap
from simulation.scenario import (
    REALIGN_AUTO, REALIGN_DYNAMIC, REALIGN_OFF, REALIGN_STATIC, ScenarioConfig,
)
from simulation.sensors import detect_landmarks, detect_pedestrians, step_odometry
from tracking.gating import GateAdaptation, adapt_gate, initial_gate
from tracking.motion_models import MotionModel
from tracking.pipeline import LocalTracker
from tracking.track_manager import TrackLifecycle

logger = logging.getLogger(__name__)

NO_REALIGN = 'none'

INITIAL = 'initial'
TRUTH = 'truth'


def select_realign_mode(eta: int, tau_eta: int, mode: str, has_map: bool) -> str:
    """
    Which realignment to run for a robot pair.

    auto prefers dynamic objects once eta reaches tau_eta and falls back to
    landmarks; explicit modes bypass the count.
    """
    if eta < 0:
        raise ValueError('co-detection count cannot be negative')
    if mode == REALIGN_OFF:
        return NO_REALIGN
    if mode == REALIGN_DYNAMIC:
        return REALIGN_DYNAMIC
    if mode == REALIGN_STATIC:
        return REALIGN_STATIC if has_map else NO_REALIGN
    if mode == REALIGN_AUTO:
        if eta >= tau_eta:
            return REALIGN_DYNAMIC
        return REALIGN_STATIC if has_map else NO_REALIGN
    raise ValueError(f'unknown realign mode "{mode}"')


@dataclass(frozen=True, eq=False)
class AlignmentUpdate:
    """A neighbor's dynamic re-estimate of our outgoing alignment, valid only against base_stamp"""
    transform: NoisyTransform
    base_stamp: int
    correction: CorrectionMagnitude

    def nbytes(self) -> int:
        return 8 * (3 + 9) + 16


@dataclass(frozen=True, eq=False)
class WindowEntry:
    """A co-detection with the neighbor's detection kept in the neighbor's own frame"""
    frame: int
    codetection: CoDetection
    neighbor_position: np.ndarray


@dataclass
class AlignmentRecord:
    transform: NoisyTransform
    method: str = INITIAL


class RobotAgent:
    def __init__(self, index: int, config: ScenarioConfig, model: MotionModel,
                 neighbors: Sequence[int], rng: np.random.Generator):
        self.index = index
        self.config = config
        self.spec = config.robots[index]
        self.model = model
        self.neighbors = sorted(neighbors)
        self.rng = rng

        tracking = config.tracking
        self.tracker = LocalTracker(
            index, model,
            initial_gate(tracking.tau_gate, tracking.initial_gate_scale),
            TrackLifecycle(tracking.n_confirm, tracking.n_miss_max, tracking.max_speed_mps),
            tracking.consensus_gain_cap,
            tracking.use_alignment_covariance,
        )
        self.gate_adaptation = GateAdaptation(tracking.alpha_t, tracking.alpha_theta, tracking.decay)
        self.covariance_scale = AlignmentCovarianceScale(
            tracking.c_t, tracking.c_theta, tracking.sigma_t0, tracking.sigma_theta0)

        self.estimate = Pose2.identity()
        self.estimate_cov = np.zeros((3, 3))
        self.landmark_map = LandmarkMap(index)
        self.neighbor_maps: Dict[int, LandmarkMap] = {}

        self.alignments: Dict[int, AlignmentRecord] = {}
        self.neighbor_alignments: Dict[int, NoisyTransform] = {}
        self.windows: Dict[int, Deque[WindowEntry]] = {j: deque() for j in self.neighbors}
        self.pending_updates: Dict[int, AlignmentUpdate] = {}
        self.corrections: List[CorrectionMagnitude] = []

    @property
    def realign(self):
        return self.config.realign

    def set_alignment(self, j: int, transform: NoisyTransform, method: str):
        self.alignments[j] = AlignmentRecord(transform, method)

    def eta(self, j: int) -> int:
        return len(self.windows.get(j, ()))

    def sense(self, frame: int, true_pose: Pose2, previous_true_pose: Optional[Pose2],
              pedestrians: Sequence, truth_local_pose: Optional[Pose2] = None):
        """Odometry, detections and local association for this frame"""
        if truth_local_pose is not None:
            self.estimate, self.estimate_cov = truth_local_pose, np.zeros((3, 3))
        elif previous_true_pose is not None:
            increment = inverse(previous_true_pose) @ true_pose
            self.estimate, self.estimate_cov = step_odometry(
                self.estimate, self.estimate_cov, increment, self.config.noise.odom, self.rng)

        measurements = detect_pedestrians(
            true_pose, self.estimate, self.estimate_cov, self.spec.fov, pedestrians,
            self.config.noise.detection, self.rng, frame, self.index)
        detect_landmarks(
            true_pose, self.estimate, self.spec.fov, self.config.landmarks,
            self.config.noise.landmark_detection, self.rng, self.landmark_map, frame,
            self.realign.merge_radius_m)
        self.landmark_map.prune(frame, int(round(self.realign.map_max_age_s * self.config.frame_rate_hz)))
        self.tracker.associate(measurements)
        return measurements

    def outbox(self, frame: int, share_map: bool) -> List[Message]:
        messages = []
        seq = 0
        for j in self.neighbors:
            for info in self.tracker.info_messages(j, self.alignments[j].transform, frame):
                messages.append(Message(self.index, j, MessageKind.TRACK_INFO, info, seq))
                seq += 1
        for j in sorted(self.pending_updates):
            messages.append(Message(self.index, j, MessageKind.ALIGNMENT_UPDATE, self.pending_updates[j], seq))
            seq += 1
        self.pending_updates = {}
        if share_map and self.neighbors and self.realign.mode in (REALIGN_STATIC, REALIGN_AUTO):
            messages.append(Message(self.index, BROADCAST, MessageKind.MAP_SHARE, self.landmark_map.snapshot(), seq))
        return messages

    def receive(self, inbox: Sequence[Message], frame: int):
        """Alignment updates, KCF fusion, then realignment and gate adaptation"""
        self.corrections = []
        for message in inbox:
            if message.kind == MessageKind.ALIGNMENT_UPDATE:
                self.apply_alignment_update(message.sender, message.payload)

        infos = [m.payload for m in inbox if m.kind == MessageKind.TRACK_INFO]
        outcome = self.tracker.fuse(infos, frame)
        self.neighbor_alignments.update(outcome.neighbor_alignments)
        for j, codetections in outcome.codetections.items():
            to_neighbor = inverse(self.neighbor_alignments[j].pose)
            window = self.windows.setdefault(j, deque())
            window.extend(WindowEntry(frame, c, transform_point(to_neighbor, c.z_tilde_j)) for c in codetections)
        self.trim_windows(frame)

        for message in inbox:
            if message.kind == MessageKind.MAP_SHARE:
                self.neighbor_maps[message.sender] = message.payload
                self.realign_static(message.sender, frame)
        for j in sorted(outcome.codetections):
            self.realign_dynamic(j, frame)

        self.adapt_gate()
        return outcome

    def trim_windows(self, frame: int):
        oldest = frame - self.realign.window_frames
        for window in self.windows.values():
            while window and window[0].frame <= oldest:
                window.popleft()

    def reset_pose_covariance(self, j: int, method: str):
        """A re-estimated alignment absorbs the drift accumulated so far"""
        if np.any(self.estimate_cov):
            logger.debug(f'Robot {self.index}: pose covariance reset after {method} realignment with {j} '
                         f'(trace was {np.trace(self.estimate_cov):.4f})')
        self.estimate_cov = np.zeros((3, 3))

    def apply_alignment_update(self, j: int, update: AlignmentUpdate):
        current = self.alignments[j].transform
        if update.base_stamp != current.stamp:
            logger.debug(f'Robot {self.index}: stale alignment update from {j} '
                         f'(based on {update.base_stamp}, holding {current.stamp})')
            return
        self.set_alignment(j, update.transform, REALIGN_DYNAMIC)
        self.reset_pose_covariance(j, REALIGN_DYNAMIC)
        self.corrections.append(update.correction)

    def realign_static(self, j: int, frame: int):
        mode = select_realign_mode(self.eta(j), self.realign.tau_eta, self.realign.mode, True)
        if mode != REALIGN_STATIC or j not in self.alignments:
            return
        try:
            result = align_static(
                self.landmark_map, self.neighbor_maps[j], self.alignments[j].transform, frame,
                self.covariance_scale, self.realign.icp_max_iter, self.realign.icp_tol_m,
                self.realign.reject_radius_m)
        except RegistrationError as exc:
            logger.warning(f'Robot {self.index}: static realignment with {j} failed at frame {frame} ({exc})')
            return
        self.set_alignment(j, result.transform, REALIGN_STATIC)
        self.reset_pose_covariance(j, REALIGN_STATIC)
        self.corrections.append(result.correction_magnitude)
        logger.debug(f'Robot {self.index}: static realignment with {j} at frame {frame}, '
                     f'{result.pair_count} landmark pairs')

    def window_codetections(self, j: int, prev: Pose2) -> List[CoDetection]:
        """The co-detection window with every neighbor detection mapped through prev"""
        window = self.windows[j]
        mapped = transform_point(prev, np.array([entry.neighbor_position for entry in window]))
        return [
            CoDetection(entry.codetection.stamp, entry.codetection.x_hat, entry.codetection.z_i, z)
            for entry, z in zip(window, mapped)
        ]

    def realign_dynamic(self, j: int, frame: int):
        """Re-estimate neighbor j's alignment into our frame from the co-detection window"""
        prev = self.neighbor_alignments.get(j)
        mode = select_realign_mode(self.eta(j), self.realign.tau_eta, self.realign.mode, j in self.neighbor_maps)
        if mode != REALIGN_DYNAMIC or prev is None or self.eta(j) < 2:
            return
        try:
            result = align_dynamic(self.window_codetections(j, prev.pose), prev, frame, self.covariance_scale,
                                   self.realign.dynamic_weighting)
        except DegenerateInput as exc:
            logger.warning(f'Robot {self.index}: dynamic realignment with {j} skipped at frame {frame} ({exc})')
            return
        if result.score < self.realign.min_correction_sigmas:
            logger.debug(f'Robot {self.index}: dynamic correction for {j} at frame {frame} within noise '
                         f'({result.score:.2f} standard errors)')
            return
        self.pending_updates[j] = AlignmentUpdate(result.transform, prev.stamp, result.correction_magnitude)
        self.corrections.append(result.correction_magnitude)

    def adapt_gate(self):
        """Widen on the largest correction this frame; with the reactive gate off, only relax"""
        correction = CorrectionMagnitude()
        if self.realign.reactive_gate and self.corrections:
            correction = max(self.corrections, key=lambda c: (
                self.gate_adaptation.alpha_t * c.trans_m + self.gate_adaptation.alpha_theta * c.rot_rad))
        self.tracker.gate = adapt_gate(self.tracker.gate, correction, self.gate_adaptation)

    def posterior_states(self) -> List[Tuple]:
        """(track, posterior state) for every track; tracks hold the next prior after fusion"""
        A_inv = np.linalg.inv(self.model.A)
        return [(track, A_inv @ track.x) for track in self.tracker.bank.ordered()]

    def world_transform(self, initial_pose: Pose2, truth_local_pose: Pose2) -> Pose2:
        """Maps this robot's local frame into the world: T(0) ∘ D⁻¹ with D = T̂ ∘ (T^L)⁻¹"""
        drift = self.estimate @ inverse(truth_local_pose)
        return initial_pose @ inverse(drift)

    def log_summary(self, frame: int):
        logger.debug(f'Robot {self.index} frame {frame}: {len(self.tracker.bank)} tracks, '
                     f'gate {self.tracker.gate.tau:.2f}, pose trace {np.trace(self.estimate_cov):.4f}, '
                     f'heading {math.degrees(self.estimate.theta):.1f} deg')
