"""
The per-frame simulation loop.

Each frame runs as barriers: world step, per-robot sensing and association,
one synchronous exchange round, per-robot fusion and realignment, logging.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from geometry.transforms import Pose2, compose, inverse, transform_point
from geometry.uncertainty import NoisyTransform
from network.comm_graph import CommGraph
from network.mailbox import exchange_round, message_trace, schedule_map_shares
from simulation.agents import TRUTH, RobotAgent
from simulation.kinematics import pedestrian_position, robot_pose
from simulation.run_log import (
    ALIGNMENTS, GROUND_TRUTH, MESSAGES, TIMINGS, TRACKS, RunLog, table_from_rows,
)
from simulation.scenario import REALIGN_OFF, ScenarioConfig
from simulation.sensors import heading_sigma_rad, in_field_of_view, inject_alignment_error
from simulation.serializers import scenario_to_dict
from tracking.motion_models import MotionModel

logger = logging.getLogger(__name__)


@dataclass
class WorldState:
    """Ground truth and the robots' pose estimates at one frame"""
    frame: int
    initial_poses: List[Pose2]
    true_poses: List[Pose2]
    estimated_poses: List[Pose2]
    pose_covs: List[np.ndarray]
    pedestrian_positions: np.ndarray

    def local_truth(self, i: int) -> Pose2:
        return inverse(self.initial_poses[i]) @ self.true_poses[i]

    def drift(self, i: int) -> Pose2:
        return self.estimated_poses[i] @ inverse(self.local_truth(i))


def true_alignment(world: WorldState, i: int, j: int) -> Pose2:
    """T_i^j: maps robot i's drifting local frame into robot j's"""
    return (world.drift(j) @ inverse(world.initial_poses[j]) @ world.initial_poses[i]
            @ inverse(world.drift(i)))


def communication_graph(config: ScenarioConfig) -> CommGraph:
    if config.communication is None:
        return CommGraph.complete(len(config.robots))
    return CommGraph.from_edges(len(config.robots), config.communication)


def robot_streams(config: ScenarioConfig) -> List[np.random.Generator]:
    """One substream per robot plus a final one for alignment error injection"""
    seeds = np.random.SeedSequence(config.rng_seed).spawn(len(config.robots) + 1)
    return [np.random.default_rng(s) for s in seeds]


def effective_config(config: ScenarioConfig) -> ScenarioConfig:
    if config.ground_truth_localization:
        return replace(config, realign=replace(config.realign, mode=REALIGN_OFF), error_injection=None)
    return config


def initial_alignment(world: WorldState, i: int, j: int, config: ScenarioConfig,
                      rng: np.random.Generator) -> NoisyTransform:
    """The true alignment perturbed by the injected error, with that error's covariance"""
    truth = true_alignment(world, i, j)
    sigma_t = config.error_injection.sigma_t_m if config.error_injection else 0.0
    pose = compose(inject_alignment_error(sigma_t, rng), truth)
    sigma_theta = heading_sigma_rad(sigma_t)
    cov = np.diag([sigma_t ** 2, sigma_t ** 2, sigma_theta ** 2])
    return NoisyTransform(pose, cov, 0)


class ScenarioRunner:
    def __init__(self, config: ScenarioConfig, timings: Optional[bool] = None,
                 trace_messages: Optional[bool] = None, progress: bool = False):
        self.config = effective_config(config)
        self.record_timings = config.log.timings if timings is None else timings
        self.record_messages = config.log.messages if trace_messages is None else trace_messages
        self.progress = progress

        self.model = MotionModel.constant_velocity(self.config.dt, self.config.tracking.q)
        self.graph = communication_graph(self.config)
        streams = robot_streams(self.config)
        self.error_rng = streams[-1]
        self.agents = [
            RobotAgent(i, self.config, self.model, self.graph.neighbors(i), streams[i])
            for i in range(len(self.config.robots))
        ]
        self.initial_poses = [robot_pose(spec, 0.0) for spec in self.config.robots]

        self.rows: Dict[str, list] = {GROUND_TRUTH: [], TRACKS: [], ALIGNMENTS: [], TIMINGS: [], MESSAGES: []}

    def world(self, frame: int, true_poses: Sequence[Pose2], pedestrians: np.ndarray) -> WorldState:
        return WorldState(
            frame=frame,
            initial_poses=self.initial_poses,
            true_poses=list(true_poses),
            estimated_poses=[agent.estimate for agent in self.agents],
            pose_covs=[agent.estimate_cov for agent in self.agents],
            pedestrian_positions=pedestrians,
        )

    def run(self) -> RunLog:
        config = self.config
        logger.info(f'Running scenario "{config.name}": {len(self.agents)} robots, '
                    f'graph diameter {self.graph.diameter()}, '
                    f'{len(config.pedestrians)} pedestrians, {config.frame_count} frames, seed {config.rng_seed}')
        previous_poses: Optional[List[Pose2]] = None
        frames = range(config.frame_count)
        if self.progress:
            frames = tqdm(frames, desc=config.name, unit='frame')

        for frame in frames:
            t = frame * config.dt
            true_poses = [robot_pose(spec, t) for spec in config.robots]
            pedestrians = np.array([pedestrian_position(p, t) for p in config.pedestrians]).reshape(-1, 2)

            for agent in self.agents:
                started = time.perf_counter()
                local_truth = inverse(self.initial_poses[agent.index]) @ true_poses[agent.index]
                agent.sense(
                    frame, true_poses[agent.index],
                    previous_poses[agent.index] if previous_poses is not None else None,
                    pedestrians,
                    local_truth if config.ground_truth_localization else None,
                )
                self.time(frame, agent.index, 'local', started)

            world = self.world(frame, true_poses, pedestrians)
            if frame == 0:
                self.initialize_alignments(world)

            share_map = schedule_map_shares(frame, config.realign.map_share_hz, config.frame_rate_hz)
            outboxes = {agent.index: agent.outbox(frame, share_map) for agent in self.agents}
            mailbox = exchange_round(outboxes, self.graph, frame)
            if self.record_messages:
                self.rows[MESSAGES].extend(message_trace(mailbox))

            for agent in self.agents:
                started = time.perf_counter()
                agent.receive(mailbox.inbox(agent.index), frame)
                self.time(frame, agent.index, 'fusion', started)
                agent.log_summary(frame)

            self.record(world)
            previous_poses = true_poses

        return RunLog(
            config=scenario_to_dict(config),
            ground_truth=table_from_rows(GROUND_TRUTH, self.rows[GROUND_TRUTH]),
            tracks=table_from_rows(TRACKS, self.rows[TRACKS]),
            alignments=table_from_rows(ALIGNMENTS, self.rows[ALIGNMENTS]),
            timings=table_from_rows(TIMINGS, self.rows[TIMINGS]) if self.record_timings else None,
            messages=table_from_rows(MESSAGES, self.rows[MESSAGES]) if self.record_messages else None,
        )

    def initialize_alignments(self, world: WorldState):
        for agent in self.agents:
            for j in agent.neighbors:
                if self.config.ground_truth_localization:
                    agent.set_alignment(j, NoisyTransform.exact(true_alignment(world, agent.index, j)), TRUTH)
                else:
                    agent.set_alignment(j, initial_alignment(world, agent.index, j, self.config, self.error_rng),
                                        'initial')

    def time(self, frame: int, robot: int, stage: str, started: float):
        if self.record_timings:
            self.rows[TIMINGS].append({
                'frame': frame, 'robot': robot, 'stage': stage, 'seconds': time.perf_counter() - started,
            })

    def record(self, world: WorldState):
        frame = world.frame

        for i, pose in enumerate(world.true_poses):
            self.rows[GROUND_TRUTH].append({
                'frame': frame, 'kind': 'robot', 'id': i, 'x': pose.x, 'y': pose.y, 'theta': pose.theta,
                'visible': 1,
            })
        for p, position in enumerate(world.pedestrian_positions):
            visible = any(in_field_of_view(pose, spec.fov, position)
                          for pose, spec in zip(world.true_poses, self.config.robots))
            self.rows[GROUND_TRUTH].append({
                'frame': frame, 'kind': 'pedestrian', 'id': p, 'x': float(position[0]),
                'y': float(position[1]), 'theta': 0.0, 'visible': int(visible),
            })

        for agent in self.agents:
            to_world = agent.world_transform(self.initial_poses[agent.index], world.local_truth(agent.index))
            for track, x in agent.posterior_states():
                world_position = transform_point(to_world, x[:2])
                self.rows[TRACKS].append({
                    'frame': frame, 'robot': agent.index, 'track_id': str(track.id), 'status': track.status,
                    'x': x[0], 'y': x[1], 'vx': x[2], 'vy': x[3], 'trace_P': float(np.trace(track.P)),
                    'world_x': world_position[0], 'world_y': world_position[1],
                })
            for j in agent.neighbors:
                record = agent.alignments[j]
                est = record.transform.pose
                truth = true_alignment(world, agent.index, j)
                cov = np.diag(record.transform.cov)
                self.rows[ALIGNMENTS].append({
                    'frame': frame, 'i': agent.index, 'j': j,
                    'est_x': est.x, 'est_y': est.y, 'est_theta': est.theta,
                    'true_x': truth.x, 'true_y': truth.y, 'true_theta': truth.theta,
                    'cov_x': cov[0], 'cov_y': cov[1], 'cov_theta': cov[2],
                    'method': record.method,
                })


def run_scenario(config: ScenarioConfig, timings: Optional[bool] = None,
                 trace_messages: Optional[bool] = None, progress: bool = False) -> RunLog:
    """Simulate config end to end; the result is a pure function of config when timings are off"""
    run_log = ScenarioRunner(config, timings, trace_messages, progress).run()
    logger.info(f'Scenario "{config.name}" finished: {len(run_log.tracks)} track rows, '
                f'{len(run_log.alignments)} alignment rows')
    return run_log

