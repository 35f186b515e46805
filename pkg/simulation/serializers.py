"""
Validation of scenario YAML files into ScenarioConfig.
"""
from __future__ import annotations

import copy
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import yaml
from rest_framework import serializers

from geometry.transforms import Pose2
from network.comm_graph import CommGraph
from network.exceptions import DisconnectedGraph
from registration.frame_alignment import WEIGHTING_CHOICES
from simulation.exceptions import ConfigError
from simulation.scenario import (
    CIRCULAR_PATH, REALIGN_MODES, STATIC_PATH, WAYPOINT_PATH, Arena, DetectionNoise,
    ErrorInjection, FieldOfView, LandmarkNoise, LogConfig, NoiseConfig, OdometryNoise,
    PedestrianSpec, RealignConfig, RobotSpec, ScenarioConfig, TrackingConfig, Trajectory,
)

logger = logging.getLogger(__name__)

CIRCLE_TOLERANCE_M = 1e-3


def positive(value):
    if value <= 0:
        raise serializers.ValidationError('must be positive')


def probability(value):
    if not 0.0 <= value <= 1.0:
        raise serializers.ValidationError('must lie in [0, 1]')


class PointField(serializers.ListField):
    child = serializers.FloatField()

    def __init__(self, **kwargs):
        kwargs.setdefault('min_length', 2)
        kwargs.setdefault('max_length', 2)
        super().__init__(**kwargs)


class PoseSerializer(serializers.Serializer):
    x = serializers.FloatField()
    y = serializers.FloatField()
    theta_deg = serializers.FloatField(default=0.0)


class TrajectorySerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[STATIC_PATH, CIRCULAR_PATH, WAYPOINT_PATH], default=STATIC_PATH)
    center = PointField(default=[0.0, 0.0])
    radius = serializers.FloatField(min_value=0.0, default=0.0)
    angular_rate = serializers.FloatField(default=0.0)
    waypoints = serializers.ListField(child=PointField(), default=list)
    speed_mps = serializers.FloatField(min_value=0.0, default=0.0)

    def validate(self, attrs):
        if attrs['kind'] == CIRCULAR_PATH and attrs['radius'] <= 0:
            raise serializers.ValidationError({'radius': 'circular path needs a positive radius'})
        if attrs['kind'] == WAYPOINT_PATH and not attrs['waypoints']:
            raise serializers.ValidationError({'waypoints': 'waypoint path needs at least one waypoint'})
        return attrs


class FieldOfViewSerializer(serializers.Serializer):
    range_m = serializers.FloatField(default=6.0, validators=[positive])
    half_angle_deg = serializers.FloatField(default=45.0, min_value=0.0, max_value=180.0,
                                            validators=[positive])


class RobotSerializer(serializers.Serializer):
    initial = PoseSerializer()
    trajectory = TrajectorySerializer(required=False)
    fov = FieldOfViewSerializer(required=False)


class PedestrianSerializer(serializers.Serializer):
    waypoints = serializers.ListField(child=PointField(), min_length=1)
    speed_mps = serializers.FloatField(min_value=0.0, default=1.0)


class ArenaSerializer(serializers.Serializer):
    width_m = serializers.FloatField(default=10.0, validators=[positive])
    height_m = serializers.FloatField(default=10.0, validators=[positive])


class OdometryNoiseSerializer(serializers.Serializer):
    sigma_v = serializers.FloatField(min_value=0.0, default=0.0)
    sigma_omega = serializers.FloatField(min_value=0.0, default=0.0)


class DetectionNoiseSerializer(serializers.Serializer):
    sigma_z_m = serializers.FloatField(min_value=0.0, default=0.1)
    p_detect = serializers.FloatField(default=0.95, validators=[probability])
    clutter_rate = serializers.FloatField(min_value=0.0, default=0.0)


class LandmarkNoiseSerializer(serializers.Serializer):
    sigma_l_m = serializers.FloatField(min_value=0.0, default=0.05)
    p_detect = serializers.FloatField(default=0.9, validators=[probability])


class NoiseSerializer(serializers.Serializer):
    odom = OdometryNoiseSerializer(required=False)
    detection = DetectionNoiseSerializer(required=False)
    landmark_detection = LandmarkNoiseSerializer(required=False)


class ErrorInjectionSerializer(serializers.Serializer):
    sigma_t_m = serializers.FloatField(min_value=0.0)


class RealignSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=REALIGN_MODES, default='off')
    tau_eta = serializers.IntegerField(min_value=0, default=100)
    window_frames = serializers.IntegerField(min_value=1, default=50)
    map_share_hz = serializers.FloatField(min_value=0.0, default=1.0)
    reactive_gate = serializers.BooleanField(default=False)
    dynamic_weighting = serializers.ChoiceField(choices=WEIGHTING_CHOICES, default='uniform')
    min_correction_sigmas = serializers.FloatField(min_value=0.0, default=3.0)
    merge_radius_m = serializers.FloatField(default=0.5, validators=[positive])
    reject_radius_m = serializers.FloatField(default=1.0, validators=[positive])
    icp_max_iter = serializers.IntegerField(min_value=1, default=20)
    icp_tol_m = serializers.FloatField(default=1e-4, validators=[positive])
    map_max_age_s = serializers.FloatField(default=20.0, validators=[positive])


class TrackingSerializer(serializers.Serializer):
    tau_gate = serializers.FloatField(default=2.0, validators=[positive])
    initial_gate_scale = serializers.FloatField(min_value=1.0, default=1.0)
    q = serializers.FloatField(min_value=0.0, default=0.5)
    n_confirm = serializers.IntegerField(min_value=1, default=3)
    n_miss_max = serializers.IntegerField(min_value=0, default=10)
    max_speed_mps = serializers.FloatField(default=2.0, validators=[positive])
    alpha_t = serializers.FloatField(min_value=0.0, default=2.0)
    alpha_theta = serializers.FloatField(min_value=0.0, default=10.0)
    decay = serializers.FloatField(default=0.9, validators=[probability])
    c_t = serializers.FloatField(min_value=0.0, default=1.0)
    c_theta = serializers.FloatField(min_value=0.0, default=1.0)
    sigma_t0 = serializers.FloatField(default=0.01, validators=[positive])
    sigma_theta0 = serializers.FloatField(default=0.005, validators=[positive])
    consensus_gain_cap = serializers.FloatField(default=1.0, allow_null=True, validators=[positive])
    use_alignment_covariance = serializers.BooleanField(default=True)


class LogSerializer(serializers.Serializer):
    timings = serializers.BooleanField(default=False)
    messages = serializers.BooleanField(default=False)


class ScenarioSerializer(serializers.Serializer):
    """Full scenario schema; every field except robots has a default"""
    name = serializers.CharField(default='scenario')
    arena = ArenaSerializer(required=False)
    frame_rate_hz = serializers.FloatField(default=10.0, validators=[positive])
    duration_s = serializers.FloatField(default=60.0, validators=[positive])
    rng_seed = serializers.IntegerField(min_value=0, default=0)
    robots = RobotSerializer(many=True, allow_empty=False)
    pedestrians = PedestrianSerializer(many=True, required=False)
    landmarks = serializers.ListField(child=PointField(), default=list)
    noise = NoiseSerializer(required=False)
    error_injection = ErrorInjectionSerializer(required=False, allow_null=True)
    realign = RealignSerializer(required=False)
    tracking = TrackingSerializer(required=False)
    communication = serializers.ListField(child=PointField(child=serializers.IntegerField()),
                                          required=False, allow_null=True)
    ground_truth_localization = serializers.BooleanField(default=False)
    log = LogSerializer(required=False)

    def validate(self, attrs):
        arena = Arena(**attrs.get('arena', {}))
        realign = attrs.get('realign', {})
        if realign.get('map_share_hz', 1.0) > attrs['frame_rate_hz']:
            raise serializers.ValidationError({'realign': 'map_share_hz cannot exceed frame_rate_hz'})

        for index, robot in enumerate(attrs['robots']):
            problem = self._robot_problem(robot, arena)
            if problem:
                raise serializers.ValidationError({'robots': f'robot {index}: {problem}'})
        for index, pedestrian in enumerate(attrs.get('pedestrians', [])):
            if not all(arena.contains(p) for p in pedestrian['waypoints']):
                raise serializers.ValidationError({'pedestrians': f'pedestrian {index}: waypoints must stay within the arena'})
        for index, landmark in enumerate(attrs['landmarks']):
            if not arena.contains(landmark):
                raise serializers.ValidationError({'landmarks': f'landmark {index} lies outside the arena'})

        edges = attrs.get('communication')
        if edges is not None:
            try:
                CommGraph.from_edges(len(attrs['robots']), [tuple(e) for e in edges])
            except DisconnectedGraph:
                raise serializers.ValidationError({'communication': 'communication graph must be connected'})
            except ValueError as exc:
                raise serializers.ValidationError({'communication': str(exc)})
        return attrs

    @staticmethod
    def _robot_problem(robot: Dict[str, Any], arena: Arena) -> Optional[str]:
        initial = robot['initial']
        path = robot.get('trajectory', {'kind': STATIC_PATH})
        start = (initial['x'], initial['y'])
        if path['kind'] == STATIC_PATH:
            return None if arena.contains(start) else 'initial pose lies outside the arena'
        if path['kind'] == CIRCULAR_PATH:
            cx, cy = path['center']
            r = path['radius']
            if abs(math.hypot(start[0] - cx, start[1] - cy) - r) > CIRCLE_TOLERANCE_M:
                return 'initial pose must lie on its circular path'
            if not (arena.contains((cx - r, cy - r)) and arena.contains((cx + r, cy + r))):
                return 'circular path leaves the arena'
            return None
        if math.hypot(start[0] - path['waypoints'][0][0], start[1] - path['waypoints'][0][1]) > CIRCLE_TOLERANCE_M:
            return 'initial pose must equal the first waypoint'
        if not all(arena.contains(p) for p in path['waypoints']):
            return 'waypoints must stay within the arena'
        return None

    def create(self, validated_data):
        robots = tuple(build_robot(r) for r in validated_data['robots'])
        error = validated_data.get('error_injection')
        edges = validated_data.get('communication')
        return ScenarioConfig(
            robots=robots,
            name=validated_data['name'],
            arena=Arena(**validated_data.get('arena', {})),
            frame_rate_hz=validated_data['frame_rate_hz'],
            duration_s=validated_data['duration_s'],
            rng_seed=validated_data['rng_seed'],
            pedestrians=tuple(
                PedestrianSpec(tuple(tuple(p) for p in ped['waypoints']), ped['speed_mps'])
                for ped in validated_data.get('pedestrians', [])
            ),
            landmarks=tuple(tuple(p) for p in validated_data['landmarks']),
            noise=build_noise(validated_data.get('noise', {})),
            error_injection=ErrorInjection(**error) if error else None,
            realign=RealignConfig(**validated_data.get('realign', {})),
            tracking=TrackingConfig(**validated_data.get('tracking', {})),
            communication=tuple(tuple(e) for e in edges) if edges is not None else None,
            ground_truth_localization=validated_data['ground_truth_localization'],
            log=LogConfig(**validated_data.get('log', {})),
        )


def build_robot(data: Dict[str, Any]) -> RobotSpec:
    initial = data['initial']
    path = data.get('trajectory')
    fov = data.get('fov')
    trajectory = Trajectory(
        kind=path['kind'],
        center=tuple(path['center']),
        radius=path['radius'],
        angular_rate=path['angular_rate'],
        waypoints=tuple(tuple(p) for p in path['waypoints']),
        speed_mps=path['speed_mps'],
    ) if path else Trajectory()
    return RobotSpec(
        initial=Pose2(initial['x'], initial['y'], math.radians(initial['theta_deg'])),
        trajectory=trajectory,
        fov=FieldOfView(fov['range_m'], math.radians(fov['half_angle_deg'])) if fov else FieldOfView(),
    )


def build_noise(data: Dict[str, Any]) -> NoiseConfig:
    return NoiseConfig(
        odom=OdometryNoise(**data.get('odom', {})),
        detection=DetectionNoise(**data.get('detection', {})),
        landmark_detection=LandmarkNoise(**data.get('landmark_detection', {})),
    )


def flatten_errors(errors, prefix: str = '') -> Iterator[str]:
    """Yield "field.path: message" lines from nested serializer errors"""
    if isinstance(errors, dict):
        for key, value in errors.items():
            path = prefix if key == 'non_field_errors' else (f'{prefix}.{key}' if prefix else str(key))
            yield from flatten_errors(value, path)
    elif isinstance(errors, list):
        for index, value in enumerate(errors):
            if isinstance(value, (dict, list)):
                if value:
                    yield from flatten_errors(value, f'{prefix}[{index}]')
            else:
                yield f'{prefix or "config"}: {value}'
    else:
        yield f'{prefix or "config"}: {errors}'


def deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_scenario(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError('scenario file must contain a mapping at the top level')
    if overrides:
        data = deep_merge(data, overrides)
    serializer = ScenarioSerializer(data=data)
    if not serializer.is_valid():
        problems = list(flatten_errors(serializer.errors))
        raise ConfigError('; '.join(problems))
    return serializer.save()


def read_yaml(path) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'file not found: {path}')
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f'{path} is not valid YAML: {exc}')
    return data if data is not None else {}


def load_scenario(path, overrides: Optional[Dict[str, Any]] = None, seed: Optional[int] = None) -> ScenarioConfig:
    overrides = dict(overrides or {})
    if seed is not None:
        overrides['rng_seed'] = seed
    config = parse_scenario(read_yaml(path), overrides)
    logger.info(f'Loaded scenario "{config.name}" from {path}: {len(config.robots)} robots, '
                f'{len(config.pedestrians)} pedestrians, {config.frame_count} frames')
    return config


def scenario_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """Resolved configuration in the same schema the serializer reads"""
    def robot(spec: RobotSpec):
        return {
            'initial': {'x': spec.initial.x, 'y': spec.initial.y, 'theta_deg': math.degrees(spec.initial.theta)},
            'trajectory': {
                'kind': spec.trajectory.kind,
                'center': list(spec.trajectory.center),
                'radius': spec.trajectory.radius,
                'angular_rate': spec.trajectory.angular_rate,
                'waypoints': [list(p) for p in spec.trajectory.waypoints],
                'speed_mps': spec.trajectory.speed_mps,
            },
            'fov': {'range_m': spec.fov.range_m, 'half_angle_deg': math.degrees(spec.fov.half_angle_rad)},
        }

    return {
        'name': config.name,
        'arena': vars_of(config.arena),
        'frame_rate_hz': config.frame_rate_hz,
        'duration_s': config.duration_s,
        'rng_seed': config.rng_seed,
        'robots': [robot(r) for r in config.robots],
        'pedestrians': [{'waypoints': [list(p) for p in ped.waypoints], 'speed_mps': ped.speed_mps}
                        for ped in config.pedestrians],
        'landmarks': [list(p) for p in config.landmarks],
        'noise': {
            'odom': vars_of(config.noise.odom),
            'detection': vars_of(config.noise.detection),
            'landmark_detection': vars_of(config.noise.landmark_detection),
        },
        'error_injection': vars_of(config.error_injection) if config.error_injection else None,
        'realign': vars_of(config.realign),
        'tracking': vars_of(config.tracking),
        'communication': [list(e) for e in config.communication] if config.communication is not None else None,
        'ground_truth_localization': config.ground_truth_localization,
        'log': vars_of(config.log),
    }


def vars_of(instance) -> Dict[str, Any]:
    return dict(instance.__dict__)
