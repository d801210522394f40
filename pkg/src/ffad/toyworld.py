"""Procedural toy pedestrian dataset: crossroad scenes with scripted anomalies.

Training scenes contain a single pedestrian walking the two road strips of a
crossroad, choosing a direction uniformly at random (after a 0-10 frame
hesitation) whenever it reaches the center. Test scenes add scripted anomaly
episodes: a vehicle driving through, or a fighting pair jittering in place.
Frame labels are 1 exactly while an anomalous sprite intersects the canvas.

Reproducibility: every agent draws from its own numpy PCG64 stream, spawned
from ``np.random.SeedSequence(scenario.seed)`` in agent-list order. Removing
trailing agents therefore never perturbs the remaining trajectories, which is
what makes the pixel-diff label oracle in the tests possible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError
from .frames_io import FrameSequence, LabelSeries, RawFrame, normalize, save_labels

PEDESTRIAN = "pedestrian"
VEHICLE = "vehicle"
FIGHTER_PAIR = "fighter_pair"
ANOMALOUS_KINDS = (VEHICLE, FIGHTER_PAIR)

FIELD_COLOR = (72, 110, 72)
ROAD_COLOR = (96, 96, 96)
PEDESTRIAN_COLOR = (40, 40, 200)
VEHICLE_COLOR = (200, 40, 40)
FIGHTER_COLORS = ((40, 40, 200), (70, 70, 230))

FIGHT_JITTER = 2  # max |dx|,|dy| of a fighter sprite per frame
PAUSE_MAX = 10  # crossroad hesitation, frames


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    size: tuple[int, int] = (8, 8)  # (w, h) in px
    speed: float = 2.0  # px per frame
    color: tuple[int, int, int] = PEDESTRIAN_COLOR
    path_policy: str = "random_turn_at_crossroad"
    start_frame: int = 0
    end_frame: int | None = None  # fighters only; vehicles end when they exit
    road: str = "h"  # vehicles: which strip they drive on
    heading: int = 1  # vehicles: +1 along axis, -1 against
    spawn: tuple[float, float] | None = None


def pedestrian_spec(speed: float = 2.0, size: int = 8) -> AgentSpec:
    return AgentSpec(kind=PEDESTRIAN, size=(size, size), speed=speed)


def vehicle_spec(start_frame: int, road: str = "h", heading: int = 1, speed: float = 6.0) -> AgentSpec:
    size = (40, 20) if road == "h" else (20, 40)
    return AgentSpec(
        kind=VEHICLE,
        size=size,
        speed=speed,
        color=VEHICLE_COLOR,
        path_policy="straight_transit",
        start_frame=start_frame,
        road=road,
        heading=heading,
    )


def fight_spec(start_frame: int, end_frame: int, spawn: tuple[float, float]) -> AgentSpec:
    return AgentSpec(
        kind=FIGHTER_PAIR,
        size=(8, 8),
        speed=0.0,
        color=FIGHTER_COLORS[0],
        path_policy="stationary_jitter",
        start_frame=start_frame,
        end_frame=end_frame,
        spawn=spawn,
    )


@dataclass(frozen=True)
class ToyScenario:
    agents: tuple[AgentSpec, ...]
    duration: int
    seed: int
    canvas_size: int = 256
    road_width: int | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        peds = [a for a in self.agents if a.kind == PEDESTRIAN]
        for v in (a for a in self.agents if a.kind == VEHICLE):
            for p in peds:
                if v.size[0] * v.size[1] <= p.size[0] * p.size[1]:
                    raise ConfigError("vehicle must be larger than pedestrian")
                if v.speed <= p.speed:
                    raise ConfigError("vehicle must be faster than pedestrian")

    @property
    def road_w(self) -> int:
        return self.road_width if self.road_width is not None else max(12, self.canvas_size // 6)

    @property
    def center(self) -> tuple[float, float]:
        return (self.canvas_size / 2.0, self.canvas_size / 2.0)


@dataclass(frozen=True)
class Sprite:
    kind: str
    x: float  # center
    y: float
    w: int
    h: int
    color: tuple[int, int, int]

    def intersects_canvas(self, canvas_size: int) -> bool:
        return (
            self.x + self.w / 2.0 > 0
            and self.x - self.w / 2.0 < canvas_size
            and self.y + self.h / 2.0 > 0
            and self.y - self.h / 2.0 < canvas_size
        )


@dataclass(frozen=True)
class WorldState:
    canvas_size: int
    road_width: int
    sprites: tuple[Sprite, ...]  # painter's order: later entries drawn on top


_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class _PedestrianWalker:
    """Walks road centerlines; hesitates then turns uniformly at the center."""

    def __init__(self, spec: AgentSpec, scenario: ToyScenario, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.canvas = scenario.canvas_size
        self.cx, self.cy = scenario.center
        if spec.spawn is not None:
            self.x, self.y = spec.spawn
        else:
            self.x, self.y = self.cx - scenario.canvas_size / 4.0, self.cy
        self.dx, self.dy = _DIRECTIONS[int(rng.integers(0, 4))]
        self.pause = 0
        self.armed = True
        self.rearm_dist = max(2.0 * spec.speed, float(spec.size[0]))

    def _at_center(self) -> bool:
        return abs(self.x - self.cx) < self.spec.speed and abs(self.y - self.cy) < self.spec.speed

    def step(self) -> None:
        if self.pause > 0:
            self.pause -= 1
            return
        if self.armed and self._at_center():
            self.x, self.y = self.cx, self.cy
            self.pause = int(self.rng.integers(0, PAUSE_MAX + 1))
            self.dx, self.dy = _DIRECTIONS[int(self.rng.integers(0, 4))]
            self.armed = False
            return
        speed = self.spec.speed
        nx, ny = self.x + self.dx * speed, self.y + self.dy * speed
        half_w, half_h = self.spec.size[0] / 2.0, self.spec.size[1] / 2.0
        if nx - half_w < 0 or nx + half_w > self.canvas or ny - half_h < 0 or ny + half_h > self.canvas:
            self.dx, self.dy = -self.dx, -self.dy
            nx, ny = self.x + self.dx * speed, self.y + self.dy * speed
        self.x, self.y = nx, ny
        if not self.armed and max(abs(self.x - self.cx), abs(self.y - self.cy)) >= self.rearm_dist:
            self.armed = True

    def sprites(self) -> list[Sprite]:
        w, h = self.spec.size
        return [Sprite(PEDESTRIAN, self.x, self.y, w, h, self.spec.color)]


class _VehicleTransit:
    """Drives straight along one road strip, entering and exiting off-canvas."""

    def __init__(self, spec: AgentSpec, scenario: ToyScenario, rng: np.random.Generator):
        self.spec = spec
        self.canvas = scenario.canvas_size
        self.cx, self.cy = scenario.center
        w, h = spec.size
        along = w if spec.road == "h" else h
        self.travel = self.canvas + along + 2.0  # fully off -> fully off
        self.frames_needed = math.ceil(self.travel / spec.speed)
        if spec.heading > 0:
            self.entry = -along / 2.0 - 1.0
        else:
            self.entry = self.canvas + along / 2.0 + 1.0

    def end_frame(self) -> int:
        return self.spec.start_frame + self.frames_needed

    def position(self, frame: int) -> tuple[float, float]:
        d = self.spec.speed * (frame - self.spec.start_frame) * self.spec.heading
        if self.spec.road == "h":
            return (self.entry + d, self.cy)
        return (self.cx, self.entry + d)

    def active(self, frame: int) -> bool:
        return self.spec.start_frame <= frame < self.end_frame()

    def sprites(self, frame: int) -> list[Sprite]:
        if not self.active(frame):
            return []
        x, y = self.position(frame)
        w, h = self.spec.size
        return [Sprite(VEHICLE, x, y, w, h, self.spec.color)]


class _FightingPair:
    """Two overlapping sprites jittering around a fixed spot."""

    def __init__(self, spec: AgentSpec, scenario: ToyScenario, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        if spec.spawn is None:
            raise ConfigError("fighter_pair needs an explicit spawn position")
        self.base_x, self.base_y = spec.spawn
        self.sep = spec.size[0] * 0.4

    def active(self, frame: int) -> bool:
        return self.spec.start_frame <= frame < (self.spec.end_frame or self.spec.start_frame)

    def sprites(self, frame: int) -> list[Sprite]:
        if not self.active(frame):
            return []
        w, h = self.spec.size
        out = []
        for i, color in enumerate(FIGHTER_COLORS):
            jx = int(self.rng.integers(-FIGHT_JITTER, FIGHT_JITTER + 1))
            jy = int(self.rng.integers(-FIGHT_JITTER, FIGHT_JITTER + 1))
            off = -self.sep if i == 0 else self.sep
            out.append(Sprite(FIGHTER_PAIR, self.base_x + off + jx, self.base_y + jy, w, h, color))
        return out


def simulate(scenario: ToyScenario) -> list[WorldState]:
    """Run the scenario script; returns one WorldState per frame."""
    streams = [
        np.random.Generator(np.random.PCG64(ss))
        for ss in np.random.SeedSequence(scenario.seed).spawn(len(scenario.agents))
    ]
    walkers = []
    for spec, rng in zip(scenario.agents, streams):
        if spec.kind == PEDESTRIAN:
            walkers.append(_PedestrianWalker(spec, scenario, rng))
        elif spec.kind == VEHICLE:
            transit = _VehicleTransit(spec, scenario, rng)
            if transit.end_frame() > scenario.duration:
                raise ConfigError(
                    f"vehicle episode starting at {spec.start_frame} overflows duration {scenario.duration}"
                )
            walkers.append(transit)
        elif spec.kind == FIGHTER_PAIR:
            if spec.end_frame is None or spec.end_frame > scenario.duration:
                raise ConfigError(
                    f"fighter episode {spec.start_frame}..{spec.end_frame} overflows duration {scenario.duration}"
                )
            walkers.append(_FightingPair(spec, scenario, rng))
        else:
            raise ConfigError(f"unknown agent kind {spec.kind!r}")

    states = []
    for frame in range(scenario.duration):
        sprites: list[Sprite] = []
        for walker in walkers:
            if isinstance(walker, _PedestrianWalker):
                sprites.extend(walker.sprites())
                walker.step()
            else:
                sprites.extend(walker.sprites(frame))
        states.append(WorldState(scenario.canvas_size, scenario.road_w, tuple(sprites)))
    return states


def render_scene(world: WorldState) -> RawFrame:
    """Rasterize background (crossroad over field) then sprites back-to-front."""
    c = world.canvas_size
    canvas = np.empty((c, c, 3), dtype=np.uint8)
    canvas[:] = FIELD_COLOR
    half_road = world.road_width // 2
    mid = c // 2
    canvas[mid - half_road : mid + half_road, :] = ROAD_COLOR
    canvas[:, mid - half_road : mid + half_road] = ROAD_COLOR
    for sprite in world.sprites:
        x0 = int(round(sprite.x - sprite.w / 2.0))
        y0 = int(round(sprite.y - sprite.h / 2.0))
        x1, y1 = x0 + sprite.w, y0 + sprite.h
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, c), min(y1, c)
        if x0 < x1 and y0 < y1:
            canvas[y0:y1, x0:x1] = sprite.color
    return RawFrame(pixels=canvas, source_path="<toyworld>")


def _anomaly_labels(states: list[WorldState]) -> np.ndarray:
    labels = np.zeros(len(states), dtype=np.int64)
    for i, st in enumerate(states):
        labels[i] = int(
            any(s.kind in ANOMALOUS_KINDS and s.intersects_canvas(st.canvas_size) for s in st.sprites)
        )
    return labels


def render_frames(scenario: ToyScenario) -> tuple[np.ndarray, np.ndarray]:
    """Returns (frames uint8 (N,H,W,3), labels (N,))."""
    states = simulate(scenario)
    frames = np.stack([render_scene(st).pixels for st in states])
    return frames, _anomaly_labels(states)


def generate_training_set(scenario: ToyScenario) -> FrameSequence:
    if any(a.kind in ANOMALOUS_KINDS for a in scenario.agents):
        raise ConfigError("training scenario must contain only pedestrian agents")
    frames, _ = render_frames(scenario)
    return FrameSequence(video_id=f"toy_train_{scenario.seed:04d}", frames=normalize(frames))


def generate_test_set(scenario: ToyScenario) -> tuple[FrameSequence, LabelSeries]:
    if not any(a.kind in ANOMALOUS_KINDS for a in scenario.agents):
        raise ConfigError("test scenario needs at least one anomalous agent episode")
    frames, labels = render_frames(scenario)
    video_id = f"toy_test_{scenario.seed:04d}"
    return (
        FrameSequence(video_id=video_id, frames=normalize(frames)),
        LabelSeries(labels=labels, video_id=video_id),
    )


def default_training_scenario(seed: int, duration: int = 210, canvas_size: int = 256) -> ToyScenario:
    return ToyScenario(agents=(pedestrian_spec(),), duration=duration, seed=seed, canvas_size=canvas_size)


def default_test_scenario(seed: int, duration: int = 1242, canvas_size: int = 256) -> ToyScenario:
    """Pedestrian plus five anomaly episodes spread over the video."""
    cx = cy = canvas_size / 2.0
    vehicle_frames = math.ceil((canvas_size + 40 + 2) / 6.0)

    def vehicle_at(frac: float) -> int:
        # clamp so the crossing finishes inside the video
        return max(0, min(int(frac * duration), duration - vehicle_frames))

    def fight_at(frac: float) -> tuple[int, int]:
        length = max(20, int(0.065 * duration))
        start = max(0, min(int(frac * duration), duration - length))
        return start, start + length

    agents = (
        pedestrian_spec(),
        vehicle_spec(start_frame=vehicle_at(0.12), road="h", heading=1),
        fight_spec(*fight_at(0.30), spawn=(cx + canvas_size / 4.0, cy)),
        vehicle_spec(start_frame=vehicle_at(0.52), road="v", heading=1),
        fight_spec(*fight_at(0.69), spawn=(cx, cy - canvas_size / 4.0)),
        vehicle_spec(start_frame=vehicle_at(0.89), road="h", heading=-1),
    )
    return ToyScenario(agents=agents, duration=duration, seed=seed, canvas_size=canvas_size)


def _agent_manifest(spec: AgentSpec) -> dict:
    return {
        "kind": spec.kind,
        "size": list(spec.size),
        "speed": spec.speed,
        "color": list(spec.color),
        "path_policy": spec.path_policy,
        "start_frame": spec.start_frame,
        "end_frame": spec.end_frame,
        "road": spec.road,
        "heading": spec.heading,
        "spawn": list(spec.spawn) if spec.spawn is not None else None,
    }


def write_frames(dir: Path, frames: np.ndarray) -> None:
    dir.mkdir(parents=True, exist_ok=True)
    for i in range(frames.shape[0]):
        Image.fromarray(frames[i]).save(dir / f"{i:06d}.png")


def write_dataset(root: str | Path, train: ToyScenario, test: ToyScenario) -> Path:
    """Emit the on-disk layout consumed by frames_io, plus a scenario manifest."""
    root = Path(root)
    train_frames, _ = render_frames(train)
    test_frames, test_labels = render_frames(test)
    train_id = f"toy_train_{train.seed:04d}"
    test_id = f"toy_test_{test.seed:04d}"
    write_frames(root / "train" / train_id, train_frames)
    write_frames(root / "test" / test_id, test_frames)
    save_labels(root / "labels" / f"{test_id}.txt", test_labels)
    manifest = {
        "format_version": 1,
        "canvas_size": train.canvas_size,
        "train": {
            "video_id": train_id,
            "seed": train.seed,
            "duration": train.duration,
            "agents": [_agent_manifest(a) for a in train.agents],
        },
        "test": {
            "video_id": test_id,
            "seed": test.seed,
            "duration": test.duration,
            "agents": [_agent_manifest(a) for a in test.agents],
        },
    }
    manifest_path = root / "scenario.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
