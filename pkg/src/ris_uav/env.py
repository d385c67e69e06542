"""Discrete-time data collection MDP.

One episode has `horizon` slots of `slot_seconds` each. Every slot the UAV
takes one of five moves (a fixed step or a stop) and schedules up to
`channels` devices on orthogonal subchannels. Each device carries a fixed
payload that must be uploaded inside its activation window [start, deadline);
a device whose payload completes in time counts as served, which is also the
per-slot reward. The reflect surface is re-phased every slot for the surviving
schedule by block coordinate descent (or seeded random phases, for the
no-optimization baseline).

Scheduling actions address devices by rank in the earliest-deadline-first
ordering of the currently eligible (active, unserved) devices. The rank list
is capped at `schedule_ranks`, so one fixed categorical action set covers
every slot; subsets whose ranks fall beyond the current eligible count are
masked out, except that shorter subsets stand in for padded full ones.

Episode records serialize to a flat JSON document (see `snapshot`), field
order: version, episode config, radio config, device table rows
(x, y, z, payload, start, deadline), dynamic state (slot, uav position,
uploaded bits, served flags), and the action log as (move, device ids) pairs.
Replaying the log from the initial snapshot reproduces the trajectory bit for
bit; restoring a mid-episode snapshot continues it identically.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import EnvGeometry, RadioParams, Vec3, snr as snr_of
from .ris_optim import PhaseConfig, build_links, bcd_optimize

SNAPSHOT_VERSION = 1

# move name -> (dx, dy) unit direction; "stop" holds position
MOVES = ("left", "right", "forward", "backward", "stop")
MOVE_DELTAS = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "forward": (0.0, 1.0),
    "backward": (0.0, -1.0),
    "stop": (0.0, 0.0),
}


@dataclass
class EpisodeConfig:
    """Scenario knobs for one episode family.

    Activation windows are half open: device i may be scheduled at slots
    start <= n < deadline, which spans exactly `activation_slots` slots. When
    activation_slots == horizon every device is active the whole episode.
    """

    horizon: int = 100
    area_x: float = 300.0
    area_y: float = 300.0
    num_devices: int = 50
    channels: int = 3
    step_length: float = 10.0
    max_speed: float = 20.0
    slot_seconds: float = 1.0
    activation_slots: int = 10
    payload_bits: float = 50.0
    uav_z: float = 50.0
    device_z: float = 1.0
    ris_x: float = 0.0
    ris_y: float = 150.0
    ris_z: float = 1.0
    uav_start_x: float = None
    uav_start_y: float = None
    phase_mode: str = "bcd"
    bcd_max_sweeps: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.uav_start_x is None:
            self.uav_start_x = self.area_x / 2.0
        if self.uav_start_y is None:
            self.uav_start_y = self.area_y / 2.0
        if self.horizon < 1 or self.num_devices < 1 or self.channels < 1:
            raise ValueError("horizon, num_devices and channels must be >= 1")
        if self.activation_slots < 1 or self.activation_slots > self.horizon:
            raise ValueError("activation_slots must lie in [1, horizon]")
        if not (self.area_x > 0 and self.area_y > 0 and self.payload_bits > 0):
            raise ValueError("area and payload must be positive")
        if not 0 < self.step_length <= self.max_speed * self.slot_seconds:
            raise ValueError("step_length must be positive and satisfy the speed cap")
        if self.phase_mode not in ("bcd", "random"):
            raise ValueError("phase_mode must be 'bcd' or 'random'")
        if not (0 <= self.uav_start_x <= self.area_x and 0 <= self.uav_start_y <= self.area_y):
            raise ValueError("UAV start must lie inside the area")

    @property
    def ris_position(self):
        return Vec3(self.ris_x, self.ris_y, self.ris_z)


@dataclass
class IoTDevice:
    """One ground device: fixed position, payload, activation window."""

    device_id: int
    x: float
    y: float
    z: float
    payload: float
    start: int
    deadline: int
    uploaded: float = 0.0
    served: bool = False

    @property
    def position(self):
        return Vec3(self.x, self.y, self.z)

    def active(self, slot):
        return self.start <= slot < self.deadline

    def eligible(self, slot):
        return self.active(slot) and not self.served

    @property
    def remaining(self):
        return max(self.payload - self.uploaded, 0.0)


@dataclass(frozen=True)
class Action:
    """One joint action: a move name plus the scheduled device ids."""

    move: str
    schedule: tuple = ()


@dataclass
class EnvState:
    slot: int
    uav: Vec3
    devices: list

    def eligible_ids(self):
        """Eligible device ids for the next slot, earliest deadline first."""
        ids = [d.device_id for d in self.devices if d.eligible(self.slot + 1)]
        ids.sort(key=lambda i: (self.devices[i].deadline, i))
        return ids


@dataclass
class StepResult:
    state: EnvState
    reward: float
    done: bool
    delivered: dict
    newly_served: tuple
    phases: PhaseConfig


def action_space_size(config):
    """Nominal joint action count: 5 moves times the C-subsets of the
    average concurrently-active device count round(I*L/N)."""
    avg_active = config.num_devices * config.activation_slots / config.horizon
    if avg_active < config.channels:
        raise ValueError("average active count below the channel count; "
                         "the nominal formula does not apply")
    return 5 * math.comb(round(avg_active), config.channels)


def schedule_rank_cap(config):
    """Length of the EDF rank list addressed by schedule subsets."""
    avg_active = config.num_devices * config.activation_slots / config.horizon
    return max(round(avg_active), config.channels)


def schedule_subsets(config):
    """All rank subsets of size <= channels, ordered by size then rank-lex.

    Index 0 is the empty schedule, so a legal action always exists.
    """
    cap = schedule_rank_cap(config)
    subsets = []
    for size in range(min(config.channels, cap) + 1):
        subsets.extend(itertools.combinations(range(cap), size))
    return subsets


class DataCollectionEnv:
    """Gym-style environment; reset(seed) then step(action) until done."""

    def __init__(self, config, radio):
        self.config = config
        self.radio = radio
        self.subsets = schedule_subsets(config)
        self.num_actions = len(MOVES) * len(self.subsets)
        self.state = None
        self.done = True
        self.uav_path = []
        self._phase_seed = None

    # ------------------------------------------------------------- lifecycle

    def reset(self, seed=None):
        """Place devices uniformly and draw activation windows.

        Windows are start ~ U{1..horizon-activation_slots} (start = 1 when the
        window fills the whole episode) with deadline = start + activation_slots.
        """
        cfg = self.config
        if seed is None:
            seed = cfg.seed
        place_ss = np.random.SeedSequence(seed).spawn(1)[0]
        rng = np.random.default_rng(place_ss)
        self._phase_seed = int(seed)  # per-slot stream key, see _phases_for

        devices = []
        for i in range(cfg.num_devices):
            x = rng.uniform(0.0, cfg.area_x)
            y = rng.uniform(0.0, cfg.area_y)
            latest = cfg.horizon - cfg.activation_slots
            start = int(rng.integers(1, latest + 1)) if latest >= 1 else 1
            deadline = min(start + cfg.activation_slots, cfg.horizon + 1)
            devices.append(IoTDevice(i, x, y, cfg.device_z, cfg.payload_bits,
                                     start, deadline))
        self.state = EnvState(
            slot=0,
            uav=Vec3(cfg.uav_start_x, cfg.uav_start_y, cfg.uav_z),
            devices=devices,
        )
        self.done = False
        self.uav_path = [(self.state.uav.x, self.state.uav.y)]
        return self.state

    # ---------------------------------------------------------- action space

    def actions(self):
        """The fixed joint action list; index = move_idx * len(subsets) + subset_idx."""
        out = []
        for move in MOVES:
            for sub in self.subsets:
                out.append((move, sub))
        return out

    def legal_mask(self, state=None):
        """Boolean legality over the joint action set for the coming slot.

        A rank subset is legal when all its ranks address current eligible
        devices; the empty subset is always legal. Padded (shorter) subsets
        cover the case of fewer eligible devices than channels.
        """
        state = state or self.state
        n_eligible = len(state.eligible_ids())
        sub_ok = np.array([all(r < n_eligible for r in sub) for sub in self.subsets])
        return np.tile(sub_ok, len(MOVES))

    def legal_actions(self, state=None):
        """Concrete (move, device ids) pairs legal in the coming slot."""
        state = state or self.state
        ranked = state.eligible_ids()
        mask = self.legal_mask(state)
        out = []
        for(idx, (move, sub)) in enumerate(self.actions()):
            if mask[idx]:
                out.append(Action(move, tuple(ranked[r] for r in sub)))
        return out

    def decode_action(self, index, state=None):
        """Map a joint action index to (move, device ids) for the given state."""
        state = state or self.state
        if not 0 <= index < self.num_actions:
            raise ValueError(f"action index {index} out of range")
        move = MOVES[index // len(self.subsets)]
        sub = self.subsets[index % len(self.subsets)]
        ranked = state.eligible_ids()
        sched = tuple(ranked[r] for r in sub if r < len(ranked))
        return Action(move, sched)

    # ---------------------------------------------------------------- dynamics

    def _phases_for(self, sched, slot):
        radio = self.radio
        if radio.num_elements == 0 or not sched:
            return PhaseConfig((0,) * radio.num_elements, radio.num_phases)
        if self.config.phase_mode == "random":
            rng = np.random.default_rng(np.random.SeedSequence([self._phase_seed, slot]))
            idx = tuple(int(k) for k in rng.integers(0, radio.num_phases,
                                                     size=radio.num_elements))
            return PhaseConfig(idx, radio.num_phases)
        geometry = self._geometry()
        return bcd_optimize(sched, geometry, radio,
                            max_sweeps=self.config.bcd_max_sweeps)

    def _geometry(self):
        return EnvGeometry(
            uav=self.state.uav,
            ris=self.config.ris_position,
            devices=tuple(d.position for d in self.state.devices),
        )

    def step(self, action):
        """Advance one slot. Moves that would leave the area are ignored
        (the UAV stays put); schedule entries that are not eligible in this
        slot are dropped; remaining devices upload log2(1+SNR) bits."""
        if self.done:
            raise RuntimeError("episode is over; call reset()")
        if action.move not in MOVE_DELTAS:
            raise ValueError(f"unknown move {action.move!r}")
        sched = tuple(dict.fromkeys(action.schedule))
        if len(sched) > self.config.channels:
            raise ValueError("schedule exceeds the channel count")
        for i in sched:
            if not 0 <= i < self.config.num_devices:
                raise ValueError(f"unknown device id {i}")

        cfg = self.config
        state = self.state
        slot = state.slot + 1

        dx, dy = MOVE_DELTAS[action.move]
        nx = state.uav.x + dx * cfg.step_length
        ny = state.uav.y + dy * cfg.step_length
        if 0.0 <= nx <= cfg.area_x and 0.0 <= ny <= cfg.area_y:
            state.uav = Vec3(nx, ny, state.uav.z)
        self.uav_path.append((state.uav.x, state.uav.y))

        # drop entries that are out of window or already finished
        sched = tuple(i for i in sched if state.devices[i].eligible(slot))

        phases = self._phases_for(sched, slot)
        delivered = {}
        newly_served = []
        if sched:
            links = build_links(sched, self._geometry(), self.radio)
            theta = phases.phases
            for dev_id, link in zip(sched, links):
                comp = link.direct + (link.cascade @ np.exp(1j * theta)
                                      if len(link.cascade) else 0.0)
                bits = math.log2(1.0 + snr_of(abs(comp) ** 2, self.radio))
                dev = state.devices[dev_id]
                dev.uploaded += bits
                delivered[dev_id] = bits
                if dev.uploaded >= dev.payload and not dev.served:
                    dev.served = True
                    newly_served.append(dev_id)

        state.slot = slot
        self.done = slot >= cfg.horizon
        return StepResult(state, float(len(newly_served)), self.done,
                          delivered, tuple(newly_served), phases)

    def served_total(self):
        return sum(1 for d in self.state.devices if d.served)

    def served_bits(self):
        return sum(d.payload for d in self.state.devices if d.served)

    # ------------------------------------------------------------ persistence

    def snapshot(self):
        """Flat JSON-ready dict of config, device table and dynamic state."""
        return {
            "version": SNAPSHOT_VERSION,
            "episode": asdict(self.config),
            "radio": asdict(self.radio),
            "phase_seed": self._phase_seed,
            "devices": [[d.x, d.y, d.z, d.payload, d.start, d.deadline] for d in self.state.devices],
            "state": {
                "slot": self.state.slot,
                "uav_x": self.state.uav.x,
                "uav_y": self.state.uav.y,
                "uploaded": [d.uploaded for d in self.state.devices],
                "served": [d.served for d in self.state.devices],
            },
        }

    @classmethod
    def from_snapshot(cls, doc):
        if doc.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {doc.get('version')!r}")
        config = EpisodeConfig(**doc["episode"])
        radio = RadioParams(**doc["radio"])
        env = cls(config, radio)
        dyn = doc["state"]
        devices = []
        for i, (row, up, sv) in enumerate(zip(doc["devices"], dyn["uploaded"], dyn["served"])):
            x, y, z, payload, start, deadline = row
            devices.append(IoTDevice(i, x, y, z, payload, int(start), int(deadline),
                                     uploaded=up, served=bool(sv)))
        env.state = EnvState(slot=int(dyn["slot"]),
                             uav=Vec3(dyn["uav_x"], dyn["uav_y"], config.uav_z),
                             devices=devices)
        env._phase_seed = doc["phase_seed"]
        env.done = env.state.slot >= config.horizon
        env.uav_path = [(env.state.uav.x, env.state.uav.y)]
        return env


def save_episode(path, initial_snapshot, action_log):
    """Write a replayable episode record: initial snapshot plus action log."""
    doc = dict(initial_snapshot)
    doc["actions"] = [[a.move, list(a.schedule)] for a in action_log]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_episode(path):
    with open(path) as fh:
        doc = json.load(fh)
    actions = [Action(move, tuple(ids)) for move, ids in doc.pop("actions")]
    return doc, actions


def replay_episode(doc, actions):
    """Re-run a recorded episode.

    Returns (env, trajectory) where trajectory holds one value-snapshot per
    step: (uav_x, uav_y, uploaded tuple, served tuple, reward).
    """
    env = DataCollectionEnv.from_snapshot(doc)
    trajectory = []
    for act in actions:
        res = env.step(act)
        trajectory.append((env.state.uav.x, env.state.uav.y,
                           tuple(d.uploaded for d in env.state.devices),
                           tuple(d.served for d in env.state.devices),
                           res.reward))
    return env, trajectory
