"""Experiment driver: policies, seeded sweeps, CSV artifacts, INI configs.

Five policy kinds cover the trained agent and its ablations:

  drl_bcd           trained agent, per-slot coordinate-descent phase tuning
  random_walk_bcd   uniform random move each slot, earliest-deadline schedule
  stationary_bcd    parked at the area center, earliest-deadline schedule
  drl_random_theta  trained agent, seeded uniform random phases instead of BCD
  drl_no_ris        agent trained and evaluated with zero reflect elements

Baselines schedule by earliest deadline first among eligible devices, up to
the channel budget. A sweep varies one scenario knob (element count, device
count or payload) across a value list and evaluates every policy at every
value over a seed list; identical config and seeds give byte-identical CSV.

Config files are INI with sections [episode], [radio], [power], [train] and
[experiment]. Radio powers may be given in dB form (sigma2_dbm, tx_power_dbm,
rho_db, rician_k_db); they convert to linear units at load, and dump_config
echoes the resolved linear values.
"""

from __future__ import annotations

import configparser
import csv
import io
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .agent import Hyperparams, encode_state, policy_forward, train
from .channel import RadioParams
from .energy import UAVPowerParams, trajectory_energy, energy_efficiency
from .env import Action, DataCollectionEnv, EpisodeConfig, MOVES

POLICY_KINDS = ("drl_bcd", "random_walk_bcd", "stationary_bcd",
                "drl_random_theta", "drl_no_ris")
DRL_KINDS = frozenset(("drl_bcd", "drl_random_theta", "drl_no_ris"))

SWEEP_VARS = ("none", "num_elements", "num_devices", "payload_bits")

CSV_HEADER = ("sweep_var", "value", "policy", "seed", "served", "served_frac",
              "bits", "energy_J", "eff_bits_per_J")


# -------------------------------------------------------------- unit helpers

def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    if x <= 0:
        raise ValueError("dB of a non-positive value")
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w):
    return linear_to_db(w) + 30.0


# ------------------------------------------------------------- configuration

@dataclass
class ExperimentConfig:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    radio: RadioParams = field(default_factory=RadioParams)
    power: UAVPowerParams = field(default_factory=UAVPowerParams)
    train: Hyperparams = field(default_factory=Hyperparams)
    policies: tuple = ("drl_bcd",)
    sweep_var: str = "none"
    sweep_values: tuple = ()
    seeds: tuple = (0,)
    eval_episodes: int = 50
    train_episodes: int = 0

    def __post_init__(self):
        self.policies = tuple(self.policies)
        self.sweep_values = tuple(self.sweep_values)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.sweep_var not in SWEEP_VARS:
            raise ValueError(f"unknown sweep_var {self.sweep_var!r}")
        if self.sweep_var != "none" and not self.sweep_values:
            raise ValueError("sweep_values required when sweep_var is set")
        if self.sweep_var == "none" and self.sweep_values:
            raise ValueError("sweep_values given without a sweep_var")
        for kind in self.policies:
            if kind not in POLICY_KINDS:
                raise ValueError(f"unknown policy kind {kind!r}")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.train_episodes < 0:
            raise ValueError("train_episodes must be >= 0")
        bad = [v for v in self.sweep_values if v < 0]
        if bad:
            raise ValueError(f"negative sweep values {bad}")


# dB-form aliases accepted in [radio]; converted to the linear field at load
_DB_ALIASES = {
    "sigma2_dbm": ("sigma2", dbm_to_watts),
    "tx_power_dbm": ("tx_power", dbm_to_watts),
    "rho_db": ("rho", db_to_linear),
    "rician_k_db": ("rician_k", db_to_linear),
}

_COERCERS = {"int": int, "float": float, "str": str}


def _coerce_section(cls, raw, section):
    """Map INI strings onto a dataclass's fields, with type coercion."""
    types = {f.name: f.type if isinstance(f.type, str)
             else getattr(f.type, "__name__", "str") for f in fields(cls)}
    kwargs = {}
    for key, text in raw.items():
        if key not in types:
            raise ValueError(f"unknown key {key!r} in section [{section}]")
        coerce = _COERCERS.get(types[key], str)
        kwargs[key] = coerce(text)
    return cls(**kwargs)


def _split(text):
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def load_config(path):
    """Read an INI experiment config; missing sections fall back to defaults."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    known = {"episode", "radio", "power", "train", "experiment"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")

    episode = _coerce_section(EpisodeConfig, dict(parser.items("episode"))
                              if parser.has_section("episode") else {}, "episode")
    power = _coerce_section(UAVPowerParams, dict(parser.items("power"))
                            if parser.has_section("power") else {}, "power")
    hyper = _coerce_section(Hyperparams, dict(parser.items("train"))
                            if parser.has_section("train") else {}, "train")

    raw_radio = dict(parser.items("radio")) if parser.has_section("radio") else {}
    for alias, (target, convert) in _DB_ALIASES.items():
        if alias in raw_radio:
            if target in raw_radio:
                raise ValueError(f"both {alias!r} and {target!r} set in [radio]")
            raw_radio[target] = repr(convert(float(raw_radio.pop(alias))))
    radio = _coerce_section(RadioParams, raw_radio, "radio")

    raw_exp = dict(parser.items("experiment")) if parser.has_section("experiment") else {}
    exp_kwargs = {}
    for key, text in raw_exp.items():
        if key == "policies":
            exp_kwargs[key] = tuple(_split(text))
        elif key == "seeds":
            exp_kwargs[key] = tuple(int(tok) for tok in _split(text))
        elif key == "sweep_values":
            exp_kwargs[key] = tuple(float(tok) for tok in _split(text))
        elif key in ("eval_episodes", "train_episodes"):
            exp_kwargs[key] = int(text)
        elif key == "sweep_var":
            exp_kwargs[key] = text
        else:
            raise ValueError(f"unknown key {key!r} in section [experiment]")
    return ExperimentConfig(episode=episode, radio=radio, power=power,
                            train=hyper, **exp_kwargs)


def dump_config(cfg):
    """Resolved INI text: every field explicit, powers in linear units."""
    parser = configparser.ConfigParser()
    for section, obj in (("episode", cfg.episode), ("radio", cfg.radio),
                         ("power", cfg.power), ("train", cfg.train)):
        parser[section] = {f.name: repr(getattr(obj, f.name))
                           if isinstance(getattr(obj, f.name), float)
                           else str(getattr(obj, f.name))
                           for f in fields(obj)}
    parser["experiment"] = {
        "policies": ", ".join(cfg.policies),
        "sweep_var": cfg.sweep_var,
        "sweep_values": ", ".join(repr(float(v)) for v in cfg.sweep_values),
        "seeds": ", ".join(str(s) for s in cfg.seeds),
        "eval_episodes": str(cfg.eval_episodes),
        "train_episodes": str(cfg.train_episodes),
    }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


# ------------------------------------------------------------------ policies

def edf_schedule(state, channels):
    """Earliest-deadline-first pick of up to `channels` eligible devices."""
    return tuple(state.eligible_ids()[:channels])


def make_policy(kind, env, nets, seed):
    """Per-slot action callable for one evaluation episode."""
    if kind == "stationary_bcd":
        def act(state):
            return Action("stop", edf_schedule(state, env.config.channels))
    elif kind == "random_walk_bcd":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5A11D]))
        def act(state):
            move = MOVES[int(rng.integers(len(MOVES)))]
            return Action(move, edf_schedule(state, env.config.channels))
    elif kind in DRL_KINDS:
        if nets is None:
            raise ValueError(f"policy {kind!r} needs a trained checkpoint")
        # evaluate the stochastic policy itself (seeded), matching what the
        # training curve measures; argmax decoding collapses the learned
        # action mixture and measurably underserves
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD81]))
        def act(state):
            feats = encode_state(state, env.config)
            mask = np.asarray(env.legal_mask(state))
            probs = policy_forward(nets, feats, mask)
            return env.decode_action(int(rng.choice(len(probs), p=probs)), state)
    else:
        raise ValueError(f"unknown policy kind {kind!r}")
    return act


def scenario_for(kind, episode, radio):
    """Episode/radio configs after the per-kind overrides."""
    if kind == "drl_no_ris":
        radio = replace(radio, num_elements=0)
    elif kind == "drl_random_theta":
        episode = replace(episode, phase_mode="random")
    elif kind == "stationary_bcd":
        episode = replace(episode, uav_start_x=episode.area_x / 2.0,
                          uav_start_y=episode.area_y / 2.0)
    return episode, radio


def training_signature(kind, episode, radio):
    """Checkpoint cache key: the scenario axes a trained net depends on.

    drl_random_theta evaluates with random phases but reuses the net trained
    on the full method, so it shares drl_bcd's signature.
    """
    elements = 0 if kind == "drl_no_ris" else radio.num_elements
    return (int(elements), int(episode.num_devices), float(episode.payload_bits))


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class SeedResult:
    seed: int
    served: float          # mean devices served per episode
    served_frac: float
    bits: float            # mean delivered payload bits per episode
    energy_j: float        # mean propulsion energy per episode
    efficiency: float      # total bits / total energy over the seed's episodes
    wall_time: float       # seconds; excluded from CSV output


@dataclass
class RunRecord:
    policy: str
    sweep_var: str
    sweep_value: object
    results: tuple
    training_curve: tuple = ()
    phase_log: tuple = ()  # per-slot phase indices from the first episode

    @property
    def sample_count(self):
        return len(self.results)

    def _mean(self, attr):
        return sum(getattr(r, attr) for r in self.results) / len(self.results)

    @property
    def mean_served(self):
        return self._mean("served")

    @property
    def mean_served_frac(self):
        return self._mean("served_frac")

    @property
    def mean_bits(self):
        return self._mean("bits")

    @property
    def mean_energy(self):
        return self._mean("energy_j")

    @property
    def mean_efficiency(self):
        return self._mean("efficiency")


def evaluate_seed(kind, episode, radio, power, nets, seed, episodes,
                  collect_phases=False):
    """Mean metrics over `episodes` fresh episodes for one evaluation seed."""
    env = DataCollectionEnv(episode, radio)
    served_sum = bits_sum = energy_sum = 0.0
    phase_log = []
    t0 = time.perf_counter()
    for k in range(episodes):
        ep_seed = int(np.random.SeedSequence([seed, 2, k]).generate_state(1)[0])
        act = make_policy(kind, env, nets, seed=ep_seed)
        state = env.reset(seed=ep_seed)
        while not env.done:
            result = env.step(act(state))
            if collect_phases and k == 0 and len(result.phases):
                phase_log.append(result.phases.indices)
            state = result.state
        served_sum += env.served_total()
        bits_sum += env.served_bits()
        energy_sum += trajectory_energy(env.uav_path, episode.slot_seconds, power)
    wall = time.perf_counter() - t0
    return SeedResult(
        seed=seed,
        served=served_sum / episodes,
        served_frac=served_sum / episodes / episode.num_devices,
        bits=bits_sum / episodes,
        energy_j=energy_sum / episodes,
        efficiency=energy_efficiency(bits_sum, energy_sum),
        wall_time=wall,
    ), tuple(phase_log)


def apply_sweep(cfg, value):
    """ExperimentConfig with the sweep variable pinned to one value."""
    if value is None or cfg.sweep_var == "none":
        return cfg
    if cfg.sweep_var == "num_elements":
        return replace(cfg, radio=replace(cfg.radio, num_elements=int(value)))
    if cfg.sweep_var == "num_devices":
        return replace(cfg, episode=replace(cfg.episode, num_devices=int(value)))
    return replace(cfg, episode=replace(cfg.episode, payload_bits=float(value)))


def train_for(kind, cfg, value=None):
    """Train the net a drl kind needs at one sweep point (seeded by seeds[0])."""
    pinned = apply_sweep(cfg, value)
    episode, radio = scenario_for(kind, pinned.episode, pinned.radio)
    if kind == "drl_random_theta":  # trained on the full method
        episode, radio = scenario_for("drl_bcd", pinned.episode, pinned.radio)
    env = DataCollectionEnv(episode, radio)
    result = train(env, cfg.train, cfg.train_episodes, seed=cfg.seeds[0])
    return result.nets, tuple(result.episode_returns)


def run_policy(kind, cfg, nets=None, value=None):
    """Evaluate one policy at one sweep point over every seed.

    drl kinds require `nets` unless cfg.train_episodes > 0, in which case a
    net is trained in place and its learning curve lands on the record.
    """
    if kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy kind {kind!r}")
    pinned = apply_sweep(cfg, value)
    episode, radio = scenario_for(kind, pinned.episode, pinned.radio)
    curve = ()
    if kind in DRL_KINDS and nets is None:
        if cfg.train_episodes <= 0:
            raise ValueError(f"policy {kind!r} needs a trained checkpoint")
        nets, curve = train_for(kind, cfg, value)
    results = []
    phase_log = ()
    for i, seed in enumerate(cfg.seeds):
        res, log = evaluate_seed(kind, episode, radio, cfg.power, nets, seed,
                                 cfg.eval_episodes, collect_phases=(i == 0))
        results.append(res)
        if i == 0:
            phase_log = log
    return RunRecord(policy=kind, sweep_var=cfg.sweep_var,
                     sweep_value=value, results=tuple(results),
                     training_curve=curve, phase_log=phase_log)


def sweep(cfg, nets_by_signature=None):
    """One RunRecord per (sweep value, policy); order values-major.

    Trained nets are cached by training signature, so kinds (and sweep
    points) that share a scenario reuse one net. Prebuilt nets may be passed
    in keyed by `training_signature`.
    """
    cache = dict(nets_by_signature or {})
    values = cfg.sweep_values if cfg.sweep_var != "none" else (None,)
    records = []
    for value in values:
        for kind in cfg.policies:
            nets, curve = None, ()
            if kind in DRL_KINDS:
                pinned = apply_sweep(cfg, value)
                key = training_signature(kind, pinned.episode, pinned.radio)
                if key not in cache:
                    if cfg.train_episodes <= 0:
                        raise ValueError(
                            f"policy {kind!r} needs a trained checkpoint "
                            f"(signature {key})")
                    cache[key] = train_for(kind, cfg, value)
                nets, curve = cache[key]
            rec = run_policy(kind, cfg, nets=nets, value=value)
            if curve and not rec.training_curve:
                rec.training_curve = curve
            records.append(rec)
    return records


# ------------------------------------------------------------------ emission

def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def emit(records, path):
    """CSV artifact, one row per (sweep value, policy, seed)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in records:
            for r in rec.results:
                writer.writerow([
                    rec.sweep_var, _fmt(rec.sweep_value), rec.policy,
                    r.seed, _fmt(r.served), _fmt(r.served_frac),
                    _fmt(r.bits), _fmt(r.energy_j), _fmt(r.efficiency),
                ])


def parse_records(path):
    """Rows of an emitted CSV as dicts with numeric fields restored."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            row["seed"] = int(row["seed"])
            row["value"] = float(row["value"]) if row["value"] else None
            for key in ("served", "served_frac", "bits", "energy_J",
                        "eff_bits_per_J"):
                row[key] = float(row[key])
            rows.append(row)
    return rows
