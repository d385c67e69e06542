"""PPO agent over the data-collection MDP.

Policy and value function are separate three-affine-layer networks (tanh
hidden activations, 64 units by default); the policy ends in a softmax over
the joint move x schedule-subset action set, with illegal actions masked out
before normalization. Everything is plain numpy with hand-written
backpropagation; gradients are exact for the defined architecture and are
checked against central finite differences in the tests.

The update is the clipped surrogate objective

    L = -E[min(r*A, clip(r, 1-eps, 1+eps)*A)] + c_v*E[(V-G)^2] - c_e*E[H]

with Monte-Carlo returns G, advantages A = G - V normalized per update batch,
and Adam on both networks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1
MASK_OFFSET = -1e9  # added to illegal logits; exp underflows to exactly 0


@dataclass
class Hyperparams:
    lr: float = 0.002
    gamma: float = 0.08
    clip_eps: float = 0.02
    epochs: int = 4
    episodes_per_update: int = 8
    minibatch: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: int = 64

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.clip_eps <= 0 or self.lr <= 0:
            raise ValueError("clip_eps and lr must be positive")


class Mlp:
    """in -> hidden -> hidden -> out with tanh on the two hidden layers."""

    LAYERS = ("w1", "b1", "w2", "b2", "w3", "b3")

    def __init__(self, n_in, n_hidden, n_out, rng=None):
        self.sizes = (n_in, n_hidden, n_out)
        if rng is None:
            self.params = {k: None for k in self.LAYERS}
            return
        def u(fan_in, shape):
            bound = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)
        self.params = {
            "w1": u(n_in, (n_in, n_hidden)), "b1": np.zeros(n_hidden),
            "w2": u(n_hidden, (n_hidden, n_hidden)), "b2": np.zeros(n_hidden),
            "w3": u(n_hidden, (n_hidden, n_out)), "b3": np.zeros(n_out),
        }

    def forward(self, x):
        """x (B, in) -> (out (B, n_out), cache for backward)."""
        p = self.params
        a1 = np.tanh(x @ p["w1"] + p["b1"])
        a2 = np.tanh(a1 @ p["w2"] + p["b2"])
        out = a2 @ p["w3"] + p["b3"]
        return out, (x, a1, a2)

    def backward(self, cache, dout):
        """dout (B, n_out) -> grads keyed like params."""
        x, a1, a2 = cache
        p = self.params
        g = {}
        g["w3"] = a2.T @ dout
        g["b3"] = dout.sum(axis=0)
        da2 = (dout @ p["w3"].T) * (1.0 - a2 * a2)
        g["w2"] = a1.T @ da2
        g["b2"] = da2.sum(axis=0)
        da1 = (da2 @ p["w2"].T) * (1.0 - a1 * a1)
        g["w1"] = x.T @ da1
        g["b1"] = da1.sum(axis=0)
        return g


@dataclass
class PolicyValueNets:
    policy: Mlp
    value: Mlp
    feat_dim: int
    n_actions: int
    hidden: int


def init_nets(feat_dim, n_actions, hidden=64, seed=0):
    rng = np.random.default_rng(seed)
    return PolicyValueNets(
        policy=Mlp(feat_dim, hidden, n_actions, rng),
        value=Mlp(feat_dim, hidden, 1, rng),
        feat_dim=feat_dim, n_actions=n_actions, hidden=hidden,
    )


# -------------------------------------------------------------- state coding

def encode_state(state, config):
    """Flat features: UAV xy in [0,1], then per device (x, y, window start,
    window end, remaining payload fraction, eligible-now flag)."""
    n = config.horizon
    feats = [state.uav.x / config.area_x, state.uav.y / config.area_y]
    for d in state.devices:
        feats.extend((
            d.x / config.area_x,
            d.y / config.area_y,
            d.start / n,
            d.deadline / n,
            d.remaining / d.payload,
            1.0 if d.eligible(state.slot + 1) else 0.0,
        ))
    return np.asarray(feats, dtype=float)


def decode_positions(features, config):
    """Inverse of the position part of encode_state: (uav_xy, device_xy list)."""
    uav = (features[0] * config.area_x, features[1] * config.area_y)
    devs = []
    for k in range(config.num_devices):
        base = 2 + 6 * k
        devs.append((features[base] * config.area_x, features[base + 1] * config.area_y))
    return uav, devs


# ---------------------------------------------------------------- forward ops

def masked_log_softmax(logits, mask):
    """Row-wise log-softmax over the legal entries; illegal entries keep a
    huge negative log-probability (their probability is exactly 0)."""
    z = np.where(mask, logits, logits + MASK_OFFSET)
    z = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    return z - lse


def policy_forward(nets, feats, mask):
    """Action probabilities for one state; sums to 1 over legal actions.

    With every action masked (cannot happen through the env, which always
    allows the empty schedule) the distribution falls back to uniform over
    the five movement-only actions.
    """
    feats = np.atleast_2d(feats)
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if not mask.any():
        probs = np.zeros(nets.n_actions)
        stride = nets.n_actions // 5
        probs[::stride] = 0.2  # one empty-schedule action per move
        return probs
    logits, _ = nets.policy.forward(feats)
    probs = np.exp(masked_log_softmax(logits, mask))[0]
    return probs / probs.sum()


def value_forward(nets, feats):
    out, _ = nets.value.forward(np.atleast_2d(feats))
    return float(out[0, 0])


def greedy_action(nets, feats, mask):
    """Deterministic evaluation policy: most probable legal action."""
    return int(np.argmax(policy_forward(nets, feats, mask)))


# ------------------------------------------------------------------ rollouts

@dataclass
class RolloutBuffer:
    feats: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def add(self, feats, mask, action, log_prob, value, reward, done):
        self.feats.append(feats)
        self.masks.append(mask)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.values.append(value)
        self.rewards.append(reward)
        self.dones.append(done)

    def __len__(self):
        return len(self.rewards)

    def arrays(self):
        if not self.rewards:
            raise ValueError("empty rollout buffer")
        return dict(
            feats=np.asarray(self.feats, dtype=float),
            masks=np.asarray(self.masks, dtype=bool),
            actions=np.asarray(self.actions, dtype=int),
            log_probs=np.asarray(self.log_probs, dtype=float),
            values=np.asarray(self.values, dtype=float),
            rewards=np.asarray(self.rewards, dtype=float),
            dones=np.asarray(self.dones, dtype=bool),
        )


def compute_advantages(rewards, values, dones, gamma, normalize=True):
    """Discounted Monte-Carlo returns and advantages G - V.

    Episodes are delimited by done flags; nothing bootstraps across them.
    Normalization (zero mean, unit variance) is applied over the whole batch
    unless the advantages are effectively constant.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if rewards.size == 0:
        raise ValueError("empty rollout")
    returns = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.size - 1, -1, -1):
        if dones[t]:
            acc = 0.0
        acc = rewards[t] + gamma * acc
        returns[t] = acc
    adv = returns - values
    if normalize:
        std = adv.std()
        if std > 1e-8:
            adv = (adv - adv.mean()) / std
        else:
            adv = adv - adv.mean()
    return returns, adv


# -------------------------------------------------------------------- update

def loss_and_grads(nets, batch, hyper):
    """Total PPO loss and its exact gradients for every parameter.

    batch needs feats (B,F), masks (B,A), actions (B,), old log_probs (B,),
    returns (B,) and advantages (B,).
    """
    feats = batch["feats"]
    b = feats.shape[0]
    rows = np.arange(b)

    logits, pol_cache = nets.policy.forward(feats)
    logp = masked_log_softmax(logits, batch["masks"])
    probs = np.exp(logp)
    logp_a = logp[rows, batch["actions"]]

    ratio = np.exp(logp_a - batch["log_probs"])
    adv = batch["advantages"]
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps) * adv
    policy_loss = -np.minimum(surr1, surr2).mean()

    entropy_rows = -np.sum(np.where(probs > 0, probs * logp, 0.0), axis=1)
    entropy = entropy_rows.mean()

    v_out, val_cache = nets.value.forward(feats)
    v = v_out[:, 0]
    value_err = v - batch["returns"]
    value_loss = np.mean(value_err ** 2)

    loss = policy_loss + hyper.value_coef * value_loss - hyper.entropy_coef * entropy
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite loss (policy {policy_loss}, value {value_loss}, entropy {entropy})")

    # d loss / d logits.  The min() gate passes gradient through the unclipped
    # branch iff surr1 <= surr2 (the clipped branch is constant in the params
    # whenever it is strictly smaller).
    gate = (surr1 <= surr2).astype(float)
    dlogp_a = -(gate * adv * ratio) / b
    dlogits = -probs * dlogp_a[:, None]
    dlogits[rows, batch["actions"]] += dlogp_a
    # entropy term: d(-c_e * H)/dz = (c_e / B) * p * (logp + H_row)
    ent_part = np.where(probs > 0,
                        probs * (logp + entropy_rows[:, None]), 0.0)
    dlogits += hyper.entropy_coef * ent_part / b

    pol_grads = nets.policy.backward(pol_cache, dlogits)

    dv = hyper.value_coef * 2.0 * value_err[:, None] / b
    val_grads = nets.value.backward(val_cache, dv)

    grads = {f"policy.{k}": v for k, v in pol_grads.items()}
    grads.update({f"value.{k}": v for k, v in val_grads.items()})
    stats = dict(loss=float(loss), policy_loss=float(policy_loss),
                 value_loss=float(value_loss), entropy=float(entropy))
    return loss, grads, stats


class Adam:
    def __init__(self, hyper):
        self.hyper = hyper
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, nets, grads):
        h = self.hyper
        self.t += 1
        for key, g in grads.items():
            net_name, param = key.split(".")
            net = getattr(nets, net_name)
            if key not in self.m:
                self.m[key] = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            self.m[key] = h.adam_beta1 * self.m[key] + (1 - h.adam_beta1) * g
            self.v[key] = h.adam_beta2 * self.v[key] + (1 - h.adam_beta2) * g * g
            m_hat = self.m[key] / (1 - h.adam_beta1 ** self.t)
            v_hat = self.v[key] / (1 - h.adam_beta2 ** self.t)
            net.params[param] -= h.lr * m_hat / (np.sqrt(v_hat) + h.adam_eps)


def ppo_update(nets, buffer, hyper, optimizer, rng):
    """One PPO update over a finished rollout buffer; returns mean stats."""
    data = buffer.arrays()
    returns, adv = compute_advantages(data["rewards"], data["values"],
                                      data["dones"], hyper.gamma)
    n = len(returns)
    batch = dict(feats=data["feats"], masks=data["masks"], actions=data["actions"],
                 log_probs=data["log_probs"], returns=returns, advantages=adv)
    agg = {"loss": 0.0, "policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0}
    steps = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.minibatch):
            sel = order[lo:lo + hyper.minibatch]
            mini = {k: v[sel] for k, v in batch.items()}
            _, grads, stats = loss_and_grads(nets, mini, hyper)
            optimizer.step(nets, grads)
            for k in agg:
                agg[k] += stats[k]
            steps += 1
    return {k: v / max(steps, 1) for k, v in agg.items()}


# ------------------------------------------------------------------ training

@dataclass
class TrainResult:
    nets: PolicyValueNets
    episode_returns: list
    update_stats: list


def run_episode(env, nets, rng, buffer=None, greedy=False, seed=None):
    """Play one episode; optionally record it into a rollout buffer.

    Returns the episode return (sum of per-slot rewards).
    """
    state = env.reset(seed=seed)
    total = 0.0
    while not env.done:
        feats = encode_state(state, env.config)
        mask = env.legal_mask(state)
        probs = policy_forward(nets, feats, mask)
        if greedy:
            action_idx = int(np.argmax(probs))
        else:
            action_idx = int(rng.choice(len(probs), p=probs))
        res = env.step(env.decode_action(action_idx, state))
        total += res.reward
        if buffer is not None:
            buffer.add(feats, mask, action_idx, math.log(probs[action_idx]),
                       value_forward(nets, feats), res.reward, res.done)
        state = res.state
    return total


def train(env, hyper, episodes, seed=0, nets=None, fresh_instances=True):
    """PPO training over seeded episodes of the given environment.

    With fresh_instances (default) episode k draws its placement seed from
    (seed, k), so the agent sees a new device layout every episode; with
    fresh_instances=False every episode replays the same layout (seed), which
    isolates policy convergence from placement luck. Action sampling and
    minibatch shuffling come from one seeded generator, so a fixed seed gives
    an identical run either way.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA0E17]))
    feats0 = encode_state(env.reset(seed=seed), env.config)
    if nets is None:
        nets = init_nets(len(feats0), env.num_actions, hidden=hyper.hidden, seed=seed)
    optimizer = Adam(hyper)
    buffer = RolloutBuffer()
    curve, stats_log = [], []
    for ep in range(episodes):
        if fresh_instances:
            ep_seed = int(np.random.SeedSequence([seed, 1, ep]).generate_state(1)[0])
        else:
            ep_seed = seed
        curve.append(run_episode(env, nets, rng, buffer=buffer, seed=ep_seed))
        if (ep + 1) % hyper.episodes_per_update == 0:
            stats_log.append(ppo_update(nets, buffer, hyper, optimizer, rng))
            buffer = RolloutBuffer()
    return TrainResult(nets, curve, stats_log)


def moving_average(series, window):
    """Trailing moving average; entry k averages series[max(0,k-w+1)..k]."""
    out = []
    acc = 0.0
    for k, val in enumerate(series):
        acc += val
        if k >= window:
            acc -= series[k - window]
        out.append(acc / min(k + 1, window))
    return out


# --------------------------------------------------------------- persistence

def save_learning_curve(path, result, hyper):
    """CSV of per-episode returns; loss columns are filled on the episodes
    where an update ran (every episodes_per_update-th) and left blank between.
    """
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "return", "loss", "policy_loss",
                         "value_loss", "entropy"])
        for ep, ret in enumerate(result.episode_returns, start=1):
            row = [ep, repr(float(ret)), "", "", "", ""]
            if ep % hyper.episodes_per_update == 0:
                k = ep // hyper.episodes_per_update - 1
                if k < len(result.update_stats):
                    s = result.update_stats[k]
                    row[2:] = [repr(s["loss"]), repr(s["policy_loss"]),
                               repr(s["value_loss"]), repr(s["entropy"])]
            writer.writerow(row)


def save_checkpoint(path, nets, meta=None):
    """All layer parameters plus shape metadata, bit-exact round trip."""
    arrays = {}
    for net_name in ("policy", "value"):
        net = getattr(nets, net_name)
        for k, v in net.params.items():
            arrays[f"{net_name}.{k}"] = v
    header = dict(version=CHECKPOINT_VERSION, feat_dim=nets.feat_dim,
                  n_actions=nets.n_actions, hidden=nets.hidden, meta=meta or {})
    np.savez(path, __header__=np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        nets = PolicyValueNets(
            policy=Mlp(header["feat_dim"], header["hidden"], header["n_actions"]),
            value=Mlp(header["feat_dim"], header["hidden"], 1),
            feat_dim=header["feat_dim"], n_actions=header["n_actions"],
            hidden=header["hidden"],
        )
        for net_name in ("policy", "value"):
            net = getattr(nets, net_name)
            net.params = {k: data[f"{net_name}.{k}"].copy() for k in Mlp.LAYERS}
    return nets, header["meta"]
