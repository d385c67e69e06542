"""Command-line entry point.

Subcommands:
  train    fit the PPO agent on the configured scenario, save a checkpoint
  eval     evaluate one policy kind over the configured seeds
  sweep    run the configured parameter sweep and emit the results CSV
  replay   re-run a recorded episode file and print its trajectory
"""

import argparse
import sys

from .agent import (load_checkpoint, moving_average, save_checkpoint,
                    save_learning_curve, train)
from .env import DataCollectionEnv, load_episode, replay_episode
from .harness import (POLICY_KINDS, DRL_KINDS, dump_config, emit, load_config,
                      run_policy, sweep, training_signature)


def _add_config_arg(parser):
    parser.add_argument("--config", required=True, help="INI experiment config")
    parser.add_argument("--print-config", action="store_true",
                        help="echo the resolved config (linear units) first")


def _load(args):
    cfg = load_config(args.config)
    if args.print_config:
        print(dump_config(cfg), end="")
    return cfg


def cmd_train(args):
    cfg = _load(args)
    episodes = args.episodes if args.episodes is not None else cfg.train_episodes
    if episodes <= 0:
        print("error: no training episodes configured (set --episodes or "
              "[experiment] train_episodes)", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    env = DataCollectionEnv(cfg.episode, cfg.radio)
    result = train(env, cfg.train, episodes, seed=seed)
    signature = training_signature("drl_bcd", cfg.episode, cfg.radio)
    save_checkpoint(args.checkpoint, result.nets,
                    meta={"episodes": episodes, "seed": seed,
                          "signature": list(signature)})
    if args.curve:
        save_learning_curve(args.curve, result, cfg.train)
    tail = moving_average(result.episode_returns,
                          min(50, len(result.episode_returns)))[-1]
    print(f"trained {episodes} episodes (seed {seed}); "
          f"final 50-episode average return {tail:.3f}")
    print(f"checkpoint written to {args.checkpoint}")
    return 0


def cmd_eval(args):
    cfg = _load(args)
    nets = None
    if args.policy in DRL_KINDS:
        if not args.checkpoint:
            print(f"error: policy {args.policy!r} needs --checkpoint",
                  file=sys.stderr)
            return 2
        nets, _ = load_checkpoint(args.checkpoint)
    record = run_policy(args.policy, cfg, nets=nets)
    print(f"{args.policy}: mean served {record.mean_served:.3f} "
          f"({record.mean_served_frac:.1%} of devices), "
          f"mean bits {record.mean_bits:.3f}, "
          f"mean energy {record.mean_energy:.1f} J, "
          f"efficiency {record.mean_efficiency:.6g} bits/J "
          f"over {record.sample_count} seeds x {cfg.eval_episodes} episodes")
    if args.out:
        emit([record], args.out)
        print(f"results written to {args.out}")
    return 0


def cmd_sweep(args):
    cfg = _load(args)
    records = sweep(cfg)
    for rec in records:
        value = "-" if rec.sweep_value is None else rec.sweep_value
        print(f"{rec.sweep_var}={value} {rec.policy}: "
              f"served {rec.mean_served:.3f}, bits {rec.mean_bits:.3f}, "
              f"efficiency {rec.mean_efficiency:.6g} bits/J "
              f"({rec.sample_count} seeds)")
    emit(records, args.out)
    print(f"results written to {args.out}")
    return 0


def cmd_replay(args):
    doc, actions = load_episode(args.episode)
    env, trajectory = replay_episode(doc, actions)
    for slot, (act, row) in enumerate(zip(actions, trajectory), start=1):
        x, y, _, _, reward = row
        sched = ",".join(str(i) for i in act.schedule) or "-"
        print(f"slot {slot:4d}  move {act.move:<8s} sched {sched:<12s} "
              f"uav ({x:7.2f},{y:7.2f})  reward {reward:g}")
    print(f"served {env.served_total()} of {len(env.state.devices)} devices, "
          f"{env.served_bits():g} bits delivered")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ris-uav",
        description="Simulator and experiment driver for UAV data collection "
                    "assisted by a reconfigurable reflecting surface.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the PPO agent")
    _add_config_arg(p)
    p.add_argument("--checkpoint", required=True, help="output .npz path")
    p.add_argument("--episodes", type=int, default=None,
                   help="override [experiment] train_episodes")
    p.add_argument("--seed", type=int, default=None,
                   help="training seed (default: first experiment seed)")
    p.add_argument("--curve", default=None, help="learning-curve CSV path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one policy")
    _add_config_arg(p)
    p.add_argument("--policy", required=True, choices=POLICY_KINDS)
    p.add_argument("--checkpoint", default=None,
                   help="trained agent (.npz), required for drl policies")
    p.add_argument("--out", default=None, help="optional results CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run the configured sweep")
    _add_config_arg(p)
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="re-run a recorded episode file")
    p.add_argument("episode", help="episode JSON written by the simulator")
    p.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
