"""Training loop against a live environment server, with periodic greedy
evaluation, a learning-curve CSV, and checkpointing.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import torch

from .buffer import ReplayBuffer
from .client import EnvClient, ServerProcess
from .maddpg import MaddpgLearner, TrainConfig, save_checkpoint

EVAL_SEED_BASE = 9_000_000


def random_disk_actions(rng, n_agents, a_max):
    radius = a_max * np.sqrt(rng.uniform(size=n_agents))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n_agents)
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)


def run_greedy_episodes(client, policy_fn, episodes, seed_base):
    """Mean step reward over full episodes under a deterministic policy."""
    rewards = []
    for ep in range(episodes):
        obs, vel = client.reset(EVAL_SEED_BASE + seed_base + ep)
        done = False
        while not done:
            obs, vel, reward, done, _ = client.step(policy_fn(obs, vel))
            rewards.append(reward)
    return float(np.mean(rewards))


def random_baseline(client, episodes, seed_base, n_agents, a_max, seed=0):
    rng = np.random.default_rng(seed)
    return run_greedy_episodes(
        client, lambda obs, vel: random_disk_actions(rng, n_agents, a_max), episodes, seed_base
    )


def train_loop(client, config, out_dir, device="cpu", log=print, on_eval=None):
    """Interact, learn, evaluate, checkpoint; returns the learner.

    Evaluation runs on the same session between training episodes (the
    server serializes sessions, so a second concurrent one would block).
    `on_eval(step, eval_r_avg)` may return True to stop training early.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env_cfg = client.hello()
    n_agents = env_cfg["n_agents"]
    a_max = env_cfg["a_max"]

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    learner = MaddpgLearner(n_agents, a_max, config, device=device)
    buffer = ReplayBuffer(
        config.buffer_capacity, n_agents, env_cfg["h"], env_cfg["w"], seed=config.seed
    )

    curve_path = out_dir / "learning_curve.csv"
    curve = open(curve_path, "w", newline="")
    writer = csv.writer(curve)
    writer.writerow(["step", "eval_r_avg", "critic_loss", "actor_objective"])

    episode_idx = 0
    obs, vel = client.reset(config.seed)
    last_loss, last_obj = float("nan"), float("nan")
    next_eval = config.eval_every
    reward_window = []

    for step in range(1, config.total_steps + 1):
        if step <= config.warmup_steps:
            actions = random_disk_actions(rng, n_agents, a_max)
        else:
            actions = learner.act(obs, vel)
            noise = learner.noise_std(step)
            if noise > 0:
                actions = actions + rng.normal(0.0, noise, size=actions.shape)
        next_obs, next_vel, reward, done, _ = client.step(actions)
        buffer.add(obs, vel, actions, reward, next_obs, next_vel, done)
        reward_window.append(reward)
        obs, vel = next_obs, next_vel

        if (
            step > config.warmup_steps
            and step % config.update_every == 0
            and len(buffer) >= config.batch_size
        ):
            last_loss, last_obj = learner.update(buffer.sample(config.batch_size))
            if not np.isfinite(last_loss) or not np.isfinite(last_obj):
                raise RuntimeError(f"non-finite update at step {step}")

        if done:
            episode_idx += 1
            if step >= next_eval or step == config.total_steps:
                eval_r = run_greedy_episodes(
                    client,
                    lambda o, v: learner.act(o, v),
                    config.eval_episodes,
                    seed_base=0,
                )
                writer.writerow([step, repr(eval_r), repr(last_loss), repr(last_obj)])
                curve.flush()
                log(
                    f"step {step}: eval_r_avg={eval_r:.4f} critic_loss={last_loss:.5f} "
                    f"train_window={np.mean(reward_window):.4f}"
                )
                reward_window = []
                next_eval += config.eval_every
                save_checkpoint(out_dir / "checkpoint.pt", learner, env_cfg, config)
                if on_eval is not None and on_eval(step, eval_r):
                    break
            obs, vel = client.reset(config.seed + episode_idx)

    save_checkpoint(out_dir / "checkpoint.pt", learner, env_cfg, config)
    curve.close()
    return learner


def build_parser():
    parser = argparse.ArgumentParser(prog="swarm-marl-train", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7355)
    parser.add_argument(
        "--launch-server",
        nargs="?",
        const="",
        default=None,
        metavar="CONFIG",
        help="spawn a gpswarm server (optionally from a config file) instead of connecting",
    )
    parser.add_argument("--out", default="train-out")
    parser.add_argument("--steps", type=int, default=TrainConfig.total_steps)
    parser.add_argument("--batch", type=int, default=TrainConfig.batch_size)
    parser.add_argument("--lr", type=float, default=TrainConfig.lr)
    parser.add_argument("--gamma", type=float, default=TrainConfig.gamma)
    parser.add_argument("--tau", type=float, default=TrainConfig.tau)
    parser.add_argument("--update-every", type=int, default=TrainConfig.update_every)
    parser.add_argument("--eval-every", type=int, default=TrainConfig.eval_every)
    parser.add_argument("--eval-episodes", type=int, default=TrainConfig.eval_episodes)
    parser.add_argument("--buffer", type=int, default=TrainConfig.buffer_capacity)
    parser.add_argument("--noise", type=float, default=TrainConfig.noise_scale)
    parser.add_argument("--noise-decay", type=int, default=TrainConfig.noise_decay_steps)
    parser.add_argument("--warmup", type=int, default=TrainConfig.warmup_steps)
    parser.add_argument("--actor-reg", type=float, default=TrainConfig.actor_reg)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    config = TrainConfig(
        gamma=args.gamma,
        batch_size=args.batch,
        lr=args.lr,
        update_every=args.update_every,
        tau=args.tau,
        noise_scale=args.noise,
        noise_decay_steps=args.noise_decay,
        buffer_capacity=args.buffer,
        total_steps=args.steps,
        eval_every=args.eval_every,
        eval_episodes=args.eval_episodes,
        seed=args.seed,
        warmup_steps=args.warmup,
        actor_reg=args.actor_reg,
    )
    server = None
    try:
        if args.launch_server is not None:
            server = ServerProcess(config_path=args.launch_server or None, port=0)
            host, port = server.host, server.port
        else:
            host, port = args.host, args.port
        client = EnvClient(host, port)
        train_loop(client, config, args.out)
        client.close()
    finally:
        if server is not None:
            server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
