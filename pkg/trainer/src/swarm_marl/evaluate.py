"""Zero-shot transfer evaluation: run a trained shared actor across
scenarios with different entity counts and tabulate the episode metrics.

The same actor weights drive every agent slot regardless of the agent
count, so no surgery is needed when the scenario changes; each scenario
gets its own freshly launched server.
"""

import argparse
import csv
import re
import sys
from pathlib import Path

import numpy as np

from .client import EnvClient, ServerProcess
from .maddpg import load_actor

_SCENARIO_RE = re.compile(r"^A(\d+)T(\d+)O(\d+)$")

METRIC_COLUMNS = ["scenario", "episodes", "r_avg", "d_final", "cr_aa", "cr_ao"]


def parse_scenarios(text):
    out = []
    for token in text.split(","):
        token = token.strip()
        m = _SCENARIO_RE.match(token)
        if not m:
            raise ValueError(f"bad scenario {token!r}, expected like A3T3O2")
        out.append((token, tuple(int(g) for g in m.groups())))
    return out


def scenario_config_text(base_text, n_agents, n_targets, n_obstacles, episode_len=None):
    """Flat key-value config: base file text plus scenario overrides.

    Later lines override earlier ones in the simulator's config format.
    """
    lines = [base_text.rstrip()] if base_text else []
    lines += [
        f"n_agents = {n_agents}",
        f"n_targets = {n_targets}",
        f"n_obstacles = {n_obstacles}",
    ]
    if episode_len is not None:
        lines.append(f"episode_len = {episode_len}")
    return "\n".join(lines) + "\n"


def run_actor_episodes(client, actor, episodes, seed):
    """Episode metrics under the greedy actor: (r_avg, d_final, cr_aa, cr_ao)."""
    import torch

    rewards, finals, aa_flags, ao_flags = [], [], [], []
    for ep in range(episodes):
        obs, vel = client.reset(seed + ep)
        done = False
        while not done:
            with torch.no_grad():
                actions = actor(torch.as_tensor(obs), torch.as_tensor(vel)).numpy()
            obs, vel, reward, done, info = client.step(actions)
            rewards.append(reward)
            aa_flags.append(info["aa"])
            ao_flags.append(info["ao"])
        finals.append(float(np.mean(info["dist"])))
    return (
        float(np.mean(rewards)),
        float(np.mean(finals)),
        float(np.mean(aa_flags)),
        float(np.mean(ao_flags)),
    )


def evaluate_transfer(
    checkpoint,
    scenarios,
    out_dir,
    episodes=10,
    seed=0,
    base_config=None,
    episode_len=None,
):
    """Run every scenario against its own server; write and return the table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_text = Path(base_config).read_text() if base_config else ""
    rows = []
    actor = None
    for name, (a, t, o) in scenarios:
        cfg_path = out_dir / f"scenario_{name}.cfg"
        cfg_path.write_text(scenario_config_text(base_text, a, t, o, episode_len))
        with ServerProcess(config_path=cfg_path, port=0) as server:
            client = EnvClient(server.host, server.port)
            env_cfg = client.hello()
            if actor is None:
                actor = load_actor(checkpoint, expect_h=env_cfg["h"], expect_w=env_cfg["w"])
            r_avg, d_final, cr_aa, cr_ao = run_actor_episodes(client, actor, episodes, seed)
            rows.append([name, episodes, r_avg, d_final, cr_aa, cr_ao])
            client.close()
    table_path = out_dir / "transfer_metrics.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow([row[0], row[1]] + [repr(v) for v in row[2:]])
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(prog="swarm-marl-eval", description=__doc__)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument(
        "--scenarios", default="A2T2O2,A3T3O2,A4T4O2,A3T3O1,A3T3O3"
    )
    parser.add_argument("--episodes", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="eval-out")
    parser.add_argument("--config", default=None, help="base simulator config file")
    parser.add_argument("--episode-len", type=int, default=None)
    args = parser.parse_args(argv)

    rows = evaluate_transfer(
        args.checkpoint,
        parse_scenarios(args.scenarios),
        args.out,
        episodes=args.episodes,
        seed=args.seed,
        base_config=args.config,
        episode_len=args.episode_len,
    )
    for name, episodes, r_avg, d_final, cr_aa, cr_ao in rows:
        print(
            f"{name}: r_avg={r_avg:.4f} d_final={d_final:.4f} "
            f"cr_aa={cr_aa:.4f} cr_ao={cr_ao:.4f} ({episodes} episodes)"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
