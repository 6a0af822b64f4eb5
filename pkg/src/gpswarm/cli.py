"""Command-line entry point.

Subcommands:
  consensus-demo  64-sensor one-shot-measurement map-building demo
  episode         run seeded episodes under a built-in policy, write metrics
  serve           expose the environment to remote trainers over TCP

Exit codes: 0 success, 2 bad usage, 3 runtime failure.
"""

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from .artifacts import write_metrics_csv, write_pgm, write_trace_csv, trace_row
from .bridge import DEFAULT_PORT, EnvServer
from .config import load_config
from .consensus import (
    GpState,
    build_graph,
    consensus_round,
    dist_mean_features,
    dist_var_features,
    fuse_measurement,
)
from .env import EnvConfig, Metrics, SwarmEnv, basis_for, run_episode, signal_field
from .errors import GpswarmError
from .gp import Dataset, central_e_dim_estimate_many, central_e_dim_variance_many
from .policies import HeuristicConfig, HeuristicPolicy, RandomPolicy

_SCENARIO_RE = re.compile(r"^A(\d+)T(\d+)O(\d+)$")

DEMO_SENSOR_SIDE = 8
DEMO_N_TARGETS = 3
DEMO_D_COMM = 0.75


def _load_configs(path):
    if path is None:
        return EnvConfig(), HeuristicConfig()
    return load_config(path)


def _derive_seed(*parts):
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_consensus_demo(args):
    cfg, _ = _load_configs(args.config)
    out = _out_dir(args)
    basis = basis_for(cfg)
    ws = cfg.workspace
    rng = np.random.default_rng(args.seed)

    sensors = ws.cell_centers(DEMO_SENSOR_SIDE)
    n_sensors = sensors.shape[0]
    targets = rng.uniform((ws.xmin, ws.ymin), (ws.xmax, ws.ymax), size=(DEMO_N_TARGETS, 2))
    amps = np.full(DEMO_N_TARGETS, cfg.target_amplitude)

    readings = np.array(
        [
            signal_field(targets, amps, sensors[i], cfg.intensity_scale)
            + cfg.noise_std * rng.standard_normal()
            for i in range(n_sensors)
        ]
    )
    states = [GpState.zero(basis.n_modes, i) for i in range(n_sensors)]
    states = [
        fuse_measurement(states[i], basis, sensors[i], readings[i]) for i in range(n_sensors)
    ]
    graph = build_graph(sensors, args.d_comm)
    print(
        f"demo: {n_sensors} sensors, {len(graph.edges)} links, "
        f"connected={graph.is_connected()}, rounds={args.rounds}"
    )

    map_grid = ws.cell_centers(args.map_res)
    map_feats = basis.features(map_grid)

    def sensor_maps(state):
        mean = dist_mean_features(state, basis, n_sensors, map_feats)
        std = np.sqrt(dist_var_features(state, basis, n_sensors, map_feats))
        return mean, std

    def state_disagreement(states):
        alphas = np.stack([s.alpha for s in states])
        betas = np.stack([s.beta for s in states])
        return max(
            float((alphas.max(axis=0) - alphas.min(axis=0)).max()),
            float((betas.max(axis=0) - betas.min(axis=0)).max()),
        )

    def map_disagreement(states):
        maps = np.stack([dist_mean_features(s, basis, n_sensors, map_feats) for s in states])
        return float((maps.max(axis=0) - maps.min(axis=0)).max())

    res = args.map_res
    rows = []
    for rnd in range(args.rounds + 1):
        row = {"round": rnd, "state_disagreement": state_disagreement(states)}
        if rnd % args.map_every == 0 or rnd == args.rounds:
            row["map_disagreement"] = map_disagreement(states)
        if rnd % args.pgm_every == 0 or rnd == args.rounds:
            mean, std = sensor_maps(states[0])
            write_pgm(out / f"sensor0_mean_round{rnd:03d}.pgm", mean.reshape(res, res))
            write_pgm(out / f"sensor0_std_round{rnd:03d}.pgm", std.reshape(res, res))
        rows.append(row)
        if rnd < args.rounds:
            states = consensus_round(states, graph)

    pooled = Dataset(sensors, readings, n_sensors, 1)
    central_mean = central_e_dim_estimate_many(basis, pooled, map_grid)
    central_std = np.sqrt(central_e_dim_variance_many(basis, pooled, map_grid))
    write_pgm(out / "central_mean.pgm", central_mean.reshape(res, res))
    write_pgm(out / "central_std.pgm", central_std.reshape(res, res))
    truth = np.array(
        [signal_field(targets, amps, p, cfg.intensity_scale) for p in map_grid]
    )
    write_pgm(out / "truth.pgm", truth.reshape(res, res))

    final_mean, _ = sensor_maps(states[0])
    vs_central = float(np.abs(final_mean - central_mean).max())

    with open(out / "disagreement.csv", "w") as fh:
        fh.write("round,state_disagreement,map_disagreement\n")
        for row in rows:
            md = row.get("map_disagreement")
            fh.write(
                f"{row['round']},{row['state_disagreement']!r},"
                f"{'' if md is None else repr(md)}\n"
            )
    summary = {
        "rounds": args.rounds,
        "connected": graph.is_connected(),
        "initial_state_disagreement": rows[0]["state_disagreement"],
        "final_state_disagreement": rows[-1]["state_disagreement"],
        "initial_map_disagreement": rows[0]["map_disagreement"],
        "final_map_disagreement": rows[-1]["map_disagreement"],
        "final_vs_central_max_abs": vs_central,
    }
    with open(out / "summary.txt", "w") as fh:
        for key, val in summary.items():
            fh.write(f"{key} = {val!r}\n")
    for key, val in summary.items():
        print(f"{key} = {val!r}")
    return 0


def _parse_scenarios(text):
    scenarios = []
    for token in text.split(","):
        token = token.strip()
        match = _SCENARIO_RE.match(token)
        if not match:
            raise GpswarmError(f"bad scenario {token!r}, expected like A3T3O2")
        scenarios.append((token, tuple(int(g) for g in match.groups())))
    return scenarios


def _make_policy(name, cfg, heur_cfg, seed):
    if name == "random":
        return RandomPolicy(seed, a_max=cfg.a_max)
    if name == "heuristic":
        return HeuristicPolicy(cfg, heur_cfg)
    raise GpswarmError(f"unknown policy {name!r}")


def cmd_episode(args):
    base_cfg, heur_cfg = _load_configs(args.config)
    out = _out_dir(args)
    if args.scenarios:
        scenarios = _parse_scenarios(args.scenarios)
    else:
        scenarios = [
            (
                f"A{base_cfg.n_agents}T{base_cfg.n_targets}O{base_cfg.n_obstacles}",
                (base_cfg.n_agents, base_cfg.n_targets, base_cfg.n_obstacles),
            )
        ]
    table = []
    for si, (name, (a, t, o)) in enumerate(scenarios):
        cfg = base_cfg.scenario(n_agents=a, n_targets=t, n_obstacles=o)
        env = SwarmEnv(cfg)
        per_episode = []
        for ep in range(args.episodes):
            ep_seed = _derive_seed(args.seed, si, ep)
            policy = _make_policy(args.policy, cfg, heur_cfg, ep_seed)
            metrics, trace = run_episode(env, policy, ep_seed)
            per_episode.append(metrics)
            if args.trace:
                rows = [trace_row(k, r, env.world) for k, r in enumerate(trace, start=1)]
                write_trace_csv(
                    out / f"trace_{name}_ep{ep:03d}.csv", rows, cfg.n_agents, cfg.n_targets
                )
        agg = episode_metrics_mean(per_episode)
        table.append((name, args.episodes, agg))
        print(
            f"{name}: r_avg={agg.r_avg:.4f} d_final={agg.d_final:.4f} "
            f"cr_aa={agg.cr_aa:.4f} cr_ao={agg.cr_ao:.4f}  ({args.episodes} episodes)"
        )
    write_metrics_csv(out / "metrics.csv", table)
    return 0


def episode_metrics_mean(metrics_list):
    return Metrics(
        r_avg=float(np.mean([m.r_avg for m in metrics_list])),
        d_final=float(np.mean([m.d_final for m in metrics_list])),
        cr_aa=float(np.mean([m.cr_aa for m in metrics_list])),
        cr_ao=float(np.mean([m.cr_ao for m in metrics_list])),
    )


def cmd_serve(args):
    cfg, _ = _load_configs(args.config)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    server = EnvServer(cfg, host=args.host, port=args.port)
    print(f"serving on {server.host}:{server.port}", flush=True)
    try:
        server.serve(max_sessions=args.max_sessions)
    except KeyboardInterrupt:
        print("interrupted")
    finally:
        server.close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gpswarm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("consensus-demo", help="64-sensor consensus map-building demo")
    demo.add_argument("--config", default=None)
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--out", default="gpswarm-out")
    demo.add_argument("--rounds", type=int, default=200)
    demo.add_argument("--d-comm", type=float, default=DEMO_D_COMM)
    demo.add_argument("--map-res", type=int, default=33)
    demo.add_argument("--map-every", type=int, default=10)
    demo.add_argument("--pgm-every", type=int, default=1)
    demo.set_defaults(func=cmd_consensus_demo)

    epi = sub.add_parser("episode", help="run seeded episodes and write metrics")
    epi.add_argument("--config", default=None)
    epi.add_argument("--seed", type=int, default=0)
    epi.add_argument("--out", default="gpswarm-out")
    epi.add_argument("--policy", choices=("random", "heuristic"), default="random")
    epi.add_argument("--episodes", type=int, default=10)
    epi.add_argument("--scenarios", default=None, help="comma list like A3T3O2,A1T1O2")
    epi.add_argument("--trace", action="store_true", help="also write per-episode traces")
    epi.set_defaults(func=cmd_episode)

    srv = sub.add_parser("serve", help="serve the environment over TCP")
    srv.add_argument("--config", default=None)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=DEFAULT_PORT)
    srv.add_argument("--max-sessions", type=int, default=None)
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GpswarmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
