"""File artifacts: PGM heatmaps with scaling sidecars, episode CSV traces,
and metric tables.

PGM keeps image output dependency-free; each image gets a .txt sidecar
recording the linear min/max used for the 8-bit quantization, so values
can be recovered approximately.
"""

import csv

import numpy as np


def write_pgm(path, values, flip_rows=True):
    """8-bit binary PGM, linearly scaled; sidecar stores the data range.

    Rows of `values` follow the world convention (row 0 at ymin); PGM rows
    display top-down, so by default the image is flipped for viewing.
    """
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((arr - lo) / span * 255.0).astype(np.uint8)
    if flip_rows:
        scaled = scaled[::-1]
    h, w = scaled.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())
    with open(str(path) + ".txt", "w") as fh:
        fh.write(f"min {lo!r}\nmax {hi!r}\nrow0 {'ymax' if flip_rows else 'ymin'}\n")


def read_pgm(path):
    """Inverse of write_pgm using the sidecar range (modulo quantization)."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        fh.readline()  # maxval
        raw = np.frombuffer(fh.read(w * h), dtype=np.uint8).reshape(h, w)
    lo = hi = None
    flip = False
    with open(str(path) + ".txt") as fh:
        for line in fh:
            key, _, val = line.partition(" ")
            if key == "min":
                lo = float(val)
            elif key == "max":
                hi = float(val)
            elif key == "row0":
                flip = val.strip() == "ymax"
    arr = raw.astype(np.float64) / 255.0 * (hi - lo) + lo
    return arr[::-1] if flip else arr


def trace_columns(n_agents, n_targets):
    cols = ["k", "reward", "aa_collision", "ao_collision"]
    for i in range(n_agents):
        cols += [f"x{i}", f"y{i}", f"vx{i}", f"vy{i}"]
    cols += [f"d{m}" for m in range(n_targets)]
    return cols


def write_trace_csv(path, rows, n_agents, n_targets):
    """One row per step: k, reward, flags, agent kinematics, target distances."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_columns(n_agents, n_targets))
        writer.writerows(rows)


def trace_row(step_idx, result, world):
    row = [
        step_idx,
        repr(result.reward),
        int(result.info["aa_collision"]),
        int(result.info["ao_collision"]),
    ]
    for i in range(world.agent_pos.shape[0]):
        row += [
            repr(float(world.agent_pos[i, 0])),
            repr(float(world.agent_pos[i, 1])),
            repr(float(world.agent_vel[i, 0])),
            repr(float(world.agent_vel[i, 1])),
        ]
    row += [repr(float(d)) for d in result.info["distances"]]
    return row


METRIC_COLUMNS = ["scenario", "episodes", "r_avg", "d_final", "cr_aa", "cr_ao"]


def write_metrics_csv(path, rows):
    """One row per scenario configuration with the four summary metrics."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for scenario, n_episodes, metrics in rows:
            writer.writerow(
                [
                    scenario,
                    n_episodes,
                    repr(metrics.r_avg),
                    repr(metrics.d_final),
                    repr(metrics.cr_aa),
                    repr(metrics.cr_ao),
                ]
            )
