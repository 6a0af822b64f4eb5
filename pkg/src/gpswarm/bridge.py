"""Line-delimited JSON protocol exposing the environment over TCP.

One request line yields exactly one response line. Floats ride as JSON
decimals (shortest round-trip representation, well past 9 significant
digits), so identical episodes serialize to identical bytes. A malformed
or out-of-order request answers {"ok": false, "err": code} and the
session stays open; only stream loss or "close" ends it.

Error codes: parse, cmd, seed, order, arity, value, done.
"""

import json
import logging
import socket

from .env import SwarmEnv, basis_for

log = logging.getLogger("gpswarm.bridge")

DEFAULT_PORT = 7355
PROTOCOL_VERSION = 1

_COMMANDS = ("hello", "reset", "step", "close")


def encode_message(msg):
    """One wire record: compact JSON plus the line terminator."""
    return (json.dumps(msg, separators=(",", ":"), check_circular=False) + "\n").encode()


def decode_message(line):
    """Parse one wire record; raises ValueError on malformed input."""
    if isinstance(line, bytes):
        line = line.decode()
    msg = json.loads(line)
    if not isinstance(msg, dict):
        raise ValueError("wire record must be an object")
    return msg


def config_echo(config):
    return {
        "n_agents": config.n_agents,
        "n_targets": config.n_targets,
        "n_obstacles": config.n_obstacles,
        "h": config.raster_size,
        "w": config.raster_size,
        "episode_len": config.episode_len,
        "a_max": config.a_max,
    }


def _step_payload(result):
    return {
        "ok": True,
        "obs": [o.image.tolist() for o in result.observations],
        "vel": [o.velocity.tolist() for o in result.observations],
        "reward": result.reward,
        "done": result.done,
        "info": {
            "aa": bool(result.info["aa_collision"]),
            "ao": bool(result.info["ao_collision"]),
            "dist": result.info["distances"].tolist(),
        },
    }


def _handle(env, msg):
    """(response dict, keep_going flag) for one already-parsed request."""
    cmd = msg.get("cmd")
    if cmd not in _COMMANDS:
        return {"ok": False, "err": "cmd"}, True

    if cmd == "hello":
        return {"ok": True, "v": PROTOCOL_VERSION, "config": config_echo(env.config)}, True

    if cmd == "close":
        return {"ok": True}, False

    if cmd == "reset":
        seed = msg.get("seed")
        if not isinstance(seed, int):
            return {"ok": False, "err": "seed"}, True
        observations = env.reset(seed)
        return {
            "ok": True,
            "obs": [o.image.tolist() for o in observations],
            "vel": [o.velocity.tolist() for o in observations],
        }, True

    # step
    if env.world is None:
        return {"ok": False, "err": "order"}, True
    if env.done:
        return {"ok": False, "err": "done"}, True
    actions = msg.get("actions")
    n = env.config.n_agents
    if (
        not isinstance(actions, list)
        or len(actions) != n
        or any(not isinstance(a, list) or len(a) != 2 for a in actions)
    ):
        return {"ok": False, "err": "arity"}, True
    try:
        flat = [float(v) for a in actions for v in a]
    except (TypeError, ValueError):
        return {"ok": False, "err": "value"}, True
    if any(v != v or v in (float("inf"), float("-inf")) for v in flat):
        return {"ok": False, "err": "value"}, True
    return _step_payload(env.step(actions)), True


def serve_session(rfile, wfile, env):
    """Process one client's requests in order until close or stream end."""
    log.info("session start")
    while True:
        line = rfile.readline()
        if not line:
            log.info("session end (stream closed)")
            return
        if not line.strip():
            continue
        try:
            msg = decode_message(line)
        except ValueError:
            wfile.write(encode_message({"ok": False, "err": "parse"}))
            wfile.flush()
            continue
        response, keep_going = _handle(env, msg)
        wfile.write(encode_message(response))
        wfile.flush()
        if not keep_going:
            log.info("session end (close)")
            return


class EnvServer:
    """One environment served to one client at a time over TCP."""

    def __init__(self, config, host="127.0.0.1", port=DEFAULT_PORT):
        self.config = config
        self.basis = basis_for(config)
        self.sock = socket.create_server((host, port))
        self.host, self.port = self.sock.getsockname()[:2]

    def serve(self, max_sessions=None):
        served = 0
        try:
            while max_sessions is None or served < max_sessions:
                conn, addr = self.sock.accept()
                log.info("client %s connected", addr)
                env = SwarmEnv(self.config, basis=self.basis)
                with conn:
                    rfile = conn.makefile("rb")
                    wfile = conn.makefile("wb")
                    try:
                        serve_session(rfile, wfile, env)
                    except (BrokenPipeError, ConnectionResetError):
                        log.info("session dropped")
                served += 1
        finally:
            self.sock.close()

    def close(self):
        self.sock.close()


class BridgeClient:
    """Minimal line-protocol client used by the test suite and tools."""

    def __init__(self, host="127.0.0.1", port=DEFAULT_PORT, timeout=30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")

    def request_raw(self, payload_bytes):
        """Send raw bytes (plus newline if missing) and return the raw reply."""
        if not payload_bytes.endswith(b"\n"):
            payload_bytes += b"\n"
        self.wfile.write(payload_bytes)
        self.wfile.flush()
        return self.rfile.readline()

    def request(self, msg):
        return decode_message(self.request_raw(encode_message(msg)[:-1]))

    def hello(self):
        return self.request({"cmd": "hello"})

    def reset(self, seed):
        return self.request({"cmd": "reset", "seed": seed})

    def step(self, actions):
        return self.request({"cmd": "step", "actions": actions})

    def close(self):
        try:
            self.request({"cmd": "close"})
        except (OSError, ValueError):
            pass
        self.sock.close()
