"""TCP client for the environment's line-delimited JSON protocol.

This package talks to the simulator exclusively through this client (and
the simulator's CLI for launching servers); it never imports simulator
code.
"""

import json
import socket
import subprocess
import sys
import time

import numpy as np


class ProtocolError(RuntimeError):
    pass


class EnvClient:
    """Blocking request/response client with reconnect-and-backoff."""

    def __init__(self, host, port, timeout=60.0, retries=4, backoff=0.5):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._connect()

    def _connect(self):
        self.sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")

    def _request_once(self, msg):
        self.wfile.write(json.dumps(msg, separators=(",", ":")).encode() + b"\n")
        self.wfile.flush()
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("server closed the stream")
        return json.loads(line)

    def request(self, msg):
        """One request/response; reconnects with backoff on stream loss."""
        delay = self.backoff
        for attempt in range(self.retries + 1):
            try:
                return self._request_once(msg)
            except (ConnectionError, OSError):
                if attempt == self.retries:
                    raise
                time.sleep(delay)
                delay *= 2
                try:
                    self.sock.close()
                except OSError:
                    pass
                self._connect()

    def hello(self):
        reply = self.request({"cmd": "hello"})
        if not reply.get("ok"):
            raise ProtocolError(f"hello failed: {reply}")
        return reply["config"]

    def reset(self, seed):
        reply = self.request({"cmd": "reset", "seed": int(seed)})
        if not reply.get("ok"):
            raise ProtocolError(f"reset failed: {reply}")
        return (
            np.asarray(reply["obs"], dtype=np.float32),
            np.asarray(reply["vel"], dtype=np.float32),
        )

    def step(self, actions):
        actions = np.asarray(actions, dtype=np.float64)
        reply = self.request({"cmd": "step", "actions": actions.tolist()})
        if not reply.get("ok"):
            raise ProtocolError(f"step failed: {reply}")
        return (
            np.asarray(reply["obs"], dtype=np.float32),
            np.asarray(reply["vel"], dtype=np.float32),
            float(reply["reward"]),
            bool(reply["done"]),
            reply["info"],
        )

    def close(self):
        try:
            self._request_once({"cmd": "close"})
        except (OSError, ValueError, ConnectionError):
            pass
        self.sock.close()


class ServerProcess:
    """Launch `gpswarm serve` as a subprocess and wait for its banner."""

    def __init__(self, config_path=None, port=0, extra_args=()):
        cmd = [sys.executable, "-m", "gpswarm.cli", "serve", "--port", str(port)]
        if config_path is not None:
            cmd += ["--config", str(config_path)]
        cmd += list(extra_args)
        self.proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, text=True)
        banner = self.proc.stdout.readline()
        if "serving on" not in banner:
            self.proc.terminate()
            raise RuntimeError(f"unexpected server banner: {banner!r}")
        address = banner.strip().split()[-1]
        self.host, port_text = address.rsplit(":", 1)
        self.port = int(port_text)

    def stop(self):
        self.proc.terminate()
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()
