"""Multi-agent environment service speaking line-delimited JSON.

One request per line, exactly one reply per request.  The protocol has
three commands:

* ``{"cmd": "reset", "config": {...}, "seed": 0}`` →
  ``{"obs": [[...], ...]}`` — build a fresh episode from a scenario
  document (same schema as the config files; partial documents are
  completed with defaults) and return the first-round observations.
* ``{"cmd": "step", "actions": [0, 2, 1, ...]}`` →
  ``{"obs": [...], "reward": r, "done": b, "info": {...}}`` — apply one
  action per sensor (0 = offload to edge, 1 = compute locally,
  2 = idle), advance one full round, and return the next round-start
  observations.  Illegal requests are coerced to idle and reported in
  ``info.illegal``, never refused.
* ``{"cmd": "close"}`` → ``{"ok": true}`` — end the session.

Each agent's observation vector lists ``[battery, sink_age, sensor_age]``
for itself first and then every other sensor within observation range in
ascending id order, followed by its queued-work wait at the edge server.
Unknown ages (no update/sample yet) are ``null``.

Errors are structured — ``{"error": {"type": t, "message": m}}`` — and
never destroy a live episode: after an invalid request the session can
continue stepping where it left off.
"""

from __future__ import annotations

import io
import json
import socketserver
import sys
from typing import Any, Dict, Optional, Tuple

from .config import ConfigError, parse_scenario
from .policies import Action, PolicySpec
from .simulator import EpisodeEngine

__all__ = ["EnvSession", "serve_stdio", "serve_tcp"]


def _error(kind: str, message: str) -> Dict[str, Any]:
    return {"error": {"type": kind, "message": message}}


class EnvSession:
    """One environment conversation: holds at most one live episode."""

    def __init__(self) -> None:
        self.engine: Optional[EpisodeEngine] = None

    # -- command handlers ---------------------------------------------------

    def handle(self, request: Any) -> Tuple[Dict[str, Any], bool]:
        """Process one decoded request; returns (reply, should_close)."""
        if not isinstance(request, dict):
            return _error("bad-request", "request must be a JSON object"), False
        cmd = request.get("cmd")
        if cmd == "reset":
            return self._reset(request), False
        if cmd == "step":
            return self._step(request), False
        if cmd == "close":
            self.engine = None
            return {"ok": True}, True
        return (
            _error("bad-request", f"unknown cmd {cmd!r}; expected reset/step/close"),
            False,
        )

    def handle_line(self, line: str) -> Tuple[Dict[str, Any], bool]:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error("bad-request", f"invalid JSON: {exc.msg}"), False
        return self.handle(request)

    def _reset(self, request: Dict[str, Any]) -> Dict[str, Any]:
        seed = request.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            return _error("bad-config", "seed must be a non-negative integer")
        config_doc = request.get("config", {})
        try:
            scenario = parse_scenario(config_doc)
        except (ConfigError, ValueError) as exc:
            return _error("bad-config", str(exc))
        engine = EpisodeEngine(scenario, PolicySpec.external(), seed=seed)
        self.engine = engine
        return {"obs": engine.observation_vectors()}

    def _step(self, request: Dict[str, Any]) -> Dict[str, Any]:
        engine = self.engine
        if engine is None:
            return _error("no-episode", "reset before stepping")
        if engine.done:
            return _error("episode-complete", "episode is over; reset to continue")
        actions = request.get("actions")
        if not isinstance(actions, list):
            return _error("bad-actions", "actions must be a list of integers")
        if len(actions) != len(engine.sensors):
            return _error(
                "bad-actions",
                f"expected {len(engine.sensors)} actions, got {len(actions)}",
            )
        decoded = []
        for a in actions:
            if isinstance(a, bool) or not isinstance(a, int):
                return _error("bad-actions", f"action {a!r} is not an integer")
            try:
                decoded.append(Action(a))
            except ValueError:
                return _error(
                    "bad-actions",
                    f"action {a} out of range; use 0=edge, 1=local, 2=idle",
                )
        info = engine.run_round(decoded)
        return {
            "obs": engine.observation_vectors(),
            "reward": info["reward"],
            "done": engine.done,
            "info": {
                "round": info["round"],
                "illegal": info["illegal"],
                "updates": info["updates"],
                "coverage_mean": info["coverage_mean"],
            },
        }


def _serve_stream(reader: io.TextIOBase, writer: io.TextIOBase) -> None:
    session = EnvSession()
    for line in reader:
        if not line.strip():
            continue
        try:
            reply, should_close = session.handle_line(line)
        except Exception as exc:  # keep the loop alive on engine faults
            reply, should_close = _error("internal", str(exc)), False
        writer.write(json.dumps(reply, allow_nan=False) + "\n")
        writer.flush()
        if should_close:
            break


def serve_stdio(
    reader: Optional[io.TextIOBase] = None,
    writer: Optional[io.TextIOBase] = None,
) -> None:
    """Serve one session over stdin/stdout until close or EOF."""
    _serve_stream(reader or sys.stdin, writer or sys.stdout)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:  # one session per connection
        reader = io.TextIOWrapper(self.rfile, encoding="utf-8")
        writer = io.TextIOWrapper(self.wfile, encoding="utf-8", write_through=True)
        _serve_stream(reader, writer)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def serve_tcp(host: str = "127.0.0.1", port: int = 0) -> _Server:
    """Bind a threaded TCP server (one session per connection).

    Returns the bound server; the caller drives ``serve_forever`` so
    tests can run it in a thread and shut it down cleanly.  A ``port``
    of 0 picks a free port (see ``server.server_address``).
    """
    return _Server((host, port), _Handler)
