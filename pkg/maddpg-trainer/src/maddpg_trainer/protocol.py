"""Client for the newline-delimited JSON environment protocol.

The client owns exactly one protocol session: either a spawned environment
server subprocess (stdio transport) or a TCP connection.  Requests are
strictly sequential; every request line yields exactly one reply line.
"""

from __future__ import annotations

import json
import socket
import subprocess
from typing import Any, Dict, List, Optional, Sequence, Tuple


class EnvProtocolError(RuntimeError):
    """Structured error reply from the environment."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message


class EnvDiedError(RuntimeError):
    """The environment endpoint closed while a reply was pending."""


class EnvClient:
    """One protocol session against an environment endpoint."""

    def __init__(self, reader, writer, proc: Optional[subprocess.Popen] = None,
                 sock: Optional[socket.socket] = None):
        self._reader = reader
        self._writer = writer
        self._proc = proc
        self._sock = sock

    # -- constructors -----------------------------------------------------

    @classmethod
    def spawn(cls, command: Sequence[str] = ("freshcov", "serve-env")) -> "EnvClient":
        """Start an environment server subprocess and attach over stdio."""
        proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        return cls(proc.stdout, proc.stdin, proc=proc)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 30.0) -> "EnvClient":
        """Attach to a TCP environment endpoint."""
        sock = socket.create_connection((host, port), timeout=timeout)
        reader = sock.makefile("r", encoding="utf-8", newline="\n")
        writer = sock.makefile("w", encoding="utf-8", newline="\n")
        return cls(reader, writer, sock=sock)

    # -- protocol ----------------------------------------------------------

    def request(self, doc: Dict[str, Any]) -> Dict[str, Any]:
        try:
            self._writer.write(json.dumps(doc) + "\n")
            self._writer.flush()
            line = self._reader.readline()
        except (OSError, ValueError) as exc:
            raise EnvDiedError(f"environment endpoint closed: {exc}") from exc
        if not line:
            raise EnvDiedError("environment closed the stream mid-session")
        reply = json.loads(line)
        if isinstance(reply, dict) and "error" in reply:
            err = reply["error"]
            raise EnvProtocolError(err.get("type", "unknown"), err.get("message", ""))
        return reply

    def reset(self, config: Dict[str, Any], seed: int) -> List[List[Optional[float]]]:
        reply = self.request({"cmd": "reset", "config": config, "seed": seed})
        return reply["obs"]

    def step(
        self, actions: Sequence[int]
    ) -> Tuple[List[List[Optional[float]]], float, bool, Dict[str, Any]]:
        reply = self.request({"cmd": "step", "actions": [int(a) for a in actions]})
        return reply["obs"], float(reply["reward"]), bool(reply["done"]), reply["info"]

    def close(self) -> None:
        try:
            self._writer.write(json.dumps({"cmd": "close"}) + "\n")
            self._writer.flush()
            self._reader.readline()
        except (OSError, ValueError):
            pass
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait(timeout=10)

    def __enter__(self) -> "EnvClient":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()
