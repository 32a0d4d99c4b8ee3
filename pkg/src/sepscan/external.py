"""Line-protocol adapter for external evaluator processes.

The child process reads one line per point (space-separated decimal floats,
shortest round-trip form) and must answer with exactly one decimal float per
line, in order. A batch is written and flushed as a whole; replies are then
read back, so any language with buffered stdio can implement the other side
with a read-print loop.

The child is started lazily on first use and kept alive across batches. The
pipe pair is a serialized resource: one in-flight batch at a time.
"""

from __future__ import annotations

import os
import selectors
import shlex
import subprocess
import threading
import time

import numpy as np

from .errors import EvaluationError
from .functions import BlackBoxFunction


class ExternalFunction(BlackBoxFunction):
    """Black-box function evaluated by a subprocess speaking the line protocol."""

    def __init__(self, command: str, dimension: int, domain=None, timeout: float = 60.0):
        super().__init__(dimension, f"exec:{command}", domain=domain)
        self.command = command
        self.timeout = timeout
        self._proc = None
        self._buffer = b""
        self._io_lock = threading.Lock()

    # -- process management --------------------------------------------------

    def _start(self):
        argv = shlex.split(self.command)
        if not argv:
            raise EvaluationError("empty evaluator command")
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                bufsize=0,
            )
        except OSError as exc:
            raise EvaluationError(f"cannot launch evaluator {self.command!r}: {exc}") from exc
        self._buffer = b""

    def close(self):
        """Terminate the child process, if any."""
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _fail(self, message: str):
        # Drop the child on any protocol error; a later call starts a fresh one.
        proc = self._proc
        code = None
        if proc is not None:
            code = proc.poll()
            if code is None:
                # EOF can arrive a beat before the exit status; give it a moment
                try:
                    code = proc.wait(timeout=0.2)
                except subprocess.TimeoutExpired:
                    code = None
        self.close()
        if code is not None and code != 0:
            message = f"{message} (evaluator exited with code {code})"
        raise EvaluationError(f"{self.label}: {message}")

    # -- protocol ------------------------------------------------------------

    def _raw(self, points: np.ndarray) -> np.ndarray:
        with self._io_lock:
            if self._proc is None or self._proc.poll() is not None:
                self.close()
                self._start()
            payload = "".join(
                " ".join(repr(float(c)) for c in row) + "\n" for row in points
            )
            try:
                self._proc.stdin.write(payload.encode("utf-8"))
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                self._fail("evaluator closed its input pipe")
            lines = self._read_lines(len(points))
            values = np.empty(len(points), dtype=float)
            for i, line in enumerate(lines):
                text = line.decode("utf-8", errors="replace").strip()
                try:
                    values[i] = float(text)
                except ValueError:
                    self._fail(f"malformed reply {text!r} on line {i + 1}")
            return values

    def _read_lines(self, count: int) -> list[bytes]:
        lines = []
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + self.timeout
        with selectors.DefaultSelector() as sel:
            sel.register(fd, selectors.EVENT_READ)
            while len(lines) < count:
                newline = self._buffer.find(b"\n")
                if newline >= 0:
                    lines.append(self._buffer[:newline])
                    self._buffer = self._buffer[newline + 1:]
                    continue
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not sel.select(remaining):
                    self._fail(
                        f"timeout after {self.timeout:g}s waiting for reply "
                        f"line {len(lines) + 1} of {count}"
                    )
                chunk = os.read(fd, 1 << 16)
                if not chunk:
                    self._fail(
                        f"evaluator stopped after {len(lines)} of {count} reply lines"
                    )
                self._buffer += chunk
        return lines
