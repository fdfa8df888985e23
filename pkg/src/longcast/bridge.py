"""Client side of the external-model wire protocol (v1).

One newline-terminated JSON object per line, UTF-8, over the host
process's standard streams:

  client -> host   {"v":1,"task":...,"features":[...],"hparams":{...}}
  host   -> client {"ok":true} | {"ok":false,"msg":...}
  client -> host   {"id":i,"x":[...],"y":...} rows, {"end":"train"},
                   test rows, {"end":"test"}
  host   -> client {"id":i,"p":[...]} | {"id":i,"yhat":...} per test row,
                   then {"done":true}

Missing values are JSON null on the wire, never a number. The client
never alters feature values: a row's wire bytes are its canonical
serialization.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
import time
from typing import Optional, Sequence

from .cohort import Task
from .errors import BridgeError, BridgeTimeout, ProtocolError
from .predictors import PredictionRecord
from .tables import FeatureTable

PROTOCOL_VERSION = 1
_STDERR_LIMIT = 20_000


def canonical_hello(task: Task, features: Sequence[str], hparams: dict) -> str:
    return json.dumps({"v": PROTOCOL_VERSION, "task": task.value,
                       "features": list(features), "hparams": hparams},
                      separators=(",", ":"), allow_nan=False)


def canonical_row(row_id: int, x: Sequence[Optional[float]],
                  y: Optional[float]) -> str:
    return json.dumps({"id": row_id, "x": list(x), "y": y},
                      separators=(",", ":"), allow_nan=False)


def canonical_marker(stream: str) -> str:
    return json.dumps({"end": stream}, separators=(",", ":"))


def _row_vector(row, columns) -> list[Optional[float]]:
    return [row.features.get(name) for name in columns]


class _HostLines:
    """Drains host stdout on a thread so writes can never deadlock."""

    def __init__(self, stream):
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,),
                                        daemon=True)
        self._thread.start()
        self.line_no = 0

    def _pump(self, stream):
        for line in stream:
            self._queue.put(line)
        self._queue.put(None)

    def next(self, deadline: float) -> Optional[str]:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise BridgeTimeout("host session deadline exceeded")
        try:
            line = self._queue.get(timeout=remaining)
        except queue.Empty:
            raise BridgeTimeout("host session deadline exceeded")
        if line is not None:
            self.line_no += 1
        return line


def bridge_session(host_cmd: Sequence[str], task: Task, hparams: dict,
                   train: FeatureTable, test: FeatureTable,
                   timeout: float = 3600.0) -> list[PredictionRecord]:
    """Run one protocol exchange against a freshly spawned host process."""
    columns = train.schema.model_columns
    try:
        proc = subprocess.Popen(
            list(host_cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE, text=True, bufsize=1)
    except OSError as exc:
        raise BridgeError(f"cannot launch host {host_cmd!r}: {exc}")

    stderr_buf: list[str] = []

    def _drain_stderr():
        kept = 0
        while True:
            chunk = proc.stderr.read(4096)
            if not chunk:
                return
            if kept < _STDERR_LIMIT:      # keep draining, cap what we store
                stderr_buf.append(chunk[:_STDERR_LIMIT - kept])
                kept += len(chunk)

    drain = threading.Thread(target=_drain_stderr, daemon=True)
    drain.start()

    deadline = time.monotonic() + timeout
    lines = _HostLines(proc.stdout)

    def diagnostics() -> str:
        drain.join(timeout=1.0)
        text = "".join(stderr_buf).strip()
        return f"; host stderr: {text}" if text else ""

    def fail(exc_type, message):
        proc.kill()
        proc.wait()
        raise exc_type(message + diagnostics())

    def host_line(expect: str) -> dict:
        line = lines.next(deadline)
        if line is None:
            proc.wait()
            fail(BridgeError,
                 f"host closed its stream before {expect} "
                 f"(exit code {proc.returncode})")
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            fail(ProtocolError,
                 f"host line {lines.line_no} is not valid JSON "
                 f"(expected {expect}): {line.strip()!r}")

    try:
        proc.stdin.write(canonical_hello(task, columns, hparams) + "\n")
        proc.stdin.flush()

        ready = host_line("ready")
        if ready.get("ok") is not True:
            fail(BridgeError,
                 f"host refused session: {ready.get('msg', ready)!r}")

        for i, row in enumerate(train.rows):
            proc.stdin.write(
                canonical_row(i, _row_vector(row, columns), row.target) + "\n")
        proc.stdin.write(canonical_marker("train") + "\n")
        for i, row in enumerate(test.rows):
            # targets never cross the boundary for test rows
            proc.stdin.write(
                canonical_row(i, _row_vector(row, columns), None) + "\n")
        proc.stdin.write(canonical_marker("test") + "\n")
        proc.stdin.flush()
        proc.stdin.close()

        records = []
        for i, row in enumerate(test.rows):
            reply = host_line(f"prediction {i}")
            if "error" in reply:
                fail(BridgeError, f"host reported error: {reply['error']!r}")
            if reply.get("id") != i:
                fail(ProtocolError,
                     f"host line {lines.line_no}: prediction id "
                     f"{reply.get('id')!r} does not echo test row {i}")
            if task is Task.DX:
                probs = reply.get("p")
                if (not isinstance(probs, list) or len(probs) != 3
                        or not all(isinstance(p, (int, float)) for p in probs)
                        or any(not 0.0 <= p <= 1.0 for p in probs)
                        or abs(sum(probs) - 1.0) > 1e-9):
                    fail(ProtocolError,
                         f"host line {lines.line_no}: malformed or "
                         f"unnormalized probability triple {probs!r}")
                records.append(PredictionRecord(
                    row.patient_id, row.target_month,
                    probs=tuple(float(p) for p in probs)))
            else:
                yhat = reply.get("yhat")
                if not isinstance(yhat, (int, float)) or not math.isfinite(yhat):
                    fail(ProtocolError,
                         f"host line {lines.line_no}: malformed estimate "
                         f"{yhat!r}")
                records.append(PredictionRecord(
                    row.patient_id, row.target_month, estimate=float(yhat)))

        done = host_line("done")
        if done.get("done") is not True:
            fail(ProtocolError,
                 f"host line {lines.line_no}: expected done marker, "
                 f"got {done!r}")

        remaining = max(0.0, deadline - time.monotonic())
        try:
            code = proc.wait(timeout=remaining)
        except subprocess.TimeoutExpired:
            fail(BridgeTimeout, "host did not exit before the deadline")
        if code != 0:
            raise BridgeError(
                f"host exited with code {code}" + diagnostics())
        return records
    except BrokenPipeError:
        proc.wait()
        raise BridgeError(
            f"host closed stdin early (exit code {proc.returncode})"
            + diagnostics())
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
