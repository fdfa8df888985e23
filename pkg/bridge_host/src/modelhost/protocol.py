"""Protocol v1 server loop over standard streams.

Sequence: read hello, answer ready (ok or refusal with message), consume
train rows to the end-of-train marker, consume test rows to the
end-of-test marker, fit once, then answer every test row in arrival
order and finish with the done marker. Inference failure emits an error
record and a nonzero exit.
"""

from __future__ import annotations

import json
import sys

from .models import ModelError, build_model

VALID_TASKS = ("DX", "ADAS", "VENT")


def _emit(stream, payload: dict) -> None:
    stream.write(json.dumps(payload, separators=(",", ":"),
                            allow_nan=False) + "\n")
    stream.flush()


def _refuse(stdout, message: str) -> int:
    _emit(stdout, {"ok": False, "msg": message})
    return 0


def serve(default_kind: str = "gbt", stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    hello_line = stdin.readline()
    if not hello_line:
        return 1
    try:
        hello = json.loads(hello_line)
    except json.JSONDecodeError:
        return _refuse(stdout, "hello line is not valid JSON")

    if hello.get("v") != 1:
        return _refuse(stdout, f"unsupported protocol version {hello.get('v')!r}")
    task = hello.get("task")
    if task not in VALID_TASKS:
        return _refuse(stdout, f"unknown task {task!r}")
    features = hello.get("features")
    if not isinstance(features, list) or not features:
        return _refuse(stdout, "hello carries no feature schema")

    hparams = hello.get("hparams") or {}
    kind = hparams.get("kind", default_kind)
    seed = int(hparams.get("seed", 0))
    try:
        model = build_model(kind, task, hparams, seed)
    except ModelError as exc:
        return _refuse(stdout, str(exc))

    _emit(stdout, {"ok": True})

    train_x, train_y = [], []
    test_rows = []
    stream = "train"
    for line in stdin:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            _emit(stdout, {"error": f"malformed input line: {line.strip()!r}"})
            return 1
        if obj.get("end") == "train":
            stream = "test"
            continue
        if obj.get("end") == "test":
            break
        x = obj.get("x")
        if not isinstance(x, list) or len(x) != len(features):
            _emit(stdout, {"error": f"row {obj.get('id')!r} has "
                                    f"{len(x) if isinstance(x, list) else 'no'}"
                                    f" features, expected {len(features)}"})
            return 1
        if stream == "train":
            if obj.get("y") is not None:
                train_x.append(x)
                train_y.append(obj["y"])
        else:
            test_rows.append((obj.get("id"), x))

    if not train_x:
        _emit(stdout, {"error": "no labelled training rows received"})
        return 1

    try:
        model.fit(train_x, train_y)
        for row_id, x in test_rows:
            reply = model.predict_one(x)
            _emit(stdout, {"id": row_id, **reply})
    except ModelError as exc:
        _emit(stdout, {"error": str(exc)})
        return 1

    _emit(stdout, {"done": True})
    return 0
