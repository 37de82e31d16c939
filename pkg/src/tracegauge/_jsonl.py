"""Line-oriented JSON helpers for the streaming CLI."""

from __future__ import annotations

import json
from typing import Any, Iterator, TextIO


def iter_jsonl(stream: TextIO) -> Iterator[tuple[int, Any]]:
    """Yield (zero-based record index, parsed value) per non-blank line.

    Lines that fail to parse yield (index, ValueError) so the caller can
    turn them into error records without stopping the stream.
    """
    index = 0
    for line in stream:
        line = line.strip()
        if not line:
            continue
        try:
            yield index, json.loads(line)
        except json.JSONDecodeError as exc:
            yield index, ValueError(f"invalid JSON: {exc}")
        index += 1


def dump_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)
