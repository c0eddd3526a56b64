"""Append-only event log: the persistence and replay substrate.

One JSON record per line, self-describing via its kind field. Sequence
numbers are gapless, so a file truncated at any line boundary is itself
a well-formed log.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import IO, Iterator

from .errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Event:
    sequence: int
    timestamp: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.sequence, "ts": self.timestamp, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> Event:
        raw = json.loads(line)
        return cls(raw["seq"], raw["ts"], raw["kind"], raw["payload"])


class EventLog:
    """In-memory event list with an optional line-delimited file sink."""

    def __init__(self):
        self.events: list[Event] = []
        self._sink: IO[str] | None = None

    def attach_sink(self, path: str) -> None:
        self._sink = open(path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._sink is not None:
            self._sink.close()
            self._sink = None

    def append(self, event: Event) -> None:
        if self.events and event.sequence != self.events[-1].sequence + 1:
            raise ValidationError("log_gap", f"non-contiguous sequence {event.sequence}")
        self.events.append(event)
        if self._sink is not None:
            self._sink.write(event.to_json() + "\n")
            self._sink.flush()

    def __len__(self) -> int:
        return len(self.events)

    def since(self, sequence: int) -> list[Event]:
        return [e for e in self.events if e.sequence > sequence]


def read_log(path: str) -> Iterator[Event]:
    """Yield events from a log file.

    A trailing partial line (interrupted final write) is skipped with a
    warning; a malformed line anywhere else is an error.
    """
    size = os.path.getsize(path)
    consumed = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            consumed += len(line.encode("utf-8"))
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield Event.from_json(stripped)
            except (json.JSONDecodeError, KeyError) as exc:
                if consumed >= size and not line.endswith("\n"):
                    logger.warning("dropping partial trailing record in %s", path)
                    return
                raise ValidationError("corrupt_log", f"unreadable event record: {exc}")
