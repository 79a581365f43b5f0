"""Step labels: local <i,b>, synchronisation <<i_s,b_s>,<i_r,b_r>>, and silent."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True, order=True)
class Endpoint:
    thread: str
    line: int

    def __str__(self) -> str:
        return f"<{self.thread},{self.line}>"


@dataclass(frozen=True, slots=True)
class Local:
    thread: str
    line: int

    @property
    def threads(self) -> tuple[str, ...]:
        return (self.thread,)

    @property
    def endpoints(self) -> tuple[Endpoint, ...]:
        return (Endpoint(self.thread, self.line),)

    def mentions(self, tid: str) -> bool:
        return self.thread == tid

    def line_of(self, tid: str) -> int:
        return self.line

    def sort_key(self) -> tuple:
        return (self.thread, ((self.thread, self.line),), 0)

    def __str__(self) -> str:
        return f"<{self.thread},{self.line}>"


@dataclass(frozen=True, slots=True)
class Sync:
    sender: Endpoint
    receiver: Endpoint

    @property
    def threads(self) -> tuple[str, ...]:
        return (self.sender.thread, self.receiver.thread)

    @property
    def endpoints(self) -> tuple[Endpoint, ...]:
        return (self.sender, self.receiver)

    def mentions(self, tid: str) -> bool:
        return self.sender.thread == tid or self.receiver.thread == tid

    def line_of(self, tid: str) -> int:
        if self.sender.thread == tid:
            return self.sender.line
        return self.receiver.line

    def sort_key(self) -> tuple:
        s, r = self.sender, self.receiver
        return (min(s.thread, r.thread), ((s.thread, s.line), (r.thread, r.line)), 1)

    def __str__(self) -> str:
        return f"<{self.sender},{self.receiver}>"


class _Silent:
    __slots__ = ()
    threads: tuple[str, ...] = ()

    def __repr__(self) -> str:
        return "SILENT"

    def __reduce__(self):
        return "SILENT"


SILENT = _Silent()

Label = Local | Sync


def sync(s: str, bs: int, r: str, br: int) -> Sync:
    return Sync(Endpoint(s, bs), Endpoint(r, br))


def label_to_json(label: Label) -> dict:
    if isinstance(label, Local):
        return {"local": {"t": label.thread, "b": label.line}}
    return {
        "sync": {
            "s": {"t": label.sender.thread, "b": label.sender.line},
            "r": {"t": label.receiver.thread, "b": label.receiver.line},
        }
    }


def label_from_json(obj: dict) -> Label:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"malformed label: {obj!r}")
    if "local" in obj:
        body = obj["local"]
        return Local(str(body["t"]), int(body["b"]))
    if "sync" in obj:
        s, r = obj["sync"]["s"], obj["sync"]["r"]
        return Sync(Endpoint(str(s["t"]), int(s["b"])), Endpoint(str(r["t"]), int(r["b"])))
    raise ValueError(f"malformed label: {obj!r}")
