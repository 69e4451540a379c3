"""Line-delimited trace of a simulation run.

Each line is one canonical term; the line number (from 0) is the entry
index referred to by ``cause`` fields and by check reports.
"""

from __future__ import annotations

from pathlib import Path

from ..terms import Term, parse_term, to_text


class Trace:
    def __init__(self, entries=None):
        self.entries: list[Term] = list(entries or [])

    def append(self, kind: str, *args) -> int:
        self.entries.append(Term(kind, tuple(args)))
        return len(self.entries) - 1

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def of_kind(self, kind: str):
        return [(i, e) for i, e in enumerate(self.entries) if e.functor == kind]

    def dumps(self) -> str:
        return "".join(to_text(e) + "\n" for e in self.entries)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls(parse_term(line) for line in text.splitlines() if line.strip())

    @classmethod
    def load(cls, path) -> "Trace":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
