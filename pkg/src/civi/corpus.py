"""Bundled example systems and the suite that checks their expected verdicts."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CiviError
from .loader import SPECS_DIR, bundled_entries, entry_files, load_files
from .sorts import Instance


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    files: tuple[Path, ...]
    mode: str  # certify | validate-fluent
    param: str
    expected: dict = field(default_factory=dict)  # size -> verdict
    chain: str | None = None
    nat_bound: int = 2
    description: str = ""

    def instance(self, size: int) -> Instance:
        prefix = self.param[0].lower()
        atoms = tuple(f"{prefix}{i}" for i in range(1, size + 1))
        return Instance({self.param: atoms}, self.nat_bound)


@dataclass
class Cell:
    entry: str
    size: int
    expected: str
    actual: str
    seconds: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.actual == self.expected

    def line(self) -> str:
        mark = "ok " if self.ok else "BAD"
        extra = f"  ({self.error})" if self.error else ""
        return f"{mark} {self.entry} size={self.size}: expected {self.expected}, got {self.actual} in {self.seconds:.2f}s{extra}"


def load_corpus_entry(name: str) -> CorpusEntry:
    meta = json.loads((SPECS_DIR / name / "expected.json").read_text())
    return CorpusEntry(
        name=name,
        files=tuple(entry_files(name)),
        mode=meta["mode"],
        param=meta["param"],
        expected={int(k): v for k, v in meta["expected"].items()},
        chain=meta.get("chain"),
        nat_bound=meta.get("natBound", 2),
        description=meta.get("description", ""),
    )


def corpus_entries() -> list[CorpusEntry]:
    return [load_corpus_entry(n) for n in bundled_entries() if (SPECS_DIR / n / "expected.json").is_file()]


def run_cell(entry: CorpusEntry, size: int, reinfer: bool = False) -> Cell:
    from .certificate import certify
    from .sfl import validate_fluent

    expected = entry.expected.get(size, "")
    start = time.perf_counter()
    try:
        reg = load_files(entry.files)
        inst = entry.instance(size)
        if entry.mode == "certify":
            chain = reg.chain(entry.chain)
            if reinfer:
                chain = [c.with_invariant(None) for c in chain]
            actual = "proved" if certify(chain, inst).proved else "failed"
        else:
            reports = [validate_fluent(f, inst) for f in reg.fluents.values()]
            actual = "valid" if all(r.ok for r in reports) else "invalid"
        return Cell(entry.name, size, expected, actual, time.perf_counter() - start)
    except CiviError as exc:
        return Cell(entry.name, size, expected, "error", time.perf_counter() - start, str(exc))


def corpus_suite(entry: CorpusEntry | str, sizes=None, workers: int = 1, reinfer: bool = False) -> list[Cell]:
    """Run every (entry, size) cell and compare with the recorded verdicts."""
    if isinstance(entry, str):
        entry = load_corpus_entry(entry)
    sizes = sorted(entry.expected) if sizes is None else list(sizes)
    if workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_cell, [entry] * len(sizes), sizes, [reinfer] * len(sizes)))
    return [run_cell(entry, n, reinfer) for n in sizes]


__all__ = ["CorpusEntry", "Cell", "load_corpus_entry", "corpus_entries", "run_cell", "corpus_suite"]
