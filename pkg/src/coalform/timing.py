from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field


@dataclass
class TimingBreakdown:
    """Wall-clock seconds from a monotonic clock.

    ``repository_update`` and ``feasibility_check`` hold one entry per
    generation, the initial population included.  The repository figure
    contains the feasibility check, since constraint handling is part of
    updating the archive.
    """

    total: float = 0.0          # optimizer only
    filtering: float = 0.0
    selection: float = 0.0      # threshold pruning and ranking after the optimizer
    repository_update: list[float] = field(default_factory=list)
    feasibility_check: list[float] = field(default_factory=list)

    @property
    def mean_repository_update(self) -> float:
        return sum(self.repository_update) / len(self.repository_update) if self.repository_update else 0.0

    @property
    def mean_feasibility_check(self) -> float:
        return sum(self.feasibility_check) / len(self.feasibility_check) if self.feasibility_check else 0.0

    @property
    def processing_time(self) -> float:
        """Filtering, optimization and selection: the end-to-end PT of one run."""
        return self.filtering + self.total + self.selection

    def summary(self) -> dict[str, float]:
        return {
            "pt": self.processing_time,
            "optimizer_time": self.total,
            "filtering_time": self.filtering,
            "repository_update_time": self.mean_repository_update,
            "feasibility_check_time": self.mean_feasibility_check,
        }

    def to_dict(self) -> dict:
        return asdict(self)


@contextmanager
def stopwatch(sink: list[float]):
    start = time.perf_counter()
    try:
        yield
    finally:
        sink.append(time.perf_counter() - start)
