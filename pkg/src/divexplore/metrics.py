"""Run instrumentation: visitation counts, reward logs, heatmaps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class VisitationGrid:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.counts = np.zeros((height, width), dtype=np.int64)

    def record_visit(self, state) -> None:
        r, c = int(state[0]), int(state[1])
        if not (0 <= r < self.height and 0 <= c < self.width):
            raise IndexError(f"state ({r}, {c}) outside {self.height}x{self.width} grid")
        self.counts[r, c] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def coverage(self) -> float:
        return float(np.count_nonzero(self.counts)) / self.counts.size


def record_visit(grid: VisitationGrid, state) -> None:
    grid.record_visit(state)


def coverage(grid: VisitationGrid) -> float:
    return grid.coverage()


@dataclass
class EpisodeRecord:
    episode: int
    total_reward: float
    steps: int
    wall_ms: float


@dataclass
class RewardLog:
    records: list = field(default_factory=list)

    def append(self, total_reward: float, steps: int, wall_ms: float = 0.0) -> None:
        self.records.append(EpisodeRecord(len(self.records), float(total_reward), int(steps), float(wall_ms)))

    def __len__(self):
        return len(self.records)

    @property
    def rewards(self) -> list:
        return [r.total_reward for r in self.records]

    def write_csv(self, path, wall_time=True) -> None:
        """``wall_time=False`` writes 0 in the wall_ms column so the file is a
        pure function of the run's inputs."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["episode", "total_reward", "steps", "wall_ms"])
            for r in self.records:
                w.writerow([r.episode, repr(r.total_reward), r.steps, f"{r.wall_ms:.3f}" if wall_time else "0"])

    @classmethod
    def read_csv(cls, path) -> "RewardLog":
        log = cls()
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                log.records.append(EpisodeRecord(int(row["episode"]), float(row["total_reward"]), int(row["steps"]), float(row["wall_ms"])))
        return log


def mean_last_n(log, n: int = 10) -> float:
    rewards = log.rewards if isinstance(log, RewardLog) else list(log)
    if not rewards:
        raise ValueError("mean_last_n of an empty log")
    tail = rewards[-n:]
    return float(sum(tail) / len(tail))


def heatmap_intensity(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    top = int(counts.max()) if counts.size else 0
    if top == 0:
        return np.zeros(counts.shape, dtype=np.uint8)
    scale = 255.0 / math.log1p(top)
    return np.rint(np.log1p(counts.astype(np.float64)) * scale).astype(np.uint8)


def export_heatmap(grid: VisitationGrid, path) -> None:
    img = heatmap_intensity(grid.counts)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + img.tobytes())
    except OSError as e:
        raise OSError(f"cannot write heatmap to {path}: {e}") from e


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w).copy()
