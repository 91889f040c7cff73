"""Structure-of-arrays particle bank and inter-event sorting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sortmc.presort import PresortReport, inversion_fraction
from sortmc.sort_core import SortStats, make_records, sort_adaptive, sort_bitonic


@dataclass
class Particle:
    id: int
    position: np.ndarray
    direction: np.ndarray
    group: int
    weight: float
    cell: int
    alive: bool
    event_counter: int


@dataclass
class ParticleBank:
    id: np.ndarray        # int64
    position: np.ndarray  # (n, 3) float64, cm
    direction: np.ndarray  # (n, 3) float64, unit
    group: np.ndarray     # int64
    weight: np.ndarray    # float64
    cell: np.ndarray      # int64
    alive: np.ndarray     # bool
    event_counter: np.ndarray  # uint64, position in the particle's RNG substream

    @classmethod
    def empty(cls, n: int = 0) -> "ParticleBank":
        return cls(
            id=np.zeros(n, np.int64), position=np.zeros((n, 3)), direction=np.zeros((n, 3)),
            group=np.zeros(n, np.int64), weight=np.ones(n), cell=np.zeros(n, np.int64),
            alive=np.ones(n, bool), event_counter=np.zeros(n, np.uint64))

    def __len__(self) -> int:
        return self.id.shape[0]

    def take(self, index) -> "ParticleBank":
        return ParticleBank(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    def compact(self) -> "ParticleBank":
        """Drop dead particles, keeping the order of the survivors."""
        if self.alive.all():
            return self
        return self.take(np.flatnonzero(self.alive))

    def particle(self, i: int) -> Particle:
        return Particle(int(self.id[i]), self.position[i].copy(), self.direction[i].copy(),
                        int(self.group[i]), float(self.weight[i]), int(self.cell[i]),
                        bool(self.alive[i]), int(self.event_counter[i]))


class SortMode(str, enum.Enum):
    NONE = "None"
    ADAPTIVE_EACH_GENERATION = "AdaptiveEachGeneration"
    BITONIC_EACH_GENERATION = "BitonicEachGeneration"
    ADAPTIVE_EVERY_K = "AdaptiveEveryKEvents"
    BITONIC_EVERY_K = "BitonicEveryKEvents"

    @property
    def every_k(self) -> bool:
        return self in (SortMode.ADAPTIVE_EVERY_K, SortMode.BITONIC_EVERY_K)

    @property
    def bitonic(self) -> bool:
        return self in (SortMode.BITONIC_EACH_GENERATION, SortMode.BITONIC_EVERY_K)


class KeyScheme(str, enum.Enum):
    GROUP = "Group"
    CELL = "Cell"
    CELL_THEN_GROUP = "CellThenGroup"


class SortStrategy(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: SortMode = SortMode.NONE
    k_events: Optional[int] = Field(None, ge=1)
    key_scheme: KeyScheme = KeyScheme.CELL_THEN_GROUP

    @model_validator(mode="after")
    def _k_for_every_k(self):
        if self.mode.every_k and self.k_events is None:
            raise ValueError(f"k_events is required for mode {self.mode.value}")
        return self

    def sorts_before_pass(self, event_pass: int) -> bool:
        """Whether sort_bank runs before the given event pass of a generation."""
        if self.mode.every_k:
            return event_pass % self.k_events == 0
        return event_pass == 0


def sort_keys(bank: ParticleBank, scheme: KeyScheme, groups: int) -> np.ndarray:
    scheme = KeyScheme(scheme)
    if scheme is KeyScheme.GROUP:
        keys = bank.group
    elif scheme is KeyScheme.CELL:
        keys = bank.cell
    else:
        keys = bank.cell * groups + bank.group
    return keys.astype(np.uint64)


def sort_bank(bank: ParticleBank, strategy: SortStrategy, groups: int, workers: int = 1
              ) -> tuple[ParticleBank, SortStats, PresortReport]:
    """Reorder the bank by the strategy's key; presortedness is measured first.

    Mode ``None`` only measures and returns the bank untouched.
    """
    records = make_records(sort_keys(bank, strategy.key_scheme, groups))
    report = inversion_fraction(records)
    if strategy.mode is SortMode.NONE:
        return bank, SortStats(), report
    if strategy.mode.bitonic:
        ordered, stats = sort_bitonic(records, workers)
    else:
        ordered, stats = sort_adaptive(records)
    return bank.take(ordered["payload"]), stats, report
