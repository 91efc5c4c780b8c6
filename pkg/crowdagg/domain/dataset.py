from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from crowdagg.core.errors import DuplicateResponse, EmptyCondition
from crowdagg.domain.schemas import Condition


class Response(BaseModel):
    """One Likert grade x_ij^(m) given by a worker to a target on a criterion."""

    model_config = ConfigDict(frozen=True)

    worker_id: str
    target_id: str
    criterion_id: str
    grade: int = Field(ge=1, le=5)
    condition: Condition

    @property
    def key(self) -> Tuple[str, str, str, Condition]:
        return (self.worker_id, self.target_id, self.criterion_id, self.condition)

    @property
    def sort_key(self) -> Tuple[str, str, str, str]:
        return (self.target_id, self.worker_id, self.criterion_id, self.condition.value)


@dataclass(frozen=True)
class RatingDataset:
    """Immutable sparse response set with lexicographically sorted id indexes.

    Build it with `RatingDataset.from_responses`; responses are stored in
    canonical (target, worker, criterion, condition) order so two datasets with
    equal response sets compare equal field by field.
    """

    responses: Tuple[Response, ...]
    workers: Tuple[str, ...]
    targets: Tuple[str, ...]
    criteria: Tuple[str, ...]
    # real-valued responses overriding the integer grades in the likelihood (synthetic, undiscretized)
    values: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_responses(
        cls,
        responses: Iterable[Response],
        values: Optional[Iterable[float]] = None,
    ) -> "RatingDataset":
        """Canonical dataset from responses; `values`, when given, are aligned with `responses` and travel with them."""
        seen: Dict[Tuple[str, str, str, Condition], int] = {}
        rows: List[Response] = []
        for n, r in enumerate(responses):
            if r.key in seen:
                raise DuplicateResponse(
                    f"duplicate response for worker={r.worker_id} target={r.target_id} "
                    f"criterion={r.criterion_id} condition={r.condition.value}"
                )
            seen[r.key] = n
            rows.append(r)
        order = sorted(range(len(rows)), key=lambda k: rows[k].sort_key)
        sorted_values = None
        if values is not None:
            raw = np.asarray(list(values), dtype=np.float64).reshape(-1)
            if raw.size != len(rows):
                raise ValueError(f"{raw.size} values for {len(rows)} responses")
            sorted_values = raw[np.asarray(order, dtype=np.int64)] if rows else raw
        rows = [rows[k] for k in order]
        return cls(
            responses=tuple(rows),
            workers=tuple(sorted({r.worker_id for r in rows})),
            targets=tuple(sorted({r.target_id for r in rows})),
            criteria=tuple(sorted({r.criterion_id for r in rows})),
            values=sorted_values,
        )

    # sizes

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.targets)

    @property
    def J(self) -> int:
        return len(self.workers)

    @property
    def M(self) -> int:
        return len(self.criteria)

    def __len__(self) -> int:
        return len(self.responses)

    # index maps

    @cached_property
    def worker_index(self) -> Dict[str, int]:
        return {w: k for k, w in enumerate(self.workers)}

    @cached_property
    def target_index(self) -> Dict[str, int]:
        return {t: k for k, t in enumerate(self.targets)}

    @cached_property
    def criterion_index(self) -> Dict[str, int]:
        return {c: k for k, c in enumerate(self.criteria)}

    # dense coordinates for the numerics

    @cached_property
    def target_idx(self) -> np.ndarray:
        return np.fromiter((self.target_index[r.target_id] for r in self.responses), dtype=np.int64, count=len(self))

    @cached_property
    def worker_idx(self) -> np.ndarray:
        return np.fromiter((self.worker_index[r.worker_id] for r in self.responses), dtype=np.int64, count=len(self))

    @cached_property
    def criterion_idx(self) -> np.ndarray:
        return np.fromiter((self.criterion_index[r.criterion_id] for r in self.responses), dtype=np.int64, count=len(self))

    @cached_property
    def grades(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=np.float64)
        return np.fromiter((r.grade for r in self.responses), dtype=np.float64, count=len(self))

    @cached_property
    def _pair_codes(self) -> Tuple[np.ndarray, np.ndarray]:
        codes = self.target_idx * max(self.J, 1) + self.worker_idx
        unique, inverse = np.unique(codes, return_inverse=True)
        return unique, inverse.reshape(-1)

    @cached_property
    def pairs(self) -> np.ndarray:
        """Observed (target, worker) index pairs, shape (P, 2), sorted."""
        unique, _ = self._pair_codes
        J = max(self.J, 1)
        return np.stack([unique // J, unique % J], axis=1)

    @property
    def pair_idx(self) -> np.ndarray:
        """Row of `pairs` for each response."""
        return self._pair_codes[1]

    def with_values(self, values: np.ndarray) -> "RatingDataset":
        """Attach real-valued responses in canonical order. Filtering keeps them with their rows."""
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != len(self):
            raise ValueError(f"{values.size} values for {len(self)} responses")
        return replace(self, values=values)

    # filtering

    @cached_property
    def conditions(self) -> Tuple[Condition, ...]:
        present = {r.condition for r in self.responses}
        return tuple(c for c in Condition if c in present)

    def _subset(self, keep: np.ndarray) -> "RatingDataset":
        rows = [r for r, k in zip(self.responses, keep) if k]
        values = None if self.values is None else np.asarray(self.values)[keep]
        return RatingDataset.from_responses(rows, values=values)

    def where(self, condition: Condition) -> "RatingDataset":
        """Responses under `condition`; indexes are rebuilt from what remains."""
        keep = np.fromiter((r.condition == condition for r in self.responses), dtype=bool, count=len(self))
        if not keep.any():
            raise EmptyCondition(f"no {condition.value} responses in dataset")
        return self._subset(keep)

    def restrict_workers(self, worker_ids: Iterable[str], condition: Optional[Condition] = None) -> "RatingDataset":
        ids = set(worker_ids)
        keep = np.fromiter(
            (r.worker_id in ids and (condition is None or r.condition == condition) for r in self.responses),
            dtype=bool,
            count=len(self),
        )
        return self._subset(keep)

    def summary(self) -> Dict[str, object]:
        counts = {c.value: 0 for c in Condition}
        for r in self.responses:
            counts[r.condition.value] += 1
        return {
            "responses": len(self),
            "I": self.I,
            "J": self.J,
            "M": self.M,
            "by_condition": counts,
        }
