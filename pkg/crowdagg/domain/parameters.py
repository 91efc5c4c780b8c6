from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from crowdagg.core.errors import LengthMismatch, ShapeMismatch
from crowdagg.domain.schemas import ModelKind


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def inverse_softplus(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    # log(expm1(y)) loses precision for large y
    return np.where(y > 30.0, y, np.log(np.expm1(np.minimum(y, 30.0))))


def expected_shapes(kind: ModelKind, I: int, J: int, M: int, P: int) -> Dict[str, Optional[Tuple[int, ...]]]:  # noqa: E741
    return {
        "t": (I,),
        "q": (I, M),
        "b": (J,),
        "c": (M,),
        "r_raw": (I,) if kind.shared_variance else (I, M),
        "w_raw": (J,) if kind.shared_variance else (J, M),
        "mu": (P,) if kind.has_impression else None,
    }


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """Free parameters of one generative model.

    `r_raw` / `w_raw` are unconstrained; the variances are their softplus.
    `mu` holds one impression per observed (target, worker) pair, aligned with
    `mu_pairs` (shape (P, 2), sorted like `RatingDataset.pairs`). Both are None
    for CIM and CDM.
    """

    kind: ModelKind
    t: np.ndarray
    q: np.ndarray
    b: np.ndarray
    c: np.ndarray
    r_raw: np.ndarray
    w_raw: np.ndarray
    mu: Optional[np.ndarray] = None
    mu_pairs: Optional[np.ndarray] = None

    @property
    def I(self) -> int:  # noqa: E743
        return int(self.t.shape[0])

    @property
    def J(self) -> int:
        return int(self.b.shape[0])

    @property
    def M(self) -> int:
        return int(self.c.shape[0])

    @property
    def r(self) -> np.ndarray:
        return softplus(self.r_raw)

    @property
    def w(self) -> np.ndarray:
        return softplus(self.w_raw)

    def arrays(self) -> List[np.ndarray]:
        out = [self.t, self.q, self.b, self.c, self.r_raw, self.w_raw]
        if self.kind.has_impression:
            out.append(self.mu)
        return out

    def check_shapes(self) -> None:
        P = 0 if self.mu is None else int(np.shape(self.mu)[0])
        shapes = expected_shapes(self.kind, self.I, self.J, self.M, P)
        for name, shape in shapes.items():
            value = getattr(self, name)
            if shape is None:
                if value is not None:
                    raise ShapeMismatch(f"{self.kind.value} has no {name} parameter")
                continue
            if value is None or tuple(np.shape(value)) != shape:
                raise ShapeMismatch(f"{name} has shape {None if value is None else np.shape(value)}, expected {shape}")
        if self.kind.has_impression and (self.mu_pairs is None or np.shape(self.mu_pairs) != (P, 2)):
            raise ShapeMismatch("mu_pairs must be (P, 2) and aligned with mu")

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self.arrays()))

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.ravel(a) for a in self.arrays()]).astype(np.float64)

    def with_flat(self, theta: np.ndarray) -> "ParameterSet":
        """Same structure, coordinates taken from a flat vector (inverse of `flatten`)."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.size,):
            raise LengthMismatch(f"flat vector has length {theta.size}, expected {self.size}")
        names = ["t", "q", "b", "c", "r_raw", "w_raw"] + (["mu"] if self.kind.has_impression else [])
        updates: Dict[str, np.ndarray] = {}
        offset = 0
        for name in names:
            ref = getattr(self, name)
            updates[name] = theta[offset:offset + ref.size].reshape(ref.shape).copy()
            offset += ref.size
        return replace(self, **updates)

    def zeros_like(self) -> "ParameterSet":
        return self.with_flat(np.zeros(self.size))

    def equals(self, other: "ParameterSet") -> bool:
        """Bit-for-bit equality."""
        if self.kind != other.kind:
            return False
        pairs_equal = (self.mu_pairs is None and other.mu_pairs is None) or (
            self.mu_pairs is not None and other.mu_pairs is not None and np.array_equal(self.mu_pairs, other.mu_pairs)
        )
        return pairs_equal and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    def impression_matrix(self) -> Optional[np.ndarray]:
        """mu as an I x J matrix, NaN where the pair is unobserved."""
        if self.mu is None:
            return None
        out = np.full((self.I, self.J), np.nan)
        out[self.mu_pairs[:, 0], self.mu_pairs[:, 1]] = self.mu
        return out

    # JSON

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "kind": self.kind.value,
            "t": self.t.tolist(),
            "q": self.q.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "r_raw": self.r_raw.tolist(),
            "w_raw": self.w_raw.tolist(),
        }
        matrix = self.impression_matrix()
        if matrix is not None:
            data["mu"] = [[None if np.isnan(v) else float(v) for v in row] for row in matrix]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ParameterSet":
        kind = ModelKind(data["kind"])
        mu = mu_pairs = None
        if kind.has_impression:
            matrix = np.array([[np.nan if v is None else v for v in row] for row in data["mu"]], dtype=np.float64)
            rows, cols = np.nonzero(~np.isnan(matrix))
            mu_pairs = np.stack([rows, cols], axis=1).astype(np.int64)
            mu = matrix[rows, cols]
        p = cls(
            kind=kind,
            t=np.asarray(data["t"], dtype=np.float64),
            q=np.asarray(data["q"], dtype=np.float64).reshape(len(data["t"]), -1),
            b=np.asarray(data["b"], dtype=np.float64),
            c=np.asarray(data["c"], dtype=np.float64),
            r_raw=np.asarray(data["r_raw"], dtype=np.float64),
            w_raw=np.asarray(data["w_raw"], dtype=np.float64),
            mu=mu,
            mu_pairs=mu_pairs,
        )
        p.check_shapes()
        return p
