import logging
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import sparse

logger = logging.getLogger(__name__)


class TridiagonalMatrix(BaseModel):
    """Square tridiagonal matrix in three-band storage.

    `sub[i]` is entry (i + 1, i), `sup[i]` is entry (i, i + 1).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @field_validator("sub", "diag", "sup", mode="before")
    @classmethod
    def _coerce_band(cls, value: Any) -> np.ndarray:
        return np.array(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def validate_bands(self) -> "TridiagonalMatrix":
        size = self.diag.size
        if size == 0:
            raise ValueError("tridiagonal matrix must have dimension >= 1")
        if self.sub.size != size - 1 or self.sup.size != size - 1:
            raise ValueError(
                f"band lengths ({self.sub.size}, {size}, {self.sup.size}) are inconsistent"
            )
        return self

    @classmethod
    def zeros(cls, size: int) -> "TridiagonalMatrix":
        return cls(sub=np.zeros(size - 1), diag=np.zeros(size), sup=np.zeros(size - 1))

    @property
    def dim(self) -> int:
        return int(self.diag.size)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Multiply a vector or every column of a 2-D block."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError(f"operand has {x.shape[0]} rows, matrix dimension is {self.dim}")
        diag, sub, sup = self.diag, self.sub, self.sup
        if x.ndim == 2:
            diag, sub, sup = diag[:, None], sub[:, None], sup[:, None]
        result = diag * x
        result[:-1] += sup * x[1:]
        result[1:] += sub * x[:-1]
        return result

    def quadratic_form(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.matvec(v))

    def transpose(self) -> "TridiagonalMatrix":
        return TridiagonalMatrix(sub=self.sup, diag=self.diag, sup=self.sub)

    def symmetric_part(self) -> "TridiagonalMatrix":
        off = 0.5 * (self.sub + self.sup)
        return TridiagonalMatrix(sub=off, diag=self.diag, sup=off)

    def norm_inf(self) -> float:
        row_sums = np.abs(self.diag).copy()
        row_sums[:-1] += np.abs(self.sup)
        row_sums[1:] += np.abs(self.sub)
        return float(np.max(row_sums))

    def to_sparse(self) -> sparse.csc_matrix:
        if self.dim == 1:
            return sparse.csc_matrix(self.diag.reshape(1, 1))
        return sparse.diags([self.sub, self.diag, self.sup], [-1, 0, 1], format="csc")

    def _check_compatible(self, other: "TridiagonalMatrix"):
        if not isinstance(other, TridiagonalMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "TridiagonalMatrix") -> "TridiagonalMatrix":
        self._check_compatible(other)
        return TridiagonalMatrix(
            sub=self.sub + other.sub, diag=self.diag + other.diag, sup=self.sup + other.sup
        )

    def __sub__(self, other: "TridiagonalMatrix") -> "TridiagonalMatrix":
        self._check_compatible(other)
        return TridiagonalMatrix(
            sub=self.sub - other.sub, diag=self.diag - other.diag, sup=self.sup - other.sup
        )

    def __mul__(self, scalar: float) -> "TridiagonalMatrix":
        scalar = float(scalar)
        return TridiagonalMatrix(sub=scalar * self.sub, diag=scalar * self.diag, sup=scalar * self.sup)

    __rmul__ = __mul__

    def __neg__(self) -> "TridiagonalMatrix":
        return self * -1.0
