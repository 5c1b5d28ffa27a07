from __future__ import annotations

import os
from dataclasses import dataclass


def default_precision() -> str:
    mode = os.environ.get("VPT_PRECISION", "double").strip().lower()
    if mode not in ("double", "extended"):
        raise ValueError(f"VPT_PRECISION must be 'double' or 'extended', got {mode!r}")
    return mode


@dataclass(frozen=True)
class ModelParams:
    """Parameters of V(x) = M omega^2 x^2 / 2 + g x^4; natural units by default."""

    M: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0
    g: float = 0.0
    precision: str = "double"

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.g >= 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if self.precision not in ("double", "extended"):
            raise ValueError(f"unknown precision mode {self.precision!r}")

    def replace(self, **changes) -> "ModelParams":
        fields = dict(M=self.M, omega=self.omega, hbar=self.hbar, g=self.g,
                      precision=self.precision)
        fields.update(changes)
        return ModelParams(**fields)


NATURAL = ModelParams()
