"""Flow specifications: which scheme, which speed law, which variant."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from axiflow.errors import DomainViolation, InvalidConfig

SCHEMES = ("A", "B", "C", "C_star", "D", "D_star")


@dataclass(frozen=True)
class SpeedLaw:
    """Monotone speed function f applied to the mean curvature.

    ``identity``: f(r) = r.  ``power``: f(r) = |r|^(beta-1) r.
    ``inverse``: f(r) = -1/r, restricted to negative arguments, which is the
    sign of the mean curvature of a convex surface in the outward-normal
    convention used throughout.
    """

    kind: str = "identity"
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "power", "inverse"):
            raise InvalidConfig(f"unknown speed law {self.kind!r}")
        if self.kind == "power" and not self.beta > 0:
            raise InvalidConfig("power law needs beta > 0")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity" or (self.kind == "power" and self.beta == 1.0)

    def check(self, x):
        if self.kind == "inverse" and not np.all(np.asarray(x) < 0):
            raise DomainViolation("inverse speed law needs negative mean curvature")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_identity:
            return x.copy()
        if self.kind == "power":
            return np.abs(x) ** (self.beta - 1) * x
        self.check(x)
        return -1.0 / x

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_identity:
            return np.ones_like(x)
        if self.kind == "power":
            return self.beta * np.abs(x) ** (self.beta - 1)
        self.check(x)
        return 1.0 / (x * x)


def gauss_speed(km, kg):
    """Gauss curvature flow: the surface moves with normal speed -k_g."""
    return -np.asarray(kg)


GENERAL_SPEEDS: dict[str, Callable] = {"gauss": gauss_speed}


@dataclass(frozen=True)
class FlowSpec:
    """Scheme selection.

    ``exact`` picks true integration instead of mass lumping (schemes C and
    D only).  ``conserved`` selects the volume-preserving variant (A and
    C_star).  ``speed`` is a general law F(k_m, k_g), either a callable or a
    name from ``GENERAL_SPEEDS``; it is only available for scheme A and is
    applied explicitly.
    """

    scheme: str = "A"
    exact: bool = False
    law: SpeedLaw = field(default_factory=SpeedLaw)
    conserved: bool = False
    speed: Callable | str | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"unknown scheme {self.scheme!r}")
        if self.exact and self.scheme in ("A", "B"):
            raise InvalidConfig(f"scheme {self.scheme} is defined with mass lumping only")
        if self.conserved and self.scheme not in ("A", "C_star"):
            raise InvalidConfig("the volume-preserving variant exists for A and C_star only")
        if self.speed is not None:
            if self.scheme != "A":
                raise InvalidConfig("general speed laws are available for scheme A only")
            if self.conserved or not self.law.is_identity:
                raise InvalidConfig("a general speed law replaces f and the conserved term")
            if isinstance(self.speed, str) and self.speed not in GENERAL_SPEEDS:
                raise InvalidConfig(f"unknown general speed {self.speed!r}")
        if not self.law.is_identity and self.scheme not in ("A", "C_star"):
            raise InvalidConfig("nonlinear speed laws are available for A and C_star only")

    @property
    def speed_fn(self) -> Callable | None:
        if isinstance(self.speed, str):
            return GENERAL_SPEEDS[self.speed]
        return self.speed

    @property
    def linear(self) -> bool:
        """Whether a step is a single linear solve."""
        if self.scheme in ("C_star", "D_star"):
            return False
        return self.law.is_identity

    @property
    def vector_curvature(self) -> bool:
        return self.scheme in ("B", "D", "D_star")

    @property
    def label(self) -> str:
        name = self.scheme
        if self.speed is not None:
            name += "^F"
        elif self.conserved:
            name += "^fV"
        elif not self.law.is_identity:
            name += "^f"
        if self.scheme in ("C", "C_star", "D", "D_star"):
            name += "-exact" if self.exact else "-lumped"
        return name
