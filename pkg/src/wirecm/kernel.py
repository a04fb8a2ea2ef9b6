"""Free-space kernels and quadrature rules shared by every assembly routine.

Time convention is exp(+j*omega*t), so an outgoing spherical wave carries
exp(-j*k*R)/(4*pi*R).  All distances are in metres, impedances in ohms.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import pi

import numpy as np

from .errors import SingularKernelError, ValidationError

#: speed of light in vacuum, m/s
C0 = 299792458.0
#: free-space wave impedance, ohm
ETA0 = 376.730313668


class SingularScheme(Enum):
    """Strategy for integrating nearly-singular segment pairs."""

    SUBTRACTION = "subtraction"
    SELF_TERM_ANALYTIC = "self_term_analytic"


@dataclass(frozen=True)
class Wavenumber:
    """Free-space wavenumber in rad/m.

    The wavelength `lambda0` is derived (2*pi/k) rather than stored, so the
    pair can never fall out of sync.
    """

    k: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.k) or self.k <= 0.0:
            raise ValidationError(f"wavenumber must be positive and finite, got {self.k!r}")

    @property
    def lambda0(self) -> float:
        return 2.0 * pi / self.k

    @classmethod
    def from_wavelength(cls, lambda0: float) -> "Wavenumber":
        if not np.isfinite(lambda0) or lambda0 <= 0.0:
            raise ValidationError(f"wavelength must be positive and finite, got {lambda0!r}")
        return cls(k=2.0 * pi / lambda0)


@dataclass(frozen=True)
class QuadratureSpec:
    """Per-segment Gauss-Legendre order and the near-singularity strategy."""

    points_per_segment: int = 4
    singular_scheme: SingularScheme = SingularScheme.SUBTRACTION

    def __post_init__(self) -> None:
        if int(self.points_per_segment) != self.points_per_segment or self.points_per_segment < 2:
            raise ValidationError(
                f"points_per_segment must be an integer >= 2, got {self.points_per_segment!r}"
            )
        if not isinstance(self.singular_scheme, SingularScheme):
            # accept the plain string spelling for config-file convenience
            try:
                object.__setattr__(self, "singular_scheme", SingularScheme(self.singular_scheme))
            except ValueError as exc:
                raise ValidationError(
                    f"unknown singular_scheme {self.singular_scheme!r}; "
                    f"expected one of {[s.value for s in SingularScheme]}"
                ) from exc


@lru_cache(maxsize=32)
def gauss_rule(n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1], cached and read-only."""
    x, w = np.polynomial.legendre.leggauss(n_points)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def green_from_distance(k: float, dist):
    """exp(-j*k*R)/(4*pi*R) for an array of separations R (no zero guard)."""
    dist = np.asarray(dist)
    return np.exp(-1j * k * dist) / (4.0 * pi * dist)


def scalar_green(r, r_prime, k: Wavenumber):
    """Free-space scalar Green's function between two points.

    Accepts arrays with a trailing xyz axis and broadcasts over leading axes.
    Raises SingularKernelError if any separation is exactly zero; use
    `thin_wire_kernel` where source and observation may coincide.
    """
    r = np.asarray(r, dtype=float)
    rp = np.asarray(r_prime, dtype=float)
    diff = r - rp
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(dist == 0.0):
        raise SingularKernelError("scalar_green evaluated at zero separation")
    return green_from_distance(k.k, dist)


def thin_wire_kernel(source_point_on_axis, obs_point_on_surface, radius: float, k: Wavenumber):
    """Reduced thin-wire kernel: the Green's function at the regularized
    distance R_eff = sqrt(|r_obs - r_src|^2 + radius^2).

    Finite for every input pair, including coincident points, which is what
    makes the thin-wire discretization integrable with ordinary quadrature.
    """
    if not np.isfinite(radius) or radius <= 0.0:
        raise ValidationError(f"wire radius must be positive, got {radius!r}")
    src = np.asarray(source_point_on_axis, dtype=float)
    obs = np.asarray(obs_point_on_surface, dtype=float)
    diff = obs - src
    r_eff = np.sqrt(np.sum(diff * diff, axis=-1) + radius * radius)
    return green_from_distance(k.k, r_eff)
