"""Experiment configuration: one INI-style text file, physical lengths in
units of the free-space wavelength.

Sections and keys are fixed; unknown ones are rejected so a typo cannot
silently fall back to a default.  Every numeric is validated on load — the
commands create no output files until the whole config has parsed.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .kernel import QuadratureSpec, SingularScheme, Wavenumber

_KNOWN_KEYS = {
    "wave": {"wavelength_m"},
    "reference": {"length_lambda0", "radius_lambda0", "segments_per_lambda0"},
    "sweep": {"lengths_lambda0", "mode_counts"},
    "incidence": {"propagation", "polarization", "amplitude_v_per_m"},
    "observation": {"point_lambda0"},
    "numerics": {
        "quadrature_points",
        "singular_scheme",
        "rank_tolerance",
        "condition_limit",
    },
    "output": {"directory"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (lengths in lambda0 unless suffixed)."""

    wavelength_m: float = 1.0
    ref_length: float = 2.0
    ref_radius: float = 0.001
    segments_per_lambda0: int = 20
    sweep_lengths: tuple[float, ...] = (
        0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
        1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0,
    )
    mode_counts: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12)
    propagation: tuple[float, float, float] = (1.0, 0.0, -1.0)
    polarization: tuple[float, float, float] = (1.0, 0.0, 1.0)
    amplitude: float = 1.0
    observation_points: tuple[tuple[float, float, float], ...] = ((0.5, 0.0, 0.5),)
    quadrature_points: int = 4
    singular_scheme: str = SingularScheme.SUBTRACTION.value
    rank_tolerance: float = 1e-12
    condition_limit: float = 1e14
    output_dir: str = "out"

    def __post_init__(self) -> None:
        if not (np.isfinite(self.wavelength_m) and self.wavelength_m > 0.0):
            raise ValidationError(f"wavelength must be positive, got {self.wavelength_m!r}")
        if not (np.isfinite(self.ref_length) and self.ref_length > 0.0):
            raise ValidationError(f"reference length must be positive, got {self.ref_length!r}")
        if not (np.isfinite(self.ref_radius) and self.ref_radius > 0.0):
            raise ValidationError(f"wire radius must be positive, got {self.ref_radius!r}")
        if self.segments_per_lambda0 < 2:
            raise ValidationError(
                f"segments_per_lambda0 must be at least 2, got {self.segments_per_lambda0}"
            )
        if not self.sweep_lengths:
            raise ValidationError("sweep must contain at least one length")
        for l in self.sweep_lengths:
            if not (np.isfinite(l) and 0.0 < l <= self.ref_length):
                raise ValidationError(
                    f"sweep length {l!r} outside (0, reference length {self.ref_length}]"
                )
        if not self.mode_counts or any(n < 1 for n in self.mode_counts):
            raise ValidationError(f"mode_counts must be positive integers, got {self.mode_counts}")
        if not self.observation_points:
            raise ValidationError("need at least one observation point")
        if not (np.isfinite(self.rank_tolerance) and 0.0 < self.rank_tolerance < 1.0):
            raise ValidationError(f"rank_tolerance must lie in (0, 1), got {self.rank_tolerance!r}")
        if not (np.isfinite(self.condition_limit) and self.condition_limit > 1.0):
            raise ValidationError(f"condition_limit must exceed 1, got {self.condition_limit!r}")
        # delegate the remaining checks to the domain types
        self.wavenumber()
        self.quadrature()

    # -- unit conversions -------------------------------------------------

    def wavenumber(self) -> Wavenumber:
        return Wavenumber.from_wavelength(self.wavelength_m)

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(
            points_per_segment=self.quadrature_points,
            singular_scheme=self.singular_scheme,
        )

    def ref_length_m(self) -> float:
        return self.ref_length * self.wavelength_m

    def ref_radius_m(self) -> float:
        return self.ref_radius * self.wavelength_m

    def ref_segments(self) -> int:
        return max(3, int(round(self.segments_per_lambda0 * self.ref_length)))

    def sweep_lengths_m(self) -> tuple[float, ...]:
        return tuple(l * self.wavelength_m for l in self.sweep_lengths)

    def observation_points_m(self) -> np.ndarray:
        return np.asarray(self.observation_points, dtype=float) * self.wavelength_m


def _parse_floats(text: str, expect: int | None = None) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"could not parse numbers from {text!r}: {exc}") from None
    if expect is not None and len(vals) != expect:
        raise ValidationError(f"expected {expect} numbers, got {len(vals)} in {text!r}")
    return vals


def _parse_lengths(text: str) -> tuple[float, ...]:
    """Either an explicit list ('0.5 0.8 1.3') or a range 'start:step:stop'."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"length range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0.0 or stop < start:
            raise ValidationError(f"bad length range {text!r}")
        n = int(round((stop - start) / step))
        vals = tuple(round(start + i * step, 12) for i in range(n + 1))
        return vals
    return _parse_floats(text)


def _parse_points(text: str) -> tuple[tuple[float, float, float], ...]:
    rows = [row for row in text.split(";") if row.strip()]
    return tuple(tuple(_parse_floats(row, expect=3)) for row in rows)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with p.open() as fh:
            parser.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ValidationError(f"could not parse config {p}: {exc}") from None

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ValidationError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ValidationError(f"unknown key {key!r} in section [{section}]")

    kwargs: dict = {}

    def grab(section: str, key: str, conv, target: str) -> None:
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                kwargs[target] = conv(raw)
            except ValidationError:
                raise
            except ValueError as exc:
                raise ValidationError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None

    grab("wave", "wavelength_m", float, "wavelength_m")
    grab("reference", "length_lambda0", float, "ref_length")
    grab("reference", "radius_lambda0", float, "ref_radius")
    grab("reference", "segments_per_lambda0", int, "segments_per_lambda0")
    grab("sweep", "lengths_lambda0", _parse_lengths, "sweep_lengths")
    grab("sweep", "mode_counts", lambda s: tuple(int(x) for x in s.split()), "mode_counts")
    grab("incidence", "propagation", lambda s: _parse_floats(s, 3), "propagation")
    grab("incidence", "polarization", lambda s: _parse_floats(s, 3), "polarization")
    grab("incidence", "amplitude_v_per_m", float, "amplitude")
    grab("observation", "point_lambda0", _parse_points, "observation_points")
    grab("numerics", "quadrature_points", int, "quadrature_points")
    grab("numerics", "singular_scheme", str, "singular_scheme")
    grab("numerics", "rank_tolerance", float, "rank_tolerance")
    grab("numerics", "condition_limit", float, "condition_limit")
    grab("output", "directory", str, "output_dir")

    return ExperimentConfig(**kwargs)
