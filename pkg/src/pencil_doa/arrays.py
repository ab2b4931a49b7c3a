"""Uniform linear array model: steering, source/noise synthesis, RMSE bookkeeping.

Public APIs take and return angles in degrees; internal phase math is in
radians. The inter-element phase of a source at angle ``theta`` is
``mu = 2*pi*(spacing/wavelength)*sin(theta)``.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSources,
    EmptyInput,
    ShapeError,
    TrialArityError,
)

SnapshotBlock = np.ndarray
"""Complex channels-by-snapshots matrix (raw, combined, or aggregated samples)."""


def _encode_label(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream labels; equal specs reproduce draws bit for bit.

    Independent streams are obtained by extending the label tuple, e.g.
    ``spec.child("noise", segment_index)``.
    """

    seed: int
    labels: tuple = ()

    def child(self, *extra) -> "RngSpec":
        return RngSpec(self.seed, self.labels + tuple(extra))

    def generator(self) -> np.random.Generator:
        crumbs = [self.seed & 0xFFFFFFFFFFFFFFFF]
        crumbs.extend(_encode_label(label) for label in self.labels)
        return np.random.default_rng(np.random.SeedSequence(crumbs))


@dataclass(frozen=True)
class ArrayConfig:
    """ULA geometry: element count and spacing as a fraction of wavelength."""

    num_antennas: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if self.num_antennas < 2:
            raise ConfigError("num_antennas must be at least 2")
        if not 0.0 < self.spacing_ratio <= 0.5:
            raise ConfigError("spacing_ratio must lie in (0, 0.5]")


@dataclass(frozen=True)
class SourceSet:
    """True DoAs in degrees and per-source average powers (linear scale)."""

    angles_deg: tuple
    powers: tuple

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "powers", powers)
        if len(angles) == 0:
            raise ConfigError("at least one source is required")
        if len(angles) != len(powers):
            raise ConfigError("angles and powers must have equal length")
        if any(not -90.0 < a < 90.0 for a in angles):
            raise ConfigError("angles must lie strictly inside (-90, 90) degrees")
        if any(p <= 0.0 for p in powers):
            raise ConfigError("powers must be positive")
        if len(set(angles)) != len(angles):
            raise DegenerateSources("duplicate source angles")

    @classmethod
    def from_snr_db(cls, angles_deg, snr_db) -> "SourceSet":
        """Build a source set from per-source receive SNRs (unit noise variance)."""
        snrs = np.atleast_1d(np.asarray(snr_db, dtype=float))
        if snrs.size == 1 and len(tuple(angles_deg)) > 1:
            snrs = np.repeat(snrs, len(tuple(angles_deg)))
        return cls(tuple(angles_deg), tuple(10.0 ** (s / 10.0) for s in snrs))

    @property
    def count(self) -> int:
        return len(self.angles_deg)

    @property
    def power_matrix(self) -> np.ndarray:
        return np.diag(self.powers)


@dataclass(frozen=True)
class SteeringMatrix:
    """Array response columns (one per source) and the phases that built them."""

    entries: np.ndarray  # (M, R) complex, row m is exp(1j*m*mu_r)
    phases: np.ndarray  # (R,) mu_r in radians


def phase_from_angle(theta_deg, spacing_ratio: float):
    """Inter-element phase mu for angle(s) in degrees."""
    return 2.0 * np.pi * spacing_ratio * np.sin(np.radians(theta_deg))


def angle_from_phase(mu, spacing_ratio: float, dilation: int = 1):
    """Inverse of :func:`phase_from_angle`; ``dilation`` scales the effective spacing."""
    return np.degrees(np.arcsin(np.asarray(mu) / (2.0 * np.pi * spacing_ratio * dilation)))


def steering_matrix(cfg: ArrayConfig, sources: SourceSet) -> SteeringMatrix:
    """Assemble the M-by-R steering matrix for the given sources.

    Column r holds ``exp(1j*(m-1)*mu_r)`` for antenna index ``m``; every entry
    has unit modulus and the first row is all ones.
    """
    mu = np.asarray(phase_from_angle(np.array(sources.angles_deg), cfg.spacing_ratio))
    # spacing_ratio <= 0.5 keeps |mu| < pi for angles inside (-90, 90)
    assert np.all(np.abs(mu) < np.pi)
    m_idx = np.arange(cfg.num_antennas)
    entries = np.exp(1j * np.outer(m_idx, mu))
    return SteeringMatrix(entries=entries, phases=mu)


def steering_vector(cfg: ArrayConfig, theta_deg: float) -> np.ndarray:
    """Single steering column for one angle in degrees."""
    mu = float(phase_from_angle(theta_deg, cfg.spacing_ratio))
    return np.exp(1j * np.arange(cfg.num_antennas) * mu)


def generate_signals(sources: SourceSet, snapshots: int, segments: int,
                     periodic: bool, rng: RngSpec) -> list:
    """Draw per-segment R-by-K source signal blocks.

    Entries are zero-mean circularly symmetric complex Gaussians with
    per-row variance equal to the source power. With ``periodic=True`` a
    single draw is replicated across all segments.
    """
    if snapshots < 1 or segments < 1:
        raise ConfigError("snapshots and segments must be positive")
    gen = rng.generator()
    scale = np.sqrt(np.asarray(sources.powers, dtype=float) / 2.0)[:, None]

    def draw():
        shape = (sources.count, snapshots)
        return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))

    if periodic:
        block = draw()
        return [block.copy() for _ in range(segments)]
    return [draw() for _ in range(segments)]


def generate_noise(channels: int, snapshots: int, rng: RngSpec) -> SnapshotBlock:
    """Unit-variance circularly symmetric complex Gaussian noise block."""
    if channels < 1 or snapshots < 1:
        raise ConfigError("channels and snapshots must be positive")
    gen = rng.generator()
    shape = (channels, snapshots)
    return np.sqrt(0.5) * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def receive_fd(steering: SteeringMatrix, signals: np.ndarray,
               noise: SnapshotBlock) -> SnapshotBlock:
    """Fully-digital receive model: steering times signals plus noise."""
    a = steering.entries
    signals = np.asarray(signals)
    noise = np.asarray(noise)
    if signals.ndim != 2 or a.shape[1] != signals.shape[0]:
        raise ShapeError(f"signal block {signals.shape} does not match {a.shape[1]} sources")
    if noise.shape != (a.shape[0], signals.shape[1]):
        raise ShapeError(f"noise block {noise.shape} does not match output shape")
    return a @ signals + noise


def paired_squared_errors(estimates_deg, truth_deg) -> np.ndarray:
    """Squared errors after sorting both lists ascending and pairing positionally."""
    est = np.sort(np.asarray(estimates_deg, dtype=float))
    tru = np.sort(np.asarray(truth_deg, dtype=float))
    if est.shape != tru.shape:
        raise TrialArityError(f"expected {tru.size} estimates, got {est.size}")
    return (est - tru) ** 2


def rmse(estimates, truth: SourceSet) -> float:
    """Root-mean-square DoA error in degrees over a list of per-trial estimates.

    Estimates are matched to the truth by ascending-angle sort within each
    trial; every trial must supply exactly one estimate per source.
    """
    trials = list(estimates)
    if not trials:
        raise EmptyInput("no trials supplied")
    total = 0.0
    for trial in trials:
        if len(trial) != truth.count:
            raise TrialArityError(
                f"trial has {len(trial)} estimates for {truth.count} sources")
        total += float(paired_squared_errors(trial, truth.angles_deg).sum())
    return math.sqrt(total / (truth.count * len(trials)))
