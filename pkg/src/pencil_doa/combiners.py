"""DFT-codebook analog combiners for hybrid receivers.

Covers both architectures: fully-connected (every RF chain sees all antennas,
power split across chains) and partially-connected (disjoint subarrays of
``m_rf`` antennas per RF chain). Also provides the subarray gain kernel and
the spatial sectors swept by the partially-connected codebook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import ConfigError, ShapeError, UnsupportedGeometry

FC = "fc"
PC = "pc"


@dataclass(frozen=True)
class HadConfig:
    """Hybrid receiver shape: architecture, antenna count M, RF-chain count L."""

    architecture: str
    num_antennas: int
    rf_chains: int

    def __post_init__(self):
        arch = self.architecture.lower()
        object.__setattr__(self, "architecture", arch)
        if arch not in (FC, PC):
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        m, l = self.num_antennas, self.rf_chains
        if l < 1 or l >= m:
            raise ConfigError("rf_chains must satisfy 1 <= L < M")
        if m % l != 0:
            raise ConfigError("num_antennas must be a multiple of rf_chains")

    @property
    def m_rf(self) -> int:
        """Antennas per subarray: M for FC, M/L for PC."""
        return self.num_antennas if self.architecture == FC else self.num_antennas // self.rf_chains

    @property
    def n_combiners(self) -> int:
        """Codebook size N = M/L for either architecture."""
        return self.num_antennas // self.rf_chains

    @property
    def alpha(self) -> float:
        """Per-entry magnitude: 1/sqrt(L) under FC power splitting, 1 under PC."""
        return 1.0 / math.sqrt(self.rf_chains) if self.architecture == FC else 1.0


@dataclass(frozen=True)
class CombinerSet:
    """Ordered analog combiners plus the wrapped DFT phase grid behind them."""

    matrices: tuple
    phase_grid: np.ndarray
    architecture: str
    alpha: float
    m_rf: int

    def __len__(self) -> int:
        return len(self.matrices)

    @property
    def projector_scale(self) -> float:
        """1/(alpha^2 * m_rf), the normalization turning W W^H into a projector."""
        return 1.0 / (self.alpha**2 * self.m_rf)


@dataclass(frozen=True)
class GainModel:
    """Subarray gain parameters and the inter-block phase rule."""

    m_rf: int
    alpha: float
    psi_rule: str  # FC blocks share phase (psi = 0); PC blocks advance by m_rf*mu

    @classmethod
    def from_had(cls, cfg: HadConfig) -> "GainModel":
        return cls(m_rf=cfg.m_rf, alpha=cfg.alpha, psi_rule=cfg.architecture)

    def psi(self, mu: float, ell: int) -> float:
        """Phase of subarray ``ell`` (1-based) relative to the first."""
        if self.psi_rule == PC:
            return (ell - 1) * mu * self.m_rf
        return 0.0


def dft_phase(n: int, m_rf: int) -> float:
    """Phase of the n-th DFT column (1-based), wrapped past the half-way index.

    Returns 2*pi*(n-1)/m_rf for the first half of the indices and that value
    minus 2*pi for the rest (for odd sizes the split index rounds up). The
    wrap only relabels the phase; exp(1j*phi) is unchanged.
    """
    if not 1 <= n <= m_rf:
        raise IndexError(f"column index {n} outside 1..{m_rf}")
    phi = 2.0 * np.pi * (n - 1) / m_rf
    if n > (m_rf + 1) // 2:
        phi -= 2.0 * np.pi
    return phi


def dft_column(n: int, m_rf: int) -> np.ndarray:
    """n-th DFT column (1-based), entries exp(1j*(m-1)*phi_n)."""
    return np.exp(1j * np.arange(m_rf) * dft_phase(n, m_rf))


def build_fc_codebook(cfg: HadConfig) -> CombinerSet:
    """Fully-connected codebook: N matrices of L consecutive DFT columns.

    Each matrix is scaled by 1/sqrt(L) for power splitting; the union of all
    columns is the full M-point DFT matrix, so the set resolves the identity.
    """
    if cfg.architecture != FC:
        raise ConfigError("config does not describe a fully-connected receiver")
    m = cfg.num_antennas
    phases = np.array([dft_phase(c, m) for c in range(1, m + 1)])
    dft = np.exp(1j * np.outer(np.arange(m), phases))
    l = cfg.rf_chains
    matrices = tuple(
        dft[:, n * l:(n + 1) * l] / math.sqrt(l) for n in range(cfg.n_combiners)
    )
    return CombinerSet(matrices=matrices, phase_grid=phases,
                       architecture=FC, alpha=cfg.alpha, m_rf=cfg.m_rf)


def build_pc_codebook(cfg: HadConfig) -> CombinerSet:
    """Partially-connected single-phase codebook: N block-diagonal matrices.

    Matrix n repeats the n-th DFT column of the subarray across all L diagonal
    blocks, so every RF chain applies the identical phase progression.
    """
    if cfg.architecture != PC:
        raise ConfigError("config does not describe a partially-connected receiver")
    m_rf = cfg.m_rf
    phases = np.array([dft_phase(n, m_rf) for n in range(1, m_rf + 1)])
    matrices = []
    for n in range(1, cfg.n_combiners + 1):
        col = dft_column(n, m_rf).reshape(-1, 1)
        matrices.append(block_diag(*([col] * cfg.rf_chains)))
    return CombinerSet(matrices=tuple(matrices), phase_grid=phases,
                       architecture=PC, alpha=cfg.alpha, m_rf=cfg.m_rf)


def build_codebook(cfg: HadConfig) -> CombinerSet:
    return build_fc_codebook(cfg) if cfg.architecture == FC else build_pc_codebook(cfg)


def gain(mu, phi, model: GainModel):
    """Subarray gain g(mu - phi): Dirichlet kernel with linear phase.

    Equals sum_{m=1..m_rf} exp(1j*(m-1)*(mu-phi)); the closed form
    sin(m_rf*d/2)/sin(d/2) * exp(1j*(m_rf-1)*d/2) is used away from its
    removable singularities, with the direct sum as fallback near them.
    """
    delta = np.asarray(mu, dtype=float) - np.asarray(phi, dtype=float)
    scalar = delta.ndim == 0
    delta = np.atleast_1d(delta)
    den = np.sin(delta / 2.0)
    small = np.abs(den) < 5e-10
    safe = np.where(small, 1.0, den)
    out = np.sin(model.m_rf * delta / 2.0) / safe \
        * np.exp(1j * (model.m_rf - 1) * delta / 2.0)
    if np.any(small):
        idx = np.nonzero(small)[0]
        m = np.arange(model.m_rf)
        out[idx] = np.exp(1j * np.outer(delta[idx], m)).sum(axis=1)
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class SectorSet:
    """Angular sectors (degrees) swept by the partially-connected codebook.

    Sector n is the list of half-open intervals (lo, hi] whose phases fall
    within pi/m_rf of the n-th DFT phase; the sector that straddles broadside
    ambiguity at the array edge splits into two intervals.
    """

    intervals: tuple  # per combiner, tuple of (lo_deg, hi_deg] pieces
    m_rf: int

    def index_of(self, theta_deg: float) -> int:
        """0-based index of the sector containing the angle; -1 if none."""
        for n, pieces in enumerate(self.intervals):
            for lo, hi in pieces:
                if lo < theta_deg <= hi:
                    return n
        return -1


def sectors(cfg: HadConfig, spacing_ratio: float = 0.5) -> SectorSet:
    """Spatial sectors of the PC codebook for half-wavelength spacing.

    Each of the N sectors spans a phase width of 2*pi/m_rf. Only defined for
    spacing_ratio = 0.5; other spacings have no published sector formula.
    """
    if cfg.architecture != PC:
        raise ConfigError("sectors are defined for the partially-connected codebook")
    if abs(spacing_ratio - 0.5) > 1e-12:
        raise UnsupportedGeometry("sectors require half-wavelength spacing")
    m_rf = cfg.m_rf
    n_total = cfg.n_combiners
    upper = (n_total + 1) // 2  # last unwrapped index; rounds up for odd sizes
    asind = lambda x: math.degrees(math.asin(x))
    intervals = []
    for n in range(1, n_total + 1):
        if n <= upper:
            pieces = ((asind((2 * n - 3) / m_rf), asind((2 * n - 1) / m_rf)),)
        elif n == upper + 1:
            pieces = (
                (-90.0, asind((2 * n - 1) / m_rf - 2.0)),
                (asind((2 * n - 3) / m_rf), 90.0),
            )
        else:
            pieces = ((asind((2 * n - 3) / m_rf - 2.0), asind((2 * n - 1) / m_rf - 2.0)),)
        intervals.append(pieces)
    return SectorSet(intervals=tuple(intervals), m_rf=m_rf)


def apply_combiner(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Analog combining stage: returns W^H X."""
    w = np.asarray(w)
    x = np.asarray(x)
    if w.ndim != 2 or x.ndim != 2 or w.shape[0] != x.shape[0]:
        raise ShapeError(f"combiner {w.shape} incompatible with block {x.shape}")
    return w.conj().T @ x
