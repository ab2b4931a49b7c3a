"""End-to-end DoA estimation pipelines.

Three estimators share the pencil core:

* fully-digital baseline on raw antenna snapshots;
* periodicity-based aggregation that cycles an exhaustive codebook over a
  repeated signal so a hybrid receiver yields a virtual full-array block;
* single-phase partially-connected estimation on a dilated virtual array,
  followed by grating-lobe disambiguation via an SNR scan.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .arrays import ArrayConfig, SnapshotBlock, phase_from_angle
from .combiners import (
    PC,
    CombinerSet,
    HadConfig,
    apply_combiner,
    build_pc_codebook,
)
from .errors import (
    AmbiguousGeometryError,
    ConfigError,
    LowSnrWarning,
    RankError,
    ShapeError,
)
from .pencil import (
    PencilConfig,
    augment,
    eigen_to_angles,
    pencil_eigenvalues,
    split_pencil,
    svd_denoise,
)


def _pencil_pipeline(snapshots, cfg: PencilConfig, spacing_ratio: float,
                     dilation: int = 1) -> np.ndarray:
    """augment -> denoise -> split -> eigenvalues -> angles, sorted ascending."""
    stack = augment(snapshots, cfg.xi)
    denoised, _ = svd_denoise(stack, cfg.num_sources)
    pair = split_pencil(denoised, cfg.xi, stack.num_blocks)
    eig = pencil_eigenvalues(pair, cfg.num_sources)
    return eigen_to_angles(eig, spacing_ratio, dilation=dilation)


def estimate_fd_mpm(x: SnapshotBlock, cfg: PencilConfig,
                    array: ArrayConfig) -> np.ndarray:
    """DoAs from a fully-digital snapshot block (one Hankel per column)."""
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != cfg.channel_count or x.shape[0] != array.num_antennas:
        raise ShapeError(
            f"block with {x.shape[0]} channels does not match configuration")
    return _pencil_pipeline([x[:, k] for k in range(x.shape[1])], cfg,
                            array.spacing_ratio)


@dataclass(frozen=True)
class PmpmPlan:
    """Codebook plus the matched digital combiners that undo the analog stage."""

    codebook: CombinerSet
    snapshots_per_segment: int

    @property
    def digital_combiners(self) -> tuple:
        scale = self.codebook.projector_scale
        return tuple(scale * w for w in self.codebook.matrices)


def pmpm_aggregate(q_blocks, plan: PmpmPlan) -> SnapshotBlock:
    """Sum the digitally re-projected combiner outputs into one M-by-K block.

    With a signal repeated across segments, the projector completeness of the
    codebook makes the noiseless aggregate equal the full-array receive block.
    """
    q_blocks = list(q_blocks)
    digital = plan.digital_combiners
    if len(q_blocks) != len(digital):
        raise ShapeError(
            f"{len(q_blocks)} combiner outputs for a codebook of {len(digital)}")
    total = None
    for w_d, q in zip(digital, q_blocks):
        q = np.asarray(q)
        if q.ndim != 2 or q.shape[0] != w_d.shape[1]:
            raise ShapeError(f"combiner output {q.shape} has wrong channel count")
        term = w_d @ q
        total = term if total is None else total + term
    return total


def estimate_pmpm(segments, codebook: CombinerSet, cfg: PencilConfig,
                  array: ArrayConfig) -> np.ndarray:
    """DoAs from per-segment antenna blocks under a periodic source signal.

    Applies combiner n to segment n, aggregates, and runs the full-array
    pencil on the virtual block. The caller guarantees the signal repeats
    across the segments; the signal itself is never needed.
    """
    segments = list(segments)
    if len(segments) != len(codebook):
        raise ShapeError(
            f"{len(segments)} segments for a codebook of {len(codebook)}")
    k = np.asarray(segments[0]).shape[1]
    plan = PmpmPlan(codebook=codebook, snapshots_per_segment=k)
    q_blocks = [apply_combiner(w, x) for w, x in zip(codebook.matrices, segments)]
    y = pmpm_aggregate(q_blocks, plan)
    return estimate_fd_mpm(y, cfg, array)


@dataclass(frozen=True)
class AmbiguitySet:
    """Grating-lobe phase candidates, m_rf per source, grouped by source."""

    per_source: tuple  # tuple of ndarrays, each ascending in (-pi, pi]
    m_rf: int
    spacing_ratio: float

    @property
    def flat(self) -> np.ndarray:
        """Source-major concatenation of all candidates."""
        return np.concatenate(self.per_source)

    @property
    def num_sources(self) -> int:
        return len(self.per_source)


def ambiguity_set(base_angles_deg, m_rf: int,
                  spacing_ratio: float) -> AmbiguitySet:
    """All phases indistinguishable from each base estimate on the dilated array.

    For each source the candidates are mu + 2*pi*i/m_rf over the integer range
    that keeps them inside (-pi, pi]; the half-open boundary excludes -pi, so
    exactly m_rf candidates survive per source.
    """
    per_source = []
    for theta in np.atleast_1d(np.asarray(base_angles_deg, dtype=float)):
        mu = float(phase_from_angle(theta, spacing_ratio))
        i_low = math.ceil(m_rf / 2.0 * (-1.0 - mu / np.pi) - 1e-9)
        i_high = math.floor(m_rf / 2.0 * (1.0 - mu / np.pi) + 1e-9)
        cands = mu + 2.0 * np.pi * np.arange(i_low, i_high + 1) / m_rf
        cands = cands[(cands > -np.pi + 1e-9) & (cands <= np.pi + 1e-9)]
        if cands.size > m_rf:
            cands = cands[-m_rf:]  # drop the -pi duplicate of +pi
        if cands.size != m_rf:
            raise AmbiguousGeometryError(
                f"expected {m_rf} grating-lobe candidates, found {cands.size}")
        per_source.append(np.sort(cands))
    return AmbiguitySet(per_source=tuple(per_source), m_rf=m_rf,
                        spacing_ratio=spacing_ratio)


def _steered_block(mu: float, m_rf: int) -> np.ndarray:
    return np.exp(1j * np.arange(m_rf) * mu).reshape(-1, 1)


@dataclass(frozen=True)
class DisambiguationPlan:
    """Candidate-steered block-diagonal combiners for the SNR scan.

    Slot j (1-based) of the flattened candidate list lives in combiner
    g = ceil(j/L) at block ell = j - (g-1)L. When the candidate count is not
    a multiple of L, the final combiner repeats the last candidate to fill.
    """

    combiners: tuple
    slot_phases: np.ndarray
    snapshots_per_combiner: int
    padded: bool

    @property
    def num_combiners(self) -> int:
        return len(self.combiners)


def build_disambiguation(amb: AmbiguitySet, cfg: HadConfig,
                         snapshots: int) -> DisambiguationPlan:
    """One combiner per L candidates, each block steered to its candidate phase."""
    if cfg.architecture != PC:
        raise ConfigError("disambiguation combiners require the PC architecture")
    flat = amb.flat
    l = cfg.rf_chains
    g_total = math.ceil(flat.size / l)
    padded = flat.size % l != 0
    slots = np.concatenate([flat, np.full(g_total * l - flat.size, flat[-1])])
    combiners = tuple(
        block_diag(*[_steered_block(slots[g * l + ell], cfg.m_rf)
                     for ell in range(l)])
        for g in range(g_total)
    )
    return DisambiguationPlan(combiners=combiners, slot_phases=slots,
                              snapshots_per_combiner=snapshots, padded=padded)


def resolve_ambiguity(plan: DisambiguationPlan, segments,
                      amb: AmbiguitySet) -> np.ndarray:
    """Pick each source's candidate by the highest per-chain output SNR.

    The metric for candidate slot (g, ell) is the mean output power of RF
    chain ell under combiner g, normalized by the beamforming gain, minus the
    unit noise floor. Ties break toward the candidate of smaller phase
    magnitude. Returns one angle per source, in source order.
    """
    segments = list(segments)
    if len(segments) != plan.num_combiners:
        raise ShapeError(
            f"{len(segments)} segments for {plan.num_combiners} combiners")
    outputs = [apply_combiner(w, np.asarray(x))
               for w, x in zip(plan.combiners, segments)]
    l = plan.combiners[0].shape[1]
    m_rf = amb.m_rf
    angles = np.empty(amb.num_sources)
    for r, cands in enumerate(amb.per_source):
        metrics = np.empty(m_rf)
        for i in range(m_rf):
            j = r * m_rf + i  # 0-based flat slot
            g, ell = divmod(j, l)
            row = outputs[g][ell]
            metrics[i] = np.mean(np.abs(row) ** 2) / m_rf - 1.0
        if np.all(metrics <= 0.0):
            warnings.warn(f"all candidates for source {r} at or below the "
                          "noise floor", LowSnrWarning, stacklevel=2)
        best = metrics.max()
        ties = np.nonzero(metrics == best)[0]
        pick = ties[np.argmin(np.abs(cands[ties]))]
        mu_hat = cands[pick]
        angles[r] = math.degrees(
            math.asin(mu_hat / (2.0 * np.pi * amb.spacing_ratio)))
    return angles


def estimate_spc_mpm(segments, disambiguation_block: SnapshotBlock,
                     had: HadConfig, cfg: PencilConfig, array: ArrayConfig,
                     codebook: CombinerSet | None = None) -> np.ndarray:
    """Two-stage DoA estimation for a partially-connected receiver.

    Stage 1 runs the single-phase codebook over the segments and solves the
    pencil on the L-chain outputs, whose virtual array has its spacing
    dilated by m_rf; stage 2 resolves the resulting grating-lobe ambiguity
    with candidate-steered combiners applied to a fresh snapshot budget.

    ``segments`` holds one raw M-by-K antenna block per codebook entry;
    ``disambiguation_block`` is the raw M-by-K2_total block consumed by the
    SNR scan. Sources whose phases coincide modulo 2*pi/m_rf share a virtual
    steering vector and raise AmbiguousGeometryError.
    """
    if had.architecture != PC:
        raise ConfigError("single-phase estimation requires the PC architecture")
    if cfg.channel_count != had.rf_chains:
        raise ConfigError("pencil channel count must equal the RF-chain count")
    codebook = codebook if codebook is not None else build_pc_codebook(had)
    segments = list(segments)
    if len(segments) != len(codebook):
        raise ShapeError(
            f"{len(segments)} segments for a codebook of {len(codebook)}")

    snapshots = []
    for w, x in zip(codebook.matrices, segments):
        q = apply_combiner(w, np.asarray(x))
        snapshots.extend(q[:, k] for k in range(q.shape[1]))
    try:
        base = _pencil_pipeline(snapshots, cfg, array.spacing_ratio,
                                dilation=had.m_rf)
    except RankError as exc:
        raise AmbiguousGeometryError(
            "pencil produced fewer distinct modes than sources; two sources "
            "may share a virtual steering vector") from exc

    amb = ambiguity_set(base, had.m_rf, array.spacing_ratio)
    block = np.asarray(disambiguation_block)
    g_total = math.ceil(had.m_rf * cfg.num_sources / had.rf_chains)
    if block.ndim != 2 or block.shape[0] != had.num_antennas:
        raise ShapeError("disambiguation block must be M by K2")
    if block.shape[1] < g_total:
        raise ConfigError(
            f"disambiguation budget {block.shape[1]} below combiner count {g_total}")
    k2 = block.shape[1] // g_total
    plan = build_disambiguation(amb, had, k2)
    chunks = [block[:, g * k2:(g + 1) * k2] for g in range(g_total)]
    return np.sort(resolve_ambiguity(plan, chunks, amb))
