"""Monte-Carlo experiment harness: configuration, presets, execution, CSV.

A run sweeps one axis (snr, theta, snapshots, or separation), executes D
seeded trials per sweep point, and reports pooled RMSE next to the matching
root bound. Per-trial RNG streams derive from (seed, sweep index, trial
index), so results are identical for any worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .arrays import (
    ArrayConfig,
    RngSpec,
    SourceSet,
    generate_noise,
    generate_signals,
    paired_squared_errors,
    receive_fd,
    steering_matrix,
)
from .combiners import HadConfig, build_codebook, build_pc_codebook
from .crlb import CrlbInputs, crlb_fd, crlb_spc
from .errors import ConfigError, ESTIMATOR_FAILURES
from .estimators import estimate_fd_mpm, estimate_pmpm, estimate_spc_mpm
from .pencil import PencilConfig

ESTIMATOR_SCENARIOS = ("fd_mpm", "pmpm_fc", "pmpm_pc", "spc_mpm")
CRLB_SCENARIOS = ("crlb_fd", "crlb_spc")
SCENARIOS = ESTIMATOR_SCENARIOS + CRLB_SCENARIOS
SWEEP_AXES = ("snr", "theta", "snapshots", "separation")

THREADS_ENV = "PENCIL_DOA_THREADS"

# Records whose failure share exceeds this carry the sentinel RMSE of -1.
FAILURE_SHARE_LIMIT = 0.2
SENTINEL_RMSE = -1.0


@dataclass
class ExperimentConfig:
    """One experiment: scenario, geometry, sources, snapshot budget, sweep."""

    scenario: str
    m: int = 32
    l: int = 8
    spacing_ratio: float = 0.5
    angles_deg: tuple = (0.0,)
    powers: tuple | None = None
    snr_db: tuple | None = (20.0,)
    snapshots: int = 128
    split_divisor: int = 8
    xi: int | None = None
    sweep: str = "snr"
    grid: tuple = (20.0,)
    trials: int = 200
    seed: int = 0
    random_theta: bool = False
    edge_offset_deg: float = 1.8

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: {self.scenario!r} not in {SCENARIOS}")
        if self.sweep not in SWEEP_AXES:
            raise ConfigError(f"sweep: {self.sweep!r} not in {SWEEP_AXES}")
        if not self.grid:
            raise ConfigError("grid: sweep grid must be non-empty")
        if self.m < 2:
            raise ConfigError("m: need at least two antennas")
        if not 0.0 < self.spacing_ratio <= 0.5:
            raise ConfigError("spacing_ratio: must lie in (0, 0.5]")
        if self.trials < 1:
            raise ConfigError("trials: must be positive")
        if self.snapshots < 1:
            raise ConfigError("snapshots: must be positive")
        if self.split_divisor < 2:
            raise ConfigError("split_divisor: must be at least 2")
        if self._needs_had():
            if self.l < 1 or self.l >= self.m or self.m % self.l:
                raise ConfigError("l: RF chains must divide m and satisfy L < M")
        if self.sweep == "snr":
            if self.powers is not None and self.snr_db is not None:
                raise ConfigError("sources: powers and snr_db are exclusive")
        elif (self.powers is None) == (self.snr_db is None):
            raise ConfigError("sources: provide exactly one of powers or snr_db")
        if not self.random_theta and not self.angles_deg:
            raise ConfigError("angles_deg: at least one source angle is required")
        if self.sweep == "theta" and len(self.angles_deg) != 1:
            raise ConfigError("angles_deg: theta sweep expects a single source")
        if self.sweep in ("theta", "separation") and self.random_theta:
            raise ConfigError("random_theta: incompatible with an angle sweep")
        if self.random_theta and self.scenario in CRLB_SCENARIOS:
            raise ConfigError("random_theta: bounds need fixed source angles")

    def _needs_had(self) -> bool:
        return self.scenario not in ("fd_mpm", "crlb_fd")


@dataclass(frozen=True)
class ResultRecord:
    """One sweep point: pooled RMSE, matching root bound, failure accounting."""

    sweep_value: float
    scenario: str
    rmse_deg: float | None
    root_crlb_deg: float | None
    trials: int
    failures: int
    wall_ms: int


@dataclass(frozen=True)
class _Point:
    sweep_value: float
    ktilde: int
    angles: tuple | None  # None means drawn uniformly per trial
    powers: tuple
    noiseless: bool


def _source_count(cfg: ExperimentConfig) -> int:
    if cfg.sweep == "separation":
        return 2
    return max(1, len(cfg.angles_deg))


def _resolve_point(cfg: ExperimentConfig, value) -> _Point:
    r = _source_count(cfg)
    ktilde = int(value) if cfg.sweep == "snapshots" else cfg.snapshots
    if cfg.sweep == "theta":
        angles = (float(value),)
    elif cfg.sweep == "separation":
        lead = cfg.angles_deg[0]
        angles = (lead, lead - float(value))
    else:
        angles = cfg.angles_deg
    if cfg.sweep == "snr":
        snrs = (float(value),) * r
        noiseless = math.isinf(float(value))
        powers = tuple(1.0 if noiseless else 10.0 ** (s / 10.0) for s in snrs)
    elif cfg.powers is not None:
        powers = tuple(cfg.powers)
        noiseless = False
    else:
        snrs = tuple(cfg.snr_db)
        if len(snrs) == 1 and r > 1:
            snrs = snrs * r
        noiseless = any(math.isinf(s) for s in snrs)
        powers = tuple(1.0 if noiseless else 10.0 ** (s / 10.0) for s in snrs)
    if len(powers) != r:
        raise ConfigError(f"sources: {len(powers)} powers for {r} sources")
    return _Point(sweep_value=float(value), ktilde=ktilde,
                  angles=None if cfg.random_theta else angles,
                  powers=powers, noiseless=noiseless)


def _split_budget(cfg: ExperimentConfig, ktilde: int) -> tuple[int, int]:
    """(stage-1 snapshots, disambiguation snapshots) for the two-stage scenario."""
    k2 = ktilde // cfg.split_divisor if ktilde >= cfg.split_divisor else 1
    return ktilde - k2, k2


def _draw_angles(rng: RngSpec, r: int, edge_offset: float) -> tuple:
    gen = rng.generator()
    lo, hi = -90.0 + edge_offset, 90.0 - edge_offset
    for _ in range(100):
        angles = np.sort(gen.uniform(lo, hi, size=r))
        if r == 1 or np.min(np.diff(angles)) >= 1.0:
            return tuple(angles)
    raise ConfigError("could not draw sufficiently separated random angles")


def _noise_block(channels: int, snapshots: int, rng: RngSpec,
                 noiseless: bool) -> np.ndarray:
    if noiseless:
        return np.zeros((channels, snapshots), dtype=complex)
    return generate_noise(channels, snapshots, rng)


class _ScenarioRunner:
    """Per-sweep-point immutable context shared by all trials."""

    def __init__(self, cfg: ExperimentConfig, point: _Point):
        self.cfg = cfg
        self.point = point
        self.array = ArrayConfig(cfg.m, cfg.spacing_ratio)
        self.had = None
        self.codebook = None
        scenario = cfg.scenario
        if scenario in ("pmpm_fc",):
            self.had = HadConfig("fc", cfg.m, cfg.l)
        elif scenario in ("pmpm_pc", "spc_mpm", "crlb_spc"):
            self.had = HadConfig("pc", cfg.m, cfg.l)
        if self.had is not None and scenario != "crlb_spc":
            self.codebook = build_codebook(self.had)

        self.num_sources = _source_count(cfg)
        if scenario in ("pmpm_fc", "pmpm_pc"):
            self.k = point.ktilde // self.had.n_combiners
            xi_default = cfg.m // 2
            channels = cfg.m
        elif scenario == "spc_mpm":
            k1, self.k2_total = _split_budget(cfg, point.ktilde)
            self.k = k1 // self.had.n_combiners
            xi_default = cfg.l // 2
            channels = cfg.l
        else:
            self.k = point.ktilde
            xi_default = cfg.m // 2
            channels = cfg.m
        self.xi = cfg.xi if cfg.xi is not None else xi_default
        self.channels = channels

    @property
    def feasible(self) -> bool:
        return self.k >= 1

    def pencil_config(self) -> PencilConfig:
        return PencilConfig(self.xi, self.num_sources, self.channels)

    def run_trial(self, sweep_index: int, trial_index: int) -> np.ndarray:
        cfg, point = self.cfg, self.point
        rng = RngSpec(cfg.seed).child(sweep_index, trial_index)
        angles = point.angles
        if angles is None:
            angles = _draw_angles(rng.child("theta"), self.num_sources,
                                  cfg.edge_offset_deg)
        sources = SourceSet(angles, point.powers)
        steer = steering_matrix(self.array, sources)
        pcfg = self.pencil_config()

        if cfg.scenario == "fd_mpm":
            sig = generate_signals(sources, self.k, 1, False, rng.child("signal"))[0]
            noise = _noise_block(cfg.m, self.k, rng.child("noise"), point.noiseless)
            estimates = estimate_fd_mpm(receive_fd(steer, sig, noise), pcfg, self.array)
        elif cfg.scenario in ("pmpm_fc", "pmpm_pc"):
            n = self.had.n_combiners
            sigs = generate_signals(sources, self.k, n, True, rng.child("signal"))
            segments = [
                receive_fd(steer, sigs[i],
                           _noise_block(cfg.m, self.k, rng.child("noise", i),
                                        point.noiseless))
                for i in range(n)
            ]
            estimates = estimate_pmpm(segments, self.codebook, pcfg, self.array)
        else:  # spc_mpm
            n = self.had.n_combiners
            sigs = generate_signals(sources, self.k, n, False, rng.child("signal"))
            segments = [
                receive_fd(steer, sigs[i],
                           _noise_block(cfg.m, self.k, rng.child("noise", i),
                                        point.noiseless))
                for i in range(n)
            ]
            sig2 = generate_signals(sources, self.k2_total, 1, False,
                                    rng.child("signal2"))[0]
            noise2 = _noise_block(cfg.m, self.k2_total, rng.child("noise2"),
                                  point.noiseless)
            block2 = receive_fd(steer, sig2, noise2)
            estimates = estimate_spc_mpm(segments, block2, self.had, pcfg,
                                         self.array, codebook=self.codebook)
        return paired_squared_errors(estimates, angles)

    def root_crlb(self) -> float | None:
        point = self.point
        if point.angles is None or point.noiseless:
            return None
        sources = SourceSet(point.angles, point.powers)
        scenario = self.cfg.scenario
        try:
            if scenario in ("fd_mpm", "crlb_fd"):
                bound = crlb_fd(CrlbInputs(self.array, sources, point.ktilde))
            elif scenario in ("pmpm_fc", "pmpm_pc"):
                bound = crlb_fd(CrlbInputs(self.array, sources, self.k))
            else:
                codebook = self.codebook or build_pc_codebook(self.had)
                k = self.k if scenario == "spc_mpm" else self._spc_bound_k()
                if k < 1:
                    return None
                bound = crlb_spc(CrlbInputs(self.array, sources, k,
                                            combiners=codebook))
            return bound.pooled_root_deg
        except ESTIMATOR_FAILURES:
            return None

    def _spc_bound_k(self) -> int:
        k1, _ = _split_budget(self.cfg, self.point.ktilde)
        return k1 // self.had.n_combiners


def worker_count() -> int:
    """Worker cap from the environment; 0 or unset means the machine default."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
        if cap > 0:
            return cap
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig, measure_time: bool = False) -> list:
    """Execute the experiment and return one record per sweep point.

    Trials whose estimator raises are counted as failures and excluded from
    the RMSE; a failure share above 20% replaces the RMSE with -1. With
    ``measure_time`` False (the default) wall_ms is reported as 0 so that
    repeated runs emit byte-identical CSV.
    """
    cfg.validate()
    records = []
    workers = worker_count()
    for sweep_index, value in enumerate(cfg.grid):
        start = time.perf_counter()
        point = _resolve_point(cfg, value)
        runner = _ScenarioRunner(cfg, point)

        if cfg.scenario in CRLB_SCENARIOS:
            records.append(ResultRecord(
                sweep_value=point.sweep_value, scenario=cfg.scenario,
                rmse_deg=None, root_crlb_deg=runner.root_crlb(),
                trials=0, failures=0,
                wall_ms=_elapsed_ms(start, measure_time)))
            continue

        if not runner.feasible:
            records.append(ResultRecord(
                sweep_value=point.sweep_value, scenario=cfg.scenario,
                rmse_deg=SENTINEL_RMSE, root_crlb_deg=runner.root_crlb(),
                trials=cfg.trials, failures=cfg.trials,
                wall_ms=_elapsed_ms(start, measure_time)))
            continue

        def one_trial(t, _runner=runner, _si=sweep_index):
            try:
                return _runner.run_trial(_si, t)
            except ESTIMATOR_FAILURES:
                return None

        if workers == 1 or cfg.trials == 1:
            outcomes = [one_trial(t) for t in range(cfg.trials)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(one_trial, range(cfg.trials)))

        total_sq = 0.0
        count = 0
        failures = 0
        for sq in outcomes:  # fixed trial-index order keeps reduction exact
            if sq is None:
                failures += 1
            else:
                total_sq += float(np.sum(sq))
                count += sq.size
        if failures > FAILURE_SHARE_LIMIT * cfg.trials or count == 0:
            rmse_value = SENTINEL_RMSE
        else:
            rmse_value = math.sqrt(total_sq / count)
        records.append(ResultRecord(
            sweep_value=point.sweep_value, scenario=cfg.scenario,
            rmse_deg=rmse_value, root_crlb_deg=runner.root_crlb(),
            trials=cfg.trials, failures=failures,
            wall_ms=_elapsed_ms(start, measure_time)))
    return records


def _elapsed_ms(start: float, measure_time: bool) -> int:
    return int(round((time.perf_counter() - start) * 1000.0)) if measure_time else 0


def _fixed9(value: float | None) -> str:
    """Fixed-point decimal with at least nine significant digits."""
    if value is None:
        return ""
    if not math.isfinite(value):
        return str(value)
    if value == 0.0:
        return "0.00000000"
    digits = 9 - 1 - math.floor(math.log10(abs(value)))
    return f"{value:.{max(digits, 0)}f}"


CSV_HEADER = "sweep,scenario,rmse_deg,root_crlb_deg,trials,failures,wall_ms"


def emit_csv(records, path) -> None:
    """Write records as UTF-8 CSV with LF line endings and '.' decimals."""
    lines = [CSV_HEADER]
    for rec in records:
        lines.append(",".join([
            _fixed9(rec.sweep_value),
            rec.scenario,
            _fixed9(rec.rmse_deg),
            _fixed9(rec.root_crlb_deg),
            str(rec.trials),
            str(rec.failures),
            str(rec.wall_ms),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


PRESET_NAMES = ("example1", "example2", "example3", "example4")


def preset(name: str) -> ExperimentConfig:
    """Desk-scale study configurations (200 trials instead of 2000).

    example1: angle sweep at 20 dB, M=32, L=8, 128 snapshots.
    example2: SNR sweep for a single 30-degree source, M=64, L=8, 256 snapshots.
    example3: two-source separation sweep, M=128, L=16, 64 snapshots.
    example4: snapshot-budget sweep at 10 dB with random per-trial angles.
    """
    if name == "example1":
        return ExperimentConfig(
            scenario="pmpm_fc", m=32, l=8, snapshots=128, snr_db=(20.0,),
            angles_deg=(0.0,), sweep="theta",
            grid=(-75.0, -60.0, -45.0, -30.0, -15.0, 0.0,
                  15.0, 30.0, 45.0, 60.0, 75.0),
            trials=200, seed=101)
    if name == "example2":
        return ExperimentConfig(
            scenario="spc_mpm", m=64, l=8, snapshots=256, angles_deg=(30.0,),
            snr_db=(10.0,), sweep="snr",
            grid=(0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0),
            trials=200, seed=102)
    if name == "example3":
        return ExperimentConfig(
            scenario="pmpm_fc", m=128, l=16, snapshots=64, angles_deg=(-15.0,),
            snr_db=(10.0,), sweep="separation", grid=(0.3, 0.5, 2.0),
            trials=200, seed=103)
    if name == "example4":
        return ExperimentConfig(
            scenario="pmpm_fc", m=32, l=8, snr_db=(10.0,), random_theta=True,
            sweep="snapshots", grid=(4, 8, 32, 128, 512),
            trials=200, seed=104)
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


_TUPLE_FLOAT_FIELDS = {"angles_deg", "powers", "snr_db", "grid"}
_INT_FIELDS = {"m", "l", "snapshots", "split_divisor", "xi", "trials", "seed"}
_FLOAT_FIELDS = {"spacing_ratio", "edge_offset_deg"}
_BOOL_FIELDS = {"random_theta"}
_STR_FIELDS = {"scenario", "sweep"}


def parse_config_value(key: str, raw: str):
    """Parse one flat ``key = value`` entry into its typed form."""
    raw = raw.strip()
    if key in _TUPLE_FLOAT_FIELDS:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _BOOL_FIELDS:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if key in _STR_FIELDS:
        return raw
    raise ConfigError(f"unknown configuration key {key!r}")


def load_config_file(path) -> dict:
    """Read a flat ``key = value`` configuration file; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            values[key] = parse_config_value(key, raw)
    return values


def config_from_mapping(values: dict) -> ExperimentConfig:
    if "scenario" not in values:
        raise ConfigError("scenario: required")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    base = ExperimentConfig(scenario=values["scenario"])
    if "powers" in values and "snr_db" not in values:
        base = replace(base, snr_db=None)
    cfg = replace(base, **values)
    cfg.validate()
    return cfg
