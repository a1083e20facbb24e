"""Fleet experiment driver: mint, render, hash, and summarize.

A ``RunConfig`` pins every seed and parameter, so a persisted config
re-runs bit-identically; reports embed the config they were produced from.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import hashing, metrics, optics
from .exceptions import ParameterError

FORMAT_VERSION = 1


@dataclass
class RunConfig:
    fleet_seed: int = 1000
    challenge_seed: int = 2000
    noise_seed: int = 3000
    fleet_size: int = 50
    remeasure_count: int = 50
    grid_dims: tuple[int, int] = (256, 256)
    pitch: float = 2.0
    correlation_length: float = 8.0
    rms_height: float = 5.0
    refractive_index: float = 1.5
    wavelength: float = 0.6328
    z1: float = 5.0e4
    z2: float = 5.0e4
    detector_bits: int = 8
    gabor_size: int = 17
    gabor_wavelength_px: float | None = None
    gabor_orientation: float = 0.0
    jitter_shift: float = optics.DEFAULT_SHIFT_UM
    jitter_noise_sigma: float = optics.DEFAULT_NOISE_SIGMA
    threshold_override: float | None = None
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        bad = []
        if self.fleet_size < 2:
            bad.append("fleet_size")
        if self.remeasure_count < 0:
            bad.append("remeasure_count")
        if self.jitter_shift < 0:
            bad.append("jitter_shift")
        if self.jitter_noise_sigma < 0:
            bad.append("jitter_noise_sigma")
        if bad:
            raise ParameterError(f"invalid config fields: {', '.join(bad)}")
        self.surface_params().validate()
        self.optics_config().validate()

    def surface_params(self) -> optics.SurfaceParams:
        return optics.SurfaceParams(
            grid_dims=tuple(self.grid_dims), pitch=self.pitch,
            correlation_length=self.correlation_length,
            rms_height=self.rms_height,
            refractive_index=self.refractive_index)

    def optics_config(self) -> optics.OpticsConfig:
        return optics.OpticsConfig(
            wavelength=self.wavelength, z1=self.z1, z2=self.z2,
            detector_dims=tuple(self.grid_dims),
            detector_bits=self.detector_bits)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid_dims"] = list(self.grid_dims)
        return d

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        d = dict(d)
        if "grid_dims" in d:
            d["grid_dims"] = tuple(d["grid_dims"])
        return RunConfig(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "RunConfig":
        with open(path) as fh:
            return RunConfig.from_dict(json.load(fh))


@dataclass
class FleetResult:
    report: metrics.MetricsReport
    keys: list[hashing.BinaryKey]
    intra_keys: list[hashing.BinaryKey] = field(default_factory=list)
    patterns: list[optics.SpecklePattern] = field(default_factory=list)
    intra_patterns: list[optics.SpecklePattern] = field(default_factory=list)


def run_fleet(config: RunConfig) -> FleetResult:
    """Mint a fleet, render a shared challenge, hash, and compute statistics.

    When ``remeasure_count >= 2`` the first token is also re-measured with
    jittered repeats, yielding intra statistics and a fitted threshold.
    """
    config.validate()
    params = config.surface_params()
    opt = config.optics_config()
    challenge = optics.make_challenge(config.challenge_seed, tuple(config.grid_dims))

    pufs = [optics.mint_puf(config.fleet_seed + i, params)
            for i in range(config.fleet_size)]
    patterns = [optics.render_speckle(p, challenge, opt) for p in pufs]

    hasher = hashing.GaborHasher(size=config.gabor_size,
                                 wavelength_px=config.gabor_wavelength_px,
                                 orientation=config.gabor_orientation)
    hasher.fit(patterns[:1])
    keys = hasher.transform(patterns)

    inter = metrics.inter_stats(keys)
    entropy_reports = [metrics.axis_entropy(k) for k in keys]
    entropy = metrics.EntropyReport(
        per_row=[e.mean_x for e in entropy_reports],
        per_col=[e.mean_y for e in entropy_reports],
        mean_x=float(np.mean([e.mean_x for e in entropy_reports])),
        std_x=float(np.std([e.mean_x for e in entropy_reports], ddof=1)),
        mean_y=float(np.mean([e.mean_y for e in entropy_reports])),
        std_y=float(np.std([e.mean_y for e in entropy_reports], ddof=1)))
    dof = metrics.dof(inter.mean, inter.variance) if inter.variance > 0 else None

    intra = None
    intra_keys: list[hashing.BinaryKey] = []
    intra_patterns: list[optics.SpecklePattern] = []
    threshold = config.threshold_override
    if config.remeasure_count >= 2:
        intra_patterns = [
            optics.remeasure(pufs[0], challenge, opt,
                             optics.draw_jitter(config.noise_seed, i,
                                                max_shift=config.jitter_shift,
                                                noise_sigma=config.jitter_noise_sigma))
            for i in range(config.remeasure_count)]
        intra_keys = hasher.transform(intra_patterns)
        intra = metrics.intra_stats([keys[0], *intra_keys], n_eff=dof)
        if threshold is None and 0 < intra.mean < inter.mean:
            threshold = metrics.fit_threshold(inter, intra)

    report = metrics.MetricsReport(entropy=entropy, inter=inter, intra=intra,
                                   dof=dof, threshold=threshold,
                                   config=config.to_dict())
    return FleetResult(report=report, keys=keys, intra_keys=intra_keys,
                       patterns=patterns, intra_patterns=intra_patterns)
