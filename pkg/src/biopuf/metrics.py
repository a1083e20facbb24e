"""Randomness, uniqueness and robustness statistics for binary keys.

Covers per-axis Shannon entropy, the Pearson correlation of intensity
grids, fractional Hamming distance, inter/intra distance statistics with
Gaussian and binomial fits, degrees of freedom of the key space, and the
decision threshold taken at the intersection of the fitted densities.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .exceptions import (NoIntersectionError, ParameterError,
                         UndefinedCorrelationError)
from .hashing import BinaryKey

FORMAT_VERSION = 1


@dataclass
class EntropyReport:
    per_row: list[float]
    per_col: list[float]
    mean_x: float
    std_x: float
    mean_y: float
    std_y: float


@dataclass
class InterStats:
    pair_count: int
    hd_samples: list[float]
    mean: float
    variance: float
    gaussian_fit: tuple[float, float]          # (mean, std)
    histogram: tuple[list[float], list[float]] | None = None


@dataclass
class IntraStats:
    sample_count: int
    hd_samples: list[float]
    mean: float
    binomial_fit: tuple[float, float]          # (n_eff, p_hat)
    histogram: tuple[list[float], list[float]] | None = None


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inside = (p > 0) & (p < 1)
    q = p[inside]
    out[inside] = -(q * np.log2(q) + (1 - q) * np.log2(1 - q))
    return out


def axis_entropy(key: BinaryKey) -> EntropyReport:
    """Shannon entropy of the ones-probability along each row and column."""
    bits = key.bits()
    if bits.size == 0:
        raise ParameterError("key is empty")
    row_e = _binary_entropy(bits.mean(axis=1))
    col_e = _binary_entropy(bits.mean(axis=0))
    return EntropyReport(
        per_row=row_e.tolist(), per_col=col_e.tolist(),
        mean_x=float(row_e.mean()), std_x=float(row_e.std(ddof=1)) if row_e.size > 1 else 0.0,
        mean_y=float(col_e.mean()), std_y=float(col_e.std(ddof=1)) if col_e.size > 1 else 0.0)


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation coefficient over all pixels of two intensity grids."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ParameterError(f"grids differ in shape: {a.shape} vs {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da**2).sum() * (db**2).sum())
    if denom == 0:
        raise UndefinedCorrelationError("correlation undefined for constant grid(s)")
    return float((da * db).sum() / denom)


def fractional_hd(k1: BinaryKey, k2: BinaryKey) -> float:
    """popcount(k1 xor k2) / L."""
    if k1.length != k2.length:
        raise ParameterError(f"key lengths differ: {k1.length} vs {k2.length}")
    a = np.frombuffer(k1.packed, dtype=np.uint8)
    b = np.frombuffer(k2.packed, dtype=np.uint8)
    # padding bits are zero in both keys, so they never contribute
    diff = np.unpackbits(np.bitwise_xor(a, b))
    return float(diff.sum()) / k1.length


def _check_keys(keys: list[BinaryKey], minimum: int) -> None:
    if len(keys) < minimum:
        raise ParameterError(f"need at least {minimum} keys, got {len(keys)}")
    lengths = {k.length for k in keys}
    if len(lengths) != 1:
        raise ParameterError(f"keys have differing lengths: {sorted(lengths)}")


def _histogram(samples: np.ndarray, bins) -> tuple[list[float], list[float]]:
    if np.ptp(samples) == 0:
        counts, edges = np.histogram(samples, bins=1)
    else:
        counts, edges = np.histogram(samples, bins=bins)
    return counts.tolist(), edges.tolist()


def inter_stats(keys: list[BinaryKey], bins="fd") -> InterStats:
    """All-pairs fractional HDs with a moment-matched Gaussian fit."""
    _check_keys(keys, 2)
    bit_rows = np.stack([k.bits().ravel() for k in keys]).astype(np.uint8)
    n = len(keys)
    samples = []
    for i in range(n - 1):
        diffs = np.bitwise_xor(bit_rows[i + 1:], bit_rows[i])
        samples.extend(diffs.mean(axis=1).tolist())
    hd = np.asarray(samples, dtype=np.float64)
    mean = float(hd.mean())
    var = float(hd.var(ddof=1)) if hd.size > 1 else 0.0
    return InterStats(pair_count=len(samples), hd_samples=hd.tolist(),
                      mean=mean, variance=var,
                      gaussian_fit=(mean, float(np.sqrt(var))),
                      histogram=_histogram(hd, bins))


def intra_stats(keys: list[BinaryKey], all_pairs: bool = False,
                n_eff: float | None = None, bins="fd") -> IntraStats:
    """HDs of re-measurements against the first key (or all pairs).

    The binomial fit uses p_hat = sample mean and an effective trial count:
    the caller's ``n_eff`` (typically the inter-distribution degrees of
    freedom, since bits are spatially correlated) or the raw bit length.
    """
    _check_keys(keys, 2)
    if all_pairs:
        hd = [fractional_hd(keys[i], keys[j])
              for i in range(len(keys) - 1) for j in range(i + 1, len(keys))]
    else:
        ref = keys[0]
        hd = [fractional_hd(ref, k) for k in keys[1:]]
    hd = np.asarray(hd, dtype=np.float64)
    p_hat = float(hd.mean())
    trials = float(n_eff) if n_eff is not None else float(keys[0].length)
    return IntraStats(sample_count=len(hd), hd_samples=hd.tolist(),
                      mean=p_hat, binomial_fit=(trials, p_hat),
                      histogram=_histogram(hd, bins))


def dof(mu: float, sigma2: float) -> float:
    """Degrees of freedom mu(1-mu)/sigma^2; key-space capacity is 2^F."""
    if sigma2 <= 0:
        raise ParameterError(f"variance must be > 0, got {sigma2}")
    if not 0 < mu < 1:
        raise ParameterError(f"mean must lie strictly in (0, 1), got {mu}")
    return mu * (1.0 - mu) / sigma2


def fit_threshold(inter: InterStats, intra: IntraStats) -> float:
    """Abscissa where the fitted intra density crosses the fitted inter density.

    The intra binomial fit is compared through its Gaussian approximation
    (mean p_hat, variance p_hat(1-p_hat)/n_eff). The root is bracketed on
    [intra.mean, inter.mean] and located by bisection.
    """
    if not intra.mean < inter.mean:
        raise ParameterError(
            f"intra mean {intra.mean} must be below inter mean {inter.mean}")
    m2, s2 = inter.gaussian_fit
    if s2 <= 0:
        raise ParameterError("inter fit has zero spread")
    n_eff, p_hat = intra.binomial_fit
    if n_eff <= 0 or not 0 < p_hat < 1:
        raise ParameterError(f"invalid intra binomial fit ({n_eff}, {p_hat})")
    s1 = np.sqrt(p_hat * (1.0 - p_hat) / n_eff)

    def log_density_gap(x: float) -> float:
        return norm.logpdf(x, p_hat, s1) - norm.logpdf(x, m2, s2)

    lo, hi = intra.mean, inter.mean
    if log_density_gap(lo) <= 0 or log_density_gap(hi) >= 0:
        raise NoIntersectionError(
            "fitted densities do not cross on [intra.mean, inter.mean]")
    return float(brentq(log_density_gap, lo, hi, xtol=1e-12))


@dataclass
class MetricsReport:
    """Bundle of fleet statistics ready for JSON/CSV export."""

    entropy: EntropyReport | None = None
    inter: InterStats | None = None
    intra: IntraStats | None = None
    dof: float | None = None
    threshold: float | None = None
    config: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        out = {"format_version": self.format_version, "config": self.config}
        if self.entropy is not None:
            out["entropy"] = vars(self.entropy)
        if self.inter is not None:
            d = vars(self.inter).copy()
            d["gaussian_fit"] = list(d["gaussian_fit"])
            out["inter"] = d
        if self.intra is not None:
            d = vars(self.intra).copy()
            d["binomial_fit"] = list(d["binomial_fit"])
            out["intra"] = d
        if self.dof is not None:
            out["dof"] = self.dof
        if self.threshold is not None:
            out["threshold"] = self.threshold
        return out

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def save_hd_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "fractional_hd"])
            for value in (self.inter.hd_samples if self.inter else []):
                writer.writerow(["inter", repr(value)])
            for value in (self.intra.hd_samples if self.intra else []):
                writer.writerow(["intra", repr(value)])
