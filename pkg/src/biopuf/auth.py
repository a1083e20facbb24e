"""Enrollment/verification protocol and FAR/FRR arithmetic.

A CRP store is a single directory holding ``index.json`` plus one packed
key file per enrolled (puf_id, challenge_id) pair; all writes go through
write-temp-then-rename so the store stays consistent on failure.

Error rates are cumulative binomial tails evaluated in the log domain so
the paper-scale operating point (L > 10^6 bits, tails far below 10^-300)
stays representable.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from scipy import special

from .exceptions import (DuplicateRecordError, FormatError, ParameterError,
                         RecordNotFoundError)
from .hashing import BinaryKey
from .metrics import fractional_hd
from .optics import Challenge, make_challenge

STORE_VERSION = 1
_LOG10_E = math.log10(math.e)


@dataclass(frozen=True)
class CrpRecord:
    puf_id: str
    challenge_id: str
    challenge_seed: int
    challenge_dims: tuple[int, int]
    key: BinaryKey
    enrolled_at: str
    format_version: int = STORE_VERSION

    def challenge(self) -> Challenge:
        return make_challenge(self.challenge_seed, self.challenge_dims,
                              challenge_id=self.challenge_id)


@dataclass(frozen=True)
class AuthDecision:
    hd: float
    threshold: float
    accept: bool
    puf_id: str
    challenge_id: str

    def to_dict(self) -> dict:
        return {"hd": self.hd, "threshold": self.threshold,
                "accept": self.accept, "puf_id": self.puf_id,
                "challenge_id": self.challenge_id}


@dataclass(frozen=True)
class ErrorRates:
    log10_far: float
    log10_frr: float
    far: float                 # linear, may underflow to 0.0
    frr: float
    L: int
    T: float
    d_intra: float
    d_inter: float

    def to_dict(self) -> dict:
        return {"log10_far": self.log10_far, "log10_frr": self.log10_frr,
                "far": self.far, "frr": self.frr, "L": self.L, "T": self.T,
                "d_intra": self.d_intra, "d_inter": self.d_inter}


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class CrpStore:
    """Directory-backed challenge-response pair store."""

    def __init__(self, path):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)
        self._index_path = os.path.join(self.path, "index.json")
        if not os.path.exists(self._index_path):
            self._write_index({"format_version": STORE_VERSION, "records": {}})

    def _read_index(self) -> dict:
        with open(self._index_path) as fh:
            index = json.load(fh)
        if index.get("format_version") != STORE_VERSION:
            raise FormatError(
                f"unsupported store version {index.get('format_version')}")
        return index

    def _write_index(self, index: dict) -> None:
        _atomic_write(self._index_path,
                      json.dumps(index, indent=2, sort_keys=True).encode())

    @staticmethod
    def _record_id(puf_id: str, challenge_id: str) -> str:
        return f"{puf_id}::{challenge_id}"

    def enroll(self, puf_id: str, challenge: Challenge, key: BinaryKey) -> CrpRecord:
        """Persist a CRP atomically; refuses duplicate (puf_id, challenge_id)."""
        index = self._read_index()
        rid = self._record_id(puf_id, challenge.challenge_id)
        if rid in index["records"]:
            raise DuplicateRecordError(
                f"({puf_id}, {challenge.challenge_id}) already enrolled")
        key_file = f"{len(index['records']):06d}.bpk"
        _atomic_write(os.path.join(self.path, key_file), key.to_bytes())
        enrolled_at = datetime.now(timezone.utc).isoformat()
        index["records"][rid] = {
            "puf_id": puf_id,
            "challenge_id": challenge.challenge_id,
            "challenge_seed": challenge.seed,
            "challenge_dims": list(challenge.dims),
            "key_file": key_file,
            "enrolled_at": enrolled_at,
        }
        self._write_index(index)
        return CrpRecord(puf_id=puf_id, challenge_id=challenge.challenge_id,
                         challenge_seed=challenge.seed,
                         challenge_dims=challenge.dims, key=key,
                         enrolled_at=enrolled_at)

    def get(self, puf_id: str, challenge_id: str) -> CrpRecord:
        index = self._read_index()
        rid = self._record_id(puf_id, challenge_id)
        entry = index["records"].get(rid)
        if entry is None:
            raise RecordNotFoundError(f"no record for ({puf_id}, {challenge_id})")
        key = BinaryKey.load(os.path.join(self.path, entry["key_file"]))
        return CrpRecord(puf_id=entry["puf_id"],
                         challenge_id=entry["challenge_id"],
                         challenge_seed=entry["challenge_seed"],
                         challenge_dims=tuple(entry["challenge_dims"]),
                         key=key, enrolled_at=entry["enrolled_at"])

    def list_records(self) -> list[tuple[str, str]]:
        index = self._read_index()
        return sorted((e["puf_id"], e["challenge_id"])
                      for e in index["records"].values())

    def pick_challenge(self, puf_id: str, seed: int) -> CrpRecord:
        """Seeded random pick among the challenges enrolled for one token."""
        candidates = [c for p, c in self.list_records() if p == puf_id]
        if not candidates:
            raise RecordNotFoundError(f"no records for puf_id {puf_id}")
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        return self.get(puf_id, candidates[gen.integers(len(candidates))])


def verify(store: CrpStore, puf_id: str, challenge_id: str,
           candidate: BinaryKey, threshold: float) -> AuthDecision:
    """Accept iff the fractional HD to the enrolled key is below threshold."""
    record = store.get(puf_id, challenge_id)
    if candidate.length != record.key.length:
        raise ParameterError(
            f"candidate length {candidate.length} != enrolled {record.key.length}")
    hd = fractional_hd(record.key, candidate)
    return AuthDecision(hd=hd, threshold=threshold, accept=hd < threshold,
                        puf_id=puf_id, challenge_id=challenge_id)


def _log_binom_pmf(j: np.ndarray, n: int, p: float) -> np.ndarray:
    j = np.asarray(j, dtype=np.float64)
    return (special.gammaln(n + 1) - special.gammaln(j + 1)
            - special.gammaln(n - j + 1)
            + j * math.log(p) + (n - j) * math.log1p(-p))


def _log10_lower_tail(k: int, n: int, p: float) -> float:
    """log10 of sum_{j<=k} pmf(j), summed backward from j = k.

    Intended for the deep lower tail (k well below n p) where the terms
    decay geometrically; terminates once the running sum stops changing.
    """
    block = 256
    total_log = -math.inf
    j_hi = k
    while j_hi >= 0:
        j = np.arange(max(0, j_hi - block + 1), j_hi + 1)
        block_log = float(special.logsumexp(_log_binom_pmf(j, n, p)))
        new_total = float(np.logaddexp(total_log, block_log))
        if new_total - total_log < 1e-16 and total_log > -math.inf:
            total_log = new_total
            break
        total_log = new_total
        j_hi = int(j[0]) - 1
    return total_log * _LOG10_E


def _log10_upper_tail(k: int, n: int, p: float) -> float:
    """log10 of sum_{j>=k} pmf(j), summed forward from j = k."""
    block = 256
    total_log = -math.inf
    j_lo = k
    while j_lo <= n:
        j = np.arange(j_lo, min(n, j_lo + block - 1) + 1)
        block_log = float(special.logsumexp(_log_binom_pmf(j, n, p)))
        new_total = float(np.logaddexp(total_log, block_log))
        if new_total - total_log < 1e-16 and total_log > -math.inf:
            total_log = new_total
            break
        total_log = new_total
        j_lo = int(j[-1]) + 1
    return total_log * _LOG10_E


def binom_cdf(k: int, n: int, p: float) -> tuple[float, float]:
    """Cumulative binomial F(k, n, p) as (linear, log10) values.

    The linear value comes from the regularized incomplete beta function and
    may underflow to 0; the log10 value is computed by log-domain summation
    when the tail is too small for linear arithmetic, and stays accurate for
    n of a few million.
    """
    if not 0 <= k <= n:
        raise ParameterError(f"k must be in [0, n], got k={k}, n={n}")
    if not 0 <= p <= 1:
        raise ParameterError(f"p must be in [0, 1], got {p}")
    k, n = int(k), int(n)
    if p == 0 or k == n:
        return 1.0, 0.0
    if p == 1:
        return 0.0, -math.inf
    linear = float(special.betainc(n - k, k + 1, 1.0 - p))
    if linear > 1e-280:
        return linear, math.log10(linear)
    return linear, _log10_lower_tail(k, n, p)


def binom_sf(k: int, n: int, p: float) -> tuple[float, float]:
    """Upper tail 1 - F(k, n, p) = sum_{j>k} pmf(j) as (linear, log10)."""
    if not 0 <= k <= n:
        raise ParameterError(f"k must be in [0, n], got k={k}, n={n}")
    if not 0 <= p <= 1:
        raise ParameterError(f"p must be in [0, 1], got {p}")
    k, n = int(k), int(n)
    if k == n or p == 0:
        return 0.0, -math.inf
    if p == 1:
        return 1.0, 0.0
    linear = float(special.betainc(k + 1, n - k, p))
    if linear > 1e-280:
        return linear, math.log10(linear)
    return linear, _log10_upper_tail(k + 1, n, p)


def far_frr(L: int, T: float, d_intra: float, d_inter: float,
            printed_semantics: bool = False) -> ErrorRates:
    """FAR/FRR at threshold T from the fitted tail distributions.

    Standard semantics: FAR is the probability that an impostor key (inter
    distribution, d_inter) lands at or below the threshold, FRR the
    probability that a genuine key (intra distribution, d_intra) lands
    above it. ``printed_semantics`` swaps the two distributions to match an
    alternative published pairing of the formulas; it yields the same
    headline conclusion at the reference operating point.
    """
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    if not 0 < d_intra < T < d_inter < 1:
        raise ParameterError(
            f"require 0 < d_intra < T < d_inter < 1, got "
            f"d_intra={d_intra}, T={T}, d_inter={d_inter}")
    k = math.floor(L * T)
    if printed_semantics:
        far, log10_far = binom_sf(k, L, d_intra)
        frr, log10_frr = binom_cdf(k, L, d_inter)
    else:
        far, log10_far = binom_cdf(k, L, d_inter)
        frr, log10_frr = binom_sf(k, L, d_intra)
    return ErrorRates(log10_far=log10_far, log10_frr=log10_frr,
                      far=far, frr=frr, L=L, T=T,
                      d_intra=d_intra, d_inter=d_inter)
