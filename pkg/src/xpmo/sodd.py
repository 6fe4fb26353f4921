"""Spectral-aware online domain discriminator.

Each discovered domain is a running Gaussian over low-frequency descriptors:
mean, covariance, and a cumulative weight acting as an effective batch count.
Incoming batches are assigned by the smallest Mahalanobis distance under a
shrinkage-regularized covariance; a batch farther than the novelty threshold
from every known domain spawns a new one, MAP-initialized from the batch.
Statistics then update in closed form with per-sample softmax weights that
down-weight outliers.

Domain ids are list indices and the registry is append-only: an id stays
valid for the lifetime of a run and across checkpoint round-trips.

Reads (assignment, posterior) are safe concurrently; updates and spawns
belong to the single adaptation stream that owns the registry.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from xpmo.numerics import (
    NotPositiveDefiniteError,
    cholesky_decompose,
    log_sum_exp,
    solve_lower_triangular,
    stable_softmax,
)

_MAGIC = b"SODD"
_FORMAT_VERSION = 1

MAX_SHRINKAGE = 0.5


class DegenerateCovarianceError(ValueError):
    """Covariance not positive-definite even after shrinkage."""


@dataclass
class DomainStats:
    """Running Gaussian of one domain."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)
    weight: float = 1.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError("covariance shape must match the mean dimension")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class AssignmentResult:
    """Outcome of routing one batch: chosen id, novelty flag, diagnostics."""

    domain_id: int
    is_new: bool
    distances: np.ndarray
    posterior: np.ndarray | None

    @property
    def nearest_existing(self) -> int:
        if self.distances.size == 0:
            raise ValueError("no existing domains")
        return int(np.argmin(self.distances))


def regularized_covariance(stats: DomainStats, shrinkage: float) -> np.ndarray:
    return (1.0 - shrinkage) * stats.cov + shrinkage * np.eye(stats.dim)


def _cholesky_or_degenerate(stats: DomainStats, shrinkage: float) -> np.ndarray:
    try:
        return cholesky_decompose(regularized_covariance(stats, shrinkage))
    except NotPositiveDefiniteError as exc:
        raise DegenerateCovarianceError("degenerate covariance") from exc


def mahalanobis(stats: DomainStats, z: np.ndarray, shrinkage: float) -> float:
    """(z - mu)^T [(1 - eps) Sigma + eps I]^{-1} (z - mu) via Cholesky solve."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != stats.mean.shape:
        raise ValueError(f"descriptor dimension {z.shape} does not match domain dimension {stats.mean.shape}")
    lower = _cholesky_or_degenerate(stats, shrinkage)
    y = solve_lower_triangular(lower, z - stats.mean)
    return float(y @ y)


def _resolve_shrinkage(stats: DomainStats, shrinkage: float) -> tuple[np.ndarray, float]:
    """Cholesky factor at the smallest workable shrinkage, doubling up to 0.5."""
    eps = shrinkage
    while True:
        try:
            return _cholesky_or_degenerate(stats, eps), eps
        except DegenerateCovarianceError:
            if eps >= MAX_SHRINKAGE:
                raise
            eps = min(2.0 * eps if eps > 0 else 1e-3, MAX_SHRINKAGE)


def _distance_and_logdet(stats: DomainStats, z: np.ndarray, shrinkage: float) -> tuple[float, float]:
    lower, _ = _resolve_shrinkage(stats, shrinkage)
    y = solve_lower_triangular(lower, z - stats.mean)
    logdet = 2.0 * float(np.log(np.diag(lower)).sum())
    return float(y @ y), logdet


def soft_weights(stats: DomainStats, descriptors: np.ndarray, shrinkage: float) -> np.ndarray:
    """Per-sample weights exp(-m/2), normalized in log space over the batch."""
    descriptors = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if descriptors.shape[0] < 1:
        raise ValueError("empty batch")
    lower, _ = _resolve_shrinkage(stats, shrinkage)
    ys = solve_lower_triangular(lower, (descriptors - stats.mean).T)
    dists = (ys**2).sum(axis=0)
    return stable_softmax(-0.5 * dists)


def update_stats(stats: DomainStats, descriptors: np.ndarray, weights: np.ndarray) -> DomainStats:
    """One closed-form weighted update of (mean, covariance, weight).

    The outer products deliberately use the pre-update mean; the covariance
    is re-symmetrized afterwards.
    """
    descriptors = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (descriptors.shape[0],):
        raise ValueError("one weight per descriptor required")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    c = stats.weight
    new_mean = (c * stats.mean + weights @ descriptors) / (c + 1.0)
    centered = descriptors - stats.mean
    scatter = (weights[:, None] * centered).T @ centered
    new_cov = (c * stats.cov + scatter) / (c + 1.0)
    new_cov = 0.5 * (new_cov + new_cov.T)
    return DomainStats(new_mean, new_cov, c + 1.0)


class DomainRegistry:
    """Append-only collection of per-domain Gaussians plus decision knobs."""

    def __init__(
        self,
        shrinkage: float = 0.1,
        novelty_threshold: float = 1.0,
        init_variance: float = 1.0,
        max_domains: int | None = None,
    ):
        if not 0.0 < shrinkage < 1.0:
            raise ValueError("shrinkage must lie in (0, 1)")
        if novelty_threshold <= 0.0:
            raise ValueError("novelty threshold must be positive")
        if init_variance <= 0.0:
            raise ValueError("initial variance must be positive")
        self.shrinkage = float(shrinkage)
        self.novelty_threshold = float(novelty_threshold)
        self.init_variance = float(init_variance)
        self.max_domains = max_domains
        self.domains: list[DomainStats] = []

    @property
    def num_domains(self) -> int:
        return len(self.domains)

    def posterior(self, z: np.ndarray) -> np.ndarray:
        """P(domain | z) under the regularized Gaussians, uniform prior.

        Evaluated in log space; the normalizer uses the determinant of the
        same regularized covariance the distance uses.
        """
        if not self.domains:
            raise ValueError("empty registry")
        z = np.asarray(z, dtype=np.float64)
        log_scores = np.empty(self.num_domains)
        for i, stats in enumerate(self.domains):
            dist, logdet = _distance_and_logdet(stats, z, self.shrinkage)
            log_scores[i] = -0.5 * dist - 0.5 * logdet
        return np.exp(log_scores - log_sum_exp(log_scores))

    def assign_batch(self, descriptors: np.ndarray) -> AssignmentResult:
        """Route one batch by the batch-mean descriptor.

        Novel batches (min distance > threshold, or an empty registry) get
        is_new=True and the id the spawned domain will take; a full registry
        (max_domains) falls back to the nearest existing domain.
        """
        descriptors = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
        if descriptors.shape[0] < 1:
            raise ValueError("empty batch")
        if self.domains and descriptors.shape[1] != self.domains[0].dim:
            raise ValueError("descriptor dimension does not match registry")
        zbar = descriptors.mean(axis=0)
        if not self.domains:
            return AssignmentResult(0, True, np.empty(0), None)
        dists = np.empty(self.num_domains)
        logdets = np.empty(self.num_domains)
        for i, stats in enumerate(self.domains):
            dists[i], logdets[i] = _distance_and_logdet(stats, zbar, self.shrinkage)
        nearest = int(np.argmin(dists))
        post = np.exp((-0.5 * dists - 0.5 * logdets) - log_sum_exp(-0.5 * dists - 0.5 * logdets))
        if np.allclose(logdets, logdets[0], atol=1e-9):
            # equal regularized determinants make the two rules coincide
            assert int(np.argmax(post)) == nearest
        is_new = bool(dists[nearest] > self.novelty_threshold)
        if is_new and self.max_domains is not None and self.num_domains >= self.max_domains:
            is_new = False
        domain_id = self.num_domains if is_new else nearest
        return AssignmentResult(domain_id, is_new, dists, post)

    def spawn_domain(self, descriptors: np.ndarray) -> int:
        """Append a MAP-initialized domain (mean = batch mean, isotropic cov)."""
        descriptors = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
        zbar = descriptors.mean(axis=0)
        self.domains.append(DomainStats(zbar, self.init_variance * np.eye(zbar.shape[0]), 1.0))
        return self.num_domains - 1

    def update_domain(self, domain_id: int, descriptors: np.ndarray) -> np.ndarray:
        """Soft-weighted statistics update; returns the weights used."""
        stats = self.domains[domain_id]
        weights = soft_weights(stats, descriptors, self.shrinkage)
        self.domains[domain_id] = update_stats(stats, descriptors, weights)
        return weights

    # ------------------------------------------------------------------
    # persistence: magic, version, K, d, then knobs and per-domain payloads

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        dim = self.domains[0].dim if self.domains else 0
        buf.write(_MAGIC)
        buf.write(struct.pack("<III", _FORMAT_VERSION, self.num_domains, dim))
        buf.write(struct.pack("<ddd", self.shrinkage, self.novelty_threshold, self.init_variance))
        for stats in self.domains:
            buf.write(struct.pack("<d", stats.weight))
            buf.write(stats.mean.astype("<f8").tobytes())
            buf.write(np.ascontiguousarray(stats.cov).astype("<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "DomainRegistry":
        buf = io.BytesIO(raw)
        if buf.read(4) != _MAGIC:
            raise ValueError("bad registry magic")
        version, count, dim = struct.unpack("<III", buf.read(12))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported registry format version {version}")
        shrinkage, tau, sigma0 = struct.unpack("<ddd", buf.read(24))
        registry = cls(shrinkage, tau, sigma0)
        for _ in range(count):
            (weight,) = struct.unpack("<d", buf.read(8))
            mean = np.frombuffer(buf.read(8 * dim), dtype="<f8").copy()
            cov = np.frombuffer(buf.read(8 * dim * dim), dtype="<f8").copy().reshape(dim, dim)
            registry.domains.append(DomainStats(mean, cov, weight))
        return registry

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DomainRegistry":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
