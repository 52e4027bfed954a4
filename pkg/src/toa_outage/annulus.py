"""Annular binomial point process of anchors around a target at the origin."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Draw order inside a stream: all ranges first, then all angles.
CHUNK_SIZE = 65_536


@dataclass(frozen=True)
class AnnulusModel:
    """N anchors placed uniformly at random in the annulus ``d_min <= r <= d_max``.

    ``t_s`` is the aggregate ranging constant that scales every information
    intensity (``mu_k = t_s / R_k**2``).
    """

    d_min: float
    d_max: float
    n_anchors: int
    t_s: float = 1.0

    def __post_init__(self):
        if not (self.d_min > 0 and self.d_max > self.d_min):
            raise ValueError("need d_max > d_min > 0")
        if int(self.n_anchors) != self.n_anchors or self.n_anchors < 3:
            raise ValueError("n_anchors must be an integer >= 3")
        if not self.t_s > 0:
            raise ValueError("t_s must be positive")
        object.__setattr__(self, "n_anchors", int(self.n_anchors))

    @property
    def area_width(self) -> float:
        """``d_max**2 - d_min**2``, the normaliser of every range density."""
        return self.d_max ** 2 - self.d_min ** 2

    @property
    def rii_support(self) -> tuple[float, float]:
        """Support of a single ``A = R**-2``."""
        return self.d_max ** -2, self.d_min ** -2

    @property
    def xn_support(self) -> tuple[float, float]:
        """Support of ``X_N = sum(A_k)``."""
        lo, hi = self.rii_support
        return self.n_anchors * lo, self.n_anchors * hi

    def rii_moment(self, k: int) -> float:
        """E[A**k] in closed form (``A`` has density ``a**-2 / (d_max**2 - d_min**2)``)."""
        lo, hi = self.rii_support
        if k == 1:
            return float(np.log(hi / lo) / self.area_width)
        return float((hi ** (k - 1) - lo ** (k - 1)) / ((k - 1) * self.area_width))

    def with_n(self, n_anchors: int) -> "AnnulusModel":
        return AnnulusModel(self.d_min, self.d_max, n_anchors, self.t_s)


@dataclass(frozen=True)
class AnchorSet:
    """Polar anchor positions relative to the target; arrays have a trailing axis of length N.

    Leading axes are allowed so a batch of realisations can be stored as
    ``(draws, N)`` arrays.
    """

    ranges: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        ranges = np.asarray(self.ranges, dtype=float)
        angles = np.asarray(self.angles, dtype=float)
        if ranges.shape != angles.shape or ranges.ndim == 0:
            raise ValueError("ranges and angles must have the same non-scalar shape")
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "angles", angles)

    @property
    def n_anchors(self) -> int:
        return self.ranges.shape[-1]

    def validate(self, model: AnnulusModel, rtol: float = 1e-12) -> None:
        if self.n_anchors != model.n_anchors:
            raise ValueError(f"expected {model.n_anchors} anchors, got {self.n_anchors}")
        slack = rtol * model.d_max
        if np.any(self.ranges < model.d_min - slack) or np.any(self.ranges > model.d_max + slack):
            raise ValueError("anchor range outside [d_min, d_max]")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams are derived through :class:`numpy.random.SeedSequence` spawn keys,
    so chunk ``k`` of a run draws the same numbers whichever worker runs it.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2 ** 64 - 1),
                                    spawn_key=(int(self.stream_id) & (2 ** 64 - 1),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        """Stream for sub-task ``index`` (e.g. a Monte Carlo chunk)."""
        mixed = np.random.SeedSequence(entropy=int(self.seed) & (2 ** 64 - 1),
                                       spawn_key=(int(self.stream_id) & (2 ** 64 - 1), int(index)))
        return RngStream(int(mixed.generate_state(1, dtype=np.uint64)[0]), int(index))


def sample_ranges(model: AnnulusModel, u) -> np.ndarray:
    """Inverse-cdf map from uniforms on [0, 1) to ranges with density ``2r / (d_max**2 - d_min**2)``."""
    return np.sqrt(model.d_min ** 2 + np.asarray(u) * model.area_width)


def sample_anchor_sets(model: AnnulusModel, rng: RngStream, draws: int) -> AnchorSet:
    """``draws`` independent anchor sets as ``(draws, N)`` arrays."""
    gen = rng.generator()
    shape = (int(draws), model.n_anchors)
    ranges = sample_ranges(model, gen.random(shape))
    angles = gen.random(shape) * (2 * np.pi)
    # Guard the half-open interval against rounding up to 2*pi.
    angles = np.where(angles >= 2 * np.pi, 0.0, angles)
    return AnchorSet(ranges, angles)


def sample_anchor_set(model: AnnulusModel, rng: RngStream) -> AnchorSet:
    batch = sample_anchor_sets(model, rng, 1)
    return AnchorSet(batch.ranges[0], batch.angles[0])


def pdf_range(model: AnnulusModel, r):
    r = np.asarray(r, dtype=float)
    inside = (r >= model.d_min) & (r <= model.d_max)
    return np.where(inside, 2 * r / model.area_width, 0.0)


def cdf_range(model: AnnulusModel, r):
    r = np.clip(np.asarray(r, dtype=float), model.d_min, model.d_max)
    return (r ** 2 - model.d_min ** 2) / model.area_width


def pdf_rii(model: AnnulusModel, a):
    """Density of ``A = R**-2``: ``a**-2 / (d_max**2 - d_min**2)`` on ``[d_max**-2, d_min**-2]``."""
    a = np.asarray(a, dtype=float)
    lo, hi = model.rii_support
    inside = (a >= lo) & (a <= hi)
    safe = np.where(inside, a, 1.0)
    return np.where(inside, safe ** -2 / model.area_width, 0.0)


def ccdf_nearest(model: AnnulusModel, r):
    """P(min_k R_k > r)."""
    frac = (model.d_max ** 2 - np.clip(np.asarray(r, dtype=float), model.d_min, model.d_max) ** 2)
    return (frac / model.area_width) ** model.n_anchors


def ccdf_farthest(model: AnnulusModel, r):
    """P(max_k R_k > r)."""
    return 1.0 - cdf_range(model, r) ** model.n_anchors
