"""Discretized DOA output space: label encoders, decoders, and distances.

The azimuth range ``r`` (180 degrees for a linear array, 360 for a planar
one) is split into ``I = r / l`` cells of width ``l`` degrees, giving the
class set ``{0, 1, ..., I}`` with class ``i`` centred at ``i * l`` degrees.
A ground-truth angle becomes a label vector through one of four encoders:

* one-hot: all mass on the nearest class; loses the sub-cell position.
* ULD (unbiased label distribution): mass split between the two classes
  bracketing the angle so that the probability-weighted class centre equals
  the angle exactly.  The encoding is injective, so decoding it back is free
  of quantization error.
* GLC (Gaussian label coding): unnormalized Gaussian kernel, peak 1 at the
  angle; the entries do not sum to 1.
* SLD (soft label distribution): the same kernel normalized to sum 1.

A predicted vector is mapped back to an angle by Top-1 decoding (peak class
centre) or by weighted adjacent decoding, which averages the class centres
of the peak and one (WAD-2) or both (WAD-3) of its neighbours, weighted by
their probabilities.  Top-1 decoding of a perfect classifier still incurs a
mean absolute error of ``l / 4`` on uniformly distributed angles; WAD
applied to an exact ULD recovers the angle exactly.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDistributionError, DomainError


class LabelKind(str, enum.Enum):
    """Which encoder produced a label distribution."""

    ONE_HOT = "one_hot"
    ULD = "uld"
    GLC = "glc"
    SLD = "sld"


class DecodingMethod(str, enum.Enum):
    """Which rule mapped a distribution back to an angle."""

    TOP1 = "top1"
    WAD2 = "wad2"
    WAD3 = "wad3"


def round_half_up(x):
    """Round to the nearest integer with exact halves rounding up.

    Works on scalars and arrays.  The half-up rule matches the ULD
    convention that a fractional part of exactly 0.5 weights the upper
    class as strongly as the lower one.
    """
    if np.isscalar(x):
        return int(math.floor(x + 0.5))
    return np.floor(np.asarray(x) + 0.5).astype(int)


@dataclass(frozen=True)
class OutputSpace:
    """Geometry of the discretized DOA domain.

    Args:
        range_deg: total azimuth range ``r`` in degrees (180 or 360 for the
            standard array layouts, but any positive value is accepted).
        cell_deg: cell width ``l`` in degrees; must divide ``range_deg``.

    The derived ``num_cells`` is ``I = r / l``; label vectors over this
    space have ``I + 1`` entries.  ``circular`` is true exactly when the
    range spans the full 360 degrees.
    """

    range_deg: float
    cell_deg: float
    num_cells: int = field(init=False)
    circular: bool = field(init=False)

    def __post_init__(self):
        if self.cell_deg <= 0:
            raise DomainError(f"cell width must be positive, got {self.cell_deg}")
        cells = round(self.range_deg / self.cell_deg)
        if cells < 1 or abs(cells * self.cell_deg - self.range_deg) > 1e-9:
            raise DomainError(
                f"cell width {self.cell_deg} does not divide range {self.range_deg}"
            )
        object.__setattr__(self, "num_cells", int(cells))
        object.__setattr__(self, "circular", self.range_deg == 360)

    @property
    def num_classes(self) -> int:
        return self.num_cells + 1

    def class_centers(self) -> np.ndarray:
        """Centre angle of every class, in degrees."""
        return np.arange(self.num_classes) * self.cell_deg

    def check_position(self, p: float) -> float:
        if not 0 <= p <= self.range_deg:
            raise DomainError(f"position {p} outside [0, {self.range_deg}]")
        return float(p)

    def class_of(self, p) -> int | np.ndarray:
        """Nearest class index of an angle (half-up tie rule)."""
        if np.isscalar(p):
            self.check_position(p)
            return round_half_up(p / self.cell_deg)
        return round_half_up(np.asarray(p, dtype=float) / self.cell_deg)

    def to_json_dict(self) -> dict:
        return {"range_deg": self.range_deg, "cell_deg": self.cell_deg}

    @classmethod
    def from_json_dict(cls, d: dict) -> "OutputSpace":
        return cls(range_deg=d["range_deg"], cell_deg=d["cell_deg"])


@dataclass(frozen=True)
class Position:
    """An angle ``p`` with its scaled coordinate ``gamma = p / l``."""

    p: float
    gamma: float

    @classmethod
    def in_space(cls, space: OutputSpace, p: float) -> "Position":
        space.check_position(p)
        return cls(p=float(p), gamma=float(p) / space.cell_deg)

    @property
    def int_part(self) -> int:
        return int(math.floor(self.gamma))

    @property
    def frac_part(self) -> float:
        return self.gamma - self.int_part


@dataclass(frozen=True)
class LabelDistribution:
    """A length ``I + 1`` label vector plus the encoder that produced it."""

    values: np.ndarray
    kind: LabelKind

    def __len__(self) -> int:
        return len(self.values)

    def to_json(self) -> str:
        """Serialize as a flat JSON array."""
        return json.dumps([float(v) for v in self.values])

    @classmethod
    def from_json(cls, text: str, kind: LabelKind) -> "LabelDistribution":
        return cls(values=np.asarray(json.loads(text), dtype=float), kind=kind)


@dataclass(frozen=True)
class DecodedPosition:
    """An estimated angle in degrees and the decoding rule that produced it."""

    p_hat: float
    method: DecodingMethod


def _values(dist) -> np.ndarray:
    if isinstance(dist, LabelDistribution):
        return np.asarray(dist.values, dtype=float)
    return np.asarray(dist, dtype=float)


def _check_length(space: OutputSpace, y: np.ndarray) -> np.ndarray:
    if y.ndim != 1 or len(y) != space.num_classes:
        raise DomainError(
            f"distribution length {y.shape} does not match {space.num_classes} classes"
        )
    return y


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------


def encode_one_hot(space: OutputSpace, p: float) -> LabelDistribution:
    """One-hot label: probability 1 on the class nearest to ``p``.

    Ties at exact half-cell positions round up.  The mapping is not
    injective: every angle in a half-open cell collapses onto its centre.
    """
    pos = Position.in_space(space, p)
    values = np.zeros(space.num_classes)
    values[round_half_up(pos.gamma)] = 1.0
    return LabelDistribution(values=values, kind=LabelKind.ONE_HOT)


def encode_uld(space: OutputSpace, p: float) -> LabelDistribution:
    """Unbiased label distribution: mass split across the bracketing classes.

    With ``gamma = p / l``, class ``int(gamma)`` receives ``1 - frac(gamma)``
    and class ``int(gamma) + 1`` receives ``frac(gamma)``.  The weighted sum
    of class centres then reproduces ``p`` exactly, which makes the encoding
    injective and therefore free of quantization error.
    """
    pos = Position.in_space(space, p)
    values = np.zeros(space.num_classes)
    lower, frac = pos.int_part, pos.frac_part
    values[lower] = 1.0 - frac
    if frac > 0:
        values[lower + 1] = frac
    return LabelDistribution(values=values, kind=LabelKind.ULD)


def encode_glc(space: OutputSpace, p: float, sigma: float) -> LabelDistribution:
    """Gaussian label coding: unnormalized kernel exp(-(i*l - p)^2 / (2 sigma^2)).

    ``sigma`` is in degrees.  The peak value is at most 1 and the entries do
    not sum to 1, so this encoding is incompatible with losses that require
    unit total mass.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    space.check_position(p)
    centers = space.class_centers()
    values = np.exp(-((centers - p) ** 2) / (2.0 * sigma**2))
    return LabelDistribution(values=values, kind=LabelKind.GLC)


def encode_sld(space: OutputSpace, p: float, sigma: float) -> LabelDistribution:
    """Soft label distribution: the Gaussian kernel of ``encode_glc`` normalized to sum 1."""
    kernel = encode_glc(space, p, sigma).values
    return LabelDistribution(values=kernel / kernel.sum(), kind=LabelKind.SLD)


ENCODER_NAMES = ("one_hot", "uld", "glc", "sld")


def encode_positions(
    encoding: str,
    space: OutputSpace,
    positions,
    *,
    glc_sigma: float = 8.0,
) -> np.ndarray:
    """Encode a batch of angles into a (N, I+1) label matrix."""
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    if encoding == "one_hot":
        rows = [encode_one_hot(space, p).values for p in positions]
    elif encoding == "uld":
        rows = [encode_uld(space, p).values for p in positions]
    elif encoding == "glc":
        rows = [encode_glc(space, p, glc_sigma).values for p in positions]
    elif encoding == "sld":
        rows = [encode_sld(space, p, glc_sigma).values for p in positions]
    else:
        raise DomainError(f"unknown encoding {encoding!r}; expected one of {ENCODER_NAMES}")
    return np.stack(rows)


# ---------------------------------------------------------------------------
# Decoders
# ---------------------------------------------------------------------------


def peak_class(dist) -> int:
    """Index of the peak probability; ties break toward the lowest index."""
    y = _values(dist)
    if y.size == 0:
        raise DomainError("empty distribution")
    return int(np.argmax(y))


def decode_top1(space: OutputSpace, dist) -> DecodedPosition:
    """Peak-class decoding: the centre of the highest-probability class."""
    y = _check_length(space, _values(dist))
    return DecodedPosition(
        p_hat=peak_class(y) * space.cell_deg, method=DecodingMethod.TOP1
    )


def _neighbor_weight(y: np.ndarray, idx: int) -> float:
    # Conceptual zero padding on both sides of the class axis.
    if 0 <= idx < len(y):
        return float(y[idx])
    return 0.0


def decode_wad2(space: OutputSpace, dist) -> DecodedPosition:
    """Weighted adjacent decoding over the peak class and its stronger neighbour.

    The distribution is conceptually padded with zeros on both sides, the
    higher-probability neighbour of the peak is selected (ties go right),
    and the estimate is the probability-weighted mean of the two class
    centres.  Applied to an exact ULD this recovers the encoded angle.
    """
    y = _check_length(space, _values(dist))
    k = peak_class(y)
    left = _neighbor_weight(y, k - 1)
    right = _neighbor_weight(y, k + 1)
    if right >= left:
        kh, wh = k + 1, right
    else:
        kh, wh = k - 1, left
    denom = y[k] + wh
    if denom <= 0:
        raise DegenerateDistributionError("distribution has no mass at its peak")
    p_hat = (y[k] * k + wh * kh) * space.cell_deg / denom
    return DecodedPosition(p_hat=float(p_hat), method=DecodingMethod.WAD2)


def decode_wad3(space: OutputSpace, dist) -> DecodedPosition:
    """Weighted adjacent decoding over the peak class and both neighbours."""
    y = _check_length(space, _values(dist))
    k = peak_class(y)
    weights = np.array(
        [_neighbor_weight(y, k - 1), float(y[k]), _neighbor_weight(y, k + 1)]
    )
    indices = np.array([k - 1, k, k + 1], dtype=float)
    denom = weights.sum()
    if denom <= 0:
        raise DegenerateDistributionError("distribution has no mass at its peak")
    p_hat = float((weights * indices).sum() * space.cell_deg / denom)
    return DecodedPosition(p_hat=p_hat, method=DecodingMethod.WAD3)


DECODERS = {
    "top1": decode_top1,
    "wad2": decode_wad2,
    "wad3": decode_wad3,
}


# ---------------------------------------------------------------------------
# Distances and error limits
# ---------------------------------------------------------------------------


def wasserstein_1d(a, b) -> float:
    """Wasserstein (earth mover) distance between two label distributions.

    Uses the one-dimensional closed form: the sum of absolute differences of
    the cumulative distributions.  The result is in class units; multiply by
    the cell width for degrees.

    Raises:
        DomainError: if lengths differ or the total masses disagree by more
            than 1e-6 (transport requires equal mass).
    """
    ya, yb = _values(a), _values(b)
    if ya.shape != yb.shape:
        raise DomainError(f"length mismatch: {ya.shape} vs {yb.shape}")
    if abs(ya.sum() - yb.sum()) > 1e-6:
        raise DomainError(
            f"mass mismatch: {ya.sum()!r} vs {yb.sum()!r} exceeds 1e-6"
        )
    return float(np.abs(np.cumsum(ya - yb)).sum())


def quantization_error_limit(positions, space: OutputSpace) -> float:
    """Mean absolute error of a perfect classifier under Top-1 decoding.

    For each angle this is the distance to the nearest class centre; on
    uniformly distributed angles the expectation is ``l / 4``.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise DomainError("empty position list")
    nearest = np.floor(positions / space.cell_deg + 0.5) * space.cell_deg
    return float(np.mean(np.abs(positions - nearest)))
