"""Trajectory outcome classification and momentum observables.

The ensemble observables live in the planar symmetric subspace, so the
ion recoil along the field axis is -2 px of either electron (the
transverse components of the pair cancel identically) and the signed
transverse momentum of one electron is just py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .fields import FieldParams
from .integrate import TrajectoryRecord

class EmptyEnsembleError(RuntimeError):
    """No double-ionized outcomes to build an observable from."""


TAG_DOUBLE = "double_ionized"
TAG_BOUND = "bound_complex"
TAG_REJECTED = "rejected"

TAGS = (TAG_DOUBLE, TAG_BOUND, TAG_REJECTED)
TAG_CODES = {name: i for i, name in enumerate(TAGS)}

_REJECTED_TERMINATIONS = ("deep_encounter_abort", "step_underflow")

PARALLEL_EDGES = np.linspace(-5.0, 5.0, 101)
PERP_EDGES = np.linspace(0.0, 3.0, 61)
PERP_EDGES_SIGNED = np.linspace(-3.0, 3.0, 121)

SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class Outcome:
    """Final bookkeeping for one planar trajectory."""

    tag: str
    p_parallel_ion: float
    p_perp_electron: float
    final_H: float

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        if self.tag != TAG_REJECTED:
            if not (math.isfinite(self.p_parallel_ion)
                    and math.isfinite(self.p_perp_electron)
                    and math.isfinite(self.final_H)):
                raise ValueError("non-rejected outcome with non-finite fields")


def classify_final(termination: str, h_final: float, r_final: float,
                   radial_rate: float, r_threshold: float = 500.0) -> str:
    """Tag from the quantities available at the end of a run.

    Shared by the record-level classifier and the ensemble worker, which
    reads the same numbers straight out of the stepper buffers.
    """
    if termination in _REJECTED_TERMINATIONS:
        return TAG_REJECTED
    if h_final > 0.0 and r_final >= r_threshold and radial_rate > 0.0:
        return TAG_DOUBLE
    return TAG_BOUND


def radial_rate_sym2e(state: np.ndarray) -> float:
    """d|r|/dt for the planar pair; velocities are (px, py)."""
    x, y, px, py = state[0], state[1], state[2], state[3]
    r = math.hypot(x, y)
    if r == 0.0:
        return 0.0
    return (x * px + y * py) / r


def classify(record: TrajectoryRecord) -> Outcome:
    """Classify a finished planar trajectory.

    Double ionization means the complex still has positive energy at the
    end of the coda and sits beyond the escape radius moving outward;
    anything the integrator gave up on (deep encounter, step underflow)
    is rejected from the statistics.
    """
    if record.model != "sym2e":
        raise ValueError("outcome extraction is defined for the planar "
                         f"symmetric model, got {record.model!r}")
    state = record.state_final
    tag = classify_final(record.termination, record.energy_final,
                         float(record.radius[-1]), radial_rate_sym2e(state),
                         r_threshold=record.config.r_escape)
    if tag == TAG_REJECTED:
        return Outcome(tag, math.nan, math.nan, math.nan)
    return Outcome(tag, -2.0 * float(state[2]), float(state[3]),
                   record.energy_final)


# ---------------------------------------------------------------------------
# histograms

@dataclass(frozen=True)
class Histogram:
    """Fixed-edge histogram with exact integer counts.

    Counts stay integers so partial histograms from parallel workers
    merge associatively and reproducibly; the density view divides by
    (in-range count * bin width) on demand, which makes the density
    integrate to exactly one whenever any sample landed in range.
    """

    edges: np.ndarray
    counts: np.ndarray
    normalization: str = "counts"

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing, length >= 2")
        if counts.shape != (edges.size - 1,):
            raise ValueError("counts length must be len(edges) - 1")
        if self.normalization not in ("counts", "density"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_values(cls, values: Sequence[float], edges: np.ndarray,
                    normalization: str = "counts") -> "Histogram":
        counts, _ = np.histogram(np.asarray(values, dtype=float), bins=edges)
        return cls(edges, counts.astype(np.int64), normalization)

    @property
    def n_in_range(self) -> int:
        return int(self.counts.sum())

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def density(self) -> np.ndarray:
        n = self.n_in_range
        if n == 0:
            raise ValueError("empty histogram has no density")
        return self.counts / (n * self.widths)

    @property
    def values(self) -> np.ndarray:
        if self.normalization == "density":
            return self.density
        return self.counts.astype(float)

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("histogram edges differ")
        return Histogram(self.edges, self.counts + other.counts,
                         self.normalization)

    def as_density(self) -> "Histogram":
        return Histogram(self.edges, self.counts, "density")

    def csv_rows(self) -> list:
        dens = self.density if self.n_in_range else np.zeros(self.counts.size)
        return [(float(self.edges[i]), float(self.edges[i + 1]),
                 int(self.counts[i]), float(dens[i]))
                for i in range(self.counts.size)]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bin_left,bin_right,count,density\n")
            for left, right, count, dens in self.csv_rows():
                fh.write(f"{left:.17g},{right:.17g},{count},{dens:.17g}\n")


def _double_ionized(outcomes: Iterable[Outcome]) -> list:
    return [o for o in outcomes if o.tag == TAG_DOUBLE]


def ion_parallel_histogram(outcomes: Iterable[Outcome],
                           edges: Optional[np.ndarray] = None) -> Histogram:
    """Density of the ion recoil momentum along the field axis."""
    kept = _double_ionized(outcomes)
    if not kept:
        raise EmptyEnsembleError("no double-ionized outcomes to histogram")
    if edges is None:
        edges = PARALLEL_EDGES
    return Histogram.from_values([o.p_parallel_ion for o in kept], edges,
                                 normalization="density")


def perp_electron_histogram(outcomes: Iterable[Outcome],
                            edges: Optional[np.ndarray] = None,
                            magnitude: bool = True) -> Histogram:
    """Density of one electron's transverse momentum.

    The stored observable is signed; the default view histograms the
    magnitude, which is the form the suppression-at-zero claim is about.
    """
    kept = _double_ionized(outcomes)
    if not kept:
        raise EmptyEnsembleError("no double-ionized outcomes to histogram")
    if magnitude:
        if edges is None:
            edges = PERP_EDGES
        vals = [abs(o.p_perp_electron) for o in kept]
    else:
        if edges is None:
            edges = PERP_EDGES_SIGNED
        vals = [o.p_perp_electron for o in kept]
    return Histogram.from_values(vals, edges, normalization="density")


# ---------------------------------------------------------------------------
# shape metrics

def smoothed_density(hist: Histogram, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Moving average of the density over a fixed odd window.

    Ends are zero-padded, which biases the outermost bins downward; the
    metrics below only ever look at interior structure.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(hist.density, kernel, mode="same")


def hump_metric(hist: Histogram, window: int = SMOOTH_WINDOW,
                floor_frac: float = 0.05) -> tuple:
    """(number of strict interior maxima, valley depth at zero).

    Maxima are counted on the smoothed density; bins whose smoothed value
    falls below floor_frac times the global peak do not qualify, which
    keeps single stray counts in the far tail from registering as extra
    humps at realistic sample sizes. The valley depth is the smoothed
    density interpolated at momentum zero divided by the mean smoothed
    density over the maxima; a deep valley between two humps gives a
    ratio well below one. With no interior maximum the ratio is nan.
    """
    if hist.normalization != "density":
        raise ValueError("hump metric expects a density-normalized histogram")
    smooth = smoothed_density(hist, window)
    interior = np.arange(1, smooth.size - 1)
    is_max = (smooth[interior] > smooth[interior - 1]) \
        & (smooth[interior] > smooth[interior + 1]) \
        & (smooth[interior] >= floor_frac * smooth.max())
    maxima = interior[is_max]
    n_max = int(maxima.size)
    if n_max == 0:
        return 0, math.nan
    valley = float(np.interp(0.0, hist.centers, smooth))
    ratio = valley / float(np.mean(smooth[maxima]))
    return n_max, ratio


def zero_suppression(hist: Histogram) -> float:
    """Raw density of the lowest bin over the maximum bin density."""
    if hist.n_in_range == 0:
        return math.nan
    dens = hist.density
    return float(dens[0]) / float(dens.max())


def tail_is_monotone(hist: Histogram, window: int = SMOOTH_WINDOW,
                     rise_tol: float = 0.01) -> bool:
    """Whether the smoothed density decays beyond its mode.

    Monte Carlo noise makes strict monotonicity meaningless in the far
    tail, so each step up is tolerated while it stays below rise_tol
    times the peak of the smoothed density.
    """
    smooth = smoothed_density(hist, window)
    mode = int(np.argmax(smooth))
    tail = smooth[mode:]
    if tail.size < 2:
        return True
    rises = np.diff(tail)
    return bool(np.all(rises <= rise_tol * float(smooth[mode])))


@dataclass(frozen=True)
class SymmetryStats:
    """Evenness diagnostics for a sample that should be symmetric about 0."""

    n: int
    mean: float
    sem: float
    z_mean: float
    skewness: float
    se_skewness: float
    z_skewness: float

    @property
    def symmetric(self) -> bool:
        return abs(self.z_mean) <= 3.0 and abs(self.z_skewness) <= 3.0


def symmetry_stats(values: Sequence[float]) -> SymmetryStats:
    """First- and third-moment checks against symmetry about zero.

    The skewness standard error uses the normal-theory value sqrt(6/n),
    which is the usual scale for unimodal-ish samples of this size.
    """
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < 8:
        raise ValueError("too few values for a symmetry test")
    mean = float(arr.mean())
    std = float(arr.std(ddof=1))
    sem = std / math.sqrt(n)
    centered = arr - mean
    m2 = float(np.mean(centered ** 2))
    m3 = float(np.mean(centered ** 3))
    g1 = m3 / m2 ** 1.5 if m2 > 0 else 0.0
    se_g1 = math.sqrt(6.0 / n)
    return SymmetryStats(n=n, mean=mean, sem=sem,
                         z_mean=mean / sem if sem > 0 else 0.0,
                         skewness=g1, se_skewness=se_g1,
                         z_skewness=g1 / se_g1)


# ---------------------------------------------------------------------------
# saddle-crossing timing

def time_to_nearest_extremum(t: float, params: FieldParams) -> float:
    """|t - t_k| to the nearest carrier extremum.

    Extrema of cos(omega t + phi) sit where the argument is a multiple of
    pi, so the distance is a modular one and never exceeds a quarter
    cycle. The envelope shifts the exact field extrema slightly; the
    carrier lattice is the reference the timing statistics are pinned to.
    """
    x = params.omega * t + params.phi
    half = 0.5 * math.pi
    return abs((x + half) % math.pi - half) / params.omega


def timing_fractions(offsets: Sequence[float], omega: float) -> dict:
    """Fractions of crossing offsets inside fixed fractions of a cycle.

    The carrier extrema are spaced half a cycle apart, so the half-cycle
    fraction is saturated by construction; the eighth-cycle fraction is
    the one that actually measures clustering at the extrema.
    """
    arr = np.asarray([o for o in offsets if math.isfinite(o)], dtype=float)
    cycle = 2.0 * math.pi / omega
    if arr.size == 0:
        return {"n": 0, "half_cycle": math.nan, "quarter_cycle": math.nan,
                "eighth_cycle": math.nan, "mean_abs_cos": math.nan}
    return {
        "n": int(arr.size),
        "half_cycle": float(np.mean(arr <= 0.5 * cycle)),
        "quarter_cycle": float(np.mean(arr <= 0.25 * cycle)),
        "eighth_cycle": float(np.mean(arr <= 0.125 * cycle)),
        "mean_abs_cos": float(np.mean(np.abs(np.cos(omega * arr)))),
    }
