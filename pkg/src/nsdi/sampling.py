"""Microcanonical initial conditions for the symmetric two-electron model.

Ensembles start at t = 0 where the pulse envelope is exactly zero, so the
initial Hamiltonian is field-free:

    H = px^2 + py^2 + V0(x, y),    V0 = -4/r + 1/(2y)

For a Hamiltonian quadratic in the momenta the microcanonical measure
delta(E - H) factorizes: integrating out the momenta at fixed (x, y) gives
a constant (the momentum shell px^2 + py^2 = E - V0 is a circle whose
circumference-to-gradient ratio is independent of position). The measure
is therefore uniform over the allowed position region {V0 <= E, y > 0}
times a uniform angle on the momentum circle of radius sqrt(E - V0).
That is exactly how draw() samples; the test suite cross-checks it against
a brute-force 4-D thin-shell rejection sampler.

Each trajectory index gets its own counter-derived RNG stream, so samples
are reproducible and independent of evaluation order across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .fields import FieldParams
from .models import SymState2e, potential_sym2e

_ZERO_FIELD = FieldParams(F_peak=0.0)


def potential_field_free(x: float, y: float) -> float:
    """V0(x, y) of the symmetric pair with the field off."""
    return potential_sym2e(x, y, 0.0, _ZERO_FIELD)


@dataclass(frozen=True)
class SamplingRegion:
    """Bounding box of the allowed position region."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("degenerate sampling box")
        if self.y_min < 0.0:
            raise ValueError("y_min must be non-negative")


@dataclass(frozen=True)
class EnsembleSpec:
    """Defines a reproducible microcanonical ensemble.

    E_tilde is the shell energy (must be negative: the allowed region of a
    non-negative energy is unbounded). region defaults to a box derived
    from E_tilde.
    """

    E_tilde: float
    n_samples: int
    master_seed: int
    region: Optional[SamplingRegion] = None

    def __post_init__(self):
        if self.E_tilde >= 0.0:
            raise ValueError("shell energy must be negative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    def resolved_region(self) -> SamplingRegion:
        return self.region if self.region is not None else derive_region(self.E_tilde)


def derive_region(e_tilde: float) -> SamplingRegion:
    """Bounding box of {V0 <= E}.

    |x| is bounded by where even the pure attraction -4/r cannot reach E;
    the y ceiling comes from solving V0(0, y) = E on the axis, where V0 is
    least repulsive for given y.
    """
    if e_tilde >= 0.0:
        raise ValueError("shell energy must be negative")
    x_max = 4.0 / abs(e_tilde)
    # V0(0, y) = -3.5/y is monotone increasing in y, one root
    y_hi = 8.0 / abs(e_tilde)
    y_max = brentq(lambda y: potential_field_free(0.0, y) - e_tilde,
                   1e-12, y_hi, xtol=1e-12, rtol=8.9e-16)
    return SamplingRegion(-x_max, x_max, 0.0, y_max)


def derive_stream(master_seed: int, index: int) -> np.random.Generator:
    """Independent, order-insensitive RNG stream for one trajectory index."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


def sample_initial(spec: EnsembleSpec, index: int,
                   max_tries: int = 10_000) -> tuple:
    """Draw (SymState2e, phi) for trajectory `index` of the ensemble.

    Positions are rejection-sampled uniformly over the allowed region, the
    momentum angle is uniform on the energy circle, and the carrier phase
    phi is uniform on [0, 2 pi). Raises RuntimeError when the region
    rejects max_tries draws in a row (a sign the box and the shell energy
    do not match).
    """
    if not 0 <= index < spec.n_samples:
        raise IndexError("index outside the ensemble")
    rng = derive_stream(spec.master_seed, index)
    region = spec.resolved_region()
    for _ in range(max_tries):
        x = rng.uniform(region.x_min, region.x_max)
        y = rng.uniform(region.y_min, region.y_max)
        if y <= 0.0:
            continue
        v = potential_field_free(x, y)
        if v > spec.E_tilde:
            continue
        p_mag = math.sqrt(spec.E_tilde - v)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        state = SymState2e(x=x, y=y,
                           px=p_mag * math.cos(angle),
                           py=p_mag * math.sin(angle))
        return state, phi
    raise RuntimeError(
        f"rejection sampling failed {max_tries} times for index {index}; "
        "the sampling box appears inconsistent with the shell energy")


def thin_shell_oracle(e_tilde: float, n: int, seed: int,
                      shell_width: float = 1e-3,
                      p_cap: float = 6.0,
                      v_floor: Optional[float] = None) -> np.ndarray:
    """Brute-force microcanonical positions via 4-D thin-shell rejection.

    Draws (x, y, px, py) uniformly in a box and keeps |H - E| < width/2.
    The momentum box only covers kinetic energies up to p_cap, so the
    result is valid on the sub-region where E - V0 <= p_cap - margin;
    callers restrict comparisons accordingly (v_floor marks the potential
    cutoff actually covered). Returns accepted (x, y) pairs.

    Deliberately independent of draw(): no shared derivation beyond the
    Hamiltonian itself.
    """
    region = derive_region(e_tilde)
    if v_floor is None:
        v_floor = e_tilde - (p_cap - 10.0 * shell_width)
    rng = np.random.default_rng(seed)
    p_max = math.sqrt(p_cap)
    out = []
    batch = 200_000
    while len(out) < n:
        x = rng.uniform(region.x_min, region.x_max, batch)
        y = rng.uniform(region.y_min, region.y_max, batch)
        px = rng.uniform(-p_max, p_max, batch)
        py = rng.uniform(-p_max, p_max, batch)
        ok = y > 1e-9
        r = np.hypot(x, y)
        v = np.where(ok, -4.0 / np.where(ok, r, 1.0)
                     + 0.5 / np.where(ok, y, 1.0), np.inf)
        h = px * px + py * py + v
        keep = (np.abs(h - e_tilde) < 0.5 * shell_width) & (v >= v_floor)
        for xi, yi in zip(x[keep], y[keep]):
            out.append((xi, yi))
    return np.array(out[:n])
