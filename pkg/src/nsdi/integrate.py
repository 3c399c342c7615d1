"""Adaptive trajectory integration with event tagging.

The heavy lifting happens in the compiled Dormand-Prince 8(5,3) core
(_kernels.integrate_core); this module owns configuration, buffer
management, the TrajectoryRecord container and high-precision event
refinement.

A trajectory run covers the pulse [t0, T_d] plus a field-free coda: the
integration continues until the electron passes r_escape (only checked
once the pulse is over, so the field never gets truncated) or until
t_end, whichever comes first. The accumulated work integral
W(t) = int dH/dt dt rides along as an extra state component, giving the
energy-balance residual H(t) - H(t0) - W(t) as a per-trajectory
diagnostic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .fields import FieldParams
from .models import STATE_DIM, model_id, pack_params

TERMINATION_NAMES = {
    _kernels.STATUS_COMPLETED: "completed",
    _kernels.STATUS_ESCAPED: "completed",
    _kernels.STATUS_DEEP_ENCOUNTER: "deep_encounter_abort",
    _kernels.STATUS_STEP_UNDERFLOW: "step_underflow",
    _kernels.STATUS_BUDGET_EXHAUSTED: "step_underflow",
}

EVENT_NAMES = {
    _kernels.EV_SADDLE_OUT: "saddle_out",
    _kernels.EV_SADDLE_IN: "saddle_in",
    _kernels.EV_ESCAPE_RADIUS: "escape_radius",
    _kernels.EV_DEEP_ENCOUNTER: "deep_encounter",
}

CSV_HEADER = ["t", "x_or_rho", "y_or_z", "px", "py", "H", "r", "r_saddle"]


class NoCrossingError(RuntimeError):
    """locate_event found no sign change of the predicate."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control and termination settings (atomic units).

    dt_init doubles as the step-size ceiling so that event detection never
    skips over a feature shorter than the initial step.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    dt_init: float = 0.25
    dt_min: float = 1e-12
    r_min: float = 1e-3
    r_escape: float = 500.0
    t_end: Optional[float] = None
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if not self.dt_min < self.dt_init:
            raise ValueError("dt_min must be smaller than dt_init")
        if self.r_min <= 0.0:
            raise ValueError("r_min must be positive")
        if self.r_escape <= 0.0:
            raise ValueError("r_escape must be positive")

    def resolved_t_end(self, params: FieldParams) -> float:
        """Pulse plus a two-pulse-length field-free coda unless overridden."""
        if self.t_end is not None:
            return self.t_end
        return 3.0 * params.T_d


@dataclass(frozen=True)
class Event:
    """A tagged instant on a trajectory, state interpolated to the crossing."""

    kind: str
    t: float
    state: np.ndarray


@dataclass
class TrajectoryRecord:
    """Integration output: samples, events and termination bookkeeping.

    states rows hold the bare dynamical variables (no work component);
    extra diagnostics are split out as energy / radius / saddle_radius /
    min_sep / work arrays aligned with t.
    """

    model: str
    n_electrons: int
    params: FieldParams
    config: IntegratorConfig
    t: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    radius: np.ndarray
    saddle_radius: np.ndarray
    min_sep: np.ndarray
    work: np.ndarray
    events: list
    termination: str
    n_steps: int
    n_rejected: int
    n_events_dropped: int

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def state_final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def energy_final(self) -> float:
        return float(self.energy[-1])

    @property
    def escaped(self) -> bool:
        return any(ev.kind == "escape_radius" for ev in self.events)

    def samples(self) -> list:
        """Ordered (t, state, H, saddle_distance) tuples."""
        return [(float(self.t[i]), self.states[i], float(self.energy[i]),
                 float(self.radius[i] - self.saddle_radius[i]))
                for i in range(len(self.t))]

    def energy_balance_residual(self) -> float:
        """|H(t1) - H(t0) - int dH/dt| over the recorded span."""
        return abs(self.energy[-1] - self.energy[0]
                   - (self.work[-1] - self.work[0]))

    def write_csv(self, path) -> None:
        """Dump samples for the planar models; 17 significant digits."""
        if self.model == "full3d":
            raise ValueError("CSV dump is defined for the 4-dimensional models only")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for i in range(len(self.t)):
                row = [self.t[i], self.states[i, 0], self.states[i, 1],
                       self.states[i, 2], self.states[i, 3],
                       self.energy[i], self.radius[i], self.saddle_radius[i]]
                w.writerow([f"{v:.17g}" for v in row])


def _as_state_array(model: str, state) -> np.ndarray:
    if hasattr(state, "as_array"):
        arr = state.as_array()
    else:
        arr = np.asarray(state, dtype=float)
    dim = STATE_DIM[model]
    if arr.shape != (dim,):
        raise ValueError(f"{model} state must have {dim} components, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state contains non-finite values")
    return arr.astype(float)


def integrate(model: str, state0, t0: float, config: IntegratorConfig,
              params: FieldParams, n: int = 2,
              record_every: int = 1) -> TrajectoryRecord:
    """Integrate one trajectory from (t0, state0) to completion.

    record_every k stores every k-th accepted step (plus initial and final
    states); 0 stores endpoints only, which is what large ensembles use.
    The step sequence is identical regardless of the recording mode, so
    results are bit-reproducible across modes.
    """
    mid = model_id(model)
    if t0 < 0.0:
        raise ValueError("t0 must be non-negative")
    y0 = _as_state_array(model, state0)
    t_end = config.resolved_t_end(params)
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    pars = pack_params(params, model, n)

    dim = y0.shape[0] + 1
    y = np.zeros(dim)
    y[:-1] = y0

    cap = 4096 if record_every > 0 else 4
    ev_cap = 1024
    out_t = np.empty(cap)
    out_y = np.empty((cap, dim))
    out_extra = np.empty((cap, 4))
    ev_kind = np.zeros(ev_cap, dtype=np.int64)
    ev_t = np.empty(ev_cap)
    ev_y = np.empty((ev_cap, dim))

    io = np.zeros(8)
    io[0] = t0
    io[1] = config.dt_init
    io[2] = 1e-4

    while True:
        status = _kernels.integrate_core(
            mid, y, io, t_end, pars,
            config.rel_tol, config.abs_tol, config.dt_min, config.dt_init,
            config.r_min, config.r_escape, float(config.max_steps),
            record_every,
            out_t, out_y, out_extra, ev_kind, ev_t, ev_y)
        if status != _kernels.STATUS_SAMPLES_FULL:
            break
        grown_t = np.empty(2 * out_t.shape[0])
        grown_y = np.empty((2 * out_t.shape[0], dim))
        grown_extra = np.empty((2 * out_t.shape[0], 4))
        ns = int(io[5])
        grown_t[:ns] = out_t[:ns]
        grown_y[:ns] = out_y[:ns]
        grown_extra[:ns] = out_extra[:ns]
        out_t, out_y, out_extra = grown_t, grown_y, grown_extra

    ns = int(io[5])
    ne = int(io[6])
    events = [Event(EVENT_NAMES[int(ev_kind[i])], float(ev_t[i]),
                    ev_y[i, :-1].copy())
              for i in range(ne)]

    return TrajectoryRecord(
        model=model, n_electrons=(n if model == "ngon" else 2),
        params=params, config=config,
        t=out_t[:ns].copy(),
        states=out_y[:ns, :-1].copy(),
        energy=out_extra[:ns, 0].copy(),
        radius=out_extra[:ns, 1].copy(),
        saddle_radius=out_extra[:ns, 2].copy(),
        min_sep=out_extra[:ns, 3].copy(),
        work=out_y[:ns, -1].copy(),
        events=events,
        termination=TERMINATION_NAMES[status],
        n_steps=int(io[3]),
        n_rejected=int(io[4]),
        n_events_dropped=int(io[7]),
    )


def _hermite_state(record: TrajectoryRecord, i: int, tq: float,
                   pars: np.ndarray) -> np.ndarray:
    """Cubic Hermite interpolation of the state between samples i and i+1."""
    mid = model_id(record.model)
    t0, t1 = record.t[i], record.t[i + 1]
    h = t1 - t0
    dim = record.states.shape[1]
    y0 = np.concatenate([record.states[i], [0.0]])
    y1 = np.concatenate([record.states[i + 1], [0.0]])
    f0 = np.empty(dim + 1)
    f1 = np.empty(dim + 1)
    _kernels.rhs(mid, t0, y0, f0, pars)
    _kernels.rhs(mid, t1, y1, f1, pars)
    s = (tq - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return (h00 * y0[:-1] + h10 * h * f0[:-1]
            + h01 * y1[:-1] + h11 * h * f1[:-1])


def locate_event(record: TrajectoryRecord,
                 predicate: Callable[[float, np.ndarray], float],
                 t_from: float = -math.inf) -> tuple:
    """Refine the first sign change of predicate(t, state) after t_from.

    Works on the recorded samples: finds the first bracketing pair, then
    polishes the crossing with brentq on a cubic Hermite interpolant of
    the state. Returns (t_cross, state_cross). Raises NoCrossingError when
    the predicate never changes sign over the recorded span.
    """
    if len(record.t) < 2:
        raise NoCrossingError("record holds fewer than two samples")
    pars = pack_params(record.params, record.model, record.n_electrons)
    vals = np.array([predicate(float(record.t[i]), record.states[i])
                     for i in range(len(record.t))])
    for i in range(len(vals) - 1):
        if record.t[i + 1] <= t_from:
            continue
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            return float(record.t[i]), record.states[i].copy()
        if (a < 0.0 <= b) or (a > 0.0 >= b):
            def g(tq):
                return predicate(tq, _hermite_state(record, i, tq, pars))

            ta, tb = float(record.t[i]), float(record.t[i + 1])
            ga, gb = g(ta), g(tb)
            if ga == 0.0:
                tc = ta
            elif gb == 0.0 or ga * gb > 0.0:
                # interpolant disagrees at the ends; fall back to the grid
                tc = tb
            else:
                tc = brentq(g, ta, tb, xtol=1e-12, rtol=8.9e-16)
            return tc, _hermite_state(record, i, tc, pars)
    raise NoCrossingError("predicate does not change sign on the recorded span")


def zero_field_reference(model: str, state0, t_span: float,
                         config: IntegratorConfig, n: int = 2,
                         record_every: int = 1) -> TrajectoryRecord:
    """Integrate with the field switched off entirely (F_peak = 0).

    Convenience wrapper for conservation tests: the Hamiltonian is then a
    strict invariant and any drift is pure integrator error.
    """
    params = FieldParams(F_peak=0.0)
    cfg = replace(config, t_end=t_span)
    return integrate(model, state0, 0.0, cfg, params, n=n,
                     record_every=record_every)
