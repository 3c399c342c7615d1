"""Compiled numerical kernels for the trajectory models and the integrator.

Everything in this module is flat float64 math compiled with numba. Input
validation, unit handling and error reporting live in the public wrappers
(models, integrate); the kernels assume well-formed arguments.

Shared conventions
------------------
State vector layouts (the trailing component is always the accumulated
work integral W = int dH/dt dt):

    sym2e   [x, y, px, py, W]                       len 5
    full3d  [x1, y1, z1, x2, y2, z2,
             px1, py1, pz1, px2, py2, pz2, W]       len 13
    ngon    [rho, z, prho, pz, W]                   len 5

Parameter vector layout (built by models.pack_params):

    pars[0] F_peak      peak field amplitude, a.u.
    pars[1] omega       carrier angular frequency, a.u.
    pars[2] phi         carrier-envelope phase, rad
    pars[3] T_d         pulse duration, a.u.
    pars[4] n_elec      electron count (float; relevant for ngon)
    pars[5] rep_coef    ngon repulsion coefficient N(N-1)/(4 sin(pi/N))
    pars[6] sad_coef    saddle indicator constant: r_s^2 * |eps| at the saddle
    pars[7] frozen      nonzero: field held constant at F_peak (no envelope)
    pars[8] gap_coef    nearest-neighbour gap per unit rho: 2 sin(pi/N)
"""

import numpy as np
from numba import njit

MODEL_SYM2E = 0
MODEL_FULL3D = 1
MODEL_NGON = 2

# termination/status codes returned by the integration core
STATUS_COMPLETED = 0
STATUS_ESCAPED = 1
STATUS_DEEP_ENCOUNTER = 2
STATUS_STEP_UNDERFLOW = 3
STATUS_SAMPLES_FULL = 4
STATUS_BUDGET_EXHAUSTED = 5

# event kind codes
EV_SADDLE_OUT = 1
EV_SADDLE_IN = 2
EV_ESCAPE_RADIUS = 3
EV_DEEP_ENCOUNTER = 4

# once the pulse is over the event structure is simple (no saddle, smooth
# escape), so the step-size ceiling may relax by this factor
CODA_CAP_FACTOR = 16.0

# Dormand-Prince 8(5,3) tableau (Hairer's dop853): 12 live stages plus the
# next-step derivative, embedded order-5 and order-3 error estimators.
_DOP853_C = np.array([
    0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274,
    0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077,
    0.6512820512820513, 0.6, 0.8571428571428571, 1.0,
])
_DOP853_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223999, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0],
])
_DOP853_B = np.array([
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
])
_DOP853_E5 = np.array([
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130174,
    0.08192320648511571,
    -0.022355307863886294,
    0.0,
])
_DOP853_E3 = np.array([
    -0.18980075407240762,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    -0.42268232132379197,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
    -0.0971429810803756,
])


@njit(cache=True)
def pulse_envelope(t, T_d):
    """sin^2 envelope, identically zero outside [0, T_d]."""
    if t < 0.0 or t > T_d:
        return 0.0
    s = np.sin(np.pi * t / T_d)
    return s * s


@njit(cache=True)
def effective_field(t, pars):
    """Instantaneous effective field eps(t) = F * f(t) * cos(omega t + phi)."""
    if pars[7] != 0.0:
        return pars[0]
    if t < 0.0 or t > pars[3]:
        return 0.0
    s = np.sin(np.pi * t / pars[3])
    return pars[0] * s * s * np.cos(pars[1] * t + pars[2])


@njit(cache=True)
def effective_field_rate(t, pars):
    """Time derivative of the effective field, d eps / dt."""
    if pars[7] != 0.0:
        return 0.0
    if t < 0.0 or t > pars[3]:
        return 0.0
    T_d = pars[3]
    carrier = pars[1] * t + pars[2]
    s = np.sin(np.pi * t / T_d)
    denv = (np.pi / T_d) * np.sin(2.0 * np.pi * t / T_d)
    return pars[0] * (denv * np.cos(carrier) - s * s * pars[1] * np.sin(carrier))


@njit(cache=True)
def rhs(model, t, y, dy, pars):
    """Equations of motion. Writes the derivative of y into dy."""
    eps = effective_field(t, pars)
    deps = effective_field_rate(t, pars)
    if model == MODEL_SYM2E:
        # Faithful symmetric-pair reduction: the shared coordinates move at
        # the per-electron rate and the pair force is split per electron
        # (the mirrored pair contributes symplectic weight 2).
        x = y[0]
        yy = y[1]
        r2 = x * x + yy * yy
        ir3 = 1.0 / (r2 * np.sqrt(r2))
        dy[0] = y[2]
        dy[1] = y[3]
        dy[2] = -(2.0 * x * ir3 + eps)
        dy[3] = -(2.0 * yy * ir3 - 0.25 / (yy * yy))
        dy[4] = 2.0 * x * deps
    elif model == MODEL_FULL3D:
        n1sq = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
        n2sq = y[3] * y[3] + y[4] * y[4] + y[5] * y[5]
        in1 = 1.0 / (n1sq * np.sqrt(n1sq))
        in2 = 1.0 / (n2sq * np.sqrt(n2sq))
        dx = y[0] - y[3]
        dyy = y[1] - y[4]
        dz = y[2] - y[5]
        ndsq = dx * dx + dyy * dyy + dz * dz
        ind = 1.0 / (ndsq * np.sqrt(ndsq))
        for i in range(6):
            dy[i] = y[6 + i]
        dy[6] = -2.0 * y[0] * in1 + dx * ind - eps
        dy[7] = -2.0 * y[1] * in1 + dyy * ind
        dy[8] = -2.0 * y[2] * in1 + dz * ind
        dy[9] = -2.0 * y[3] * in2 - dx * ind - eps
        dy[10] = -2.0 * y[4] * in2 - dyy * ind
        dy[11] = -2.0 * y[5] * in2 - dz * ind
        dy[12] = (y[0] + y[3]) * deps
    else:
        n = pars[4]
        rep = pars[5]
        rho = y[0]
        z = y[1]
        r2 = rho * rho + z * z
        ir3 = 1.0 / (r2 * np.sqrt(r2))
        dy[0] = y[2]
        dy[1] = y[3]
        dy[2] = -(n * rho * ir3 - rep / (n * rho * rho))
        dy[3] = -(n * z * ir3 + eps)
        dy[4] = n * z * deps


@njit(cache=True)
def hamiltonian(model, t, y, pars):
    """Total energy H(t) of the state y."""
    eps = effective_field(t, pars)
    if model == MODEL_SYM2E:
        r = np.sqrt(y[0] * y[0] + y[1] * y[1])
        return (y[2] * y[2] + y[3] * y[3]
                - 4.0 / r + 0.5 / y[1] + 2.0 * eps * y[0])
    elif model == MODEL_FULL3D:
        n1 = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        n2 = np.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
        dx = y[0] - y[3]
        dyy = y[1] - y[4]
        dz = y[2] - y[5]
        nd = np.sqrt(dx * dx + dyy * dyy + dz * dz)
        kin = 0.0
        for i in range(6, 12):
            kin += y[i] * y[i]
        return 0.5 * kin - 2.0 / n1 - 2.0 / n2 + 1.0 / nd + eps * (y[0] + y[3])
    else:
        n = pars[4]
        rep = pars[5]
        r = np.sqrt(y[0] * y[0] + y[1] * y[1])
        return (n * (y[2] * y[2] + y[3] * y[3]) * 0.5
                - n * n / r + rep / y[0] + n * eps * y[1])


@njit(cache=True)
def radius(model, y):
    """Nuclear distance used for escape bookkeeping.

    For the two independent electrons of full3d this is the smaller of the
    two distances, so escape means both electrons are far out.
    """
    if model == MODEL_FULL3D:
        n1 = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        n2 = np.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
        return min(n1, n2)
    return np.sqrt(y[0] * y[0] + y[1] * y[1])


@njit(cache=True)
def min_separation(model, y, pars):
    """Smallest of all nucleus-electron and electron-electron distances.

    Negative values flag a coordinate-sign violation (y or rho driven
    through zero), which the integrator treats like a collision.
    """
    if model == MODEL_SYM2E:
        r = np.sqrt(y[0] * y[0] + y[1] * y[1])
        return min(r, 2.0 * y[1])
    elif model == MODEL_FULL3D:
        n1 = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        n2 = np.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5])
        dx = y[0] - y[3]
        dyy = y[1] - y[4]
        dz = y[2] - y[5]
        nd = np.sqrt(dx * dx + dyy * dyy + dz * dz)
        return min(min(n1, n2), nd)
    else:
        r = np.sqrt(y[0] * y[0] + y[1] * y[1])
        if pars[8] == 0.0:
            return r
        return min(r, pars[8] * y[0])


@njit(cache=True)
def saddle_indicator(model, t, y, pars):
    """Signed saddle-crossing indicator, positive outside the saddle radius.

    Uses r^2 |eps(t)| - sad_coef, which is smooth through field zeros
    (where the saddle radius itself runs off to infinity) and changes sign
    exactly where r crosses r_s(t) = sqrt(sad_coef / |eps|).
    """
    eps = effective_field(t, pars)
    r = radius(model, y)
    return r * r * np.abs(eps) - pars[6]


@njit(cache=True)
def saddle_radius_of_t(t, pars):
    """Instantaneous saddle radius r_s(t); inf where the field vanishes."""
    eps = effective_field(t, pars)
    if eps == 0.0:
        return np.inf
    return np.sqrt(pars[6] / np.abs(eps))


@njit(cache=True)
def _record(model, t, y, pars, out_t, out_y, out_extra, ns):
    out_t[ns] = t
    for i in range(y.shape[0]):
        out_y[ns, i] = y[i]
    out_extra[ns, 0] = hamiltonian(model, t, y, pars)
    out_extra[ns, 1] = radius(model, y)
    out_extra[ns, 2] = saddle_radius_of_t(t, pars)
    out_extra[ns, 3] = min_separation(model, y, pars)


@njit(cache=True)
def _push_event(kind, t, y, frac, y_new, ev_kind, ev_t, ev_y, io):
    """Store a linearly interpolated event; count it as dropped when full."""
    ne = int(io[6])
    if ne < ev_kind.shape[0]:
        ev_kind[ne] = kind
        ev_t[ne] = t
        for i in range(y.shape[0]):
            ev_y[ne, i] = y[i] + frac * (y_new[i] - y[i])
        io[6] += 1.0
    else:
        io[7] += 1.0


@njit(cache=True)
def integrate_core(model, y, io, t_end, pars,
                   rel_tol, abs_tol, h_min, h_max, r_min, r_escape,
                   max_steps, record_every,
                   out_t, out_y, out_extra,
                   ev_kind, ev_t, ev_y):
    """Adaptive Dormand-Prince 8(5,3) loop with event tagging.

    Mutates y (current state) and io in place so that a caller can grow the
    output buffers and resume seamlessly. io layout:

        io[0] t            current time
        io[1] h            controller step size
        io[2] err_prev     previous accepted error (PI controller memory)
        io[3] n_steps      accepted steps so far
        io[4] n_rejected   rejected attempts so far
        io[5] n_samples    rows used in out_t / out_y / out_extra
        io[6] n_events     rows used in the event buffers
        io[7] ev_dropped   events discarded after the buffer filled

    out_extra rows are [H, r, r_saddle, min_sep]. Event rows store the
    linearly interpolated state at the crossing. Samples are recorded every
    `record_every` accepted steps (0 records endpoints only); the final
    state is always recorded. Escape through r_escape only terminates the
    run once the pulse is over (t >= T_d); during the pulse the crossing is
    tagged but integration continues so the field keeps acting.
    """
    dim = y.shape[0]
    K = np.empty((13, dim))
    y_st = np.empty(dim)
    y_new = np.empty(dim)

    t = io[0]
    h = io[1]
    err_prev = io[2]
    T_d = pars[3]

    cap = out_t.shape[0]

    rhs(model, t, y, K[0], pars)
    sad_prev = saddle_indicator(model, t, y, pars)
    r_prev = radius(model, y)

    # record the initial state of this segment when nothing is stored yet
    if io[5] == 0.0:
        _record(model, t, y, pars, out_t, out_y, out_extra, 0)
        io[5] = 1.0

    status = STATUS_COMPLETED
    just_rejected = False
    while True:
        rem = t_end - t
        if rem <= h_min:
            status = STATUS_COMPLETED
            break
        # keep one output row free so any record this iteration fits
        if int(io[5]) >= cap - 1:
            io[0] = t
            io[1] = h
            io[2] = err_prev
            return STATUS_SAMPLES_FULL
        if io[3] + io[4] >= max_steps:
            status = STATUS_BUDGET_EXHAUSTED
            break

        ha = h
        cap_h = h_max
        if t > T_d and pars[7] == 0.0:
            cap_h = h_max * CODA_CAP_FACTOR
        if ha > cap_h:
            ha = cap_h
        if ha > rem:
            ha = rem
        if ha < h_min:
            status = STATUS_STEP_UNDERFLOW
            break

        # stages (K[0] carried over from the previous accepted step)
        for s in range(1, 12):
            for i in range(dim):
                acc = 0.0
                for j in range(s):
                    a = _DOP853_A[s, j]
                    if a != 0.0:
                        acc += a * K[j, i]
                y_st[i] = y[i] + ha * acc
            rhs(model, t + _DOP853_C[s] * ha, y_st, K[s], pars)
        for i in range(dim):
            acc = 0.0
            for j in range(12):
                b = _DOP853_B[j]
                if b != 0.0:
                    acc += b * K[j, i]
            y_new[i] = y[i] + ha * acc
        rhs(model, t + ha, y_new, K[12], pars)

        # embedded 5th-order error estimate, RMS of the scaled components.
        # The plain estimate (not the deflated 5/3 combination) keeps the
        # controller conservative enough to hold long-run energy drift at
        # the level the default tolerances promise.
        finite = True
        e5 = 0.0
        for i in range(dim):
            if not np.isfinite(y_new[i]):
                finite = False
                break
            scale = abs_tol + rel_tol * max(abs(y[i]), abs(y_new[i]))
            a5 = 0.0
            for j in range(13):
                a5 += _DOP853_E5[j] * K[j, i]
            a5 *= ha / scale
            e5 += a5 * a5
        if finite and not np.isfinite(e5):
            finite = False
        if not finite:
            # a stage ran into a singularity; retreat hard
            io[4] += 1.0
            h = ha * 0.25
            just_rejected = True
            if h < h_min:
                status = STATUS_DEEP_ENCOUNTER
                break
            continue

        err = np.sqrt(e5 / dim)

        if err > 1.0:
            io[4] += 1.0
            h = ha * max(0.2, 0.9 * err ** (-1.0 / 6.0))
            just_rejected = True
            if h < h_min:
                status = STATUS_STEP_UNDERFLOW
                break
            continue

        # accepted
        t_new = t + ha
        io[3] += 1.0

        sad_new = saddle_indicator(model, t_new, y_new, pars)
        r_new = radius(model, y_new)
        ms = min_separation(model, y_new, pars)

        # saddle crossing: linear refinement of the smooth indicator
        if (sad_prev < 0.0 <= sad_new) or (sad_prev >= 0.0 > sad_new):
            frac = sad_prev / (sad_prev - sad_new)
            kind = EV_SADDLE_OUT if sad_new >= 0.0 else EV_SADDLE_IN
            _push_event(kind, t + frac * ha, y, frac, y_new,
                        ev_kind, ev_t, ev_y, io)

        # escape-radius crossing
        if r_prev < r_escape <= r_new:
            frac = (r_escape - r_prev) / (r_new - r_prev)
            _push_event(EV_ESCAPE_RADIUS, t + frac * ha, y, frac, y_new,
                        ev_kind, ev_t, ev_y, io)

        for i in range(dim):
            y[i] = y_new[i]
            K[0, i] = K[12, i]
        t = t_new
        sad_prev = sad_new
        r_prev = r_new

        # PI step controller (accepted branch); no growth right after a
        # rejection, which suppresses accept/reject thrash near close
        # approaches
        if err < 1e-14:
            fac = 5.0
        else:
            fac = 0.9 * err ** (-0.7 / 6.0) * err_prev ** (0.4 / 6.0)
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        if just_rejected and fac > 1.0:
            fac = 1.0
        just_rejected = False
        err_prev = max(err, 1e-5)
        h = ha * fac

        stop = False
        if ms < r_min:
            _push_event(EV_DEEP_ENCOUNTER, t, y, 0.0, y,
                        ev_kind, ev_t, ev_y, io)
            status = STATUS_DEEP_ENCOUNTER
            stop = True
        elif t >= T_d and r_new >= r_escape and pars[7] == 0.0:
            status = STATUS_ESCAPED
            stop = True

        record = stop
        if record_every > 0 and not record:
            record = int(io[3]) % record_every == 0
        if record:
            _record(model, t, y, pars, out_t, out_y, out_extra, int(io[5]))
            io[5] += 1.0
        if stop:
            io[0] = t
            io[1] = h
            io[2] = err_prev
            return status

    io[0] = t
    io[1] = h
    io[2] = err_prev

    # make sure the last state is stored (t range exhausted, or a failure
    # broke the loop before recording)
    ns = int(io[5])
    if out_t[ns - 1] != t:
        _record(model, t, y, pars, out_t, out_y, out_extra, ns)
        io[5] += 1.0
    return status
