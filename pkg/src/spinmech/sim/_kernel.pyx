# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepper for the coupled spin / oscillator system.

Mirrors ``_pykernel.step_block`` operation for operation.
"""
from libc.math cimport exp, cos, sin, isfinite

# state layout
DEF X = 0
DEF V = 1
DEF R11 = 2
DEF RE = 3
DEF IM = 4

# param layout
DEF DT = 0
DEF W0SQ = 1
DEF C_OU = 2
DEF S_OU = 3
DEF KAPPA = 4
DEF G = 5
DEF DELTA = 6
DEF OMEGA = 7
DEF GAMMA2 = 8
DEF GLAS = 9
DEF MODEL = 10

DEF POP_TOL = 1e-6


cdef inline void spin_step(double* s, const double* p, double x) noexcept nogil:
    cdef double dt = p[DT]
    cdef double d = p[DELTA] - p[G] * x
    cdef double g2 = p[GAMMA2]
    cdef double gl = p[GLAS]
    cdef double om = p[OMEGA]
    cdef double lor, rate, target, e, h
    cdef double er, ei, zr, zi, nr, ni, den, pr, pi_, beta, re, im
    if p[MODEL] == 1.0:
        lor = 1.0 / (1.0 + (d / g2) * (d / g2))
        rate = om * om * lor / g2
        target = 0.5 * rate / (gl + rate)
        s[R11] = target + (s[R11] - target) * exp(-(gl + rate) * dt)
    elif p[MODEL] == 2.0:
        h = 0.5 * dt
        e = exp(-gl * h)
        s[R11] = s[R11] * e - om * s[IM] / gl * (1.0 - e)
        # exact coherence step with rho11 frozen: z = -Gamma2 + i d
        zr = -g2
        zi = d
        e = exp(zr * dt)
        er = e * cos(zi * dt)
        ei = e * sin(zi * dt)
        nr = er - 1.0
        ni = ei
        den = zr * zr + zi * zi
        pr = (nr * zr + ni * zi) / den
        pi_ = (ni * zr - nr * zi) / den
        beta = 0.5 * om * (2.0 * s[R11] - 1.0)  # source is i * beta
        re = er * s[RE] - ei * s[IM] - pi_ * beta
        im = er * s[IM] + ei * s[RE] + pr * beta
        s[RE] = re
        s[IM] = im
        e = exp(-gl * h)
        s[R11] = s[R11] * e - om * s[IM] / gl * (1.0 - e)


cdef inline double accel(const double* s, const double* p) noexcept nogil:
    return -p[W0SQ] * s[X] + p[KAPPA] * s[R11]


def step_block(double[::1] state, double[::1] params, const double[::1] noise,
               long stride, long step0, double[:, ::1] out, long row0):
    """Advance ``len(noise)`` steps in place.

    Rows are written to ``out`` every ``stride`` global steps starting at
    ``row0``. Returns ``(status, steps_done, rows_written)`` with status
    0 ok, 1 non-finite state, 2 population out of bounds.
    """
    cdef long n = noise.shape[0]
    cdef long i, row = row0
    cdef int status = 0
    cdef double* s = &state[0]
    cdef const double* p = &params[0]
    cdef double dt = params[DT]
    cdef double half = 0.5 * dt
    cdef double c = params[C_OU]
    cdef double sig = params[S_OU]
    cdef double a
    with nogil:
        a = accel(s, p)
        for i in range(n):
            s[V] += half * a
            s[X] += half * s[V]
            spin_step(s, p, s[X])
            s[V] = c * s[V] + sig * noise[i]
            s[X] += half * s[V]
            a = accel(s, p)
            s[V] += half * a
            if not (isfinite(s[X]) and isfinite(s[V]) and isfinite(s[R11])):
                status = 1
                break
            if s[R11] < -POP_TOL or s[R11] > 1.0 + POP_TOL:
                status = 2
                break
            if (step0 + i + 1) % stride == 0:
                out[row, 0] = s[X]
                out[row, 1] = s[V]
                out[row, 2] = s[R11]
                out[row, 3] = s[RE]
                out[row, 4] = s[IM]
                row += 1
    if status != 0:
        return status, i, row - row0
    return status, n, row - row0
