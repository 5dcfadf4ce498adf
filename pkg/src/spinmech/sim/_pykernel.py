"""Pure-Python stepper, used when the compiled extension is unavailable.

Same scheme and operation order as ``_kernel.pyx``, so the two agree bit
for bit (the extension is built without FMA contraction or sincos fusion).
"""
from math import cos, exp, isfinite, sin

POP_TOL = 1e-6


def _spin_step(s, p, x):
    dt, _, _, _, _, G, delta, om, g2, gl, model = p
    d = delta - G * x
    if model == 1.0:
        lor = 1.0 / (1.0 + (d / g2) * (d / g2))
        rate = om * om * lor / g2
        target = 0.5 * rate / (gl + rate)
        s[2] = target + (s[2] - target) * exp(-(gl + rate) * dt)
    elif model == 2.0:
        h = 0.5 * dt
        e = exp(-gl * h)
        s[2] = s[2] * e - om * s[4] / gl * (1.0 - e)
        zr, zi = -g2, d
        e = exp(zr * dt)
        er = e * cos(zi * dt)
        ei = e * sin(zi * dt)
        nr, ni = er - 1.0, ei
        den = zr * zr + zi * zi
        pr = (nr * zr + ni * zi) / den
        pi_ = (ni * zr - nr * zi) / den
        beta = 0.5 * om * (2.0 * s[2] - 1.0)
        re = er * s[3] - ei * s[4] - pi_ * beta
        im = er * s[4] + ei * s[3] + pr * beta
        s[3] = re
        s[4] = im
        e = exp(-gl * h)
        s[2] = s[2] * e - om * s[4] / gl * (1.0 - e)


def step_block(state, params, noise, stride, step0, out, row0):
    """See ``_kernel.step_block``."""
    s = [float(v) for v in state]
    p = [float(v) for v in params]
    dt, w0sq, c, sig, kappa = p[0], p[1], p[2], p[3], p[4]
    half = 0.5 * dt
    row = row0
    status = 0
    n = len(noise)
    done = n
    a = -w0sq * s[0] + kappa * s[2]
    for i, xi in enumerate(noise.tolist()):
        s[1] += half * a
        s[0] += half * s[1]
        _spin_step(s, p, s[0])
        s[1] = c * s[1] + sig * xi
        s[0] += half * s[1]
        a = -w0sq * s[0] + kappa * s[2]
        s[1] += half * a
        if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2])):
            status, done = 1, i
            break
        if s[2] < -POP_TOL or s[2] > 1.0 + POP_TOL:
            status, done = 2, i
            break
        if (step0 + i + 1) % stride == 0:
            out[row, :] = s
            row += 1
    state[:] = s
    return status, done, row - row0
