"""Closed-form cubic roots and 3x3 Hermitian eigendecomposition.

Both routines are small enough that a closed form followed by Newton
polishing is exact to machine precision, so no LAPACK call is needed.
"""
import math

import numpy as np

__all__ = ["real_cubic_roots", "cubic_discriminant", "eigh3"]


def cubic_discriminant(a, b, c):
    """Discriminant of the monic cubic ``x^3 + a x^2 + b x + c``.

    Positive means three distinct real roots, negative one real root.
    """
    return 18 * a * b * c - 4 * a**3 * c + a**2 * b**2 - 4 * b**3 - 27 * c**2


def _newton(a, b, c, x, steps):
    for _ in range(steps):
        f = ((x + a) * x + b) * x + c
        df = (3 * x + 2 * a) * x + b
        if df == 0.0:
            break
        dx = f / df
        x_new = x - dx
        # near a double root f' ~ 0 and a full step can jump to another branch
        if dx == 0.0 or abs(((x_new + a) * x_new + b) * x_new + c) >= abs(f):
            break
        x = x_new
    return x


def _newton_derivative(a, b, x, steps):
    for _ in range(steps):
        g = (3 * x + 2 * a) * x + b
        dg = 6 * x + 2 * a
        if dg == 0.0:
            break
        x -= g / dg
    return x


def real_cubic_roots(a, b, c, polish=2, rtol=1e-9):
    """Real roots of ``x^3 + a x^2 + b x + c = 0``, ascending.

    Cardano/trigonometric form on a rescaled polynomial, then ``polish``
    Newton steps per root.

    Returns
    -------
    roots : list of float
    marginal : bool
        True when the relative discriminant is below ``rtol``, i.e. the
        cubic sits on a double-root boundary and the root count is not
        robust. The count itself always follows the sign of the
        discriminant.
    """
    scale = max(abs(a), math.sqrt(abs(b)), abs(c) ** (1.0 / 3.0))
    if scale == 0.0:
        return [0.0], True
    A, B, C = a / scale, b / scale / scale, c / scale / scale / scale
    p = B - A * A / 3.0
    q = 2.0 * A**3 / 27.0 - A * B / 3.0 + C
    disc = cubic_discriminant(A, B, C)
    marginal = abs(disc) < rtol
    shift = -A / 3.0
    if disc > 0.0 and p < 0.0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        arg = min(1.0, max(-1.0, arg))
        phi = math.acos(arg) / 3.0
        ts = [m * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        # One real root (or a repeated one); Cardano with real cube roots.
        d = (q / 2.0) ** 2 + (p / 3.0) ** 3
        sd = math.sqrt(max(d, 0.0))
        u = -q / 2.0 + sd
        v = -q / 2.0 - sd
        t = math.copysign(abs(u) ** (1.0 / 3.0), u) + math.copysign(abs(v) ** (1.0 / 3.0), v)
        ts = [t]
        if disc == 0.0 and p < 0.0:
            # exact double root at -t/2; inside the marginal band the count
            # follows the sign of the discriminant and only the flag is raised
            ts.append(-t / 2.0)
    roots = [_newton(A, B, C, ts[0] + shift, polish)]
    if len(ts) == 2:
        # f' ~ 0 at a double root, so polish it as a root of f' instead
        roots.append(_newton_derivative(A, B, ts[1] + shift, polish))
    else:
        roots += [_newton(A, B, C, t + shift, polish) for t in ts[1:]]
    return sorted(r * scale for r in roots), marginal


def _charpoly(h):
    """Coefficients (a, b, c) of det(lambda I - H) = lambda^3 + a lambda^2 + b lambda + c."""
    tr = (h[0, 0] + h[1, 1] + h[2, 2]).real
    m2 = (
        (h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0])
        + (h[0, 0] * h[2, 2] - h[0, 2] * h[2, 0])
        + (h[1, 1] * h[2, 2] - h[1, 2] * h[2, 1])
    ).real
    det = (
        h[0, 0] * (h[1, 1] * h[2, 2] - h[1, 2] * h[2, 1])
        - h[0, 1] * (h[1, 0] * h[2, 2] - h[1, 2] * h[2, 0])
        + h[0, 2] * (h[1, 0] * h[2, 1] - h[1, 1] * h[2, 0])
    ).real
    return -tr, m2, -det


def _polish(lam, coeffs):
    """One Newton step on the characteristic polynomial, kept only if small."""
    a, b, c = coeffs
    f = ((lam + a) * lam + b) * lam + c
    df = (3 * lam + 2 * a) * lam + b
    if df != 0.0:
        step = f / df
        if abs(step) < 1e-6 * max(1.0, abs(lam)):
            return lam - step
    return lam


def _isolated_root(h):
    """Trigonometric eigenvalues from the matrix entries; returns the one
    farthest from the other two (a double root can only be the other pair)."""
    q = (h[0, 0] + h[1, 1] + h[2, 2]).real / 3.0
    p1 = abs(h[0, 1]) ** 2 + abs(h[0, 2]) ** 2 + abs(h[1, 2]) ** 2
    p2 = sum((h[i, i].real - q) ** 2 for i in range(3)) + 2.0 * p1
    if p2 == 0.0:
        return None
    p = math.sqrt(p2 / 6.0)
    b = (h - q * np.eye(3)) / p
    r = 0.5 * (
        b[0, 0] * (b[1, 1] * b[2, 2] - b[1, 2] * b[2, 1])
        - b[0, 1] * (b[1, 0] * b[2, 2] - b[1, 2] * b[2, 0])
        + b[0, 2] * (b[1, 0] * b[2, 1] - b[1, 1] * b[2, 0])
    ).real
    phi = math.acos(min(1.0, max(-1.0, r))) / 3.0
    if r >= 0.0:
        return q + 2.0 * p * math.cos(phi)  # largest
    return q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)  # smallest


def _norm(v):
    return math.sqrt(np.vdot(v, v).real)


def _cross(a, b):
    # np.cross carries heavy axis bookkeeping; this is ~20x faster for 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _null_vector(m):
    """Unit null vector of a rank-2 Hermitian matrix from row cross products."""
    best, bn = None, -1.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        v = _cross(m[i], m[j])  # bilinearly orthogonal to both rows
        n = _norm(v)
        if n > bn:
            best, bn = v, n
    return best / bn


def _complement(v):
    """Orthonormal pair spanning the complement of unit ``v``, built from the
    canonical axes so degenerate subspaces come out in the natural basis."""
    cands = [e - v * np.conj(v[k]) for k, e in enumerate(np.eye(3, dtype=complex))]
    k = int(np.argmax([_norm(c) for c in cands]))
    u1 = cands[k] / _norm(cands[k])
    u2 = np.conj(_cross(v, u1))
    if k == 2:  # keep the pair in axis order
        u1, u2 = u2 / _norm(u2), u1
    return u1, u2 / _norm(u2)


def _eigh2(m):
    """Exact eigenpairs of a 2x2 Hermitian matrix, ascending."""
    al, de, be = m[0, 0].real, m[1, 1].real, m[0, 1]
    mean, h = 0.5 * (al + de), 0.5 * (al - de)
    r = math.hypot(h, abs(be))
    if r == 0.0:
        return (mean, mean), np.eye(2, dtype=complex)
    vp = np.array([r + h, np.conj(be)]) if h >= 0 else np.array([be, r - h])
    vp = vp / _norm(vp)
    vm = np.array([-np.conj(vp[1]), np.conj(vp[0])])
    return (mean - r, mean + r), np.column_stack([vm, vp])


def eigh3(h):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a 3x3 Hermitian matrix.

    The isolated eigenvalue comes from the closed-form cubic (one Newton
    polish, then a Rayleigh quotient) and its vector from row cross products; the remaining pair is
    solved exactly in the orthogonal complement, which stays accurate
    through (near-)degeneracies. Eigenvectors are columns, as in
    :func:`numpy.linalg.eigh`.
    """
    h = np.asarray(h, dtype=complex)
    scale = float(np.max(np.abs(h)))
    if scale == 0.0:
        return np.zeros(3), np.eye(3, dtype=complex)
    if not 1e-290 < scale < 1e290:
        # complex division goes through a reciprocal; move to a safe range exactly
        boost = 2.0 ** (600 if scale < 1.0 else -600)
        lam, vecs = eigh3(h * boost)
        return lam / boost, vecs
    hs = h / scale
    lam1 = _isolated_root(hs)
    if lam1 is None:  # multiple of the identity
        return np.full(3, hs[0, 0].real * scale), np.eye(3, dtype=complex)
    lam1 = _polish(lam1, _charpoly(hs))
    v1 = _null_vector(hs - lam1 * np.eye(3))
    # Rayleigh refinement: matters when all three eigenvalues are close
    lam1 = float(np.vdot(v1, hs @ v1).real)
    v1 = _null_vector(hs - lam1 * np.eye(3))
    u1, u2 = _complement(v1)
    u = np.column_stack([u1, u2])
    (l2, l3), w = _eigh2(u.conj().T @ hs @ u)
    pairs = sorted([(lam1, v1), (l2, u @ w[:, 0]), (l3, u @ w[:, 1])], key=lambda t: t[0])
    lam = np.array([t[0] for t in pairs]) * scale
    vecs = np.column_stack([t[1] for t in pairs])
    return lam, vecs
