"""Importance-weighted Coulomb integrand over QMC points.

A stratum maps uniform points ``u`` (m, 6) to electron pairs ``(r1, r2)``:
``r1`` is drawn from ``|phi|^2`` around dot ``ci``; ``r2`` either from
``|phi|^2`` around dot ``cj`` (``cj >= 0``) or at ``r1 + s * direction`` with
``s ~ Exp(lam)`` (``cj < 0``), which cancels the ``1/r12`` singularity.

For each pair the kernel evaluates the four antisymmetrized two-electron
states (C0, C1, LP, LM) and averages ``psi_i psi_j / (|r1 - r2| q)`` over the
ten pairs ``i <= j``, plus the direct and exchange pieces of the C0-C1
element. ``q`` is the full sampling mixture::

    q = (1 - beta) g(r1) g(r2) + beta g(r1) h(|r1 - r2|)
    g(r) = mean_c |phi_c(r)|^2,   h(s) = exp(-s/lam) / (4 pi lam s^2)

Results are in 1/nm; the caller multiplies by e^2/kappa.
"""
import math

import numpy as np

from .._accel import njit

N_OUT = 12
# (orbital of electron 1, orbital of electron 2); coefficient columns are p1, m1, p2, m2
STATE_PAIRS = np.array([[0, 3], [1, 2], [0, 2], [1, 3]], dtype=np.int64)
UPPER = [(i, j) for i in range(4) for j in range(i, 4)]
_NEWTON_ITERS = 30


# --- Gamma(3) quantile: radius of |phi|^2 for a 1s Slater orbital in units of 1/(2 zeta)


def _gamma3_logs_numpy(x):
    """log F(x), log Q(x) for the Gamma(3, 1) CDF F and tail Q = 1 - F."""
    poly = 1.0 + x + 0.5 * x * x
    log_q = -x + np.log(poly)
    # F = e^{-x} (x^3/6 + x^4/24 + ...) without cancellation for small x
    term = x**3 / 6.0
    series = term.copy()
    for k in range(4, 24):
        term = term * x / k
        series = series + term
    log_f = np.where(x < 1.0, -x + np.log(np.where(x > 0, series, 1.0)), np.log(-np.expm1(log_q)))
    return log_f, log_q


def gamma3_ppf_numpy(u):
    u = np.asarray(u, dtype=float)
    lower = u < 0.5
    x = np.where(lower, np.cbrt(6.0 * u), -np.log1p(-u) + 2.0 * np.log1p(-np.log1p(-u)))
    x = np.maximum(x, 1e-300)
    log_u = np.log(np.where(u > 0, u, 1.0))
    log_1mu = np.log1p(-u)
    for _ in range(_NEWTON_ITERS):
        log_f, log_q = _gamma3_logs_numpy(x)
        log_pdf = 2.0 * np.log(x) - x - math.log(2.0)
        step = np.where(lower, (log_f - log_u) / np.exp(log_pdf - log_f), -(log_q - log_1mu) / np.exp(log_pdf - log_q))
        x = np.maximum(x - step, 0.5 * x)
        if np.all(np.abs(step) <= 1e-15 * x):
            break
    return np.where(u > 0, x, 0.0)


@njit(cache=True)
def _gamma3_ppf_scalar(u):
    if u <= 0.0:
        return 0.0
    lower = u < 0.5
    if lower:
        x = (6.0 * u) ** (1.0 / 3.0)
        target = math.log(u)
    else:
        t = -math.log1p(-u)
        x = t + 2.0 * math.log1p(t)
        target = math.log1p(-u)
    for _ in range(_NEWTON_ITERS):
        log_q = -x + math.log(1.0 + x + 0.5 * x * x)
        log_pdf = 2.0 * math.log(x) - x - math.log(2.0)
        if lower:
            if x < 1.0:
                term = x * x * x / 6.0
                s = term
                for k in range(4, 24):
                    term = term * x / k
                    s += term
                log_f = -x + math.log(s)
            else:
                log_f = math.log(-math.expm1(log_q))
            step = (log_f - target) / math.exp(log_pdf - log_f)
        else:
            step = -(log_q - target) / math.exp(log_pdf - log_q)
        nx = x - step
        if nx < 0.5 * x:
            nx = 0.5 * x
        done = abs(nx - x) <= 1e-15 * x
        x = nx
        if done:
            break
    return x


@njit(cache=True)
def gamma3_ppf_numba(u):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = _gamma3_ppf_scalar(u[i])
    return out


# --- point transform + integrand


def _unit_numpy(uc, up):
    cz = 2.0 * uc - 1.0
    ph = 2.0 * math.pi * up
    sz = np.sqrt(np.maximum(0.0, 1.0 - cz * cz))
    return np.stack([sz * np.cos(ph), sz * np.sin(ph), cz], axis=1)


def points_numpy(u, ci, cj, centers, zeta, lam):
    r1 = centers[ci] + (gamma3_ppf_numpy(u[:, 0]) / (2 * zeta))[:, None] * _unit_numpy(u[:, 1], u[:, 2])
    if cj >= 0:
        r2 = centers[cj] + (gamma3_ppf_numpy(u[:, 3]) / (2 * zeta))[:, None] * _unit_numpy(u[:, 4], u[:, 5])
    else:
        r2 = r1 + (-lam * np.log1p(-u[:, 3]))[:, None] * _unit_numpy(u[:, 4], u[:, 5])
    return r1, r2


def integrand_numpy(u, ci, cj, centers, zeta, norm, coeffs, beta, lam):
    r1, r2 = points_numpy(u, ci, cj, centers, zeta, lam)
    d1 = np.linalg.norm(r1[:, None, :] - centers[None], axis=-1)
    d2 = np.linalg.norm(r2[:, None, :] - centers[None], axis=-1)
    phi1 = norm * np.exp(-zeta * d1)
    phi2 = norm * np.exp(-zeta * d2)
    g1 = np.mean(phi1 * phi1, axis=1)
    g2 = np.mean(phi2 * phi2, axis=1)
    r12 = np.linalg.norm(r1 - r2, axis=1)
    safe = np.where(r12 > 0, r12, 1.0)
    h = np.exp(-safe / lam) / (4 * math.pi * lam * safe * safe)
    q = (1 - beta) * g1 * g2 + beta * g1 * h
    w = np.where(r12 > 0, 1.0 / (safe * q), 0.0)
    o1 = phi1 @ coeffs
    o2 = phi2 @ coeffs
    a, b = STATE_PAIRS[:, 0], STATE_PAIRS[:, 1]
    psi = (o1[:, a] * o2[:, b] - o2[:, a] * o1[:, b]) / math.sqrt(2.0)
    out = np.empty((u.shape[0], N_OUT))
    for k, (i, j) in enumerate(UPPER):
        out[:, k] = psi[:, i] * psi[:, j] * w
    out[:, 10] = o1[:, 0] * o1[:, 1] * o2[:, 3] * o2[:, 2] * w
    out[:, 11] = o1[:, 0] * o1[:, 2] * o2[:, 3] * o2[:, 1] * w
    return out.mean(axis=0)


@njit(cache=True)
def integrand_numba(u, ci, cj, centers, zeta, norm, coeffs, beta, lam):
    m = u.shape[0]
    acc = np.zeros(N_OUT)
    comp = np.zeros(N_OUT)
    r1 = np.empty(3)
    r2 = np.empty(3)
    phi1 = np.empty(4)
    phi2 = np.empty(4)
    o1 = np.empty(4)
    o2 = np.empty(4)
    psi = np.empty(4)
    term = np.empty(N_OUT)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for n in range(m):
        rad = _gamma3_ppf_scalar(u[n, 0]) / (2.0 * zeta)
        cz = 2.0 * u[n, 1] - 1.0
        sz = math.sqrt(max(0.0, 1.0 - cz * cz))
        ph = 2.0 * math.pi * u[n, 2]
        r1[0] = centers[ci, 0] + rad * sz * math.cos(ph)
        r1[1] = centers[ci, 1] + rad * sz * math.sin(ph)
        r1[2] = centers[ci, 2] + rad * cz
        cz = 2.0 * u[n, 4] - 1.0
        sz = math.sqrt(max(0.0, 1.0 - cz * cz))
        ph = 2.0 * math.pi * u[n, 5]
        if cj >= 0:
            rad = _gamma3_ppf_scalar(u[n, 3]) / (2.0 * zeta)
            base0, base1, base2 = centers[cj, 0], centers[cj, 1], centers[cj, 2]
        else:
            rad = -lam * math.log1p(-u[n, 3])
            base0, base1, base2 = r1[0], r1[1], r1[2]
        r2[0] = base0 + rad * sz * math.cos(ph)
        r2[1] = base1 + rad * sz * math.sin(ph)
        r2[2] = base2 + rad * cz

        g1 = 0.0
        g2 = 0.0
        for c in range(4):
            dx = r1[0] - centers[c, 0]
            dy = r1[1] - centers[c, 1]
            dz = r1[2] - centers[c, 2]
            phi1[c] = norm * math.exp(-zeta * math.sqrt(dx * dx + dy * dy + dz * dz))
            dx = r2[0] - centers[c, 0]
            dy = r2[1] - centers[c, 1]
            dz = r2[2] - centers[c, 2]
            phi2[c] = norm * math.exp(-zeta * math.sqrt(dx * dx + dy * dy + dz * dz))
            g1 += phi1[c] * phi1[c]
            g2 += phi2[c] * phi2[c]
        g1 *= 0.25
        g2 *= 0.25
        dx = r1[0] - r2[0]
        dy = r1[1] - r2[1]
        dz = r1[2] - r2[2]
        r12 = math.sqrt(dx * dx + dy * dy + dz * dz)
        if r12 == 0.0:
            continue
        h = math.exp(-r12 / lam) / (4.0 * math.pi * lam * r12 * r12)
        w = 1.0 / (r12 * ((1.0 - beta) * g1 * g2 + beta * g1 * h))
        for j in range(4):
            s1 = 0.0
            s2 = 0.0
            for i in range(4):
                s1 += phi1[i] * coeffs[i, j]
                s2 += phi2[i] * coeffs[i, j]
            o1[j] = s1
            o2[j] = s2
        for s in range(4):
            a = STATE_PAIRS[s, 0]
            b = STATE_PAIRS[s, 1]
            psi[s] = (o1[a] * o2[b] - o2[a] * o1[b]) * inv_sqrt2
        k = 0
        for i in range(4):
            for j in range(i, 4):
                term[k] = psi[i] * psi[j] * w
                k += 1
        term[10] = o1[0] * o1[1] * o2[3] * o2[2] * w
        term[11] = o1[0] * o1[2] * o2[3] * o2[1] * w
        # compensated (Kahan) accumulation
        for k in range(N_OUT):
            y = term[k] - comp[k]
            t = acc[k] + y
            comp[k] = (t - acc[k]) - y
            acc[k] = t
    return acc / m
