"""Two-electron Coulomb matrix elements over localized dot orbitals.

Each dot carries a normalized isotropic exponential orbital
``phi_c(r) = sqrt(zeta^3/pi) exp(-zeta |r - c|)`` with ``zeta = 2/a``. The
four dot orbitals are Loewdin-orthonormalized before forming the DQD states
``|+-> = (chi_a +- chi_b)/sqrt(2)``, so the antisymmetrized two-electron
states are exactly orthonormal.

Dots are ordered (1a, 1b, 2a, 2b). The protecting symmetry is the mirror
plane that swaps a<->b inside *both* DQDs at once: under it every |+> is even
and every |-> is odd, so C0 and C1 are odd while LP and LM are even, and the
Coulomb operator cannot connect them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from ._accel import use_numba
from .core import Level, LEVEL_NAMES
from .kernels import coulomb as _kern

STATES = (Level.C0, Level.C1, Level.LP, Level.LM)
# orbital indices (columns p1, m1, p2, m2) for electron 1 / electron 2
_STATE_ORBITALS = {Level.C0: (0, 3), Level.C1: (1, 2), Level.LP: (0, 2), Level.LM: (1, 3)}
N_STRATA = 20


class QuadratureError(RuntimeError):
    """QMC did not reach the requested accuracy within the sample budget."""

    def __init__(self, message, result):
        self.result = result
        super().__init__(message)


@dataclass(frozen=True)
class DotGeometry:
    positions: np.ndarray  # (4, 3) nm: 1a, 1b, 2a, 2b
    decay_a: float  # nm

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(4, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("dot positions must be finite")
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        if np.any(d[np.triu_indices(4, 1)] <= 0):
            raise ValueError("dot positions must be distinct")
        if not (math.isfinite(self.decay_a) and self.decay_a > 0):
            raise ValueError("decay_a must be > 0")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @classmethod
    def rectangle(cls, intra=22.0, inter=44.0, decay_a=10.0):
        """DQD 1 at x = -inter/2, DQD 2 at x = +inter/2; dots a/b at y = +-intra/2."""
        h, w = intra / 2, inter / 2
        return cls(np.array([[-w, h, 0], [-w, -h, 0], [w, h, 0], [w, -h, 0]]), decay_a)

    def displaced(self, dot, delta):
        pos = np.array(self.positions)
        pos[dot] += np.asarray(delta, dtype=float)
        return DotGeometry(pos, self.decay_a)

    def with_decay(self, decay_a):
        return DotGeometry(self.positions, decay_a)

    @property
    def zeta(self):
        return 2.0 / self.decay_a

    def mirror_plane(self):
        """(unit normal, offset) of the perpendicular bisector of dots 1a-1b."""
        p = self.positions
        n = (p[1] - p[0]) / np.linalg.norm(p[1] - p[0])
        return n, float(n @ (0.5 * (p[0] + p[1])))

    @property
    def symmetric_about_E_axis(self):
        """True when one mirror plane swaps 1a<->1b and 2a<->2b together."""
        p = self.positions
        scale = max(1.0, float(np.abs(p).max()))
        return bool(np.allclose(self.reflect(p[[1, 0, 3, 2]]), p, atol=1e-9 * scale))

    def reflect(self, points):
        n, off = self.mirror_plane()
        points = np.asarray(points, dtype=float)
        return points - 2.0 * (points @ n - off)[..., None] * n

    def to_dict(self):
        return {"positions_nm": self.positions.tolist(), "decay_a_nm": self.decay_a}


def slater_norm(decay_a):
    z = 2.0 / decay_a
    return math.sqrt(z**3 / math.pi)


def orbital(center, decay_a, r):
    r = np.asarray(r, dtype=float)
    return slater_norm(decay_a) * np.exp(-(2.0 / decay_a) * np.linalg.norm(r - np.asarray(center), axis=-1))


def overlap(c1, c2, decay_a):
    """<phi_c1|phi_c2> = exp(-zR)(1 + zR + (zR)^2/3), the 1s-1s Slater overlap."""
    if not decay_a > 0:
        raise ValueError("decay_a must be > 0")
    x = (2.0 / decay_a) * float(np.linalg.norm(np.asarray(c1, float) - np.asarray(c2, float)))
    return math.exp(-x) * (1.0 + x + x * x / 3.0)


def overlap_matrix(geom):
    p = geom.positions
    return np.array([[overlap(p[i], p[j], geom.decay_a) for j in range(4)] for i in range(4)])


def lowdin(geom):
    """Matrix X with ``chi_j = sum_i X[i, j] phi_i`` orthonormal (X = S^-1/2)."""
    w, v = np.linalg.eigh(overlap_matrix(geom))
    return (v / np.sqrt(w)) @ v.T


def dqd_coefficients(geom):
    """Columns p1, m1, p2, m2 expressed on the raw dot orbitals."""
    t = np.array([[1, 1, 0, 0], [1, -1, 0, 0], [0, 0, 1, 1], [0, 0, 1, -1]], float) / math.sqrt(2)
    return lowdin(geom) @ t


def dqd_orbitals(geom, r):
    """Values of (p1, m1, p2, m2) at points ``r`` (..., 3)."""
    r = np.asarray(r, dtype=float)
    phi = np.stack([orbital(c, geom.decay_a, r) for c in geom.positions], axis=-1)
    return phi @ dqd_coefficients(geom)


def two_electron_wavefunction(level, geom, r1, r2):
    """Antisymmetrized spatial wavefunction ``(a(1)b(2) - a(2)b(1))/sqrt(2)``."""
    i, j = _STATE_ORBITALS[Level(level)]
    o1, o2 = dqd_orbitals(geom, r1), dqd_orbitals(geom, r2)
    return (o1[..., i] * o2[..., j] - o2[..., i] * o1[..., j]) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# quasi-Monte Carlo


@dataclass(frozen=True)
class CoulombResult:
    """All 16 <bra|U_C|ket> elements (meV) with standard errors.

    Rows/columns follow C0, C1, LP, LM. ``direct``/``exchange`` split the
    C0-C1 element as direct - exchange.
    """

    matrix: np.ndarray
    stderr: np.ndarray
    direct: tuple
    exchange: tuple
    n_samples: int
    replicates: int
    seed: int

    def element(self, bra, ket):
        i, j = int(Level(bra)), int(Level(ket))
        return float(self.matrix[i, j]), float(self.stderr[i, j])


def _strata():
    return [(i, j) for i in range(4) for j in range(4)] + [(i, -1) for i in range(4)]


def _replicate(geom, coeffs, m, seq, beta, lam, kernel):
    """One randomized-QMC estimate.

    A single scrambled Sobol sequence is cut into aligned blocks of ``m``
    points (each block is itself a net), one block per stratum.
    """
    centers = np.ascontiguousarray(geom.positions)
    zeta, norm = geom.zeta, slater_norm(geom.decay_a)
    engine = qmc.Sobol(6, scramble=True, seed=np.random.default_rng(seq))
    with warnings.catch_warnings():
        # blocks are aligned powers of two even though the total is not
        warnings.filterwarnings("ignore", message="The balance properties", category=UserWarning)
        u = engine.random(m * N_STRATA)
    total = np.zeros(_kern.N_OUT)
    for k, (i, j) in enumerate(_strata()):
        weight = (1.0 - beta) / 16.0 if j >= 0 else beta / 4.0
        block = np.ascontiguousarray(u[k * m : (k + 1) * m])
        total += weight * kernel(block, i, j, centers, zeta, norm, coeffs, beta, lam)
    return total


def _kernel(backend):
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    return _kern.integrand_numba if backend == "numba" else _kern.integrand_numpy


def coulomb_matrix(
    geom,
    params,
    n_samples=2**20,
    replicates=32,
    seed=0,
    rel_tol=None,
    max_samples=2**24,
    beta=0.25,
    backend=None,
):
    """Estimate the 4x4 Coulomb matrix in the {C0, C1, LP, LM} basis.

    Each of ``replicates`` independent scrambles contributes one estimate;
    the reported error is their standard error. With ``rel_tol`` the sample
    count doubles until every standard error is below ``rel_tol`` times the
    largest diagonal element, raising :class:`QuadratureError` if
    ``max_samples`` is reached first.
    """
    if replicates < 2:
        raise ValueError("need at least two replicates for an error estimate")
    coeffs = np.ascontiguousarray(dqd_coefficients(geom))
    lam = 0.5 * geom.decay_a
    kernel = _kernel(backend)
    scale = params.coulomb_constant_k / params.kappa
    while True:
        m = 1 << max(4, math.ceil(math.log2(max(1, n_samples) / (replicates * N_STRATA))))
        root = np.random.SeedSequence(seed)
        reps = np.array([_replicate(geom, coeffs, m, s, beta, lam, kernel) for s in root.spawn(replicates)]) * scale
        mean = reps.mean(axis=0)
        err = reps.std(axis=0, ddof=1) / math.sqrt(replicates)
        mat, se = np.zeros((4, 4)), np.zeros((4, 4))
        for k, (i, j) in enumerate(_kern.UPPER):
            mat[i, j] = mat[j, i] = mean[k]
            se[i, j] = se[j, i] = err[k]
        res = CoulombResult(
            mat, se, (float(mean[10]), float(err[10])), (float(mean[11]), float(err[11])),
            m * N_STRATA * replicates, replicates, seed,
        )
        if rel_tol is None:
            return res
        target = rel_tol * float(np.abs(np.diag(mat)).max())
        if se.max() <= target:
            return res
        if 2 * res.n_samples > max_samples:
            raise QuadratureError(
                f"stderr {se.max():.3e} meV above target {target:.3e} meV at {res.n_samples} samples", res
            )
        n_samples = 2 * res.n_samples


def coulomb_matrix_element(bra, ket, geom, params, **kw):
    """(value, stderr) of <bra|e^2/(kappa r12)|ket> in meV."""
    return coulomb_matrix(geom, params, **kw).element(bra, ket)


def exchange_coupling_A(geom, params, **kw):
    """|<C0|U_C|C1>| with its standard error, for a symmetric geometry."""
    if not geom.symmetric_about_E_axis:
        raise ValueError("exchange_coupling_A needs a mirror-symmetric geometry")
    v, e = coulomb_matrix(geom, params, **kw).element(Level.C0, Level.C1)
    return abs(v), e


def point_dipole_limit(geom, params):
    """a -> 0 limit of <C0|U_C|C1>: transition charges +-1/2 on the dot centres."""
    p = geom.positions
    k = params.coulomb_constant_k / params.kappa

    def v(i, j):
        return k / np.linalg.norm(p[i] - p[j])

    return 0.25 * (v(0, 2) - v(0, 3) - v(1, 2) + v(1, 3))


@dataclass(frozen=True)
class SelectionRuleReport:
    rows: tuple  # (bra, ket, real, imag, stderr)
    symmetric: bool
    leakage_sigma: float  # largest |element| / stderr over computational<->leakage pairs
    exchange_sigma: float
    n_sigma: float
    result: CoulombResult

    @property
    def leakage_zero(self):
        return self.leakage_sigma <= self.n_sigma

    @property
    def passed(self):
        """Symmetric geometries must show no leakage coupling; asymmetric ones must show some."""
        return self.leakage_zero if self.symmetric else not self.leakage_zero

    def to_csv(self):
        lines = ["element,real,imag,stderr"]
        for bra, ket, re, im, se in self.rows:
            lines.append(f"<{bra}|U_C|{ket}>,{re:.17g},{im:.17g},{se:.17g}")
        return "\n".join(lines) + "\n"


def selection_rule_report(geom, params, n_sigma=3.0, **kw):
    res = coulomb_matrix(geom, params, **kw)
    rows = []
    for i in range(4):
        for j in range(4):
            rows.append((LEVEL_NAMES[i], LEVEL_NAMES[j], float(res.matrix[i, j]), 0.0, float(res.stderr[i, j])))
    leak = max(abs(res.matrix[i, j]) / res.stderr[i, j] for i in (0, 1) for j in (2, 3))
    exch = abs(res.matrix[0, 1]) / res.stderr[0, 1]
    return SelectionRuleReport(tuple(rows), geom.symmetric_about_E_axis, float(leak), float(exch), n_sigma, res)


def _one_body(bra, ket, orbs):
    """<bra|sum_i |x><y|_i|ket> as a matrix over the columns of ``orbs``.

    Both states are two-orbital determinants; the transition density is
    nonzero only when they share at least one orbital.
    """
    a, b = _STATE_ORBITALS[bra]
    c, d = _STATE_ORBITALS[ket]
    if (a, b) == (c, d):
        return np.outer(orbs[:, a], orbs[:, a]) + np.outer(orbs[:, b], orbs[:, b])
    shared = {a, b} & {c, d}
    if not shared:
        return np.zeros((orbs.shape[0],) * 2)
    (s,) = shared
    x = b if a == s else a
    y = d if c == s else c
    # moving the shared orbital to the same slot costs one sign per swap
    sign = (1 if (a == s) == (c == s) else -1)
    return sign * np.outer(orbs[:, x], orbs[:, y])


def dot_occupancy(a, b, geom):
    """Probability of finding an electron on each dot (1a, 1b, 2a, 2b) for a|C0> + b|C1>.

    Occupancy is the expectation of the one-body projector onto each
    Loewdin dot orbital.
    """
    nrm = abs(a) ** 2 + abs(b) ** 2
    if not math.isclose(nrm, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("|a|^2 + |b|^2 must be 1")
    w, v = np.linalg.eigh(overlap_matrix(geom))
    # DQD orbitals on the orthonormal dot basis: S^1/2 applied to raw coefficients
    orbs = ((v * np.sqrt(w)) @ v.T) @ dqd_coefficients(geom)
    amps = {Level.C0: a, Level.C1: b}
    gamma = np.zeros((4, 4), complex)
    for x, cx in amps.items():
        for y, cy in amps.items():
            gamma += np.conj(cx) * cy * _one_body(x, y, orbs)
    return np.real(np.diag(gamma)).copy()
