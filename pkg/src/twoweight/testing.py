"""Testing constants C1, C2 and numerical estimates of the operator norm.

The norm in question is the best constant ``C`` in

    int [sum_I |alpha_I E_I f|^q]^(p/q) dnu  <=  C^p int |f|^p dmu.

``C1`` tests the inequality on cell indicators.  ``C2`` (defined for
``q < p``) is the dual testing constant of the scalar problem with exponent
``s = p/q`` and coefficients ``alpha_I^q``; it is reported after a q-th root
so that both constants scale linearly in ``alpha``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .operators import _col, _pow, cell_averages, lp_norm, lq_accumulate, mixed_norm_of_Talpha

__all__ = [
    "TestingReport",
    "NormEstimate",
    "Verdict",
    "testing_numerators",
    "testing_c1",
    "testing_c2",
    "testing_c1_all",
    "testing_c2_all",
    "scalar_testing",
    "testing_report",
    "norm_exact_p2q2",
    "norm_ascent",
    "verdict",
    "report_document",
]

_ZERO_MASS_MODES = ("skip", "strict")


def testing_numerators(instance, coeff, weight, exponent):
    """``int_J [sum_{I subset J} coeff_I 1_I]^exponent d(weight)`` for every cell J.

    ``coeff`` is indexed by cells, ``weight`` by leaves.  Cells sharing a leaf
    set with a coarser copy include that copy in their sum.
    """
    lat = instance.lattice
    gathered = np.asarray(coeff, dtype=float)[lat.ancestors]
    tail = np.cumsum(gathered[::-1], axis=0)[::-1]
    num = np.empty(lat.n_cells)
    for g in range(lat.n_generations):
        num[lat.cells_at(g)] = lat.sums_at_generation(_pow(tail[g], exponent) * weight, g)
    return num[lat.chain_top]


def _ratio_root(num, den, root):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
    return np.power(out, 1.0 / root)


def _check_mode(zero_mass):
    if zero_mass not in _ZERO_MASS_MODES:
        raise ValueError(f"zero_mass must be one of {_ZERO_MASS_MODES}, got {zero_mass!r}")


def testing_c1_all(instance, zero_mass="skip"):
    """Smallest C1 making the indicator test hold at each cell.

    ``zero_mass="skip"`` drops cells with ``mu(I) = 0`` from the sum, the
    same convention the operator uses; ``"strict"`` keeps them.
    """
    _check_mode(zero_mass)
    alpha = instance.alpha_effective if zero_mass == "skip" else instance.alpha
    num = testing_numerators(instance, _pow(alpha, instance.q), instance.nu, instance.s)
    return _ratio_root(num, instance.mu_cell, instance.p)


def _c2_coefficients(instance, zero_mass):
    mu_c, nu_c = instance.mu_cell, instance.nu_cell
    a = _pow(instance.alpha, instance.q)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mu_c > 0, nu_c / mu_c, 0.0)
    coeff = a * ratio
    if zero_mass == "strict":
        coeff = np.where((mu_c == 0) & (nu_c > 0) & (a > 0), np.inf, coeff)
    return coeff


def testing_c2_all(instance, zero_mass="skip", normalized=True):
    """Dual testing constant at each cell (requires ``p > q``).

    The raw value ``K(J)`` is the smallest constant with
    ``int_J [sum_{I subset J} alpha_I^q nu(I)/mu(I) 1_I]^s' dmu <= K^s' nu(J)``
    where ``s' = (p/q)'``.  With ``normalized=True`` the q-th root of K is
    returned.
    """
    _check_mode(zero_mass)
    if not instance.p > instance.q:
        raise ValueError("C2 undefined for p <= q")
    sc = instance.s_conj
    coeff = _c2_coefficients(instance, zero_mass)
    infinite = ~np.isfinite(coeff)
    num = testing_numerators(instance, np.where(infinite, 0.0, coeff), instance.mu, sc)
    if np.any(infinite):
        lat = instance.lattice
        lo, hi = lat.leaf_range
        for j in np.flatnonzero(infinite):
            num[(lo <= lo[j]) & (hi >= hi[j])] = np.inf
    raw = _ratio_root(num, instance.nu_cell, sc)
    return np.power(raw, 1.0 / instance.q) if normalized else raw


def testing_c1(instance, cell, zero_mass="skip"):
    """Indicator testing constant at one cell."""
    i = instance.lattice.check_cell(cell)
    return float(testing_c1_all(instance, zero_mass)[i])


def testing_c2(instance, cell, zero_mass="skip", normalized=True):
    """Dual testing constant at one cell; see :func:`testing_c2_all`."""
    i = instance.lattice.check_cell(cell)
    return float(testing_c2_all(instance, zero_mass, normalized)[i])


def scalar_testing(instance, zero_mass="skip"):
    """Both testing constants of the scalar problem with exponent ``s = p/q``.

    The scalar operator has coefficients ``alpha_I^q`` and maps
    ``L^s(mu) -> L^s(nu)``.  Returns the global ``(c1, c2)``.
    """
    _check_mode(zero_mass)
    s = instance.s
    if not s > 1:
        raise ValueError("scalar reduction needs p/q > 1 (q < p)")
    alpha = instance.alpha_effective if zero_mass == "skip" else instance.alpha
    beta = _pow(alpha, instance.q)
    num1 = testing_numerators(instance, beta, instance.nu, s)
    c1 = _ratio_root(num1, instance.mu_cell, s)
    c2 = testing_c2_all(instance, zero_mass, normalized=False)
    return float(c1.max()), float(c2.max())


@dataclass
class TestingReport:
    """Per-cell and global testing constants of one instance."""

    c1_per_cell: np.ndarray
    c1: float
    c1_witness_cell: int
    c2_per_cell: np.ndarray = None
    c2_raw_per_cell: np.ndarray = None
    c2: float = None
    c2_witness_cell: int = None
    scalar_c1: float = None
    scalar_c2: float = None
    c2_p_conj_reading: float = None
    zero_mass_alpha_cells: list = field(default_factory=list)

    __test__ = False

    def to_dict(self, cells):
        out = {
            "c1": self.c1,
            "c1_witness_cell": self.c1_witness_cell,
            "c1_per_cell": {str(c): float(v) for c, v in zip(cells, self.c1_per_cell)},
            "c2": self.c2,
            "c2_witness_cell": self.c2_witness_cell,
            "scalar_c1": self.scalar_c1,
            "scalar_c2": self.scalar_c2,
            "c2_p_conj_reading": self.c2_p_conj_reading,
            "zero_mass_alpha_cells": list(self.zero_mass_alpha_cells),
        }
        if self.c2_per_cell is not None:
            out["c2_per_cell"] = {str(c): float(v) for c, v in zip(cells, self.c2_per_cell)}
            out["c2_raw_per_cell"] = {str(c): float(v)
                                      for c, v in zip(cells, self.c2_raw_per_cell)}
        return out


def testing_report(instance, zero_mass="skip"):
    lat = instance.lattice
    c1 = testing_c1_all(instance, zero_mass)
    i1 = int(np.argmax(c1))
    flagged = [lat.cells[i] for i in np.flatnonzero((instance.mu_cell == 0) & (instance.alpha > 0))]
    report = TestingReport(c1_per_cell=c1, c1=float(c1[i1]), c1_witness_cell=lat.cells[i1],
                           zero_mass_alpha_cells=flagged)
    if instance.p > instance.q:
        raw = testing_c2_all(instance, zero_mass, normalized=False)
        c2 = np.power(raw, 1.0 / instance.q)
        i2 = int(np.argmax(c2))
        report.c2_raw_per_cell = raw
        report.c2_per_cell = c2
        report.c2 = float(c2[i2])
        report.c2_witness_cell = lat.cells[i2]
        # same integral with the dual exponent p' in place of (p/q)' on the constant
        report.c2_p_conj_reading = float(np.max(raw ** (instance.s_conj / instance.p_conj)))
        report.scalar_c1, report.scalar_c2 = scalar_testing(instance, zero_mass)
    return report


@dataclass
class NormEstimate:
    """Best ratio ``||T f|| / ||f||`` found, with the function attaining it."""

    value: float
    method: str
    witness: np.ndarray
    restarts: int = 1
    converged: bool = True
    iterations: int = 0

    def to_dict(self, leaves=None):
        witness = self.witness.tolist() if leaves is None else \
            {str(c): float(v) for c, v in zip(leaves, self.witness)}
        return {"value": self.value, "method": self.method, "witness": witness,
                "restarts": self.restarts, "converged": self.converged,
                "iterations": self.iterations}


def _averaging_matrix(instance):
    lat = instance.lattice
    A = np.zeros((lat.n_cells, lat.n_leaves))
    mass = instance.mu_cell
    cols = np.arange(lat.n_leaves)
    for g in range(lat.n_generations):
        rows = lat.ancestors[g]
        m = mass[rows]
        A[rows, cols] = np.where(m > 0, instance.mu / np.where(m > 0, m, 1.0), 0.0)
    return A


def norm_exact_p2q2(instance):
    """Exact norm for ``p = q = 2`` from a generalized symmetric eigenproblem.

    The squared norm is the top eigenvalue of ``Q v = lambda M v`` with
    ``Q = sum_I alpha_I^2 nu(I) a_I a_I^T`` (``a_I`` the averaging row of I)
    and ``M = diag(mu)``, restricted to leaves of positive mu-mass.
    """
    if instance.p != 2 or instance.q != 2:
        raise ValueError("exact oracle needs p = q = 2")
    lat = instance.lattice
    pos = instance.mu > 0
    witness = np.zeros(lat.n_leaves)
    if not np.any(pos):
        return NormEstimate(0.0, "exact-quadratic", witness)
    A = _averaging_matrix(instance)[:, pos]
    w = instance.alpha ** 2 * instance.nu_cell
    Q = A.T @ (w[:, None] * A)
    n = Q.shape[0]
    vals, vecs = linalg.eigh(Q, np.diag(instance.mu[pos]), subset_by_index=[n - 1, n - 1])
    lam = max(float(vals[0]), 0.0)
    v = np.abs(vecs[:, 0])
    witness[pos] = v / np.sqrt(np.sum(instance.mu[pos] * v ** 2))
    return NormEstimate(float(np.sqrt(lam)), "exact-quadratic", witness)


def _ratio(instance, F):
    num = mixed_norm_of_Talpha(instance, F)
    den = lp_norm(instance, F, instance.p)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, 0.0)


def _normalize(instance, F):
    den = lp_norm(instance, F, instance.p)
    ok = den > 0
    F = F.copy()
    F[:, ok] /= den[ok]
    return F, ok


def _ascent_step(instance, F):
    """Maximizer over the unit p-sphere of the linearized objective at F."""
    p, q = instance.p, instance.q
    lat = instance.lattice
    avg = cell_averages(instance, F)
    acc = lq_accumulate(instance, F, avg)
    e = p / q - 1.0
    if e == 0:
        w = np.ones_like(acc)
    elif e > 0:
        w = np.power(acc, e)
    else:
        with np.errstate(divide="ignore"):
            w = np.where(acc > 0, np.power(acc, e), 0.0)
    mass = instance.mu_cell
    sums = lat.cell_sums(w * instance.nu[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(mass[:, None] > 0, sums / mass[:, None], 0.0)
    cellterm = _col(_pow(instance.alpha, q), avg) * _pow(avg, q - 1.0) * u
    G = cellterm[lat.ancestors].sum(axis=0)
    return np.power(np.maximum(G, 0.0), 1.0 / (p - 1.0))


def _ascend(instance, F, tol, max_iter):
    pos = (instance.mu > 0)[:, None]
    F, _ = _normalize(instance, F * pos)
    val = _ratio(instance, F)
    active = np.ones(F.shape[1], dtype=bool)
    converged = np.zeros(F.shape[1], dtype=bool)
    iters = 0
    while iters < max_iter and np.any(active):
        iters += 1
        idx = np.flatnonzero(active)
        Fn, ok = _normalize(instance, _ascent_step(instance, F[:, idx]) * pos)
        vn = _ratio(instance, Fn)
        better = ok & (vn > val[idx])
        take = idx[better]
        F[:, take] = Fn[:, better]
        gain = np.where(better, (vn - val[idx]) / np.where(vn > 0, vn, 1.0), 0.0)
        val[take] = vn[better]
        done = gain <= tol
        converged[idx[done]] = True
        active[idx[done]] = False
    return F, val, converged, iters


def norm_ascent(instance, restarts=32, tol=1e-10, max_iter=10_000, seed=0, chunk=512):
    """Lower bound for the operator norm by ascent over nonnegative f.

    Starts from the indicator of every cell of positive mu-mass (so the
    result is at least the global C1) and from ``restarts`` random
    nonnegative functions.  Each step replaces f by the maximizer, over the
    unit sphere of ``L^p(mu)``, of the objective linearized at f; because the
    mixed norm is convex this never decreases the ratio.  A start stops when
    the relative gain falls below ``tol``.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    lat = instance.lattice
    L = lat.n_leaves
    lo, hi = lat.leaf_range
    cells = np.flatnonzero(instance.mu_cell > 0)
    if cells.size == 0:
        return NormEstimate(0.0, "ascent", np.zeros(L), restarts=0, converged=True)
    rng = np.random.default_rng(seed)
    starts = []
    for j0 in range(0, cells.size, chunk):
        block = cells[j0:j0 + chunk]
        ind = np.zeros((L, block.size))
        for k, i in enumerate(block):
            ind[lo[i]:hi[i], k] = 1.0
        starts.append(ind)
    starts.append(rng.random((L, restarts)))
    best_val, best_f, best_conv, total_iters = -1.0, None, True, 0
    for S in starts:
        F, val, conv, iters = _ascend(instance, S, tol, max_iter)
        total_iters = max(total_iters, iters)
        j = int(np.argmax(val))
        if val[j] > best_val:
            best_val, best_f, best_conv = float(val[j]), F[:, j].copy(), bool(conv[j])
    return NormEstimate(best_val, "ascent", best_f, restarts=cells.size + restarts,
                        converged=best_conv, iterations=total_iters)


@dataclass
class Verdict:
    status: str
    ratio: float
    c1: float
    c2: float
    estimate: float
    norm_over_c1: float
    certified_upper: float = None
    zero_mass_alpha_cells: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def verdict(instance, report, estimate, threshold=4.0):
    """Compare a norm estimate with ``C1 + C2``.

    For ``p <= q`` the upper bound ``K(p)^(1/p) C1`` from the stopping-time
    argument is attached.  For ``q < p`` the status becomes
    ``"C1 alone insufficient"`` once ``estimate / C1`` exceeds ``threshold``.
    """
    from .prooftools import chain_constant

    c1 = report.c1
    c2 = report.c2 or 0.0
    total = c1 + c2
    value = estimate.value
    ratio = value / total if total > 0 else 0.0
    if c1 > 0:
        over = value / c1
    else:
        over = 0.0 if value == 0 else np.inf
    upper = None
    if instance.p <= instance.q:
        upper = chain_constant(instance.p) ** (1.0 / instance.p) * c1
    if not np.isfinite(total):
        status = "unbounded"
    elif instance.q < instance.p and over > threshold:
        status = "C1 alone insufficient"
    else:
        status = "bounded"
    return Verdict(status, float(ratio), float(c1), float(c2), float(value), float(over),
                   upper, list(report.zero_mass_alpha_cells))


def report_document(instance, report, estimate, verdict_=None):
    """Flat JSON-ready summary: c1, c2, witness cell, norm estimate, method, ratio."""
    v = verdict_ or verdict(instance, report, estimate)
    return {
        "c1": report.c1,
        "c2": report.c2,
        "c1_witness_cell": report.c1_witness_cell,
        "norm_estimate": estimate.value,
        "method": estimate.method,
        "ratio": v.ratio,
        "status": v.status,
        "certified_upper": v.certified_upper,
    }
