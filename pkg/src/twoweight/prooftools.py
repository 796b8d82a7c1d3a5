"""Executable versions of the sufficiency arguments.

* :func:`level_sets` and :func:`chain_certificate` evaluate every inequality
  of the stopping-time argument for ``p <= q`` and record both sides.
* :func:`doob_check` compares the maximal function with Doob's bound.
* :func:`rubio_majorant` builds the Rubio de Francia majorant F of f and
  measures the constants it is supposed to satisfy.
* :func:`reduction_compare` evaluates both directions of the reduction from
  the vector problem to the scalar problem with exponent ``p/q``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .operators import (
    _pow,
    apply_scalar,
    cell_averages,
    lp_norm,
    lq_accumulate,
    maximal,
)
from .testing import testing_numerators

__all__ = [
    "chain_constant",
    "LevelSetDecomposition",
    "level_sets",
    "ChainStep",
    "ChainCertificate",
    "chain_certificate",
    "doob_check",
    "MajorantResult",
    "rubio_majorant",
    "Reduction",
    "reduction_compare",
]

NO_CLASS = np.iinfo(np.int64).min


def chain_constant(p):
    """``K(p) = 2^(2p) (p')^p / (2^p - 1)``, the constant of the p <= q chain."""
    pc = p / (p - 1.0)
    return 2.0 ** (2 * p) * pc ** p / (2.0 ** p - 1.0)


def _level_index(m):
    """Largest integer k with ``2^k < m`` for each positive entry, exactly."""
    mant, e = np.frexp(m)
    return np.where(mant == 0.5, e - 2, e - 1).astype(np.int64)


@dataclass
class LevelSetDecomposition:
    """Level sets ``E_k = {M f > 2^k}`` and their maximal cells.

    ``sets[i]`` is the leaf mask of ``E_k`` for ``k = thresholds[i]``;
    ``cell_class`` holds, per cell, the k with the cell in ``E_k`` but not in
    ``E_{k+1}`` (``NO_CLASS`` when the cell lies in no ``E_k``).
    """

    thresholds: np.ndarray
    sets: np.ndarray
    maximal_cells: dict
    cell_class: np.ndarray
    maximal_function: np.ndarray
    maximal_positions: dict = field(repr=False, default_factory=dict)

    def leaves_of(self, k, lattice):
        i = int(np.searchsorted(self.thresholds, k))
        if i >= len(self.thresholds) or self.thresholds[i] != k:
            return []
        return [c for c, inside in zip(lattice.leaves, self.sets[i]) if inside]


def level_sets(instance, f):
    """Stopping-time decomposition of the maximal function of ``f``.

    A cell belongs to ``E_k`` when all of its leaves do; the maximal cells of
    ``E_k`` are those whose parent is not in ``E_k``.
    """
    lat = instance.lattice
    mf = maximal(instance, f)
    cell_min = lat.cell_reduce(mf, np.minimum)
    cls = np.full(lat.n_cells, NO_CLASS, dtype=np.int64)
    positive = cell_min > 0
    cls[positive] = _level_index(cell_min[positive])
    if not np.any(positive):
        return LevelSetDecomposition(np.zeros(0, dtype=np.int64), np.zeros((0, lat.n_leaves), bool),
                                     {}, cls, mf)
    k_lo = int(cls[positive].min())
    k_hi = int(_level_index(np.array([mf.max()]))[0])
    thresholds = np.arange(k_lo, k_hi + 1, dtype=np.int64)
    sets = mf[None, :] > np.ldexp(1.0, thresholds)[:, None]
    parent = lat._layout.parent
    parent_cls = np.where(parent >= 0, cls[np.maximum(parent, 0)], NO_CLASS)
    maximal_cells, maximal_pos = {}, {}
    for k in thresholds:
        k = int(k)
        pos = np.flatnonzero((cls >= k) & (parent_cls < k))
        maximal_pos[k] = pos
        maximal_cells[k] = [lat.cells[i] for i in pos]
    return LevelSetDecomposition(thresholds, sets, maximal_cells, cls, mf, maximal_pos)


class ChainStep(NamedTuple):
    label: str
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self):
        return self.rhs - self.lhs


@dataclass
class ChainCertificate:
    steps: list
    final_constant: float
    c1: float
    split_over_differences: float = 0.0

    @property
    def holds(self):
        return all(s.holds for s in self.steps)

    def to_list(self):
        return [{"label": s.label, "lhs": s.lhs, "rhs": s.rhs, "slack": s.slack,
                 "holds": s.holds} for s in self.steps]


def chain_certificate(instance, f, rtol=1e-12, c1=None):
    """Evaluate the stopping-time chain for ``1 < p <= q`` on ``f >= 0``.

    Steps, each recorded with both sides:

    ``split``        mixed norm^p <= sum_k int_{E_k} [class-k terms]^(p/q) dnu
    ``level-bound``  E_I f <= 2^(k+1) on class-k cells
    ``regroup``      class-k cells enlarged to all cells under the maximal cells of E_k
    ``testing``      indicator testing condition with the global C1
    ``maximal``      sum_k 2^((k+1)p) mu(E_k) <= 2^(2p)/(2^p-1) ||M f||_p^p
    ``doob``         ||M f||_p <= p' ||f||_p
    ``overall``      mixed norm^p <= K(p) C1^p ||f||_p^p
    """
    p, q = instance.p, instance.q
    if p > q:
        raise ValueError("chain valid only for p <= q")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("chain certificate needs f >= 0")
    lat = instance.lattice
    anc = lat.ancestors
    s = p / q
    a = _pow(instance.alpha_effective, q)
    num = testing_numerators(instance, a, instance.nu, s)
    if c1 is None:
        mass = instance.mu_cell
        with np.errstate(divide="ignore", invalid="ignore"):
            per_cell = np.where(mass > 0, num / mass, 0.0)
        c1 = float(per_cell.max()) ** (1.0 / p)
    c1p = c1 ** p

    avg = cell_averages(instance, f)
    terms = a * _pow(avg, q)
    total = float(np.sum(_pow(terms[anc].sum(axis=0), s) * instance.nu))

    ls = level_sets(instance, f)
    cls_leaf = ls.cell_class[anc]
    split = split_diff = level = regroup = level_mass = 0.0
    for i, k in enumerate(ls.thresholds):
        k = int(k)
        mask = cls_leaf == k
        weight = 2.0 ** ((k + 1) * p)
        a_k = np.where(mask, terms[anc], 0.0).sum(axis=0)
        integrand = _pow(a_k, s) * instance.nu
        split += float(np.sum(integrand))
        outside_next = ~ls.sets[i + 1] if i + 1 < len(ls.thresholds) else np.ones(lat.n_leaves, bool)
        split_diff += float(np.sum(integrand[ls.sets[i] & outside_next]))
        b_k = np.where(mask, a[anc], 0.0).sum(axis=0)
        level += weight * float(np.sum(_pow(b_k, s) * instance.nu))
        mpos = ls.maximal_positions[k]
        regroup += weight * float(np.sum(num[mpos]))
        level_mass += weight * float(np.sum(instance.mu_cell[mpos]))

    geo = 2.0 ** (2 * p) / (2.0 ** p - 1.0)
    mf_norm_p = float(lp_norm(instance, ls.maximal_function, p)) ** p
    f_norm_p = float(lp_norm(instance, f, p)) ** p
    pc = p / (p - 1.0)
    K = chain_constant(p)
    raw = [
        ("split", total, split),
        ("level-bound", split, level),
        ("regroup", level, regroup),
        ("testing", regroup, c1p * level_mass),
        ("maximal", c1p * level_mass, c1p * geo * mf_norm_p),
        ("doob", c1p * geo * mf_norm_p, c1p * geo * pc ** p * f_norm_p),
        ("overall", total, K * c1p * f_norm_p),
    ]
    steps = [ChainStep(lbl, lhs, rhs, bool(lhs <= rhs * (1 + rtol))) for lbl, lhs, rhs in raw]
    return ChainCertificate(steps, K, c1, split_diff)


def doob_check(instance, f, rtol=0.0):
    """``(||M f||_p, p' ||f||_p, holds)`` in ``L^p(mu)`` with the instance's p."""
    p = instance.p
    lhs = float(lp_norm(instance, maximal(instance, f), p))
    rhs = instance.p_conj * float(lp_norm(instance, f, p))
    return lhs, rhs, lhs <= rhs * (1 + rtol)


@dataclass
class MajorantResult:
    """Rubio de Francia majorant of f with the constants it attains.

    ``tail`` is the first omitted series term (already weighted); its
    ``L^(p/q)`` norm bounds the remaining series by twice itself, and its
    cellwise maximum is the additive slack in the per-cell inequality.
    """

    F: np.ndarray
    truncation_k: int
    norm_ratio: float
    a1_constant: float
    weight: float
    tail: np.ndarray
    tail_norm: float
    base_norm: float
    measured_maximal_norm: float
    per_cell_average: np.ndarray = field(repr=False, default=None)
    per_cell_min: np.ndarray = field(repr=False, default=None)
    per_cell_tail: np.ndarray = field(repr=False, default=None)

    @property
    def certified_tail(self):
        return 2.0 * self.tail_norm


def rubio_majorant(instance, f, tol=1e-12, max_terms=2000):
    """Majorant ``F = [sum_k (2 s')^-k M^k(f^q)]^(1/q)`` with ``s' = (p/q)'``.

    The series stops at the first term whose ``L^(p/q)(mu)`` norm and maximum
    are both below ``tol`` times those of ``f^q``.
    """
    p, q = instance.p, instance.q
    if not q < p:
        raise ValueError("Rubio de Francia majorant needs q < p")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("majorant needs f >= 0")
    s = p / q
    sc = instance.s_conj
    w = 1.0 / (2.0 * sc)
    base = _pow(f, q)
    base_norm = float(lp_norm(instance, base, s))
    base_sup = float(base.max()) if base.size else 0.0
    total = base.copy()
    term = base
    k = 0
    measured = 0.0
    tail = np.zeros_like(base)
    while True:
        m = maximal(instance, term)
        nxt = w * m
        term_norm = float(lp_norm(instance, term, s))
        if term_norm > 0:
            measured = max(measured, float(lp_norm(instance, m, s)) / term_norm)
        small = (float(lp_norm(instance, nxt, s)) <= tol * base_norm
                 and float(nxt.max()) <= tol * base_sup)
        if small or k >= max_terms:
            tail = nxt
            break
        total += nxt
        term = nxt
        k += 1
    # F >= f holds exactly in theory; the q-th root can round one ulp below f
    F = np.maximum(_pow(total, 1.0 / q), f)
    f_norm = float(lp_norm(instance, f, p))
    norm_ratio = float(lp_norm(instance, F, p)) / f_norm if f_norm > 0 else 1.0

    lat = instance.lattice
    avg = cell_averages(instance, total)
    cmin = lat.cell_reduce(total, np.minimum)
    ctail = lat.cell_reduce(tail, np.maximum)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(avg > 0, avg / cmin, 0.0)
    a1 = float(ratios.max()) if ratios.size else 0.0
    return MajorantResult(F, k, norm_ratio, a1, w, tail, float(lp_norm(instance, tail, s)),
                          base_norm, measured, avg, cmin, ctail)


class Reduction(NamedTuple):
    holder_lhs: float
    holder_rhs: float
    rubio_bound: float
    holds_pair: tuple
    majorant_side: float
    slack: float


def reduction_compare(instance, f, g, tol=1e-12, rtol=0.0, majorant=None):
    """Both directions of the vector-to-scalar reduction at fixed ``f, g >= 0``.

    ``A = int [sum_I alpha_I^q (E_I f)^q] g dnu`` and
    ``B = int [sum_I alpha_I^q E_I(f^q)] g dnu``.  Checks ``A <= B`` and
    ``B <= 2 (p/q)' int [sum_I alpha_I^q (E_I F)^q] g dnu + slack`` with F the
    majorant of f and the slack coming from the truncated series.
    """
    p, q = instance.p, instance.q
    if not q < p:
        raise ValueError("reduction needs q < p")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(f < 0) or np.any(g < 0):
        raise ValueError("reduction needs f, g >= 0")
    sc = instance.s_conj
    gn = g * instance.nu
    A = float(np.sum(lq_accumulate(instance, f) * gn))
    aq = _pow(instance.alpha, q)
    B = float(np.sum(apply_scalar(instance, _pow(f, q), alpha=aq) * gn))
    maj = majorant or rubio_majorant(instance, f, tol=tol)
    A_F = float(np.sum(lq_accumulate(instance, maj.F) * gn))
    live = np.where(instance.mu_cell > 0, aq * maj.per_cell_tail, 0.0)
    slack = 2.0 * sc * float(np.sum(live[instance.lattice.ancestors].sum(axis=0) * gn))
    bound = 2.0 * sc * A_F + slack
    holds = (A <= B * (1 + rtol), B <= bound * (1 + rtol))
    return Reduction(A, B, bound, holds, A_F, slack)
