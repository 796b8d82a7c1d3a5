"""Cantor-measure counterexample: the indicator test alone fails for q < p.

Setting: all tri-adic subintervals of [0, 1) down to scale 3^-N; mu is
Lebesgue measure, nu the Cantor measure (2^-n on each component of the n-th
Cantor stage C_n), ``alpha_I = (2/3)^(n/p)`` on components of C_n and 0
elsewhere.  The test function is ``(3/2)^(n/p) n^-r`` on every maximal gap
interval of length 3^-n.  With ``1/p < r < 1/q`` the indicator constant C1
stays bounded, ``||f||_p`` stays bounded, and the left side of the two-weight
inequality grows like ``N^((1 - q r) p / q)``.
"""

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import zeta

from .lattice import Instance, Lattice

__all__ = [
    "CantorConfig",
    "CantorRow",
    "MAX_MATERIALIZE_DEPTH",
    "build_cantor_instance",
    "cantor_cell_id",
    "gap_count",
    "closed_form_c1",
    "closed_form_c1_max",
    "closed_form_c1_bound",
    "closed_form_f_norm",
    "closed_form_f_norm_limit",
    "closed_form_lhs_lower",
    "limit_ratio",
    "divergence_sweep",
    "growth_exponent",
    "sweep_verdict",
    "rows_to_csv",
]

MAX_MATERIALIZE_DEPTH = 13


@dataclass(frozen=True)
class CantorConfig:
    """Parameters of the construction.

    ``strict=False`` skips the ``q < p`` and ``1/p < r < 1/q`` checks so the
    closed forms can be evaluated outside the counterexample regime.
    """

    depth: int
    p: float = 2.0
    q: float = 1.0
    r: float = 0.7
    strict: bool = True

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"depth must be an integer >= 1, got {self.depth}")
        if not self.p > 1 or not self.q >= 1:
            raise ValueError(f"need p > 1 and q >= 1, got p={self.p}, q={self.q}")
        if self.strict:
            if not self.q < self.p:
                raise ValueError(f"the construction needs q < p, got p={self.p}, q={self.q}")
            if not 1.0 / self.p < self.r < 1.0 / self.q:
                raise ValueError(
                    f"r must satisfy 1/p < r < 1/q, i.e. {1 / self.p:g} < r < {1 / self.q:g}; "
                    f"got r={self.r}")


@dataclass
class CantorRow:
    depth: int
    c1: float
    f_norm_p: float
    lhs_lower: float
    lhs_exact: float = None
    ratio_to_prev: float = None


def cantor_cell_id(n, i):
    """Id of the tri-adic cell ``[i 3^-n, (i+1) 3^-n)``."""
    return (3 ** n - 1) // 2 + i


def gap_count(n):
    """Number of maximal gap intervals of length ``3^-n`` (n >= 1)."""
    return 2 ** (n - 1)


def build_cantor_instance(config, max_depth=MAX_MATERIALIZE_DEPTH):
    """Materialize the construction at depth ``config.depth``.

    Returns ``(instance, f)`` with ``f`` the gap function as a leaf array.
    """
    N = int(config.depth)
    if N > max_depth:
        raise ValueError(f"depth {N} has 3^{N} leaves; above {max_depth} use the "
                         "closed_form_* functions instead")
    p, r = config.p, config.r
    generations = [[0]]
    parent = {}
    component = [np.array([True])]
    first_gap = [np.array([0])]
    alpha_parts = [np.array([1.0])]
    for n in range(1, N + 1):
        idx = np.arange(3 ** n)
        digit = idx % 3
        comp = np.repeat(component[-1], 3) & (digit != 1)
        gap = np.repeat(first_gap[-1], 3)
        gap = np.where((gap == 0) & (digit == 1), n, gap)
        component.append(comp)
        first_gap.append(gap)
        ids = (3 ** n - 1) // 2 + idx
        generations.append(ids.tolist())
        parent.update(zip(ids.tolist(), ((3 ** (n - 1) - 1) // 2 + idx // 3).tolist()))
        alpha_parts.append(np.where(comp, (2.0 / 3.0) ** (n / p), 0.0))
    lat = Lattice(generations, parent)
    L = 3 ** N
    mu = np.full(L, float(Fraction(1, 3 ** N)))
    nu = np.where(component[-1], float(Fraction(1, 2 ** N)), 0.0)
    alpha = np.concatenate(alpha_parts)
    gap = first_gap[-1]
    with np.errstate(divide="ignore"):
        f = np.where(gap > 0, (1.5 ** (gap / p)) * np.power(np.maximum(gap, 1), -r), 0.0)
    # leaves are created in interval order, which is also depth-first order
    assert lat.leaves == tuple(generations[-1])
    return Instance(lat, mu, nu, alpha, config.p, config.q), f


def _rho(config):
    return (2.0 / 3.0) ** (config.q / config.p)


def closed_form_c1(config, n):
    """Indicator testing constant at a component of C_n, truncated at depth N.

    ``([sum_{k=n}^N (2/3)^(qk/p)]^(p/q) 2^-n / 3^-n)^(1/p)``, which simplifies
    to ``[(1 - rho^(N-n+1)) / (1 - rho)]^(1/q)`` with ``rho = (2/3)^(q/p)``.
    """
    N = config.depth
    if not 0 <= n <= N:
        raise ValueError(f"generation {n} outside 0..{N}")
    log_rho = math.log(_rho(config))
    geometric = math.expm1((N - n + 1) * log_rho) / math.expm1(log_rho)
    return geometric ** (1.0 / config.q)


def closed_form_c1_max(config):
    """Global C1 of the depth-N instance (attained at the root)."""
    return closed_form_c1(config, 0)


def closed_form_c1_bound(config):
    """Depth-independent bound ``(1 - rho)^(-1/q)`` on every closed_form_c1 value."""
    return (1.0 / (1.0 - _rho(config))) ** (1.0 / config.q)


def closed_form_f_norm(config):
    """``||f||_{L^p(mu)}`` at depth N.

    Gaps of length 3^-n number ``2^(n-1)`` and carry ``f^p = (3/2)^n n^(-pr)``,
    so ``||f||_p^p = sum_{n=1}^N n^(-pr) / 2``.
    """
    p, r = config.p, config.r
    n = np.arange(1, config.depth + 1, dtype=float)
    counts = np.ldexp(1.0, (n - 1).astype(int))
    terms = counts * np.power(3.0, -n) * np.power(1.5, n) * np.power(n, -p * r)
    return float(np.sum(terms)) ** (1.0 / p)


def closed_form_f_norm_limit(config):
    """``||f||_p`` of the untruncated function, ``(zeta(pr) / 2)^(1/p)``."""
    if not config.p * config.r > 1:
        return math.inf
    return (0.5 * float(zeta(config.p * config.r))) ** (1.0 / config.p)


def closed_form_lhs_lower(config):
    """Explicit lower bound for ``int [sum_I |alpha_I E_I f|^q]^(p/q) dnu``.

    Each component I of C_k (k < N) contains a gap of length ``3^-(k+1)``
    filling a third of it, so ``alpha_I E_I f >= (1/3)(3/2)^(1/p)(k+1)^(-r)``
    on I; summing over k and integrating against nu(C_N) = 1 gives
    ``[sum_{k=0}^{N-1} ((1/3)(3/2)^(1/p)(k+1)^(-r))^q]^(p/q)``.
    """
    p, q, r = config.p, config.q, config.r
    k1 = np.arange(1, config.depth + 1, dtype=float)
    c = (1.5 ** (1.0 / p)) / 3.0
    inner = np.sum((c * np.power(k1, -r)) ** q)
    return float(inner) ** (p / q)


def limit_ratio(p, q, r):
    """Asymptotic ``lhs_lower(2N) / lhs_lower(N)`` for ``q r < 1``."""
    return 2.0 ** ((1.0 - q * r) * p / q)


def divergence_sweep(p, q, r, depths, materialize_up_to=6, strict=True):
    """One :class:`CantorRow` per depth; ``lhs_exact`` is filled for small depths."""
    from .operators import mixed_norm_of_Talpha

    rows = []
    prev = None
    for N in depths:
        cfg = CantorConfig(int(N), p, q, r, strict=strict)
        row = CantorRow(int(N), closed_form_c1_max(cfg), closed_form_f_norm(cfg),
                        closed_form_lhs_lower(cfg))
        if N <= materialize_up_to:
            inst, f = build_cantor_instance(cfg)
            row.lhs_exact = float(mixed_norm_of_Talpha(inst, f)) ** p
        if prev is not None:
            row.ratio_to_prev = row.lhs_lower / prev.lhs_lower
        rows.append(row)
        prev = row
    return rows


def growth_exponent(rows, last=4):
    """Slope of ``log lhs_lower`` against ``log depth`` over the final rows."""
    tail = rows[-last:]
    if len(tail) < 2:
        return float("nan")
    x = np.log([r.depth for r in tail])
    y = np.log([r.lhs_lower for r in tail])
    return float(np.polyfit(x, y, 1)[0])


def sweep_verdict(rows, p, band=4.0):
    """Classify a sweep: flat C1 with a growing norm lower bound means C1 is insufficient.

    The norm lower bound at each depth is ``lhs_lower^(1/p) / ||f||_p``.
    """
    c1 = np.array([r.c1 for r in rows])
    lower = np.array([r.lhs_lower ** (1.0 / p) / r.f_norm_p for r in rows])
    flat = c1.max() / c1.min() < band
    growing = len(rows) > 1 and bool(np.all(np.diff(lower / c1) > 0))
    if flat and growing:
        return "C1 alone insufficient"
    return "inconclusive"


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["depth", "c1", "f_norm", "lhs_lower", "lhs_exact", "ratio_to_prev"])

    def fmt(x):
        return "" if x is None else format(x, ".17g")

    for r in rows:
        writer.writerow([r.depth, fmt(r.c1), fmt(r.f_norm_p), fmt(r.lhs_lower),
                         fmt(r.lhs_exact), fmt(r.ratio_to_prev)])
    return buf.getvalue()
