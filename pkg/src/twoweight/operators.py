"""Averaging operators, the positive operator T_alpha and the maximal function.

Every function here accepts a leaf array ``f`` of shape ``(L,)`` or a batch
of shape ``(L, R)`` (one function per column) and is pure.

Convention for cells of zero mu-mass: their average is defined as 0, so they
drop out of every operator and of the maximal supremum.
"""

import numpy as np

__all__ = [
    "cell_averages",
    "average",
    "apply_scalar",
    "vector_entry",
    "maximal",
    "lp_norm",
    "lq_accumulate",
    "mixed_norm_of_Talpha",
    "reduced_scalar_value",
]


def _col(weights, f):
    return weights.reshape((-1,) + (1,) * (np.ndim(f) - 1))


def _pow(x, e):
    return x if e == 1 else np.power(x, e)


def _check_finite(values, instance, what):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        cell = instance.lattice.cells[idx[0]] if values.shape[0] == instance.lattice.n_cells \
            else instance.lattice.leaves[idx[0]]
        raise FloatingPointError(f"non-finite {what} at cell {cell}")


def _leaf_array(instance, f):
    f = np.asarray(f, dtype=float)
    if f.shape[:1] != (instance.lattice.n_leaves,):
        raise ValueError(f"function has shape {f.shape}, expected "
                         f"({instance.lattice.n_leaves}, ...)")
    return f


def cell_averages(instance, f):
    """mu-average of ``f`` over every cell (0 on zero-mass cells)."""
    f = _leaf_array(instance, f)
    mass = instance.mu_cell
    sums = instance.lattice.cell_sums(f * _col(instance.mu, f))
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = np.where(_col(mass, sums) > 0, sums / _col(mass, sums), 0.0)
    _check_finite(avg, instance, "average")
    return avg


def average(instance, f, cell):
    """The averaging operator ``E_I f``: the mu-average of f on I, times 1_I."""
    i = instance.lattice.check_cell(cell)
    f = _leaf_array(instance, f)
    lo, hi = instance.lattice.leaf_range
    mass = instance.mu_cell[i]
    out = np.zeros_like(f)
    if mass > 0:
        part = f[lo[i]:hi[i]]
        value = np.tensordot(instance.mu[lo[i]:hi[i]], part, axes=(0, 0)) / mass
        out[lo[i]:hi[i]] = value
    return out


def apply_scalar(instance, f, alpha=None):
    """Scalar operator: sum over all cells of ``alpha_I * E_I f``, leafwise."""
    alpha = instance.alpha if alpha is None else np.asarray(alpha, dtype=float)
    avg = cell_averages(instance, f)
    terms = _col(alpha, avg) * avg
    return terms[instance.lattice.ancestors].sum(axis=0)


def vector_entry(instance, f, cell):
    """Component ``I`` of the vector operator: ``alpha_I * E_I f``."""
    i = instance.lattice.check_cell(cell)
    return instance.alpha[i] * average(instance, f, cell)


def maximal(instance, f):
    """Martingale maximal function: leafwise sup of ``|E_I f|`` over I containing it."""
    avg = np.abs(cell_averages(instance, f))
    return avg[instance.lattice.ancestors].max(axis=0)


def lp_norm(instance, f, exponent, weight="mu"):
    """``L^exponent`` norm of ``f`` against the ``weight`` leaf masses."""
    if not exponent >= 1:
        raise ValueError(f"exponent must be >= 1, got {exponent}")
    if weight not in ("mu", "nu"):
        raise ValueError(f"weight must be 'mu' or 'nu', not {weight!r}")
    f = _leaf_array(instance, f)
    w = instance.mu if weight == "mu" else instance.nu
    total = (_pow(np.abs(f), exponent) * _col(w, f)).sum(axis=0)
    return _pow(total, 1.0 / exponent)


def lq_accumulate(instance, f, averages=None):
    """Leafwise ``sum_I alpha_I^q |E_I f|^q`` over the cells containing each leaf."""
    q = instance.q
    avg = cell_averages(instance, f) if averages is None else averages
    terms = _col(_pow(instance.alpha, q), avg) * _pow(np.abs(avg), q)
    acc = terms[instance.lattice.ancestors].sum(axis=0)
    _check_finite(acc, instance, "l^q sum")
    return acc


def mixed_norm_of_Talpha(instance, f):
    """``L^p(l^q, nu)`` norm of the vector ``{alpha_I E_I f}``.

    This is the p-th root of ``int [sum_I |alpha_I E_I f|^q]^(p/q) dnu``.
    """
    acc = lq_accumulate(instance, f)
    integrand = _pow(acc, instance.p / instance.q) * _col(instance.nu, acc)
    return np.power(integrand.sum(axis=0), 1.0 / instance.p)


def reduced_scalar_value(instance, h):
    """Scalar operator with coefficients ``alpha_I^q`` applied to ``h >= 0``."""
    h = _leaf_array(instance, h)
    if np.any(h < 0):
        raise ValueError("reduction requires nonnegative input")
    return apply_scalar(instance, h, alpha=_pow(instance.alpha, instance.q))
