"""Brute-force reference computations.

Everything here works from the parent map and explicit Python sets of leaf
ids, never from the package's index layout, so it can be used to check it.
"""

import math


def leaf_sets(inst):
    lat = inst.lattice
    sets = {c: set() for c in lat.cells}
    for leaf in lat.generations[-1]:
        c = leaf
        while c is not None:
            sets[c].add(leaf)
            c = lat.parent.get(c)
    return sets


def weight_dict(inst, which):
    arr = inst.mu if which == "mu" else inst.nu
    return dict(zip(inst.lattice.leaves, (float(x) for x in arr)))


def alpha_dict(inst):
    return dict(zip(inst.lattice.cells, (float(a) for a in inst.alpha)))


def masses(inst, which):
    w = weight_dict(inst, which)
    return {c: math.fsum(w[x] for x in s) for c, s in leaf_sets(inst).items()}


def averages(inst, f):
    """``{cell: mu-average of f}`` with 0 on zero-mass cells; f a leaf dict."""
    mu = weight_dict(inst, "mu")
    out = {}
    for c, s in leaf_sets(inst).items():
        m = math.fsum(mu[x] for x in s)
        out[c] = math.fsum(mu[x] * f[x] for x in s) / m if m > 0 else 0.0
    return out


def ancestors(inst, leaf):
    lat = inst.lattice
    out, c = [], leaf
    while c is not None:
        out.append(c)
        c = lat.parent.get(c)
    return out


def scalar_operator(inst, f):
    avg = averages(inst, f)
    a = alpha_dict(inst)
    return {x: math.fsum(a[c] * avg[c] for c in ancestors(inst, x)) for x in inst.lattice.leaves}


def maximal(inst, f):
    avg = averages(inst, f)
    return {x: max(abs(avg[c]) for c in ancestors(inst, x)) for x in inst.lattice.leaves}


def mixed_norm(inst, f):
    p, q = inst.p, inst.q
    avg = averages(inst, f)
    a = alpha_dict(inst)
    nu = weight_dict(inst, "nu")
    total = 0.0
    for x in inst.lattice.leaves:
        inner = math.fsum(a[c] ** q * abs(avg[c]) ** q for c in ancestors(inst, x))
        total += inner ** (p / q) * nu[x]
    return total ** (1.0 / p)


def c1(inst, J):
    """Indicator testing constant at J, zero-mu cells skipped."""
    p, q = inst.p, inst.q
    sets = leaf_sets(inst)
    mu_c = masses(inst, "mu")
    a = alpha_dict(inst)
    nu = weight_dict(inst, "nu")
    inside = [I for I in sets if sets[I] <= sets[J]]
    num = 0.0
    for x in sets[J]:
        s = math.fsum(a[I] ** q for I in inside if x in sets[I] and mu_c[I] > 0)
        num += s ** (p / q) * nu[x]
    if mu_c[J] == 0:
        return 0.0 if num == 0 else math.inf
    return (num / mu_c[J]) ** (1.0 / p)


def c2_raw(inst, J):
    """Raw dual testing constant at J (before the q-th root), zero-mu cells skipped."""
    p, q = inst.p, inst.q
    s = p / q
    sc = s / (s - 1.0)
    sets = leaf_sets(inst)
    mu_c = masses(inst, "mu")
    nu_c = masses(inst, "nu")
    a = alpha_dict(inst)
    mu = weight_dict(inst, "mu")
    inside = [I for I in sets if sets[I] <= sets[J]]
    num = 0.0
    for x in sets[J]:
        t = math.fsum(a[I] ** q * nu_c[I] / mu_c[I] for I in inside
                      if x in sets[I] and mu_c[I] > 0)
        num += t ** sc * mu[x]
    if nu_c[J] == 0:
        return 0.0 if num == 0 else math.inf
    return (num / nu_c[J]) ** (1.0 / sc)
