"""Finite lattices of cells organised in generations.

A lattice is a tree whose nodes (cells) are arranged in generations
``0 .. G-1``.  Every cell of generation ``n < G-1`` is partitioned by its
children in generation ``n+1``; the cells of the last generation are the
leaves, and every measure lives on them as point masses.  A cell that is not
split is modelled by a single child with the same leaf set, so it appears
once per generation it belongs to.

Functions on the space are plain numpy arrays indexed like
:attr:`Lattice.leaves` (depth-first order).  Per-cell quantities are arrays
indexed like :attr:`Lattice.cells` (generation-major order, as given).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

__all__ = [
    "InstanceFormatError",
    "Lattice",
    "Instance",
    "validate",
    "cell_mass",
    "cells_within",
    "random_instance",
    "serialize",
    "deserialize",
]


class InstanceFormatError(ValueError):
    """Raised for a malformed instance document or invalid instance data."""

    def __init__(self, location, message):
        super().__init__(f"{location}: {message}")
        self.location = location


class Lattice:
    """Tree of cells in generations.

    Parameters
    ----------
    generations : sequence of sequences of int
        Cell ids of each generation, coarsest first.
    parent : mapping int -> int
        Parent of every cell outside generation 0.

    The constructor accepts structurally broken input so that
    :func:`validate` can report on it; anything that needs the index layout
    raises ``ValueError`` on an invalid lattice.
    """

    def __init__(self, generations, parent):
        self.generations = tuple(tuple(int(c) for c in gen) for gen in generations)
        self.parent = {int(k): int(v) for k, v in parent.items()}
        self.cells = tuple(c for gen in self.generations for c in gen)
        self.generation_of = {}
        for n, gen in enumerate(self.generations):
            for c in gen:
                self.generation_of.setdefault(c, n)
        self.position = {}
        for i, c in enumerate(self.cells):
            self.position.setdefault(c, i)
        self.children = {c: [] for c in self.cells}
        for c in self.cells:
            par = self.parent.get(c)
            if par in self.children:
                self.children[par].append(c)

    def __repr__(self):
        return (f"Lattice({len(self.generations)} generations, "
                f"{len(self.cells)} cells)")

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        return self.generations == other.generations and self.parent == other.parent

    __hash__ = None

    @property
    def n_generations(self):
        return len(self.generations)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_leaves(self):
        return len(self.generations[-1])

    @cached_property
    def problems(self):
        """Cached result of :func:`validate`."""
        return tuple(validate(self))

    @cached_property
    def _layout(self):
        problems = self.problems
        if problems:
            raise ValueError("invalid lattice: " + "; ".join(problems[:5]))
        return _Layout(self)

    @property
    def leaves(self):
        """Leaf ids in depth-first order; the index order of all functions."""
        return self._layout.leaves

    @property
    def leaf_position(self):
        return self._layout.leaf_position

    @property
    def ancestors(self):
        """``(G, L)`` array: cell position of each leaf's generation-``g`` cell."""
        return self._layout.anc

    @property
    def leaf_range(self):
        """``(lo, hi)`` arrays: cell ``i`` holds leaves ``lo[i]:hi[i]``."""
        return self._layout.lo, self._layout.hi

    @property
    def chain_top(self):
        """Position of the coarsest cell with the same leaf set, per cell."""
        return self._layout.top

    @property
    def generation_index(self):
        return self._layout.gen

    def cell_sums(self, values):
        """Sum leaf values over every cell, bottom-up (three-way-add accuracy)."""
        return self._layout.cell_sums(np.asarray(values, dtype=float))

    def sums_at_generation(self, values, g):
        """Cell sums for generation ``g`` only, ordered like ``cells_at(g)``."""
        return self._layout.sums_to(np.asarray(values, dtype=float), g)

    def cell_reduce(self, values, ufunc):
        """Reduce leaf values over every cell with ``ufunc`` (e.g. ``np.minimum``)."""
        return self._layout.cell_reduce(np.asarray(values, dtype=float), ufunc)

    def cells_at(self, g):
        """Cell positions of generation ``g`` in leaf order."""
        return self._layout.order[g]

    def check_cell(self, cell):
        if cell not in self.position:
            raise KeyError(f"no such cell: {cell}")
        return self.position[cell]

    def indicator(self, cell):
        """Leaf indicator of ``cell``."""
        i = self.check_cell(cell)
        lo, hi = self.leaf_range
        out = np.zeros(self.n_leaves)
        out[lo[i]:hi[i]] = 1.0
        return out


class _Layout:
    """Depth-first index structures for a valid lattice."""

    def __init__(self, lat):
        pos = lat.position
        n_cells = lat.n_cells
        G = lat.n_generations
        self.gen = np.array([lat.generation_of[c] for c in lat.cells], dtype=np.intp)
        parent = np.full(n_cells, -1, dtype=np.intp)
        for c, par in lat.parent.items():
            parent[pos[c]] = pos[par]
        self.parent = parent

        lo = np.zeros(n_cells, dtype=np.intp)
        hi = np.zeros(n_cells, dtype=np.intp)
        leaves = []
        # iterative DFS; children already in generation order
        stack = [(pos[c], False) for c in reversed(lat.generations[0])]
        while stack:
            i, done = stack.pop()
            c = lat.cells[i]
            if done:
                hi[i] = len(leaves)
                continue
            lo[i] = len(leaves)
            kids = lat.children[c]
            if not kids:
                leaves.append(c)
                hi[i] = len(leaves)
                continue
            stack.append((i, True))
            stack.extend((pos[k], False) for k in reversed(kids))
        self.lo, self.hi = lo, hi
        self.leaves = tuple(leaves)
        self.leaf_position = {c: j for j, c in enumerate(leaves)}

        self.order = []
        for g in range(G):
            cells_g = np.array([pos[c] for c in lat.generations[g]], dtype=np.intp)
            self.order.append(cells_g[np.argsort(lo[cells_g], kind="stable")])

        L = len(leaves)
        anc = np.empty((G, L), dtype=np.intp)
        for g in range(G):
            cg = self.order[g]
            anc[g] = np.repeat(cg, hi[cg] - lo[cg])
        self.anc = anc

        # children of generation g+1 grouped by parent, in leaf order
        self.group_starts = []
        for g in range(G - 1):
            par = parent[self.order[g + 1]]
            starts = np.flatnonzero(np.r_[True, par[1:] != par[:-1]])
            self.group_starts.append(starts)

        top = np.arange(n_cells)
        for g in range(1, G):
            for i in self.order[g]:
                pi = parent[i]
                if lo[pi] == lo[i] and hi[pi] == hi[i]:
                    top[i] = top[pi]
        self.top = top

    def cell_sums(self, values):
        G = len(self.order)
        out = np.zeros((len(self.gen),) + values.shape[1:])
        level = values
        out[self.order[G - 1]] = level
        for g in range(G - 2, -1, -1):
            level = np.add.reduceat(level, self.group_starts[g], axis=0)
            out[self.order[g]] = level
        return out

    def cell_reduce(self, values, ufunc):
        out = np.empty((len(self.gen),) + values.shape[1:])
        for cg in self.order:
            out[cg] = ufunc.reduceat(values, self.lo[cg], axis=0)
        return out

    def sums_to(self, values, g):
        level = values
        for h in range(len(self.order) - 2, g - 1, -1):
            level = np.add.reduceat(level, self.group_starts[h], axis=0)
        return level


def validate(lattice):
    """List the violated lattice invariants; an empty list means valid.

    Checks generation bookkeeping, the parent map, the refinement property
    (children of every non-final cell partition it) and the partition
    property (every leaf has exactly one cell per generation).
    """
    problems = []
    lat = lattice
    if not lat.generations or any(len(g) == 0 for g in lat.generations):
        return ["structure: empty generation"]
    seen = set()
    for c in lat.cells:
        if c < 0:
            problems.append(f"structure: negative cell id {c}")
        if c in seen:
            problems.append(f"structure: cell {c} listed twice")
        seen.add(c)
    for c, par in lat.parent.items():
        if c not in seen:
            problems.append(f"structure: parent map names unknown cell {c}")
        elif par not in seen:
            problems.append(f"structure: cell {c} has unknown parent {par}")
    for c in lat.cells:
        n = lat.generation_of[c]
        par = lat.parent.get(c)
        if n == 0 and par is not None:
            problems.append(f"structure: root {c} has a parent")
        elif n > 0 and par is None:
            problems.append(f"structure: cell {c} in generation {n} has no parent")
        elif par is not None and par in seen and lat.generation_of[par] != n - 1:
            problems.append(
                f"refinement: cell {c} in generation {n} has parent {par} "
                f"in generation {lat.generation_of[par]}")
    if problems:
        return problems

    last = len(lat.generations) - 1
    chains = {}
    for leaf in lat.generations[-1]:
        chain, c = [], leaf
        while c is not None:
            if c in chain or len(chain) > len(lat.cells):
                problems.append(f"structure: cycle through cell {c}")
                break
            chain.append(c)
            c = lat.parent.get(c)
        chains[leaf] = chain
    if problems:
        return problems

    leafsets = {c: set() for c in lat.cells}
    for leaf, chain in chains.items():
        for c in chain:
            leafsets[c].add(leaf)
        counts = {}
        for c in chain:
            n = lat.generation_of[c]
            counts[n] = counts.get(n, 0) + 1
        for n in range(last + 1):
            if counts.get(n, 0) != 1:
                problems.append(
                    f"partition: leaf {leaf} lies in {counts.get(n, 0)} cells "
                    f"of generation {n}")

    for c in lat.cells:
        n = lat.generation_of[c]
        if n == last:
            continue
        kids = [k for k in lat.children[c] if lat.generation_of[k] == n + 1]
        covered = set().union(*(leafsets[k] for k in kids)) if kids else set()
        if not kids or covered != leafsets[c] or not leafsets[c]:
            problems.append(
                f"refinement: children of cell {c} cover {len(covered)} of "
                f"its {len(leafsets[c])} leaves")
    return problems


@dataclass(frozen=True, eq=False)
class Instance:
    """Lattice, two leaf weights, coefficients and the exponent pair.

    ``mu`` and ``nu`` are leaf masses in :attr:`Lattice.leaves` order,
    ``alpha`` is indexed like :attr:`Lattice.cells`.
    """

    lattice: Lattice
    mu: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray
    p: float = 2.0
    q: float = 1.0

    def __post_init__(self):
        lat = self.lattice
        if lat.problems:
            raise InstanceFormatError("generations", lat.problems[0])
        for name, size in (("mu", lat.n_leaves), ("nu", lat.n_leaves),
                           ("alpha", lat.n_cells)):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (size,):
                raise InstanceFormatError(name, f"expected {size} values, got {arr.shape}")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InstanceFormatError(name, "values must be finite and nonnegative")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        p, q = float(self.p), float(self.q)
        if not p > 1 or not np.isfinite(p):
            raise InstanceFormatError("p", f"need 1 < p < inf, got {p}")
        if not q >= 1 or not np.isfinite(q):
            raise InstanceFormatError("q", f"need 1 <= q < inf, got {q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)

    @property
    def s(self):
        """Exponent ``p/q`` of the reduced scalar problem."""
        return self.p / self.q

    @property
    def s_conj(self):
        """Conjugate of ``p/q``; only defined when ``p > q``."""
        if not self.p > self.q:
            raise ValueError("(p/q)' is only defined for p > q")
        s = self.s
        return s / (s - 1.0)

    @cached_property
    def mu_cell(self):
        return self.lattice.cell_sums(self.mu)

    @cached_property
    def nu_cell(self):
        return self.lattice.cell_sums(self.nu)

    @cached_property
    def alpha_effective(self):
        """Coefficients with zero-mu cells switched off (they average to 0)."""
        return np.where(self.mu_cell > 0, self.alpha, 0.0)

    def replace(self, **changes):
        return replace(self, **changes)

    def function(self, values):
        """Leaf array from a ``{leaf_id: value}`` mapping; missing leaves are 0."""
        out = np.zeros(self.lattice.n_leaves)
        lp = self.lattice.leaf_position
        for k, v in values.items():
            if int(k) not in lp:
                raise KeyError(f"no such leaf: {k}")
            out[lp[int(k)]] = float(v)
        return out

    def function_dict(self, f):
        return {leaf: float(v) for leaf, v in zip(self.lattice.leaves, f)}

    def indicator(self, cell):
        return self.lattice.indicator(cell)


def cell_mass(instance, weight, cell):
    """Mass of ``cell`` under ``weight`` (``"mu"`` or ``"nu"``)."""
    if weight not in ("mu", "nu"):
        raise ValueError(f"weight must be 'mu' or 'nu', not {weight!r}")
    i = instance.lattice.check_cell(cell)
    masses = instance.mu_cell if weight == "mu" else instance.nu_cell
    return float(masses[i])


def cells_within(lattice, cell):
    """All cells whose leaf set lies inside that of ``cell``.

    Cells repeated across generations are listed once per generation, so
    the coarser copies of ``cell`` itself are included.
    """
    i = lattice.check_cell(cell)
    lo, hi = lattice.leaf_range
    inside = np.flatnonzero((lo >= lo[i]) & (hi <= hi[i]))
    return [lattice.cells[j] for j in inside]


def random_instance(seed, branching=2, depth=3, p=2.0, q=1.0, zero_fraction=0.1,
                    alpha_zero_fraction=0.2, repeat_fraction=0.0):
    """Reproducible random instance.

    Masses are uniform on [0, 1) with a ``zero_fraction`` of exact zeros;
    coefficients uniform on [0, 1) with an ``alpha_zero_fraction`` of zeros.
    With ``repeat_fraction > 0`` some cells are carried unsplit into the next
    generation.
    """
    if int(branching) != branching or branching < 2:
        raise ValueError(f"branching must be an integer >= 2, got {branching}")
    if int(depth) != depth or depth < 1:
        raise ValueError(f"depth must be an integer >= 1, got {depth}")
    for name, frac in (("zero_fraction", zero_fraction),
                       ("alpha_zero_fraction", alpha_zero_fraction),
                       ("repeat_fraction", repeat_fraction)):
        if not 0 <= frac <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {frac}")
    rng = np.random.default_rng(seed)
    generations = [[0]]
    parent = {}
    next_id = 1
    for _ in range(int(depth)):
        gen = []
        for c in generations[-1]:
            k = 1 if (repeat_fraction and rng.random() < repeat_fraction) else int(branching)
            for _ in range(k):
                parent[next_id] = c
                gen.append(next_id)
                next_id += 1
        generations.append(gen)
    lat = Lattice(generations, parent)
    L, n = lat.n_leaves, lat.n_cells

    def masses():
        m = rng.random(L)
        m[rng.random(L) < zero_fraction] = 0.0
        return m

    mu = masses()
    nu = masses()
    alpha = rng.random(n)
    alpha[rng.random(n) < alpha_zero_fraction] = 0.0
    return Instance(lat, mu, nu, alpha, p, q)


def _dec(x):
    return repr(float(x))


def serialize(instance):
    """JSON document for ``instance``; masses as round-trip decimal strings."""
    lat = instance.lattice
    doc = {
        "p": _dec(instance.p),
        "q": _dec(instance.q),
        "generations": [list(g) for g in lat.generations],
        "parent": {str(c): lat.parent[c] for c in lat.cells if c in lat.parent},
        "mu": {str(c): _dec(m) for c, m in zip(lat.leaves, instance.mu)},
        "nu": {str(c): _dec(m) for c, m in zip(lat.leaves, instance.nu)},
        "alpha": {str(c): _dec(a) for c, a in zip(lat.cells, instance.alpha)},
    }
    return json.dumps(doc, indent=1)


def _number(value, location):
    if isinstance(value, bool):
        raise InstanceFormatError(location, "expected a decimal, got a boolean")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InstanceFormatError(location, f"not a decimal: {value!r}") from None


def _cell_id(value, location):
    try:
        c = int(value)
    except (TypeError, ValueError):
        raise InstanceFormatError(location, f"not a cell id: {value!r}") from None
    if str(c) != str(value).strip() and c != value:
        raise InstanceFormatError(location, f"not a cell id: {value!r}")
    return c


def deserialize(document):
    """Parse an instance document (JSON text or already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"line {exc.lineno} column {exc.colno}",
                                      exc.msg) from None
    if not isinstance(document, dict):
        raise InstanceFormatError("<root>", "expected a JSON object")
    for key in ("p", "q", "generations", "parent", "mu", "nu"):
        if key not in document:
            raise InstanceFormatError(key, "missing field")
    gens = document["generations"]
    if not isinstance(gens, list) or not all(isinstance(g, list) for g in gens):
        raise InstanceFormatError("generations", "expected a list of lists")
    generations = [[_cell_id(c, f"generations[{n}][{j}]") for j, c in enumerate(g)]
                   for n, g in enumerate(gens)]
    for key in ("parent", "mu", "nu"):
        if not isinstance(document[key], dict):
            raise InstanceFormatError(key, "expected an object")
    alpha_doc = document.get("alpha", {})
    if not isinstance(alpha_doc, dict):
        raise InstanceFormatError("alpha", "expected an object")
    parent = {_cell_id(k, f"parent/{k}"): _cell_id(v, f"parent/{k}")
              for k, v in document["parent"].items()}
    lat = Lattice(generations, parent)
    if lat.problems:
        raise InstanceFormatError("generations", lat.problems[0])

    def leaf_masses(key):
        raw = document[key]
        out = np.zeros(lat.n_leaves)
        for k, v in raw.items():
            c = _cell_id(k, f"{key}/{k}")
            if c not in lat.leaf_position:
                raise InstanceFormatError(f"{key}/{k}", "not a leaf")
            x = _number(v, f"{key}/{k}")
            if not np.isfinite(x) or x < 0:
                raise InstanceFormatError(f"{key}/{k}", f"mass must be >= 0, got {v!r}")
            out[lat.leaf_position[c]] = x
        missing = [c for c in lat.leaves if str(c) not in raw]
        if missing:
            raise InstanceFormatError(f"{key}/{missing[0]}", "missing leaf mass")
        return out

    mu = leaf_masses("mu")
    nu = leaf_masses("nu")
    alpha = np.zeros(lat.n_cells)
    for k, v in alpha_doc.items():
        c = _cell_id(k, f"alpha/{k}")
        if c not in lat.position:
            raise InstanceFormatError(f"alpha/{k}", "no such cell")
        x = _number(v, f"alpha/{k}")
        if not np.isfinite(x) or x < 0:
            raise InstanceFormatError(f"alpha/{k}", f"coefficient must be >= 0, got {v!r}")
        alpha[lat.position[c]] = x
    p = _number(document["p"], "p")
    q = _number(document["q"], "q")
    return Instance(lat, mu, nu, alpha, p, q)
