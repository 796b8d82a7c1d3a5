"""Invariant suite run by ``twoweight verify``.

Each check returns the worst relative slack ``(rhs - lhs) / |rhs|`` it saw;
a negative slack beyond the tolerance is a violation and comes with a
witness.
"""

from dataclasses import dataclass, field

import numpy as np

from .lattice import random_instance
from .operators import apply_scalar, lq_accumulate, mixed_norm_of_Talpha
from .prooftools import chain_certificate, doob_check, reduction_compare, rubio_majorant
from .testing import norm_ascent, norm_exact_p2q2, testing_c1_all

RTOL = 1e-10


@dataclass
class CheckResult:
    name: str
    holds: bool = True
    worst_slack: float = np.inf
    count: int = 0
    witness: dict = field(default_factory=dict)

    def record(self, lhs, rhs, witness=None, rtol=RTOL):
        self.count += 1
        scale = max(abs(rhs), abs(lhs), 1e-300)
        slack = (rhs - lhs) / scale
        if slack < self.worst_slack:
            self.worst_slack = slack
        if lhs > rhs + rtol * scale and self.holds:
            self.holds = False
            self.witness = dict(witness or {}, lhs=float(lhs), rhs=float(rhs))

    def merge(self, other):
        self.count += other.count
        self.worst_slack = min(self.worst_slack, other.worst_slack)
        if not other.holds and self.holds:
            self.holds = False
            self.witness = other.witness

    def to_dict(self):
        return {"name": self.name, "holds": self.holds, "worst_slack": float(self.worst_slack),
                "count": self.count, "witness": self.witness}


def check_instance(instance, seed=0, f_samples=10, restarts=8, tag=None):
    """Run every applicable invariant on one instance; returns ``{name: CheckResult}``."""
    rng = np.random.default_rng(seed)
    lat = instance.lattice
    p, q = instance.p, instance.q
    tag = dict(tag or {})
    fs = rng.random((lat.n_leaves, f_samples))
    results = {}

    def check(name):
        return results.setdefault(name, CheckResult(name))

    jensen = check("jensen")
    left = lq_accumulate(instance, fs)
    right = apply_scalar(instance, fs ** q, alpha=instance.alpha ** q)
    for j in range(f_samples):
        i = int(np.argmax(left[:, j] - right[:, j]))
        jensen.record(left[i, j], right[i, j], dict(tag, sample=j, leaf=lat.leaves[i]))

    doob = check("doob")
    for j in range(f_samples):
        lhs, rhs, _ = doob_check(instance, fs[:, j])
        doob.record(lhs, rhs, dict(tag, sample=j))

    nec = check("necessity")
    c1 = testing_c1_all(instance)
    lo, hi = lat.leaf_range
    live = np.flatnonzero(instance.mu_cell > 0)
    if live.size:
        ind = np.zeros((lat.n_leaves, live.size))
        for k, i in enumerate(live):
            ind[lo[i]:hi[i], k] = 1.0
        lhs = mixed_norm_of_Talpha(instance, ind) ** p
        for k, i in enumerate(live):
            nec.record(c1[i] ** p * instance.mu_cell[i], lhs[k], dict(tag, cell=lat.cells[i]))

    est = norm_ascent(instance, restarts=restarts, seed=seed)
    lower = check("ascent-above-c1")
    lower.record(float(c1.max()), est.value, tag)

    if p <= q:
        chain = check("chain")
        for j in range(f_samples):
            cert = chain_certificate(instance, fs[:, j])
            for step in cert.steps:
                chain.record(step.lhs, step.rhs, dict(tag, sample=j, step=step.label))
    if q < p:
        rub = check("rubio")
        red = check("reduction")
        g = rng.random((lat.n_leaves, f_samples))
        bound_norm = 2.0 ** (1.0 / q)
        bound_a1 = 2.0 * instance.s_conj
        for j in range(f_samples):
            maj = rubio_majorant(instance, fs[:, j])
            w = dict(tag, sample=j)
            rub.record(float(np.max(fs[:, j] - maj.F)), 0.0, dict(w, part="F>=f"))
            # partial sums of the series only undershoot the full majorant
            rub.record(maj.norm_ratio, bound_norm, dict(w, part="norm"))
            rhs = bound_a1 * (maj.per_cell_min + maj.per_cell_tail)
            i = int(np.argmax(maj.per_cell_average - rhs))
            rub.record(maj.per_cell_average[i], rhs[i], dict(w, part="a1", cell=lat.cells[i]))
            res = reduction_compare(instance, fs[:, j], g[:, j], majorant=maj)
            red.record(res.holder_lhs, res.holder_rhs, dict(w, part="holder"))
            red.record(res.holder_rhs, res.rubio_bound, dict(w, part="rubio"))
    if p == 2 and q == 2:
        oracle = check("oracle-p2q2")
        exact = norm_exact_p2q2(instance)
        dense = norm_ascent(instance, restarts=max(restarts, 16), seed=seed)
        oracle.record(abs(dense.value - exact.value), 1e-6 * exact.value, tag, rtol=0.0)
    return results


def suite_instance(seed, branching=None, depth=None, p=None, q=None):
    """Instance of the randomized suite for ``seed``; unset parameters are drawn from the seed."""
    rng = np.random.default_rng([seed, 7919])
    branching = branching or int(rng.choice([2, 3]))
    if depth is None:
        depth = int(rng.integers(1, 6))
    p = p if p is not None else float(rng.choice([1.5, 2.0, 3.0]))
    q = q if q is not None else float(rng.choice([1.0, 2.0, 2.5]))
    repeat = 0.15 if rng.random() < 0.25 else 0.0
    return random_instance(seed, branching=branching, depth=depth, p=p, q=q,
                           repeat_fraction=repeat)


def run_batch(seeds, params, f_samples=10, restarts=8, jobs=1):
    """Check every seed's instance; returns aggregated results plus per-seed failures."""
    args = [(s, params, f_samples, restarts) for s in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(_batch_one, args))
    else:
        per_seed = [_batch_one(a) for a in args]
    total = {}
    for res in per_seed:
        for name, r in res.items():
            total.setdefault(name, CheckResult(name)).merge(r)
    return total


def _batch_one(args):
    seed, params, f_samples, restarts = args
    inst = suite_instance(seed, **params)
    return check_instance(inst, seed=seed, f_samples=f_samples, restarts=restarts,
                          tag={"seed": seed})
