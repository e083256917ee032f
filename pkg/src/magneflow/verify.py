"""Verification of the integral family: exact brackets, independence, membership.

The primary criterion everywhere is exactness: a bracket counts as zero
only when the polynomial is identically zero over Q.  A bracket that
merely vanishes numerically on the constraint set is classified as
`zero_on_constraints`; that tier exists to make failures informative and
is still a failure.

Numerical pieces (functional independence, the probe rank tests) draw
all randomness from one seed through named substreams, so reports are
reproducible regardless of worker count.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import sampling
from .errors import InputError
from .exactpoly import (
    PhasePoly,
    compiled_evaluator,
    format_rational,
    poisson_bracket,
    x_var,
)
from .integral_family import IntegralFamily, killing
from .magnetic_model import MagneticModel, hamiltonian_pert

__all__ = [
    "fd_bracket_oracle",
    "PairResult",
    "check_commutation",
    "potential_compatibility",
    "RankStats",
    "functional_independence",
    "MembershipResult",
    "hamiltonian_membership",
    "ProbeResult",
    "superintegrability_probe",
    "VerificationReport",
    "run_verification",
]

_STREAM_COMMUTATION = 1
_STREAM_INDEPENDENCE = 2
_STREAM_PROBE = 3

ON_CONSTRAINT_RTOL = 1e-10
RANK_THRESHOLD_REL = 1e-8
FULL_RANK_QUOTA = 0.95


def _worker_count(workers: int | None) -> int:
    if workers is None:
        raw = os.environ.get("MAGNEFLOW_THREADS", "1")
        try:
            workers = int(raw)
        except ValueError:
            raise InputError(f"MAGNEFLOW_THREADS must be an integer, got {raw!r}") from None
    return max(1, workers)


# -- finite-difference oracle -------------------------------------------------


def fd_bracket_oracle(f: PhasePoly, g: PhasePoly, point, h: float = 1e-5) -> float:
    """Central-difference estimate of {f, g} at a float point.

    Uses only the evaluators, never the symbolic bracket, so it serves as
    an independent cross-check of the exact engine.
    """
    z = np.asarray(point, dtype=float)
    d = f.n + 1

    def cd(poly, slot):
        zp = z.copy()
        zp[slot] += h
        zm = z.copy()
        zm[slot] -= h
        return (poly.evaluate(zp) - poly.evaluate(zm)) / (2.0 * h)

    total = 0.0
    for i in range(d):
        total += cd(f, i) * cd(g, d + i) - cd(f, d + i) * cd(g, i)
    return total


# -- pairwise commutation ------------------------------------------------------


@dataclass
class PairResult:
    left: str
    right: str
    status: str  # zero_polynomial | zero_on_constraints | nonzero
    witness_terms: int

    def to_dict(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "status": self.status,
            "witness_terms": self.witness_terms,
        }


def _classify_bracket(f, g, bracket, points) -> tuple:
    if bracket.is_zero:
        return "zero_polynomial", 0
    scale = 1.0
    residual = 0.0
    for z in points:
        scale = max(scale, abs(f.evaluate(z)), abs(g.evaluate(z)))
        residual = max(residual, abs(bracket.evaluate(z)))
    if residual <= ON_CONSTRAINT_RTOL * scale:
        return "zero_on_constraints", bracket.num_terms
    return "nonzero", bracket.num_terms


def check_commutation(
    family: IntegralFamily,
    include_hamiltonian: bool = True,
    seed: int = 0,
    workers: int | None = None,
) -> list:
    """Exact brackets of all member pairs (self pairs included) and of each
    member with the Hamiltonian.  Pure computations; safe to run on any
    number of threads without changing the result."""
    members = family.members()
    labels = family.labels()
    if include_hamiltonian:
        members = members + [hamiltonian_pert(family.model)]
        labels = labels + ["H"]
    rng = sampling.generator(seed, _STREAM_COMMUTATION)
    points = sampling.constrained_points(rng, family.model.n, 50)

    tasks = []
    for i in range(len(members)):
        for j in range(i, len(members)):
            if include_hamiltonian and i == len(members) - 1:
                continue  # no (H, H) self pair
            tasks.append((i, j))

    def run(task):
        i, j = task
        bracket = poisson_bracket(members[i], members[j])
        status, witness = _classify_bracket(members[i], members[j], bracket, points)
        return PairResult(labels[i], labels[j], status, witness)

    nworkers = _worker_count(workers)
    if nworkers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def potential_compatibility(k1: PhasePoly, u1: PhasePoly, k2: PhasePoly, u2: PhasePoly) -> bool:
    """Exact check of the mixed commutation condition {K1,U2} + {U1,K2} = 0,
    the momentum-degree-1 component of {K1+U1, K2+U2}."""
    for poly, want, what in ((k1, 2, "K1"), (k2, 2, "K2"), (u1, 0, "U1"), (u2, 0, "U2")):
        degrees = set(poly.p_degree_parts())
        if degrees - {want}:
            raise InputError(f"{what} must be homogeneous of momentum degree {want}")
    mixed = poisson_bracket(k1, u2) + poisson_bracket(u1, k2)
    return mixed.is_zero


# -- functional independence ---------------------------------------------------


@dataclass
class RankStats:
    samples: int
    expected_rank: int
    ranks: list
    full_rank_count: int
    failures: list = field(default_factory=list)

    @property
    def full_rank_fraction(self) -> float:
        return self.full_rank_count / self.samples if self.samples else 0.0

    def histogram(self) -> dict:
        hist: dict = {}
        for r in self.ranks:
            hist[r] = hist.get(r, 0) + 1
        return {str(k): v for k, v in sorted(hist.items())}

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "expected_rank": self.expected_rank,
            "histogram": self.histogram(),
            "full_rank_count": self.full_rank_count,
            "threshold_rel": RANK_THRESHOLD_REL,
            "failures": [{"sample": i, "rank": r} for i, r in self.failures],
        }


def _gradient_tensor(members, points: np.ndarray) -> np.ndarray:
    """Ambient gradients of each member at each point: (R, k, 2d)."""
    R = points.shape[0]
    width = points.shape[1]
    grads = np.empty((R, len(members), width))
    for k, poly in enumerate(members):
        for slot in range(width):
            grads[:, k, slot] = compiled_evaluator(poly._partial(slot))(points)
    return grads


def _projected_rank(grad: np.ndarray, x: np.ndarray, p: np.ndarray) -> int:
    """Rank of the member gradients projected tangentially to the
    constraint set {|X|^2 = 1, <X,P> = 0}."""
    d = x.size
    v1 = np.concatenate([x, np.zeros(d)])
    v2 = np.concatenate([p, x])
    e1 = v1 / np.linalg.norm(v1)
    v2 = v2 - (e1 @ v2) * e1
    e2 = v2 / np.linalg.norm(v2)
    proj = grad - np.outer(grad @ e1, e1) - np.outer(grad @ e2, e2)
    svals = np.linalg.svd(proj, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > RANK_THRESHOLD_REL * svals[0]))


def functional_independence(
    members,
    n: int,
    samples: int = 100,
    seed: int = 0,
    expected_rank: int | None = None,
    stream: int = _STREAM_INDEPENDENCE,
) -> RankStats:
    """Numeric rank of the member differentials restricted to the unit
    cotangent structure, at seeded random points."""
    if expected_rank is None:
        expected_rank = len(members)
    rng = sampling.generator(seed, stream)
    points = sampling.constrained_points(rng, n, samples)
    grads = _gradient_tensor(list(members), points)
    d = n + 1
    ranks = []
    failures = []
    for r in range(samples):
        rank = _projected_rank(grads[r], points[r, :d], points[r, d:])
        ranks.append(rank)
        if rank < expected_rank:
            failures.append((r, rank))
    full = sum(1 for r in ranks if r >= expected_rank)
    return RankStats(
        samples=samples,
        expected_rank=expected_rank,
        ranks=ranks,
        full_rank_count=full,
        failures=failures,
    )


# -- membership of the Hamiltonian ---------------------------------------------


@dataclass
class MembershipResult:
    ok: bool
    coefficients: dict | None

    def to_dict(self) -> dict:
        if not self.ok:
            return {"ok": False, "coefficients": "not representable"}
        return {
            "ok": True,
            "coefficients": {k: format_rational(v) for k, v in self.coefficients.items()},
        }


def _solve_exact(columns, target: PhasePoly):
    """Solve target = sum_k c_k columns[k] exactly over Q; None if impossible."""
    monos = set(target.terms)
    for col in columns:
        monos.update(col.terms)
    monos = sorted(monos)
    ncols = len(columns)
    rows = []
    for e in monos:
        row = [col.terms.get(e, Fraction(0)) for col in columns]
        row.append(target.terms.get(e, Fraction(0)))
        rows.append(row)

    pivot_cols = []
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        lead = rows[rank][col]
        rows[rank] = [v / lead for v in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[rank])]
        pivot_cols.append(col)
        rank += 1
    for r in range(rank, len(rows)):
        if rows[r][ncols]:
            return None
    solution = [Fraction(0)] * ncols
    for r, col in enumerate(pivot_cols):
        solution[col] = rows[r][ncols]
    return solution


def hamiltonian_membership(
    family: IntegralFamily, hamiltonian: PhasePoly | None = None
) -> MembershipResult:
    """Express H exactly in the family.

    Solves H = sum c_k F_k + sum d_i L_i^2 + c_s |X|^2 + c_0 over Q, where
    F_k runs over all members and L_i over the linear members.  The
    squares of the linear members are required: the rotational kinetic
    energy contains (1/2) M_{2i-1,2i}^2 for every plane, and no linear
    combination of the members alone produces those terms.  Since squares
    of members are functions of members, the family remains the generating
    set.  The residual must be the empty polynomial; anything else is
    reported as not representable.
    """
    model = family.model
    n = model.n
    h = hamiltonian if hamiltonian is not None else hamiltonian_pert(model)
    labels = family.labels()
    columns = []
    names = []
    for label, poly in zip(labels, family.members()):
        columns.append(poly)
        names.append(label)
    for label, poly in zip(labels[len(family.quads):], family.linears):
        columns.append(poly * poly)
        names.append(f"{label}^2")
    sphere = PhasePoly(n)
    for i in range(1, n + 2):
        sphere = sphere + x_var(i, n) ** 2
    columns.append(sphere)
    names.append("|X|^2")
    columns.append(PhasePoly.constant(n, 1))
    names.append("1")

    solution = _solve_exact(columns, h)
    if solution is None:
        return MembershipResult(ok=False, coefficients=None)
    recomposed = PhasePoly(n)
    for c, col in zip(solution, columns):
        if c:
            recomposed = recomposed + c * col
    if not (recomposed - h).is_zero:
        return MembershipResult(ok=False, coefficients=None)
    coeffs = dict(zip(names, solution))
    family.hamiltonian_coeffs = {k: format_rational(v) for k, v in coeffs.items()}
    return MembershipResult(ok=True, coefficients=coeffs)


# -- superintegrability probe ----------------------------------------------------


@dataclass
class ProbeResult:
    block: tuple
    kind: str  # generator | pair_sum | pair_diff
    label: str
    cross_pair: bool
    commutes_with_hamiltonian: bool
    commutes_with_indicator_quads: bool
    full_rank_fraction: float
    is_additional_integral: bool

    def to_dict(self) -> dict:
        return {
            "block": list(self.block),
            "kind": self.kind,
            "label": self.label,
            "cross_pair": self.cross_pair,
            "commutes_with_hamiltonian": self.commutes_with_hamiltonian,
            "commutes_with_indicator_quads": self.commutes_with_indicator_quads,
            "full_rank_fraction": self.full_rank_fraction,
            "is_additional_integral": self.is_additional_integral,
        }


def superintegrability_probe(
    model: MagneticModel,
    family: IntegralFamily,
    samples: int = 100,
    seed: int = 0,
) -> list:
    """Search blocks with at least two coordinate planes for extra integrals.

    Candidates are the single rotation momenta M_lm with l, m in the
    block, and for each pair of planes the two plane-symmetric
    combinations M_ac + M_bd and M_ad - M_bc (planes (a,b) and (c,d)).
    A candidate qualifies when its bracket with H and with every
    indicator quadratic is identically zero and it raises the numeric
    rank of the family to n+1 at the sampled points.
    """
    n = model.n
    h = hamiltonian_pert(model)
    indicator_quads = [
        q for q, prov in zip(family.quads, family.quad_provenance)
        if prov.get("kind") == "indicator"
    ]
    members = family.members()
    results = []
    for block in model.partition:
        planes = [u for u in model.block_units(block) if len(u) == 2]
        if len(planes) < 2:
            continue
        plane_of = {}
        for unit in planes:
            for idx in unit:
                plane_of[idx] = unit
        candidates = []
        block_sorted = sorted(block)
        for ai in range(len(block_sorted)):
            for aj in range(ai + 1, len(block_sorted)):
                l, m_idx = block_sorted[ai], block_sorted[aj]
                cross = plane_of.get(l) != plane_of.get(m_idx)
                candidates.append(
                    ("generator", f"M({l},{m_idx})", killing(l, m_idx, n), cross)
                )
        for pi in range(len(planes)):
            for pj in range(pi + 1, len(planes)):
                a, b = planes[pi]
                c, d = planes[pj]
                candidates.append((
                    "pair_sum",
                    f"M({a},{c})+M({b},{d})",
                    killing(a, c, n) + killing(b, d, n),
                    True,
                ))
                candidates.append((
                    "pair_diff",
                    f"M({a},{d})-M({b},{c})",
                    killing(a, d, n) - killing(b, c, n),
                    True,
                ))
        for kind, label, poly, cross in candidates:
            commutes_h = poisson_bracket(poly, h).is_zero
            commutes_ind = all(
                poisson_bracket(poly, q).is_zero for q in indicator_quads
            )
            stats = functional_independence(
                members + [poly],
                n,
                samples=samples,
                seed=seed,
                expected_rank=n + 1,
                stream=_STREAM_PROBE,
            )
            qualifies = (
                commutes_h
                and commutes_ind
                and stats.full_rank_fraction >= FULL_RANK_QUOTA
            )
            results.append(ProbeResult(
                block=tuple(block),
                kind=kind,
                label=label,
                cross_pair=cross,
                commutes_with_hamiltonian=commutes_h,
                commutes_with_indicator_quads=commutes_ind,
                full_rank_fraction=stats.full_rank_fraction,
                is_additional_integral=qualifies,
            ))
    return results


# -- report ---------------------------------------------------------------------


@dataclass
class VerificationReport:
    model: MagneticModel
    seed: int
    samples: int
    pair_results: list
    rank_stats: RankStats
    membership: MembershipResult
    probe_results: list
    wall_time: dict

    @property
    def passed(self) -> bool:
        pairs_ok = all(p.status == "zero_polynomial" for p in self.pair_results)
        rank_ok = self.rank_stats.full_rank_fraction >= FULL_RANK_QUOTA
        return pairs_ok and rank_ok and self.membership.ok

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "model": self.model.to_dict(),
            "seed": self.seed,
            "samples": self.samples,
            "pair_results": [p.to_dict() for p in self.pair_results],
            "rank_stats": self.rank_stats.to_dict(),
            "membership": self.membership.to_dict(),
            "probe_results": [p.to_dict() for p in self.probe_results],
            "passed": self.passed,
        }
        if include_timing:
            out["wall_time"] = dict(self.wall_time)
        return out


def run_verification(
    family: IntegralFamily,
    samples: int = 100,
    seed: int = 0,
    workers: int | None = None,
    with_probe: bool = True,
) -> VerificationReport:
    """Full verification pass over a family: exact commutation, numeric
    independence, exact membership of H, optional extra-integral probe."""
    model = family.model
    timing = {}

    t0 = time.perf_counter()
    pairs = check_commutation(family, include_hamiltonian=True, seed=seed, workers=workers)
    timing["commutation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rank = functional_independence(
        family.members(), model.n, samples=samples, seed=seed, expected_rank=model.n
    )
    timing["independence"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    membership = hamiltonian_membership(family)
    timing["membership"] = time.perf_counter() - t0

    probe_results: list = []
    if with_probe:
        t0 = time.perf_counter()
        probe_results = superintegrability_probe(model, family, samples=samples, seed=seed)
        timing["probe"] = time.perf_counter() - t0

    return VerificationReport(
        model=model,
        seed=seed,
        samples=samples,
        pair_results=pairs,
        rank_stats=rank,
        membership=membership,
        probe_results=probe_results,
        wall_time=timing,
    )
