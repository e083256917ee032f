"""Construction of the commuting integral family.

Three building blocks, all exact:

* `killing(i, j, n)` the rotation momentum M_ij = Xi Pj - Xj Pi;
* `uhlenbeck_integral(a, b)` the classical Neumann-system integrals
  F_B = (1/2) sum_{i<j} (b_i - b_j)/(a_i - a_j) M_ij^2 + sum b_i X_i^2
  for pairwise distinct a;
* `degenerate_integral(a, b)` the same formula with all pairs of equal
  a-value removed, defined whenever b is constant on the level blocks of
  a, and `limit_integral` for the within-block quadratics that survive a
  one-parameter splitting of a degenerate block.

`commuting_basis(model)` assembles n = dim S^n functions: one degenerate
integral per indicator of the first s-1 blocks, block-splitting limit
integrals, and the plane rotation momenta M_{2i-1,2i}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import InputError
from .exactpoly import PhasePoly, format_rational, parse_rational, p_var, x_var
from .magnetic_model import MagneticModel, _add_killing_square, ambient_units

__all__ = [
    "killing",
    "uhlenbeck_integral",
    "degenerate_integral",
    "limit_integral",
    "IntegralFamily",
    "commuting_basis",
]


def killing(i: int, j: int, n: int) -> PhasePoly:
    """Rotation momentum M_ij = Xi Pj - Xj Pi, 1-based, i < j."""
    if not 1 <= i < j <= n + 1:
        raise InputError(f"need 1 <= i < j <= {n + 1}, got ({i}, {j})")
    return x_var(i, n) * p_var(j, n) - x_var(j, n) * p_var(i, n)


def _coerce_vector(values: Sequence, n: int, what: str) -> list:
    vec = [v if isinstance(v, Fraction) else Fraction(v) for v in values]
    if len(vec) != n + 1:
        raise InputError(f"{what} must have length {n + 1}, got {len(vec)}")
    return vec


def uhlenbeck_integral(a: Sequence, b: Sequence) -> PhasePoly:
    """F_B for pairwise distinct a.  Raises if any a_i coincide; use
    degenerate_integral for that case."""
    n = len(a) - 1
    if n < 1:
        raise InputError("need at least two coordinates")
    av = _coerce_vector(a, n, "a")
    bv = _coerce_vector(b, n, "b")
    if len(set(av)) != len(av):
        raise InputError("a-values must be pairwise distinct; use degenerate_integral")
    terms: dict = {}
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            coeff = (bv[i] - bv[j]) / (av[i] - av[j]) / 2
            if coeff:
                _add_killing_square(terms, i + 1, j + 1, n, coeff)
    poly = PhasePoly(n, terms)
    for i in range(n + 1):
        if bv[i]:
            poly = poly + bv[i] * (x_var(i + 1, n) ** 2)
    return poly


def _level_blocks(av: Sequence) -> list:
    groups: dict = {}
    for idx, value in enumerate(av):
        groups.setdefault(value, []).append(idx)
    return sorted(groups.values(), key=lambda blk: blk[0])


def degenerate_integral(a: Sequence, b: Sequence) -> PhasePoly:
    """F_B for a with repeated values: pairs inside a level block of a are
    omitted from the kinetic sum.  b must be constant on each block."""
    n = len(a) - 1
    if n < 1:
        raise InputError("need at least two coordinates")
    av = _coerce_vector(a, n, "a")
    bv = _coerce_vector(b, n, "b")
    for block in _level_blocks(av):
        vals = {bv[i] for i in block}
        if len(vals) != 1:
            raise InputError(
                "b must be constant on each level block of a; "
                f"block {[i + 1 for i in block]} carries values {sorted(vals)}"
            )
    terms: dict = {}
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            if av[i] == av[j]:
                continue
            coeff = (bv[i] - bv[j]) / (av[i] - av[j]) / 2
            if coeff:
                _add_killing_square(terms, i + 1, j + 1, n, coeff)
    poly = PhasePoly(n, terms)
    for i in range(n + 1):
        if bv[i]:
            poly = poly + bv[i] * (x_var(i + 1, n) ** 2)
    return poly


def limit_integral(n: int, group: Sequence[int], lam: Mapping, mu: Mapping) -> PhasePoly:
    """Within-group quadratic that survives splitting a degenerate block:

        (1/2) sum_{l<m in group, lam_l != lam_m}
              (mu_l - mu_m)/(lam_l - lam_m) * M_lm^2

    lam and mu map 1-based indices of `group` to rationals and must be
    constant on every coordinate pair contained in the group; lam must
    take distinct values on distinct units (else the splitting would
    leave part of the block degenerate).
    """
    idxs = sorted(set(int(i) for i in group))
    if len(idxs) != len(tuple(group)):
        raise InputError("group indices must be distinct")
    if not idxs or idxs[0] < 1 or idxs[-1] > n + 1:
        raise InputError(f"group indices must lie in 1..{n + 1}")

    def lookup(mapping: Mapping, what: str) -> dict:
        out = {}
        for i in idxs:
            if i not in mapping:
                raise InputError(f"{what} is missing index {i}")
            v = mapping[i]
            out[i] = v if isinstance(v, Fraction) else Fraction(v)
        return out

    lam_v = lookup(lam, "lambda")
    mu_v = lookup(mu, "mu")
    members = set(idxs)
    group_units = [u for u in ambient_units(n) if members.issuperset(u)]
    for unit in group_units:
        if len(unit) == 2:
            i, j = unit
            if lam_v[i] != lam_v[j] or mu_v[i] != mu_v[j]:
                raise InputError(
                    f"lambda and mu must be constant on coordinate pair {unit}"
                )
    unit_lams = [lam_v[u[0]] for u in group_units]
    if len(set(unit_lams)) != len(unit_lams):
        raise InputError("lambda must take distinct values on distinct units")

    terms: dict = {}
    for ai in range(len(idxs)):
        for aj in range(ai + 1, len(idxs)):
            l, m_idx = idxs[ai], idxs[aj]
            if lam_v[l] == lam_v[m_idx]:
                continue
            coeff = (mu_v[l] - mu_v[m_idx]) / (lam_v[l] - lam_v[m_idx]) / 2
            if coeff:
                _add_killing_square(terms, l, m_idx, n, coeff)
    return PhasePoly(n, terms)


@dataclass
class IntegralFamily:
    """The n candidate integrals for a model: quadratics first, then the
    plane rotation momenta.  `hamiltonian_coeffs` is filled in by the
    verification layer once membership of H in the family is solved."""

    model: MagneticModel
    quads: tuple
    quad_provenance: tuple
    linears: tuple
    linear_provenance: tuple
    hamiltonian_coeffs: dict | None = None

    def members(self) -> list:
        return list(self.quads) + list(self.linears)

    def labels(self) -> list:
        return [f"F{k + 1}" for k in range(len(self.quads) + len(self.linears))]

    def size(self) -> int:
        return len(self.quads) + len(self.linears)

    def to_dict(self) -> dict:
        integrals = []
        for poly, prov in zip(self.quads, self.quad_provenance):
            integrals.append({"tag": "quad", "provenance": prov, "poly": poly.to_dict()})
        for poly, prov in zip(self.linears, self.linear_provenance):
            integrals.append({"tag": "linear", "provenance": prov, "poly": poly.to_dict()})
        out = {"model": self.model.to_dict(), "integrals": integrals}
        if self.hamiltonian_coeffs is not None:
            out["hamiltonian_coeffs"] = dict(self.hamiltonian_coeffs)
        return out

    @classmethod
    def from_dict(cls, data) -> "IntegralFamily":
        try:
            model = MagneticModel.from_dict(data["model"])
            raw = data["integrals"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed family record: {exc}") from None
        quads, qprov, linears, lprov = [], [], [], []
        for item in raw:
            try:
                tag = item["tag"]
                poly = PhasePoly.from_dict(item["poly"])
                prov = item.get("provenance", {})
            except (KeyError, TypeError) as exc:
                raise InputError(f"malformed integral record: {exc}") from None
            if poly.n != model.n:
                raise InputError("integral polynomial does not match the model dimension")
            if tag == "quad":
                quads.append(poly)
                qprov.append(prov)
            elif tag == "linear":
                linears.append(poly)
                lprov.append(prov)
            else:
                raise InputError(f"unknown integral tag {tag!r}")
        return cls(
            model=model,
            quads=tuple(quads),
            quad_provenance=tuple(qprov),
            linears=tuple(linears),
            linear_provenance=tuple(lprov),
            hamiltonian_coeffs=data.get("hamiltonian_coeffs"),
        )


def _indicator(block: Sequence[int], n: int) -> list:
    vec = [Fraction(0)] * (n + 1)
    for idx in block:
        vec[idx - 1] = Fraction(1)
    return vec


def commuting_basis(model: MagneticModel) -> IntegralFamily:
    """Assemble the n-member family for a model.

    Quadratics: one degenerate integral per indicator vector of the first
    s-1 level blocks, then for each block containing u >= 2 units, u-1
    limit integrals (lambda = unit ordinal ladder, mu = indicator of one
    unit).  Linears: the plane momenta M_{2i-1,2i}.  Counting the unpaired
    index n+1 (even n) as a unit of its block makes the quadratic count
    come out to floor(n/2) for every admissible alpha, including zero
    rates.
    """
    n = model.n
    quads: list = []
    qprov: list = []
    blocks = model.partition
    for block in blocks[:-1]:
        b = _indicator(block, n)
        quads.append(degenerate_integral(model.a, b))
        qprov.append({
            "kind": "indicator",
            "block": list(block),
            "b": [format_rational(v) for v in b],
        })
    for block in blocks:
        units = model.block_units(block)
        if len(units) < 2:
            continue
        lam = {}
        for ordinal, unit in enumerate(units, start=1):
            for idx in unit:
                lam[idx] = Fraction(ordinal)
        for lead in units[:-1]:
            mu = {idx: Fraction(1) if idx in lead else Fraction(0) for idx in block}
            quads.append(limit_integral(n, block, lam, mu))
            qprov.append({
                "kind": "limit",
                "group": list(block),
                "lam": {str(i): format_rational(v) for i, v in sorted(lam.items())},
                "mu": {str(i): format_rational(v) for i, v in sorted(mu.items())},
            })
    if len(quads) != n // 2:
        raise AssertionError(
            f"family construction is inconsistent: {len(quads)} quadratics, expected {n // 2}"
        )
    linears = []
    lprov = []
    for i, j in model.pairs:
        linears.append(killing(i, j, n))
        lprov.append({"kind": "killing", "pair": [i, j]})
    return IntegralFamily(
        model=model,
        quads=tuple(quads),
        quad_provenance=tuple(qprov),
        linears=tuple(linears),
        linear_provenance=tuple(lprov),
    )
