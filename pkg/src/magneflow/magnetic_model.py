"""Problem instances: a constant magnetic 2-form on the n-sphere in normal form.

A model is the sphere dimension n together with the rotation rates
alpha_1..alpha_m (m = floor((n+1)/2)) of the 2-form written in plane
blocks.  Everything downstream is derived from the model exactly:

* sigma_linear  S = (1/2) sum_i alpha_i (X_{2i-1} P_{2i} - X_{2i} P_{2i-1})
* potential     U = (1/8) sum_i alpha_i^2 (X_{2i-1}^2 + X_{2i}^2)
* hamiltonian_pert  H = K - S + U with K the rotational kinetic energy

The A-vector a_{2i-1} = a_{2i} = alpha_i^2 / 8 (and a_{n+1} = 0 for even
n) defines the accompanying Neumann-type potential; its level structure
(the partition of indices into blocks of equal a-value) drives the
construction of the commuting family.

`skew_normal_form` is the float-side front door: it block-diagonalizes an
arbitrary real skew matrix by an orthogonal change of frame and reads off
the alphas.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InputError
from .exactpoly import PhasePoly, format_rational, parse_rational, p_var, x_var

__all__ = [
    "MagneticModel",
    "ambient_units",
    "sigma_linear",
    "potential",
    "kinetic_energy",
    "hamiltonian_pert",
    "sigma_sharp_polys",
    "sigma_sharp",
    "gauge_shift",
    "omega_matrix",
    "sigma_coefficient_matrix",
    "SkewNormalForm",
    "skew_normal_form",
]


def ambient_units(n: int) -> tuple:
    """Coordinate units of R^{n+1}: the planes (2i-1, 2i), plus the
    unpaired index n+1 when n is even.  Indices are 1-based."""
    units = [(2 * i + 1, 2 * i + 2) for i in range((n + 1) // 2)]
    if (n + 1) % 2:
        units.append((n + 1,))
    return tuple(units)


@dataclass(frozen=True)
class MagneticModel:
    """Sphere dimension and exact rotation rates of the magnetic 2-form."""

    n: int
    alphas: tuple

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise InputError(f"sphere dimension must be an integer >= 2, got {self.n!r}")
        alphas = tuple(a if isinstance(a, Fraction) else Fraction(a) for a in self.alphas)
        m = (self.n + 1) // 2
        if len(alphas) != m:
            raise InputError(
                f"expected {m} rotation rates for n={self.n}, got {len(alphas)}"
            )
        if any(a < 0 for a in alphas):
            raise InputError("rotation rates must be nonnegative")
        object.__setattr__(self, "alphas", alphas)

    @property
    def m(self) -> int:
        """Number of coordinate planes."""
        return (self.n + 1) // 2

    @cached_property
    def a(self) -> tuple:
        """Neumann coefficient vector: a_{2i-1} = a_{2i} = alpha_i^2/8."""
        coeffs = []
        for alpha in self.alphas:
            coeffs.extend([alpha * alpha / 8] * 2)
        if (self.n + 1) % 2:
            coeffs.append(Fraction(0))
        return tuple(coeffs)

    @cached_property
    def partition(self) -> tuple:
        """Blocks of indices with equal a-value, ordered by smallest index."""
        groups: dict = {}
        for idx, value in enumerate(self.a, start=1):
            groups.setdefault(value, []).append(idx)
        blocks = sorted(groups.values(), key=lambda blk: blk[0])
        return tuple(tuple(blk) for blk in blocks)

    @cached_property
    def units(self) -> tuple:
        return ambient_units(self.n)

    @property
    def pairs(self) -> tuple:
        """The coordinate planes (2i-1, 2i) only."""
        return tuple(u for u in self.units if len(u) == 2)

    def block_units(self, block: Sequence[int]) -> tuple:
        """Units wholly contained in the given index block, in unit order."""
        members = set(block)
        return tuple(u for u in self.units if members.issuperset(u))

    @cached_property
    def alpha_floats(self) -> np.ndarray:
        return np.array([float(a) for a in self.alphas])

    @cached_property
    def a_floats(self) -> np.ndarray:
        return np.array([float(a) for a in self.a])

    def to_dict(self) -> dict:
        return {"n": self.n, "alphas": [format_rational(a) for a in self.alphas]}

    @classmethod
    def from_dict(cls, data) -> "MagneticModel":
        try:
            n = int(data["n"])
            alphas = [parse_rational(a) for a in data["alphas"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed model record: {exc}") from None
        return cls(n, tuple(alphas))


# -- exact polynomial builders ----------------------------------------------


def _add_killing_square(terms: dict, i: int, j: int, n: int, coeff: Fraction):
    """terms += coeff * (Xi Pj - Xj Pi)^2, raw term-dict level, 1-based i<j."""
    width = 2 * (n + 1)

    def mono(*slots):
        e = [0] * width
        for s in slots:
            e[s] += 1
        return tuple(e)

    xi, xj = i - 1, j - 1
    pi, pj = n + i, n + j
    for expo, c in (
        (mono(xi, xi, pj, pj), coeff),
        (mono(xi, xj, pi, pj), -2 * coeff),
        (mono(xj, xj, pi, pi), coeff),
    ):
        c0 = terms.get(expo)
        if c0 is None:
            terms[expo] = c
        else:
            c = c0 + c
            if c:
                terms[expo] = c
            else:
                del terms[expo]


def kinetic_energy(n: int) -> PhasePoly:
    """Rotational kinetic energy (1/2) sum_{i<j} (Xi Pj - Xj Pi)^2.

    On the unit cotangent structure |X| = 1, <X, P> = 0 this restricts to
    (1/2)|P|^2, the round-sphere kinetic energy.
    """
    half = Fraction(1, 2)
    terms: dict = {}
    for i in range(1, n + 2):
        for j in range(i + 1, n + 2):
            _add_killing_square(terms, i, j, n, half)
    return PhasePoly(n, terms)


def sigma_linear(model: MagneticModel) -> PhasePoly:
    """Momentum function of the magnetic rotation field:
    S = (1/2) sum_i alpha_i (X_{2i-1} P_{2i} - X_{2i} P_{2i-1})."""
    n = model.n
    poly = PhasePoly(n)
    for k, alpha in enumerate(model.alphas):
        if not alpha:
            continue
        i, j = 2 * k + 1, 2 * k + 2
        half_alpha = alpha / 2
        poly = poly + half_alpha * (
            x_var(i, n) * p_var(j, n) - x_var(j, n) * p_var(i, n)
        )
    return poly


def potential(model: MagneticModel) -> PhasePoly:
    """U = sum_k a_k X_k^2 = (1/8) sum_i alpha_i^2 (X_{2i-1}^2 + X_{2i}^2)."""
    n = model.n
    poly = PhasePoly(n)
    for idx, a_k in enumerate(model.a, start=1):
        if a_k:
            poly = poly + a_k * (x_var(idx, n) ** 2)
    return poly


def hamiltonian_pert(model: MagneticModel) -> PhasePoly:
    """H = K - S + U, the generator of the shifted-picture dynamics."""
    return kinetic_energy(model.n) - sigma_linear(model) + potential(model)


def sigma_sharp_polys(model: MagneticModel) -> list:
    """Components of the magnetic covector field as polynomials in X.

    Component 2i carries +alpha_i X_{2i-1}/2 and component 2i-1 carries
    -alpha_i X_{2i}/2; the unpaired component (even n) is zero.
    """
    n = model.n
    comps = [PhasePoly(n) for _ in range(n + 1)]
    for k, alpha in enumerate(model.alphas):
        if not alpha:
            continue
        half_alpha = alpha / 2
        comps[2 * k] = -half_alpha * x_var(2 * k + 2, n)
        comps[2 * k + 1] = half_alpha * x_var(2 * k + 1, n)
    return comps


def sigma_sharp(model: MagneticModel, x: np.ndarray) -> np.ndarray:
    """Float evaluation of the magnetic covector field at X."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k, alpha in enumerate(model.alpha_floats):
        if alpha == 0.0:
            continue
        i, j = 2 * k, 2 * k + 1
        out[i] = -0.5 * alpha * x[j]
        out[j] = 0.5 * alpha * x[i]
    return out


def gauge_shift(x: np.ndarray, p: np.ndarray, direction: int, model: MagneticModel):
    """Shift momenta by the magnetic covector field: P -> P + direction*sigma(X).

    The point must sit on the unit sphere (checked to 1e-9); the shift
    preserves tangency because sigma(X) is orthogonal to X.
    """
    if direction not in (1, -1):
        raise InputError(f"shift direction must be +1 or -1, got {direction!r}")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != (model.n + 1,) or p.shape != (model.n + 1,):
        raise InputError("phase point has wrong dimension for this model")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise InputError("gauge shift requires |X| = 1 within 1e-9")
    return x.copy(), p + direction * sigma_sharp(model, x)


def sigma_coefficient_matrix(model: MagneticModel) -> list:
    """Exact matrix C with sigma_a = sum_b C[a][b] X_b (0-based rows/cols)."""
    d = model.n + 1
    mat = [[Fraction(0)] * d for _ in range(d)]
    for k, alpha in enumerate(model.alphas):
        half_alpha = alpha / 2
        mat[2 * k][2 * k + 1] = -half_alpha
        mat[2 * k + 1][2 * k] = half_alpha
    return mat


def omega_matrix(model: MagneticModel) -> list:
    """Exact matrix of the magnetic 2-form: Omega[2i-1][2i] = alpha_i."""
    d = model.n + 1
    mat = [[Fraction(0)] * d for _ in range(d)]
    for k, alpha in enumerate(model.alphas):
        mat[2 * k][2 * k + 1] = alpha
        mat[2 * k + 1][2 * k] = -alpha
    return mat


# -- skew normal form ---------------------------------------------------------


@dataclass(frozen=True)
class SkewNormalForm:
    """Orthogonal frame Q, plane rates alphas (descending) and the
    Frobenius residual of Q^T Omega Q against the plane-block matrix."""

    q: np.ndarray
    alphas: np.ndarray
    residual: float

    def block_matrix(self) -> np.ndarray:
        d = self.q.shape[0]
        block = np.zeros((d, d))
        for k, alpha in enumerate(self.alphas):
            block[2 * k, 2 * k + 1] = alpha
            block[2 * k + 1, 2 * k] = -alpha
        return block

    def to_dict(self) -> dict:
        return {
            "Q": [[float(v) for v in row] for row in self.q],
            "alphas": [float(a) for a in self.alphas],
            "residual": float(self.residual),
        }


def skew_normal_form(omega, cluster_rtol: float = 1e-8) -> SkewNormalForm:
    """Orthogonally block-diagonalize a real skew-symmetric matrix.

    Works through the symmetric positive semidefinite Gram matrix
    Omega^T Omega = -Omega^2: its eigenvalues are the squared plane rates
    (each twice) plus zeros.  Within each eigenvalue cluster, planes are
    extracted as (u, -Omega u / |Omega u|), which puts +alpha above the
    diagonal of each 2x2 block.  Alphas are reported in descending order;
    kernel directions fill trailing zero blocks.
    """
    om = np.asarray(omega, dtype=float)
    if om.ndim != 2 or om.shape[0] != om.shape[1]:
        raise InputError(f"matrix must be square, got shape {om.shape}")
    d = om.shape[0]
    if d < 1:
        raise InputError("empty matrix")
    norm = np.linalg.norm(om)
    if np.linalg.norm(om + om.T) > 1e-12 * max(norm, 1e-300):
        raise InputError("matrix is not skew-symmetric within tolerance")
    m = d // 2

    if norm == 0.0:
        return SkewNormalForm(q=np.eye(d), alphas=np.zeros(m), residual=0.0)

    gram = om.T @ om
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    scale = max(evals[0], 0.0)
    tol = cluster_rtol * scale

    clusters = []
    start = 0
    for i in range(1, d + 1):
        if i == d or evals[start] - evals[i] > tol:
            clusters.append((start, i))
            start = i

    pair_cols = []
    kernel_cols = []
    for lo, hi in clusters:
        basis = evecs[:, lo:hi]
        if evals[lo] <= tol:
            kernel_cols.extend(basis[:, k] for k in range(basis.shape[1]))
            continue
        width = hi - lo
        if width % 2:
            raise InputError(
                "eigenvalue cluster of odd dimension; matrix is not numerically skew"
            )
        work = basis
        while work.shape[1]:
            u = work[:, 0]
            u = u / np.linalg.norm(u)
            w = om @ u
            alpha = np.linalg.norm(w)
            v = -w / alpha
            v = v - (u @ v) * u
            v = v / np.linalg.norm(v)
            pair_cols.append((alpha, u, v))
            if work.shape[1] == 2:
                break
            rest = work[:, 1:]
            rest = rest - np.outer(u, u @ rest) - np.outer(v, v @ rest)
            q_rest, _ = np.linalg.qr(rest)
            work = q_rest[:, : work.shape[1] - 2]

    pair_cols.sort(key=lambda t: -t[0])
    columns = []
    alphas = []
    for alpha, u, v in pair_cols:
        columns.extend([u, v])
        alphas.append(alpha)
    kernel_iter = iter(kernel_cols)
    for u in kernel_iter:
        v = next(kernel_iter, None)
        if v is None:
            columns.append(u)
        else:
            columns.extend([u, v])
            alphas.append(0.0)
    q = np.column_stack(columns)

    alphas_arr = np.array(alphas)
    form = SkewNormalForm(q=q, alphas=alphas_arr, residual=0.0)
    residual = float(np.linalg.norm(q.T @ om @ q - form.block_matrix()))
    return SkewNormalForm(q=q, alphas=alphas_arr, residual=residual)
