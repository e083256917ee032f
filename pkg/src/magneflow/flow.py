"""Constrained symplectic integration of the perturbed flow on the sphere.

One step is a Strang splitting

    rotate(dt/2) . rattle(dt) . rotate(dt/2)

where `rotate` is the exact flow of the rotational part (each coordinate
plane turns by an angle proportional to its strength parameter) and
`rattle` is the classical two-multiplier step for the kinetic-plus-
potential part subject to |X| = 1 and <X, P> = 0.  The composition is
symmetric, so it is time reversible and second order, and both
constraints are enforced at every step rather than drifting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, StepError
from .exactpoly import compiled_evaluator
from .integral_family import IntegralFamily
from .magnetic_model import MagneticModel, gauge_shift, hamiltonian_pert, kinetic_energy

__all__ = [
    "project_initial",
    "step",
    "TrajectoryRecord",
    "integrate",
    "picture_map",
    "drift_report",
    "write_csv",
]

INITIAL_TOLERANCE = 1e-6
CSV_FORMAT = "%.17g"


def project_initial(x, p):
    """Snap an almost-admissible initial state onto the constraint set.

    States further than 1e-6 from the sphere or from tangency are
    rejected as input errors instead of silently repaired.
    """
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    if x.shape != p.shape or x.ndim != 1:
        raise InputError("initial state must be two vectors of equal length")
    norm = np.linalg.norm(x)
    if abs(norm - 1.0) > INITIAL_TOLERANCE:
        raise InputError(f"initial position is off the sphere by {abs(norm - 1.0):.3e}")
    x = x / norm
    radial = float(x @ p)
    if abs(radial) > INITIAL_TOLERANCE * max(1.0, float(np.linalg.norm(p))):
        raise InputError(f"initial momentum has radial component {radial:.3e}")
    p = p - radial * x
    return x, p


def _rotate(x, p, model: MagneticModel, tau: float):
    """Exact flow of the rotational part for time tau.

    Plane k turns by -alpha_k * tau / 2, applied identically to positions
    and momenta; lengths and pairings are preserved exactly.
    """
    x = x.copy()
    p = p.copy()
    for k, alpha in enumerate(model.alpha_floats):
        if alpha == 0.0:
            continue
        i, j = 2 * k, 2 * k + 1
        phi = alpha * tau / 2.0
        c, s = math.cos(phi), math.sin(phi)
        for vec in (x, p):
            u, v = vec[i], vec[j]
            vec[i] = c * u + s * v
            vec[j] = -s * u + c * v
    return x, p


def _grad_potential(model: MagneticModel, x):
    return 2.0 * np.asarray(model.a_floats) * x


def _rattle(x0, p0, model: MagneticModel, dt: float):
    """One RATTLE step for 0.5|P|^2 + U(X) on the unit cotangent set.

    The position multiplier solves a scalar quadratic; we use the
    subtraction-free root so the multiplier stays O(dt^0) accurate.  A
    negative discriminant means the step cannot reach the sphere and is
    reported as a step failure.
    """
    g0 = _grad_potential(model, x0)
    w = x0 + dt * p0 - 0.5 * dt * dt * g0
    a2 = dt ** 4
    b = -2.0 * dt * dt * float(w @ x0)
    c = float(w @ w) - 1.0
    disc = b * b - 4.0 * a2 * c
    if disc < 0.0:
        raise StepError(f"constraint projection lost the sphere (dt={dt:g})")
    denom = -b + math.sqrt(disc)
    lam = 0.0 if c == 0.0 else 2.0 * c / denom
    x1 = w - dt * dt * lam * x0
    p_half = p0 - 0.5 * dt * (g0 + 2.0 * lam * x0)

    q = p_half - 0.5 * dt * _grad_potential(model, x1)
    mu = float(x1 @ q) / (dt * float(x1 @ x1))
    p1 = q - dt * mu * x1
    return x1, p1


def step(x, p, model: MagneticModel, dt: float):
    """One full symmetric step of size dt (dt may be negative)."""
    if dt == 0.0:
        return x.copy(), p.copy()
    x, p = _rotate(x, p, model, dt / 2.0)
    x, p = _rattle(x, p, model, dt)
    x, p = _rotate(x, p, model, dt / 2.0)
    return x, p


@dataclass
class TrajectoryRecord:
    """Recorded states and diagnostics of one integration run.

    xs and ps have one row per recorded state; diagnostics maps a label
    to the series of that quantity along the recorded states, in a fixed
    insertion order that the CSV writer reuses.
    """
    times: np.ndarray
    xs: np.ndarray
    ps: np.ndarray
    diagnostics: dict
    sphere_residual: np.ndarray
    tangency_residual: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def states(self) -> np.ndarray:
        return np.hstack([self.xs, self.ps])


def _diagnostic_polys(model: MagneticModel, family: IntegralFamily | None):
    polys = []
    if family is not None:
        if family.model != model:
            raise InputError("family was built for a different model")
        polys.extend(zip(family.labels(), family.members()))
    polys.append(("H", hamiltonian_pert(model)))
    return polys


def integrate(
    model: MagneticModel,
    x0,
    p0,
    dt: float,
    steps: int,
    record_every: int = 1,
    family: IntegralFamily | None = None,
) -> TrajectoryRecord:
    """Integrate from (x0, p0) and evaluate conserved quantities.

    The initial state is projected (within tolerance) before the run.
    If a family is given, every member is evaluated along the recorded
    states together with the Hamiltonian.
    """
    if not (isinstance(steps, int) and steps >= 0):
        raise InputError(f"steps must be a nonnegative integer, got {steps!r}")
    if not (dt != 0.0 and math.isfinite(dt)):
        raise InputError(f"dt must be a nonzero finite number, got {dt!r}")
    if not (isinstance(record_every, int) and record_every >= 1):
        raise InputError(f"record_every must be a positive integer, got {record_every!r}")

    x, p = project_initial(x0, p0)
    if x.size != model.n + 1:
        raise InputError(
            f"state has dimension {x.size}, model needs {model.n + 1}"
        )

    rec_t = [0.0]
    rec_x = [x.copy()]
    rec_p = [p.copy()]
    for k in range(1, steps + 1):
        try:
            x, p = step(x, p, model, dt)
        except StepError as exc:
            raise StepError(f"step {k}: {exc}") from None
        if k % record_every == 0 or k == steps:
            rec_t.append(k * dt)
            rec_x.append(x.copy())
            rec_p.append(p.copy())

    times = np.array(rec_t)
    xs = np.array(rec_x)
    ps = np.array(rec_p)
    states = np.hstack([xs, ps])
    diagnostics = {}
    for label, poly in _diagnostic_polys(model, family):
        diagnostics[label] = compiled_evaluator(poly)(states)
    sphere = np.einsum("ij,ij->i", xs, xs) - 1.0
    tangency = np.einsum("ij,ij->i", xs, ps)
    meta = {
        "model": model.to_dict(),
        "dt": dt,
        "steps": steps,
        "record_every": record_every,
    }
    return TrajectoryRecord(times, xs, ps, diagnostics, sphere, tangency, meta)


def picture_map(record: TrajectoryRecord, model: MagneticModel) -> TrajectoryRecord:
    """Transport a recorded trajectory to the plain-kinetic picture.

    Each state gets the momentum shift p -> p + sigma#(x); in the image
    picture the relevant conserved quantity is the kinetic energy alone,
    reported as the single diagnostic series H_kin.  Conservation of that
    series is the dynamical form of the equivalence between the two
    descriptions of the flow.
    """
    shifted_x = record.xs.copy()
    shifted_p = np.empty_like(record.ps)
    for r in range(record.xs.shape[0]):
        _, shifted_p[r] = gauge_shift(record.xs[r], record.ps[r], +1, model)
    states = np.hstack([shifted_x, shifted_p])
    h_kin = compiled_evaluator(kinetic_energy(model.n))(states)
    meta = dict(record.meta)
    meta["picture"] = "kinetic"
    return TrajectoryRecord(
        times=record.times.copy(),
        xs=shifted_x,
        ps=shifted_p,
        diagnostics={"H_kin": h_kin},
        sphere_residual=record.sphere_residual.copy(),
        tangency_residual=np.einsum("ij,ij->i", shifted_x, shifted_p),
        meta=meta,
    )


def drift_report(record: TrajectoryRecord) -> dict:
    """Drift of every diagnostic series relative to its initial value,
    plus worst-case constraint residuals."""
    out: dict = {"series": {}, "constraints": {}}
    for label, series in record.diagnostics.items():
        base = float(series[0])
        drift = np.abs(series - base)
        scale = max(abs(base), 1.0)
        out["series"][label] = {
            "initial": base,
            "max_abs_drift": float(drift.max()),
            "max_rel_drift": float(drift.max() / scale),
            "final_drift": float(abs(float(series[-1]) - base)),
        }
    out["constraints"] = {
        "max_sphere_residual": float(np.abs(record.sphere_residual).max()),
        "max_tangency_residual": float(np.abs(record.tangency_residual).max()),
    }
    return out


def write_csv(record: TrajectoryRecord, path, extra_meta: dict | None = None):
    """Write a trajectory as deterministic CSV.

    Line 1 is a '#' comment carrying the run metadata as canonical JSON;
    line 2 is the header t, X1.., P1.., diagnostic labels, c1, c2 where
    c1 = |X|^2 - 1 and c2 = <X, P>.  All numbers use repr-exact %.17g.
    """
    d = record.xs.shape[1]
    meta = dict(record.meta)
    if extra_meta:
        meta.update(extra_meta)
    header = (
        ["t"]
        + [f"X{i}" for i in range(1, d + 1)]
        + [f"P{i}" for i in range(1, d + 1)]
        + list(record.diagnostics.keys())
        + ["c1", "c2"]
    )
    columns = [record.times, *record.xs.T, *record.ps.T]
    columns += [record.diagnostics[k] for k in record.diagnostics]
    columns += [record.sphere_residual, record.tangency_residual]
    rows = np.column_stack(columns)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(CSV_FORMAT % v for v in row) + "\n")
