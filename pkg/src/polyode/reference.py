"""Classical ground-truth integrators and stability diagnostics.

The explicit first-order scheme here is the discretization the block solver
reproduces exactly; the fixed-step fourth-order integrator serves as the truth
reference in convergence studies.  The stability margin E^2 * t * dt (E the
average spectral norm of f along the trajectory) discriminates parameter
regimes where the first-order scheme is trustworthy from those where it is
not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import eval_f_direct

__all__ = [
    "Trajectory",
    "StabilityReport",
    "OVERFLOW_NORM",
    "euler_forward",
    "rk4_oracle",
    "energy_scale",
    "stability_margin",
    "stability_report",
    "trajectory_to_csv",
]

OVERFLOW_NORM = 1e12


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_T on the dt grid.

    `norms` carries the unrenormalized Euclidean norms even when the states
    were renormalized per step.  `overflowed` marks a truncated run.
    """

    states: tuple
    dt: float
    renormalized: bool = False
    norms: tuple = ()
    overflowed: bool = False

    @property
    def steps(self):
        return len(self.states) - 1

    def final(self):
        return self.states[-1]


@dataclass(frozen=True)
class StabilityReport:
    E: float
    t: float
    dt: float
    margin: float
    growth_rate: float
    bound_satisfied: bool
    eps: float

    def to_dict(self):
        return {
            "E": self.E,
            "t": self.t,
            "dt": self.dt,
            "margin": self.margin,
            "growth_rate": self.growth_rate,
            "bound_satisfied": self.bound_satisfied,
            "eps": self.eps,
        }


def _step_matrix_fn(aug, matrix_fn):
    return eval_f_direct if matrix_fn is None else matrix_fn


def euler_forward(aug, renormalize=False, matrix_fn=None):
    """Explicit first-order trajectory x_{k+1} = (I - dt f(x_k)) x_k + dt b_{k+1}.

    With `renormalize` each new state is scaled to unit norm after the step
    (for comparison against unit-trace reduced states); raw norms are kept in
    `norms` either way.  A norm above OVERFLOW_NORM truncates the run and sets
    the overflow flag.  `matrix_fn` swaps in an alternative generator, e.g.
    the role-complete effective one.
    """
    fmat = _step_matrix_fn(aug, matrix_fn)
    x = aug.initial_state.copy()
    states = [x.copy()]
    norms = [float(np.linalg.norm(x))]
    overflowed = False
    for k in range(aug.steps):
        x = x - aug.dt * (fmat(aug, x) @ x) + aug.dt * aug.driving_block(k + 1)
        raw = float(np.linalg.norm(x))
        norms.append(raw)
        if not np.isfinite(raw) or raw > OVERFLOW_NORM:
            overflowed = True
            states.append(x.copy())
            break
        if renormalize and raw > 0:
            x = x / raw
        states.append(x.copy())
    return Trajectory(
        states=tuple(states),
        dt=aug.dt,
        renormalized=renormalize,
        norms=tuple(norms),
        overflowed=overflowed,
    )


def rk4_oracle(aug, substeps=1, matrix_fn=None):
    """Classic fourth-order fixed-step integration of dx/dt = -f(x)x + b(t),
    sampled on the dt grid; each dt is subdivided `substeps` times.

    Driving is held piecewise constant over each dt interval (the same
    convention the first-order scheme uses), so the two integrators solve the
    same equation.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    fmat = _step_matrix_fn(aug, matrix_fn)
    h = aug.dt / substeps
    x = aug.initial_state.copy()
    states = [x.copy()]
    norms = [float(np.linalg.norm(x))]
    overflowed = False
    for k in range(aug.steps):
        b = aug.driving_block(k + 1)

        def rhs(v):
            return -(fmat(aug, v) @ v) + b

        for _ in range(substeps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h * k1)
            k3 = rhs(x + 0.5 * h * k2)
            k4 = rhs(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        raw = float(np.linalg.norm(x))
        norms.append(raw)
        states.append(x.copy())
        if not np.isfinite(raw) or raw > OVERFLOW_NORM:
            overflowed = True
            break
    return Trajectory(
        states=tuple(states), dt=aug.dt, norms=tuple(norms), overflowed=overflowed
    )


def energy_scale(aug, traj):
    """Mean spectral norm of f(x_k) along the trajectory."""
    if len(traj.states) == 0:
        raise ValueError("empty trajectory")
    total = 0.0
    for x in traj.states:
        total += float(np.linalg.norm(eval_f_direct(aug, x), 2))
    return total / len(traj.states)


def stability_margin(E, t, dt):
    """The first-order-scheme validity margin E^2 * t * dt."""
    if E < 0 or t < 0 or dt < 0:
        raise ValueError("stability margin inputs must be nonnegative")
    return E * E * t * dt


def stability_report(aug, traj, eps):
    """Assemble the stability diagnostics for a trajectory.

    growth_rate is the slope of a log-linear fit of the raw state norms, a
    cheap proxy for exponential amplification.
    """
    E = energy_scale(aug, traj)
    t = traj.steps * traj.dt
    margin = stability_margin(E, t, traj.dt)
    norms = np.asarray(traj.norms, dtype=float)
    ks = np.arange(len(norms), dtype=float) * traj.dt
    positive = norms > 0
    if positive.sum() >= 2:
        growth = float(np.polyfit(ks[positive], np.log(norms[positive]), 1)[0])
    else:
        growth = float("nan")
    return StabilityReport(
        E=E,
        t=t,
        dt=traj.dt,
        margin=margin,
        growth_rate=growth,
        bound_satisfied=bool(margin < eps),
        eps=eps,
    )


def trajectory_to_csv(traj, path):
    """Write (k, t, coord_index, re, im, norm) rows for every state."""
    from .reporting import format_float

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,t,coord_index,re,im,norm\n")
        for k, x in enumerate(traj.states):
            t = k * traj.dt
            norm = traj.norms[k] if k < len(traj.norms) else float(np.linalg.norm(x))
            for i, v in enumerate(x):
                fh.write(
                    f"{k},{format_float(t)},{i},{format_float(v.real)},"
                    f"{format_float(v.imag)},{format_float(norm)}\n"
                )
