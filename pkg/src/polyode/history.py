"""Block-bidiagonal history systems and their exact classical solution.

The discretized flow x_{k+1} = (I - dt A) x_k + dt b_{k+1} packs into one
block system M X = B whose matrix has identity diagonal blocks and
-(I - dt A) subdiagonal blocks.  M is unit lower bidiagonal, so forward
substitution solves it exactly; the condition number of M is what a linear
solver's cost would scale with, and is estimated here by power iteration.

The multi-copy variant uses the same structure with the copy-space generator
as A and tensor-powered initial/driving blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .meanfield import (
    MultiCopyState,
    apply_generator,
    apply_generator_adjoint,
    product_state,
    reduce_site,
)

__all__ = [
    "BlockSystemSpec",
    "HistoryState",
    "matrix_step_system",
    "multicopy_step_system",
    "build_rhs",
    "forward_solve",
    "apply_M",
    "solve_adjoint",
    "condition_estimate",
    "reduced_history_site",
    "history_to_csv",
]


@dataclass(frozen=True)
class BlockSystemSpec:
    """Structure-only description of the block system: the step map, its
    adjoint, and the right-hand-side blocks (b_0 then dt*b_k)."""

    block_dim: int
    steps: int
    dt: float
    step_operator: object
    rhs_blocks: tuple
    step_adjoint: object = None

    def __post_init__(self):
        if len(self.rhs_blocks) != self.steps + 1:
            raise ValueError(
                f"rhs has {len(self.rhs_blocks)} blocks, expected steps+1 = {self.steps + 1}"
            )


@dataclass(frozen=True)
class HistoryState:
    """The solved trajectory blocks x_0..x_T and the concatenated norm."""

    states: tuple
    dt: float
    norm: float

    @property
    def steps(self):
        return len(self.states) - 1


def matrix_step_system(A, x0, dt, steps, driving=None):
    """Single-copy block system for a constant matrix A with step I - dt*A."""
    A = np.asarray(A, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)
    dim = x0.shape[0]
    eye = np.eye(dim)
    step = eye - dt * A
    step_adj = step.conj().T
    rhs = [x0]
    for k in range(1, steps + 1):
        b = np.zeros(dim, dtype=complex) if driving is None else np.asarray(driving[k - 1], dtype=complex)
        rhs.append(dt * b)
    return BlockSystemSpec(
        block_dim=dim,
        steps=steps,
        dt=dt,
        step_operator=lambda v: step @ v,
        rhs_blocks=tuple(rhs),
        step_adjoint=lambda v: step_adj @ v,
    )


def multicopy_step_system(aug, n, cap=None):
    """Multi-copy block system with step v -> v - dt * L v on the n-copy space."""
    kwargs = {} if cap is None else {"cap": cap}

    def step(v):
        psi = MultiCopyState(n=n, D=aug.D, amplitudes=v, **kwargs)
        return psi.amplitudes - aug.dt * apply_generator(aug, psi).amplitudes

    def step_adj(v):
        psi = MultiCopyState(n=n, D=aug.D, amplitudes=v, **kwargs)
        return psi.amplitudes - aug.dt * apply_generator_adjoint(aug, psi).amplitudes

    return BlockSystemSpec(
        block_dim=aug.D**n,
        steps=aug.steps,
        dt=aug.dt,
        step_operator=step,
        rhs_blocks=build_rhs(aug, n),
        step_adjoint=step_adj,
    )


def build_rhs(aug, n):
    """Right-hand-side blocks: the initial state, then dt times each driving
    vector; every block is tensor-powered on the multi-copy path (n > 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > 1 and n <= aug.m:
        raise ValueError(f"multi-copy path needs n > m = {aug.m}")

    def power(v):
        if n == 1:
            return np.asarray(v, dtype=complex)
        return product_state(v, n).amplitudes

    blocks = [power(aug.initial_state)]
    for k in range(1, aug.steps + 1):
        b = aug.driving_block(k)
        if np.any(b):
            blocks.append(aug.dt * power(b))
        else:
            blocks.append(np.zeros(aug.D**n if n > 1 else aug.D, dtype=complex))
    return tuple(blocks)


def forward_solve(sys):
    """Exact solution of M X = B by forward substitution.

    The system is unit lower triangular, so the recursion
    x_0 = b_0, x_{k+1} = step(x_k) + rhs_{k+1} is the unique solution.
    """
    states = [np.asarray(sys.rhs_blocks[0], dtype=complex)]
    for k in range(sys.steps):
        states.append(sys.step_operator(states[-1]) + sys.rhs_blocks[k + 1])
    norm_sq = sum(float(np.real(np.vdot(x, x))) for x in states)
    return HistoryState(states=tuple(states), dt=sys.dt, norm=float(np.sqrt(norm_sq)))


def apply_M(sys, history):
    """Blocks of M applied to a history: x_0, then x_k - step(x_{k-1})."""
    states = history.states if isinstance(history, HistoryState) else tuple(history)
    if len(states) != sys.steps + 1:
        raise ValueError(
            f"history has {len(states)} blocks, expected {sys.steps + 1}"
        )
    out = [np.asarray(states[0], dtype=complex)]
    for k in range(1, sys.steps + 1):
        out.append(states[k] - sys.step_operator(states[k - 1]))
    return out


def _apply_M_adjoint(sys, blocks):
    """Blocks of M^dagger: x_k - step_adjoint(x_{k+1}), last block unchanged."""
    out = []
    for k in range(sys.steps + 1):
        v = np.asarray(blocks[k], dtype=complex)
        if k < sys.steps:
            v = v - sys.step_adjoint(blocks[k + 1])
        out.append(v)
    return out


def solve_adjoint(sys, blocks):
    """Solve M^dagger Y = Z by backward substitution (M^dagger is unit upper
    bidiagonal)."""
    out = [None] * (sys.steps + 1)
    out[sys.steps] = np.asarray(blocks[sys.steps], dtype=complex)
    for k in range(sys.steps - 1, -1, -1):
        out[k] = np.asarray(blocks[k], dtype=complex) + sys.step_adjoint(out[k + 1])
    return out


def _solve_blocks(sys, blocks):
    out = [np.asarray(blocks[0], dtype=complex)]
    for k in range(1, sys.steps + 1):
        out.append(sys.step_operator(out[-1]) + np.asarray(blocks[k], dtype=complex))
    return out


def _block_norm(blocks):
    return float(np.sqrt(sum(float(np.real(np.vdot(b, b))) for b in blocks)))


def _scale_blocks(blocks, factor):
    return [b * factor for b in blocks]


def condition_estimate(sys, iters=50, seed=0, tol=1e-10):
    """Estimate kappa = sigma_max / sigma_min of the block matrix M.

    sigma_max comes from power iteration on M^dagger M (through apply_M and
    its adjoint); sigma_min from inverse power iteration, i.e. power iteration
    on (M^dagger M)^{-1} through the forward and backward substitutions.
    Start vectors are drawn from a seeded generator so estimates reproduce.

    Returns a dict {kappa, sigma_max, sigma_min, converged, iters, rel_err}.
    """
    if iters < 10:
        raise ValueError("iters must be >= 10")
    if sys.step_adjoint is None:
        raise ValueError("condition estimation needs the adjoint step operator")
    rng = np.random.default_rng(seed)

    def random_blocks():
        blocks = [
            rng.standard_normal(sys.block_dim) + 1j * rng.standard_normal(sys.block_dim)
            for _ in range(sys.steps + 1)
        ]
        return _scale_blocks(blocks, 1.0 / _block_norm(blocks))

    def power_iterate(op):
        v = random_blocks()
        lam_prev = None
        rel = np.inf
        used = iters
        for it in range(iters):
            w = op(v)
            lam = _block_norm(w)
            if lam == 0:
                return 0.0, 0.0, True, it + 1
            v = _scale_blocks(w, 1.0 / lam)
            if lam_prev is not None:
                rel = abs(lam - lam_prev) / lam
                if rel < tol:
                    used = it + 1
                    break
            lam_prev = lam
        return lam, rel, rel < tol, used

    def mtm(v):
        return _apply_M_adjoint(sys, apply_M(sys, HistoryState(states=tuple(v), dt=sys.dt, norm=0.0)))

    def mtm_inverse(v):
        return _solve_blocks(sys, solve_adjoint(sys, v))

    lam_max, rel_max, conv_max, it_max = power_iterate(mtm)
    lam_inv, rel_inv, conv_inv, it_inv = power_iterate(mtm_inverse)
    sigma_max = float(np.sqrt(lam_max))
    sigma_min = float(1.0 / np.sqrt(lam_inv)) if lam_inv > 0 else float("inf")
    return {
        "kappa": sigma_max / sigma_min if sigma_min > 0 else float("inf"),
        "sigma_max": sigma_max,
        "sigma_min": sigma_min,
        "converged": bool(conv_max and conv_inv),
        "iters": int(max(it_max, it_inv)),
        "rel_err": float(max(rel_max, rel_inv)),
    }


def reduced_history_site(history, D, n, k, site):
    """Single-site reduced state of multi-copy history block k."""
    if not (0 <= k < len(history.states)):
        raise ValueError(f"block index {k} out of range")
    psi = MultiCopyState(n=n, D=D, amplitudes=history.states[k])
    return reduce_site(psi, site)


def history_to_csv(history, path):
    """Write (k, coord_index, re, im, block_norm) rows for every block."""
    from .reporting import format_float

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,coord_index,re,im,block_norm\n")
        for k, x in enumerate(history.states):
            bnorm = float(np.linalg.norm(x))
            for i, v in enumerate(x):
                fh.write(
                    f"{k},{i},{format_float(v.real)},{format_float(v.imag)},{format_float(bnorm)}\n"
                )
