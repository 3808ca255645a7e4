"""Built-in desk-scale test systems.

Each builder returns an OdeSystemSpec in the index convention of the encoder
(coordinate 0 reserved for the constant; original variables start at 1).
"""

from __future__ import annotations

import math

import numpy as np

from .encoding import AugmentedSystem, Monomial, OdeSystemSpec, encode

__all__ = [
    "BUILTIN_SYSTEMS",
    "logistic_spec",
    "logistic_closed_form",
    "sir_spec",
    "gp2_spec",
    "burgers8_spec",
    "quad2_system",
    "builtin_spec",
    "resolve_system",
]


def logistic_spec(u0=0.5, dt=1e-3, steps=1000):
    """Scalar logistic growth du/dt = u - u^2, i.e. du/dt + (-1 + u) u = 0."""
    monomials = (
        Monomial(row=1, col=1, coeff=-1.0, conj_idx=(), unconj_idx=()),
        Monomial(row=1, col=1, coeff=+1.0, conj_idx=(), unconj_idx=(1,)),
    )
    return OdeSystemSpec(
        d=1, m=1, monomials=monomials, initial_state=np.array([u0], dtype=complex),
        dt=dt, steps=steps,
    )


def logistic_closed_form(t, u0=0.5):
    return u0 * math.exp(t) / (1.0 + u0 * (math.exp(t) - 1.0))


def sir_spec(beta=0.3, gamma=0.1, s0=0.99, i0=0.01, r0=0.0, dt=0.01, steps=500):
    """Compartmental epidemic model; S+I+R is conserved by construction.

    Coordinates: 1 = susceptible, 2 = infected, 3 = recovered.
    """
    monomials = (
        Monomial(row=1, col=1, coeff=+beta, conj_idx=(), unconj_idx=(2,)),
        Monomial(row=2, col=2, coeff=-beta, conj_idx=(), unconj_idx=(1,)),
        Monomial(row=2, col=2, coeff=+gamma, conj_idx=(), unconj_idx=()),
        Monomial(row=3, col=2, coeff=-gamma, conj_idx=(), unconj_idx=()),
    )
    return OdeSystemSpec(
        d=3, m=1, monomials=monomials,
        initial_state=np.array([s0, i0, r0], dtype=complex), dt=dt, steps=steps,
    )


def gp2_spec(delta=0.5, omega=0.25, g=0.8, pop1=0.7, dt=0.01, steps=100):
    """Two-mode condensate dynamics i dx/dt = H0 x + g diag(|x_j|^2) x.

    The resulting matrix i*H0 + i*g*diag(|x_j|^2) is anti-Hermitian, so the
    exact flow preserves the state norm; a useful exactness probe.
    """
    monomials = (
        Monomial(row=1, col=1, coeff=1j * delta, conj_idx=(), unconj_idx=()),
        Monomial(row=2, col=2, coeff=-1j * delta, conj_idx=(), unconj_idx=()),
        Monomial(row=1, col=2, coeff=1j * omega, conj_idx=(), unconj_idx=()),
        Monomial(row=2, col=1, coeff=1j * omega, conj_idx=(), unconj_idx=()),
        Monomial(row=1, col=1, coeff=1j * g, conj_idx=(1,), unconj_idx=(1,)),
        Monomial(row=2, col=2, coeff=1j * g, conj_idx=(2,), unconj_idx=(2,)),
    )
    x0 = np.array([math.sqrt(pop1), math.sqrt(1.0 - pop1)], dtype=complex)
    return OdeSystemSpec(d=2, m=1, monomials=monomials, initial_state=x0, dt=dt, steps=steps)


def burgers8_spec(viscosity=0.05, dt=0.005, steps=200):
    """Eight-point periodic upwind discretization of a viscous scalar
    conservation law u_t + u u_x = nu u_xx.

    Quadratic advection keeps the encoding at degree 1 while the stencil
    exercises a PDE-shaped sparsity pattern.  The initial profile stays
    positive so the upwind direction is fixed.
    """
    npts = 8
    h = 2.0 * math.pi / npts
    monomials = []
    for i in range(1, npts + 1):
        prev = npts if i == 1 else i - 1
        nxt = 1 if i == npts else i + 1
        # advection: -u_i (u_i - u_{i-1}) / h
        monomials.append(Monomial(row=i, col=i, coeff=+1.0 / h, conj_idx=(), unconj_idx=(i,)))
        monomials.append(Monomial(row=i, col=prev, coeff=-1.0 / h, conj_idx=(), unconj_idx=(i,)))
        # diffusion: nu (u_{i+1} - 2 u_i + u_{i-1}) / h^2
        monomials.append(Monomial(row=i, col=nxt, coeff=-viscosity / h**2, conj_idx=(), unconj_idx=()))
        monomials.append(Monomial(row=i, col=i, coeff=2.0 * viscosity / h**2, conj_idx=(), unconj_idx=()))
        monomials.append(Monomial(row=i, col=prev, coeff=-viscosity / h**2, conj_idx=(), unconj_idx=()))
    u0 = np.array(
        [0.5 + 0.25 * math.sin(2.0 * math.pi * j / npts) for j in range(npts)], dtype=complex
    )
    return OdeSystemSpec(
        d=npts, m=1, monomials=tuple(monomials), initial_state=u0, dt=dt, steps=steps
    )


def quad2_system(a=0.9, b=-0.6, g=0.4, theta=0.7, dt=0.02, steps=10):
    """Two-mode real-skew quadratic system on the unit circle.

    The generator is c(x) * J with J the 2x2 rotation generator and
    c(x) = a x_0^2 + b x_1^2 + g x_0 x_1, so the quadratic form x^T f(x) x
    vanishes identically along the (real) trajectory.  That keeps the
    multi-copy state free of a coherent phase mode, which would otherwise
    contaminate copy-count scaling measurements; the mixed term is encoded
    role-asymmetrically so the context-role generator term is nonzero.

    Built directly as an encoded system: both coordinates are dynamical,
    there is no constant coordinate, and the initial state has unit norm.
    """
    monomials = (
        Monomial(row=0, col=1, coeff=+a, conj_idx=(0,), unconj_idx=(0,)),
        Monomial(row=1, col=0, coeff=-a, conj_idx=(0,), unconj_idx=(0,)),
        Monomial(row=0, col=1, coeff=+b, conj_idx=(1,), unconj_idx=(1,)),
        Monomial(row=1, col=0, coeff=-b, conj_idx=(1,), unconj_idx=(1,)),
        Monomial(row=0, col=1, coeff=+g, conj_idx=(0,), unconj_idx=(1,)),
        Monomial(row=1, col=0, coeff=-g, conj_idx=(1,), unconj_idx=(0,)),
    )
    x0 = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    return AugmentedSystem(
        D=2, m=1, monomials=monomials, initial_state=x0, dt=dt, steps=steps,
        x0_convention=False,
    )


BUILTIN_SYSTEMS = {
    "logistic": logistic_spec,
    "sir": sir_spec,
    "gp2": gp2_spec,
    "burgers8": burgers8_spec,
}


def builtin_spec(name, **overrides):
    try:
        builder = BUILTIN_SYSTEMS[name]
    except KeyError:
        raise KeyError(
            f"unknown system '{name}'; available: {sorted(BUILTIN_SYSTEMS)}"
        ) from None
    return builder(**overrides)


def resolve_system(name, dt=None, steps=None):
    """Encoded system for an experiment, by name.

    Covers the four spec-document systems plus 'quad2', the dedicated
    copy-count scaling probe.
    """
    overrides = {}
    if dt is not None:
        overrides["dt"] = dt
    if steps is not None:
        overrides["steps"] = steps
    if name == "quad2":
        return quad2_system(**overrides)
    return encode(builtin_spec(name, **overrides))
