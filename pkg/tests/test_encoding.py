import json
import math

import numpy as np
import pytest

from conftest import random_system, random_unit
from polyode.encoding import (
    Monomial,
    OdeSystemSpec,
    SpecError,
    augment_constant,
    augmented_to_dict,
    encode,
    eval_f_direct,
    eval_f_tensor,
    norm_closure,
    spec_from_json,
    taylor_inv_sqrt,
)
from polyode.reference import rk4_oracle
from polyode.systems import logistic_spec


# ---------------------------------------------------------------------------
# augment_constant
# ---------------------------------------------------------------------------

def test_linear_term_padded_with_constant_factors():
    # A_{12} x_2 at degree 1: padding adds only constant-coordinate factors
    spec = OdeSystemSpec(
        d=2, m=1,
        monomials=(Monomial(1, 2, 0.7 + 0.1j, (), ()),),
        initial_state=np.array([0.1, 0.2]), dt=0.1, steps=2,
    )
    aug = augment_constant(spec)
    mono = aug.monomials[0]
    assert (mono.row, mono.col) == (1, 2)
    assert mono.conj_idx == (0,) and mono.unconj_idx == (0,)
    assert mono.coeff == 0.7 + 0.1j


def test_cubic_monomial_padding_matches_target_shape():
    # \bar{x}_1^2 x_2 placed at entry (2,1) with m=2
    spec = OdeSystemSpec(
        d=2, m=2,
        monomials=(Monomial(2, 1, 1.0, (1, 1), (2,)),),
        initial_state=np.array([0.1, 0.2]), dt=0.1, steps=2,
    )
    aug = augment_constant(spec)
    mono = aug.monomials[0]
    assert mono.conj_idx == (1, 1)
    assert mono.unconj_idx == (2, 0)


def test_logistic_encoding_and_evaluation():
    aug = augment_constant(logistic_spec())
    assert aug.D == 2 and aug.term_count == 2 and aug.m == 1
    f = eval_f_direct(aug, np.array([1.0, 0.5], dtype=complex))
    assert abs(f[1, 1] - (-0.5)) < 1e-15
    assert np.allclose(np.delete(f.ravel(), 3), 0.0)


def test_degree_overflow_rejected_with_monomial_index():
    spec_kwargs = dict(d=1, m=1, initial_state=np.array([0.5]), dt=0.1, steps=1)
    with pytest.raises(SpecError, match=r"monomials\[1\]"):
        augment_constant(
            OdeSystemSpec(
                monomials=(
                    Monomial(1, 1, 1.0, (), ()),
                    Monomial(1, 1, 1.0, (1, 1), ()),
                ),
                **spec_kwargs,
            )
        )


def test_constant_row_rejected():
    with pytest.raises(SpecError, match="constant"):
        OdeSystemSpec(
            d=1, m=1,
            monomials=(Monomial(0, 1, 1.0, (), ()),),
            initial_state=np.array([0.5]), dt=0.1, steps=1,
        )


def test_augmented_initial_state_and_driving_padding():
    drv = np.ones((3, 2), dtype=complex)
    spec = OdeSystemSpec(
        d=2, m=1,
        monomials=(Monomial(1, 1, 1.0, (), ()),),
        initial_state=np.array([0.3, 0.4]), dt=0.1, steps=3, driving=drv,
    )
    aug = augment_constant(spec)
    assert aug.initial_state[0] == 1.0
    assert np.allclose(aug.initial_state[1:], [0.3, 0.4])
    assert aug.driving.shape == (3, 3)
    assert np.all(aug.driving[:, 0] == 0.0)


def test_degree_uniformity_across_random_systems():
    for seed in range(30):
        aug = random_system(seed)
        for mono in aug.monomials:
            assert len(mono.conj_idx) == aug.m
            assert len(mono.unconj_idx) == aug.m


# ---------------------------------------------------------------------------
# taylor_inv_sqrt
# ---------------------------------------------------------------------------

def test_taylor_inv_sqrt_constant_term():
    for K in (0, 3, 17):
        assert taylor_inv_sqrt(0.0, K) == 1.0


def test_taylor_inv_sqrt_quarter():
    assert abs(taylor_inv_sqrt(0.25, 30) - 0.75**-0.5) < 1e-9


def test_taylor_inv_sqrt_half_truncation_bound():
    assert abs(taylor_inv_sqrt(0.5, 10) - math.sqrt(2.0)) < 2**-10


def test_taylor_inv_sqrt_domain_error():
    with pytest.raises(ValueError):
        taylor_inv_sqrt(0.51, 10)
    with pytest.raises(ValueError):
        taylor_inv_sqrt(-0.6, 10)


def test_taylor_bound_on_grid():
    ys = np.linspace(-0.5, 0.5, 101)
    for K in (4, 8, 16):
        for y in ys:
            err = abs(taylor_inv_sqrt(float(y), K) - (1.0 - y) ** -0.5)
            assert err <= 2.0**-K


# ---------------------------------------------------------------------------
# norm_closure
# ---------------------------------------------------------------------------

def _rotation_spec():
    # dx1/dt = w x2, dx2/dt = -w x1: real skew f, norm-preserving flow
    return OdeSystemSpec(
        d=2, m=1,
        monomials=(Monomial(1, 2, -0.7, (), ()), Monomial(2, 1, 0.7, (), ())),
        initial_state=np.array([0.5, 0.3]), dt=0.01, steps=100,
    )


def test_norm_closure_shape_and_unit_initial_norm():
    aug = augment_constant(_rotation_spec())
    closed = norm_closure(aug, eps=1e-3)
    assert closed.D == aug.D + 1
    assert closed.norm_coord == aug.D
    assert closed.taylor_order == 10
    assert closed.m == aug.m + 10
    assert abs(np.linalg.norm(closed.initial_state) - 1.0) < 1e-13


def test_norm_closure_k_definition():
    aug = augment_constant(logistic_spec(steps=10))
    closed = norm_closure(aug, eps=2.0**-20)
    assert closed.taylor_order == 20
    assert closed.m == aug.m + 20


def test_norm_closure_antihermitian_rows_vanish():
    # norm-preserving flow: the generated coordinate's derivative is ~0
    eps = 1e-4
    closed = norm_closure(augment_constant(_rotation_spec()), eps=eps)
    traj = rk4_oracle(closed, substeps=2)
    nu = closed.norm_coord
    for x in traj.states[::10]:
        dnu = (eval_f_direct(closed, x) @ x)[nu]
        assert abs(dnu) <= 10 * eps


def test_norm_closure_scalar_decay_norm_and_coordinate():
    eps = 1e-3
    spec = OdeSystemSpec(
        d=1, m=1,
        monomials=(Monomial(1, 1, 1.0, (), ()),),
        initial_state=np.array([0.6]), dt=0.01, steps=100,
    )
    closed = norm_closure(augment_constant(spec), eps=eps)
    traj = rk4_oracle(closed, substeps=5)
    for x in traj.states:
        assert abs(np.linalg.norm(x) - 1.0) < 5 * eps
    # closure coordinate follows sqrt(1 - |rescaled state|^2) analytically
    s = closed.rescale
    u1 = 0.6 * math.exp(-1.0)
    nu_exact = math.sqrt(1.0 - s**2 - (s * u1) ** 2)
    assert abs(traj.final()[closed.norm_coord].real - nu_exact) < 20 * eps


def test_norm_closure_rescale_and_dynamics_consistency():
    # rescaled flow must reproduce the original coordinates after de-scaling
    spec = logistic_spec(dt=0.01, steps=100)
    plain = augment_constant(spec)
    closed = norm_closure(plain, eps=1e-6)
    t_plain = rk4_oracle(plain, substeps=4)
    t_closed = rk4_oracle(closed, substeps=4)
    u_plain = t_plain.final()[1].real
    u_closed = closed.descale_state(t_closed.final())[0].real
    assert abs(u_plain - u_closed) < 1e-7


def test_norm_closure_errors():
    aug = augment_constant(_rotation_spec())
    with pytest.raises(SpecError):
        norm_closure(aug, eps=0.0)
    with pytest.raises(SpecError):
        norm_closure(aug, eps=1.5)
    with pytest.raises(SpecError, match="exceeds 1/2"):
        norm_closure(aug, eps=1e-3, rescale=1.0)
    driven = OdeSystemSpec(
        d=1, m=1,
        monomials=(Monomial(1, 1, 1.0, (), ()),),
        initial_state=np.array([0.5]), dt=0.1, steps=2,
        driving=np.ones((2, 1), dtype=complex),
    )
    with pytest.raises(SpecError, match="driving"):
        norm_closure(augment_constant(driven), eps=1e-3)


# ---------------------------------------------------------------------------
# eval_f_direct / eval_f_tensor
# ---------------------------------------------------------------------------

def test_eval_zero_monomials():
    spec = OdeSystemSpec(
        d=2, m=1, monomials=(), initial_state=np.array([0.1, 0.2]), dt=0.1, steps=1
    )
    aug = augment_constant(spec)
    x = np.array([1.0, 0.3, 0.4j])
    assert np.all(eval_f_direct(aug, x) == 0)
    assert np.all(eval_f_tensor(aug, x) == 0)


def test_eval_cubic_monomial_entry():
    spec = OdeSystemSpec(
        d=2, m=2,
        monomials=(Monomial(2, 1, 1.0, (1, 1), (2,)),),
        initial_state=np.array([0.1, 0.2]), dt=0.1, steps=2,
    )
    aug = augment_constant(spec)
    rng = np.random.default_rng(5)
    x = np.concatenate(([1.0], rng.standard_normal(2) + 1j * rng.standard_normal(2)))
    f = eval_f_direct(aug, x)
    expected = np.conj(x[1]) ** 2 * x[2]
    assert abs(f[2, 1] - expected) < 1e-14
    f[2, 1] = 0
    assert np.all(f == 0)


def test_eval_logistic_quarter():
    aug = augment_constant(logistic_spec())
    f = eval_f_direct(aug, np.array([1.0, 0.25], dtype=complex))
    assert abs(f[1, 1] - (-0.75)) < 1e-15


def test_tensor_constant_state_picks_padded_terms():
    # at x = e_0 only fully constant-padded terms survive the contraction
    spec = OdeSystemSpec(
        d=1, m=2,
        monomials=(
            Monomial(1, 1, 2.0, (), ()),       # fully padded after augmentation
            Monomial(1, 1, 3.0, (1,), (1,)),   # genuine state dependence
        ),
        initial_state=np.array([0.5]), dt=0.1, steps=1,
    )
    aug = augment_constant(spec)
    e0 = np.array([1.0, 0.0], dtype=complex)
    f = eval_f_tensor(aug, e0)
    assert abs(f[1, 1] - 2.0) < 1e-14


def test_tensor_matches_direct_on_examples():
    aug = augment_constant(logistic_spec())
    for u in (0.5, 0.25, 0.7 + 0.2j):
        x = np.array([1.0, u], dtype=complex)
        assert np.max(np.abs(eval_f_tensor(aug, x) - eval_f_direct(aug, x))) < 1e-12


def test_tensor_matches_direct_random_property(rng):
    for seed in range(100):
        aug = random_system(seed)
        x = random_unit(rng, aug.D)
        dev = np.max(np.abs(eval_f_tensor(aug, x) - eval_f_direct(aug, x)))
        assert dev < 1e-12


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

LOGISTIC_DOC = {
    "d": 1,
    "m": 1,
    "monomials": [
        {"row": 1, "col": 1, "re": -1.0, "im": 0.0, "conj": [], "unconj": []},
        {"row": 1, "col": 1, "re": 1.0, "im": 0.0, "conj": [], "unconj": [1]},
    ],
    "initial": [[0.5, 0.0]],
    "dt": 0.001,
    "steps": 1000,
}


def test_spec_from_json_parses_logistic():
    spec = spec_from_json(json.dumps(LOGISTIC_DOC))
    assert spec.d == 1 and spec.m == 1 and spec.steps == 1000
    aug = encode(spec)
    f = eval_f_direct(aug, np.array([1.0, 0.5], dtype=complex))
    assert abs(f[1, 1] + 0.5) < 1e-15


def test_spec_json_rejects_unknown_fields():
    doc = dict(LOGISTIC_DOC)
    doc["extra"] = 1
    with pytest.raises(SpecError, match="unknown field 'extra'"):
        spec_from_json(doc)

    doc = json.loads(json.dumps(LOGISTIC_DOC))
    doc["monomials"][0]["color"] = 3
    with pytest.raises(SpecError, match="color"):
        spec_from_json(doc)

    doc = json.loads(json.dumps(LOGISTIC_DOC))
    doc["norm_closure"] = {"enabled": True, "eps": 0.01, "mode": "x"}
    with pytest.raises(SpecError, match="mode"):
        spec_from_json(doc)


def test_spec_json_missing_and_badly_typed_fields():
    doc = dict(LOGISTIC_DOC)
    del doc["dt"]
    with pytest.raises(SpecError, match="missing"):
        spec_from_json(doc)
    doc = dict(LOGISTIC_DOC)
    doc["d"] = "one"
    with pytest.raises(SpecError, match="spec.d"):
        spec_from_json(doc)


def test_spec_json_norm_closure_and_driving():
    doc = json.loads(json.dumps(LOGISTIC_DOC))
    doc["steps"] = 3
    doc["driving"] = [[[0.1, 0.0]], [[0.2, 0.0]], [[0.3, 0.0]]]
    doc["norm_closure"] = {"enabled": False, "eps": 0.125}
    spec = spec_from_json(doc)
    assert spec.norm_closure_eps is None
    assert spec.driving.shape == (3, 1)
    doc["driving"] = None
    doc["norm_closure"] = {"enabled": True, "eps": 0.125}
    spec = spec_from_json(doc)
    assert spec.norm_closure_eps == 0.125
    closed = encode(spec)
    assert closed.taylor_order == 3


def test_augmented_to_dict_round_trips_monomials():
    aug = augment_constant(logistic_spec(steps=5))
    doc = augmented_to_dict(aug)
    assert doc["D"] == 2 and doc["m_eff"] == 1 and doc["terms"] == 2
    assert doc["monomials"][0]["conj"] == [0]
    assert doc["initial"][0] == [1.0, 0.0]
