"""Degree-uniform tensor encoding of polynomial ODE right-hand sides.

A system  dx/dt + f(x) x = b(t)  with f a d-by-d matrix whose entries are
polynomials in the components of x and their conjugates is rewritten over an
augmented state that carries a constant coordinate x_0 = 1 (index 0).  Every
entry of f then becomes a sum of degree-uniform monomials: each monomial holds
a target entry (row, col), a scalar coefficient, and exactly m conjugated plus
m unconjugated factor indices, padding with the constant coordinate where the
genuine degree is lower.

An optional closure stage appends a norm-tracking coordinate whose dynamics
keep the full state on the unit sphere, with the inverse-square-root factor
replaced by a truncated central-binomial series.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations

import numpy as np

__all__ = [
    "SpecError",
    "Monomial",
    "OdeSystemSpec",
    "AugmentedSystem",
    "augment_constant",
    "norm_closure",
    "taylor_inv_sqrt",
    "eval_f_direct",
    "eval_f_tensor",
    "encode",
    "spec_from_json",
    "load_spec",
    "augmented_to_dict",
]


class SpecError(ValueError):
    """Invalid system description; `field` names the offending entry."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class Monomial:
    """One additive term of the encoded f: coeff * prod(conj(x[p])) * prod(x[q])
    placed at entry (row, col)."""

    row: int
    col: int
    coeff: complex
    conj_idx: tuple[int, ...]
    unconj_idx: tuple[int, ...]

    def evaluate(self, x):
        """Value of this term's entry at state x (constant coordinate included)."""
        val = self.coeff
        for p in self.conj_idx:
            val *= np.conj(x[p])
        for q in self.unconj_idx:
            val *= x[q]
        return val


@dataclass(frozen=True)
class OdeSystemSpec:
    """User-facing polynomial ODE description, prior to degree padding.

    Monomial indices already use the augmented convention: index 0 is the
    constant coordinate, the original variables are 1..d.  Factor lists may be
    shorter than m; `augment_constant` pads them.  `driving[i]` is the vector
    added (times dt) on the step to state i+1.
    """

    d: int
    m: int
    monomials: tuple[Monomial, ...]
    initial_state: np.ndarray
    dt: float
    steps: int
    driving: np.ndarray | None = None
    norm_closure_eps: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise SpecError("d must be >= 1", field="d")
        if self.m < 1:
            raise SpecError("m must be >= 1", field="m")
        if not (self.dt > 0):
            raise SpecError("dt must be positive", field="dt")
        if self.steps < 1:
            raise SpecError("steps must be >= 1", field="steps")
        init = np.asarray(self.initial_state, dtype=complex)
        if init.shape != (self.d,):
            raise SpecError(
                f"initial state has length {init.shape}, expected ({self.d},)",
                field="initial",
            )
        object.__setattr__(self, "initial_state", init)
        if self.driving is not None:
            drv = np.asarray(self.driving, dtype=complex)
            if drv.shape != (self.steps, self.d):
                raise SpecError(
                    f"driving has shape {drv.shape}, expected ({self.steps}, {self.d})",
                    field="driving",
                )
            object.__setattr__(self, "driving", drv)
        for i, mono in enumerate(self.monomials):
            if not (1 <= mono.row <= self.d):
                raise SpecError(
                    f"monomials[{i}].row = {mono.row} outside 1..{self.d} "
                    "(the constant coordinate must keep zero dynamics)",
                    field=f"monomials[{i}].row",
                )
            if not (0 <= mono.col <= self.d):
                raise SpecError(
                    f"monomials[{i}].col = {mono.col} outside 0..{self.d}",
                    field=f"monomials[{i}].col",
                )
            for name, idxs in (("conj", mono.conj_idx), ("unconj", mono.unconj_idx)):
                if any(not (0 <= j <= self.d) for j in idxs):
                    raise SpecError(
                        f"monomials[{i}].{name} has index outside 0..{self.d}",
                        field=f"monomials[{i}].{name}",
                    )


@dataclass(frozen=True)
class AugmentedSystem:
    """Degree-uniform encoded system over D coordinates.

    Coordinate 0 is constant (value `rescale`; 1.0 unless a norm closure
    rescaled the state).  When `norm_coord` is set, that coordinate tracks
    sqrt(1 - |rest|^2) and `taylor_order` records the series truncation used.
    All monomials carry exactly m conjugated and m unconjugated factors.
    """

    D: int
    m: int
    monomials: tuple[Monomial, ...]
    initial_state: np.ndarray
    dt: float
    steps: int
    driving: np.ndarray | None = None
    x0_convention: bool = True
    norm_coord: int | None = None
    taylor_order: int = 0
    rescale: float = 1.0
    d_original: int = 0
    # packed views for the evaluation kernels, filled in __post_init__
    _rows: np.ndarray = field(repr=False, default=None)
    _cols: np.ndarray = field(repr=False, default=None)
    _coeffs: np.ndarray = field(repr=False, default=None)
    _conj: np.ndarray = field(repr=False, default=None)
    _unconj: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        init = np.asarray(self.initial_state, dtype=complex)
        if init.shape != (self.D,):
            raise SpecError("augmented initial state length mismatch", field="initial")
        object.__setattr__(self, "initial_state", init)
        for i, mono in enumerate(self.monomials):
            if len(mono.conj_idx) != self.m or len(mono.unconj_idx) != self.m:
                raise SpecError(
                    f"monomials[{i}] is not degree-uniform at m={self.m}",
                    field=f"monomials[{i}]",
                )
            if self.x0_convention and mono.row == 0:
                raise SpecError(
                    f"monomials[{i}] targets the constant row",
                    field=f"monomials[{i}].row",
                )
        M = len(self.monomials)
        object.__setattr__(self, "_rows", np.array([mo.row for mo in self.monomials], dtype=np.intp))
        object.__setattr__(self, "_cols", np.array([mo.col for mo in self.monomials], dtype=np.intp))
        object.__setattr__(self, "_coeffs", np.array([mo.coeff for mo in self.monomials], dtype=complex))
        object.__setattr__(
            self, "_conj", np.array([mo.conj_idx for mo in self.monomials], dtype=np.intp).reshape(M, self.m)
        )
        object.__setattr__(
            self, "_unconj", np.array([mo.unconj_idx for mo in self.monomials], dtype=np.intp).reshape(M, self.m)
        )

    @property
    def term_count(self):
        return len(self.monomials)

    def driving_block(self, k):
        """Driving vector b_k in augmented coordinates (k = 1..steps); zeros if undriven."""
        if self.driving is None or not (1 <= k <= self.steps):
            return np.zeros(self.D, dtype=complex)
        return self.driving[k - 1]

    def descale_state(self, x):
        """Map an augmented state back to original coordinates, undoing the closure rescale."""
        return np.asarray(x, dtype=complex)[1 : self.d_original + 1] / self.rescale


def _pad_monomial(mono, target_m, const_value):
    """Pad factor lists with constant-coordinate indices up to target_m.

    Each added factor multiplies the evaluated term by const_value (the
    constant coordinate's value), so the coefficient is divided to compensate.
    """
    pads = (target_m - len(mono.conj_idx)) + (target_m - len(mono.unconj_idx))
    if pads < 0:
        raise SpecError("monomial exceeds target degree")
    coeff = mono.coeff / (const_value**pads) if pads else mono.coeff
    return Monomial(
        row=mono.row,
        col=mono.col,
        coeff=coeff,
        conj_idx=mono.conj_idx + (0,) * (target_m - len(mono.conj_idx)),
        unconj_idx=mono.unconj_idx + (0,) * (target_m - len(mono.unconj_idx)),
    )


def augment_constant(spec):
    """Adjoin the constant coordinate and pad every monomial to degree m.

    The constant coordinate (index 0) gets initial value 1 and, because no
    monomial may target row 0, identically zero dynamics.  Raises SpecError
    when a term exceeds the declared degree.
    """
    D = spec.d + 1
    padded = []
    for i, mono in enumerate(spec.monomials):
        if len(mono.conj_idx) > spec.m or len(mono.unconj_idx) > spec.m:
            raise SpecError(
                f"monomials[{i}] has degree ({len(mono.conj_idx)}, {len(mono.unconj_idx)}) "
                f"exceeding m={spec.m}",
                field=f"monomials[{i}]",
            )
        padded.append(_pad_monomial(mono, spec.m, 1.0))
    initial = np.concatenate(([1.0 + 0j], spec.initial_state))
    driving = None
    if spec.driving is not None and np.any(spec.driving):
        driving = np.zeros((spec.steps, D), dtype=complex)
        driving[:, 1:] = spec.driving
    return AugmentedSystem(
        D=D,
        m=spec.m,
        monomials=tuple(padded),
        initial_state=initial,
        dt=spec.dt,
        steps=spec.steps,
        driving=driving,
        d_original=spec.d,
    )


def taylor_inv_sqrt(y, K):
    """Truncated series for (1-y)^(-1/2): sum_{k<=K} C(2k,k) (y/4)^k.

    Valid for |y| <= 1/2, where the truncation error is below 2^-K.
    """
    if abs(y) > 0.5:
        raise ValueError(f"taylor_inv_sqrt domain is |y| <= 1/2, got y={y}")
    if K < 0:
        raise ValueError("K must be >= 0")
    total = 0.0
    for k in range(K + 1):
        total += math.comb(2 * k, k) * (y / 4.0) ** k
    return total


def _multiset_weight(combo):
    """Number of distinct orderings of the index multiset `combo`."""
    weight = math.factorial(len(combo))
    for count in Counter(combo).values():
        weight //= math.factorial(count)
    return weight


def norm_closure(aug, eps, growth_allowance=1.0, rescale=None):
    """Append the norm-tracking coordinate and its generated dynamics.

    The augmented state is uniformly rescaled so its squared norm is at most
    1/2 (dividing the allowance headroom for trajectories that grow), then a
    real coordinate nu = D with value sqrt(1 - |state|^2) is added.  Its
    derivative -(1/2)(1-y)^(-1/2) d(y)/dt, y the squared norm of the original
    block, is encoded as monomials with the inverse square root replaced by
    the K-term central-binomial series, K = ceil(log2(1/eps)); the uniform
    degree grows to m + K.  Driving is not supported through the closure.
    """
    if not (0 < eps < 1):
        raise SpecError("norm closure eps must lie in (0, 1)", field="norm_closure.eps")
    if aug.norm_coord is not None:
        raise SpecError("norm closure already applied")
    if aug.driving is not None and np.any(aug.driving):
        raise SpecError(
            "norm closure requires zero driving (the closed-coordinate dynamics "
            "track only the homogeneous flow)",
            field="driving",
        )
    if growth_allowance < 1.0:
        raise SpecError("growth_allowance must be >= 1")

    norm0 = float(np.linalg.norm(aug.initial_state))
    if rescale is None:
        s = 1.0 / (growth_allowance * norm0 * math.sqrt(2.0))
    else:
        s = float(rescale)
    scaled_norm_sq = (s * norm0) ** 2
    if scaled_norm_sq > 0.5 + 1e-12:
        raise SpecError(
            f"rescaled initial squared norm {scaled_norm_sq:.6g} exceeds 1/2",
            field="initial",
        )

    K = math.ceil(math.log2(1.0 / eps))
    m_eff = aug.m + K
    D0 = aug.D
    nu = D0

    # uniform variable rescale x -> s*x keeps the flow form with coeff / s^(2m)
    base = [
        Monomial(mo.row, mo.col, mo.coeff / s ** (2 * aug.m), mo.conj_idx, mo.unconj_idx)
        for mo in aug.monomials
    ]

    generated = []
    for mo in base:
        for k in range(K):
            a_k = math.comb(2 * k, k) / 4.0**k
            for combo in combinations_with_replacement(range(D0), k):
                w = _multiset_weight(combo)
                scale = -(a_k / 2.0) * w
                # term of  x^dag f x:  coeff * conj(x_row) x_col * contexts
                generated.append(
                    Monomial(
                        row=nu,
                        col=mo.col,
                        coeff=scale * mo.coeff,
                        conj_idx=mo.conj_idx + (mo.row,) + combo,
                        unconj_idx=mo.unconj_idx + combo,
                    )
                )
                # term of  x^dag f^dag x:  conj coefficient, roles swapped
                generated.append(
                    Monomial(
                        row=nu,
                        col=mo.row,
                        coeff=scale * np.conj(mo.coeff),
                        conj_idx=mo.unconj_idx + (mo.col,) + combo,
                        unconj_idx=mo.conj_idx + combo,
                    )
                )

    monomials = tuple(_pad_monomial(mo, m_eff, s) for mo in base + generated)

    scaled = s * aug.initial_state
    nu0 = math.sqrt(max(0.0, 1.0 - scaled_norm_sq))
    initial = np.concatenate((scaled, [nu0 + 0j]))
    return AugmentedSystem(
        D=D0 + 1,
        m=m_eff,
        monomials=monomials,
        initial_state=initial,
        dt=aug.dt,
        steps=aug.steps,
        driving=None,
        norm_coord=nu,
        taylor_order=K,
        rescale=s * aug.rescale,
        d_original=aug.d_original,
    )


def eval_f_direct(aug, x):
    """Evaluate f(x) entrywise from the monomial list."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (aug.D,):
        raise ValueError(f"state has shape {x.shape}, expected ({aug.D},)")
    out = np.zeros((aug.D, aug.D), dtype=complex)
    if aug.term_count == 0:
        return out
    xc = np.conj(x)
    terms = aug._coeffs * np.prod(xc[aug._conj], axis=1) * np.prod(x[aug._unconj], axis=1)
    np.add.at(out, (aug._rows, aug._cols), terms)
    return out


def eval_f_tensor(aug, x):
    """Evaluate f(x) by contracting the symmetrized context operators.

    For each monomial the m factor operators |p_a><q_a| are averaged over all
    m! slot assignments, each slot contracting to conj(x[p_a]) * x[q_a]; the
    result is placed at the target |row><col|.  Agrees with eval_f_direct by
    permutation invariance, which makes this an independent consistency path.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (aug.D,):
        raise ValueError(f"state has shape {x.shape}, expected ({aug.D},)")
    xc = np.conj(x)
    out = np.zeros((aug.D, aug.D), dtype=complex)
    for mono in aug.monomials:
        pairs = tuple(zip(mono.conj_idx, mono.unconj_idx))
        acc = 0.0 + 0j
        count = 0
        for assignment in permutations(pairs):
            slot_product = 1.0 + 0j
            for p, q in assignment:
                slot_product *= xc[p] * x[q]
            acc += slot_product
            count += 1
        out[mono.row, mono.col] += mono.coeff * acc / count
    return out


def encode(spec):
    """Run the full encoding pipeline: constant augmentation, then the norm
    closure when the spec requests one."""
    aug = augment_constant(spec)
    if spec.norm_closure_eps is not None:
        aug = norm_closure(aug, spec.norm_closure_eps)
    return aug


# ---------------------------------------------------------------------------
# JSON system documents
# ---------------------------------------------------------------------------

_TOP_FIELDS = {"d", "m", "monomials", "initial", "dt", "steps", "driving", "norm_closure"}
_TOP_REQUIRED = {"d", "m", "monomials", "initial", "dt", "steps"}
_MONO_FIELDS = {"row", "col", "re", "im", "conj", "unconj"}
_CLOSURE_FIELDS = {"enabled", "eps"}


def _reject_unknown(obj, allowed, where):
    for key in obj:
        if key not in allowed:
            raise SpecError(f"unknown field '{key}' in {where}", field=f"{where}.{key}")


def _as_complex_pairs(raw, where, length):
    arr = []
    if not isinstance(raw, list) or len(raw) != length:
        raise SpecError(f"{where} must be a list of {length} [re, im] pairs", field=where)
    for i, pair in enumerate(raw):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise SpecError(f"{where}[{i}] must be an [re, im] pair", field=f"{where}[{i}]")
        re, im = pair
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (re, im)):
            raise SpecError(f"{where}[{i}] entries must be numbers", field=f"{where}[{i}]")
        arr.append(complex(re, im))
    return np.array(arr, dtype=complex)


def _require_int(obj, key, where):
    val = obj.get(key)
    if not isinstance(val, int) or isinstance(val, bool):
        raise SpecError(f"{where}.{key} must be an integer", field=f"{where}.{key}")
    return val


def _require_number(obj, key, where):
    val = obj.get(key)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise SpecError(f"{where}.{key} must be a number", field=f"{where}.{key}")
    return float(val)


def spec_from_json(text):
    """Parse a system document (JSON text or already-decoded dict).

    Field names are fixed; unknown fields are rejected so that typos fail
    loudly instead of being silently ignored.
    """
    data = json.loads(text) if isinstance(text, str) else text
    if not isinstance(data, dict):
        raise SpecError("system document must be a JSON object", field="")
    _reject_unknown(data, _TOP_FIELDS, "spec")
    missing = _TOP_REQUIRED - set(data)
    if missing:
        raise SpecError(f"missing required field(s): {sorted(missing)}", field=sorted(missing)[0])

    d = _require_int(data, "d", "spec")
    m = _require_int(data, "m", "spec")
    steps = _require_int(data, "steps", "spec")
    dt = _require_number(data, "dt", "spec")

    raw_monos = data["monomials"]
    if not isinstance(raw_monos, list):
        raise SpecError("spec.monomials must be a list", field="monomials")
    monomials = []
    for i, raw in enumerate(raw_monos):
        where = f"monomials[{i}]"
        if not isinstance(raw, dict):
            raise SpecError(f"{where} must be an object", field=where)
        _reject_unknown(raw, _MONO_FIELDS, where)
        if set(raw) != _MONO_FIELDS:
            raise SpecError(
                f"{where} must have exactly fields {sorted(_MONO_FIELDS)}", field=where
            )
        row = _require_int(raw, "row", where)
        col = _require_int(raw, "col", where)
        re = _require_number(raw, "re", where)
        im = _require_number(raw, "im", where)
        for key in ("conj", "unconj"):
            if not (isinstance(raw[key], list) and all(isinstance(j, int) and not isinstance(j, bool) for j in raw[key])):
                raise SpecError(f"{where}.{key} must be a list of integers", field=f"{where}.{key}")
        monomials.append(
            Monomial(row=row, col=col, coeff=complex(re, im),
                     conj_idx=tuple(raw["conj"]), unconj_idx=tuple(raw["unconj"]))
        )

    initial = _as_complex_pairs(data["initial"], "initial", d)

    driving = None
    if data.get("driving") is not None:
        raw_drv = data["driving"]
        if not isinstance(raw_drv, list) or len(raw_drv) != steps:
            raise SpecError(f"driving must be a list of {steps} vectors", field="driving")
        driving = np.array(
            [_as_complex_pairs(v, f"driving[{k}]", d) for k, v in enumerate(raw_drv)],
            dtype=complex,
        )

    closure_eps = None
    if data.get("norm_closure") is not None:
        raw_nc = data["norm_closure"]
        if not isinstance(raw_nc, dict):
            raise SpecError("norm_closure must be an object", field="norm_closure")
        _reject_unknown(raw_nc, _CLOSURE_FIELDS, "norm_closure")
        if set(raw_nc) != _CLOSURE_FIELDS:
            raise SpecError(
                f"norm_closure must have exactly fields {sorted(_CLOSURE_FIELDS)}",
                field="norm_closure",
            )
        if not isinstance(raw_nc["enabled"], bool):
            raise SpecError("norm_closure.enabled must be a bool", field="norm_closure.enabled")
        eps = _require_number(raw_nc, "eps", "norm_closure")
        if raw_nc["enabled"]:
            closure_eps = eps

    return OdeSystemSpec(
        d=d,
        m=m,
        monomials=tuple(monomials),
        initial_state=initial,
        dt=dt,
        steps=steps,
        driving=driving,
        norm_closure_eps=closure_eps,
    )


def load_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(fh.read())


def augmented_to_dict(aug):
    """Plain-data form of an encoded system, for report serialization."""
    out = {
        "D": aug.D,
        "m_eff": aug.m,
        "d_original": aug.d_original,
        "x0_convention": aug.x0_convention,
        "norm_coord": aug.norm_coord,
        "taylor_order": aug.taylor_order,
        "rescale": aug.rescale,
        "dt": aug.dt,
        "steps": aug.steps,
        "terms": aug.term_count,
        "monomials": [
            {
                "row": mo.row,
                "col": mo.col,
                "re": float(np.real(mo.coeff)),
                "im": float(np.imag(mo.coeff)),
                "conj": list(mo.conj_idx),
                "unconj": list(mo.unconj_idx),
            }
            for mo in aug.monomials
        ],
        "initial": [[float(v.real), float(v.imag)] for v in aug.initial_state],
        "driving": None
        if aug.driving is None
        else [[[float(v.real), float(v.imag)] for v in row] for row in aug.driving],
    }
    return out
