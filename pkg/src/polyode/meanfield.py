"""Multi-copy mean-field dynamics over explicit amplitude tensors.

The encoded polynomial generator acts on n copies of the augmented state: one
term per (monomial, target site, ordered context sites) assignment, applying
the target substitution |row><col| on the target site and the context
substitutions |p_a><q_a| on the chosen context sites, averaged over all
assignments and normalized by the number of context sets per target.  For a
product state the single-site reduction of this flow reproduces the nonlinear
single-system dynamics up to corrections suppressed by 1/n.

Site ordering is big-endian: site 0 is the slowest-varying index of the
amplitude vector, so index arithmetic matches a reshape to (D,)*n.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from itertools import permutations

import numpy as np
import scipy.linalg

from .encoding import eval_f_direct

__all__ = [
    "DEFAULT_CAP",
    "EXACT_CAP",
    "ResourceCapError",
    "MultiCopyState",
    "DensityMatrix",
    "product_state",
    "apply_generator",
    "apply_generator_adjoint",
    "dense_generator",
    "trotter_step",
    "evolve_exact",
    "reduce_site",
    "trace_distance",
    "effective_generator",
    "dump_state",
    "load_state",
]

DEFAULT_CAP = 2**22
EXACT_CAP = 4096
_MAGIC = b"MCQS"


class ResourceCapError(RuntimeError):
    """Requested amplitude vector exceeds the configured state-size cap."""


@dataclass(frozen=True)
class MultiCopyState:
    """Complex amplitude vector over n copies of a D-dimensional space."""

    n: int
    D: int
    amplitudes: np.ndarray
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        size = self.D**self.n
        if size > self.cap:
            raise ResourceCapError(
                f"state size D^n = {self.D}^{self.n} = {size} exceeds cap {self.cap}"
            )
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (size,):
            raise ValueError(f"amplitude vector has shape {amps.shape}, expected ({size},)")
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self):
        return self.amplitudes.reshape((self.D,) * self.n)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def _like(self, amplitudes):
        return MultiCopyState(n=self.n, D=self.D, amplitudes=amplitudes, cap=self.cap)


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace reduced state plus the trace it carried before normalization."""

    matrix: np.ndarray
    raw_trace: float = 1.0

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def product_state(x, n, cap=DEFAULT_CAP):
    """n-fold tensor power of the per-copy vector x."""
    x = np.asarray(x, dtype=complex)
    D = x.shape[0]
    size = D**n
    if size > cap:
        raise ResourceCapError(
            f"state size D^n = {D}^{n} = {size} exceeds cap {cap}"
        )
    amps = np.ones(1, dtype=complex)
    for _ in range(n):
        amps = np.multiply.outer(amps, x).ravel()
    return MultiCopyState(n=n, D=D, amplitudes=amps, cap=cap)


def _check_compatible(aug, psi):
    if psi.D != aug.D:
        raise ValueError(f"per-copy dimension {psi.D} does not match encoding D={aug.D}")
    if psi.n < aug.m + 1:
        raise ValueError(
            f"need n >= m+1 = {aug.m + 1} copies (one target plus {aug.m} context sites), got n={psi.n}"
        )


def _apply_terms(aug, psi, rows, cols, conj_idx, unconj_idx, coeffs):
    """Shared matrix-free kernel: sum of substitution-map products over all
    (target, ordered context tuple) assignments, in fixed iteration order."""
    n, D, m = psi.n, psi.D, aug.m
    src_tensor = psi.tensor()
    out = np.zeros_like(src_tensor)
    scale = 1.0 / (math.comb(n - 1, m) * math.factorial(m))
    site_list = list(range(n))
    for i in range(len(coeffs)):
        c = coeffs[i] * scale
        row, col = rows[i], cols[i]
        ps, qs = conj_idx[i], unconj_idx[i]
        for t in site_list:
            others = site_list[:t] + site_list[t + 1 :]
            for ctx in permutations(others, m):
                src = [slice(None)] * n
                dst = [slice(None)] * n
                src[t] = col
                dst[t] = row
                for s, p, q in zip(ctx, ps, qs):
                    src[s] = q
                    dst[s] = p
                out[tuple(dst)] += c * src_tensor[tuple(src)]
    return psi._like(out.ravel())


def apply_generator(aug, psi):
    """Matrix-free action of the multi-copy generator L on psi.

    L = binom(n-1, m)^{-1} * sum over targets t and context sets S (|S| = m,
    t not in S) of the symmetrized term operator; target-role terms alone
    reduce to the plain polynomial matrix f at first order.
    """
    _check_compatible(aug, psi)
    return _apply_terms(aug, psi, aug._rows, aug._cols, aug._conj, aug._unconj, aug._coeffs)


def apply_generator_adjoint(aug, psi):
    """Action of L^dagger: every substitution map is transposed and the
    coefficients conjugated."""
    _check_compatible(aug, psi)
    return _apply_terms(
        aug, psi, aug._cols, aug._rows, aug._unconj, aug._conj, np.conj(aug._coeffs)
    )


def dense_generator(aug, n):
    """Densely assembled generator matrix, for exact-evolution validation."""
    D, m = aug.D, aug.m
    size = D**n
    if size > EXACT_CAP:
        raise ResourceCapError(f"dense generator needs D^n <= {EXACT_CAP}, got {size}")
    if n < m + 1:
        raise ValueError(f"need n >= m+1 = {m + 1} copies, got n={n}")
    L = np.zeros((size, size), dtype=complex)
    strides = [D ** (n - 1 - j) for j in range(n)]
    scale = 1.0 / (math.comb(n - 1, m) * math.factorial(m))
    site_list = list(range(n))
    for mono in aug.monomials:
        c = mono.coeff * scale
        for t in site_list:
            others = site_list[:t] + site_list[t + 1 :]
            for ctx in permutations(others, m):
                fixed = {t}.union(ctx)
                free = [j for j in site_list if j not in fixed]
                offs = np.zeros(1, dtype=np.int64)
                for j in free:
                    offs = (offs[:, None] + np.arange(D, dtype=np.int64)[None, :] * strides[j]).ravel()
                row_base = mono.row * strides[t]
                col_base = mono.col * strides[t]
                for s, p, q in zip(ctx, mono.conj_idx, mono.unconj_idx):
                    row_base += p * strides[s]
                    col_base += q * strides[s]
                L[offs + row_base, offs + col_base] += c
    return L


def trotter_step(aug, psi, dt):
    """One first-order step psi - dt * L psi.

    No renormalization: the flow is deliberately norm-non-preserving and the
    norm is tracked separately through the reduced states' raw traces.
    """
    stepped = apply_generator(aug, psi)
    return psi._like(psi.amplitudes - dt * stepped.amplitudes)


def evolve_exact(aug, psi, t):
    """expm(-t L) psi via the dense generator; validation-only (small D^n)."""
    _check_compatible(aug, psi)
    size = psi.D**psi.n
    if size > EXACT_CAP:
        raise ResourceCapError(f"exact evolution needs D^n <= {EXACT_CAP}, got {size}")
    L = dense_generator(aug, psi.n)
    U = scipy.linalg.expm(-t * L)
    return psi._like(U @ psi.amplitudes)


def reduce_site(psi, site):
    """Partial trace onto one site, normalized to unit trace.

    The pre-normalization trace (the squared state norm) is reported on the
    returned DensityMatrix.
    """
    if not (0 <= site < psi.n):
        raise ValueError(f"site {site} out of range for n={psi.n}")
    tensor = np.moveaxis(psi.tensor(), site, 0).reshape(psi.D, -1)
    rho = tensor @ tensor.conj().T
    raw_trace = float(np.real(np.trace(rho)))
    if raw_trace <= 0:
        raise ValueError("cannot normalize a zero state")
    return DensityMatrix(matrix=rho / raw_trace, raw_trace=raw_trace)


def trace_distance(rho, sigma):
    """Half the trace norm of the difference of two density matrices."""
    a = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    b = sigma.matrix if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    eigs = np.linalg.eigvalsh(a - b)
    return float(0.5 * np.sum(np.abs(eigs)))


def effective_generator(aug, x):
    """Role-complete first-order generator f_eff(x) = f(x) + G(x).

    G collects the first-order contribution of terms in which the reduced
    site plays a context role: for each monomial and each context slot a, the
    target and the remaining slots contract to a scalar and the operator
    |p_a><q_a| lands on the reduced site.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (aug.D,):
        raise ValueError(f"state has shape {x.shape}, expected ({aug.D},)")
    out = eval_f_direct(aug, x)
    xc = np.conj(x)
    for mono in aug.monomials:
        target_scalar = mono.coeff * xc[mono.row] * x[mono.col]
        factors = [xc[p] * x[q] for p, q in zip(mono.conj_idx, mono.unconj_idx)]
        for a in range(aug.m):
            others = target_scalar
            for b in range(aug.m):
                if b != a:
                    others *= factors[b]
            out[mono.conj_idx[a], mono.unconj_idx[a]] += others
    return out


def dump_state(psi, path):
    """Raw little-endian dump: 16-byte header (magic, u32 D, u32 n, padding)
    followed by interleaved (re, im) float64 amplitudes."""
    header = struct.pack("<4sII4x", _MAGIC, psi.D, psi.n)
    inter = np.empty(2 * psi.amplitudes.size, dtype="<f8")
    inter[0::2] = psi.amplitudes.real
    inter[1::2] = psi.amplitudes.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(inter.tobytes())


def load_state(path, cap=DEFAULT_CAP):
    with open(path, "rb") as fh:
        header = fh.read(16)
        magic, D, n = struct.unpack("<4sII4x", header)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        inter = np.frombuffer(fh.read(), dtype="<f8")
    amps = inter[0::2] + 1j * inter[1::2]
    return MultiCopyState(n=n, D=D, amplitudes=amps, cap=cap)
