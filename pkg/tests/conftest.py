import numpy as np
import pytest

from polyode.encoding import Monomial, OdeSystemSpec, augment_constant
from polyode.meanfield import DensityMatrix


def random_system(seed, d_max=3, m_max=2, n_mono_max=5):
    """Random polynomial system in the padded encoding, for oracle sweeps."""
    r = np.random.default_rng(seed)
    d = int(r.integers(1, d_max + 1))
    m = int(r.integers(1, m_max + 1))
    n_mono = int(r.integers(1, n_mono_max + 1))
    monos = []
    for _ in range(n_mono):
        row = int(r.integers(1, d + 1))
        col = int(r.integers(0, d + 1))
        deg_c = int(r.integers(0, m + 1))
        deg_u = int(r.integers(0, m + 1))
        monos.append(
            Monomial(
                row=row,
                col=col,
                coeff=complex(r.standard_normal(), r.standard_normal()),
                conj_idx=tuple(int(v) for v in r.integers(0, d + 1, deg_c)),
                unconj_idx=tuple(int(v) for v in r.integers(0, d + 1, deg_u)),
            )
        )
    spec = OdeSystemSpec(
        d=d,
        m=m,
        monomials=tuple(monos),
        initial_state=r.standard_normal(d) + 1j * r.standard_normal(d),
        dt=0.01,
        steps=10,
    )
    return augment_constant(spec)


def random_unit(rng, D):
    v = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    return v / np.linalg.norm(v)


def projector(x):
    xh = np.asarray(x, dtype=complex)
    xh = xh / np.linalg.norm(xh)
    return DensityMatrix(matrix=np.outer(xh, xh.conj()))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
