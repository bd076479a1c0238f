"""Quasi-random sample generation over the training parameter box.

Points come from the Sobol low-discrepancy sequence in Gray-code order.
Direction numbers are the first 16 dimensions of the Joe & Kuo (2008)
"new-joe-kuo-6" table (the same published table scipy ships), embedded
below as (primitive polynomial, initial m values) pairs; dimension 1 is
the van der Corput sequence.  Point 0 of the raw sequence is the origin,
so callers skip it (``make_samples`` defaults to skip=1) and test sets
continue the stream at a skip beyond the training draw to stay disjoint.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .residuals import Sample
from .vg import VgParams

SOBOL_BITS = 30
MAX_DIM = 16

# Joe-Kuo new-joe-kuo-6 rows 2..16: (polynomial as binary-encoded integer,
# initial direction numbers m_1..m_s); dimension 1 is handled separately.
_JOE_KUO = (
    (3, (1,)),
    (7, (1, 3)),
    (11, (1, 3, 1)),
    (13, (1, 1, 1)),
    (19, (1, 1, 3, 3)),
    (25, (1, 3, 5, 13)),
    (37, (1, 1, 5, 5, 17)),
    (41, (1, 1, 5, 5, 5)),
    (47, (1, 1, 7, 11, 19)),
    (55, (1, 1, 5, 1, 1)),
    (59, (1, 1, 1, 3, 11)),
    (61, (1, 3, 5, 5, 31)),
    (67, (1, 3, 3, 9, 7, 49)),
    (91, (1, 1, 1, 15, 21, 21)),
    (97, (1, 3, 1, 13, 27, 49)),
)


@lru_cache(maxsize=None)
def _direction_matrix(dim: int) -> np.ndarray:
    """Direction integers scaled to SOBOL_BITS; column k belongs to bit k."""
    v = np.zeros((dim, SOBOL_BITS + 1), dtype=np.uint64)
    for k in range(1, SOBOL_BITS + 1):
        v[0, k] = 1 << (SOBOL_BITS - k)
    for d in range(1, dim):
        poly, m_init = _JOE_KUO[d - 1]
        s = poly.bit_length() - 1
        a = [(poly >> (s - 1 - i)) & 1 for i in range(s - 1)]
        m = list(m_init)
        for k in range(s, SOBOL_BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if a[i - 1]:
                    new ^= m[k - i] << i
            m.append(new)
        for k in range(1, SOBOL_BITS + 1):
            v[d, k] = m[k - 1] << (SOBOL_BITS - k)
    v.setflags(write=False)
    return v


def sobol_sequence(dim: int, n: int, skip: int = 0) -> np.ndarray:
    """``n`` Sobol points in [0, 1)^dim starting at sequence index ``skip``.

    Deterministic in (dim, n, skip); point 0 is the origin.
    """
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"dim must be in 1..{MAX_DIM} (direction-number table size)")
    if n < 1:
        raise ValueError("n must be at least 1")
    if skip < 0:
        raise ValueError("skip must be non-negative")
    ints = kernels.sobol_ints(_direction_matrix(dim), skip, n)
    return ints.astype(np.float64) * 2.0**-SOBOL_BITS


@dataclass(frozen=True)
class SampleBox:
    """Coordinate ranges of the training/test distribution."""

    strike: float = 200.0
    tau_max: float = 3.0
    sigma_range: tuple = (0.01, 0.5)
    nu_range: tuple = (0.1, 0.6)
    theta_range: tuple = (-0.5, -0.1)
    r_range: tuple = (0.0, 0.1)
    q_range: tuple = (0.0, 0.1)
    train_x_ratio: tuple = (1.0 / 40.0, 2.0)   # x in [ln(K/40), ln(2K)]
    test_x_ratio: tuple = (0.5, 2.0)           # x in [ln(K/2),  ln(2K)]

    def x_range(self, role: str) -> tuple:
        ratio = {"train": self.train_x_ratio, "test": self.test_x_ratio}[role]
        return (float(np.log(self.strike * ratio[0])), float(np.log(self.strike * ratio[1])))


TAU_FLOOR = 1e-6  # keep maturities strictly positive (years)

CSV_COLUMNS = ("x", "tau", "sigma", "nu", "theta", "r", "q")


@dataclass
class SampleSet:
    """Array-backed sample collection, columns (x, tau, sigma, nu, theta, r, q)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != 7:
            raise ValueError("samples must have 7 columns (x, tau, sigma, nu, theta, r, q)")

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, i) -> Sample:
        x, tau, sigma, nu, theta, r, q = self.data[i]
        return Sample(x=x, tau=tau, params=VgParams(sigma, nu, theta, r, q))

    def column(self, name: str) -> np.ndarray:
        return self.data[:, CSV_COLUMNS.index(name)]

    def to_csv(self, path) -> None:
        header = ",".join(CSV_COLUMNS)
        np.savetxt(path, self.data, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        return cls(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def make_samples(box: SampleBox, n: int, role: str = "train", skip: int = 1,
                 fixed_params: dict | None = None) -> SampleSet:
    """Map Sobol points affinely onto the sample box.

    With ``fixed_params`` only (x, tau) are sampled (a 2-d Sobol stream)
    and sigma, nu, theta, r, q are pinned to the given values -- the
    single-parameter-set training mode.
    """
    if role not in ("train", "test"):
        raise ValueError("role must be 'train' or 'test'")
    x_lo, x_hi = box.x_range(role)
    if fixed_params is not None:
        u = sobol_sequence(2, n, skip)
        fixed = {k: float(fixed_params[k]) for k in ("sigma", "nu", "theta", "r", "q")}
        cols = [
            x_lo + u[:, 0] * (x_hi - x_lo),
            np.maximum(box.tau_max * u[:, 1], TAU_FLOOR),
        ] + [np.full(n, fixed[k]) for k in ("sigma", "nu", "theta", "r", "q")]
        return SampleSet(np.column_stack(cols))
    u = sobol_sequence(7, n, skip)
    ranges = [box.sigma_range, box.nu_range, box.theta_range, box.r_range, box.q_range]
    cols = [x_lo + u[:, 0] * (x_hi - x_lo), np.maximum(box.tau_max * u[:, 1], TAU_FLOOR)]
    cols += [lo + u[:, 2 + i] * (hi - lo) for i, (lo, hi) in enumerate(ranges)]
    return SampleSet(np.column_stack(cols))
