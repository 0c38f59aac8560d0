"""Truncated-Fock-basis states and banded operators for one bosonic mode.

Conventions (used consistently by every oracle in the test suite):
    hbar = 1, unit mass and frequency,
    q = (a + a^dag)/sqrt(2),   p = i(a^dag - a)/sqrt(2),   n = a^dag a.

Every operator needed here (q, p, n, q^4, the Hamiltonian pieces and the
collapse operator) has bandwidth <= 4, so operators are stored by
diagonals and matrix-vector products cost O(dim * bandwidth).
"""

from dataclasses import dataclass

import numpy as np

from .errors import LeakageError

__all__ = [
    "PhysicalParams",
    "StateVector",
    "BandedOperator",
    "HamiltonianParts",
    "build_ladder",
    "build_quadratures",
    "build_hamiltonian",
    "build_lindblad",
    "coherent_state",
    "fock_state",
    "expectation",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of the driven, damped oscillator.

    beta is the classicality scale in (0, 1] (small beta -> large orbits
    relative to hbar/2), gamma the damping rate, g the drive amplitude.
    With sho_mode=True the quartic/inverted terms and the gamma cross-term
    are dropped and a plain driven harmonic oscillator is simulated.
    """

    beta: float = 0.1
    gamma: float = 0.125
    g: float = 0.3
    sho_mode: bool = False

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.g < 0.0:
            raise ValueError(f"g must be >= 0, got {self.g}")

    def to_dict(self):
        return {
            "beta": self.beta,
            "gamma": self.gamma,
            "g": self.g,
            "sho_mode": self.sho_mode,
        }


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise ValueError(f"Fock dimension must be an integer >= 2, got {dim}")
    return int(dim)


@dataclass
class StateVector:
    """Pure state over the truncated Fock basis |0>, ..., |dim-1>."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amp.ndim != 1:
            raise ValueError("amplitudes must be a 1-d array")
        _check_dim(amp.shape[0])
        self.amplitudes = amp

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n)

    def is_normalized(self, tol=1e-9):
        return abs(self.norm() ** 2 - 1.0) < tol

    def tail_population(self, tail_fraction=0.05):
        """Population in the top tail_fraction of Fock levels (truncation leakage)."""
        k = max(1, int(np.ceil(self.dim * tail_fraction)))
        return float(np.sum(np.abs(self.amplitudes[self.dim - k:]) ** 2))


class BandedOperator:
    """Complex banded matrix stored by diagonals.

    bands[i, j] holds element A[j, j + offsets[i]]; slots that fall outside
    the matrix are kept at exactly zero.  offsets are sorted and unique.
    """

    def __init__(self, dim, offsets, bands, hermitian=False):
        self.dim = _check_dim(dim)
        offsets = np.asarray(offsets, dtype=np.int64)
        bands = np.ascontiguousarray(bands, dtype=np.complex128)
        if bands.shape != (offsets.shape[0], dim):
            raise ValueError("bands must have shape (len(offsets), dim)")
        order = np.argsort(offsets)
        self.offsets = offsets[order]
        self.bands = bands[order]
        if np.unique(self.offsets).shape[0] != self.offsets.shape[0]:
            raise ValueError("offsets must be unique")
        # zero out the invalid slots so band storage is canonical
        for i, off in enumerate(self.offsets):
            if off > 0:
                self.bands[i, dim - off:] = 0.0
            elif off < 0:
                self.bands[i, :-off] = 0.0
        self.hermitian = bool(hermitian)

    @property
    def bandwidth(self):
        nz = [abs(int(o)) for o, row in zip(self.offsets, self.bands)
              if np.any(row != 0.0)]
        return max(nz) if nz else 0

    @classmethod
    def zeros(cls, dim, offsets=(0,)):
        offsets = np.asarray(sorted(set(int(o) for o in offsets)), dtype=np.int64)
        return cls(dim, offsets, np.zeros((offsets.shape[0], dim), dtype=np.complex128))

    @classmethod
    def from_dense(cls, mat, hermitian=False):
        mat = np.asarray(mat)
        dim = mat.shape[0]
        offsets = []
        bands = []
        for off in range(-(dim - 1), dim):
            diag = np.diagonal(mat, off)
            if np.any(diag != 0.0):
                row = np.zeros(dim, dtype=np.complex128)
                if off >= 0:
                    row[:dim - off] = diag
                else:
                    row[-off:] = diag
                offsets.append(off)
                bands.append(row)
        if not offsets:
            return cls.zeros(dim)
        return cls(dim, offsets, np.array(bands), hermitian=hermitian)

    def band(self, off):
        """The diagonal at the given offset (zeros if not stored)."""
        idx = np.nonzero(self.offsets == off)[0]
        if idx.shape[0] == 0:
            return np.zeros(self.dim, dtype=np.complex128)
        return self.bands[idx[0]].copy()

    def to_dense(self):
        mat = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for off, row in zip(self.offsets, self.bands):
            if off >= 0:
                js = np.arange(0, self.dim - off)
            else:
                js = np.arange(-off, self.dim)
            mat[js, js + off] = row[js]
        return mat

    def matvec(self, x):
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.dim,):
            raise ValueError(f"vector length {x.shape} does not match dim {self.dim}")
        out = np.zeros(self.dim, dtype=np.complex128)
        for off, row in zip(self.offsets, self.bands):
            lo = max(0, -off)
            hi = min(self.dim, self.dim - off)
            out[lo:hi] += row[lo:hi] * x[lo + off:hi + off]
        return out

    def dagger(self):
        offs = -self.offsets[::-1]
        bands = np.zeros((self.offsets.shape[0], self.dim), dtype=np.complex128)
        for i, off in enumerate(self.offsets):
            # band of A^dag at offset -off: conj(band_off[j - off])
            src = self.bands[i]
            row = np.zeros(self.dim, dtype=np.complex128)
            if off >= 0:
                row[off:] = np.conj(src[:self.dim - off])
            else:
                row[:off] = np.conj(src[-off:])
            bands[self.offsets.shape[0] - 1 - i] = row
        return BandedOperator(self.dim, offs, bands, hermitian=self.hermitian)

    def hermitized(self):
        """Exactly hermitian average (A + A^dag)/2 with consistent bands."""
        out = (self + self.dagger()) * 0.5
        out.hermitian = True
        return out

    def is_hermitian_exact(self):
        d = self.dagger()
        if not np.array_equal(d.offsets, self.offsets):
            allo = sorted(set(self.offsets) | set(d.offsets))
            return all(np.array_equal(self.band(o), d.band(o)) for o in allo)
        return np.array_equal(d.bands, self.bands)

    def __add__(self, other):
        if not isinstance(other, BandedOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        offs = sorted(set(self.offsets) | set(other.offsets))
        bands = np.array([self.band(o) + other.band(o) for o in offs])
        return BandedOperator(self.dim, offs, bands)

    def __sub__(self, other):
        return self + (other * (-1.0))

    def __mul__(self, scalar):
        return BandedOperator(self.dim, self.offsets.copy(),
                              self.bands * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        """Banded product; result offsets are sums of operand offsets."""
        if isinstance(other, StateVector):
            return StateVector(self.matvec(other.amplitudes))
        if isinstance(other, np.ndarray):
            return self.matvec(other)
        if not isinstance(other, BandedOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        dim = self.dim
        acc = {}
        for o1, b1 in zip(self.offsets, self.bands):
            for o2, b2 in zip(other.offsets, other.bands):
                o = int(o1 + o2)
                if abs(o) >= dim:
                    continue
                row = np.zeros(dim, dtype=np.complex128)
                # (AB)[j, j+o] = A[j, j+o1] * B[j+o1, j+o1+o2]
                lo = max(0, -o1, -o)
                hi = min(dim, dim - o1, dim - o)
                if hi > lo:
                    row[lo:hi] = b1[lo:hi] * b2[lo + o1:hi + o1]
                if o in acc:
                    acc[o] += row
                else:
                    acc[o] = row
        offs = sorted(acc)
        return BandedOperator(dim, offs, np.array([acc[o] for o in offs]))


@dataclass
class HamiltonianParts:
    """Split Hamiltonian H(t) = h_static + cos(t) * h_drive."""

    h_static: BandedOperator
    h_drive: BandedOperator
    drive_frequency: float = 1.0

    def at(self, t):
        return self.h_static + self.h_drive * float(np.cos(self.drive_frequency * t))


def build_ladder(dim):
    """Annihilation operator a with a|n> = sqrt(n)|n-1> on the truncated basis."""
    dim = _check_dim(dim)
    row = np.zeros(dim, dtype=np.complex128)
    row[:dim - 1] = np.sqrt(np.arange(1.0, dim))
    return BandedOperator(dim, [1], row[np.newaxis, :])


def build_quadratures(dim):
    """Position, momentum and number operators (q, p, n)."""
    dim = _check_dim(dim)
    a = build_ladder(dim)
    adag = a.dagger()
    q = (a + adag) * (1.0 / np.sqrt(2.0))
    p = (adag - a) * (1j / np.sqrt(2.0))
    q.hermitian = True
    p.hermitian = True
    nvals = np.arange(dim, dtype=np.float64).astype(np.complex128)
    n = BandedOperator(dim, [0], nvals[np.newaxis, :], hermitian=True)
    return q, p, n


def build_hamiltonian(params, dim):
    """Hamiltonian pieces for the oscillator.

    Duffing (sho_mode=False):
        h_static = p^2/2 + (beta^2/4) q^4 - q^2/2 + (gamma/2)(qp + pq)
    Harmonic special case (sho_mode=True):
        h_static = p^2/2 + q^2/2   (no damping cross-term)
    In both cases h_drive = (g/beta) q, driven as cos(t).
    """
    dim = _check_dim(dim)
    q, p, _ = build_quadratures(dim)
    if params.sho_mode:
        h_static = (p @ p + q @ q) * 0.5
    else:
        q2 = q @ q
        q4 = q2 @ q2
        h_static = (p @ p) * 0.5 + q4 * (params.beta ** 2 / 4.0) + q2 * (-0.5) \
            + (q @ p + p @ q) * (params.gamma / 2.0)
    h_static = h_static.hermitized()
    h_drive = q * (params.g / params.beta)
    h_drive.hermitian = True
    return HamiltonianParts(h_static=h_static, h_drive=h_drive, drive_frequency=1.0)


def build_lindblad(params, dim):
    """Collapse operator L = sqrt(2*gamma) a, so L^dag L = 2*gamma*n."""
    if not params.gamma > 0:
        raise ValueError("gamma must be > 0")
    return build_ladder(dim) * np.sqrt(2.0 * params.gamma)


def fock_state(n, dim):
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise ValueError(f"Fock level {n} outside basis of dimension {dim}")
    amp = np.zeros(dim, dtype=np.complex128)
    amp[n] = 1.0
    return StateVector(amp)


def coherent_state(alpha, dim):
    """Coherent state |alpha>, renormalized after truncation.

    Requires |alpha|^2 + 6|alpha| < dim so the discarded Poisson tail is
    negligible; otherwise the truncated basis cannot hold the state.
    """
    dim = _check_dim(dim)
    alpha = complex(alpha)
    a2 = abs(alpha) ** 2
    if a2 + 6.0 * abs(alpha) >= dim:
        raise LeakageError(
            f"coherent amplitude |alpha|={abs(alpha):.3g} too large for dim={dim}"
        )
    amp = np.zeros(dim, dtype=np.complex128)
    amp[0] = 1.0
    for n in range(1, dim):
        amp[n] = amp[n - 1] * alpha / np.sqrt(n)
    amp /= np.linalg.norm(amp)
    return StateVector(amp)


def expectation(state, op):
    """<psi|A|psi>.

    For hermitian operators the imaginary part is asserted below 1e-9 and
    the real part returned as a float; otherwise the complex value is
    returned as-is.
    """
    if state.dim != op.dim:
        raise ValueError(f"state dim {state.dim} != operator dim {op.dim}")
    val = np.vdot(state.amplitudes, op.matvec(state.amplitudes))
    if op.hermitian:
        if abs(val.imag) >= 1e-9:
            raise AssertionError(
                f"hermitian expectation has imaginary part {val.imag:.3e}"
            )
        return float(val.real)
    return complex(val)
