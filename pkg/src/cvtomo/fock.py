"""Fock-basis foundation: wavefunctions, density matrices, marginals and Wigner functions.

Quadrature convention throughout the package: ``[Q, P] = i`` so the vacuum
has quadrature variance 1/2 and ``a = (Q + iP)/sqrt(2)``. The quadrature
measured at local-oscillator phase ``theta`` is
``Q_theta = Q cos(theta) + P sin(theta)`` and its eigenstates satisfy
``<m|Q_theta> = exp(i m theta) psi_m(Q_theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, GridError, UnsupportedOrderError

#: Highest Fock order the wavefunction recursion is supported for.
N_CAP = 100

_PI_QUARTER = np.pi ** -0.25


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Complex Hermitian matrix ``rho_mn = <m|rho|n>`` truncated at ``n_max``.

    The wrapped array is copied and made read-only on construction.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=complex, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DomainError(f"density matrix must be square and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("density matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_max(self) -> int:
        return self.data.shape[0] - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def __getitem__(self, idx):
        return self.data[idx]

    def __repr__(self) -> str:
        return f"DensityMatrix(n_max={self.n_max}, trace={self.trace().real:.6g})"

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def normalized(self) -> "DensityMatrix":
        tr = np.trace(self.data).real
        if tr <= 0:
            raise DomainError("cannot normalize a matrix with non-positive trace")
        return DensityMatrix(self.data / tr)

    def hermitized(self) -> "DensityMatrix":
        return DensityMatrix(0.5 * (self.data + self.data.conj().T))

    def padded(self, dim: int) -> "DensityMatrix":
        """Embed into a larger Fock space (zeros above the old cutoff)."""
        if dim < self.dim:
            raise DomainError(f"cannot pad dimension {self.dim} down to {dim}")
        out = np.zeros((dim, dim), dtype=complex)
        out[: self.dim, : self.dim] = self.data
        return DensityMatrix(out)

    def truncated(self, dim: int) -> "DensityMatrix":
        return DensityMatrix(self.data[:dim, :dim])

    def validate(self, herm_tol: float = 1e-12, trace_tol: float = 1e-12, psd_floor: float = -1e-10) -> None:
        """Raise :class:`DomainError` unless Hermitian, unit-trace and PSD."""
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > herm_tol:
            raise DomainError(f"density matrix not Hermitian (deviation {herm:.3g})")
        tr = np.trace(self.data)
        if abs(tr - 1.0) > trace_tol:
            raise DomainError(f"density matrix trace {tr.real:.15g} differs from 1")
        lam = np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T)).min()
        if lam < psd_floor:
            raise DomainError(f"density matrix not positive semidefinite (min eigenvalue {lam:.3g})")

    def is_valid(self, **kwargs) -> bool:
        try:
            self.validate(**kwargs)
        except DomainError:
            return False
        return True

    # constructors -----------------------------------------------------
    @classmethod
    def from_ket(cls, ket: Sequence[complex]) -> "DensityMatrix":
        v = np.asarray(ket, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def from_diagonal(cls, probs: Sequence[float]) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=complex)))

    @classmethod
    def fock(cls, n: int, n_max: int) -> "DensityMatrix":
        if not 0 <= n <= n_max:
            raise DomainError(f"Fock index {n} outside [0, {n_max}]")
        d = np.zeros(n_max + 1)
        d[n] = 1.0
        return cls.from_diagonal(d)

    @classmethod
    def vacuum(cls, n_max: int) -> "DensityMatrix":
        return cls.fock(0, n_max)

    @classmethod
    def maximally_mixed(cls, n_max: int) -> "DensityMatrix":
        return cls(np.eye(n_max + 1) / (n_max + 1))


def as_matrix(rho) -> np.ndarray:
    """Return the raw complex array of a :class:`DensityMatrix` or array-like."""
    if isinstance(rho, DensityMatrix):
        return rho.data
    return np.asarray(rho, dtype=complex)


# ---------------------------------------------------------------------------
# Quadrature samples
# ---------------------------------------------------------------------------


class QuadratureSample(NamedTuple):
    """One homodyne outcome."""

    theta: float
    q: float


@dataclass(frozen=True, eq=False)
class QuadratureData:
    """Columnar store of homodyne samples; iterates as :class:`QuadratureSample`.

    Phases are wrapped into ``[0, 2*pi)`` on construction.
    """

    theta: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).ravel()
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).ravel()
        if theta.shape != q.shape:
            raise DomainError(f"theta and q lengths differ ({theta.size} vs {q.size})")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(q))):
            raise DomainError("quadrature samples must be finite")
        theta = np.mod(theta, 2 * np.pi)
        # mod can return exactly 2*pi for tiny negative inputs
        theta[theta >= 2 * np.pi] = 0.0
        theta.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.q.size

    def __iter__(self) -> Iterator[QuadratureSample]:
        for t, x in zip(self.theta, self.q):
            yield QuadratureSample(float(t), float(x))

    def __getitem__(self, idx) -> QuadratureSample:
        return QuadratureSample(float(self.theta[idx]), float(self.q[idx]))

    def subset(self, mask_or_idx) -> "QuadratureData":
        return QuadratureData(self.theta[mask_or_idx], self.q[mask_or_idx], dict(self.meta))

    @classmethod
    def concatenate(cls, parts: Sequence["QuadratureData"]) -> "QuadratureData":
        return cls(np.concatenate([p.theta for p in parts]), np.concatenate([p.q for p in parts]))

    @classmethod
    def from_samples(cls, samples) -> "QuadratureData":
        if isinstance(samples, QuadratureData):
            return samples
        rows = list(samples)
        if not rows:
            return cls(np.empty(0), np.empty(0))
        arr = np.asarray([(s[0], s[1]) for s in rows], dtype=float)
        return cls(arr[:, 0], arr[:, 1])


def as_data(samples) -> QuadratureData:
    return QuadratureData.from_samples(samples)


# ---------------------------------------------------------------------------
# Wavefunctions
# ---------------------------------------------------------------------------


def _check_order(n: int) -> None:
    if n < 0:
        raise DomainError(f"Fock order must be non-negative, got {n}")
    if n > N_CAP:
        raise UnsupportedOrderError(f"Fock order {n} exceeds supported cap {N_CAP}")


def fock_wavefunctions(n_max: int, x) -> np.ndarray:
    """Stack of ``psi_0 .. psi_{n_max}`` evaluated at ``x``; shape ``(n_max+1,) + x.shape``.

    Uses the three-term recursion on normalized functions,
    ``psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}``.
    """
    _check_order(n_max)
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = _PI_QUARTER * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def fock_wavefunction(n: int, x):
    """Normalized oscillator eigenfunction ``psi_n(x)``."""
    val = fock_wavefunctions(n, x)[n]
    return float(val) if np.ndim(val) == 0 else val


def fock_wavefunction_derivatives(n_max: int, x, psi: np.ndarray | None = None) -> np.ndarray:
    """``psi_n'(x) = -x psi_n + sqrt(2n) psi_{n-1}`` for ``n = 0..n_max``."""
    x = np.asarray(x, dtype=float)
    if psi is None:
        psi = fock_wavefunctions(n_max, x)
    d = -x * psi
    for n in range(1, n_max + 1):
        d[n] += np.sqrt(2.0 * n) * psi[n - 1]
    return d


def quadrature_overlap(n: int, q, theta):
    """``<n|Q_theta, theta> = exp(i n theta) psi_n(q)``."""
    val = np.exp(1j * n * np.asarray(theta, dtype=float)) * fock_wavefunction(n, q)
    return complex(val) if np.ndim(val) == 0 else val


def quadrature_vectors(n_max: int, q, theta) -> np.ndarray:
    """Rows ``u_i[m] = <m|Q_i, theta_i>`` for paired arrays; shape ``(N, n_max+1)``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), q.shape)
    psi = fock_wavefunctions(n_max, q)  # (d, N)
    phase = np.exp(1j * np.outer(np.arange(n_max + 1), theta))
    return (psi * phase).T


# ---------------------------------------------------------------------------
# Loss channel
# ---------------------------------------------------------------------------


def _check_eta(eta: float, allow_zero: bool = True) -> float:
    eta = float(eta)
    lo_ok = eta >= 0.0 if allow_zero else eta > 0.0
    if not (lo_ok and eta <= 1.0) or not np.isfinite(eta):
        rng = "[0, 1]" if allow_zero else "(0, 1]"
        raise DomainError(f"efficiency eta={eta} outside {rng}")
    return eta


def loss_kraus(dim: int, eta: float) -> np.ndarray:
    """Kraus operators ``E_k`` of the binomial photon-loss channel; shape ``(dim, dim, dim)``.

    ``E_k |n> = sqrt(C(n, k) eta^(n-k) (1-eta)^k) |n-k>``.
    """
    eta = _check_eta(eta)
    ops = np.zeros((dim, dim, dim))
    n = np.arange(dim)
    for k in range(dim):
        src = n[k:]
        if eta == 1.0:
            amp = np.ones_like(src, dtype=float) if k == 0 else np.zeros_like(src, dtype=float)
        elif eta == 0.0:
            amp = (src == k).astype(float)
        else:
            logc = gammaln(src + 1) - gammaln(k + 1) - gammaln(src - k + 1)
            amp = np.exp(0.5 * (logc + (src - k) * np.log(eta) + k * np.log1p(-eta)))
        ops[k, src - k, src] = amp
    return ops


def bernoulli_loss(rho, eta: float) -> DensityMatrix:
    """Transmit ``rho`` through an absorber of transmissivity ``eta``.

    ``rho'_mn = sum_k sqrt(C(m+k,k) C(n+k,k)) eta^((m+n)/2) (1-eta)^k rho_{m+k,n+k}``;
    the sum runs up to the stored dimension.
    """
    eta = _check_eta(eta)
    mat = as_matrix(rho)
    if eta == 1.0:
        return DensityMatrix(mat)
    kraus = loss_kraus(mat.shape[0], eta)
    out = np.einsum("kab,bc,kdc->ad", kraus, mat, kraus)
    return DensityMatrix(out)


def bernoulli_loss_adjoint(op, eta: float) -> np.ndarray:
    """Heisenberg-picture loss map: ``Tr[adj(A) rho] = Tr[A loss(rho)]``."""
    eta = _check_eta(eta)
    a = np.asarray(op, dtype=complex)
    if eta == 1.0:
        return a.copy()
    kraus = loss_kraus(a.shape[0], eta)
    return np.einsum("kba,bc,kcd->ad", kraus, a, kraus)


# ---------------------------------------------------------------------------
# Marginals
# ---------------------------------------------------------------------------


def marginal(rho, q, theta, eta: float = 1.0):
    """Homodyne probability density ``pr(q, theta)`` for efficiency ``eta``."""
    eta = _check_eta(eta, allow_zero=False)
    mat = as_matrix(bernoulli_loss(rho, eta)) if eta < 1.0 else as_matrix(rho)
    q_arr = np.asarray(q, dtype=float)
    shape = np.broadcast(q_arr, np.asarray(theta)).shape
    qb = np.broadcast_to(q_arr, shape).ravel()
    tb = np.broadcast_to(np.asarray(theta, dtype=float), shape).ravel()
    u = quadrature_vectors(mat.shape[0] - 1, qb, tb)
    pr = np.real(np.einsum("im,mn,in->i", u.conj(), mat, u))
    pr = np.maximum(pr, 0.0).reshape(shape)
    return float(pr) if pr.ndim == 0 else pr


# ---------------------------------------------------------------------------
# Wigner functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Rectangular phase-space grid, endpoints inclusive."""

    q_min: float = -6.0
    q_max: float = 6.0
    p_min: float = -6.0
    p_max: float = 6.0
    nq: int = 121
    np: int = 121

    def __post_init__(self) -> None:
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise GridError("grid bounds must be strictly ordered")
        if self.nq < 2 or self.np < 2:
            raise GridError("grid needs at least two points per axis")
        vals = (self.q_min, self.q_max, self.p_min, self.p_max)
        if not all(np.isfinite(v) for v in vals):
            raise GridError("grid bounds must be finite")

    @classmethod
    def square(cls, half_width: float, n: int) -> "GridSpec":
        return cls(-half_width, half_width, -half_width, half_width, n, n)

    @property
    def q(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.nq)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.np)

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / (self.nq - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.np - 1)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Real Wigner values ``values[i, j] = W(q_i, p_j)`` on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.nq, self.grid.np):
            raise GridError(f"values shape {vals.shape} does not match grid ({self.grid.nq}, {self.grid.np})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def q(self) -> np.ndarray:
        return self.grid.q

    @property
    def p(self) -> np.ndarray:
        return self.grid.p

    def riemann_sum(self) -> float:
        return float(self.values.sum() * self.grid.dq * self.grid.dp)

    def at(self, q: float, p: float) -> float:
        """Bilinear interpolation of the grid at ``(q, p)``."""
        g = self.grid
        fi = (q - g.q_min) / g.dq
        fj = (p - g.p_min) / g.dp
        if not (0 <= fi <= g.nq - 1 and 0 <= fj <= g.np - 1):
            raise GridError(f"point ({q}, {p}) outside the grid")
        i0 = min(int(np.floor(fi)), g.nq - 2)
        j0 = min(int(np.floor(fj)), g.np - 2)
        a, b = fi - i0, fj - j0
        v = self.values
        return float(
            (1 - a) * (1 - b) * v[i0, j0] + a * (1 - b) * v[i0 + 1, j0]
            + (1 - a) * b * v[i0, j0 + 1] + a * b * v[i0 + 1, j0 + 1]
        )

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.q[i]), float(self.p[j])


def wigner_values(rho, q, p) -> np.ndarray:
    """Wigner function of ``rho`` at arbitrary (broadcast) points.

    Evaluated with the Laguerre-type ladder recursion over Fock pairs, so no
    factorials or raw Laguerre polynomials appear.
    """
    mat = as_matrix(rho)
    d = mat.shape[0]
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    alpha = (q + 1j * p) / np.sqrt(2.0)
    alpha, _ = np.broadcast_arrays(alpha, p)
    ladder = [np.empty(0)] * d
    ladder[0] = np.exp(-2.0 * np.abs(alpha) ** 2) / np.pi + 0j
    w = np.real(mat[0, 0]) * np.real(ladder[0])
    for n in range(1, d):
        ladder[n] = 2.0 * alpha * ladder[n - 1] / np.sqrt(n)
        w = w + 2.0 * np.real(mat[0, n] * ladder[n])
    for m in range(1, d):
        prev = ladder[m].copy()
        ladder[m] = (2.0 * np.conj(alpha) * prev - np.sqrt(m) * ladder[m - 1]) / np.sqrt(m)
        w = w + np.real(mat[m, m] * ladder[m])
        for n in range(m + 1, d):
            nxt = (2.0 * alpha * ladder[n - 1] - np.sqrt(m) * prev) / np.sqrt(n)
            prev = ladder[n].copy()
            ladder[n] = nxt
            w = w + 2.0 * np.real(mat[m, n] * ladder[n])
    return w


def wigner(rho, grid: GridSpec | None = None) -> WignerGrid:
    """Wigner function of ``rho`` tabulated on ``grid``.

    A grid with ``|q|, |p| >= 2 sqrt(n_max) + 2`` is recommended so the state
    is contained.
    """
    grid = grid or GridSpec()
    qq, pp = np.meshgrid(grid.q, grid.p, indexing="ij")
    return WignerGrid(grid, wigner_values(rho, qq, pp))


def parity_wigner_origin(rho) -> float:
    """``W(0,0) = (1/pi) sum_n (-1)^n rho_nn``."""
    diag = np.real(np.diag(as_matrix(rho)))
    return float(np.sum(diag * (-1.0) ** np.arange(diag.size)) / np.pi)


def wigner_convolve_loss(w: WignerGrid, eta: float) -> WignerGrid:
    """Detected Wigner function for efficiency ``eta`` by Gaussian smoothing.

    ``W_det(Q,P) = 1/(pi(1-eta)) int W(Q',P') exp(-[(Q-sqrt(eta)Q')^2 + (P-sqrt(eta)P')^2]/(1-eta))``,
    discretized on the input grid (the state must be contained in it).
    """
    eta = float(eta)
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"efficiency eta={eta} outside (0, 1]")
    if eta == 1.0:
        return w
    g = w.grid
    width = np.sqrt(1.0 - eta)
    if max(g.dq, g.dp) >= width:
        raise GridError(f"grid spacing {max(g.dq, g.dp):.3g} too coarse for kernel width {width:.3g}")
    s = np.sqrt(eta)
    kq = np.exp(-((g.q[:, None] - s * g.q[None, :]) ** 2) / (1.0 - eta))
    kp = np.exp(-((g.p[:, None] - s * g.p[None, :]) ** 2) / (1.0 - eta))
    out = kq @ w.values @ kp.T * (g.dq * g.dp / (np.pi * (1.0 - eta)))
    return WignerGrid(g, out)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _common_dim(a, b) -> tuple[np.ndarray, np.ndarray]:
    ma, mb = as_matrix(a), as_matrix(b)
    if ma.shape != mb.shape:
        raise DomainError(f"dimension mismatch: {ma.shape[0]} vs {mb.shape[0]}")
    return ma, mb


def _psd_factor(mat: np.ndarray) -> np.ndarray:
    """``F`` with ``F F^dag = mat``, dropping eigenvalues at round-off level."""
    lam, vec = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    keep = lam > 1e-13 * max(lam.max(), 0.0)
    return vec[:, keep] * np.sqrt(lam[keep])


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2``.

    Evaluated as the squared nuclear norm of ``F_b^dag F_a`` for factors
    ``a = F_a F_a^dag``, which stays accurate for pure states.
    """
    ma, mb = _common_dim(a, b)
    fa, fb = _psd_factor(ma), _psd_factor(mb)
    if fa.shape[1] == 0 or fb.shape[1] == 0:
        return 0.0
    sv = np.linalg.svd(fb.conj().T @ fa, compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(a, b) -> float:
    ma, mb = _common_dim(a, b)
    diff = ma - mb
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def pad_to_common(a, b) -> tuple[DensityMatrix, DensityMatrix]:
    """Zero-pad two states to the larger of their dimensions."""
    da, db = DensityMatrix(as_matrix(a)), DensityMatrix(as_matrix(b))
    d = max(da.dim, db.dim)
    return da.padded(d), db.padded(d)
