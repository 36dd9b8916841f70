"""Phase-space tomography of transverse spatial modes by parity measurement.

A :class:`SpatialMode` is a complex field on a centred grid with an odd number
of points per axis, so the origin is a grid node and reflection ``x -> -x``
maps nodes to nodes. The Wigner value at ``(x, kx)`` is the expected parity
of the mode after shifting it by ``-x`` and tilting it by ``-kx``, i.e.
``(1/pi) (int |E_even|^2 - int |E_odd|^2)``.

Wigner convention: ``W(x, k) = (1/pi) int E*(x+s) E(x-s) exp(2iks) ds``,
normalized to ``int int W dx dk = 1``. Paraxial propagation over ``z`` shears
it: ``W_z(x, k) = W_0(x - k z / k0, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ClippingError, DomainError, GridError
from .fock import GridSpec, QuadratureData, WignerGrid

#: Fraction of the grid (per side) treated as the edge band in clipping checks.
EDGE_FRACTION = 0.05
#: Largest fraction of the energy allowed in the edge band.
EDGE_TOL = 1e-3


def _centered_axis(n: int, pitch: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * pitch


def _wavenumbers(n: int, pitch: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=pitch)


@dataclass(frozen=True, eq=False)
class SpatialMode:
    """Transverse field ``E`` on a centred 1D or 2D grid.

    ``pitch`` is the grid step (same on both axes) and ``k0`` the reference
    wavenumber used by :func:`propagate`.
    """

    field: np.ndarray
    pitch: float
    k0: float = 1.0

    def __post_init__(self) -> None:
        f = np.array(self.field, dtype=complex)
        if f.ndim not in (1, 2):
            raise GridError("spatial modes are 1D or 2D")
        if any(n % 2 == 0 for n in f.shape):
            raise GridError(f"grid needs an odd number of points per axis, got {f.shape}")
        if not (self.pitch > 0 and np.isfinite(self.pitch)):
            raise GridError("pitch must be positive")
        if not self.k0 > 0:
            raise DomainError("k0 must be positive")
        if not np.all(np.isfinite(f)):
            raise DomainError("field values must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "field", f)

    @property
    def dims(self) -> int:
        return self.field.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.field.shape

    @property
    def x(self) -> np.ndarray:
        return _centered_axis(self.shape[0], self.pitch)

    @property
    def y(self) -> np.ndarray:
        if self.dims != 2:
            raise GridError("1D mode has no y axis")
        return _centered_axis(self.shape[1], self.pitch)

    @property
    def cell(self) -> float:
        return self.pitch**self.dims

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.field) ** 2) * self.cell)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.field) ** 2

    def normalized(self) -> "SpatialMode":
        n = self.norm
        if n <= 0:
            raise DomainError("cannot normalize a zero field")
        return self.replace(self.field / np.sqrt(n))

    def replace(self, field: np.ndarray) -> "SpatialMode":
        return SpatialMode(field, self.pitch, self.k0)

    @classmethod
    def from_function(cls, func, n: int, pitch: float, k0: float = 1.0, dims: int = 1) -> "SpatialMode":
        """Sample ``func(x)`` (or ``func(x, y)``) on an ``n``-point centred grid and normalize."""
        ax = _centered_axis(n, pitch)
        if dims == 1:
            vals = func(ax)
        elif dims == 2:
            xx, yy = np.meshgrid(ax, ax, indexing="ij")
            vals = func(xx, yy)
        else:
            raise GridError("dims must be 1 or 2")
        return cls(vals, pitch, k0).normalized()

    @classmethod
    def gaussian(cls, n: int, pitch: float, sigma: float = 1.0, x0: float = 0.0, kx0: float = 0.0,
                 k0: float = 1.0) -> "SpatialMode":
        """1D Gaussian ``exp(-(x-x0)^2/(2 sigma^2) + i kx0 x)``; intensity rms width ``sigma/sqrt(2)``."""
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        return cls.from_function(lambda x: np.exp(-((x - x0) ** 2) / (2 * sigma**2) + 1j * kx0 * x), n, pitch, k0)


def _edge_fraction(field: np.ndarray) -> float:
    inten = np.abs(field) ** 2
    total = inten.sum()
    if total == 0:
        return 0.0
    mask = np.zeros(field.shape, dtype=bool)
    for ax, n in enumerate(field.shape):
        band = max(1, int(np.ceil(EDGE_FRACTION * n)))
        idx = [slice(None)] * field.ndim
        idx[ax] = slice(0, band)
        mask[tuple(idx)] = True
        idx[ax] = slice(n - band, n)
        mask[tuple(idx)] = True
    return float(inten[mask].sum() / total)


def _check_edges(field: np.ndarray, what: str) -> None:
    frac = _edge_fraction(field)
    if frac > EDGE_TOL:
        raise ClippingError(f"{what}: {frac:.3g} of the energy reaches the grid edge; enlarge the grid")


def propagate(mode: SpatialMode, z: float) -> SpatialMode:
    """Paraxial free-space propagation over distance ``z``.

    The transverse spectrum is multiplied by ``exp(-i k^2 z / (2 k0))``. The
    step is exactly unitary on the grid; energy that would leave the window
    wraps around instead, so an edge-energy check guards against it.
    """
    if not np.isfinite(z):
        raise DomainError("z must be finite")
    if z == 0:
        return mode
    spec = np.fft.fftn(mode.field)
    k2 = np.zeros(mode.shape)
    for ax, n in enumerate(mode.shape):
        k = _wavenumbers(n, mode.pitch)
        shape = [1] * mode.dims
        shape[ax] = n
        k2 = k2 + (k**2).reshape(shape)
    out = np.fft.ifftn(spec * np.exp(-1j * k2 * z / (2.0 * mode.k0)))
    _check_edges(out, f"propagation over z={z:g}")
    return mode.replace(out)


def _as_pair(v, dims: int) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dims) if dims == 1 else np.array([arr[0], 0.0])
    if arr.size != dims:
        raise DomainError(f"expected {dims} components, got {arr.size}")
    return tuple(float(a) for a in arr)


def _shift_axis(arr: np.ndarray, shift: float, axis: int, pitch: float) -> np.ndarray:
    """Spectral (sub-pixel) translation ``f(x) -> f(x - shift)`` along ``axis``."""
    if shift == 0.0:
        return arr
    n = arr.shape[axis]
    k = _wavenumbers(n, pitch)
    shape = [1] * arr.ndim
    shape[axis] = n
    ramp = np.exp(-1j * k * shift).reshape(shape)
    # the Nyquist bin does not exist for odd n, so the ramp is Hermitian-consistent
    return np.fft.ifft(np.fft.fft(arr, axis=axis) * ramp, axis=axis)


def _tilt_axis(arr: np.ndarray, kx: float, axis: int, pitch: float) -> np.ndarray:
    if kx == 0.0:
        return arr
    n = arr.shape[axis]
    shape = [1] * arr.ndim
    shape[axis] = n
    return arr * np.exp(1j * kx * _centered_axis(n, pitch)).reshape(shape)


def _check_tilt(mode_field: np.ndarray, kx: Sequence[float], pitch: float) -> None:
    nyq = np.pi / pitch
    if any(abs(k) >= nyq for k in kx):
        raise ClippingError(f"tilt exceeds the grid Nyquist wavenumber {nyq:.4g}")


def displace(mode: SpatialMode, x0, kx0, check: bool = True) -> SpatialMode:
    """``E'(x) = E(x - x0) exp(i kx0 x)``; 2D modes take ``(x0, y0)``, ``(kx0, ky0)``."""
    shifts = _as_pair(x0, mode.dims)
    tilts = _as_pair(kx0, mode.dims)
    _check_tilt(mode.field, tilts, mode.pitch)
    f = mode.field
    for ax in range(mode.dims):
        f = _shift_axis(f, shifts[ax], ax, mode.pitch)
        f = _tilt_axis(f, tilts[ax], ax, mode.pitch)
    if check and any(s != 0 for s in shifts):
        _check_edges(f, "displacement")
    return mode.replace(f)


def centroid(mode: SpatialMode) -> np.ndarray:
    """Intensity-weighted mean position per axis."""
    inten = mode.intensity
    total = inten.sum()
    out = []
    for ax in range(mode.dims):
        coords = _centered_axis(mode.shape[ax], mode.pitch)
        other = tuple(a for a in range(mode.dims) if a != ax)
        prof = inten.sum(axis=other) if other else inten
        out.append(float(prof @ coords / total))
    return np.array(out)


def parity_split(mode: SpatialMode) -> tuple[np.ndarray, np.ndarray]:
    """Even and odd parts about the grid centre (reflection of every axis)."""
    flipped = mode.field[(slice(None, None, -1),) * mode.dims]
    return 0.5 * (mode.field + flipped), 0.5 * (mode.field - flipped)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Field correlation ``rho(x1, x2) = <E(x1) E*(x2)>`` of a 1D ensemble.

    Normalized so that ``sum(diag) * pitch = 1``; ``populations`` gives the
    eigenvalues as mode weights (summing to one).
    """

    data: np.ndarray
    pitch: float
    k0: float = 1.0

    def __post_init__(self) -> None:
        m = np.array(self.data, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GridError("correlation matrix must be square")
        if m.shape[0] % 2 == 0:
            raise GridError("grid needs an odd number of points")
        if not self.pitch > 0:
            raise GridError("pitch must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "data", m)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def x(self) -> np.ndarray:
        return _centered_axis(self.n, self.pitch)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real * self.pitch)

    def populations(self) -> np.ndarray:
        return np.sort(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T)) * self.pitch)[::-1]

    @property
    def purity(self) -> float:
        return float(np.real(np.sum(self.data * self.data.T)) * self.pitch**2)

    def validate(self, tol: float = 1e-10) -> None:
        if np.max(np.abs(self.data - self.data.conj().T)) > tol * max(1.0, np.max(np.abs(self.data))):
            raise DomainError("correlation matrix is not Hermitian")
        if abs(self.trace - 1.0) > 1e-9:
            raise DomainError(f"correlation matrix trace is {self.trace:.12g}, expected 1")
        if self.populations().min() < -tol:
            raise DomainError("correlation matrix is not positive semidefinite")

    @classmethod
    def from_mode(cls, mode: SpatialMode) -> "CorrelationMatrix":
        if mode.dims != 1:
            raise GridError("correlation matrices are supported for 1D modes only")
        m = mode.normalized()
        return cls(np.outer(m.field, m.field.conj()), m.pitch, m.k0)


def ensemble_correlation(ensemble: Iterable[tuple[float, SpatialMode]]) -> CorrelationMatrix:
    """``rho = sum_k w_k E_k(x1) E_k*(x2)`` over normalized 1D modes sharing one grid."""
    items = list(ensemble)
    if not items:
        raise DomainError("empty ensemble")
    weights = np.array([w for w, _ in items], dtype=float)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise DomainError("ensemble weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise DomainError(f"ensemble weights sum to {weights.sum():.12g}, expected 1")
    first = items[0][1]
    if first.dims != 1:
        raise GridError("correlation matrices are supported for 1D modes only")
    acc = np.zeros((first.shape[0],) * 2, dtype=complex)
    for w, mode in items:
        if mode.shape != first.shape or mode.pitch != first.pitch:
            raise GridError("ensemble modes must share one grid")
        m = mode.normalized()
        acc += w * np.outer(m.field, m.field.conj())
    return CorrelationMatrix(0.5 * (acc + acc.conj().T), first.pitch, first.k0)


def _displace_matrix(rho: CorrelationMatrix, x0: float, kx0: float) -> np.ndarray:
    """``D rho D^dag`` for the shift/tilt operator ``D`` of :func:`displace`."""
    _check_tilt(rho.data, (kx0,), rho.pitch)
    a = _tilt_axis(_shift_axis(rho.data, x0, 0, rho.pitch), kx0, 0, rho.pitch)
    b = _tilt_axis(_shift_axis(a.conj().T, x0, 0, rho.pitch), kx0, 0, rho.pitch)
    return b.conj().T


def wigner_point(state, x, kx) -> float:
    """Parity Wigner value at ``(x, kx)`` of a mode or correlation matrix.

    Displaces by ``(-x, -kx)`` and returns ``(1/pi^dims)`` times the expected
    parity about the origin. The mode is normalized first.
    """
    if isinstance(state, CorrelationMatrix):
        xs, ks = _as_pair(x, 1), _as_pair(kx, 1)
        shifted = _displace_matrix(state, -xs[0], -ks[0])
        _check_edges(np.sqrt(np.abs(np.diagonal(shifted))), "displacement")
        anti = np.diagonal(shifted[:, ::-1])
        w = float(np.real(anti.sum()) * state.pitch / np.pi)
    elif isinstance(state, SpatialMode):
        mode = state.normalized()
        xs, ks = _as_pair(x, mode.dims), _as_pair(kx, mode.dims)
        moved = displace(mode, tuple(-v for v in xs), tuple(-v for v in ks))
        even, odd = parity_split(moved)
        diff = np.sum(np.abs(even) ** 2) - np.sum(np.abs(odd) ** 2)
        w = float(diff * mode.cell / np.pi**mode.dims)
    else:
        raise DomainError("wigner_point needs a SpatialMode or CorrelationMatrix")
    bound = 1.0 / np.pi ** (state.dims if isinstance(state, SpatialMode) else 1)
    assert abs(w) <= bound * (1 + 1e-9) + 1e-12, "parity expectation out of range"
    return w


def wigner_scan(state, x_grid, kx_grid) -> WignerGrid:
    """Wigner values of a 1D mode or correlation matrix on ``x_grid`` x ``kx_grid``.

    Equivalent to calling :func:`wigner_point` at every node; for each ``x``
    the anti-diagonal ``g(s) = rho_x(s, -s)`` of the shifted state is
    transformed against ``exp(-2i k s)``.
    """
    xg = np.asarray(x_grid, dtype=float)
    kg = np.asarray(kx_grid, dtype=float)
    if xg.ndim != 1 or kg.ndim != 1 or xg.size < 2 or kg.size < 2:
        raise GridError("scan axes must be 1D with at least two points")
    if np.any(np.diff(xg) <= 0) or np.any(np.diff(kg) <= 0):
        raise GridError("scan axes must be strictly increasing")
    if not (np.allclose(np.diff(xg), xg[1] - xg[0]) and np.allclose(np.diff(kg), kg[1] - kg[0])):
        raise GridError("scan axes must be uniformly spaced")
    if isinstance(state, SpatialMode):
        if state.dims != 1:
            raise GridError("scans are supported for 1D modes")
        mode = state.normalized()
        pitch, n = mode.pitch, mode.shape[0]
    elif isinstance(state, CorrelationMatrix):
        pitch, n = state.pitch, state.n
    else:
        raise DomainError("wigner_scan needs a SpatialMode or CorrelationMatrix")
    _check_tilt(None, (float(np.max(np.abs(kg))),), pitch)
    s = _centered_axis(n, pitch)
    phase = np.exp(-2j * np.outer(s, kg))  # (n, nk)
    out = np.empty((xg.size, kg.size))
    for i, x in enumerate(xg):
        if isinstance(state, SpatialMode):
            f = _shift_axis(mode.field, -x, 0, pitch)
            _check_edges(f, "displacement")
            g = f * f[::-1].conj()
        else:
            m = _displace_matrix(state, -x, 0.0)
            _check_edges(np.sqrt(np.abs(np.diagonal(m))), "displacement")
            g = np.diagonal(m[:, ::-1])
        out[i] = np.real(g @ phase) * pitch / np.pi
    grid = GridSpec(float(xg[0]), float(xg[-1]), float(kg[0]), float(kg[-1]), xg.size, kg.size)
    return WignerGrid(grid, out)


def gaussian_wigner(x, kx, sigma: float = 1.0):
    """Wigner function of the 1D Gaussian mode ``exp(-x^2 / (2 sigma^2))``."""
    x = np.asarray(x, dtype=float)
    kx = np.asarray(kx, dtype=float)
    return np.exp(-(x**2) / sigma**2 - kx**2 * sigma**2) / np.pi


# ---------------------------------------------------------------------------
# Intensity-profile tomography through the radon module
# ---------------------------------------------------------------------------


def profiles_to_samples(profiles, x, z, scale: float, k0: float) -> tuple[QuadratureData, np.ndarray]:
    """Map intensity profiles ``I_j(x)`` recorded at distances ``z_j`` to weighted homodyne data.

    In units ``u = x/scale``, ``p = k*scale`` free propagation is the shear
    ``u -> u - t p`` with ``t = z/(k0 scale^2)``, so the profile is the
    quadrature marginal at ``theta = -arctan t`` with ``q = u cos(theta)``.
    Every profile is normalized to unit mass so each phase carries equal weight.
    """
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    x = np.asarray(x, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if profiles.shape != (z.size, x.size):
        raise DomainError("profiles must have shape (len(z), len(x))")
    if not scale > 0:
        raise DomainError("scale must be positive")
    theta = -np.arctan(z / (k0 * scale**2))
    thetas, qs, ws = [], [], []
    for j in range(z.size):
        mass = profiles[j].sum()
        if mass <= 0:
            raise DomainError(f"profile {j} carries no intensity")
        thetas.append(np.full(x.size, theta[j]))
        qs.append(x / scale * np.cos(theta[j]))
        ws.append(profiles[j] / mass)
    return QuadratureData(np.concatenate(thetas), np.concatenate(qs)), np.concatenate(ws)


def propagation_tomography(mode: SpatialMode, n_profiles: int = 36, scale: float = 1.0, cfg=None) -> WignerGrid:
    """Wigner function in ``(x/scale, kx*scale)`` units from propagated intensity profiles.

    Profiles are taken at ``z = -k0 scale^2 tan(theta)`` for ``n_profiles``
    phases evenly spread over ``(-pi/2, pi/2)`` and reconstructed by
    weighted back-projection.
    """
    from .radon import RadonConfig, reconstruct

    if mode.dims != 1:
        raise GridError("propagation tomography is 1D")
    if n_profiles < 4:
        raise DomainError("need at least 4 profiles")
    theta = -0.5 * np.pi + np.pi * (np.arange(n_profiles) + 0.5) / n_profiles
    z = -mode.k0 * scale**2 * np.tan(theta)
    profiles = np.array([propagate(mode, zj).intensity for zj in z])
    data, weights = profiles_to_samples(profiles, mode.x, z, scale, mode.k0)
    keep = weights > 0
    return reconstruct(data.subset(keep), cfg or RadonConfig(), weights=weights[keep])
