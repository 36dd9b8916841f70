"""Filtered back-projection of homodyne data onto a phase-space grid."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fock import GridSpec, QuadratureData, WignerGrid, as_data

#: Default low-pass cutoff of the back-projection kernel.
DEFAULT_KC = 4.0
_SERIES_CUT = 1e-2
_CHUNK = 1 << 21


def kernel(x, k_c: float):
    """Band-limited back-projection kernel ``1/2 int_{-kc}^{kc} |xi| exp(i xi x) dxi``.

    Closed form ``(cos(kc x) - 1)/x^2 + kc sin(kc x)/x``; a Taylor series is
    used for ``|kc x| < 1e-2`` where the closed form cancels.
    """
    if not k_c > 0:
        raise DomainError(f"cutoff k_c must be positive, got {k_c}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    u = k_c * x
    small = np.abs(u) < _SERIES_CUT
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / x
        out = np.cos(u)
        out -= 1.0
        out *= inv
        out += k_c * np.sin(u)
        out *= inv
    if small.any():
        u2 = u[small] ** 2
        out[small] = k_c**2 * (0.5 - u2 / 8.0 + u2 * u2 / 144.0 - u2**3 / 5760.0)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class RadonConfig:
    k_c: float = DEFAULT_KC
    grid: GridSpec = field(default_factory=lambda: GridSpec.square(4.0, 81))
    binning: str = "direct_sum"
    n_phase_bins: int = 64
    n_q_bins: int = 256

    def __post_init__(self) -> None:
        if not self.k_c > 0:
            raise DomainError(f"k_c must be positive, got {self.k_c}")
        if self.binning not in ("direct_sum", "binned"):
            raise DomainError(f"unknown binning mode {self.binning!r}")
        if self.binning == "binned" and (self.n_phase_bins < 8 or self.n_q_bins < 8):
            raise DomainError("binned mode needs at least 8 bins per axis")


def backproject(theta, q, weights, grid: GridSpec, k_c: float) -> np.ndarray:
    """``W(Q,P) = (1/2pi) sum_i w_i K(Q cos th_i + P sin th_i - q_i) / sum_i w_i``.

    The ``1/(2pi)`` prefactor is the sample-average form of the back-projection
    integral over phases uniformly covering a half or full turn. The
    oscillating part of the kernel is formed from separable phase factors
    ``exp(i kc (Q cos th - q)) exp(i kc P sin th)``.
    """
    if not k_c > 0:
        raise DomainError(f"cutoff k_c must be positive, got {k_c}")
    theta = np.asarray(theta, dtype=float)
    q = np.asarray(q, dtype=float)
    w = np.ones_like(q) if weights is None else np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise DomainError("weights must have a positive sum")
    gq, gp = grid.q, grid.p
    acc = np.zeros((gq.size, gp.size))
    cos, sin = np.cos(theta), np.sin(theta)
    step = max(1, _CHUNK // (gq.size * gp.size))
    for s in range(0, q.size, step):
        sl = slice(s, s + step)
        xa = np.outer(cos[sl], gq) - q[sl, None]
        xb = np.outer(sin[sl], gp)
        x = xa[:, :, None] + xb[:, None, :]
        ph = np.exp(1j * k_c * xa)[:, :, None] * np.exp(1j * k_c * xb)[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / x
            val = (ph.real - 1.0) * inv
            val += k_c * ph.imag
            val *= inv
        small = np.abs(k_c * x) < _SERIES_CUT
        if small.any():
            val[small] = kernel(x[small], k_c)
        acc += np.tensordot(w[sl], val, axes=1)
    return acc / (2.0 * np.pi * total)


def _binned(data: QuadratureData, cfg: RadonConfig):
    qmax = float(np.max(np.abs(data.q))) * (1 + 1e-9) + 1e-12
    t_edges = np.linspace(0.0, 2.0 * np.pi, cfg.n_phase_bins + 1)
    q_edges = np.linspace(-qmax, qmax, cfg.n_q_bins + 1)
    counts, _, _ = np.histogram2d(data.theta, data.q, bins=(t_edges, q_edges))
    tc = 0.5 * (t_edges[1:] + t_edges[:-1])
    qc = 0.5 * (q_edges[1:] + q_edges[:-1])
    tt, qq = np.meshgrid(tc, qc, indexing="ij")
    keep = counts > 0
    return tt[keep], qq[keep], counts[keep]


def reconstruct(samples, cfg: RadonConfig | None = None, weights=None) -> WignerGrid:
    """Detected Wigner function from homodyne pairs by filtered back-projection.

    ``direct_sum`` sums the kernel over every acquired pair; ``binned`` first
    histograms the data in ``(theta, q)`` and back-projects the bin centres
    weighted by their counts. Optional per-sample ``weights`` (direct mode)
    support pre-histogrammed or intensity data.
    """
    cfg = cfg or RadonConfig()
    data = as_data(samples)
    if len(data) == 0:
        raise DomainError("cannot reconstruct from an empty sample list")
    if weights is None and len(data) < 1000:
        warnings.warn(f"only {len(data)} samples; back-projection will be noisy", stacklevel=2)
    if cfg.binning == "binned":
        if weights is not None:
            raise DomainError("weights are only supported in direct_sum mode")
        t, q, w = _binned(data, cfg)
        values = backproject(t, q, w, cfg.grid, cfg.k_c)
    else:
        values = backproject(data.theta, data.q, weights, cfg.grid, cfg.k_c)
    return WignerGrid(cfg.grid, values)
