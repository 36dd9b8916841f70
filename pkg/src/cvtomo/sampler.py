"""Monte Carlo homodyne data from a known state.

Each record is produced by (1) substituting the vacuum for the target with
probability ``1 - xi`` (mode mismatch), (2) applying the binomial loss channel
at the effective efficiency, (3) drawing the phase from the schedule and
(4) drawing ``q`` by inverse-CDF from the phase-dependent marginal.

Loss leaves the vacuum unchanged and is linear, so the order of steps (1)
and (2) does not affect the output distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .errors import DomainError
from .fock import DensityMatrix, QuadratureData, as_matrix, bernoulli_loss, fock_wavefunctions

#: Points of the inverse-CDF grid.
CDF_POINTS = 4096

SCHEDULES = ("uniform_random", "swept", "fixed")


@dataclass(frozen=True)
class AcquisitionPlan:
    """Parameters of a simulated homodyne run.

    ``phase_schedule`` is ``uniform_random`` (independent uniform phases),
    ``swept`` (``n_phases`` equally spaced phases over ``[0, 2pi)``, visited in
    contiguous blocks) or ``fixed`` (the listed ``phases``, in contiguous blocks).
    """

    n_samples: int
    seed: int
    phase_schedule: str = "uniform_random"
    n_phases: int = 12
    phases: tuple[float, ...] = ()
    eta: float = 1.0
    snr: float | None = None
    xi: float = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.n_samples, bool) or int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise DomainError(f"n_samples must be a positive integer, got {self.n_samples}")
        if self.seed is None or not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.phase_schedule not in SCHEDULES:
            raise DomainError(f"unknown phase schedule {self.phase_schedule!r}")
        if self.phase_schedule == "swept" and self.n_phases < 1:
            raise DomainError("swept schedule needs n_phases >= 1")
        if self.phase_schedule == "fixed" and len(self.phases) == 0:
            raise DomainError("fixed schedule needs at least one phase")
        if not (0.0 < self.eta <= 1.0):
            raise DomainError(f"eta={self.eta} outside (0, 1]")
        if not (0.0 < self.xi <= 1.0):
            raise DomainError(f"xi={self.xi} outside (0, 1]")
        effective_efficiency(self.eta, self.snr)
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))

    @property
    def efficiency(self) -> float:
        return effective_efficiency(self.eta, self.snr)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phases"] = list(self.phases)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AcquisitionPlan":
        d = dict(d)
        d["phases"] = tuple(d.get("phases", ()))
        return cls(**d)


def effective_efficiency(eta: float, snr: float | None = None) -> float:
    """Detector efficiency with electronic noise folded in as a loss of ``1/snr``."""
    if snr is None:
        return float(eta)
    if not snr > 1.0:
        raise DomainError(f"signal-to-noise ratio must exceed 1, got {snr}")
    return float(eta) * (1.0 - 1.0 / float(snr))


def detected_state(rho, plan: AcquisitionPlan) -> DensityMatrix:
    """The state whose ideal marginals the simulated data follow."""
    mat = as_matrix(rho)
    if plan.xi < 1.0:
        vac = np.zeros_like(mat)
        vac[0, 0] = 1.0
        mat = plan.xi * mat + (1.0 - plan.xi) * vac
    return bernoulli_loss(mat, plan.efficiency)


def q_cut(n_max: int) -> float:
    return 2.0 * np.sqrt(n_max) + 4.0


def _phases(plan: AcquisitionPlan, rng: np.random.Generator) -> np.ndarray:
    n = plan.n_samples
    if plan.phase_schedule == "uniform_random":
        return rng.uniform(0.0, 2.0 * np.pi, size=n)
    if plan.phase_schedule == "swept":
        levels = 2.0 * np.pi * np.arange(plan.n_phases) / plan.n_phases
    else:
        levels = np.asarray(plan.phases, dtype=float)
    block = (np.arange(n) * len(levels)) // n
    return levels[block]


class MarginalTable:
    """Phase-resolved cumulative distribution of a state's quadrature.

    The density at phase ``theta`` is ``sum_d exp(-i d theta) c_d(q)`` with
    ``c_d(q) = sum_{m-n=d} rho_mn psi_m(q) psi_n(q)``; cumulative tables of the
    harmonics allow an exact trapezoid CDF for every sample's own phase.
    """

    def __init__(self, rho, n_points: int = CDF_POINTS, cut: float | None = None):
        mat = as_matrix(rho)
        d = mat.shape[0]
        self.cut = q_cut(d - 1) if cut is None else float(cut)
        self.grid = np.linspace(-self.cut, self.cut, n_points)
        h = self.grid[1] - self.grid[0]
        psi = fock_wavefunctions(d - 1, self.grid)
        self.orders = np.arange(0, d)
        harmonics = np.zeros((d, n_points), dtype=complex)
        for k in range(d):
            # order k collects rho_{n+k, n}; negative orders are conjugates
            harmonics[k] = np.einsum("n,nx,nx->x", np.diagonal(mat, offset=-k), psi[k:], psi[: d - k])
        zero = np.zeros((d, 1), dtype=complex)
        steps = 0.5 * h * (harmonics[:, 1:] + harmonics[:, :-1])
        self.cumulative = np.concatenate([zero, np.cumsum(steps, axis=1)], axis=1)

    def cdf_at(self, idx: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """CDF at grid indices ``idx`` for phases ``theta`` (same shape)."""
        out = np.real(self.cumulative[0, idx])
        for k in self.orders[1:]:
            out = out + 2.0 * np.real(np.exp(-1j * k * theta) * self.cumulative[k, idx])
        return out

    def draw(self, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of uniforms ``u`` at phases ``theta``."""
        theta = np.asarray(theta, dtype=float)
        last = np.full(theta.shape, self.grid.size - 1)
        target = np.asarray(u, dtype=float) * self.cdf_at(last, theta)
        lo = np.zeros(theta.shape, dtype=int)
        hi = last.copy()
        # bisection for the cell with C[lo] <= target < C[hi]
        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            below = self.cdf_at(mid, theta) <= target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        c_lo = self.cdf_at(lo, theta)
        c_hi = self.cdf_at(hi, theta)
        span = c_hi - c_lo
        frac = np.where(span > 0, (target - c_lo) / np.where(span > 0, span, 1.0), 0.5)
        frac = np.clip(frac, 0.0, 1.0)
        return self.grid[lo] + frac * (self.grid[hi] - self.grid[lo])


def sample(rho, plan: AcquisitionPlan) -> QuadratureData:
    """Simulate ``plan.n_samples`` homodyne records of ``rho``; deterministic in ``plan.seed``."""
    state = detected_state(rho, plan)
    rng = np.random.default_rng(int(plan.seed))
    theta = _phases(plan, rng)
    u = rng.random(plan.n_samples)
    table = MarginalTable(state)
    q = table.draw(theta, u)
    return QuadratureData(theta, q, {"plan": plan.to_dict()})


def sample_many(rho, plan: AcquisitionPlan, seeds: Sequence[int]) -> list[QuadratureData]:
    """Independent data sets sharing one marginal table."""
    state = detected_state(rho, plan)
    table = MarginalTable(state)
    out = []
    for s in seeds:
        rng = np.random.default_rng(int(s))
        p = AcquisitionPlan.from_dict({**plan.to_dict(), "seed": int(s)})
        theta = _phases(p, rng)
        u = rng.random(p.n_samples)
        out.append(QuadratureData(theta, table.draw(theta, u), {"plan": p.to_dict()}))
    return out
