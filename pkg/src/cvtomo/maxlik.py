"""Iterative maximum-likelihood reconstruction from homodyne data.

Each homodyne outcome ``(q, theta)`` is represented by a POVM element
``Pi(q, theta)``. For efficiency ``eta < 1`` the element is the
Heisenberg-picture image of the ideal projector under the binomial loss
channel, stored as a sum of rank-one terms ``sum_k |w_k><w_k|`` with
``w_k = E_k^dag |q_theta>``. The iteration operator is
``R = (1/N) sum_i Pi_i / pr_i`` and the update is
``rho <- N[(I + eps R) rho (I + eps R)]`` (``eps = inf`` gives ``R rho R``).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, IllConditionedError, SingularDataError
from .fock import (
    DensityMatrix,
    QuadratureData,
    as_data,
    as_matrix,
    bernoulli_loss_adjoint,
    fock_wavefunctions,
    loss_kraus,
    quadrature_vectors,
)

log = logging.getLogger(__name__)

#: Floor applied to per-sample probabilities.
PROB_FLOOR = 1e-300
#: Condition number of G above which a warning is issued / an error raised.
G_WARN_COND = 1e3
G_MAX_COND = 1e12


@dataclass(frozen=True)
class MaxlikConfig:
    n_max: int = 10
    max_iters: int = 2000
    epsilon: float = 1.0
    stop_tol: float = 1e-9
    stop_window: int = 10
    eta: float = 1.0
    bias_correction: bool = False
    adapt_epsilon: bool = True

    def __post_init__(self) -> None:
        if self.n_max < 0:
            raise DomainError("n_max must be non-negative")
        if self.max_iters < 1:
            raise DomainError("max_iters must be positive")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive or inf, got {self.epsilon}")
        if not self.stop_tol > 0:
            raise DomainError("stop_tol must be positive")
        if not (0.0 < self.eta <= 1.0):
            raise DomainError(f"eta={self.eta} outside (0, 1]")


@dataclass(frozen=True, eq=False)
class PovmElement:
    """Fock-basis POVM element of one homodyne outcome.

    ``vectors`` holds the rank-one factors ``w_k`` (rows); the matrix is
    ``sum_k w_k w_k^dag``.
    """

    vectors: np.ndarray
    q: float
    theta: float
    eta: float

    @property
    def matrix(self) -> np.ndarray:
        return np.einsum("km,kn->mn", self.vectors, self.vectors.conj())

    def probability(self, rho) -> float:
        mat = as_matrix(rho)
        return float(np.real(np.einsum("km,mn,kn->", self.vectors.conj(), mat, self.vectors)))


def povm_vectors(q, theta, eta: float, n_max: int) -> np.ndarray:
    """Rank-one factors of the POVM elements for paired arrays; shape ``(N, K, d)``.

    ``K = 1`` for ideal detection and ``K = n_max + 1`` for lossy detection.
    """
    u = quadrature_vectors(n_max, q, theta)  # rows |q_theta> components
    if eta == 1.0:
        return u[:, None, :]
    kraus = loss_kraus(n_max + 1, eta)  # (k, a, b): E_k[a, b]
    # w_k = E_k^dag u ; E_k is real
    return np.einsum("kab,ia->ikb", kraus, u)


def build_povm(q: float, theta: float, eta: float, n_max: int) -> PovmElement:
    """POVM element of a single outcome; satisfies ``Tr[Pi_eta rho] = Tr[Pi_1 loss(rho, eta)]``."""
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta={eta} outside (0, 1]")
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    if not (np.isfinite(q) and np.isfinite(theta)):
        raise DomainError("q and theta must be finite")
    vec = povm_vectors(np.array([q]), np.array([theta]), eta, n_max)[0]
    return PovmElement(vec, float(q), float(theta), float(eta))


class HomodyneModel:
    """Per-sample quadrature projectors for a data set, with likelihood helpers.

    The lossy POVM is never formed sample by sample: ``Tr[Pi_eta rho]`` is
    evaluated as ``<q|loss(rho)|q>`` and ``sum_i c_i Pi_eta,i`` as the adjoint
    loss map of ``sum_i c_i |q_i><q_i|``, which is the same operator.
    """

    def __init__(self, samples, n_max: int, eta: float = 1.0, weights=None):
        data = as_data(samples)
        if len(data) == 0:
            raise DomainError("no samples supplied")
        if not (0.0 < eta <= 1.0):
            raise DomainError(f"eta={eta} outside (0, 1]")
        self.data = data
        self.n_max = n_max
        self.eta = float(eta)
        self._u = np.ascontiguousarray(quadrature_vectors(n_max, data.q, data.theta))
        self._u_conj = self._u.conj()
        self._kraus = loss_kraus(n_max + 1, self.eta) if self.eta < 1.0 else None
        w = np.ones(len(data)) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (len(data),) or np.any(w < 0):
            raise DomainError("weights must be non-negative, one per sample")
        self.weights = w
        self.n_eff = float(w.sum())

    def _detected(self, mat: np.ndarray) -> np.ndarray:
        if self._kraus is None:
            return mat
        return np.einsum("kab,bc,kdc->ad", self._kraus, mat, self._kraus)

    def _adjoint(self, op: np.ndarray) -> np.ndarray:
        if self._kraus is None:
            return op
        return np.einsum("kba,bc,kcd->ad", self._kraus, op, self._kraus)

    def probabilities(self, rho) -> np.ndarray:
        mat = self._detected(as_matrix(rho))
        return np.real(np.sum((self._u_conj @ mat) * self._u, axis=1))

    def log_likelihood(self, rho, pr: np.ndarray | None = None) -> float:
        pr = self.probabilities(rho) if pr is None else pr
        return float(self.weights @ np.log(np.maximum(pr, PROB_FLOOR)))

    def weighted_sum(self, coef: np.ndarray) -> np.ndarray:
        """``sum_i coef_i Pi_i`` including the loss."""
        out = (self._u * coef[:, None]).T @ self._u_conj
        out = self._adjoint(out)
        return 0.5 * (out + out.conj().T)

    def r_operator(self, rho, strict: bool = True, pr: np.ndarray | None = None):
        """``R = (1/N) sum_i w_i Pi_i / pr_i``, the probabilities and the floor count."""
        pr = self.probabilities(rho) if pr is None else pr
        bad = pr <= PROB_FLOOR
        if strict and np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise SingularDataError(
                f"sample {i} (theta={self.data.theta[i]:.6g}, q={self.data.q[i]:.6g}) has zero probability"
            )
        coef = self.weights / np.maximum(pr, PROB_FLOOR) / self.n_eff
        return self.weighted_sum(coef), pr, int(bad.sum())

    def g_operator(self) -> np.ndarray:
        """Sample average ``(1/N) sum_i Pi_i`` of the POVM elements."""
        return self.weighted_sum(self.weights / self.n_eff)


def log_likelihood(rho, samples, eta: float = 1.0) -> float:
    """``sum_i ln pr_rho(q_i, theta_i)`` with probabilities floored at 1e-300."""
    mat = as_matrix(rho)
    return HomodyneModel(samples, mat.shape[0] - 1, eta).log_likelihood(mat)


def r_operator(rho, samples, povms: Sequence[PovmElement] | None = None, eta: float = 1.0) -> np.ndarray:
    """Iteration operator ``R(rho) = (1/N) sum_i Pi_i / Tr[Pi_i rho]``."""
    mat = as_matrix(rho)
    if povms is None:
        return HomodyneModel(samples, mat.shape[0] - 1, eta).r_operator(mat)[0]
    r = np.zeros_like(mat)
    for i, el in enumerate(povms):
        p = el.probability(mat)
        if p <= PROB_FLOOR:
            raise SingularDataError(f"sample {i} (theta={el.theta:.6g}, q={el.q:.6g}) has zero probability")
        r += el.matrix / p
    r /= len(povms)
    return 0.5 * (r + r.conj().T)


@dataclass
class MaxlikResult:
    rho: DensityMatrix
    iterations: int
    converged: bool
    log_likelihood: list[float] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    epsilon_trace: list[float] = field(default_factory=list)
    rejected_steps: int = 0
    floor_hits: int = 0
    fallback_used: bool = False
    tail_population: float = 0.0
    g_condition: float | None = None

    def log_lines(self) -> list[str]:
        """Line-oriented diagnostics: ``iteration log_likelihood residual``."""
        return [
            f"{i} {ll:.9g} {res:.9g}"
            for i, (ll, res) in enumerate(zip(self.log_likelihood, self.residual))
        ]


def _normalize(mat: np.ndarray) -> np.ndarray:
    mat = 0.5 * (mat + mat.conj().T)
    return mat / np.trace(mat).real


def _step(rho: np.ndarray, r: np.ndarray, eps: float, g: np.ndarray | None,
          ginv: np.ndarray | None) -> np.ndarray:
    if ginv is not None:
        # Tr[G rho] G^-1 R equals the identity on rho at the extremum
        r = np.real(np.trace(g @ rho)) * (ginv @ r)
    if math.isinf(eps):
        op = r
    else:
        op = (np.eye(rho.shape[0]) + eps * r) / (1.0 + eps)
    return _normalize(op @ rho @ op.conj().T)


def _run(model: HomodyneModel, rho0, cfg: MaxlikConfig, g: np.ndarray | None,
         callback: Callable[[int, float], None] | None = None) -> MaxlikResult:
    d = cfg.n_max + 1
    rho = as_matrix(rho0) if rho0 is not None else np.eye(d) / d
    if rho.shape != (d, d):
        raise DomainError(f"initial state has dimension {rho.shape[0]}, expected {d}")
    rho = _normalize(np.asarray(rho, dtype=complex))
    ginv = None
    if g is not None:
        ginv = np.linalg.inv(g)
        ginv = 0.5 * (ginv + ginv.conj().T)

    def objective(mat, pr):
        # with G the extremal map maximizes L / Tr[G rho]^N
        ll = model.log_likelihood(mat, pr)
        if g is not None:
            ll -= model.n_eff * math.log(np.real(np.trace(g @ mat)))
        return ll

    def residual(mat, r):
        fixed = (ginv @ r @ mat @ r @ ginv) if ginv is not None else r @ mat @ r
        fixed = fixed / np.trace(fixed).real
        return float(np.linalg.norm(fixed - mat) / np.linalg.norm(mat))

    eps = cfg.epsilon
    pr = model.probabilities(rho)
    ll = objective(rho, pr)
    res = MaxlikResult(DensityMatrix(rho), 0, False, [ll], [], [eps])
    quiet = 0
    for it in range(1, cfg.max_iters + 1):
        r, _, floors = model.r_operator(rho, strict=False, pr=pr)
        res.floor_hits += floors
        res.residual.append(residual(rho, r))
        while True:
            cand = _step(rho, r, eps, g, ginv)
            pr_new = model.probabilities(cand)
            ll_new = objective(cand, pr_new)
            if ll_new >= ll or not cfg.adapt_epsilon:
                break
            res.rejected_steps += 1
            if math.isinf(eps):
                eps = 1.0
                res.fallback_used = True
            else:
                eps *= 0.5
            if eps < 1e-12:
                cand, pr_new, ll_new = rho, pr, ll
                break
        rel = abs(ll_new - ll) / max(abs(ll), 1e-300)
        rho, pr, ll = cand, pr_new, ll_new
        res.log_likelihood.append(ll)
        res.epsilon_trace.append(eps)
        res.iterations = it
        if callback is not None:
            callback(it, ll)
        quiet = quiet + 1 if rel < cfg.stop_tol else 0
        if quiet >= cfg.stop_window:
            res.converged = True
            break
    r, _, _ = model.r_operator(rho, strict=False, pr=pr)
    res.residual.append(residual(rho, r))
    res.rho = DensityMatrix(rho)
    res.tail_population = float(np.real(rho[-1, -1]))
    if not res.converged:
        log.info("maxlik stopped after %d iterations without meeting the tolerance", res.iterations)
    return res


def iterate(rho0, samples, cfg: MaxlikConfig | None = None, model: HomodyneModel | None = None,
            callback=None) -> MaxlikResult:
    """Maximum-likelihood density matrix from homodyne samples.

    Starts from ``rho0`` (maximally mixed when ``None``). With finite
    ``epsilon`` the diluted update is used; when a step would lower the
    likelihood it is rejected and ``epsilon`` halved. ``epsilon = inf`` runs
    ``R rho R`` and falls back to ``epsilon = 1`` on the first decrease.
    Non-convergence is reported through ``converged``, not raised.
    """
    cfg = cfg or MaxlikConfig()
    model = model or HomodyneModel(samples, cfg.n_max, cfg.eta)
    if cfg.bias_correction:
        # without an explicit window the recorded quadrature range is used
        window = (float(model.data.q.min()), float(model.data.q.max()))
        return bias_corrected_iterate(rho0, None, cfg, window=window, model=model)
    return _run(model, rho0, cfg, None, callback)


def completeness_operator(samples, n_max: int, eta: float = 1.0,
                          window: tuple[float, float] | None = None, n_quad: int = 400) -> np.ndarray:
    """``G`` for homodyne data recorded only inside the quadrature ``window``.

    ``G = <int_window Pi(Q, theta) dQ>_theta`` averaged over the sample phases.
    Without a window each phase contributes the identity, so ``G = I``.
    """
    data = as_data(samples)
    d = n_max + 1
    if window is None:
        g0 = np.eye(d)
    else:
        lo, hi = window
        if not hi > lo:
            raise DomainError("window must satisfy hi > lo")
        x, w = np.polynomial.legendre.leggauss(n_quad)
        qn = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        wn = 0.5 * (hi - lo) * w
        psi = fock_wavefunctions(n_max, qn)
        g0 = (psi * wn) @ psi.T
    idx = np.arange(d)
    harm = np.exp(1j * (idx[:, None] - idx[None, :])[:, :, None] * data.theta[None, None, :]).mean(axis=2)
    g = g0 * harm
    if eta < 1.0:
        g = bernoulli_loss_adjoint(g, eta)
    return 0.5 * (g + g.conj().T)


def bias_corrected_iterate(rho0, samples, cfg: MaxlikConfig | None = None, G=None,
                           window: tuple[float, float] | None = None,
                           model: HomodyneModel | None = None) -> MaxlikResult:
    """Maximum likelihood with the extremal map ``G^-1 R rho R G^-1 = rho``.

    ``G`` is taken as given or built from the acquisition ``window`` via
    :func:`completeness_operator`; when ``G`` is proportional to the
    identity this is identical to :func:`iterate`.
    """
    cfg = cfg or MaxlikConfig()
    model = model or HomodyneModel(samples, cfg.n_max, cfg.eta)
    if G is None:
        G = completeness_operator(model.data, cfg.n_max, cfg.eta, window)
    G = np.asarray(G, dtype=complex)
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > G_MAX_COND:
        raise IllConditionedError(f"completeness operator G is ill-conditioned (condition number {cond:.3g})")
    if cond > G_WARN_COND:
        warnings.warn(f"completeness operator G has condition number {cond:.3g}", stacklevel=2)
    # a multiple of the identity only rescales before normalization
    scale = np.trace(G).real / G.shape[0]
    if np.allclose(G, scale * np.eye(G.shape[0]), atol=1e-14 * abs(scale)):
        res = _run(model, rho0, cfg, None)
    else:
        res = _run(model, rho0, cfg, G)
    res.g_condition = cond
    return res


def bootstrap_errors(rho_ml, plan, K: int, base_seed: int, cfg: MaxlikConfig | None = None,
                     seeds: Sequence[int] | None = None, return_samples: bool = False):
    """Element-wise spread of MaxLik reconstructions of data simulated from ``rho_ml``.

    Runs ``K`` simulate-and-reconstruct cycles treating ``rho_ml`` as truth.
    Seeds are spawned deterministically from ``base_seed`` unless given.
    Returns the element-wise standard deviation ``sqrt(<|rho'_k - <rho'>|^2>)``.
    """
    from .sampler import AcquisitionPlan, sample_many

    if K < 2:
        raise DomainError("bootstrap needs K >= 2 repetitions")
    if K < 10:
        warnings.warn(f"K={K} bootstrap repetitions; at least 10 are recommended", stacklevel=2)
    mat = as_matrix(rho_ml)
    cfg = cfg or MaxlikConfig(n_max=mat.shape[0] - 1)
    if seeds is None:
        seeds = [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(base_seed).spawn(K)]
    elif len(seeds) != K:
        raise DomainError("need exactly K seeds")
    if not isinstance(plan, AcquisitionPlan):
        plan = AcquisitionPlan.from_dict(plan)
    datasets = sample_many(mat, plan, seeds)
    recon = np.array([as_matrix(iterate(None, ds, cfg).rho) for ds in datasets])
    mean = recon.mean(axis=0)
    spread = np.sqrt(np.mean(np.abs(recon - mean) ** 2, axis=0))
    if return_samples:
        return spread, recon
    return spread


def binned_model(samples, n_max: int, eta: float = 1.0, n_phase_bins: int = 64,
                 n_q_bins: int = 512) -> HomodyneModel:
    """Model on a ``(theta, q)`` histogram with bin counts as likelihood weights.

    Intended for very large data sets, where per-sample POVMs would not fit
    in memory; the bin centres stand in for the individual outcomes.
    """
    data = as_data(samples)
    if len(data) == 0:
        raise DomainError("no samples supplied")
    qmax = float(np.max(np.abs(data.q))) * (1 + 1e-9) + 1e-12
    t_edges = np.linspace(0.0, 2.0 * np.pi, n_phase_bins + 1)
    q_edges = np.linspace(-qmax, qmax, n_q_bins + 1)
    counts, _, _ = np.histogram2d(data.theta, data.q, bins=(t_edges, q_edges))
    tc = 0.5 * (t_edges[1:] + t_edges[:-1])
    qc = 0.5 * (q_edges[1:] + q_edges[:-1])
    tt, qq = np.meshgrid(tc, qc, indexing="ij")
    keep = counts > 0
    centres = QuadratureData(tt[keep], qq[keep])
    return HomodyneModel(centres, n_max, eta, weights=counts[keep])
