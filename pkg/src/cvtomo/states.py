"""Reference optical states used as simulation truth and reconstruction targets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, TruncationError
from .fock import DensityMatrix, bernoulli_loss, fidelity

KINDS = (
    "vacuum",
    "fock",
    "coherent",
    "squeezed_vacuum",
    "odd_cat",
    "even_cat",
    "single_rail",
    "photon_added",
    "photon_subtracted",
    "thermal",
    "lossy_fock",
)

#: Largest population allowed above the cutoff before a state is rejected.
TAIL_TOL = 1e-6


@dataclass(frozen=True)
class StateSpec:
    """Description of a reference state.

    ``params`` holds the kind-specific amplitudes: ``n`` (fock), ``alpha``
    (coherent, cats), ``zeta`` (squeezing parameter r of the squeezed vacuum),
    ``c0``/``c1`` (single-rail qubit), ``nbar`` (thermal), ``m`` plus a nested
    ``base`` spec (photon addition/subtraction), ``n``/``eta`` (lossy_fock).
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    n_max: int = 15

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown state kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.n_max < 0:
            raise DomainError("n_max must be non-negative")

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "n_max": self.n_max}
        for k, v in self.params.items():
            if isinstance(v, StateSpec):
                out[k] = v.to_dict()
            elif isinstance(v, complex):
                out[k] = _format_complex(v)
            else:
                out[k] = v
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StateSpec":
        d = dict(d)
        kind = str(d.pop("kind"))
        n_max = int(d.pop("n_max", 15))
        params: dict = {}
        for k, v in d.items():
            if k == "base":
                params[k] = cls.from_dict(v) if not isinstance(v, StateSpec) else v
            else:
                params[k] = v
        return cls(kind, params, n_max)

    @classmethod
    def from_flat(cls, flat: Mapping[str, str]) -> "StateSpec":
        """Parse a flat key-value mapping, e.g. ``kind=odd_cat, alpha=0.79``.

        Keys prefixed with ``base.`` describe the base state of photon
        addition/subtraction; ``nbar`` may also be spelled ``n_bar``.
        """
        flat = {k.strip(): str(v).strip() for k, v in flat.items()}
        base = {k[5:]: v for k, v in flat.items() if k.startswith("base.")}
        top = {k: v for k, v in flat.items() if not k.startswith("base.")}
        if "kind" not in top:
            raise DomainError("state description needs a 'kind' key")
        kind = top.pop("kind")
        n_max = int(top.pop("n_max", top.pop("nmax", 15)))
        params: dict = {}
        for k, v in top.items():
            key = "nbar" if k == "n_bar" else k
            params[key] = _parse_scalar(key, v)
        if base:
            base.setdefault("n_max", str(n_max))
            params["base"] = cls.from_flat(base)
        return cls(kind, params, n_max)


def _format_complex(z: complex) -> str:
    return f"{z.real:.9g}{z.imag:+.9g}j"


def _parse_scalar(key: str, text: str):
    if key in ("n", "m"):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return complex(text.replace(" ", ""))


# ---------------------------------------------------------------------------
# Kets
# ---------------------------------------------------------------------------


def _check_tail(kept: float, what: str, n_max: int) -> None:
    tail = 1.0 - kept
    if tail > TAIL_TOL:
        raise TruncationError(f"{what}: population {tail:.3g} lies above n_max={n_max}; raise n_max")


def coherent_ket(alpha: complex, n_max: int) -> np.ndarray:
    """Normalized coherent-state amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)``."""
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    if alpha == 0:
        c = (n == 0).astype(complex)
    else:
        logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        c = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    _check_tail(float(np.sum(np.abs(c) ** 2)), f"coherent({alpha})", n_max)
    return c / np.linalg.norm(c)


def squeezed_vacuum_ket(zeta: float, n_max: int) -> np.ndarray:
    """Exact squeezed vacuum with squeezing parameter ``zeta``.

    ``c_2n = (cosh zeta)^(-1/2) tanh(zeta)^n sqrt((2n)!) / (2^n n!)``; positive
    ``zeta`` stretches the Q quadrature and gives ``|0> + zeta/sqrt(2) |2> + ...``
    for small ``zeta``.
    """
    zeta = float(zeta)
    c = np.zeros(n_max + 1)
    c[0] = 1.0 / np.sqrt(np.cosh(zeta))
    t = np.tanh(zeta)
    for k in range(0, n_max // 2):
        c[2 * k + 2] = c[2 * k] * t * np.sqrt((2 * k + 1) / (2 * k + 2.0))
    _check_tail(float(np.sum(c * c)), f"squeezed_vacuum({zeta})", n_max)
    return c / np.linalg.norm(c)


def cat_ket(alpha: complex, n_max: int, parity: int) -> np.ndarray:
    """``|alpha> + parity |-alpha>`` normalized (parity = +1 even, -1 odd)."""
    if complex(alpha) == 0:
        raise DomainError("cat states need a non-zero amplitude")
    n = np.arange(n_max + 1)
    alpha = complex(alpha)
    logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    c = np.exp(logmag) * np.exp(1j * n * np.angle(alpha)) * (1.0 + parity * (-1.0) ** n)
    norm_exact = 2.0 * (1.0 + parity * np.exp(-2.0 * abs(alpha) ** 2))
    _check_tail(float(np.sum(np.abs(c) ** 2)) / norm_exact, f"cat({alpha})", n_max)
    return c / np.linalg.norm(c)


# ---------------------------------------------------------------------------
# Ladder operations on density matrices
# ---------------------------------------------------------------------------


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


def add_photons(rho: np.ndarray, m: int) -> np.ndarray:
    """Unnormalized ``(a^dag)^m rho a^m`` in a space enlarged by ``m``."""
    d = rho.shape[0]
    big = np.zeros((d + m, d + m), dtype=complex)
    big[:d, :d] = rho
    adag = annihilation(d + m).T
    for _ in range(m):
        big = adag @ big @ adag.T
    return big


def subtract_photons(rho: np.ndarray, m: int) -> np.ndarray:
    """Unnormalized ``a^m rho (a^dag)^m``."""
    a = annihilation(rho.shape[0])
    out = rho
    for _ in range(m):
        out = a @ out @ a.T
    return out


def _finish(mat: np.ndarray, n_max: int, what: str) -> DensityMatrix:
    tr = np.trace(mat).real
    if tr <= 0:
        raise DomainError(f"{what}: operation annihilates the state")
    mat = mat / tr
    kept = np.trace(mat[: n_max + 1, : n_max + 1]).real
    _check_tail(kept, what, n_max)
    mat = mat[: n_max + 1, : n_max + 1]
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(mat / np.trace(mat).real)


# ---------------------------------------------------------------------------
# Factory
# ---------------------------------------------------------------------------


def build(spec: StateSpec) -> DensityMatrix:
    """Density matrix of ``spec`` truncated at ``spec.n_max``."""
    k, n_max = spec.kind, spec.n_max
    if k == "vacuum":
        return DensityMatrix.vacuum(n_max)
    if k == "fock":
        return DensityMatrix.fock(int(spec.get("n", 0)), n_max)
    if k == "coherent":
        return DensityMatrix.from_ket(coherent_ket(complex(spec.get("alpha", 0.0)), n_max))
    if k == "squeezed_vacuum":
        return DensityMatrix.from_ket(squeezed_vacuum_ket(float(spec.get("zeta", 0.0)), n_max))
    if k in ("odd_cat", "even_cat"):
        parity = -1 if k == "odd_cat" else 1
        return DensityMatrix.from_ket(cat_ket(complex(spec.get("alpha", 1.0)), n_max, parity))
    if k == "single_rail":
        c0, c1 = complex(spec.get("c0", 1.0)), complex(spec.get("c1", 0.0))
        if not (np.isfinite(c0) and np.isfinite(c1)) or abs(c0) ** 2 + abs(c1) ** 2 == 0:
            raise DomainError("single-rail qubit needs finite, not both zero, amplitudes")
        if n_max < 1:
            raise DomainError("single-rail qubit needs n_max >= 1")
        ket = np.zeros(n_max + 1, dtype=complex)
        ket[0], ket[1] = c0, c1
        return DensityMatrix.from_ket(ket)
    if k == "thermal":
        nbar = float(spec.get("nbar", 0.0))
        if nbar < 0 or not np.isfinite(nbar):
            raise DomainError(f"thermal occupation must be >= 0, got {nbar}")
        n = np.arange(n_max + 1)
        p = (nbar / (1.0 + nbar)) ** n / (1.0 + nbar)
        _check_tail(float(p.sum()), f"thermal({nbar})", n_max)
        return DensityMatrix.from_diagonal(p / p.sum())
    if k == "lossy_fock":
        fock = DensityMatrix.fock(int(spec.get("n", 1)), n_max)
        return bernoulli_loss(fock, float(spec.get("eta", 1.0)))
    if k in ("photon_added", "photon_subtracted"):
        m = int(spec.get("m", 1))
        if m < 0:
            raise DomainError("photon count m must be non-negative")
        base = spec.get("base")
        if base is None:
            raise DomainError(f"{k} needs a base state")
        if not isinstance(base, StateSpec):
            base = StateSpec.from_dict(base)
        # build the base in a space large enough that the ladder operations
        # do not push population through the cutoff
        extra = m + 10
        base_rho = build(StateSpec(base.kind, base.params, max(base.n_max, n_max) + extra)).data
        mat = add_photons(base_rho, m) if k == "photon_added" else subtract_photons(base_rho, m)
        return _finish(mat, n_max, k)
    raise DomainError(f"unhandled state kind {k!r}")


def rho_meas(eta: float, n_max: int = 1) -> DensityMatrix:
    """Lossy single photon ``eta |1><1| + (1-eta) |0><0|``."""
    return build(StateSpec("lossy_fock", {"n": 1, "eta": eta}, n_max))


def kitten_fidelity_check(alpha: float, n_max: int = 30) -> float:
    """Fidelity between an odd cat of amplitude ``alpha`` and the single-photon-subtracted
    squeezed vacuum with ``zeta = alpha**2 / 6``."""
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"kitten check needs 0 < alpha <= 1, got {alpha}")
    cat = build(StateSpec("odd_cat", {"alpha": alpha}, n_max))
    sq = StateSpec("squeezed_vacuum", {"zeta": alpha**2 / 6.0}, n_max)
    kitten = build(StateSpec("photon_subtracted", {"m": 1, "base": sq}, n_max))
    return fidelity(cat, kitten)
