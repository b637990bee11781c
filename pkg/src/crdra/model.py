"""Network models, constraint bookkeeping, and shared matrix primitives.

Everything downstream (the point-to-point, MAC, BC, IC and scheduling
solvers) builds on the types and helpers here: seeded Rayleigh scenario
generation, log-det rate evaluation, interference power, and PSD
projection.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

# Relative tolerance on the most negative eigenvalue a covariance may
# carry before it is rejected as non-PSD.
PSD_TOL = 1e-9

LN2 = float(np.log(2.0))


class Role(enum.Enum):
    P2P = "p2p"
    MAC = "mac"
    BC = "bc"
    IC = "ic"


class ConfigurationError(ValueError):
    """Inconsistent scenario/experiment configuration."""


class DomainError(ValueError):
    """Operation input violates a documented precondition."""


@dataclass(frozen=True)
class FadingProcess:
    """I.i.d. Rayleigh block fading: CSCG entries, per-entry variance.

    Regeneration with the same (seed, dimension index) is bit-identical.
    """

    seed: int
    variance: float = 1.0
    cross_variance: float | None = None  # SU-to-PU links; defaults to variance

    def __post_init__(self):
        if self.variance <= 0:
            raise ConfigurationError("variance must be positive")

    @property
    def pu_variance(self) -> float:
        return self.variance if self.cross_variance is None else self.cross_variance

    def rng(self, dim_index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, dim_index])


@dataclass(frozen=True)
class ConstraintSet:
    """Budget lists for the four power-constraint families plus GLTCCs.

    ptpc/atpc entries are (user index, budget); pipc/aipc entries are
    (PU index, budget); gltcc entries are (list of per-user Hermitian PSD
    weight matrices, threshold).
    """

    ptpc: tuple = ()
    atpc: tuple = ()
    pipc: tuple = ()
    aipc: tuple = ()
    gltcc: tuple = ()

    def __post_init__(self):
        for name in ("ptpc", "atpc", "pipc", "aipc"):
            for _, budget in getattr(self, name):
                if budget < 0:
                    raise ConfigurationError(f"{name} budget must be >= 0")
        for mats, w in self.gltcc:
            if w < 0:
                raise ConfigurationError("gltcc threshold must be >= 0")
            for W in mats:
                if W is not None and not is_hermitian(W):
                    raise ConfigurationError("gltcc weight matrix must be Hermitian")


@dataclass(frozen=True)
class NetworkInstance:
    """One channel realization of a CR network.

    ``direct`` holds the SU-side channels: for P2P/MAC the uplink H_k
    (M x N_k); for BC the same H_k whose Hermitian transpose is the
    downlink channel; for IC the full K x K cross matrix H[i][k] from
    SU-TX i to SU-RX k.  ``cross`` holds the SU-to-PU channels (G_kj,
    F_j, or E_kj depending on the role), indexed [k][j].
    """

    role: Role
    K: int
    J: int
    direct: tuple
    cross: tuple
    mu: tuple = ()
    seed: int | None = None
    dim_index: int = 0

    def __post_init__(self):
        if self.K < 1 or self.J < 0:
            raise ConfigurationError("need K >= 1 and J >= 0")
        mu = self.mu if self.mu else tuple([1.0] * self.K)
        object.__setattr__(self, "mu", tuple(float(m) for m in mu))
        if len(self.mu) != self.K:
            raise ConfigurationError("mu must have one weight per SU")
        if any(m < 0 for m in self.mu):
            raise ConfigurationError("rate weights must be nonnegative")
        if self.role in (Role.MAC, Role.BC) and any(
            self.mu[i] < self.mu[i + 1] - 1e-12 for i in range(self.K - 1)
        ):
            raise ConfigurationError("mu must be sorted nonincreasing for MAC/BC")
        for mats in (self.direct, self.cross):
            for entry in mats:
                for H in entry if isinstance(entry, tuple) else (entry,):
                    if H is not None and not np.all(np.isfinite(H.view(float))):
                        raise ConfigurationError("channel entries must be finite")

    # -- per-role accessors -------------------------------------------------

    def H(self, k: int) -> np.ndarray:
        """Uplink channel of SU k (P2P/MAC/BC roles)."""
        if self.role is Role.IC:
            raise DomainError("use Hic(i, k) for the interference channel")
        return self.direct[k]

    def Hic(self, i: int, k: int) -> np.ndarray:
        """IC channel from SU-TX i to SU-RX k."""
        if self.role is not Role.IC:
            raise DomainError("Hic is defined for IC instances only")
        return self.direct[i][k]

    def G(self, k: int, j: int) -> np.ndarray:
        """Channel from SU k's transmitter to PU j (G_kj / E_kj).

        For the BC role the transmitter is the S-BS, so the channel F_j
        does not depend on k.
        """
        if self.role is Role.BC:
            return self.cross[0][j]
        return self.cross[k][j]

    def tx_antennas(self, k: int) -> int:
        if self.role is Role.IC:
            return self.direct[k][k].shape[1]
        return self.direct[k].shape[1]


def generate_instance(role, K, J, *, M=1, N=None, A=None, B=None, D=None,
                      fading: FadingProcess, dim_index: int = 0,
                      mu=None) -> NetworkInstance:
    """Draw one i.i.d. CSCG channel realization of the requested network.

    Antenna counts: M at the S-BS, N[k] per SU (P2P/MAC/BC), A[k]/B[k] at
    IC transmitters/receivers, D[j] per PU.  Deterministic given
    (fading.seed, dim_index).
    """
    role = Role(role)
    D = _counts(D, J, "D")
    if role is Role.IC:
        A = _counts(A, K, "A")
        B = _counts(B, K, "B")
    else:
        N = _counts(N, K, "N")
    if M < 1:
        raise ConfigurationError("M must be >= 1")

    rng = fading.rng(dim_index)
    sd = np.sqrt(fading.variance)
    sp = np.sqrt(fading.pu_variance)

    def draw(rows, cols, scale):
        z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        return scale * z / np.sqrt(2.0)

    if role is Role.IC:
        direct = tuple(
            tuple(draw(B[k], A[i], sd) for k in range(K)) for i in range(K)
        )
        cross = tuple(
            tuple(draw(D[j], A[k], sp) for j in range(J)) for k in range(K)
        )
    else:
        direct = tuple(draw(M, N[k], sd) for k in range(K))
        if role is Role.BC:
            cross = (tuple(draw(D[j], M, sp) for j in range(J)),)
        else:
            cross = tuple(
                tuple(draw(D[j], N[k], sp) for j in range(J)) for k in range(K)
            )

    mu = tuple(mu) if mu is not None else tuple([1.0] * K)
    if role in (Role.MAC, Role.BC):
        mu = tuple(sorted(mu, reverse=True))
    return NetworkInstance(role=role, K=K, J=J, direct=direct, cross=cross,
                           mu=mu, seed=fading.seed, dim_index=dim_index)


def _counts(value, n, name):
    if n == 0:
        return ()
    if value is None:
        raise ConfigurationError(f"antenna counts {name} required")
    if np.isscalar(value):
        value = [int(value)] * n
    value = tuple(int(v) for v in value)
    if len(value) != n or any(v < 1 for v in value):
        raise ConfigurationError(f"{name} must hold {n} positive integers")
    return value


# -- matrix primitives ------------------------------------------------------


def is_hermitian(A: np.ndarray, tol: float = 1e-8) -> bool:
    A = np.atleast_2d(A)
    if A.shape[0] != A.shape[1]:
        return False
    scale = max(1.0, float(np.abs(A).max()))
    return bool(np.abs(A - A.conj().T).max() <= tol * scale)


def herm(A: np.ndarray) -> np.ndarray:
    """Symmetrize away round-off: (A + A^H)/2."""
    return 0.5 * (A + A.conj().T)


def check_psd(S: np.ndarray, what: str = "covariance") -> np.ndarray:
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    if not is_hermitian(S):
        raise DomainError(f"{what} must be Hermitian")
    w = np.linalg.eigvalsh(herm(S))
    floor = -PSD_TOL * max(1.0, float(np.trace(S).real))
    if w.min() < floor:
        raise DomainError(f"{what} is not PSD (min eigenvalue {w.min():.3e})")
    return S


def psd_project(A: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip eigenvalues at zero."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if not is_hermitian(A):
        raise DomainError("psd_project expects a Hermitian matrix")
    w, V = np.linalg.eigh(herm(A))
    w = np.maximum(w, 0.0)
    return herm((V * w) @ V.conj().T)


def rate_p2p(H: np.ndarray, S: np.ndarray) -> float:
    """Point-to-point rate log2|I + H S H^H| in bits per channel use."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    S = check_psd(S)
    if H.shape[1] != S.shape[0]:
        raise DomainError("channel/covariance dimensions mismatch")
    M = H.shape[0]
    A = np.eye(M) + H @ S @ H.conj().T
    sign, logdet = np.linalg.slogdet(herm(A))
    return max(0.0, float(logdet) / LN2)


def interference_power(G: np.ndarray, S: np.ndarray) -> float:
    """Received interference power Tr(G S G^H) at a PU."""
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    if G.shape[1] != S.shape[0]:
        raise DomainError("channel/covariance dimensions mismatch")
    return float(np.einsum("ij,jk,ik->", G, S, G.conj()).real)


def inv_sqrt_psd(T: np.ndarray, reg: float = 0.0) -> np.ndarray:
    """T^{-1/2} of a Hermitian PD matrix, with optional ridge ``reg``."""
    w, V = np.linalg.eigh(herm(np.atleast_2d(T)))
    w = np.maximum(w + reg, reg if reg > 0 else np.finfo(float).tiny)
    return herm((V / np.sqrt(w)) @ V.conj().T)


def sqrt_psd(T: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(herm(np.atleast_2d(T)))
    w = np.maximum(w, 0.0)
    return herm((V * np.sqrt(w)) @ V.conj().T)


# -- solve reporting --------------------------------------------------------


@dataclass
class SolveReport:
    """Outcome of one solver run.

    ``objective`` is the reported (feasible) primal value in bits;
    ``usage`` maps constraint labels to achieved values; ``gap`` is the
    dual-primal gap estimate (>= 0 up to round-off).
    """

    objective: float
    covariances: list
    usage: dict
    budgets: dict
    multipliers: dict = field(default_factory=dict)
    gap: float = float("nan")
    iterations: int = 0
    converged: bool = True
    pre_scaling_objective: float | None = None
    trace: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def feasible(self, rtol: float = 1e-6) -> bool:
        return all(
            self.usage[name] <= self.budgets[name] * (1.0 + rtol) + 1e-12
            for name in self.budgets
        )
