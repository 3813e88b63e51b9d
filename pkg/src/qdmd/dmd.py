"""Dynamic mode decomposition operators and their regularized variants.

Estimators take a pair of snapshot matrices (Phi, PhiPrime) whose
columns are states at consecutive sample times and fit the linear
propagator K minimizing ||PhiPrime - K Phi|| in the least squares
sense. Three flavors are provided:

* ``dmd_full``: minimum-norm least squares via a truncated SVD
  pseudoinverse, returning the full N x N operator.
* ``dmd_reduced``: rank-r projection onto the leading left singular
  subspace of Phi, returning the r x r operator together with its
  eigendecomposition and the lifted modes.
* ``ridge_dmd``: the normal equations with a scaled ridge term,
  K = PhiPrime Phi^T (Phi Phi^T + T gamma I)^{-1}.

Quantization with subtractive dither perturbs both snapshot matrices by
white noise of variance eps**2/12 per entry. In expectation this adds
exactly a ridge penalty with gamma = eps**2/12 to the least squares
objective, so the quantized estimate concentrates on the ridge estimate
computed from clean data; ``recover_regularized`` runs the equivalence
backwards with a negative ridge weight to undo the quantization bias,
guarded by the smallest eigenvalue of the quantized Gram matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, IllConditionedWarning, InsufficientDataError,
                     RankError, ShapeError)

__all__ = [
    "SnapshotPair",
    "FullDMD",
    "ReducedDMD",
    "RankRule",
    "RecoveryResult",
    "build_snapshots",
    "dmd_full",
    "dmd_reduced",
    "rank_truncated_operator",
    "predict_full",
    "predict_reduced",
    "ridge_dmd",
    "recover_regularized",
    "objective_decomposition_check",
]

GUARD_SLACK = 1e-6


@dataclass(frozen=True)
class SnapshotPair:
    """Input and shifted-output snapshot matrices, both N x T."""

    Phi: np.ndarray
    PhiPrime: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.Phi, dtype=float)
        phip = np.asarray(self.PhiPrime, dtype=float)
        if phi.ndim != 2 or phip.ndim != 2:
            raise ShapeError("snapshot matrices must be 2-D")
        if phi.shape != phip.shape:
            raise ShapeError(
                f"snapshot matrices must match, got {phi.shape} and {phip.shape}")
        if phi.shape[0] < 1 or phi.shape[1] < 1:
            raise InsufficientDataError("snapshot matrices are empty")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(phip))):
            raise ConfigError("snapshot matrices contain non-finite values")
        object.__setattr__(self, "Phi", phi)
        object.__setattr__(self, "PhiPrime", phip)

    @property
    def n_observables(self) -> int:
        return self.Phi.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.Phi.shape[1]


def build_snapshots(trajectory) -> SnapshotPair:
    """Split a trajectory into (Phi, PhiPrime) = (columns 0..L-2, 1..L-1)."""
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2:
        raise ShapeError(f"trajectory must be 2-D, got shape {traj.shape}")
    if traj.shape[1] < 2:
        raise InsufficientDataError("need at least two snapshots to form a pair")
    return SnapshotPair(Phi=traj[:, :-1], PhiPrime=traj[:, 1:])


@dataclass(frozen=True)
class FullDMD:
    """Full-dimension propagator estimate."""

    K: np.ndarray
    pinv_tolerance: float


@dataclass(frozen=True)
class ReducedDMD:
    """Rank-r projected propagator and its spectral pieces.

    ``K_r = U_r^T PhiPrime V_r Sigma_r^{-1}`` acts on coordinates in the
    leading left singular basis U_r of Phi. Lambda/W are its
    eigenvalues and eigenvectors (eigenvalues sorted by descending
    modulus, ties by ascending phase, so conjugate pairs sit next to
    each other), and Upsilon = PhiPrime V_r Sigma_r^{-1} W holds the
    modes lifted back to observable space.
    """

    r: int
    U_r: np.ndarray
    Sigma_r: np.ndarray
    V_r: np.ndarray
    K_r: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray
    Upsilon: np.ndarray


@dataclass(frozen=True)
class RankRule:
    """How to pick the truncation rank from a singular spectrum.

    kind = "fixed":     keep exactly ``r`` directions.
    kind = "energy":    smallest r with cumulative squared singular
                        value fraction >= tau.
    kind = "tolerance": keep singular values above cutoff * sigma_max.
    """

    kind: str = "energy"
    r: int | None = None
    tau: float = 0.9999
    cutoff: float | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "energy", "tolerance"):
            raise ConfigError(f"unknown rank rule kind {self.kind!r}")
        if self.kind == "fixed":
            if not isinstance(self.r, (int, np.integer)) or self.r < 1:
                raise ConfigError(f"fixed rank must be a positive integer, got {self.r!r}")
        elif self.kind == "energy":
            if not (0.0 < self.tau <= 1.0):
                raise ConfigError(f"energy fraction must lie in (0, 1], got {self.tau}")
        else:
            if self.cutoff is None or not (0.0 < self.cutoff < 1.0):
                raise ConfigError(
                    f"tolerance cutoff must lie in (0, 1), got {self.cutoff!r}")

    def resolve(self, singular_values) -> int:
        """Truncation rank for the given non-increasing singular values."""
        sigma = np.asarray(singular_values, dtype=float)
        positive = int(np.count_nonzero(sigma > 0.0))
        if positive == 0:
            raise RankError("all singular values are zero")
        if self.kind == "fixed":
            if self.r > positive:
                raise RankError(
                    f"requested rank {self.r} exceeds the {positive} "
                    "positive singular values available")
            return int(self.r)
        if self.kind == "energy":
            energy = np.cumsum(sigma[:positive] ** 2)
            frac = energy / energy[-1]
            return int(np.searchsorted(frac, self.tau - 1e-15) + 1)
        keep = int(np.count_nonzero(sigma > self.cutoff * sigma[0]))
        if keep == 0:
            raise RankError("tolerance cutoff rejects every singular value")
        return keep


def _svd_signed(mat: np.ndarray):
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped so its largest-magnitude entry
    (lowest index on ties) is positive, with the matching right vector
    flipped too. Removes the sign ambiguity so repeated runs and
    parallel BLAS backends agree bit for bit on well-separated spectra.
    """
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0.0] = 1.0
    return u * signs, s, vt * signs[:, None]


def _sorted_eig(k_r: np.ndarray):
    lam, w = np.linalg.eig(k_r)
    order = np.lexsort((np.angle(lam), -np.abs(lam)))
    return lam[order], w[:, order]


def dmd_full(pair: SnapshotPair, tol: float | None = None) -> FullDMD:
    """Minimum-norm least squares propagator PhiPrime pinv(Phi).

    ``tol`` is the relative pseudoinverse cutoff: singular values at or
    below tol * sigma_max are treated as zero. Default is
    max(N, T) times the double-precision machine epsilon.
    """
    if tol is None:
        tol = max(pair.Phi.shape) * np.finfo(float).eps
    if not (np.isfinite(tol) and 0.0 <= tol < 1.0):
        raise ConfigError(f"pinv tolerance must lie in [0, 1), got {tol}")
    u, s, vt = _svd_signed(pair.Phi)
    if s.size == 0 or s[0] == 0.0:
        return FullDMD(K=np.zeros((pair.n_observables, pair.n_observables)),
                       pinv_tolerance=float(tol))
    keep = s > tol * s[0]
    u_r = u[:, keep]
    v_r = vt[keep].T
    s_r = s[keep]
    k = (pair.PhiPrime @ (v_r / s_r)) @ u_r.T
    return FullDMD(K=k, pinv_tolerance=float(tol))


def dmd_reduced(pair: SnapshotPair, rule: RankRule | None = None) -> ReducedDMD:
    """Project the propagator onto the leading left singular subspace of Phi."""
    if rule is None:
        rule = RankRule()
    u, s, vt = _svd_signed(pair.Phi)
    r = rule.resolve(s)
    u_r = u[:, :r]
    s_r = s[:r]
    v_r = vt[:r].T
    b = pair.PhiPrime @ (v_r / s_r)
    k_r = u_r.T @ b
    lam, w = _sorted_eig(k_r)
    cond_w = np.linalg.cond(w)
    if cond_w > 1e12:
        warnings.warn(
            f"eigenvector basis is ill conditioned (cond={cond_w:.3e}); "
            "the operator is close to defective and mode amplitudes are "
            "unreliable", IllConditionedWarning, stacklevel=2)
    upsilon = b @ w
    return ReducedDMD(r=r, U_r=u_r, Sigma_r=s_r, V_r=v_r, K_r=k_r,
                      Lambda=lam, W=w, Upsilon=upsilon)


def rank_truncated_operator(pair: SnapshotPair, model: ReducedDMD) -> np.ndarray:
    """Full-size operator using only the model's leading singular directions.

    Equals dmd_full with a pseudoinverse cutoff placed just below
    sigma_r, written in terms of an already computed reduced model.
    """
    return (pair.PhiPrime @ (model.V_r / model.Sigma_r)) @ model.U_r.T


def _check_state(x0, n: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (n,):
        raise ShapeError(f"initial state must have {n} entries, got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ConfigError("initial state contains non-finite values")
    return x0


def _check_horizon(horizon) -> int:
    if not isinstance(horizon, (int, np.integer)) or horizon < 0:
        raise ConfigError(f"horizon must be a non-negative integer, got {horizon!r}")
    return int(horizon)


def predict_full(model: FullDMD, x0, horizon: int) -> np.ndarray:
    """Roll the full operator forward: column t is K^t x0, column 0 is x0."""
    horizon = _check_horizon(horizon)
    x = _check_state(x0, model.K.shape[0])
    out = np.empty((x.size, horizon + 1))
    out[:, 0] = x
    for t in range(1, horizon + 1):
        x = model.K @ x
        out[:, t] = x
    return out


def predict_reduced(model: ReducedDMD, x0, horizon: int) -> np.ndarray:
    """Modal prediction Re(Upsilon Lambda^t z) with z = pinv(Upsilon) x0.

    Column 0 is the real part of the projection of x0 onto the mode
    span, not x0 itself, so any component outside the retained modes is
    visible immediately.
    """
    horizon = _check_horizon(horizon)
    x = _check_state(x0, model.Upsilon.shape[0])
    z = np.linalg.pinv(model.Upsilon) @ x
    powers = model.Lambda[:, None] ** np.arange(horizon + 1)[None, :]
    return np.real(model.Upsilon @ (powers * z[:, None]))


def ridge_dmd(pair: SnapshotPair, gamma: float) -> np.ndarray:
    """Ridge-regularized propagator PhiPrime Phi^T (Phi Phi^T + T gamma I)^{-1}.

    ``gamma`` is the per-sample penalty weight; the T factor keeps it on
    the scale of a per-entry noise variance. Negative gamma is allowed
    as long as the shifted Gram matrix stays invertible (used by the
    quantization bias removal).
    """
    if not np.isfinite(gamma):
        raise ConfigError(f"gamma must be finite, got {gamma}")
    phi, phip = pair.Phi, pair.PhiPrime
    t = pair.n_snapshots
    gram = phi @ phi.T + (t * gamma) * np.eye(pair.n_observables)
    try:
        # solve G^T Z = (PhiPrime Phi^T)^T, then K = Z^T; G is symmetric
        k = np.linalg.solve(gram, (phip @ phi.T).T).T
    except np.linalg.LinAlgError as exc:
        raise ConfigError(
            f"shifted Gram matrix is singular for gamma={gamma}") from exc
    if not np.all(np.isfinite(k)):
        raise ConfigError(
            f"shifted Gram matrix is numerically singular for gamma={gamma}")
    return k


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of undoing the quantization-induced ridge.

    ``guard_ok`` is False when the negative ridge -eps**2/12 would make
    the objective non-convex (smallest Gram eigenvalue over T too
    close to eps**2/12); then ``gamma`` holds the safe fallback
    -lambda_min / (2 T) actually used.
    """

    K: np.ndarray
    gamma: float
    guard_ok: bool
    lambda_min: float


def recover_regularized(quantized_pair: SnapshotPair,
                        epsilon: float) -> RecoveryResult:
    """Estimate the clean-data propagator from dither-quantized snapshots.

    Dithered quantization adds an effective ridge of eps**2/12 to the
    least squares objective in expectation, so subtracting it (gamma =
    -eps**2/12) asymptotically recovers the unquantized estimate. The
    subtraction is only well posed while lambda_min(Phi Phi^T)/T stays
    above eps**2/12; otherwise a conservative fallback gamma is used
    and flagged.
    """
    if not (np.isfinite(epsilon) and epsilon > 0.0):
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    phi = quantized_pair.Phi
    t = quantized_pair.n_snapshots
    gram = phi @ phi.T
    lam_min = float(np.linalg.eigvalsh(0.5 * (gram + gram.T))[0])
    target = epsilon ** 2 / 12.0
    if lam_min / t > target * (1.0 + GUARD_SLACK):
        gamma = -target
        guard_ok = True
    else:
        gamma = -0.5 * lam_min / t
        guard_ok = False
    return RecoveryResult(K=ridge_dmd(quantized_pair, gamma), gamma=gamma,
                          guard_ok=guard_ok, lambda_min=lam_min)


def objective_decomposition_check(pair: SnapshotPair,
                                  quantized_pair: SnapshotPair,
                                  a, epsilon: float) -> dict:
    """Compare the quantized least squares objective with its expected split.

    For any candidate operator A the expectation of the quantized
    objective (1/T)||PhiPrime_q - A Phi_q||_F^2 equals the clean
    objective plus N eps**2/12 plus (eps**2/12) ||A||_F^2. Returns the
    two sides evaluated on one realization and their gap, which shrinks
    as T grows.
    """
    if not (np.isfinite(epsilon) and epsilon > 0.0):
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    a = np.asarray(a, dtype=float)
    n = pair.n_observables
    if a.shape != (n, n):
        raise ShapeError(f"candidate operator must be {n} x {n}, got {a.shape}")
    if quantized_pair.Phi.shape != pair.Phi.shape:
        raise ShapeError("clean and quantized pairs differ in shape")
    t = pair.n_snapshots
    var = epsilon ** 2 / 12.0
    lhs = np.linalg.norm(
        quantized_pair.PhiPrime - a @ quantized_pair.Phi, "fro") ** 2 / t
    rhs = (np.linalg.norm(pair.PhiPrime - a @ pair.Phi, "fro") ** 2 / t
           + n * var + var * np.linalg.norm(a, "fro") ** 2)
    return {"lhs": float(lhs), "rhs": float(rhs), "gap": float(lhs - rhs)}
