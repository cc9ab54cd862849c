"""Trajectory compression: Gaussian RBF weights followed by PCA.

A ``D x T`` trajectory is first fitted row by row with ``K`` Gaussian bumps
spread evenly over the knots, giving ``D*K`` weights.  The stacked weights of
a whole database are then reduced to ``M`` principal components.  Both stages
are linear, so decompression is two matrix products.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import FORMAT_VERSION, Trajectory, config_hash

log = logging.getLogger(__name__)

RIDGE = 1e-10
# Gaussian width in units of centre spacing.  Narrower bumps leave ripple at
# the knot scale, which finite-difference controls amplify by 1/dt^2.
OVERLAP = 2.0


class CodecError(ValueError):
    pass


class ConditionWarning(RuntimeWarning):
    """The RBF design matrix was rank deficient and a ridge term was added."""


@dataclass(frozen=True, eq=False)
class RbfBasis:
    T: int
    K: int
    centers: np.ndarray
    sigma: float
    Phi: np.ndarray

    def to_dict(self) -> dict:
        return {"T": self.T, "K": self.K, "overlap": self.sigma / _spacing(self.T, self.K)}


@dataclass(frozen=True, eq=False)
class RbfWeights:
    w: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.w)):
            raise CodecError("RBF weights must be finite")

    def stacked(self) -> np.ndarray:
        return self.w.reshape(-1)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    discarded_variance: float

    @property
    def M(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "discarded_variance": self.discarded_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(d["mean"], dtype=float),
            components=np.asarray(d["components"], dtype=float).reshape(-1, len(d["mean"])),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
            discarded_variance=float(d["discarded_variance"]),
        )


@dataclass(frozen=True, eq=False)
class CompressedMotion:
    yhat: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.yhat)):
            raise CodecError("compressed motion must be finite")


def _spacing(T: int, K: int) -> float:
    return (T - 1) / (K - 1) if K > 1 else float(T - 1)


def build_basis(T: int, K: int, overlap: float = OVERLAP) -> RbfBasis:
    """Gaussian bumps with equally spaced centres over knots ``0 .. T-1``.

    The width is ``overlap`` times the centre spacing.  A single basis sits at
    the middle of the grid.
    """
    if T < 2:
        raise CodecError("need at least two knots")
    if not 1 <= K <= T:
        raise CodecError(f"basis count K={K} must lie in [1, T={T}]")
    if not overlap > 0:
        raise CodecError("overlap must be positive")
    centers = np.linspace(0.0, T - 1, K) if K > 1 else np.array([(T - 1) / 2.0])
    sigma = overlap * _spacing(T, K)
    t = np.arange(T, dtype=float)[:, None]
    Phi = np.exp(-((t - centers[None, :]) ** 2) / (2.0 * sigma * sigma))
    return RbfBasis(T=T, K=K, centers=centers, sigma=float(sigma), Phi=Phi)


def _lstsq(Phi: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Least squares ``Phi @ W = Y`` through a QR factorisation.

    Falls back to a ridge-regularised normal equation when ``Phi`` is
    numerically rank deficient.
    """
    Q, R = np.linalg.qr(Phi)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        cond = np.linalg.cond(Phi)
        warnings.warn(f"RBF design matrix is ill-conditioned (cond={cond:.3g}); using ridge {RIDGE}", ConditionWarning)
        G = Phi.T @ Phi + RIDGE * np.eye(Phi.shape[1])
        return np.linalg.solve(G, Phi.T @ Y)
    return np.linalg.solve(R, Q.T @ Y)


def encode_rbf(traj: Trajectory, basis: RbfBasis) -> RbfWeights:
    if traj.knots != basis.T:
        raise CodecError(f"trajectory has {traj.knots} knots, basis expects {basis.T}")
    w = _lstsq(basis.Phi, traj.values.T).T
    return RbfWeights(np.ascontiguousarray(w))


def decode_rbf(weights: RbfWeights, basis: RbfBasis, dt: float = 1.0) -> Trajectory:
    w = np.asarray(weights.w)
    if w.shape[1] != basis.K:
        raise CodecError(f"weights have {w.shape[1]} columns, basis has {basis.K}")
    return Trajectory(w @ basis.Phi.T, dt)


def pca_fit(W: np.ndarray, M: int) -> PcaModel:
    """Principal components of the rows of ``W`` (``N x DK``).

    Eigenvalues use the unbiased ``N-1`` normalisation.  ``discarded_variance``
    is the sum of the dropped eigenvalues.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] < 2:
        raise CodecError("PCA needs a 2-D array with at least two rows")
    N, dim = W.shape
    if not 1 <= M <= min(N, dim):
        raise CodecError(f"M={M} must lie in [1, min(N, DK)={min(N, dim)}]")
    mean = W.mean(axis=0)
    X = W - mean
    # the SVD of the centred data avoids forming a DK x DK covariance
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    eig = s * s / (N - 1)
    components = Vt[:M]
    # deterministic sign: largest-magnitude entry of each component is positive
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(M), idx])
    components = components * signs[:, None]
    return PcaModel(
        mean=mean,
        components=np.ascontiguousarray(components),
        eigenvalues=eig[:M].copy(),
        discarded_variance=float(eig[M:].sum()),
    )


def pca_rank(W: np.ndarray, rtol: float = 1e-9) -> int:
    """Numerical rank of the centred rows of ``W``."""
    W = np.asarray(W, dtype=float)
    s = np.linalg.svd(W - W.mean(axis=0), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def pca_encode(model: PcaModel, w) -> CompressedMotion:
    w = np.asarray(w, dtype=float)
    if w.shape != (model.dim,):
        raise CodecError(f"expected a vector of length {model.dim}, got shape {w.shape}")
    return CompressedMotion(model.components @ (w - model.mean))


def pca_decode(model: PcaModel, yhat) -> np.ndarray:
    y = yhat.yhat if isinstance(yhat, CompressedMotion) else np.asarray(yhat, dtype=float)
    if y.shape != (model.M,):
        raise CodecError(f"expected {model.M} components, got shape {y.shape}")
    return model.mean + model.components.T @ y


def compress(traj: Trajectory, basis: RbfBasis, pca: PcaModel) -> CompressedMotion:
    return pca_encode(pca, encode_rbf(traj, basis).stacked())


def decompress(yhat, basis: RbfBasis, pca: PcaModel, dt: float = 1.0) -> Trajectory:
    w = pca_decode(pca, yhat).reshape(-1, basis.K)
    return decode_rbf(RbfWeights(w), basis, dt)


@dataclass(frozen=True, eq=False)
class Codec:
    """Basis plus PCA for one signal (configurations or controls)."""

    basis: RbfBasis
    pca: PcaModel
    dt: float

    @property
    def M(self) -> int:
        return self.pca.M

    def compress(self, traj: Trajectory) -> np.ndarray:
        return compress(traj, self.basis, self.pca).yhat

    def decompress(self, yhat) -> Trajectory:
        return decompress(yhat, self.basis, self.pca, self.dt)

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "dt": self.dt, "basis": self.basis.to_dict(), "pca": self.pca.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Codec":
        if d.get("format_version") != FORMAT_VERSION:
            raise CodecError(f"unsupported codec format version {d.get('format_version')!r}")
        b = d["basis"]
        return cls(build_basis(b["T"], b["K"], b["overlap"]), PcaModel.from_dict(d["pca"]), float(d["dt"]))

    def hash(self) -> str:
        return config_hash(self.to_dict())


def fit_codec(trajs, K: int, M: int, overlap: float = OVERLAP) -> Codec:
    """Fit a codec on a list of equally shaped trajectories.

    ``M`` is reduced, with a warning, when the stacked weights have lower rank.
    """
    trajs = list(trajs)
    if len(trajs) < 2:
        raise CodecError("need at least two trajectories to fit a codec")
    basis = build_basis(trajs[0].knots, K, overlap)
    W = np.stack([encode_rbf(t, basis).stacked() for t in trajs])
    limit = min(len(trajs), W.shape[1])
    rank = max(pca_rank(W), 1)
    M_eff = min(M, limit, rank)
    if M_eff < M:
        warnings.warn(f"requested M={M} exceeds the available rank {min(rank, limit)}; using M={M_eff}", UserWarning)
        log.warning("reducing PCA components from %d to %d", M, M_eff)
    return Codec(basis, pca_fit(W, M_eff), trajs[0].dt)
