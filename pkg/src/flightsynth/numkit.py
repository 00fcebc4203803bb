"""Numeric kernels shared by the generators and the evaluation stages."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

CDF_EPS = 1e-6
BANDWIDTH_FLOOR = 1e-6
PSD_FLOOR = 1e-6

# query points x samples evaluated per block in KDE kernels
_KDE_BLOCK = 1 << 22


# -- standard normal -------------------------------------------------------
def normal_cdf(x):
    """Standard normal CDF (erfc-based, accurate in both tails)."""
    return special.ndtr(x)


def normal_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def normal_quantile(p):
    """Inverse standard normal CDF for p in the open interval (0, 1)."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("normal_quantile requires 0 < p < 1")
    return special.ndtri(arr)


# -- RNG ---------------------------------------------------------------------
def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, stream_id)``.

    PCG64 seeded through SeedSequence; the bit stream is fixed by numpy's
    stability policy for these two components, so it is platform independent.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**63 - 1), int(stream_id)])))


# -- KDE marginals -----------------------------------------------------------
@dataclass(frozen=True)
class KdeMarginal:
    """Gaussian-kernel density estimate of a single column."""

    samples: np.ndarray  # sorted
    bandwidth: float

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def support(self) -> tuple[float, float]:
        h = self.bandwidth
        return float(self.samples[0] - 3 * h), float(self.samples[-1] + 3 * h)

    def cdf(self, x):
        return kde_cdf(self, x)

    def quantile(self, u):
        return kde_quantile(self, u)

    def to_json(self) -> dict:
        return {"samples": self.samples.tolist(), "bandwidth": self.bandwidth}

    @classmethod
    def from_json(cls, obj) -> "KdeMarginal":
        return cls(np.asarray(obj["samples"], dtype=np.float64), float(obj["bandwidth"]))


def silverman_bandwidth(samples: np.ndarray) -> float:
    n = len(samples)
    sd = float(np.std(samples, ddof=1))
    if sd == 0.0:
        return BANDWIDTH_FLOOR
    return 1.06 * sd * n ** (-0.2)


def kde_fit(samples) -> KdeMarginal:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if len(x) < 2:
        raise ValueError("kde_fit needs at least 2 samples")
    if not np.isfinite(x).all():
        raise ValueError("kde_fit samples must be finite")
    return KdeMarginal(np.sort(x), silverman_bandwidth(x))


def _kde_raw(m: KdeMarginal, x: np.ndarray, with_pdf: bool = False):
    """Unclamped mixture CDF (and optionally density) at points ``x``."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    F = np.empty_like(flat)
    f = np.empty_like(flat) if with_pdf else None
    h, s, n = m.bandwidth, m.samples, m.n
    step = max(1, _KDE_BLOCK // n)
    for a in range(0, len(flat), step):
        t = (flat[a:a + step, None] - s[None, :]) / h
        F[a:a + step] = special.ndtr(t).sum(axis=1) / n
        if with_pdf:
            f[a:a + step] = np.exp(-0.5 * t * t).sum(axis=1) / (n * h * np.sqrt(2 * np.pi))
    if with_pdf:
        return F.reshape(x.shape), f.reshape(x.shape)
    return F.reshape(x.shape)


def kde_cdf(m: KdeMarginal, x):
    """Mixture CDF ``mean_i Phi((x - x_i)/h)`` clamped to [1e-6, 1 - 1e-6]."""
    out = np.clip(_kde_raw(m, x), CDF_EPS, 1.0 - CDF_EPS)
    return out if np.ndim(out) else float(out)


def kde_quantile(m: KdeMarginal, u, max_iter: int = 200):
    """Invert :func:`kde_cdf` by safeguarded Newton-bisection.

    The search bracket is ``[min - 5h, max + 5h]``: the raw CDF there is
    below ``Phi(-5) < 1e-6`` (above ``1 - 1e-6``), so every clamped ``u`` is
    bracketed.  Each point stops once its bracket is narrower than
    ``1e-9 * (1 + |x|)`` and ``|cdf(x) - u| <= 1e-8``, or the bracket cannot
    be split further in floating point.
    """
    u_arr = np.clip(np.asarray(u, dtype=np.float64), CDF_EPS, 1.0 - CDF_EPS)
    shape = u_arr.shape
    uu = u_arr.ravel()
    h = m.bandwidth
    lo = np.full(uu.shape, m.samples[0] - 5 * h)
    hi = np.full(uu.shape, m.samples[-1] + 5 * h)

    # coarse grid for the starting bracket
    grid = np.linspace(lo[0], hi[0], 257)
    Fg = _kde_raw(m, grid)
    j = np.clip(np.searchsorted(Fg, uu, side="left"), 1, len(grid) - 1)
    lo = grid[j - 1].copy()
    hi = grid[j].copy()
    Flo, Fhi = Fg[j - 1], Fg[j]
    span = np.where(Fhi > Flo, Fhi - Flo, 1.0)
    x = lo + (hi - lo) * np.clip((uu - Flo) / span, 0.0, 1.0)

    active = np.ones(uu.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xi = x[idx]
        F, f = _kde_raw(m, xi, with_pdf=True)
        below = F < uu[idx]
        lo[idx] = np.where(below, xi, lo[idx])
        hi[idx] = np.where(below, hi[idx], xi)
        tol = 1e-9 * (1.0 + np.abs(xi))
        width = hi[idx] - lo[idx]
        close = np.abs(F - uu[idx]) <= 1e-8
        mid = 0.5 * (lo[idx] + hi[idx])
        stuck = (mid <= lo[idx]) | (mid >= hi[idx])
        done = (close & (width <= tol)) | stuck
        # Newton step, fallback to bisection when it leaves the bracket
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xi - (F - uu[idx]) / f
        ok = np.isfinite(newton) & (newton > lo[idx]) & (newton < hi[idx])
        nxt = np.where(ok, newton, mid)
        # a converged Newton iterate still needs a closed bracket: probe
        # just either side of it so the next evaluation narrows the interval
        small = ok & (np.abs(newton - xi) < 0.5 * tol) & ~done
        probe = np.where(below, xi + 0.5 * tol, xi - 0.5 * tol)
        probe_ok = (probe > lo[idx]) & (probe < hi[idx])
        nxt = np.where(small & probe_ok, probe, nxt)
        x[idx] = np.where(done, x[idx], nxt)
        # report the bracket end closest to u when done
        active[idx[done]] = False
    out = x.reshape(shape)
    return out if out.ndim else float(out)


# -- correlation / Cholesky --------------------------------------------------
def repair_correlation(matrix: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale to unit diagonal."""
    a = 0.5 * (matrix + matrix.T)
    w, v = np.linalg.eigh(a)
    if w.min() >= floor:
        out = a.copy()
    else:
        w = np.maximum(w, floor)
        out = (v * w) @ v.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def cholesky_psd(matrix) -> np.ndarray:
    """Lower Cholesky factor, repairing a non positive-definite input first.

    Raises ``ValueError`` for inputs that are not symmetric within 1e-10.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("cholesky_psd expects a square matrix")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10):
        raise ValueError("cholesky_psd expects a symmetric matrix")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(repair_correlation(a))


@dataclass(frozen=True)
class CorrelationMatrix:
    theta: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_matrix(cls, matrix) -> "CorrelationMatrix":
        theta = repair_correlation(np.asarray(matrix, dtype=np.float64))
        return cls(theta, np.linalg.cholesky(theta))


# -- PCA ---------------------------------------------------------------------
def _dominant_eigenpair(a: np.ndarray, tol: float = 1e-10, max_iter: int = 1000):
    """Dominant eigenpair of a symmetric PSD matrix by power iteration.

    Each iteration squares the (normalized) iteration matrix, so ``k``
    iterations act like ``2**k`` plain power steps; this keeps nearly equal
    eigenvalues from stalling convergence.  A final plain step and the
    Rayleigh quotient give the returned pair.
    """
    d = a.shape[0]
    scale = np.abs(a).max()
    if scale == 0.0:
        v = np.zeros(d)
        v[0] = 1.0
        return 0.0, v
    m = a / scale
    x0 = np.ones(d) / np.sqrt(d) + np.arange(1, d + 1) * 1e-3
    v = x0 / np.linalg.norm(x0)
    for _ in range(max_iter):
        w = m @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        w /= nw
        if w @ v < 0:
            w = -w
        diff = np.linalg.norm(w - v)
        v = w
        if diff < tol:
            break
        mm = m @ m
        m = mm / np.abs(mm).max()
    w = a @ v
    if np.linalg.norm(w) > 0:
        v = w / np.linalg.norm(w)
    lam = float(v @ a @ v)
    return lam, v


def _sign_fix(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def top_eigenvectors(a: np.ndarray, k: int = 2):
    """Top-``k`` eigenpairs via deflated power iteration."""
    a = np.array(a, dtype=np.float64)
    vals, vecs = [], []
    for _ in range(k):
        lam, v = _dominant_eigenpair(a)
        v = _sign_fix(v)
        vals.append(lam)
        vecs.append(v)
        a = a - lam * np.outer(v, v)
    return np.array(vals), np.array(vecs)


@dataclass(frozen=True)
class PcaModel:
    means: np.ndarray
    scales: np.ndarray
    kept: np.ndarray  # indices of non-constant input columns
    components: np.ndarray  # (2, len(kept)), orthonormal rows
    explained: np.ndarray  # variance shares of the two components
    n_features: int


def pca_fit(matrix) -> PcaModel:
    """Two-component PCA on standardized columns (constant columns dropped)."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 2:
        raise ValueError("pca_fit needs an n x d matrix with n >= 3, d >= 2")
    means = x.mean(axis=0)
    scales = x.std(axis=0)
    kept = np.flatnonzero(scales > 1e-12 * np.maximum(1.0, np.abs(means)))
    if len(kept) < 2:
        raise ValueError("pca_fit needs at least 2 non-constant columns")
    z = (x[:, kept] - means[kept]) / scales[kept]
    corr = (z.T @ z) / len(z)
    corr = 0.5 * (corr + corr.T)
    vals, vecs = top_eigenvectors(corr, 2)
    total = float(np.trace(corr))
    explained = np.clip(vals / total, 0.0, 1.0)
    return PcaModel(means, np.where(scales > 0, scales, 1.0), kept, vecs, explained, x.shape[1])


def pca_project(model: PcaModel, matrix) -> np.ndarray:
    """Standardize with the model's (fit-data) parameters and project."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got {x.shape}")
    k = model.kept
    z = (x[:, k] - model.means[k]) / model.scales[k]
    return z @ model.components.T
