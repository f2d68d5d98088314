"""Reference spectra: dense ED, matrix-free Lanczos and Krylov Rayleigh-Ritz."""

from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels as K
from .hamiltonian import IsingHamiltonian

log = logging.getLogger(__name__)

DENSE_MAX_SITES = 12
LANCZOS_MAX_SITES = 20


class ConvergenceError(RuntimeError):
    def __init__(self, msg, best_residual):
        super().__init__(msg)
        self.best_residual = best_residual


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    method: str                              # dense | lanczos | krylov
    eigenvectors: np.ndarray | None = None   # shape (k, 2^N), lowest first
    residuals: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def ground_space(self, tol: float = 1e-8) -> np.ndarray:
        """Eigenvectors within ``tol`` of the lowest eigenvalue."""
        if self.eigenvectors is None:
            raise ValueError(f"{self.method} spectrum carries no eigenvectors")
        k = int(np.count_nonzero(self.eigenvalues[:len(self.eigenvectors)]
                                 - self.eigenvalues[0] <= tol))
        return self.eigenvectors[:k]

    def rows(self, L=None, h=None):
        res = self.residuals if self.residuals is not None else [None] * len(self.eigenvalues)
        for k, e in enumerate(self.eigenvalues):
            r = res[k] if k < len(res) else None
            yield {"method": self.method, "L": L, "h": h, "index": k,
                   "eigenvalue": float(e), "residual": None if r is None else float(r)}


def _residuals(H, vals, vecs):
    return np.array([np.linalg.norm(H.matvec(v) - e * v) for e, v in zip(vals, vecs)])


def dense_spectrum(H: IsingHamiltonian, k: int = 8) -> SpectrumResult:
    """Full spectrum by dense diagonalization; eigenvectors kept for the lowest ``k``."""
    if H.n_sites > DENSE_MAX_SITES:
        raise ValueError(f"dense ED refused for N={H.n_sites} > {DENSE_MAX_SITES}")
    vals, vecs = np.linalg.eigh(H.to_dense())
    k = min(k, len(vals))
    vecs = np.ascontiguousarray(vecs[:, :k].T).astype(np.complex128)
    return SpectrumResult(vals, "dense", vecs, _residuals(H, vals[:k], vecs))


def _lanczos_pass(H, k, max_iter, tol, rng, locked):
    dim = H.dim
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    for u in locked:
        v -= u * np.vdot(u, v)
    v /= np.linalg.norm(v)
    m = min(max_iter, dim - len(locked))
    V = np.empty((min(m, 64) + 1, dim), dtype=np.complex128)
    V[0] = v
    alpha, beta = [], []
    best = np.inf
    for j in range(m):
        if j + 1 >= V.shape[0]:
            V = np.concatenate([V, np.empty((min(V.shape[0], m + 1 - V.shape[0]), dim),
                                            dtype=V.dtype)])
        w = H.matvec(V[j])
        a = np.vdot(V[j], w).real
        w -= a * V[j]
        if j:
            w -= beta[-1] * V[j - 1]
        for u in locked:
            w -= u * np.vdot(u, w)
        for _ in range(2):
            w -= V[:j + 1].T @ (V[:j + 1].conj() @ w)
        b = np.linalg.norm(w)
        alpha.append(a)
        vals, s = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta))
        nk = min(k, len(vals))
        est = np.abs(b * s[-1, :nk])
        best = min(best, est.max())
        if (nk == k and est.max() < tol) or b < 1e-13 or j == m - 1:
            break
        beta.append(b)
        V[j + 1] = w / b
    nk = min(k, len(vals))
    vecs = (V[:len(alpha)].T @ s[:, :nk]).T
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vals[:nk], vecs, best, len(alpha)


def lanczos_lowest(H: IsingHamiltonian, k: int = 4, max_iter: int = 500,
                   tol: float = 1e-10, seed: int = 1234) -> SpectrumResult:
    """Lowest ``k`` eigenpairs with a fully reorthogonalized Lanczos iteration.

    A second pass in the complement of the converged vectors catches eigenvalues
    a single Krylov sequence cannot resolve (exact degeneracies).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = H.n_sites
    if n > LANCZOS_MAX_SITES:
        raise ValueError(f"Lanczos eigenvectors refused for N={n} > {LANCZOS_MAX_SITES}; "
                         "use lanczos_ground_energy")
    rng = np.random.default_rng(seed)
    vals, vecs, best, iters = _lanczos_pass(H, k, max_iter, tol, rng, [])
    res = _residuals(H, vals, vecs)
    if res.max() > max(tol, 1e-8) * max(1.0, abs(vals[0])):
        raise ConvergenceError(f"Lanczos did not converge in {max_iter} iterations "
                               f"(best residual {res.max():.2e})", res.max())
    vals, vecs = list(vals), list(vecs)
    while len(vecs) < H.dim:
        v2, w2, _, _ = _lanczos_pass(H, 1, max_iter, tol, rng, vecs)
        if len(vals) >= k and v2[0] >= vals[k - 1] - max(tol, 1e-9):
            break
        vals.append(v2[0])
        vecs.append(w2[0])
        order = np.argsort(vals)
        vals = [vals[i] for i in order][:k]
        vecs = [vecs[i] for i in order][:k]
    vals = np.array(vals)
    vecs = np.array(vecs)
    return SpectrumResult(vals, "lanczos", vecs, _residuals(H, vals, vecs),
                          {"seed": seed, "iterations": iters})


def lanczos_ground_energy(H: IsingHamiltonian, max_iter: int = 400, tol: float = 1e-8,
                          seed: int = 1234, allow_large: bool = False) -> SpectrumResult:
    """Lowest eigenvalue only, from the plain three-term recurrence.

    Only three real vectors are held, so this reaches N=25 (256 MB per vector).
    Without reorthogonalization spurious copies of converged Ritz values can
    appear, but the lowest Ritz value itself stays an upper bound that converges
    to E0.  Iteration stops when it changes by less than ``tol`` (relative) over
    ten steps.
    """
    n = H.n_sites
    if n > LANCZOS_MAX_SITES and not allow_large:
        raise ValueError(f"Lanczos refused for N={n} > {LANCZOS_MAX_SITES} without allow_large")
    diag = H.zz_diagonal()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(H.dim)
    v /= np.linalg.norm(v)
    v_prev = np.zeros_like(v)
    w = np.empty_like(v)
    alpha, beta = [], []
    history = []
    b = 0.0
    for j in range(max_iter):
        K.apply_h(v, diag, H.h, n, w)
        a = float(v @ w)
        w -= a * v
        w -= b * v_prev
        alpha.append(a)
        e0 = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta),
                                           eigvals_only=True, select="i",
                                           select_range=(0, 0))[0]
        history.append(e0)
        b = float(np.linalg.norm(w))
        if b < 1e-13 or (j >= 10 and abs(history[-11] - e0) < tol * max(1.0, abs(e0))):
            break
        beta.append(b)
        v_prev, v = v, v_prev
        np.divide(w, b, out=v)
    else:
        raise ConvergenceError(f"Lanczos ground energy not converged in {max_iter} steps",
                               abs(history[-11] - history[-1]))
    return SpectrumResult(np.array([history[-1]]), "lanczos",
                          meta={"seed": seed, "iterations": len(alpha)})


def reference_spectrum(H: IsingHamiltonian, k: int = 4, seed: int = 1234) -> SpectrumResult:
    """Dense ED up to N=12, Lanczos beyond."""
    if H.n_sites <= DENSE_MAX_SITES:
        return dense_spectrum(H, k=max(k, 8))
    return lanczos_lowest(H, k=k, seed=seed)


def excitation_gap(spectrum) -> float:
    vals = getattr(spectrum, "eigenvalues", spectrum)
    vals = np.sort(np.asarray(vals, dtype=float))
    if vals.size < 2:
        raise ValueError("gap needs at least two eigenvalues")
    gap = float(vals[1] - vals[0])
    if gap < -1e-10:
        raise ValueError(f"negative gap {gap}")
    return max(gap, 0.0)


# ---------------------------------------------------------------------------
# Krylov Rayleigh-Ritz
# ---------------------------------------------------------------------------

@dataclass
class KrylovConfig:
    references: list
    dimension: int = 96
    ortho_tol: float = 1e-8
    overlap_cutoff: float = 1e-10
    precision: str = "double"           # basis storage: double | single
    memory_budget: float = 3e9          # bytes for the stored basis

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("Krylov dimension must be >= 1")
        if not (0 < self.ortho_tol < 1e-2 and 0 < self.overlap_cutoff < 1e-2):
            raise ValueError("ortho_tol and overlap_cutoff must be small positive numbers")
        if self.precision not in ("double", "single"):
            raise ValueError(f"precision must be 'double' or 'single', got {self.precision!r}")
        if not self.references:
            raise ValueError("need at least one reference state")


def default_references(H: IsingHamiltonian, n_classical: int = 4,
                       dtype=np.complex128) -> list[np.ndarray]:
    """|+>^N plus up to ``n_classical`` classical ground configurations.

    The configurations are the lowest entries of the cached ZZ diagonal, so
    this works at any size the Hamiltonian itself can be built for.  All
    references are real; pass ``dtype=np.float32`` to keep them small.
    """
    refs = [np.full(H.dim, 2.0 ** (-H.n_sites / 2), dtype=dtype)]
    if n_classical:
        diag = H.zz_diagonal()
        for b in np.flatnonzero(diag == diag.min())[:n_classical]:
            r = np.zeros(H.dim, dtype=dtype)
            r[b] = 1.0
            refs.append(r)
    return refs


class KrylovBasis:
    """Nested orthonormal Krylov basis with its projected Hamiltonian."""

    def __init__(self, H: IsingHamiltonian, cfg: KrylovConfig):
        refs = [np.asarray(r) for r in cfg.references]
        for r in refs:
            if r.shape != (H.dim,):
                raise ValueError("reference state has the wrong dimension")
            tol = 1e-8 if np.finfo(r.dtype).eps < 1e-10 else 1e-5
            if abs(np.sqrt(np.sum(np.abs(r) ** 2, dtype=np.float64)) - 1.0) > tol:
                raise ValueError("reference states must be normalized")
        self.real = all(not np.iscomplexobj(r) or not np.any(r.imag) for r in refs)
        work = np.float64 if self.real else np.complex128
        store = {(True, "double"): np.float64, (True, "single"): np.float32,
                 (False, "double"): np.complex128, (False, "single"): np.complex64}
        self.dtype = store[self.real, cfg.precision]
        need = cfg.dimension * H.dim * np.dtype(self.dtype).itemsize
        if need > cfg.memory_budget:
            raise MemoryError(f"Krylov basis needs {need / 1e9:.2f} GB, budget is "
                              f"{cfg.memory_budget / 1e9:.2f} GB")
        self.H, self.cfg, self._work = H, cfg, work
        self.Q = np.empty((cfg.dimension, H.dim), dtype=self.dtype)
        self.size = 0
        self.Hsub = np.zeros((cfg.dimension, cfg.dimension), dtype=work)
        self.dropped = 0
        self._S = None
        self._build(refs)

    def _orthogonalize(self, w):
        # modified Gram-Schmidt, two passes
        for _ in range(2):
            for m in range(self.size):
                q = self.Q[m]
                w -= q * np.vdot(q, w)
        return w

    def _try_add(self, w):
        nrm0 = np.linalg.norm(w)
        if nrm0 == 0:
            self.dropped += 1
            return None
        w = self._orthogonalize(w / nrm0)
        nrm = np.linalg.norm(w)
        if nrm < self.cfg.ortho_tol:
            self.dropped += 1
            return None
        self.Q[self.size] = w / nrm
        self.size += 1
        return self.size - 1

    def _matvec(self, q):
        diag = self.H.zz_diagonal()
        out = np.empty(q.shape, dtype=self._work)
        return K.apply_h(q.astype(self._work), diag, self.H.h, self.H.n_sites, out)

    def _build(self, refs):
        D = self.cfg.dimension
        queue = deque()
        for r in refs:
            if self.size < D:
                i = self._try_add(r.real.astype(self._work) if self.real else r.astype(self._work))
                if i is not None:
                    queue.append(i)
        if not self.size:
            raise ValueError("all Krylov candidate vectors were dropped")
        while queue:
            i = queue.popleft()
            w = self._matvec(self.Q[i])
            col = self._dots(self.size, w)
            self.Hsub[:self.size, i] = col
            self.Hsub[i, :self.size] = col.conj()
            if self.size < D:
                j = self._try_add(w)
                if j is not None:
                    queue.append(j)
        log.debug("Krylov basis: kept %d, dropped %d", self.size, self.dropped)

    def _dots(self, d, w):
        # <q_m|w> for m < d, accumulated in working precision
        if self.dtype == self._work:
            return self.Q[:d].conj() @ w
        return np.array([np.vdot(self.Q[m].astype(self._work), w) for m in range(d)])

    def _gram(self):
        if self._S is None or self._S.shape[0] != self.size:
            if self.dtype == self._work:
                Q = self.Q[:self.size]
                self._S = Q.conj() @ Q.T
            else:
                self._S = np.array([self._dots(self.size, self.Q[m].astype(self._work))
                                    for m in range(self.size)]).conj()
        return self._S

    def ritz_values(self, d: int | None = None) -> np.ndarray:
        """Ritz values from the leading ``d`` basis vectors (nested subspaces)."""
        d = self.size if d is None else min(d, self.size)
        S = self._gram()[:d, :d]
        Hs = self.Hsub[:d, :d]
        return solve_generalized(Hs, S, self.cfg.overlap_cutoff)


def solve_generalized(Hs, S, overlap_cutoff=1e-10):
    """Eigenvalues of H c = E S c after dropping near-null overlap directions."""
    Hs = 0.5 * (Hs + Hs.conj().T)
    S = 0.5 * (S + S.conj().T)
    s, U = np.linalg.eigh(S)
    keep = s > overlap_cutoff
    if not keep.any():
        raise ValueError("overlap matrix is numerically zero")
    X = U[:, keep] / np.sqrt(s[keep])
    return np.linalg.eigvalsh(X.conj().T @ Hs @ X)


def krylov_rayleigh_ritz(H: IsingHamiltonian, cfg: KrylovConfig) -> SpectrumResult:
    basis = KrylovBasis(H, cfg)
    vals = basis.ritz_values()
    return SpectrumResult(vals, "krylov", meta={"dimension": basis.size,
                                                "dropped": basis.dropped,
                                                "precision": cfg.precision})


def krylov_trace(H: IsingHamiltonian, cfg: KrylovConfig, dims=None) -> list[tuple[int, float]]:
    """(D, E0(D)) pairs from one nested basis."""
    basis = KrylovBasis(H, cfg)
    dims = range(1, basis.size + 1) if dims is None else [d for d in dims if d <= basis.size]
    return [(d, float(basis.ritz_values(d)[0])) for d in dims]


def write_spectrum_csv(path, rows) -> None:
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["method", "L", "h", "index", "eigenvalue", "residual"])
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
