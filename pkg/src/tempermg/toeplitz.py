"""Symmetric Toeplitz operators with O(n log n) matvec via circulant embedding.

A symmetric Toeplitz matrix is fully determined by its first column.  We embed
it into a 2n x 2n circulant, diagonalize that once with an FFT, and apply the
operator as pad -> transform -> multiply -> inverse transform -> truncate.
The module also carries the dense O(n^2) reference semantics, a power-iteration
spectral-radius estimator, and a structural report (sign pattern, diagonal
dominance, Gershgorin bounds) used by the solver's admissibility checks.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft


class SymToeplitz:
    """Immutable symmetric Toeplitz operator ``T[i, j] = first_col[|i - j|]``.

    The circulant spectrum is cached at construction; ``matvec`` costs two
    real FFTs of length ~2n.  Instances are safe to share across threads
    (matvec allocates per-call scratch).
    """

    __slots__ = ("n", "first_col", "_fft_len", "_spec")

    def __init__(self, first_col):
        col = np.asarray(first_col, dtype=float)
        if col.ndim != 1 or col.size == 0:
            raise ValueError("first_col must be a nonempty 1-d real vector")
        if not np.all(np.isfinite(col)):
            raise ValueError("first_col contains non-finite entries")
        n = col.size
        col = col.copy()
        col.flags.writeable = False
        # Minimal embedding is 2n; next_fast_len may pad further for FFT
        # efficiency.  Extra padding is zero-filled and semantics-neutral.
        m = sfft.next_fast_len(2 * n, real=True)
        emb = np.zeros(m)
        emb[:n] = col
        if n > 1:
            emb[m - n + 1:] = col[1:][::-1]
        self.n = n
        self.first_col = col
        self._fft_len = m
        self._spec = sfft.rfft(emb)

    @property
    def circ_spectrum(self):
        """Eigenvalues of the minimal 2n x 2n circulant embedding.

        The embedding vector [t_0, .., t_{n-1}, 0, t_{n-1}, .., t_1] is real
        and even, so the spectrum is real up to roundoff.
        """
        emb = np.zeros(2 * self.n)
        emb[: self.n] = self.first_col
        if self.n > 1:
            emb[self.n + 1:] = self.first_col[1:][::-1]
        return np.fft.fft(emb)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of shape ({self.n},), got {x.shape}")
        return x

    def matvec(self, x):
        """y_i = sum_j first_col[|i-j|] x_j in O(n log n)."""
        x = self._check(x)
        y = sfft.irfft(sfft.rfft(x, self._fft_len) * self._spec, self._fft_len)
        return y[: self.n]

    def matvec_direct(self, x):
        """Dense O(n^2) reference semantics for matvec (testing oracle)."""
        x = self._check(x)
        idx = np.arange(self.n)
        y = np.empty(self.n)
        for i in range(self.n):
            y[i] = self.first_col[np.abs(i - idx)] @ x
        return y

    def dense(self):
        """Materialize the full matrix (small-n diagnostics only)."""
        idx = np.arange(self.n)
        return self.first_col[np.abs(idx[:, None] - idx[None, :])]


def new_sym_toeplitz(first_col) -> SymToeplitz:
    return SymToeplitz(first_col)


def power_iteration(apply, n, tol=1e-10, max_iter=10000):
    """Spectral-radius estimate of a symmetric PSD operator.

    Deterministic start (normalized all-ones); Rayleigh-quotient estimates,
    stopping when successive estimates differ relatively by less than ``tol``.
    Returns ``(estimate, converged)``.  With a clustered top spectrum, the
    successive-difference rule stops with a small low bias; callers needing
    percent-level accuracy should keep tol <= 1e-8.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.full(n, 1.0 / np.sqrt(n))
    rho_prev = np.inf
    rho = 0.0
    for _ in range(max_iter):
        w = apply(v)
        rho = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector is annihilated; spectral radius on its orbit is 0
            return 0.0, True
        v = w / nw
        if abs(rho - rho_prev) <= tol * max(abs(rho), np.finfo(float).tiny):
            return rho, True
        rho_prev = rho
    return rho, False


def structure_report(T: SymToeplitz) -> dict:
    """Sign-pattern / dominance report for a symmetric Toeplitz operator.

    M-matrix sign pattern: positive diagonal, off-diagonals <= 1e-14 * t_0
    (tolerance absorbs quadrature noise on entries that vanish analytically).
    Weak diagonal dominance is checked on the full-length row sum, which
    bounds every row of any finite section.
    """
    t0 = float(T.first_col[0])
    off = T.first_col[1:]
    off_sum = 2.0 * float(np.sum(np.abs(off)))
    return {
        "is_m_matrix_sign_pattern": bool(t0 > 0.0 and np.all(off <= 1e-14 * t0)),
        "is_weakly_diag_dominant": bool(t0 >= off_sum - 1e-12 * abs(t0)),
        "gershgorin_low": t0 - off_sum,
        "gershgorin_high": t0 + off_sum,
    }
