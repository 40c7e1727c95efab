"""Symmetric Toeplitz matrices stored by their first row.

Products are computed through the circulant embedding of size ``2p - 2``
so that nothing of size ``p x p`` is ever formed on the hot paths.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.linalg

DENSE_LIMIT = 4096


class NotConvergedError(RuntimeError):
    """Raised by iterative routines that hit their iteration cap.

    The last iterate is kept on ``estimate`` so callers can decide whether
    it is good enough.
    """

    def __init__(self, message: str, estimate: float, iterations: int):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class ToeplitzMatrix:
    """Symmetric Toeplitz matrix ``(sigma_|i-j|)`` given by its first row."""

    first_row: np.ndarray = field(repr=False)

    def __post_init__(self):
        row = np.array(self.first_row, dtype=float).ravel()
        if row.size < 1:
            raise ValueError("first_row must hold at least one entry")
        if not np.all(np.isfinite(row)):
            raise ValueError("first_row entries must be finite")
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    @property
    def p(self) -> int:
        return self.first_row.size

    def __repr__(self):
        return f"ToeplitzMatrix(p={self.p}, sigma0={self.first_row[0]:.6g})"

    def __eq__(self, other):
        if not isinstance(other, ToeplitzMatrix):
            return NotImplemented
        return np.array_equal(self.first_row, other.first_row)

    def __sub__(self, other: "ToeplitzMatrix") -> "ToeplitzMatrix":
        if self.p != other.p:
            raise ValueError(f"dimension mismatch: {self.p} vs {other.p}")
        return ToeplitzMatrix(self.first_row - other.first_row)

    def __add__(self, other: "ToeplitzMatrix") -> "ToeplitzMatrix":
        if self.p != other.p:
            raise ValueError(f"dimension mismatch: {self.p} vs {other.p}")
        return ToeplitzMatrix(self.first_row + other.first_row)

    def scaled(self, c: float) -> "ToeplitzMatrix":
        return ToeplitzMatrix(c * self.first_row)

    def to_dense(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.first_row)

    @cached_property
    def embedding_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the circulant embedding (rfft half-spectrum)."""
        row = self.first_row
        if self.p == 1:
            return row.copy()
        circ = np.concatenate([row, row[-2:0:-1]])
        return np.fft.rfft(circ).real

    def matvec(self, v) -> np.ndarray:
        """Multiply by ``v``; a 2-D ``v`` is treated as a stack of rows."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.p:
            raise ValueError(f"vector length {v.shape[-1]} does not match p={self.p}")
        if self.p == 1:
            return self.first_row[0] * v
        size, lam = self._matvec_spectrum
        spec = scipy.fft.rfft(v, n=size, axis=-1) * lam
        return scipy.fft.irfft(spec, n=size, axis=-1)[..., : self.p]

    @cached_property
    def _matvec_spectrum(self):
        # any circulant of size >= 2p - 1 containing the matrix works for
        # products; a zero-padded one of FFT-friendly length is faster
        size = scipy.fft.next_fast_len(2 * self.p - 1, real=True)
        row = self.first_row
        circ = np.zeros(size)
        circ[: self.p] = row
        circ[size - self.p + 1 :] = row[:0:-1]
        return size, scipy.fft.rfft(circ).real

    def symbol(self, omega) -> np.ndarray:
        """Truncated symbol ``sigma_0 + 2 sum_k sigma_k cos(k omega)``."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        k = np.arange(1, self.p)
        return self.first_row[0] + 2.0 * np.cos(np.outer(omega, k)) @ self.first_row[1:]

    # serialization -------------------------------------------------------

    def to_csv(self, path) -> None:
        line = ",".join(repr(float(x)) for x in self.first_row)
        Path(path).write_text(line + "\n")

    @classmethod
    def from_csv(cls, path) -> "ToeplitzMatrix":
        text = Path(path).read_text().strip()
        if not text:
            raise ValueError(f"{path}: empty file")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) != 1:
            raise ValueError(f"{path}: expected a single row, found {len(lines)}")
        values = []
        for col, cell in enumerate(lines[0].split(","), start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise ValueError(f"{path}: row 1, column {col}: cannot parse {cell!r}") from None
        return cls(np.array(values))

    def to_bytes(self) -> bytes:
        return struct.pack("<q", self.p) + self.first_row.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ToeplitzMatrix":
        if len(data) < 8:
            raise ValueError("truncated header")
        (p,) = struct.unpack("<q", data[:8])
        if len(data) != 8 + 8 * p:
            raise ValueError(f"expected {8 + 8 * p} bytes for p={p}, got {len(data)}")
        return cls(np.frombuffer(data[8:], dtype="<f8").astype(float))


def _norm(v):
    # pairwise summation instead of BLAS: result must not depend on thread count
    return np.sqrt(np.sum(v * v))


def _start_vector(p: int) -> np.ndarray:
    # Centrosymmetric matrices have symmetric and skew-symmetric eigenvectors;
    # all-ones is orthogonal to every skew one, so a skew ramp is mixed in.
    v = np.ones(p) / np.sqrt(p)
    if p > 1:
        skew = np.linspace(-1.0, 1.0, p)
        v = v + skew / _norm(skew)
    return v / _norm(v)


def spectral_norm(
    t: ToeplitzMatrix, tol: float = 1e-10, max_iter: int = 20000, method: str = "lanczos"
) -> float:
    """Largest absolute eigenvalue of ``t`` using only fast products.

    ``method="power"`` runs plain power iteration; its running estimate is
    ``||T v||`` for unit ``v``, which increases monotonically to
    ``|lambda|_max`` even for indefinite ``T``, and it stops once successive
    estimates differ by less than ``tol`` relative. Eigenvalues of large
    Toeplitz matrices cluster at the top of the spectrum, so power
    iteration crawls there; ``method="lanczos"`` (deterministic start) is
    the default.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t.p == 1:
        return abs(float(t.first_row[0]))
    if not np.any(t.first_row):
        return 0.0
    if method == "lanczos":
        if t.p <= 64:
            return float(np.max(np.abs(scipy.linalg.eigvalsh(t.to_dense()))))
        return _lanczos_norm(t, tol, max_iter)
    if method not in ("power", "lanczos"):
        raise ValueError(f"unknown method {method!r}")

    v = _start_vector(t.p)
    w = t.matvec(v)
    est = _norm(w)
    if est == 0.0:
        # start vector in the null space; alternate signs instead
        v = np.where(np.arange(t.p) % 2, -1.0, 1.0) / np.sqrt(t.p)
        w = t.matvec(v)
        est = _norm(w)
        if est == 0.0:
            return 0.0
    for _ in range(max_iter):
        v = w / est
        w = t.matvec(v)
        new = _norm(w)
        if abs(new - est) < tol * abs(new):
            return float(new)
        est = new
    raise NotConvergedError(
        f"power iteration did not converge in {max_iter} iterations", float(est), max_iter
    )


def _lanczos_norm(t: ToeplitzMatrix, tol: float, max_iter: int, basis: int = 400) -> float:
    """Lanczos with full reorthogonalization and explicit restarts.

    The largest absolute Ritz value is a nondecreasing lower bound on the
    norm; it is checked every five steps and iteration stops when it moves
    by less than ``tol`` relative between checks. Ritz values converge fast even inside eigenvalue clusters,
    where residual-based stopping rules (ARPACK) stall.
    """
    basis = min(basis, t.p)
    v = _start_vector(t.p)
    est, total = 0.0, 0
    while total < max_iter:
        V = np.empty((basis, t.p))
        alpha, beta = [], []
        V[0] = v
        history = []
        for j in range(basis):
            w = t.matvec(V[j])
            a = float(np.sum(w * V[j]))
            w = w - a * V[j] - (beta[-1] * V[j - 1] if j else 0.0)
            for _ in range(2):  # two Gram-Schmidt passes
                Vj = V[: j + 1]
                w = w - (Vj @ w) @ Vj
            alpha.append(a)
            total += 1
            b = _norm(w)
            done = b <= 1e-14 * max(est, 1e-300)  # invariant subspace: Ritz values exact
            if done or j % 5 == 4 or j + 1 == basis or total >= max_iter:
                theta = scipy.linalg.eigvalsh_tridiagonal(np.array(alpha), np.array(beta))
                est = max(est, float(np.max(np.abs(theta))))
                history.append(est)
                if done or (len(history) > 1 and history[-1] - history[-2] <= tol * est):
                    return est
            if j + 1 < basis:
                beta.append(b)
                V[j + 1] = w / b
            if total >= max_iter:
                break
        theta, vecs = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta))
        v = vecs[:, int(np.argmax(np.abs(theta)))] @ V[: len(alpha)]
        v = v / _norm(v)
    raise NotConvergedError("Lanczos did not converge", est, total)


def min_eigenvalue_dense(t: ToeplitzMatrix) -> float:
    """Smallest eigenvalue via a dense symmetric eigensolver."""
    if t.p > DENSE_LIMIT:
        raise ValueError(
            f"p={t.p} exceeds the dense limit {DENSE_LIMIT}; subsample the first row"
        )
    return float(scipy.linalg.eigvalsh(t.to_dense(), subset_by_index=[0, 0])[0])


def l1_norm(t: ToeplitzMatrix) -> float:
    """Maximum absolute column sum, O(p) from the first row."""
    a = np.abs(t.first_row)
    c = np.cumsum(a)
    j = np.arange(t.p)
    # column j: |s0| + sum_{d=1}^{j} |s_d| + sum_{d=1}^{p-1-j} |s_d|
    cols = c[j] + c[t.p - 1 - j] - a[0]
    return float(cols.max())
