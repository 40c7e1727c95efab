"""Dense reference implementations shared by several test modules."""
import numpy as np


def basis_matrix(N):
    """Columns 1, sqrt2 cos, sqrt2 sin (j < N/2), sqrt2 cos at Nyquist; plus penalty weights."""
    x = np.arange(N) / N
    cols, freqs = [np.ones(N)], [0]
    for j in range(1, N // 2):
        cols += [np.sqrt(2) * np.cos(2 * np.pi * j * x), np.sqrt(2) * np.sin(2 * np.pi * j * x)]
        freqs += [j, j]
    cols.append(np.sqrt(2) * np.cos(np.pi * N * x))
    freqs.append(N // 2)
    return np.column_stack(cols), np.array(freqs, dtype=float)


def dense_fit(z, h, q):
    N = z.size
    B, freqs = basis_matrix(N)
    P = np.diag((2 * np.pi * freqs) ** (2 * q) * h ** (2 * q))
    c = np.linalg.solve(B.T @ B / N + P, B.T @ z / N)
    a = np.r_[c[0], c[1:-1:2], c[-1]]
    b = np.r_[c[2:-1:2], 0.0]
    S = B @ np.linalg.solve(B.T @ B / N + P, B.T / N)
    return a, b, B @ c, S
