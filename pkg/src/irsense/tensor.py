"""Third-order complex tensors: unfoldings, vector products and rank-one HOSVD.

Tensors are plain ``numpy`` arrays of shape ``(N1, N2, N3)``. Indices below
are zero-based; the unfolding column maps are

* mode 1: ``out[i, k*N2 + j] = t[i, j, k]``  (shape ``N1 x N2*N3``)
* mode 2: ``out[j, k*N1 + i] = t[i, j, k]``  (shape ``N2 x N1*N3``)
* mode 3: ``out[k, j*N1 + i] = t[i, j, k]``  (shape ``N3 x N1*N2``)

so that for ``t = outer3(a, b, c)``::

    unfold(t, 1) == a (c kron b)^T
    unfold(t, 2) == b (c kron a)^T
    unfold(t, 3) == c (b kron a)^T
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ParameterError

# axis permutation applied before the C-order reshape, per mode
_PERMUTATIONS = {1: (0, 2, 1), 2: (1, 2, 0), 3: (2, 1, 0)}

POWER_RTOL = 1e-12
POWER_MAX_ITER = 500


def _as_tensor(t) -> np.ndarray:
    t = np.asarray(t)
    if t.ndim != 3 or 0 in t.shape:
        raise ParameterError(f"expected a nonempty third-order array, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ParameterError("tensor has non-finite entries")
    return t


def _as_vector(v, name="vector") -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise ParameterError(f"{name} must be a nonempty 1-D array, got shape {v.shape}")
    return v


def _check_mode(mode) -> int:
    if mode not in _PERMUTATIONS:
        raise ParameterError(f"mode must be 1, 2 or 3, got {mode!r}")
    return int(mode)


def unfold(t, mode: int) -> np.ndarray:
    """Matricize ``t`` along ``mode`` (1, 2 or 3)."""
    t = _as_tensor(t)
    mode = _check_mode(mode)
    perm = _PERMUTATIONS[mode]
    moved = np.transpose(t, perm)
    return np.ascontiguousarray(moved).reshape(t.shape[perm[0]], -1)


def fold(m, mode: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    mode = _check_mode(mode)
    m = np.asarray(m)
    perm = _PERMUTATIONS[mode]
    permuted_shape = tuple(shape[p] for p in perm)
    if m.shape != (permuted_shape[0], permuted_shape[1] * permuted_shape[2]):
        raise ParameterError(f"matrix of shape {m.shape} cannot fold into {shape} along mode {mode}")
    inverse = np.argsort(perm)
    return np.ascontiguousarray(np.transpose(m.reshape(permuted_shape), inverse))


def outer3(a, b, c) -> np.ndarray:
    """Rank-one tensor with entries ``a[i] * b[j] * c[k]``."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    c = _as_vector(c, "c")
    return np.einsum("i,j,k->ijk", a, b, c)


def kron_vec(a, b) -> np.ndarray:
    """Kronecker product of two vectors, ``out[i*len(b) + j] = a[i] * b[j]``."""
    return np.kron(_as_vector(a, "a"), _as_vector(b, "b"))


def hadamard_vec(a, b) -> np.ndarray:
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.size} vs {b.size}")
    return a * b


def phase_normalize(u: np.ndarray) -> np.ndarray:
    """Rotate ``u`` so its largest-magnitude entry is real and nonnegative.

    Ties in magnitude go to the lowest index (``np.argmax`` semantics).
    """
    k = int(np.argmax(np.abs(u)))
    if u[k] == 0:
        return u
    return u * (np.conj(u[k]) / np.abs(u[k]))


def _dominant_eigvec(gram: np.ndarray) -> tuple[np.ndarray, float]:
    """Leading eigenpair of a Hermitian PSD matrix by power iteration."""
    col_norms = np.linalg.norm(gram, axis=0)
    x = gram[:, int(np.argmax(col_norms))]
    x = x / np.linalg.norm(x)
    rq = float(np.real(np.vdot(x, gram @ x)))
    for _ in range(POWER_MAX_ITER):
        y = gram @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        x = y / ny
        rq_new = float(np.real(np.vdot(x, gram @ x)))
        if abs(rq_new - rq) <= POWER_RTOL * abs(rq_new):
            return x, rq_new
        rq = rq_new
    w, v = np.linalg.eigh(gram)
    return v[:, -1], float(w[-1])


def dominant_left_singular(m) -> tuple[np.ndarray, float]:
    """Dominant left singular vector and singular value of ``m``.

    Power iteration runs on the Gram matrix of the smaller side. The
    returned vector is unit-norm and phase-normalized (see
    :func:`phase_normalize`).

    Raises
    ------
    DegenerateInputError
        If ``m`` is identically zero.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or 0 in m.shape:
        raise ParameterError(f"expected a nonempty matrix, got shape {m.shape}")
    if not np.any(m):
        raise DegenerateInputError("matrix is identically zero")
    # scale out the magnitude so tiny echoes do not underflow the Gram matrix
    scale = np.max(np.abs(m))
    ms = m / scale
    rows, cols = ms.shape
    if rows <= cols:
        u, lam = _dominant_eigvec(ms @ ms.conj().T)
    else:
        v, lam = _dominant_eigvec(ms.conj().T @ ms)
        u = ms @ v
        u = u / np.linalg.norm(u)
    u = u / np.linalg.norm(u)
    sigma = float(np.linalg.norm(ms.conj().T @ u)) * scale
    return phase_normalize(u), sigma


def hosvd_rank1(t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-one truncated HOSVD: dominant left singular vector of each unfolding."""
    t = _as_tensor(t)
    if not np.any(t):
        raise DegenerateInputError("tensor is identically zero")
    u1, _ = dominant_left_singular(unfold(t, 1))
    u2, _ = dominant_left_singular(unfold(t, 2))
    u3, _ = dominant_left_singular(unfold(t, 3))
    return u1, u2, u3


def rank1_fit(t, u1, u2, u3) -> tuple[complex, float]:
    """Best scale ``g`` for ``g * u1 o u2 o u3`` and the residual Frobenius norm.

    Assumes unit-norm factors, for which the least-squares scale is the
    projection of ``t`` on the rank-one direction.
    """
    t = _as_tensor(t)
    g = complex(np.einsum("ijk,i,j,k->", t, u1.conj(), u2.conj(), u3.conj()))
    resid = float(np.linalg.norm(t - g * outer3(u1, u2, u3)))
    return g, resid
