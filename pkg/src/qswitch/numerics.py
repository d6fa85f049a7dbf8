"""Dense small-matrix kernels.

Everything here works on plain ``numpy`` arrays of modest size (state
dimension up to a handful, closed-loop dimension up to ~16).
"""
import numpy as np
import scipy.linalg as la

from .errors import NotHurwitzError, NotPositiveDefiniteError, ObservabilityError

HURWITZ_TOL = 1e-9
SYM_TOL = 1e-12


def _as_finite_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def spectral_abscissa(A):
    """Largest real part among the eigenvalues of ``A``."""
    return float(np.max(np.linalg.eigvals(np.asarray(A, dtype=float)).real))


def is_hurwitz(A, tol=HURWITZ_TOL):
    return spectral_abscissa(A) < -tol


def is_spd(S, tol=SYM_TOL):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        return False
    scale = max(np.abs(S).max(), 1.0)
    if np.abs(S - S.T).max() > tol * scale:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (S + S.T)).min() > 0.0)


def check_spd(S, name="matrix"):
    if not is_spd(S):
        raise NotPositiveDefiniteError(f"{name} is not symmetric positive definite")
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


def matrix_exponential(A, t=1.0):
    """Return ``expm(A * t)``.

    Backed by :func:`scipy.linalg.expm` (scaling and squaring with a Pade
    approximant).
    """
    A = _as_finite_square(A)
    t = float(t)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return la.expm(A * t)


def solve_lyapunov(F, Q):
    """Solve ``F.T @ P + P @ F = -Q`` for symmetric positive-definite ``P``.

    The equation is vectorized with Kronecker products and solved as one
    dense linear system, which is exact and cheap for the dimensions used
    here.  ``F`` must be Hurwitz, otherwise no unique positive-definite
    solution exists and :class:`NotHurwitzError` is raised.
    """
    F = _as_finite_square(F, "F")
    Q = check_spd(Q, "Q")
    if Q.shape != F.shape:
        raise ValueError("F and Q must have the same shape")
    if not is_hurwitz(F):
        raise NotHurwitzError(
            f"F is not Hurwitz (spectral abscissa {spectral_abscissa(F):.3e})")
    k = F.shape[0]
    eye = np.eye(k)
    # column-major vec: vec(F^T P) = (I kron F^T) vec P, vec(P F) = (F^T kron I) vec P
    op = np.kron(eye, F.T) + np.kron(F.T, eye)
    p = np.linalg.solve(op, -Q.reshape(-1, order="F"))
    P = p.reshape((k, k), order="F")
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P).min() <= 0.0:
        raise NotPositiveDefiniteError("Lyapunov solution is not positive definite")
    return P


def lyapunov_residual(F, P, Q):
    """Spectral norm of ``F.T @ P + P @ F + Q``."""
    F, P, Q = (np.asarray(M, dtype=float) for M in (F, P, Q))
    return float(np.linalg.norm(F.T @ P + P @ F + Q, 2))


def observability_gramian(A, C, tau):
    """Finite-horizon observability Gramian over ``[0, tau]``.

    Uses Van Loan's identity: with ``H = [[-A^T, C^T C], [0, A]]`` and
    ``E = expm(H tau)`` the Gramian equals ``E22^T E12``.
    """
    A = _as_finite_square(A)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    tau = float(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = A.shape[0]
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = -A.T
    H[:n, n:] = C.T @ C
    H[n:, n:] = A
    E = la.expm(H * tau)
    W = E[n:, n:].T @ E[:n, n:]
    W = 0.5 * (W + W.T)
    ev = np.linalg.eigvalsh(W)
    if ev.min() < 1e-12 * ev.max() or ev.max() <= 0:
        raise ObservabilityError(
            f"observability Gramian numerically singular (eigenvalues {ev})")
    return W


def output_response_bound(A, C, tau, grid=1001):
    """Guarded upper estimate of ``max_{0<=t<=tau} ||C expm(A t)||``.

    The value at ``t = 0`` is exactly ``||C||``.  The remaining points of a
    uniform grid with ``grid`` nodes are inflated by ``1 + tau*||A||/1000``,
    which dominates the growth ``exp(||A|| d)`` between neighbouring nodes.
    """
    A = _as_finite_square(A)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    tau = float(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    step = la.expm(A * (tau / (grid - 1)))
    E = np.eye(A.shape[0])
    interior = 0.0
    for _ in range(grid - 1):
        E = E @ step
        interior = max(interior, np.linalg.norm(C @ E, 2))
    inflate = 1.0 + tau * np.linalg.norm(A, 2) / 1000.0
    return float(max(np.linalg.norm(C, 2), interior * inflate))


def min_scaling_factor(P1, P2, J):
    """Smallest ``c`` with ``z^T J^T P2 J z <= c z^T P1 z`` for all ``z``.

    This is the largest eigenvalue of the pencil ``(J^T P2 J, P1)``,
    computed through the Cholesky congruence ``P1 = G G^T``.
    """
    P1 = check_spd(P1, "P1")
    P2 = check_spd(P2, "P2")
    J = np.asarray(J, dtype=float)
    G = np.linalg.cholesky(P1)
    S = J.T @ P2 @ J
    X = la.solve_triangular(G, S, lower=True)
    X = la.solve_triangular(G, X.T, lower=True)
    return max(float(np.linalg.eigvalsh(0.5 * (X + X.T)).max()), 0.0)
