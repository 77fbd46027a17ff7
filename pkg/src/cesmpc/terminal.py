"""Terminal-set ingredients for the dual-mode controller.

Produces a gain H and a positive-definite P such that the ellipsoid
{delta : delta' P delta <= 1} is invariant under the local law u = H delta,
certified through the contraction inequality and its Schur-complement
(LMI) form.  The pair is computed by iterating the discrete Riccati
recursion to a fixed point, which at these sizes is exact and fast, and
the LMI is then checked as a certificate.

Eigenvalue computations on symmetric matrices use a cyclic Jacobi sweep,
which is exact (to rounding) at the sizes involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonSymmetricError(ValueError):
    """Input matrix is not symmetric to tolerance."""


class TerminalInfeasibleError(RuntimeError):
    """No certified (P, H) pair could be produced for the given model."""


@dataclass(frozen=True)
class TerminalIngredients:
    """Ellipsoid shape P and local gain H of the dual-mode terminal set."""

    P: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class LmiProblem:
    """Data of the feasibility certificate, with S = P^-1 and Y = H S."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray | None = None
    Y: np.ndarray | None = None


def _check_symmetric(M: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > tol * scale:
        raise NonSymmetricError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def jacobi_eigh(Msym: np.ndarray, sweep_tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as columns) with
    M = V diag(w) V'.
    """
    A = _check_symmetric(Msym)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(A))))
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                off = max(off, abs(apq))
                if abs(apq) <= sweep_tol * scale:
                    continue
                theta = 0.5 * (A[p, p] - A[q, q]) / apq
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                A[[p, q], :] = rot @ A[[p, q], :]
                A[:, [p, q]] = A[:, [p, q]] @ rot.T
                V[:, [p, q]] = V[:, [p, q]] @ rot.T
        if off <= sweep_tol * scale:
            break
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def symmetric_eigenvalues(Msym: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix via the Jacobi sweep."""
    w, _ = jacobi_eigh(Msym)
    return w


def is_positive_definite(Msym: np.ndarray, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue exceeds tol."""
    return float(symmetric_eigenvalues(Msym)[0]) > tol


def terminal_membership(delta, P: np.ndarray) -> bool:
    """True iff delta' P delta <= 1 (boundary inclusive)."""
    d = np.asarray(delta, dtype=float)
    return float(d @ P @ d) <= 1.0


def contraction_certificate(
    A: np.ndarray, B: np.ndarray, H: np.ndarray, P: np.ndarray
) -> float:
    """Max eigenvalue of (A+BH)' P (A+BH) - P; <= 0 certifies invariance."""
    Acl = A + B @ H
    M = Acl.T @ P @ Acl - P
    return float(symmetric_eigenvalues(0.5 * (M + M.T))[-1])


def lmi_certificate(problem: LmiProblem) -> float:
    """Min eigenvalue of the assembled Schur-complement block matrix.

    A positive value certifies the strict feasibility of the (S, Y) pair.
    """
    if problem.S is None or problem.Y is None:
        raise ValueError("problem must carry candidate S and Y")
    S, Y = problem.S, problem.Y
    ASBY = problem.A @ S + problem.B @ Y
    top = np.hstack([S - S.T @ problem.Q @ S, ASBY.T])
    bottom = np.hstack([ASBY, S])
    block = np.vstack([top, bottom])
    return float(symmetric_eigenvalues(0.5 * (block + block.T))[0])


def _riccati_fixed_point(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100_000,
):
    P = Q.copy() + np.eye(A.shape[0])
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        Pn = Q + A.T @ P @ A - A.T @ P @ B @ K
        Pn = 0.5 * (Pn + Pn.T)
        err = np.max(np.abs(Pn - P))
        P = Pn
        if not np.isfinite(err) or np.max(np.abs(P)) > 1e16:
            return None, None
        if err <= tol * max(1.0, np.max(np.abs(P))):
            BtP = B.T @ P
            K = np.linalg.solve(R + BtP @ B, BtP @ A)
            return P, -K
    return None, None


def certify_terminal(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, ing: TerminalIngredients
) -> dict:
    """All certificate eigenvalues for a candidate (P, H) pair.

    ``contraction`` and ``augmented`` must be <= 0 (to tolerance),
    ``p_min_eig``, ``strict_min`` and ``lmi_min`` must be > 0.
    """
    P, H = ing.P, ing.H
    Acl = A + B @ H
    augmented = Acl.T @ P @ Acl - P + Q
    strict = P - Q - Acl.T @ P @ Acl
    S = np.linalg.inv(P)
    S = 0.5 * (S + S.T)
    problem = LmiProblem(A=A, B=B, Q=Q, S=S, Y=H @ S)
    return {
        "p_min_eig": float(symmetric_eigenvalues(P)[0]),
        "contraction": contraction_certificate(A, B, H, P),
        "augmented": float(
            symmetric_eigenvalues(0.5 * (augmented + augmented.T))[-1]
        ),
        "strict_min": float(symmetric_eigenvalues(0.5 * (strict + strict.T))[0]),
        "lmi_min": lmi_certificate(problem),
    }


def solve_terminal_lmi(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    r_local: float = 1e-4,
    certificate_tol: float = 1e-8,
    strict_margin: float = 1e-3,
) -> TerminalIngredients:
    """Compute a certified (P, H) pair for the terminal set.

    Strategy: iterate the discrete Riccati recursion for (A, B, Q, r*I) to
    a fixed point, take H as the associated gain, inflate P by the small
    factor (1 + strict_margin) so the Schur-complement inequality holds
    strictly (the exact fixed point sits on its boundary), and verify the
    Q-augmented contraction inequality plus the strict block form.  A zero
    local input weight makes the recursion degenerate, so a small
    regularizer is used and escalated {1x, 10x, 100x} on certificate
    failure before declaring infeasibility.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = _check_symmetric(Q, tol=1e-9)
    nu = B.shape[1]
    worst = np.inf
    for scale in (1.0, 10.0, 100.0):
        R = r_local * scale * np.eye(nu)
        P, H = _riccati_fixed_point(A, B, Q, R)
        if P is None:
            continue
        ing = TerminalIngredients(P=(1.0 + strict_margin) * P, H=H)
        cert = certify_terminal(A, B, Q, ing)
        if cert["p_min_eig"] <= 0.0:
            worst = min(worst, cert["p_min_eig"])
            continue
        if cert["augmented"] > certificate_tol:
            worst = min(worst, -cert["augmented"])
            continue
        if cert["strict_min"] <= 0.0 or cert["lmi_min"] <= 0.0:
            worst = min(worst, cert["strict_min"], cert["lmi_min"])
            continue
        return ing
    if np.isinf(worst):
        raise TerminalInfeasibleError(
            "no certified terminal ingredients: Riccati recursion diverged "
            "(model not stabilizable)"
        )
    raise TerminalInfeasibleError(
        "no certified terminal ingredients; worst certificate eigenvalue "
        f"{worst:.3e}"
    )


def double_integrator_model(T: float, n: int = 2):
    """Constant (A, B) of the feedback-linearized per-joint double integrator."""
    A = np.eye(2 * n)
    A[:n, n:] = T * np.eye(n)
    B = np.vstack([0.5 * T * T * np.eye(n), T * np.eye(n)])
    return A, B
