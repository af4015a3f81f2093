"""State-space oracle for Fourier-mode kernels.

A kernel stored as low-frequency half-spectrum modes is, by expanding its
inverse transform, a linear combination of the truncated Fourier basis
{1, sqrt(2)cos(2*pi*m*x), sqrt(2)sin(2*pi*m*x)} on [0, 1). The same basis is
realized in the large-state limit by a specific linear state-space system
(A, B) whose impulse response C @ expm(A t) @ B approaches the corresponding
basis expansion as the state size grows. This module builds that system,
evaluates both sides, and exists purely for cross-validation; nothing here
participates in training.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationUnstable, ShapeError

_S2 = np.sqrt(2.0)


def build_fourier_ssm(S: int) -> tuple[np.ndarray, np.ndarray]:
    """State matrices of the Fourier-basis system, entry by entry.

    States are ordered [constant, cos_1, sin_1, cos_2, sin_2, ...]; the m-th
    cos/sin pair sits at indices (2m-1, 2m) and couples skew-symmetrically at
    angular frequency 2*pi*m, which for the subdiagonal entry at odd k reads
    pi*(k+1). The remaining entries form the rank-one damping -2*q*q^T with
    q = (1, sqrt(2) at odd indices, 0 elsewhere), i.e. the basis values at the
    window edge:

        A[n,k]: -2 at (0,0); -2*sqrt(2) where one index is 0 and the other
        odd; -4 where both are odd; +pi*(k+1) where n-k = 1 with k odd;
        -pi*(n+1) where k-n = 1 with n odd; 0 elsewhere.
        B[n]: 2 at n = 0, 2*sqrt(2) at odd n, 0 elsewhere.

    With this pairing the impulse response components reproduce the basis
    functions (checked numerically in the test suite); indexing the coupling
    as 2*pi*k instead (identical at k = 1) breaks the correspondence for
    every pair beyond the first.
    """
    if S < 1:
        raise ShapeError(f"state size must be >= 1, got {S}")
    A = np.zeros((S, S))
    B = np.zeros((S, 1))
    for n in range(S):
        for k in range(S):
            n_odd, k_odd = n % 2 == 1, k % 2 == 1
            if n == 0 and k == 0:
                A[n, k] = -2.0
            elif n == 0 and k_odd:
                A[n, k] = -2.0 * _S2
            elif k == 0 and n_odd:
                A[n, k] = -2.0 * _S2
            elif n_odd and k_odd:
                A[n, k] = -4.0
            elif n - k == 1 and k_odd:
                A[n, k] = np.pi * (k + 1)
            elif k - n == 1 and n_odd:
                A[n, k] = -np.pi * (n + 1)
    B[0, 0] = 2.0
    B[1::2, 0] = 2.0 * _S2
    return A, B


def basis_expand(coeffs: np.ndarray, L: int) -> np.ndarray:
    """Evaluate sum_n coeffs[n] * p_n(t/L) at t = 0..L-1.

    Basis order: [1, sqrt(2)cos(2*pi*x), sqrt(2)sin(2*pi*x),
    sqrt(2)cos(4*pi*x), ...]; the constant comes first, then cos/sin pairs of
    increasing frequency.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1:
        raise ShapeError(f"coeffs must be a vector, got shape {coeffs.shape}")
    x = np.arange(L) / L
    out = np.full(L, coeffs[0], dtype=np.float64)
    for n in range(1, coeffs.shape[0]):
        m = (n + 1) // 2
        phase = 2.0 * np.pi * m * x
        basis = _S2 * (np.cos(phase) if n % 2 == 1 else np.sin(phase))
        out += coeffs[n] * basis
    return out


def modes_to_basis_coeffs(modes: np.ndarray, L: int) -> np.ndarray:
    """Map half-spectrum modes (length m, DC real) to basis coefficients.

    Matching the inverse-transform sum term by term against the basis:
    constant = Re(modes[0])/L, cos_k = sqrt(2)*Re(modes[k])/L and
    sin_k = -sqrt(2)*Im(modes[k])/L for 0 < k < L/2.
    """
    modes = np.asarray(modes, dtype=np.complex128).reshape(-1)
    m = modes.shape[0]
    if m - 1 >= L // 2 and m > 1:
        raise ShapeError("coefficient map requires all modes strictly below Nyquist")
    coeffs = np.zeros(2 * m - 1)
    coeffs[0] = modes[0].real / L
    for k in range(1, m):
        coeffs[2 * k - 1] = _S2 * modes[k].real / L
        coeffs[2 * k] = -_S2 * modes[k].imag / L
    return coeffs


def ssm_kernel_continuous(A: np.ndarray, B: np.ndarray, C: np.ndarray, L: int,
                          steps_per_sample: int = 8) -> np.ndarray:
    """Impulse response C @ expm(A t) @ B sampled at t = j/L on [0, 1).

    Integrated by the bilinear (Tustin) recurrence with `steps_per_sample`
    substeps between samples; second-order accurate in the substep, so no
    closed-form matrix exponential is needed.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64).reshape(-1)
    C = np.asarray(C, dtype=np.float64).reshape(-1)
    S = A.shape[0]
    if A.shape != (S, S) or B.shape != (S,) or C.shape != (S,):
        raise ShapeError(f"inconsistent system shapes A{A.shape} B{B.shape} C{C.shape}")
    if steps_per_sample < 1:
        raise ValueError("steps_per_sample must be >= 1")
    delta = 1.0 / (L * steps_per_sample)
    half = 0.5 * delta * A
    step = np.linalg.solve(np.eye(S) - half, np.eye(S) + half)
    limit = 1e6 * max(1.0, float(np.linalg.norm(B)))
    x = B.copy()
    out = np.empty(L)
    for j in range(L):
        out[j] = C @ x
        for _ in range(steps_per_sample):
            x = step @ x
        if not np.isfinite(x).all() or np.linalg.norm(x) > limit:
            raise IntegrationUnstable(f"state norm diverged near t={j / L:.4f}")
    return out
