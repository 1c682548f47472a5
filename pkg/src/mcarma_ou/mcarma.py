"""MCARMA models, their state space form, and the OU-sum decomposition.

A d-dimensional MCARMA(p, q) process driven by a zero-mean, square
integrable Levy process solves the state space system

    Y(t) = C* X(t),   dX(t) = A* X(t) dt + B* dL(t),

with the block companion A*, C* = (I, 0, ..., 0) and B* obtained from a
backward recursion in the AR and MA coefficients.  Given a complete set of
regular right solvents R_1..R_p of the AR polynomial with residues Res_k of
A(z)^{-1} B(z), the process equals the sum of p complex matrix-valued
Ornstein-Uhlenbeck processes

    Y_k(t) = e^{R_k t} Y_k(0) + int_0^t e^{R_k (t-u)} Res_k dL(u),

and the stationary autocovariance splits into per-component Sylvester
solutions.  The decomposition is certified here through the similarity
transform T = V(R_1, ..., R_p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import matpoly, rational
from .exceptions import (
    ImaginaryLeakError,
    NotStationaryError,
    SylvesterSingularError,
)

IMAG_TOL_KERNEL = 1e-9
IMAG_TOL_INIT = 1e-10
SIMILARITY_TOL = 1e-9
SHARP_IDENTITY_TOL = 1e-12


def _real_psd(mat, name, tol=1e-12):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(mat - mat.T)) > 1e-12 * max(1.0, np.max(np.abs(mat))):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(mat)) < -tol:
        raise ValueError(f"{name} must be positive semidefinite")
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True)
class McarmaModel:
    """AR polynomial, MA polynomial and driving covariance of an MCARMA(p, q).

    The driver is assumed zero-mean with ``Var L(1) = sigma_L``; models with
    a nonzero driver mean are rejected at validation.  ``stationary`` holds
    iff every latent root of A has strictly negative real part.
    """

    A: matpoly.LambdaMatrix
    B: matpoly.LambdaMatrix
    sigma_L: np.ndarray
    latent_pairs: tuple
    stationary: bool

    @classmethod
    def build(cls, A, B, sigma_L, mean_L=None):
        if not A.monic:
            raise ValueError("AR polynomial must be monic")
        if not (A.is_real and B.is_real):
            raise ValueError("model coefficients must be real")
        p, q = A.degree, B.degree
        if not p > q >= 0:
            raise ValueError(f"need p > q >= 0, got p={p}, q={q}")
        if B.order[0] != A.order[0]:
            raise ValueError("A and B must share their row dimension")
        m = B.order[1]
        sigma_L = _real_psd(sigma_L, "sigma_L")
        if sigma_L.shape[0] != m:
            raise ValueError("sigma_L dimension must match the MA column count")
        if mean_L is not None and np.max(np.abs(np.asarray(mean_L, dtype=float))) > 0.0:
            raise ValueError("nonzero-mean drivers are not supported")
        pairs = tuple(matpoly.latent_roots(A))
        stationary = all(pr.root.real < 0.0 for pr in pairs)
        sigma_L.setflags(write=False)
        return cls(A, B, sigma_L, pairs, stationary)

    @property
    def p(self):
        return self.A.degree

    @property
    def q(self):
        return self.B.degree

    @property
    def d(self):
        return self.A.order[0]

    @property
    def m(self):
        return self.B.order[1]

    @property
    def latent_root_values(self):
        return np.array([pr.root for pr in self.latent_pairs])

    def solvent_set(self, grouping=None):
        return matpoly.solvents_from_latents(self.A, list(self.latent_pairs), grouping)

    def rational_fraction(self):
        return rational.RationalLeftMatrix.build(self.A, self.B, list(self.latent_pairs))


@dataclass(frozen=True)
class StateSpace:
    """State space matrices (A*, B*, C*) with the sharp pair (A#, B#)."""

    A_star: np.ndarray
    B_star: np.ndarray
    C_star: np.ndarray
    A_sharp: np.ndarray
    B_sharp: np.ndarray

    @property
    def dim(self):
        return self.A_star.shape[0]


def beta_coefficients(A, B):
    """The stacked blocks of B*: zeros up to index p-q-1, then the recursion

    ``beta_{p-j} = -sum_{i=1}^{p-j-1} A_i beta_{p-j-i} + B_{q-j}``.
    """
    p, q = A.degree, B.degree
    d, m = B.order
    beta = [np.zeros((d, m), dtype=complex) for _ in range(p + 1)]  # beta[0] unused
    for n in range(p - q, p + 1):
        acc = np.array(B.coeffs[q - (p - n)])
        for i in range(1, n):
            acc -= A.coeffs[i] @ beta[n - i]
        beta[n] = acc
    return beta[1:]


def build_state_space(model):
    """Assemble (A*, B*, C*, A#, B#) and certify the identity A# B* = B#."""
    A, B = model.A, model.B
    p, d, m = model.p, model.d, model.m
    A_star = matpoly.companion_matrix(A).real
    beta = beta_coefficients(A, B)
    B_star = np.vstack(beta).real
    C_star = np.zeros((d, p * d))
    C_star[:, :d] = np.eye(d)
    A_sharp, B_sharp = rational.sharp_matrices(A, B)
    A_sharp, B_sharp = A_sharp.real, B_sharp.real
    err = np.max(np.abs(A_sharp @ B_star - B_sharp))
    if err > SHARP_IDENTITY_TOL:
        raise AssertionError(f"A# B* - B# deviates by {err:.3e}")
    for arr in (A_star, B_star, C_star, A_sharp, B_sharp):
        arr.setflags(write=False)
    return StateSpace(A_star, B_star, C_star, A_sharp, B_sharp)


@dataclass(frozen=True)
class OuComponent:
    R: np.ndarray
    residue: np.ndarray
    y0: np.ndarray


@dataclass(frozen=True)
class OuDecomposition:
    """Certified OU-sum representation of an MCARMA model.

    ``transform`` is the block Vandermonde T with A* = T diag(R_k) T^{-1},
    B* = T stack(Res_k) and C* T = (I, ..., I); the initial values satisfy
    the realness constraint T stack(Y_k(0)) in R^{pd}.
    """

    components: tuple
    transform: np.ndarray
    model: McarmaModel
    statespace: StateSpace
    partial_fraction: rational.PartialFraction
    solvent_set: matpoly.SolventSet

    @property
    def p(self):
        return len(self.components)

    @property
    def d(self):
        return self.components[0].R.shape[0]


def decompose(model, S, x0=None):
    """Split an MCARMA model into p OU components along a solvent set.

    Parameters
    ----------
    model : McarmaModel
    S : matpoly.SolventSet
        Certified solvent set of the AR polynomial.
    x0 : real state vector of length p*d, optional
        Initial state; the component initials are the blocks of T^{-1} x0
        (zero by default), which satisfies the realness constraint by
        construction.

    Raises
    ------
    NotIrreducibleError
        When A and B fail the left-coprimeness certificate.
    """
    F = model.rational_fraction()
    pf = rational.residues(F, S)
    ss = build_state_space(model)
    T = S.V
    p, d = model.p, model.d
    if x0 is None:
        x0 = np.zeros(p * d)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p * d,):
        raise ValueError(f"x0 must have length {p * d}")
    y0 = np.linalg.solve(T, x0.astype(complex))

    leak = np.max(np.abs((T @ y0).imag))
    if leak > IMAG_TOL_INIT:
        raise ImaginaryLeakError(f"initial-state realness violated by {leak:.3e}")
    R_diag = scipy.linalg.block_diag(*[R for R, _ in pf.pairs])
    scale = max(1.0, np.linalg.norm(ss.A_star) * np.linalg.norm(T))
    sim_err = np.linalg.norm(ss.A_star @ T - T @ R_diag) / scale
    res_err = np.linalg.norm(ss.B_star - T @ np.vstack(pf.residue_matrices)) / max(
        1.0, np.linalg.norm(ss.B_star))
    row_err = np.linalg.norm(ss.C_star @ T - np.hstack([np.eye(d)] * p))
    worst = max(sim_err, res_err, row_err)
    if worst > SIMILARITY_TOL:
        raise ImaginaryLeakError(f"similarity certificate failed at {worst:.3e}")

    comps = tuple(
        OuComponent(R, res, y0[k * d:(k + 1) * d])
        for k, (R, res) in enumerate(pf.pairs))
    return OuDecomposition(comps, T, model, ss, pf, S)


def kernel(decomp, t):
    """Kernel ``sum_k e^{t R_k} Res_k`` of the OU sum at time t >= 0.

    Equals ``C* e^{A* t} B*``; the identity is exercised by the
    verification suite rather than recomputed here.  The imaginary part is
    certified below 1e-9 relative to the largest summand (the exact sum is
    real only up to roundoff amplified by the term magnitudes) and
    stripped.
    """
    if t < 0:
        raise ValueError("kernel is defined for t >= 0")
    out = np.zeros((decomp.d, decomp.model.m), dtype=complex)
    term_scale = 1.0
    for comp in decomp.components:
        term = scipy.linalg.expm(t * comp.R) @ comp.residue
        term_scale = max(term_scale, float(np.max(np.abs(term))))
        out = out + term
    leak = float(np.max(np.abs(out.imag)))
    if leak > IMAG_TOL_KERNEL * term_scale:
        raise ImaginaryLeakError(
            f"kernel imaginary part {leak:.3e} (term scale {term_scale:.3e}); "
            "grouping is not conjugate-closed or the solvent set is badly "
            "conditioned")
    return out.real


def component_cross_gramian(R_i, R_j, M):
    """Solve ``R_i X + X R_j^H = -M`` for the infinite-horizon OU integral
    ``X = int_0^inf e^{u R_i} M e^{u R_j^H} du``."""
    lhs = np.linalg.eigvals(R_i)
    rhs = np.linalg.eigvals(R_j)
    gap = np.min(np.abs(lhs[:, None] + rhs.conj()[None, :]))
    if gap < 1e-12:
        raise SylvesterSingularError(
            f"spectra of R_i and -R_j^H nearly intersect (gap {gap:.2e})")
    return scipy.linalg.solve_sylvester(R_i, R_j.conj().T, -M)


def stationary_component_covariances(decomp):
    """The per-component sums ``Sigma_i = sum_j int_0^inf e^{u R_i} Res_i
    Sigma_L Res_j^H e^{u R_j^H} du`` entering the stationary ACVF."""
    sigma_L = decomp.model.sigma_L
    comps = decomp.components
    out = []
    for ci in comps:
        acc = np.zeros((decomp.d, decomp.d), dtype=complex)
        for cj in comps:
            M = ci.residue @ sigma_L @ cj.residue.conj().T
            acc = acc + component_cross_gramian(ci.R, cj.R, M)
        out.append(acc)
    return out


def stationary_acvf(decomp, lags):
    """Stationary autocovariance ``gamma(l) = sum_i e^{l R_i} Sigma_i``.

    Parameters
    ----------
    decomp : OuDecomposition
    lags : iterable of nonnegative reals

    Returns
    -------
    list of real (d, d) matrices, one per lag.  ``gamma(0)`` is certified
    symmetric PSD, and every lag is certified real before stripping the
    imaginary part.

    Raises
    ------
    NotStationaryError
        If some latent root does not lie in the open left half-plane.
    """
    if not decomp.model.stationary:
        raise NotStationaryError("stationary ACVF needs all latent roots with Re < 0")
    sigmas = stationary_component_covariances(decomp)
    out = []
    for lag in lags:
        if lag < 0:
            raise ValueError("lags must be nonnegative")
        acc = np.zeros((decomp.d, decomp.d), dtype=complex)
        term_scale = 1.0
        for comp, sig in zip(decomp.components, sigmas):
            term = scipy.linalg.expm(lag * comp.R) @ sig
            term_scale = max(term_scale, float(np.max(np.abs(term))))
            acc = acc + term
        leak = float(np.max(np.abs(acc.imag)))
        if leak > IMAG_TOL_KERNEL * term_scale:
            raise ImaginaryLeakError(f"ACVF imaginary part {leak:.3e} at lag {lag}")
        acc = acc.real
        if lag == 0:
            sym_err = np.max(np.abs(acc - acc.T))
            if sym_err > 1e-10 * term_scale:
                raise ImaginaryLeakError(f"gamma(0) asymmetric by {sym_err:.3e}")
            if np.min(np.linalg.eigvalsh(0.5 * (acc + acc.T))) < -1e-10 * max(
                    1.0, np.trace(acc)):
                raise ImaginaryLeakError("gamma(0) not positive semidefinite")
        out.append(acc)
    return out


def stationary_state_covariance(ss, sigma_L):
    """State covariance Pi solving ``A* Pi + Pi A*^T = -B* Sigma_L B*^T``."""
    rhs = -ss.B_star @ sigma_L @ ss.B_star.T
    pi = scipy.linalg.solve_continuous_lyapunov(ss.A_star, rhs)
    return 0.5 * (pi + pi.T)
