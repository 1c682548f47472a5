"""Strictly proper rational left matrix fractions F(z) = A(z)^{-1} B(z).

Provides the left-coprimeness (irreducibility) certificate, matrix residues
at the right solvents of A, and evaluation of the resulting block partial
fraction expansion ``F(z) = sum_k (z I - R_k)^{-1} Res_k``.

The residues come from the linear system

    stack(Res_1, ..., Res_p) = V(R_1, ..., R_p)^{-1} [A#]^{-1} B#,

where ``A#`` is the unit lower block triangular Toeplitz matrix built from
the coefficients of A (solved by forward block substitution; its only
eigenvalue is 1) and ``B#`` stacks the coefficients of B under zero padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matpoly
from .exceptions import NotIrreducibleError, PoleHitError, SingularVandermondeError

RANK_TOL = 1e-8      # relative singular-value threshold for the coprimeness test
POLE_TOL = 1e-10


@dataclass(frozen=True)
class RationalLeftMatrix:
    """A(z)^{-1} B(z) with A monic of degree p and deg B <= p-1.

    ``irreducible`` is a computed certificate (rank test at every latent
    root of A); ``witness`` holds an offending latent root when it fails.
    The rank threshold is ``RANK_TOL * sigma_max``, reported alongside the
    certificate because the coprimeness notion itself carries no canonical
    numerical tolerance.
    """

    A: matpoly.LambdaMatrix
    B: matpoly.LambdaMatrix
    irreducible: bool
    witness: complex | None

    @classmethod
    def build(cls, A, B, pairs=None):
        if not A.monic:
            raise ValueError("A must be monic")
        if B.order[0] != A.order[0]:
            raise ValueError("A and B must share their row dimension")
        if B.degree > A.degree - 1:
            raise ValueError("strict properness requires deg B <= deg A - 1")
        ok, witness = check_irreducible(A, B, pairs)
        return cls(A, B, ok, witness)

    @property
    def order(self):
        return (self.A.order[0], self.B.order[1])


def check_irreducible(A, B, pairs=None):
    """Left-coprimeness rank test at every latent root of A.

    Returns ``(True, None)`` when ``[A(lam) | B(lam)]`` has full row rank d
    at each latent root lam, else ``(False, lam)`` for the first failure.
    Coprimeness can only fail on the spectrum of A, so checking the latent
    roots is exhaustive.
    """
    if pairs is None:
        pairs = matpoly.latent_roots(A)
    d = A.order[0]
    coeff_scale = max(
        max(float(np.linalg.norm(c)) for c in A.coeffs),
        max(float(np.linalg.norm(c)) for c in B.coeffs))
    for pr in pairs:
        stacked = np.hstack([A.eval(pr.root), B.eval(pr.root)])
        s = np.linalg.svd(stacked, compute_uv=False)
        # absolute floor: at a common zero the whole stacked row vanishes and
        # sigma_max itself collapses, which the relative test alone misses
        if s[0] <= 1e-12 * coeff_scale or s[d - 1] <= RANK_TOL * s[0]:
            return False, pr.root
    return True, None


def sharp_matrices(A, B):
    """The pair (A#, B#) entering the residue linear system.

    A# has identity diagonal blocks and ``A_i`` on the i-th subdiagonal;
    B# is the pd x m stack ``(0, ..., 0, B_0, ..., B_q)``.
    """
    p = A.degree
    d = A.order[0]
    m = B.order[1]
    q = B.degree
    A_sharp = np.zeros((p * d, p * d), dtype=complex)
    for i in range(p):
        for j in range(i + 1):
            block = np.eye(d) if i == j else A.coeffs[i - j]
            A_sharp[i * d:(i + 1) * d, j * d:(j + 1) * d] = block
    B_sharp = np.zeros((p * d, m), dtype=complex)
    offset = (p - (q + 1)) * d
    for k in range(q + 1):
        B_sharp[offset + k * d:offset + (k + 1) * d, :] = B.coeffs[k]
    return A_sharp, B_sharp


def solve_sharp(A, B):
    """Forward block substitution for ``A# X = B#`` (unit triangular, exact)."""
    p = A.degree
    d = A.order[0]
    _, B_sharp = sharp_matrices(A, B)
    X = np.zeros_like(B_sharp)
    for i in range(p):
        acc = np.array(B_sharp[i * d:(i + 1) * d, :])
        for j in range(i):
            acc -= A.coeffs[i - j] @ X[j * d:(j + 1) * d, :]
        X[i * d:(i + 1) * d, :] = acc
    return X


@dataclass(frozen=True)
class PartialFraction:
    """Solvent/residue pairs of a block partial fraction expansion."""

    pairs: tuple  # of (R_k, Res_k)

    @property
    def solvent_matrices(self):
        return [R for R, _ in self.pairs]

    @property
    def residue_matrices(self):
        return [res for _, res in self.pairs]

    @property
    def poles(self):
        return np.concatenate([np.linalg.eigvals(R) for R, _ in self.pairs])

    def __len__(self):
        return len(self.pairs)


def residues(F, S, statespace=None):
    """Matrix residues of F at the solvents of a certified SolventSet.

    Parameters
    ----------
    F : RationalLeftMatrix
        Must carry a positive irreducibility certificate.
    S : matpoly.SolventSet
    statespace : (A#, B#) pair, optional
        Reused when the caller already built the sharp system; by default
        ``A# X = B#`` is solved by forward block substitution.

    Returns
    -------
    PartialFraction
    """
    if not F.irreducible:
        raise NotIrreducibleError(f"rank deficiency at latent root {F.witness}")
    d = F.A.order[0]
    if statespace is None:
        X = solve_sharp(F.A, F.B)
    else:
        A_sharp, B_sharp = statespace
        X = np.linalg.solve(A_sharp, B_sharp)
    try:
        stacked = np.linalg.solve(S.V, X)
    except np.linalg.LinAlgError as err:
        raise SingularVandermondeError(str(err)) from None
    pairs = tuple(
        (sol.R, stacked[k * d:(k + 1) * d, :]) for k, sol in enumerate(S.solvents))
    return PartialFraction(pairs)


def eval_partial_fraction(pf, lam):
    """Evaluate ``sum_k (lam I - R_k)^{-1} Res_k`` by p dense solves.

    Raises
    ------
    PoleHitError
        If ``lam`` is within 1e-10 of a pole.
    """
    gap = np.min(np.abs(pf.poles - lam))
    if gap < POLE_TOL:
        raise PoleHitError(f"evaluation point within {gap:.2e} of a pole")
    d = pf.pairs[0][0].shape[0]
    eye = np.eye(d, dtype=complex)
    out = np.zeros_like(pf.pairs[0][1])
    for R, res in pf.pairs:
        out = out + np.linalg.solve(lam * eye - R, res)
    return out
