"""Matrix polynomials (lambda-matrices) and their right solvents.

A lambda-matrix ``A(z) = A0 z^p + A1 z^(p-1) + ... + Ap`` with square blocks
admits matrix-valued "roots": right solvents ``R`` with
``A0 R^p + A1 R^(p-1) + ... + Ap = 0``.  A complete set of p regular right
solvents partitions the pd latent roots (zeros of ``det A(z)``) into p
disjoint spectra and is certified by a nonsingular block Vandermonde matrix.
This module computes latent roots through the block companion matrix, builds
solvents from grouped latent pairs, and recovers coefficients and linear
factorizations from a certified solvent set.

All arithmetic is done in complex double precision; realness is certified
after the fact, never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DefectiveCompanionError,
    DuplicateLatentRootError,
    IncompleteSetError,
    NonSquareError,
    SingularFactorError,
    SingularGroupError,
    SingularVandermondeError,
    SolventResidualError,
)

TOL_SOLVENT = 1e-9      # residual bound, relative to max(1, ||A_p||_F)
TOL_EIG = 1e-8          # absolute eigenvalue matching tolerance
COND_GROUP_MAX = 1e10   # latent-vector group condition bound
COND_EIGVEC_MAX = 1e12  # companion eigenvector matrix condition bound
COND_VANDERMONDE_MAX = 1e12


def _as_complex(mat):
    return np.ascontiguousarray(np.asarray(mat, dtype=complex))


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LambdaMatrix:
    """Matrix polynomial ``A(z) = coeffs[0] z^p + ... + coeffs[p]``.

    ``coeffs`` holds p+1 equally shaped (d, m) complex blocks in order of
    decreasing power.  Instances are immutable; the stored arrays are marked
    read-only.
    """

    coeffs: tuple

    def __post_init__(self):
        blocks = tuple(_readonly(_as_complex(c)) for c in self.coeffs)
        if not blocks:
            raise ValueError("a lambda-matrix needs at least one coefficient")
        shape = blocks[0].shape
        if len(shape) != 2:
            raise ValueError("coefficients must be 2-d matrices")
        if any(b.shape != shape for b in blocks):
            raise ValueError("all coefficients must share one shape")
        object.__setattr__(self, "coeffs", blocks)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def order(self):
        return self.coeffs[0].shape

    @property
    def is_square(self):
        d, m = self.order
        return d == m

    @property
    def monic(self):
        """True when square and the leading coefficient is the identity."""
        d, m = self.order
        if d != m:
            return False
        return bool(np.max(np.abs(self.coeffs[0] - np.eye(d))) <= 1e-14)

    @property
    def is_real(self):
        return bool(max(np.max(np.abs(c.imag)) for c in self.coeffs) <= 1e-14)

    def real_coeffs(self):
        """Coefficient list with imaginary parts stripped (must be real)."""
        if not self.is_real:
            raise ValueError("lambda-matrix has genuinely complex coefficients")
        return [np.array(c.real) for c in self.coeffs]

    def eval(self, lam):
        """Evaluate at a complex scalar by Horner's scheme."""
        out = np.array(self.coeffs[0])
        for block in self.coeffs[1:]:
            out = out * lam + block
        return out

    def eval_right(self, Z):
        """Right-substitute a square matrix: ``A0 Z^p + A1 Z^(p-1) + ... + Ap``.

        Right substitution does not commute with scalar evaluation at
        eigenvalues of ``Z`` unless d = 1.

        Raises
        ------
        NonSquareError
            If the polynomial is not square.
        """
        if not self.is_square:
            raise NonSquareError(f"eval_right needs a square polynomial, order {self.order}")
        Z = _as_complex(Z)
        out = np.array(self.coeffs[0])
        for block in self.coeffs[1:]:
            out = out @ Z + block
        return out

    def derivative(self):
        """Coefficient-wise derivative, degree p-1."""
        p = self.degree
        if p == 0:
            return LambdaMatrix((np.zeros_like(self.coeffs[0]),))
        return LambdaMatrix(tuple((p - k) * self.coeffs[k] for k in range(p)))

    def __mul__(self, other):
        """Polynomial product (coefficient convolution), self(z) * other(z)."""
        if not isinstance(other, LambdaMatrix):
            return NotImplemented
        pa, pb = self.degree, other.degree
        d = self.order[0]
        m = other.order[1]
        if self.order[1] != other.order[0]:
            raise ValueError("inner orders do not match")
        out = [np.zeros((d, m), dtype=complex) for _ in range(pa + pb + 1)]
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a @ b
        return LambdaMatrix(tuple(out))


def identity_shift(R):
    """The linear lambda-matrix ``z I - R``."""
    R = _as_complex(R)
    return LambdaMatrix((np.eye(R.shape[0], dtype=complex), -R))


@dataclass(frozen=True)
class LatentPair:
    """A latent root lam with its unit right latent vector (A(lam) vec = 0)."""

    root: complex
    vector: np.ndarray
    residual: float

    def __post_init__(self):
        object.__setattr__(self, "vector", _readonly(_as_complex(self.vector)))


@dataclass(frozen=True)
class Solvent:
    """A certified right solvent with its residual ``||A_R(R)||_F``."""

    R: np.ndarray
    multiplicity: int
    residual_norm: float

    def __post_init__(self):
        object.__setattr__(self, "R", _readonly(_as_complex(self.R)))

    @property
    def spectrum(self):
        return np.linalg.eigvals(self.R)


@dataclass(frozen=True)
class SolventSet:
    """A complete set of p regular right solvents with its Vandermonde matrix.

    Certified on construction: disjoint spectra whose union matches the
    latent roots, small right-substitution residuals, and a nonsingular
    block Vandermonde matrix (``cond_V`` reported).
    """

    solvents: tuple
    V: np.ndarray
    cond_V: float

    def __post_init__(self):
        object.__setattr__(self, "V", _readonly(_as_complex(self.V)))

    @property
    def matrices(self):
        return [s.R for s in self.solvents]

    @property
    def spectra(self):
        return [s.spectrum for s in self.solvents]

    @property
    def roots(self):
        return np.concatenate(self.spectra)

    @property
    def block_dim(self):
        return self.solvents[0].R.shape[0]

    def __len__(self):
        return len(self.solvents)


def companion_matrix(A):
    """Block companion matrix of a monic square lambda-matrix.

    Shifted identity blocks above the diagonal and the row
    ``(-A_p, ..., -A_1)`` at the bottom; its spectrum equals the latent
    roots of ``A``.
    """
    if not A.monic:
        raise ValueError("companion matrix requires a monic lambda-matrix")
    p = A.degree
    d = A.order[0]
    if p < 1:
        raise ValueError("companion matrix requires degree >= 1")
    C = np.zeros((p * d, p * d), dtype=complex)
    for i in range(p - 1):
        C[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = np.eye(d)
    for j in range(p):
        C[(p - 1) * d:, j * d:(j + 1) * d] = -A.coeffs[p - j]
    return C


def latent_roots(A):
    """Latent roots and right latent vectors of a monic lambda-matrix.

    Eigen-decomposes the block companion matrix; the latent vector is the
    leading d-block of each eigenvector, renormalized to unit 2-norm with a
    deterministic phase.  Pairs are sorted by (Re, Im) lexicographically,
    descending.

    Returns
    -------
    list of LatentPair, length p*d.

    Raises
    ------
    DefectiveCompanionError
        If the companion eigenvector matrix has condition number above
        1e12; solvents must not be built from such a decomposition.
    """
    C = companion_matrix(A)
    d = A.order[0]
    vals, vecs = np.linalg.eig(C)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > COND_EIGVEC_MAX:
        raise DefectiveCompanionError(
            f"companion eigenvector condition {cond:.3e} exceeds {COND_EIGVEC_MAX:.0e}")
    pairs = []
    for lam, vec in zip(vals, vecs.T):
        lead = vec[:d]
        norm = np.linalg.norm(lead)
        if norm == 0.0:
            raise DefectiveCompanionError("eigenvector with vanishing leading block")
        lead = lead / norm
        # fix the phase so output is reproducible across LAPACK builds
        k = int(np.argmax(np.abs(lead)))
        phase = lead[k] / abs(lead[k])
        lead = lead / phase
        res = float(np.linalg.norm(A.eval(lam) @ lead))
        scale = np.linalg.norm(A.eval(lam))
        if res > TOL_EIG * max(1.0, scale):
            raise DefectiveCompanionError(
                f"latent pair residual {res:.3e} at root {lam:.6g}")
        pairs.append(LatentPair(complex(lam), lead, res))
    pairs.sort(key=lambda pr: (-pr.root.real, -pr.root.imag))
    return pairs


def _distinct_tol(roots):
    return 1e-8 * (1.0 + max(abs(r) for r in roots))


def _check_distinct(roots):
    roots = [complex(r) for r in roots]
    tol = _distinct_tol(roots)
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) < tol:
                raise DuplicateLatentRootError(
                    f"roots {roots[i]:.8g} and {roots[j]:.8g} closer than {tol:.2e}")


def _cond_columns(cols):
    """sigma_max / sigma_min of a stack of column vectors."""
    M = np.column_stack(cols)
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def default_grouping(pairs, d, conjugate_closed=True):
    """Partition pd latent pairs into p groups of size d.

    Greedy heuristic: walk the (already sorted) roots and place each one --
    together with its complex conjugate when ``conjugate_closed`` and a
    partner is available -- into the group that keeps the partially built
    latent-vector matrix best conditioned.  Conjugate pairs are only split
    when no group has two free slots, so the resulting solvents are real
    whenever the grouping allows it.
    """
    n = len(pairs)
    if n % d != 0:
        raise ValueError("number of latent pairs must be a multiple of d")
    p = n // d
    roots = [pr.root for pr in pairs]
    tol = _distinct_tol(roots)
    groups = [[] for _ in range(p)]
    assigned = [False] * n

    def place(indices):
        vecs = [pairs[i].vector for i in indices]
        best, best_cond = None, None
        for g, members in enumerate(groups):
            if len(members) + len(indices) > d:
                continue
            cond = _cond_columns([pairs[i].vector for i in members] + vecs)
            if best is None or cond < best_cond - 1e-12:
                best, best_cond = g, cond
        if best is None:
            return False
        groups[best].extend(indices)
        for i in indices:
            assigned[i] = True
        return True

    for i in range(n):
        if assigned[i]:
            continue
        lam = roots[i]
        if conjugate_closed and abs(lam.imag) > tol:
            partner = None
            for j in range(n):
                if j != i and not assigned[j] and abs(roots[j] - lam.conjugate()) < tol:
                    partner = j
                    break
            if partner is not None and place([i, partner]):
                continue
        if not place([i]):
            raise SingularGroupError("grouping heuristic ran out of free slots")
    return [sorted(g) for g in groups]


def eig_multiset_distance(a, b):
    """Largest pairwise distance under the optimal matching of two
    eigenvalue multisets (robust against sort-order flips of near ties)."""
    import scipy.optimize

    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return np.inf
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def vandermonde(mats):
    """Block Vandermonde matrix: block (i, k) is ``R_k^(i-1)``, i, k = 1..p."""
    mats = [_as_complex(R) for R in mats]
    p = len(mats)
    d = mats[0].shape[0]
    V = np.zeros((p * d, p * d), dtype=complex)
    for k, R in enumerate(mats):
        power = np.eye(d, dtype=complex)
        for i in range(p):
            V[i * d:(i + 1) * d, k * d:(k + 1) * d] = power
            if i < p - 1:
                power = power @ R
    return V


def certify_solvent_set(A, mats):
    """Certify p candidate matrices as a complete set of regular right solvents.

    Checks, in order: right-substitution residuals against ``A``, pairwise
    disjoint spectra whose union matches the latent roots of ``A``, and a
    well-conditioned block Vandermonde matrix.

    Raises
    ------
    SolventResidualError, IncompleteSetError, SingularVandermondeError
    """
    mats = [_as_complex(R) for R in mats]
    p = A.degree
    d = A.order[0]
    if len(mats) != p:
        raise IncompleteSetError(f"need {p} solvents, got {len(mats)}")
    if any(R.shape != (d, d) for R in mats):
        raise IncompleteSetError("solvent block shape mismatch")
    scale = max(1.0, float(np.linalg.norm(A.coeffs[-1])))
    solvents = []
    for R in mats:
        res = float(np.linalg.norm(A.eval_right(R)))
        if res > TOL_SOLVENT * scale:
            raise SolventResidualError(
                f"||A_R(R)||_F = {res:.3e} exceeds {TOL_SOLVENT * scale:.3e}")
        solvents.append(Solvent(R, 1, res))

    spectra = [s.spectrum for s in solvents]
    for i in range(p):
        for j in range(i + 1, p):
            gap = min(abs(a - b) for a in spectra[i] for b in spectra[j])
            if gap <= TOL_EIG:
                raise IncompleteSetError(
                    f"spectra of solvents {i} and {j} overlap (gap {gap:.2e})")
    union = np.concatenate(spectra)
    target = np.array([pr.root for pr in latent_roots(A)])
    err = eig_multiset_distance(union, target)
    if err > TOL_EIG:
        raise IncompleteSetError(
            f"union of solvent spectra misses latent roots by {err:.3e}")

    V = vandermonde([s.R for s in solvents])
    cond_V = float(np.linalg.cond(V))
    if not np.isfinite(cond_V) or cond_V > COND_VANDERMONDE_MAX:
        raise SingularVandermondeError(f"cond(V) = {cond_V:.3e}")
    return SolventSet(tuple(solvents), V, cond_V)


def solvents_from_latents(A, pairs=None, grouping=None):
    """Build a certified SolventSet from grouped latent pairs.

    Each group of d latent pairs yields ``R_k = P_k L_k P_k^{-1}`` with
    ``P_k`` the stacked latent vectors and ``L_k`` the diagonal of roots.

    Parameters
    ----------
    A : LambdaMatrix
        Monic square polynomial the solvents belong to.
    pairs : list of LatentPair, optional
        Defaults to ``latent_roots(A)``.
    grouping : list of p index lists of size d, optional
        Defaults to the conjugate-closed greedy grouping.

    Raises
    ------
    DuplicateLatentRootError, SingularGroupError, IncompleteSetError,
    SingularVandermondeError
    """
    if pairs is None:
        pairs = latent_roots(A)
    d = A.order[0]
    p = A.degree
    _check_distinct([pr.root for pr in pairs])
    if grouping is None:
        grouping = default_grouping(pairs, d, conjugate_closed=A.is_real)
    if len(grouping) != p or sorted(i for g in grouping for i in g) != list(range(p * d)):
        raise ValueError("grouping must partition the latent pairs into p groups of d")
    mats = []
    for group in grouping:
        if len(group) != d:
            raise ValueError("every group must have exactly d latent pairs")
        P = np.column_stack([pairs[i].vector for i in group])
        cond = _cond_columns([pairs[i].vector for i in group])
        if not np.isfinite(cond) or cond > COND_GROUP_MAX:
            raise SingularGroupError(f"latent-vector matrix condition {cond:.3e}")
        L = np.diag([pairs[i].root for i in group])
        mats.append(P @ L @ np.linalg.inv(P))
    return certify_solvent_set(A, mats)


def solvent_set(A, grouping=None):
    """Latent roots -> grouped solvents -> certified SolventSet, in one call."""
    return solvents_from_latents(A, latent_roots(A), grouping)


def coeffs_from_solvent_matrices(mats):
    """Monic lambda-matrix with the given complete solvent set.

    Implements the block Vandermonde inversion
    ``[A_p, ..., A_1] = -[R_1^p, ..., R_p^p] V^{-1}`` without certifying the
    input; use :func:`coeffs_from_solvents` for the certified route.
    """
    mats = [_as_complex(R) for R in mats]
    p = len(mats)
    d = mats[0].shape[0]
    V = vandermonde(mats)
    row = np.hstack([np.linalg.matrix_power(R, p) for R in mats])
    cond_V = np.linalg.cond(V)
    if not np.isfinite(cond_V) or cond_V > COND_VANDERMONDE_MAX:
        raise SingularVandermondeError(f"cond(V) = {cond_V:.3e}")
    X = -np.linalg.solve(V.T, row.T).T
    coeffs = [np.eye(d, dtype=complex)]
    # X carries [A_p, ..., A_1]; unpack into descending-power order
    for j in range(p - 1, -1, -1):
        coeffs.append(X[:, j * d:(j + 1) * d])
    return LambdaMatrix(tuple(coeffs))


def coeffs_from_solvents(solvents):
    """Recover the monic lambda-matrix from a certified SolventSet."""
    mats = solvents.matrices if isinstance(solvents, SolventSet) else list(solvents)
    return coeffs_from_solvent_matrices(mats)


def linear_factorization(solvents):
    """Linear factors ``[R_1, R_2*, ..., R_p*]`` of the recovered polynomial.

    The product ``(z I - R_p*) ... (z I - R_2*)(z I - R_1)`` reproduces the
    polynomial; each transformed factor is
    ``R_k* = M_k(R_k) R_k M_k(R_k)^{-1}`` with ``M_k`` the right-evaluated
    partial product of the factors found so far.

    Raises
    ------
    SingularFactorError
        If some partial product ``M_k(R_k)`` is numerically singular.
    """
    mats = solvents.matrices if isinstance(solvents, SolventSet) else [
        _as_complex(R) for R in solvents]
    factors = [mats[0]]
    partial = identity_shift(mats[0])
    for k in range(1, len(mats)):
        Mk = partial.eval_right(mats[k])
        cond = np.linalg.cond(Mk)
        if not np.isfinite(cond) or cond > COND_VANDERMONDE_MAX:
            raise SingularFactorError(f"M_{k + 1}(R_{k + 1}) condition {cond:.3e}")
        Rk_star = Mk @ mats[k] @ np.linalg.inv(Mk)
        factors.append(Rk_star)
        partial = identity_shift(Rk_star) * partial
    return factors


def expand_factors(factors):
    """Multiply linear factors right-to-left into one lambda-matrix."""
    out = identity_shift(factors[0])
    for R in factors[1:]:
        out = identity_shift(R) * out
    return out
