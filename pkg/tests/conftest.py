"""Shared fixtures: the worked 2x2 CARMA(2,0) example and a random corpus."""

import json
import pathlib

import numpy as np
import pytest

from mcarma_ou import matpoly, mcarma, rational

MODELS_DIR = pathlib.Path(__file__).resolve().parents[1] / "models"

# 2x2 CARMA(2,0) reference instance: AR coefficients, four known right
# solvents forming two complete sets, and their residues.
A1 = np.array([[-11.0, 22.0], [-12.0, 21.0]])
A2 = np.array([[-42.0, 52.0], [-36.0, 44.0]])
R1 = np.array([[0.0, -1.0], [2.0, -3.0]])
R2 = np.array([[-3.0, -2.0], [0.0, -4.0]])
R3 = np.array([[-7.0, 6.0], [-3.0, 2.0]])
R4 = np.array([[-3.0, 0.5], [0.0, -2.0]])
RES1 = np.array([[1.0, -1.0], [-2.0, 3.0]])
RES2 = np.array([[-1.0, 1.0], [2.0, -3.0]])
RES3 = np.array([[8.0, -11.0], [6.0, -8.0]])
RES4 = np.array([[-8.0, 11.0], [-6.0, 8.0]])


@pytest.fixture(scope="session")
def example_poly():
    return matpoly.LambdaMatrix((np.eye(2), A1, A2))


@pytest.fixture(scope="session")
def example_model(example_poly):
    return mcarma.McarmaModel.build(
        example_poly,
        matpoly.LambdaMatrix((np.eye(2),)),
        np.eye(2),
    )


@pytest.fixture(scope="session")
def example_set_12(example_poly):
    return matpoly.certify_solvent_set(example_poly, [R1, R2])


@pytest.fixture(scope="session")
def example_set_34(example_poly):
    return matpoly.certify_solvent_set(example_poly, [R3, R4])


@pytest.fixture(scope="session")
def example_model_file():
    return str(MODELS_DIR / "carma2x2.json")


def _real_block_diag(roots):
    """Real matrix with the given conjugate-closed spectrum."""
    blocks = []
    used = [False] * len(roots)
    for i, lam in enumerate(roots):
        if used[i]:
            continue
        if abs(lam.imag) < 1e-12:
            blocks.append(np.array([[lam.real]]))
            used[i] = True
        else:
            j = next(k for k in range(len(roots))
                     if not used[k] and abs(roots[k] - lam.conjugate()) < 1e-12)
            blocks.append(np.array([[lam.real, lam.imag], [-lam.imag, lam.real]]))
            used[i] = used[j] = True
    out = np.zeros((len(roots), len(roots)))
    pos = 0
    for b in blocks:
        k = b.shape[0]
        out[pos:pos + k, pos:pos + k] = b
        pos += k
    return out


def _conjugate_closed_spectrum(rng, d):
    roots = []
    slots = d
    while slots > 0:
        if slots >= 2 and rng.random() < 0.4:
            re = -rng.uniform(0.3, 2.5)
            im = rng.uniform(0.3, 2.0)
            roots += [complex(re, im), complex(re, -im)]
            slots -= 2
        else:
            roots.append(complex(-rng.uniform(0.3, 2.5), 0.0))
            slots -= 1
    return roots


def random_stable_model(rng, d=None, p=None, q=None, min_sep=0.1):
    """Random stable MCARMA model with controlled eigenvalue separation.

    Solvents with prescribed conjugate-closed spectra are drawn first and
    the AR polynomial recovered from them; the prescribed spectrum is then
    cross-checked against the latent roots computed from the polynomial.
    """
    d = d if d is not None else int(rng.integers(1, 4))
    p = p if p is not None else int(rng.integers(1, 4))
    q = q if q is not None else int(rng.integers(0, p))
    for _ in range(500):
        spectra = [_conjugate_closed_spectrum(rng, d) for _ in range(p)]
        all_roots = [z for group in spectra for z in group]
        sep = min((abs(a - b) for i, a in enumerate(all_roots)
                   for b in all_roots[i + 1:]), default=np.inf)
        if sep < min_sep:
            continue
        mats = []
        for group in spectra:
            D = _real_block_diag(group)
            while True:
                basis = rng.standard_normal((d, d))
                if np.linalg.cond(basis) < 15:
                    break
            mats.append(basis @ D @ np.linalg.inv(basis))
        try:
            poly = matpoly.coeffs_from_solvent_matrices(mats)
        except matpoly.SingularVandermondeError:
            continue
        if max(np.max(np.abs(c.imag)) for c in poly.coeffs) > 1e-9:
            continue
        A = matpoly.LambdaMatrix(tuple(c.real for c in poly.coeffs))
        got = np.array([pr.root for pr in matpoly.latent_roots(A)])
        if matpoly.eig_multiset_distance(got, np.array(all_roots)) > 1e-7:
            continue
        b_coeffs = [rng.standard_normal((d, d)) for _ in range(q + 1)]
        b_coeffs[0] += 2.0 * np.eye(d)
        B = matpoly.LambdaMatrix(tuple(b_coeffs))
        ok, _ = rational.check_irreducible(A, B)
        if not ok:
            continue
        w = rng.standard_normal((d, d))
        sigma_L = w @ w.T / d + 0.1 * np.eye(d)
        return mcarma.McarmaModel.build(A, B, sigma_L)
    raise RuntimeError("could not draw a stable model")


@pytest.fixture(scope="session")
def corpus():
    """200 random stable models spanning d, p in {1,2,3}, separation >= 0.1."""
    rng = np.random.default_rng(20250810)
    models = []
    for i in range(200):
        d = [1, 2, 3][i % 3]
        p = [1, 2, 3][(i // 3) % 3]
        models.append(random_stable_model(rng, d=d, p=p))
    return models


@pytest.fixture(scope="session")
def small_corpus(corpus):
    """Cheaper slice for the more expensive oracle comparisons."""
    return corpus[:48]


def load_example_json():
    with open(MODELS_DIR / "carma2x2.json") as fh:
        return json.load(fh)
