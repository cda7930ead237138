"""Shared fixtures and independent oracles for the test suite.

Oracles here are deliberately naive: full enumeration and direct matrix
algebra, written without reusing solver internals, so the tests check
the implementation against something that cannot share its bugs.
"""

import itertools

import numpy as np
import pytest


def random_design(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Intercept plus iid +/-1 columns, redrawn until full column rank."""
    while True:
        H = np.hstack([np.ones((n, 1)), rng.choice([-1.0, 1.0], size=(n, p - 1))])
        if np.linalg.matrix_rank(H) == p:
            return H


def balanced_corners(n: int) -> np.ndarray:
    """All sign vectors with |sum| <= 1, one per row."""
    X = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return X[np.abs(X.sum(axis=1)) <= 1]


def hypercube_vertices(p: int) -> np.ndarray:
    """All covariate vertices {1} x {-1,1}^(p-1), one per row."""
    if p == 1:
        return np.ones((1, 1))
    Z = np.array(list(itertools.product((-1.0, 1.0), repeat=p - 1)))
    return np.hstack([np.ones((Z.shape[0], 1)), Z])


def oracle_sigma_beta(H: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Interaction-effect covariance by direct inversion."""
    G = H.T @ H
    S = H.T @ (x[:, None] * H)
    C = G - S @ np.linalg.inv(G) @ S
    return np.linalg.inv(C)


def oracle_psi(H: np.ndarray, x: np.ndarray) -> np.ndarray:
    G_inv = np.linalg.inv(H.T @ H)
    S = H.T @ (x[:, None] * H)
    return G_inv @ S @ G_inv @ S @ G_inv


def oracle_surrogate_matrix(H: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.linalg.inv(H.T @ H) + oracle_psi(H, x)


def oracle_upsilon(H: np.ndarray, z: np.ndarray) -> np.ndarray:
    hat = H @ np.linalg.inv(H.T @ H) @ H.T
    u = H @ np.linalg.inv(H.T @ H) @ z
    M = hat * np.outer(u, u)
    return 0.5 * (M + M.T)


def oracle_lb_matrix(H: np.ndarray) -> np.ndarray:
    hat = H @ np.linalg.inv(H.T @ H) @ H.T
    return hat * hat


def brute_max_quadratic(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Max of z'Mz over the covariate hypercube by full enumeration."""
    Z = hypercube_vertices(M.shape[0])
    vals = np.einsum("zi,ij,zj->z", Z, M, Z)
    best = int(np.argmax(vals))
    return Z[best], float(vals[best])


def brute_min_max_cuts(
    constants: np.ndarray, matrices: np.ndarray, X: np.ndarray
) -> float:
    """Min over given sign rows of max_k (c_k + x'A_k x)."""
    vals = constants[None, :] + np.einsum("mi,kij,mj->mk", X, matrices, X)
    return float(vals.max(axis=1).min())


def brute_bilevel_surrogate(H: np.ndarray) -> float:
    """Min over all balanced x of max over all hypercube z (surrogate)."""
    n, p = H.shape
    Z = hypercube_vertices(p)
    best = np.inf
    for x in balanced_corners(n):
        M = oracle_surrogate_matrix(H, x)
        best = min(best, float(np.einsum("zi,ij,zj->z", Z, M, Z).max()))
    return best


@pytest.fixture
def toy_design() -> np.ndarray:
    """4x2 design whose objective values are known by hand."""
    return np.array([[1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [1.0, -1.0]])
