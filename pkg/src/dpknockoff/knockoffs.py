"""Fixed-X knockoff construction.

Given a column-normalized design X' with Gram matrix S' = X'^T X', a knockoff
copy Xt is an n x p matrix satisfying, for a scalar s >= 0,

    Xt^T Xt = S',        X'^T Xt = S' - s*I,

so that the augmented Gram G = [X' Xt]^T [X' Xt] has the block form
[[S', S' - s*I], [S' - s*I, S']].  This module builds the copy via the
Schur-complement Cholesky route, exposes the two standard choices of s, and
provides the closed-form extreme eigenvalues of G used by the privacy
calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .design import NormalizedDesign
from .errors import InvalidDesign, KnockoffInfeasible, PreconditionViolated

# Deterministic probe used to span the orthogonal complement; not a secret,
# just a fixed arbitrary constant so the construction is reproducible.
_PROBE_ENTROPY = 0x5D2B1
_CHOLESKY_JITTER = 1e-10

S_MODES = ("private_recommended", "classic")


@dataclass(frozen=True)
class GramSpectrum:
    """Normalized Gram matrix together with its spectral summary."""

    sigma_prime: np.ndarray
    lambda_min: float
    lambda_max: float
    frobenius_norm: float


@dataclass(frozen=True)
class AugmentedDesign:
    """Normalized design, its knockoff copy, and the resulting augmented Gram."""

    design: NormalizedDesign
    knockoff: np.ndarray
    s_value: float
    gram_g: np.ndarray
    spectrum: GramSpectrum

    @property
    def p(self) -> int:
        return self.design.x_prime.shape[1]

    def augmented_matrix(self) -> np.ndarray:
        """The n x 2p matrix [X' Xt]."""
        return np.hstack([self.design.x_prime, self.knockoff])

    def crossprod(self, y) -> np.ndarray:
        """The length-2p feature-response product [X' Xt]^T y."""
        y = np.asarray(y, dtype=float).ravel()
        return np.concatenate([self.design.x_prime.T @ y, self.knockoff.T @ y])


def gram_spectrum(nd: NormalizedDesign) -> GramSpectrum:
    """Compute S' = X'^T X' and its extreme eigenvalues and Frobenius norm."""
    s = nd.x_prime.T @ nd.x_prime
    s = (s + s.T) / 2.0  # kill asymmetric rounding
    evals = np.linalg.eigvalsh(s)
    lam_min = float(evals[0])
    lam_max = float(evals[-1])
    if lam_min <= 0.0:
        raise InvalidDesign(
            f"normalized Gram matrix is numerically singular (lambda_min={lam_min:.3e})"
        )
    return GramSpectrum(
        sigma_prime=s,
        lambda_min=lam_min,
        lambda_max=lam_max,
        frobenius_norm=float(np.linalg.norm(s, "fro")),
    )


def choose_s(spectrum: GramSpectrum, mode: str = "private_recommended") -> float:
    """Pick the common diagonal s of the decorrelation matrix.

    ``private_recommended`` keeps the augmented Gram well conditioned by
    setting s = lambda_min(S'), so its smallest eigenvalue stays at
    lambda_min(S').  ``classic`` is the usual equicorrelated choice
    min(2*lambda_min(S'), 1), which drives the smallest eigenvalue of the
    augmented Gram to zero whenever 2*lambda_min <= 1.
    """
    if spectrum.lambda_min <= 0.0:
        raise PreconditionViolated("s selection needs a strictly positive lambda_min")
    if mode == "private_recommended":
        return spectrum.lambda_min
    if mode == "classic":
        return min(2.0 * spectrum.lambda_min, 1.0)
    raise ValueError(f"unknown s mode {mode!r}; expected one of {S_MODES}")


def closed_form_gram_eigenvalues(spectrum: GramSpectrum, s: float) -> tuple[float, float]:
    """Extreme eigenvalues of the augmented Gram for the choice s = lambda_min(S').

    With that choice the 2p x 2p augmented Gram has spectrum equal to the
    union of {2*lambda_i(S') - lambda_min(S')} and {lambda_min(S')}, hence

        lambda_max(G) = 2*lambda_max(S') - lambda_min(S'),
        lambda_min(G) = lambda_min(S').

    Raises if s deviates from lambda_min(S') by more than 1e-10, since the
    closed form only holds under that hypothesis.
    """
    if abs(s - spectrum.lambda_min) > 1e-10:
        raise PreconditionViolated(
            f"closed-form eigenvalues require s = lambda_min(S') = "
            f"{spectrum.lambda_min:.12g}, got s = {s:.12g}"
        )
    return (
        2.0 * spectrum.lambda_max - spectrum.lambda_min,
        spectrum.lambda_min,
    )


def complement_basis(x_prime: np.ndarray, seed=None) -> np.ndarray:
    """Orthonormal n x p basis of a subspace orthogonal to col(x_prime).

    A fixed pseudorandom probe matrix is projected off the design's column
    span (twice, which keeps the residual orthogonal at working precision
    even for tall matrices) and then orthonormalized.  With the default
    ``seed=None`` the probe is a package-level constant, so the basis is a
    deterministic function of the input matrix.  Passing a seed selects an
    alternative (equally valid) basis.
    """
    n, p = x_prime.shape
    if n < 2 * p:
        raise KnockoffInfeasible(f"orthogonal complement basis needs n >= 2p, got n={n}, p={p}")

    # projector onto col(x) via the Gram factorization (cheaper than a tall
    # QR); fall back to an explicit orthonormal basis if the Gram is not PD
    gram = x_prime.T @ x_prime
    try:
        cho = cho_factor((gram + gram.T) / 2.0, lower=True)

        def project_off(w):
            return w - x_prime @ cho_solve(cho, x_prime.T @ w)

    except np.linalg.LinAlgError:
        q1, _ = np.linalg.qr(x_prime)

        def project_off(w):
            return w - q1 @ (q1.T @ w)

    entropy = _PROBE_ENTROPY if seed is None else seed
    scale = np.sqrt(float(n))
    for attempt in range(2):
        ss = np.random.SeedSequence(entropy=entropy, spawn_key=(attempt,))
        w = np.random.default_rng(ss).standard_normal((n, p))
        w = project_off(project_off(w))
        u = _orthonormalize_tall(w, 1e-8 * scale)
        if u is not None:
            return u
    raise KnockoffInfeasible("probe matrix fell inside the design column span twice")


def _orthonormalize_tall(w: np.ndarray, rank_tol: float):
    """Orthonormal basis of col(w) for a well-conditioned tall matrix.

    Two rounds of Cholesky-QR; much faster than Householder QR on tall
    blocks and orthonormal to machine precision after the second round.
    Returns None when w looks rank deficient (Cholesky breakdown or a tiny
    triangular diagonal).
    """
    for _ in range(2):
        gram = w.T @ w
        try:
            r = np.linalg.cholesky((gram + gram.T) / 2.0).T
        except np.linalg.LinAlgError:
            return None
        if np.abs(np.diag(r)).min() <= rank_tol:
            return None
        w = solve_triangular(r, w.T, lower=False, trans="T").T
    return w


def build_knockoffs(
    nd: NormalizedDesign,
    s: float,
    seed=None,
    spectrum: GramSpectrum | None = None,
) -> AugmentedDesign:
    """Construct the knockoff copy and the augmented Gram matrix.

    The copy is Xt = X'(I - S'^{-1} sI) + U C, where U is an orthonormal
    basis of the complement of col(X') and C^T C equals the Schur complement
    2sI - s^2 S'^{-1}.  ``seed`` is forwarded to :func:`complement_basis`;
    leave it ``None`` for the deterministic default basis.
    """
    x = nd.x_prime
    n, p = x.shape
    if n < 2 * p:
        raise KnockoffInfeasible(f"knockoff copy needs n >= 2p, got n={n}, p={p}")
    if s < 0:
        raise PreconditionViolated(f"s must be nonnegative, got {s}")
    if spectrum is None:
        spectrum = gram_spectrum(nd)

    if s == 0.0:
        # Degenerate decorrelation: the copy coincides with the design.
        knockoff = x.copy()
    else:
        try:
            cho = cho_factor(spectrum.sigma_prime, lower=True)
        except np.linalg.LinAlgError as exc:
            raise InvalidDesign("normalized Gram matrix is not positive definite") from exc
        sigma_inv_s = cho_solve(cho, s * np.eye(p))  # S'^{-1} * sI, via the factorization
        schur = 2.0 * s * np.eye(p) - s * sigma_inv_s
        schur = (schur + schur.T) / 2.0
        c_upper = _cholesky_with_jitter(schur)
        knockoff = x - x @ sigma_inv_s + complement_basis(x, seed=seed) @ c_upper

    # blockwise product [X' Xt]^T [X' Xt]; the top-left block is the Gram
    # already held by the spectrum
    xtk = x.T @ knockoff
    ktk = knockoff.T @ knockoff
    ktk = (ktk + ktk.T) / 2.0
    gram = np.block([[spectrum.sigma_prime, xtk], [xtk.T, ktk]])
    return AugmentedDesign(
        design=nd,
        knockoff=knockoff,
        s_value=float(s),
        gram_g=gram,
        spectrum=spectrum,
    )


def _cholesky_with_jitter(mat: np.ndarray) -> np.ndarray:
    """Upper-triangular C with C^T C = mat, retrying once with a tiny ridge.

    The Schur complement is positive definite in exact arithmetic for
    0 < s < 2*lambda_min, but rounding (or the boundary choice s = 2*lambda_min)
    can push an eigenvalue below zero; one jitter retry covers that case.
    """
    try:
        return np.linalg.cholesky(mat).T
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(mat + _CHOLESKY_JITTER * np.eye(mat.shape[0])).T
    except np.linalg.LinAlgError as exc:
        raise KnockoffInfeasible(
            "Schur complement is not positive semidefinite even after jitter; "
            "s may exceed the feasible range for this Gram matrix"
        ) from exc


def raw_gram_frobenius(nd: NormalizedDesign, spectrum: GramSpectrum) -> float:
    """Frobenius norm of the unnormalized Gram X^T X.

    Recovered from the normalized Gram by undoing the column scaling:
    (X^T X)_{ij} = S'_{ij} * c_i * c_j with c the raw column norms.
    """
    col_norms = 1.0 / nd.normalizer_d
    raw = spectrum.sigma_prime * np.outer(col_norms, col_norms)
    return float(np.linalg.norm(raw, "fro"))
