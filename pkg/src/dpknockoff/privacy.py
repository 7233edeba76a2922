"""Output-perturbation privacy layer.

Two release mechanisms protect the knockoff statistics:

* the pair release perturbs the augmented Gram matrix (with a structured
  noise term built from one Laplace scalar and one symmetric Gaussian block)
  and the feature-response product;
* the estimate release perturbs the ridge/OLS coefficient vector directly.

Both are calibrated from data-dependent sensitivity bounds driven by three
scalars derived from the observed design: the row-influence ratio
eta^2 = B^2/(C_min^2 - B^2), a Gaussian-norm concentration constant zeta,
and the spectral spread gamma = 2*lambda_max(S') - lambda_min(S').  Because
the sensitivities depend on the observed data, the guarantee is local: the
noise is calibrated at the dataset at hand, not over all possible datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import ModelOracle, NormBounds
from .errors import (
    BoundViolation,
    BudgetInvalid,
    DeltaTooSmall,
    PrivacyPreconditionFailed,
    SingularSystem,
)
from .knockoffs import AugmentedDesign, GramSpectrum

# Multiplicative bump applied to Gaussian variances so the strict calibration
# inequality holds rather than equality.
STRICTNESS_BUMP = 1e-9

# Fixed labels for the independent noise substreams of a release, so adding
# draws to one component never perturbs another.
_LABEL_THETA1 = 0
_LABEL_THETA2 = 1
_LABEL_VECTOR = 2


def _substream(seed, label: int) -> np.random.Generator:
    """Independent generator derived from ``seed`` by a fixed integer label."""
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + (label,)
        )
    else:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(label,))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Budgets and calibration scalars
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrivacyBudget:
    """The (epsilon, delta) knobs of the two mechanisms.

    The estimate release consumes (eps, delta_1, delta_2): eps and delta_1
    calibrate the Gaussian noise on the coefficient vector, delta_2 is spent
    on the norm-concentration event inside the sensitivity bound.

    The pair release additionally uses eps_1 (Laplace noise on the repeated
    off-diagonal scalar), eps_2 and delta (Gaussian noise on the symmetric
    Gram block).  Its total cost composes additively to
    (eps + eps_1 + eps_2, delta + delta_1 + delta_2).
    """

    eps: float
    delta_1: float
    delta_2: float
    eps_1: float | None = None
    eps_2: float | None = None
    delta: float | None = None

    def __post_init__(self):
        for name in ("eps", "delta_1", "delta_2"):
            if getattr(self, name) is None:
                raise BudgetInvalid(f"{name} is required for every release")
        if not 0.0 < self.eps < 1.0:
            raise BudgetInvalid(f"eps must lie in (0,1), got {self.eps}")
        for name in ("delta_1", "delta_2", "delta"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v < 1.0:
                raise BudgetInvalid(f"{name} must lie in (0,1), got {v}")
        for name in ("eps_1", "eps_2"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise BudgetInvalid(f"{name} must be strictly positive, got {v}")

    def require_pair_release(self) -> None:
        missing = [n for n in ("eps_1", "eps_2", "delta") if getattr(self, n) is None]
        if missing:
            raise BudgetInvalid(
                f"pair release needs eps, eps_1, eps_2, delta, delta_1, delta_2; "
                f"missing {', '.join(missing)}"
            )

    def pair_release_totals(self) -> tuple[float, float]:
        self.require_pair_release()
        return (self.eps + self.eps_1 + self.eps_2, self.delta + self.delta_1 + self.delta_2)

    def estimate_release_totals(self) -> tuple[float, float]:
        return (self.eps, self.delta_1 + self.delta_2)


@dataclass(frozen=True)
class SensitivityContext:
    """All scalars the sensitivity formulas read, frozen in one place."""

    eta2: float
    zeta: float
    gamma: float
    bounds: NormBounds
    oracle: ModelOracle
    spectrum: GramSpectrum
    frobenius_sigma_raw: float

    @property
    def p(self) -> int:
        return self.spectrum.sigma_prime.shape[0]


def delta2_floor(p: int) -> float:
    """Smallest admissible delta_2 for dimension p (exclusive bound)."""
    return 2.0 * math.exp(-p / 2.0)


def build_sensitivity_context(
    bounds: NormBounds,
    oracle: ModelOracle,
    spectrum: GramSpectrum,
    raw_gram_frobenius: float,
    budget: PrivacyBudget,
    p: int,
) -> SensitivityContext:
    """Evaluate the calibration scalars for the observed design.

    eta^2 = B^2/(C_min^2 - B^2) measures how much one row can move the
    normalized Gram; zeta = 2*p*sigma^2 / (1 - sqrt((2/p) ln(2/delta_2)))
    bounds the norm of the Gaussian part of the released quantities except
    with probability delta_2; gamma = 2*lambda_max(S') - lambda_min(S') is
    the largest eigenvalue of the augmented Gram.
    """
    floor = delta2_floor(p)
    if budget.delta_2 <= floor:
        raise DeltaTooSmall(
            f"delta_2={budget.delta_2:g} must exceed 2*exp(-p/2)={floor:.3e} "
            "for the concentration constant to be finite"
        )
    b = bounds.row_bound_B
    c = bounds.col_min_C
    eta2 = b * b / (c * c - b * b)
    denom = 1.0 - math.sqrt((2.0 / p) * math.log(2.0 / budget.delta_2))
    zeta = 2.0 * p * oracle.sigma2_bound / denom
    gamma = 2.0 * spectrum.lambda_max - spectrum.lambda_min
    return SensitivityContext(
        eta2=eta2,
        zeta=zeta,
        gamma=gamma,
        bounds=bounds,
        oracle=oracle,
        spectrum=spectrum,
        frobenius_sigma_raw=float(raw_gram_frobenius),
    )


def _b_over_eta(ctx: SensitivityContext) -> float:
    """sqrt(C_min^2 - B^2), which must equal B/eta; guards inconsistent plumbing."""
    b = ctx.bounds.row_bound_B
    c = ctx.bounds.col_min_C
    direct = math.sqrt(c * c - b * b)
    via_eta = b / math.sqrt(ctx.eta2)
    if abs(direct - via_eta) > 1e-12 * max(1.0, direct):
        raise BoundViolation(
            f"inconsistent sensitivity context: B/eta={via_eta:.12g} but "
            f"sqrt(C_min^2-B^2)={direct:.12g}"
        )
    return direct


# ---------------------------------------------------------------------------
# Mechanism calibration and samplers
# ---------------------------------------------------------------------------


def gaussian_scale(sensitivity_l2: float, eps: float, delta: float) -> float:
    """Gaussian-mechanism variance for an l2 sensitivity.

    Returns 2*ln(1.25/delta)*(sensitivity/eps)^2, bumped by a relative 1e-9
    so the strict calibration inequality is satisfied.
    """
    if not 0.0 < eps < 1.0:
        raise BudgetInvalid(f"Gaussian mechanism needs eps in (0,1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise BudgetInvalid(f"Gaussian mechanism needs delta in (0,1), got {delta}")
    if sensitivity_l2 < 0:
        raise ValueError("sensitivity must be nonnegative")
    base = 2.0 * math.log(1.25 / delta) * (sensitivity_l2 / eps) ** 2
    return base * (1.0 + STRICTNESS_BUMP)


def laplace_scale(sensitivity_l1: float, eps: float) -> float:
    """Laplace-mechanism scale parameter sensitivity/eps."""
    if eps <= 0.0:
        raise BudgetInvalid(f"Laplace mechanism needs eps > 0, got {eps}")
    if sensitivity_l1 < 0:
        raise ValueError("sensitivity must be nonnegative")
    return sensitivity_l1 / eps


def sample_gaussian_vector(dim: int, variance: float, seed=None) -> np.ndarray:
    """i.i.d. N(0, variance) vector; zero variance gives an exact zero vector."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0.0:
        return np.zeros(dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.normal(0.0, math.sqrt(variance), size=dim)


def sample_laplace_vector(dim: int, scale: float, seed=None) -> np.ndarray:
    """i.i.d. Laplace(scale) vector; zero scale gives an exact zero vector."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0.0:
        return np.zeros(dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.laplace(0.0, scale, size=dim)


def sample_symmetric_offdiag_gaussian(p: int, variance: float, rng) -> np.ndarray:
    """Symmetric p x p matrix, zero diagonal, upper triangle i.i.d. N(0, variance)."""
    t = np.zeros((p, p))
    iu = np.triu_indices(p, k=1)
    t[iu] = sample_gaussian_vector(len(iu[0]), variance, rng)
    return t + t.T


# ---------------------------------------------------------------------------
# Sensitivity formulas
# ---------------------------------------------------------------------------


def gram_sensitivities(ctx: SensitivityContext) -> tuple[float, float]:
    """Per-row sensitivities of the normalized Gram's smallest eigenvalue
    (l1, fed to Laplace noise) and of the Gram itself in Frobenius norm
    (l2, fed to Gaussian noise)::

        |lambda_min| change <= eta^2 * (1 + lambda_min(S'))
        Frobenius change    <= eta^2 * (sqrt(2) + ||S'||_F)
    """
    lam_sens = ctx.eta2 * (1.0 + ctx.spectrum.lambda_min)
    frob_sens = ctx.eta2 * (math.sqrt(2.0) + ctx.spectrum.frobenius_norm)
    return lam_sens, frob_sens


def pair_crossprod_sensitivity(ctx: SensitivityContext) -> float:
    """l2 sensitivity of the feature-response product [X' Xt]^T y.

    Termwise:

        sqrt(zeta) * (2*sqrt(gamma) + eta*sqrt(3 + 2*lambda_max + lambda_min))
      + ||beta|| * ( sqrt(2)*(eta/B - 1/C_min)*||X^T X||_F
                   + 2*eta*B
                   + (C_min - B/eta)*lambda_min
                   + eta^2*(lambda_min + 1)*sqrt(C_min^2 + B^2) )

    The first block covers the Gaussian part of the response via the
    concentration constant zeta; the second covers the signal part through
    the supplied bound on ||beta||.
    """
    eta = math.sqrt(ctx.eta2)
    b = ctx.bounds.row_bound_B
    c = ctx.bounds.col_min_C
    lam_min = ctx.spectrum.lambda_min
    lam_max = ctx.spectrum.lambda_max
    b_over_eta = _b_over_eta(ctx)

    noise_part = math.sqrt(ctx.zeta) * (
        2.0 * math.sqrt(ctx.gamma) + eta * math.sqrt(3.0 + 2.0 * lam_max + lam_min)
    )
    signal_part = ctx.oracle.beta_norm_bound * (
        math.sqrt(2.0) * (eta / b - 1.0 / c) * ctx.frobenius_sigma_raw
        + 2.0 * eta * b
        + (c - b_over_eta) * lam_min
        + ctx.eta2 * (lam_min + 1.0) * math.sqrt(c * c + b * b)
    )
    return noise_part + signal_part


def estimate_sensitivity(ctx: SensitivityContext, ridge_omega2: float = 0.0) -> float:
    """l2 sensitivity of the ridge/OLS coefficient vector on the augmented design::

        2*sqrt(zeta) / sqrt((1 - eta^2)*lambda_min - eta^2)
      + (C_min - B/eta) * ||beta||

    with lambda_min the smallest normalized-Gram eigenvalue plus any ridge
    term (adding omega^2 * I to the augmented Gram shifts its spectrum up by
    exactly omega^2).  Requires (1 - eta^2)*lambda_min > eta^2; otherwise the
    denominator is not positive and no finite calibration exists.
    """
    if ridge_omega2 < 0:
        raise ValueError("ridge_omega2 must be nonnegative")
    lam_eff = ctx.spectrum.lambda_min + ridge_omega2
    denom_sq = (1.0 - ctx.eta2) * lam_eff - ctx.eta2
    if denom_sq <= 0.0:
        raise PrivacyPreconditionFailed(
            f"estimate release needs (1 - eta^2)*lambda_min > eta^2; got "
            f"eta^2={ctx.eta2:.6g}, effective lambda_min={lam_eff:.6g}. "
            "Ridge stabilization (a positive ridge_omega2) raises the effective "
            "eigenvalue when eta^2 < 1; with eta^2 >= 1 the norm bounds are too loose."
        )
    b_over_eta = _b_over_eta(ctx)
    c = ctx.bounds.col_min_C
    return (
        2.0 * math.sqrt(ctx.zeta) / math.sqrt(denom_sq)
        + (c - b_over_eta) * ctx.oracle.beta_norm_bound
    )


# ---------------------------------------------------------------------------
# Releases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructuredGramNoise:
    """Noise term added to the augmented Gram.

    ``assembled_E`` is theta_1 on the two off-diagonal identity blocks plus
    the symmetric zero-diagonal block theta_2 tiled into all four blocks;
    that layout matches which Gram entries a single row change can move, and
    it is invariant in distribution under any original/knockoff column swap.
    """

    theta_1: float
    theta_2: np.ndarray
    assembled_E: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "assembled_E", assemble_gram_noise(self.theta_1, self.theta_2))


def assemble_gram_noise(theta_1: float, theta_2: np.ndarray) -> np.ndarray:
    """E = theta_1 * [[0, I], [I, 0]] + [[1, 1], [1, 1]] (x) theta_2."""
    p = theta_2.shape[0]
    e = np.tile(theta_2, (2, 2))
    idx = np.arange(p)
    e[idx, idx + p] += theta_1
    e[idx + p, idx] += theta_1
    return e


@dataclass(frozen=True)
class PrivateRelease:
    """A released private quantity plus a record of every scale used.

    ``kind`` is ``"pair"`` (noisy Gram matrix and noisy feature-response
    product) or ``"estimate"`` (noisy coefficient vector); only the matching
    payload fields are populated.
    """

    kind: str
    budget: PrivacyBudget
    noise_scales: dict
    gram_noisy: np.ndarray | None = None
    crossprod_noisy: np.ndarray | None = None
    estimate_noisy: np.ndarray | None = None

    def total_privacy(self) -> tuple[float, float]:
        if self.kind == "pair":
            return self.budget.pair_release_totals()
        return self.budget.estimate_release_totals()


def release_pair(
    ad: AugmentedDesign,
    y,
    ctx: SensitivityContext,
    budget: PrivacyBudget,
    seed=None,
    zero_noise: bool = False,
) -> PrivateRelease:
    """Release a perturbed (augmented Gram, feature-response product) pair.

    The Gram perturbation is theta_1 ~ Laplace(lambda_min sensitivity / eps_1)
    on the off-diagonal identity blocks plus a symmetric Gaussian block with
    upper-triangle variance kappa_1^2 calibrated from the Frobenius
    sensitivity at (eps_2, delta).  The product perturbation is i.i.d.
    Gaussian with variance kappa_2^2 calibrated from
    :func:`pair_crossprod_sensitivity` at (eps, delta_1).  Any statistic
    computed from the released pair costs
    (eps + eps_1 + eps_2, delta + delta_1 + delta_2) in total.

    ``zero_noise`` forces every scale to zero (testing only; no privacy).
    """
    budget.require_pair_release()
    lam_sens, frob_sens = gram_sensitivities(ctx)
    theta1_scale = laplace_scale(lam_sens, budget.eps_1)
    kappa1_sq = gaussian_scale(frob_sens, budget.eps_2, budget.delta)
    cross_sens = pair_crossprod_sensitivity(ctx)
    kappa2_sq = gaussian_scale(cross_sens, budget.eps, budget.delta_1)
    if zero_noise:
        theta1_scale = kappa1_sq = kappa2_sq = 0.0

    p = ad.p
    theta_1 = float(sample_laplace_vector(1, theta1_scale, _substream(seed, _LABEL_THETA1))[0])
    theta_2 = sample_symmetric_offdiag_gaussian(p, kappa1_sq, _substream(seed, _LABEL_THETA2))
    noise = StructuredGramNoise(theta_1=theta_1, theta_2=theta_2)
    e_vec = sample_gaussian_vector(2 * p, kappa2_sq, _substream(seed, _LABEL_VECTOR))

    eps_total, delta_total = budget.pair_release_totals()
    return PrivateRelease(
        kind="pair",
        budget=budget,
        gram_noisy=ad.gram_g + noise.assembled_E,
        crossprod_noisy=ad.crossprod(y) + e_vec,
        noise_scales={
            "theta1_scale": theta1_scale,
            "kappa1_sq": kappa1_sq,
            "kappa2_sq": kappa2_sq,
            "lambda_min_sensitivity": lam_sens,
            "gram_frobenius_sensitivity": frob_sens,
            "crossprod_sensitivity": cross_sens,
            "eps_total": eps_total,
            "delta_total": delta_total,
        },
    )


def release_estimate(
    ad: AugmentedDesign,
    y,
    ctx: SensitivityContext,
    budget: PrivacyBudget,
    ridge_omega2: float = 0.0,
    seed=None,
    zero_noise: bool = False,
) -> PrivateRelease:
    """Release a perturbed ridge/OLS coefficient vector on the augmented design.

    Solves (G + omega^2 I) b = [X' Xt]^T y and adds i.i.d. Gaussian noise with
    variance kappa^2 calibrated from :func:`estimate_sensitivity` at
    (eps, delta_1); delta_2 is consumed by the concentration event inside the
    sensitivity bound, for a total cost of (eps, delta_1 + delta_2).

    ``zero_noise`` forces the scale to zero (testing only; no privacy).
    """
    sens = estimate_sensitivity(ctx, ridge_omega2)
    kappa_sq = gaussian_scale(sens, budget.eps, budget.delta_1)
    if zero_noise:
        kappa_sq = 0.0

    p = ad.p
    gram = ad.gram_g if ridge_omega2 == 0.0 else ad.gram_g + ridge_omega2 * np.eye(2 * p)
    try:
        estimate = np.linalg.solve(gram, ad.crossprod(y))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("augmented Gram (plus ridge) is numerically singular") from exc
    e_vec = sample_gaussian_vector(2 * p, kappa_sq, _substream(seed, _LABEL_VECTOR))

    eps_total, delta_total = budget.estimate_release_totals()
    return PrivateRelease(
        kind="estimate",
        budget=budget,
        estimate_noisy=estimate + e_vec,
        noise_scales={
            "kappa_sq": kappa_sq,
            "estimate_sensitivity": sens,
            "ridge_omega2": ridge_omega2,
            "eps_total": eps_total,
            "delta_total": delta_total,
        },
    )
