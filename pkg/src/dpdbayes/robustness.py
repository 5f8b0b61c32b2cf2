"""Local and global robustness analysis of pseudo-posterior estimators.

Local robustness is measured through influence functions: derivatives of the
population estimator functional in the contamination proportion at zero.
For the posterior mean the influence function is the posterior covariance
between the parameter and a contamination score

    k_i(theta, t) = [f_i^a(t) - integral f_i^a dG_i] / a          (a > 0)
    k_i(theta, t) = log f_i(t) - integral log f_i dG_i            (a = 0),

summed over the contaminated directions.  The score is bounded in t for
a > 0 and unbounded at a = 0, which is the entire robustness story.  The
pseudo-influence function centers the same score by its posterior mean and
measures local changes of the whole posterior density; its suprema over
parameter and contamination grids give the sensitivity indices, and the
posterior variance of the score gives the divergence-rate (variance)
sensitivity.

Global robustness is probed by the breakdown experiment: the population
posterior-mean functional is tracked while point-mass contamination is pushed
to ever larger magnitudes.  A bounded (plateauing) trajectory for a > 0 and
unbounded linear growth at a = 0 reproduce the theoretical breakdown
behaviour.  Population posterior expectations are computed by self-normalized
importance sampling against a Gaussian proposal centered at the maximizer of
the population objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .alpha_likelihood import (
    Contaminated,
    InModel,
    alpha_likelihood_functional,
    alpha_likelihood_functional_batch,
)
from .models import LinearKnownSigma, ModelFamily
from .posterior import DegenerateWeightsError, GaussianPrior, LossFunction

__all__ = [
    "OneDirection",
    "AllDirections",
    "McConfig",
    "FunctionalPosteriorSample",
    "InfluenceEstimate",
    "PifResult",
    "SensitivityReport",
    "BreakdownCurve",
    "contamination_score",
    "functional_posterior_sample",
    "influence_posterior_mean",
    "influence_curve",
    "influence_bayes_estimate",
    "influence_closed_form_alpha0",
    "pseudo_influence",
    "pseudo_influence_closed_form_alpha0",
    "sensitivities",
    "breakdown_experiment",
    "minimum_divergence_functional",
]


@dataclass(frozen=True)
class OneDirection:
    """Contamination of a single index at one point."""

    index: int
    point: float


@dataclass(frozen=True)
class AllDirections:
    """Contamination of every index, at a common point or per-index points."""

    points: float | np.ndarray


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings for population posterior expectations."""

    seed: int
    draws: int = 20_000
    proposal_inflation: float = 1.5

    def __post_init__(self) -> None:
        if self.draws < 1000:
            raise ValueError("population importance sampling needs >= 1000 draws")


@dataclass(frozen=True)
class FunctionalPosteriorSample:
    """Weighted draws approximating the population pseudo-posterior."""

    draws: np.ndarray  # (m, dim)
    weights: np.ndarray  # normalized, sums to one
    effective_sample_size: float
    center: np.ndarray

    def mean(self) -> np.ndarray:
        return self.weights @ self.draws

    def expectation(self, values: np.ndarray) -> np.ndarray:
        return self.weights @ values

    def variance(self, values: np.ndarray) -> float:
        mean = float(self.weights @ values)
        return float(self.weights @ (values - mean) ** 2)


@dataclass(frozen=True)
class InfluenceEstimate:
    """Monte Carlo influence value with block standard errors."""

    value: np.ndarray
    standard_error: np.ndarray
    effective_sample_size: float


@dataclass(frozen=True)
class PifResult:
    """Pseudo-influence surface over a parameter grid and contamination grid."""

    theta_grid: np.ndarray  # (n_theta, dim)
    t_grid: np.ndarray  # (n_t,)
    surface: np.ndarray  # (n_theta, n_t)
    posterior_variance: np.ndarray  # (n_t,) variance of the summed score
    centering_check: np.ndarray  # (n_t,) split-half discrepancy of E[score]
    centering_se: np.ndarray  # (n_t,)
    effective_sample_size: float

    def to_csv(self, path, alpha: float) -> None:
        """Export in long format (alpha, theta, t, value) for plotting."""
        with open(path, "w", newline="") as fh:
            fh.write("alpha,theta,t,value\n")
            for i in range(self.theta_grid.shape[0]):
                theta = float(self.theta_grid[i, 0])
                for j, t in enumerate(self.t_grid):
                    fh.write(
                        f"{float(alpha)!r},{theta!r},{float(t)!r},"
                        f"{float(self.surface[i, j])!r}\n"
                    )


@dataclass(frozen=True)
class SensitivityReport:
    """Sensitivity indices derived from a pseudo-influence surface."""

    gamma: np.ndarray  # per t: sup over the parameter grid
    gamma_star: float  # sup over the contamination grid
    s: np.ndarray  # per t: phi''(1) * posterior variance of the score
    s_star: float
    first_order_check: float  # largest |split-half centering| / its se


@dataclass(frozen=True)
class BreakdownCurve:
    """Estimator shift as contamination is pushed to larger magnitudes."""

    magnitudes: np.ndarray
    estimates: np.ndarray
    shifts: np.ndarray
    clean_estimate: float
    alpha: float
    epsilon: float
    method: str

    def to_csv(self, path) -> None:
        """Export in long format (alpha, epsilon, magnitude, estimate, shift)."""
        with open(path, "w", newline="") as fh:
            fh.write("alpha,epsilon,magnitude,estimate,shift\n")
            for mag, est, shift in zip(self.magnitudes, self.estimates, self.shifts):
                fh.write(
                    f"{float(self.alpha)!r},{float(self.epsilon)!r},"
                    f"{float(mag)!r},{float(est)!r},{float(shift)!r}\n"
                )


# ---------------------------------------------------------------------------
# Contamination score.
# ---------------------------------------------------------------------------


def _score_matrix(
    model: ModelFamily,
    theta_g: np.ndarray,
    thetas: np.ndarray,
    points,
    alpha: float,
) -> np.ndarray:
    """(m, n) matrix of k_i(theta, t_i) for parameter rows."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    log_f = model.log_density_batch(points, thetas)
    if alpha == 0.0:
        return log_f - model.log_density_expectation_batch(thetas, theta_g)
    log_m = model.log_power_expectation_batch(thetas, alpha, theta_g)
    # (e^{a log f(t)} - e^m)/a written through expm1 for stability at small a
    return np.exp(log_m) * np.expm1(alpha * log_f - log_m) / alpha


def contamination_score(
    model: ModelFamily, spec: InModel, i: int, theta, t, alpha: float
) -> float:
    """Score k_i(theta, t) of index i against its in-model truth."""
    if alpha < 0.0:
        raise ValueError("alpha must be >= 0")
    if not isinstance(spec, InModel):
        raise TypeError("contamination scores are defined against in-model truths")
    theta = model.validate_theta(theta)
    model._check_index(i)
    points = np.zeros(model.n)
    points[i] = t
    mat = _score_matrix(model, spec.theta_g, theta[None, :], points, alpha)
    return float(mat[0, i])


def _summed_scores(model, theta_g, thetas, scenario, alpha):
    """(m,) sums of k_i over the contaminated directions."""
    if isinstance(scenario, OneDirection):
        points = np.zeros(model.n)
        points[scenario.index] = scenario.point
        mat = _score_matrix(model, theta_g, thetas, points, alpha)
        return mat[:, scenario.index]
    if isinstance(scenario, AllDirections):
        mat = _score_matrix(model, theta_g, thetas, scenario.points, alpha)
        return mat.sum(axis=1)
    raise TypeError(f"unsupported contamination scenario: {type(scenario).__name__}")


# ---------------------------------------------------------------------------
# Population pseudo-posterior via importance sampling.
# ---------------------------------------------------------------------------


class _TwoScaleProposal:
    """Gaussian center-scale mixture; the wide component guards the tails."""

    def __init__(self, mean, cov, wide_factor: float = 4.0, wide_weight: float = 0.15):
        self.narrow = GaussianPrior(mean, cov)
        self.wide = GaussianPrior(mean, wide_factor**2 * np.atleast_2d(cov))
        self.log_wts = np.log([1.0 - wide_weight, wide_weight])

    def sample_batch(self, rng, m):
        pick = rng.random(m) < math.exp(self.log_wts[1])
        draws = self.narrow.sample_batch(rng, m)
        wide = self.wide.sample_batch(rng, m)
        draws[pick] = wide[pick]
        return draws

    def log_density_batch(self, thetas):
        a = self.log_wts[0] + self.narrow.log_density_batch(thetas)
        b = self.log_wts[1] + self.wide.log_density_batch(thetas)
        return np.logaddexp(a, b)


def _fd_curvature(fn, center: np.ndarray) -> np.ndarray:
    """Central-difference negative Hessian of a scalar function."""
    dim = center.size
    h = 1e-4 * np.maximum(1.0, np.abs(center))
    hess = np.empty((dim, dim))
    f0 = fn(center)
    for j in range(dim):
        ej = np.zeros(dim)
        ej[j] = h[j]
        hess[j, j] = (fn(center + ej) - 2.0 * f0 + fn(center - ej)) / h[j] ** 2
        for k in range(j):
            ek = np.zeros(dim)
            ek[k] = h[k]
            mixed = (
                fn(center + ej + ek)
                - fn(center + ej - ek)
                - fn(center - ej + ek)
                + fn(center - ej - ek)
            ) / (4.0 * h[j] * h[k])
            hess[j, k] = hess[k, j] = mixed
    return -hess


def _log_functional_posterior(model, spec, prior, alpha):
    def fn_batch(thetas):
        vals = alpha_likelihood_functional_batch(model, spec, thetas, alpha)
        return vals + prior.log_density_batch(np.atleast_2d(thetas))

    return fn_batch


def _locate_center(model, spec, prior, alpha) -> np.ndarray:
    fn_batch = _log_functional_posterior(model, spec, prior, alpha)

    def neg(theta):
        return -float(fn_batch(np.atleast_2d(theta))[0])

    start = np.asarray(spec.theta_g, dtype=float)
    if isinstance(spec, Contaminated) and spec.eps > 0.0 and model.dim == 1:
        # Global grid sweep first: the contaminated objective can be multimodal.
        pts = np.atleast_1d(np.asarray(spec.points, dtype=float))
        spread = 10.0 * getattr(model, "sigma", 1.0)
        lo = min(float(start[0]), float(pts.min())) - spread
        hi = max(float(start[0]), float(pts.max())) + spread
        grid = np.linspace(lo, hi, 2048)
        vals = fn_batch(grid[:, None])
        start = np.array([grid[int(np.argmax(vals))]])
    res = optimize.minimize(neg, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    return np.atleast_1d(np.asarray(res.x, dtype=float))


def functional_posterior_sample(
    model: ModelFamily, spec, prior, alpha: float, mc: McConfig
) -> FunctionalPosteriorSample:
    """Importance sample from the population pseudo-posterior.

    The proposal is a two-scale Gaussian mixture centered at the maximizer of
    the population objective plus log prior, with covariance from its
    finite-difference curvature (inflated).  Raises
    ``DegenerateWeightsError`` when the effective sample size stays below 50
    after two widening retries.
    """
    fn_batch = _log_functional_posterior(model, spec, prior, alpha)
    center = _locate_center(model, spec, prior, alpha)
    curvature = _fd_curvature(lambda th: float(fn_batch(np.atleast_2d(th))[0]), center)
    dim = center.size
    try:
        cov = np.linalg.inv(curvature)
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        cov = np.eye(dim)
    cov = 0.5 * (cov + cov.T)
    rng = np.random.default_rng(mc.seed)
    inflation = mc.proposal_inflation
    last_error = None
    for _ in range(3):
        proposal = _TwoScaleProposal(center, inflation**2 * cov)
        draws = proposal.sample_batch(rng, mc.draws)
        log_w = fn_batch(draws) - proposal.log_density_batch(draws)
        log_w -= np.max(log_w)
        w = np.exp(log_w)
        total = float(w.sum())
        ess = total**2 / float(np.sum(w * w))
        if ess >= 50.0:
            return FunctionalPosteriorSample(
                draws=draws,
                weights=w / total,
                effective_sample_size=float(ess),
                center=center,
            )
        last_error = DegenerateWeightsError(
            f"effective sample size {ess:.1f} < 50 with inflation {inflation:g}"
        )
        inflation *= 2.0
    raise last_error


# ---------------------------------------------------------------------------
# Influence functions.
# ---------------------------------------------------------------------------


def _weighted_cov_vector(draws, weights, scores):
    mean_theta = weights @ draws
    mean_score = float(weights @ scores)
    centered = (draws - mean_theta[None, :]) * (scores - mean_score)[:, None]
    return weights @ centered


def influence_posterior_mean(
    model: ModelFamily,
    spec: InModel,
    prior,
    alpha: float,
    scenario,
    mc: McConfig,
    sample: FunctionalPosteriorSample | None = None,
) -> InfluenceEstimate:
    """Influence function of the posterior-mean functional.

    The value is the population-posterior covariance between the parameter
    and the summed contamination score; block-split standard errors quantify
    the Monte Carlo noise.
    """
    if not isinstance(spec, InModel):
        raise TypeError("influence functions are derivatives at the uncontaminated truth")
    if sample is None:
        sample = functional_posterior_sample(model, spec, prior, alpha, mc)
    scores = _summed_scores(model, spec.theta_g, sample.draws, scenario, alpha)
    value = _weighted_cov_vector(sample.draws, sample.weights, scores)
    blocks = np.array_split(np.arange(sample.draws.shape[0]), 10)
    block_vals = []
    for idx in blocks:
        wb = sample.weights[idx]
        tot = wb.sum()
        if tot <= 0.0:
            continue
        block_vals.append(_weighted_cov_vector(sample.draws[idx], wb / tot, scores[idx]))
    block_vals = np.asarray(block_vals)
    se = block_vals.std(axis=0, ddof=1) / math.sqrt(block_vals.shape[0])
    return InfluenceEstimate(
        value=value, standard_error=se, effective_sample_size=sample.effective_sample_size
    )


def influence_curve(
    model: ModelFamily,
    spec: InModel,
    prior,
    alpha: float,
    t_grid,
    mc: McConfig,
) -> tuple[np.ndarray, np.ndarray, FunctionalPosteriorSample]:
    """All-directions influence values over a grid of common contamination
    points, sharing one population-posterior sample across the grid.

    Returns (values, standard_errors, sample) with values of shape
    (len(t_grid), dim).
    """
    sample = functional_posterior_sample(model, spec, prior, alpha, mc)
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.empty((t_grid.size, model.dim))
    errors = np.empty_like(values)
    for j, t in enumerate(t_grid):
        est = influence_posterior_mean(
            model, spec, prior, alpha, AllDirections(points=float(t)), mc, sample=sample
        )
        values[j] = est.value
        errors[j] = est.standard_error
    return values, errors, sample


def influence_closed_form_alpha0(
    model: LinearKnownSigma, prior: GaussianPrior, spec: InModel, t: float
) -> np.ndarray:
    """Exact a = 0 influence of the posterior mean, linear model, common t.

    With a Gaussian prior the ordinary posterior under the population
    objective is Gaussian with covariance V = (C^{-1} + Z'Z/sigma^2)^{-1},
    and the covariance formula collapses (Stein's lemma) to

        IF(t) = V (t * sum_i z_i - Z'Z beta_g) / sigma^2,

    independent of the prior mean.  For the all-ones design with unit prior
    variance and sigma = 1 this is the familiar n (t - mean(z) beta_g)/(n+1).
    """
    if not isinstance(model, LinearKnownSigma):
        raise TypeError("closed form available for the known-scale linear model only")
    z = model.design
    s2 = model.sigma**2
    v = np.linalg.inv(np.linalg.inv(prior.covariance) + z.T @ z / s2)
    rhs = (float(t) * z.sum(axis=0) - z.T @ z @ spec.theta_g) / s2
    return v @ rhs


def influence_bayes_estimate(
    model: ModelFamily,
    spec: InModel,
    prior,
    alpha: float,
    loss: LossFunction,
    scenario,
    mc: McConfig,
    component: int = 0,
    sample: FunctionalPosteriorSample | None = None,
) -> InfluenceEstimate:
    """Influence function of the estimator under a general scalar loss.

    Evaluates -E[L'(theta, T) * score] / E[L''(theta, T)] at the loss
    minimizer T of the population posterior; with squared-error loss this
    reproduces the posterior-mean influence exactly.
    """
    if sample is None:
        sample = functional_posterior_sample(model, spec, prior, alpha, mc)
    draws = sample.draws[:, component]
    w = sample.weights

    t_star = float(w @ draws)
    for _ in range(100):
        g = float(w @ loss.d1(draws, t_star))
        h = float(w @ loss.d2(draws, t_star))
        if h <= 0.0:
            break
        step = g / h
        t_star -= step
        if abs(step) < 1e-12 * (1.0 + abs(t_star)):
            break
    denom = float(w @ loss.d2(draws, t_star))
    if denom <= 0.0:
        raise ValueError("loss curvature at the estimate is not positive; ill-posed loss")
    scores = _summed_scores(model, spec.theta_g, sample.draws, scenario, alpha)
    lprime = loss.d1(draws, t_star)
    value = -float(w @ (lprime * scores)) / denom
    blocks = np.array_split(np.arange(draws.shape[0]), 10)
    vals = []
    for idx in blocks:
        wb = w[idx]
        tot = wb.sum()
        if tot <= 0.0:
            continue
        vals.append(-float((wb / tot) @ (lprime[idx] * scores[idx])) / denom)
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    return InfluenceEstimate(
        value=np.atleast_1d(value),
        standard_error=np.atleast_1d(se),
        effective_sample_size=sample.effective_sample_size,
    )


# ---------------------------------------------------------------------------
# Pseudo-influence of the whole posterior density.
# ---------------------------------------------------------------------------


def pseudo_influence(
    model: ModelFamily,
    spec: InModel,
    prior,
    alpha: float,
    theta_grid,
    t_grid,
    mc: McConfig,
) -> PifResult:
    """Pseudo-influence surface: the centered contamination score.

    For each common contamination point t the summed score K(theta, t) is
    centered by its population-posterior mean, then evaluated on the
    parameter grid.  The posterior variance of K (the variance-sensitivity
    ingredient) and a split-half check of the centering are reported per t.
    """
    theta_grid = np.atleast_2d(np.asarray(theta_grid, dtype=float))
    if theta_grid.shape[1] != model.dim:
        theta_grid = theta_grid.reshape(-1, model.dim)
    t_grid = np.asarray(t_grid, dtype=float)
    sample = functional_posterior_sample(model, spec, prior, alpha, mc)
    half = sample.draws.shape[0] // 2
    surface = np.empty((theta_grid.shape[0], t_grid.size))
    post_var = np.empty(t_grid.size)
    check = np.empty(t_grid.size)
    check_se = np.empty(t_grid.size)
    for j, t in enumerate(t_grid):
        scenario = AllDirections(points=float(t))
        scores = _summed_scores(model, spec.theta_g, sample.draws, scenario, alpha)
        mean_score = float(sample.weights @ scores)
        post_var[j] = sample.variance(scores)
        grid_scores = _summed_scores(model, spec.theta_g, theta_grid, scenario, alpha)
        surface[:, j] = grid_scores - mean_score
        w1, w2 = sample.weights[:half], sample.weights[half:]
        m1 = float(w1 @ scores[:half]) / float(w1.sum())
        m2 = float(w2 @ scores[half:]) / float(w2.sum())
        check[j] = m1 - m2
        # Crude scale for the split discrepancy from the pooled variance.
        check_se[j] = math.sqrt(
            2.0 * post_var[j] / max(sample.effective_sample_size / 2.0, 1.0)
        )
    return PifResult(
        theta_grid=theta_grid,
        t_grid=t_grid,
        surface=surface,
        posterior_variance=post_var,
        centering_check=check,
        centering_se=np.maximum(check_se, 1e-300),
        effective_sample_size=sample.effective_sample_size,
    )


def pseudo_influence_closed_form_alpha0(
    model: LinearKnownSigma, prior: GaussianPrior, spec: InModel, theta, t: float
) -> float:
    """Exact a = 0 pseudo-influence for the linear model at common t.

    The summed score is linear in the parameter, so centering by the
    Gaussian posterior mean theta_bar gives

        PIF(theta, t) = (theta - theta_bar)' (t sum_i z_i - Z'Z theta_g) / sigma^2;

    with the prior mean at theta_g the posterior mean equals theta_g and
    this is the familiar unbounded-in-t linear form.
    """
    z = model.design
    s2 = model.sigma**2
    theta = model.validate_theta(theta)
    precision = np.linalg.inv(prior.covariance) + z.T @ z / s2
    rhs = np.linalg.inv(prior.covariance) @ prior.mean + z.T @ z @ spec.theta_g / s2
    theta_bar = np.linalg.solve(precision, rhs)
    direction = (float(t) * z.sum(axis=0) - z.T @ z @ spec.theta_g) / s2
    return float((theta - theta_bar) @ direction)


def sensitivities(
    pif: PifResult, phi_second_derivative_at_1: float = 1.0
) -> SensitivityReport:
    """Sensitivity indices from a pseudo-influence surface.

    gamma(t) is the supremum of the surface over the parameter grid, and
    gamma* its supremum over the contamination grid; s(t) is phi''(1) times
    the posterior variance of the summed score (the epsilon^2-rate of the
    phi-divergence between contaminated and clean posteriors), s* its
    supremum.  The first-order divergence rate is zero by posterior
    centering; the report carries the largest standardized split-half
    discrepancy as the numerical check of that limit.
    """
    gamma = pif.surface.max(axis=0)
    s = phi_second_derivative_at_1 * pif.posterior_variance
    first_order = float(np.max(np.abs(pif.centering_check) / pif.centering_se))
    return SensitivityReport(
        gamma=gamma,
        gamma_star=float(gamma.max()),
        s=s,
        s_star=float(s.max()),
        first_order_check=first_order,
    )


# ---------------------------------------------------------------------------
# Breakdown experiment.
# ---------------------------------------------------------------------------


def minimum_divergence_functional(
    model: ModelFamily, spec, alpha: float
) -> np.ndarray:
    """Global maximizer of the population objective (no prior).

    One-dimensional problems are swept on a wide grid before polishing, so
    the global optimum is found even when contamination makes the objective
    multimodal.
    """

    def neg(theta):
        return -alpha_likelihood_functional(model, spec, np.atleast_1d(theta), alpha)

    start = np.asarray(spec.theta_g, dtype=float)
    if model.dim == 1:
        anchor = [float(start[0])]
        if isinstance(spec, Contaminated) and spec.eps > 0.0:
            pts = np.atleast_1d(np.asarray(spec.points, dtype=float))
            anchor += [float(pts.min()), float(pts.max())]
        spread = 10.0 * getattr(model, "sigma", 1.0)
        lo, hi = min(anchor) - spread, max(anchor) + spread
        grid = np.linspace(lo, hi, 4096)
        vals = alpha_likelihood_functional_batch(model, spec, grid[:, None], alpha)
        start = np.array([grid[int(np.argmax(vals))]])
    res = optimize.minimize(
        neg, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12}
    )
    return np.atleast_1d(np.asarray(res.x, dtype=float))


def breakdown_experiment(
    model: LinearKnownSigma,
    prior,
    theta_g,
    alpha: float,
    epsilon: float,
    magnitudes,
    seed: int,
    method: str = "is",
    draws: int = 20_000,
) -> BreakdownCurve:
    """Track the population posterior-mean location as outliers go to infinity.

    For each magnitude M the true distributions become the mixtures
    (1-eps) G_i + eps point-mass(M) and the location estimate is recomputed;
    the recorded curve of |estimate - clean estimate| either plateaus
    (bounded breakdown behaviour, expected for a > 0 with eps below one half)
    or grows without bound (the a = 0 posterior mean).  ``method="is"``
    computes the posterior-mean functional by importance sampling;
    ``method="laplace"`` substitutes the minimum-divergence functional, to
    which the posterior mean is asymptotically equivalent.
    """
    if not isinstance(model, LinearKnownSigma) or model.dim != 1:
        raise ValueError(
            "the breakdown experiment targets a scalar location model with fixed scale"
        )
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError("breakdown contamination proportion must lie in [0, 0.5]")
    magnitudes = np.asarray(list(magnitudes), dtype=float)
    if magnitudes.size == 0 or np.any(np.diff(magnitudes) <= 0.0):
        raise ValueError("magnitudes must be strictly increasing")
    theta_g = model.validate_theta(theta_g)
    seeds = np.random.SeedSequence(seed).spawn(magnitudes.size + 1)

    def estimate(spec, seq) -> float:
        if method == "laplace":
            return float(minimum_divergence_functional(model, spec, alpha)[0])
        if method != "is":
            raise ValueError("method must be 'is' or 'laplace'")
        mc = McConfig(seed=int(seq.generate_state(1)[0]), draws=draws)
        sample = functional_posterior_sample(model, spec, prior, alpha, mc)
        return float(sample.mean()[0])

    clean = estimate(Contaminated(theta_g, 0.0, np.zeros(model.n)), seeds[0])
    estimates = np.empty(magnitudes.size)
    for j, mag in enumerate(magnitudes):
        spec = Contaminated(theta_g, epsilon, float(mag))
        estimates[j] = estimate(spec, seeds[j + 1])
    return BreakdownCurve(
        magnitudes=magnitudes,
        estimates=estimates,
        shifts=np.abs(estimates - clean),
        clean_estimate=clean,
        alpha=alpha,
        epsilon=epsilon,
        method=method,
    )
