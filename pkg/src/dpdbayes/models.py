"""Model families for independent, non-identically-distributed fixed-design data.

The data model is a vector of independent responses x_1..x_n, one per row z_i
of a fixed design matrix, with per-index densities f_i that all share a single
parameter vector.  Three families are built in: normal linear regression with
known error scale, with unknown error scale (the scale is the last parameter
coordinate), and Bernoulli-logit regression.

Each family exposes, in closed form, the quantities the power-divergence
machinery needs: log densities, powered densities f_i^a, the integrals of
f_i^{1+a}, the per-observation divergence loss terms

    V_i(x, theta) = integral f_i^{1+a} - (1 + 1/a) f_i^a(x)

with their first and second parameter derivatives, in-model expectations of
those derivatives (for asymptotic covariances), and expectations of powered
densities under a different parameter value (for population-level functionals
and contamination analysis).  User-defined families can be added through
``QuadratureFamily``, which falls back to adaptive quadrature over a declared
support and finite-difference derivatives.

All operations are pure; family objects are immutable after construction and
safe to share across workers.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "Dataset",
    "DataFormatError",
    "DesignConditionReport",
    "ModelFamily",
    "LinearKnownSigma",
    "LinearUnknownSigma",
    "Logistic",
    "QuadratureFamily",
    "check_design_conditions",
    "dpd_loss",
    "dpd_loss_grad",
    "dpd_loss_hess",
]

# Relative eigenvalue threshold below which a design is declared rank deficient.
RANK_TOLERANCE = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


class DataFormatError(ValueError):
    """Raised when a data file cannot be parsed into a numeric dataset."""


@dataclass(frozen=True)
class Dataset:
    """Responses paired with the fixed design rows they were observed under.

    Attributes:
        responses: Length-n vector of observations (binary-coded {0,1} for
            logistic families).
        design: n-by-p matrix of fixed covariate rows.
    """

    responses: np.ndarray
    design: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.responses, dtype=float))
        z = np.asarray(self.design, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if x.ndim != 1 or z.ndim != 2:
            raise ValueError("responses must be a vector and design a matrix")
        if x.shape[0] != z.shape[0]:
            raise ValueError(
                f"{x.shape[0]} responses but {z.shape[0]} design rows"
            )
        n, p = z.shape
        if n < 1 or p < 1:
            raise ValueError("dataset must have at least one row and one column")
        if n < p:
            raise ValueError(f"need n >= p, got n={n}, p={p}")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(z)):
            raise ValueError("responses and design entries must be finite")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "responses", x)
        object.__setattr__(self, "design", z)

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.design.shape[1]

    @classmethod
    def from_csv(cls, path, header: bool = False) -> "Dataset":
        """Load a dataset from CSV: first column response, rest covariates.

        Args:
            path: File path.
            header: Skip the first row when True.

        Raises:
            DataFormatError: On an empty file, ragged rows, or a non-numeric
                cell (the message carries the line and column).
        """
        rows: list[list[float]] = []
        with open(path, newline="") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if header and line_no == 1:
                    continue
                if not row or all(not cell.strip() for cell in row):
                    continue
                values = []
                for col_no, cell in enumerate(row, start=1):
                    try:
                        values.append(float(cell))
                    except ValueError:
                        raise DataFormatError(
                            f"non-numeric value {cell.strip()!r} at "
                            f"line {line_no}, column {col_no}"
                        ) from None
                if rows and len(values) != len(rows[0]):
                    raise DataFormatError(
                        f"row at line {line_no} has {len(values)} fields, "
                        f"expected {len(rows[0])}"
                    )
                rows.append(values)
        if not rows:
            raise DataFormatError("no data rows found")
        if len(rows[0]) < 2:
            raise DataFormatError("need at least one covariate column")
        arr = np.asarray(rows, dtype=float)
        return cls(responses=arr[:, 0], design=arr[:, 1:])


@dataclass(frozen=True)
class DesignConditionReport:
    """Numerical summary of the fixed-design regularity conditions."""

    max_abs_entry: float
    min_eigenvalue_scaled: float
    max_leverage: float
    full_column_rank: bool


def check_design_conditions(design: np.ndarray) -> DesignConditionReport:
    """Check boundedness, eigenvalue, and leverage conditions of a design.

    Reports the largest absolute entry, the smallest eigenvalue of the scaled
    Gram matrix Z'Z/n, the maximum leverage max_i z_i'(Z'Z)^{-1}z_i, and
    whether Z has full column rank (up to ``RANK_TOLERANCE`` relative to the
    largest eigenvalue).  Degenerate designs are reported, never rejected;
    acceptability is the caller's decision.
    """
    z = np.asarray(design, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.size == 0:
        raise ValueError("design must be non-empty")
    n = z.shape[0]
    gram = z.T @ z
    eigvals = np.linalg.eigvalsh(gram / n)
    min_eig = float(eigvals[0])
    max_eig = float(eigvals[-1])
    full_rank = min_eig > RANK_TOLERANCE * max(max_eig, 1e-300)
    # Leverage via pseudo-inverse so rank-deficient designs still report.
    hat = z @ np.linalg.pinv(gram) @ z.T
    return DesignConditionReport(
        max_abs_entry=float(np.max(np.abs(z))),
        min_eigenvalue_scaled=min_eig if full_rank else 0.0,
        max_leverage=float(np.max(np.diag(hat))),
        full_column_rank=bool(full_rank),
    )


class ModelFamily(ABC):
    """A family of per-index densities sharing one parameter vector.

    Concrete families hold the fixed design and implement the closed-form
    primitives; everything the estimation, posterior, and robustness layers
    consume is derived from these.
    """

    #: Whether third parameter derivatives of the loss terms are bounded
    #: uniformly in the data (true for all built-ins; used as a diagnostic
    #: flag by the asymptotic-expansion checks).
    has_bounded_third_derivatives: bool = True

    def __init__(self, design: np.ndarray):
        z = np.asarray(design, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2 or z.size == 0:
            raise ValueError("design must be a non-empty matrix")
        if not np.all(np.isfinite(z)):
            raise ValueError("design entries must be finite")
        z.setflags(write=False)
        self.design = z

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.design.shape[1]

    @property
    @abstractmethod
    def dim(self) -> int:
        """Length of the parameter vector."""

    def validate_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.dim,):
            raise ValueError(f"parameter must have length {self.dim}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameter coordinates must be finite")
        return theta

    def validate_data(self, data: Dataset) -> None:
        if data.n != self.n or data.n_covariates != self.n_covariates:
            raise ValueError("dataset shape does not match the model design")
        if not np.array_equal(data.design, self.design):
            raise ValueError("dataset design differs from the model design")

    def _check_index(self, i) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(i, dtype=int))
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise IndexError(f"observation index out of range [0, {self.n})")
        return idx

    # ---- per-family closed-form primitives -------------------------------

    @abstractmethod
    def log_density_terms(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """log f_i(x_i) for every index, as an (n,) array."""

    @abstractmethod
    def log_power_integral_terms(self, theta: np.ndarray, alpha: float) -> np.ndarray:
        """log of integral f_i^{1+alpha} for every index, as an (n,) array."""

    @abstractmethod
    def loss_grad_sum(self, x: np.ndarray, theta: np.ndarray, alpha: float) -> np.ndarray:
        """Sum over i of the parameter gradient of V_i(x_i, theta)."""

    @abstractmethod
    def loss_hess_sum(self, x: np.ndarray, theta: np.ndarray, alpha: float) -> np.ndarray:
        """Sum over i of the parameter Hessian of V_i(x_i, theta)."""

    @abstractmethod
    def log_power_expectation_terms(
        self, theta: np.ndarray, alpha: float, theta_true: np.ndarray
    ) -> np.ndarray:
        """log of integral f_{i,theta}^alpha dG_i with G_i in-model at theta_true."""

    @abstractmethod
    def log_density_expectation_terms(
        self, theta: np.ndarray, theta_true: np.ndarray
    ) -> np.ndarray:
        """integral of log f_{i,theta} dG_i with G_i in-model at theta_true."""

    def log_power_integral_batch(self, thetas: np.ndarray, alpha: float) -> np.ndarray:
        """(m, n) array of log integral f_i^{1+alpha} for parameter rows."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.stack([self.log_power_integral_terms(t, alpha) for t in thetas])

    def log_density_expectation_batch(
        self, thetas: np.ndarray, theta_true: np.ndarray
    ) -> np.ndarray:
        """(m, n) array of expected log densities for parameter rows."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.stack(
            [self.log_density_expectation_terms(t, theta_true) for t in thetas]
        )

    def log_power_expectation_batch(
        self, thetas: np.ndarray, alpha: float, theta_true: np.ndarray
    ) -> np.ndarray:
        """(m, n) array of log integral f_theta^alpha dG for parameter rows."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.stack(
            [self.log_power_expectation_terms(t, alpha, theta_true) for t in thetas]
        )

    def log_density_batch(self, points, thetas) -> np.ndarray:
        """(m, n) array of log f_{i,theta}(t_i) for parameter rows."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        pts = np.broadcast_to(np.asarray(points, dtype=float), (self.n,))
        idx = np.arange(self.n)
        return np.stack([self._log_density_at(idx, pts, t) for t in thetas])

    @abstractmethod
    def in_model_psi_omega(
        self, theta: np.ndarray, alpha: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Closed-form expected-curvature and score-variance matrices.

        Both are averages over i under the model at ``theta`` itself: psi is
        the expected negative Hessian of the per-observation objective and
        omega the variance of its gradient (each scaled by 1/n).
        """

    @abstractmethod
    def sample_responses(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one response vector from the family at ``theta``."""

    # ---- derived quantities ----------------------------------------------

    def density_power(self, i, x, theta, alpha: float):
        """f_i^alpha(x); equals 1 identically at alpha = 0."""
        theta = self.validate_theta(theta)
        idx = self._check_index(i)
        if alpha == 0.0:
            out = np.ones(np.broadcast(idx, np.asarray(x, dtype=float)).shape)
            return float(out[0]) if np.isscalar(i) and np.isscalar(x) else out
        ll = self._log_density_at(idx, np.asarray(x, dtype=float), theta)
        out = np.exp(alpha * ll)
        return float(out[0]) if out.size == 1 and np.isscalar(i) else out

    def log_density(self, i, x, theta):
        theta = self.validate_theta(theta)
        idx = self._check_index(i)
        out = self._log_density_at(idx, np.asarray(x, dtype=float), theta)
        return float(out[0]) if out.size == 1 and np.isscalar(i) else out

    @abstractmethod
    def _log_density_at(self, idx: np.ndarray, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """log f_i(x) for explicit index/observation arrays (broadcast)."""

    def integral_power(self, i, theta, alpha: float):
        """integral of f_i^{1+alpha}; equals 1 at alpha = 0 (normalization)."""
        theta = self.validate_theta(theta)
        idx = self._check_index(i)
        vals = np.exp(self.log_power_integral_terms(theta, alpha))[idx]
        return float(vals[0]) if np.isscalar(i) else vals

    def summed_q_value(self, x: np.ndarray, theta: np.ndarray, alpha: float) -> float:
        """Sum over i of the per-observation divergence objective.

        For alpha > 0 each term is f_i^a(x_i)/a - I_i/(1+a) - 1/a with
        I_i = integral f_i^{1+a}; the alpha = 0 branch is the exact
        log-likelihood minus n (never a small-alpha evaluation).  The
        1/a pieces are combined through expm1 so values stay accurate
        down to alpha ~ 1e-12.
        """
        ll = self.log_density_terms(x, theta)
        if alpha == 0.0:
            return float(np.sum(ll) - ll.shape[0])
        ints = np.exp(self.log_power_integral_terms(theta, alpha))
        terms = np.expm1(alpha * ll) / alpha - ints / (1.0 + alpha)
        return float(np.sum(terms))

    def summed_q_value_batch(
        self, x: np.ndarray, thetas: np.ndarray, alpha: float
    ) -> np.ndarray:
        """Vectorized ``summed_q_value`` over rows of ``thetas``."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self.summed_q_value(x, t, alpha) for t in thetas])

    def loss_value_terms(self, x: np.ndarray, theta: np.ndarray, alpha: float) -> np.ndarray:
        """V_i(x_i, theta) for every index; requires alpha > 0."""
        if alpha <= 0.0:
            raise ValueError("divergence loss terms require alpha > 0")
        ll = self.log_density_terms(x, theta)
        ints = np.exp(self.log_power_integral_terms(theta, alpha))
        return ints - (1.0 + 1.0 / alpha) * np.exp(alpha * ll)


def dpd_loss(model: ModelFamily, i: int, x: float, theta, alpha: float) -> float:
    """Per-observation divergence loss V_i(x, theta) for alpha > 0."""
    if alpha <= 0.0:
        raise ValueError("dpd_loss requires alpha > 0")
    theta = model.validate_theta(theta)
    idx = model._check_index(i)
    ll = model._log_density_at(idx, np.asarray(x, dtype=float), theta)
    ints = np.exp(model.log_power_integral_terms(theta, alpha))[idx]
    val = ints - (1.0 + 1.0 / alpha) * np.exp(alpha * ll)
    return float(val[0])


def dpd_loss_grad(model: ModelFamily, i: int, x: float, theta, alpha: float) -> np.ndarray:
    """Analytic parameter gradient of V_i(x, theta); valid for alpha >= 0."""
    theta = model.validate_theta(theta)
    model._check_index(i)
    return model._loss_grad_single(int(i), float(x), theta, alpha)


def dpd_loss_hess(model: ModelFamily, i: int, x: float, theta, alpha: float) -> np.ndarray:
    """Analytic parameter Hessian of V_i(x, theta); valid for alpha >= 0."""
    theta = model.validate_theta(theta)
    model._check_index(i)
    return model._loss_hess_single(int(i), float(x), theta, alpha)


# ---------------------------------------------------------------------------
# Normal linear regression, known error scale.
# ---------------------------------------------------------------------------


class LinearKnownSigma(ModelFamily):
    """Normal linear regression x_i ~ N(z_i'beta, sigma^2) with sigma known.

    The parameter is the coefficient vector beta.  All power integrals and
    expectations are closed-form Gaussian algebra:

        integral f^{1+a} = (2 pi)^{-a/2} sigma^{-a} (1+a)^{-1/2}

    independent of the index and of beta.
    """

    def __init__(self, design: np.ndarray, sigma: float):
        super().__init__(design)
        if not (sigma > 0 and np.isfinite(sigma)):
            raise ValueError("sigma must be a positive finite number")
        self.sigma = float(sigma)

    @property
    def dim(self) -> int:
        return self.n_covariates

    def _prefactor(self, alpha: float) -> float:
        # (2 pi)^{-a/2} sigma^{-a}
        return math.exp(-0.5 * alpha * (_LOG_2PI + 2.0 * math.log(self.sigma)))

    def log_density_terms(self, x, theta):
        r = np.asarray(x, dtype=float) - self.design @ theta
        return -0.5 * (_LOG_2PI + 2.0 * math.log(self.sigma)) - r * r / (2.0 * self.sigma**2)

    def _log_density_at(self, idx, x, theta):
        r = x - self.design[idx] @ theta
        return -0.5 * (_LOG_2PI + 2.0 * math.log(self.sigma)) - r * r / (2.0 * self.sigma**2)

    def log_power_integral_terms(self, theta, alpha):
        if alpha == 0.0:
            return np.zeros(self.n)
        log_i = (
            -0.5 * alpha * (_LOG_2PI + 2.0 * math.log(self.sigma))
            - 0.5 * math.log1p(alpha)
        )
        return np.full(self.n, log_i)

    def loss_grad_sum(self, x, theta, alpha):
        s2 = self.sigma**2
        r = np.asarray(x, dtype=float) - self.design @ theta
        u = np.exp(-alpha * r * r / (2.0 * s2))
        c = self._prefactor(alpha)
        return -(1.0 + alpha) * (c / s2) * (self.design.T @ (r * u))

    def loss_hess_sum(self, x, theta, alpha):
        s2 = self.sigma**2
        r = np.asarray(x, dtype=float) - self.design @ theta
        u = np.exp(-alpha * r * r / (2.0 * s2))
        c = self._prefactor(alpha)
        w = (1.0 + alpha) * (c / s2) * u * (1.0 - alpha * r * r / s2)
        return self.design.T @ (w[:, None] * self.design)

    def _loss_grad_single(self, i, x, theta, alpha):
        s2 = self.sigma**2
        r = x - float(self.design[i] @ theta)
        u = math.exp(-alpha * r * r / (2.0 * s2))
        return -(1.0 + alpha) * (self._prefactor(alpha) / s2) * r * u * self.design[i]

    def _loss_hess_single(self, i, x, theta, alpha):
        s2 = self.sigma**2
        r = x - float(self.design[i] @ theta)
        u = math.exp(-alpha * r * r / (2.0 * s2))
        w = (1.0 + alpha) * (self._prefactor(alpha) / s2) * u * (1.0 - alpha * r * r / s2)
        return w * np.outer(self.design[i], self.design[i])

    def summed_q_value_batch(self, x, thetas, alpha):
        # Hot path for samplers; one large scratch array, updated in place.
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        x = np.asarray(x, dtype=float)
        work = thetas @ self.design.T  # (m, n)
        np.subtract(x[None, :], work, out=work)
        np.multiply(work, work, out=work)
        s2 = self.sigma**2
        log_norm = -0.5 * (_LOG_2PI + 2.0 * math.log(self.sigma))
        if alpha == 0.0:
            total = work.sum(axis=1)
            total *= -1.0 / (2.0 * s2)
            total += self.n * (log_norm - 1.0)
            return total
        work *= -alpha / (2.0 * s2)
        work += alpha * log_norm
        np.expm1(work, out=work)
        total = work.sum(axis=1)
        total /= alpha
        log_i = alpha * log_norm - 0.5 * math.log1p(alpha)
        total -= self.n * math.exp(log_i) / (1.0 + alpha)
        return total

    def log_power_expectation_terms(self, theta, alpha, theta_true):
        delta = self.design @ (np.asarray(theta, float) - np.asarray(theta_true, float))
        s2 = self.sigma**2
        return (
            -0.5 * alpha * (_LOG_2PI + 2.0 * math.log(self.sigma))
            - 0.5 * math.log1p(alpha)
            - alpha * delta * delta / (2.0 * s2 * (1.0 + alpha))
        )

    def log_density_expectation_terms(self, theta, theta_true):
        delta = self.design @ (np.asarray(theta, float) - np.asarray(theta_true, float))
        s2 = self.sigma**2
        return -0.5 * (_LOG_2PI + 2.0 * math.log(self.sigma)) - (s2 + delta * delta) / (
            2.0 * s2
        )

    def log_power_expectation_batch(self, thetas, alpha, theta_true):
        """(m, n) array of log integral f_theta^alpha dG for theta rows."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        delta = thetas @ self.design.T - (self.design @ np.asarray(theta_true, float))[None, :]
        s2 = self.sigma**2
        return (
            -0.5 * alpha * (_LOG_2PI + 2.0 * math.log(self.sigma))
            - 0.5 * math.log1p(alpha)
            - alpha * delta * delta / (2.0 * s2 * (1.0 + alpha))
        )

    def log_density_batch(self, points, thetas):
        """(m, n) array of log f_{i,theta}(t_i) for theta rows and points t_i."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        pts = np.broadcast_to(np.asarray(points, dtype=float), (self.n,))
        r = pts[None, :] - thetas @ self.design.T
        return -0.5 * (_LOG_2PI + 2.0 * math.log(self.sigma)) - r * r / (2.0 * self.sigma**2)

    def log_power_integral_batch(self, thetas, alpha):
        m = np.atleast_2d(np.asarray(thetas, dtype=float)).shape[0]
        row = self.log_power_integral_terms(np.zeros(self.dim), alpha)
        return np.tile(row, (m, 1))

    def log_density_expectation_batch(self, thetas, theta_true):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        delta = thetas @ self.design.T - (self.design @ np.asarray(theta_true, float))[None, :]
        s2 = self.sigma**2
        return -0.5 * (_LOG_2PI + 2.0 * math.log(self.sigma)) - (s2 + delta * delta) / (
            2.0 * s2
        )

    def zeta(self, alpha: float) -> float:
        """Curvature constant (2 pi)^{-a/2} sigma^{-(a+2)} (1+a)^{-3/2}."""
        return (
            self._prefactor(alpha) / self.sigma**2 * (1.0 + alpha) ** -1.5
        )

    def in_model_psi_omega(self, theta, alpha):
        gram = self.design.T @ self.design / self.n
        return self.zeta(alpha) * gram, self.zeta(2.0 * alpha) * gram

    def sample_responses(self, theta, rng):
        theta = self.validate_theta(theta)
        return self.design @ theta + self.sigma * rng.standard_normal(self.n)


# ---------------------------------------------------------------------------
# Normal linear regression, unknown error scale.
# ---------------------------------------------------------------------------


class LinearUnknownSigma(ModelFamily):
    """Normal linear regression with the error scale as a free parameter.

    The parameter vector is (beta_1..beta_p, sigma) with sigma > 0 enforced as
    a domain constraint; optimizers keep iterates feasible by backtracking.
    """

    @property
    def dim(self) -> int:
        return self.n_covariates + 1

    def validate_theta(self, theta):
        theta = super().validate_theta(theta)
        if theta[-1] <= 0.0:
            raise ValueError("scale coordinate must be strictly positive")
        return theta

    @staticmethod
    def _split(theta):
        theta = np.asarray(theta, dtype=float)
        return theta[:-1], float(theta[-1])

    def log_density_terms(self, x, theta):
        beta, sigma = self._split(theta)
        r = np.asarray(x, dtype=float) - self.design @ beta
        return -0.5 * (_LOG_2PI + 2.0 * math.log(sigma)) - r * r / (2.0 * sigma**2)

    def _log_density_at(self, idx, x, theta):
        beta, sigma = self._split(theta)
        r = x - self.design[idx] @ beta
        return -0.5 * (_LOG_2PI + 2.0 * math.log(sigma)) - r * r / (2.0 * sigma**2)

    def log_power_integral_terms(self, theta, alpha):
        _, sigma = self._split(theta)
        if alpha == 0.0:
            return np.zeros(self.n)
        log_i = -0.5 * alpha * (_LOG_2PI + 2.0 * math.log(sigma)) - 0.5 * math.log1p(alpha)
        return np.full(self.n, log_i)

    def _pieces(self, x, theta, alpha):
        beta, sigma = self._split(theta)
        r = np.asarray(x, dtype=float) - self.design @ beta
        w = r / sigma
        u = np.exp(-0.5 * alpha * w * w)
        c = math.exp(-0.5 * alpha * (_LOG_2PI + 2.0 * math.log(sigma)))
        return sigma, w, u, c

    def loss_grad_sum(self, x, theta, alpha):
        sigma, w, u, c = self._pieces(x, theta, alpha)
        g_beta = -(1.0 + alpha) * (c / sigma) * (self.design.T @ (w * u))
        g_sigma = -self.n * alpha * c * (1.0 + alpha) ** -0.5 / sigma - (1.0 + alpha) * (
            c / sigma
        ) * np.sum(u * (w * w - 1.0))
        return np.append(g_beta, g_sigma)

    def loss_hess_sum(self, x, theta, alpha):
        sigma, w, u, c = self._pieces(x, theta, alpha)
        s2 = sigma**2
        n = self.n
        h_bb = (1.0 + alpha) * (c / s2) * (
            self.design.T @ ((u * (1.0 - alpha * w * w))[:, None] * self.design)
        )
        h_bs_w = (1.0 + alpha) * (c / s2) * w * u * ((alpha + 2.0) - alpha * w * w)
        h_bs = self.design.T @ h_bs_w
        h_ss = n * alpha * math.sqrt(1.0 + alpha) * c / s2 - (1.0 + alpha) * (
            c / s2
        ) * np.sum(u * (alpha * w**4 - (2.0 * alpha + 3.0) * w * w + (alpha + 1.0)))
        out = np.empty((self.dim, self.dim))
        out[:-1, :-1] = h_bb
        out[:-1, -1] = h_bs
        out[-1, :-1] = h_bs
        out[-1, -1] = h_ss
        return out

    def _loss_grad_single(self, i, x, theta, alpha):
        beta, sigma = self._split(theta)
        r = x - float(self.design[i] @ beta)
        w = r / sigma
        u = math.exp(-0.5 * alpha * w * w)
        c = math.exp(-0.5 * alpha * (_LOG_2PI + 2.0 * math.log(sigma)))
        g_beta = -(1.0 + alpha) * (c / sigma) * w * u * self.design[i]
        g_sigma = -alpha * c * (1.0 + alpha) ** -0.5 / sigma - (1.0 + alpha) * (
            c / sigma
        ) * u * (w * w - 1.0)
        return np.append(g_beta, g_sigma)

    def _loss_hess_single(self, i, x, theta, alpha):
        beta, sigma = self._split(theta)
        s2 = sigma**2
        r = x - float(self.design[i] @ beta)
        w = r / sigma
        u = math.exp(-0.5 * alpha * w * w)
        c = math.exp(-0.5 * alpha * (_LOG_2PI + 2.0 * math.log(sigma)))
        z = self.design[i]
        h_bb = (1.0 + alpha) * (c / s2) * u * (1.0 - alpha * w * w) * np.outer(z, z)
        h_bs = (1.0 + alpha) * (c / s2) * w * u * ((alpha + 2.0) - alpha * w * w) * z
        h_ss = alpha * math.sqrt(1.0 + alpha) * c / s2 - (1.0 + alpha) * (c / s2) * u * (
            alpha * w**4 - (2.0 * alpha + 3.0) * w * w + (alpha + 1.0)
        )
        out = np.empty((self.dim, self.dim))
        out[:-1, :-1] = h_bb
        out[:-1, -1] = h_bs
        out[-1, :-1] = h_bs
        out[-1, -1] = h_ss
        return out

    def summed_q_value_batch(self, x, thetas, alpha):
        # Hot path for samplers; one large scratch array, updated in place.
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        x = np.asarray(x, dtype=float)
        betas, sigmas = thetas[:, :-1], thetas[:, -1]
        if np.any(sigmas <= 0.0):
            raise ValueError("scale coordinate must be strictly positive")
        log_norm = -0.5 * (_LOG_2PI + 2.0 * np.log(sigmas))
        work = betas @ self.design.T  # (m, n)
        np.subtract(x[None, :], work, out=work)
        np.multiply(work, work, out=work)
        if alpha == 0.0:
            total = work.sum(axis=1)
            total /= -2.0 * sigmas**2
            total += self.n * (log_norm - 1.0)
            return total
        work *= (-alpha / (2.0 * sigmas**2))[:, None]
        work += (alpha * log_norm)[:, None]
        np.expm1(work, out=work)
        total = work.sum(axis=1)
        total /= alpha
        log_i = alpha * log_norm - 0.5 * math.log1p(alpha)
        total -= self.n * np.exp(log_i) / (1.0 + alpha)
        return total

    def log_power_expectation_terms(self, theta, alpha, theta_true):
        beta, sigma = self._split(theta)
        beta_g, sigma_g = self._split(theta_true)
        delta = self.design @ (beta - beta_g)
        ratio = 1.0 + alpha * sigma_g**2 / sigma**2
        return (
            -0.5 * alpha * (_LOG_2PI + 2.0 * math.log(sigma))
            - 0.5 * math.log(ratio)
            - alpha * delta * delta / (2.0 * sigma**2 * ratio)
        )

    def log_density_expectation_terms(self, theta, theta_true):
        beta, sigma = self._split(theta)
        beta_g, sigma_g = self._split(theta_true)
        delta = self.design @ (beta - beta_g)
        return -0.5 * (_LOG_2PI + 2.0 * math.log(sigma)) - (
            sigma_g**2 + delta * delta
        ) / (2.0 * sigma**2)

    def log_power_expectation_batch(self, thetas, alpha, theta_true):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        betas, sigmas = thetas[:, :-1], thetas[:, -1]
        beta_g, sigma_g = self._split(theta_true)
        delta = betas @ self.design.T - (self.design @ beta_g)[None, :]
        ratio = 1.0 + alpha * sigma_g**2 / sigmas**2
        return (
            (-0.5 * alpha * (_LOG_2PI + 2.0 * np.log(sigmas)) - 0.5 * np.log(ratio))[:, None]
            - alpha * delta * delta / (2.0 * (sigmas**2 * ratio))[:, None]
        )

    def log_density_batch(self, points, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        betas, sigmas = thetas[:, :-1], thetas[:, -1]
        pts = np.broadcast_to(np.asarray(points, dtype=float), (self.n,))
        r = pts[None, :] - betas @ self.design.T
        log_norm = -0.5 * (_LOG_2PI + 2.0 * np.log(sigmas))[:, None]
        return log_norm - r * r / (2.0 * sigmas**2)[:, None]

    def log_power_integral_batch(self, thetas, alpha):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        sigmas = thetas[:, -1]
        if alpha == 0.0:
            return np.zeros((thetas.shape[0], self.n))
        log_i = -0.5 * alpha * (_LOG_2PI + 2.0 * np.log(sigmas)) - 0.5 * math.log1p(alpha)
        return np.tile(log_i[:, None], (1, self.n))

    def log_density_expectation_batch(self, thetas, theta_true):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        betas, sigmas = thetas[:, :-1], thetas[:, -1]
        beta_g, sigma_g = self._split(theta_true)
        delta = betas @ self.design.T - (self.design @ beta_g)[None, :]
        log_norm = -0.5 * (_LOG_2PI + 2.0 * np.log(sigmas))[:, None]
        return log_norm - (sigma_g**2 + delta * delta) / (2.0 * sigmas**2)[:, None]

    def in_model_psi_omega(self, theta, alpha):
        _, sigma = self._split(theta)
        c = math.exp(-0.5 * alpha * (_LOG_2PI + 2.0 * math.log(sigma)))
        zeta = c / sigma**2 * (1.0 + alpha) ** -1.5
        c2 = math.exp(-alpha * (_LOG_2PI + 2.0 * math.log(sigma)))
        zeta2 = c2 / sigma**2 * (1.0 + 2.0 * alpha) ** -1.5
        gram = self.design.T @ self.design / self.n
        s = 1.0 + 2.0 * alpha
        psi_ss = c / sigma**2 * (1.0 + alpha) ** -2.5 * (2.0 + alpha**2)
        omega_ss = c2 / sigma**2 * (
            3.0 * s**-2.5 - 2.0 * s**-1.5 + s**-0.5 - alpha**2 * (1.0 + alpha) ** -3.0
        )
        psi = np.zeros((self.dim, self.dim))
        omega = np.zeros((self.dim, self.dim))
        psi[:-1, :-1] = zeta * gram
        omega[:-1, :-1] = zeta2 * gram
        psi[-1, -1] = psi_ss
        omega[-1, -1] = omega_ss
        return psi, omega

    def sample_responses(self, theta, rng):
        theta = self.validate_theta(theta)
        beta, sigma = self._split(theta)
        return self.design @ beta + sigma * rng.standard_normal(self.n)


# ---------------------------------------------------------------------------
# Bernoulli-logit regression.
# ---------------------------------------------------------------------------


class Logistic(ModelFamily):
    """Fixed-design logistic regression: x_i ~ Bernoulli(expit(z_i'beta)).

    Powered-density integrals are exact two-term sums over the support {0,1};
    all computations run in log space so extreme linear predictors stay
    finite.
    """

    @property
    def dim(self) -> int:
        return self.n_covariates

    def validate_data(self, data: Dataset) -> None:
        super().validate_data(data)
        x = data.responses
        if not np.all((x == 0.0) | (x == 1.0)):
            raise ValueError("logistic responses must be coded 0/1")

    @staticmethod
    def _log_p(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # log P(X=1), log P(X=0) given linear predictor t
        log_p1 = -np.logaddexp(0.0, -t)
        log_p0 = -np.logaddexp(0.0, t)
        return log_p1, log_p0

    def success_probabilities(self, theta) -> np.ndarray:
        theta = self.validate_theta(theta)
        log_p1, _ = self._log_p(self.design @ theta)
        return np.exp(log_p1)

    def log_density_terms(self, x, theta):
        t = self.design @ theta
        x = np.asarray(x, dtype=float)
        return x * t - np.logaddexp(0.0, t)

    def _log_density_at(self, idx, x, theta):
        x = np.asarray(x, dtype=float)
        if not np.all((x == 0.0) | (x == 1.0)):
            raise ValueError("logistic observations must be 0 or 1")
        t = self.design[idx] @ theta
        return x * t - np.logaddexp(0.0, t)

    def log_power_integral_terms(self, theta, alpha):
        log_p1, log_p0 = self._log_p(self.design @ theta)
        return np.logaddexp((1.0 + alpha) * log_p1, (1.0 + alpha) * log_p0)

    def _dv_terms(self, x, theta, alpha):
        t = self.design @ theta
        x = np.asarray(x, dtype=float)
        log_p1, log_p0 = self._log_p(t)
        pi = np.exp(log_p1)
        q1 = np.exp((1.0 + alpha) * log_p1)
        q0 = np.exp((1.0 + alpha) * log_p0)
        px_a = np.exp(alpha * (x * t - np.logaddexp(0.0, t)))
        # first and second derivatives of V_i in the linear predictor
        dv = (1.0 + alpha) * (
            q1 * (1.0 - pi) + q0 * (0.0 - pi) - px_a * (x - pi)
        )
        var_term = pi * (1.0 - pi)
        d2v = (1.0 + alpha) * (
            q1 * ((1.0 + alpha) * (1.0 - pi) ** 2 - var_term)
            + q0 * ((1.0 + alpha) * pi**2 - var_term)
            - px_a * (alpha * (x - pi) ** 2 - var_term)
        )
        return dv, d2v

    def loss_grad_sum(self, x, theta, alpha):
        dv, _ = self._dv_terms(x, theta, alpha)
        return self.design.T @ dv

    def loss_hess_sum(self, x, theta, alpha):
        _, d2v = self._dv_terms(x, theta, alpha)
        return self.design.T @ (d2v[:, None] * self.design)

    def _loss_grad_single(self, i, x, theta, alpha):
        sub = Logistic(self.design[i : i + 1])
        dv, _ = sub._dv_terms(np.asarray([x]), theta, alpha)
        return dv[0] * self.design[i]

    def _loss_hess_single(self, i, x, theta, alpha):
        sub = Logistic(self.design[i : i + 1])
        _, d2v = sub._dv_terms(np.asarray([x]), theta, alpha)
        return d2v[0] * np.outer(self.design[i], self.design[i])

    def summed_q_value_batch(self, x, thetas, alpha):
        # Hot path for samplers; three large scratch arrays, updated in place.
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        x = np.asarray(x, dtype=float)
        t = thetas @ self.design.T  # (m, n)
        lae = np.logaddexp(0.0, t)
        if alpha == 0.0:
            total = t @ x  # sum_i x_i t_i per row
            total -= lae.sum(axis=1)
            return total - self.n
        ll = np.multiply(t, x[None, :])
        ll -= lae
        ll *= alpha
        np.expm1(ll, out=ll)
        total = ll.sum(axis=1)
        total /= alpha
        # integral term: exp((1+a)(t - lae)) + exp(-(1+a) lae), reusing t, lae
        t -= lae
        t *= 1.0 + alpha
        np.exp(t, out=t)
        lae *= -(1.0 + alpha)
        np.exp(lae, out=lae)
        t += lae
        total -= t.sum(axis=1) / (1.0 + alpha)
        return total

    def log_power_expectation_terms(self, theta, alpha, theta_true):
        log_p1, log_p0 = self._log_p(self.design @ theta)
        log_g1, log_g0 = self._log_p(self.design @ np.asarray(theta_true, float))
        return np.logaddexp(alpha * log_p1 + log_g1, alpha * log_p0 + log_g0)

    def log_density_expectation_terms(self, theta, theta_true):
        log_p1, log_p0 = self._log_p(self.design @ theta)
        log_g1, log_g0 = self._log_p(self.design @ np.asarray(theta_true, float))
        return np.exp(log_g1) * log_p1 + np.exp(log_g0) * log_p0

    def log_power_expectation_batch(self, thetas, alpha, theta_true):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        t = thetas @ self.design.T
        log_p1 = -np.logaddexp(0.0, -t)
        log_p0 = -np.logaddexp(0.0, t)
        log_g1, log_g0 = self._log_p(self.design @ np.asarray(theta_true, float))
        return np.logaddexp(
            alpha * log_p1 + log_g1[None, :], alpha * log_p0 + log_g0[None, :]
        )

    def log_density_batch(self, points, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        pts = np.broadcast_to(np.asarray(points, dtype=float), (self.n,))
        if not np.all((pts == 0.0) | (pts == 1.0)):
            raise ValueError("logistic contamination points must be 0 or 1")
        t = thetas @ self.design.T
        return pts[None, :] * t - np.logaddexp(0.0, t)

    def log_power_integral_batch(self, thetas, alpha):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        t = thetas @ self.design.T
        log_p1 = -np.logaddexp(0.0, -t)
        log_p0 = -np.logaddexp(0.0, t)
        return np.logaddexp((1.0 + alpha) * log_p1, (1.0 + alpha) * log_p0)

    def log_density_expectation_batch(self, thetas, theta_true):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        t = thetas @ self.design.T
        log_p1 = -np.logaddexp(0.0, -t)
        log_p0 = -np.logaddexp(0.0, t)
        log_g1, log_g0 = self._log_p(self.design @ np.asarray(theta_true, float))
        return np.exp(log_g1)[None, :] * log_p1 + np.exp(log_g0)[None, :] * log_p0

    def in_model_psi_omega(self, theta, alpha):
        t = self.design @ theta
        log_p1, log_p0 = self._log_p(t)
        # psi weight: e^t (e^{at} + e^t) / (1+e^t)^{3+a}, in log space
        log_base = np.logaddexp(0.0, t)
        log_w_psi = t + np.logaddexp(alpha * t, t) - (3.0 + alpha) * log_base
        log_w_omega = t + 2.0 * np.logaddexp(alpha * t, t) - (4.0 + 2.0 * alpha) * log_base
        w_psi = np.exp(log_w_psi)
        w_omega = np.exp(log_w_omega)
        psi = self.design.T @ (w_psi[:, None] * self.design) / self.n
        omega = self.design.T @ (w_omega[:, None] * self.design) / self.n
        return psi, omega

    def sample_responses(self, theta, rng):
        return (rng.random(self.n) < self.success_probabilities(theta)).astype(float)


# ---------------------------------------------------------------------------
# Generic user-supplied families via quadrature.
# ---------------------------------------------------------------------------


class QuadratureFamily(ModelFamily):
    """Base class for user-defined continuous families without closed forms.

    Subclasses implement ``parameter_dim``, ``support`` (integration limits,
    may be infinite), and scalar ``log_density_scalar(i, x, theta)``.  Power
    integrals and expectations are computed by adaptive quadrature (absolute
    tolerance 1e-10, relative 1e-8) and loss derivatives by central finite
    differences, so this path is an order of magnitude slower than the
    built-ins; it exists for correctness, not speed.
    """

    has_bounded_third_derivatives = False

    _FD_STEP = 1e-6
    _QUAD_OPTS = {"epsabs": 1e-10, "epsrel": 1e-8, "limit": 200}

    @abstractmethod
    def log_density_scalar(self, i: int, x: float, theta: np.ndarray) -> float: ...

    @abstractmethod
    def support(self) -> tuple[float, float]: ...

    def log_density_terms(self, x, theta):
        x = np.asarray(x, dtype=float)
        return np.array(
            [self.log_density_scalar(i, float(x[i]), theta) for i in range(self.n)]
        )

    def _log_density_at(self, idx, x, theta):
        xb = np.broadcast_to(np.asarray(x, dtype=float), idx.shape)
        return np.array(
            [self.log_density_scalar(int(i), float(v), theta) for i, v in zip(idx, xb)]
        )

    def log_power_integral_terms(self, theta, alpha):
        lo, hi = self.support()
        out = np.empty(self.n)
        for i in range(self.n):
            val, _ = integrate.quad(
                lambda t: math.exp((1.0 + alpha) * self.log_density_scalar(i, t, theta)),
                lo,
                hi,
                **self._QUAD_OPTS,
            )
            out[i] = math.log(val)
        return out

    def _loss_single(self, i, x, theta, alpha):
        log_i = self.log_power_integral_terms(theta, alpha)[i]
        return math.exp(log_i) - (1.0 + 1.0 / alpha) * math.exp(
            alpha * self.log_density_scalar(i, x, theta)
        )

    def _loss_grad_single(self, i, x, theta, alpha):
        h = self._FD_STEP
        grad = np.empty(self.dim)
        a = max(alpha, 1e-8)  # V itself is undefined at alpha = 0
        for j in range(self.dim):
            step = np.zeros(self.dim)
            step[j] = h * max(1.0, abs(theta[j]))
            grad[j] = (
                self._loss_single(i, x, theta + step, a)
                - self._loss_single(i, x, theta - step, a)
            ) / (2.0 * step[j])
        return grad

    def _loss_hess_single(self, i, x, theta, alpha):
        h = 1e-5
        hess = np.empty((self.dim, self.dim))
        a = max(alpha, 1e-8)
        for j in range(self.dim):
            step = np.zeros(self.dim)
            step[j] = h * max(1.0, abs(theta[j]))
            gp = self._loss_grad_single(i, x, theta + step, a)
            gm = self._loss_grad_single(i, x, theta - step, a)
            hess[j] = (gp - gm) / (2.0 * step[j])
        return 0.5 * (hess + hess.T)

    def loss_grad_sum(self, x, theta, alpha):
        x = np.asarray(x, dtype=float)
        return np.sum(
            [self._loss_grad_single(i, float(x[i]), theta, alpha) for i in range(self.n)],
            axis=0,
        )

    def loss_hess_sum(self, x, theta, alpha):
        x = np.asarray(x, dtype=float)
        return np.sum(
            [self._loss_hess_single(i, float(x[i]), theta, alpha) for i in range(self.n)],
            axis=0,
        )

    def log_power_expectation_terms(self, theta, alpha, theta_true):
        lo, hi = self.support()
        out = np.empty(self.n)
        for i in range(self.n):
            val, _ = integrate.quad(
                lambda t: math.exp(
                    alpha * self.log_density_scalar(i, t, theta)
                    + self.log_density_scalar(i, t, theta_true)
                ),
                lo,
                hi,
                **self._QUAD_OPTS,
            )
            out[i] = math.log(val)
        return out

    def log_density_expectation_terms(self, theta, theta_true):
        lo, hi = self.support()
        out = np.empty(self.n)
        for i in range(self.n):
            out[i], _ = integrate.quad(
                lambda t: self.log_density_scalar(i, t, theta)
                * math.exp(self.log_density_scalar(i, t, theta_true)),
                lo,
                hi,
                **self._QUAD_OPTS,
            )
        return out

    def in_model_psi_omega(self, theta, alpha):
        raise NotImplementedError(
            "closed-form asymptotic matrices are only available for built-in "
            "families; use the observed-curvature matrix instead"
        )

    def sample_responses(self, theta, rng):
        raise NotImplementedError("quadrature families do not define a sampler")
