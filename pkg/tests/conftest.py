"""Shared fixtures: small seeded problems used across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from dpdbayes import Dataset, LinearKnownSigma, LinearUnknownSigma, Logistic


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def linear_problem():
    """Clean linear data, known scale: n=60, p=2, beta = (5, 2), sigma = 1."""
    gen = np.random.default_rng(101)
    design = np.column_stack([np.ones(60), gen.standard_normal(60)])
    model = LinearKnownSigma(design, 1.0)
    beta = np.array([5.0, 2.0])
    data = Dataset(model.sample_responses(beta, gen), design)
    return model, data, beta


@pytest.fixture(scope="session")
def unknown_sigma_problem():
    gen = np.random.default_rng(202)
    design = np.column_stack([np.ones(80), gen.standard_normal(80)])
    model = LinearUnknownSigma(design)
    theta = np.array([5.0, 2.0, 1.3])
    data = Dataset(model.sample_responses(theta, gen), design)
    return model, data, theta


@pytest.fixture(scope="session")
def logistic_problem():
    gen = np.random.default_rng(303)
    design = np.column_stack([np.ones(120), gen.standard_normal(120)])
    model = Logistic(design)
    beta = np.array([0.5, -1.0])
    data = Dataset(model.sample_responses(beta, gen), design)
    return model, data, beta


@pytest.fixture(scope="session")
def location_problem():
    """All-ones design: the location model used by robustness analyses."""
    design = np.ones((20, 1))
    model = LinearKnownSigma(design, 1.0)
    return model, np.array([5.0])
