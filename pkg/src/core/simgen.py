import logging

import numpy as np

from ..exceptions import ModelSpecError, NonPositiveDefiniteError
from ..models import GraphModel, GraphModelSpec, MaskedDataset, ObservationMask
from .metrics import min_eigenvalue

logger = logging.getLogger(__name__)

# Diagonal = 1 + DOMINANCE_FACTOR * (absolute off-diagonal row sum)
DOMINANCE_FACTOR = 1.05


def band_adjacency(d: int, bandwidth: int) -> np.ndarray:
    """1 where |i - j| <= bandwidth (diagonal included)."""
    idx = np.arange(d)
    return (np.abs(idx[:, None] - idx[None, :]) <= bandwidth).astype(np.int8)


def cluster_adjacency(d: int, clusters: int) -> np.ndarray:
    """Block-diagonal pattern of `clusters` contiguous blocks, sizes as equal as possible."""
    adjacency = np.zeros((d, d), dtype=np.int8)
    for block in np.array_split(np.arange(d), clusters):
        adjacency[np.ix_(block, block)] = 1
    return adjacency


def gen_precision(spec: GraphModelSpec) -> GraphModel:
    """Builds a band or cluster precision matrix whose inverse is a correlation matrix.

    Adjacent entries get spec.off_diag_value, the diagonal is raised to force
    strict diagonal dominance, and Omega is rescaled by D^(1/2) Omega D^(1/2)
    with D = diag(Omega^-1).
    """
    d = spec.d
    groups = spec.resolved_groups
    if spec.kind == "band":
        adjacency = band_adjacency(d, groups)
    else:
        adjacency = cluster_adjacency(d, groups)

    off = spec.off_diag_value * (adjacency - np.eye(d, dtype=np.int8))
    omega = off + np.diag(1.0 + DOMINANCE_FACTOR * np.abs(off).sum(axis=1))

    try:
        raw_sigma = np.linalg.inv(omega)
    except np.linalg.LinAlgError as e:
        raise ModelSpecError(f"{spec.kind} model with d={d} is singular: {e}") from e
    scale = np.sqrt(np.diag(raw_sigma))
    if not np.all(np.isfinite(scale)) or np.any(scale <= 0):
        raise ModelSpecError(f"{spec.kind} model with d={d} has a non-positive implied variance")
    omega = scale[:, None] * omega * scale[None, :]
    omega = (omega + omega.T) / 2.0

    smallest = min_eigenvalue(omega)
    if smallest <= 0:
        raise ModelSpecError(f"{spec.kind} model with d={d} is not positive definite (min eigenvalue {smallest:.3g})")

    sigma = np.linalg.inv(omega)
    sigma = (sigma + sigma.T) / 2.0
    logger.debug(f"gen_precision: {spec.kind} d={d} groups={groups} min eigenvalue {smallest:.4g}")
    return GraphModel(spec=spec, omega=omega, sigma=sigma, adjacency=adjacency)


def sample_dataset(mu: np.ndarray, sigma: np.ndarray, mask: ObservationMask, seed: int) -> MaskedDataset:
    """Draws each row from N(mu, sigma) and blanks the coordinates the mask marks absent.

    Discarding coordinates of a full Gaussian draw gives the observed subvector
    the N(mu_A, sigma_AA) law required for each row.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = mask.d
    if mu.shape != (d,) or sigma.shape != (d, d):
        raise ValueError(f"mu/sigma shapes {mu.shape}/{sigma.shape} do not match mask dimension {d}")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as e:
        raise NonPositiveDefiniteError(f"sigma is not positive definite: {e}") from e

    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((mask.n, d)) @ chol.T + mu
    return MaskedDataset(values=np.where(mask.observed, draws, np.nan), mask=mask,
                         component_names=mask.component_names)
