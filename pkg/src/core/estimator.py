import logging
from typing import List, Tuple

import numpy as np

from ..models import CovarianceEstimate, MaskedDataset, ObservationMask
from .mask_model import pairwise_counts

logger = logging.getLogger(__name__)


def _mirror_upper(matrix: np.ndarray) -> np.ndarray:
    """Copies the upper triangle onto the lower one so each unordered pair has one value."""
    upper = np.triu(matrix)
    return upper + np.triu(matrix, 1).T


def available_means(data: MaskedDataset) -> np.ndarray:
    """Mean of each component over the rows where it is observed.

    Components that are never observed get mean 0 and a warning.
    """
    observed = data.mask.observed
    totals = np.where(observed, data.values, 0.0).sum(axis=0)
    counts = observed.sum(axis=0)
    means = np.zeros(data.d)
    present = counts > 0
    means[present] = totals[present] / counts[present]
    if not present.all():
        missing = [data.names[j] for j in np.flatnonzero(~present)]
        logger.warning(f"Components never observed, mean set to 0: {missing[:10]}")
    return means


def renormalized_covariance(data: MaskedDataset) -> CovarianceEstimate:
    """Pairwise-available-case covariance.

    Entry (l, m) averages (X_il - mu_l)(X_im - mu_m) over the rows where both
    components are observed, with divisor |n(l, m)|; the centring uses the
    available-case means. Pairs never co-observed are set to 0.
    """
    counts = pairwise_counts(data.mask)
    mu = available_means(data)
    centered = np.where(data.mask.observed, data.values - mu, 0.0)
    cross = centered.T @ centered

    pair = counts.pair_counts
    sigma = np.zeros_like(cross)
    seen = pair > 0
    sigma[seen] = cross[seen] / pair[seen]
    sigma = _mirror_upper(sigma)

    rows, cols = np.nonzero(np.triu(~seen))
    zeroed: List[Tuple[int, int]] = [(int(l), int(m)) for l, m in zip(rows, cols)]
    if zeroed:
        logger.debug(f"renormalized_covariance: {len(zeroed)} pairs never co-observed, set to 0")
    return CovarianceEstimate(
        sigma=sigma,
        counts=counts,
        zeroed_pairs=zeroed,
        method="renormalized",
        component_names=data.component_names,
    )


def naive_covariance(data: MaskedDataset) -> CovarianceEstimate:
    """Divisor-n sample covariance with structural zeros read as literal zeros."""
    filled = np.where(data.mask.observed, data.values, 0.0)
    centered = filled - filled.mean(axis=0)
    sigma = _mirror_upper(centered.T @ centered / data.n)
    full = ObservationMask(entries=np.ones((data.n, data.d), dtype=np.int8))
    return CovarianceEstimate(
        sigma=sigma,
        counts=pairwise_counts(full),
        method="naive",
        component_names=data.component_names,
    )


def covariance_for(data: MaskedDataset, method: str) -> CovarianceEstimate:
    """Dispatches to the renormalized or naive estimator by name."""
    if method == "renormalized":
        return renormalized_covariance(data)
    if method == "naive":
        return naive_covariance(data)
    raise ValueError(f"unknown covariance method '{method}'")
