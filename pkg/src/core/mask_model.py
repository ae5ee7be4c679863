import logging

import numpy as np

from ..models import A1Report, CoObservationCounts, MaskDistribution, ObservationMask

logger = logging.getLogger(__name__)

# Bound on redraw rounds for all-zero mask rows; each round redraws only the empty rows.
MAX_RESAMPLE_ROUNDS = 10_000


def pairwise_counts(mask: ObservationMask) -> CoObservationCounts:
    """Counts rows where each component, and each component pair, is observed."""
    observed = mask.entries.astype(np.int64)
    pair_counts = observed.T @ observed
    return CoObservationCounts(
        pair_counts=pair_counts,
        singleton_counts=np.diag(pair_counts).copy(),
        n=mask.n,
    )


def check_a1(counts: CoObservationCounts, min_fraction: float) -> A1Report:
    """Lists component pairs (l <= m) co-observed in fewer than min_fraction of the rows.

    The empirical fraction |n(l, m)| / n stands in for the unknowable delta(l, m).
    """
    if not 0.0 < min_fraction < 1.0:
        raise ValueError(f"min_fraction must lie in (0, 1), got {min_fraction}")
    n = max(counts.n, 1)
    fractions = counts.pair_counts / n
    rows, cols = np.nonzero(np.triu(fractions < min_fraction))
    violations = [(int(l), int(m)) for l, m in zip(rows, cols)]
    if violations:
        logger.warning(f"(A1) check: {len(violations)} component pairs co-observed in fewer than "
                       f"{min_fraction:.3g} of {counts.n} rows")
    return A1Report(
        n=counts.n,
        min_fraction=min_fraction,
        violations=violations,
        fractions=[float(fractions[l, m]) for l, m in violations],
        passed=not violations,
    )


def generate_mask(n: int, d: int, dist: MaskDistribution, seed: int) -> ObservationMask:
    """Draws m_ij ~ Bernoulli(1 - rho_j) independently; rows with nothing observed are redrawn."""
    if n < 1 or d < 1:
        raise ValueError(f"n and d must be >= 1, got n={n}, d={d}")
    if dist.d != d:
        raise ValueError(f"distribution has {dist.d} components, expected {d}")
    if np.any(dist.rho >= 1.0):
        raise ValueError("every component needs rho_j < 1 to be observable")

    rng = np.random.default_rng(seed)
    entries = rng.random((n, d)) >= dist.rho
    empty = np.flatnonzero(~entries.any(axis=1))
    rounds = 0
    while empty.size:
        rounds += 1
        if rounds > MAX_RESAMPLE_ROUNDS:
            raise ValueError(f"could not draw non-empty rows after {MAX_RESAMPLE_ROUNDS} rounds")
        entries[empty] = rng.random((empty.size, d)) >= dist.rho
        empty = empty[~entries[empty].any(axis=1)]
    if rounds:
        logger.debug(f"generate_mask: redrew empty rows over {rounds} rounds")
    return ObservationMask(entries=entries.astype(np.int8))


def sample_rho(d: int, lo: float = 0.0, hi: float = 0.75, seed: int = 0) -> MaskDistribution:
    """Draws rho_j ~ Uniform(lo, hi) for each of the d components."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0.0 <= lo < hi < 1.0:
        raise ValueError(f"need 0 <= lo < hi < 1, got lo={lo}, hi={hi}")
    rng = np.random.default_rng(seed)
    return MaskDistribution(rho=rng.uniform(lo, hi, size=d))
