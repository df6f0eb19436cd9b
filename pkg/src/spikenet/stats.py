"""Estimators and distribution checks for extinction-time samples."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

__all__ = [
    "KS_CRIT_1PCT",
    "SampleSummary",
    "KSResult",
    "QuantileEstimate",
    "summarize",
    "ks_to_unit_exponential",
    "empirical_beta",
    "dkw_band",
    "empirical_survival",
]

KS_CRIT_1PCT = 1.628  # asymptotic one-sample KS constant at the 1% level
BETA_LEVEL = 1.0 - math.exp(-1.0)


@dataclass(frozen=True)
class SampleSummary:
    count: int
    mean: float
    variance: float
    se: float
    min: float
    max: float
    censored_count: int = 0


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    critical_1pct: float
    reject_at_1pct: bool
    censored_policy: str = "refuse"
    dropped: int = 0


@dataclass(frozen=True)
class QuantileEstimate:
    level: float
    value: float
    ci_low: float
    ci_high: float
    rank: int


def _split(samples, censored, policy):
    """Return the uncensored values, honouring the censoring policy."""
    if hasattr(samples, "time") and hasattr(samples, "censored"):  # ReplicaBatch
        censored = samples.censored if censored is None else censored
        samples = samples.time
    elif len(samples) and hasattr(samples[0], "status"):  # ExtinctionOutcome list
        censored = np.array([o.status != "extinct" for o in samples]) if censored is None else censored
        samples = [o.time for o in samples]
    x = np.asarray(samples, dtype=np.float64).ravel()
    mask = np.zeros(x.shape, bool) if censored is None else np.asarray(censored, bool).ravel()
    if mask.shape != x.shape:
        raise ValueError("censoring mask does not match the samples")
    n_cens = int(mask.sum())
    if n_cens and policy != "drop":
        raise ValueError(f"{n_cens} censored samples; pass censored='drop' to exclude them")
    return x[~mask], n_cens


def summarize(samples, censored=None) -> SampleSummary:
    """Moments of the uncensored samples; censored ones are only counted.

    Accepts an array (with an optional boolean ``censored`` mask), a list of
    outcomes or a :class:`~spikenet.engine.ReplicaBatch`.
    """
    x, n_cens = _split(samples, censored, "drop")
    n = x.size
    if n == 0:
        raise ValueError("no uncensored samples to summarize")
    mean = float(x.mean())
    dev = x - mean
    # second pass corrects the residual error of the first
    mean += float(dev.mean())
    dev = x - mean
    var = float(dev @ dev) / (n - 1) if n > 1 else 0.0
    return SampleSummary(n, mean, var, math.sqrt(var / n), float(x.min()), float(x.max()), n_cens)


def ks_to_unit_exponential(samples, normalize=True, censored=None,
                           censored_policy: str = "refuse") -> KSResult:
    """One-sample KS distance to the ``Exp(1)`` law.

    Parameters
    ----------
    samples : array-like
    normalize : bool or float
        ``True`` divides by the sample mean, a positive float divides by that
        value (e.g. an exact mean), ``False`` uses the raw samples.
    censored, censored_policy :
        Censored samples are refused unless ``censored_policy="drop"``.
    """
    x, n_cens = _split(samples, censored, censored_policy)
    n = x.size
    if n == 0:
        raise ValueError("KS statistic needs at least one sample")
    x = np.sort(x)  # fixes the summation order, so the result ignores input order
    if normalize is True:
        scale = x.mean()
    elif normalize is False:
        scale = 1.0
    else:
        scale = float(normalize)
    if not scale > 0:
        raise ValueError("normalizing scale must be positive")
    u = x / scale
    F = -np.expm1(-np.maximum(u, 0.0))
    i = np.arange(1, n + 1)
    d = max(float((i / n - F).max()), float((F - (i - 1) / n).max()))
    crit = KS_CRIT_1PCT / math.sqrt(n)
    return KSResult(d, n, crit, d > crit, censored_policy, n_cens)


def empirical_beta(samples, censored=None, censored_policy: str = "refuse",
                   confidence: float = 0.95) -> QuantileEstimate:
    """Order statistic estimating the time at which survival equals ``exp(-1)``.

    The estimate is the sample at rank ``ceil((1 - e^-1) n)``; the interval
    uses the distribution-free binomial bounds on order-statistic ranks.
    """
    x, _ = _split(samples, censored, censored_policy)
    n = x.size
    if n < 20:
        raise ValueError("empirical_beta needs at least 20 samples")
    xs = np.sort(x)
    r = math.ceil(BETA_LEVEL * n)
    a = (1.0 - confidence) / 2
    lo = int(binom.ppf(a, n, BETA_LEVEL))
    hi = int(binom.ppf(1.0 - a, n, BETA_LEVEL)) + 1
    lo = min(max(lo, 1), r)
    hi = max(min(hi, n), r)
    return QuantileEstimate(BETA_LEVEL, float(xs[r - 1]), float(xs[lo - 1]), float(xs[hi - 1]), r)


def dkw_band(n: int, level: float = 0.01) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band for ``n`` samples."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie strictly between 0 and 1")
    return math.sqrt(math.log(2.0 / level) / (2.0 * n))


def empirical_survival(samples, times) -> np.ndarray:
    """Fraction of samples strictly greater than each of ``times``."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    return 1.0 - np.searchsorted(xs, np.asarray(times, dtype=np.float64), side="right") / xs.size
