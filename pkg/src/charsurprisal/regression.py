"""Predictive power of surprisal predictors for reading measurements.

Each (measure, ROI convention, focal spec) cell compares a baseline OLS
regressor (ROI length and Zipf frequency) with a target regressor that adds
the focal surprisal and, for spillover, length, frequency and full-ROI
surprisal of the two preceding ROIs. Predictive power is the held-out
difference in R^2 (and in Gaussian log-likelihood) over k-fold
cross-validation repeated across seeds; significance comes from paired
sign-flip permutation tests on the per-(seed, fold) scores.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.stats

__all__ = [
    "BASELINE_COLUMNS",
    "CVConfig",
    "CVResult",
    "DegenerateDesignError",
    "DegenerateLikelihoodError",
    "OLSModel",
    "SPILLOVER_COLUMNS",
    "UndefinedR2Error",
    "cross_validate",
    "delta_llh",
    "fit_ols",
    "fold_assignments",
    "heldout_r2",
    "mean_ci",
    "permutation_test",
    "rng_stream",
]

BASELINE_COLUMNS = ("length", "zipf")
SPILLOVER_COLUMNS = (
    "prev1_length",
    "prev1_zipf",
    "prev1_surprisal",
    "prev2_length",
    "prev2_zipf",
    "prev2_surprisal",
)


class DegenerateDesignError(ValueError):
    pass


class UndefinedR2Error(ValueError):
    pass


class DegenerateLikelihoodError(ValueError):
    pass


def rng_stream(seed: int, *names) -> np.random.Generator:
    """Independent generator for a named sub-stream of a master seed."""
    words = [int(seed) & 0xFFFFFFFF]
    for name in names:
        words.append(zlib.crc32(str(name).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(words))


@dataclass(frozen=True)
class CVConfig:
    folds: int = 10
    seeds: int = 10
    permutations: int = 10_000
    confidence: float = 0.95
    llh_variance: str = "train"

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.seeds < 1:
            raise ValueError("need at least 1 seed")
        if self.permutations < 1000:
            raise ValueError("need at least 1,000 permutations")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence level must be in (0, 1)")
        if self.llh_variance not in ("train", "test"):
            raise ValueError("llh_variance is 'train' or 'test'")


@dataclass(frozen=True)
class OLSModel:
    columns: tuple
    intercept: float
    coef: np.ndarray
    resid_var: float
    dropped: tuple = ()

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef

    def coefficients(self) -> dict:
        return dict(zip(self.columns, (float(c) for c in self.coef)))


def fit_ols(X, y, columns: Optional[Sequence[str]] = None) -> OLSModel:
    """Least squares with an intercept via pivoted QR.

    Constant columns are absorbed by the intercept (coefficient 0). Any other
    linear dependence raises :class:`DegenerateDesignError` naming the
    columns that could be dropped.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    columns = tuple(columns) if columns is not None else tuple(f"x{i}" for i in range(p))
    if len(columns) != p:
        raise ValueError("column names do not match the design matrix")
    if n < p + 2:
        raise DegenerateDesignError(f"{n} rows cannot support {p} predictors and an intercept")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DegenerateDesignError("design matrix or response contains non-finite values")
    constant = np.ptp(X, axis=0) == 0 if n else np.ones(p, bool)
    keep = np.flatnonzero(~constant)
    A = np.column_stack([np.ones(n), X[:, keep]])
    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(A.shape) * np.finfo(float).eps if len(diag) else 0.0
    rank = int((diag > tol).sum())
    if rank < A.shape[1]:
        names = ["(intercept)"] + [columns[i] for i in keep]
        bad = sorted(names[j] for j in perm[rank:])
        raise DegenerateDesignError(f"rank-deficient design; dependent column(s): {', '.join(bad)}")
    beta_p = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty_like(beta_p)
    beta[perm] = beta_p
    coef = np.zeros(p)
    coef[keep] = beta[1:]
    resid = y - A @ beta
    return OLSModel(
        columns,
        float(beta[0]),
        coef,
        float(resid @ resid / n),
        tuple(columns[i] for i in np.flatnonzero(constant)),
    )


def heldout_r2(model: OLSModel, X, y) -> float:
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise UndefinedR2Error("need at least 2 test rows")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise UndefinedR2Error("test response has zero variance")
    resid = y - model.predict(X)
    return 1.0 - float(resid @ resid) / sst


def _gaussian_llh(resid, var):
    return -0.5 * math.log(2 * math.pi * var) - resid**2 / (2 * var)


def delta_llh(baseline: OLSModel, target: OLSModel, X_base, X_target, y, variance="train") -> float:
    """Mean per-row log-likelihood gain of ``target`` over ``baseline`` on test rows."""
    y = np.asarray(y, dtype=float)
    rb = y - baseline.predict(X_base)
    rt = y - target.predict(X_target)
    if variance == "train":
        vb, vt = baseline.resid_var, target.resid_var
    elif variance == "test":
        vb, vt = float(rb @ rb / len(y)), float(rt @ rt / len(y))
    else:
        raise ValueError("variance is 'train' or 'test'")
    # a perfect fit leaves only rounding noise in the residuals
    tiny = np.finfo(float).eps * max(1.0, float(np.mean(y**2)))
    if vb <= tiny or vt <= tiny:
        raise DegenerateLikelihoodError("residual variance is zero")
    return float(np.mean(_gaussian_llh(rt, vt) - _gaussian_llh(rb, vb)))


def fold_assignments(n_rows: int, cfg: CVConfig, seed: int) -> np.ndarray:
    """Fold id of every row for every CV seed, shape ``(cfg.seeds, n_rows)``."""
    out = np.empty((cfg.seeds, n_rows), dtype=np.intp)
    for s in range(cfg.seeds):
        order = rng_stream(seed, "folds", s).permutation(n_rows)
        for f, idx in enumerate(np.array_split(order, cfg.folds)):
            out[s, idx] = f
    return out


@dataclass
class CVResult:
    delta_r2: np.ndarray  # (seeds, folds)
    delta_llh: np.ndarray
    r2_baseline: np.ndarray
    r2_target: np.ndarray


def cross_validate(X_base, X_target, y, assignments, cfg: CVConfig, mask=None) -> CVResult:
    """Held-out R^2 and log-likelihood differences for every (seed, fold).

    ``assignments`` comes from :func:`fold_assignments`; ``mask`` drops rows
    (e.g. missing focal areas) without changing anyone's fold.
    """
    X_base = np.asarray(X_base, dtype=float)
    X_target = np.asarray(X_target, dtype=float)
    y = np.asarray(y, dtype=float)
    assignments = np.asarray(assignments)
    if mask is None:
        mask = np.ones(len(y), bool)
    shape = (assignments.shape[0], cfg.folds)
    d_r2, d_llh, r2b, r2t = (np.empty(shape) for _ in range(4))
    for s in range(shape[0]):
        for f in range(cfg.folds):
            test = (assignments[s] == f) & mask
            train = (assignments[s] != f) & mask
            try:
                base = fit_ols(X_base[train], y[train])
                targ = fit_ols(X_target[train], y[train])
                r2b[s, f] = heldout_r2(base, X_base[test], y[test])
                r2t[s, f] = heldout_r2(targ, X_target[test], y[test])
            except ValueError as exc:
                raise type(exc)(f"seed {s}, fold {f}: {exc}") from exc
            try:
                d_llh[s, f] = delta_llh(
                    base, targ, X_base[test], X_target[test], y[test], cfg.llh_variance
                )
            except DegenerateLikelihoodError:
                # a perfect fit has no likelihood; R^2 is still defined
                d_llh[s, f] = math.nan
            except ValueError as exc:
                raise type(exc)(f"seed {s}, fold {f}: {exc}") from exc
            d_r2[s, f] = r2t[s, f] - r2b[s, f]
    return CVResult(d_r2, d_llh, r2b, r2t)


def mean_ci(values, confidence=0.95):
    """Mean and normal-approximation confidence interval."""
    v = np.asarray(values, dtype=float).ravel()
    m = float(np.mean(v))
    if len(v) < 2:
        return m, m, m
    half = scipy.stats.norm.ppf(0.5 + confidence / 2) * float(np.std(v, ddof=1)) / math.sqrt(len(v))
    return m, float(m - half), float(m + half)


def permutation_test(a, b=None, alternative="greater", n_resamples=10_000, rng=None) -> float:
    """Paired sign-flip permutation test on the mean difference ``a - b``.

    With ``b=None`` the scores are tested against zero. The p-value is
    ``(1 + #{resampled statistic at least as extreme}) / (1 + n_resamples)``.
    """
    a = np.asarray(a, dtype=float).ravel()
    if b is None:
        d = a
    else:
        b = np.asarray(b, dtype=float).ravel()
        if a.shape != b.shape:
            raise ValueError(f"paired samples differ in length: {a.size} vs {b.size}")
        d = a - b
    res = scipy.stats.permutation_test(
        (d,),
        lambda x, axis: np.mean(x, axis=axis),
        permutation_type="samples",
        vectorized=True,
        n_resamples=n_resamples,
        alternative=alternative,
        rng=rng,
    )
    return float(res.pvalue)
