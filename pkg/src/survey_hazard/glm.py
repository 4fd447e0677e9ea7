"""Penalized binomial logistic regression for the discrete hazard model.

The solver minimizes the mean binomial deviance contribution per
person-day plus a penalty::

    NLL(b0, b) / N + lam * sum_j w_j |b_j|        (lasso, adaptive)
    NLL(b0, b) / N + lam * sum_j b_j**2           (ridge)

where ``N`` is the total at-risk count. Paths are warm-started from
``lambda_max`` downward; the intercept is never penalized.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _cd
from .errors import ConvergenceError, ValidationError
from .survival_core import Coefficients, Design, binomial_nll, hazard_from_eta

log = logging.getLogger(__name__)

PENALTY_KINDS = ("none", "ridge", "lasso", "adaptive")
WEIGHT_CAP = 1e8
FORMAT_VERSION = 1

_TOL = 1e-22
_MAX_OUTER = 200
_MAX_INNER = 100_000


# --- standardization --------------------------------------------------------


@dataclass
class StandardizationParams:
    """At-risk weighted column means and standard deviations.

    Columns whose weighted sd is zero are dropped and listed in
    ``dropped``.
    """

    names: list[str]
    mean: np.ndarray
    sd: np.ndarray
    dropped: list[str] = field(default_factory=list)

    def apply(self, design: Design) -> Design:
        sub = design.select(self.names)
        return sub.with_columns((sub.X - self.mean) / self.sd, self.names)


def weighted_moments(X: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = weights / weights.sum()
    mean = w @ X
    var = w @ (X - mean) ** 2
    return mean, np.sqrt(var)


def standardize(design: Design) -> tuple[Design, StandardizationParams]:
    """Center and scale every column using at-risk weighted moments.

    Weighting by ``at_risk`` makes the statistics equal to those of the
    person-period expansion. Dummy columns are scaled like continuous ones.
    """
    if design.n_rows == 0:
        raise ValidationError("cannot standardize an empty design")
    mean, sd = weighted_moments(design.X, design.at_risk)
    scale = np.maximum(1.0, np.abs(mean))
    keep = sd > 1e-12 * scale
    names = [n for n, k in zip(design.names, keep) if k]
    dropped = [n for n, k in zip(design.names, keep) if not k]
    if dropped:
        log.warning("dropping constant columns: %s", ", ".join(dropped))
    params = StandardizationParams(names, mean[keep], sd[keep], dropped)
    return params.apply(design), params


def destandardize(coefs: Coefficients, params: StandardizationParams) -> Coefficients:
    """Express standardized-scale coefficients on the raw predictor scale."""
    beta = coefs.as_array(params.names)
    raw = beta / params.sd
    intercept = coefs.intercept - float(np.sum(raw * params.mean))
    return Coefficients(intercept, dict(zip(params.names, raw.tolist())))


# --- interactions -------------------------------------------------------------


@dataclass
class InteractionSpec:
    """Products of standardized main effects, re-standardized.

    ``pairs[k] = (base, contextual)`` yields column ``"base:contextual"``
    with weighted mean ``mean[k]`` and sd ``sd[k]`` on the training rows.
    """

    pairs: list[tuple[str, str]]
    mean: np.ndarray
    sd: np.ndarray
    dropped: list[str] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return [f"{b}:{c}" for b, c in self.pairs]

    def products(self, design: Design) -> np.ndarray:
        if not self.pairs:
            return np.empty((design.n_rows, 0))
        idx = {n: i for i, n in enumerate(design.names)}
        left = design.X[:, [idx[b] for b, _ in self.pairs]]
        right = design.X[:, [idx[c] for _, c in self.pairs]]
        return left * right

    def apply(self, design: Design) -> Design:
        prods = (self.products(design) - self.mean) / self.sd
        return design.with_columns(np.column_stack([design.X, prods]), design.names + self.names)


# --- penalties and paths ------------------------------------------------------


@dataclass
class PenaltySpec:
    """Penalty family, strength and per-coefficient weights.

    ``weights`` align with the design columns; ``None`` means all ones.
    ``lam`` is filled in once a value has been selected.
    """

    kind: str = "lasso"
    lam: float | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValidationError(f"unknown penalty kind {self.kind!r}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
                raise ValidationError("penalty weights must be finite and non-negative")
        if self.lam is not None and self.lam < 0:
            raise ValidationError("lambda must be non-negative")

    def resolved_weights(self, p: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(p)
        if self.weights.shape != (p,):
            raise ValidationError("penalty weights do not match the number of predictors")
        return self.weights

    def split(self, lam: float, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-coefficient (L1, L2) multipliers at strength ``lam``."""
        w = self.resolved_weights(p)
        zero = np.zeros(p)
        if self.kind == "none":
            return zero, zero
        if self.kind == "ridge":
            return zero, lam * w
        return lam * w, zero


@dataclass
class CoefficientPath:
    lambdas: np.ndarray
    intercepts: np.ndarray
    coefs: np.ndarray
    names: list[str]
    kkt: np.ndarray
    iterations: np.ndarray

    def coefficients(self, index: int) -> Coefficients:
        return Coefficients(float(self.intercepts[index]), dict(zip(self.names, self.coefs[index].tolist())))

    def n_nonzero(self) -> np.ndarray:
        return np.count_nonzero(self.coefs, axis=1)


def _arrays(design: Design):
    X = np.ascontiguousarray(design.X, dtype=np.float64)
    XT = np.ascontiguousarray(X.T)
    y = np.ascontiguousarray(design.events, dtype=np.float64)
    m = np.ascontiguousarray(design.at_risk, dtype=np.float64)
    return X, XT, y, m, 1.0 / m.sum()


def null_intercept(design: Design) -> float:
    rate = design.events.sum() / design.at_risk.sum()
    rate = min(max(rate, 1e-12), 1 - 1e-12)
    return math.log(rate / (1 - rate))


def score_at_null(design: Design) -> np.ndarray:
    """Gradient of the mean NLL w.r.t. slopes at the intercept-only fit."""
    p0 = hazard_from_eta(null_intercept(design))
    return design.X.T @ (design.at_risk * p0 - design.events) / design.at_risk.sum()


def lambda_max(design: Design, weights: np.ndarray | None = None) -> float:
    """Smallest L1 strength at which every penalized slope is zero."""
    g = np.abs(score_at_null(design))
    w = np.ones(design.X.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    pen = w > 0
    if not pen.any():
        return 0.0
    return float(np.max(g[pen] / w[pen]))


def lambda_grid(lam_max: float, n_lambda: int = 100, min_ratio: float = 1e-4) -> np.ndarray:
    """Strictly decreasing log-spaced grid from ``lam_max`` to ``lam_max * min_ratio``."""
    if lam_max <= 0:
        raise ValidationError("lambda_max must be positive to build a grid")
    if n_lambda == 1:
        return np.array([lam_max])
    grid = np.exp(np.linspace(math.log(lam_max), math.log(lam_max * min_ratio), n_lambda))
    # exp(log(x)) can land just below x and let one coefficient in
    grid[0] = lam_max
    return grid


def default_lambdas(design: Design, penalty: PenaltySpec, n_lambda: int = 100, min_ratio: float = 1e-4):
    w = penalty.resolved_weights(design.X.shape[1])
    lmax = lambda_max(design, w)
    if penalty.kind == "ridge":
        # ridge never zeroes coefficients; start far into the heavily shrunk regime
        lmax = lambda_max(design) * 1e3
    if lmax <= 0:
        lmax = 1.0
    return lambda_grid(lmax, n_lambda, min_ratio)


def penalized_objective(design: Design, intercept: float, beta, penalty: PenaltySpec, lam: float) -> float:
    """Mean NLL per person-day plus penalty, evaluated in plain numpy."""
    beta = np.asarray(beta, dtype=float)
    l1, l2 = penalty.split(lam, beta.size)
    eta = intercept + design.X @ beta
    nll = binomial_nll(eta, design.events, design.at_risk) / design.at_risk.sum()
    return float(nll + np.sum(l1 * np.abs(beta)) + np.sum(l2 * beta**2))


def kkt_residual(design: Design, intercept: float, beta, penalty: PenaltySpec, lam: float) -> float:
    """Largest violation of the optimality conditions at a candidate solution."""
    beta = np.asarray(beta, dtype=float)
    l1, l2 = penalty.split(lam, beta.size)
    eta = intercept + design.X @ beta
    resid = design.at_risk * hazard_from_eta(eta) - design.events
    inv_n = 1.0 / design.at_risk.sum()
    g = design.X.T @ resid * inv_n + 2 * l2 * beta
    nz = beta != 0
    viol = np.where(nz, np.abs(g + l1 * np.sign(beta)), np.maximum(np.abs(g) - l1, 0.0))
    worst = abs(resid.sum() * inv_n)
    return float(max(worst, viol.max(initial=0.0)))


def fit_penalized(
    design: Design,
    penalty: PenaltySpec,
    lambdas: Sequence[float] | None = None,
    n_lambda: int = 100,
    min_ratio: float = 1e-4,
    start: tuple[float, np.ndarray] | None = None,
) -> CoefficientPath:
    """Warm-started coordinate-descent path over decreasing ``lambdas``.

    Raises
    ------
    ConvergenceError
        If IRLS does not settle at some lambda; the last iterate is attached.
    """
    p = design.X.shape[1]
    if penalty.kind == "none":
        b0, beta = fit_unpenalized(design)
        lam = np.zeros(1)
        kkt = np.array([kkt_residual(design, b0, beta, penalty, 0.0)])
        return CoefficientPath(lam, np.array([b0]), beta[None, :], list(design.names), kkt, np.zeros(1, int))

    if lambdas is None:
        lambdas = default_lambdas(design, penalty, n_lambda, min_ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size > 1 and np.any(np.diff(lambdas) >= 0):
        raise ValidationError("lambda path must be strictly decreasing")

    X, XT, y, m, inv_n = _arrays(design)
    if start is None:
        b0, beta = null_intercept(design), np.zeros(p)
    else:
        b0, beta = float(start[0]), np.array(start[1], dtype=float)
    intercepts = np.empty(lambdas.size)
    coefs = np.empty((lambdas.size, p))
    kkt = np.empty(lambdas.size)
    iters = np.empty(lambdas.size, dtype=np.int64)
    for k, lam in enumerate(lambdas):
        l1, l2 = penalty.split(lam, p)
        b0, n_outer, _, ok = _cd.solve(X, XT, y, m, inv_n, b0, beta, l1, l2, _TOL, _MAX_OUTER, _MAX_INNER)
        if not ok:
            raise ConvergenceError(
                f"IRLS did not converge at lambda={lam:.6g}",
                intercept=b0,
                coef=beta.copy(),
                diagnostics={"lambda": lam, "outer_iterations": n_outer},
            )
        intercepts[k] = b0
        coefs[k] = beta
        iters[k] = n_outer
        kkt[k] = kkt_residual(design, b0, beta, penalty, lam)
    return CoefficientPath(lambdas, intercepts, coefs, list(design.names), kkt, iters)


def fit_unpenalized(design: Design, max_iter: int = 100, tol: float = 1e-13) -> tuple[float, np.ndarray]:
    """Newton-Raphson maximum likelihood fit (binomial logit)."""
    n, p = design.X.shape
    Z = np.column_stack([np.ones(n), design.X])
    theta = np.zeros(p + 1)
    theta[0] = null_intercept(design)
    y, m = design.events, design.at_risk

    def nll(t):
        return binomial_nll(Z @ t, y, m)

    def newton_step(t):
        prob = hazard_from_eta(Z @ t)
        grad = Z.T @ (m * prob - y)
        H = (Z * (m * prob * (1 - prob))[:, None]).T @ Z
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                "singular information matrix (separation or collinear predictors)", t[0], t[1:].copy()
            ) from exc
        return grad, step

    f = nll(theta)
    for it in range(max_iter):
        _, step = newton_step(theta)
        t = 1.0
        new = theta - step
        f_new = nll(new)
        while f_new > f + 1e-12 * abs(f) and t > 1e-10:
            t *= 0.5
            new = theta - t * step
            f_new = nll(new)
        theta, f_prev, f = new, f, f_new
        if np.max(np.abs(t * step)) < tol * (1 + np.max(np.abs(theta))) or abs(f_prev - f) < 1e-15 * (1 + abs(f)):
            # one more full Newton step polishes to machine precision
            grad, step = newton_step(theta)
            theta = theta - step
            # fitted hazards pinned at 0 or 1 mean (quasi-)separation
            eta = Z @ theta
            if not np.all(np.isfinite(theta)) or np.max(np.abs(grad)) > 1e-6 * m.sum() or np.max(np.abs(eta)) > 30:
                raise ConvergenceError("likelihood has no finite maximum", theta[0], theta[1:].copy())
            return float(theta[0]), theta[1:].copy()
    raise ConvergenceError(
        "Newton iterations did not converge", theta[0], theta[1:].copy(), {"iterations": max_iter}
    )


def standard_errors(design: Design, intercept: float, beta: np.ndarray) -> np.ndarray:
    """Asymptotic standard errors (intercept first) from the observed information."""
    n = design.n_rows
    Z = np.column_stack([np.ones(n), design.X])
    prob = hazard_from_eta(intercept + design.X @ beta)
    H = (Z * (design.at_risk * prob * (1 - prob))[:, None]).T @ Z
    return np.sqrt(np.diag(np.linalg.inv(H)))


# --- cross-validation --------------------------------------------------------


def binomial_deviance(eta: np.ndarray, events: np.ndarray, at_risk: np.ndarray) -> float:
    """Residual deviance ``2 * (NLL(model) - NLL(saturated))``."""
    rate = events / at_risk
    with np.errstate(divide="ignore", invalid="ignore"):
        sat = np.where(events > 0, events * np.log(rate), 0.0) + np.where(
            at_risk - events > 0, (at_risk - events) * np.log1p(-rate), 0.0
        )
    return float(2.0 * (binomial_nll(eta, events, at_risk) + sat.sum()))


@dataclass
class CvResult:
    """K-fold cross-validation trace over a lambda grid.

    ``fold_deviance[f, k]`` is the held-out deviance per person-day of
    fold ``f`` at ``lambdas[k]``.
    """

    lambdas: np.ndarray
    mean_deviance: np.ndarray
    fold_deviance: np.ndarray
    best_index: int
    seed: int
    folds: np.ndarray

    @property
    def lambda_best(self) -> float:
        return float(self.lambdas[self.best_index])


def assign_folds(n_rows: int, k: int, seed: int) -> np.ndarray:
    """Random near-equal fold labels ``0..k-1`` for each row."""
    if k < 2:
        raise ValidationError("k-fold CV needs k >= 2")
    if k > n_rows:
        raise ValidationError(f"k={k} folds requested for only {n_rows} rows")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_rows) % k
    return labels[rng.permutation(n_rows)]


def cross_validate(
    design: Design,
    penalty: PenaltySpec,
    k: int = 10,
    seed: int = 0,
    lambdas: Sequence[float] | None = None,
    n_lambda: int = 100,
    min_ratio: float = 1e-4,
    threads: int | None = None,
) -> CvResult:
    """K-fold CV of a penalized path on period-level rows.

    The grid is built once on all rows and shared by every fold. The
    chosen lambda minimizes mean held-out deviance; ties go to the larger
    lambda.
    """
    folds = assign_folds(design.n_rows, k, seed)
    if lambdas is None:
        lambdas = default_lambdas(design, penalty, n_lambda, min_ratio)
    lambdas = np.asarray(lambdas, dtype=float)

    def run(f):
        train = design.subset(np.flatnonzero(folds != f))
        test = design.subset(np.flatnonzero(folds == f))
        path = fit_penalized(train, penalty, lambdas)
        eta = path.intercepts[:, None] + path.coefs @ test.X.T
        m_total = test.at_risk.sum()
        return np.array([binomial_deviance(e, test.events, test.at_risk) / m_total for e in eta])

    if threads == 1:
        per_fold = [run(f) for f in range(k)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_fold = list(pool.map(run, range(k)))
    fold_dev = np.vstack(per_fold)
    mean = fold_dev.mean(axis=0)
    best = int(np.flatnonzero(mean == mean.min())[0])
    return CvResult(lambdas, mean, fold_dev, best, seed, folds)


def adaptive_weights(ridge_coefs, names: Sequence[str] | None = None, cap: float = WEIGHT_CAP) -> np.ndarray:
    """Adaptive-lasso weights ``1 / |ridge coefficient|``, capped at ``cap``."""
    if isinstance(ridge_coefs, Coefficients):
        names = ridge_coefs.names if names is None else names
        ridge_coefs = ridge_coefs.as_array(names)
    b = np.abs(np.asarray(ridge_coefs, dtype=float))
    with np.errstate(divide="ignore"):
        w = np.where(b > 0, 1.0 / b, np.inf)
    return np.minimum(w, cap)


# --- fitted model -----------------------------------------------------------


@dataclass
class FittedModel:
    """Standardization, penalty and standardized-scale coefficients.

    ``prepare`` maps raw design rows (baseline plus contextual columns) to
    the exact columns the coefficients were fitted on.
    """

    standardization: StandardizationParams
    penalty: PenaltySpec
    coefficients: Coefficients
    cv: CvResult | None = None
    interactions: InteractionSpec | None = None
    metadata: dict = field(default_factory=dict)
    ridge_cv: CvResult | None = None

    @property
    def predictor_names(self) -> list[str]:
        return self.coefficients.names

    def prepare(self, design: Design) -> Design:
        missing = [n for n in self.standardization.names if n not in design.names]
        if missing:
            raise ValidationError(f"design lacks model predictors: {missing}")
        std = self.standardization.apply(design)
        if self.interactions is not None:
            std = self.interactions.apply(std)
        return std.select(self.predictor_names)

    def predict(self, design: Design) -> np.ndarray:
        prepared = self.prepare(design)
        eta = self.coefficients.intercept + prepared.X @ self.coefficients.as_array(prepared.names)
        return hazard_from_eta(eta)

    def nonzero(self) -> list[str]:
        return [n for n, b in self.coefficients.values.items() if b != 0.0]

    def save(self, path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path) -> FittedModel:
        return load_model(path)


def fit_model(
    design: Design,
    penalty: str = "adaptive",
    k: int = 10,
    seed: int = 0,
    n_lambda: int = 100,
    min_ratio: float = 1e-4,
    interaction_builder: Callable[[Design], tuple[Design, InteractionSpec]] | None = None,
    threads: int | None = None,
    metadata: dict | None = None,
) -> FittedModel:
    """Standardize, select the penalty strength by CV and refit on all rows.

    For ``penalty="adaptive"`` the pipeline is: ridge CV, ridge refit at
    its chosen lambda, weights ``1/|ridge|``, weighted-lasso CV, final
    weighted-lasso refit at the chosen lambda.
    """
    if penalty not in PENALTY_KINDS:
        raise ValidationError(f"unknown penalty {penalty!r}")
    std, params = standardize(design)
    spec = None
    if interaction_builder is not None:
        std, spec = interaction_builder(std)
    meta = dict(metadata or {})
    meta.update(penalty=penalty, k_folds=k, seed=seed, n_lambda=n_lambda, min_ratio=min_ratio)
    names = list(std.names)

    if penalty == "none":
        b0, beta = fit_unpenalized(std)
        coefs = Coefficients(b0, dict(zip(names, beta.tolist())))
        return FittedModel(params, PenaltySpec("none", 0.0), coefs, None, spec, meta)

    ridge_cv = None
    if penalty == "adaptive":
        ridge = PenaltySpec("ridge")
        ridge_cv = cross_validate(std, ridge, k, seed, n_lambda=n_lambda, min_ratio=min_ratio, threads=threads)
        path = fit_penalized(std, ridge, ridge_cv.lambdas[: ridge_cv.best_index + 1])
        pen = PenaltySpec("adaptive", weights=adaptive_weights(path.coefs[-1]))
    else:
        pen = PenaltySpec(penalty)

    cv = cross_validate(std, pen, k, seed, n_lambda=n_lambda, min_ratio=min_ratio, threads=threads)
    path = fit_penalized(std, pen, cv.lambdas[: cv.best_index + 1])
    pen.lam = cv.lambda_best
    coefs = path.coefficients(len(path.lambdas) - 1)
    meta["kkt_residual"] = float(path.kkt[-1])
    return FittedModel(params, pen, coefs, cv, spec, meta, ridge_cv)


def fit_adaptive_lasso(design: Design, **kwargs) -> FittedModel:
    """Adaptive lasso with ridge-derived weights and 10-fold CV by default."""
    return fit_model(design, penalty="adaptive", **kwargs)


def report_exp_std_estimates(model: FittedModel) -> tuple[dict[str, float], list[str]]:
    """Exponentiated standardized coefficients of retained predictors.

    Each value is the multiplicative change in the conditional odds of
    responding per one-SD increase of the predictor. The second element
    lists predictors shrunk to exactly zero.
    """
    kept = {n: math.exp(b) for n, b in model.coefficients.values.items() if b != 0.0}
    zeros = [n for n, b in model.coefficients.values.items() if b == 0.0]
    return kept, zeros


# --- serialization ------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def save_model(model: FittedModel, path) -> None:
    """Write a versioned key-value + table text file."""
    lines = ["# survey-hazard fitted model", f"format_version = {FORMAT_VERSION}"]
    pen = model.penalty
    lines.append(f"penalty_kind = {pen.kind}")
    lines.append(f"lambda = {_fmt(pen.lam if pen.lam is not None else float('nan'))}")
    for key, value in sorted(model.metadata.items()):
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"meta.{key} = {value}")

    lines += ["", "[standardization]", "name,mean,sd"]
    s = model.standardization
    lines += [f"{n},{_fmt(mu)},{_fmt(sd)}" for n, mu, sd in zip(s.names, s.mean, s.sd)]
    lines += ["", "[dropped]"] + list(s.dropped)

    if model.interactions is not None:
        it = model.interactions
        lines += ["", "[interactions]", "base,contextual,mean,sd"]
        lines += [f"{b},{c},{_fmt(mu)},{_fmt(sd)}" for (b, c), mu, sd in zip(it.pairs, it.mean, it.sd)]
        lines += ["", "[interactions_dropped]"] + list(it.dropped)

    weights = pen.resolved_weights(len(model.coefficients.values))
    lines += ["", "[coefficients]", "name,value,weight", f"(intercept),{_fmt(model.coefficients.intercept)},0.0"]
    lines += [f"{n},{_fmt(b)},{_fmt(w)}" for (n, b), w in zip(model.coefficients.values.items(), weights)]

    for section, cv in (("cv", model.cv), ("ridge_cv", model.ridge_cv)):
        if cv is None:
            continue
        k = cv.fold_deviance.shape[0]
        lines += ["", f"[{section}]", f"seed = {cv.seed}", f"best_index = {cv.best_index}"]
        lines.append("folds = " + ",".join(str(int(f)) for f in cv.folds))
        lines.append("lambda,mean_deviance," + ",".join(f"fold_{i + 1}" for i in range(k)))
        for j, lam in enumerate(cv.lambdas):
            vals = [_fmt(lam), _fmt(cv.mean_deviance[j])] + [_fmt(v) for v in cv.fold_deviance[:, j]]
            lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_meta(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def load_model(path) -> FittedModel:
    """Read a model written by :func:`save_model`."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current = None
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            header[key] = value
        else:
            sections[current].append(line)
    if int(header.get("format_version", -1)) != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported model format version {header.get('format_version')}")

    rows = [r.split(",") for r in sections["standardization"][1:]]
    params = StandardizationParams(
        [r[0] for r in rows],
        np.array([float(r[1]) for r in rows]),
        np.array([float(r[2]) for r in rows]),
        sections.get("dropped", []),
    )
    spec = None
    if "interactions" in sections:
        rows = [r.split(",") for r in sections["interactions"][1:]]
        spec = InteractionSpec(
            [(r[0], r[1]) for r in rows],
            np.array([float(r[2]) for r in rows]),
            np.array([float(r[3]) for r in rows]),
            sections.get("interactions_dropped", []),
        )
    rows = [r.split(",") for r in sections["coefficients"][1:]]
    intercept = float(rows[0][1])
    values = {r[0]: float(r[1]) for r in rows[1:]}
    weights = np.array([float(r[2]) for r in rows[1:]])
    lam = float(header["lambda"])
    kind = header["penalty_kind"]
    pen = PenaltySpec(kind, None if math.isnan(lam) else lam, weights if kind == "adaptive" else None)

    def read_cv(name):
        if name not in sections:
            return None
        body = sections[name]
        kv = dict((p.strip() for p in line.split("=", 1)) for line in body[:3])
        table = np.array([[float(x) for x in line.split(",")] for line in body[4:]])
        return CvResult(
            table[:, 0],
            table[:, 1],
            table[:, 2:].T.copy(),
            int(kv["best_index"]),
            int(kv["seed"]),
            np.array([int(x) for x in kv["folds"].split(",")]),
        )

    meta = {k[5:]: _parse_meta(v) for k, v in header.items() if k.startswith("meta.")}
    return FittedModel(params, pen, Coefficients(intercept, values), read_cv("cv"), spec, meta, read_cv("ridge_cv"))
