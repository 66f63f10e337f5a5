"""OLS, ridge and lasso on internally standardised features."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import InputError, SingularSystem

OLS = "ols"
RIDGE = "ridge"
LASSO = "lasso"
KINDS = (OLS, RIDGE, LASSO)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Coefficients live on the standardised scale.

    ``predict`` maps raw rows through the stored means/scales, so callers
    never standardise themselves. Zero-variance columns get coefficient 0.
    """

    kind: str
    coefficients: np.ndarray
    intercept: float
    lam: float
    means: np.ndarray
    scales: np.ndarray
    feature_names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown linear kind {self.kind!r}")
        if self.kind == OLS and self.lam != 0:
            raise InputError("OLS has no penalty")
        for name in ("coefficients", "means", "scales"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    def raw_coefficients(self) -> np.ndarray:
        return self.coefficients / self.scales

    def raw_intercept(self) -> float:
        return float(self.intercept - np.dot(self.coefficients / self.scales, self.means))

    def predict(self, X) -> np.ndarray:
        z = (np.asarray(X, dtype=np.float64) - self.means) / self.scales
        return z @ self.coefficients + self.intercept

    def feature_importance(self, n_features: int | None = None) -> np.ndarray:
        return np.abs(self.coefficients)

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "linear_kind": self.kind,
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "lambda": float(self.lam),
            "means": [float(m) for m in self.means],
            "scales": [float(s) for s in self.scales],
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearModel":
        return cls(doc["linear_kind"], np.array(doc["coefficients"], dtype=np.float64),
                   float(doc["intercept"]), float(doc["lambda"]),
                   np.array(doc["means"], dtype=np.float64), np.array(doc["scales"], dtype=np.float64),
                   tuple(doc.get("feature_names", ())))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))


def standardize(X) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Population z-scores; constant columns are zeroed out (scale 1)."""
    X = np.asarray(X, dtype=np.float64)
    means = X.mean(axis=0)
    sd = X.std(axis=0)
    live = sd > 1e-12 * np.maximum(np.abs(means), 1.0)
    scales = np.where(live, sd, 1.0)
    Z = (X - means) / scales
    Z[:, ~live] = 0.0
    return Z, means, scales, live


def lasso_kill_threshold(X, y) -> float:
    """Smallest lambda at which every lasso coefficient is zero."""
    Z, _, _, _ = standardize(X)
    y = np.asarray(y, dtype=np.float64)
    return float(np.max(np.abs(Z.T @ (y - y.mean()))) / len(y))


def _coordinate_descent(G, c, lam, tol=1e-8, max_sweeps=10_000):
    # minimises 1/2 b'Gb - c'b + lam*|b|_1 with G = Z'Z/n, c = Z'y/n
    p = len(c)
    beta = np.zeros(p)
    diag = np.diag(G).copy()
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if diag[j] == 0.0:
                continue
            rho = c[j] - G[j] @ beta + diag[j] * beta[j]
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / diag[j]
            delta = abs(new - beta[j])
            if delta > max_delta:
                max_delta = delta
            beta[j] = new
        if max_delta < tol:
            break
    return beta


def fit_linear_family(X, y, kind: str = OLS, lam: float = 0.0, feature_names: Sequence[str] = ()
                      ) -> LinearModel:
    """Fit on standardised features with an unpenalised intercept.

    ols/ridge solve (Z'Z + lam*I) b = Z'y. lasso minimises
    ||y - Zb||^2 / (2n) + lam*|b|_1 by cyclic coordinate descent.
    """
    if kind not in KINDS:
        raise InputError(f"unknown linear kind {kind!r}")
    if lam < 0:
        raise InputError("lambda must be >= 0")
    if kind == OLS:
        lam = 0.0
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],) or X.shape[0] < 2:
        raise InputError(f"bad shapes X {X.shape}, y {y.shape}")
    if np.isnan(X).any() or np.isnan(y).any():
        raise InputError("training data contains missing values; impute first")
    n, p = X.shape
    Z, means, scales, live = standardize(X)
    ybar = float(y.mean())
    yc = y - ybar
    beta = np.zeros(p)
    Zl = Z[:, live]
    if Zl.shape[1]:
        if kind == LASSO:
            beta[live] = _coordinate_descent(Zl.T @ Zl / n, Zl.T @ yc / n, lam)
        else:
            A = Zl.T @ Zl + lam * np.eye(Zl.shape[1])
            if lam == 0.0:
                s = np.linalg.svd(Zl, compute_uv=False)
                if s[-1] <= s[0] * max(n, p) * np.finfo(float).eps * 10 or Zl.shape[1] > n:
                    raise SingularSystem("design matrix is rank deficient")
            beta[live] = np.linalg.solve(A, Zl.T @ yc)
    return LinearModel(kind, beta, ybar, float(lam), means, scales, tuple(feature_names))
