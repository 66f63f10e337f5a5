"""Asset-based wealth index and cluster-level indicator targets."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, EmptyCluster, MalformedHeader, MalformedRecord

log = logging.getLogger(__name__)

TARGET_NAMES = ("wealth_index", "toilet_access", "clean_water", "educational_attainment")
HOUSEHOLD_FLAGS = ("toilet_outside", "improved_water", "head_higher_edu")


@dataclass(frozen=True)
class HouseholdRecord:
    cluster_id: str
    assets: tuple[float, ...]
    toilet_outside: int
    improved_water: int
    head_higher_edu: int

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(float(a) for a in self.assets))
        for name in HOUSEHOLD_FLAGS:
            if getattr(self, name) not in (0, 1):
                raise MalformedRecord(f"{self.cluster_id}: {name} must be 0 or 1")


@dataclass(frozen=True)
class PcaResult:
    scores: np.ndarray
    loadings: np.ndarray
    explained_share: float
    kept: np.ndarray  # boolean mask of non-constant columns


def pca_first_component(assets) -> PcaResult:
    """First principal component of the correlation matrix.

    Columns are z-scored with the population standard deviation; constant
    columns are dropped (loading 0). The sign makes the loadings sum
    non-negative, falling back to a positive first nonzero loading.
    """
    a = np.asarray(assets, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    n, p = a.shape
    if n < 2 or p < 1:
        raise DegenerateInput(f"need at least 2 households and 1 asset, got {n}x{p}")
    sd = a.std(axis=0)
    kept = sd > 0
    if not kept.any():
        raise DegenerateInput("all asset columns are constant")
    if not kept.all():
        log.warning("dropping %d zero-variance asset column(s)", int((~kept).sum()))
    z = (a[:, kept] - a[:, kept].mean(axis=0)) / sd[kept]
    corr = (z.T @ z) / n
    corr = (corr + corr.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(corr)
    lam = float(eigvals[-1])
    v = eigvecs[:, -1].copy()
    v /= np.linalg.norm(v)
    total = math.fsum(v)
    if abs(total) <= 1e-12 * len(v):
        first = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
        if first < 0:
            v = -v
    elif total < 0:
        v = -v
    loadings = np.zeros(p)
    loadings[kept] = v
    scores = z @ v
    return PcaResult(scores, loadings, lam / int(kept.sum()), kept)


@dataclass
class TargetTable:
    cluster_ids: list[str]
    wealth_index: np.ndarray
    toilet_access: np.ndarray
    clean_water: np.ndarray
    educational_attainment: np.ndarray

    def target(self, name: str) -> np.ndarray:
        if name not in TARGET_NAMES:
            raise KeyError(f"unknown target {name!r}; choose from {TARGET_NAMES}")
        return getattr(self, name)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cluster_id", *TARGET_NAMES])
            for i, cid in enumerate(self.cluster_ids):
                w.writerow([cid, *(repr(float(self.target(t)[i])) for t in TARGET_NAMES)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TargetTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["cluster_id", *TARGET_NAMES]:
                raise MalformedHeader(f"{path}: expected header cluster_id,{','.join(TARGET_NAMES)}")
            ids, rows = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise MalformedRecord(f"{path}:{lineno}: expected {len(header)} fields")
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        arr = np.array(rows, dtype=np.float64).reshape(len(ids), len(TARGET_NAMES))
        return cls(ids, *(arr[:, j].copy() for j in range(len(TARGET_NAMES))))


def derive_cluster_targets(
    households: Sequence[HouseholdRecord], cluster_ids: Sequence[str] | None = None
) -> TargetTable:
    """Cluster means of pooled household PCA scores and of the 0/1 flags.

    Row order follows ``cluster_ids`` when given, else first appearance.
    """
    if not households:
        raise DegenerateInput("no households")
    p = len(households[0].assets)
    if any(len(h.assets) != p for h in households):
        raise DimensionMismatch("asset vectors differ in length across households")
    pca = pca_first_component(np.array([h.assets for h in households]))
    members: dict[str, list[int]] = {}
    for i, h in enumerate(households):
        members.setdefault(h.cluster_id, []).append(i)
    order = list(members) if cluster_ids is None else list(cluster_ids)
    flags = np.array([[h.toilet_outside, h.improved_water, h.head_higher_edu] for h in households],
                     dtype=np.float64)
    cols = np.zeros((len(order), 4))
    for r, cid in enumerate(order):
        idx = members.get(cid)
        if not idx:
            raise EmptyCluster(f"cluster {cid!r} has no households")
        cols[r, 0] = math.fsum(pca.scores[idx]) / len(idx)
        cols[r, 1:] = flags[idx].sum(axis=0) / len(idx)
    return TargetTable(order, cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3])


def read_households(path: str | Path) -> list[HouseholdRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if (
            header is None
            or len(header) < 5
            or [h.strip() for h in header[:4]] != ["cluster_id", *HOUSEHOLD_FLAGS]
        ):
            raise MalformedHeader(
                f"{path}: expected header cluster_id,{','.join(HOUSEHOLD_FLAGS)},asset_1,..."
            )
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecord(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                flags = [int(float(v)) for v in row[1:4]]
                assets = [float(v) for v in row[4:]]
            except ValueError as exc:
                raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
            out.append(HouseholdRecord(row[0].strip(), tuple(assets), *flags))
    return out


def write_households(path: str | Path, households: Iterable[HouseholdRecord]) -> None:
    households = list(households)
    p = len(households[0].assets) if households else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", *HOUSEHOLD_FLAGS, *(f"asset_{i + 1}" for i in range(p))])
        for h in households:
            w.writerow([h.cluster_id, h.toilet_outside, h.improved_water, h.head_higher_edu,
                        *(repr(a) if a != int(a) else str(int(a)) for a in h.assets)])
