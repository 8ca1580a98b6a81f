"""Localization metrics over weighted particle sets, plus detection scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .particle_filter import normalized_weights
from .world import Crater, Pose, front_arc

REGULARIZATION = 1e-9
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class StepMetrics:
    gt_error: float
    sqrt_lambda_max: float
    mahalanobis: float
    n_eff: float
    resampled: bool


def weighted_mean(positions, log_weights) -> np.ndarray:
    w = normalized_weights(log_weights)
    return w @ np.asarray(positions, dtype=float)


def weighted_covariance(positions, log_weights) -> np.ndarray:
    w = normalized_weights(log_weights)
    pts = np.asarray(positions, dtype=float)
    d = pts - w @ pts
    cov = (w[:, None] * d).T @ d
    return 0.5 * (cov + cov.T)


def sqrt_lambda_max(cov) -> float:
    """Square root of the larger eigenvalue of a symmetric 2x2 matrix, in closed form."""
    a, b, d = float(cov[0][0]), 0.5 * (float(cov[0][1]) + float(cov[1][0])), float(cov[1][1])
    lam = 0.5 * (a + d) + math.hypot(0.5 * (a - d), b)
    return math.sqrt(max(lam, 0.0))


def uncertainty(positions, log_weights) -> float:
    return sqrt_lambda_max(weighted_covariance(positions, log_weights))


def mahalanobis_from_moments(mu, cov, gt) -> float:
    """Covariance-weighted distance between ``mu`` and ``gt``.

    Near-singular covariances get ``REGULARIZATION * I`` added; anything still
    unusable yields ``inf``.
    """
    diff = np.asarray(mu, dtype=float) - np.asarray(gt, dtype=float)
    if not np.any(diff):
        return 0.0
    cov = np.asarray(cov, dtype=float)
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_CONDITION:
        cov = cov + REGULARIZATION * np.eye(2)
    try:
        val = float(diff @ np.linalg.solve(cov, diff))
    except np.linalg.LinAlgError:
        return math.inf
    if not math.isfinite(val) or val < 0:
        return math.inf
    return math.sqrt(val)


def mahalanobis(positions, log_weights, gt) -> float:
    return mahalanobis_from_moments(weighted_mean(positions, log_weights),
                                    weighted_covariance(positions, log_weights), gt)


def step_metrics(positions, log_weights, gt, n_eff: float, resampled: bool) -> StepMetrics:
    mu = weighted_mean(positions, log_weights)
    cov = weighted_covariance(positions, log_weights)
    return StepMetrics(
        gt_error=float(np.hypot(*(mu - np.asarray(gt, dtype=float)))),
        sqrt_lambda_max=sqrt_lambda_max(cov),
        mahalanobis=mahalanobis_from_moments(mu, cov, gt),
        n_eff=float(n_eff),
        resampled=bool(resampled),
    )


def pixel_error_to_meters(err_px: float, range_gt: float, focal_length: float,
                          sensor_size: float) -> float:
    """Convert an image-space detection error to metres at the true range."""
    scale = focal_length * sensor_size
    if scale == 0:
        raise ValueError("focal_length * sensor_size must be non-zero")
    return err_px * range_gt / scale


def gaussian_edge_score(distance_errors, sigma: float = 0.25) -> float:
    """Mean Gaussian kernel of detection errors; 0 when nothing was detected."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    d = np.asarray(distance_errors, dtype=float)
    if d.size == 0:
        return 0.0
    return float(np.mean(np.exp(-d * d / (2.0 * sigma * sigma))))


def front_arc_percent(detections, pose: Pose, crater: Crater, tolerance: float,
                      spacing: float = 0.25) -> float:
    """Percent of front-arc samples with a world-frame detection within ``tolerance``."""
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    samples = front_arc(pose, crater).sample(spacing)
    det = np.asarray(detections, dtype=float).reshape(-1, 2)
    if len(det) == 0:
        return 0.0
    d = np.linalg.norm(samples[:, None, :] - det[None, :, :], axis=-1)
    return 100.0 * float(np.mean(d.min(axis=1) <= tolerance))
