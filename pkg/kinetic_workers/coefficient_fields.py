"""
Rough diffusion matrices A with Lambda^-1 <= A <= Lambda, piecewise
constant on coefficient blocks and deliberately discontinuous.
"""

import logging
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from data_models.kinetic_system import SystemSpec
from data_utils.random_streams import named_stream
from kinetic_tools.errors import InvalidParametersError

logger = logging.getLogger(__name__)

Preset = Literal["random", "checkerboard", "identity"]
EIGEN_SLACK = 1e-12


def _random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))[None, :]


def _block_matrices(
    rng: np.random.Generator, n_blocks: int, d0: int, lam: float, preset: str, parity: np.ndarray
) -> np.ndarray:
    eye = np.eye(d0)
    if preset == "identity" or lam == 1.0:
        return np.broadcast_to(eye, (n_blocks, d0, d0)).copy()
    if preset == "checkerboard":
        scale = np.where(parity % 2 == 0, 1.0 / lam, lam)
        return scale[:, None, None] * eye[None]
    log_lam = np.log(lam)
    eig = np.exp(rng.uniform(-log_lam, log_lam, size=(n_blocks, d0)))
    if d0 == 1:
        return eig[:, :, None]
    out = np.empty((n_blocks, d0, d0))
    for b in range(n_blocks):
        q = _random_rotation(rng, d0)
        mat = (q * eig[b][None, :]) @ q.T
        out[b] = 0.5 * (mat + mat.T)
    return out


def rough_coefficient_sampler(
    spec: SystemSpec,
    shape: Sequence[int],
    seed: int,
    lam: Optional[float] = None,
    block_shape: Optional[Sequence[int]] = None,
    preset: Preset = "random",
) -> np.ndarray:
    """
    Per-cell symmetric d0 x d0 field of shape ``shape + (d0, d0)``.

    ``block_shape`` fixes the coefficient partition independently of the
    grid, so refining the grid keeps the same coefficient function.
    """
    lam = spec.lambda_ if lam is None else float(lam)
    if lam < 1.0:
        raise InvalidParametersError(f"ellipticity bound must be >= 1, got {lam}")
    if preset not in ("random", "checkerboard", "identity"):
        raise InvalidParametersError(f"unknown coefficient preset {preset!r}")
    shape = tuple(int(n) for n in shape)
    block_shape = shape if block_shape is None else tuple(int(n) for n in block_shape)
    if len(block_shape) != len(shape) or any(b < 1 for b in block_shape):
        raise InvalidParametersError("block_shape must have one positive entry per axis")

    rng = named_stream(seed, "rough-coefficient")
    block_index = np.indices(block_shape).reshape(len(block_shape), -1)
    parity = block_index.sum(axis=0)
    blocks = _block_matrices(rng, int(np.prod(block_shape)), spec.d0, lam, preset, parity)
    blocks = blocks.reshape(block_shape + (spec.d0, spec.d0))

    # cell j on an axis of n cells sits in block floor(j * nb / n)
    maps = [(np.arange(n) * nb) // n for n, nb in zip(shape, block_shape)]
    field = blocks[np.ix_(*maps)]
    check_coefficient(field, lam)
    logger.debug("Sampled %s coefficient | lambda=%s | blocks=%s", preset, lam, block_shape)
    return field


def check_coefficient(coefficient: np.ndarray, lam: float) -> Tuple[float, float]:
    """Eigenvalue range of the field; raises when outside [1/lam, lam]."""
    mats = coefficient.reshape(-1, coefficient.shape[-2], coefficient.shape[-1])
    if not np.allclose(mats, np.swapaxes(mats, 1, 2), atol=1e-12):
        raise InvalidParametersError("coefficient matrices must be symmetric")
    eig = np.linalg.eigvalsh(mats)
    lo, hi = float(eig.min()), float(eig.max())
    if lo < 1.0 / lam - EIGEN_SLACK or hi > lam + EIGEN_SLACK:
        raise InvalidParametersError(
            f"coefficient eigenvalues [{lo:.6g}, {hi:.6g}] escape [{1.0 / lam:.6g}, {lam:.6g}]"
        )
    return lo, hi


def constant_coefficient(spec: SystemSpec, shape: Sequence[int], value: float = 1.0) -> np.ndarray:
    return np.broadcast_to(value * np.eye(spec.d0), tuple(shape) + (spec.d0, spec.d0)).copy()
