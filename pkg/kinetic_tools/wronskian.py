"""
Wronskian of the control profiles and the linear algebra of the boundary
solve W^delta(1) M = Y.

P(s) has entries s^(1+i+alpha_j) / p_ij with p_ij = (1+alpha_j)...(1+i+alpha_j);
W(s) = P(s) (x) Id_d0; W^delta(s) = R W(s) with
R = blockdiag(Id, delta B~_{1,1}, ..., delta^kappa B~_{kappa,1}).
"""

import logging
from math import prod
from typing import Optional

import numpy as np

from data_models.control_basis import ControlBasis
from data_models.kinetic_system import SystemSpec
from data_utils.settings import KineticSettings, resolve_settings
from kinetic_tools.control_basis import power_coefficient
from kinetic_tools.errors import (
    DegenerateBasisError,
    InvalidParametersError,
    TimeDegenerateError,
)
from kinetic_tools.geometry import composed_block, exp_tB

logger = logging.getLogger(__name__)


def svd_pinv(matrix: np.ndarray, rel_tol: float) -> np.ndarray:
    """Moore-Penrose inverse; singular values below rel_tol * sigma_max are dropped."""
    u, sigma, vt = np.linalg.svd(matrix, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros(matrix.T.shape)
    keep = sigma > rel_tol * sigma[0]
    inv_sigma = np.zeros_like(sigma)
    inv_sigma[keep] = 1.0 / sigma[keep]
    return (vt.T * inv_sigma) @ u.T


def p_matrix_unit(basis: ControlBasis, settings: Optional[KineticSettings] = None) -> np.ndarray:
    """P(1): entry (i, j) = 1 / p_ij."""
    k = basis.kappa
    out = np.empty((k + 1, k + 1))
    for i in range(k + 1):
        for j in range(k + 1):
            # row i holds g_j^(kappa - i)
            out[i, j] = power_coefficient(basis, j, k - i, settings)
    return out


def det_p_unit_closed_form(basis: ControlBasis) -> float:
    """prod_{i<j} (alpha_i - alpha_j) / prod_{i,j} (1 + i + alpha_j)."""
    a = basis.alphas
    n = basis.size
    num = prod(a[i] - a[j] for i in range(n) for j in range(i + 1, n))
    den = prod(1.0 + i + a[j] for i in range(n) for j in range(n))
    return num / den


class WronskianBundle:
    """
    Cached linear algebra for one (spec, basis, delta) triple. Immutable
    after construction; safe to share between threads.
    """

    def __init__(
        self,
        spec: SystemSpec,
        basis: ControlBasis,
        delta: float,
        settings: Optional[KineticSettings] = None,
    ):
        self.settings = resolve_settings(settings)
        if basis.kappa != spec.kappa:
            raise InvalidParametersError(
                f"basis kappa {basis.kappa} does not match spec kappa {spec.kappa}"
            )
        if not np.isfinite(delta) or abs(delta) < self.settings.DELTA_MIN:
            raise TimeDegenerateError(
                f"|delta| = {abs(delta):.6g} below the floor {self.settings.DELTA_MIN}"
            )
        self.spec = spec
        self.basis = basis
        self.delta = float(delta)
        self.d0 = spec.d0
        self.size = basis.size * spec.d0

        self._p1 = p_matrix_unit(basis, self.settings)
        det_numeric = float(np.linalg.det(self._p1))
        det_closed = det_p_unit_closed_form(basis)
        if det_closed == 0.0 or det_numeric == 0.0:
            raise DegenerateBasisError("W(1) is singular: control exponents coincide")
        rel = abs(det_numeric - det_closed) / abs(det_closed)
        self.det_relative_error = rel
        if rel > self.settings.DET_FAILURE_TOLERANCE:
            raise DegenerateBasisError(
                f"det W(1) deviates from its closed form by {rel:.3e}; basis too ill-conditioned"
            )
        if rel > self.settings.DET_RELATIVE_TOLERANCE:
            logger.warning(
                "det W(1) matches its closed form only to %.3e; exponents are nearly coincident", rel
            )

        self._p1_inv = np.linalg.inv(self._p1)
        eye = np.eye(self.d0)
        self._w1 = np.kron(self._p1, eye)
        self._w1_inv = np.kron(self._p1_inv, eye)
        self._R = self._build_R()
        self._R_pinv = svd_pinv(self._R, self.settings.PINV_TOLERANCE)
        self._T1 = self.transport_matrix_T(1.0)
        self._pinv_cache = {}
        logger.debug(
            "Wronskian bundle ready | kappa=%d | d0=%d | delta=%s | detP1=%.6e",
            spec.kappa, self.d0, self.delta, det_closed,
        )

    # -----------------------------------------------------------------
    # Building blocks
    # -----------------------------------------------------------------
    def _build_R(self) -> np.ndarray:
        spec = self.spec
        R = np.zeros((spec.N, self.size))
        R[spec.layer_slice(0), 0:self.d0] = np.eye(self.d0)
        for i in range(1, spec.kappa + 1):
            cols = slice(i * self.d0, (i + 1) * self.d0)
            R[spec.layer_slice(i), cols] = (self.delta ** i) * composed_block(spec, i, 1)
        return R

    def _row_scale(self, s: float) -> np.ndarray:
        return np.array([s ** (1.0 + i) for i in range(self.basis.size)])

    def _col_scale(self, s: float) -> np.ndarray:
        return np.array([s ** a for a in self.basis.alphas])

    # -----------------------------------------------------------------
    # Public matrices
    # -----------------------------------------------------------------
    def p_matrix(self, s: float) -> np.ndarray:
        if s < 0:
            raise InvalidParametersError("s must be >= 0")
        if s == 0:
            return np.zeros_like(self._p1)
        return self._row_scale(s)[:, None] * self._p1 * self._col_scale(s)[None, :]

    def wronskian_matrix(self, s: float) -> np.ndarray:
        return np.kron(self.p_matrix(s), np.eye(self.d0))

    def wronskian_derivative(self, s: float) -> np.ndarray:
        """dW/ds: every derivative order shifted up by one."""
        if s <= 0:
            raise InvalidParametersError("dW/ds is only evaluated for s > 0")
        k = self.basis.kappa
        out = np.empty_like(self._p1)
        for i in range(k + 1):
            for j in range(k + 1):
                m = k - i + 1
                out[i, j] = s ** (k + 1 + self.basis.alphas[j] - m) * power_coefficient(
                    self.basis, j, m, self.settings
                )
        return np.kron(out, np.eye(self.d0))

    def wronskian_inverse(self, s: float) -> np.ndarray:
        """W(s)^-1 from W(s) = (S_row P(1) S_col) (x) Id, stable for small s."""
        if s <= 0:
            raise InvalidParametersError("W(s) is singular at s = 0")
        inv_p = (1.0 / self._col_scale(s))[:, None] * self._p1_inv * (1.0 / self._row_scale(s))[None, :]
        return np.kron(inv_p, np.eye(self.d0))

    def det_closed_form(self, s: float) -> float:
        if s < 0:
            raise InvalidParametersError("s must be >= 0")
        k = self.basis.kappa
        exponent = (k + 1) * (k + 2) / 2.0 + sum(self.basis.alphas)
        det_p = det_p_unit_closed_form(self.basis) * (s ** exponent if s > 0 else 0.0)
        return det_p ** self.d0

    def numeric_det(self, s: float) -> float:
        return float(np.linalg.det(self.wronskian_matrix(s)))

    def scaling_matrix_R(self) -> np.ndarray:
        return self._R.copy()

    def transport_matrix_T(self, s: float) -> np.ndarray:
        return exp_tB(self.spec, s * self.delta)

    def wdelta(self, s: float) -> np.ndarray:
        return self._R @ self.wronskian_matrix(s)

    def pseudo_inverse_Wdelta1(self, method: Optional[str] = None) -> np.ndarray:
        """
        Right inverse G of W^delta(1). "factored" is W(1)^-1 R^+; "min-norm"
        is the Moore-Penrose inverse of W^delta(1). They agree in the square case.
        """
        method = method or self.settings.SOLUTION_METHOD
        if method not in self._pinv_cache:
            if method == "factored":
                G = self._w1_inv @ self._R_pinv
            elif method == "min-norm":
                G = svd_pinv(self._R @ self._w1, self.settings.PINV_TOLERANCE)
            else:
                raise InvalidParametersError(f"unknown solution method {method!r}")
            # G <- G (2 Id - W G) pulls W G back onto Id_N
            G = G + G @ (np.eye(self.spec.N) - self.wdelta(1.0) @ G)
            self._pinv_cache[method] = G
        return self._pinv_cache[method]

    @property
    def T1(self) -> np.ndarray:
        return self._T1

    @property
    def W1(self) -> np.ndarray:
        return self._w1

    @property
    def W1_inverse(self) -> np.ndarray:
        return self._w1_inv

    @property
    def is_square(self) -> bool:
        return self.spec.N == self.size
