"""Pointwise material laws and boundary data.

Fluid Cauchy stress of an incompressible Newtonian fluid, the growth
kinematics and Piola-Kirchhoff stress of the grown Saint Venant-Kirchhoff
wall, the foam-cell growth-rate ODE right-hand side, the pulsating inflow
profile, and the closed-form ODE solution used as an integrator oracle.

All functions are pure and accept numpy arrays broadcast over leading
dimensions; tensors are (..., 2, 2) arrays. Units are CGS (cm, g, s);
stresses are dyn/cm^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvertedElementError

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class MaterialParams:
    """Fluid, solid and growth parameters (CGS units).

    alpha is stored in 1/s; ``alpha_per_day`` is the per-day convenience
    accessor used in configuration files and long-scale bookkeeping.
    """

    rho_f: float = 1.0        # g/cm^3
    nu_f: float = 0.04        # cm^2/s
    rho_s: float = 1.0        # g/cm^3
    mu_s: float = 1.0e4       # dyn/cm^2
    lambda_s: float = 4.0e4   # dyn/cm^2
    sigma_0: float = 30.0     # g cm/s^2
    alpha: float = 5.0e-7     # 1/s

    def __post_init__(self):
        for name in ("rho_f", "nu_f", "rho_s", "mu_s", "lambda_s", "sigma_0", "alpha"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"material parameter {name!r} must be strictly positive")

    @property
    def alpha_per_day(self) -> float:
        return self.alpha * SECONDS_PER_DAY

    @staticmethod
    def with_alpha_per_day(alpha_per_day: float, **kwargs) -> "MaterialParams":
        return MaterialParams(alpha=alpha_per_day / SECONDS_PER_DAY, **kwargs)


@dataclass
class GrowthState:
    """Slow state: foam-cell concentration and the long-scale clock (days)."""

    c_s: float = 0.0
    day: float = 0.0

    def __post_init__(self):
        if self.c_s < 0.0:
            raise ConfigurationError("foam-cell concentration c_s must be >= 0")


def fluid_cauchy_stress(grad_v, p, params: MaterialParams):
    """Cauchy stress of the incompressible Newtonian fluid.

    Parameters
    ----------
    grad_v : (..., 2, 2) array
        Spatial velocity gradient, grad_v[..., i, j] = dv_i/dx_j (1/s).
    p : (...) array or float
        Pressure (dyn/cm^2).

    Returns
    -------
    (..., 2, 2) array, symmetric: rho_f nu_f (grad_v + grad_v^T) - p I.
    """
    grad_v = np.asarray(grad_v)
    p = np.asarray(p)
    sym = grad_v + np.swapaxes(grad_v, -1, -2)
    eye = np.eye(2, dtype=np.result_type(grad_v, p))
    return params.rho_f * params.nu_f * sym - p[..., None, None] * eye


def growth_scalar(x_hat, y_hat, c_s):
    """Prescribed growth shape g = 1 + c_s exp(-x^2) (2 - |y|), g >= 1.

    Coordinates are Lagrangian (reference) coordinates in cm; the plaque
    is centered at (0, -1) and the shape vanishes toward |y| = 2.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    return 1.0 + c_s * np.exp(-x_hat**2) * (2.0 - np.abs(y_hat))


def pk_growth_stress(grad_u_hat, g, params: MaterialParams):
    """First Piola-Kirchhoff stress F_e Sigma_e of the grown SVK wall.

    With F_s = I + grad_u_hat, elastic strain
    E_e = (g^-2 F_s^T F_s - I) / 2, the stress is

        F_e Sigma_e = 2 mu_s g^-1 F_s E_e + lambda_s g^-1 tr(E_e) F_s.

    Parameters
    ----------
    grad_u_hat : (..., 2, 2) array
        Reference displacement gradient.
    g : (...) array or float
        Growth scalar, g >= 1.

    Returns
    -------
    (..., 2, 2) array of Piola stresses (dyn/cm^2).

    Raises
    ------
    InvertedElementError
        If det(I + grad_u_hat) <= 0 anywhere.
    """
    grad_u_hat = np.asarray(grad_u_hat)
    g = np.asarray(g)
    eye = np.eye(2, dtype=grad_u_hat.dtype)
    f_s = grad_u_hat + eye
    det = f_s[..., 0, 0] * f_s[..., 1, 1] - f_s[..., 0, 1] * f_s[..., 1, 0]
    if np.any(det.real <= 0.0):
        raise InvertedElementError("deformation gradient has non-positive determinant")
    ginv2 = g[..., None, None] ** -2.0
    e_e = 0.5 * (ginv2 * np.swapaxes(f_s, -1, -2) @ f_s - eye)
    tr_e = e_e[..., 0, 0] + e_e[..., 1, 1]
    ginv = g[..., None, None] ** -1.0
    return 2.0 * params.mu_s * ginv * f_s @ e_e \
        + params.lambda_s * ginv * tr_e[..., None, None] * f_s


def pk_growth_stress_gradient(grad_u_hat, g, params: MaterialParams):
    """Derivative dP_{in}/dG_{jm} of ``pk_growth_stress`` w.r.t. grad_u_hat.

    Returns a (..., 2, 2, 2, 2) array D with D[..., i, n, j, m] such that
    the directional derivative in direction H is einsum('...injm,...jm', D, H).
    Feeds the exact Newton Jacobian of the solid residual.
    """
    grad_u_hat = np.asarray(grad_u_hat)
    g = np.asarray(g)
    eye = np.eye(2, dtype=grad_u_hat.dtype)
    f = grad_u_hat + eye
    ginv = g[..., None, None, None, None] ** -1.0
    ginv2 = g[..., None, None] ** -2.0
    e = 0.5 * (ginv2 * np.swapaxes(f, -1, -2) @ f - eye)
    tr_e = e[..., 0, 0] + e[..., 1, 1]
    fft = f @ np.swapaxes(f, -1, -2)

    # 2 mu g^-1 [ delta_ij E_mn + g^-2 (F_im F_jn + (F F^T)_ij delta_nm)/2 ]
    d = np.einsum("ij,...mn->...injm", eye, e)
    d = d + 0.5 * ginv2[..., None, None] * (
        np.einsum("...im,...jn->...injm", f, f)
        + np.einsum("...ij,nm->...injm", fft, eye)
    )
    d = 2.0 * params.mu_s * ginv * d
    # lambda g^-1 [ g^-2 F_jm F_in + tr(E) delta_ij delta_nm ]
    d = d + params.lambda_s * ginv * (
        ginv2[..., None, None] * np.einsum("...jm,...in->...injm", f, f)
        + tr_e[..., None, None, None, None] * np.einsum("ij,nm->injm", eye, eye)
    )
    return d


def cauchy_from_piola(grad_u_hat, g, params: MaterialParams):
    """Diagnostic Cauchy stress J_e^-1 F_e Sigma_e F_e^T of the solid."""
    grad_u_hat = np.asarray(grad_u_hat)
    g = np.asarray(g)
    eye = np.eye(2, dtype=grad_u_hat.dtype)
    f_s = grad_u_hat + eye
    f_e = f_s / g[..., None, None]
    det_e = f_e[..., 0, 0] * f_e[..., 1, 1] - f_e[..., 0, 1] * f_e[..., 1, 0]
    piola = pk_growth_stress(grad_u_hat, g, params)
    # pk_growth_stress returns F_e Sigma_e in terms of F_s; convert with F_e^T
    return piola @ np.swapaxes(f_e, -1, -2) / det_e[..., None, None]


def growth_rate(sigma_ws, c_s, params: MaterialParams, alpha_factor: float = 1.0):
    """Foam-cell growth rate gamma (1/s).

    gamma = alpha (1 + c_s)^-1 (1 + |sigma_ws|^2)^-1, so 0 < gamma <= alpha.
    ``alpha_factor`` is a multiplicative modulation hook (default 1, constant
    alpha over the heartbeat).
    """
    sigma_ws = np.asarray(sigma_ws, dtype=float)
    return params.alpha * alpha_factor / ((1.0 + c_s) * (1.0 + sigma_ws**2))


def inflow_profile(t, y, amplitude: float = 30.0):
    """Pulsating inflow velocity (v_x, v_y) at time t (s), height y (cm).

    v_x = amplitude sin^2(pi t) (1 - y^2), v_y = 0; 1 s periodic, vanishing
    at integer times and at y = -1.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    vx = amplitude * np.sin(np.pi * t) ** 2 * (1.0 - y**2)
    return np.stack(np.broadcast_arrays(vx, np.zeros_like(vx)), axis=-1)


def mean_inflow_profile(y, amplitude: float = 30.0):
    """Time average of ``inflow_profile`` over one period (mean of sin^2 = 1/2)."""
    y = np.asarray(y, dtype=float)
    vx = 0.5 * amplitude * (1.0 - y**2)
    return np.stack(np.broadcast_arrays(vx, np.zeros_like(vx)), axis=-1)


def closed_form_cs(t_days, params: MaterialParams):
    """Exact solution sqrt(1 + 2 alpha t) - 1 of (1+c) c' = alpha, c(0) = 0.

    ``t_days`` in days; alpha taken per day. Oracle for the long-scale
    forward-Euler update at zero wall shear.
    """
    t_days = np.asarray(t_days, dtype=float)
    if np.any(t_days < 0.0):
        raise ConfigurationError("closed_form_cs requires t >= 0")
    return np.sqrt(1.0 + 2.0 * params.alpha_per_day * t_days) - 1.0
