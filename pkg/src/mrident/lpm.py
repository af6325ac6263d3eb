"""Local Polynomial Method (LPM) estimator.

Around every bin ``k`` the FRF and the transient are modelled as degree-``R``
polynomials in the window offset ``r``::

    Y(k+r) = (G + sum_s g_s r^s) U(k+r) + T + sum_s t_s r^s + V(k+r)
           = theta @ Kreg(k+r) + V(k+r)

with ``Kreg(k+r) = [K1(r) kron U(k+r); K1(r)]`` and ``K1(r) = [1, r, ..., r^R]``.
The parameter matrix is laid out as ``[G, g_1 .. g_R, T, t_1 .. t_R]``.
Each window holds exactly ``2n+1`` bins; near the ends of the grid the window
is shifted inward rather than shortened. The solve works with ``r/n`` so that
the polynomial columns are of comparable size; the returned parameters refer
to the unscaled offset ``r``.

The same code handles plain and lifted data: for lifted data ``nu_eff`` and
``ny_eff`` are ``F nu`` and ``F ny``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from ._parallel import chunked_map
from .errors import IllConditionedWarning, InsufficientData, NotIdentifiable

COND_LIMIT = 1e12


def dof(R: int, n: int, nu_eff: int) -> int:
    """Residual degrees of freedom ``2n+1 - (R+1)(nu_eff+1)``."""
    return 2 * n + 1 - (R + 1) * (nu_eff + 1)


def min_half_width(R: int, nu_eff: int, ny_eff: int) -> int:
    """Smallest ``n`` with ``2n+1 - (R+1)(nu_eff+1) > ny_eff``."""
    n = 1
    while dof(R, n, nu_eff) <= ny_eff:
        n += 1
    return n


@dataclass(frozen=True)
class LpmConfig:
    R: int = 2
    n: int = 8
    nu_eff: int = 1
    ny_eff: int = 1

    def __post_init__(self):
        if self.R < 0 or self.n < 1 or self.nu_eff < 1 or self.ny_eff < 1:
            raise ValueError("need R >= 0, n >= 1 and positive dimensions")
        if self.dof <= self.ny_eff:
            raise NotIdentifiable(
                f"2n+1-(R+1)(nu+1) = {self.dof} must exceed ny = {self.ny_eff} "
                f"(R={self.R}, n={self.n}, nu={self.nu_eff}); "
                f"smallest valid n is {min_half_width(self.R, self.nu_eff, self.ny_eff)}")

    @classmethod
    def escalated(cls, R: int = 2, n: int = 8, nu_eff: int = 1, ny_eff: int = 1) -> "LpmConfig":
        """Like the constructor, but widens ``n`` to the smallest identifiable
        value (with a warning) instead of raising."""
        n_min = min_half_width(R, nu_eff, ny_eff)
        if n < n_min:
            warnings.warn(f"LPM window n={n} is not identifiable for R={R}, nu={nu_eff}, "
                          f"ny={ny_eff}; using n={n_min}", UserWarning, stacklevel=2)
            n = n_min
        return cls(R, n, nu_eff, ny_eff)

    @property
    def dof(self) -> int:
        return dof(self.R, self.n, self.nu_eff)

    @property
    def n_params(self) -> int:
        return (self.R + 1) * (self.nu_eff + 1)

    @property
    def width(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True, eq=False)
class LpmFit:
    """Per-bin LPM estimates.

    Attributes
    ----------
    theta : (K, ny, (R+1)(nu+1)) complex
        Full parameter matrices ``[G, g_1..g_R, T, t_1..t_R]``.
    residuals : (K, ny, 2n+1) complex
        ``Y_n - theta K_n`` over each window.
    cond : (K,) float
        Condition number of ``K_n K_n^H``.
    ill_conditioned : (K,) bool
        Bins whose ``cond`` exceeds the limit; their parameters are NaN.
    inv_gram_diag : (K, (R+1)(nu+1)) float
        Diagonal of ``(K_n^* K_n^T)^-1``; scales the noise variance into
        parameter variances.
    """

    config: LpmConfig
    theta: np.ndarray
    residuals: np.ndarray
    cond: np.ndarray
    ill_conditioned: np.ndarray
    inv_gram_diag: np.ndarray

    def __len__(self):
        return self.theta.shape[0]

    @property
    def G(self) -> np.ndarray:
        return self.theta[:, :, :self.config.nu_eff]

    @property
    def T(self) -> np.ndarray:
        c = self.config
        return self.theta[:, :, (c.R + 1) * c.nu_eff]

    def g(self, s: int) -> np.ndarray:
        nu = self.config.nu_eff
        return self.theta[:, :, s * nu:(s + 1) * nu]

    def t(self, s: int) -> np.ndarray:
        c = self.config
        return self.theta[:, :, (c.R + 1) * c.nu_eff + s]

    @property
    def residual_norm(self) -> np.ndarray:
        return np.linalg.norm(self.residuals, axis=(1, 2))


def window_start(K: int, n: int) -> np.ndarray:
    """First bin of the ``2n+1`` window used for every bin ``0 .. K-1``."""
    return np.clip(np.arange(K) - n, 0, K - 2 * n - 1)


def regressor(U: np.ndarray, R: int, n: int, bins: np.ndarray, K: int,
              scale: float = 1.0) -> np.ndarray:
    """LPM regressors ``K_n`` for the given bins, shape ``(len(bins), p, 2n+1)``,
    with the offset measured in units of ``scale`` bins."""
    start = window_start(K, n)[bins]
    idx = start[:, None] + np.arange(2 * n + 1)[None, :]
    r = (idx - bins[:, None]) / scale
    K1 = r[:, None, :] ** np.arange(R + 1)[None, :, None]          # (B, R+1, W)
    Uw = np.moveaxis(U[idx], 2, 1)                                   # (B, nu, W)
    kron = (K1[:, :, None, :] * Uw[:, None, :, :]).reshape(len(bins), -1, idx.shape[1])
    return np.concatenate([kron, K1.astype(complex)], axis=1)


def lpm_estimate(U, Y, config: LpmConfig) -> LpmFit:
    """LPM fit at every bin of the common grid of ``U`` and ``Y``.

    Parameters
    ----------
    U : (K, nu) or (K,) complex
        Input DFT (possibly lifted).
    Y : (K, ny) or (K,) complex
        Output DFT on the same grid.
    config : LpmConfig
        ``nu_eff``/``ny_eff`` must match the data.
    """
    U = np.asarray(U, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    U = U.reshape(U.shape[0], -1)
    Y = Y.reshape(Y.shape[0], -1)
    K = U.shape[0]
    if Y.shape[0] != K:
        raise ValueError("U and Y must share the bin grid")
    if (U.shape[1], Y.shape[1]) != (config.nu_eff, config.ny_eff):
        raise ValueError(f"data dimensions (nu={U.shape[1]}, ny={Y.shape[1]}) do not match config")
    if K < config.width:
        raise InsufficientData(f"{K} bins cannot hold a {config.width}-bin window")
    R, n = config.R, config.n
    start = window_start(K, n)
    # undo the r/n scaling: entry j of theta belongs to polynomial order order[j]
    order = np.concatenate([np.repeat(np.arange(R + 1), config.nu_eff), np.arange(R + 1)])
    unscale = float(n) ** -order

    def work(a, b):
        bins = np.arange(a, b)
        Kn = regressor(U, R, n, bins, K, scale=n)                         # (B, p, W)
        idx = start[bins, None] + np.arange(2 * n + 1)[None, :]
        Yn = np.moveaxis(Y[idx], 2, 1)                                     # (B, ny, W)
        # theta Kn ~ Yn  <=>  Kn^T theta^T ~ Yn^T, solved through the SVD of Kn^T
        A = np.swapaxes(Kn, 1, 2)
        Uq, s, Vh = np.linalg.svd(A, full_matrices=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = (s[:, 0] / s[:, -1]) ** 2
        ill = ~(cond <= COND_LIMIT)
        sinv = np.where(ill[:, None], 0.0, 1.0 / np.where(s > 0, s, 1.0))
        V = np.conj(np.swapaxes(Vh, 1, 2))
        proj = np.conj(np.swapaxes(Uq, 1, 2)) @ np.swapaxes(Yn, 1, 2)      # (B, p, ny)
        thetaT = V @ (sinv[:, :, None] * proj)
        theta = np.swapaxes(thetaT, 1, 2)
        resid = Yn - theta @ Kn
        igd = np.einsum("bij,bj->bi", np.abs(V) ** 2, sinv ** 2) * unscale ** 2
        theta = theta * unscale
        theta[ill] = np.nan
        return theta, resid, np.where(np.isfinite(cond), cond, np.inf), ill, igd

    parts = chunked_map(work, K)
    theta, resid, cond, ill, igd = (np.concatenate(x) for x in zip(*parts))
    if ill.any():
        warnings.warn(f"{int(ill.sum())} of {K} LPM bins are ill-conditioned "
                      f"(cond > {COND_LIMIT:g}); flagged as NaN", IllConditionedWarning, stacklevel=2)
    for a in (theta, resid, cond, ill, igd):
        a.setflags(write=False)
    return LpmFit(config, theta, resid, cond, ill, igd)


def lpm_transient(fit: LpmFit, k: int) -> np.ndarray:
    """Estimated transient ``T(k)`` at bin ``k``."""
    return fit.T[k]


def lpm_covariance_proxy(fit: LpmFit, k: int | None = None) -> np.ndarray:
    """Noise covariance estimate ``E E^H / dof`` from the window residuals.

    Returns ``(ny, ny)`` for one bin, or ``(K, ny, ny)`` when ``k`` is None.
    """
    E = fit.residuals if k is None else fit.residuals[k]
    C = E @ np.conj(np.swapaxes(E, -1, -2)) / fit.config.dof
    return C


def lpm_g_variance(fit: LpmFit) -> np.ndarray:
    """Variance of each entry of ``G``, shape ``(K, ny, nu)``."""
    var_y = np.real(np.diagonal(lpm_covariance_proxy(fit), axis1=1, axis2=2))   # (K, ny)
    return var_y[:, :, None] * fit.inv_gram_diag[:, None, :fit.config.nu_eff]


def write_lpm_csv(path, fit: LpmFit, omega):
    """``bin,freq_hz,row,col,re,im,cond,residual_norm`` for the G block."""
    omega = np.asarray(omega)
    G, rn = fit.G, fit.residual_norm
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "freq_hz", "row", "col", "re", "im", "cond", "residual_norm"])
        for k in range(len(fit)):
            for i in range(G.shape[1]):
                for j in range(G.shape[2]):
                    v = G[k, i, j]
                    w.writerow([k, "%.17g" % (omega[k] / (2 * np.pi)), i, j, "%.17g" % v.real,
                                "%.17g" % v.imag, "%.17g" % fit.cond[k], "%.17g" % rn[k]])
