"""Small fitting helpers: weighted straight lines and single exponentials."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares


class FitError(RuntimeError):
    """The fit is degenerate or did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float
    converged: bool
    info: dict = field(default_factory=dict)

    def __getitem__(self, key):
        if not self.converged:
            raise FitError(f"parameter {key!r} requested from an unconverged fit", self.info)
        return self.params[key]


def weighted_linear_fit(x, y, w=None) -> FitResult:
    """Closed-form weighted least squares for ``y = slope*x + intercept``.

    Standard errors use the weighted residual variance with ``n - 2`` degrees
    of freedom, so they are zero for exactly linear data.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    keep = w > 0
    x, y, w = x[keep], y[keep], w[keep]
    if np.unique(x).size < 2:
        raise FitError("need at least two distinct x values with positive weight")
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    dx = x - xm
    sxx = (w * dx * dx).sum()
    slope = (w * dx * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    rss = float((w * resid * resid).sum())
    dof = x.size - 2
    if dof > 0:
        s2 = rss / dof
        se_slope = np.sqrt(s2 / sxx)
        se_int = np.sqrt(s2 * (1.0 / sw + xm * xm / sxx))
    else:
        se_slope = se_int = 0.0
    return FitResult(
        {"slope": float(slope), "intercept": float(intercept)},
        {"slope": float(se_slope), "intercept": float(se_int)},
        float(np.sqrt(rss)),
        True,
    )


def exponential_fit(t, y, max_iter: int = 200, rtol: float = 1e-10) -> FitResult:
    """Fit ``A*exp(-t/T) + B``.

    Time is rescaled to the series span internally.  The starting point comes
    from the linear sub-problem at ``T = span/2`` refined by a log-linear fit
    of ``y - B``; a bounded trust-region least-squares pass does the rest.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 4:
        raise FitError("exponential fit needs at least 4 points")
    t0 = t[0]
    span = t[-1] - t0
    if not span > 0:
        raise FitError("time axis must be increasing")
    scale = max(1.0, float(np.max(np.abs(y))))
    if np.ptp(y) <= 1e-12 * scale:
        raise FitError("degenerate fit: series is constant (amplitude not identifiable)",
                       {"ptp": float(np.ptp(y))})
    u = (t - t0) / span

    def linear_ab(tau):
        basis = np.column_stack([np.exp(-u / tau), np.ones_like(u)])
        (a, b), *_ = np.linalg.lstsq(basis, y, rcond=None)
        return a, b

    tau0 = 0.5
    a0, b0 = linear_ab(tau0)
    r = (y - b0) * np.sign(a0)
    good = r > 1e-12 * scale
    if good.sum() >= 2:
        c = np.polyfit(u[good], np.log(r[good]), 1)[0]
        if c < 0 and np.isfinite(c):
            tau0 = float(np.clip(-1.0 / c, 1e-3, 1e3))
            a0, b0 = linear_ab(tau0)

    def resid(p):
        a, tau, b = p
        return a * np.exp(-u / tau) + b - y

    sol = least_squares(resid, [a0, tau0, b0], bounds=([-np.inf, 1e-6, -np.inf], np.inf),
                        method="trf", x_scale="jac", ftol=rtol, xtol=rtol, gtol=rtol,
                        max_nfev=max_iter)
    a, tau, b = sol.x
    rss = float(np.sum(sol.fun ** 2))
    diagnostics = {"status": int(sol.status), "nfev": int(sol.nfev), "rss": rss,
                   "message": sol.message}
    if not sol.success or sol.status == 0:
        raise FitError(f"exponential fit did not converge: {sol.message}", diagnostics)
    J = sol.jac
    dof = max(t.size - 3, 1)
    try:
        cov = np.linalg.inv(J.T @ J) * (rss / dof)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        raise FitError("degenerate fit: singular Jacobian", diagnostics) from None
    if abs(a) <= 1e-12 * scale:
        raise FitError("degenerate fit: zero amplitude", diagnostics)
    return FitResult(
        {"A": float(a), "T": float(tau * span), "B": float(b)},
        {"A": float(se[0]), "T": float(se[1] * span), "B": float(se[2])},
        float(np.sqrt(rss)),
        True,
        diagnostics,
    )
