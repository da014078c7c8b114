"""Iterative variance-inflation-factor screening."""

from __future__ import annotations

import numpy as np

COLLINEAR_EPS = 1e-10


def vif_values(X: np.ndarray) -> np.ndarray:
    """VIF of each column against all others (with intercept).

    Constant columns get NaN and are left out of the other regressions, since
    they are already spanned by the intercept.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    sd = X.std(axis=0)
    live = np.flatnonzero(sd > 0)
    out = np.full(p, np.nan)
    Xc = X - X.mean(axis=0)
    for j in live:
        others = live[live != j]
        y = Xc[:, j]
        sst = float(y @ y)
        if len(others) == 0:
            out[j] = 1.0
            continue
        A = Xc[:, others]
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        tol = float(resid @ resid) / sst
        out[j] = np.inf if tol < COLLINEAR_EPS else 1.0 / tol
    return out


def vif_screen(X, columns: list[str] | None = None, threshold: float = 10.0):
    """Drop the highest-VIF column while any VIF exceeds ``threshold``.

    Equal VIFs (including several infinite ones) remove the column that comes
    later in ``columns``. Returns ``(retained_columns, removal_log)``.
    """
    if hasattr(X, "columns"):
        columns = list(columns or X.columns)
        X = X[columns].to_numpy(dtype=float)
    X = np.asarray(X, dtype=float)
    if columns is None:
        columns = [f"x{j}" for j in range(X.shape[1])]
    if X.shape[1] < 2:
        raise ValueError("VIF screening needs at least two columns")
    keep = list(range(X.shape[1]))
    log = []
    step = 0
    while len(keep) > 1:
        v = vif_values(X[:, keep])
        finite = np.where(np.isnan(v), -np.inf, v)
        worst = finite.max()
        if not worst > threshold:
            break
        # last position among ties
        pos = int(np.flatnonzero(finite == worst)[-1])
        col = keep.pop(pos)
        step += 1
        log.append({"step": step, "column": columns[col],
                    "vif": float(worst), "n_remaining": len(keep)})
    return [columns[j] for j in keep], log
