"""Shared independent oracles: densification and finite differences."""
import numpy as np

from quadcv.structured import DiagMat, DiagPlusLowRank, LowerTriangular


def densify(m) -> np.ndarray:
    """Dense matrix oracle, written independently of the structured kernels."""
    if isinstance(m, DiagMat):
        return np.diag(m.entries)
    if isinstance(m, DiagPlusLowRank):
        f = m.factor.columns
        return np.diag(m.diag.entries) + f @ f.T
    if isinstance(m, LowerTriangular):
        return m.entries @ m.entries.T
    raise TypeError(type(m))


def central_diff(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return out


def rel_err(approx, exact):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    denom = max(float(np.linalg.norm(exact)), 1e-300)
    return float(np.linalg.norm(approx - exact)) / denom
