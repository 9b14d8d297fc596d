"""Hot loops: tridiagonal time marching and the exhaustive Hoelder scan.

Tridiagonal matrices are stored as three arrays ``lo, di, up`` of equal
length ``m``; row ``i`` reads ``lo[i]*x[i-1] + di[i]*x[i] + up[i]*x[i+1]``
(``lo[0]`` and ``up[m-1]`` are ignored).
"""
import numpy as np

from ._accel import jit


@jit
def thomas_solve(lo, di, up, rhs, out):
    """Solve one tridiagonal system by forward elimination/back substitution.

    Returns False when a zero pivot is met (``out`` is then undefined).
    """
    m = di.shape[0]
    cp = np.empty(m)
    dp = np.empty(m)
    piv = di[0]
    if piv == 0.0:
        return False
    cp[0] = up[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, m):
        piv = di[i] - lo[i] * cp[i - 1]
        if piv == 0.0:
            return False
        cp[i] = up[i] / piv
        dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / piv
    out[m - 1] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return True


@jit
def forward_sweep(lo, di, up, w0, src, out):
    """March ``M[n] w[n] = w[n-1] + src[n]`` for ``n = 1..N``.

    ``lo, di, up, src, out`` have shape ``(N+1, m)``; row 0 of the matrices
    and of ``src`` is unused. Returns the first failing step, or -1.
    """
    nsteps = out.shape[0]
    m = out.shape[1]
    rhs = np.empty(m)
    for j in range(m):
        out[0, j] = w0[j]
    for n in range(1, nsteps):
        for j in range(m):
            rhs[j] = out[n - 1, j] + src[n, j]
        if not thomas_solve(lo[n], di[n], up[n], rhs, out[n]):
            return n
    return -1


@jit
def adjoint_sweep(lo, di, up, weights, scale, phiT, src, out):
    """Backward march with the weighted transpose of the forward step.

    ``out[n] = scale[n+1] * W^-1 M[n+1]^-T W (out[n+1] - src[n+1])`` with
    ``W = diag(weights)``. Returns the first failing step, or -1.
    """
    nsteps = out.shape[0]
    m = out.shape[1]
    tlo = np.empty(m)
    tup = np.empty(m)
    rhs = np.empty(m)
    sol = np.empty(m)
    last = nsteps - 1
    for j in range(m):
        out[last, j] = phiT[j]
    for n in range(last - 1, -1, -1):
        k = n + 1
        tlo[0] = 0.0
        for j in range(1, m):
            tlo[j] = up[k, j - 1]
        for j in range(m - 1):
            tup[j] = lo[k, j + 1]
        tup[m - 1] = 0.0
        for j in range(m):
            rhs[j] = weights[j] * (out[k, j] - src[k, j])
        if not thomas_solve(tlo, di[k], tup, rhs, sol):
            return k
        for j in range(m):
            out[n, j] = scale[k] * sol[j] / weights[j]
    return -1


@jit
def holder_seminorm(f, t, kappa):
    """sup over node pairs of |f_i - f_j| / |t_i - t_j|**kappa (O(N^2) scan)."""
    n = f.shape[0]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(t[j] - t[i])
            if gap > 0.0:
                r = abs(f[j] - f[i]) / gap**kappa
                if r > best:
                    best = r
    return best
