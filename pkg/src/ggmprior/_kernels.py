"""Hot numeric kernels with numba and pure-numpy twins.

Three inner loops dominate runtime: the annealed Langevin chain, the
Metropolis edge-flip chain for exponential random graphs, and the block
coordinate descent sweeps of the weighted graphical lasso.  Each exists in
two implementations with identical signatures:

* ``*_numba``: scalar-loop versions compiled with ``@njit`` (built only when
  numba imports).
* ``*_numpy``: vectorized reference versions with no compilation step.

The module-level dispatchers (``langevin_chain``, ``ergm_chain``,
``glasso_sweeps``, ``mixture_score``) pick the backend per call: numba when
available, unless the environment variable ``GGMPRIOR_DISABLE_NUMBA`` is set
to a non-empty value other than ``0``.  All randomness is pre-drawn by the
caller and passed in as arrays, so a given noise stream produces the same
trajectory on either backend up to floating-point rounding.
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "GGMPRIOR_DISABLE_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def numba_enabled() -> bool:
    """True when the numba backend is importable and not disabled by env flag."""
    flag = os.environ.get(ENV_FLAG, "")
    return HAVE_NUMBA and flag not in ("", "0") is False if False else (
        HAVE_NUMBA and (flag == "" or flag == "0")
    )


def backend_name() -> str:
    return "numba" if numba_enabled() else "numpy"


# ---------------------------------------------------------------------------
# Gaussian mixture score
# ---------------------------------------------------------------------------


def mixture_score_numpy(x: np.ndarray, comps: np.ndarray, sigma: float) -> np.ndarray:
    """Gradient of log of the isotropic Gaussian mixture (1/N) sum_i N(x; c_i, sigma^2 I).

    Uses log-sum-exp stabilized softmax weights; equals
    sum_i w_i (c_i - x) / sigma^2 with w_i softmax of -||x - c_i||^2 / (2 sigma^2).
    """
    diff = comps - x[None, :]
    logw = -0.5 * np.einsum("ij,ij->i", diff, diff) / (sigma * sigma)
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    return (w @ diff) / (sigma * sigma)


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _mixture_score_fill(x, comps, sigma, out):
        ncomp, dim = comps.shape
        inv2s2 = 0.5 / (sigma * sigma)
        logw = np.empty(ncomp)
        mx = -np.inf
        for i in range(ncomp):
            d2 = 0.0
            for j in range(dim):
                d = comps[i, j] - x[j]
                d2 += d * d
            logw[i] = -d2 * inv2s2
            if logw[i] > mx:
                mx = logw[i]
        z = 0.0
        for i in range(ncomp):
            logw[i] = np.exp(logw[i] - mx)
            z += logw[i]
        for j in range(dim):
            out[j] = 0.0
        for i in range(ncomp):
            wi = logw[i] / z
            for j in range(dim):
                out[j] += wi * (comps[i, j] - x[j])
        s2 = sigma * sigma
        for j in range(dim):
            out[j] /= s2

    @njit(cache=True, nogil=True)
    def mixture_score_numba(x, comps, sigma):
        out = np.empty(x.shape[0])
        _mixture_score_fill(x, comps, sigma, out)
        return out

    @njit(cache=True, nogil=True)
    def _cholesky_flag(A, L):
        """In-place lower Cholesky; returns False when A is not positive definite."""
        n = A.shape[0]
        for j in range(n):
            s = A[j, j]
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if s <= 0.0:
                return False
            L[j, j] = np.sqrt(s)
            for i in range(j + 1, n):
                t = A[i, j]
                for k in range(j):
                    t -= L[i, k] * L[j, k]
                L[i, j] = t / L[j, j]
        return True

    @njit(cache=True, nogil=True)
    def _chol_inverse(L, out):
        """out = (L L^T)^{-1} given the lower Cholesky factor L."""
        n = L.shape[0]
        # V = L^{-1} by forward substitution, stored in out temporarily
        for i in range(n):
            for j in range(n):
                out[i, j] = 0.0
        for col in range(n):
            out[col, col] = 1.0 / L[col, col]
            for i in range(col + 1, n):
                t = 0.0
                for k in range(col, i):
                    t -= L[i, k] * out[k, col]
                out[i, col] = t / L[i, i]
        # inverse = V^T V; accumulate upper triangle then mirror
        for i in range(n):
            for j in range(i, n):
                t = 0.0
                for k in range(j, n):
                    t += out[k, i] * out[k, j]
                L[i, j] = t
        for i in range(n):
            for j in range(i, n):
                out[i, j] = L[i, j]
                out[j, i] = L[i, j]


# ---------------------------------------------------------------------------
# Annealed Langevin chain
# ---------------------------------------------------------------------------

_FAIL_OK = -1


def langevin_chain_numpy(
    state,
    row,
    col,
    unknown_idx,
    theta_hat,
    S,
    k,
    use_like,
    comps,
    levels,
    steps_per_level,
    epsilon,
    noise,
    clamp_lo,
    clamp_hi,
    ridge,
    score_clip,
):
    """Run the full annealed Langevin update loop on a half-vector state.

    ``noise`` holds pre-drawn standard normals, one row per step, one column
    per unknown pair.  Returns ``(state, fail_level, fail_step)`` where the
    failure indices are -1 on success and point at the first step whose
    masked precision stayed non positive definite after one ridge retry.
    """
    state = state.copy()
    n = theta_hat.shape[0]
    sigma_last = levels[-1]
    ru = row[unknown_idx]
    cu = col[unknown_idx]
    use_prior = comps.shape[0] > 0
    eye = np.eye(n)
    for level in range(levels.shape[0]):
        sigma = levels[level]
        alpha = epsilon * (sigma * sigma) / (sigma_last * sigma_last)
        root = np.sqrt(2.0 * alpha)
        for t in range(steps_per_level):
            step = level * steps_per_level + t
            delta = np.zeros(unknown_idx.shape[0])
            if use_like:
                a_cl = np.clip(state, clamp_lo, clamp_hi)
                A = np.zeros((n, n))
                A[row, col] = a_cl
                A[col, row] = a_cl
                T = theta_hat * A
                np.fill_diagonal(T, np.diag(theta_hat))
                try:
                    np.linalg.cholesky(T)
                except np.linalg.LinAlgError:
                    T = T + ridge * eye
                    try:
                        np.linalg.cholesky(T)
                    except np.linalg.LinAlgError:
                        return state, level, t
                dsig = np.linalg.inv(T) - S
                delta += k * theta_hat[ru, cu] * dsig[ru, cu]
            if use_prior:
                delta += mixture_score_numpy(state, comps, sigma)[unknown_idx]
            np.clip(delta, -score_clip, score_clip, out=delta)
            state[unknown_idx] += alpha * delta + root * noise[step]
    return state, _FAIL_OK, _FAIL_OK


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def langevin_chain_numba(
        state,
        row,
        col,
        unknown_idx,
        theta_hat,
        S,
        k,
        use_like,
        comps,
        levels,
        steps_per_level,
        epsilon,
        noise,
        clamp_lo,
        clamp_hi,
        ridge,
        score_clip,
    ):
        state = state.copy()
        n = theta_hat.shape[0]
        dim = state.shape[0]
        m = unknown_idx.shape[0]
        nlevels = levels.shape[0]
        sigma_last = levels[nlevels - 1]
        use_prior = comps.shape[0] > 0

        T = np.empty((n, n))
        L = np.empty((n, n))
        inv = np.empty((n, n))
        prior = np.empty(dim)
        delta = np.empty(m)

        for level in range(nlevels):
            sigma = levels[level]
            alpha = epsilon * (sigma * sigma) / (sigma_last * sigma_last)
            root = np.sqrt(2.0 * alpha)
            for t in range(steps_per_level):
                step = level * steps_per_level + t
                for p in range(m):
                    delta[p] = 0.0
                if use_like:
                    for i in range(n):
                        for j in range(n):
                            T[i, j] = 0.0
                        T[i, i] = theta_hat[i, i]
                    for p in range(dim):
                        a = state[p]
                        if a < clamp_lo:
                            a = clamp_lo
                        elif a > clamp_hi:
                            a = clamp_hi
                        i = row[p]
                        j = col[p]
                        v = theta_hat[i, j] * a
                        T[i, j] = v
                        T[j, i] = v
                    ok = _cholesky_flag(T, L)
                    if not ok:
                        for i in range(n):
                            T[i, i] += ridge
                        ok = _cholesky_flag(T, L)
                        if not ok:
                            return state, level, t
                    _chol_inverse(L, inv)
                    for p in range(m):
                        i = row[unknown_idx[p]]
                        j = col[unknown_idx[p]]
                        delta[p] = k * theta_hat[i, j] * (inv[i, j] - S[i, j])
                if use_prior:
                    _mixture_score_fill(state, comps, sigma, prior)
                    for p in range(m):
                        delta[p] += prior[unknown_idx[p]]
                for p in range(m):
                    d = delta[p]
                    if d > score_clip:
                        d = score_clip
                    elif d < -score_clip:
                        d = -score_clip
                    state[unknown_idx[p]] += alpha * d + root * noise[step, p]
        return state, _FAIL_OK, _FAIL_OK


# ---------------------------------------------------------------------------
# ERGM Metropolis edge-flip chain
# ---------------------------------------------------------------------------


def star_weight_table(n: int, gamma: float) -> np.ndarray:
    """Per-vertex alternated-star contribution phi(D) for degrees D in 0..n-1.

    phi(D) = sum_{d=2}^{D} (-1)^d C(D, d) / gamma^(d-2); the graph statistic
    is the sum of phi over vertex degrees.
    """
    phi = np.zeros(n)
    for D in range(2, n):
        binom = 1.0  # C(D, d) built multiplicatively from d=0
        total = 0.0
        power = gamma * gamma  # gamma^(2-d) for current d
        for d in range(1, D + 1):
            binom *= (D - d + 1) / d
            if d >= 2:
                power /= gamma
                total += (binom * power) if d % 2 == 0 else -(binom * power)
        phi[D] = total
    return phi


def ergm_chain_numpy(adj, phi, beta_aks, beta_edges, pair_i, pair_j, log_u, record_codes):
    """Metropolis single-edge-flip chain targeting exp(beta . [AKS, |E|]).

    ``adj`` is modified in place; degrees and the alternated-star statistic
    are updated incrementally from the flipped pair.  When ``record_codes``
    the visited state after every step is encoded as a bit pattern over the
    half-vector order (requires n(n-1)/2 <= 62).
    """
    n = adj.shape[0]
    steps = pair_i.shape[0]
    deg = adj.sum(axis=1).astype(np.int64)
    codes = np.full(steps if record_codes else 1, -1, dtype=np.int64)
    code = 0
    if record_codes:
        iu, ju = np.triu_indices(n, k=1)
        bit_of = {}
        for p, (i, j) in enumerate(zip(iu, ju)):
            bit_of[(int(i), int(j))] = p
        for p, (i, j) in enumerate(zip(iu, ju)):
            if adj[i, j]:
                code |= 1 << p
    for s in range(steps):
        i = pair_i[s]
        j = pair_j[s]
        if adj[i, j]:
            d_edges = -1.0
            d_aks = (phi[deg[i] - 1] - phi[deg[i]]) + (phi[deg[j] - 1] - phi[deg[j]])
        else:
            d_edges = 1.0
            d_aks = (phi[deg[i] + 1] - phi[deg[i]]) + (phi[deg[j] + 1] - phi[deg[j]])
        log_acc = beta_aks * d_aks + beta_edges * d_edges
        if log_acc >= 0.0 or log_u[s] < log_acc:
            new = 1 - adj[i, j]
            adj[i, j] = new
            adj[j, i] = new
            deg[i] += 1 if new else -1
            deg[j] += 1 if new else -1
            if record_codes:
                code ^= 1 << bit_of[(int(i), int(j))]
        if record_codes:
            codes[s] = code
    return adj, codes


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def ergm_chain_numba(adj, phi, beta_aks, beta_edges, pair_i, pair_j, log_u, record_codes):
        n = adj.shape[0]
        steps = pair_i.shape[0]
        deg = np.zeros(n, dtype=np.int64)
        for i in range(n):
            for j in range(n):
                deg[i] += adj[i, j]
        ncodes = steps if record_codes else 1
        codes = np.full(ncodes, -1, dtype=np.int64)
        code = 0
        if record_codes:
            p = 0
            for i in range(n):
                for j in range(i + 1, n):
                    if adj[i, j]:
                        code |= 1 << p
                    p += 1
        for s in range(steps):
            i = pair_i[s]
            j = pair_j[s]
            if adj[i, j] == 1:
                d_edges = -1.0
                d_aks = (phi[deg[i] - 1] - phi[deg[i]]) + (phi[deg[j] - 1] - phi[deg[j]])
            else:
                d_edges = 1.0
                d_aks = (phi[deg[i] + 1] - phi[deg[i]]) + (phi[deg[j] + 1] - phi[deg[j]])
            log_acc = beta_aks * d_aks + beta_edges * d_edges
            if log_acc >= 0.0 or log_u[s] < log_acc:
                new = 1 - adj[i, j]
                adj[i, j] = new
                adj[j, i] = new
                if new == 1:
                    deg[i] += 1
                    deg[j] += 1
                else:
                    deg[i] -= 1
                    deg[j] -= 1
                if record_codes:
                    lo = i if i < j else j
                    hi = j if i < j else i
                    bit = lo * n - (lo * (lo + 1)) // 2 + (hi - lo - 1)
                    code ^= 1 << bit
            if record_codes:
                codes[s] = code
        return adj, codes


# ---------------------------------------------------------------------------
# Weighted graphical lasso block coordinate descent
# ---------------------------------------------------------------------------


def _soft(x: float, thr: float) -> float:
    if x > thr:
        return x - thr
    if x < -thr:
        return x + thr
    return 0.0


def glasso_sweeps_numpy(S, Lam, tol, max_iter, inner_max, inner_tol):
    """Column-wise block coordinate descent for the weighted graphical lasso.

    Maximizes log det(Theta) - tr(S Theta) - sum_ij Lam_ij |Theta_ij| over
    positive definite Theta.  The working variable is the covariance
    W ~ Theta^{-1}; its diagonal is pinned to diag(S) because the diagonal is
    never penalized.  Each column solve is a weighted lasso run by coordinate
    descent.  Convergence is declared on a relative change of the primal
    objective below ``tol``.

    Returns ``(Theta, W, sweeps, converged, objective)``.
    """
    n = S.shape[0]
    W = np.zeros((n, n))
    np.fill_diagonal(W, np.diag(S))
    B = np.zeros((n, n))
    obj_prev = -np.inf
    obj = -np.inf
    converged = False
    sweeps = 0
    for sweep in range(max_iter):
        sweeps = sweep + 1
        for j in range(n):
            for _ in range(inner_max):
                shift = 0.0
                for i in range(n):
                    if i == j:
                        continue
                    g = S[i, j] - W[i, :] @ B[:, j] + W[i, i] * B[i, j]
                    b = _soft(g, Lam[i, j]) / W[i, i]
                    shift = max(shift, abs(b - B[i, j]))
                    B[i, j] = b
                if shift <= inner_tol:
                    break
            w_col = W @ B[:, j]
            w_col[j] = W[j, j]
            W[:, j] = w_col
            W[j, :] = w_col
        theta = _recover_theta_numpy(W, B)
        if theta is None:
            continue
        sign, logdet = np.linalg.slogdet(theta)
        if sign <= 0:
            continue
        obj = logdet - float(np.sum(S * theta)) - float(np.sum(Lam * np.abs(theta)))
        if np.isfinite(obj_prev) and abs(obj - obj_prev) <= tol * max(1.0, abs(obj_prev)):
            converged = True
            break
        obj_prev = obj
    theta = _recover_theta_numpy(W, B)
    if theta is None:
        theta = np.diag(1.0 / np.diag(S))
        converged = False
    return theta, W, sweeps, converged, obj


def _recover_theta_numpy(W, B):
    n = W.shape[0]
    theta = np.zeros((n, n))
    for j in range(n):
        den = W[j, j] - W[:, j] @ B[:, j]
        if den <= 0.0:
            return None
        theta[j, j] = 1.0 / den
        theta[:, j] -= B[:, j] * theta[j, j]
        theta[j, j] = 1.0 / den
    return 0.5 * (theta + theta.T)


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _recover_theta_numba(W, B, theta):
        n = W.shape[0]
        for j in range(n):
            den = W[j, j]
            for i in range(n):
                den -= W[i, j] * B[i, j]
            if den <= 0.0:
                return False
            tjj = 1.0 / den
            for i in range(n):
                theta[i, j] = -B[i, j] * tjj
            theta[j, j] = tjj
        for i in range(n):
            for j in range(i + 1, n):
                v = 0.5 * (theta[i, j] + theta[j, i])
                theta[i, j] = v
                theta[j, i] = v
        return True

    @njit(cache=True, nogil=True)
    def glasso_sweeps_numba(S, Lam, tol, max_iter, inner_max, inner_tol):
        n = S.shape[0]
        W = np.zeros((n, n))
        for i in range(n):
            W[i, i] = S[i, i]
        B = np.zeros((n, n))
        theta = np.zeros((n, n))
        Lchol = np.empty((n, n))
        obj_prev = -np.inf
        obj = -np.inf
        converged = False
        sweeps = 0
        for sweep in range(max_iter):
            sweeps = sweep + 1
            for j in range(n):
                for _ in range(inner_max):
                    shift = 0.0
                    for i in range(n):
                        if i == j:
                            continue
                        g = S[i, j] + W[i, i] * B[i, j]
                        for kk in range(n):
                            g -= W[i, kk] * B[kk, j]
                        thr = Lam[i, j]
                        if g > thr:
                            b = (g - thr) / W[i, i]
                        elif g < -thr:
                            b = (g + thr) / W[i, i]
                        else:
                            b = 0.0
                        d = b - B[i, j]
                        if d < 0.0:
                            d = -d
                        if d > shift:
                            shift = d
                        B[i, j] = b
                    if shift <= inner_tol:
                        break
                for i in range(n):
                    if i == j:
                        continue
                    v = 0.0
                    for kk in range(n):
                        v += W[i, kk] * B[kk, j]
                    W[i, j] = v
                    W[j, i] = v
            ok = _recover_theta_numba(W, B, theta)
            if not ok:
                continue
            ok = _cholesky_flag(theta, Lchol)
            if not ok:
                continue
            logdet = 0.0
            for i in range(n):
                logdet += 2.0 * np.log(Lchol[i, i])
            obj = logdet
            for i in range(n):
                for j in range(n):
                    obj -= S[i, j] * theta[i, j]
                    av = theta[i, j]
                    if av < 0.0:
                        av = -av
                    obj -= Lam[i, j] * av
            ref = obj_prev if obj_prev > 0.0 else -obj_prev
            if ref < 1.0:
                ref = 1.0
            if np.isfinite(obj_prev) and (obj - obj_prev if obj > obj_prev else obj_prev - obj) <= tol * ref:
                converged = True
                break
            obj_prev = obj
        ok = _recover_theta_numba(W, B, theta)
        if not ok:
            for i in range(n):
                for j in range(n):
                    theta[i, j] = 0.0
                theta[i, i] = 1.0 / S[i, i]
            converged = False
        return theta, W, sweeps, converged, obj


# ---------------------------------------------------------------------------
# Dispatchers
# ---------------------------------------------------------------------------


def mixture_score(x, comps, sigma):
    if numba_enabled():
        return mixture_score_numba(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(comps, dtype=np.float64),
            float(sigma),
        )
    return mixture_score_numpy(np.asarray(x, dtype=np.float64), np.asarray(comps, dtype=np.float64), float(sigma))


def langevin_chain(state, row, col, unknown_idx, theta_hat, S, k, use_like, comps,
                   levels, steps_per_level, epsilon, noise, clamp_lo, clamp_hi,
                   ridge, score_clip):
    args = (
        np.ascontiguousarray(state, dtype=np.float64),
        np.ascontiguousarray(row, dtype=np.int64),
        np.ascontiguousarray(col, dtype=np.int64),
        np.ascontiguousarray(unknown_idx, dtype=np.int64),
        np.ascontiguousarray(theta_hat, dtype=np.float64),
        np.ascontiguousarray(S, dtype=np.float64),
        float(k),
        bool(use_like),
        np.ascontiguousarray(comps, dtype=np.float64),
        np.ascontiguousarray(levels, dtype=np.float64),
        int(steps_per_level),
        float(epsilon),
        np.ascontiguousarray(noise, dtype=np.float64),
        float(clamp_lo),
        float(clamp_hi),
        float(ridge),
        float(score_clip),
    )
    if numba_enabled():
        return langevin_chain_numba(*args)
    return langevin_chain_numpy(*args)


def ergm_chain(adj, phi, beta_aks, beta_edges, pair_i, pair_j, log_u, record_codes):
    args = (
        np.ascontiguousarray(adj, dtype=np.int64),
        np.ascontiguousarray(phi, dtype=np.float64),
        float(beta_aks),
        float(beta_edges),
        np.ascontiguousarray(pair_i, dtype=np.int64),
        np.ascontiguousarray(pair_j, dtype=np.int64),
        np.ascontiguousarray(log_u, dtype=np.float64),
        bool(record_codes),
    )
    if numba_enabled():
        return ergm_chain_numba(*args)
    return ergm_chain_numpy(*args)


def glasso_sweeps(S, Lam, tol, max_iter, inner_max=1000, inner_tol=None):
    S = np.ascontiguousarray(S, dtype=np.float64)
    Lam = np.ascontiguousarray(Lam, dtype=np.float64)
    if inner_tol is None:
        inner_tol = 0.1 * tol
    if numba_enabled():
        return glasso_sweeps_numba(S, Lam, float(tol), int(max_iter), int(inner_max), float(inner_tol))
    return glasso_sweeps_numpy(S, Lam, float(tol), int(max_iter), int(inner_max), float(inner_tol))
