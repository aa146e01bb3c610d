"""Slow, scalar reference implementations used as ground truth by the tests.

Nothing here imports the library's numerical code: each oracle is written
from the defining formula with plain loops so that a shared bug cannot make
library and oracle agree by accident.
"""
import math

import numpy as np


# ---------------------------------------------------------------- tabular

def value_iteration(P, rewards, terminal, gamma, tol=1e-14, max_iter=200_000):
    """Scalar-loop value iteration on Q; terminal rows stay 0."""
    S, A, _ = P.shape
    q = [[0.0] * A for _ in range(S)]
    for _ in range(max_iter):
        v = [0.0 if terminal[s] else max(q[s]) for s in range(S)]
        new = [[0.0] * A for _ in range(S)]
        delta = 0.0
        for s in range(S):
            if terminal[s]:
                continue
            for a in range(A):
                acc = 0.0
                for s2 in range(S):
                    p = P[s, a, s2]
                    if p:
                        acc += p * (rewards[s2] + gamma * v[s2])
                new[s][a] = acc
                delta = max(delta, abs(acc - q[s][a]))
        q = new
        if delta < tol:
            break
    return np.array(q)


def policy_eval_loops(P, rewards, terminal, gamma, policy, sweeps=20_000):
    """Iterative policy evaluation of V by sweeping until the change underflows."""
    S, A, _ = P.shape
    v = [0.0] * S
    for _ in range(sweeps):
        new = [0.0] * S
        for s in range(S):
            if terminal[s]:
                continue
            acc = 0.0
            for a in range(A):
                for s2 in range(S):
                    acc += policy[s, a] * P[s, a, s2] * (rewards[s2] + gamma * v[s2])
            new[s] = acc
        if max(abs(x - y) for x, y in zip(new, v)) < 1e-15:
            v = new
            break
        v = new
    return np.array(v)


def visitation_series(P, terminal, start, gamma, policy, terms=10_000):
    """``(1-gamma) sum_t gamma^t Pr(s_t = s)`` by propagating the state distribution;
    terminal states absorb."""
    S = P.shape[0]
    mu = np.zeros(S)
    mu[start] = 1.0
    K = np.zeros((S, S))
    for s in range(S):
        if terminal[s]:
            K[s, s] = 1.0
            continue
        for a in range(P.shape[1]):
            K[s] += policy[s, a] * P[s, a]
    d = np.zeros(S)
    g = 1.0
    for _ in range(terms):
        d += g * mu
        mu = mu @ K
        g *= gamma
    return (1.0 - gamma) * d


# ---------------------------------------------------------- distributions

def project_scalar(atoms, probs, grid):
    """Categorical projection written atom by atom from the split rule."""
    out = [0.0] * len(grid)
    for x, p in zip(atoms, probs):
        if x <= grid[0]:
            out[0] += p
            continue
        if x >= grid[-1]:
            out[-1] += p
            continue
        for j in range(len(grid) - 1):
            lo, hi = grid[j], grid[j + 1]
            if lo <= x <= hi:
                out[j] += p * (hi - x) / (hi - lo)
                out[j + 1] += p * (x - lo) / (hi - lo)
                break
    return np.array(out)


def _inverse_cdf(support, probs, w):
    acc = 0.0
    for x, p in zip(support, probs):
        acc += p
        if acc >= w - 1e-15:
            return x
    return support[-1]


def wasserstein_quadrature(sp, pp, sq, pq, order=1.0, n=1_000_000):
    """Midpoint rule over ``w in (0,1)`` of ``|F_p^{-1}(w) - F_q^{-1}(w)|^order``."""
    w = (np.arange(n) + 0.5) / n
    cp = np.cumsum(pp)
    cq = np.cumsum(pq)
    xp = np.asarray(sp)[np.minimum(np.searchsorted(cp, w - 1e-15), len(sp) - 1)]
    xq = np.asarray(sq)[np.minimum(np.searchsorted(cq, w - 1e-15), len(sq) - 1)]
    return float(np.mean(np.abs(xp - xq) ** order) ** (1.0 / order))


def cramer_quadrature(sp, pp, sq, pq, n=2_000_000):
    """``sqrt(int (F_p - F_q)^2 dx)`` by a fine midpoint rule in x."""
    lo = min(min(sp), min(sq))
    hi = max(max(sp), max(sq))
    xs = lo + (np.arange(n) + 0.5) * (hi - lo) / n

    def F(support, probs):
        out = np.zeros(n)
        for x, p in zip(support, probs):
            out += p * (xs >= x)
        return out

    diff = F(sp, pp) - F(sq, pq)
    return math.sqrt(float(np.sum(diff ** 2)) * (hi - lo) / n)


def w1_equal_weight(src_support, src_probs, atoms):
    """Exact W1 between a discrete distribution and equal-weight ``atoms`` via CDF area."""
    atoms = sorted(atoms)
    pts = sorted(set(list(src_support) + list(atoms)))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        Fs = sum(p for x, p in zip(src_support, src_probs) if x <= a)
        Fa = sum(1.0 / len(atoms) for x in atoms if x <= a)
        total += abs(Fs - Fa) * (b - a)
    return total



def w1_equal_weight_batch(src_support, src_probs, supports):
    """W1 to many equal-weight supports ``[M, N]`` at once via the quantile-function form.

    Both quantile functions are step functions; between consecutive breakpoints
    of the source CDF and the grid ``k / N`` each is constant, so the integral
    of ``|F^-1 - G^-1|`` is an exact finite sum.
    """
    M, N = supports.shape
    cdf = np.cumsum(src_probs)
    cdf[-1] = 1.0
    cuts = np.unique(np.concatenate([[0.0], cdf, np.arange(1, N + 1) / N]))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    lengths = np.diff(cuts)
    q_src = np.asarray(src_support)[np.searchsorted(cdf, mids)]
    q_sup = np.sort(supports, axis=1)[:, np.minimum((mids * N).astype(int), N - 1)]
    return np.abs(q_sup - q_src[None, :]) @ lengths

# ------------------------------------------------------------ nn / losses

def noisy_weight_scalar(w_mu, w_sigma, eps_in, eps_out):
    """``W = mu + sigma * f(eps_in) f(eps_out)^T`` with ``f(x) = sign(x) sqrt|x|``."""
    f = lambda x: math.copysign(math.sqrt(abs(x)), x)
    m, n = w_mu.shape
    W = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            W[i, j] = w_mu[i, j] + w_sigma[i, j] * f(eps_in[i]) * f(eps_out[j])
    return W


def quantile_loss_loops(atoms, target, taus):
    """Per-sample ``(1/M) sum_j sum_i (tau_i - 1[u<0]) u`` with ``u = y_j - zeta_i``."""
    B, N = atoms.shape
    M = target.shape[1]
    out = np.zeros(B)
    for b in range(B):
        acc = 0.0
        for j in range(M):
            for i in range(N):
                u = target[b, j] - atoms[b, i]
                acc += (taus[i] - (1.0 if u < 0 else 0.0)) * u
        out[b] = acc / M
    return out


def adam_first_step(theta, g, lr, b1, b2, eps):
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    mhat = m / (1 - b1)
    vhat = v / (1 - b2)
    return theta - lr * mhat / (np.sqrt(vhat) + eps)


def central_fd(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


# ----------------------------------------------------------------- replay

def nstep_windows(rewards, dones, n, gamma):
    """Every state's record by explicit window enumeration within its episode.

    Returns ``(reward_sum, n_used, done)`` tuples in visit order.
    """
    T = len(rewards)
    out = []
    for t in range(T):
        acc, used, done = 0.0, 0, False
        for k in range(n):
            if t + k >= T:
                break
            acc += gamma ** k * rewards[t + k]
            used += 1
            if dones[t + k]:
                done = True
                break
        out.append((acc, used, done))
    return out


# ----------------------------------------------------------- policy grad

def gae_enumeration(rewards, values, last_value, done_last, gamma, lam):
    """Advantages of one rollout segment by listing every available k-step estimator.

    If the segment ends in a terminal the infinite-lambda sum is finite and
    uses standard weights; otherwise the ``n`` estimators that fit in the
    segment are averaged with weights ``lambda^{k-1}`` normalised by
    ``1 + lambda + ... + lambda^{n-1}``.
    """
    T = len(rewards)
    vals = list(values) + [0.0 if done_last else last_value]
    adv = np.zeros(T)
    for t in range(T):
        n = T - t
        ests = []
        for k in range(1, n + 1):
            G = sum(gamma ** i * rewards[t + i] for i in range(k))
            ests.append(G + gamma ** k * vals[t + k] - vals[t])
        if done_last:
            # sum_k (1-lam) lam^{k-1} A_k with the tail mass lam^{n-1} on the full return
            if lam == 1.0:
                adv[t] = ests[-1]
                continue
            acc = sum((1 - lam) * lam ** (k - 1) * ests[k - 1] for k in range(1, n))
            adv[t] = acc + lam ** (n - 1) * ests[-1]
        else:
            w = [lam ** (k - 1) for k in range(1, n + 1)]
            adv[t] = sum(wi * e for wi, e in zip(w, ests)) / sum(w)
    return adv


def softmax_row(theta_row):
    z = np.exp(theta_row - np.max(theta_row))
    return z / z.sum()


def fisher_enumeration(theta, state_weights):
    """Explicit ``sum_s d(s) sum_a pi(a|s) g g^T`` for a tabular softmax, g = grad log pi."""
    S, A = theta.shape
    F = np.zeros((S * A, S * A))
    for s in range(S):
        p = softmax_row(theta[s])
        for a in range(A):
            g = np.zeros(S * A)
            for b in range(A):
                g[s * A + b] = (1.0 if a == b else 0.0) - p[b]
            F += state_weights[s] * p[a] * np.outer(g, g)
    return F


def enumerate_return_gradient(P, rewards, terminal, start, gamma, theta, horizon, baseline=0.0):
    """``E[sum_t gamma^t grad log pi(a_t|s_t) (G_t - b)]`` by listing all action/state paths."""
    S, A = theta.shape
    pi = np.array([softmax_row(theta[s]) for s in range(S)])
    grad = np.zeros_like(theta)

    def rec(s, t, prob, path):
        if terminal[s] or t == horizon:
            rs = [r for (_, _, r) in path]
            for k, (ss, aa, _) in enumerate(path):
                G = sum(gamma ** (i - k) * rs[i] for i in range(k, len(rs)))
                score = -pi[ss].copy()
                score[aa] += 1.0
                grad[ss] += prob * gamma ** k * score * (G - baseline)
            return
        for a in range(A):
            for s2 in range(S):
                p = pi[s, a] * P[s, a, s2]
                if p > 0:
                    rec(s2, t + 1, prob * p, path + [(s, a, rewards[s2])])

    rec(start, 0, 1.0, [])
    return grad


def moving_average_loops(x, window):
    out = []
    for i in range(len(x)):
        lo = max(0, i - window + 1)
        seg = x[lo:i + 1]
        out.append(sum(seg) / len(seg))
    return np.array(out)

