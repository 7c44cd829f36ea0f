"""Independent reference implementations used as test oracles.

These avoid the package's own code paths: explicit loops, eigen-solvers,
power iteration and pseudo-inverses instead of the library's linear solves
and einsum contractions.
"""
import itertools

import numpy as np


def stationary_eig(P):
    """Stationary vector from the eigenvector of ``P.T`` nearest eigenvalue 1."""
    w, v = np.linalg.eig(np.asarray(P, float).T)
    k = np.argmin(np.abs(w - 1.0))
    q = np.real(v[:, k])
    return q / q.sum()


def cesaro_from(P, start, n_iter=20000):
    """Long-run occupancy from ``start`` by power iteration on the lazy chain."""
    P = np.asarray(P, float)
    lazy = 0.5 * (np.eye(len(P)) + P)
    x = np.zeros(len(P))
    x[start] = 1.0
    for _ in range(n_iter):
        x_new = x @ lazy
        if np.abs(x_new - x).max() < 1e-15:
            break
        x = x_new
    return x_new


def tv_subsets(mu, nu):
    """``max_T |mu(T) - nu(T)|`` by enumerating every subset."""
    n = len(mu)
    best = 0.0
    for r in range(n + 1):
        for T in itertools.combinations(range(n), r):
            idx = list(T)
            best = max(best, abs(float(np.sum(np.asarray(mu)[idx]) - np.sum(np.asarray(nu)[idx]))))
    return best


def lambda1_loops(M):
    M = np.asarray(M, float)
    n = len(M)
    return max(0.5 * sum(abs(M[i, k] - M[j, k]) for k in range(n))
               for i in range(n) for j in range(n))


def group_inverse_pinv(P):
    """Group inverse of ``A = I - P`` via ``A (A^3)^+ A`` (valid for index-one ``A``)."""
    A = np.eye(len(P)) - np.asarray(P, float)
    return A @ np.linalg.pinv(A @ A @ A) @ A


def chain_of(kernel, policy):
    return np.array([kernel[s, policy[s]] for s in range(kernel.shape[0])])


def gain_of(kernel, reward, policy, start=None):
    P = chain_of(kernel, policy)
    r = np.array([reward[s, policy[s]] for s in range(len(policy))])
    q = stationary_eig(P) if start is None else cesaro_from(P, start)
    return float(q @ r)


def best_gain_enumerated(kernel, reward):
    S, A = reward.shape
    return max(gain_of(kernel, reward, np.array(p))
               for p in itertools.product(range(A), repeat=S))


def mixed_radix(sizes, comps):
    idx = 0
    for n, c in zip(sizes, comps):
        idx = idx * n + c
    return idx


def grid_kernel_loops(N, L, c, delta, K):
    """Grid kernel by explicit enumeration over (s, a, s')."""
    n = L * L
    moves = [(0, -1), (-1, 0), (0, 1), (1, 0)]

    def dest(cell, a):
        r, col = divmod(cell, L)
        rr, cc = r + moves[a][0], col + moves[a][1]
        return rr * L + cc if 0 <= rr < L and 0 <= cc < L else None

    def reach(cell):
        return [d for d in (dest(cell, a) for a in range(4)) if d is not None]

    S, A = n ** N, 4 ** N
    P = np.zeros((S, A, S))
    for s in itertools.product(range(n), repeat=N):
        for a in itertools.product(range(4), repeat=N):
            ds = [dest(s[i], a[i]) for i in range(N)]
            rows = []
            for i in range(N):
                D = reach(s[i])
                row = {}
                if ds[i] is None:
                    for d in D:
                        row[d] = 1.0 / len(D)
                else:
                    others = sum(1 for j in range(N) if j != i and ds[j] == ds[i])
                    p = delta * c if others >= K else c
                    for d in D:
                        row[d] = p if d == ds[i] else (1 - p) / (len(D) - 1)
                rows.append(row)
            for t in itertools.product(*[list(r.items()) for r in rows]):
                nxt = tuple(x[0] for x in t)
                P[mixed_radix([n] * N, s), mixed_radix([4] * N, a),
                  mixed_radix([n] * N, nxt)] += np.prod([x[1] for x in t])
    return P


def patrol_kernel_loops(U, V, L, c, d, delta, beta, eta):
    """Patrol kernel and reward by explicit enumeration (adversaries stay-targeting)."""
    S = L ** (U + V)
    A = L ** U
    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    for s in itertools.product(range(L), repeat=V + U):
        adv, units = s[:V], s[V:]
        for a in itertools.product(range(L), repeat=U):
            for t in itertools.product(range(L), repeat=V + U):
                adv2, units2 = t[:V], t[V:]
                p = 1.0
                for j in range(V):
                    prot = adv[j] in a
                    pj = beta * d if prot else d
                    p *= pj if adv2[j] == adv[j] else (1 - pj) / (L - 1)
                for u in range(U):
                    coll = sum(1 for w in range(U) if w != u and a[w] == a[u]) > 0
                    pu = delta * c if coll else c
                    p *= pu if units2[u] == a[u] else (1 - pu) / (L - 1)
                r = 0.0
                for loc in range(L):
                    k = sum(1 for x in units2 if x == loc)
                    x = sum(1 for y in adv2 if y == loc)
                    r += (1 - (1 - eta) ** k) * x
                si = mixed_radix([L] * (V + U), s)
                P[si, mixed_radix([L] * U, a), mixed_radix([L] * (V + U), t)] += p
                R[si, mixed_radix([L] * U, a)] += p * r
    return P, R


def delta_loops(kernel, state_sizes, action_sizes):
    """Largest TV between agent ``i``'s conditionals over all companion contexts.

    No environment component. Contexts with zero conditioning mass are skipped.
    """
    m = len(state_sizes)
    best = 0.0
    states = list(itertools.product(*[range(n) for n in state_sizes]))
    actions = list(itertools.product(*[range(k) for k in action_sizes]))
    for i in range(m):
        for si in range(state_sizes[i]):
            for ai in range(action_sizes[i]):
                rows = []
                for s in states:
                    if s[i] != si:
                        continue
                    for a in actions:
                        if a[i] != ai:
                            continue
                        for t_other in itertools.product(
                                *[range(state_sizes[j]) for j in range(m) if j != i]):
                            vec = np.zeros(state_sizes[i])
                            for x in range(state_sizes[i]):
                                t = list(t_other)
                                t.insert(i, x)
                                vec[x] = kernel[mixed_radix(state_sizes, s),
                                                mixed_radix(action_sizes, a),
                                                mixed_radix(state_sizes, t)]
                            if vec.sum() > 0:
                                rows.append(vec / vec.sum())
                for u in rows:
                    for v in rows:
                        best = max(best, 0.5 * float(np.abs(u - v).sum()))
    return best


def local_transition_loops(kernel, state_sizes, action_sizes, i, companion_tables):
    """Uniform-companion-state average of agent ``i``'s marginal kernel.

    ``companion_tables[j]`` is agent ``j``'s ``(S_j, A_j)`` action table.
    """
    m = len(state_sizes)
    others = [j for j in range(m) if j != i]
    n_ctx = int(np.prod([state_sizes[j] for j in others]))
    out = np.zeros((state_sizes[i], action_sizes[i], state_sizes[i]))
    for s in itertools.product(*[range(n) for n in state_sizes]):
        for a in itertools.product(*[range(k) for k in action_sizes]):
            w = np.prod([companion_tables[j][s[j], a[j]] for j in others]) / n_ctx
            if w == 0:
                continue
            for t in itertools.product(*[range(n) for n in state_sizes]):
                out[s[i], a[i], t[i]] += w * kernel[mixed_radix(state_sizes, s),
                                                     mixed_radix(action_sizes, a),
                                                     mixed_radix(state_sizes, t)]
    return out / out.sum(axis=2, keepdims=True)


def local_reward_loops(reward, state_sizes, action_sizes, i, q_hat, companion_tables):
    m = len(state_sizes)
    out = np.zeros((state_sizes[i], action_sizes[i]))
    for s in itertools.product(*[range(n) for n in state_sizes]):
        for a in itertools.product(*[range(k) for k in action_sizes]):
            w = 1.0
            for j in range(m):
                if j != i:
                    w *= q_hat[j][s[j]] * companion_tables[j][s[j], a[j]]
            out[s[i], a[i]] += w * reward[mixed_radix(state_sizes, s),
                                          mixed_radix(action_sizes, a)]
    return out
