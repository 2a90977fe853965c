"""Compiled inner loops for the automaton Monte Carlo.

Every random draw is ``rng.random()`` on a Philox generator, one 64-bit output
per draw.  Per-step draw counts are padded to multiples of four so that step
``t`` of a schedule starts exactly ``t * blocks_per_step`` Philox counter
blocks into the stream (see ``circuit.CircuitRealization``).
"""
import numpy as np
from numba import njit

ALL_TO_ALL = 0
CHAIN = 1
OPEN_CHAIN = 2


def draws_per_step(geometry_code: int, n: int, k: int) -> int:
    """Padded number of uniform draws consumed by one step / period."""
    ng = n // k
    if geometry_code == ALL_TO_ALL:
        raw = (n - 1) + ng
    else:
        raw = k * ng
    return raw + (-raw) % 4


@njit(cache=True)
def sample_sector(rng, n, n_up, out):
    for a in range(n):
        out[a] = 1 if a < n_up else 0
    for a in range(n - 1, 0, -1):
        b = int(rng.random() * (a + 1))
        tmp = out[a]
        out[a] = out[b]
        out[b] = tmp


@njit(cache=True)
def apply_gate(st, sites, k):
    """Automaton gate on ``st[sites]``; returns True when the pattern flipped."""
    h = (k - 1) // 2
    if st[sites[h]] == 0:
        return False
    ones = 0
    for a in range(k):
        if a != h:
            ones += st[sites[a]]
    if 2 * ones != k - 1:
        return False
    for a in range(k):
        if a != h:
            st[sites[a]] ^= 1
    return True


@njit(cache=True)
def draw_all_to_all(rng, n, k, f, perm, active, n_draws):
    ng = n // k
    for a in range(n):
        perm[a] = a
    for a in range(n - 1, 0, -1):
        b = int(rng.random() * (a + 1))
        tmp = perm[a]
        perm[a] = perm[b]
        perm[b] = tmp
    for g in range(ng):
        active[g] = rng.random() < f
    for _ in range(n_draws - (n - 1) - ng):
        rng.random()


@njit(cache=True)
def draw_chain(rng, n, k, f, active, n_draws):
    m = active.shape[0]
    for g in range(m):
        active[g] = rng.random() < f
    for _ in range(n_draws - m):
        rng.random()


@njit(cache=True)
def _chain_sites(n, k, slot, sites):
    """Fill the window of ``slot``; returns False if it wraps around the chain."""
    ng = n // k
    layer = slot // ng
    g = slot % ng
    start = layer + g * k
    for a in range(k):
        sites[a] = (start + a) % n
    return start + k <= n


@njit(cache=True)
def _apply_step(geometry, s, s2, pair, n, k, perm, active, sites):
    ng = n // k
    if geometry == ALL_TO_ALL:
        for g in range(ng):
            if active[g]:
                for a in range(k):
                    sites[a] = perm[g * k + a]
                apply_gate(s, sites, k)
                if pair:
                    apply_gate(s2, sites, k)
    else:
        for slot in range(k * ng):
            if active[slot]:
                inside = _chain_sites(n, k, slot, sites)
                if geometry == OPEN_CHAIN and not inside:
                    continue
                apply_gate(s, sites, k)
                if pair:
                    apply_gate(s2, sites, k)


@njit(cache=True)
def _draw_step(geometry, rng, n, k, f, perm, active, n_draws):
    if geometry == ALL_TO_ALL:
        draw_all_to_all(rng, n, k, f, perm, active, n_draws)
    else:
        draw_chain(rng, n, k, f, active, n_draws)


def active_len(geometry_code: int, n: int, k: int) -> int:
    return n // k if geometry_code == ALL_TO_ALL else k * (n // k)


@njit(cache=True)
def evolve_forward(geometry, rng, s, n, k, f, n_steps, n_draws, n_active):
    """Apply ``n_steps`` consecutive steps drawn from ``rng`` to ``s`` in place."""
    perm = np.empty(n, np.int64)
    active = np.zeros(n_active, np.bool_)
    sites = np.empty(k, np.int64)
    for _ in range(n_steps):
        _draw_step(geometry, rng, n, k, f, perm, active, n_draws)
        _apply_step(geometry, s, s, False, n, k, perm, active, sites)


@njit(cache=True)
def step_arrays(geometry, rng, n, k, f, n_draws, n_active):
    """Gate tuples and activity flags of one step, in application order."""
    perm = np.empty(n, np.int64)
    active = np.zeros(n_active, np.bool_)
    _draw_step(geometry, rng, n, k, f, perm, active, n_draws)
    tuples = np.empty((n_active, k), np.int64)
    sites = np.empty(k, np.int64)
    for slot in range(n_active):
        if geometry == ALL_TO_ALL:
            for a in range(k):
                tuples[slot, a] = perm[slot * k + a]
        else:
            inside = _chain_sites(n, k, slot, sites)
            if geometry == OPEN_CHAIN and not inside:
                active[slot] = False
            for a in range(k):
                tuples[slot, a] = sites[a]
    return tuples, active


@njit(cache=True)
def pair_trajectory(geometry, rng, s, i, j, n, k, f, t_max, n_draws, n_active, pair,
                    d_excl, d_diag, d_j, auto):
    """Evolve ``s`` and ``s`` with bit ``i`` flipped under one shared realization.

    Records, for t = 0..t_max: sites differing other than ``i`` (``d_excl``),
    whether ``i`` differs (``d_diag``), whether ``j`` differs (``d_j``) and
    ``sum_x z_x(0) z_x(t)`` of the unflipped branch (``auto``).
    """
    s0 = s.copy()
    s2 = s.copy()
    if pair:
        s2[i] ^= 1
    perm = np.empty(n, np.int64)
    active = np.zeros(n_active, np.bool_)
    sites = np.empty(k, np.int64)
    for t in range(t_max + 1):
        if t > 0:
            _draw_step(geometry, rng, n, k, f, perm, active, n_draws)
            _apply_step(geometry, s, s2, pair, n, k, perm, active, sites)
        diff = 0
        same = 0
        for x in range(n):
            if s[x] != s2[x]:
                diff += 1
            if s[x] == s0[x]:
                same += 1
        di = 1 if s[i] != s2[i] else 0
        d_excl[t] = diff - di
        d_diag[t] = di
        d_j[t] = 1 if s[j] != s2[j] else 0
        auto[t] = 2 * same - n


@njit(cache=True)
def pair_profile(geometry, rng, s, i0, n, k, f, t_max, n_draws, n_active, direction, acc1, acc2):
    """Chain OTOC profile of one trajectory accumulated into ``acc1``/``acc2``.

    The per-trajectory half-value ``h(r, t)`` counts differing bits at distance
    ``r`` (both directions summed for ``direction == 0``; a single site counted
    twice otherwise) so that the OTOC sample is ``2 h``.
    """
    s2 = s.copy()
    s2[i0] ^= 1
    perm = np.empty(n, np.int64)
    active = np.zeros(n_active, np.bool_)
    sites = np.empty(k, np.int64)
    n_r = acc1.shape[1]
    for t in range(t_max + 1):
        if t > 0:
            _draw_step(geometry, rng, n, k, f, perm, active, n_draws)
            _apply_step(geometry, s, s2, True, n, k, perm, active, sites)
        for r in range(n_r):
            xr = (i0 + r) % n
            xl = (i0 - r) % n
            dr = 1 if s[xr] != s2[xr] else 0
            dl = 1 if s[xl] != s2[xl] else 0
            if direction == 0:
                h = 2 * dr if xr == xl else dr + dl
            elif direction == 1:
                h = 2 * dr
            else:
                h = 2 * dl
            acc1[t, r] += h
            acc2[t, r] += h * h
