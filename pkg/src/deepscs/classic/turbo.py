"""Rate-1/3 parallel-concatenated turbo code with iterative SOVA decoding.

Both constituents are the 8-state recursive systematic code with feedback
polynomial 13 (octal) and feedforward polynomial 15 (octal). Each constituent
is driven back to the zero state with three tail steps.

Codeword layout for a K-bit block::

    systematic (K) | parity 1 (K) | parity 2 (K) |
    tail 1 systematic (3) | tail 1 parity (3) | tail 2 systematic (3) | tail 2 parity (3)

LLR convention: positive means bit 0 is more likely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numba
import numpy as np

MEMORY = 3
N_STATES = 1 << MEMORY
TAIL_BITS = 4 * MEMORY
LLR_CLAMP = 50.0
INTERLEAVER_SEED = 0x5EED


def _trellis():
    """next_state[s, u], parity[s, u] for the (13, 15) octal RSC.

    State bits (s1, s2, s3) hold the last three register values, s1 newest;
    the state index is s1*4 + s2*2 + s3.
    """
    nxt = np.zeros((N_STATES, 2), dtype=np.int64)
    par = np.zeros((N_STATES, 2), dtype=np.int64)
    for s in range(N_STATES):
        s1, s2, s3 = (s >> 2) & 1, (s >> 1) & 1, s & 1
        for u in (0, 1):
            a = u ^ s2 ^ s3  # feedback 1 + D^2 + D^3
            par[s, u] = a ^ s1 ^ s3  # feedforward 1 + D + D^3
            nxt[s, u] = (a << 2) | (s1 << 1) | s2
    return nxt, par


NEXT_STATE, PARITY = _trellis()


def _predecessors():
    prev = np.full((N_STATES, 2), -1, dtype=np.int64)
    prev_u = np.full((N_STATES, 2), -1, dtype=np.int64)
    count = np.zeros(N_STATES, dtype=np.int64)
    for s in range(N_STATES):
        for u in (0, 1):
            ns = NEXT_STATE[s, u]
            prev[ns, count[ns]] = s
            prev_u[ns, count[ns]] = u
            count[ns] += 1
    return prev, prev_u


PREV_STATE, PREV_INPUT = _predecessors()


def load_interleaver(block_length: int = 512) -> np.ndarray:
    """The published fixed permutation for ``block_length`` (hex table shipped with the package)."""
    name = f"interleaver_{block_length}.hex"
    try:
        text = resources.files("deepscs.classic.data").joinpath(name).read_text()
    except FileNotFoundError:
        return make_interleaver(block_length)
    words = [w for line in text.splitlines() if not line.startswith("#") for w in line.split()]
    perm = np.array([int(w, 16) for w in words], dtype=np.int64)
    if perm.size != block_length:
        raise ValueError(f"{name}: expected {block_length} entries, found {perm.size}")
    return perm


def make_interleaver(block_length: int, seed: int = INTERLEAVER_SEED) -> np.ndarray:
    return np.random.Generator(np.random.Philox(seed)).permutation(block_length).astype(np.int64)


@dataclass(frozen=True)
class TurboConfig:
    block_length: int = 512
    iterations: int = 5
    extrinsic_scale: float = 0.7
    sova_window: int = 64
    interleaver: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.interleaver is None:
            object.__setattr__(self, "interleaver", load_interleaver(self.block_length)
                               if self.block_length == 512 else make_interleaver(self.block_length))
        perm = np.asarray(self.interleaver)
        if perm.shape != (self.block_length,) or not np.array_equal(np.sort(perm), np.arange(self.block_length)):
            raise ValueError("interleaver must be a permutation of 0..block_length-1")

    @property
    def coded_length(self) -> int:
        return 3 * self.block_length + TAIL_BITS

    @property
    def rate(self) -> float:
        return self.block_length / self.coded_length


def rsc_encode(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parity stream plus terminating (systematic, parity) tail bits."""
    state = 0
    parity = np.empty(bits.size, dtype=np.uint8)
    for k, u in enumerate(bits):
        parity[k] = PARITY[state, u]
        state = NEXT_STATE[state, u]
    tail_u = np.empty(MEMORY, dtype=np.uint8)
    tail_p = np.empty(MEMORY, dtype=np.uint8)
    for k in range(MEMORY):
        s2, s3 = (state >> 1) & 1, state & 1
        u = s2 ^ s3  # zero feedback input
        tail_u[k] = u
        tail_p[k] = PARITY[state, u]
        state = NEXT_STATE[state, u]
    assert state == 0
    return parity, tail_u, tail_p


def turbo_encode(info: np.ndarray, cfg: TurboConfig | None = None) -> np.ndarray:
    cfg = cfg or TurboConfig()
    info = np.asarray(info, dtype=np.uint8)
    if info.shape != (cfg.block_length,):
        raise ValueError(f"turbo_encode needs exactly {cfg.block_length} bits, got {info.size}")
    p1, t1u, t1p = rsc_encode(info)
    p2, t2u, t2p = rsc_encode(info[cfg.interleaver])
    return np.concatenate([info, p1, p2, t1u, t1p, t2u, t2p])


@numba.njit(cache=True)
def _sova(l_sys, l_par, l_apr, nxt_tab, par_tab, prev_tab, prev_u_tab, window):
    """Soft-output Viterbi over a terminated trellis; returns output LLRs of the input bits."""
    steps = l_sys.size
    n_states = nxt_tab.shape[0]
    neg = -1e30
    metric = np.full(n_states, neg)
    metric[0] = 0.0
    surv = np.zeros((steps, n_states), dtype=np.int8)  # which predecessor slot survived
    delta = np.zeros((steps, n_states))
    new = np.empty(n_states)
    for t in range(steps):
        for ns in range(n_states):
            best = neg
            second = neg
            slot = 0
            for j in range(2):
                ps = prev_tab[ns, j]
                u = prev_u_tab[ns, j]
                x = 1.0 - 2.0 * u
                xp = 1.0 - 2.0 * par_tab[ps, u]
                m = metric[ps] + 0.5 * x * (l_sys[t] + l_apr[t]) + 0.5 * xp * l_par[t]
                if m > best:
                    second = best
                    best = m
                    slot = j
                else:
                    second = max(second, m)
            new[ns] = best
            surv[t, ns] = slot
            delta[t, ns] = best - second if second > neg / 2 else 1e30
        for ns in range(n_states):
            metric[ns] = new[ns]

    # maximum-likelihood path, ending in the zero state
    states = np.zeros(steps + 1, dtype=np.int64)
    u_hat = np.zeros(steps, dtype=np.int64)
    s = 0
    for t in range(steps - 1, -1, -1):
        j = surv[t, s]
        u_hat[t] = prev_u_tab[s, j]
        s = prev_tab[s, j]
        states[t] = s
    states[steps] = 0

    rel = np.full(steps, 1e30)
    for t in range(steps):
        s_next = states[t + 1]
        d = delta[t, s_next]
        if d < rel[t]:
            rel[t] = d
        # competitor enters s_next through the other slot and is traced back
        j = 1 - surv[t, s_next]
        cs = prev_tab[s_next, j]
        lo = max(0, t - window)
        for k in range(t - 1, lo - 1, -1):
            if cs == states[k + 1]:
                break  # merged with the ML path
            jj = surv[k, cs]
            cu = prev_u_tab[cs, jj]
            if cu != u_hat[k] and d < rel[k]:
                rel[k] = d
            cs = prev_tab[cs, jj]
    out = np.empty(steps)
    for t in range(steps):
        r = min(rel[t], 50.0)
        out[t] = r if u_hat[t] == 0 else -r
    return out


@numba.njit(cache=True)
def _turbo_decode_blocks(llrs, perm, iterations, scale, window, nxt_tab, par_tab, prev_tab, prev_u_tab):
    n_blocks = llrs.shape[0]
    k = perm.size
    m = 3
    out_bits = np.zeros((n_blocks, k), dtype=np.uint8)
    for b in range(n_blocks):
        y = llrs[b]
        sys = y[0:k]
        p1 = y[k:2 * k]
        p2 = y[2 * k:3 * k]
        base = 3 * k
        ls1 = np.concatenate((sys, y[base:base + m]))
        lp1 = np.concatenate((p1, y[base + m:base + 2 * m]))
        sys_i = np.empty(k)
        for i in range(k):
            sys_i[i] = sys[perm[i]]
        ls2 = np.concatenate((sys_i, y[base + 2 * m:base + 3 * m]))
        lp2 = np.concatenate((p2, y[base + 3 * m:base + 4 * m]))
        apr1 = np.zeros(k + m)
        apr2 = np.zeros(k + m)
        final = np.zeros(k)
        for it in range(iterations):
            l1 = _sova(ls1, lp1, apr1, nxt_tab, par_tab, prev_tab, prev_u_tab, window)
            for i in range(k):
                # extrinsic of decoder 1, interleaved into decoder 2's a-priori
                apr2[i] = scale * (l1[perm[i]] - ls1[perm[i]] - apr1[perm[i]])
            l2 = _sova(ls2, lp2, apr2, nxt_tab, par_tab, prev_tab, prev_u_tab, window)
            for i in range(k):
                e2 = scale * (l2[i] - ls2[i] - apr2[i])
                apr1[perm[i]] = e2
                final[perm[i]] = l2[i]
            for i in range(k):
                apr1[i] = min(max(apr1[i], -50.0), 50.0)
                apr2[i] = min(max(apr2[i], -50.0), 50.0)
        for i in range(k):
            out_bits[b, i] = 1 if final[i] < 0 else 0
    return out_bits


def clamp_llr(llrs: np.ndarray) -> np.ndarray:
    return np.clip(np.nan_to_num(np.asarray(llrs, dtype=np.float64), nan=0.0), -LLR_CLAMP, LLR_CLAMP)


def turbo_decode_blocks(llrs: np.ndarray, cfg: TurboConfig | None = None) -> np.ndarray:
    """Decode an (n_blocks, coded_length) LLR array into (n_blocks, block_length) bits."""
    cfg = cfg or TurboConfig()
    llrs = clamp_llr(np.atleast_2d(llrs))
    if llrs.shape[1] != cfg.coded_length:
        raise ValueError(f"expected {cfg.coded_length} LLRs per block, got {llrs.shape[1]}")
    return _turbo_decode_blocks(np.ascontiguousarray(llrs), np.ascontiguousarray(cfg.interleaver, dtype=np.int64),
                                cfg.iterations, cfg.extrinsic_scale, cfg.sova_window,
                                NEXT_STATE, PARITY, PREV_STATE, PREV_INPUT)


def turbo_decode(llrs: np.ndarray, cfg: TurboConfig | None = None) -> np.ndarray:
    cfg = cfg or TurboConfig()
    llrs = np.asarray(llrs)
    if llrs.shape != (cfg.coded_length,):
        raise ValueError(f"expected {cfg.coded_length} LLRs, got {llrs.size}")
    return turbo_decode_blocks(llrs[None, :], cfg)[0]
