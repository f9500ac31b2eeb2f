"""Differentiable sum-product decoding on Tanner graphs.

The forward pass runs a flooding schedule and records pre-clamp messages on
a tape; the backward pass replays the tape in reverse and returns the exact
gradient of the decoding loss with respect to the input LLRs. Message
clamping differentiates as the identity inside the bound and zero outside.

All internals are batched: a decode over B frames runs as (B, ...) arrays,
and every lane's result is independent of which other lanes share the
batch (elementwise ops plus reductions along per-lane axes only), which is
what makes Monte Carlo counts reproducible under any worker split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gf2

DEFAULT_CLAMP = 20.0
_LOG_PROB_FLOOR = float(np.log(1e-12))


@dataclass(frozen=True)
class DecoderConfig:
    iters: int
    clamp: float = DEFAULT_CLAMP
    loss_mode: str = "final"  # "final" | "multiloss"

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iteration count must be >= 0")
        if self.clamp <= 0:
            raise ValueError("clamp must be positive")
        if self.loss_mode not in ("final", "multiloss"):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")


class TannerGraph:
    """Bipartite check/variable adjacency of a parity-check matrix.

    Edges are indexed in the row-major order of H's nonzeros. For vectorized
    node updates, each side keeps a (nodes, max_degree) table of edge ids
    padded with the sentinel `n_edges`, which points at a neutral pad slot
    appended to per-edge arrays.
    """

    def __init__(self, H):
        H = gf2.as_bitmatrix(H)
        self.H = H
        self.n_check, self.n_var = H.shape
        check_idx, var_idx = np.nonzero(H)
        self.edge_check = check_idx.astype(np.int64)
        self.edge_var = var_idx.astype(np.int64)
        self.n_edges = int(len(self.edge_check))
        self.check_edges = _group_table(self.edge_check, self.n_check, self.n_edges)
        self.var_edges = _group_table(self.edge_var, self.n_var, self.n_edges)
        # per-edge weight hook for trainable variants; constant 1 here
        self.edge_weights = np.ones(self.n_edges)

    def syndrome_ok(self, hard_bits) -> np.ndarray:
        """True where H x = 0; accepts (n,) or (B, n) bit arrays."""
        x = np.asarray(hard_bits, dtype=np.int64)
        return ~np.any((x @ self.H.T.astype(np.int64)) & 1, axis=-1)


def _group_table(owner, n_groups, sentinel) -> np.ndarray:
    counts = np.bincount(owner, minlength=n_groups) if len(owner) else np.zeros(n_groups, dtype=np.int64)
    width = max(int(counts.max()) if counts.size else 0, 1)
    table = np.full((n_groups, width), sentinel, dtype=np.int64)
    if len(owner):
        order = np.argsort(owner, kind="stable")
        sorted_owner = owner[order]
        starts = np.searchsorted(sorted_owner, np.arange(n_groups))
        slot = np.arange(len(owner)) - starts[sorted_owner]
        table[sorted_owner, slot] = order
    return table


@dataclass
class BpTape:
    """Per-iteration message record enabling the reverse pass.

    `v2c_pre` / `c2v_pre` hold the pre-clamp variable-to-check and
    check-to-variable messages per iteration; `soft` the per-iteration
    output LLRs. Entries are appended during the forward pass only.
    """

    graph: TannerGraph
    clamp: float
    input_llr: np.ndarray        # (B, n)
    v2c_pre: list[np.ndarray]    # T x (B, E)
    c2v_pre: list[np.ndarray]    # T x (B, E)
    soft: list[np.ndarray]       # T x (B, n)
    squeeze: bool


@dataclass
class BpOutput:
    soft: np.ndarray             # (iters, n) or (iters, B, n)
    hard: np.ndarray             # final-iteration bit decisions
    syndrome_ok: np.ndarray | bool
    tape: BpTape | None
    iterations: int


def _gather(per_edge, table, pad_value):
    """(B, E) edge values -> (B, nodes, degree) slots, pads filled with pad_value."""
    B = per_edge.shape[0]
    padded = np.concatenate([per_edge, np.full((B, 1), pad_value)], axis=1)
    return padded[:, table]

def _scatter(per_slot, table, n_edges):
    """Inverse of _gather: slot values back to (B, E); pad slots are dropped."""
    B = per_slot.shape[0]
    out = np.empty((B, n_edges + 1))
    out[:, table.reshape(-1)] = per_slot.reshape(B, -1)
    return out[:, :n_edges]

def _sum_per_var(per_edge, graph):
    return _gather(per_edge, graph.var_edges, 0.0).sum(axis=-1)


def _check_internals(m_clamped, graph):
    """Shared check-node quantities: tanh slots, exclusion prefix/suffix, products.

    Exclusion products are built from prefix and suffix cumulative products,
    never by division, so zero messages are handled exactly.
    """
    t = np.tanh(0.5 * m_clamped)
    tg = _gather(t, graph.check_edges, 1.0)
    ones = np.ones(tg.shape[:-1] + (1,))
    cp = np.cumprod(tg, axis=-1)
    pre = np.concatenate([ones, cp[..., :-1]], axis=-1)
    rcp = np.cumprod(tg[..., ::-1], axis=-1)[..., ::-1]
    suf = np.concatenate([rcp[..., 1:], ones], axis=-1)
    return t, tg, pre, suf, pre * suf


def _check_messages(m_clamped, graph):
    _, _, _, _, prod = _check_internals(m_clamped, graph)
    p_edge = _scatter(prod, graph.check_edges, graph.n_edges)
    with np.errstate(divide="ignore"):
        return 2.0 * np.arctanh(p_edge)  # +-inf only for degree-1 checks


def bp_forward(llr, graph: TannerGraph, iters: int, clamp: float = DEFAULT_CLAMP,
               early_stop: bool = False, record_tape: bool = True) -> BpOutput:
    """Sum-product decoding with a flooding schedule.

    Per iteration: check-to-variable messages 2 atanh(prod tanh(m/2)) over
    the other edges of the check, output LLR = input + sum of incoming
    check messages, and next variable-to-check messages = output minus the
    edge's own incoming message. Messages are clamped to [-clamp, clamp].

    With `early_stop`, a frame's messages freeze once its hard decision
    satisfies the syndrome, so its result equals a standalone early-stopped
    decode regardless of batch composition; no tape is recorded. Recording
    a tape (for gradients) and early stopping are mutually exclusive.
    """
    L = np.asarray(llr, dtype=np.float64)
    squeeze = L.ndim == 1
    if squeeze:
        L = L[None, :]
    if L.ndim != 2 or L.shape[1] != graph.n_var:
        raise ValueError(f"LLR shape {L.shape} does not match {graph.n_var} variables")
    if not np.all(np.isfinite(L)):
        raise ValueError("input LLRs must be finite")
    if iters < 1:
        raise ValueError("iteration count must be >= 1")
    if clamp <= 0:
        raise ValueError("clamp must be positive")
    if early_stop and record_tape:
        raise ValueError("early stopping would make the tape input-dependent; disable one")

    B = L.shape[0]
    evar = graph.edge_var
    tape = BpTape(graph, clamp, L.copy(), [], [], [], squeeze) if record_tape else None

    v2c_pre = L[:, evar]
    m = np.clip(v2c_pre, -clamp, clamp)
    active = np.ones(B, dtype=bool)
    soft_steps = []
    iterations = 0
    for it in range(iters):
        u = _check_messages(m, graph)
        c2v = np.clip(u, -clamp, clamp)
        marg = L + _sum_per_var(c2v, graph)
        soft_steps.append(marg)
        iterations = it + 1
        if record_tape:
            tape.v2c_pre.append(v2c_pre)
            tape.c2v_pre.append(u)
            tape.soft.append(marg)
        if early_stop:
            active = active & ~graph.syndrome_ok(marg < 0)
            if not active.any():
                break
        if it + 1 < iters:
            v2c_pre = marg[:, evar] - c2v
            nxt = np.clip(v2c_pre, -clamp, clamp)
            m = np.where(active[:, None], nxt, m) if early_stop else nxt

    soft = np.stack(soft_steps)
    hard = (soft[-1] < 0).astype(np.uint8)
    ok = graph.syndrome_ok(hard)
    if squeeze:
        return BpOutput(soft[:, 0, :], hard[0], bool(ok[0]), tape, iterations)
    return BpOutput(soft, hard, ok, tape, iterations)


# ---------------------------------------------------------------------------
# loss and reverse pass
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _bce(soft, target_bits):
    """Binary cross-entropy per lane under the L > 0 => bit 0 convention.

    Probabilities are floored at 1e-12 before the log, matching the
    gradient's flat region outside the floor.
    """
    x = target_bits
    logp1 = -np.logaddexp(0.0, soft)    # log Pr(bit = 1)
    logp0 = -np.logaddexp(0.0, -soft)   # log Pr(bit = 0)
    terms = x * np.maximum(logp1, _LOG_PROB_FLOOR) + (1.0 - x) * np.maximum(logp0, _LOG_PROB_FLOOR)
    return -terms.sum(axis=-1)


def _bce_grad(soft, target_bits):
    x = target_bits
    logp1 = -np.logaddexp(0.0, soft)
    logp0 = -np.logaddexp(0.0, -soft)
    g1 = x * _sigmoid(soft) * (logp1 > _LOG_PROB_FLOOR)
    g0 = (1.0 - x) * _sigmoid(-soft) * (logp0 > _LOG_PROB_FLOOR)
    return g1 - g0


def _target_array(target, n_var):
    x = np.asarray(target, dtype=np.float64)
    if x.shape[-1] != n_var:
        raise ValueError(f"target length {x.shape[-1]} does not match {n_var} variables")
    return x


def bp_loss(out: BpOutput, target, mode: str = "final"):
    """BCE between the decoder's soft output and a target codeword.

    "final" scores the last iteration; "multiloss" averages the BCE across
    iterations. Returns a scalar for single-frame input, else (B,).
    """
    if mode not in ("final", "multiloss"):
        raise ValueError(f"unknown loss mode {mode!r}")
    soft = out.soft
    squeeze = soft.ndim == 2
    x = _target_array(target, soft.shape[-1])
    if mode == "final":
        loss = _bce(soft[-1], x)
    else:
        loss = np.mean([_bce(s, x) for s in soft], axis=0)
    return float(loss) if squeeze else loss


def bp_backward(tape: BpTape, target, mode: str = "final") -> np.ndarray:
    """Exact gradient of bp_loss(bp_forward(L), target) with respect to L.

    Replays the taped messages in reverse. The atanh/tanh adjoints reuse
    the forward's exclusion-product structure; the double-exclusion sums
    needed for d(loss)/d(tanh term) are built with two linear scans along
    each check's edge list, again without division.
    """
    if tape is None:
        raise ValueError("forward pass was run without a tape")
    if mode not in ("final", "multiloss"):
        raise ValueError(f"unknown loss mode {mode!r}")
    graph, clamp = tape.graph, tape.clamp
    L = tape.input_llr
    B, n = L.shape
    E = graph.n_edges
    T = len(tape.soft)
    evar = graph.edge_var
    x = _target_array(target, n)
    if x.ndim == 2 and x.shape[0] != B:
        raise ValueError("target batch size does not match the tape")

    dL = np.zeros((B, n))
    d_m_next = None  # gradient w.r.t. the clamped v2c messages of iteration t+1
    for t in range(T - 1, -1, -1):
        if mode == "final":
            d_out = _bce_grad(tape.soft[t], x) if t == T - 1 else np.zeros((B, n))
        else:
            d_out = _bce_grad(tape.soft[t], x) / T
        if d_m_next is not None:
            # w_t = marg_t[edge var] - c2v_t fed iteration t+1 through a clamp
            d_w = d_m_next * (np.abs(tape.v2c_pre[t + 1]) <= clamp)
            d_out = d_out + _sum_per_var(d_w, graph)
            d_c2v = -d_w
        else:
            d_c2v = np.zeros((B, E))
        d_c2v = d_c2v + d_out[:, evar]
        dL += d_out

        d_u = d_c2v * (np.abs(tape.c2v_pre[t]) <= clamp)
        m_t = np.clip(tape.v2c_pre[t], -clamp, clamp)
        t_e, tg, pre, suf, prod = _check_internals(m_t, graph)
        denom = 1.0 - prod * prod
        safe = np.where(denom > 0.0, denom, 1.0)
        q = _gather(d_u, graph.check_edges, 0.0) * 2.0 / safe  # d loss / d exclusion product

        # g_i = sum_{j != i} q_j * prod_{l != i, j} t_l via left and right scans
        width = tg.shape[-1]
        left = np.zeros_like(q)
        for i in range(1, width):
            left[..., i] = left[..., i - 1] * tg[..., i - 1] + q[..., i - 1] * pre[..., i - 1]
        right = np.zeros_like(q)
        for i in range(width - 2, -1, -1):
            right[..., i] = right[..., i + 1] * tg[..., i + 1] + q[..., i + 1] * suf[..., i + 1]
        d_t = _scatter(suf * left + pre * right, graph.check_edges, E)

        d_m = d_t * 0.5 * (1.0 - t_e * t_e)
        d_v2c_pre = d_m * (np.abs(tape.v2c_pre[t]) <= clamp)
        if t == 0:
            dL += _sum_per_var(d_v2c_pre, graph)  # iteration-0 messages copy L
        else:
            d_m_next = d_v2c_pre

    return dL[0] if tape.squeeze else dL


def finite_difference(func, x, h: float = 1e-4, coords=None) -> np.ndarray:
    """Central finite differences of a scalar function at the given coordinates.

    Independent of any analytic gradient path; used as the oracle for
    adjoint checks. Returns the estimates for `coords` (default: all).
    """
    x = np.asarray(x, dtype=np.float64)
    coords = list(range(x.size)) if coords is None else list(coords)
    flat = x.reshape(-1)
    grad = np.zeros(len(coords))
    for out_i, i in enumerate(coords):
        bump = np.zeros_like(flat)
        bump[i] = h
        grad[out_i] = (func((flat + bump).reshape(x.shape)) -
                       func((flat - bump).reshape(x.shape))) / (2.0 * h)
    return grad
