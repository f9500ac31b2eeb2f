"""Gradient search for transmit-side perturbations that help a fixed decoder.

The search perturbs the modulated all-zero codeword, descending the decoding
loss through channel + demapper + decoder on batches of noise realizations;
a candidate step is kept only if it improves the measured batch error rate
at constant transmit power. Code linearity then lets the same vector be
applied to any codeword through a per-symbol sign/phase adaptation.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, replace

import numpy as np

from . import bp, channel, modem

POWER = 1.0  # average power constraint per symbol

ATTACK_FILE_VERSION = 1


@dataclass(frozen=True)
class AttackVector:
    """A perturbation of the modulated all-zero codeword, plus the metadata
    needed to reproduce the search (qam4 vectors hold 2N interleaved
    re/im coordinates)."""

    a: np.ndarray
    code_id: str
    scheme: str
    n: int                  # code bits
    n_symbols: int
    search_sigma: float
    seed: int
    approach: str
    accepted_iters: int
    created: str = ""

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise ValueError("attack vector entries must be finite")
        object.__setattr__(self, "a", a)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.a)


@dataclass(frozen=True)
class SearchConfig:
    batch_size: int = 2000
    accepted_iters: int = 50          # I: budget of accepted updates
    max_trials: int | None = None     # default 20 * accepted_iters
    sigma: float | None = None        # None: caller resolves (see find_search_sigma)
    scheduler: str = "constant"       # constant | exp_decay | step
    epsilon0: float | None = None     # None: calibrated from the first batch gradient
    decay: float = 0.99
    step_len: int = 10
    accept: str = "ber"               # ber | bler | both
    loss_mode: str | None = None      # None: use the decoder config's mode
    runs: int = 1
    cluster: str = "none"             # none | kmeans | agglomerative
    cluster_k: int = 3
    linkage: str = "ward"             # ward | complete
    approach: str = "custom"

    def __post_init__(self):
        if self.batch_size < 1 or self.accepted_iters < 1:
            raise ValueError("batch size and accepted-iteration budget must be >= 1")
        if self.epsilon0 is not None and self.epsilon0 <= 0:
            raise ValueError("epsilon0 must be positive")
        if self.scheduler not in ("constant", "exp_decay", "step"):
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.accept not in ("ber", "bler", "both"):
            raise ValueError(f"unknown accept criterion {self.accept!r}")
        if self.cluster not in ("none", "kmeans", "agglomerative"):
            raise ValueError(f"unknown cluster method {self.cluster!r}")
        if self.linkage not in ("ward", "complete"):
            raise ValueError(f"unknown linkage {self.linkage!r}")
        if self.max_trials is not None and self.max_trials < self.accepted_iters:
            raise ValueError("max_trials must be >= accepted_iters")

    @property
    def trial_cap(self) -> int:
        return self.max_trials if self.max_trials is not None else 20 * self.accepted_iters


def approach_config(number: int, **overrides) -> SearchConfig:
    """Preset search shapes: (1) big batch, few iterations; (2) long decayed
    descent; (3) many short runs + k-means; (4) many tiny runs + ward."""
    presets = {
        1: dict(batch_size=2000, accepted_iters=50),
        2: dict(batch_size=200, accepted_iters=2000, scheduler="exp_decay", decay=0.999),
        3: dict(batch_size=20, accepted_iters=30, runs=2000, cluster="kmeans", cluster_k=3),
        4: dict(batch_size=2000, accepted_iters=3, runs=200, cluster="agglomerative",
                linkage="ward", cluster_k=4),
    }
    if number not in presets:
        raise ValueError("approach must be 1, 2, 3 or 4")
    params = presets[number] | overrides
    return SearchConfig(approach=str(number), **params)


EPSILON_GRAD_SCALE = 0.07  # auto epsilon0 = this / mean |gradient| of the first batch


def gradient_scheduler(i: int, config: SearchConfig) -> float:
    """Step size for accepted-iteration index i; always positive."""
    if i < 0:
        raise ValueError("iteration index must be >= 0")
    if config.epsilon0 is None:
        raise ValueError("epsilon0 is unresolved; search_attack calibrates it first")
    if config.scheduler == "constant":
        return config.epsilon0
    if config.scheduler == "exp_decay":
        return config.epsilon0 * config.decay ** i
    return config.epsilon0 * 0.5 ** (i // config.step_len)


def normalize_power(s, power: float = POWER, coords_per_symbol: int = 1):
    """Scale s so that its squared norm equals n_symbols * power exactly.

    Returns (scaled, C) with C = sqrt(N P) / ||s||.
    """
    s = np.asarray(s, dtype=np.float64)
    norm = float(np.linalg.norm(s))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    n_symbols = s.shape[-1] // coords_per_symbol
    c = np.sqrt(n_symbols * power) / norm
    return c * s, c


def apply_attack(s, attack, constellation: modem.Constellation) -> np.ndarray:
    """Adapt an all-zero-codeword perturbation to arbitrary modulated words.

    out_i = s_i + s_i a_i / s0 per symbol (complex multiplication for qam4),
    then renormalized to the power budget. For BPSK and for the all-zero
    word this reduces to s + s * a, and the renormalization constant is 1
    whenever the perturbed all-zero word already meets the budget.
    """
    if isinstance(attack, AttackVector):
        if attack.scheme != constellation.scheme:
            raise ValueError(
                f"attack searched for scheme {attack.scheme!r}, got {constellation.scheme!r}")
        a = attack.a
    else:
        a = np.asarray(attack, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if a.shape[-1] != s.shape[-1]:
        raise ValueError(f"attack length {a.shape[-1]} does not match symbols {s.shape[-1]}")
    cps = constellation.coords_per_symbol
    if cps == 1:
        out = s + s * a
    else:
        sc = s[..., 0::2] + 1j * s[..., 1::2]
        ac = a[0::2] + 1j * a[1::2]
        s0 = complex(constellation.s0[0], constellation.s0[1])
        oc = sc + sc * ac / s0
        out = np.empty_like(s)
        out[..., 0::2] = oc.real
        out[..., 1::2] = oc.imag
    n_symbols = s.shape[-1] // cps
    norms = np.linalg.norm(out, axis=-1, keepdims=True)
    return out * (np.sqrt(n_symbols * POWER) / norms)


# ---------------------------------------------------------------------------
# the search itself
# ---------------------------------------------------------------------------

def _batch_rates(soft_final, code):
    """Message-bit BER and frame BLER of a batch decoded against all-zero."""
    hard = (soft_final < 0).astype(np.uint8)
    msg = code.message_from_codeword(hard)
    errs = msg != 0
    ber = float(errs.mean())
    bler = float(np.any(errs, axis=-1).mean())
    return ber, bler


def _improves(criterion, ber_new, bler_new, ber_old, bler_old) -> bool:
    if criterion == "ber":
        return ber_new < ber_old
    if criterion == "bler":
        return bler_new < bler_old
    return ber_new < ber_old and bler_new < bler_old


def search_attack(code, decoder: bp.DecoderConfig, scheme: str, config: SearchConfig,
                  seed: int, on_trial=None) -> AttackVector:
    """Iterative gradient search on the all-zero codeword over an AWGN channel.

    Per trial: draw a batch of noise realizations at the search sigma,
    decode, take the mean over per-sample gradients of the decoding loss,
    step against it, re-decode the same noise with the renormalized
    candidate, and accept only if the configured batch criterion strictly
    improves. Stops after the accepted-update budget or the trial cap.
    """
    if config.sigma is None:
        raise ValueError("search sigma is unresolved; pass one or use find_search_sigma")
    if decoder.iters < 1:
        raise ValueError("the search needs a decoder with at least one iteration")
    const = modem.get_constellation(scheme)
    loss_mode = config.loss_mode or decoder.loss_mode
    graph = bp.TannerGraph(code.H)
    target = np.zeros(code.n)
    side = modem.ChannelSide(sigma=config.sigma)

    s_base = modem.modulate(np.zeros(code.n, dtype=np.uint8), const)
    n_real = s_base.shape[0]
    rng = channel.FrameRng(seed)

    def batch_gradient(s, z):
        out = bp.bp_forward(modem.demodulate_llr(s + z, side, const), graph,
                            decoder.iters, decoder.clamp)
        if not np.all(np.isfinite(out.soft[-1])):
            raise RuntimeError("decoder produced non-finite soft output during the search")
        dj_dllr = bp.bp_backward(out.tape, target, loss_mode)
        return out, modem.demodulate_adjoint(dj_dllr, side, const)

    if config.epsilon0 is None:
        # calibrate the step size against this decoder's gradient scale
        z = config.sigma * rng.frame(0, channel.STREAM_PROBE).standard_normal(
            (config.batch_size, n_real))
        _, probe = batch_gradient(s_base, z)
        scale = float(np.mean(np.abs(probe.mean(axis=0))))
        config = replace(config, epsilon0=EPSILON_GRAD_SCALE / max(scale, 1e-12))

    s_cur = s_base.copy()
    accepted = 0
    trials = 0
    while accepted < config.accepted_iters and trials < config.trial_cap:
        eps = gradient_scheduler(accepted, config)
        z = config.sigma * rng.frame(trials, channel.STREAM_SEARCH).standard_normal(
            (config.batch_size, n_real))
        out, dj_ds = batch_gradient(s_cur, z)
        ber0, bler0 = _batch_rates(out.soft[-1], code)
        step = -eps * dj_ds.mean(axis=0)
        # evaluate the candidate exactly as it would be transmitted: at the
        # power budget, so acceptance can never come from power inflation
        s_cand, _ = normalize_power(s_cur + step, POWER, const.coords_per_symbol)
        out2 = bp.bp_forward(modem.demodulate_llr(s_cand + z, side, const), graph,
                             decoder.iters, decoder.clamp, record_tape=False)
        ber1, bler1 = _batch_rates(out2.soft[-1], code)
        ok = _improves(config.accept, ber1, bler1, ber0, bler0)
        trials += 1
        if ok:
            accepted += 1
            s_cur = s_cand
        if on_trial is not None:
            on_trial(dict(trial=trials, epsilon=eps, accepted=ok,
                          ber=ber0, ber_new=ber1, bler=bler0, bler_new=bler1,
                          accepted_total=accepted))

    return AttackVector(
        a=s_cur - s_base, code_id=code.name, scheme=scheme, n=code.n,
        n_symbols=n_real // const.coords_per_symbol, search_sigma=config.sigma,
        seed=seed, approach=config.approach, accepted_iters=accepted,
        created=_dt.datetime.now(_dt.timezone.utc).isoformat())


def run_regime(code, decoder: bp.DecoderConfig, scheme: str, config: SearchConfig,
               seed: int, on_trial=None) -> list[AttackVector]:
    """Repeat the search with per-run derived seeds; keeps zero results too."""
    if config.runs < 2:
        raise ValueError("run_regime needs runs >= 2; call search_attack directly")
    vectors = []
    for run in range(config.runs):
        run_cfg = replace(config, approach=f"{config.approach}:run{run}")
        vectors.append(search_attack(code, decoder, scheme, run_cfg,
                                     seed=channel.child_seed(seed, run), on_trial=on_trial))
    return vectors


# ---------------------------------------------------------------------------
# clustering of attack vectors from repeated runs
# ---------------------------------------------------------------------------

def _kmeans(X, k, seed=0, iters=100):
    """Lloyd's algorithm with deterministic farthest-point seeding."""
    rng = np.random.default_rng(seed)
    centroids = [X[int(rng.integers(len(X)))]]
    for _ in range(k - 1):
        d = np.min([np.sum((X - c) ** 2, axis=1) for c in centroids], axis=0)
        centroids.append(X[int(np.argmax(d))])
    centroids = np.array(centroids)
    labels = None
    for _ in range(iters):
        d = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return centroids


def _agglomerative(X, k, linkage):
    """Bottom-up merging under ward or complete linkage until k clusters."""
    clusters = [[i] for i in range(len(X))]
    n = len(X)
    # pairwise dissimilarity; ward uses the within-variance increase
    diff = X[:, None, :] - X[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    D = 0.5 * d2 if linkage == "ward" else np.sqrt(d2)
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    alive = list(range(n))
    while len(alive) > k:
        sub = D[np.ix_(alive, alive)]
        flat = int(np.argmin(sub))
        i, j = sorted((alive[flat // len(alive)], alive[flat % len(alive)]))
        # Lance-Williams updates
        for h in alive:
            if h in (i, j):
                continue
            if linkage == "complete":
                D[i, h] = D[h, i] = max(D[i, h], D[j, h])
            else:
                si, sj, sh = sizes[i], sizes[j], sizes[h]
                D[i, h] = D[h, i] = ((si + sh) * D[i, h] + (sj + sh) * D[j, h]
                                     - sh * D[i, j]) / (si + sj + sh)
        clusters[i] = clusters[i] + clusters[j]
        sizes[i] += sizes[j]
        alive.remove(j)
        D[j, :] = np.inf
        D[:, j] = np.inf
    return np.array([X[clusters[i]].mean(axis=0) for i in alive])


def cluster_attacks(vectors: list[AttackVector], method: str, k: int,
                    seed: int = 0, linkage: str = "ward") -> list[AttackVector]:
    """Cluster nonzero attack vectors and return per-cluster mean vectors.

    Zero vectors from failed runs are dropped first, since they drag
    centroids toward the no-op.
    """
    nonzero = [v for v in vectors if not v.is_zero]
    if len(nonzero) < k:
        raise ValueError(f"need at least k={k} nonzero vectors, have {len(nonzero)}")
    X = np.stack([v.a for v in nonzero])
    if method == "kmeans":
        centroids = _kmeans(X, k, seed=seed)
    elif method == "agglomerative":
        centroids = _agglomerative(X, k, linkage)
    else:
        raise ValueError(f"unknown cluster method {method!r}")
    proto = nonzero[0]
    return [replace(proto, a=c, approach=f"{method}-centroid-{i}",
                    accepted_iters=0) for i, c in enumerate(centroids)]


def select_best(candidates: list[AttackVector], code, decoder: bp.DecoderConfig,
                ebn0_db: float, frames: int, seed: int) -> AttackVector:
    """Monte Carlo validation of each candidate at a fixed Eb/N0.

    Returns the candidate with the lowest BER (ties: lowest BLER, then
    lowest index). All candidates share the validation noise seed.
    """
    from . import montecarlo  # deferred: montecarlo uses apply_attack

    if not candidates:
        raise ValueError("need at least one candidate")
    best_idx, best_key = 0, None
    for i, cand in enumerate(candidates):
        res = montecarlo.run_point(code, decoder, cand.scheme, ebn0_db=ebn0_db,
                                   frames=frames, seed=seed, attack=cand)
        key = (res.ber, res.bler, i)
        if best_key is None or key < best_key:
            best_idx, best_key = i, key
    return candidates[best_idx]


def find_search_sigma(code, decoder: bp.DecoderConfig, scheme: str, seed: int,
                      target_bler: float = 0.3, frames: int = 600,
                      lo: float = 0.05, hi: float = 4.0, steps: int = 14) -> float:
    """Bisect for the noise level where baseline BLER is near the target.

    Useful perturbations only emerge where the decoder actually corrects
    errors, empirically around BLER 0.1-0.5, so the default target is 0.3.
    Deterministic for a fixed seed.
    """
    from . import montecarlo

    const = modem.get_constellation(scheme)

    def bler_at(sigma):
        ebn0 = channel.sigma_to_ebn0(sigma, code.rate, const.bits_per_symbol)
        res = montecarlo.run_point(code, decoder, scheme, ebn0_db=ebn0, frames=frames,
                                   seed=channel.child_seed(seed, 1000), message_source="all_zero")
        return res.bler

    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if bler_at(mid) > target_bler:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_attack(attack: AttackVector, path) -> None:
    with open(path, "w") as fh:
        json.dump(attack_record(attack), fh, indent=1)
        fh.write("\n")


def attack_record(attack: AttackVector) -> dict:
    return {
        "version": ATTACK_FILE_VERSION,
        "code_id": attack.code_id,
        "scheme": attack.scheme,
        "n": attack.n,
        "N": attack.n_symbols,
        "a": [float(v) for v in attack.a],
        "search_sigma": attack.search_sigma,
        "seed": attack.seed,
        "approach": attack.approach,
        "accepted_iters": attack.accepted_iters,
        "created": attack.created,
    }


def load_attack(path) -> AttackVector:
    """Read an attack record; unknown fields are ignored."""
    with open(path) as fh:
        raw = json.load(fh)
    try:
        return AttackVector(
            a=np.asarray(raw["a"], dtype=np.float64),
            code_id=raw["code_id"], scheme=raw["scheme"], n=int(raw["n"]),
            n_symbols=int(raw["N"]), search_sigma=float(raw["search_sigma"]),
            seed=int(raw["seed"]), approach=str(raw["approach"]),
            accepted_iters=int(raw["accepted_iters"]), created=str(raw.get("created", "")))
    except KeyError as missing:
        raise ValueError(f"attack file is missing field {missing}") from None
