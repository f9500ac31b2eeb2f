"""Seeded Monte Carlo measurement of BER/BLER with confidence intervals.

Frames are simulated in fixed-size chunks whose random streams derive from
(seed, frame index) alone, so exact integer error counts are identical for
any worker count or chunk assignment. BER is counted on message bits.
"""

from __future__ import annotations

import csv
import hashlib
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import attack as attack_mod
from . import bp, channel, gf2, modem

CHUNK_FRAMES = 512
Z95 = 1.96


@dataclass(frozen=True)
class MonteCarloResult:
    frames: int
    bit_errors: int
    block_errors: int
    ber: float
    bler: float
    ci95_ber: float
    ci95_bler: float
    ebn0_db: float
    config_digest: str
    seed: int
    attacked: bool = False
    code_id: str = ""
    decoder: str = "bp"
    iters: int = 0
    scheme: str = "bpsk"
    channel_kind: str = "awgn"


def _digest(*parts) -> str:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode())
    return h.hexdigest()[:12]


def _result(frames, bit_errors, block_errors, k, meta) -> MonteCarloResult:
    ber = bit_errors / (frames * k)
    bler = block_errors / frames
    return MonteCarloResult(
        frames=frames, bit_errors=bit_errors, block_errors=block_errors,
        ber=ber, bler=bler,
        ci95_ber=float(Z95 * np.sqrt(ber * (1.0 - ber) / (frames * k))),
        ci95_bler=float(Z95 * np.sqrt(bler * (1.0 - bler) / frames)),
        **meta)


def _chunk_counts(code, decoder, scheme, params, attack_a, message_source,
                  seed, start, stop):
    """Exact (frames, bit errors, block errors) for frames [start, stop)."""
    const = modem.get_constellation(scheme)
    graph = bp.TannerGraph(code.H)
    rng = channel.FrameRng(seed)
    cps = const.coords_per_symbol
    count = stop - start

    if message_source == "all_zero":
        msgs = np.zeros((count, code.k), dtype=np.uint8)
    else:
        msgs = np.stack([rng.frame(i, channel.STREAM_MESSAGE).integers(0, 2, code.k)
                         for i in range(start, stop)]).astype(np.uint8)
    s = modem.modulate(gf2.encode(msgs, code.G), const)
    if attack_a is not None:
        s = attack_mod.apply_attack(s, attack_a, const)

    ys = np.empty_like(s)
    gains = None
    if params.kind == "rayleigh" and params.si:
        gains = np.empty((count, s.shape[-1] // cps))
    for row, i in enumerate(range(start, stop)):
        y, g = channel.transmit(s[row], params, rng.frame(i, channel.STREAM_CHANNEL), cps)
        ys[row] = y
        if gains is not None:
            gains[row] = g

    side = modem.ChannelSide(sigma=params.sigma, gains=gains)
    llr = modem.demodulate_llr(ys, side, const)
    if decoder.iters == 0:
        soft = llr  # uncoded proxy: hard decision straight off the LLR sign
    else:
        out = bp.bp_forward(llr, graph, decoder.iters, decoder.clamp,
                            early_stop=True, record_tape=False)
        soft = out.soft[-1]
    decoded = code.message_from_codeword((soft < 0).astype(np.uint8))
    errs = decoded != msgs
    return count, int(errs.sum()), int(np.any(errs, axis=-1).sum())


def _chunk_worker(payload):
    idx, args = payload
    return idx, _chunk_counts(*args)


def _make_params(kind, sigma, channel_opts):
    opts = dict(channel_opts or {})
    return channel.ChannelParams(sigma=sigma, kind=kind, **opts)


def run_point(code, decoder: bp.DecoderConfig, scheme: str, ebn0_db: float,
              frames: int, seed: int, attack=None, message_source: str = "random",
              channel_kind: str = "awgn", channel_opts: dict | None = None,
              workers: int = 1, min_block_errors: int | None = None) -> MonteCarloResult:
    """Simulate one operating point and return exact error counts.

    Per frame: draw the message, encode, modulate, apply the perturbation
    when given, transmit, demodulate, decode (early syndrome stop on), and
    count message-bit and block errors. With `min_block_errors`, chunks are
    consumed in order until that many block errors have accumulated, so the
    reported counts stay worker-invariant.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if message_source not in ("random", "all_zero"):
        raise ValueError(f"unknown message source {message_source!r}")
    const = modem.get_constellation(scheme)
    sigma = channel.ebn0_to_sigma(ebn0_db, code.rate, const.bits_per_symbol)
    params = _make_params(channel_kind, sigma, channel_opts)
    if params.kind == "rayleigh" and not params.si:
        raise ValueError("no side-information demapper is not implemented; set channel si=true")

    attack_a = None
    if attack is not None:
        if isinstance(attack, attack_mod.AttackVector):
            if attack.scheme != scheme:
                raise ValueError(f"attack scheme {attack.scheme!r} does not match {scheme!r}")
            if attack.code_id and attack.code_id != code.name:
                raise ValueError(f"attack was searched on {attack.code_id!r}, not {code.name!r}")
            attack_a = attack.a
        else:
            attack_a = np.asarray(attack, dtype=np.float64)

    bounds = list(range(0, frames, CHUNK_FRAMES)) + [frames]
    chunks = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
    args = [(code, decoder, scheme, params, attack_a, message_source,
             seed, start, stop) for start, stop in chunks]

    per_chunk: list[tuple[int, int, int] | None] = [None] * len(chunks)
    if workers <= 1:
        for i, a in enumerate(args):
            per_chunk[i] = _chunk_counts(*a)
            if min_block_errors is not None:
                done = sum(c[2] for c in per_chunk if c is not None)
                if done >= min_block_errors:
                    break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            if min_block_errors is None:
                for idx, counts in pool.map(_chunk_worker, list(enumerate(args))):
                    per_chunk[idx] = counts
            else:
                # waves keep the early-stop decision a prefix property of the
                # fixed chunk order, independent of the worker count
                pos = 0
                while pos < len(args):
                    wave = list(enumerate(args))[pos:pos + workers]
                    for idx, counts in pool.map(_chunk_worker, wave):
                        per_chunk[idx] = counts
                    pos += len(wave)
                    done = sum(c[2] for c in per_chunk[:pos])
                    if done >= min_block_errors:
                        break

    total_f = total_bit = total_blk = 0
    for counts in per_chunk:
        if counts is None:
            continue
        total_f += counts[0]
        total_bit += counts[1]
        total_blk += counts[2]
        if min_block_errors is not None and total_blk >= min_block_errors:
            break

    meta = dict(ebn0_db=ebn0_db, seed=seed, attacked=attack_a is not None,
                code_id=code.name, decoder="bp", iters=decoder.iters, scheme=scheme,
                channel_kind=channel_kind,
                config_digest=_digest(code.name, decoder, scheme, channel_kind,
                                      channel_opts, ebn0_db, message_source))
    return _result(total_f, total_bit, total_blk, code.k, meta)


def sweep(ebn0_grid, code, decoder: bp.DecoderConfig, scheme: str, frames: int,
          seed: int, attack=None, message_source: str = "random",
          channel_kind: str = "awgn", channel_opts: dict | None = None,
          workers: int = 1, min_block_errors: int | None = None) -> list[MonteCarloResult]:
    """run_point over an Eb/N0 grid with per-point derived seeds.

    Results are ordered by Eb/N0; with an attack, each point yields a
    baseline row followed by an attacked row sharing the same seed, so the
    pair sees identical noise (common random numbers).
    """
    grid = sorted(float(x) for x in ebn0_grid)
    if not grid:
        raise ValueError("the Eb/N0 grid must be nonempty")
    results = []
    for idx, point in enumerate(grid):
        point_seed = channel.child_seed(seed, idx)
        shared = dict(frames=frames, seed=point_seed, message_source=message_source,
                      channel_kind=channel_kind, channel_opts=channel_opts,
                      workers=workers, min_block_errors=min_block_errors)
        results.append(run_point(code, decoder, scheme, point, **shared))
        if attack is not None:
            results.append(run_point(code, decoder, scheme, point, attack=attack, **shared))
    return results


# ---------------------------------------------------------------------------
# all-zero -> random-codeword transfer check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransferReport:
    mode: str                 # "exact" | "statistical"
    frames: int
    bit_errors_random: int
    block_errors_random: int
    bit_errors_allzero: int
    block_errors_allzero: int
    passed: bool
    ber_random: float = 0.0
    ber_allzero: float = 0.0
    ci_sum: float = 0.0


def transfer_check(attack, code, decoder: bp.DecoderConfig, ebn0_db: float,
                   frames: int, seed: int) -> TransferReport:
    """Verify that the all-zero-codeword perturbation transfers to random words.

    BPSK/AWGN: the error counts of (random codeword, adapted perturbation,
    noise z) and (all-zero word, perturbation, sign-coupled noise t*z) are
    compared frame by frame; they must agree bit-exactly. qam4 falls back
    to a statistical check: the BER confidence intervals of all-zero and
    random-codeword runs must overlap.
    """
    scheme = attack.scheme if isinstance(attack, attack_mod.AttackVector) else "bpsk"
    if scheme != "bpsk":
        base = run_point(code, decoder, scheme, ebn0_db, frames=frames, seed=seed,
                         attack=attack, message_source="all_zero")
        rnd = run_point(code, decoder, scheme, ebn0_db, frames=frames,
                        seed=channel.child_seed(seed, 77), attack=attack,
                        message_source="random")
        ci = base.ci95_ber + rnd.ci95_ber
        return TransferReport(
            mode="statistical", frames=frames,
            bit_errors_random=rnd.bit_errors, block_errors_random=rnd.block_errors,
            bit_errors_allzero=base.bit_errors, block_errors_allzero=base.block_errors,
            passed=abs(base.ber - rnd.ber) <= ci,
            ber_random=rnd.ber, ber_allzero=base.ber, ci_sum=ci)

    const = modem.get_constellation("bpsk")
    graph = bp.TannerGraph(code.H)
    sigma = channel.ebn0_to_sigma(ebn0_db, code.rate, 1)
    side = modem.ChannelSide(sigma=sigma)
    rng = channel.FrameRng(seed)
    a = attack.a if isinstance(attack, attack_mod.AttackVector) else np.asarray(attack)
    s_zero = attack_mod.apply_attack(modem.modulate(np.zeros(code.n, dtype=np.uint8), const),
                                     a, const)

    totals = dict(bit_r=0, blk_r=0, bit_z=0, blk_z=0)
    match = True
    for start in range(0, frames, CHUNK_FRAMES):
        stop = min(start + CHUNK_FRAMES, frames)
        count = stop - start
        msgs = np.stack([rng.frame(i, channel.STREAM_MESSAGE).integers(0, 2, code.k)
                         for i in range(start, stop)]).astype(np.uint8)
        x = gf2.encode(msgs, code.G)
        t = 1.0 - 2.0 * x.astype(np.float64)
        z = sigma * np.stack([rng.frame(i, channel.STREAM_CHANNEL).standard_normal(code.n)
                              for i in range(start, stop)])
        s_rand = attack_mod.apply_attack(modem.modulate(x, const), a, const)

        def decode_msgs(y):
            llr = modem.demodulate_llr(y, side, const)
            out = bp.bp_forward(llr, graph, decoder.iters, decoder.clamp,
                                early_stop=True, record_tape=False)
            return code.message_from_codeword((out.soft[-1] < 0).astype(np.uint8))

        err_r = decode_msgs(s_rand + z) != msgs
        err_z = decode_msgs(s_zero + t * z) != 0
        totals["bit_r"] += int(err_r.sum()); totals["blk_r"] += int(np.any(err_r, -1).sum())
        totals["bit_z"] += int(err_z.sum()); totals["blk_z"] += int(np.any(err_z, -1).sum())
        match = match and bool(np.array_equal(err_r, err_z))

    return TransferReport(
        mode="exact", frames=frames,
        bit_errors_random=totals["bit_r"], block_errors_random=totals["blk_r"],
        bit_errors_allzero=totals["bit_z"], block_errors_allzero=totals["blk_z"],
        passed=match)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["ebn0_db", "frames", "bit_errors", "block_errors", "ber", "bler",
               "ci95_ber", "ci95_bler", "attacked", "code_id", "decoder", "iters",
               "scheme", "channel", "seed"]


def write_csv(results: list[MonteCarloResult], fh) -> None:
    close = False
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        fh = open(fh, "w", newline="")
        close = True
    try:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow([repr(r.ebn0_db), r.frames, r.bit_errors, r.block_errors,
                        repr(r.ber), repr(r.bler), repr(r.ci95_ber), repr(r.ci95_bler),
                        int(r.attacked), r.code_id, r.decoder, r.iters, r.scheme,
                        r.channel_kind, r.seed])
    finally:
        if close:
            fh.close()


def read_csv(fh) -> list[MonteCarloResult]:
    close = False
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        fh = open(fh, newline="")
        close = True
    try:
        rows = list(csv.DictReader(fh))
    finally:
        if close:
            fh.close()
    out = []
    for row in rows:
        out.append(MonteCarloResult(
            frames=int(row["frames"]), bit_errors=int(row["bit_errors"]),
            block_errors=int(row["block_errors"]), ber=float(row["ber"]),
            bler=float(row["bler"]), ci95_ber=float(row["ci95_ber"]),
            ci95_bler=float(row["ci95_bler"]), ebn0_db=float(row["ebn0_db"]),
            config_digest="", seed=int(row["seed"]), attacked=bool(int(row["attacked"])),
            code_id=row["code_id"], decoder=row["decoder"], iters=int(row["iters"]),
            scheme=row["scheme"], channel_kind=row["channel"]))
    return out


def csv_text(results: list[MonteCarloResult]) -> str:
    buf = io.StringIO()
    write_csv(results, buf)
    return buf.getvalue()
