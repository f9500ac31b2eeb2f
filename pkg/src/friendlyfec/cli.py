"""Command-line front end: search / eval / sweep / gradcheck.

Configuration is flat `section.key = value` text. Logs go to stderr; CSV
data goes to stdout or --out. Exit codes: 0 success, 2 configuration
error, 3 search failure, 4 gradient-check failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import attack as attack_mod
from . import bp, channel, codes, modem, montecarlo

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SEARCH = 3
EXIT_GRADCHECK = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    code_family: str = "ldpc"
    code_alist: str = ""
    code_n: int = 64
    code_k: int = 32
    code_design_ebn0_db: float = 2.0
    decoder_iters: int = 5
    decoder_clamp: float = bp.DEFAULT_CLAMP
    decoder_loss_mode: str = "final"
    modem_scheme: str = "bpsk"
    channel_kind: str = "awgn"
    channel_sigma_b: float | None = None
    channel_rho: float | None = None
    channel_si: bool = True
    search_approach: int | None = None
    search_batch_size: int | None = None
    search_iters: int | None = None
    search_max_trials: int | None = None
    search_sigma: float | None = None          # None: auto at target BLER
    search_target_bler: float = 0.3
    search_scheduler: str | None = None
    search_epsilon0: float | None = None
    search_decay: float | None = None
    search_step_len: int | None = None
    search_accept: str | None = None
    search_runs: int | None = None
    search_cluster: str | None = None
    search_cluster_k: int | None = None
    search_linkage: str | None = None
    search_require_nonzero: bool = False
    search_validation_ebn0_db: float | None = None  # None: 1 dB above the search point
    search_validation_frames: int = 20000
    eval_frames: int = 10000
    eval_ebn0_db: float = 3.0
    eval_grid: tuple[float, ...] = ()
    eval_seed: int = 0
    eval_message_source: str = "random"
    eval_min_block_errors: int | None = None
    output_attack: str = "attack.json"


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_grid(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


_KEYS = {
    "code.family": ("code_family", str),
    "code.alist": ("code_alist", str),
    "code.n": ("code_n", int),
    "code.k": ("code_k", int),
    "code.design_ebn0_db": ("code_design_ebn0_db", float),
    "decoder.iters": ("decoder_iters", int),
    "decoder.clamp": ("decoder_clamp", float),
    "decoder.loss_mode": ("decoder_loss_mode", str),
    "modem.scheme": ("modem_scheme", str),
    "channel.kind": ("channel_kind", str),
    "channel.sigma_b": ("channel_sigma_b", float),
    "channel.rho": ("channel_rho", float),
    "channel.si": ("channel_si", _parse_bool),
    "search.approach": ("search_approach", int),
    "search.batch_size": ("search_batch_size", int),
    "search.iters": ("search_iters", int),
    "search.max_trials": ("search_max_trials", int),
    "search.sigma": ("search_sigma", float),
    "search.target_bler": ("search_target_bler", float),
    "search.scheduler": ("search_scheduler", str),
    "search.epsilon0": ("search_epsilon0", float),
    "search.decay": ("search_decay", float),
    "search.step_len": ("search_step_len", int),
    "search.accept": ("search_accept", str),
    "search.runs": ("search_runs", int),
    "search.cluster": ("search_cluster", str),
    "search.cluster_k": ("search_cluster_k", int),
    "search.linkage": ("search_linkage", str),
    "search.require_nonzero": ("search_require_nonzero", _parse_bool),
    "search.validation_ebn0_db": ("search_validation_ebn0_db", float),
    "search.validation_frames": ("search_validation_frames", int),
    "eval.frames": ("eval_frames", int),
    "eval.ebn0_db": ("eval_ebn0_db", float),
    "eval.grid": ("eval_grid", _parse_grid),
    "eval.seed": ("eval_seed", int),
    "eval.message_source": ("eval_message_source", str),
    "eval.min_block_errors": ("eval_min_block_errors", int),
    "output.attack": ("output_attack", str),
}


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` lines; unknown keys are rejected by name."""
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        attr, conv = _KEYS[key]
        try:
            setattr(cfg, attr, conv(value))
        except ConfigError:
            raise
        except (TypeError, ValueError):
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.code_family not in ("ldpc", "polar", "repetition", "hamming", "uncoded"):
        raise ConfigError(f"unknown code family {cfg.code_family!r}")
    if cfg.modem_scheme not in ("bpsk", "qam4"):
        raise ConfigError(f"unknown modulation scheme {cfg.modem_scheme!r}")
    if cfg.channel_kind not in ("awgn", "rayleigh", "bursty"):
        raise ConfigError(f"unknown channel kind {cfg.channel_kind!r}")
    if cfg.decoder_loss_mode not in ("final", "multiloss"):
        raise ConfigError(f"unknown loss mode {cfg.decoder_loss_mode!r}")
    if cfg.eval_message_source not in ("random", "all_zero"):
        raise ConfigError(f"unknown message source {cfg.eval_message_source!r}")
    if cfg.decoder_iters < 0:
        raise ConfigError("decoder.iters must be >= 0")
    if cfg.eval_frames < 1:
        raise ConfigError("eval.frames must be >= 1")


def build_code(cfg: RunConfig) -> codes.CodeSpec:
    if cfg.code_family == "ldpc":
        if cfg.code_alist:
            try:
                with open(cfg.code_alist) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read alist file: {exc}") from None
            return codes.code_from_alist(text, name=cfg.code_alist)
        return codes.ldpc_64_32()
    if cfg.code_family == "polar":
        return codes.polar_construct(cfg.code_n, cfg.code_k, cfg.code_design_ebn0_db)
    if cfg.code_family == "repetition":
        return codes.repetition_code(cfg.code_n)
    if cfg.code_family == "hamming":
        return codes.hamming_7_4()
    return codes.uncoded(cfg.code_n)


def build_decoder(cfg: RunConfig) -> bp.DecoderConfig:
    return bp.DecoderConfig(iters=cfg.decoder_iters, clamp=cfg.decoder_clamp,
                            loss_mode=cfg.decoder_loss_mode)


def build_search(cfg: RunConfig) -> attack_mod.SearchConfig:
    overrides = {}
    for key, attr in [("batch_size", "search_batch_size"), ("accepted_iters", "search_iters"),
                      ("max_trials", "search_max_trials"), ("scheduler", "search_scheduler"),
                      ("epsilon0", "search_epsilon0"), ("decay", "search_decay"),
                      ("step_len", "search_step_len"), ("accept", "search_accept"),
                      ("runs", "search_runs"), ("cluster", "search_cluster"),
                      ("cluster_k", "search_cluster_k"), ("linkage", "search_linkage")]:
        value = getattr(cfg, attr)
        if value is not None:
            overrides[key] = value
    try:
        if cfg.search_approach is not None:
            sc = attack_mod.approach_config(cfg.search_approach, **overrides)
        else:
            sc = attack_mod.SearchConfig(**overrides)
        return replace(sc, sigma=cfg.search_sigma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _channel_opts(cfg: RunConfig) -> dict:
    opts = {}
    if cfg.channel_kind == "bursty":
        if cfg.channel_sigma_b is not None:
            opts["sigma_b"] = cfg.channel_sigma_b
        if cfg.channel_rho is not None:
            opts["rho"] = cfg.channel_rho
    if cfg.channel_kind == "rayleigh":
        opts["si"] = cfg.channel_si
    return opts


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_search(cfg: RunConfig, out_path: str | None, seed: int) -> int:
    code = build_code(cfg)
    decoder = build_decoder(cfg)
    search_cfg = build_search(cfg)
    if cfg.channel_kind != "awgn":
        raise ConfigError("the perturbation search runs over the AWGN channel only")
    if search_cfg.sigma is None:
        sigma = attack_mod.find_search_sigma(code, decoder, cfg.modem_scheme, seed=seed,
                                             target_bler=cfg.search_target_bler)
        _log(f"auto search sigma {sigma:.6g} "
             f"({channel.sigma_to_ebn0(sigma, code.rate, 1 if cfg.modem_scheme == 'bpsk' else 2):.3f} dB)")
        search_cfg = replace(search_cfg, sigma=sigma)

    def trace(rec):
        _log("trial={trial} eps={epsilon:.6g} ber={ber:.6g} ber_new={ber_new:.6g} "
             "bler={bler:.6g} bler_new={bler_new:.6g} accept={acc}".format(
                 acc="yes" if rec["accepted"] else "no", **rec))

    if search_cfg.runs > 1:
        vectors = attack_mod.run_regime(code, decoder, cfg.modem_scheme, search_cfg, seed)
        nonzero = [v for v in vectors if not v.is_zero]
        _log(f"{len(vectors)} runs, {len(nonzero)} nonzero vectors")
        if search_cfg.cluster != "none" and len(nonzero) >= search_cfg.cluster_k:
            candidates = attack_mod.cluster_attacks(vectors, search_cfg.cluster,
                                                    search_cfg.cluster_k, seed=seed,
                                                    linkage=search_cfg.linkage)
        else:
            candidates = nonzero or vectors[:1]
        val_ebn0 = cfg.search_validation_ebn0_db
        if val_ebn0 is None:
            val_ebn0 = channel.sigma_to_ebn0(search_cfg.sigma, code.rate,
                                             1 if cfg.modem_scheme == "bpsk" else 2) + 1.0
        best = attack_mod.select_best(candidates, code, decoder, ebn0_db=val_ebn0,
                                      frames=cfg.search_validation_frames, seed=channel.child_seed(seed, 9))
        _log(f"selected candidate {best.approach!r} at validation Eb/N0 {val_ebn0:.3f} dB")
    else:
        best = attack_mod.search_attack(code, decoder, cfg.modem_scheme, search_cfg,
                                        seed, on_trial=trace)
        _log(f"accepted {best.accepted_iters} updates")

    if cfg.search_require_nonzero and best.is_zero:
        _log("search failed: attack vector is zero but a nonzero one was required")
        return EXIT_SEARCH
    path = out_path or cfg.output_attack
    attack_mod.save_attack(best, path)
    _log(f"wrote {path}")
    return EXIT_OK


def _load_attack_checked(path: str, cfg: RunConfig, code) -> attack_mod.AttackVector:
    try:
        av = attack_mod.load_attack(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load attack file: {exc}") from None
    if av.scheme != cfg.modem_scheme:
        raise ConfigError(f"attack scheme {av.scheme!r} does not match config {cfg.modem_scheme!r}")
    if av.code_id != code.name:
        raise ConfigError(f"attack code id {av.code_id!r} does not match {code.name!r}")
    return av


def cmd_eval(cfg: RunConfig, attack_path: str | None, out_path: str | None,
             seed: int, workers: int, grid: bool) -> int:
    code = build_code(cfg)
    decoder = build_decoder(cfg)
    av = _load_attack_checked(attack_path, cfg, code) if attack_path else None
    shared = dict(frames=cfg.eval_frames, seed=seed, message_source=cfg.eval_message_source,
                  channel_kind=cfg.channel_kind, channel_opts=_channel_opts(cfg),
                  workers=workers, min_block_errors=cfg.eval_min_block_errors)
    if grid:
        points = cfg.eval_grid or (cfg.eval_ebn0_db,)
        results = montecarlo.sweep(points, code, decoder, cfg.modem_scheme,
                                   attack=av, **shared)
    else:
        results = [montecarlo.run_point(code, decoder, cfg.modem_scheme,
                                        cfg.eval_ebn0_db, **shared)]
        if av is not None:
            results.append(montecarlo.run_point(code, decoder, cfg.modem_scheme,
                                                cfg.eval_ebn0_db, attack=av, **shared))
    if out_path:
        montecarlo.write_csv(results, out_path)
        _log(f"wrote {out_path}")
    else:
        sys.stdout.write(montecarlo.csv_text(results))
    return EXIT_OK


@dataclass
class GradcheckReport:
    max_rel_demod: float
    max_rel_bp: float
    worst: str = ""
    checks: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return max(self.max_rel_demod, self.max_rel_bp) < 1e-3


def run_gradcheck(cfg: RunConfig, seed: int) -> GradcheckReport:
    """Finite-difference validation of the demapper adjoint and BP gradient."""
    code = build_code(cfg)
    decoder = build_decoder(cfg)
    if decoder.iters < 1:
        raise ConfigError("gradcheck needs decoder.iters >= 1")
    const = modem.get_constellation(cfg.modem_scheme)
    graph = bp.TannerGraph(code.H)
    rng = np.random.default_rng(seed)
    sigma = channel.ebn0_to_sigma(cfg.eval_ebn0_db, code.rate, const.bits_per_symbol)
    side = modem.ChannelSide(sigma=sigma)
    target = np.zeros(code.n)
    report = GradcheckReport(0.0, 0.0)

    def rel(a, b):
        return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-9)

    for case in range(3):
        y = rng.normal(0.0, 1.0, code.n)
        weights = rng.normal(0.0, 1.0, code.n)
        analytic = modem.demodulate_adjoint(weights, side, const)
        fd = bp.finite_difference(lambda v: float(weights @ modem.demodulate_llr(v, side, const)), y)
        r = rel(analytic, fd)
        if float(r.max()) > max(report.max_rel_demod, report.max_rel_bp):
            report.worst = f"demod case {case} coordinate {int(np.argmax(r))}"
        report.max_rel_demod = max(report.max_rel_demod, float(r.max()))
        report.checks.append(f"demod case {case}: max rel {r.max():.3g}")

        llr = rng.normal(0.0, 2.0 / sigma, code.n)
        out = bp.bp_forward(llr, graph, decoder.iters, decoder.clamp)
        grad = bp.bp_backward(out.tape, target, decoder.loss_mode)
        coords = rng.choice(code.n, size=min(10, code.n), replace=False)
        fd = bp.finite_difference(
            lambda v: bp.bp_loss(bp.bp_forward(v, graph, decoder.iters, decoder.clamp),
                                 target, decoder.loss_mode), llr, coords=coords)
        r = rel(grad[coords], fd)
        if float(r.max()) > report.max_rel_bp:
            report.worst = f"bp case {case} coordinate {int(coords[int(np.argmax(r))])}"
        report.max_rel_bp = max(report.max_rel_bp, float(r.max()))
        report.checks.append(f"bp case {case}: max rel {r.max():.3g}")
    return report


def cmd_gradcheck(cfg: RunConfig, seed: int) -> int:
    report = run_gradcheck(cfg, seed)
    for line in report.checks:
        _log(line)
    print(f"demod adjoint max rel error: {report.max_rel_demod:.3g}")
    print(f"bp gradient max rel error:   {report.max_rel_bp:.3g}")
    if not report.passed:
        _log(f"gradcheck FAILED (worst: {report.worst or 'demod adjoint'})")
        return EXIT_GRADCHECK
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="friendlyfec")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("search", "eval", "sweep", "gradcheck"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--attack", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        seed = args.seed if args.seed is not None else cfg.eval_seed
        if args.command == "search":
            return cmd_search(cfg, args.out, seed)
        if args.command == "eval":
            return cmd_eval(cfg, args.attack, args.out, seed, args.workers, grid=False)
        if args.command == "sweep":
            return cmd_eval(cfg, args.attack, args.out, seed, args.workers, grid=True)
        return cmd_gradcheck(cfg, seed)
    except OSError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except ValueError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
