"""Command-line front end: ``crlab <command> [--config FILE] [flags]``.

Every setting can come from a JSON config file; flags given on the command
line override it. Exit codes: 0 success, 2 input error, 3 semantic mismatch
(protocol vs channel, caps, non-decomposing channel, failed audit).
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .bounds import (BoundConfig, CapError, NotDecomposing, outer_bound, va_search)
from .channel import ChannelError, RdChannel, bsc, bsc_params_of, is_decomposing, load_channel
from .infomeasures import DistributionError
from .protocols import (PROTOCOL_IDS, ProtocolMismatch, ProtocolSpec, RateMeter,
                        canonical_params, channel_params_for, build, theoretical_rate)
from .simulator import (OutcomeDumpError, converse_audit, evaluate, iter_sessions,
                        read_outcomes, write_outcomes)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISMATCH = 3
SEED_LIMIT = 2 ** 64
HISTOGRAM_MAX_K = 2 ** 16
SWEEP_COLUMNS = ("p1", "p2", "q1", "q2", "bound", "va", "gap")


class ConfigError(ValueError):
    """Unreadable or invalid configuration (exit 2)."""


class ConfigMismatch(ValueError):
    """Configuration is well formed but inconsistent (exit 3)."""


@dataclass
class ExperimentConfig:
    command: str | None = None
    channel: object = None
    protocol: object = None
    n: object = None
    sessions: int | None = None
    seed: int | None = None
    nu: int | None = None
    nv: int | None = None
    restarts: int | None = None
    max_iter: int | None = None
    random_samples: int | None = None
    out: str | None = None
    dump_outcomes: str | None = None
    stages_out: str | None = None
    bits: int | None = None
    K: object = None
    claimed_lambda: float | None = None
    q1: float | None = None
    q2: float | None = None
    sweep: object = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if getattr(self, f.name) is not None}


_CONFIG_KEYS = {f.name for f in fields(ExperimentConfig)}
_ALIASES = {"lambda": "claimed_lambda", "dump-outcomes": "dump_outcomes",
            "stages-out": "stages_out", "max-iter": "max_iter",
            "random-samples": "random_samples"}


def read_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    data = {_ALIASES.get(k, k): v for k, v in data.items()}
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{p}: unknown config keys {unknown}")
    return ExperimentConfig(**data)


def _int(name: str, value, lo: int = 1, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < lo or (hi is not None and value >= hi):
        rng = f">= {lo}" if hi is None else f"in [{lo}, {hi})"
        raise ConfigError(f"{name}={value} must be {rng}")
    return value


def _float(name: str, value, lo: float = 0.0) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number, got {value!r}")
    if value < lo:
        raise ConfigError(f"{name}={value} must be >= {lo}")
    return float(value)


def _require(cfg: ExperimentConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"{cfg.command} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _seed(cfg: ExperimentConfig) -> int:
    return _int("seed", 0 if cfg.seed is None else cfg.seed, 0, SEED_LIMIT)


def _channel(cfg: ExperimentConfig) -> RdChannel:
    src = cfg.channel
    if isinstance(src, (dict, str)):
        return load_channel(src)
    raise ConfigError("channel must be an inline JSON object, a JSON string or a file path")


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(_json_safe(doc), indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(header, rows, out: str | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.12g}" if isinstance(x, float) else str(x)


def _metadata(cfg: ExperimentConfig) -> dict:
    # no timestamps: reports are byte-identical across reruns
    conf = cfg.to_dict()
    if isinstance(conf.get("channel"), str) and conf["channel"].lstrip().startswith("{"):
        conf["channel"] = json.loads(conf["channel"])
    return {"tool": "crlab", "version": __version__, "config": conf}


def _k_json(K: int):
    return str(K) if K > 2 ** 53 else K


# ---------------------------------------------------------------------------
# simulate / rate-table

def _protocol_spec(pid: str, n, cfg: ExperimentConfig, use_channel: bool = True) -> ProtocolSpec:
    if pid not in PROTOCOL_IDS:
        raise ConfigError(f"unknown protocol {pid!r}; choose from {', '.join(PROTOCOL_IDS)}")
    n = _int("n", n)
    bits = None if cfg.bits is None else _int("bits", cfg.bits, 0)
    if use_channel and cfg.channel is not None:
        params = channel_params_for(pid, _channel(cfg))
    elif pid == "case_iv":
        if cfg.q1 is None or cfg.q2 is None:
            raise ConfigError("case_iv needs --channel or both --q1 and --q2")
        params = canonical_params(pid, _float("q1", cfg.q1), _float("q2", cfg.q2))
    else:
        params = None
    return ProtocolSpec(pid, n, params, bits)


def _simulate(spec: ProtocolSpec, sessions: int, seed: int, keep_stages: bool = False):
    ch = spec.channel()
    meter = RateMeter(spec, keep_stages=keep_stages)
    outcomes = []
    s1, s2 = build(spec)
    for trace, out in iter_sessions(ch, s1, s2, spec.n, sessions, seed):
        meter.add(trace, out)
        outcomes.append(out)
    return outcomes, meter


def cmd_simulate(cfg: ExperimentConfig) -> int:
    _require(cfg, "protocol", "n")
    if not isinstance(cfg.protocol, str):
        raise ConfigError("simulate takes a single protocol id")
    spec = _protocol_spec(cfg.protocol, cfg.n, cfg)
    sessions = _int("sessions", 1000 if cfg.sessions is None else cfg.sessions)
    seed = _seed(cfg)
    if cfg.stages_out and spec.id != "case_i_adaptive":
        raise ConfigMismatch("--stages-out applies to case_i_adaptive only")
    outcomes, meter = _simulate(spec, sessions, seed, keep_stages=bool(cfg.stages_out))
    stats = evaluate(outcomes, spec.K, spec.n)
    rate, se = meter.result()
    doc = {
        "metadata": _metadata(cfg),
        "protocol": spec.id,
        "n": spec.n,
        "B": spec.B,
        "channel": spec.channel().to_dict(),
        "stats": stats.to_dict(),
        "empirical_rate": rate,
        "rate_se": se,
        "rate_samples": meter.count,
        "theoretical_rate": theoretical_rate(spec),
    }
    if spec.K > HISTOGRAM_MAX_K:
        doc["stats"].pop("label_histogram")
    if spec.id == "case_i_adaptive":
        doc["stages"] = meter.count
        doc["mean_Z"] = rate
    if cfg.dump_outcomes:
        write_outcomes(cfg.dump_outcomes, outcomes)
        meta = {"protocol": spec.id, "n": spec.n, "K": _k_json(spec.K),
                "sessions": sessions, "seed": seed}
        Path(cfg.dump_outcomes + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    if cfg.stages_out:
        rows = ((i, N, repr(N / (N + 1))) for i, N in enumerate(meter.stage_bits))
        _emit_csv(("stage_index", "N", "Z"), rows, cfg.stages_out)
    _emit_json(doc, cfg.out)
    if cfg.out:
        print(f"{spec.id} n={spec.n}: agree_prob={stats.agree_prob:.6g} "
              f"lambda_hat={stats.lambda_hat:.6g} rate={rate:.6g}")
    return EXIT_OK


def cmd_rate_table(cfg: ExperimentConfig) -> int:
    _require(cfg, "n")
    ns = cfg.n if isinstance(cfg.n, list) else [cfg.n]
    if cfg.protocol is None:
        pids = [p for p in PROTOCOL_IDS
                if p != "case_iv" or cfg.channel is not None or cfg.q1 is not None]
    else:
        pids = cfg.protocol if isinstance(cfg.protocol, list) else [cfg.protocol]
    sessions = _int("sessions", 1000 if cfg.sessions is None else cfg.sessions)
    seed = _seed(cfg)
    rows = []
    for pid in pids:
        for n in ns:
            # only case iv takes its parameters from the channel
            spec = _protocol_spec(pid, n, cfg, use_channel=(pid == "case_iv"))
            outcomes, meter = _simulate(spec, sessions, seed)
            stats = evaluate(outcomes, spec.K, spec.n)
            rate, se = meter.result()
            rows.append([spec.id, spec.n, spec.B, sessions, _num(theoretical_rate(spec)),
                         _num(rate), _num(se), _num(stats.agree_prob), _num(stats.lambda_hat)])
    _emit_csv(("protocol", "n", "B", "sessions", "theoretical_rate", "empirical_rate",
               "rate_se", "agree_prob", "lambda_hat"), rows, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounds

def _bound_config(cfg: ExperimentConfig) -> BoundConfig:
    kw = {"seed": _seed(cfg)}
    for name in ("nu", "nv", "restarts", "max_iter"):
        if getattr(cfg, name) is not None:
            kw[name] = _int(name, getattr(cfg, name))
    if cfg.random_samples is not None:
        kw["random_samples"] = _int("random_samples", cfg.random_samples, 0)
    return BoundConfig(**kw)


def cmd_bound(cfg: ExperimentConfig) -> int:
    _require(cfg, "channel")
    ch = _channel(cfg)
    report = outer_bound(ch, _bound_config(cfg))
    doc = {"metadata": _metadata(cfg), "channel": ch.to_dict(), **report.to_dict()}
    _emit_json(doc, cfg.out)
    print(f"value={report.value:.12g} A={report.A:.12g} B={report.B:.12g} "
          f"C={report.C:.12g} D={report.D:.12g}", file=sys.stderr if not cfg.out else sys.stdout)
    return EXIT_OK


def _require_decomposing(ch: RdChannel) -> None:
    if not is_decomposing(ch):
        raise NotDecomposing("is_decomposing=False: y1 depends on x1 or y2 depends on x2")


def cmd_va(cfg: ExperimentConfig) -> int:
    _require(cfg, "channel")
    ch = _channel(cfg)
    _require_decomposing(ch)
    res = va_search(ch)
    doc = {"metadata": _metadata(cfg), "channel": ch.to_dict(),
           "va_capacity": float(f"{res.value:.12g}"),
           "px1": [float(f"{x:.12g}") for x in res.px1],
           "px2": [float(f"{x:.12g}") for x in res.px2],
           "certified": res.certified}
    _emit_json(doc, cfg.out)
    return EXIT_OK


def _sweep_channels(sweep) -> list[RdChannel]:
    if isinstance(sweep, str):
        p = Path(sweep)
        if not p.is_file():
            raise ConfigError(f"sweep file not found: {p}")
        try:
            sweep = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    if isinstance(sweep, dict) and set(sweep) == {"points"}:
        pts = sweep["points"]
        if not isinstance(pts, list) or not pts or not all(
                isinstance(p, list) and len(p) == 4 for p in pts):
            raise ConfigError("sweep points must be a non-empty list of [p1, p2, q1, q2]")
        return [bsc(*(_float(k, x) for k, x in zip(("p1", "p2", "q1", "q2"), p))) for p in pts]
    if not isinstance(sweep, dict) or set(sweep) != {"p1", "p2", "q1", "q2"}:
        raise ConfigError('sweep must map each of p1, p2, q1, q2 to a number or a list, '
                          'or hold "points": [[p1, p2, q1, q2], ...]')
    axes = []
    for k in ("p1", "p2", "q1", "q2"):
        v = sweep[k]
        vals = v if isinstance(v, list) else [v]
        if not vals:
            raise ConfigError(f"sweep axis {k} is empty")
        axes.append([_float(k, x) for x in vals])
    return [bsc(*pt) for pt in itertools.product(*axes)]


def cmd_compare(cfg: ExperimentConfig) -> int:
    if cfg.sweep is not None:
        channels = _sweep_channels(cfg.sweep)
    else:
        _require(cfg, "channel")
        channels = [_channel(cfg)]
    for ch in channels:
        _require_decomposing(ch)
    bcfg = _bound_config(cfg)
    rows = []
    for ch in channels:
        outer = outer_bound(ch, bcfg).value
        va = va_search(ch).value
        params = bsc_params_of(ch)
        head = [_num(x) for x in params.as_tuple()] if params else ["", "", "", ""]
        rows.append(head + [_num(outer), _num(va), _num(va - outer)])
        if va - outer < -1e-6:
            print(f"warning: outer bound exceeds va capacity by {outer - va:.3g}", file=sys.stderr)
    _emit_csv(SWEEP_COLUMNS, rows, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit

def _dump_meta(dump: str) -> dict:
    p = Path(dump + ".meta.json")
    if not p.is_file():
        return {}
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc


def cmd_audit(cfg: ExperimentConfig) -> int:
    _require(cfg, "dump_outcomes")
    outcomes = read_outcomes(cfg.dump_outcomes)
    meta = _dump_meta(cfg.dump_outcomes)
    K = cfg.K if cfg.K is not None else meta.get("K")
    if K is None:
        raise ConfigError("label count unknown: pass --K or keep the dump's .meta.json")
    try:
        K = _int("K", int(K))
    except (TypeError, ValueError):
        raise ConfigError(f"K must be an integer, got {K!r}") from None
    n = int(meta.get("n", 1))
    try:
        stats = evaluate(outcomes, K, n)
    except ValueError as exc:
        raise ConfigMismatch(f"dump does not fit K={K}: {exc}") from exc
    lam = stats.lambda_hat if cfg.claimed_lambda is None else _float("lambda", cfg.claimed_lambda)
    report = converse_audit(outcomes, K, lam)
    doc = {"metadata": _metadata(cfg), "measured_lambda_hat": stats.lambda_hat,
           "lambda_source": "measured" if cfg.claimed_lambda is None else "claimed",
           **report.to_dict()}
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.lhs:.6g} {c.relation} {c.rhs:.6g}",
              file=sys.stderr)
    _emit_json(doc, cfg.out)
    return EXIT_OK if report.passed else EXIT_MISMATCH


# ---------------------------------------------------------------------------

COMMANDS = {
    "simulate": cmd_simulate,
    "bound": cmd_bound,
    "va": cmd_va,
    "compare": cmd_compare,
    "audit": cmd_audit,
    "rate-table": cmd_rate_table,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crlab", description="Common randomness over two-way channels.")
    parser.add_argument("--version", action="version", version=f"crlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, protocol_list=False, n_list=False):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--channel", help="channel spec: inline JSON or path to a JSON file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file (stdout when omitted)")
        if protocol_list:
            p.add_argument("--protocol", nargs="+", choices=PROTOCOL_IDS)
        else:
            p.add_argument("--protocol", choices=PROTOCOL_IDS)
        if n_list:
            p.add_argument("--n", type=int, nargs="+")
        else:
            p.add_argument("--n", type=int)

    def optimizer(p):
        p.add_argument("--nu", type=int, help="|U| (default: cardinality cap)")
        p.add_argument("--nv", type=int, help="|V| (default: cardinality cap)")
        p.add_argument("--restarts", type=int)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--random-samples", dest="random_samples", type=int)

    p = sub.add_parser("simulate", help="run protocol sessions and report (n, K, lambda) stats")
    common(p)
    p.add_argument("--sessions", type=int)
    p.add_argument("--bits", type=int, help="label bit budget (default: protocol's)")
    p.add_argument("--q1", type=float)
    p.add_argument("--q2", type=float)
    p.add_argument("--dump-outcomes", dest="dump_outcomes", help="CSV of session_id,phi,psi")
    p.add_argument("--stages-out", dest="stages_out", help="CSV of stage_index,N,Z")

    p = sub.add_parser("bound", help="search the outer bound of a channel")
    common(p)
    optimizer(p)

    p = sub.add_parser("va", help="max-min mutual information of a decomposing channel")
    common(p)

    p = sub.add_parser("compare", help="outer bound vs va capacity on decomposing channels")
    common(p)
    optimizer(p)
    p.add_argument("--sweep", help="JSON file: p1, p2, q1, q2 as values or lists (grid), "
                   "or {\"points\": [[p1, p2, q1, q2], ...]}")

    p = sub.add_parser("audit", help="converse inequalities on an outcome dump")
    common(p)
    p.add_argument("--dump-outcomes", dest="dump_outcomes", help="outcome CSV to audit")
    p.add_argument("--K", type=int, help="label count (default: from the dump's .meta.json)")
    p.add_argument("--lambda", dest="claimed_lambda", type=float,
                   help="claimed lambda (default: measured lambda_hat)")

    p = sub.add_parser("rate-table", help="empirical vs closed-form rates over n")
    common(p, protocol_list=True, n_list=True)
    p.add_argument("--sessions", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--q1", type=float)
    p.add_argument("--q2", type=float)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = read_config(args.config) if args.config else ExperimentConfig()
    if cfg.command is not None and cfg.command != args.command:
        raise ConfigMismatch(f"config is for {cfg.command!r}, not {args.command!r}")
    cfg.command = args.command
    for name in _CONFIG_KEYS - {"command"}:
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ChannelError, OutcomeDumpError, DistributionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigMismatch, ProtocolMismatch, CapError, NotDecomposing) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
