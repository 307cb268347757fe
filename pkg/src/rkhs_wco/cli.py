"""Command line harness: ``rkhs-wco {describe-space,classify,suite,rigidity}``.

Exit codes: 0 every result matched its expectation, 2 a refutation (or pass)
contradicted its expectation, 3 some result was inconclusive, 1 error.
Rigidity experiments mark refutations as expected with
``"expected_refutation": true`` and then exit 0.
"""

from __future__ import annotations

import argparse
import csv
import enum
import io
import json
import math
import sys
import time
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend
from .classify import SUITES, SamplingConfig, classify, rigidity_report, sample_pairs, theorem_suite
from .config import ConfigError, ExperimentConfig, load_config, parse_space, validate
from .errors import RkhsWcoError
from .sampling import RNG_ALGORITHM, instance_rngs
from .spaces import detect_hgamma, sup_kernel_diagonal
from .wco import coisometry_residual

EXIT_OK, EXIT_ERROR, EXIT_REFUTED, EXIT_INCONCLUSIVE = 0, 1, 2, 3
FORMATS = ("json", "text", "csv")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as a refutation
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def to_jsonable(x):
    """Complex numbers become ``[re, im]``; non-finite floats become ``null``."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, enum.Enum):
        return x.value
    if is_dataclass(x) and not isinstance(x, type):
        return to_jsonable(asdict(x))
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, complex):
        return [to_jsonable(x.real), to_jsonable(x.imag)]
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    return x


def exit_code(items) -> int:
    if any(i["outcome"] != "inconclusive" and i["outcome"] != i["expected"] for i in items):
        return EXIT_REFUTED
    if any(i["outcome"] == "inconclusive" for i in items):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _sampling_record(cfg: SamplingConfig) -> dict:
    rec = asdict(cfg)
    rec["seed"] = cfg.resolved_seed
    return rec


def _header(command: str, cfg: SamplingConfig | None, raw: dict | None) -> dict:
    head = {"tool": "rkhs-wco", "version": __version__, "command": command, "kernel_backend": backend()}
    if cfg is not None:
        head.update(
            seed=cfg.resolved_seed,
            rng=RNG_ALGORITHM,
            tolerances={"pass": cfg.pass_tol, "refute": cfg.refute_tol},
            sampling=_sampling_record(cfg),
        )
    if raw is not None:
        head["config"] = raw
    return head


# -- commands ----------------------------------------------------------------------------------


def describe_space(space) -> dict:
    det = detect_hgamma(space)
    sup = sup_kernel_diagonal(space)
    return {
        "space": space.coeffs.tag,
        "dim": space.dim,
        "coefficients": [float(x) for x in space.coeffs.get(13)],
        "detection": str(det),
        "boundedness": {"kind": sup.kind, "sup": sup.value},
        "summary": f"{det}, {sup}",
    }


def cmd_describe_space(args) -> tuple[dict, list, int]:
    if args.space:
        raw = json.loads(args.space)
    elif args.config:
        raw = json.loads(Path(args.config).read_text())
    else:
        raise ConfigError("describe-space needs --space JSON or --config PATH")
    if "family" in raw:
        raw = {"space": raw}
    validate(raw)
    if "space" not in raw:
        raise ConfigError("config has no space descriptor")
    report = _header("describe-space", None, raw)
    report["result"] = describe_space(parse_space(raw["space"]))
    return report, [], EXIT_OK


def _require(exp: ExperimentConfig, what: str):
    if exp.space is None:
        raise ConfigError(f"{what} needs a space descriptor")


def cmd_classify(args) -> tuple[dict, list, int]:
    exp = load_config(args.config, seed=args.seed)
    _require(exp, "classify")
    if not exp.symbols:
        raise ConfigError("classify needs at least one symbol")
    cfg = exp.sampling
    rngs = instance_rngs(cfg.resolved_seed, len(exp.symbols))
    results, rows = [], []
    for i, (spec, rng) in enumerate(zip(exp.symbols, rngs)):
        z, wp = sample_pairs(rng, exp.space.dim, cfg)
        v = classify(exp.space, spec.symbol, cfg, pairs=(z, wp))
        rec = {"index": i, "label": spec.label, "kind": spec.descriptor["kind"], "expected": spec.expect,
               "outcome": v.outcome}
        rec.update(v.to_record())
        results.append(rec)
        if math.isfinite(v.residual_max):
            per = coisometry_residual(exp.space, spec.symbol, z, wp)
            for k in range(len(z)):
                rows.append({"symbol": i, "label": spec.label, "pair": k,
                             "z_norm": float(np.linalg.norm(z[k])), "w_norm": float(np.linalg.norm(wp[k])),
                             "residual": float(per.residuals[k]), "flagged": bool(per.flagged[k])})
    report = _header("classify", cfg, exp.raw)
    report["space"] = exp.space.coeffs.tag
    report["results"] = results
    code = exit_code(results)
    return report, rows, code


def cmd_suite(args) -> tuple[dict, list, int]:
    cfg = SamplingConfig(seed=args.seed)
    raw = None
    if args.config:
        exp = load_config(args.config, seed=args.seed)
        cfg, raw = exp.sampling, exp.raw
    if args.workers:
        cfg = SamplingConfig(**{**asdict(cfg), "workers": args.workers})
    rep = theorem_suite(args.name, cfg)
    report = _header(f"suite {args.name}", cfg, raw)
    report["result"] = rep.to_record()
    rows = [{k: v for k, v in inst.items() if k not in ("a", "mu")} for inst in rep.instances]
    return report, rows, exit_code(rep.instances)


def cmd_rigidity(args) -> tuple[dict, list, int]:
    exp = load_config(args.config, seed=args.seed)
    _require(exp, "rigidity")
    points = exp.rigidity_points
    if not points:
        raise ConfigError("rigidity needs rigidity.points or rigidity.n_random")
    cfg = exp.sampling
    rngs = instance_rngs(cfg.resolved_seed, len(points))
    results, rows = [], []
    expected = exp.default_expect
    for i, (a, rng) in enumerate(zip(points, rngs)):
        r = rigidity_report(exp.space, a, cfg, rng=rng)
        outcome = "refute" if r.certificate else cfg.outcome(r.coisometry_residual_max)
        rec = {"index": i, "expected": expected, "outcome": outcome}
        rec.update(r.to_record())
        results.append(rec)
        rows.append({"point": i, "a_norm": float(np.linalg.norm(a)), "ratio_residual_max": r.ratio_residual_max,
                     "coisometry_residual_max": r.coisometry_residual_max, "certificate": r.certificate})
    report = _header("rigidity", cfg, exp.raw)
    report["space"] = exp.space.coeffs.tag
    report["results"] = results
    return report, rows, exit_code(results)


# -- output ---------------------------------------------------------------------------------------


def render_text(report: dict) -> str:
    out = [f"rkhs-wco {report['version']} {report['command']}"]
    if "seed" in report:
        out.append(f"seed {report['seed']}  tolerances pass<{report['tolerances']['pass']:g} "
                   f"refute>{report['tolerances']['refute']:g}")
    if report["command"] == "describe-space":
        r = report["result"]
        out.append(f"{r['space']} on B_{r['dim']}")
        out += [f"  a_{n} = {c:.12g}" for n, c in enumerate(r["coefficients"])]
        out.append(r["summary"])
    elif report["command"].startswith("suite"):
        r = report["result"]
        c = r["counts"]
        out.append(f"pass {c['pass']}  refute {c['refute']}  inconclusive {c['inconclusive']}  "
                   f"contradictions {r['n_contradictions']}")
        out.append(f"worst residual among expected passes: {r['worst_pass_residual']}")
        out.append(f"smallest residual among expected refutations: {r['min_refute_residual']}")
        out += [f"note: {n}" for n in r["notes"]]
    else:
        out.append(f"space {report['space']}")
        for r in report["results"]:
            name = r["label"] if "label" in r else f"a = {np.round(np.asarray(r['a']), 4).tolist()}"
            status = r.get("status", "certificate" if r.get("certificate") else "no certificate")
            res = r.get("residual_max", r.get("coisometry_residual_max"))
            if r["outcome"] == r["expected"]:
                mark = "ok"
            else:
                mark = "INCONCLUSIVE" if r["outcome"] == "inconclusive" else "CONTRADICTS EXPECTATION"
            out.append(f"  [{mark}] {name}: {status}, max residual {res:.3e} (expected {r['expected']})")
    return "\n".join(out) + "\n"


def render_csv(rows: list) -> str:
    buf = io.StringIO()
    if rows:
        fields = list(rows[0])
        for r in rows[1:]:
            fields += [k for k in r if k not in fields]
        w = csv.DictWriter(buf, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: to_jsonable(v) for k, v in r.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON, see configs/schema.json)")
    common.add_argument("--seed", type=int, default=None, help="overrides sampling.seed and $RKHS_WCO_SEED")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=FORMATS, default=None, help="report format (default json)")
    p = _Parser(prog="rkhs-wco", description="Weighted composition operators on unit-ball kernel spaces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    d = sub.add_parser("describe-space", parents=[common], help="coefficients, boundedness, H_gamma detection")
    d.add_argument("--space", help='inline descriptor, e.g. \'{"family": "hgamma", "params": {"gamma": 1}, "dim": 2}\'')
    d.set_defaults(func=cmd_describe_space)
    c = sub.add_parser("classify", parents=[common], help="classify every symbol in a config")
    c.set_defaults(func=cmd_classify)
    s = sub.add_parser("suite", parents=[common], help="run a randomized theorem battery")
    s.add_argument("name", choices=SUITES)
    s.add_argument("--workers", type=int, default=None, help="thread pool size (results do not depend on it)")
    s.set_defaults(func=cmd_suite)
    r = sub.add_parser("rigidity", parents=[common], help="refute the forced weight of phi_a off H_gamma")
    r.set_defaults(func=cmd_rigidity)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        report, rows, code = args.func(args)
    except (RkhsWcoError, OSError, ValueError, KeyError) as exc:
        print(f"rkhs-wco: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report["exit_code"] = code
    report["timings"] = {"total_s": time.perf_counter() - t0}
    fmt = args.format
    out = args.out
    if args.command != "describe-space":
        spec_out = (report.get("config") or {}).get("output", {})
        fmt = fmt or spec_out.get("format")
        out = out or spec_out.get("path")
    fmt = fmt or "json"
    if fmt == "json":
        text = json.dumps(to_jsonable(report), indent=2) + "\n"
    elif fmt == "text":
        text = render_text(to_jsonable(report))
    else:
        text = render_csv(rows if rows else [to_jsonable(report.get("result", {}))])
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
