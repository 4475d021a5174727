"""Command-line runner: `bvlab verify | bv | lfunc | titchmarsh`.

Flags override an INI config (--config); BVLAB_SEED is the last-resort seed.  Every run
writes a manifest, including runs that fail.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import BvlabError
from .reports import ExperimentReport

EXEMPLARS = ("zeta", "delta", "sym2-delta", "sym3-delta")
DEFAULT_TAU_CACHE = ".cache/tau.bin"
TAU_N = 10**6

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _log(msg: str) -> None:
    print(f"[bvlab] {msg}", file=sys.stderr, flush=True)


# ------------------------------------------------------------------ parsing

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--threads", type=int, default=None, help="worker pool size (default: CPU count)")
    g.add_argument("--format", choices=("csv", "json"), default=None)
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    g.add_argument("--config", default=None, help="INI file of key = value pairs mirroring flag names")
    g.add_argument("--tau-cache", dest="tau_cache", default=None)
    g.add_argument("--manifest", default=None, help="manifest path (default: OUT.manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bvlab", description="Coefficient checks and desk-scale experiments.")
    ap.add_argument("--version", action="version", version=f"bvlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("suite", nargs="?", default=None,
                   choices=("symcore", "local", "vaughan", "inequalities", "characters", "all"))
    _common(v)

    b = sub.add_parser("bv", help="mean-value discrepancy curve")
    b.add_argument("--pi", choices=EXEMPLARS, default=None)
    b.add_argument("--x", type=float, default=None)
    b.add_argument("--ladder", default=None, help="comma-separated x values (default: decades up to --x)")
    b.add_argument("--eta", type=float, default=None)
    b.add_argument("--A", dest="A", type=float, default=None)
    b.add_argument("--B", dest="B", type=float, default=None)
    b.add_argument("--rho", type=int, default=None)
    b.add_argument("--Q", dest="Q", type=int, default=None, help="cap on the modulus range")
    b.add_argument("--weight", choices=("plain", "log", "smoothed-rho"), default=None)
    b.add_argument("--variant", choices=("integers", "primes"), default=None)
    _common(b)

    lf = sub.add_parser("lfunc", help="L-value experiments")
    lf.add_argument("mode", choices=("siegel-scan", "second-moment", "eval"))
    lf.add_argument("--dmax", type=int, default=None)
    lf.add_argument("--Q", dest="Q", default=None, help="moduli: 'a..b' (step 10) or comma list")
    lf.add_argument("--t", type=float, default=None)
    lf.add_argument("--family", choices=("all", "quadratic"), default=None)
    lf.add_argument("--s", default=None, help="complex point, e.g. 0.5 or 0.5+14j")
    lf.add_argument("--d", type=int, default=None, help="fundamental discriminant (1 = untwisted)")
    _common(lf)

    t = sub.add_parser("titchmarsh", help="shifted divisor sums")
    t.add_argument("--pi", choices=EXEMPLARS, default=None)
    t.add_argument("--x", default=None, help="comma-separated ladder, e.g. 1e4,1e5")
    t.add_argument("--over", choices=("primes", "integers"), default=None)
    t.add_argument("--B", dest="B", type=float, default=None)
    _common(t)
    return ap


# ------------------------------------------------------------ configuration

def read_config(path: Optional[str]) -> dict:
    """key = value pairs; an optional [bvlab] or [<command>] section header is allowed."""
    if not path:
        return {}
    text = Path(path).read_text()
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[bvlab]\n" + text
    cp.read_string(text)
    out = {}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            out[k.replace("-", "_")] = v
    return out


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Merge CLI flags over the INI config over defaults; seed falls back to BVLAB_SEED."""
    cfg = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    types = {a.dest: a.type for a in sub._actions if a.dest != "help"}
    merged = {}
    for dest in types:
        val = getattr(args, dest, None)
        if val is None and dest in cfg:
            raw = cfg[dest]
            val = types[dest](raw) if types[dest] else raw
        merged[dest] = val
    if merged.get("seed") is None:
        env = os.environ.get("BVLAB_SEED")
        merged["seed"] = int(env) if env else 0
    merged["threads"] = merged.get("threads") or (os.cpu_count() or 1)
    merged["format"] = merged.get("format") or "csv"
    merged["tau_cache"] = merged.get("tau_cache") or os.environ.get("BVLAB_TAU_CACHE", DEFAULT_TAU_CACHE)
    merged["command"] = args.command
    return merged


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse x ladder {text!r}")


def _int_range(text: str) -> list[int]:
    text = str(text)
    if ".." in text:
        lo, hi = (int(v) for v in text.split(".."))
        step = 10 if hi - lo >= 10 else 1
        return list(range(lo, hi + 1, step))
    return [int(v) for v in text.split(",") if v.strip()]


# ----------------------------------------------------------------- manifest

class Manifest:
    def __init__(self, opts: dict):
        self.data = {"subcommand": opts["command"], "config": {k: v for k, v in sorted(opts.items())},
                     "versions": {"bvlab": __version__}, "started": _now(), "finished": None,
                     "outputs": [], "status": "running"}
        self.path = opts.get("manifest") or (f"{opts['out']}.manifest.json" if opts.get("out")
                                             else f"bvlab-{opts['command']}.manifest.json")

    def tau(self, table) -> None:
        self.data["versions"]["tau_sha256"] = table.digest()
        self.data["versions"]["tau_N"] = table.N

    def output(self, path: str) -> None:
        self.data["outputs"].append(str(path))

    def finish(self, status: str, error: Optional[str] = None) -> None:
        self.data["finished"] = _now()
        self.data["status"] = status
        if error:
            self.data["error"] = error
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        Path(self.path).write_text(json.dumps(self.data, sort_keys=True, indent=2, default=str) + "\n")


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _emit(text: str, opts: dict, man: Manifest) -> None:
    if opts.get("out"):
        Path(opts["out"]).parent.mkdir(parents=True, exist_ok=True)
        with open(opts["out"], "w", newline="") as fh:
            fh.write(text)
        man.output(opts["out"])
    else:
        sys.stdout.write(text)


def _render(rep: ExperimentReport, fmt: str) -> str:
    return rep.to_json() + "\n" if fmt == "json" else rep.to_csv()


def _tau(opts: dict, man: Manifest):
    from . import localcoeffs as lc

    path = opts["tau_cache"]
    if not Path(path).exists():
        _log(f"tau cache {path} missing; computing tau(n) for n <= {TAU_N}")
    table = lc.tau_table(TAU_N, cache=path)
    man.tau(table)
    return table


def _pool(opts: dict):
    n = max(1, int(opts["threads"]))
    if n == 1:
        return None, map
    ex = ThreadPoolExecutor(max_workers=n)
    return ex, ex.map


# --------------------------------------------------------------- commands

def cmd_verify(opts: dict, man: Manifest) -> int:
    from . import verify

    suite = opts.get("suite") or "all"
    names = list(verify.SUITES) if suite == "all" else [suite]
    tau = _tau(opts, man) if any(s in ("local", "vaughan", "inequalities") for s in names) else None
    results = verify.run_suites(names, opts["seed"], tau, log=_log)
    fails = verify.failures(results)
    if opts["format"] == "json" or fails:
        payload = {"suite": suite, "seed": opts["seed"], "passed": not fails,
                   "results": [r.as_dict() for r in results], "failures": fails}
        text = json.dumps(payload, sort_keys=True, indent=2, default=float) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "check", "passed"])
        for r in results:
            w.writerow([r.suite, r.name, "1" if r.passed else "0"])
        text = buf.getvalue()
    _emit(text, opts, man)
    for f in fails:
        _log(f"FAIL {f['suite']}/{f['check']}")
    return EXIT_FAIL if fails else EXIT_OK


def cmd_bv(opts: dict, man: Manifest) -> int:
    from . import sieve_experiments as se

    pi = opts.get("pi") or "delta"
    x = float(opts.get("x") or 1e5)
    ladder = _floats(opts["ladder"]) if opts.get("ladder") else None
    top = max(ladder) if ladder else x
    if pi != "zeta" and top > TAU_N:
        raise UsageError(f"--pi {pi} needs x <= {TAU_N:.0e} (tau table reach), got {top:g}")
    if top < 10:
        raise UsageError("x must be at least 10")
    cfg = se.ExperimentConfig(pi=pi, x=x, eta=opts.get("eta"), B=se.DEFAULT_B if opts.get("B") is None else opts["B"],
                              A=1.0 if opts.get("A") is None else opts["A"], rho=opts.get("rho"),
                              seed=opts["seed"], q_max=opts.get("Q"), weight=opts.get("weight") or "plain",
                              variant=opts.get("variant") or "integers", ladder=ladder)
    man.data["config"]["experiment"] = cfg.echo()
    tau = _tau(opts, man) if pi != "zeta" else None
    ex, pmap = _pool(opts)
    try:
        _log(f"bv {pi} x={cfg.xs()} weight={cfg.weight} variant={cfg.variant}")
        curve = se.run_bv_curve(cfg, tau, pmap=pmap)
    finally:
        if ex is not None:
            ex.shutdown()
    rep = curve.report()
    rep.meta["strictly_decreasing"] = curve.strictly_decreasing()
    _emit(_render(rep, opts["format"]), opts, man)
    return EXIT_OK


def cmd_lfunc(opts: dict, man: Manifest) -> int:
    from . import characters as ch
    from . import lfunc_afe as af

    mode = opts["mode"]
    tau = _tau(opts, man)
    if mode == "siegel-scan":
        dmax = int(opts.get("dmax") or af.SIEGEL_MAX_D)
        ds = [1] + ch.fundamental_discriminants(dmax)
        _log(f"siegel-scan over {len(ds)} discriminants")
        rep = af.siegel_scan(ds, tau)
    elif mode == "second-moment":
        Qs = _int_range(opts.get("Q") or "10..100")
        rep = af.second_moment_experiment(float(opts.get("t") or 0.0), Qs, tau, family=opts.get("family") or "all")
    else:
        if opts.get("s") is None:
            raise UsageError("eval needs --s")
        try:
            s = complex(str(opts["s"]).replace(" ", ""))
        except ValueError:
            raise UsageError(f"cannot parse --s {opts['s']!r}")
        d = int(opts.get("d") or 1)
        if d != 1 and not ch.is_fundamental_discriminant(d):
            raise UsageError(f"--d {d} is not a fundamental discriminant")
        ctx = af.make_context(tau, d=d)
        rec = af.afe_eval(s, ctx)
        rep = ExperimentReport("lvalue", ["d", "s_re", "s_im", "value_re", "value_im", "truncation", "est_error"],
                               meta={"d": d, "root_number": [ctx.epsilon.real, ctx.epsilon.imag]})
        rep.add(d=d, s_re=s.real, s_im=s.imag, value_re=rec.value.real, value_im=rec.value.imag,
                truncation=rec.truncation, est_error=float(rec.est_error))
    _emit(_render(rep, opts["format"]), opts, man)
    for f in rep.flags:
        _log(f"flag: {f}")
    return EXIT_OK


def cmd_titchmarsh(opts: dict, man: Manifest) -> int:
    from . import localcoeffs as lc
    from . import titchmarsh as tm

    if not opts.get("pi"):
        raise UsageError("titchmarsh needs --pi")
    xs = _floats(opts.get("x") or "1e3,1e4,1e5")
    if min(xs) < 3:
        raise UsageError("x values must be at least 3")
    if opts["pi"] != "zeta" and max(xs) > TAU_N:
        raise UsageError(f"x beyond tau table reach {TAU_N:.0e}")
    tau = _tau(opts, man) if opts["pi"] != "zeta" else None
    pi = lc.ExemplarPi(opts["pi"], tau)
    B = 1.0 if opts.get("B") is None else float(opts["B"])
    rep = tm.normalized_curve(pi, xs, over=opts.get("over") or "primes", B=B)
    _emit(_render(rep, opts["format"]), opts, man)
    for f in rep.flags:
        _log(f"flag: {f}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "bv": cmd_bv, "lfunc": cmd_lfunc, "titchmarsh": cmd_titchmarsh}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args, parser)
    except (ValueError, OSError, configparser.Error) as e:
        parser.error(str(e))
    man = Manifest(opts)
    try:
        code = COMMANDS[args.command](opts, man)
        man.finish("ok" if code == EXIT_OK else "failed")
        return code
    except UsageError as e:
        man.finish("usage-error", str(e))
        print(f"bvlab {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BvlabError, ValueError) as e:
        man.finish("failed", f"{type(e).__name__}: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e),
                          "record": getattr(e, "record", None)}, sort_keys=True, default=str))
        return EXIT_FAIL
    except BaseException as e:
        man.finish("failed", f"{type(e).__name__}: {e}")
        raise


if __name__ == "__main__":
    sys.exit(main())
