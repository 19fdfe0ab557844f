"""Batch experiment runner: ``scatlab <command> [options]``.

Every run validates its whole configuration before computing anything,
computes, and only then writes its artifacts, a ``summary.txt`` and a
``MANIFEST.txt`` with the SHA-256 of each file.  Outputs contain no
timestamps, so repeated runs with the same configuration are
byte-identical.

Exit status: 0 success, 2 configuration error (nothing written), 3 numerical
non-convergence, 4 I/O error.
"""
import argparse
import concurrent.futures
import contextlib
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, catalog, kernel, radial, specfun
from .errors import DomainError, NonConvergenceError, PotentialError, ScatlabError
from .potentials import DifferencePotential, load_potential

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4

COMMANDS = ("phase-shifts", "kernel", "transform-check", "orthogonality", "functional-scan",
            "nevanlinna", "muntz", "asymptotics", "discriminate")

DEFAULTS = {
    "out": "scatlab-out",
    "potential": "catalog:square_well",
    "potential2": "catalog:zero",
    "lmax": 20,
    "tol": None,
    "grid_xi": kernel.N_XI,
    "grid_eta": kernel.N_ETA,
    "index_set": "arithmetic:0:1",
    "ells": None,
    "r_disc": [0.3, 0.5, 0.7, 0.9],
}

# (low, high) accepted for numeric options
RANGES = {
    "lmax": (0, radial.MAX_ELL),
    "tol": (1e-14, 1e-1),
    "grid_xi": (11, 20001),
    "grid_eta": (11, 20001),
}

CONFIG_KEYS = set(DEFAULTS) | {"command"}


class ConfigError(Exception):
    pass


# -- configuration -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="scatlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"scatlab {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH", help="JSON document with option values")
        s.add_argument("--out", metavar="DIR", help="output directory")
        s.add_argument("--potential", metavar="SPEC", help="catalog:NAME or a JSON file")
        s.add_argument("--potential2", metavar="SPEC", help="second potential (same forms)")
        s.add_argument("--lmax", type=int, metavar="N")
        s.add_argument("--tol", type=float, metavar="X")
        s.add_argument("--grid-xi", dest="grid_xi", type=int, metavar="N")
        s.add_argument("--grid-eta", dest="grid_eta", type=int, metavar="N")
        s.add_argument("--index-set", dest="index_set", metavar="SPEC",
                       help='e.g. "arithmetic:0:2", "primes", "geometric:2", "list:1,4,9"')
    return p


def resolve_config(args):
    """Defaults, then the JSON document, then flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {args.config}: invalid JSON at line {e.lineno}, "
                              f"column {e.colno}: {e.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(k.replace("-", "_") for k in doc) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in doc.items():
            cfg[k.replace("-", "_")] = v
        if "command" in cfg and cfg["command"] not in (None, args.command):
            raise ConfigError(f"config is for command {cfg['command']!r}, not {args.command!r}")
    for k in ("out", "potential", "potential2", "lmax", "tol", "grid_xi", "grid_eta", "index_set"):
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["command"] = args.command
    _check_numbers(cfg)
    return cfg


def _check_numbers(cfg):
    for k, (lo, hi) in RANGES.items():
        v = cfg.get(k)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{k} must be a number, got {v!r}")
        if k != "tol" and int(v) != v:
            raise ConfigError(f"{k} must be an integer, got {v!r}")
        if not lo <= v <= hi:
            raise ConfigError(f"{k}={v} outside the accepted range [{lo}, {hi}]")
    if cfg["command"] == "discriminate" and cfg["lmax"] > 100:
        raise ConfigError("discriminate accepts lmax <= 100")
    rd = cfg.get("r_disc")
    if not isinstance(rd, list) or not rd or not all(
            isinstance(x, (int, float)) and 0 < x <= 0.95 for x in rd):
        raise ConfigError("r_disc must be a non-empty list of radii in (0, 0.95]")
    ells = cfg.get("ells")
    if ells is not None:
        try:
            cfg["ells"] = [complex(*e) if isinstance(e, list) else complex(e) for e in ells]
        except (TypeError, ValueError):
            raise ConfigError("ells must be a list of numbers or [re, im] pairs") from None
        if any(e.real <= 0 for e in cfg["ells"]):
            raise ConfigError("functional-scan needs Re l > 0 for every entry of ells")


def load_potential_spec(spec):
    if not isinstance(spec, str) or not spec:
        raise ConfigError(f"bad potential spec {spec!r}")
    if spec.startswith("catalog:"):
        try:
            return catalog.get(spec[len("catalog:"):])
        except PotentialError as e:
            raise ConfigError(str(e)) from None
    try:
        text = Path(spec).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read potential file {spec}: {e.strerror}") from None
    try:
        return load_potential(text)
    except PotentialError as e:
        raise ConfigError(f"{spec}: {e}") from None


def threads():
    raw = os.environ.get("SCATLAB_THREADS")
    if raw is None or raw == "":
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SCATLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"SCATLAB_THREADS must be a positive integer, got {raw!r}")
    return n


@contextlib.contextmanager
def executor(n):
    if n <= 1:
        yield None
        return
    with concurrent.futures.ThreadPoolExecutor(max_workers=n) as ex:
        yield ex


# -- output ----------------------------------------------------------------------

def _g(x):
    return f"{x:.17g}"


def csv_text(header, rows, meta=None):
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_g(x) if isinstance(x, float) else str(x) for x in row) + "\n")
    return buf.getvalue()


def with_meta(text, meta):
    head = "".join(f"# {k}: {v}\n" for k, v in meta.items())
    return head + text


def write_artifacts(out, files):
    """Write ``{name: text}`` plus MANIFEST.txt through one writer."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out / name).write_bytes(data)
        lines.append(f"{hashlib.sha256(data).hexdigest()}  {name}\n")
    (out / "MANIFEST.txt").write_text("".join(lines), encoding="utf-8")


# -- commands -----------------------------------------------------------------------

def _pid(q, spec):
    return q.name or spec


def _phase_table(q, lmax, pid, ex):
    return radial.phase_shift_table(q, lmax, potential_id=pid, executor=ex)


def cmd_phase_shifts(cfg, ctx):
    q = ctx["q1"]
    table = _phase_table(q, cfg["lmax"], _pid(q, cfg["potential"]), ctx["executor"])
    meta = {"command": "phase-shifts", "potential": _pid(q, cfg["potential"]), "k": 1}
    d = np.abs(table.deltas)
    summary = [f"phase shifts for l = 0..{cfg['lmax']}", f"max |delta| = {d.max():.6g}"]
    return {"phase_shifts.csv": with_meta(table.to_csv(), meta)}, summary


def _kernel(q, cfg):
    tol = cfg["tol"] if cfg["tol"] is not None else kernel.TOL
    kg = kernel.solve_kernel(q, n_xi=cfg["grid_xi"], n_eta=cfg["grid_eta"], tol=tol)
    kg.meta["potential"] = q.name or "custom"
    return kg


def cmd_kernel(cfg, ctx):
    kg = _kernel(ctx["q1"], cfg)
    summary = [f"kernel grid {len(kg.xi)} x {len(kg.eta)}, step {kg.h:.6g}",
               f"convergence delta = {kg.convergence_delta:.3e}",
               f"truncation ratio = {kg.truncation_ratio:.3e}",
               f"fixed-point residual = {kernel.fixed_point_residual(kg):.3e}",
               f"max |L| / majorant = {kernel.check_majorant(kg):.6f}"]
    return {"kernel.csv": kernel_csv_text(kg)}, summary


def kernel_csv_text(kg):
    return kernel.kernel_csv(kg)


TRANSFORM_ELLS = tuple(range(11)) + (40,)


def cmd_transform_check(cfg, ctx):
    q = ctx["q1"]
    tol = cfg["tol"] if cfg["tol"] is not None else 1e-4
    kg = _kernel(q, dict(cfg, tol=None))
    ells = [l for l in TRANSFORM_ELLS if l <= cfg["lmax"]] or [0]
    radii = [0.25 * q.a, 0.5 * q.a, q.a]
    rows = []
    worst = 0.0
    for ell in ells:
        sol = radial.regular_solution(q, ell, grid=np.array(radii))
        for r, phi in zip(radii, sol.phi):
            t = kernel.apply_transform(kg, ell, r)
            rel = abs(t - phi) / abs(phi) if phi != 0 else abs(t)
            worst = max(worst, rel)
            rows.append((ell, float(r), float(t), float(phi), float(rel)))
    ok = worst <= tol
    summary = [f"max rel err = {worst:.3e} {'<=' if ok else '>'} {tol:g}"]
    meta = {"command": "transform-check", "potential": _pid(q, cfg["potential"]),
            "grid": f"{len(kg.xi)}x{len(kg.eta)}"}
    files = {"transform_check.csv": csv_text(
        ["ell", "r", "phi_transform", "phi_direct", "rel_err"], rows, meta)}
    if not ok:
        ctx["status"] = EXIT_NONCONVERGENCE
    return files, summary


def cmd_orthogonality(cfg, ctx):
    p = DifferencePotential(ctx["q1"], ctx["q2"])
    ells = list(range(cfg["lmax"] + 1))
    fn = lambda l: analysis.lagrange_terms(p, l)
    ex = ctx["executor"]
    terms = list(ex.map(fn, ells)) if ex else [fn(l) for l in ells]
    rows = []
    worst = 0.0
    for ell, t in zip(ells, terms):
        gap = abs(t.integral - t.boundary)
        worst = max(worst, gap / t.scale if t.scale else gap)
        rows.append((ell, float(t.integral), float(t.error), float(t.boundary), float(t.phase_form),
                     float(gap)))
    meta = {"command": "orthogonality", "potential": _pid(ctx["q1"], cfg["potential"]),
            "potential2": _pid(ctx["q2"], cfg["potential2"])}
    summary = [f"h(l) for l = 0..{cfg['lmax']}",
               f"max |integral - boundary| / boundary scale = {worst:.3e}"]
    return {"orthogonality.csv": csv_text(
        ["ell", "h", "h_error", "boundary", "phase_form", "abs_gap"], rows, meta)}, summary


def default_scan_ells():
    return [complex(s, t) for s in (0.5, 1.0, 2.0, 3.5, 5.0) for t in (-4.0, -2.0, 0.0, 2.0, 4.0)]


def cmd_functional_scan(cfg, ctx):
    p = DifferencePotential(ctx["q1"], ctx["q2"])
    ells = cfg["ells"] or default_scan_ells()
    samples = analysis.functional_scan(p, ells, executor=ctx["executor"])
    worst = max((s.consistency for s in samples if s.H != 0), default=0.0)
    meta = {"command": "functional-scan", "potential": _pid(ctx["q1"], cfg["potential"]),
            "potential2": _pid(ctx["q2"], cfg["potential2"])}
    summary = [f"{len(samples)} sample points",
               f"max |H - h0 G^2| / |H| = {worst:.3e}"]
    return {"functional_scan.csv": with_meta(analysis.functional_csv(samples), meta)}, summary


def cmd_nevanlinna(cfg, ctx):
    p = DifferencePotential(ctx["q1"], ctx["q2"])
    bound = analysis.nevanlinna_bound(p)
    rows = []
    for r in cfg["r_disc"]:
        v = analysis.nevanlinna_integral(p, r)
        pi = analysis.poisson_integral(r)
        rows.append((float(r), v, bound, pi, 2 * math.pi / (1 - r * r)))
    meta = {"command": "nevanlinna", "potential": _pid(ctx["q1"], cfg["potential"]),
            "potential2": _pid(ctx["q2"], cfg["potential2"])}
    cint, hmax = analysis.cauchy_contour(p)
    summary = [f"bound c1 + 4 pi ln a' = {bound:.6g}",
               f"max integral = {max(r[1] for r in rows):.6g}",
               f"Cauchy integral on |l-2|=0.25: {cint:.3e} (max |H| {hmax:.3e})"]
    return {"nevanlinna.csv": csv_text(
        ["r_disc", "integral", "bound", "poisson_trapezoid", "poisson_exact"], rows, meta)}, summary


def cmd_muntz(cfg, ctx):
    s = ctx["index_set"]
    rows = []
    acc = 0.0
    for ell in s.members(cfg["lmax"]):
        if ell > 0:
            acc += 1.0 / ell
        rows.append((ell, float(acc)))
    summary = [f"index set {s.spec()}: {analysis.muntz_classify(s)}",
               f"partial sum of 1/l up to {cfg['lmax']}: {acc:.6g}"]
    meta = {"command": "muntz", "index_set": s.spec(), "classification": analysis.muntz_classify(s)}
    return {"muntz.csv": csv_text(["ell", "reciprocal_partial_sum"], rows, meta)}, summary


ASYMPTOTIC_ELLS = (20, 30, 40, 60, 100)


def cmd_asymptotics(cfg, ctx):
    q1, q2 = ctx["q1"], ctx["q2"]
    p = DifferencePotential(q1, q2)
    free = q1.is_zero() or q2.is_zero()
    target = p if not free else (q1 if not q1.is_zero() else q2)
    ells = sorted(set(ASYMPTOTIC_ELLS) | ({cfg["lmax"]} if cfg["lmax"] >= 20 else set()))
    a = p.a
    rows_u = []
    for ell in ells:
        for r in (0.25 * a, 0.5 * a, a):
            lu = float(specfun.riccati_log(ell, r).u.log[0])
            la = float(specfun.u_asymptotic_log(ell, r))
            rows_u.append((ell, float(r), lu, la, math.exp(lu - la)))
    rows_m = []
    for ell in ells:
        m = analysis.moment_heuristic(target, ell, free=free)
        rows_m.append((ell, m.log_h, m.log_moment, m.ratio))
    meta = {"command": "asymptotics", "potential": _pid(q1, cfg["potential"]),
            "potential2": _pid(q2, cfg["potential2"]), "path": "u" if free else "phi"}
    summary = [f"u/u_asymptotic at l={r[0]}, r=a: {r[4]:.6f}" for r in rows_u if r[1] == a]
    summary += [f"moment ratio l={r[0]}: {r[3]:.6f}" for r in rows_m]
    return {"asymptotics.csv": csv_text(["ell", "r", "log_u", "log_u_asymptotic", "ratio"], rows_u, meta),
            "moment_heuristic.csv": csv_text(["ell", "log_h", "log_moment", "ratio"], rows_m, meta)}, summary


def cmd_discriminate(cfg, ctx):
    rep = analysis.discrimination_experiment(ctx["q1"], ctx["q2"], ctx["index_set"], cfg["lmax"],
                                             executor=ctx["executor"])
    meta = {"command": "discriminate", "potential": _pid(ctx["q1"], cfg["potential"]),
            "potential2": _pid(ctx["q2"], cfg["potential2"]), "index_set": ctx["index_set"].spec()}
    summary = [f"sup Delta = {rep.sup_delta:.6e}", f"sup |h| = {rep.sup_h:.6e}",
               f"corr(log Delta, log |h|) = {rep.correlation:.6f}",
               f"max |h - |F1 F2| sin(d2 - d1)| = {rep.identity_residual:.3e}"]
    return {"discrimination.csv": with_meta(rep.to_csv(), meta)}, summary


HANDLERS = {
    "phase-shifts": cmd_phase_shifts, "kernel": cmd_kernel, "transform-check": cmd_transform_check,
    "orthogonality": cmd_orthogonality, "functional-scan": cmd_functional_scan,
    "nevanlinna": cmd_nevanlinna, "muntz": cmd_muntz, "asymptotics": cmd_asymptotics,
    "discriminate": cmd_discriminate,
}


def prepare(cfg):
    """Everything that can fail as a configuration error, before any work."""
    ctx = {"status": EXIT_OK, "threads": threads()}
    ctx["q1"] = load_potential_spec(cfg["potential"])
    ctx["q2"] = load_potential_spec(cfg["potential2"])
    try:
        ctx["index_set"] = analysis.parse_index_set(cfg["index_set"], l_max=cfg["lmax"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(cfg["out"])
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} exists and is not a directory")
    return ctx


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        ctx = prepare(cfg)
    except ConfigError as e:
        print(f"scatlab: configuration error: {e}", file=stderr)
        parser.print_usage(stderr)
        return EXIT_CONFIG
    try:
        with executor(ctx["threads"]) as ex:
            ctx["executor"] = ex
            files, summary = HANDLERS[cfg["command"]](cfg, ctx)
    except NonConvergenceError as e:
        print(f"scatlab: numerical non-convergence: {e}", file=stderr)
        return EXIT_NONCONVERGENCE
    except DomainError as e:
        print(f"scatlab: configuration error: {e}", file=stderr)
        return EXIT_CONFIG
    except ScatlabError as e:
        print(f"scatlab: {type(e).__name__}: {e}", file=stderr)
        return EXIT_NONCONVERGENCE
    files["summary.txt"] = "".join(line + "\n" for line in summary)
    try:
        write_artifacts(cfg["out"], files)
    except OSError as e:
        print(f"scatlab: I/O error: {e}", file=stderr)
        return EXIT_IO
    for line in summary:
        print(line, file=stdout)
    return ctx["status"]


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
