"""Batch command line: every computation as a reproducible run with a checksummed artifact.

Artifacts start with a header block of ``# key: value`` lines (tool version,
command, format, seed, threads, output path, parameters, status) followed by a
``# digest:`` line holding the SHA-256 of everything else in the file. The body
is either a CSV table or a structured-text document of ``key = value`` lines and
``[table name]`` sections containing CSV rows.

Exit codes: 0 success, 1 a checked property failed, 2 usage error or rejected
input, 3 numerical accuracy failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__

MAGIC = "# blowup-alpha artifact"
COMMANDS = ("dims", "gram", "bergman", "lemma31", "alpha-scan", "phi-eps", "case-table",
            "mt-battery", "hoelder", "report")
FORMATS = ("csv", "structured-text")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ACCURACY = 0, 1, 2, 3

#: What each command checks, used by ``report``.
ANCHORS = {
    "dims": "monomial basis dimension formula",
    "gram": "Gram structure and orthonormalization",
    "bergman": "Bergman density leading order",
    "lemma31": "uniform monomial Bergman ratio bound",
    "alpha-scan": "alpha-invariant equals 1/3 (integrability bracket)",
    "phi-eps": "phi_eps integrals blow up exactly for alpha > 1/3",
    "case-table": "exponent case analysis gives alpha < 1/3",
    "mt-battery": "Moser-Trudinger inequality on the round sphere",
    "hoelder": "Holder chain for the properness estimate",
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    threads: int = 1

    def header_lines(self) -> list[str]:
        lines = [MAGIC, f"# tool-version: {__version__}", f"# command: {self.command}",
                 f"# format: {self.format}", f"# seed: {self.seed}", f"# threads: {self.threads}",
                 f"# out: {self.out or '-'}"]
        lines += [f"# param.{k}: {v}" for k, v in sorted(self.params.items())]
        return lines


@dataclass
class Result:
    """What a command produced: key-value summary, tables, and a pass flag."""

    summary: dict
    tables: dict
    passed: bool = True


# -- parameter helpers ------------------------------------------------------------

def _get(cfg: RunConfig, key: str, default, conv):
    raw = cfg.params.get(key)
    if raw is None:
        return default
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key}: {raw!r}") from exc


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _check_known(cfg: RunConfig, allowed: set):
    extra = set(cfg.params) - allowed
    if extra:
        raise UsageError(f"unknown parameters for {cfg.command}: {', '.join(sorted(extra))}")


# -- commands ----------------------------------------------------------------------

def cmd_dims(cfg: RunConfig) -> Result:
    from .sections import basis_dimension, enumerate_basis, multidegrees

    _check_known(cfg, {"N"})
    levels = _get(cfg, "N", [1], _ints)
    if any(n < 1 for n in levels):
        raise UsageError("N must be >= 1")
    rows, ok = [], True
    for n in levels:
        count = len(enumerate_basis(n))
        ok &= count == basis_dimension(n)
        rows.append([n, count, basis_dimension(n), len(multidegrees(n))])
    return Result({"levels": ",".join(map(str, levels))},
                  {"dims": (["N", "tuples", "formula", "multidegrees"], rows)}, ok)


def cmd_gram(cfg: RunConfig) -> Result:
    from .sections import gram_matrix, orthonormalize

    _check_known(cfg, {"N"})
    N = _get(cfg, "N", 1, int)
    if not 1 <= N <= 6:
        raise UsageError("N must lie in 1..6")
    g = gram_matrix(N)
    basis = orthonormalize(g)
    labels = g.labels
    same = np.array([[a.multidegree == b.multidegree for b in labels] for a in labels])
    off = float(np.max(np.abs(g.matrix[~same]))) if (~same).any() else 0.0
    C = basis.coeffs
    roundtrip = float(np.max(np.abs(C.conj().T @ g.matrix @ C - np.eye(C.shape[1]))))
    rows = [[e.label(), *e.multidegree, _fmt(v)] for e, v in zip(labels, np.diag(g.matrix).real)]
    summary = {"N": N, "tuples": len(labels), "rank": len(basis), "dropped": basis.dropped,
               "blocks": len(g.blocks()), "max_off_multidegree": _fmt(off),
               "roundtrip_error": _fmt(roundtrip)}
    return Result(summary, {"diagonal": (["label", "e0", "e1", "e2", "norm_sq"], rows)},
                  off < 1e-10 and roundtrip < 1e-8)


def cmd_bergman(cfg: RunConfig) -> Result:
    from .bergman import bergman_density, line_basis, surface_basis, tyz_leading_check
    from .geometry import Chart, ChartPoint

    _check_known(cfg, {"levels", "model", "points"})
    model = cfg.params.get("model", "line")
    if model not in ("line", "surface"):
        raise UsageError("model must be line or surface")
    levels = _get(cfg, "levels", [4, 8, 16, 32] if model == "line" else [2, 4], _ints)
    npts = _get(cfg, "points", 4, int)
    rng = np.random.default_rng(cfg.seed)
    if model == "line":
        pts = list(rng.normal(size=npts) + 1j * rng.normal(size=npts))
    else:
        charts = [Chart.U0, Chart.U1, Chart.U2]
        pts = [ChartPoint(charts[k % 3], *(rng.normal(size=2) + 1j * rng.normal(size=2)))
               for k in range(npts)]
    n = 1 if model == "line" else 2
    rows = []
    for N in levels:
        basis = line_basis(N) if model == "line" else surface_basis(N)
        for k, p in enumerate(pts):
            d = bergman_density(basis, p)
            rows.append([N, k, _fmt(d), _fmt(d / N**n)])
    summary = {"model": model, "levels": ",".join(map(str, levels))}
    if model == "line":
        fit = tyz_leading_check(levels, pts, model="line")
        summary.update(a0_est=_fmt(fit.a0), slope_est=_fmt(float(np.mean(fit.slope_est))))
        ok = 0.95 <= fit.a0 <= 1.05
    else:
        ratios = np.array([float(r[3]) for r in rows])
        summary.update(ratio_min=_fmt(ratios.min()), ratio_max=_fmt(ratios.max()))
        ok = bool(np.all((ratios > 0.5) & (ratios < 2.0)))
    return Result(summary, {"density": (["N", "point_id", "density", "density_over_N^n"], rows)}, ok)


def cmd_lemma31(cfg: RunConfig) -> Result:
    from .bergman import bergman_ratio_bound, random_chart_grid
    from .geometry import Chart

    _check_known(cfg, {"n", "grid"})
    levels = _get(cfg, "n", [1, 2, 3, 4, 5, 6], _ints)
    npts = _get(cfg, "grid", 10000, int)
    if any(n < 1 for n in levels) or npts < 1:
        raise UsageError("n and grid must be positive")
    rng = np.random.default_rng(cfg.seed)
    rows, ok = [], True
    for n in levels:
        grid = [random_chart_grid(c, npts, rng) for c in (Chart.U0, Chart.U1, Chart.U2)]
        sup, bound = bergman_ratio_bound(n, grid)
        ok &= sup <= bound
        rows.append([n, _fmt(sup), _fmt(bound), _fmt(bound - sup), sup <= bound])
    return Result({"grid_per_chart": npts},
                  {"bound": (["n", "sup_found", "bound", "margin", "holds"], rows)}, ok)


def _scan_model(cfg: RunConfig):
    from .threshold import LimitPotential, MonomialModel, lct_oracle

    phi = cfg.params.get("phi", "phi0")
    if phi == "phi0":
        return LimitPotential(), Fraction(1, 3)
    if phi == "monomial":
        a = _get(cfg, "a", 3.0, float)
        b = _get(cfg, "b", 3.0, float)
        if a <= 0 or b <= 0:
            raise UsageError("monomial exponents must be positive")
        return MonomialModel(a, b), lct_oracle([Fraction(a), Fraction(b)])
    raise UsageError("phi must be phi0 or monomial")


def cmd_alpha_scan(cfg: RunConfig) -> Result:
    from .threshold import alpha_bracket, alpha_scan

    _check_known(cfg, {"alpha", "phi", "a", "b", "ladder-depth", "bracket", "expect"})
    model, target = _scan_model(cfg)
    depth = _get(cfg, "ladder-depth", 60, int)
    if depth < 4:
        raise UsageError("ladder-depth must be >= 4")
    alphas = _get(cfg, "alpha", [0.30, 0.37], _floats)
    if any(a <= 0 for a in alphas):
        raise UsageError("alpha must be positive")
    expect = cfg.params.get("expect")
    expected = expect.split(",") if expect else None
    if expected is not None and len(expected) != len(alphas):
        raise UsageError("expect needs one verdict per alpha")
    rows, summary, ok = [], {"target": str(target)}, True
    for k, a in enumerate(alphas):
        res = alpha_scan(model, a, depth)
        for level, d, est in res.ladder:
            rows.append([_fmt(a), _fmt(d), _fmt(est), res.verdict.value])
        summary[f"verdict[{a!r}]"] = res.verdict.value
        if expected is not None:
            ok &= res.verdict.value == expected[k]
    if _get(cfg, "bracket", 0, int):
        lo, hi, scans = alpha_bracket(model, ladder_depth=depth)
        summary.update(bracket_lo=_fmt(lo), bracket_hi=_fmt(hi), bracket_width=_fmt(hi - lo),
                       bracket_scans=len(scans))
        ok &= lo < target < hi and hi - lo <= 0.10
    return Result(summary, {"scan": (["alpha", "depth", "estimate", "verdict"], rows)}, ok)


def cmd_phi_eps(cfg: RunConfig) -> Result:
    from .threshold import phi_eps_divergence

    _check_known(cfg, {"alphas", "eps-ladder"})
    alphas = _get(cfg, "alphas", [0.2, 0.3, 0.4, 0.5], _floats)
    eps = _get(cfg, "eps-ladder", [1e-1, 1e-2, 1e-3, 1e-4], _floats)
    try:
        table = phi_eps_divergence(alphas, eps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows, ok = [], True
    ratios, rel = table.ratios(), table.rel_last_change()
    for i, a in enumerate(alphas):
        for j, e in enumerate(eps):
            rows.append([_fmt(a), _fmt(e), _fmt(table.values[i, j])])
        if a > 1 / 3:
            good = bool(np.all(ratios[i] > 1) and ratios[i, -1] >= 1.5)
        elif a > 0:
            good = bool(rel[i] < 1e-2)
        else:
            good = True
        ok &= good
    summary = {f"last_ratio[{a!r}]": _fmt(ratios[i, -1]) for i, a in enumerate(alphas)}
    return Result(summary, {"phi_eps": (["alpha", "eps", "integral"], rows)}, ok)


def cmd_case_table(cfg: RunConfig) -> Result:
    from .threshold import case_table

    _check_known(cfg, {"samples"})
    samples = _get(cfg, "samples", ["1/2", "1", "2", "3"], lambda s: s.split(","))
    try:
        rows, sup = case_table([Fraction(s) for s in samples])
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from exc
    out = [[r.case, str(r.m_over_N), str(r.argsup_p), str(r.sup_bound)] for r in rows]
    return Result({"supremum": str(sup)},
                  {"cases": (["case", "m_over_N", "argsup_p", "sup_bound"], out)},
                  sup == Fraction(1, 3))


def cmd_mt_battery(cfg: RunConfig) -> Result:
    from .functionals import SphereMesh, SpherePotential, compute_F, mt_sphere_check, random_battery

    _check_known(cfg, {"count", "degree"})
    count = _get(cfg, "count", 50, int)
    degree = _get(cfg, "degree", 8, int)
    if count < 1 or not 1 <= degree <= 30:
        raise UsageError("count must be positive and degree in 1..30")
    mesh = SphereMesh()
    pots = [SpherePotential.constant(mesh, 0.0)] + random_battery(mesh, count, degree, cfg.seed)
    rows, ok = [], True
    for k, p in enumerate(pots):
        fv = compute_F(p)
        lhs, rhs, holds = mt_sphere_check(p)
        ok &= holds
        rows.append([k, _fmt(fv.F), _fmt(fv.J), _fmt(fv.I), _fmt(fv.mean), _fmt(fv.lambda1_norm),
                     _fmt(lhs), _fmt(rhs)])
    zero = mt_sphere_check(pots[0])
    ok &= abs(zero[0] - zero[1]) < 1e-8
    return Result({"count": count, "degree": degree, "zero_gap": _fmt(zero[1] - zero[0])},
                  {"battery": (["potential_id", "F", "J", "I", "mean", "lambda1_norm",
                                "mt_lhs", "mt_rhs"], rows)}, ok)


def cmd_hoelder(cfg: RunConfig) -> Result:
    from .functionals import SphereMesh, compute_I, compute_J, hoelder_chain_check, random_battery
    from .threshold import HoelderSplit, InvalidSplitError

    _check_known(cfg, {"eps", "eps1", "eps2", "count"})
    try:
        split = HoelderSplit(_get(cfg, "eps", 0.02, float), _get(cfg, "eps1", 0.002, float),
                             _get(cfg, "eps2", 0.0002, float))
    except InvalidSplitError as exc:
        raise UsageError(str(exc)) from exc
    count = _get(cfg, "count", 50, int)
    mesh = SphereMesh()
    rows, ok = [], True
    for k, p in enumerate(random_battery(mesh, count, 8, cfg.seed)):
        rep = hoelder_chain_check(p, split)
        J, I = compute_J(p), compute_I(p)
        ok &= rep.holds() and J <= I + 1e-8 and I <= 2 * J + 1e-8
        for link in rep.links + [rep.final]:
            rows.append([k, link.name, _fmt(link.log_lhs), _fmt(link.log_rhs), _fmt(link.slack)])
    summary = {"alpha1": _fmt(split.alpha1), "alpha2": _fmt(split.alpha2), "p": _fmt(split.p),
               "q": _fmt(split.q), "delta": _fmt(split.delta)}
    return Result(summary, {"chain": (["potential_id", "link", "log_lhs", "log_rhs", "slack"], rows)}, ok)


HANDLERS = {
    "dims": cmd_dims, "gram": cmd_gram, "bergman": cmd_bergman, "lemma31": cmd_lemma31,
    "alpha-scan": cmd_alpha_scan, "phi-eps": cmd_phi_eps, "case-table": cmd_case_table,
    "mt-battery": cmd_mt_battery, "hoelder": cmd_hoelder,
}


# -- artifact I/O ---------------------------------------------------------------------

def render_body(result: Result, fmt: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if fmt == "csv":
        for k, (header, rows) in enumerate(result.tables.values()):
            if k:
                buf.write("\n")
            w.writerow(header)
            w.writerows(rows)
        return buf.getvalue()
    for key, val in result.summary.items():
        buf.write(f"{key} = {val}\n")
    for name, (header, rows) in result.tables.items():
        buf.write(f"[table {name}]\n")
        w.writerow(header)
        w.writerows(rows)
    return buf.getvalue()


def render_artifact(cfg: RunConfig, result: Result) -> str:
    head = cfg.header_lines() + [f"# status: {'pass' if result.passed else 'fail'}"]
    text = "\n".join(head) + "\n" + render_body(result, cfg.format)
    digest = hashlib.sha256(text.encode()).hexdigest()
    lines = text.split("\n")
    lines.insert(len(head), f"# digest: {digest}")
    return "\n".join(lines)


def write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ArtifactError(ValueError):
    pass


def read_artifact(path: str) -> tuple[RunConfig, str, str]:
    """Parse and verify an artifact; returns ``(config, status, body)``.

    Raises :class:`ArtifactError` for foreign files or a digest mismatch.
    """
    with open(path, newline="") as f:
        text = f.read()
    lines = text.split("\n")
    if not lines or lines[0] != MAGIC:
        raise ArtifactError(f"{path}: not an artifact of this tool")
    digest_idx = next((i for i, l in enumerate(lines) if l.startswith("# digest: ")), None)
    if digest_idx is None:
        raise ArtifactError(f"{path}: missing digest")
    claimed = lines[digest_idx][len("# digest: "):]
    rest = "\n".join(lines[:digest_idx] + lines[digest_idx + 1:])
    if hashlib.sha256(rest.encode()).hexdigest() != claimed:
        raise ArtifactError(f"{path}: digest mismatch (modified after writing)")
    meta, params = {}, {}
    for l in lines[1:digest_idx]:
        key, _, val = l[2:].partition(": ")
        if key.startswith("param."):
            params[key[len("param."):]] = val
        else:
            meta[key] = val
    cfg = RunConfig(meta["command"], params, None if meta["out"] == "-" else meta["out"],
                    meta["format"], int(meta["seed"]), int(meta["threads"]))
    body = "\n".join(lines[digest_idx + 1:])
    return cfg, meta["status"], body


def report(paths) -> Result:
    rows = []
    for p in paths:
        cfg, status, _ = read_artifact(p)
        rows.append([os.path.basename(p), cfg.command, ANCHORS.get(cfg.command, ""), status])
    passed = all(r[3] == "pass" for r in rows)
    summary = {"artifacts": len(rows), "all_pass": str(passed).lower()}
    return Result(summary, {"summary": (["artifact", "command", "checks", "status"], rows)}, passed)


# -- entry point -------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowup-alpha", description=__doc__.split("\n")[0])
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", default=None, help="artifact path (default: stdout)")
    ap.add_argument("--format", default=None, choices=FORMATS,
                    help="csv by default; report defaults to structured-text")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1,
                    help="recorded in the header; computations are single-process")
    ap.add_argument("inputs", nargs="*", help="artifact files for the report command")
    return ap


def parse_config(argv) -> tuple[RunConfig, list]:
    args = _parser().parse_args(argv)
    params = {}
    for item in args.param:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        params[key] = val
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.inputs and args.command != "report":
        raise UsageError("positional inputs are only accepted by report")
    fmt = args.format or ("structured-text" if args.command == "report" else "csv")
    return RunConfig(args.command, params, args.out, fmt, args.seed, args.threads), args.inputs


def run(cfg: RunConfig, inputs=()) -> int:
    from .quadrature import AccuracyError

    try:
        if cfg.command == "report":
            result = report(inputs)
        else:
            result = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArtifactError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AccuracyError as exc:
        print(f"accuracy failure: {exc}", file=sys.stderr)
        for k, est in enumerate(exc.estimates):
            print(f"  estimate[{k}] = {np.array2string(np.asarray(est), precision=17)}", file=sys.stderr)
        return EXIT_ACCURACY
    text = render_artifact(cfg, result)
    if cfg.out:
        write_atomic(cfg.out, text)
    else:
        sys.stdout.write(text)
    if not result.passed:
        print(f"check failed: {cfg.command} ({ANCHORS.get(cfg.command, 'report')})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg, inputs = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return EXIT_USAGE if exc.code else EXIT_OK
    return run(cfg, inputs)


if __name__ == "__main__":
    sys.exit(main())
