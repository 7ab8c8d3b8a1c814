"""Command line front end: ``bilap <command> --config run.json``.

A run configuration is one JSON document::

    {
      "problem": {"d": 1, "generator": "delta"},
      "quadrature": {"tol_q": 1e-12, "N_max": null},
      "sweep": {"ladder": {"mu_start": 0.1, "ratio": 0.5, "count": 10, "side": "bottom"}},
      "output": {"dir": "out", "format": "csv"}
    }

``generator`` is a built-in name (``delta``, ``laplacian``,
``top_vanishing``, ``bilaplacian``), a fixture name such as
``laplacian_d3``, a path to a generator JSON file (relative to the config
file), or an inline generator object.  Exactly one command block may be
present and it must match the subcommand; ``thresholds`` and
``appendix_verify`` may omit theirs.  Ladders give couplings as offsets
from the threshold of the chosen side: ``mu_o + mu_start * ratio^j`` at the
bottom and ``-mu^o - mu_start * ratio^j`` at the top.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 a requested check failed.
"""

import argparse
import hashlib
import io
import json
import math
import os
import sys
import time

from . import __version__
from .asymptotics import (classify_case, fit_exponent, fit_exponential_rate, leading_constant,
                          resonance_report, threshold_coupling)
from .checks import identity_suites, regular_part_table, singular_part_checks
from .core_model import (GeneratorPotential, bilaplacian_generator_1d, delta_generator,
                         laplacian_generator, top_vanishing_generator)
from .errors import BilapError, ConfigError, DomainError, NoDiscreteSpectrum, NumericalError
from .fixtures import FIXTURES
from .lattice_oracle import DENSE_CAP, oracle_compare
from .spectral_solver import (SpectralProblem, compute_thresholds, e_prime_analytic, e_prime_fd,
                              eigenvalue_solve, sweep)

COMMANDS = ("thresholds", "eigenvalue", "sweep", "fit", "oracle", "appendix-verify")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

_BUILTIN = {
    "delta": delta_generator,
    "laplacian": laplacian_generator,
    "top_vanishing": top_vanishing_generator,
}


# -- configuration ----------------------------------------------------------------

def _block_key(command):
    return command.replace("-", "_")


def load_config(path):
    """Read a JSON config; syntax errors become :class:`ConfigError`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc})", field="config") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          field="config") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object", field="config")
    cfg.setdefault("_base_dir", os.path.dirname(os.path.abspath(path)))
    return cfg


def config_hash(cfg):
    """sha256 of the canonical JSON form (sorted keys, no private keys)."""
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    text = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _number(block, key, field, default=None, positive=False):
    if key not in block:
        if default is None:
            raise ConfigError("missing", field=f"{field}.{key}")
        return default
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"expected a finite number, got {val!r}", field=f"{field}.{key}")
    if positive and val <= 0:
        raise ConfigError("must be positive", field=f"{field}.{key}")
    return float(val)


def build_generator(problem, base_dir="."):
    """Generator from the ``problem`` block."""
    if not isinstance(problem, dict):
        raise ConfigError("must be an object", field="problem")
    source = problem.get("generator")
    if source is None:
        raise ConfigError("missing", field="problem.generator")
    d = problem.get("d")
    if isinstance(source, dict):
        data = dict(source)
        if d is not None:
            data.setdefault("d", d)
        gen = GeneratorPotential.from_dict(data)
    elif isinstance(source, str) and source in FIXTURES:
        gen = FIXTURES[source].generator
    elif source == "bilaplacian":
        gen = bilaplacian_generator_1d()
    elif source in _BUILTIN:
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise ConfigError(f"expected a positive integer, got {d!r}", field="problem.d")
        gen = _BUILTIN[source](d)
    elif isinstance(source, str) and source.endswith(".json"):
        path = source if os.path.isabs(source) else os.path.join(base_dir, source)
        try:
            gen = GeneratorPotential.load(path)
        except OSError as exc:
            raise ConfigError(f"cannot read generator file ({exc})", field="problem.generator") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in generator file: {exc.msg}", field="problem.generator") from exc
    else:
        raise ConfigError(f"unknown generator {source!r}", field="problem.generator")
    if d is not None and d != gen.d:
        raise ConfigError(f"d={d} does not match the generator dimension {gen.d}", field="problem.d")
    return gen


def build_problem(cfg):
    if "problem" not in cfg:
        raise ConfigError("missing", field="problem")
    gen = build_generator(cfg["problem"], cfg.get("_base_dir", "."))
    quad = cfg.get("quadrature", {})
    if not isinstance(quad, dict):
        raise ConfigError("must be an object", field="quadrature")
    tol_q = _number(quad, "tol_q", "quadrature", default=1e-12, positive=True)
    n_max = quad.get("N_max")
    if n_max is not None and (not isinstance(n_max, int) or isinstance(n_max, bool) or n_max < 8):
        raise ConfigError("expected an integer >= 8 or null", field="quadrature.N_max")
    return SpectralProblem(gen, tol_q=tol_q, N_max=n_max)


def command_block(cfg, command):
    """The block for ``command``; rejects configs with other command blocks."""
    keys = {_block_key(c) for c in COMMANDS}
    present = [k for k in keys if k in cfg]
    want = _block_key(command)
    others = [k for k in present if k != want]
    if others:
        raise ConfigError(f"config holds blocks for other commands: {sorted(others)}", field=others[0])
    if want not in cfg:
        if command in ("thresholds", "appendix-verify"):
            return {}
        raise ConfigError("missing command block", field=want)
    block = cfg[want]
    if not isinstance(block, dict):
        raise ConfigError("must be an object", field=want)
    return block


def mu_values(block, report, field):
    """Couplings from ``mu``, ``mu_list`` or ``ladder``."""
    sources = [k for k in ("mu", "mu_list", "ladder") if k in block]
    if len(sources) != 1:
        raise ConfigError("give exactly one of mu, mu_list, ladder", field=field)
    key = sources[0]
    if key == "mu":
        return [_number(block, "mu", field)]
    if key == "mu_list":
        lst = block["mu_list"]
        if not isinstance(lst, list) or not lst:
            raise ConfigError("expected a non-empty list", field=f"{field}.mu_list")
        return [_number({"mu": m}, "mu", f"{field}.mu_list") for m in lst]
    lad = block["ladder"]
    if not isinstance(lad, dict):
        raise ConfigError("must be an object", field=f"{field}.ladder")
    start = _number(lad, "mu_start", f"{field}.ladder", positive=True)
    ratio = _number(lad, "ratio", f"{field}.ladder")
    if not 0.0 < ratio < 1.0:
        raise ConfigError("must lie in (0, 1)", field=f"{field}.ladder.ratio")
    count = lad.get("count")
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        raise ConfigError("expected a positive integer", field=f"{field}.ladder.count")
    side = lad.get("side", "bottom")
    if side not in ("bottom", "top"):
        raise ConfigError("expected 'bottom' or 'top'", field=f"{field}.ladder.side")
    thr = threshold_coupling(report, side)
    sgn = 1.0 if side == "bottom" else -1.0
    return [thr + sgn * start * ratio ** j for j in range(count)]


# -- commands ---------------------------------------------------------------------
# Each returns (payload, table, passed).  ``table`` is (columns, rows) for CSV.

def cmd_thresholds(cfg):
    block = command_block(cfg, "thresholds")
    prob = build_problem(cfg)
    check = bool(block.get("check_divergence", True))
    rep = compute_thresholds(prob, check_divergence=check)
    res = resonance_report(rep)
    payload = {"thresholds": rep.to_dict(), "threshold_states": {"bottom": res["bottom"], "top": res["top"]}}
    cols = ["quantity", "value"]
    rows = [[k, v] for k, v in rep.to_dict().items() if not isinstance(v, dict)]
    return payload, (cols, rows), True


def _eigen_rows(prob, mus, report, with_derivatives):
    rows = []
    for mu in mus:
        row = {"mu": mu, "status": "ok", "side": None, "e": None, "residual": None, "grid_N": None,
               "iterations": None, "e_prime_analytic": None, "e_prime_fd": None}
        try:
            r = eigenvalue_solve(prob, mu, report)
            row.update(side=r.side.value, e=r.e, offset=r.offset, residual=r.residual,
                       grid_N=r.grid_N, iterations=r.iterations)
            if with_derivatives:
                row["e_prime_analytic"] = e_prime_analytic(prob, mu, r)
                row["e_prime_fd"] = e_prime_fd(prob, mu, report=report)
        except (NumericalError, NoDiscreteSpectrum) as exc:
            row["status"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


SWEEP_COLUMNS = ["mu", "side", "e", "residual", "grid_N", "iterations", "e_prime_analytic", "e_prime_fd", "status"]


def cmd_eigenvalue(cfg):
    block = command_block(cfg, "eigenvalue")
    prob = build_problem(cfg)
    report = prob.thresholds()
    mus = mu_values(block, report, "eigenvalue")
    rows = _eigen_rows(prob, mus, report, with_derivatives=bool(block.get("derivatives", False)))
    payload = {"thresholds": report.to_dict(), "rows": rows}
    ok = all(r["status"] == "ok" for r in rows)
    if not ok and all(r["status"].startswith("NoDiscreteSpectrum") for r in rows if r["status"] != "ok"):
        raise NoDiscreteSpectrum(next(r["mu"] for r in rows if r["status"] != "ok"),
                                 report.mu_lower, report.mu_upper)
    return payload, (SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows]), ok


def cmd_sweep(cfg):
    block = command_block(cfg, "sweep")
    prob = build_problem(cfg)
    report = prob.thresholds()
    mus = sorted(mu_values(block, report, "sweep"))
    rows = _eigen_rows(prob, mus, report, with_derivatives=bool(block.get("derivatives", True)))
    shape = sweep(prob, [r["mu"] for r in rows if r["status"] == "ok"], report) \
        if sum(r["status"] == "ok" for r in rows) >= 2 else None
    payload = {"thresholds": report.to_dict(), "rows": rows,
               "shape": None if shape is None else {k: v for k, v in shape.to_dict().items() if k != "rows"}}
    table = (SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows])
    if any(r["status"] != "ok" for r in rows):
        raise _PartialFailure(payload, table)
    return payload, table, True


class _PartialFailure(Exception):
    def __init__(self, payload, table):
        super().__init__("some rows failed")
        self.payload, self.table = payload, table


def cmd_fit(cfg):
    block = command_block(cfg, "fit")
    prob = build_problem(cfg)
    report = prob.thresholds()
    mus = mu_values(block, report, "fit")
    edge = block.get("edge")
    if edge is None:
        edge = "bottom" if all(m > 0 for m in mus) else "top"
    if edge not in ("bottom", "top"):
        raise ConfigError("expected 'bottom' or 'top'", field="fit.edge")
    tol = _number(block, "tolerance", "fit", default=0.01, positive=True)
    thr = threshold_coupling(report, edge)
    window = block.get("window")
    if window is not None:
        if not (isinstance(window, list) and len(window) == 2):
            raise ConfigError("expected [delta_min, delta_max]", field="fit.window")
        lo, hi = float(window[0]), float(window[1])
        mus = [m for m in mus if lo <= abs(m - thr) <= hi]
    case = classify_case(report, edge)
    pred = leading_constant(report, case)
    results = [eigenvalue_solve(prob, m, report) for m in sorted(mus)]
    rows = [[r.mu, abs(r.mu - thr), r.offset] for r in results]
    payload = {"case": case.to_dict(), "prediction": pred.to_dict(), "threshold": thr}
    if pred.exponential:
        fit = fit_exponential_rate(results, edge, thr, float(pred.energy_power))
        payload["fit"] = fit
        rel = abs(fit["rate"] - pred.leading_constant) / pred.leading_constant
        payload["summary"] = {"predicted": pred.leading_constant, "fitted": fit["rate"], "relative_error": rel}
    else:
        kind = "dlogd" if pred.has_log_correction else (pred.log_factor or None)
        fit = fit_exponent(results, edge, thr, log_correction=kind)
        payload["fit"] = fit.to_dict()
        want = float(pred.energy_exponent)
        got = fit.corrected["exponent"] if pred.log_factor else fit.exponent_hat
        rel = abs(got - want) / want
        payload["summary"] = {"predicted": want, "fitted": got, "relative_error": rel}
    payload["summary"]["tolerance"] = tol
    payload["summary"]["passed"] = rel <= tol
    table = (["mu", "delta", "e_minus_edge"], rows)
    return payload, table, rel <= tol


def cmd_oracle(cfg):
    block = command_block(cfg, "oracle")
    prob = build_problem(cfg)
    mu = _number(block, "mu", "oracle")
    N = block.get("N", 64)
    if not isinstance(N, int) or isinstance(N, bool) or N < 4:
        raise ConfigError("expected an integer >= 4", field="oracle.N")
    levels = block.get("levels", 3)
    tol = _number(block, "tolerance", "oracle", default=1e-10, positive=True)
    cmp_ = oracle_compare(prob, mu, N, levels=levels)
    e = cmp_.e_secular if cmp_.e_secular is not None else 0.0
    agree = cmp_.abs_diff is None or cmp_.abs_diff <= tol * max(1.0, abs(e))
    passed = bool(agree and (cmp_.status == "no_root" or cmp_.gaps_decreasing))
    payload = {"comparison": cmp_.to_dict(), "tolerance": tol, "dense_cap": DENSE_CAP, "passed": passed}
    cols = ["N", "e_secular", "e_matrix", "diff", "continuum_gap"]
    rows = []
    for i, r in enumerate(cmp_.ladder):
        rows.append([r["N"], r["e_secular"], cmp_.e_matrix if i == 0 else None,
                     cmp_.abs_diff if i == 0 else None, r["continuum_gap"]])
    return payload, (cols, rows), passed


def cmd_appendix_verify(cfg):
    block = command_block(cfg, "appendix-verify")
    samples = block.get("samples", 10_000)
    seed = block.get("seed", 0)
    if not isinstance(samples, int) or samples < 10:
        raise ConfigError("expected an integer >= 10", field="appendix_verify.samples")
    sing = singular_part_checks()
    reg = regular_part_table()
    ident = identity_suites(samples=samples, seed=seed)
    passed = all(r["passed"] for r in sing + reg + ident)
    payload = {"singular_parts": sing, "regular_parts": reg, "identities": ident, "passed": passed}
    rows = [[r["name"], r["value"], r["target"], r["passed"]] for r in sing]
    rows += [[f"j_{r['m']} - singular part settles", r["difference"][-1], None, r["passed"]] for r in reg]
    rows += [[r["name"], r["max_error"], r["tol"], r["passed"]] for r in ident]
    return payload, (["check", "value", "target", "passed"], rows), passed


HANDLERS = {
    "thresholds": cmd_thresholds,
    "eigenvalue": cmd_eigenvalue,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "oracle": cmd_oracle,
    "appendix-verify": cmd_appendix_verify,
}


# -- output -----------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(x)


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _jsonable(obj.item())
    return obj


def render_csv(command, cfg, table, notes=None):
    buf = io.StringIO()
    buf.write(f"# command: {command}\n# version: {__version__}\n# config_hash: {config_hash(cfg)}\n")
    for key, val in (notes or {}).items():
        buf.write(f"# {key}: {_fmt(val)}\n")
    cols, rows = table
    buf.write(",".join(cols) + "\n")
    for row in rows:
        cells = []
        for x in row:
            s = _fmt(x)
            if "," in s or '"' in s:
                s = '"' + s.replace('"', '""') + '"'
            cells.append(s)
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def render_json(command, cfg, payload, status):
    doc = {"command": command, "version": __version__, "config_hash": config_hash(cfg),
           "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
           "status": status, "payload": payload}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_outputs(command, cfg, payload, table, status, out_dir, fmt, timings):
    """Write the report; timings go to a separate file so reports stay reproducible."""
    stem = command.replace("-", "_")
    if fmt == "csv":
        text = render_csv(command, cfg, table, notes={"status": status, **payload.get("summary", {})})
    else:
        text = render_json(command, cfg, payload, status)
    if out_dir is None:
        sys.stdout.write(text)
        return None
    try:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{stem}.{fmt}")
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        if fmt == "csv":
            with open(os.path.join(out_dir, f"{stem}.json"), "w", newline="\n") as fh:
                fh.write(render_json(command, cfg, payload, status))
        with open(os.path.join(out_dir, f"{stem}.timings.json"), "w", newline="\n") as fh:
            json.dump(timings, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ConfigError(f"cannot write to output directory ({exc})", field="output.dir") from exc
    return path


def build_parser():
    p = argparse.ArgumentParser(prog="bilap", description="Rank-one perturbations of the lattice bilaplacian.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "appendix-verify", help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (default: print to stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    command = args.command
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config) if args.config else {}
        out_cfg = cfg.get("output", {})
        if not isinstance(out_cfg, dict):
            raise ConfigError("must be an object", field="output")
        fmt = args.format or out_cfg.get("format", "json")
        if fmt not in ("csv", "json"):
            raise ConfigError("expected 'csv' or 'json'", field="output.format")
        out_dir = args.out or out_cfg.get("dir")
        if out_dir is not None and not os.path.isabs(out_dir) and args.out is None:
            out_dir = os.path.join(cfg.get("_base_dir", "."), out_dir)
        status, code = "ok", EXIT_OK
        try:
            payload, table, passed = HANDLERS[command](cfg)
            if not passed:
                status, code = "check_failed", EXIT_CHECK
        except _PartialFailure as exc:
            payload, table = exc.payload, exc.table
            status, code = "partial", EXIT_NUMERICAL
        timings = {"total_seconds": time.perf_counter() - t0}
        write_outputs(command, cfg, payload, table, status, out_dir, fmt, timings)
        return code
    except (ConfigError, DomainError, NoDiscreteSpectrum) as exc:
        print(f"bilap {command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"bilap {command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BilapError as exc:
        print(f"bilap {command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
