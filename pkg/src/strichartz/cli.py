"""Command line: configuration parsing, experiment runs and report files.

Configurations are TOML files::

    experiment = "model-decay"
    epsilon = 0.125
    k_values = [2, 3, 4]

    [truncation]
    N = 10
    X = 24.0

Unknown keys and missing required keys are errors; everything else falls
back to the defaults in :data:`SCHEMAS`. Output files are named
``<experiment>-<hash>.<ext>`` where the hash covers the resolved config.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import re
import sys
import time
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import EXPERIMENTS, ExperimentResult, Plot
from .sampling import is_power_of_two

__all__ = ["ConfigError", "SCHEMAS", "REQUIRED", "load_config", "parse_config", "config_hash", "run_config",
           "emit_report", "render_svg", "main"]

REQUIRED = object()

SCHEMAS = {
    "verify-whitney": {"max_scale": 8, "lattice": 301},
    "verify-bessel": {
        "seeds": 50, "degree": 5, "resolution": 2048, "N": 64, "max_m": 20,
        "recon_seed": 1, "recon_resolution": 1024, "recon_m": 2, "recon_N": [8, 16, 32, 64],
        "bessel_tol": 1e-4, "recon_tol": 1e-6, "parseval_tol": 1e-6,
    },
    "verify-prop31": {
        "seeds": 20, "k_min": 2, "k_max": 6, "truncation_scale": 1.0,
        "growth_limit": 3.0, "stability_tol": 1e-4, "bessel_tol": 1e-4,
    },
    "strichartz-scan": {
        "seed": 0, "d": REQUIRED, "q": REQUIRED, "seeds": 100,
        "classes": ["band-limited", "indicator-smooth", "gaussian-profile"],
        "box": {}, "stability_tol": 0.02,
        "ascent": {"restarts": 0, "iterations": 30, "probes": 8, "basis_K": 1, "fresh_probes": 100, "margin": 0.1},
    },
    "model-decay": {
        "seed": 0, "epsilon": REQUIRED, "k_values": [2, 3, 4], "sharp": 2, "sharp_k": 2,
        "truncation": {"N": 10, "X": 24.0, "T": 4.0, "nx": 128, "nt": 32},
        "search": {"restarts": 3, "iterations": 40, "probes": 6, "basis_K": 1, "basis_resolution": 128},
        "max_slope": -0.05,
    },
    "levelsets": {
        "seeds": 6, "k_min": 2, "k_max": 3, "resolution": 128,
        "truncation": {"N": 8, "X": 8.0, "T": 2.0, "nx": 64, "nt": 16},
        "lemma_limit": 4.0, "trivial_limit": 10.0,
    },
    "coeff-decay": {"u_min": 8, "u_max": 32, "t_minus_m": 0.5, "max_slope": -4.0},
}

# keys whose values must be powers of two, wherever they appear
_POW2 = {"resolution", "nx", "nt", "recon_resolution", "basis_resolution"}
_K_LIMITS = {"verify-prop31": 8, "model-decay": 4, "levelsets": 4}


class ConfigError(ValueError):
    """A malformed or invalid configuration."""


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key) if text else None
    return f" (line {line})" if line else ""


def _merge(defaults: dict, given: dict, text: str, prefix: str = "") -> dict:
    out = {}
    for key in given:
        if key not in defaults:
            raise ConfigError(f"unknown field {prefix + key!r}{_where(text, key)}")
    for key, default in defaults.items():
        name = prefix + key
        if key not in given:
            if default is REQUIRED:
                raise ConfigError(f"missing required field {name!r}")
            out[key] = copy.deepcopy(default)
            continue
        val = given[key]
        if isinstance(default, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"field {name!r} must be a table{_where(text, key)}")
            # an empty default table accepts any numeric fields (box overrides)
            out[key] = _merge(default, val, text, name + ".") if default else dict(val)
            continue
        if default is not REQUIRED:
            ok = (isinstance(val, bool) == isinstance(default, bool)) and (
                isinstance(val, type(default)) or (isinstance(default, float) and isinstance(val, int)))
            if not ok:
                raise ConfigError(f"field {name!r} must be {type(default).__name__}, got {val!r}{_where(text, key)}")
            if isinstance(default, float):
                val = float(val)
        out[key] = val
    return out


def _validate(name: str, cfg: dict, text: str) -> None:
    def walk(d, prefix=""):
        for k, v in d.items():
            if isinstance(v, dict):
                walk(v, prefix + k + ".")
            elif k in _POW2 and not (isinstance(v, int) and is_power_of_two(v)):
                raise ConfigError(f"field {prefix + k!r} must be a power of two, got {v!r}{_where(text, k)}")

    walk(cfg)
    if "epsilon" in cfg and not 0 < cfg["epsilon"] < 0.5:
        raise ConfigError(f"field 'epsilon' must lie in (0, 0.5), got {cfg['epsilon']}{_where(text, 'epsilon')}")
    if name == "strichartz-scan":
        if cfg["d"] not in (1, 2):
            raise ConfigError(f"field 'd' must be 1 or 2{_where(text, 'd')}")
        if not (isinstance(cfg["q"], (int, float)) and cfg["q"] >= 1):
            raise ConfigError(f"field 'q' must be a number >= 1{_where(text, 'q')}")
        cfg["q"] = float(cfg["q"])
        box = cfg["box"]
        if box:
            missing = {"X", "T", "nx", "nt"} - set(box)
            if missing:
                raise ConfigError(f"box is missing {sorted(missing)}")
            for k in ("nx", "nt"):
                if not is_power_of_two(box[k]):
                    raise ConfigError(f"field 'box.{k}' must be a power of two{_where(text, k)}")
    limit = _K_LIMITS.get(name)
    if limit:
        ks = cfg.get("k_values") or list(range(cfg["k_min"], cfg["k_max"] + 1))
        if not ks or min(ks) < 2 or max(ks) > limit:
            raise ConfigError(f"scales {ks} must lie in [2, {limit}] for {name}")
    if name == "verify-whitney" and not 1 <= cfg["max_scale"] <= 12:
        raise ConfigError(f"field 'max_scale' must lie in [1, 12]{_where(text, 'max_scale')}")


def parse_config(text: str, experiment: str | None = None) -> tuple[str, dict]:
    """Parse and validate TOML text; returns (experiment name, resolved config)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = f"line {m.group(1)}: " if m else ""
        raise ConfigError(f"{line}malformed config: {exc}") from None
    name = raw.pop("experiment", None) or experiment
    if name is None:
        raise ConfigError("missing required field 'experiment'")
    if experiment is not None and name != experiment:
        raise ConfigError(f"config is for {name!r}, not {experiment!r}{_where(text, 'experiment')}")
    if name not in SCHEMAS:
        raise ConfigError(f"unknown experiment {name!r}{_where(text, 'experiment')}; expected one of {sorted(SCHEMAS)}")
    cfg = _merge(SCHEMAS[name], raw, text)
    _validate(name, cfg, text)
    return name, cfg


def load_config(path, experiment: str | None = None) -> tuple[str, dict]:
    return parse_config(Path(path).read_text(), experiment)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(name: str, cfg: dict) -> str:
    """First 12 hex digits of sha256 over the canonical JSON of (name, config)."""
    return hashlib.sha256(_canonical({"experiment": name, "config": cfg}).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# emission


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _plain(v):
    """Convert numpy scalars and tuples for JSON."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if hasattr(v, "item"):
        return _plain(v.item())
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(_plain(v)) for v in row])
    return buf.getvalue()


def _nice(v: float) -> str:
    return f"{v:.4g}"


def render_svg(plot: Plot, width: int = 640, height: int = 400) -> str:
    """A small deterministic SVG: one polyline per series, or a histogram."""
    L, R, T, B = 70, 20, 40, 50
    pw, ph = width - L - R, height - T - B
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{plot.title}</text>',
           f'<text x="{L + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">{plot.xlabel}</text>',
           f'<text x="15" y="{T + ph / 2:.1f}" font-size="12" transform="rotate(-90 15 {T + ph / 2:.1f})" '
           f'text-anchor="middle">{plot.ylabel}</text>',
           f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]

    if plot.kind == "histogram":
        values = [v for vs in plot.series.values() for v in vs if math.isfinite(v)]
        if values:
            lo, hi = min(values), max(values)
            if hi == lo:
                lo, hi = lo - 0.5, hi + 0.5
            bins = 20
            counts = [0] * bins
            for v in values:
                counts[min(int((v - lo) / (hi - lo) * bins), bins - 1)] += 1
            top = max(counts)
            bw = pw / bins
            for i, c in enumerate(counts):
                h = ph * c / top
                out.append(f'<rect x="{L + i * bw:.2f}" y="{T + ph - h:.2f}" width="{bw:.2f}" height="{h:.2f}" '
                           f'fill="{colors[0]}" stroke="white"/>')
            out.append(f'<text x="{L}" y="{T + ph + 18}" font-size="11">{_nice(lo)}</text>')
            out.append(f'<text x="{L + pw}" y="{T + ph + 18}" font-size="11" text-anchor="end">{_nice(hi)}</text>')
            out.append(f'<text x="{L - 5}" y="{T + 10}" font-size="11" text-anchor="end">{top}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def ty(v):
        return math.log10(v) if plot.logy else v

    pts = [(x, ty(y)) for s in plot.series.values() for x, y in s
           if math.isfinite(y) and (y > 0 or not plot.logy)]
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
        x1 = x1 if x1 > x0 else x0 + 1
        y1 = y1 if y1 > y0 else y0 + 1
        sx = lambda x: L + pw * (x - x0) / (x1 - x0)
        sy = lambda y: T + ph * (1 - (y - y0) / (y1 - y0))
        for i, (label, series) in enumerate(plot.series.items()):
            coords = [(sx(x), sy(ty(y))) for x, y in series if math.isfinite(y) and (y > 0 or not plot.logy)]
            c = colors[i % len(colors)]
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="'
                       + " ".join(f"{a:.2f},{b:.2f}" for a, b in coords) + '"/>')
            out.append(f'<text x="{L + pw - 5}" y="{T + 15 + 14 * i}" font-size="11" fill="{c}" '
                       f'text-anchor="end">{label}</text>')
        fy = (lambda v: _nice(10**v)) if plot.logy else _nice
        out.append(f'<text x="{L}" y="{T + ph + 18}" font-size="11">{_nice(x0)}</text>')
        out.append(f'<text x="{L + pw}" y="{T + ph + 18}" font-size="11" text-anchor="end">{_nice(x1)}</text>')
        out.append(f'<text x="{L - 5}" y="{T + ph}" font-size="11" text-anchor="end">{fy(y0)}</text>')
        out.append(f'<text x="{L - 5}" y="{T + 10}" font-size="11" text-anchor="end">{fy(y1)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(result: ExperimentResult, out_dir) -> list[Path]:
    """Write JSON, CSV and SVG files for a result; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.experiment}-{config_hash(result.experiment, result.config)}"
    written = []
    doc = {
        "experiment": result.experiment,
        "config_hash": config_hash(result.experiment, result.config),
        "config": _plain(result.config),
        "passed": result.passed,
        "checks": [c.to_dict() for c in result.checks],
        "summary": _plain(result.summary),
        "tables": sorted(result.tables),
    }
    p = out / f"{stem}.json"
    p.write_text(json.dumps(_plain(doc), indent=2, sort_keys=False) + "\n")
    written.append(p)
    for name, (columns, rows) in result.tables.items():
        p = out / f"{stem}-{name}.csv"
        p.write_text(_csv_text(columns, rows))
        written.append(p)
    for name, plot in result.plots.items():
        p = out / f"{stem}-{name}.svg"
        p.write_text(render_svg(plot))
        written.append(p)
    return written


def run_config(path, out_dir="results", jobs: int = 1, experiment: str | None = None,
               overrides: dict | None = None) -> tuple[int, ExperimentResult]:
    """Run the experiment a config file names; exit status 0 iff every check passes."""
    name, cfg = load_config(path, experiment) if path else parse_config("", experiment)
    return _run(name, cfg, out_dir, jobs, overrides)


def _run(name, cfg, out_dir, jobs, overrides=None):
    if overrides:
        text = "\n".join(f"{k} = {json.dumps(v)}" for k, v in overrides.items())
        merged = {**{k: v for k, v in cfg.items()}, **tomllib.loads(text)}
        _, cfg = parse_config(_dump_toml(merged), name)
    result = EXPERIMENTS[name](cfg, jobs)
    emit_report(result, out_dir)
    return (0 if result.passed else 1), result


def _dump_toml(cfg: dict) -> str:
    top, tables = [], []
    for k, v in cfg.items():
        if isinstance(v, dict):
            tables.append(f"[{k}]")
            tables += [f"{kk} = {json.dumps(vv)}" for kk, vv in v.items()]
        else:
            top.append(f"{k} = {json.dumps(v)}")
    return "\n".join(top + tables) + "\n"


def _print_result(result: ExperimentResult, status: int, elapsed: float, out_dir) -> None:
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value!r} {c.relation} {c.threshold!r}")
    print(f"{result.experiment}: {'passed' if status == 0 else 'FAILED'} in {elapsed:.1f}s; "
          f"reports in {out_dir} ({result.experiment}-{config_hash(result.experiment, result.config)}.*)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="strichartz", description="Run extension-operator experiments from configs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="TOML configuration file")
        sp.add_argument("--out", default="results", help="output directory (default: results)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")

    common(sub.add_parser("run", help="run the experiment named in a config file"), config_required=True)
    for name in SCHEMAS:
        sp = sub.add_parser(name, help=f"run {name} (defaults unless --config is given)")
        common(sp)
        if name == "strichartz-scan":
            sp.add_argument("--d", type=int, help="dimension, 1 or 2")
            sp.add_argument("--q", type=float, help="space-time exponent")
            sp.add_argument("--seeds", type=int, help="number of seeded random functions")
        if name == "model-decay":
            sp.add_argument("--epsilon", type=float, help="epsilon in (0, 0.5)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command == "run":
            name, cfg = load_config(args.config)
        else:
            name = args.command
            over = {k: getattr(args, k) for k in ("d", "q", "seeds", "epsilon") if getattr(args, k, None) is not None}
            if args.config:
                text = Path(args.config).read_text()
                raw = tomllib.loads(text) if over else None
                if over:
                    raw.update(over)
                    raw.setdefault("experiment", name)
                    text = _dump_toml(raw)
                name, cfg = parse_config(text, name)
            else:
                name, cfg = parse_config(_dump_toml(over) if over else "", name)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status, result = _run(name, cfg, args.out, args.jobs)
    _print_result(result, status, time.perf_counter() - t0, args.out)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
