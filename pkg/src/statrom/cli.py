"""``statrom`` command line: ROM convergence, frequency sweeps, statROM studies, 2D tables, data files, plots.

Configuration is a flat INI file (section headers are allowed but only
group keys); any ``--key value`` flag overrides the file.  Every command
writes CSV with a header row, 17 significant digits and LF line endings.
A run that fails part-way leaves a trailing ``#INCOMPLETE`` line and exits
nonzero.
"""

from __future__ import annotations

import argparse
import configparser
import csv
from dataclasses import dataclass, fields
import logging
from pathlib import Path
import sys

import numpy as np

from .assembly import hk1_gram
from .pipeline import (PRESETS, ProblemConfig, generate_data, offline, online, prior_means,
                       relative_hk1_error)

log = logging.getLogger("statrom")

COMMANDS = ("converge-rom", "sweep", "statrom-converge", "scatter2d", "gen-data", "plot")
INCOMPLETE = "#INCOMPLETE"


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- config


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    out = []
    for part in str(text).replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _pairs(text, sep, conv=(float, int)):
    out = []
    for part in str(text).replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        a, b = part.split(sep)
        out.append((conv[0](a), conv[1](b)))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    """A problem configuration plus the experiment grid around it.

    ``cases`` pairs a frequency with an order (``360:12``); ``data_configs``
    pairs a sensor count with an observation count (``5/20``).
    """

    problem: ProblemConfig
    frequencies_hz: tuple = tuple(25.0 * np.arange(1, 21))
    m_values: tuple = (5, 10, 15)
    m_max: int = 15
    cases: tuple = ((360.0, 12), (300.0, 20))
    data_configs: tuple = ((5, 20), (30, 50), (80, 200))
    out: Path = Path("out")

    def __post_init__(self):
        if not self.frequencies_hz:
            raise ConfigError("frequency grid is empty")
        if any(f <= 0 for f in self.frequencies_hz):
            raise ConfigError("frequencies must be positive")
        if not self.m_values or min(self.m_values) < 1:
            raise ConfigError("orders must be at least 1")
        if self.m_max < 1:
            raise ConfigError("m_max must be at least 1")
        if not self.cases or not self.data_configs:
            raise ConfigError("cases and data_configs must not be empty")


_EXPERIMENT_KEYS = {
    "frequencies_hz": _floats,
    "m_values": _ints,
    "m_max": int,
    "cases": lambda v: _pairs(v, ":", (float, int)),
    "data_configs": lambda v: _pairs(v, "/", (int, int)),
}


def read_config(path):
    """Flatten an INI file into one ``key -> string`` dict; a key may appear only once."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    # allow plain key = value lines before any section header
    parser.read_string("[__top__]\n" + text)
    values = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            if key in values:
                raise ConfigError(f"key {key!r} given twice in {path}")
            values[key] = val
    return values


def build_config(values, command):
    values = {k.replace("-", "_"): v for k, v in values.items()}
    default_problem = "scatter2d" if command == "scatter2d" else "helmholtz1d"
    problem = str(values.get("problem", default_problem)).strip()
    if problem not in PRESETS:
        raise ConfigError(f"unknown problem {problem!r}")
    exp_kw, prob_kw = {}, {}
    for key, val in values.items():
        if key in _EXPERIMENT_KEYS:
            try:
                exp_kw[key] = _EXPERIMENT_KEYS[key](val) if isinstance(val, str) else val
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {val!r}") from exc
        elif key == "out":
            exp_kw["out"] = Path(val)
        else:
            prob_kw[key] = val
    known = {f.name for f in fields(ProblemConfig)}
    unknown = sorted(set(prob_kw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        cfg = ProblemConfig.from_dict(prob_kw, base=PRESETS[problem]())
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(cfg, **exp_kw)


# --------------------------------------------------------------------------- output


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


class CsvOut:
    """Write rows as they are produced; on an exception append ``#INCOMPLETE``."""

    def __init__(self, path, header):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(header)
        self.n_cols = len(header)

    def row(self, values):
        if len(values) != self.n_cols:
            raise ValueError(f"row has {len(values)} fields, header has {self.n_cols}")
        self._w.writerow([fmt(v) for v in values])
        self._fh.flush()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self._fh.write(INCOMPLETE + "\n")
        self._fh.close()
        return False


def write_matrix(path, header, rows):
    with CsvOut(path, header) as out:
        for r in rows:
            out.row(list(r))


# --------------------------------------------------------------------------- commands


def cmd_converge_rom(exp):
    """One row per order ``m = 1..m_max``: relative H_k^1 error of the ROM prior mean."""
    cfg = exp.problem
    orders = range(1, exp.m_max + 1)
    mesh, fom, rom = prior_means(cfg, [cfg.omega], orders)
    k, gram = cfg.omega / cfg.c, hk1_gram(mesh)
    path = exp.out / "converge_rom.csv"
    with CsvOut(path, ["m", "rel_error"]) as out:
        for m in orders:
            out.row([m, relative_hk1_error(mesh, fom[0], mesh, rom[m][0], k, gram)])
    return [path]


def cmd_sweep(exp):
    """One row per frequency, one error column per order."""
    cfg = exp.problem
    omegas = 2.0 * np.pi * np.asarray(exp.frequencies_hz)
    mesh, fom, rom = prior_means(cfg, omegas, exp.m_values)
    gram = hk1_gram(mesh)
    path = exp.out / "sweep.csv"
    with CsvOut(path, ["frequency_hz"] + [f"err_m{m}" for m in exp.m_values]) as out:
        for j, (hz, w) in enumerate(zip(exp.frequencies_hz, omegas)):
            k = w / cfg.c
            out.row([hz] + [relative_hk1_error(mesh, fom[j], mesh, rom[m][j], k, gram)
                            for m in exp.m_values])
    return [path]


def _error_columns(cfg, names):
    if cfg.is_complex:
        return [f"{n}_{ch}" for n in names for ch in ("re", "im")]
    return list(names)


def _error_values(cfg, errs, methods):
    out = []
    for meth in methods:
        out.extend(errs[meth][ch] for ch in cfg.channels)
    return out


def cmd_statrom_converge(exp):
    """Classical, statROM and full-order predictive errors for every order in ``m_values``."""
    cfg = exp.problem
    data = generate_data(cfg)
    path = exp.out / "statrom_converge.csv"
    header = ["m"] + _error_columns(cfg, ["err_classical", "err_statrom", "err_fullorder"])
    with CsvOut(path, header) as out:
        for m in exp.m_values:
            c = cfg.with_(m=m)
            res = online(offline(c), c.omega, data, full_order=True)
            out.row([m] + _error_values(c, res.errors, ["without", "with", "fom"]))
    return [path]


def cmd_scatter2d(exp):
    """Posterior errors and learned model-error scales for each (frequency, m) case and data set."""
    cfg = exp.problem
    if not cfg.is_complex:
        raise ConfigError("scatter2d expects a complex problem (plane wave or damping)")
    path = exp.out / "scatter2d.csv"
    header = ["frequency_hz", "m", "n_sensors", "n_obs", "method", "err_re", "err_im",
              "sigma_d_re", "sigma_d_im"]
    names = {"fom": "fom", "without": "without_est", "with": "with_est"}
    with CsvOut(path, header) as out:
        for hz, m in exp.cases:
            c = cfg.with_(m=m, frequency_hz=hz)
            art = offline(c)
            for ns, no in exp.data_configs:
                d = generate_data(c.with_(n_sensors=ns, n_obs=no))
                res = online(art, c.omega, d, full_order=True)
                for meth in ("fom", "without", "with"):
                    e, hp = res.errors[meth], res.hyperparameters[meth]
                    out.row([hz, m, ns, no, names[meth], e["real"], e["imag"],
                             hp["real"].sigma_d, hp["imag"].sigma_d])
    return [path]


def cmd_gen_data(exp):
    """Sensor coordinates, readings per channel and the nodal reference per channel."""
    cfg = exp.problem
    data = generate_data(cfg)
    out_dir = exp.out
    dim = data.coords.shape[1]
    axes = ["x", "y"][:dim]
    paths = [out_dir / "sensors.csv"]
    write_matrix(paths[0], ["sensor"] + axes, ([i] + list(p) for i, p in enumerate(data.coords)))
    nodes = data.ref_mesh.nodes
    parts = {"real": (data.Y.real, data.u_ref.real), "imag": (data.Y.imag, data.u_ref.imag)}
    for ch in cfg.channels:
        Y, ref = parts[ch]
        p = out_dir / f"readings_{ch}.csv"
        write_matrix(p, [f"obs{j}" for j in range(Y.shape[1])], Y)
        q = out_dir / f"reference_{ch}.csv"
        write_matrix(q, ["node"] + axes + ["value"],
                     ([i] + list(nodes[i]) + [ref[i]] for i in range(len(ref))))
        paths += [p, q]
    return paths


# --------------------------------------------------------------------------- plots


def read_numeric_csv(path):
    """Header and float columns of a CSV; non-numeric columns and comment lines are dropped."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise ConfigError(f"{path}: no data rows")
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except (ValueError, IndexError):
            continue
    if len(cols) < 2:
        raise ConfigError(f"{path}: need an x column and at least one numeric series")
    return list(cols), cols


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def svg_line_plot(x, series, xlabel, title, width=640, height=420):
    """Line plot with a base-10 log y axis; nonpositive values are left out."""
    ml, mr, mt, mb = 70, 150, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    x = np.asarray(x, float)
    ys = np.concatenate([s[s > 0] for s in series.values()]) if series else np.zeros(0)
    if ys.size == 0:
        raise ConfigError("nothing positive to plot on a log axis")
    lo, hi = np.floor(np.log10(ys.min())), np.ceil(np.log10(ys.max()))
    hi = hi if hi > lo else lo + 1
    x0, x1 = float(x.min()), float(x.max())
    x1 = x1 if x1 > x0 else x0 + 1

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (hi - np.log10(v)) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml}" y="20" font-family="sans-serif" font-size="14">{_esc(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for e in range(int(lo), int(hi) + 1):
        yy = py(10.0**e)
        out.append(f'<line x1="{ml}" y1="{yy:.2f}" x2="{ml + pw}" y2="{yy:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{ml - 8}" y="{yy + 4:.2f}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="end">1e{e}</text>')
    for v in np.linspace(x0, x1, 6):
        xx = px(v)
        out.append(f'<text x="{xx:.2f}" y="{mt + ph + 18}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="middle">{v:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 10}" font-family="sans-serif" '
               f'font-size="12" text-anchor="middle">{_esc(xlabel)}</text>')
    for i, (name, y) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        ok = y > 0
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_plot(exp, inputs):
    if not inputs:
        raise ConfigError("plot needs at least one --input CSV")
    paths = []
    for src in inputs:
        src = Path(src)
        names, cols = read_numeric_csv(src)
        series = {n: cols[n] for n in names[1:]}
        svg = svg_line_plot(cols[names[0]], series, names[0], src.stem)
        dst = exp.out / (src.stem + ".svg")
        dst.parent.mkdir(parents=True, exist_ok=True)
        dst.write_text(svg, encoding="utf-8", newline="\n")
        paths.append(dst)
    return paths


# --------------------------------------------------------------------------- entry point


def _parse_overrides(extra):
    """``--key value`` pairs left over by argparse."""
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            val = next(it, None)
            if val is None:
                raise ConfigError(f"flag {tok} needs a value")
        out[key.replace("-", "_")] = val
    return out


def make_parser():
    p = argparse.ArgumentParser(prog="statrom", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="INI file with key = value lines")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--input", action="append", default=[], help="CSV to plot (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    parser = make_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = read_config(args.config) if args.config else {}
        values.update(_parse_overrides(extra))
        for key in ("seed", "jobs", "out"):
            if getattr(args, key) is not None:
                values[key] = str(getattr(args, key))
        exp = build_config(values, args.command)
        if args.command == "plot":
            paths = cmd_plot(exp, args.input)
        else:
            handler = {"converge-rom": cmd_converge_rom, "sweep": cmd_sweep,
                       "statrom-converge": cmd_statrom_converge, "scatter2d": cmd_scatter2d,
                       "gen-data": cmd_gen_data}[args.command]
            paths = handler(exp)
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"statrom: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero on any failure
        log.debug("traceback", exc_info=True)
        print(f"statrom: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
