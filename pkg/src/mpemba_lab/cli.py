"""Command-line front end.

Subcommands
-----------
classify   region, eigenvalues and exceptional-point diagnostics of one point
quench     observable tracks of both copies (CSV or JSON) plus a crossing report
crossings  crossing reports only, optionally closed form and grid side by side
scan       crossing reports over a rectangular (d_I, d_II) grid
selftest   deterministic regression and seeded property checks

Exit codes: 0 success, 1 configuration error, 2 domain or wrong-region
error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import default_horizon
from .lindblad_core import ControlParams, QuenchExperiment
from .mpemba import (
    WrongRegionError,
    analyze,
    delta_coefficients,
    negative_temperature_epochs,
    observable_tracks,
    region_a1_criterion,
    scan_plane,
)
from .observables import ObservableKind
from .presets import PRESETS
from .spectrum import (
    DEFAULT_EP_TOL,
    E_POINT,
    RegionTag,
    eigensystem,
    normalized_discriminant,
    region_b_m2_gamma,
    region_c_gamma,
    region_d_gamma,
)

__all__ = ["RunConfig", "ConfigError", "main", "dumps_json", "fmt_float"]

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_SELFTEST = 0, 1, 2, 3

_LINES = {"d": region_d_gamma, "c": region_c_gamma, "m2": region_b_m2_gamma}
_METHODS = ("auto", "closed_form", "grid")
_SNAP_E_TOL = 1e-3


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


# --------------------------------------------------------------------------
# serialization


def fmt_float(x: float) -> str:
    """17 significant digits; ``nan``/``inf``/``-inf`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def _json_value(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "null"
        if math.isinf(x):
            return json.dumps(fmt_float(x))
        return fmt_float(x)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) or v is None for v in obj):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _json_value(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    """JSON with insertion-ordered keys and 17-significant-digit floats.

    ``NaN`` becomes ``null`` and infinities the strings ``"inf"``/``"-inf"``.
    """
    return _json_value(obj, 2, 0) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Everything a subcommand needs; round-trips through JSON."""

    preset: str | None = None
    d: float | None = None
    gamma: float | None = None
    gamma_line: str | None = None
    snap_e: bool = False
    d_I: float | None = None
    d_II: float | None = None
    gamma_I: float | None = None
    gamma_II: float | None = None
    observables: list = field(default_factory=lambda: ["rho_gg", "energy"])
    method: str = "auto"
    horizon: float | None = None
    n: int = 2000
    d_I_range: list | None = None
    d_II_range: list | None = None
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    ep_tol: float = DEFAULT_EP_TOL

    _FLOATS = ("d", "gamma", "d_I", "d_II", "gamma_I", "gamma_II", "horizon", "ep_tol")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in names:
                raise ConfigError(f"unknown config field {key!r}")
        cfg = cls()
        for key, value in data.items():
            setattr(cfg, key, value)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        for name in self._FLOATS:
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ConfigError(f"field {name!r} must be a number, got {v!r}")
        for name in ("n", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"field {name!r} must be an integer, got {v!r}")
        if self.n < 2:
            raise ConfigError("field 'n' must be at least 2")
        if not isinstance(self.snap_e, bool):
            raise ConfigError("field 'snap_e' must be true or false")
        if self.gamma_line is not None and self.gamma_line not in _LINES:
            raise ConfigError(f"field 'gamma_line' must be one of {sorted(_LINES)}, got {self.gamma_line!r}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"field 'preset' must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if self.method not in _METHODS + ("both",):
            raise ConfigError(f"field 'method' must be one of {list(_METHODS)}, got {self.method!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"field 'format' must be 'csv' or 'json', got {self.format!r}")
        if not isinstance(self.observables, list) or not self.observables:
            raise ConfigError("field 'observables' must be a non-empty list")
        for name in self.observables:
            try:
                ObservableKind.parse(str(name))
            except ValueError as exc:
                raise ConfigError(f"field 'observables': {exc}") from None
        for name in ("d_I_range", "d_II_range"):
            v = getattr(self, name)
            if v is None:
                continue
            ok = isinstance(v, (list, tuple)) and len(v) == 3
            ok = ok and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
            if not ok or int(v[2]) != v[2] or v[2] < 1:
                raise ConfigError(f"field {name!r} must be [start, stop, count], got {v!r}")
        if self.gamma_line is not None and self.gamma is not None:
            raise ConfigError("fields 'gamma' and 'gamma_line' are mutually exclusive")

    # -- resolution ---------------------------------------------------------

    def kinds(self) -> list[ObservableKind]:
        return [ObservableKind.parse(str(x)) for x in self.observables]

    def post(self) -> ControlParams:
        """Post-quench point, with exceptional lines computed in full precision."""
        if self.snap_e:
            if self.gamma_line is not None:
                raise ConfigError("'snap_e' cannot be combined with 'gamma_line'")
            for given, exact, name in ((self.d, E_POINT.d_tilde, "d"), (self.gamma, E_POINT.gamma_tilde, "gamma")):
                if given is not None and abs(given - exact) > _SNAP_E_TOL * exact:
                    raise ValueError(f"{name}={given} is not near the third-order point; drop it or 'snap_e'")
            return E_POINT
        base = PRESETS[self.preset].post if self.preset else None
        d = self.d if self.d is not None else (base.d_tilde if base else None)
        if d is None:
            raise ConfigError("missing field 'd' (post-quench drive)")
        if self.gamma_line is not None:
            return ControlParams(d, _LINES[self.gamma_line](d))
        if self.gamma is not None:
            return ControlParams(d, self.gamma)
        if base is not None and self.d is None:
            return base
        raise ConfigError("missing field 'gamma' (or 'gamma_line' / 'snap_e')")

    def experiment(self) -> QuenchExperiment:
        post = self.post()
        base = PRESETS[self.preset] if self.preset else None
        d_I = self.d_I if self.d_I is not None else (base.pre_I.d_tilde if base else None)
        d_II = self.d_II if self.d_II is not None else (base.pre_II.d_tilde if base else None)
        if d_I is None or d_II is None:
            raise ConfigError(f"missing field {'d_I' if d_I is None else 'd_II'} (pre-quench drive)")

        def pre_gamma(value, pre):
            if value is not None:
                return value
            if base is not None and pre is not None:
                return pre.gamma_tilde
            return post.gamma_tilde

        g_I = pre_gamma(self.gamma_I, base.pre_I if base else None)
        g_II = pre_gamma(self.gamma_II, base.pre_II if base else None)
        return QuenchExperiment(ControlParams(d_I, g_I), ControlParams(d_II, g_II), post)


# --------------------------------------------------------------------------
# subcommands


def _point_record(p: ControlParams, ep_tol: float) -> dict:
    spec = eigensystem(p, ep_tol)
    lam = spec.lambdas
    nz = lam[1:]
    gaps = [abs(nz[i] - nz[j]) for i in range(3) for j in range(i + 1, 3)]
    rec = {
        "d_tilde": p.d_tilde,
        "gamma_tilde": p.gamma_tilde,
        "region": spec.region.value,
        "ambiguous": spec.ambiguous,
        "lambdas": [[float(z.real), float(z.imag)] for z in lam],
        "lambda_slow": spec.lambda_slow,
        "diagnostics": {
            "normalized_discriminant": normalized_discriminant(p),
            "min_relative_gap": min(gaps) / max(abs(nz).max(), 1e-300),
            "gap_ratio": None,
            "jordan_residual": spec.residual,
            "source": spec.source,
        },
    }
    if np.all(np.abs(nz.imag) == 0) and spec.region is RegionTag.B:
        l2, l3, l4 = nz.real
        rec["diagnostics"]["gap_ratio"] = (l4 - l2) / (l3 - l2)
    return rec


def cmd_classify(cfg: RunConfig) -> tuple[dict, int]:
    return _point_record(cfg.post(), cfg.ep_tol), EXIT_OK


def _reports(cfg: RunConfig, exp: QuenchExperiment, spec, method: str) -> dict:
    out = {}
    for kind in cfg.kinds():
        if method == "both":
            cf = analyze(exp, kind, "closed_form", cfg.horizon, cfg.n, spec)
            gr = analyze(exp, kind, "grid", cfg.horizon, cfg.n, spec)
            rel = None
            if cf.count == gr.count:
                rel = max((abs(a - b) / b for a, b in zip(cf.crossings, gr.crossings)), default=0.0)
            out[kind.value] = {"closed_form": cf.to_dict(), "grid_oracle": gr.to_dict(), "max_relative_difference": rel}
        else:
            out[kind.value] = analyze(exp, kind, method, cfg.horizon, cfg.n, spec).to_dict()
    return out


def _a1_criteria(cfg: RunConfig, exp: QuenchExperiment, spec) -> dict:
    if spec.region not in (RegionTag.A1, RegionTag.A2):
        return {}
    crit = {}
    for kind in cfg.kinds():
        if kind in (ObservableKind.GroundPop, ObservableKind.Energy):
            crit[kind.value] = region_a1_criterion(delta_coefficients(exp, kind, spec), spec)
    return crit


def _experiment_record(exp: QuenchExperiment) -> dict:
    def pt(p):
        return {"d_tilde": p.d_tilde, "gamma_tilde": p.gamma_tilde}

    return {"pre_I": pt(exp.pre_I), "pre_II": pt(exp.pre_II), "post": pt(exp.post)}


def cmd_crossings(cfg: RunConfig) -> tuple[dict, int]:
    exp = cfg.experiment()
    spec = eigensystem(exp.post, cfg.ep_tol)
    record = {
        "experiment": _experiment_record(exp),
        "region": spec.region.value,
        "horizon": cfg.horizon if cfg.horizon is not None else default_horizon(spec),
        "reports": _reports(cfg, exp, spec, cfg.method),
    }
    crit = _a1_criteria(cfg, exp, spec)
    if crit:
        record["oscillatory_criterion"] = crit
    return record, EXIT_OK


def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise ConfigError("missing field 'out' (output path prefix)")
    return Path(cfg.out)


def cmd_quench(cfg: RunConfig) -> tuple[dict, int]:
    out = _require_out(cfg)
    if cfg.method == "both":
        raise ConfigError("field 'method' must be auto, closed_form or grid for quench")
    exp = cfg.experiment()
    spec = eigensystem(exp.post, cfg.ep_tol)
    horizon = cfg.horizon if cfg.horizon is not None else default_horizon(spec)
    times = np.linspace(0.0, horizon, cfg.n)
    columns = {"t": times}
    epochs = None
    for kind in cfg.kinds():
        f1, f2 = observable_tracks(exp, kind, times, spec)
        if kind is ObservableKind.Temperature:
            epochs = [list(e) for e in negative_temperature_epochs(times, f1, f2)]
        with np.errstate(invalid="ignore"):
            columns[f"{kind.value}_I"] = f1
            columns[f"{kind.value}_II"] = f2
            columns[f"delta_{kind.value}"] = f1 - f2
    report = {
        "config": cfg.to_dict(),
        "experiment": _experiment_record(exp),
        "region": spec.region.value,
        "lambdas": [[float(z.real), float(z.imag)] for z in spec.lambdas],
        "horizon": horizon,
        "n": cfg.n,
        "reports": _reports(cfg, exp, spec, cfg.method),
    }
    if epochs is not None:
        report["negative_temperature_epochs"] = epochs
    crit = _a1_criteria(cfg, exp, spec)
    if crit:
        report["oscillatory_criterion"] = crit
    if cfg.format == "csv":
        header = list(columns)
        rows = zip(*(columns[h] for h in header))
        _write_text(out.with_suffix(".csv"), _csv_text(header, rows))
        _write_text(out.with_suffix(".report.json"), dumps_json(report))
    else:
        payload = {"columns": {k: list(v) for k, v in columns.items()}, "report": report}
        _write_text(out.with_suffix(".json"), dumps_json(payload))
    return {"region": spec.region.value, "reports": report["reports"]}, EXIT_OK


def _axis(rng) -> np.ndarray:
    lo, hi, count = rng
    return np.linspace(float(lo), float(hi), int(count))


def cmd_scan(cfg: RunConfig) -> tuple[dict, int]:
    out = _require_out(cfg)
    if cfg.method == "both":
        raise ConfigError("field 'method' must be auto, closed_form or grid for scan")
    if cfg.d_I_range is None or cfg.d_II_range is None:
        raise ConfigError(f"missing field {'d_I_range' if cfg.d_I_range is None else 'd_II_range'}")
    post = cfg.post()
    a, b = _axis(cfg.d_I_range), _axis(cfg.d_II_range)
    kinds = cfg.kinds()
    per_kind = {
        k: scan_plane(post, a, b, k, cfg.gamma_I, cfg.gamma_II, cfg.method, cfg.horizon, cfg.n) for k in kinds
    }
    region = eigensystem(post, cfg.ep_tol).region
    branch_labels = {RegionTag.D: ("W0", "Wm1"), RegionTag.B: ("+", "-"), RegionTag.E: ("+", "-")}.get(region, ())
    label_names = {"W0": "t_W0", "Wm1": "t_Wm1", "+": "t_plus", "-": "t_minus"}

    header = ["i", "j", "d_I", "d_II"]
    for k in kinds:
        header += [f"{k.value}_{c}" for c in ("method", "count", "classification", "parity", "crossings")]
        header += [f"{k.value}_{label_names[lab]}" for lab in branch_labels]
    rows, records = [], []
    summary = {k.value: {} for k in kinds}
    first = per_kind[kinds[0]]
    for idx, base in enumerate(first):
        row = [base.i, base.j, base.d_I, base.d_II]
        rec = {"i": base.i, "j": base.j, "d_I": base.d_I, "d_II": base.d_II}
        for k in kinds:
            rep = per_kind[k][idx].report
            times = dict(zip(rep.labels, rep.crossings)) if rep.labels else {}
            row += [rep.method, rep.count, rep.classification_label, rep.parity.value]
            row.append(";".join(fmt_float(t) for t in rep.crossings))
            row += [fmt_float(times[lab]) if lab in times else "" for lab in branch_labels]
            rec[k.value] = rep.to_dict()
            s = summary[k.value]
            s[rep.classification_label] = s.get(rep.classification_label, 0) + 1
        rows.append(row)
        records.append(rec)
    for k in summary:
        summary[k] = dict(sorted(summary[k].items()))
    meta = {"config": cfg.to_dict(), "post": {"d_tilde": post.d_tilde, "gamma_tilde": post.gamma_tilde},
            "region": region.value, "summary": summary}
    if cfg.format == "csv":
        _write_text(out.with_suffix(".csv"), _csv_text(header, rows))
        _write_text(out.with_suffix(".report.json"), dumps_json(meta))
    else:
        _write_text(out.with_suffix(".json"), dumps_json({"rows": records, "report": meta}))
    return {"region": region.value, "summary": summary}, EXIT_OK


def cmd_selftest(cfg: RunConfig) -> tuple[dict, int]:
    from .selftest import run_selftest

    result = run_selftest(cfg.seed)
    if cfg.out:
        _write_text(Path(cfg.out) / "selftest.json", dumps_json(result))
    code = EXIT_OK if result["passed"] else EXIT_SELFTEST
    return result, code


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_point_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=float, help="post-quench drive d~")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, help="post-quench dissipation gamma~")
    g.add_argument("--gamma-from-d-line", dest="gamma_line", action="store_const", const="d",
                   help="gamma~ on the line where the two slow modes coalesce")
    g.add_argument("--gamma-from-c-line", dest="gamma_line", action="store_const", const="c",
                   help="gamma~ on the line where the two fast modes coalesce")
    g.add_argument("--gamma-from-m2-line", dest="gamma_line", action="store_const", const="m2",
                   help="gamma~ on the line of equal eigenvalue gaps")
    p.add_argument("--snap-e", dest="snap_e", action="store_const", const=True,
                   help="snap to the exact third-order exceptional point (given d/gamma must be close)")
    p.add_argument("--ep-tol", dest="ep_tol", type=float, help="exceptional-point detection tolerance")
    p.add_argument("--config", help="JSON config file; flags override its fields")


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"named experiment: {', '.join(sorted(PRESETS))}")
    p.add_argument("--d-I", dest="d_I", type=float)
    p.add_argument("--d-II", dest="d_II", type=float)
    p.add_argument("--gamma-I", dest="gamma_I", type=float, help="defaults to the post-quench gamma~")
    p.add_argument("--gamma-II", dest="gamma_II", type=float, help="defaults to the post-quench gamma~")
    p.add_argument("--observables", type=lambda s: [x for x in s.split(",") if x],
                   help="comma-separated: rho_gg, energy, entropy, temperature, kl, kl_speed")
    p.add_argument("--horizon", type=float, help="time horizon (default 20/lambda_slow)")
    p.add_argument("--n", type=int, help="grid points (default 2000)")
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--format", choices=("csv", "json"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mpemba-lab", description="Crossing analysis for a driven-dissipative two-level system.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="region and spectrum of one point")
    _add_point_args(p)

    for name, helptext in (("quench", "tracks and crossing reports"), ("crossings", "crossing reports only")):
        p = sub.add_parser(name, help=helptext)
        _add_point_args(p)
        _add_experiment_args(p)
        methods = _METHODS + (("both",) if name == "crossings" else ())
        p.add_argument("--method", choices=methods)

    p = sub.add_parser("scan", help="crossing reports over a (d_I, d_II) grid")
    _add_point_args(p)
    _add_experiment_args(p)
    p.add_argument("--method", choices=_METHODS)
    p.add_argument("--d-I-range", dest="d_I_range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--d-II-range", dest="d_II_range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))

    p = sub.add_parser("selftest", help="deterministic regression checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for selftest.json")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    return parser


_COMMANDS = {
    "classify": cmd_classify,
    "quench": cmd_quench,
    "crossings": cmd_crossings,
    "scan": cmd_scan,
    "selftest": cmd_selftest,
}


def _merge(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    data = cfg.to_dict()
    for name in data:
        value = getattr(args, name, None)
        if value is None:
            continue
        if name in ("d_I_range", "d_II_range"):
            value = [value[0], value[1], int(value[2])]
        data[name] = value
    snap = getattr(args, "snap_e", None) is not None
    if getattr(args, "gamma", None) is not None:
        data["gamma_line"] = None
        data["snap_e"] = snap
    if getattr(args, "gamma_line", None) is not None:
        data["gamma"] = None
        data["snap_e"] = snap
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        cfg = _merge(args)
        result, code = _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"mpemba-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WrongRegionError, ValueError) as exc:
        print(f"mpemba-lab: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    sys.stdout.write(dumps_json(result))
    return code


if __name__ == "__main__":
    sys.exit(main())
