"""Batch command-line front end.

Usage::

    ris-ser {pdf,ser,asym,mc,optimize,pathloss} CONFIG [--set key=value ...] [--out PATH]

``CONFIG`` holds one ``key = value`` per line with ``#`` comments.  Every
subcommand writes one CSV and a manifest (``<out>.manifest``) in the same
format as the config, so a manifest can be fed back in to repeat a run.
Exit status: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .eig_dist import (GainProfile, erlang_lambda_pdf, hypoexp_lambda_pdf, lclt_lambda_pdf,
                       spa_grid, spa_lambda_pdf)
from .exceptions import ConfigError, DomainError, RisSerError
from .monte_carlo import (PURPOSE_PHASES, RunSpec, empirical_lambda_pdf, rng_stream,
                          ser_semi_analytic)
from .optimizer import optimize
from .perf_analysis import (SnrSweep, coding_gain_ratio, db_to_linear, diversity_coding_gain,
                            ser_curve)
from .ris_model import (AmplitudeLaw, LinkGeometry, RisConfig, codebook, fraunhofer_distance,
                        get_scheme, path_loss, reflection_gains)

__all__ = ["ExperimentConfig", "parse_config", "load_config", "main", "run"]

SUBCOMMANDS = ("pdf", "ser", "asym", "mc", "optimize", "pathloss")
PHASE_MODES = ("fixed", "uniform", "codebook", "file", "optimized")
METHODS = {
    "pdf": ("exact", "lclt", "spa", "empirical"),
    "ser": ("exact", "spa"),
    "asym": ("exact", "spa"),
    "mc": ("monte-carlo",),
    "optimize": ("spa",),
    "pathloss": ("none",),
}
DEFAULT_METHODS = {
    "pdf": "lclt,spa", "ser": "exact,spa", "asym": "spa", "mc": "monte-carlo",
    "optimize": "spa", "pathloss": "none",
}
META_KEYS = ("subcommand", "toolkit_version")


def _float(text):
    return float(text)


def _int(text):
    val = float(text)
    if val != int(val):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(val)


def _str(text):
    return text.strip()


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], str | None] = lambda v: None


def _range(lo=-math.inf, hi=math.inf, lo_open=False):
    def check(v):
        if not math.isfinite(v):
            return "must be finite"
        if v < lo or (lo_open and v == lo) or v > hi:
            left = "(" if lo_open else "["
            return f"must lie in {left}{lo}, {hi}], got {v}"
        return None
    return check


def _one_of(options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(options)}; got {v!r}"
    return check


def _power_of_two(v):
    return None if v >= 2 and not v & (v - 1) else f"must be a power of two >= 2, got {v}"


KEYS: dict[str, _Key] = {
    "scenario": _Key(_str, "run"),
    "zeta_min": _Key(_float, 0.8, _range(0.0, 1.0)),
    "c_over_pi": _Key(_float, 0.43, _range(0.0)),
    "k": _Key(_float, 1.6, _range(0.0)),
    "amplitude_variant": _Key(_str, "standard", _one_of(("standard", "literal"))),
    "n_ris": _Key(_int, 32, _range(1)),
    "scheme": _Key(lambda t: t.strip().upper(), "G2", _one_of(("G2", "G3", "G4"))),
    "mod_order": _Key(_int, 2, _power_of_two),
    "phase_mode": _Key(_str, "fixed", _one_of(PHASE_MODES)),
    "phase_value": _Key(_str, "best"),
    "codebook_bits": _Key(_int, 2, _range(1, 8)),
    "snr_start_db": _Key(_float, 0.0, _range()),
    "snr_stop_db": _Key(_float, 30.0, _range()),
    "snr_step_db": _Key(_float, 1.0, _range(0.0, lo_open=True)),
    "snr_axis": _Key(_str, "received", _one_of(("received", "transmit"))),
    "method": _Key(_str, ""),
    "trials": _Key(_int, 1_000_000, _range(1)),
    "seed": _Key(_int, 0, _range(0, 2 ** 64 - 1)),
    "groups": _Key(_int, 1, _range(1)),
    "candidates": _Key(_int, 10_000, _range(1)),
    "bins": _Key(_int, 200, _range(10)),
    "f_c_ghz": _Key(_float, 3.8, _range(0.0, lo_open=True)),
    "wavelength": _Key(_str, "auto"),
    "d_tx": _Key(_float, 30.0, _range(0.0, lo_open=True)),
    "d_ty": _Key(_float, 40.0, _range(0.0, lo_open=True)),
    "d_rx": _Key(_float, 30.0, _range(0.0, lo_open=True)),
    "d_ry": _Key(_float, 40.0, _range(0.0, lo_open=True)),
    "d_m": _Key(_float, 4.0397, _range(0.0)),
    "d_n": _Key(_float, 4.0397, _range(0.0)),
    "g_t": _Key(_float, 1.0, _range(0.0, lo_open=True)),
    "g_r": _Key(_float, 1.0, _range(0.0, lo_open=True)),
    "out": _Key(_str, ""),
}


@dataclass
class ExperimentConfig:
    """Resolved and validated configuration for one subcommand."""

    subcommand: str
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def methods(self) -> list[str]:
        return [m.strip() for m in self["method"].split(",") if m.strip()]

    @property
    def out_path(self) -> Path:
        return Path(self["out"] or f"{self['scenario']}_{self.subcommand}.csv")

    @property
    def law(self) -> AmplitudeLaw:
        return AmplitudeLaw(self["zeta_min"], self["c_over_pi"] * math.pi, self["k"],
                            self["amplitude_variant"])

    @property
    def scheme(self):
        return get_scheme(self["scheme"])

    @property
    def geometry(self) -> LinkGeometry:
        wl = self["wavelength"]
        return LinkGeometry(self["d_tx"], self["d_ty"], self["d_rx"], self["d_ry"],
                            self["f_c_ghz"] * 1e9, self["g_t"], self["g_r"], self["d_m"],
                            self["d_n"], None if wl == "auto" else float(wl))

    def snr_db(self) -> np.ndarray:
        return SnrSweep.from_range(self["snr_start_db"], self["snr_stop_db"],
                                   self["snr_step_db"], self.scheme, self["mod_order"]).snr_db

    def gamma_bar(self, snr_db) -> np.ndarray:
        """Linear average received SNR for the sweep values."""
        g = db_to_linear(snr_db)
        if self["snr_axis"] == "transmit":
            g = g * path_loss(self.geometry)
        return g

    def manifest_lines(self, version: str) -> list[str]:
        lines = ["# ris-ser run manifest", f"subcommand = {self.subcommand}",
                 f"toolkit_version = {version}"]
        for key in KEYS:
            val = self.values[key]
            lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
        return lines


def _parse_phase(text: str) -> float:
    m = re.fullmatch(r"\s*([-+0-9.eE]*)\s*\*?\s*pi\s*", text)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return float(text)


def parse_config(text: str) -> dict[str, str]:
    """Raw ``key = value`` pairs; later lines win."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in KEYS and key not in META_KEYS:
            raise ConfigError(key, "unknown key")
        raw[key] = val
    return raw


def resolve(subcommand: str, raw: dict[str, str]) -> ExperimentConfig:
    """Apply defaults, convert types and check every field before any computation."""
    values = {}
    for key, spec in KEYS.items():
        if key in raw:
            try:
                val = spec.parse(raw[key])
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        else:
            val = spec.default
        problem = spec.check(val)
        if problem:
            raise ConfigError(key, problem)
        values[key] = val
    if not values["method"]:
        values["method"] = DEFAULT_METHODS[subcommand]
    cfg = ExperimentConfig(subcommand, values)
    _cross_check(cfg)
    values["out"] = str(cfg.out_path)
    return cfg


def _cross_check(cfg: ExperimentConfig):
    sub = cfg.subcommand
    bad = [m for m in cfg.methods if m not in METHODS[sub]]
    if bad or not cfg.methods:
        raise ConfigError("method", f"{sub} accepts {', '.join(METHODS[sub])}; got {cfg['method']!r}")
    if cfg["snr_start_db"] > cfg["snr_stop_db"]:
        raise ConfigError("snr_start_db", f"empty SNR range: start {cfg['snr_start_db']} > "
                                          f"stop {cfg['snr_stop_db']}")
    wl = cfg["wavelength"]
    if wl != "auto":
        try:
            if not float(wl) > 0.0:
                raise ValueError
        except ValueError:
            raise ConfigError("wavelength", f"must be 'auto' or a positive length, got {wl!r}") from None
    if cfg["groups"] > cfg["n_ris"]:
        raise ConfigError("groups", f"must not exceed n_ris = {cfg['n_ris']}")
    nt = cfg.scheme.nt
    if sub in ("asym", "optimize") and cfg["n_ris"] <= nt:
        raise ConfigError("n_ris", f"must exceed Nt = {nt} for negative moments")
    mode = cfg["phase_mode"]
    if mode == "fixed" and cfg["phase_value"] != "best":
        try:
            _parse_phase(cfg["phase_value"])
        except ValueError:
            raise ConfigError("phase_value", f"not a phase: {cfg['phase_value']!r}") from None
    if mode == "file" and not Path(cfg["phase_value"]).is_file():
        raise ConfigError("phase_value", f"phase file not found: {cfg['phase_value']!r}")


def load_config(subcommand: str, path: str | None, overrides: list[str] = ()) -> ExperimentConfig:
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        raw = parse_config(text)
    for item in overrides:
        raw.update(parse_config(item))
    return resolve(subcommand, raw)


# ---------------------------------------------------------------------------
# phase sources
# ---------------------------------------------------------------------------

def build_config(cfg: ExperimentConfig) -> RisConfig:
    n, mode, law = cfg["n_ris"], cfg["phase_mode"], cfg.law
    if mode == "fixed":
        val = cfg["phase_value"]
        phase = law.best_phase if val == "best" else _parse_phase(val)
        config = RisConfig.constant(n, phase)
    elif mode == "uniform":
        rng = rng_stream(cfg["seed"], PURPOSE_PHASES)
        config = RisConfig(rng.uniform(0.0, 2.0 * math.pi, n))
    elif mode == "codebook":
        cb = codebook(cfg["codebook_bits"])
        rng = rng_stream(cfg["seed"], PURPOSE_PHASES)
        config = RisConfig(cb.phases[rng.integers(0, len(cb), n)])
    elif mode == "file":
        try:
            phases = np.loadtxt(cfg["phase_value"], ndmin=1)
        except ValueError as exc:
            raise ConfigError("phase_value", f"unreadable phase file: {exc}") from None
        if phases.size != n:
            raise ConfigError("phase_value", f"phase file has {phases.size} entries, n_ris = {n}")
        config = RisConfig(phases)
    else:
        res = optimize(n, cfg.scheme.nt, cfg["groups"], cfg["candidates"],
                       codebook(cfg["codebook_bits"]), law, cfg["seed"])
        config = res.config
    return config


def build_profile(cfg: ExperimentConfig) -> GainProfile:
    try:
        return reflection_gains(build_config(cfg), cfg.law)
    except DomainError as exc:
        raise ConfigError("phase_value", str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands; each returns (header, rows)
# ---------------------------------------------------------------------------

def _exact_kind(profile: GainProfile) -> str | None:
    return {"identical": "exact-identical", "distinct": "exact-hypoexp"}.get(profile.classification)


def _require_exact(profile):
    if _exact_kind(profile) is None:
        raise ConfigError("method", "exact needs identical or pairwise distinct gains; "
                                    f"this profile is {profile.classification}")


def cmd_pdf(cfg: ExperimentConfig):
    profile = build_profile(cfg)
    methods = cfg.methods
    emp = None
    if "empirical" in methods:
        emp = empirical_lambda_pdf(RunSpec(cfg["seed"], cfg["trials"]), profile, cfg["bins"])
        y = emp.centers
    else:
        hi = profile.mean + 8.0 * math.sqrt(profile.variance)
        edges = np.linspace(0.0, hi, cfg["bins"] + 1)
        y = 0.5 * (edges[1:] + edges[:-1])
    empty = np.full(y.size, np.nan)
    cols = {"exact": empty, "lclt": empty, "spa": empty, "spa_normalized": empty,
            "empirical": empty}
    if "exact" in methods:
        _require_exact(profile)
        if profile.classification == "identical":
            cols["exact"] = erlang_lambda_pdf(y, profile.n, float(profile.values[0]))
        else:
            cols["exact"] = hypoexp_lambda_pdf(y, profile)
    if "lclt" in methods:
        cols["lclt"] = lclt_lambda_pdf(y, profile)
    if "spa" in methods:
        cols["spa"] = np.atleast_1d(spa_lambda_pdf(y, profile))
        cols["spa_normalized"] = cols["spa"] / spa_grid(profile).mass
    if emp is not None:
        cols["empirical"] = emp.density
    header = ["y", *cols]
    rows = [[yi, *(c[i] for c in cols.values())] for i, yi in enumerate(y)]
    return header, rows


def cmd_ser(cfg: ExperimentConfig):
    profile = build_profile(cfg)
    snr = cfg.snr_db()
    gb = cfg.gamma_bar(snr)
    # curves are evaluated on the received-SNR axis in dB
    axis_db = 10.0 * np.log10(gb)
    curves = []
    for m in cfg.methods:
        if m == "exact":
            _require_exact(profile)
        curves.append(ser_curve(profile, cfg.scheme, cfg["mod_order"], axis_db, m))
    rows = [[snr[i], gb[i], c.method, c.ser[i]] for i in range(snr.size) for c in curves]
    return ["snr_db", "gamma_bar", "method", "ser"], rows


def cmd_asym(cfg: ExperimentConfig):
    profile = build_profile(cfg)
    scheme, m = cfg.scheme, cfg["mod_order"]
    snr = cfg.snr_db()
    gb = cfg.gamma_bar(snr)
    axis_db = 10.0 * np.log10(gb)
    method = cfg.methods[0]
    if method == "exact":
        _require_exact(profile)
    ref = ser_curve(profile, scheme, m, axis_db, method)
    asym = ser_curve(profile, scheme, m, axis_db, "asymptotic")
    gd, gc = diversity_coding_gain(profile, scheme, m)
    r = coding_gain_ratio(profile, scheme)
    header = ["snr_db", "gamma_bar", "ser_asymptotic", "ser_reference", "reference_method",
              "diversity_gain", "coding_gain", "coding_gain_ratio"]
    rows = [[snr[i], gb[i], asym.ser[i], ref.ser[i], ref.method, gd, gc, r]
            for i in range(snr.size)]
    return header, rows


def cmd_mc(cfg: ExperimentConfig):
    profile = build_profile(cfg)
    snr = cfg.snr_db()
    gb = cfg.gamma_bar(snr)
    res = ser_semi_analytic(RunSpec(cfg["seed"], cfg["trials"]), profile, cfg.scheme,
                            cfg["mod_order"], gb)
    rows = [[snr[i], gb[i], res.ser[i], res.std_error[i], res.trials] for i in range(snr.size)]
    return ["snr_db", "gamma_bar", "ser", "std_error", "trials"], rows


def cmd_optimize(cfg: ExperimentConfig):
    res = optimize(cfg["n_ris"], cfg.scheme.nt, cfg["groups"], cfg["candidates"],
                   codebook(cfg["codebook_bits"]), cfg.law, cfg["seed"])
    accepted = [False, *res.accepted.tolist()]
    rows = [[i, int(accepted[i]), obj, res.lower_bound / obj] for i, obj in enumerate(res.trace)]
    return ["step", "accepted", "objective", "ratio"], rows


def cmd_pathloss(cfg: ExperimentConfig):
    geom = cfg.geometry
    pl = path_loss(geom)
    d_nf = fraunhofer_distance(geom)
    header = ["wavelength_m", "d_t_m", "d_r_m", "path_loss", "path_loss_db",
              "fraunhofer_distance_m", "tx_near_field", "rx_near_field"]
    row = [geom.lam, geom.d_t, geom.d_r, pl, 10.0 * math.log10(pl), d_nf,
           int(geom.d_t < d_nf), int(geom.d_r < d_nf)]
    return header, [row]


COMMANDS = {
    "pdf": cmd_pdf, "ser": cmd_ser, "asym": cmd_asym, "mc": cmd_mc,
    "optimize": cmd_optimize, "pathloss": cmd_pathloss,
}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return str(int(v))
    return str(v)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run(subcommand: str, cfg: ExperimentConfig) -> Path:
    """Execute one subcommand and write its CSV and manifest; returns the CSV path."""
    header, rows = COMMANDS[subcommand](cfg)
    out = cfg.out_path
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(v) for v in row] for row in rows)
    manifest = out.with_name(out.name + ".manifest")
    manifest.write_text("\n".join(cfg.manifest_lines(_version())) + "\n")
    return out


def _parser():
    p = argparse.ArgumentParser(prog="ris-ser", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("config", nargs="?", help="key = value config file (or a saved manifest)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key; repeatable")
    p.add_argument("--out", help="output CSV path (overrides the 'out' key)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        overrides = list(args.overrides)
        if args.out:
            overrides.append(f"out = {args.out}")
        cfg = load_config(args.subcommand, args.config, overrides)
        path = run(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"ris-ser: config error: {exc}", file=sys.stderr)
        return 1
    except (RisSerError, ArithmeticError) as exc:
        print(f"ris-ser: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"ris-ser: wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
