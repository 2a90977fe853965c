"""Experiment configuration, execution and run manifests.

Configuration files are plain ``key = value`` lines; ``#`` starts a comment
and list values are comma separated.  Recognized keys (defaults in brackets):

    kind            otoc | autocorr | butterfly | exact-bound | syk-theory
    seed            master seed [0]
    workers         worker processes [1]

    geometry        all-to-all | chain                      [all-to-all]
    n_sites         N (all-to-all) or L (chain)              [2000]
    k               gate width (odd, >= 3)                   [3]
    f               gate probability                         [0.5]
    nbar            density list, each in (0, 1)             [0.1]
    t_max           time steps (0 = automatic)               [0]
    n_samples       trajectories per density                 [400]
    include_diagonal  count the i = j OTOC term              [true]
    periodic        periodic chain                           [true]
    front_method    threshold | collapse                     [threshold]
    theta           front threshold                          [0.5]

    q               SYK body number (even, >= 4)             [4]
    J               coupling scale                           [1.0]
    mu              chemical potential list                  [0.0]
    b               lattice hopping weight                   [0.0]
    variant         regular | brownian (list allowed)        [brownian]
    n_hamiltonians  random Hamiltonians                      [5]
    blocks          size pairs s:s' list                     [1:3, 3:1, 3:5]
    times           evolution times list                     [0.5, 1.0, 2.0]
    allow_large     permit N = 7, 8 for the exact module     [false]
"""
from __future__ import annotations

import hashlib
import json
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, opsize, syk
from .analysis import FitError, fit_exponential_rate, fit_powerlaw_exponent, front_velocity
from .lattice import ChargeSector, RngStream
from .observables import autocorr_curve, otoc_curve, otoc_profile
from .reproduce import decay_horizon, otoc_horizon, otoc_saturation
from .svg import PlotSpec, emit_plot

__all__ = ["ConfigError", "ResourceError", "ExperimentConfig", "run_experiment", "KINDS"]

KINDS = ("otoc", "autocorr", "butterfly", "exact-bound", "syk-theory")


class ConfigError(ValueError):
    pass


class ResourceError(ConfigError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _pair(text: str) -> tuple:
    a, b = text.split(":")
    return int(a), int(b)


# key -> (parser, is_list, default)
SCHEMA = {
    "kind": (str, False, None),
    "seed": (int, False, 0),
    "workers": (int, False, 1),
    "geometry": (str, False, "all-to-all"),
    "n_sites": (int, False, 2000),
    "k": (int, False, 3),
    "f": (float, False, 0.5),
    "nbar": (float, True, [0.1]),
    "t_max": (int, False, 0),
    "n_samples": (int, False, 400),
    "include_diagonal": (_bool, False, True),
    "periodic": (_bool, False, True),
    "front_method": (str, False, "threshold"),
    "theta": (float, False, 0.5),
    "q": (int, False, 4),
    "J": (float, False, 1.0),
    "mu": (float, True, [0.0]),
    "b": (float, False, 0.0),
    "variant": (str, True, ["brownian"]),
    "n_hamiltonians": (int, False, 5),
    "blocks": (_pair, True, [(1, 3), (3, 1), (3, 5)]),
    "times": (float, True, [0.5, 1.0, 2.0]),
    "allow_large": (_bool, False, False),
}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return f"{value[0]}:{value[1]}"
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {}
        unknown = sorted(set(self.params) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        for key, (_, is_list, default) in SCHEMA.items():
            if key == "kind":
                continue
            value = self.params.get(key, default)
            merged[key] = list(value) if is_list else value
        self.params = merged
        self.validate()

    def __getitem__(self, key):
        return self.params[key]

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = value
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        if "kind" not in raw:
            raise ConfigError("missing required key: kind")
        params = {}
        for key, value in raw.items():
            if key == "kind":
                continue
            parse, is_list, _ = SCHEMA[key]
            try:
                if is_list:
                    params[key] = [parse(v.strip()) for v in value.split(",") if v.strip()]
                else:
                    params[key] = parse(value)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key!r}: {value!r} ({exc})") from None
        return cls(raw["kind"], params)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        lines = [f"kind = {self.kind}"]
        lines += [f"{key} = {_format(self.params[key])}" for key in sorted(self.params)]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: (list(map(list, v)) if k == "blocks" else v)
                                      for k, v in self.params.items()}}

    def validate(self) -> None:
        p = self.params
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if p["k"] < 3 or p["k"] % 2 == 0:
            raise ConfigError(f"k must be odd and >= 3, got {p['k']}")
        if p["q"] < 4 or p["q"] % 2:
            raise ConfigError(f"q must be even and >= 4, got {p['q']}")
        bad = [x for x in p["nbar"] if not 0.0 < x < 1.0]
        if bad:
            raise ConfigError(f"nbar values must lie in (0, 1), got {bad}")
        if not 0.0 <= p["f"] <= 1.0:
            raise ConfigError("f must lie in [0, 1]")
        if p["geometry"] not in ("all-to-all", "chain"):
            raise ConfigError("geometry must be 'all-to-all' or 'chain'")
        if p["front_method"] not in ("threshold", "collapse"):
            raise ConfigError("front_method must be 'threshold' or 'collapse'")
        if not 0.0 < p["theta"] < 1.0:
            raise ConfigError("theta must lie in (0, 1)")
        if p["n_samples"] < 1 or p["workers"] < 1 or p["t_max"] < 0:
            raise ConfigError("n_samples and workers must be >= 1, t_max >= 0")
        if p["n_sites"] < p["k"]:
            raise ConfigError(f"n_sites={p['n_sites']} is smaller than k={p['k']}")
        if not 0 <= p["seed"] < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not p["J"] > 0:
            raise ConfigError("J must be positive")
        if not 0.0 <= p["b"] <= 0.5:
            raise ConfigError("b must lie in [0, 0.5]")
        bad_variants = [v for v in p["variant"] if v not in ("regular", "brownian")]
        if bad_variants:
            raise ConfigError(f"unknown SYK variants {bad_variants}")
        if self.kind == "exact-bound":
            n = p["n_sites"]
            if n > opsize.HARD_MAX_SITES:
                raise ResourceError(
                    f"exact module is capped at N <= {opsize.HARD_MAX_SITES} (dense 4^N operator "
                    f"basis); got n_sites={n}")
            if n > opsize.DEFAULT_MAX_SITES and not p["allow_large"]:
                raise ResourceError(
                    f"n_sites={n} exceeds the default exact cap {opsize.DEFAULT_MAX_SITES}; "
                    "set allow_large = true to run up to 8")
            if p["q"] > 2 * n:
                raise ConfigError(f"q={p['q']} needs at least q/2 sites per index set")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _tag(x: float) -> str:
    return f"{x:g}".replace(".", "p").replace("-", "m")


def _run_curves(cfg: ExperimentConfig, out: Path, workers: int, seeds: dict) -> list:
    p = cfg.params
    kind = cfg.kind
    geometry = p["geometry"]
    convention = "up" if geometry == "all-to-all" else "down"
    files, fits = [], []
    for a, nbar in enumerate(p["nbar"]):
        sector = ChargeSector.from_density(p["n_sites"], nbar, convention)
        stream = RngStream(p["seed"], (kind, a))
        name = f"{kind}_k{p['k']}_n{_tag(nbar)}.csv"
        seeds[name] = {"seed": p["seed"], "key": list(stream.key)}
        geo = None if geometry == "all-to-all" else geometry
        if kind == "otoc":
            t_max = p["t_max"] or otoc_horizon(p["k"], sector.up_fraction, p["n_sites"])
            curve = otoc_curve(sector, geo, p["k"], p["f"], t_max, p["n_samples"], stream,
                               include_diagonal=p["include_diagonal"], workers=workers)
            fit_args = dict(baseline=0.0, mode="growth",
                            saturation=otoc_saturation(sector.up_fraction))
        else:
            t_max = p["t_max"] or decay_horizon(p["k"], sector.up_fraction)
            curve = autocorr_curve(sector, geo, p["k"], p["f"], t_max, p["n_samples"], stream,
                                   workers=workers)
            fit_args = dict(baseline=curve.metadata["saturation"], mode="decay")
        curve.to_csv(out / name)
        files.append(name)
        try:
            fit = fit_exponential_rate(curve, **fit_args)
            fits.append((nbar, fit))
        except FitError as exc:
            fits.append((nbar, exc))
    report = {"rates": [], "exponent": None}
    good = []
    for nbar, fit in fits:
        if isinstance(fit, FitError):
            report["rates"].append({"nbar": nbar, "error": str(fit)})
        else:
            report["rates"].append({"nbar": nbar, **fit.to_dict()})
            good.append((nbar, fit.value, fit.uncertainty))
    if good:
        with open(out / "scaling.csv", "w") as fh:
            fh.write("nbar,rate,uncertainty\n")
            for nbar, v, e in good:
                fh.write(f"{nbar!r},{v!r},{e!r}\n")
        files.append("scaling.csv")
    if len(good) >= 3:
        report["exponent"] = fit_powerlaw_exponent(good).to_dict()
        emit_plot(out / "scaling.csv", out / "scaling.svg",
                  PlotSpec("scaling", True, True, f"{kind} rate vs density", "nbar", "rate"))
        files.append("scaling.svg")
    _write_json(out / "fits.json", report)
    files.append("fits.json")
    curve_files = [f for f in files if f.startswith(kind + "_")]
    emit_plot([out / f for f in curve_files], out / f"{kind}.svg",
              PlotSpec("curve", False, kind == "otoc", f"{kind} curves", "t",
                       "C_XZ(t)" if kind == "otoc" else "C_Z(t)",
                       labels=[f"nbar={x:g}" for x in p["nbar"]]))
    files.append(f"{kind}.svg")
    return files


def _run_butterfly(cfg: ExperimentConfig, out: Path, workers: int, seeds: dict) -> list:
    p = cfg.params
    files = []
    report = []
    for a, nbar in enumerate(p["nbar"]):
        sector = ChargeSector.from_density(p["n_sites"], nbar, "down")
        stream = RngStream(p["seed"], ("butterfly", a))
        t_max = p["t_max"] or int(p["n_sites"] // 2 * 2)
        prof = otoc_profile(sector, p["k"], p["f"], t_max, p["n_samples"], stream,
                            periodic=p["periodic"], workers=workers)
        rows = np.unique(np.linspace(t_max // 5, t_max, 24).round().astype(int))
        sub = type(prof)(prof.distances, prof.times[rows], prof.values[rows], prof.stderr[rows],
                         prof.n_samples, prof.metadata)
        name = f"profile_k{p['k']}_n{_tag(nbar)}.csv"
        seeds[name] = {"seed": p["seed"], "key": list(stream.key)}
        sub.to_csv(out / name)
        files.append(name)
        try:
            fit = front_velocity(sub, p["front_method"], theta=p["theta"])
            report.append({"nbar": nbar, **fit.to_dict()})
            v = fit.value
        except FitError as exc:
            report.append({"nbar": nbar, "error": str(exc)})
            v = 0.0
        svg = f"collapse_k{p['k']}_n{_tag(nbar)}.svg"
        emit_plot(out / name, out / svg,
                  PlotSpec("collapse", title=f"front collapse, v = {v:.4f}", x_label="r - v t",
                           y_label="C(r, t)", velocity=v))
        files.append(svg)
    _write_json(out / "fits.json", {"fronts": report})
    files.append("fits.json")
    return files


def _run_exact(cfg: ExperimentConfig, out: Path, seeds: dict) -> list:
    p = cfg.params
    n, q = p["n_sites"], p["q"]
    blocks, sums, dists = [], [], []
    for h_idx in range(p["n_hamiltonians"]):
        stream = RngStream(p["seed"], ("H", h_idx))
        seeds[f"hamiltonian_{h_idx}"] = {"seed": p["seed"], "key": list(stream.key)}
        h = opsize.build_syk_hamiltonian(n, q, p["J"], stream, allow_large=p["allow_large"])
        spec = opsize.Spectrum.of(h)
        for s, sp in p["blocks"]:
            rep = opsize.block_bound_report(h, s, sp, p["mu"], allow_large=p["allow_large"])
            rep["hamiltonian"] = h_idx
            blocks.append(rep)
        for mu in p["mu"]:
            ens = opsize.MuEnsemble(mu, n)
            for t in [0.0] + list(p["times"]):
                r = opsize.otoc_exact_and_sumrule(spec, 0, t / p["J"], ens, p["allow_large"])
                r["hamiltonian"] = h_idx
                sums.append(r)
                if h_idx == 0 and mu == p["mu"][0]:
                    dists.append((t, opsize.size_distribution(
                        opsize.heisenberg_evolve(opsize.annihilation(n, 0), spec, t / p["J"]),
                        ens, p["allow_large"])))
    summary = {
        "violations": sum(b["violations"] for b in blocks),
        "min_slack": min(r["slack"] for r in sums),
        "blocks": blocks,
        "sum_rule": sums,
    }
    _write_json(out / "exact_bound.json", summary)
    opsize.write_size_table(out / "sizes.csv", [t for t, _ in dists], [d for _, d in dists])
    emit_plot(out / "sizes.csv", out / "sizes.svg",
              PlotSpec("sizes", title="P_s(t) of c_0(t)", x_label="s", y_label="P_s"))
    return ["exact_bound.json", "sizes.csv", "sizes.svg"]


def _run_theory(cfg: ExperimentConfig, out: Path) -> list:
    p = cfg.params
    rows = []
    for variant in p["variant"]:
        for mu in p["mu"]:
            params = syk.SykParams(variant, p["q"], p["J"], mu, p["b"])
            entry = syk.evaluate(params)
            if variant == "regular":
                try:
                    entry["quadrature"] = syk.quadrature_check(params)
                except syk.DivergenceError as exc:
                    entry["quadrature"] = {"error": str(exc)}
            rows.append(entry)
    _write_json(out / "syk_theory.json", {"results": rows})
    return ["syk_theory.json"]


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int | None = None) -> dict:
    """Run ``cfg``, write its outputs and ``manifest.json`` into ``out_dir``.

    Output files depend only on the configuration (not on ``workers``);
    the manifest records their SHA-256 checksums.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or cfg["workers"]
    seeds: dict = {}
    start = time.perf_counter()
    if cfg.kind in ("otoc", "autocorr"):
        files = _run_curves(cfg, out, workers, seeds)
    elif cfg.kind == "butterfly":
        files = _run_butterfly(cfg, out, workers, seeds)
    elif cfg.kind == "exact-bound":
        files = _run_exact(cfg, out, seeds)
    else:
        files = _run_theory(cfg, out)
    (out / "config.txt").write_text(cfg.to_text())
    files.append("config.txt")
    manifest = {
        "tool": "u1scramble",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_text": cfg.to_text(),
        "workers": workers,
        "wall_clock_s": round(time.perf_counter() - start, 3),
        "platform": {"python": platform.python_version(), "numpy": np.__version__},
        "seeds": seeds,
        "outputs": {name: _sha256(out / name) for name in sorted(files)},
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def verify_manifest(out_dir) -> list:
    """Names of outputs whose checksum no longer matches the manifest."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    return [name for name, digest in manifest["outputs"].items()
            if not os.path.exists(out / name) or _sha256(out / name) != digest]
