"""Scenario configs, the built-in registries and the task runner behind the CLI.

Config files are flat ``key = value`` text with dotted section keys::

    task = zalcman
    group.kind = additive
    family.name = linear-family
    region.center = 0
    region.radius = 1
    region.grid = 81
    indices = 1..50

Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .expmap import property_suite
from .family import (
    DEFAULT_CAP,
    Region,
    constant_family,
    exp_family,
    linear_family,
    marty_scan,
    power_family,
    sl2_entry_family,
    torus_power_family,
)
from .liegroup import GROUPS, make_group
from .zalcman import converge_check, nearest_root_of_unity, nonconstancy_witness, rebase, rescale

TASKS = ("marty-scan", "zalcman", "exp-verify")

FAMILIES = {
    "linear-family": {
        "groups": ("additive",),
        "params": {"coefficient": complex, "domain_radius": float},
        "build": lambda G, p: linear_family(G.dim, **p),
        "doc": "f_j(z) = c j z_1 on C^m",
    },
    "power-family": {
        "groups": ("additive",),
        "params": {"coefficient": complex, "domain_radius": float},
        "build": lambda G, p: power_family(G.dim, **p),
        "doc": "f_j(z) = c z_1^j on C^m",
    },
    "exp-family": {
        "groups": ("additive",),
        "params": {"domain_radius": float},
        "build": lambda G, p: exp_family(G.dim, **p),
        "doc": "f_j(z) = exp(j z_1) on C^m",
    },
    "torus-power-family": {
        "groups": ("torus",),
        "params": {"inner": float, "outer": float},
        "build": lambda G, p: torus_power_family(G.dim, **p),
        "doc": "f_j(w) = w_1^j on the annulus inner < |w| < outer of (C*)^m",
    },
    "sl2-entry-family": {
        "groups": ("sl2",),
        "params": {},
        "build": lambda G, p: sl2_entry_family(),
        "doc": "f_j(g) = (g_11)^j on SL(2,C)",
    },
    "constant-family": {
        "groups": tuple(GROUPS),
        "params": {"value": complex},
        "build": lambda G, p: constant_family(G, **p),
        "doc": "f_j = const on any group",
    },
}

GROUP_DOCS = {
    "additive": "C^m under addition (group.order = m)",
    "torus": "(C*)^m under componentwise product (group.order = m)",
    "gl": "GL(m, C) with elementary-matrix basis (group.order = m)",
    "sl2": "SL(2, C) with Hilbert-Schmidt orthonormal {H, E, F}",
}


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j")
    if t.endswith("j") and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1j"
    try:
        return complex(t)
    except ValueError:
        raise ConfigError(f"not a complex number: {text!r}") from None


def format_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    return f"{z.real!r}{'+' if z.imag >= 0 else '-'}{abs(z.imag)!r}j"


def parse_indices(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                rng, _, stride = part.partition(":")
                a, b = rng.split("..")
                out.extend(range(int(a), int(b) + 1, int(stride) if stride else 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"bad index specification {part!r}") from None
    return tuple(out)


@dataclass
class ScenarioConfig:
    task: str
    group_kind: str
    family: str
    indices: tuple
    group_order: int | None = None
    family_params: dict = field(default_factory=dict)
    region_center: tuple | None = None  # None means the identity
    region_radius: float = 1.0
    region_grid: int = 41
    cap: float = DEFAULT_CAP
    cauchy_tolerance: float = 1e-6
    witness_tolerance: float = 1e-6
    converge_radius: float = 1.0
    converge_grid: int = 21
    snap: str = "none"
    samples: int = 1000
    expect_verdict: str | None = None
    seed: int = 0
    output_dir: str | None = None

    def validate(self) -> "ScenarioConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; known: {', '.join(TASKS)}")
        if self.group_kind not in GROUPS:
            raise ConfigError(f"unknown group {self.group_kind!r}; known: {', '.join(sorted(GROUPS))}")
        if self.task != "exp-verify":
            if self.family not in FAMILIES:
                raise ConfigError(f"unknown family {self.family!r}; known: {', '.join(sorted(FAMILIES))}")
            entry = FAMILIES[self.family]
            if self.group_kind not in entry["groups"]:
                raise ConfigError(f"{self.family} lives on {entry['groups']}, not {self.group_kind!r}")
            unknown = set(self.family_params) - set(entry["params"])
            if unknown:
                raise ConfigError(f"unknown parameters for {self.family}: {sorted(unknown)}")
            if not self.indices:
                raise ConfigError("indices must be nonempty")
            if any(b <= a for a, b in zip(self.indices, self.indices[1:])) or self.indices[0] < 1:
                raise ConfigError("indices must be positive and strictly increasing")
        if not self.region_radius > 0:
            raise ConfigError("region.radius must be positive")
        if self.region_grid < 2 or self.converge_grid < 2:
            raise ConfigError("grids need at least 2 points per axis")
        if self.snap not in ("none", "roots-of-unity"):
            raise ConfigError(f"unknown zalcman.snap {self.snap!r}")
        if self.snap == "roots-of-unity" and self.group_kind != "torus":
            raise ConfigError("zalcman.snap = roots-of-unity needs the torus group")
        return self

    def to_text(self) -> str:
        """Canonical config text; parsing it back gives an equal config."""
        lines = [
            f"task = {self.task}",
            f"seed = {self.seed}",
            f"group.kind = {self.group_kind}",
        ]
        if self.group_order is not None:
            lines.append(f"group.order = {self.group_order}")
        lines.append(f"family.name = {self.family}")
        for k in sorted(self.family_params):
            v = self.family_params[k]
            lines.append(f"family.{k} = {format_complex(v) if isinstance(v, complex) else repr(v)}")
        if self.region_center is not None:
            lines.append("region.center = " + ", ".join(format_complex(c) for c in self.region_center))
        lines += [
            f"region.radius = {self.region_radius!r}",
            f"region.grid = {self.region_grid}",
            "indices = " + ", ".join(str(j) for j in self.indices),
            f"tolerance.cap = {self.cap!r}",
            f"tolerance.cauchy = {self.cauchy_tolerance!r}",
            f"tolerance.witness = {self.witness_tolerance!r}",
            f"zalcman.radius = {self.converge_radius!r}",
            f"zalcman.grid = {self.converge_grid}",
            f"zalcman.snap = {self.snap}",
            f"exp.samples = {self.samples}",
        ]
        if self.expect_verdict is not None:
            lines.append(f"expect.verdict = {self.expect_verdict}")
        if self.output_dir is not None:
            lines.append(f"output.dir = {self.output_dir}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in dataclasses.asdict(self).items()}


_SCALARS = {
    "task": ("task", str),
    "seed": ("seed", int),
    "group.kind": ("group_kind", str),
    "group.order": ("group_order", int),
    "family.name": ("family", str),
    "region.radius": ("region_radius", float),
    "region.grid": ("region_grid", int),
    "tolerance.cap": ("cap", float),
    "tolerance.cauchy": ("cauchy_tolerance", float),
    "tolerance.witness": ("witness_tolerance", float),
    "zalcman.radius": ("converge_radius", float),
    "zalcman.grid": ("converge_grid", int),
    "zalcman.snap": ("snap", str),
    "exp.samples": ("samples", int),
    "expect.verdict": ("expect_verdict", str),
    "output.dir": ("output_dir", str),
}


def parse_config(text: str) -> ScenarioConfig:
    raw: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        raw[key] = value.strip()

    kw: dict = {"family": "", "indices": ()}
    params: dict = {}
    for key, value in raw.items():
        try:
            if key in _SCALARS:
                name, typ = _SCALARS[key]
                kw[name] = typ(value)
            elif key == "indices":
                kw["indices"] = parse_indices(value)
            elif key == "region.center":
                kw["region_center"] = None if value == "identity" else tuple(
                    parse_complex(v) for v in value.split(","))
            elif key.startswith("family."):
                params[key[len("family."):]] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    for k in ("task", "group_kind"):
        if k not in kw:
            raise ConfigError(f"missing required key for {k}")
    fam = kw.get("family")
    if params:
        spec = FAMILIES.get(fam, {}).get("params", {})
        typed = {}
        for k, v in params.items():
            if k not in spec:
                raise ConfigError(f"unknown parameter family.{k} for {fam!r}")
            typed[k] = parse_complex(v) if spec[k] is complex else float(v)
        kw["family_params"] = typed
    return ScenarioConfig(**kw).validate()


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# -- serialization ---------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# -- tasks ---------------------------------------------------------------------------


@dataclass
class ReportBundle:
    config: ScenarioConfig
    payload: dict
    tables: dict  # csv name -> (header, rows)
    passed: bool
    elapsed: float = 0.0

    def document(self) -> dict:
        # where the files land is not part of the experiment
        echo = dataclasses.replace(self.config, output_dir=None)
        return {
            "version": __version__,
            "task": self.config.task,
            "config": echo.to_dict(),
            "config_text": echo.to_text(),
            "passed": self.passed,
            "payload": _jsonable(self.payload),
        }

    def to_json(self) -> str:
        return json.dumps(self.document(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "timing.json").write_text(json.dumps({"elapsed_seconds": self.elapsed}) + "\n", encoding="utf-8")
        for name, (header, rows) in self.tables.items():
            write_csv(out / "grids" / f"{name}.csv", header, rows)
        return out / "report.json"


def _group(cfg: ScenarioConfig):
    return make_group(cfg.group_kind, cfg.group_order)


def _center(cfg: ScenarioConfig, G):
    if cfg.region_center is None:
        return G.identity()
    data = np.array(cfg.region_center, dtype=complex)
    if G.kind in ("gl", "sl2"):
        data = data.reshape(G.n, G.n)
    return G.element(data)


def _family(cfg: ScenarioConfig, G):
    return FAMILIES[cfg.family]["build"](G, dict(cfg.family_params))


def _run_marty(cfg: ScenarioConfig) -> ReportBundle:
    G = _group(cfg)
    fam = _family(cfg, G)
    region = Region(_center(cfg, G), cfg.region_radius, cfg.region_grid)
    rep = marty_scan(fam, region, cfg.indices, cap=cfg.cap)
    payload = dataclasses.asdict(rep)
    passed = cfg.expect_verdict is None or rep.verdict == cfg.expect_verdict
    rows = [[j, v] + [c for x in a for c in (x.real, x.imag)]
            for j, v, a in zip(rep.indices, rep.maxima, rep.argmax)]
    header = ["j", "max_df_norm"] + [f"{p}{a}" for a in range(G.dim) for p in ("argmax_re", "argmax_im")]
    return ReportBundle(cfg, payload, {"marty_maxima": (header, rows)}, passed)


def _run_zalcman(cfg: ScenarioConfig) -> ReportBundle:
    G = _group(cfg)
    fam = _family(cfg, G)
    p0 = _center(cfg, G)
    steps = rescale(fam, p0, cfg.indices, cfg.region_grid)
    if cfg.snap == "roots-of-unity":
        steps = [rebase(s, nearest_root_of_unity(s.p, s.j)) for s in steps]
    witnesses = [nonconstancy_witness(s) for s in steps]
    R = min(cfg.converge_radius, min(s.domain_radius for s in steps))
    conv = converge_check(steps, R, cfg.converge_grid, cfg.cauchy_tolerance, reference=fam.limit)
    rhos = [s.rho for s in steps]
    rho_decreasing = all(b < a for a, b in zip(rhos, rhos[1:]))
    step_rows = []
    for s, w in zip(steps, witnesses):
        step_rows.append({
            "j": s.j,
            "p": s.p.data,
            "xi": s.xi,
            "M": s.M,
            "rho": s.rho,
            "rho_times_M": s.rho * s.M,
            "witness": w,
            "offset": s.offset,
            "proof_radius": s.proof_radius,
            "domain_radius": s.domain_radius,
            "grid_max": s.meta.get("grid_max"),
            "grid_spacing": s.meta.get("grid_spacing"),
        })
    witness_ok = all(abs(w - 1.0) <= cfg.witness_tolerance for w in witnesses)
    payload = {
        "steps": step_rows,
        "convergence": dataclasses.asdict(conv),
        "witness_ok": witness_ok,
        "rho_strictly_decreasing": rho_decreasing,
        "rho_last": rhos[-1],
    }
    passed = witness_ok and (cfg.expect_verdict is None or conv.cauchy == (cfg.expect_verdict == "cauchy"))
    tables = {
        "steps": (["j", "M", "rho", "witness", "proof_radius", "domain_radius"],
                  [[r["j"], r["M"], r["rho"], r["witness"], r["proof_radius"], r["domain_radius"]]
                   for r in step_rows]),
        "sup_distances": (["j", "k", "sup_distance"],
                          [[a, b, d] for a, b, d in zip(conv.indices, conv.indices[1:], conv.sup_distances)]),
    }
    if conv.reference_distances is not None:
        tables["reference_distances"] = (["j", "sup_distance"],
                                         [[j, d] for j, d in zip(conv.indices, conv.reference_distances)])
    return ReportBundle(cfg, payload, tables, passed)


def _run_exp_verify(cfg: ScenarioConfig) -> ReportBundle:
    G = _group(cfg)
    results = property_suite(G, cfg.samples, cfg.seed)
    passed = all(r["passed"] for r in results.values())
    rows = [[k, r["max_residual"], r["tolerance"], r["passed"]] for k, r in results.items()]
    return ReportBundle(cfg, {"group": G.name, "checks": results}, {
        "exp_checks": (["check", "max_residual", "tolerance", "passed"], rows)}, passed)


RUNNERS = {"marty-scan": _run_marty, "zalcman": _run_zalcman, "exp-verify": _run_exp_verify}


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> ReportBundle:
    """Execute the configured task; writes report files when an output directory is known."""
    cfg.validate()
    t0 = time.perf_counter()
    bundle = RUNNERS[cfg.task](cfg)
    bundle.elapsed = time.perf_counter() - t0
    target = out_dir or cfg.output_dir
    if target:
        bundle.write(target)
    return bundle
