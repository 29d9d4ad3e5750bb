"""Command-line batch front-end.

Every run is described by a :class:`JobConfig`. Single jobs print and write
JSON, sweeps also write CSV. Artifacts embed the config, so passing an
artifact back through ``--config`` replays the job.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .bounds import (
    diamond_probe_energy,
    gap_bounds,
    rectangle_probe_energy,
    slab_condition3_bound,
)
from .errors import ConsistencyError, ConvergenceError, ValidationError
from .lattice import (
    DIAMOND_CLASSES,
    LatticeRegion,
    load_sites,
    make_box,
    make_centered_box,
    make_diamond,
)
from .groundstate import kernel_basis, zero_threshold
from .model import FULL_SPACE_MAX_SITES, ModelParams, assemble_full
from .spectra import dense_spectrum, finite_gap
from .thermo import RegionFamily, classify_scenario, ltqo_f, ltqo_verify

__all__ = ["COMMANDS", "JobConfig", "run", "main", "fit_power_law", "EXIT_CODES"]

COMMANDS = ("lattice", "gap", "bounds", "probe", "condition3", "ltqo", "scenario", "scaling")
EXIT_CODES = {"ok": 0, "validation": 2, "convergence": 3, "consistency": 4}
REGION_KINDS = ("box", "centered_box", "diamond", "sites")


def fit_power_law(series: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of ``log(value)`` against ``log(L)``.

    Returns
    -------
    exponent, r_squared
        ``r_squared`` is 1 for a series with no spread in ``log(value)``.
    """
    pts = [(float(a), float(b)) for a, b in series]
    if len(pts) < 3:
        raise ValidationError("power-law fit needs at least 3 points")
    if any(a <= 0 or b <= 0 for a, b in pts):
        raise ValidationError("power-law fit needs positive L and values")
    x = np.log([a for a, _ in pts])
    y = np.log([b for _, b in pts])
    if np.ptp(x) == 0:
        raise ValidationError("power-law fit needs at least two distinct L")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    return float(slope), r2


@dataclass
class JobConfig:
    """Serializable description of one job.

    ``region`` holds ``kind`` (one of box, centered_box, diamond, sites) plus
    ``dims``, ``L`` or ``path``. ``params`` mirrors :class:`ModelParams`.
    ``solver`` carries ``tol``, ``seed``, ``mode``, ``max_N``, ``max_sites``
    and ``threads``. Command-specific inputs live in ``options``.
    """

    command: str
    region: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "JobConfig":
        if "config" in data and "command" not in data:
            data = data["config"]       # an artifact: replay its embedded config
        known = {"command", "region", "params", "solver", "options", "out"}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items()})

    def model(self) -> ModelParams:
        if "lam" not in self.params:
            raise ValidationError("params.lam is required")
        return ModelParams.from_dict(self.params)

    def build_region(self) -> LatticeRegion | None:
        if not self.region:
            return None
        kind = self.region.get("kind")
        if kind not in REGION_KINDS:
            raise ValidationError(f"region kind must be one of {REGION_KINDS}")
        if kind == "box":
            return make_box(self.region["dims"])
        if kind == "centered_box":
            return make_centered_box(self.region["dims"])
        if kind == "diamond":
            return make_diamond(self.region["L"], self.region.get("k_odd_check", True)).region
        return load_sites(self.region["path"])

    @property
    def tol(self) -> float:
        return float(self.solver.get("tol", 1e-10))

    @property
    def seed(self) -> int:
        return int(self.solver.get("seed", 0))


def _require(opts: dict, key: str):
    if key not in opts:
        raise ValidationError(f"options.{key} is required")
    return opts[key]


def _region_or_fail(cfg: JobConfig) -> LatticeRegion:
    region = cfg.build_region()
    if region is None:
        raise ValidationError(f"command {cfg.command!r} needs a region")
    return region


def _cmd_lattice(cfg: JobConfig) -> dict:
    region = _region_or_fail(cfg)
    out = {"d": region.d, "n_sites": region.n_sites, "n_edges": region.n_edges,
           "connected": region.connected}
    if cfg.region.get("kind") == "diamond":
        D = make_diamond(cfg.region["L"], cfg.region.get("k_odd_check", True))
        out["classes"] = {c: len(D.sites_of(c)) for c in DIAMOND_CLASSES}
    return out


def _kernel_check(region: LatticeRegion, params: ModelParams) -> dict:
    # dense diagonalization of the full space against the analytic pair
    op = assemble_full(region, params)
    evals, evecs = dense_spectrum(op)
    thr = zero_threshold(op.norm1())
    kernel = evecs[:, evals < thr]
    psi0, psi1 = kernel_basis(region, params)
    pair = np.column_stack([psi0.amplitudes, psi1.amplitudes])
    # sine of the largest principal angle; arccos of the cosines loses half the digits
    if kernel.shape[1] == 2:
        angle = float(np.arcsin(min(np.linalg.norm(pair - kernel @ (kernel.T @ pair), 2), 1.0)))
    else:
        angle = math.pi / 2
    return {"kernel_dim": int(kernel.shape[1]), "threshold": thr, "subspace_angle": angle,
            "lowest": evals[:4].tolist()}


def _cmd_gap(cfg: JobConfig) -> dict:
    region = _region_or_fail(cfg)
    params = cfg.model()
    if cfg.options.get("kernel_check"):
        return _kernel_check(region, params)
    g = finite_gap(region, params, mode=cfg.solver.get("mode", "full"),
                   max_N=int(cfg.solver.get("max_N", 2)), tol=cfg.tol, seed=cfg.seed,
                   max_sites=int(cfg.solver.get("max_sites", FULL_SPACE_MAX_SITES)))
    return {"gap": g.value, "mode": g.mode, "partial": g.partial,
            "sectors": {str(k): v for k, v in g.sectors.items()}, "iterations": g.iterations}


def _cmd_bounds(cfg: JobConfig) -> dict:
    return asdict(gap_bounds(cfg.model(), seed=cfg.seed))


def _cmd_probe(cfg: JobConfig) -> dict:
    opts = cfg.options
    kind = opts.get("probe", "rectangle")
    params = cfg.model()
    if kind == "rectangle":
        N = _require(opts, "N")
        z = opts.get("z", [1.0] * params.d)
        r = rectangle_probe_energy(N, params, z)
        return {"probe": kind, "N": list(N), "z": list(z), **asdict(r)}
    if kind == "diamond":
        L = int(_require(opts, "L"))
        if params.d != 2 or params.lam[0] != params.lam[1]:
            raise ValidationError("diamond probe needs d = 2 and lam_1 = lam_2")
        r = diamond_probe_energy(L, params.lam[0])
        return {"probe": kind, "L": L, **asdict(r)}
    raise ValidationError(f"unknown probe {kind!r}")


def _cmd_condition3(cfg: JobConfig) -> dict:
    params = cfg.model()
    cross = list(_require(cfg.options, "cross_section"))
    rows = []
    for n in cfg.options.get("n", [2, 3, 4]):
        r = slab_condition3_bound(params, cross, int(n))
        rows.append({"n": int(n), "numeric_sup": r.numeric_sup, "analytic_bound": r.analytic_bound,
                     "epsilon_sq": r.epsilon_sq, "dimension": r.dimension,
                     "orthogonality_residual": r.orthogonality_residual})
    holds = [r["numeric_sup"] <= r["analytic_bound"] + 1e-10 for r in rows]
    first = next((row["n"] for row, h in zip(rows, holds) if h), None)
    return {"cross_section": cross, "rows": rows, "all_hold": all(holds), "smallest_n_holding": first}


def _parse_site(s) -> tuple[int, ...]:
    if isinstance(s, str):
        return tuple(int(t) for t in s.split(","))
    return tuple(int(t) for t in s)


def _cmd_ltqo(cfg: JobConfig) -> dict:
    region = _region_or_fail(cfg)
    params = cfg.model()
    X = [_parse_site(s) for s in _require(cfg.options, "X")]
    trials = int(cfg.options.get("trials", 20))
    rows = []
    for l in cfg.options.get("l", [1, 2, 3]):
        for t in range(trials):
            seed = cfg.seed * 1_000_003 + 1000 * int(l) + t
            r = ltqo_verify(region, X, int(l), params, seed=seed)
            rows.append({"l": int(l), "trial": t, "seed": seed, "lhs": r.lhs, "rhs": r.rhs,
                         "f": r.f, "norm_A": r.norm_A})
    ls = sorted({int(l) for l in cfg.options.get("l", [1, 2, 3])})
    fvals = {str(l): ltqo_f(X, l, region, params) for l in ls}
    return {"X": [list(x) for x in X], "rows": rows, "f": fvals,
            "all_hold": all(r["lhs"] <= r["rhs"] for r in rows)}


def _cmd_scenario(cfg: JobConfig) -> dict:
    params = cfg.model()
    kind = cfg.options.get("family", "boxes_to_quadrant")
    regions = None
    if kind == "custom":
        regions = [load_sites(p) for p in _require(cfg.options, "paths")]
    fam = RegionFamily(kind, params, regions)
    v = classify_scenario(fam, int(cfg.options.get("n_max", 40)), float(cfg.options.get("tol", 1e-9)))
    return v.to_dict()


def _cmd_scaling(cfg: JobConfig) -> dict:
    params = cfg.model()
    kind = cfg.options.get("probe", "diamond")
    rows = []
    if kind == "diamond":
        if params.d != 2 or params.lam[0] != params.lam[1]:
            raise ValidationError("diamond sweep needs d = 2 and lam_1 = lam_2")
        for L in cfg.options.get("L", [6, 10, 14, 18, 22]):
            r = diamond_probe_energy(int(L), params.lam[0])
            rows.append({"L": int(L), "quotient": r.quotient, "closed_bound": r.closed_bound})
        key, val = "L", "quotient"
    elif kind == "rectangle":
        for n in cfg.options.get("n", [5, 10, 20, 40]):
            r = rectangle_probe_energy((int(n),) * params.d, params, [1.0] * params.d)
            rows.append({"n": int(n), "quotient": r.quotient, "bulk": r.bulk, "boundary": r.boundary})
        key, val = "n", "boundary"
    else:
        raise ValidationError(f"unknown scaling probe {kind!r}")
    exponent, r2 = fit_power_law([(r[key], r[val]) for r in rows])
    return {"probe": kind, "rows": rows, "fit_variable": val, "exponent": exponent, "r_squared": r2}


_HANDLERS = {
    "lattice": _cmd_lattice,
    "gap": _cmd_gap,
    "bounds": _cmd_bounds,
    "probe": _cmd_probe,
    "condition3": _cmd_condition3,
    "ltqo": _cmd_ltqo,
    "scenario": _cmd_scenario,
    "scaling": _cmd_scaling,
}


def _jsonable(obj: Any):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def execute(cfg: JobConfig) -> dict:
    """Run the job and return the artifact dictionary (no I/O)."""
    threads = int(cfg.solver.get("threads", 1))
    with threadpool_limits(limits=threads):
        results = _HANDLERS[cfg.command](cfg)
    artifact = {"version": __version__, "config": cfg.to_dict(), "results": results}
    region = cfg.build_region()
    if region is not None:
        artifact["site_hash"] = region.content_hash()
    return artifact


def write_artifacts(artifact: dict, out_dir: str | Path) -> list[Path]:
    """Write ``<command>.json`` and, for sweeps, ``<command>.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = artifact["config"]["command"]
    paths = [out / f"{name}.json"]
    paths[0].write_text(json.dumps(artifact, indent=2, default=_jsonable) + "\n")
    rows = artifact["results"].get("rows")
    if rows:
        p = out / f"{name}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([_fmt(v) for v in r.values()])
        paths.append(p)
    return paths


def run(cfg: JobConfig) -> tuple[int, dict | None]:
    """Execute ``cfg``; returns ``(exit status, artifact or None)``.

    Diagnostics for failures go to stderr.
    """
    try:
        artifact = execute(cfg)
        if cfg.out:
            write_artifacts(artifact, cfg.out)
        return EXIT_CODES["ok"], artifact
    except ConsistencyError as exc:
        print(f"pvbs: consistency failure: {exc}", file=sys.stderr)
        return EXIT_CODES["consistency"], None
    except ConvergenceError as exc:
        print(f"pvbs: no convergence: {exc}", file=sys.stderr)
        return EXIT_CODES["convergence"], None
    except (ValidationError, OverflowError, KeyError, TypeError) as exc:
        print(f"pvbs: invalid job: {exc}", file=sys.stderr)
        return EXIT_CODES["validation"], None


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pvbs", description="Exact diagonalization and gap bounds for PVBS models.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON job file or a previous artifact")
        s.add_argument("--out", help="directory for JSON/CSV artifacts")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--tol", type=float)
        s.add_argument("--lam", type=float, nargs="+")
        s.add_argument("--delta", type=float)
        s.add_argument("--region", choices=REGION_KINDS)
        s.add_argument("--dims", type=int, nargs="+")
        s.add_argument("--L", type=int, dest="diamond_L", help="diamond size for --region diamond")
        s.add_argument("--sites", help="site-list file for --region sites")
        s.add_argument("--mode", choices=("full", "sectors"))
        s.add_argument("--max-N", type=int, dest="max_N")
        s.add_argument("--max-sites", type=int, dest="max_sites")
        s.add_argument("--option", action="append", default=[], metavar="KEY=JSON",
                       help="command option, e.g. N=[5,5] or probe=\"diamond\"")
    return p


def _config_from_args(args: argparse.Namespace) -> JobConfig:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        cfg = JobConfig.from_dict(data)
        if cfg.command != args.command:
            raise ValidationError(f"config is for {cfg.command!r}, not {args.command!r}")
    else:
        cfg = JobConfig(args.command)
    if args.lam is not None:
        cfg.params["lam"] = list(args.lam)
    if args.delta is not None:
        cfg.params["delta"] = args.delta
    if args.region is not None:
        cfg.region = {"kind": args.region}
    if args.dims is not None:
        cfg.region["dims"] = list(args.dims)
    if args.diamond_L is not None:
        cfg.region["L"] = args.diamond_L
    if args.sites is not None:
        cfg.region["path"] = args.sites
    for key in ("seed", "threads", "tol", "mode", "max_N", "max_sites"):
        v = getattr(args, key)
        if v is not None:
            cfg.solver[key] = v
    for item in args.option:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValidationError(f"--option expects KEY=JSON, got {item!r}")
        try:
            cfg.options[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg.options[key] = raw
    if args.out is not None:
        cfg.out = args.out
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (ValidationError, TypeError) as exc:
        print(f"pvbs: invalid job: {exc}", file=sys.stderr)
        return EXIT_CODES["validation"]
    status, artifact = run(cfg)
    if artifact is not None:
        json.dump(artifact, sys.stdout, indent=2, default=_jsonable)
        sys.stdout.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
