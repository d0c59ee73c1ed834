"""Command-line driver.

Subcommands: scan, fixed-point, critical, finite, noise, validate. The
run configuration is the defaults table, overridden by an optional YAML
file (``--config``), overridden by flags. Every output file starts with
the package version and the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__, defaults

log = logging.getLogger("cluster_boundary")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

SCAN_COLUMNS = (
    "theta", "chi", "ee", "gap_ratio", "pair_degeneracy", "paired", "xi_x", "cx_inf", "cz_inf",
    "per_site_eigenvalue", "converged", "iterations", "solver", "seed", "wall_time_s",
)

# keys accepted in a config file in addition to the defaults table
EXTRA_KEYS = {"timing": True, "workers": 1, "theta_mean": None, "strict": False}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


def parse_theta(value) -> list[float]:
    """``"A:B:STEP"`` (inclusive), a comma-separated string, a number, or a list."""
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if not isinstance(value, str):
        raise ConfigError(f"cannot read angles from {value!r}")
    text = value.strip()
    if text.count(":") == 2:
        a, b, step = (float(x) for x in text.split(":"))
        if step <= 0 or b < a:
            raise ConfigError(f"bad angle range {value!r}")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot read angles from {value!r}") from exc


def parse_int_list(value) -> list[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    try:
        return [int(x) for x in str(value).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot read integers from {value!r}") from exc


def _flatten(d, prefix=""):
    for k, v in d.items():
        path = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, path + ".")
        else:
            yield path, v


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a key-value mapping")
    out = {}
    known = set(defaults.DEFAULTS) | set(EXTRA_KEYS)
    for key, value in _flatten(data):
        if key not in known:
            raise ConfigError(f"unknown config key '{key}'")
        out[key] = value
    return out


def resolve_config(args) -> dict:
    cfg = {k: defaults.get(k) for k in defaults.DEFAULTS}
    cfg.update(EXTRA_KEYS)
    cfg.update(load_config(args.config))
    if args.theta is not None:
        cfg["theta"] = args.theta
    if args.chi is not None:
        cfg["chi"] = args.chi
    if args.solver is not None:
        cfg["solver"] = args.solver
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "no_timing", False):
        cfg["timing"] = False
    if args.strict:
        cfg["strict"] = True
    if getattr(args, "workers", None) is not None:
        cfg["workers"] = args.workers
    for key, flag in (("finite_n", "n"), ("finite_bc", "bc"), ("finite_method", "method"),
                      ("noise_epsilon", "epsilon"), ("noise_layers", "layers")):
        if getattr(args, flag, None) is not None:
            cfg[key] = getattr(args, flag)
    # normalise types
    cfg["theta"] = parse_theta(cfg["theta"])
    cfg["chi"] = parse_int_list(cfg["chi"])
    cfg["finite_n"] = parse_int_list(cfg["finite_n"])
    if cfg["solver"] not in ("power", "vumps", "both"):
        raise ConfigError(f"solver must be power, vumps or both (got {cfg['solver']!r})")
    if cfg["finite_bc"] not in ("open", "periodic"):
        raise ConfigError(f"finite_bc must be open or periodic (got {cfg['finite_bc']!r})")
    if cfg["finite_method"] not in ("sweep", "uniform"):
        raise ConfigError(f"finite_method must be sweep or uniform (got {cfg['finite_method']!r})")
    if cfg["finite_method"] == "uniform" and cfg["finite_bc"] != "periodic":
        raise ConfigError("finite_method uniform needs finite_bc periodic")
    if not cfg["theta"]:
        raise ConfigError("empty angle list")
    if not cfg["chi"]:
        raise ConfigError("empty chi list")
    if any(c < 1 for c in cfg["chi"]):
        raise ConfigError("chi values must be positive")
    half_pi = np.pi / 2
    for t in cfg["theta"]:
        if not 0.0 <= t <= half_pi + 1e-12:
            raise ConfigError(f"angle {t} outside [0, pi/2]")
    return cfg


def header_lines(cfg: dict, command: str) -> list[str]:
    return [
        f"# cluster_boundary {__version__}",
        f"# command: {command}",
        "# config: " + json.dumps(cfg, sort_keys=True, default=str),
    ]


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serialisable: {type(x)}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    return str(v)


def _read_done(path: Path, key_columns) -> set:
    if not path.exists():
        return set()
    rows = [line for line in path.read_text().splitlines() if line and not line.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(rows)))
    return {tuple(row[c] for c in key_columns) for row in reader}


class CsvWriter:
    """Appends rows to a CSV file, writing the header on creation."""

    def __init__(self, path: Path, columns, header: list[str], resume: bool):
        self.path = path
        self.columns = list(columns)
        if not (resume and path.exists()):
            with path.open("w", encoding="utf-8", newline="") as fh:
                fh.write("\n".join(header) + "\n")
                fh.write(",".join(self.columns) + "\n")

    def append(self, row: dict):
        with self.path.open("a", encoding="utf-8", newline="") as fh:
            fh.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")


# --------------------------------------------------------------------------
# scan and fixed-point


def compute_point(theta: float, chi: int, solver: str, cfg: dict) -> tuple[dict, dict]:
    from .solvers import power_fixed_point, vumps_fixed_point
    from .umps import correlator, entanglement_spectrum, transfer_spectrum

    if solver == "power":
        fp = power_fixed_point(theta, chi, tol=cfg["power_tol"], max_layers=cfg["power_max_layers"])
    else:
        fp = vumps_fixed_point(theta, chi, tol=cfg["vumps_tol"], max_iter=cfg["vumps_max_iter"],
                               seed=cfg["seed"])
    es = entanglement_spectrum(fp.canonical)
    ts = transfer_spectrum(fp.psi, tol=cfg["pair_tol"])
    cx = correlator(fp.canonical, "X", cfg["correlator_l_max"])
    cz = correlator(fp.canonical, "Z", cfg["correlator_l_max"])
    record = {
        "theta": float(theta), "chi": int(chi), "ee": es.ee, "gap_ratio": es.gap_ratio,
        "pair_degeneracy": es.pair_degeneracy, "paired": ts.paired, "xi_x": ts.xi_x,
        "cx_inf": cx.inf_magnitude, "cz_inf": cz.inf_magnitude,
        "per_site_eigenvalue": fp.per_site_eigenvalue, "converged": fp.converged,
        "iterations": fp.iterations, "solver": solver, "seed": int(cfg["seed"]),
        "wall_time_s": round(fp.wall_time_s, 3) if cfg["timing"] else 0.0,
    }
    detail = dict(record)
    detail.update({
        "provisional": not fp.converged,
        "residual": fp.residual,
        "schmidt_values": es.values.tolist(),
        "transfer_eigenvalues": [[z.real, z.imag] for z in ts.eigenvalues],
        "cx": cx.values.tolist(),
        "cz": cz.values.tolist(),
    })
    return record, detail


def _point_worker(args):
    theta, chi, solver, cfg = args
    return compute_point(theta, chi, solver, cfg)


def _solvers(cfg) -> list[str]:
    return ["power", "vumps"] if cfg["solver"] == "both" else [cfg["solver"]]


PLOT_TEMPLATE = '''"""Plot template for the data files in this directory (edit freely)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "scan_plot.csv"
rows = [r for r in csv.DictReader(line for line in open(path) if not line.startswith("#"))]
x_col = sys.argv[2] if len(sys.argv) > 2 else "theta"
y_cols = sys.argv[3].split(",") if len(sys.argv) > 3 else ["ee"]
group = sys.argv[4] if len(sys.argv) > 4 else "chi"
for key in sorted({r[group] for r in rows}):
    sub = [r for r in rows if r[group] == key]
    for y in y_cols:
        plt.plot([float(r[x_col]) for r in sub], [float(r[y]) for r in sub], "o-", label=f"{group}={key} {y}")
plt.xlabel(x_col)
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def run_scan(cfg: dict, out: Path, resume: bool, command: str = "scan") -> int:
    out.mkdir(parents=True, exist_ok=True)
    points_dir = out / "points"
    points_dir.mkdir(exist_ok=True)
    csv_path = out / f"{command}.csv"
    header = header_lines(cfg, command)
    done = _read_done(csv_path, ("theta", "chi", "solver")) if resume else set()
    writer = CsvWriter(csv_path, SCAN_COLUMNS, header, resume)
    grid = [(t, c, s) for c in cfg["chi"] for s in _solvers(cfg) for t in cfg["theta"]]
    todo = [g for g in grid if (_fmt(float(g[0])), str(g[1]), g[2]) not in done]
    log.info("%d grid points, %d already done", len(grid), len(grid) - len(todo))
    nonconverged = False
    plot_rows = []
    try:
        if cfg["workers"] > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
                results = pool.map(_point_worker, [(t, c, s, cfg) for t, c, s in todo])
                for rec, detail in results:
                    nonconverged |= _store(rec, detail, writer, points_dir, cfg, command, plot_rows)
        else:
            for t, c, s in todo:
                rec, detail = compute_point(t, c, s, cfg)
                nonconverged |= _store(rec, detail, writer, points_dir, cfg, command, plot_rows)
    except KeyboardInterrupt:
        log.warning("interrupted; completed points are saved in %s", csv_path)
        raise
    _write_plot_bundle(out, csv_path, header)
    if nonconverged and cfg["strict"]:
        return EXIT_NONCONVERGED
    return EXIT_OK


def _store(rec, detail, writer, points_dir, cfg, command, plot_rows) -> bool:
    writer.append(rec)
    name = f"theta={rec['theta']:.6f}_chi={rec['chi']}_solver={rec['solver']}.json"
    doc = {"version": __version__, "command": command, "config": cfg, "point": detail}
    (points_dir / name).write_text(json.dumps(doc, indent=1, sort_keys=True, default=_json_default))
    log.info("theta=%.4f chi=%d %s: ee=%.6f converged=%s", rec["theta"], rec["chi"], rec["solver"],
             rec["ee"], rec["converged"])
    return not rec["converged"]


def _write_plot_bundle(out: Path, csv_path: Path, header: list[str]):
    """Flat table (one Schmidt value per column) plus a plotting template."""
    points = sorted((out / "points").glob("*.json"))
    rows = []
    kmax = 0
    for p in points:
        d = json.loads(p.read_text())["point"]
        rows.append(d)
        kmax = max(kmax, min(len(d["schmidt_values"]), 16))
    rows.sort(key=lambda d: (d["solver"], d["chi"], d["theta"]))
    cols = ["theta", "chi", "solver", "ee", "cx_inf", "cz_inf", "per_site_eigenvalue"]
    cols += [f"schmidt_{i + 1}" for i in range(kmax)]
    with (out / "scan_plot.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(header) + "\n")
        fh.write(",".join(cols) + "\n")
        for d in rows:
            sv = d["schmidt_values"] + [0.0] * kmax
            vals = [d[c] for c in cols[:7]] + sv[:kmax]
            fh.write(",".join(_fmt(v) for v in vals) + "\n")
    (out / "plot_template.py").write_text(PLOT_TEMPLATE)


def run_fixed_point(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for c in cfg["chi"]:
        for s in _solvers(cfg):
            for t in cfg["theta"]:
                rec, detail = compute_point(t, c, s, cfg)
                name = out / f"fixed_point_theta={t:.6f}_chi={c}_solver={s}.json"
                doc = {"version": __version__, "command": "fixed-point", "config": cfg, "point": detail}
                name.write_text(json.dumps(doc, indent=1, sort_keys=True, default=_json_default))
                print(", ".join(f"{k}={_fmt(rec[k])}" for k in SCAN_COLUMNS))
                if not rec["converged"] and cfg["strict"]:
                    status = EXIT_NONCONVERGED
    return status


# --------------------------------------------------------------------------
# critical, finite, noise


def run_critical(cfg: dict, out: Path) -> int:
    from .solvers import DegenerateBracketError, find_theta_c

    out.mkdir(parents=True, exist_ok=True)
    header = header_lines(cfg, "critical")
    writer = CsvWriter(out / "critical.csv", ("chi", "theta_c", "bracket_lo", "bracket_hi", "solvers_agree"),
                       header, resume=False)
    for c in cfg["chi"]:
        try:
            res = find_theta_c(c, tuple(cfg["critical_bracket"]), cfg["critical_resolution"])
        except DegenerateBracketError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        writer.append({"chi": c, "theta_c": res.theta_c, "bracket_lo": res.bracket[0],
                       "bracket_hi": res.bracket[1], "solvers_agree": res.solvers_agree})
        probes = [vars(p) for p in res.probes]
        (out / f"critical_chi={c}_probes.json").write_text(
            json.dumps({"version": __version__, "config": cfg, "probes": probes}, indent=1,
                       default=_json_default))
        print(f"chi={c}: theta_c={res.theta_c:.4f} bracket=({res.bracket[0]:.4f}, {res.bracket[1]:.4f})")
        if not res.solvers_agree and cfg["strict"]:
            return EXIT_NONCONVERGED
    return EXIT_OK


def run_finite(cfg: dict, out: Path) -> int:
    from .finite import gap_scan

    out.mkdir(parents=True, exist_ok=True)
    cols = ("theta", "n", "bc", "chi", "e0", "e1", "gap", "cross_gap", "branch0", "branch1", "ee0", "ee1")
    writer = CsvWriter(out / "finite.csv", cols, header_lines(cfg, "finite"), resume=False)
    chi = cfg["chi"][0]
    for n in cfg["finite_n"]:
        for t in cfg["theta"]:
            (p,) = gap_scan([t], [n], cfg["finite_bc"], chi, cross_branch=True, seed=cfg["seed"],
                            method=cfg["finite_method"])
            writer.append({"theta": t, "n": n, "bc": p.bc, "chi": chi, "e0": _real(p.e0), "e1": _real(p.e1),
                           "gap": p.gap, "cross_gap": p.cross_gap if p.cross_gap is not None else float("nan"),
                           "branch0": p.branch0, "branch1": p.branch1,
                           "ee0": _state_ee(p.psi0), "ee1": _state_ee(p.psi1)})
            print(f"theta={t:.4f} n={n}: e0={p.e0} e1={p.e1} gap={p.gap:.4g} {p.branch0}/{p.branch1}")
    return EXIT_OK


def _state_ee(psi) -> float:
    """Mid-chain entropy of a finite chain; bond entropy of a uniform state."""
    from .finite import FiniteMPS, mid_chain_ee
    from .umps import canonicalize, entanglement_spectrum

    if psi is None:
        return float("nan")
    if isinstance(psi, FiniteMPS):
        return mid_chain_ee(psi)
    return entanglement_spectrum(canonicalize(psi)).ee


def _real(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def run_noise(cfg: dict, out: Path) -> int:
    from .solvers import NoiseSpec, noisy_trajectory

    out.mkdir(parents=True, exist_ok=True)
    theta = cfg["theta_mean"] if cfg["theta_mean"] is not None else cfg["theta"][0]
    chi = cfg["chi"][0]
    cols = ("layer", "theta_used", "clamped", "cx_100", "cz_100", "ee")
    writer = CsvWriter(out / f"noise_seed={cfg['seed']}.csv", cols, header_lines(cfg, "noise"), resume=False)
    spec = NoiseSpec(theta_mean=float(theta), epsilon=float(cfg["noise_epsilon"]), seed=int(cfg["seed"]),
                     layers=int(cfg["noise_layers"]))
    for r in noisy_trajectory(spec, chi):
        writer.append(vars(r))
    return EXIT_OK


# --------------------------------------------------------------------------
# validation


def validation_checks(seed: int = 0):
    """Yield ``(name, residual, tolerance)`` for the oracle suite."""
    from .model import finite_row_matrix
    from .oracle import exact_cluster_state, stabilizer_expectations, validate_mpo_evolution, validate_peps

    for lx in range(1, 11):
        for ly in range(1, 11):
            if lx * ly <= 20 and lx * ly >= 2:
                yield f"peps {lx}x{ly}", 1.0 - validate_peps(lx, ly), 1e-12
    rng = np.random.default_rng(seed)
    for theta in rng.uniform(0.0, np.pi / 2, 10):
        yield f"mpo evolution 4x3 theta={theta:.4f}", 1.0 - validate_mpo_evolution(4, 3, theta), 1e-10
    for lx, ly in ((5, 4), (6, 3), (3, 6)):
        theta = float(rng.uniform(0.0, np.pi / 2))
        yield f"mpo evolution {lx}x{ly} theta={theta:.4f}", 1.0 - validate_mpo_evolution(lx, ly, theta), 1e-10
    for n in range(3, 7):
        h = finite_row_matrix(np.pi / 2, n, "periodic")
        yield f"unitary row n={n}", float(np.max(np.abs(h.conj().T @ h - np.eye(2**n)))), 1e-10
    for lx in range(1, 5):
        for ly in range(1, 6):
            if lx * ly >= 2:
                ev = stabilizer_expectations(exact_cluster_state(lx, ly), lx, ly)
                yield f"stabilizers {lx}x{ly}", float(np.max(np.abs(ev - 1.0))), 1e-12


def run_validate(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    lines = header_lines(cfg, "validate")
    failed = 0
    for name, resid, tol in validation_checks(cfg["seed"]):
        ok = abs(resid) <= tol
        failed += not ok
        line = f"{'PASS' if ok else 'FAIL'}  {name}  residual={resid:.3e}  tol={tol:.0e}"
        lines.append(line)
        print(line)
    lines.append(f"# {failed} failed")
    (out / "validate.txt").write_text("\n".join(lines) + "\n")
    return EXIT_VALIDATION if failed else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML file of key-value settings")
    common.add_argument("--theta", help="angles as A:B:STEP (inclusive) or a comma-separated list")
    common.add_argument("--chi", help="comma-separated bond dimensions")
    common.add_argument("--solver", choices=("power", "vumps", "both"))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="results", metavar="DIR")
    common.add_argument("--resume", action="store_true", help="skip grid points already in the output CSV")
    common.add_argument("--strict", action="store_true", help="exit with status 3 on non-convergence")
    common.add_argument("--workers", type=int, help="worker processes for independent grid points")
    common.add_argument("--no-timing", action="store_true", help="write 0 for wall times (reproducible files)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cluster-boundary", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="fixed points on a theta x chi x solver grid")
    sub.add_parser("fixed-point", parents=[common], help="single fixed points with full spectra")
    sub.add_parser("critical", parents=[common], help="critical angle for each chi")
    p = sub.add_parser("finite", parents=[common], help="finite-chain spectra and gaps")
    p.add_argument("--n", help="comma-separated chain lengths")
    p.add_argument("--bc", choices=("open", "periodic"))
    p.add_argument("--method", choices=("sweep", "uniform"),
                   help="finite sweeps, or translation-invariant ring states from the uniform fixed points")
    p = sub.add_parser("noise", parents=[common], help="power iteration with noisy angles")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--layers", type=int)
    sub.add_parser("validate", parents=[common], help="brute-force oracle checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    start = time.perf_counter()
    try:
        if args.command == "scan":
            status = run_scan(cfg, out, args.resume)
        elif args.command == "fixed-point":
            status = run_fixed_point(cfg, out)
        elif args.command == "critical":
            status = run_critical(cfg, out)
        elif args.command == "finite":
            status = run_finite(cfg, out)
        elif args.command == "noise":
            status = run_noise(cfg, out)
        else:
            status = run_validate(cfg, out)
    except KeyboardInterrupt:
        return 130
    log.info("%s finished in %.1f s", args.command, time.perf_counter() - start)
    return status


if __name__ == "__main__":
    sys.exit(main())
