"""Command line front end: ``singquad weights|converge|integrate --config <path>``.

Each job is one JSON file; see the README for the schema.  Exit codes are 0 on
success, 1 for usage errors (bad arguments or configuration) and 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from singquad import __version__
from singquad.catalog import make_kernel, make_smooth_factor
from singquad.core import (
    GridContext,
    IncompatibleWeightsError,
    InvalidParametersError,
    SingquadError,
)
from singquad.cutoff import make_standard_cutoff
from singquad.rules import composite_rule, corrected_rule, punctured_rule
from singquad.study import RULES, run_convergence
from singquad.weights import (
    WeightCache,
    WeightSet,
    WeightTable,
    interpolate_weights,
    load_weights,
    save_weights,
    synthesize_weights,
    tabulate_weights,
)

logger = logging.getLogger("singquad")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class ConfigError(InvalidParametersError):
    """Malformed job configuration."""


# {{{ configuration


def load_config(path) -> tuple[dict, str]:
    """Parse a JSON job file; returns the object and the sha256 of its bytes."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg, hashlib.sha256(raw).hexdigest()


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config field {key!r} is required")
    return cfg[key]


def _int_field(cfg: dict, key: str, default=None, minimum=None) -> int:
    val = cfg.get(key, default) if default is not None else _require(cfg, key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"config field {key!r} must be an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"config field {key!r} must be >= {minimum}, got {val}")
    return val


def _vector(cfg: dict, key: str, n: int) -> tuple[float, ...]:
    val = np.atleast_1d(np.asarray(_require(cfg, key), dtype=float))
    if val.shape == (1,) and n > 1:
        val = np.repeat(val, n)
    if val.shape != (n,):
        raise ConfigError(f"config field {key!r} must have {n} components")
    return tuple(float(x) for x in val)


def kernel_from_config(cfg: dict):
    n = _int_field(cfg, "n", minimum=1)
    if n > 3:
        raise ConfigError(f"config field 'n' must be 1, 2 or 3, got {n}")
    spec = cfg.get("kernel", "const")
    if isinstance(spec, str) or (isinstance(spec, dict) and "harmonics" in spec):
        desc = {"angular": spec}
    elif isinstance(spec, dict):
        desc = dict(spec)
    else:
        raise ConfigError(f"config field 'kernel' has unsupported value {spec!r}")
    desc.setdefault("gamma", cfg.get("gamma"))
    for key in ("radial", "expansion", "numeric_terms"):
        if key in cfg:
            desc.setdefault(key, cfg[key])
    if desc["gamma"] is None:
        raise ConfigError("config field 'gamma' is required")
    return n, make_kernel(desc, n)


def solve_options(cfg: dict) -> dict:
    opts = {}
    if "ladder" in cfg:
        opts["ladder"] = [float(h) for h in cfg["ladder"]]
    if "tol" in cfg:
        opts["tol"] = float(cfg["tol"])
    if "cutoff" in cfg:
        cut = cfg["cutoff"]
        opts["cutoff"] = make_standard_cutoff(float(cut.get("a")), float(cut.get("b", 1.0)))
    for key in ("angular_resolution", "glue_points"):
        if key in cfg:
            opts[key] = _int_field(cfg, key, minimum=1)
    return opts


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class FileWeightProvider:
    """Weight provider backed by weight files, falling back to synthesis if allowed.

    Exact weight sets are matched on ``(kernel_id, gamma, p, alpha)``; tables on
    ``(kernel_id, gamma, p)`` and interpolated at the requested offset.
    """

    def __init__(self, paths, synthesize: bool = False, **solve_kwargs):
        self.hashes = {}
        self.sets: list[WeightSet] = []
        self.tables: list[WeightTable] = []
        for path in paths:
            obj = load_weights(path)
            self.hashes[str(path)] = _sha256_file(path)
            (self.tables if isinstance(obj, WeightTable) else self.sets).append(obj)
        self.fallback = WeightCache(**solve_kwargs) if synthesize else None

    @staticmethod
    def _matches(ws, kernel, order):
        return ws.kernel_id == kernel.kernel_id and ws.gamma == kernel.gamma and ws.p == order

    def __call__(self, kernel, order: int, alpha):
        alpha = tuple(float(a) for a in np.atleast_1d(alpha))
        for ws in self.sets:
            if self._matches(ws, kernel, order) and ws.alpha == alpha:
                return ws
        for table in self.tables:
            sample = next(iter(table.entries.values()), None)
            if sample is not None and self._matches(sample, kernel, order):
                return interpolate_weights(table, alpha, kernel)
        if self.fallback is not None:
            return self.fallback(kernel, order, alpha)
        raise IncompatibleWeightsError(
            f"no weights for kernel {kernel.kernel_id!r}, gamma={kernel.gamma}, "
            f"p={order}, alpha={alpha} in {list(self.hashes)}")


def _provider(cfg: dict, config_dir: Path):
    files = cfg.get("weights")
    if files is None:
        return WeightCache(**solve_options(cfg)), {}
    if isinstance(files, str):
        files = [files]
    paths = [p if Path(p).is_absolute() else config_dir / p for p in files]
    provider = FileWeightProvider(paths, synthesize=bool(cfg.get("synthesize_missing", False)),
                                  **solve_options(cfg))
    return provider, provider.hashes


# }}}


# {{{ commands


def cmd_weights(cfg: dict, out: Path, workers: int) -> int:
    n, kernel = kernel_from_config(cfg)
    p = _int_field(cfg, "p", minimum=0)
    opts = solve_options(cfg)
    out.mkdir(parents=True, exist_ok=True)
    target = out / cfg.get("output", "weights.json")
    if "alpha_grid_resolution" in cfg:
        res = _int_field(cfg, "alpha_grid_resolution", minimum=2)
        table = tabulate_weights(kernel, p, res, workers=workers, **opts)
        save_weights(target, table)
        for key, msg in sorted(table.failures.items()):
            print(f"entry {list(key)}: {msg}", file=sys.stderr)
        print(f"wrote {target} ({len(table.entries)} entries, {len(table.failures)} failures)")
        return EXIT_NUMERICAL if table.failures else EXIT_OK
    alpha = _vector(cfg, "alpha", n)
    ws = synthesize_weights(kernel, p, alpha, workers=workers, **opts)
    save_weights(target, ws)
    print(f"wrote {target} ({len(ws.omega)} weights, condition {ws.condition_number:.3g})")
    return EXIT_OK


def _h_sweep(cfg: dict) -> list[float]:
    hs = cfg.get("hs")
    if hs is None and "h_sweep" in cfg:
        sweep = cfg["h_sweep"]
        start, factor = float(sweep["start"]), float(sweep.get("factor", 2.0))
        hs = [start / factor ** j for j in range(_int_field(sweep, "count", minimum=0))]
    if not hs:
        raise ConfigError("the h-sweep ('hs' or 'h_sweep') is empty or missing")
    return [float(h) for h in hs]


def _rule(cfg: dict) -> str:
    rule = _require(cfg, "rule")
    if rule not in RULES:
        raise ConfigError(f"config field 'rule' must be one of {RULES}, got {rule!r}")
    return rule


def cmd_converge(cfg: dict, out: Path, workers: int, config_hash: str, config_dir: Path) -> int:
    n, kernel = kernel_from_config(cfg)
    rule = _rule(cfg)
    p = _int_field(cfg, "p", default=0, minimum=0)
    hs = _h_sweep(cfg)
    v = make_smooth_factor(_require(cfg, "v"), n)
    place = {}
    if "alpha" in cfg:
        place["alpha"] = _vector(cfg, "alpha", n)
    else:
        place["x0"] = _vector(cfg, "x0", n)
    provider, hashes = _provider(cfg, config_dir)
    report = run_convergence(rule, kernel, v, hs, p=p, weight_provider=provider,
                             oracle_tol=float(cfg.get("oracle_tol", 1e-13)),
                             workers=workers, **place)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.get("output", f"converge-{rule}")
    (out / f"{stem}.csv").write_text(report.to_csv())
    meta = {
        "config sha256": config_hash,
        "library version": __version__,
        "kernel": kernel.kernel_id,
        "placement": ", ".join(f"{k}={list(v)}" for k, v in place.items()),
    }
    if hashes:
        for path, digest in hashes.items():
            meta[f"weight file {Path(path).name} sha256"] = digest
    else:
        meta["weight files"] = "none"
    (out / f"{stem}.md").write_text(report.to_markdown(meta))
    status = "VERIFIED" if report.verified else "NOT-VERIFIED"
    print(f"{rule}: median observed order {report.median_order:.4f} "
          f"(theory {report.theoretical_order:g}), {status}")
    return EXIT_OK


def cmd_integrate(cfg: dict, workers: int, config_dir: Path) -> int:
    n, kernel = kernel_from_config(cfg)
    rule = _rule(cfg)
    p = _int_field(cfg, "p", default=0, minimum=0)
    h = float(_require(cfg, "h"))
    v = make_smooth_factor(_require(cfg, "v"), n)
    h0 = float(cfg.get("h0", min(1.0, 2.0 * h)))
    L = max(v.support_radius, 1e-12)
    if "alpha" in cfg:
        grid = GridContext(n, h, _vector(cfg, "alpha", n), h0=h0, L=L)
    else:
        grid = GridContext.from_singularity(_vector(cfg, "x0", n), h, h0=h0, L=L)

    provenance = "none"
    if rule == "punctured":
        value = punctured_rule(kernel, v, grid, workers)
    else:
        provider, _ = _provider(cfg, config_dir)
        if rule == "corrected":
            ws = provider(kernel, p, grid.alpha)
            value = corrected_rule(kernel, v, grid, ws, workers)
            provenance = ws.provenance
        else:
            seen = set()

            def tracking(term, order, alpha):
                ws = provider(term, order, alpha)
                seen.add(ws.provenance)
                return ws

            value = composite_rule(kernel, v, grid, tracking, p, workers)
            provenance = ",".join(sorted(seen)) or "none"
    print(format(value, ".17g"))
    print(f"rule={rule} h={h:.17g} alpha={list(grid.alpha)} p={p} weights={provenance}")
    return EXIT_OK


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singquad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"singquad {__version__}")
    parser.add_argument("command", choices=("weights", "converge", "integrate"))
    parser.add_argument("--config", required=True, help="JSON job file")
    parser.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")
    parser.add_argument("--out", default=".", help="output directory (default: cwd)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        cfg, digest = load_config(args.config)
        config_dir = Path(args.config).resolve().parent
        if args.command == "weights":
            return cmd_weights(cfg, out, args.workers)
        if args.command == "converge":
            return cmd_converge(cfg, out, args.workers, digest, config_dir)
        return cmd_integrate(cfg, args.workers, config_dir)
    except (InvalidParametersError, IncompatibleWeightsError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, TypeError, ValueError) as exc:
        print(f"usage error: malformed config ({type(exc).__name__}: {exc})", file=sys.stderr)
        return EXIT_USAGE
    except SingquadError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        diagnostics = getattr(exc, "diagnostics", None)
        if diagnostics:
            print(json.dumps(diagnostics, default=str), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
