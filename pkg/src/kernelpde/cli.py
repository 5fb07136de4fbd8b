"""Command-line front end.

Subcommands
-----------
fit              fit a kernel and write coefficients, a report and plot data
convolve         approximate K*f for a field file and compare with the direct route
validate         run the invariant suite; exit status 0 iff every check passes
reproduce-paper  Gaussian fits for n = 1, 2, 3 with d_j = 1 + sin(j - 1), N = 10

Settings come from an optional INI file (``--config``) and are overridden by
command-line flags. Unknown sections or keys in the file are errors.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .convolution import (
    GridField,
    approximate_convolution,
    convolve_direct,
    error_report,
    export_columns,
    read_field,
    write_field,
)
from .errors import ConfigError, KernelPDEError
from .fileio import atomic_write_text, fmt, read_csv, write_csv
from .fitting import DiffusionSet, KernelApproximation, fit, fit_hm
from .radial_kernel import (
    DecayHint,
    RadialKernel,
    gaussian_kernel,
    green_kernel,
    load_tabulated_kernel,
)

logger = logging.getLogger("kernelpde")

DEFAULT_TERMS = 10
FAR_WINDOW = (0.5, 4.0)
FAR_RTOL = 5e-2
ALPHA_SCALE = 1e5
PROBE_R = 1e-6

# section -> key -> description (all values are parsed later)
SCHEMA = {
    "fit": {
        "dimension": "spatial dimension n (1, 2 or 3)",
        "kernel": "'gaussian', 'green:<d>' or 'file:<path>'",
        "decay_hint": "tail of a tabulated profile, e.g. 'gaussian:1'",
        "diffusions": "'one_plus_sin:<N>' or a comma-separated list",
        "sobolev_index": "m >= 0; m > 0 uses the regularized basis",
        "method": "'cholesky' or 'cauchy'",
    },
    "grid": {
        "shape": "comma-separated powers of two",
        "box_length": "period L of the box",
    },
    "output": {"dir": "output directory"},
}


@dataclass(frozen=True)
class RunConfig:
    dimension: int = 1
    kernel: str = "gaussian"
    decay_hint: Optional[str] = None
    diffusions: str = "one_plus_sin:10"
    sobolev_index: int = 0
    method: str = "cholesky"
    grid_shape: tuple = (4096,)
    box_length: float = 40.0
    out: Path = Path("kernelpde_out")
    num_terms: Optional[int] = None

    def diffusion_set(self) -> DiffusionSet:
        return parse_diffusions(self.diffusions, self.num_terms)

    def build_kernel(self) -> RadialKernel:
        return parse_kernel(self.kernel, self.dimension, self.decay_hint)

    def validate(self) -> "RunConfig":
        if self.dimension not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3 (got {self.dimension})")
        if self.sobolev_index < 0:
            raise ConfigError("sobolev_index must be >= 0")
        if self.method not in ("cholesky", "cauchy"):
            raise ConfigError(f"method must be 'cholesky' or 'cauchy' (got {self.method!r})")
        if self.method == "cauchy" and (self.dimension == 2 or self.sobolev_index > 0):
            raise ConfigError("the Cauchy solver needs m = 0 and n in {1, 3}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise ConfigError("box_length must be positive")
        self.diffusion_set()
        self.build_kernel()
        return self


def parse_diffusions(text: str, num_terms: Optional[int] = None) -> DiffusionSet:
    text = text.strip()
    try:
        if text.startswith("one_plus_sin"):
            _, _, count = text.partition(":")
            N = num_terms if num_terms is not None else int(count or DEFAULT_TERMS)
            return DiffusionSet.one_plus_sin(N)
        ds = DiffusionSet(tuple(float(x) for x in text.replace(",", " ").split()))
    except ValueError as exc:
        raise ConfigError(f"bad diffusion spec {text!r}: {exc}") from exc
    if num_terms is not None:
        if not 1 <= num_terms <= len(ds):
            raise ConfigError(f"--num-terms {num_terms} outside 1..{len(ds)} for an explicit list")
        ds = ds.head(num_terms)
    return ds


def parse_kernel(text: str, n: int, decay_hint: Optional[str] = None) -> RadialKernel:
    kind, _, arg = text.strip().partition(":")
    if kind == "gaussian":
        return gaussian_kernel(n)
    if kind == "green":
        try:
            return green_kernel(n, float(arg.replace("d=", "") or 1.0))
        except ValueError as exc:
            raise ConfigError(f"bad Green kernel spec {text!r}") from exc
    if kind == "file":
        path = Path(arg)
        if not path.is_file():
            raise ConfigError(f"tabulated kernel file not found: {path}")
        hint = DecayHint.parse(decay_hint) if decay_hint else None
        return load_tabulated_kernel(path, n, hint)
    raise ConfigError(f"unknown kernel spec {text!r}; use gaussian, green:<d> or file:<path>")


def _parse_shape(text) -> tuple:
    try:
        return tuple(int(x) for x in str(text).replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad grid shape {text!r}") from exc


def load_config(path) -> dict:
    """Read an INI file into RunConfig keyword arguments."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
            try:
                if key == "dimension":
                    out["dimension"] = int(value)
                elif key == "sobolev_index":
                    out["sobolev_index"] = int(value)
                elif key == "shape":
                    out["grid_shape"] = _parse_shape(value)
                elif key == "box_length":
                    out["box_length"] = float(value)
                elif key == "dir":
                    out["out"] = Path(value)
                else:
                    out[key] = value
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for '{key}': {value!r}") from exc
    return out


def build_config(args) -> RunConfig:
    kwargs = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {
        "dimension": getattr(args, "dimension", None),
        "kernel": getattr(args, "kernel", None),
        "decay_hint": getattr(args, "decay_hint", None),
        "diffusions": getattr(args, "diffusions", None),
        "sobolev_index": getattr(args, "m", None),
        "method": getattr(args, "method", None),
        "box_length": getattr(args, "box_length", None),
        "out": Path(args.out) if getattr(args, "out", None) else None,
        "num_terms": getattr(args, "num_terms", None),
    }
    if getattr(args, "grid_shape", None):
        flags["grid_shape"] = _parse_shape(args.grid_shape)
    kwargs.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig(**kwargs).validate()


# ------------------------------------------------------------------ helpers


def run_fit(cfg: RunConfig, K: Optional[RadialKernel] = None) -> KernelApproximation:
    K = K or cfg.build_kernel()
    ds = cfg.diffusion_set()
    if cfg.sobolev_index > 0:
        return fit_hm(K, ds, cfg.sobolev_index)
    return fit(K, ds, 0, method=cfg.method)


def radial_grid(n: int, r_min: float = 1e-3, r_max: float = 10.0, count: int = 200) -> np.ndarray:
    """Log-spaced radii; includes r = 0 only for n = 1 (K_N is singular there otherwise)."""
    r = np.geomspace(r_min, r_max, count)
    return np.concatenate([[0.0], r]) if n == 1 else r


def write_coefficients(path, approx: KernelApproximation):
    rows = [(j + 1, d, a) for j, (d, a) in enumerate(zip(approx.diffusions, approx.alpha))]
    return write_csv(path, ["j", "d_j", "alpha_j"], rows)


def read_coefficients(path, n: int) -> KernelApproximation:
    header, rows = read_csv(path)
    if header[:3] != ["j", "d_j", "alpha_j"]:
        raise ConfigError(f"{path}: expected columns j,d_j,alpha_j")
    ds = DiffusionSet(tuple(float(r[1]) for r in rows))
    alpha = np.array([float(r[2]) for r in rows])
    return KernelApproximation(
        n=n, diffusions=ds, alpha=alpha, residual_sq=float("nan"), condition_estimate=float("nan")
    )


def write_kernel_compare(path, K: RadialKernel, approx: KernelApproximation):
    r = radial_grid(approx.n)
    k = K.physical(r)
    kn = approx.physical(r)
    return write_csv(path, ["r", "K", "K_N"], zip(r, np.atleast_1d(k), np.atleast_1d(kn)))


def fit_report_text(cfg: RunConfig, K: RadialKernel, approx: KernelApproximation) -> str:
    kk = approx.diagnostics.get("k_norm_sq")
    lines = [
        f"dimension           {approx.n}",
        f"kernel              {K.name}",
        f"sobolev_index       {approx.m}",
        f"num_terms           {approx.N}",
        f"method              {cfg.method if approx.m == 0 else 'phi-basis'}",
        f"precision           {approx.diagnostics.get('precision', '')}",
        f"residual_sq         {fmt(approx.residual_sq)}",
    ]
    if kk:
        lines.append(f"relative_residual   {fmt(approx.residual_sq / kk)}")
    lines += [
        f"residual_sq_normal  {fmt(approx.diagnostics.get('residual_sq_normal', float('nan')))}",
        f"condition_estimate  {fmt(approx.condition_estimate)}",
        f"gradient_max        {fmt(approx.diagnostics.get('gradient_max', float('nan')))}",
        f"max_abs_alpha       {fmt(np.max(np.abs(approx.alpha)))}",
    ]
    if K.interpolation_error:
        lines.append(f"interpolation_error {fmt(K.interpolation_error)}")
    warnings = []
    if approx.ill_conditioned:
        warnings.append(
            f"Gram matrix ill-conditioned (estimate {approx.condition_estimate:.3g}); "
            "coefficients are sensitive to perturbations of the data"
        )
    lines.append("warnings")
    lines.extend(f"  - {w}" for w in warnings or ["none"])
    return "\n".join(lines) + "\n"


def _fit_outputs(out: Path, cfg: RunConfig, K: RadialKernel, approx: KernelApproximation):
    write_coefficients(out / "coefficients.csv", approx)
    atomic_write_text(out / "fit_report.txt", fit_report_text(cfg, K, approx))
    write_kernel_compare(out / "kernel_compare.csv", K, approx)


def _with_norm(K: RadialKernel, approx: KernelApproximation) -> KernelApproximation:
    from .radial_kernel import hm_inner

    approx.diagnostics.setdefault("k_norm_sq", hm_inner(K, K, approx.m))
    return approx


# ----------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    cfg = build_config(args)
    K = cfg.build_kernel()
    approx = _with_norm(K, run_fit(cfg, K))
    _fit_outputs(cfg.out, cfg, K, approx)
    print(fit_report_text(cfg, K, approx), end="")
    print(f"wrote {cfg.out}/coefficients.csv, fit_report.txt, kernel_compare.csv")
    return 0


def cmd_convolve(args) -> int:
    cfg = build_config(args)
    K = cfg.build_kernel()
    if args.field:
        f = read_field(args.field)
    else:
        f = GridField.from_function(
            lambda *x: np.exp(-sum(np.square(xi) for xi in x)),
            cfg.grid_shape,
            cfg.box_length,
        )
    if f.n != cfg.dimension:
        raise ConfigError(f"field is {f.n}-D but the fit is {cfg.dimension}-D")
    if args.coefficients:
        approx = read_coefficients(args.coefficients, cfg.dimension)
    else:
        approx = run_fit(cfg, K)
    approx_conv = approximate_convolution(f, approx, workers=args.workers)
    direct = convolve_direct(f, K)
    rep = error_report(f, K, approx, args.tol_discretization, direct=direct, approximate=approx_conv)
    out = cfg.out
    write_field(out / "approx_conv.field", approx_conv)
    write_field(out / "direct_conv.field", direct)
    if f.n == 1:
        export_columns(out / "approx_conv.dat", approx_conv)
        export_columns(out / "direct_conv.dat", direct)
    write_csv(out / "error_report.csv", ["quantity", "value"], rep.rows())
    for name, value in rep.rows():
        print(f"{name:<20} {value if isinstance(value, str) else fmt(value)}")
    return 0


def cmd_validate(args, gram_fn=None) -> int:
    from .validate import format_table, run_suite

    results = run_suite(gram_fn)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def reproduce_dimension(n: int, out: Path, num_terms: int = DEFAULT_TERMS) -> dict:
    """Gaussian fit sequence N = 1..num_terms in dimension ``n``."""
    K = gaussian_kernel(n)
    ds = DiffusionSet.one_plus_sin(num_terms)
    fits = [fit(K, ds.head(N)) for N in range(1, num_terms + 1)]
    final = _with_norm(K, fits[-1])
    cfg = RunConfig(dimension=n, diffusions=f"one_plus_sin:{num_terms}", out=out)
    _fit_outputs(out, cfg, K, final)

    kk = final.diagnostics["k_norm_sq"]
    residuals = [a.residual_sq for a in fits]
    alpha = final.alpha
    r = np.linspace(*FAR_WINDOW, 200)
    window_err = float(np.max(np.abs(final.physical(r) / K.physical(r) - 1.0)))
    near0 = float(final.physical(PROBE_R))
    # k(r; d) ~ 1/(4 pi d r) as r -> 0 in three dimensions
    singular = float(np.sum(alpha / ds.as_array()) / (4.0 * math.pi)) if n == 3 else 0.0
    rr = np.geomspace(PROBE_R, FAR_WINDOW[0], 400)
    off = np.abs(final.physical(rr) / K.physical(rr) - 1.0) > FAR_RTOL
    onset = float(rr[off].max()) if off.any() else 0.0
    checks = {
        "residual strictly decreasing in N": all(a > b for a, b in zip(residuals, residuals[1:])),
        f"max|alpha| >= {ALPHA_SCALE:g}": bool(np.max(np.abs(alpha)) >= ALPHA_SCALE),
        "mixed coefficient signs": bool(np.any(alpha > 0) and np.any(alpha < 0)),
    }
    if n == 3:
        checks["K_N diverges near r=0 while K(0)=1"] = bool(abs(near0) > 10.0 and singular != 0.0)
        checks[f"|K_N/K - 1| <= {FAR_RTOL:g} on [0.5, 4]"] = window_err <= FAR_RTOL
    return {
        "n": n,
        "residuals": residuals,
        "relative": [x / kk for x in residuals],
        "max_alpha": float(np.max(np.abs(alpha))),
        "window_err": window_err,
        "K_N_near_0": near0,
        "singular_coefficient": singular,
        "divergence_onset": onset,
        "checks": checks,
    }


def cmd_reproduce_paper(args) -> int:
    out = Path(args.out or "paper_out")
    N = args.num_terms or DEFAULT_TERMS
    results = [reproduce_dimension(n, out / f"n{n}", N) for n in (1, 2, 3)]
    rows = []
    for k in range(N):
        row = [k + 1]
        for res in results:
            row += [res["residuals"][k], res["relative"][k]]
        rows.append(row)
    header = ["N"] + [f"{c}_n{r['n']}" for r in results for c in ("residual_sq", "relative")]
    write_csv(out / "residual_table.csv", header, rows)

    lines = []
    ok = True
    for res in results:
        lines.append(
            f"n={res['n']}: relative residual {res['relative'][-1]:.3e}, "
            f"max|alpha| {res['max_alpha']:.3e}, max|K_N/K-1| on [0.5,4] {res['window_err']:.2e}"
        )
        for name, passed in res["checks"].items():
            ok &= passed
            lines.append(f"  [{'PASS' if passed else 'FAIL'}] {name}")
        if res["n"] == 3:
            lines.append(
                f"  K_N(r) ~ {res['singular_coefficient']:.3e}/r near the origin; "
                f"K_N({PROBE_R:g}) = {res['K_N_near_0']:.3e}; "
                f"|K_N/K - 1| > {FAR_RTOL:g} for r <= {res['divergence_onset']:.3g}"
            )
    text = "\n".join(lines) + "\n"
    atomic_write_text(out / "summary.txt", text)
    print(text, end="")
    return 0 if ok else 1


# ------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, grid: bool = False):
    p.add_argument("--config", help="INI file with [fit], [grid] and [output] sections")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dimension", type=int, help="spatial dimension n")
    p.add_argument("--num-terms", type=int, help="number N of Green functions")
    p.add_argument("--kernel", help="gaussian | green:<d> | file:<path>")
    p.add_argument("--decay-hint", help="tail model for tabulated kernels, e.g. gaussian:1")
    p.add_argument("--diffusions", help="one_plus_sin:<N> or a comma-separated list")
    p.add_argument("--m", type=int, help="Sobolev index of the fitting norm")
    p.add_argument("--method", choices=("cholesky", "cauchy"))
    if grid:
        p.add_argument("--grid-shape", help="e.g. 4096 or 64,64")
        p.add_argument("--box-length", type=float, help="period L of the box")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelpde",
        description="Fit radial kernels by screened-Poisson Green functions and apply them to fields.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a kernel and write coefficients")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("convolve", help="approximate K*f on a periodic grid")
    _common(p, grid=True)
    p.add_argument("--field", help="input field file (default: Gaussian bump on the grid)")
    p.add_argument("--coefficients", help="coefficients.csv from an earlier fit")
    p.add_argument("--workers", type=int, default=1, help="threads for the PDE solves")
    p.add_argument("--tol-discretization", type=float, default=1e-3)
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reproduce-paper", help="Gaussian example for n = 1, 2, 3")
    p.add_argument("--out", help="output directory (default paper_out)")
    p.add_argument("--num-terms", type=int, help=f"N (default {DEFAULT_TERMS})")
    p.set_defaults(func=cmd_reproduce_paper)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KernelPDEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
