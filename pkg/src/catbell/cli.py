"""Command-line driver: emits the simulation's sweep data as CSV/JSON files.

Subcommands
    wavefunction  |psi_k|^2 on a quadrature grid for one Kerr branch
    fringe        postselected probability vs sigma_1 at fixed sigma_2
    chsh-map      |S| over a (sigma_a', sigma_b') grid
    chsh-max      optimized |S| vs photon number for a list of window widths
    loss-sweep    optimized |S| vs per-path mean photon loss
    validate      self-check suite (oracle equivalence, bounds, loss oracle)

Angle-valued flags accept arithmetic expressions such as ``pi/4`` or
``0.1*sqrt(n)`` with ``n`` bound to the resolved photon number.  Flags
override config-file values, which override defaults; the effective config
is echoed into every output file.  Identical configs produce byte-identical
files.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .bell import (
    HomodyneWindow,
    MeasurementSettings,
    PatternProbabilityModel,
    TSIRELSON_BOUND,
    chsh_map,
    optimize_chsh,
)
from .errors import DegenerateWindowError
from .interferometer import (
    BRANCHES,
    branch_state,
    closed_form_amplitude,
    hermite_amplitude,
    outcome_multiplier_table,
    phase_integral_amplitude,
    total_outcome_norm,
)
from .loss import (
    LossModel,
    brute_force_pattern_probability,
    loss_records,
    lossy_pattern_probability,
)
from .states import reconstruct_number_state, CoherentRing

__all__ = ["main", "parse_expression"]

_EXPR_FUNCS = {"sqrt": math.sqrt, "cos": math.cos, "sin": math.sin}
_EXPR_OPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class CliError(Exception):
    """Bad input; maps to exit code 2."""


def parse_expression(text, n: float | None = None) -> float:
    """Evaluate a small arithmetic expression ("pi/4", "0.1*sqrt(n)")."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        tree = ast.parse(str(text).strip(), mode="eval").body
    except SyntaxError as exc:
        raise CliError(f"cannot parse expression {text!r}: {exc}") from None

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            name = node.id.lower()
            if name == "pi":
                return math.pi
            if name == "n":
                if n is None:
                    raise CliError(f"expression {text!r} uses 'n' but no photon number is set")
                return float(n)
            raise CliError(f"unknown name {node.id!r} in expression {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _EXPR_OPS:
            return _EXPR_OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            value = ev(node.operand)
            return -value if isinstance(node.op, ast.USub) else value
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id.lower() in _EXPR_FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            return _EXPR_FUNCS[node.func.id.lower()](ev(node.args[0]))
        raise CliError(f"unsupported construct in expression {text!r}")

    return ev(tree)


def _format_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _emit(path: str | None, config: dict, columns: list[str], rows, fmt: str) -> None:
    """Write rows with the echoed config; CSV keeps 12 significant digits."""
    if fmt == "csv":
        lines = [f"# config: {json.dumps(config, sort_keys=True)}"]
        lines.append(",".join(columns))
        lines.extend(",".join(_format_value(v) for v in row) for row in rows)
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = {
            "config": config,
            "columns": columns,
            "rows": [
                [v if isinstance(v, (int, np.integer)) else float(f"{float(v):.12g}") for v in row]
                for row in rows
            ],
        }
        text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    else:
        raise CliError(f"unknown output format {fmt!r}")
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write output file {path!r}: {exc}") from None


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path!r}: {exc}") from None
    if not isinstance(data, dict):
        raise CliError("config file must hold a JSON object")
    return data


def _effective(args, file_cfg: dict, key: str, default=None):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _resolve_photons(args, file_cfg, allow_list=False):
    raw = _effective(args, file_cfg, "n")
    if raw is None:
        raise CliError("photon number --n is required")
    parts = str(raw).split(",") if allow_list else [str(raw)]
    values = []
    for part in parts:
        try:
            value = int(part)
        except ValueError:
            raise CliError(f"photon number must be an integer, got {part!r}") from None
        if value < 1:
            raise CliError(f"photon number must be >= 1 (no branches exist for n={value})")
        values.append(value)
    return values if allow_list else values[0]


def _resolve_loss(args, file_cfg, n: int) -> tuple[LossModel | None, float, float | None]:
    nbar = _effective(args, file_cfg, "nbar")
    eta = _effective(args, file_cfg, "eta")
    if nbar is not None and eta is not None:
        raise CliError("give at most one of --nbar and --eta")
    if eta is not None:
        model = LossModel(parse_expression(eta, n))
        return model, model.eta, model.mean_loss(n)
    if nbar is not None:
        model = LossModel.from_mean_loss(parse_expression(nbar, n), n)
        return model, model.eta, model.mean_loss(n)
    return None, 1.0, None


def _window_from(args, file_cfg, n: int) -> HomodyneWindow:
    x1m = parse_expression(_effective(args, file_cfg, "x1m", "sqrt(n)"), n)
    x2m = parse_expression(_effective(args, file_cfg, "x2m", "sqrt(n)"), n)
    dx = parse_expression(_effective(args, file_cfg, "dx", 0.0), n)
    if dx < 0:
        raise CliError(f"window width must be >= 0, got {dx}")
    return HomodyneWindow(x1m, x2m, dx)


def _sigma(args, file_cfg, key, default, n):
    return parse_expression(_effective(args, file_cfg, key, default), n)


def _grid_size(args, file_cfg, default: int) -> int:
    raw = _effective(args, file_cfg, "grid", default)
    try:
        size = int(raw)
    except (TypeError, ValueError):
        raise CliError(f"grid size must be an integer, got {raw!r}") from None
    if size < 1:
        raise CliError("grid size must be >= 1")
    return size


# ---------------------------------------------------------------------------
# subcommands


def cmd_wavefunction(args, file_cfg) -> int:
    n = _resolve_photons(args, file_cfg)
    theta = _sigma(args, file_cfg, "theta", "pi/4", n)
    k = _effective(args, file_cfg, "k", 1)
    if k not in BRANCHES:
        raise CliError(f"branch index must be one of {BRANCHES}, got {k}")
    size = _grid_size(args, file_cfg, 161)
    xmin = parse_expression(_effective(args, file_cfg, "xmin", -8.0), n)
    xmax = parse_expression(_effective(args, file_cfg, "xmax", 8.0), n)
    if not xmin < xmax:
        raise CliError("need xmin < xmax")
    axis = np.linspace(xmin, xmax, size)
    X1, X2 = np.meshgrid(axis, axis, indexing="ij")
    density = np.abs(hermite_amplitude(branch_state(n, theta, k), X1, X2)) ** 2
    config = {
        "command": "wavefunction",
        "n": n,
        "theta": theta,
        "k": int(k),
        "grid": size,
        "xmin": xmin,
        "xmax": xmax,
        "format": args.format,
    }
    rows = zip(X1.ravel(), X2.ravel(), density.ravel())
    _emit(args.out, config, ["x1", "x2", "density"], rows, args.format)
    return 0


def cmd_fringe(args, file_cfg) -> int:
    n = _resolve_photons(args, file_cfg)
    theta = _sigma(args, file_cfg, "theta", "pi/4", n)
    sigma2 = _sigma(args, file_cfg, "sigma-b", 0.0, n)
    window = _window_from(args, file_cfg, n)
    loss, eta, nbar = _resolve_loss(args, file_cfg, n)
    samples = _grid_size(args, file_cfg, 256)
    model = PatternProbabilityModel(n, theta, window, loss)
    sigma1 = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    p = model.pattern_probabilities(sigma1, np.full_like(sigma1, sigma2))[:, 3]
    p_max = float(np.max(p))
    if p_max <= 0.0:
        raise CliError("fringe has no support in this window")
    config = {
        "command": "fringe",
        "n": n,
        "theta": theta,
        "sigma_b": sigma2,
        "x1m": window.x1m,
        "x2m": window.x2m,
        "dx": window.delta_x,
        "eta": eta,
        "grid": samples,
        "format": args.format,
    }
    rows = zip(sigma1, p, p / p_max)
    _emit(args.out, config, ["sigma1", "probability", "normalized"], rows, args.format)
    return 0


def cmd_chsh_map(args, file_cfg) -> int:
    n = _resolve_photons(args, file_cfg)
    theta = _sigma(args, file_cfg, "theta", "pi/4", n)
    sigma_a = _sigma(args, file_cfg, "sigma-a", 0.0, n)
    sigma_b = _sigma(args, file_cfg, "sigma-b", "pi", n)
    window = _window_from(args, file_cfg, n)
    loss, eta, nbar = _resolve_loss(args, file_cfg, n)
    size = _grid_size(args, file_cfg, 65)
    threads = max(1, int(args.threads or 1))
    grid = np.linspace(-math.pi, math.pi, size)
    model = PatternProbabilityModel(n, theta, window, loss)

    def rows_for(chunk: np.ndarray) -> np.ndarray:
        return chsh_map(n, theta, window, sigma_a, sigma_b, chunk, grid, model=model)

    if threads == 1 or size < 2 * threads:
        s_abs = rows_for(grid)
    else:
        chunks = np.array_split(grid, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(rows_for, chunks))
        s_abs = np.vstack(parts)
    config = {
        "command": "chsh-map",
        "n": n,
        "theta": theta,
        "sigma_a": sigma_a,
        "sigma_b": sigma_b,
        "x1m": window.x1m,
        "x2m": window.x2m,
        "dx": window.delta_x,
        "eta": eta,
        "grid": size,
        "format": args.format,
    }
    AP, BP = np.meshgrid(grid, grid, indexing="ij")
    rows = zip(AP.ravel(), BP.ravel(), s_abs.ravel())
    _emit(args.out, config, ["sigma_a_prime", "sigma_b_prime", "abs_s"], rows, args.format)
    return 0


def cmd_chsh_max(args, file_cfg) -> int:
    photon_numbers = _resolve_photons(args, file_cfg, allow_list=True)
    dx_specs = str(_effective(args, file_cfg, "dx", "0")).split(",")
    theta_spec = _effective(args, file_cfg, "theta", "pi/4")
    rows = []
    for dx_spec in dx_specs:
        seed = None
        for n in photon_numbers:
            theta = parse_expression(theta_spec, n)
            dx = parse_expression(dx_spec, n)
            window = HomodyneWindow(
                parse_expression(_effective(args, file_cfg, "x1m", "sqrt(n)"), n),
                parse_expression(_effective(args, file_cfg, "x2m", "sqrt(n)"), n),
                dx,
            )
            if seed is not None:
                seed = MeasurementSettings(
                    *seed.angles(), theta=theta, n_photons=n, window=window
                )
            s_max, settings = optimize_chsh(n, theta, window, seed_settings=seed)
            seed = settings
            rows.append(
                (n, dx, s_max) + settings.reduced_angles()
            )
    config = {
        "command": "chsh-max",
        "n": ",".join(str(v) for v in photon_numbers),
        "dx": ",".join(s.strip() for s in dx_specs),
        "theta": str(theta_spec),
        "format": args.format,
    }
    columns = ["n", "dx", "s_max", "sigma_a", "sigma_a_prime", "sigma_b", "sigma_b_prime"]
    _emit(args.out, config, columns, rows, args.format)
    return 0


def cmd_loss_sweep(args, file_cfg) -> int:
    n = _resolve_photons(args, file_cfg)
    theta = _sigma(args, file_cfg, "theta", "pi/4", n)
    window = _window_from(args, file_cfg, n)
    if window.delta_x != 0:
        raise CliError("loss sweeps assume the point-window limit; use --dx 0")
    nbar_spec = _effective(args, file_cfg, "nbar")
    eta_spec = _effective(args, file_cfg, "eta")
    if nbar_spec is not None and eta_spec is not None:
        raise CliError("give at most one of --nbar and --eta")
    if nbar_spec is not None:
        n_bars = [parse_expression(s, n) for s in str(nbar_spec).split(",")]
    elif eta_spec is not None:
        etas = [parse_expression(s, n) for s in str(eta_spec).split(",")]
        n_bars = [LossModel(e).mean_loss(n) for e in etas]
    else:
        n_bars = list(np.linspace(0.0, 0.4 if n > 1 else 0.24, 9))
    seed = None
    rows = []
    for n_bar in n_bars:
        model = LossModel.from_mean_loss(n_bar, n) if n_bar > 0 else LossModel(1.0)
        s_max, settings = optimize_chsh(n, theta, window, seed_settings=seed, loss=model)
        seed = settings
        rows.append((n_bar, model.eta, s_max) + settings.reduced_angles())
    config = {
        "command": "loss-sweep",
        "n": n,
        "theta": theta,
        "x1m": window.x1m,
        "x2m": window.x2m,
        "dx": 0.0,
        "nbar": ",".join(_format_value(v) for v in n_bars),
        "format": args.format,
    }
    columns = ["nbar", "eta", "s_max", "sigma_a", "sigma_a_prime", "sigma_b", "sigma_b_prime"]
    _emit(args.out, config, columns, rows, args.format)
    return 0


# ---------------------------------------------------------------------------
# validate


def _check_oracle_equivalence() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for N in (1, 2, 4):
        for theta in (0.0, math.pi / 7, math.pi / 4):
            for k in BRANCHES:
                x1 = rng.uniform(-6, 6, 5)
                x2 = rng.uniform(-6, 6, 5)
                ref = phase_integral_amplitude(N, math.sqrt(N), theta, k, x1, x2)
                val = hermite_amplitude(branch_state(N, theta, k), x1, x2)
                err = np.max(np.abs(val - ref) / np.maximum(np.abs(ref), 1e-12))
                worst = max(worst, float(err))
    closed_worst = 0.0
    for N in (4, 24):
        for k in (1, 4):
            b = branch_state(N, math.pi / 4, k)
            x1 = rng.uniform(-6, 6, 20)
            x2 = rng.uniform(-6, 6, 20)
            dev = np.max(np.abs(hermite_amplitude(b, x1, x2) - closed_form_amplitude(b, x1, x2)))
            closed_worst = max(closed_worst, float(dev))
    ok = worst <= 1e-8 and closed_worst <= 1e-12
    return ok, f"phi-integral rel dev {worst:.2e} (<=1e-8), closed form {closed_worst:.2e} (<=1e-12)"


def _check_normalization() -> tuple[bool, str]:
    rng = np.random.default_rng(12)
    worst = 0.0
    for N in (1, 4):
        s1, s2 = rng.uniform(-math.pi, math.pi, 2)
        total = total_outcome_norm(N, math.pi / 4, float(s1), float(s2))
        worst = max(worst, abs(total - 1.0))
    ring = reconstruct_number_state(CoherentRing(N=4))
    overlap_defect = abs(1.0 - abs(ring[4]))
    ok = worst <= 1e-6 and overlap_defect <= 1e-10
    return ok, f"norm defect {worst:.2e} (<=1e-6), ring overlap defect {overlap_defect:.2e}"


def _random_settings(rng, theta=None):
    N = int(rng.integers(1, 9))
    theta = float(rng.uniform(0, math.pi)) if theta is None else theta
    if rng.random() < 0.8:
        window = HomodyneWindow(float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)), 0.0)
    else:
        window = HomodyneWindow(
            float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)),
            float(rng.uniform(0.05, 0.5)), quadrature_order=8,
        )
    angles = rng.uniform(-math.pi, math.pi, 4)
    return N, theta, window, angles


def _check_tsirelson(draws: int = 2000) -> tuple[bool, str]:
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(draws):
        N, theta, window, angles = _random_settings(rng)
        try:
            model = PatternProbabilityModel(N, theta, window, check_convergence=False)
            s = abs(model.chsh(angles))
        except DegenerateWindowError:
            continue
        worst = max(worst, s)
    ok = worst <= TSIRELSON_BOUND + 1e-6
    return ok, f"max |S| = {worst:.8f} over {draws} draws (<= 2 sqrt 2 + 1e-6)"


def _check_locality(draws: int = 500) -> tuple[bool, str]:
    rng = np.random.default_rng(14)
    worst = 0.0
    for _ in range(draws):
        N, _, window, angles = _random_settings(rng, theta=0.0)
        try:
            model = PatternProbabilityModel(N, 0.0, window, check_convergence=False)
            s = abs(model.chsh(angles))
        except DegenerateWindowError:
            continue
        worst = max(worst, s)
    ok = worst <= 2.0 + 1e-9
    return ok, f"max |S| at theta=0 is {worst:.12f} over {draws} draws (<= 2 + 1e-9)"


def _check_trace_preservation() -> tuple[bool, str]:
    worst = 0.0
    for N in (2, 5):
        for eta in (0.6, 0.9):
            records = loss_records(N, 0.83, eta)
            norms = np.zeros(4)
            for rec in records:
                norms += np.sum(np.abs(rec.coefficients) ** 2, axis=1)
            worst = max(worst, float(np.max(np.abs(norms - 1.0))))
    ok = worst <= 1e-10
    return ok, f"per-branch record mass defect {worst:.2e} (<=1e-10)"


def _check_loss_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(15)
    worst = 0.0
    from .interferometer import PATTERNS

    for N in (1, 2, 3):
        for _ in range(3):
            theta = float(rng.uniform(0, math.pi))
            eta = float(rng.uniform(0.5, 0.95))
            s1, s2 = rng.uniform(-math.pi, math.pi, 2)
            pattern = PATTERNS[int(rng.integers(0, 4))]
            if rng.random() < 0.5:
                window = HomodyneWindow(float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)), 0.0)
            else:
                window = HomodyneWindow(
                    float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), 0.3, quadrature_order=8
                )
            ref = brute_force_pattern_probability(N, theta, s1, s2, pattern, window, eta)
            val = lossy_pattern_probability(N, theta, s1, s2, pattern, window, LossModel(eta))
            worst = max(worst, abs(ref - val))
    ok = worst <= 1e-9
    return ok, f"max |production - brute force| = {worst:.2e} (<=1e-9)"


def cmd_validate(args, file_cfg) -> int:
    checks = [
        ("oracle-equivalence", _check_oracle_equivalence),
        ("normalization", _check_normalization),
        ("tsirelson-bound", _check_tsirelson),
        ("theta0-locality", _check_locality),
        ("trace-preservation", _check_trace_preservation),
        ("loss-brute-force", _check_loss_oracle),
    ]
    failures = 0
    width = max(len(name) for name, _ in checks)
    for name, fn in checks:
        ok, detail = fn()
        status = "PASS" if ok else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catbell",
        description="Bell-test simulation for phase-entangled cat states",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, lists=False):
        p.add_argument("--n", help="photon number" + (" (comma list allowed)" if lists else ""))
        p.add_argument("--theta", help="Kerr phase in radians (expressions allowed, e.g. pi/4)")
        p.add_argument("--r", help="coherent-ring radius (default sqrt(n); oracle use only)")
        p.add_argument("--x1m", help="window center on x1 (default sqrt(n))")
        p.add_argument("--x2m", help="window center on x2 (default sqrt(n))")
        p.add_argument("--dx", help="window full width (0 = point limit)")
        p.add_argument("--sigma-a", help="CHSH setting sigma_A")
        p.add_argument("--sigma-a-prime", help="CHSH setting sigma_A'")
        p.add_argument("--sigma-b", help="CHSH setting sigma_B")
        p.add_argument("--sigma-b-prime", help="CHSH setting sigma_B'")
        p.add_argument("--nbar", help="per-path mean photon loss (loss-sweep: comma list)")
        p.add_argument("--eta", help="per-path transmissivity in (0, 1]")
        p.add_argument("--grid", help="grid resolution / sample count")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for grid sweeps")

    p = sub.add_parser("wavefunction", help="branch density on a quadrature grid")
    p.add_argument("--k", type=int, help="branch index 1..4 (1=++, 2=+-, 3=-+, 4=--)")
    p.add_argument("--xmin", help="grid lower edge (default -8)")
    p.add_argument("--xmax", help="grid upper edge (default 8)")
    common(p)
    p.set_defaults(func=cmd_wavefunction)

    p = sub.add_parser("fringe", help="postselected fringe vs sigma_1")
    common(p)
    p.set_defaults(func=cmd_fringe)

    p = sub.add_parser("chsh-map", help="|S| over a (sigma_a', sigma_b') grid")
    common(p)
    p.set_defaults(func=cmd_chsh_map)

    p = sub.add_parser("chsh-max", help="optimized |S| vs photon number")
    common(p, lists=True)
    p.set_defaults(func=cmd_chsh_max)

    p = sub.add_parser("loss-sweep", help="optimized |S| vs mean photon loss")
    common(p)
    p.set_defaults(func=cmd_loss_sweep)

    p = sub.add_parser("validate", help="run the self-check suite")
    common(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = _load_config_file(getattr(args, "config", None))
        return args.func(args, file_cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, DegenerateWindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
