"""Command-line experiment harness.

Subcommands run one experiment each and emit a deterministic CSV (12
significant digits, fixed column order); ``selftest`` cross-checks the
solvers against brute-force oracles and prints one pass/fail line per
invariant.  Exit codes: 0 success, 2 configuration error, 3 infeasible
scenario, 4 solver non-convergence or failed selftest invariant.

Configuration comes from an optional TOML file (flat keys, see the
per-experiment defaults below); ``--seed`` is mandatory and, with the
config, fully determines the output.  Wall-clock time goes to stderr so
repeated runs produce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import io
import sys
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .bc import solve_p3, solve_p4
from .dra import interference_diversity, make_scenario, solve_p6
from .ic import solve_p5
from .mac import solve_p2
from .model import (
    ConfigurationError,
    DomainError,
    FadingProcess,
    Role,
    generate_instance,
)
from .p2p import partial_projection, solve_p1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGE = 4

FMT = "%.12g"


def _num(x):
    return FMT % float(x)


def _usage_field(report):
    parts = [f"{name}={FMT % report.usage[name]}"
             for name in sorted(report.usage)]
    return ";".join(parts)


class CsvBuffer:
    def __init__(self, comment, columns):
        self.buf = io.StringIO()
        self.buf.write(f"# {comment}\n")
        self.buf.write(",".join(columns) + "\n")
        self.ncols = len(columns)

    def row(self, *fields):
        assert len(fields) == self.ncols
        self.buf.write(",".join(str(f) for f in fields) + "\n")

    def text(self):
        return self.buf.getvalue()


def _merge_config(defaults, path):
    cfg = dict(defaults)
    if path is not None:
        with open(path, "rb") as fh:
            loaded = tomllib.load(fh)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    return cfg


def _flag(report, tol):
    if not report.converged:
        return "no_converge"
    return "ok"


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

FIG2_DEFAULTS = {
    "M": 4, "N": 4, "J": 2, "D": 1, "Gamma": 0.1,
    "start": 0.1, "stop": 100.0, "steps": 20,
}


def run_fig2(cfg, seed, tol, out):
    """Achievable rate of the single-SU MIMO link under PTPC + PIPCs:
    exact solver against the partial-projection family over a transmit
    power sweep."""
    M, N, J = int(cfg["M"]), int(cfg["N"]), int(cfg["J"])
    D = cfg["D"]
    Gamma = cfg["Gamma"]
    Gamma = [float(Gamma)] * J if np.isscalar(Gamma) else [float(g) for g in Gamma]
    if len(Gamma) != J:
        raise ConfigurationError("need one interference budget per PU")
    if not (np.isfinite(cfg["start"]) and np.isfinite(cfg["stop"])):
        raise ConfigurationError("sweep bounds must be finite")
    steps = int(cfg["steps"])
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    sweep = np.logspace(np.log10(float(cfg["start"])),
                        np.log10(float(cfg["stop"])), steps)
    inst = generate_instance(Role.P2P, 1, J, M=M, N=N, D=D,
                             fading=FadingProcess(seed=seed))
    sumD = sum(inst.G(0, j).shape[0] for j in range(J))
    bs = list(range(0, min(N - 1, sumD) + 1))
    csv = CsvBuffer(
        "rate in bits per channel use; usage lists constraint=value pairs",
        ["experiment", "P", "method", "rate_bits", "usage", "gap",
         "iterations", "status"],
    )
    worst = EXIT_OK
    for P in sweep:
        rows = [("optimal", lambda: solve_p1(inst, float(P), Gamma, tol=tol))]
        rows += [(f"proj_b{b}",
                  lambda b=b: partial_projection(inst, float(P), Gamma, b,
                                                 tol=tol))
                 for b in bs]
        for label, solve in rows:
            try:
                rep = solve()
            except (DomainError, np.linalg.LinAlgError) as exc:
                csv.row("fig2", _num(P), label, "nan", "", "nan", 0,
                        f"error:{type(exc).__name__}")
                worst = max(worst, EXIT_NO_CONVERGE)
                continue
            status = _flag(rep, tol)
            if status != "ok":
                worst = max(worst, EXIT_NO_CONVERGE)
            csv.row("fig2", _num(P), label, _num(rep.objective),
                    _usage_field(rep), _num(rep.gap), rep.iterations, status)
    out.write(csv.text())
    return worst


MAC_DEFAULTS = {
    "K": 2, "J": 2, "M": 4, "N": 2, "D": 1, "mu": [1.0, 0.5],
    "P": 1.0, "Gamma": 0.1,
}


def _budget_list(value, count, name):
    vals = [float(value)] * count if np.isscalar(value) else [float(v) for v in value]
    if len(vals) != count:
        raise ConfigurationError(f"need {count} {name} budgets")
    return vals


def run_mac_wsr(cfg, seed, tol, out):
    K, J = int(cfg["K"]), int(cfg["J"])
    inst = generate_instance(Role.MAC, K, J, M=int(cfg["M"]), N=cfg["N"],
                             D=cfg["D"], fading=FadingProcess(seed=seed),
                             mu=cfg["mu"])
    P = _budget_list(cfg["P"], K, "transmit-power")
    Gamma = _budget_list(cfg["Gamma"], J, "interference")
    rep = solve_p2(inst, P, Gamma, tol=tol)
    csv = CsvBuffer(
        "weighted sum-rate in bits per channel use",
        ["experiment", "method", "objective_bits", "usage", "gap",
         "iterations", "status"],
    )
    status = _flag(rep, tol)
    csv.row("mac_wsr", "dual_ellipsoid", _num(rep.objective),
            _usage_field(rep), _num(rep.gap), rep.iterations, status)
    out.write(csv.text())
    return EXIT_OK if status == "ok" else EXIT_NO_CONVERGE


BC_DEFAULTS = {
    "K": 2, "J": 2, "M": 4, "N": 2, "D": 1, "mu": [1.0, 0.5],
    "P": 1.0, "Gamma": 0.1,
}


def run_bc_wsr(cfg, seed, tol, out):
    K, J = int(cfg["K"]), int(cfg["J"])
    inst = generate_instance(Role.BC, K, J, M=int(cfg["M"]), N=cfg["N"],
                             D=cfg["D"], fading=FadingProcess(seed=seed),
                             mu=cfg["mu"])
    Gamma = _budget_list(cfg["Gamma"], J, "interference")
    rep = solve_p3(inst, float(cfg["P"]), Gamma, tol=tol)
    csv = CsvBuffer(
        "weighted sum-rate in bits per channel use",
        ["experiment", "method", "objective_bits", "usage", "gap",
         "iterations", "status"],
    )
    status = _flag(rep, tol)
    csv.row("bc_wsr", "bc_mac_duality", _num(rep.objective),
            _usage_field(rep), _num(rep.gap), rep.iterations, status)
    out.write(csv.text())
    return EXIT_OK if status == "ok" else EXIT_NO_CONVERGE


BALANCE_DEFAULTS = {
    "K": 3, "J": 2, "M": 4, "D": 1, "P": 1.0, "Gamma": 0.1,
}


def run_sinr_balance(cfg, seed, tol, out):
    K, J = int(cfg["K"]), int(cfg["J"])
    inst = generate_instance(Role.BC, K, J, M=int(cfg["M"]), N=1, D=cfg["D"],
                             fading=FadingProcess(seed=seed))
    Gamma = _budget_list(cfg["Gamma"], J, "interference")
    res = solve_p4(inst, float(cfg["P"]), Gamma, tol=tol)
    if res.alpha <= 0.0:
        print("infeasible: no positive SINR target is supportable",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    csv = CsvBuffer(
        "balanced SINR (linear); usage lists constraint=value pairs",
        ["experiment", "method", "alpha", "min_sinr", "usage",
         "iterations", "status"],
    )
    usage = ";".join(f"{name}={FMT % res.usage[name]}"
                     for name in sorted(res.usage))
    csv.row("sinr_balance", "uplink_downlink_duality", _num(res.alpha),
            _num(min(res.sinrs)), usage, res.iterations, "ok")
    out.write(csv.text())
    return EXIT_OK


IC_DEFAULTS = {
    "K": 2, "J": 2, "A": 2, "B": 2, "D": 1, "mu": [1.0, 1.0],
    "P": 1.0, "Gamma": 0.1, "strategy": "weighted",
}


def run_ic_wsr(cfg, seed, tol, out):
    K, J = int(cfg["K"]), int(cfg["J"])
    inst = generate_instance(Role.IC, K, J, A=cfg["A"], B=cfg["B"],
                             D=cfg["D"], fading=FadingProcess(seed=seed),
                             mu=cfg["mu"])
    P = _budget_list(cfg["P"], K, "transmit-power")
    Gamma = _budget_list(cfg["Gamma"], J, "interference")
    strategy = str(cfg["strategy"])
    if strategy not in ("own_rate", "weighted"):
        raise ConfigurationError(f"unknown strategy: {strategy!r}")
    rep = solve_p5(inst, P, Gamma, strategy=strategy, tol=tol)
    csv = CsvBuffer(
        "weighted sum-rate in bits per channel use (iterative, "
        "interference treated as noise)",
        ["experiment", "method", "objective_bits", "usage",
         "iterations", "status"],
    )
    status = _flag(rep, tol)
    csv.row("ic_wsr", f"iterative_{cfg['strategy']}", _num(rep.objective),
            _usage_field(rep), rep.iterations, status)
    out.write(csv.text())
    return EXIT_OK if status == "ok" else EXIT_NO_CONVERGE


DRA_DEFAULTS = {
    "K": 2, "J": 1, "L": 1000, "M": 1, "N": 1, "D": 1,
    "Pbar": 1.0, "Gammabar": 0.5, "utility": "both",
}


def run_dra(cfg, seed, tol, out):
    K, J, L = int(cfg["K"]), int(cfg["J"]), int(cfg["L"])
    Pbar = _budget_list(cfg["Pbar"], K, "average-power")
    Gammabar = _budget_list(cfg["Gammabar"], J, "average-interference")
    scenario = make_scenario(K, J, L, FadingProcess(seed=seed), Pbar,
                             Gammabar, M=int(cfg["M"]), N=cfg["N"],
                             D=cfg["D"] if J else None)
    utility = str(cfg["utility"])
    if utility not in ("mac_wsr", "tdma", "both"):
        raise ConfigurationError(f"unknown utility: {utility!r}")
    which = ["mac_wsr", "tdma"] if utility == "both" else [utility]
    reports = {u: solve_p6(scenario, u, tol=tol) for u in which}
    csv = CsvBuffer(
        "average utility in bits per channel use; rel_gap_to_full compares "
        "the TDMA objective to the full multi-access objective",
        ["experiment", "method", "objective_bits", "dual_bound", "gap",
         "rel_gap_to_full", "iterations", "status"],
    )
    worst = EXIT_OK
    full = reports.get("mac_wsr")
    for u in which:
        rep = reports[u]
        status = _flag(rep, tol)
        if status != "ok":
            worst = max(worst, EXIT_NO_CONVERGE)
        rel = ""
        if u == "tdma" and full is not None:
            rel = _num((full.objective - rep.objective)
                       / max(full.objective, 1e-300))
        csv.row("dra", u, _num(rep.objective),
                _num(rep.extras["dual_bound"]), _num(rep.gap), rel,
                rep.iterations, status)
    out.write(csv.text())
    return worst


DIVERSITY_DEFAULTS = {
    "n": 100_000, "Q": 1.0, "Gamma": 0.5, "law": "exponential",
}


def run_diversity(cfg, seed, tol, out):
    n = int(cfg["n"])
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    rng = np.random.default_rng([seed, 3])
    h_p = rng.exponential(size=n)
    res = interference_diversity(h_p, Q=float(cfg["Q"]),
                                 Gamma=float(cfg["Gamma"]),
                                 law=str(cfg["law"]), seed=seed)
    csv = CsvBuffer(
        "PU ergodic capacity in bits per channel use: constant "
        "interference budget (C_p_I) vs mean-preserving random budget "
        "(C_p_II), paired Monte Carlo",
        ["experiment", "law", "n", "C_p_I", "se_I", "C_p_II", "se_II",
         "diff", "se_diff"],
    )
    csv.row("diversity", cfg["law"], n, _num(res.c_i), _num(res.se_i),
            _num(res.c_ii), _num(res.se_ii), _num(res.diff),
            _num(res.se_diff))
    out.write(csv.text())
    return EXIT_OK


def run_selftest(cfg, seed, tol, out):
    """Cross-check each solver against an independent oracle on small
    instances; print one pass/fail line per invariant."""
    from .oracles import (
        balance_grid_alpha,
        ergodic_waterfill,
        mac_scalar_grid,
        p1_grid_rate,
        waterfill_rate,
    )
    from .p2p import solve_p1_channels

    checks = []
    rng = np.random.default_rng([seed, 1])

    H = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    H /= np.sqrt(2.0)
    rep = solve_p1_channels(H, [], 2.0, [], tol=1e-7)
    checks.append(("p2p water-filling matches closed form",
                   abs(rep.objective - waterfill_rate(H, 2.0)) < 1e-6))

    H2 = (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
    H2 /= np.sqrt(2.0)
    G = (rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2)))
    rep = solve_p1_channels(H2, [G], 2.0, [0.2], tol=1e-7)
    grid = p1_grid_rate(H2, G, 2.0, 0.2)
    checks.append(("p2p solver at least matches a direction/power grid",
                   rep.objective >= grid - 5e-3))
    checks.append(("p2p duality gap below tolerance", rep.gap <= 1e-6))

    inst = generate_instance(Role.MAC, 2, 1, M=1, N=1, D=1,
                             fading=FadingProcess(seed=seed), mu=(1.0, 0.6))
    h = (inst.H(0)[0, 0], inst.H(1)[0, 0])
    g = (inst.G(0, 0)[0, 0], inst.G(1, 0)[0, 0])
    rep = solve_p2(inst, [1.0, 1.0], [0.3], tol=1e-6)
    grid = mac_scalar_grid(h, g, (1.0, 0.6), (1.0, 1.0), 0.3)
    checks.append(("scalar multi-access solver matches exhaustive grid",
                   abs(rep.objective - grid) < 5e-3))

    bc = generate_instance(Role.BC, 2, 1, M=2, N=1, D=1,
                           fading=FadingProcess(seed=seed + 1))
    res = solve_p4(bc, 1.0, [0.2], tol=1e-5)
    h_list = [bc.H(k).ravel() for k in range(2)]
    grid_alpha = balance_grid_alpha(h_list, bc.G(0, 0), 1.0, 0.2, n_dir=40)
    checks.append(("SINR balancing at least matches a beam grid",
                   res.alpha >= grid_alpha - 1e-3))
    checks.append(("balanced SINRs equalized",
                   float(np.ptp(res.sinrs)) <= 1e-3 * max(res.alpha, 1e-12)))

    sc = make_scenario(1, 0, 32, FadingProcess(seed=seed + 2), [0.8], [],
                       M=1, N=1)
    g_sc = np.array([abs(i.H(0)[0, 0]) ** 2 for i in sc.instances])
    ref, _ = ergodic_waterfill(g_sc, 0.8)
    rep6 = solve_p6(sc, "mac_wsr", tol=1e-7)
    checks.append(("scheduler reduces to ergodic water-filling",
                   abs(rep6.objective - ref) < 1e-5))

    ok = True
    for name, passed in checks:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}", file=out)
        ok = ok and passed
    return EXIT_OK if ok else EXIT_NO_CONVERGE


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "fig2": (run_fig2, FIG2_DEFAULTS),
    "mac-wsr": (run_mac_wsr, MAC_DEFAULTS),
    "bc-wsr": (run_bc_wsr, BC_DEFAULTS),
    "sinr-balance": (run_sinr_balance, BALANCE_DEFAULTS),
    "ic-wsr": (run_ic_wsr, IC_DEFAULTS),
    "dra": (run_dra, DRA_DEFAULTS),
    "diversity": (run_diversity, DIVERSITY_DEFAULTS),
    "selftest": (run_selftest, {}),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crdra",
        description="spectrum-sharing resource-allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="TOML file overriding experiment defaults")
        p.add_argument("--seed", type=int, required=True,
                       help="RNG seed (mandatory for reproducibility)")
        p.add_argument("--out", default=None,
                       help="output path (default: stdout)")
        p.add_argument("--tol", type=float, default=1e-5)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    run, defaults = EXPERIMENTS[args.command]
    try:
        cfg = _merge_config(defaults, args.config)
    except (ConfigurationError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    buf = io.StringIO()
    try:
        code = run(cfg, args.seed, args.tol, buf)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    text = buf.getvalue()
    if args.out is not None:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"wall time: {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
