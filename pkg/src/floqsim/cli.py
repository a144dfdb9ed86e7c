"""Command-line driver: single runs, sweeps, comparisons, fits, audits."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .hamiltonian import (ModelParams, RangeKind, build_drive_part,
                          build_static_part, initial_state)
from .krylov import KrylovConfig
from .magnus import assemble_deff, bch_order_check, magnus_words, words_table_rows
from .observables import energy_density, expectation, page_value
from .sweep import (RunSpec, iter_completed_runs, load_run, run_one, run_sweep,
                    spec_hash)
from .thermal import (build_interpolant, build_thermal_curve, default_betas,
                      ed_dense, estimate_plateau, plateau_from_timeseries)
from . import analysis

log = logging.getLogger("floqsim")


def _model_from_args(args, omega=None) -> ModelParams:
    return ModelParams(
        L=args.L, J=args.J, Jx=args.Jx, hx=args.hx, hy=args.hy, hz=args.hz,
        alpha=args.alpha, range=RangeKind(args.model),
        omega=float(omega if omega is not None else args.omega),
    )


def _add_model_args(p, with_omega=True):
    p.add_argument("--model", choices=["long", "short"], required=True,
                   help="interaction range of the Ising couplings")
    p.add_argument("--L", type=int, required=True)
    if with_omega:
        p.add_argument("--omega", type=float, required=True)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--Jx", type=float, default=0.19)
    p.add_argument("--hx", type=float, default=0.21)
    p.add_argument("--hy", type=float, default=0.17)
    p.add_argument("--hz", type=float, default=0.13)
    p.add_argument("--alpha", type=float, default=1.25)


def _orders(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x != ""]


# -- subcommands ---------------------------------------------------------------


def cmd_evolve(args) -> int:
    params = _model_from_args(args)
    spec = RunSpec(
        model=params.to_dict(),
        domain_walls=args.domain_walls,
        periods_max=args.periods,
        points_per_decade=args.points_per_decade,
        orders=_orders(args.orders),
        observables=args.observables.split(","),
        generator=args.generator,
        krylov=KrylovConfig(max_subspace=args.krylov_max_subspace,
                            tolerance=args.krylov_tolerance).to_dict(),
        checkpoint_every=args.checkpoint_every,
    )
    run_dir = Path(args.out) / "runs" / spec.hash
    manifest = run_one(spec, run_dir)
    print(json.dumps({"run_dir": str(run_dir), "status": manifest["status"],
                      "skipped": manifest.get("skipped", False)}, indent=1))
    return 0 if manifest["status"] == "completed" else 1


def cmd_sweep(args) -> int:
    summary = run_sweep(args.config, workers=args.workers)
    print(json.dumps({k: summary[k] for k in ("n_runs", "completed", "skipped",
                                              "failed")}, indent=1))
    return 0 if summary["failed"] == 0 else 1


def cmd_compare(args) -> int:
    _, sa = load_run(args.a)
    _, sb = load_run(args.b)
    shared = [c for c in sa.column_names if c in sb.column_names]
    if not shared:
        print("no shared observable columns", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    deltas = {c: analysis.delta_series(sa, sb, c) for c in shared}
    # site-averaged deltas for the local-operator groups
    means = {}
    for prefix in ("z", "x", "zz", "xx"):
        cols = [c for c in shared if c.startswith(f"{prefix}_")
                and c[len(prefix) + 1:].isdigit()]
        if cols:
            means[f"{prefix}_mean"] = np.mean(
                [deltas[c].column(c) for c in cols], axis=0)
    path = out / "delta.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        names = shared + list(means)
        w.writerow(["period", "time", *names])
        for i in range(sa.n_rows):
            row = [int(sa.periods[i]), repr(float(sa.times[i]))]
            row += [repr(float(deltas[c].column(c)[i])) for c in shared]
            row += [repr(float(v[i])) for v in means.values()]
            w.writerow(row)
    print(str(path))
    return 0


def cmd_thermal(args) -> int:
    params = _model_from_args(args)
    D = build_static_part(params)
    E = build_drive_part(params)
    Dn = assemble_deff(D, E, params.period, args.order)
    spectrum = ed_dense(Dn)
    betas = default_betas(args.beta_max, args.n_betas)
    curve = build_thermal_curve(spectrum, betas, model=args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out / "thermal_curve.csv")
    s_est = build_interpolant(curve)
    manifest = {
        "model": params.to_dict(),
        "order": args.order,
        "edges": {"min": spectrum.max_energy_density(-1),
                  "max": spectrum.max_energy_density(+1)},
        "knots": s_est.knots,
    }

    if args.estimate_for:
        L_t, walls = (int(x) for x in args.estimate_for.split(","))
        target = ModelParams.from_dict(params.to_dict(), L=L_t)
        Dt = build_static_part(target)
        Et = build_drive_part(target)
        Dnt = assemble_deff(Dt, Et, target.period, args.order)
        eps_L = energy_density(args.order, Dnt, initial_state(L_t, walls), L_t)
        eps_L_max = energy_density(args.order, Dnt, initial_state(L_t, 0), L_t)
        eps_Lp_max = spectrum.max_energy_density(+1)
        S_est = estimate_plateau(eps_L, eps_L_max, eps_Lp_max, s_est, L_t)
        manifest["estimate"] = {
            "target_L": L_t, "domain_walls": walls, "eps_L": eps_L,
            "eps_L_max": eps_L_max, "eps_Lp_max": eps_Lp_max, "S_est": S_est,
            "page_value": page_value(L_t),
        }
        print(f"S_est(L={L_t}, walls={walls}) = {S_est:.4f} nats")
    (out / "thermal_manifest.json").write_text(json.dumps(manifest, indent=1))
    print(str(out / "thermal_curve.csv"))
    return 0


def cmd_analyze(args) -> int:
    sweep_dir = Path(args.sweep)
    groups: dict[tuple, list] = {}
    for run_dir in iter_completed_runs(sweep_dir):
        manifest, series = load_run(run_dir)
        spec = manifest["spec"]
        key = (spec["model"]["range"], spec["domain_walls"], spec["generator"])
        groups.setdefault(key, []).append((spec["model"]["omega"], spec, series))

    records = []
    fits = []
    for (rng, walls, generator), runs in sorted(groups.items()):
        runs.sort(key=lambda r: r[0])
        omegas, taus = [], []
        s_p = None
        if args.t_pre is not None:
            ref = [s for (om, sp, s) in runs if om == args.plateau_omega]
            if ref and ref[0].times[-1] >= args.t_pre:
                s_p = plateau_from_timeseries(ref[0], args.t_pre)
        for omega, spec, series in runs:
            tau = analysis.tau_star_energy(series, args.order)
            records.append(dict(tau.to_record(
                f"tau_star_energy_n{args.order}", spec_hash(spec)),
                omega=omega, range=rng, domain_walls=walls))
            omegas.append(omega)
            taus.append(tau)
            if s_p is not None:
                tau_s = analysis.tau_star_entropy(series, s_p, spec["model"]["L"])
                records.append(dict(tau_s.to_record(
                    "tau_star_entropy", spec_hash(spec)),
                    omega=omega, range=rng, domain_walls=walls, S_P=s_p))
        if sum(not t.censored for t in taus) >= 3:
            fit = analysis.fit_exponential_tau(omegas, taus,
                                               weighted=not args.unweighted)
            fits.append({"group": {"range": rng, "domain_walls": walls,
                                   "generator": generator},
                         "method": f"energy_n{args.order}",
                         "j_eff": fit.j_eff,
                         "j_eff_uncertainty": fit.j_eff_uncertainty,
                         "prefactor": fit.prefactor,
                         "r_squared": fit.r_squared,
                         "n_points": fit.n_points,
                         "weighted": fit.weighted,
                         "flag": fit.flag})
    out = {"tau_records": records, "fits": fits}
    path = sweep_dir / "fits.json"
    path.write_text(json.dumps(out, indent=1))
    print(json.dumps(fits, indent=1))
    return 0


def cmd_words(args) -> int:
    rows = words_table_rows()
    target = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(target)
    w.writerow(["order", "word", "coefficient", "i_power", "t_half_power"])
    for row in rows:
        w.writerow(row)
    if args.out:
        target.close()
        print(args.out)
    return 0


def cmd_oracle(args) -> int:
    """Dense small-L validation suite; prints one pass/fail line per check."""
    from .dense import expm_hermitian, map_to_dense, pauli_sum_to_dense
    from .observables import entanglement_entropy
    from .hamiltonian import StateVector
    from .thermal import thermal_point

    failures = 0

    def check(name, ok, detail=""):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}{'  [' + detail + ']' if detail else ''}")
        failures += 0 if ok else 1

    rng = np.random.default_rng(7)

    for kind in (RangeKind.SHORT, RangeKind.LONG):
        p = ModelParams(L=6, range=kind)
        D, E = build_static_part(p), build_drive_part(p)
        v = rng.normal(size=64) + 1j * rng.normal(size=64)
        v /= np.linalg.norm(v)
        Dd = pauli_sum_to_dense(D)
        err = np.linalg.norm(D.matvec(v) - Dd @ v)
        check(f"matvec vs dense ({kind.value})", err < 1e-13, f"err={err:.2e}")
        herm = np.linalg.norm(Dd - Dd.conj().T)
        check(f"static Hermitian ({kind.value})", herm < 1e-12)

    p4 = ModelParams(L=4)
    D4, E4 = build_static_part(p4), build_drive_part(p4)
    for n in range(5):
        Hn = map_to_dense(assemble_deff(D4, E4, 0.3, n))
        herm = np.linalg.norm(Hn - Hn.conj().T)
        check(f"truncation order {n} Hermitian", herm < 1e-12, f"defect={herm:.2e}")

    grids = {0: np.logspace(-3, -1, 7), 1: np.logspace(-3, -1, 7),
             2: np.logspace(-3, -1, 7), 3: np.logspace(-2, -1, 6),
             4: np.logspace(-1.6, -1, 5)}
    for n, grid in grids.items():
        slope = bch_order_check(D4, E4, n, grid)
        check(f"order-{n} scaling slope", abs(slope - (n + 2)) <= 0.3,
              f"slope={slope:.3f}")

    # one-period word identity at order 1: (i T/4)[E, D]
    T = 0.37
    order1 = sum(w.coefficient(T) * (pauli_sum_to_dense(E4) @ pauli_sum_to_dense(D4)
                 if w.letters == "ED" else pauli_sum_to_dense(D4) @ pauli_sum_to_dense(E4))
                 for w in magnus_words(1))
    comm = (1j * T / 4.0) * (pauli_sum_to_dense(E4) @ pauli_sum_to_dense(D4)
                             - pauli_sum_to_dense(D4) @ pauli_sum_to_dense(E4))
    check("order-1 equals (iT/4)[E,D]", np.linalg.norm(order1 - comm) < 1e-12)

    p6 = ModelParams(L=6, omega=9.0)
    D6, E6 = build_static_part(p6), build_drive_part(p6)
    T6 = p6.period
    Uf = np.linalg.matrix_power(
        expm_hermitian(pauli_sum_to_dense(D6) - pauli_sum_to_dense(E6), T6 / 2)
        @ expm_hermitian(pauli_sum_to_dense(D6) + pauli_sum_to_dense(E6), T6 / 2), 100)
    v0 = initial_state(6, 5)
    from .krylov import _Propagator
    cfg = KrylovConfig()
    prop_p = _Propagator(D6 + E6, T6 / 2, cfg)
    prop_m = _Propagator(D6 - E6, T6 / 2, cfg)
    v = v0.amplitudes.copy()
    for _ in range(100):
        v = prop_m.apply(prop_p.apply(v))
    err = np.linalg.norm(v - Uf @ v0.amplitudes)
    check("Krylov vs dense Floquet power (L=6, 100 periods)", err < 1e-7,
          f"err={err:.2e}")

    bell = StateVector(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2), 2)
    check("Bell-pair entropy = ln 2",
          abs(entanglement_entropy(bell, 1) - np.log(2)) < 1e-12)

    spec6 = ed_dense(assemble_deff(D6, E6, T6, 4))
    eps0, s0 = thermal_point(spec6, 0.0)
    check("beta=0 identities", abs(eps0) < 1e-10 and abs(s0 - np.log(2)) < 1e-10,
          f"eps={eps0:.2e}, s={s0:.6f}")

    print("oracle:", "all checks passed" if failures == 0 else f"{failures} failure(s)")
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="floqsim",
        description="Heating and prethermalization toolkit for driven spin chains")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run one stroboscopic evolution")
    _add_model_args(p)
    p.add_argument("--domain-walls", type=int, required=True)
    p.add_argument("--periods", type=int, required=True)
    p.add_argument("--orders", default="0,2,4",
                   help="comma-separated truncation orders to record")
    p.add_argument("--observables", default="energy,entropy",
                   help="comma-separated kinds: energy,entropy,locals")
    p.add_argument("--points-per-decade", type=int, default=16)
    p.add_argument("--generator", default="floquet",
                   help='"floquet" or "deff:<n>"')
    p.add_argument("--krylov-tolerance", type=float, default=1e-10)
    p.add_argument("--krylov-max-subspace", type=int, default=30)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="run a config-defined grid of evolutions")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="pointwise |difference| of two runs")
    p.add_argument("--a", required=True, help="run directory (e.g. exact Floquet)")
    p.add_argument("--b", required=True, help="run directory (e.g. deff:<n>)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("thermal", help="thermal curve and plateau estimate")
    _add_model_args(p)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--beta-max", type=float, default=1e3)
    p.add_argument("--n-betas", type=int, default=25)
    p.add_argument("--estimate-for", default="",
                   help="'L,domain_walls' target for the plateau estimate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_thermal)

    p = sub.add_parser("analyze", help="thermalization times and rate fits")
    p.add_argument("--sweep", required=True)
    p.add_argument("--order", type=int, default=2,
                   help="truncation order of the energy column to use")
    p.add_argument("--t-pre", type=float, default=None,
                   help="plateau reference time for entropy tau* extraction")
    p.add_argument("--plateau-omega", type=float, default=9.0)
    p.add_argument("--unweighted", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("words", help="audit dump of the expansion word table")
    p.add_argument("action", choices=["dump"])
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_words)

    p = sub.add_parser("oracle", help="dense small-L validation suite")
    p.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
