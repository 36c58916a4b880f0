"""``chdbc`` command line.

    chdbc SUBCOMMAND [--config PATH | PATH] [--seed N] [--threads N] [--out DIR]

Exit codes: 0 success, 2 configuration error (nothing written), 3 numerical
failure (outputs written so far are kept, including the last checkpoint).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble, weighted_mass
from .config import ConfigError, RunConfig, initial_field, load_config, parse_config
from .dynlab import interpolation_scan, limit_study, omega_limit, random_zero_mean_field
from .elliptic import SlError, energy, mean_constant
from .io import Checkpoint, write_checkpoint, write_csv
from .mesh import MeshError, save_mesh
from .potentials import PotentialError
from .stationary import StationaryError, multi_start
from .stepper import ModelParams, NewtonError, NewtonSettings, make_system, run

log = logging.getLogger("chdbc")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMERICAL = (NewtonError, StationaryError, SlError, PotentialError, FloatingPointError)


class _Context:
    """Everything a subcommand needs, built before any output exists."""

    def __init__(self, cfg: RunConfig, args):
        self.cfg = cfg
        self.threads = args.threads
        self.out = Path(args.out)
        self.mesh = cfg.build_mesh()
        try:
            self.ops = assemble(self.mesh)
        except MeshError as exc:
            raise ConfigError("mesh: %s" % exc) from exc
        self.pots = cfg.potentials()
        self.u0 = initial_field(cfg, self.ops, self.mesh.digest())
        self.comment = "config_sha256=%s version=%s" % (cfg.digest(), __version__)

    def system(self, L=None):
        m, s = self.cfg.model, self.cfg.solver
        params = ModelParams(m.beta, m.L if L is None else L, m.tau)
        newton = NewtonSettings(tol=s.newton_tol, max_iter=s.newton_max_iter, reuse_rate=s.reuse_rate)
        return make_system(self.ops, self.pots, params, newton)

    def checkpoint(self, name, u, t, lam=None):
        m = self.cfg.model
        write_checkpoint(self.out / name, Checkpoint(self.mesh.digest(), t, m.beta, m.L, m.tau, u, lam))

    def csv(self, name, columns, rows):
        write_csv(self.out / name, columns, rows, self.comment)

    def summary(self, **fields):
        body = {"command": fields.pop("command"), "config_sha256": self.cfg.digest(),
                "version": __version__, "mesh": self.mesh.digest(), **fields}
        (self.out / "summary.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------


def cmd_simulate(ctx: _Context) -> int:
    cfg = ctx.cfg
    sys_ = ctx.system()
    every, ck_every = cfg.output.sample_every, cfg.output.checkpoint_every
    u0 = ctx.u0
    m0 = weighted_mass(ctx.ops, u0, sys_.beta)
    ck_dir = ctx.out / "checkpoints"
    ck_dir.mkdir(exist_ok=True)
    ctx.checkpoint("checkpoints/state_%08d.chk" % 0, u0, 0.0)
    rows = []
    state = {"drift": 0.0, "u": u0, "t": 0.0, "energy": np.nan}

    def observe(k, t, u, rep, vel):
        state["drift"] = max(state["drift"], abs(rep.weighted_mass - m0) / max(1.0, abs(m0)))
        state.update(u=u, t=t, energy=rep.energy_after)
        if k % every == 0:
            rows.append((t, rep.energy_after, rep.weighted_mass, rep.dissipation_rate, vel, rep.newton_iters))
        if k % ck_every == 0:
            ctx.checkpoint("checkpoints/state_%08d.chk" % k, u, t)

    rows.append((0.0, energy(ctx.ops, ctx.pots, u0), m0, float("nan"), float("nan"), 0))
    status, code = "ok", 0
    try:
        lg = run(sys_, u0, cfg.model.t_end, observers=[observe])
        u_end = lg.final
    except _NUMERICAL as exc:
        log.error("simulation failed at t=%.6g: %s", state["t"], exc)
        status, code, u_end = "failed: %s" % exc, EXIT_NUMERICAL, state["u"]
    ctx.csv("trajectory.csv", ["t", "energy", "mass", "dissipation_rate", "velocity_dual_norm", "newton_iters"], rows)
    if code == 0:
        ctx.checkpoint("final.chk", u_end, state["t"])
    ctx.summary(command="simulate", status=status, t_final=state["t"], initial_energy=rows[0][1],
                final_energy=state["energy"], initial_mass=m0, mass_drift=state["drift"],
                u_min=float(np.min(u_end)), u_max=float(np.max(u_end)))
    return code


def cmd_limit_study(ctx: _Context) -> int:
    st = ctx.cfg.study
    try:
        res = limit_study(ctx.system(), ctx.u0, st.L_grid, st.T_star, st.sample_every, ctx.threads)
    except _NUMERICAL as exc:
        log.error("limit study aborted: %s", exc)
        ctx.summary(command="limit-study", status="failed: %s" % exc, partial=True)
        return EXIT_NUMERICAL
    ctx.csv("limit_study.csv", ["L", "t", "error_L2", "error_H1"], res.samples)
    ctx.summary(command="limit-study", status="ok", **res.summary())
    return 0


def cmd_omega_limit(ctx: _Context) -> int:
    om = ctx.cfg.omega
    try:
        res = omega_limit(ctx.system(), ctx.u0, om.stop_threshold, om.t_max)
    except _NUMERICAL as exc:
        log.error("omega-limit run failed: %s", exc)
        ctx.summary(command="omega-limit", status="failed: %s" % exc)
        return EXIT_NUMERICAL
    rows = [(t, e, v) for t, e, v in zip(res.times, res.energy_history, [float("nan")] + list(res.velocity_history))]
    ctx.csv("omega_limit.csv", ["t", "energy", "velocity_dual_norm"], rows)
    ctx.checkpoint("final.chk", res.final_state, res.t_final)
    st = res.matched_stationary
    if st is not None:
        ctx.checkpoint("stationary.chk", st.field, res.t_final, st.lam)
    ctx.summary(command="omega-limit", status="ok", converged=res.converged, t_final=res.t_final,
                velocity_norm_final=res.velocity_norm_final, distance_L2=res.distance_L2,
                stationary_lambda=None if st is None else st.lam,
                stationary_residual=None if st is None else st.residual_norm,
                stationary_energy=None if st is None else st.energy)
    return 0


def cmd_stationary(ctx: _Context) -> int:
    cfg, ops = ctx.cfg, ctx.ops
    beta = cfg.model.beta
    m = weighted_mass(ops, ctx.u0, beta)
    c = m / mean_constant(ops, beta)
    rng = np.random.default_rng(cfg.initial.seed)
    guesses = [np.full(ops.n_nodes, c), ctx.u0]
    for k in range(cfg.stationary.starts):
        f = random_zero_mean_field(ops, beta, rng)
        amp = cfg.stationary.perturbation * (k + 1)
        guesses.append(c + amp * f / max(np.max(np.abs(f)), 1e-300))
    points = multi_start(ctx.system(), guesses, m, tol=cfg.solver.stationary_tol, threads=ctx.threads)
    if not points:
        ctx.summary(command="stationary", status="failed: no start converged", mass=m)
        return EXIT_NUMERICAL
    rows = []
    for i, p in enumerate(points):
        ctx.checkpoint("stationary_%03d.chk" % i, p.field, 0.0, p.lam)
        rows.append((i, p.energy, p.lam, p.residual_norm, float(p.field.min()), float(p.field.max()), p.iterations))
    ctx.csv("stationary.csv", ["index", "energy", "lambda", "residual", "u_min", "u_max", "newton_iters"], rows)
    ctx.summary(command="stationary", status="ok", mass=m, found=len(points), starts=len(guesses))
    return 0


def cmd_ineq_scan(ctx: _Context) -> int:
    iq = ctx.cfg.ineq
    scan = interpolation_scan(ctx.ops, ctx.cfg.model.beta, iq.L_grid, iq.samples, ctx.cfg.initial.seed, ctx.threads)
    ctx.csv("ineq_scan.csv", ["L", "sample", "ratio"], scan.rows)
    ctx.summary(command="ineq-scan", status="ok", beta=scan.beta, samples=iq.samples,
                max_ratio=scan.max_ratio, spread=scan.spread,
                max_by_L={repr(L): r for L, r in scan.max_by_L.items()})
    return 0


def cmd_mesh_gen(ctx: _Context) -> int:
    mesh = ctx.mesh
    save_mesh(mesh, ctx.out / "mesh.txt")
    ctx.csv("mesh_stats.csv", ["n_nodes", "n_triangles", "n_boundary", "area", "perimeter"],
            [(mesh.n_nodes, len(mesh.triangles), mesh.n_boundary, mesh.bulk_area, mesh.boundary_length)])
    ctx.summary(command="mesh-gen", status="ok", n_nodes=mesh.n_nodes, n_boundary=mesh.n_boundary)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "limit-study": cmd_limit_study,
    "omega-limit": cmd_omega_limit,
    "stationary": cmd_stationary,
    "ineq-scan": cmd_ineq_scan,
    "mesh-gen": cmd_mesh_gen,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chdbc", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config_path", nargs="?", metavar="PATH", help="configuration file (TOML)")
        s.add_argument("--config", dest="config", metavar="PATH")
        s.add_argument("--seed", type=int, default=None, help="overrides initial.seed")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--out", default=None, metavar="DIR", help="output directory (default: ./out/SUBCOMMAND)")
        s.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config and args.config_path and args.config != args.config_path:
            raise ConfigError("give the config path once")
        path = args.config or args.config_path
        cfg = load_config(path) if path else parse_config({})
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = cfg.with_seed(args.seed)
        args.out = args.out or str(Path("out") / args.command)
        ctx = _Context(cfg, args)
    except ConfigError as exc:
        print("chdbc: config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        ctx.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print("chdbc: cannot create output directory: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s: %d nodes, output in %s", args.command, ctx.mesh.n_nodes, ctx.out)
    return COMMANDS[args.command](ctx)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
