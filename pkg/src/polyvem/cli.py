"""Command line driver for convergence studies.

    polyvem run --config study.cfg [--deep]
    polyvem mesh --family hex --level 2 --out m.txt
    polyvem validate m.txt
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .cases import get_case, registered_cases
from .mesh import FAMILIES, MeshError, generate, read_mesh, validate, write_mesh
from .post import (
    ErrorRecord,
    convergence_orders,
    discrete_linf,
    discrete_w1inf,
    l2_h1_errors,
    records_to_csv,
    records_to_markdown,
)
from .system import SolverError, apply_dirichlet, assemble, build_dofmap, element_batches, solve

__all__ = ["RunConfig", "ConfigError", "run", "run_level", "main"]

log = logging.getLogger("polyvem")

DEEP_LEVELS = 5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    case: str = "sinsin"
    family: str = "hex"
    degrees: tuple = (1, 2, 3)
    levels: int = 4
    ell: float = 25.0
    tol: float = 1e-12
    solver: str = "cg"
    output: str = "-"
    format: str = "csv"

    def __post_init__(self):
        if self.case not in registered_cases():
            raise ConfigError(f"unknown case {self.case!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if not self.degrees or any(k not in (1, 2, 3, 4) for k in self.degrees):
            raise ConfigError("degrees must be a non-empty subset of 1..4")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if not self.ell > 0:
            raise ConfigError("ell must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.solver not in ("cg", "direct"):
            raise ConfigError("solver must be cg or direct")
        if self.format not in ("csv", "markdown"):
            raise ConfigError("format must be csv or markdown")

    @classmethod
    def parse(cls, text):
        """Read flat ``key = value`` lines; '#' starts a comment."""
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                if key == "degrees":
                    values[key] = tuple(int(v) for v in val.replace(",", " ").split())
                elif kinds[key] in (int, "int"):
                    values[key] = int(val)
                elif kinds[key] in (float, "float"):
                    values[key] = float(val)
                else:
                    values[key] = val
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}")
        return cls(**values)

    def serialize(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "degrees":
                v = ",".join(map(str, v))
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text())


def run_level(case, family, k, level, tol=1e-12, solver="cg"):
    """Generate, assemble, solve and measure one (family, k, level) configuration."""
    mesh = generate(family, level)
    dofmap = build_dofmap(mesh, k)
    ops = list(element_batches(mesh, k, case.alpha))
    system = assemble(mesh, dofmap, k, case.alpha, case.f, operators=ops)
    reduced = apply_dirichlet(system, dofmap, None if case.homogeneous else case.g)
    x, info = solve(reduced, method=solver, tol=tol)
    args = (mesh, dofmap, ops, x)
    e_l2, e_h1 = l2_h1_errors(*args, case.u, case.grad_u)
    rec = ErrorRecord(
        family=family, k=k, level=level, N=mesh.n_vertices, h=mesh.h,
        e_linf=discrete_linf(mesh, x, case.u),
        e_w1inf=discrete_w1inf(*args, case.grad_u),
        e_l2=e_l2, e_h1=e_h1,
    )
    log.info("%s k=%d level=%d N=%d dofs=%d iterations=%d linf=%.3e w1inf=%.3e",
             family, k, level, mesh.n_vertices, dofmap.n_dof, info.iterations,
             rec.e_linf, rec.e_w1inf)
    return rec


def run(config):
    """Run every (k, level) of a configuration; returns ``(records, failures)``."""
    case = get_case(config.case, config.ell)
    jobs = [(k, lev) for k in config.degrees for lev in range(config.levels)]
    failures = []

    def one(job):
        k, lev = job
        try:
            return run_level(case, config.family, k, lev, config.tol, config.solver)
        except SolverError as exc:
            failures.append((k, lev, str(exc)))
            return None

    try:
        n = max(1, int(os.environ.get("POLYVEM_THREADS", "1")))
    except ValueError:
        n = 1
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    records = convergence_orders([r for r in results if r is not None])
    return records, sorted(failures)


def render(records, config):
    if config.format == "markdown":
        title = f"case {config.case}, {config.family} meshes"
        return records_to_markdown(records, title)
    return records_to_csv(records)


def _cmd_run(args):
    try:
        config = RunConfig.load(args.config)
        overrides = {}
        if args.deep:
            overrides["levels"] = max(config.levels, DEEP_LEVELS)
        if args.output:
            overrides["output"] = args.output
        if overrides:
            config = RunConfig(**{**config.__dict__, **overrides})
    except (OSError, ConfigError) as exc:
        print(f"polyvem: invalid config: {exc}", file=sys.stderr)
        return 2
    records, failures = run(config)
    text = render(records, config)
    if config.output == "-":
        sys.stdout.write(text)
    else:
        Path(config.output).write_text(text)
    for k, lev, msg in failures:
        print(f"polyvem: solve failed for k={k} level={lev}: {msg}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_mesh(args):
    mesh = generate(args.family, args.level)
    write_mesh(mesh, args.out)
    print(f"{args.family} level {args.level}: {mesh.n_vertices} vertices, "
          f"{mesh.n_cells} cells, h = {mesh.h:.6g}")
    return 0


def _cmd_validate(args):
    try:
        mesh = read_mesh(args.path)
        rep = validate(mesh, check_star=args.star)
    except (OSError, MeshError) as exc:
        print(f"polyvem: {exc}", file=sys.stderr)
        return 1
    print(f"vertices {mesh.n_vertices}  cells {mesh.n_cells}  edges {mesh.n_edges}")
    print(f"h = {rep.h:.6g}  min edge/diameter ratio = {rep.rho_obs:.6g}")
    if rep.kernel_ratio is not None:
        print(f"star-shaped: {rep.star_shaped}  min kernel radius/diameter = "
              f"{np.min(rep.kernel_ratio):.6g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="polyvem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a convergence study")
    r.add_argument("--config", required=True)
    r.add_argument("--deep", action="store_true", help=f"use {DEEP_LEVELS} levels")
    r.add_argument("--output", help="override the output path ('-' for stdout)")
    r.set_defaults(func=_cmd_run)

    m = sub.add_parser("mesh", help="write a generated mesh")
    m.add_argument("--family", choices=sorted(FAMILIES), required=True)
    m.add_argument("--level", type=int, required=True)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_mesh)

    v = sub.add_parser("validate", help="check a mesh file")
    v.add_argument("path")
    v.add_argument("--star", action="store_true", help="also report star-shapedness")
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
