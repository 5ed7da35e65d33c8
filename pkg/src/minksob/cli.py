"""Command-line front end.

Exit codes: 0 pass, 1 inequality violation or numerical failure,
2 hypothesis violation, 64 usage error.
"""
import argparse
from dataclasses import dataclass, field, asdict, fields
import io
import json
import sys

from .errors import DimensionMismatch, HypothesisViolation, MinksobError, SpecParseError, WrongCodimension

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_HYPOTHESIS = 2
EXIT_USAGE = 64

COMMANDS = ("verify", "volume", "fuzz", "mesh", "solve")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    variant: str = "thm1.1"
    surface: str = "flat_disk"
    density: str = "constant:1"
    r: list = field(default_factory=lambda: [10.0, 20.0, 50.0, 100.0])
    samples: int = 100000
    seed: int = 0
    resolution: float = None
    trials: int = 100
    confidence: float = 0.95
    out: str = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        self.r = [float(x) for x in self.r]
        if self.command == "volume" and not self.r:
            raise UsageError("volume needs a nonempty r schedule")
        if self.samples < 1:
            raise UsageError("samples must be positive")
        if self.trials < 0:
            raise UsageError("trials must be nonnegative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _r_values(items):
    out = []
    for item in items:
        for part in str(item).split(","):
            if part.strip():
                try:
                    out.append(float(part))
                except ValueError:
                    raise UsageError(f"invalid r value {part!r}") from None
    return out


def build_parser():
    parser = _Parser(prog="minksob", description="Numerical checks of Sobolev inequalities on spacelike submanifolds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--variant", choices=("thm1.1", "thm1.2", "thm1.3"))
        p.add_argument("--surface")
        p.add_argument("--density")
        p.add_argument("--r", nargs="+")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--resolution", type=float)
        p.add_argument("--trials", type=int)
        p.add_argument("--confidence", type=float)
        p.add_argument("--out")
    return parser


def parse_config(argv):
    args = build_parser().parse_args(argv)
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    data["command"] = args.command
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        data[key] = _r_values(value) if key == "r" else value
    if "r" in data:
        data["r"] = _r_values(data["r"])
    return RunConfig.from_dict(data)


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _geometry(config):
    from .generators import build_density, build_surface, parse_density_spec, parse_surface_spec

    spec = parse_surface_spec(config.surface, resolution=config.resolution)
    density_spec = parse_density_spec(config.density)
    mesh = build_surface(spec)
    return spec, mesh, build_density(density_spec, mesh)


def cmd_verify(config):
    from .verify import evaluate_inequality

    spec, mesh, f = _geometry(config)
    report = evaluate_inequality(config.variant, mesh, f, mesh_spec=spec, seed=config.seed,
                                 resolution=spec.resolution)
    _emit(report.to_json() + "\n", config.out)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_volume(config):
    from .abp import RegionGeometry, asymptotic_constant, estimate_volume_A, write_volume_csv
    from .mesh import maximal_slope

    _, mesh, _ = _geometry(config)
    geometry = RegionGeometry(config.variant, mesh)
    c_tilde = asymptotic_constant(config.variant, mesh.n, maximal_slope(mesh))
    estimates = [
        estimate_volume_A(config.variant, mesh, r, config.samples, seed=config.seed,
                          confidence=config.confidence, geometry=geometry)
        for r in config.r
    ]
    buf = io.StringIO()
    write_volume_csv(buf, estimates, mesh.n + 1, c_tilde)
    _emit(buf.getvalue(), config.out)
    return EXIT_OK


def cmd_fuzz(config):
    from .verify import fuzz

    resolution = config.resolution if config.resolution is not None else 0.05
    violations = fuzz(config.variant, config.trials, seed=config.seed, resolution=resolution)
    body = json.dumps([v.to_dict() for v in violations], sort_keys=True, indent=2)
    _emit(body + "\n", config.out)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_mesh(config):
    _, mesh, _ = _geometry(config)
    _emit(json.dumps(mesh.to_dict()) + "\n", config.out)
    return EXIT_OK


def cmd_solve(config):
    from .pde import solve_variant

    _, mesh, f = _geometry(config)
    solution = solve_variant(config.variant, mesh, f)
    _emit(json.dumps(solution.to_dict(), sort_keys=True) + "\n", config.out)
    return EXIT_OK


HANDLERS = {"verify": cmd_verify, "volume": cmd_volume, "fuzz": cmd_fuzz, "mesh": cmd_mesh, "solve": cmd_solve}


def main(argv=None):
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
        return HANDLERS[config.command](config)
    except (UsageError, SpecParseError, WrongCodimension, DimensionMismatch) as exc:
        print(f"minksob: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisViolation as exc:
        print(f"minksob: hypothesis violated: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except MinksobError as exc:
        print(f"minksob: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
