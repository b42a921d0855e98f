"""Command-line front end.

Subcommands ``build-map``, ``propagate``, ``exit-table``, ``timing`` and
``fixed-point``.  Settings come from an optional flat ``key = value``
config file (``--config``) overridden by flags.  Angles are entered in
degrees.  Every output file starts with a comment line listing the
constants used and is written to a temporary name and then renamed, so a
failed run leaves no partial file.

Exit codes: 0 success, 1 I/O or unexpected error, 2 singular state,
3 accuracy-domain abort, 4 configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .constants import J2, J3, J4, TEST_CASES, TestCase, test_case
from .elements import ElementSet
from .errors import ConfigError, DomainAbortError, SingularityError
from .forces import DragConfig, ForceModel, ZonalField

EXIT_OK = 0
EXIT_IO = 1
EXIT_SINGULAR = 2
EXIT_DOMAIN = 3
EXIT_CONFIG = 4

_ZONALS = {"j2": (J2,), "j2-j4": (J2, J3, J4)}
_COE_KEYS = ("a", "e", "i", "raan", "argp", "nu")


# -- run configuration -------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one CLI run (km and degrees).

    ``a`` .. ``nu`` override the test case's initial elements; ``zonals``
    and ``drag`` override its force model when not None.
    """

    case: int = 1
    a: float | None = None
    e: float | None = None
    i: float | None = None
    raan: float | None = None
    argp: float | None = None
    nu: float | None = None
    zonals: str | None = None
    drag: bool | None = None
    sets: tuple[str, ...] = ("ecchill",)
    order: int = 5
    center: str = "default"
    n: int = 1000
    eps: float = 1e-9
    safety: bool = True
    repeats: int = 3
    offsets: tuple[float, ...] = (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10)
    m: int = 2000
    map: str | None = None
    out: str = "hotm_out"
    jobs: int = 1

    def __post_init__(self):
        if self.case not in TEST_CASES:
            raise ConfigError(f"unknown test case {self.case}; valid: 1..{len(TEST_CASES)}")
        for s in self.sets:
            try:
                ElementSet.parse(s)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"unknown element set {s!r}") from exc
        if not 3 <= self.order <= 7:
            raise ConfigError("order must be in 3..7")
        if self.center not in ("default", "fg-zero"):
            raise ConfigError("center must be 'default' or 'fg-zero'")
        if self.zonals is not None and self.zonals not in _ZONALS:
            raise ConfigError(f"zonals must be one of {sorted(_ZONALS)}")
        if self.n < 0 or self.m < 0 or self.repeats < 1 or self.jobs < 1:
            raise ConfigError("n, m must be >= 0; repeats, jobs >= 1")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.e is not None and not 0.0 <= self.e < 1.0:
            raise ConfigError("e must be in [0, 1)")
        if self.a is not None and self.a <= 0:
            raise ConfigError("a must be positive")

    # -- derived objects ------------------------------------------------------

    def test_case(self) -> TestCase:
        base = test_case(self.case)
        over = {k: getattr(self, k) for k in _COE_KEYS if getattr(self, k) is not None}
        if self.zonals is not None:
            over["zonals"] = _ZONALS[self.zonals]
        if self.drag is not None:
            over["drag"] = self.drag
        return dataclasses.replace(base, **over)

    def model(self) -> ForceModel:
        tc = self.test_case()
        return ForceModel(ZonalField(j=tuple(tc.zonals)), DragConfig() if tc.drag else None)

    def element_sets(self) -> list[ElementSet]:
        return [ElementSet.parse(s) for s in self.sets]

    def centers(self) -> dict | None:
        return {"fhat": 0.0, "ghat": 0.0} if self.center == "fg-zero" else None

    # -- flat text form ---------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: dict | None = None) -> "RunConfig":
        return cls(**parse_config_text(text, base))


def _convert(name: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = str(types[name])
    raw = raw.strip()
    try:
        if t.startswith("tuple[str"):
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if t.startswith("tuple[float"):
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if t.startswith("bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_text(text: str, base: dict | None = None) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = dict(base or {})
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        out[key] = _convert(key, val)
    return out


# -- output helpers -----------------------------------------------------------------------


def constants_header(cfg: RunConfig) -> str:
    tc = cfg.test_case()
    m = cfg.model()
    z = m.zonal
    js = " ".join(f"J{n}={j!r}" for n, j in enumerate(z.j, start=2))
    drag = (f"Cd={m.drag.cd!r} A/m={m.drag.area_to_mass!r}m2/kg" if m.drag else "drag=off")
    return (f"# hotm {__version__} mu={z.mu!r}km3/s2 Re={z.re!r}km {js} {drag} "
            f"case={tc.number} a={tc.a!r} e={tc.e!r} i={tc.i!r} raan={tc.raan!r} "
            f"argp={tc.argp!r} nu={tc.nu!r} order={cfg.order} eps={cfg.eps!r}")


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(cfg: RunConfig, header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(constants_header(cfg) + "\n")
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _stem(cfg: RunConfig, es: ElementSet) -> str:
    tag = "_fg0" if cfg.center == "fg-zero" else ""
    return f"case{cfg.case}_{es.value}_k{cfg.order}{tag}"


def write_manifest(cfg: RunConfig, command: str) -> Path:
    path = Path(cfg.out) / f"{command}.manifest"
    atomic_write(path, constants_header(cfg) + "\n" + cfg.to_text())
    return path


# -- subcommands ---------------------------------------------------------------------------


def _build(cfg: RunConfig, es: ElementSet):
    from .harness import build_case_map
    tc = cfg.test_case()
    return build_case_map(tc, es, cfg.order, cfg.centers(), cfg.eps, model=cfg.model())


def _radii_report(tm) -> str:
    from .elements import unit_factors
    fac = unit_factors(tm.element_set, tm.scaling)[list(tm.dvars)]
    lines = ["variable,radius_scaled,radius_physical,safety_radius_scaled"]
    for name, r, f, s in zip(tm.variable_names, tm.domain.radii, fac, tm.safety.radii):
        lines.append(f"{name},{float(r)!r},{float(r * f)!r},{float(s)!r}")
    return "\n".join(lines) + "\n"


def _build_one(cfg: RunConfig, es: ElementSet) -> tuple[str, str]:
    tm = _build(cfg, es)
    stem = _stem(cfg, es)
    out = Path(cfg.out)
    atomic_write(out / f"{stem}.hotm", tm.dumps())
    atomic_write(out / f"{stem}_radii.csv", constants_header(cfg) + "\n" + _radii_report(tm))
    return stem, _radii_report(tm)


def cmd_build_map(cfg: RunConfig) -> int:
    sets = cfg.element_sets()
    if cfg.jobs > 1 and len(sets) > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_build_one, [cfg] * len(sets), sets))
    else:
        results = [_build_one(cfg, es) for es in sets]
    for stem, report in results:
        print(f"{stem}: accuracy radii (eps={cfg.eps:g})")
        print(report, end="")
    write_manifest(cfg, "build-map")
    return EXIT_OK


def cmd_propagate(cfg: RunConfig) -> int:
    from .harness import iterate, position_error
    from .maps import TransferMap
    if cfg.map:
        tm = TransferMap.loads(Path(cfg.map).read_text())
        sets = [tm.element_set]
        maps = [tm]
    else:
        sets = cfg.element_sets()
        maps = [_build(cfg, es) for es in sets]
    for es, tm in zip(sets, maps):
        run = iterate(tm, cfg.n, safety=cfg.safety)
        err = position_error(run)
        rows = zip(range(run.n + 1), run.epochs_s, err.with_time, err.elements_only,
                   run.in_domain)
        path = Path(cfg.out) / f"run_{_stem(cfg, es)}_n{cfg.n}.csv"
        atomic_write(path, _csv(cfg, "rev,epoch_s,err_km_with_time,err_km_elements_only,"
                                     "in_domain", rows))
        print(f"{es.value}: n={run.n} first exit={run.first_exit} ({run.exit_element}) "
              f"max err with time={err.with_time.max():.3e} km "
              f"elements only={err.elements_only.max():.3e} km -> {path}")
    write_manifest(cfg, "propagate")
    return EXIT_OK


def _exit_row(cfg: RunConfig, es: ElementSet):
    from .harness import domain_exit_table
    return domain_exit_table(cfg.test_case(), [es], cfg.eps, cfg.n, cfg.order)[0]


def cmd_exit_table(cfg: RunConfig) -> int:
    sets = cfg.element_sets()
    if cfg.jobs > 1 and len(sets) > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            rows = list(ex.map(_exit_row, [cfg] * len(sets), sets))
    else:
        rows = [_exit_row(cfg, es) for es in sets]
    path = Path(cfg.out) / f"exit_table_case{cfg.case}.csv"
    atomic_write(path, _csv(cfg, "set,mappings,element",
                            ((r.element_set.value, r.mappings, r.element) for r in rows)))
    for r in rows:
        print(f"{r.element_set.value:8s} {r.mappings!s:>6s} {r.element or '-'}")
    write_manifest(cfg, "exit-table")
    return EXIT_OK


def cmd_timing(cfg: RunConfig) -> int:
    from .harness import timing_comparison
    rows = []
    for es in cfg.element_sets():  # sequential: parallel runs would distort timings
        r = timing_comparison(cfg.test_case(), es, cfg.n, cfg.repeats, cfg.order)
        rows.append((es.value, r.n, r.build_ms, r.mapping_ms, r.numeric_ms, r.ratio))
        print(f"{es.value}: build {r.build_ms:.1f} ms, mapping {r.mapping_ms:.1f} ms, "
              f"numeric {r.numeric_ms:.1f} ms, ratio {r.ratio:.1f}")
    path = Path(cfg.out) / f"timing_case{cfg.case}.csv"
    atomic_write(path, _csv(cfg, "set,n,build_ms,mapping_ms,numeric_ms,ratio", rows))
    write_manifest(cfg, "timing")
    return EXIT_OK


def cmd_fixed_point(cfg: RunConfig) -> int:
    from .fixed_point import FixedPointProblem, find_fixed_point, fixed_point_map, \
        sweep_invariant_curves
    tm = _build(cfg, ElementSet.ECCHILL)
    fp = find_fixed_point(FixedPointProblem.from_map(tm))
    print(f"fhat* = {fp.fhat:.6e}")
    print(f"ghat* = {fp.ghat:.6e}")
    print(f"e* = {fp.eccentricity:.6e}  argp* = {fp.argp_deg:.4f} deg  "
          f"iterations = {fp.iterations}  residual = {fp.residual:.2e}")
    out = Path(cfg.out)
    sol = (f"fhat = {fp.fhat!r}\nghat = {fp.ghat!r}\nH_km2_s = {fp.H!r}\n"
           f"Hz_km2_s = {fp.hz!r}\nenergy_km2_s2 = {fp.energy!r}\n"
           f"eccentricity = {fp.eccentricity!r}\nargp_deg = {fp.argp_deg!r}\n"
           f"iterations = {fp.iterations}\nresidual = {fp.residual!r}\n")
    atomic_write(out / f"fixed_point_case{cfg.case}.txt", constants_header(cfg) + "\n" + sol)
    if cfg.offsets and cfg.m > 0:
        ftm = fixed_point_map(fp, cfg.model(), cfg.order)
        cloud = sweep_invariant_curves(ftm, fp, cfg.offsets, cfg.m, safety=cfg.safety)
        body = cloud.to_csv()
        atomic_write(out / f"section_case{cfg.case}.csv", constants_header(cfg) + "\n" + body)
        print(f"section: {len(cloud)} curves x {cfg.m} mappings -> "
              f"{out / f'section_case{cfg.case}.csv'}")
    write_manifest(cfg, "fixed-point")
    return EXIT_OK


COMMANDS = {
    "build-map": cmd_build_map,
    "propagate": cmd_propagate,
    "exit-table": cmd_exit_table,
    "timing": cmd_timing,
    "fixed-point": cmd_fixed_point,
}


# -- argument parsing --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--case", type=int, help="test case 1..9")
    for k in _COE_KEYS:
        unit = "km" if k == "a" else ("" if k == "e" else "deg")
        p.add_argument(f"--{k}", type=float, help=f"override initial {k} {unit}".strip())
    p.add_argument("--zonals", choices=sorted(_ZONALS))
    p.add_argument("--drag", dest="drag", action="store_const", const=True)
    p.add_argument("--no-drag", dest="drag", action="store_const", const=False)
    p.add_argument("--set", dest="sets", action="append", help="element set (repeatable)")
    p.add_argument("--all-sets", action="store_true", help="the seven mapped element sets")
    p.add_argument("--order", type=int)
    p.add_argument("--center-fg-zero", dest="center", action="store_const", const="fg-zero",
                   help="expand fhat and ghat about zero")
    p.add_argument("-n", dest="n", type=int, help="revolutions")
    p.add_argument("--eps", type=float, help="accuracy-domain target")
    p.add_argument("--no-safety", dest="safety", action="store_const", const=False,
                   help="do not abort outside the hard safety radius")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="parallel workers over element sets")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hotm", description="High-order transfer maps for zonal orbits.")
    parser.add_argument("--version", action="version", version=f"hotm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name == "propagate":
            p.add_argument("--map", help="serialized map file instead of building one")
        if name == "timing":
            p.add_argument("--repeats", type=int)
        if name == "fixed-point":
            p.add_argument("--offsets", help="comma-separated eccentricity offsets")
            p.add_argument("-m", dest="m", type=int, help="mappings per invariant curve")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        values = parse_config_text(text)
    names = {f.name for f in fields(RunConfig)}
    for key, val in vars(args).items():
        if key in names and val is not None:
            if key == "sets":
                val = tuple(val)
            elif key == "offsets":
                val = _convert("offsets", val)
            values[key] = val
    if getattr(args, "all_sets", False):
        from .harness import ALL_SETS
        values["sets"] = tuple(es.value for es in ALL_SETS)
    if args.command == "fixed-point":
        values.setdefault("case", 9)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except SingularityError as exc:
        print(f"hotm: singular state: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except DomainAbortError as exc:
        print(f"hotm: accuracy-domain abort: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConfigError, ValueError) as exc:
        print(f"hotm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"hotm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
