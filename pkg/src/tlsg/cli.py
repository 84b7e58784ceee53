"""Command-line entry point: ``tlsg search | encode | verify | simulate | export-svg``.

Options come from built-in defaults, then an optional ``--config`` file
(JSON or YAML, either flat or keyed by subcommand), then flags.  Every
artifact records the tool version, a hash of the resolved options and the
seed.

Exit codes: 0 success, 2 parse error, 3 infeasible or empty result,
4 verification mismatch, 5 budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import networkx as nx
import yaml

from . import __version__
from .anneal import (
    DELTA_RATIO_DEFAULT,
    TWO_PI,
    SimulationSizeError,
    run_ladder,
    write_csv,
)
from .constraints import CROSS, CROSS_EDGE, GATES, LogicalConstraint, load_truth_tables
from .encoder import (
    EncodingResult,
    LibraryMissError,
    SourceProblem,
    encode,
    overhead_estimate,
    slot_aware_overhead,
    verify,
    write_json_atomic,
)
from .gadget import Gadget, GeometryError, load_gadgets
from .lattice import GridLayout, family_from_name, layout_to_svg
from .library import load_library
from .mwis import EnumerationCapError, SolverBudgetError, to_graph6
from .search import (
    SearchBudgetError,
    crossing_pin_filter,
    diamond_region,
    generate_patch_graphs,
    hexagon_region,
    search,
)

EXIT_OK, EXIT_PARSE, EXIT_EMPTY, EXIT_MISMATCH, EXIT_BUDGET = 0, 2, 3, 4, 5
WORKERS_ENV = "TLSG_WORKERS"

BUILTIN_CONSTRAINTS = {**GATES, "CROSS": CROSS, "CROSS_EDGE": CROSS_EDGE}

DEFAULTS = {
    "search": {
        "family": "triangular", "rows": 4, "cols": 4, "region": "rect", "gate": [], "table": None,
        "weight_cap": 6, "min_size": 1, "max_size": None, "enum_cap": 1 << 20,
        "crossing_pins": False, "all": False, "limit": 0, "g6": None, "seed": 0, "output": "gadgets.json",
    },
    "encode": {
        "family": "triangular", "index": 0, "epsilon": None, "scale": None, "cell_size": None,
        "no_trim": False, "library": None, "no_verify": False, "svg": None, "seed": 0,
        "output": "encoding.json",
    },
    "verify": {"method": "auto", "output": None, "seed": 0},
    "simulate": {
        "gadget": None, "family": ["triangular", "king"], "times": "1,2,3,4", "omega_max_mhz": 4.0,
        "delta_ratio": DELTA_RATIO_DEFAULT, "omega_shape": "0:0,0.1:1,0.9:1,1:0",
        "delta_shape": "0:-1,0.1:-1,0.9:1,1:1", "weight_norm": 2.0, "dt": None, "substeps": 4,
        "shots": 0, "seed": 0, "output": "anneal.csv",
    },
    "export-svg": {"gadget": None, "family": "triangular", "seed": 0, "output": "layout.svg"},
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- configuration ------------------------------------------------------------


def _load_config(path: str, cmd: str) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) if path.endswith((".yaml", ".yml")) else json.load(fh)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise CliError(EXIT_PARSE, f"cannot read config {path}: {exc}") from exc
    section = raw.get(cmd, raw) if isinstance(raw, dict) else None
    if not isinstance(section, dict):
        raise CliError(EXIT_PARSE, f"config {path} must be a table")
    out = {k.replace("-", "_"): v for k, v in section.items() if not isinstance(v, dict)}
    unknown = set(out) - set(DEFAULTS[cmd]) - {"inputs", "input"}
    if unknown:
        raise CliError(EXIT_PARSE, f"unknown config keys for {cmd}: {sorted(unknown)}")
    return out


def resolve(cmd: str, flags: dict) -> dict:
    cfg = dict(DEFAULTS[cmd])
    if flags.get("config"):
        cfg.update(_load_config(flags["config"], cmd))
    cfg.update({k: v for k, v in flags.items() if k not in ("config", "cmd")})
    return cfg


def config_hash(cmd: str, cfg: dict) -> str:
    blob = json.dumps({"cmd": cmd, **cfg}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def provenance(cmd: str, cfg: dict) -> dict:
    return {"tool": "tlsg", "version": __version__, "config_hash": config_hash(cmd, cfg), "seed": cfg.get("seed", 0)}


def _stamp(prov: dict) -> str:
    return f"tlsg {prov['version']} config={prov['config_hash']} seed={prov['seed']}"


def _write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    tmp = os.path.join(d, f".{os.path.basename(path)}.tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _svg(svg: str, prov: dict) -> str:
    return f"<!-- {_stamp(prov)} -->\n{svg}\n"


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# -- inputs -------------------------------------------------------------------


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse {path}: {exc}") from exc


def read_source(path: str, index: int = 0) -> SourceProblem:
    """A source graph from graph6 (one graph per line) or a JSON edge list."""
    try:
        if path.endswith(".json"):
            data = _read_json(path)
            if isinstance(data, list):
                data = {"edges": data}
            return SourceProblem.from_dict(data)
        with open(path, "rb") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        lines = [ln[len(b">>graph6<<"):] if ln.startswith(b">>graph6<<") else ln for ln in lines]
        if not 0 <= index < len(lines):
            raise CliError(EXIT_PARSE, f"{path} has {len(lines)} graphs, no index {index}")
        return SourceProblem.from_networkx(nx.from_graph6_bytes(lines[index]))
    except CliError:
        raise
    except (OSError, ValueError, KeyError, TypeError, nx.NetworkXError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse source graph {path}: {exc}") from exc


def read_layout(path: str, gadget: str | None = None, family: str | None = None) -> tuple[GridLayout, list[int], str]:
    """Layout, highlighted sites and a label from a layout, encoding or gadget file."""
    data = _read_json(path)
    try:
        if isinstance(data, dict) and "pin_map" in data:
            res = EncodingResult.from_dict(data)
            marked = [i for v in res.pin_map.values() for i in v]
            return res.layout, marked, "encoding"
        if isinstance(data, dict) and "sites" in data:
            return GridLayout.from_dict(data), [], "layout"
        if isinstance(data, dict) and "layout" in data and "gadgets" not in data:
            return GridLayout.from_dict(data["layout"]), [], "layout"
        gadgets = load_gadgets(path)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(EXIT_PARSE, f"unrecognised layout file {path}: {exc}") from exc
    return _pick_gadget(gadgets, gadget, family, path)


def _pick_gadget(gadgets, name, family, where) -> tuple[GridLayout, list[int], str]:
    fam = family_from_name(family) if family else None
    for g in gadgets:
        if g.layout is None:
            continue
        if (name is None or g.name == name) and (fam is None or g.layout.family == fam):
            return g.layout, list(g.pins), g.name
    raise CliError(EXIT_PARSE, f"no gadget {name or ''} for {family or 'any family'} in {where}")


def _parse_shape(text: str) -> tuple:
    try:
        pts = tuple(tuple(float(x) for x in item.split(":")) for item in text.split(","))
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"bad pulse shape {text!r}") from exc
    if any(len(p) != 2 for p in pts):
        raise CliError(EXIT_PARSE, f"bad pulse shape {text!r}; expected t:v pairs")
    return pts


def _parse_times(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"bad time ladder {text!r}") from exc


# -- subcommands --------------------------------------------------------------


def _constraints(cfg: dict) -> list[LogicalConstraint]:
    out = []
    for name in cfg["gate"] or []:
        if name.upper() not in BUILTIN_CONSTRAINTS:
            raise CliError(EXIT_PARSE, f"unknown constraint {name}; known: {sorted(BUILTIN_CONSTRAINTS)}")
        out.append(BUILTIN_CONSTRAINTS[name.upper()])
    if cfg["table"]:
        try:
            out.extend(load_truth_tables(cfg["table"]))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(EXIT_PARSE, f"cannot parse truth table {cfg['table']}: {exc}") from exc
    if not out:
        raise CliError(EXIT_PARSE, "no constraint given; use --gate or --table")
    return out


def _search_one(cfg: dict, constraint: LogicalConstraint) -> list[dict]:
    fam = family_from_name(cfg["family"])
    region = {"rect": None, "hex2": hexagon_region(2), "diamond2": diamond_region(2)}[cfg["region"]]
    layouts = generate_patch_graphs(
        fam, cfg["rows"], cfg["cols"], min_size=max(cfg["min_size"], constraint.k),
        max_size=cfg["max_size"], region=region, cap=cfg["enum_cap"],
    )
    found = []
    pin_filter = crossing_pin_filter if cfg["crossing_pins"] else None
    for g in search(fam, cfg["rows"], cfg["cols"], constraint, layouts=layouts,
                    weight_cap=cfg["weight_cap"], pin_filter=pin_filter):
        g = Gadget(g.graph, g.pins, g.constraint, g.mwis_energy, g.layout, constraint.name)
        found.append(g.to_dict())
        if not cfg["all"] or (cfg["limit"] and len(found) >= cfg["limit"]):
            break
    return found


def cmd_search(cfg: dict) -> int:
    constraints = _constraints(cfg)
    if cfg["rows"] < 1 or cfg["cols"] < 1 or cfg["weight_cap"] < 1 or cfg["enum_cap"] < 1:
        raise CliError(EXIT_PARSE, "budgets must be positive")
    workers = min(_workers(), len(constraints))
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_search_one, [cfg] * len(constraints), constraints))
        else:
            results = [_search_one(cfg, c) for c in constraints]
    except (SearchBudgetError, EnumerationCapError, SolverBudgetError) as exc:
        raise CliError(EXIT_BUDGET, f"budget exceeded: {exc}") from exc
    prov = provenance("search", cfg)
    records = [r for rs in results for r in rs]
    write_json_atomic(cfg["output"], {"meta": prov, "gadgets": records})
    if cfg["g6"]:
        lines = [to_graph6(Gadget.from_dict(r).graph) for r in records]
        _write_text(cfg["g6"], "".join(f"{ln}\n" for ln in lines))
    for c, rs in zip(constraints, results):
        summary = ", ".join(f"{len(r['weights'])} sites energy {r['mwis_energy']}" for r in rs[:3])
        print(f"{c.name or str(c)}: {len(rs)} found" + (f" ({summary})" if rs else ""))
    missing = [c.name or str(c) for c, rs in zip(constraints, results) if not rs]
    if missing:
        print(f"no gadget for {', '.join(missing)}", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_encode(cfg: dict) -> int:
    problem = read_source(cfg["input"], cfg["index"])
    fam = family_from_name(cfg["family"])
    library = None
    if cfg["library"]:
        library = {g.name: g for g in load_gadgets(cfg["library"]) if g.layout is not None and g.layout.family == fam}
    try:
        eps = Fraction(cfg["epsilon"]) if cfg["epsilon"] is not None else None
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"bad epsilon {cfg['epsilon']!r}") from exc
    try:
        result = encode(problem, fam, library, do_trim=not cfg["no_trim"], epsilon=eps,
                        scale=cfg["scale"], cell_size=cfg["cell_size"])
    except LibraryMissError as exc:
        raise CliError(EXIT_EMPTY, f"library miss: {exc}") from exc
    except GeometryError as exc:
        raise CliError(EXIT_EMPTY, f"geometry error: {exc}") from exc
    except ValueError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc
    bound = overhead_estimate(problem.n, problem.m, fam)
    print(f"sites {len(result.layout)} bound {bound} slot-aware {slot_aware_overhead(problem.n, problem.m)}"
          f" cell {result.meta['cell_size']}")
    code = EXIT_OK
    if not cfg["no_verify"]:
        rep = verify(result)
        print(f"verify {'pass' if rep.ok else 'FAIL'} source optimum {rep.source_energy}"
              f" energy_offset {rep.energy_offset}")
        if not rep.ok:
            print(rep.message, file=sys.stderr)
            code = EXIT_MISMATCH
    prov = provenance("encode", cfg)
    payload = result.to_dict()
    payload["meta"] = {**payload["meta"], **prov}
    write_json_atomic(cfg["output"], payload)
    if cfg["svg"]:
        _write_text(cfg["svg"], _svg(result.to_svg(), prov))
    return code


def cmd_verify(cfg: dict) -> int:
    data = _read_json(cfg["input"])
    try:
        result = EncodingResult.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(EXIT_PARSE, f"not an encoding file: {exc}") from exc
    rep = verify(result, method=cfg["method"])
    report = {
        "pass": rep.ok,
        "source_optimum": rep.source_energy,
        "encoded_optimum": rep.encoded_energy,
        "energy_offset": rep.energy_offset,
        "expected_offset": result.base_energy,
        "decoded": ["".join(map(str, d)) for d in rep.decoded],
        "message": rep.message,
        "meta": provenance("verify", cfg),
    }
    print(f"{'pass' if rep.ok else 'FAIL'}: source optimum {rep.source_energy},"
          f" encoded optimum {rep.encoded_energy}, energy_offset {rep.energy_offset}")
    if rep.message:
        print(rep.message, file=sys.stderr)
    if cfg["output"]:
        write_json_atomic(cfg["output"], report)
    return EXIT_OK if rep.ok else EXIT_MISMATCH


def cmd_simulate(cfg: dict) -> int:
    fams = cfg["family"] if isinstance(cfg["family"], list) else [cfg["family"]]
    layouts = []
    if cfg.get("inputs"):
        for path in cfg["inputs"]:
            layouts.append(read_layout(path, cfg["gadget"], None)[0])
    elif cfg["gadget"]:
        for fam in fams:
            lib = load_library(fam)
            if cfg["gadget"] not in lib:
                raise CliError(EXIT_EMPTY, f"library has no {cfg['gadget']} gadget for {fam}")
            layouts.append(lib[cfg["gadget"]].layout)
    else:
        raise CliError(EXIT_PARSE, "give layout files or --gadget")
    times = _parse_times(cfg["times"])
    if not times or min(times) <= 0:
        raise CliError(EXIT_PARSE, "times must be positive")
    omega_max = TWO_PI * float(cfg["omega_max_mhz"])
    pulse = {
        "omega_max": omega_max,
        "delta_max": float(cfg["delta_ratio"]) * omega_max,
        "omega_shape": _parse_shape(cfg["omega_shape"]),
        "delta_shape": _parse_shape(cfg["delta_shape"]),
    }
    rows = []
    try:
        for layout in layouts:
            rows.extend(run_ladder(layout, times, weight_norm=cfg["weight_norm"], dt=cfg["dt"],
                                   substeps=cfg["substeps"], shots=cfg["shots"], seed=cfg["seed"], **pulse))
    except SimulationSizeError as exc:
        raise CliError(EXIT_BUDGET, str(exc)) from exc
    except ValueError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc
    for r in rows:
        r["p_v"] = f"{r['p_v']:.12e}"
        r["gs_overlap"] = f"{r['gs_overlap']:.12e}"
        print(f"{r['family']:>10} N={r['N']:<3} T={r['T_us']:g} p_v={r['p_v']} gs={r['gs_overlap']}")
    write_csv(cfg["output"], rows, comment=_stamp(provenance("simulate", cfg)))
    return EXIT_OK


def cmd_export_svg(cfg: dict) -> int:
    layout, marked, _ = read_layout(cfg["input"], cfg["gadget"], cfg["family"] if cfg["gadget"] else None)
    _write_text(cfg["output"], _svg(layout_to_svg(layout, highlight=marked), provenance("export-svg", cfg)))
    return EXIT_OK


COMMANDS = {
    "search": cmd_search,
    "encode": cmd_encode,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "export-svg": cmd_export_svg,
}


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlsg", description="Triangular-lattice gadget search, encoding and annealing.")
    parser.add_argument("--version", action="version", version=f"tlsg {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)
    S = argparse.SUPPRESS

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=S)
        p.add_argument("--config", help="JSON or YAML file; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("-o", "--output")
        return p

    p = add("search", "search lattice patches for gadgets")
    p.add_argument("--gate", action="append", help="built-in constraint (AND, NAND, OR, NOR, XOR, CROSS, CROSS_EDGE)")
    p.add_argument("--table", help="truth-table JSON: bit matrix, list of them, or name -> matrix")
    p.add_argument("--family", choices=["triangular", "king"])
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--region", choices=["rect", "hex2", "diamond2"])
    p.add_argument("--weight-cap", type=int)
    p.add_argument("--min-size", type=int)
    p.add_argument("--max-size", type=int)
    p.add_argument("--enum-cap", type=int, help="maximum number of masks to enumerate")
    p.add_argument("--crossing-pins", action="store_true", help="require pins to alternate a, b, a, b around the patch")
    p.add_argument("--all", action="store_true", help="keep every hit instead of the first")
    p.add_argument("--limit", type=int)
    p.add_argument("--g6", help="also write the gadget graphs as graph6")

    p = add("encode", "encode a source graph as a lattice MWIS instance")
    p.add_argument("input", help="graph6 file or JSON {n, edges, weights}")
    p.add_argument("--index", type=int, help="graph index inside a graph6 file")
    p.add_argument("--family", choices=["triangular", "king"])
    p.add_argument("--epsilon", help="detuning shift as a rational, e.g. 1/20")
    p.add_argument("--scale", type=int)
    p.add_argument("--cell-size", type=int)
    p.add_argument("--no-trim", action="store_true")
    p.add_argument("--library", help="gadget database to use instead of the built-in one")
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--svg")

    p = add("verify", "re-solve an encoding and compare with brute force")
    p.add_argument("input")
    p.add_argument("--method", choices=["auto", "bnb", "elimination"])

    p = add("simulate", "anneal small layouts and report violation rates")
    p.add_argument("inputs", nargs="*", help="layout, encoding or gadget files")
    p.add_argument("--gadget", help="library gadget name (simulated on each --family)")
    p.add_argument("--family", action="append", choices=["triangular", "king"])
    p.add_argument("--times", help="comma-separated total times in microseconds")
    p.add_argument("--omega-max-mhz", type=float)
    p.add_argument("--delta-ratio", type=float)
    p.add_argument("--omega-shape", help="breakpoints t:v with t, v as fractions")
    p.add_argument("--delta-shape")
    p.add_argument("--weight-norm", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--substeps", type=int)
    p.add_argument("--shots", type=int, help="estimate p_v from this many samples (0 = exact)")

    p = add("export-svg", "render a layout, encoding or gadget as SVG")
    p.add_argument("input")
    p.add_argument("--gadget")
    p.add_argument("--family", choices=["triangular", "king"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = vars(args)
    cmd = flags.pop("cmd")
    try:
        cfg = resolve(cmd, flags)
        if cmd == "simulate" and not cfg.get("inputs"):
            cfg.pop("inputs", None)
        return COMMANDS[cmd](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
