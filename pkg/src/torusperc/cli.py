"""Batch experiment runner.

One run takes exactly one configuration source: either command-line flags or
a JSON config file (never both), always including an explicit seed for any
Monte Carlo work.  Results are CSV files written atomically; every run leaves
a JSON manifest with the config hash, code version, seed and runtime next to
them.  Exit codes: 2 invalid configuration, 3 resource exhaustion, 4 solver
non-convergence.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .graph import builtin, dual, read_graph_file, GraphError, BUILTIN_NAMES, ROLE_PRIMAL
from .embedding import (balanced_embedding, embedding_svg, write_positions_csv,
                        ResourceError)
from .modulus import alpha_rw, alpha_cp, pack, PackingError, \
    modulus_report_rows, packing_svg
from . import percolation as perc
from . import mixed as mx

COMMANDS = ("embed", "modulus", "pack", "cross", "cardy", "hfield", "mixed",
            "pivotal")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    graph: str = "T_h"
    graph_file: str = None
    alpha_source: str = "rw"        # rw | cp | explicit
    alpha: complex = None
    polygon: list = None            # [[x, y], ...]
    marks: list = None
    deltas: list = field(default_factory=lambda: [0.05])
    contour_radius: float = 0.25
    ratio: float = 0.5
    side: float = 1.0
    rect: list = None               # [w, h]
    q: float = 0.5
    q_grid: list = None
    p: float = 0.5
    trials: int = None
    seed: int = None
    workers: int = 1
    exact: bool = False
    window: list = None
    svg: bool = False
    out: str = "."

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in ("cross", "cardy", "hfield", "mixed", "pivotal") \
                and not self.exact and self.seed is None:
            raise ConfigError("a seed is required (no wall-clock seeding)")
        if any(d <= 0 for d in self.deltas):
            raise ConfigError("mesh values must be positive")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.graph_file is None and self.graph not in BUILTIN_NAMES:
            raise ConfigError(f"unknown builtin graph {self.graph!r}")
        return self


def _config_hash(cfg):
    blob = json.dumps({k: (repr(v) if isinstance(v, complex) else v)
                       for k, v in asdict(cfg).items()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path, header, rows):
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    _atomic_write(path, buf.getvalue())


def _load_graph(cfg):
    if cfg.graph_file:
        return read_graph_file(cfg.graph_file)
    return builtin(cfg.graph)


def _field_heatmap(dom, values, path):
    """Grayscale disc per face, darker for larger field values."""
    from .svg import SvgCanvas
    pos = dom.face_pos
    pad = 2 * dom.mesh
    window = (pos.real.min() - pad, pos.real.max() + pad,
              pos.imag.min() - pad, pos.imag.max() + pad)
    canvas = SvgCanvas(window)
    vmax = max(float(np.max(values)), 1e-12)
    for k, z in enumerate(pos):
        shade = int(255 * (1.0 - values[k] / vmax))
        canvas.circle(z, 0.35 * dom.mesh, fill=f"rgb({shade},{shade},{shade})",
                      width=0.0)
    canvas.write(path)


def _embedding_for(cfg, g):
    if cfg.alpha_source == "rw":
        a = alpha_rw(g)
    elif cfg.alpha_source == "cp":
        a = alpha_cp(dual(g))
    elif cfg.alpha_source == "explicit":
        if cfg.alpha is None:
            raise ConfigError("alpha_source=explicit needs an alpha value")
        a = complex(cfg.alpha)
    else:
        raise ConfigError(f"unknown alpha source {cfg.alpha_source!r}")
    return balanced_embedding(g, a)


def _domain_geometry(cfg):
    if cfg.polygon is None:
        poly = [0j, 1 + 0j, 1 + 1j, 1j]
    else:
        poly = [complex(x, y) for x, y in cfg.polygon]
    if cfg.marks is None:
        marks = poly[:4]
    else:
        marks = [complex(x, y) for x, y in cfg.marks]
    return poly, marks


def run(cfg):
    """Execute one experiment; returns the list of artifact paths written."""
    cfg.validate()
    t0 = time.time()
    out = []
    if cfg.command == "embed":
        g = _load_graph(cfg)
        em = _embedding_for(cfg, g)
        path = os.path.join(cfg.out, "positions.csv")
        write_positions_csv(em, path)
        out.append(path)
        if cfg.svg:
            w = cfg.window or [-0.1, 2.1, -0.1, 1.6]
            spath = os.path.join(cfg.out, "embedding.svg")
            embedding_svg(em, tuple(w), spath)
            out.append(spath)
    elif cfg.command == "modulus":
        g = _load_graph(cfg)
        row = modulus_report_rows(g)
        path = os.path.join(cfg.out, "modulus.csv")
        _write_csv(path, list(row), [list(row.values())])
        out.append(path)
    elif cfg.command == "pack":
        g = _load_graph(cfg)
        tri = dual(g) if g.role == ROLE_PRIMAL else g
        packing = pack(tri)
        path = os.path.join(cfg.out, "packing.csv")
        _write_csv(path, ["vertex", "radius", "x", "y"],
                   [[v, float(packing.radii[v]), packing.layout[v].real,
                     packing.layout[v].imag] for v in range(tri.nv)])
        out.append(path)
        if cfg.svg:
            spath = os.path.join(cfg.out, "packing.svg")
            packing_svg(packing, spath)
            out.append(spath)
    elif cfg.command == "cross":
        g = _load_graph(cfg)
        em = _embedding_for(cfg, g)
        poly, marks = _domain_geometry(cfg)
        rows = []
        for d in cfg.deltas:
            dom = perc.discretize(em, poly, d, marks)
            st = perc.estimate_crossing(dom, cfg.p, cfg.trials or 10000,
                                        cfg.seed, workers=cfg.workers)
            rows.append([d, st.trials, st.successes, st.estimate, st.se])
        path = os.path.join(cfg.out, "crossing.csv")
        _write_csv(path, ["delta", "trials", "successes", "estimate", "se"], rows)
        out.append(path)
    elif cfg.command == "cardy":
        g = builtin("T_h") if cfg.graph_file is None and cfg.graph == "T_h" else _load_graph(cfg)
        em = _embedding_for(cfg, g)
        L = cfg.side
        a, b, c = 0j, L + 0j, L / 2 + 1j * L * math.sqrt(3) / 2
        dpt = c + cfg.ratio * (a - c)
        rows = []
        for d in cfg.deltas:
            dom = perc.discretize(em, [a, b, c], d, [a, b, c, dpt])
            st = perc.estimate_crossing(dom, cfg.p, cfg.trials or 10000,
                                        cfg.seed, workers=cfg.workers)
            rows.append([cfg.ratio, d, st.trials, st.estimate, st.se])
        path = os.path.join(cfg.out, "cardy.csv")
        _write_csv(path, ["ratio", "delta", "trials", "estimate", "se"], rows)
        out.append(path)
    elif cfg.command == "hfield":
        g = _load_graph(cfg)
        em = _embedding_for(cfg, g)
        poly, marks = _domain_geometry(cfg)
        rows = []
        for d in cfg.deltas:
            dom = perc.discretize(em, poly, d, marks[:3])
            hf = perc.estimate_H(dom, cfg.trials or 10000, cfg.seed,
                                 workers=cfg.workers, at="faces")
            center = sum(poly) / len(poly)
            circle = [center + cfg.contour_radius * np.exp(2j * np.pi * k / 256)
                      for k in range(256)]
            chain = perc.contour_sites(dom, circle, where="faces")
            ci_h = perc.contour_integral_H(dom, hf, chain)
            ci_s = perc.contour_integral_S(dom, hf, chain)
            rows.append([d, cfg.trials or 10000, abs(ci_s.value), ci_s.se,
                         abs(ci_h.value), ci_h.se])
            if cfg.svg:
                spath = os.path.join(cfg.out, f"hfield_{d}.svg")
                _field_heatmap(dom, hf.H_A, spath)
                out.append(spath)
        path = os.path.join(cfg.out, "hfield.csv")
        _write_csv(path, ["delta", "trials", "abs_S_integral", "S_se",
                          "abs_H_integral", "H_se"], rows)
        out.append(path)
    elif cfg.command == "mixed":
        w, h = cfg.rect or [6, 6]
        dom = mx.build_mixed_domain(w, h, [(0, 0), (w, 0), (w, h), (0, h)])
        grid = cfg.q_grid or [0.0, 0.125, 0.25, 0.375, 0.5]
        res = mx.interpolate(dom, grid, cfg.trials or 10000, cfg.seed,
                             p=cfg.p, workers=cfg.workers)
        rows = [[r["q"], r["estimate"], r["se"], dr["estimate"], dr["se"]]
                for r, dr in zip(res["curve"], res["derivative"])]
        path = os.path.join(cfg.out, "mixed.csv")
        _write_csv(path, ["q", "crossing", "crossing_se", "dq", "dq_se"], rows)
        summary = os.path.join(cfg.out, "mixed_summary.csv")
        _write_csv(summary,
                   ["endpoint_difference", "endpoint_se", "quadrature", "quadrature_se"],
                   [[res["endpoint_difference"], res["endpoint_difference_se"],
                     res["quadrature"], res["quadrature_se"]]])
        out += [path, summary]
    elif cfg.command == "pivotal":
        w, h = cfg.rect or [4, 4]
        dom = mx.build_mixed_domain(w, h, [(0, 0), (w, 0), (w, h), (0, h)])
        if cfg.exact:
            poly_c = mx.exact_polynomial(dom, "crossing")
            poly_r = mx.exact_polynomial(dom, "russo")
            path = os.path.join(cfg.out, "pivotal_exact.csv")
            _write_csv(path, ["degree", "crossing_coeff", "russo_coeff"],
                       [[k, str(poly_c[k]) if k < len(poly_c) else "0",
                         str(poly_r[k]) if k < len(poly_r) else "0"]
                        for k in range(max(len(poly_c), len(poly_r)))])
            out.append(path)
        else:
            est = mx.russo_derivative(dom, cfg.q, cfg.trials or 10000, cfg.seed,
                                      p=cfg.p, workers=cfg.workers)
            path = os.path.join(cfg.out, "pivotal.csv")
            _write_csv(path, ["q", "trials", "derivative", "se"],
                       [[est["q"], est["trials"], est["estimate"], est["se"]]])
            out.append(path)

    manifest = {
        "command": cfg.command,
        "config_hash": _config_hash(cfg),
        "version": __version__,
        "seed": cfg.seed,
        "runtime_seconds": round(time.time() - t0, 3),
        "artifacts": [os.path.basename(p) for p in out],
    }
    mpath = os.path.join(cfg.out, f"{cfg.command}_manifest.json")
    _atomic_write(mpath, json.dumps(manifest, indent=2) + "\n")
    out.append(mpath)
    return out


def _parser():
    ap = argparse.ArgumentParser(
        prog="torusperc",
        description="conformal embeddings of periodic graphs and percolation experiments")
    ap.add_argument("--config", help="JSON config file (exclusive with all other flags)")
    sub = ap.add_subparsers(dest="command")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--graph", default="T_h", help="builtin graph name")
        sp.add_argument("--graph-file", help="graph JSON file")
        sp.add_argument("--alpha-source", default="rw", choices=["rw", "cp", "explicit"])
        sp.add_argument("--alpha", help="explicit modulus, e.g. 0.2+0.9j")
        sp.add_argument("--polygon", help="domain polygon 'x,y;x,y;...'")
        sp.add_argument("--marks", help="boundary marks 'x,y;x,y;...'")
        sp.add_argument("--delta", help="mesh value or comma list", default="0.05")
        sp.add_argument("--contour-radius", type=float, default=0.25)
        sp.add_argument("--ratio", type=float, default=0.5)
        sp.add_argument("--side", type=float, default=1.0)
        sp.add_argument("--rect", help="mixed rectangle 'WxH'")
        sp.add_argument("--q", type=float, default=0.5)
        sp.add_argument("--q-grid", help="comma list of q values")
        sp.add_argument("--p", type=float, default=0.5)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--exact", action="store_true")
        sp.add_argument("--window", help="x0,x1,y0,y1 for embedding patches")
        sp.add_argument("--svg", action="store_true")
        sp.add_argument("--out", default=".")
    return ap


def _pairs(text):
    return [[float(a) for a in part.split(",")] for part in text.split(";")]


def _config_from_args(args):
    return ExperimentConfig(
        command=args.command,
        graph=args.graph,
        graph_file=args.graph_file,
        alpha_source=args.alpha_source,
        alpha=complex(args.alpha) if args.alpha else None,
        polygon=_pairs(args.polygon) if args.polygon else None,
        marks=_pairs(args.marks) if args.marks else None,
        deltas=[float(d) for d in str(args.delta).split(",")],
        contour_radius=args.contour_radius,
        ratio=args.ratio,
        side=args.side,
        rect=[int(x) for x in args.rect.split("x")] if args.rect else None,
        q=args.q,
        q_grid=[float(x) for x in args.q_grid.split(",")] if args.q_grid else None,
        p=args.p,
        trials=args.trials,
        seed=args.seed,
        workers=args.workers,
        exact=args.exact,
        window=[float(x) for x in args.window.split(",")] if args.window else None,
        svg=args.svg,
        out=args.out,
    )


def _config_from_file(path):
    with open(path) as fh:
        raw = json.load(fh)
    allowed = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "alpha" in raw and raw["alpha"] is not None:
        raw["alpha"] = complex(raw["alpha"])
    return ExperimentConfig(**raw)


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if "--config" in argv:
        extra = [a for a in argv if a != "--config"
                 and a != argv[argv.index("--config") + 1]]
        if extra:
            return _fail(2, "invalid-config",
                         "a config file is exclusive with command-line flags")
        try:
            cfg = _config_from_file(argv[argv.index("--config") + 1])
        except (OSError, json.JSONDecodeError, TypeError, ConfigError) as e:
            return _fail(2, "invalid-config", str(e))
    else:
        args = _parser().parse_args(argv)
        if args.command is None:
            return _fail(2, "invalid-config", "no command given")
        try:
            cfg = _config_from_args(args)
        except ValueError as e:
            return _fail(2, "invalid-config", str(e))
    try:
        run(cfg)
    except (ConfigError, GraphError, perc.DomainError, mx.MixedError, ValueError) as e:
        return _fail(2, "invalid-config", str(e))
    except (ResourceError, MemoryError) as e:
        return _fail(3, "resource-exhaustion", str(e))
    except PackingError as e:
        return _fail(4, "solver-non-convergence", str(e))
    return 0


if __name__ == "__main__":
    sys.exit(main())
