"""Batch command-line interface and file formats.

Input files use the "qds-spec-1" JSON schema: UTF-8 JSON, complex scalars
as [re, im] pairs, matrices as row-major nested arrays.  Exactly one
generator variant must be present:

    {
      "schema": "qds-spec-1",
      "structure": {"dims": [2, 3], "weights": [1.0, 1.0]},
      "generator": {
        "derivations": [{"blocks": [M, ...]}, ...]        # H_j, anti-self-adjoint
        # or "superop": {"basis": "hs-orthonormal-v1", "matrix": M}
        # or "gkls": {"kraus": [...], "k": {...}, "H": {...}}
      },
      "metadata": {"any": "strings"}
    }

Reports use the "qds-report-1" schema and carry, per check, the raw
residual, the residual normalised by the generator norm, and the effective
tolerance.  Exit codes: 0 all requested stages passed, 1 a check or stage
failed, 2 input/parse error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import blockalg, corner, derivgen, dilate, extract, superop
from .blockalg import AlgebraElement, BlockStructure
from .corner import GridSpec
from .superop import SuperOperator

SPEC_SCHEMA = "qds-spec-1"
REPORT_SCHEMA = "qds-report-1"
BASIS_TAG = "hs-orthonormal-v1"
DESK_GRID_LIMIT = 4096


class InputError(ValueError):
    """Malformed input file or out-of-range parameters (exit code 2)."""


# -- serialization --------------------------------------------------------


def _c2p(z):
    z = complex(z)
    return [z.real, z.imag]


def _p2c(obj, where):
    if not (isinstance(obj, (list, tuple)) and len(obj) == 2
            and all(isinstance(v, (int, float)) for v in obj)):
        raise InputError(f"{where}: complex scalar must be a [re, im] pair")
    return complex(obj[0], obj[1])


def matrix_to_json(m):
    m = np.asarray(m)
    return [[_c2p(z) for z in row] for row in m]


def matrix_from_json(obj, where):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise InputError(f"{where}: matrix must be a nested array")
    ncols = len(obj[0])
    if any(len(r) != ncols for r in obj):
        raise InputError(f"{where}: ragged matrix")
    return np.array([[_p2c(z, where) for z in row] for row in obj], dtype=complex)


def element_to_json(a):
    return {"blocks": [matrix_to_json(b) for b in a.blocks]}


def element_from_json(structure, obj, where):
    if not isinstance(obj, dict) or "blocks" not in obj:
        raise InputError(f"{where}: element must be an object with 'blocks'")
    blocks = [matrix_from_json(b, f"{where}.blocks[{i}]")
              for i, b in enumerate(obj["blocks"])]
    try:
        return AlgebraElement(structure, blocks)
    except (blockalg.StructureMismatchError, blockalg.ValidationError) as exc:
        raise InputError(f"{where}: {exc}") from exc


@dataclass
class ProblemSpec:
    structure: BlockStructure
    generator_kind: str          # derivations | superop | gkls
    payload: object
    metadata: dict = field(default_factory=dict)


def parse_spec(doc, weights_override=None):
    if not isinstance(doc, dict):
        raise InputError("spec: top level must be an object")
    if doc.get("schema") != SPEC_SCHEMA:
        raise InputError(f"spec: schema must be '{SPEC_SCHEMA}'")
    st = doc.get("structure")
    if not isinstance(st, dict) or "dims" not in st:
        raise InputError("spec.structure: need dims")
    weights = weights_override if weights_override is not None else st.get("weights")
    try:
        structure = BlockStructure(tuple(st["dims"]),
                                   tuple(weights) if weights is not None else None)
    except blockalg.ValidationError as exc:
        raise InputError(f"spec.structure: {exc}") from exc
    gen = doc.get("generator")
    if not isinstance(gen, dict):
        raise InputError("spec.generator: missing")
    kinds = [k for k in ("derivations", "superop", "gkls") if k in gen]
    if len(kinds) != 1:
        raise InputError("spec.generator: exactly one of derivations/superop/gkls")
    kind = kinds[0]
    if kind == "derivations":
        elems = [element_from_json(structure, e, f"derivations[{i}]")
                 for i, e in enumerate(gen["derivations"])]
        try:
            payload = derivgen.DerivationFamily(structure, tuple(elems))
        except blockalg.ValidationError as exc:
            raise InputError(f"spec.generator.derivations: {exc}") from exc
    elif kind == "superop":
        sub = gen["superop"]
        if not isinstance(sub, dict) or sub.get("basis") != BASIS_TAG:
            raise InputError(f"spec.generator.superop: basis must be '{BASIS_TAG}'")
        m = matrix_from_json(sub.get("matrix"), "superop.matrix")
        if m.shape != (structure.dim, structure.dim):
            raise InputError(
                f"superop.matrix: expected {structure.dim}x{structure.dim}")
        payload = m
    else:
        sub = gen["gkls"]
        kraus = [element_from_json(structure, e, f"gkls.kraus[{i}]")
                 for i, e in enumerate(sub.get("kraus", []))]
        k_el = element_from_json(structure, sub["k"], "gkls.k")
        h_el = element_from_json(structure, sub["H"], "gkls.H")
        payload = (kraus, k_el, h_el)
    meta = doc.get("metadata", {})
    if not isinstance(meta, dict):
        raise InputError("spec.metadata: must be an object")
    return ProblemSpec(structure, kind, payload, meta)


def serialize_spec(spec):
    doc = {"schema": SPEC_SCHEMA,
           "structure": {"dims": list(spec.structure.dims),
                         "weights": list(spec.structure.weights)}}
    if spec.generator_kind == "derivations":
        doc["generator"] = {"derivations": [element_to_json(h)
                                            for h in spec.payload.H_list]}
    elif spec.generator_kind == "superop":
        doc["generator"] = {"superop": {"basis": BASIS_TAG,
                                        "matrix": matrix_to_json(spec.payload)}}
    else:
        kraus, k_el, h_el = spec.payload
        doc["generator"] = {"gkls": {"kraus": [element_to_json(r) for r in kraus],
                                     "k": element_to_json(k_el),
                                     "H": element_to_json(h_el)}}
    doc["metadata"] = dict(spec.metadata)
    return doc


def load_spec(path, weights_override=None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return parse_spec(doc, weights_override)


def generator_of(spec, tol):
    if spec.generator_kind == "derivations":
        return derivgen.build(spec.payload), spec.payload
    if spec.generator_kind == "superop":
        return SuperOperator(spec.structure, spec.payload), None
    kraus, k_el, h_el = spec.payload
    try:
        return superop.gkls(kraus, k_el, h_el, tol), None
    except blockalg.ValidationError as exc:
        raise InputError(f"gkls generator: {exc}") from exc


# -- reports --------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    verdict: bool
    checks: list = field(default_factory=list)
    extraction: dict | None = None
    dilation: dict | None = None
    extra: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    generator_norm: float | None = None


def _check_json(rep, scale):
    out = {"name": rep.name, "residual": rep.residual,
           "tolerance": rep.tolerance, "passed": bool(rep.passed)}
    if scale and scale > 0:
        out["residual_normalized"] = rep.residual / scale
    out.update({k: v for k, v in rep.detail.items()
                if isinstance(v, (int, float, str, list, tuple))})
    return out


def report_to_json(rr):
    doc = {"schema": REPORT_SCHEMA, "command": rr.command,
           "verdict": "pass" if rr.verdict else "fail",
           "checks": [_check_json(c, rr.generator_norm) for c in rr.checks],
           "timing": {k: round(v, 6) for k, v in rr.timing.items()}}
    if rr.generator_norm is not None:
        doc["generator_norm"] = rr.generator_norm
    if rr.extraction is not None:
        doc["extraction"] = rr.extraction
    if rr.dilation is not None:
        doc["dilation"] = rr.dilation
    doc.update(rr.extra)
    return doc


def render_text(rr):
    lines = [f"== {rr.command} =="]
    for c in rr.checks:
        tag = "pass" if c.passed else "FAIL"
        line = (f"  [{tag}] {c.name:28s} residual={c.residual:.3e} "
                f"tol={c.tolerance:.3e}")
        if c.detail:
            extras = ", ".join(f"{k}={v}" for k, v in c.detail.items()
                               if isinstance(v, (int, float, str, tuple)))
            if extras:
                line += f"  ({extras})"
        lines.append(line)
    if rr.extraction is not None:
        ex = rr.extraction
        lines.append(f"  extraction: {ex.get('n_kraus', 0)} Kraus operator(s), "
                     f"{ex.get('n_derivations', 0)} derivation(s), "
                     f"roundtrip residual {ex.get('roundtrip_residual', 0):.3e}"
                     if "roundtrip_residual" in ex else
                     f"  extraction failed: {ex.get('error')}")
    if rr.dilation is not None:
        di = rr.dilation
        lines.append(f"  dilation: {di['n_paths']} paths, max |z| = "
                     f"{di['max_z']:.2f}, max abs error = {di['max_abs_error']:.3e}")
    for k, v in rr.timing.items():
        lines.append(f"  time[{k}] = {v:.3f} s")
    lines.append(f"verdict: {'PASS' if rr.verdict else 'FAIL'}")
    return "\n".join(lines)


def emit(rr, fmt, out_path=None):
    text = (json.dumps(report_to_json(rr), indent=2)
            if fmt == "json" else render_text(rr))
    print(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report_to_json(rr), fh, indent=2)
            fh.write("\n")
    return 0 if rr.verdict else 1


# -- commands -------------------------------------------------------------


def _run_checks(L, tol):
    reps = [superop.check_conservative(L, tol),
            superop.check_symmetric(L, tol),
            superop.relation2_check(L, tol)]
    try:
        reps.append(superop.check_ccp(L, tol))
    except superop.KernelSizeError as exc:
        reps.append(superop.CheckReport("ccp", float("nan"), tol, False,
                                        detail={"note": str(exc)}))
    return reps


def cmd_check(args):
    spec = load_spec(args.file, args.weights)
    t0 = time.perf_counter()
    L, _ = generator_of(spec, args.tol)
    checks = _run_checks(L, args.tol)
    rr = RunReport("check", all(c.passed for c in checks), checks,
                   generator_norm=L.norm(),
                   timing={"check": time.perf_counter() - t0})
    return emit(rr, args.format, args.out)


def _extraction_summary(res):
    return {"n_kraus": len(res.kraus),
            "n_derivations": len(res.family),
            "kossakowski_eigenvalues": [list(map(float, g))
                                        for g in res.kossakowski_eigenvalues],
            "roundtrip_residual": res.roundtrip_residual}


def cmd_decompose(args):
    spec = load_spec(args.file, args.weights)
    t0 = time.perf_counter()
    L, _ = generator_of(spec, args.tol)
    checks = _run_checks(L, args.tol)
    extraction = None
    verdict = all(c.passed for c in checks)
    if verdict:
        try:
            res = extract.decompose(L, tol=args.tol)
            checks.extend(r for r in res.reports if r not in checks)
            extraction = _extraction_summary(res)
            if args.decomposition:
                doc = {"schema": "qds-extraction-1",
                       "derivations": [element_to_json(h) for h in res.family.H_list],
                       "kraus": [element_to_json(r) for r in res.kraus],
                       "kossakowski_eigenvalues":
                           extraction["kossakowski_eigenvalues"],
                       "roundtrip_residual": res.roundtrip_residual}
                with open(args.decomposition, "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, indent=2)
                    fh.write("\n")
        except extract.ExtractionError as exc:
            verdict = False
            extraction = {"error": str(exc)}
    rr = RunReport("decompose", verdict, checks, extraction=extraction,
                   generator_norm=L.norm(),
                   timing={"decompose": time.perf_counter() - t0})
    return emit(rr, args.format, args.out)


def _pick_x(spec, args):
    info = blockalg.basis_info(spec.structure)
    if args.x_file:
        with open(args.x_file, "r", encoding="utf-8") as fh:
            return element_from_json(spec.structure, json.load(fh), args.x_file)
    idx = args.x_index
    if not 0 <= idx < spec.structure.dim:
        raise InputError(f"--x-index out of range 0..{spec.structure.dim - 1}")
    return info.element(idx)


def cmd_evolve(args):
    spec = load_spec(args.file, args.weights)
    if args.t < 0:
        raise InputError("--t must be nonnegative")
    x = _pick_x(spec, args)
    t0 = time.perf_counter()
    L, _ = generator_of(spec, args.tol)
    T = superop.exp_semigroup(L, args.t)
    checks = []
    try:
        checks.append(superop.check_cp_map(T, args.tol))
    except superop.KernelSizeError as exc:
        checks.append(superop.CheckReport("cp", float("nan"), args.tol, True,
                                          detail={"note": str(exc)}))
    result = superop.apply(T, x)
    rr = RunReport("evolve", all(c.passed for c in checks), checks,
                   generator_norm=L.norm(),
                   extra={"t": args.t, "result": element_to_json(result)},
                   timing={"evolve": time.perf_counter() - t0})
    return emit(rr, args.format, args.out)


def cmd_dilate(args):
    spec = load_spec(args.file, args.weights)
    if spec.generator_kind != "derivations":
        raise InputError("dilate requires a 'derivations' generator")
    x = _pick_x(spec, args)
    cfg = dilate.DilationConfig(args.t, args.paths, args.steps, args.seed,
                                args.scheme)
    t0 = time.perf_counter()
    cmp_res = dilate.compare_with_semigroup(spec.payload, x, cfg)
    elapsed = time.perf_counter() - t0
    est = cmp_res.estimate
    verdict = (not np.isfinite(cmp_res.max_z)) or cmp_res.max_z <= 4.0
    dil = {"n_paths": est.n_paths, "scheme": est.scheme,
           "max_z": cmp_res.max_z, "max_abs_error": cmp_res.max_abs_error,
           "unitarity_defect": est.unitarity_defect,
           "mean": element_to_json(est.mean),
           "exact": element_to_json(cmp_res.exact)}
    rr = RunReport("dilate", verdict, [], dilation=dil,
                   timing={"dilate": elapsed})
    return emit(rr, args.format, args.out)


def corner_suite(grid, m_list, tol):
    """Run the corner/truncation suite; returns (checks, extras).

    The derivation family is extracted by decompose from the generator
    restricted to a corner large enough to reproduce L on every requested
    A_m (c = max m + twice the largest stencil stride), then embedded back
    into the ambient algebra.  The mapping-bound check is evaluated on the
    extracted derivations (support grows by one stride); the bound of the
    full second-order generator (two strides) is reported alongside.
    """
    total = grid.total_points
    stride = grid.points_per_axis ** (grid.dimension - 1)
    for m in m_list:
        if not 2 <= m <= total - 2 * stride:
            raise InputError(f"corner size {m} out of range for ambient {total}")
    family = corner.grid_family(grid)
    L = derivgen.build(family)
    c = min(total, max(m_list) + 2 * stride)
    cs = BlockStructure((c,))
    corner_family = derivgen.DerivationFamily(
        cs, tuple(AlgebraElement(cs, [H.blocks[0][:c, :c]])
                  for H in family.H_list))
    Lc = derivgen.build(corner_family)
    # the dense CCP kernel scales as (c^3)^2; defer that certificate to the
    # per-block Kossakowski PSD check inside decompose
    res = extract.decompose(Lc, tol=max(tol, 1e-9), ccp_kernel_limit=2000)
    alphas = []
    for H in res.family.H_list:
        amb = np.zeros((total, total), dtype=complex)
        amb[:c, :c] = H.blocks[0]
        # alpha(x) = [H, x] = i[(-iH), x] with -iH self-adjoint
        alphas.append(superop.from_hamiltonian(
            AlgebraElement(grid.structure, [-1j * amb])))
    checks = []
    alpha_bounds = {}
    gen_bounds = {}
    for m in m_list:
        alpha_bounds[m] = max(corner.corner_mapping_bound(al, m)
                              for al in alphas)
        gen_bounds[m] = corner.corner_mapping_bound(L, m)
        n = m + stride
        checks.append(superop.CheckReport(
            f"corner-bound[m={m}]", float(max(0, alpha_bounds[m] - n)), 0,
            alpha_bounds[m] <= n,
            detail={"alpha_bound": alpha_bounds[m], "expected": n,
                    "generator_bound": gen_bounds[m]}))
        for al in alphas:
            checks.append(corner.check_vn_invariance(al, m, n, tol=1e-10))
            checks.append(corner.check_traceless_derivation(al, m, tol=1e-12))
        checks.append(corner.check_weak_form(L, alphas, m, tol=1e-10))
    extras = {"alpha_bounds": {str(m): alpha_bounds[m] for m in m_list},
              "generator_bounds": {str(m): gen_bounds[m] for m in m_list},
              "restriction_size": c,
              "n_extracted_derivations": len(res.family)}
    return checks, extras


def cmd_corner(args):
    if args.points ** args.dim > DESK_GRID_LIMIT:
        raise InputError(f"grid size {args.points ** args.dim} exceeds "
                         f"desk-scale limit {DESK_GRID_LIMIT}")
    grid = GridSpec(args.dim, args.points, args.spacing)
    m_list = args.m
    t0 = time.perf_counter()
    checks, extras = corner_suite(grid, m_list, args.tol)
    rr = RunReport("corner", all(c.passed for c in checks), checks,
                   extra=extras, timing={"corner": time.perf_counter() - t0})
    return emit(rr, args.format, args.out)


def dephasing_spec():
    """The M_2 fixture: single derivation i sigma_z."""
    structure = BlockStructure((2,))
    h = AlgebraElement(structure, [1j * np.diag([1.0, -1.0])])
    return ProblemSpec(structure, "derivations",
                       derivgen.DerivationFamily(structure, (h,)),
                       {"name": "dephasing"})


def markov_spec():
    """The abelian two-state symmetric Markov generator Q = [[-1,1],[1,-1]]."""
    structure = BlockStructure((1, 1))
    Q = np.array([[-1.0, 1.0], [1.0, -1.0]])
    return ProblemSpec(structure, "superop", Q.astype(complex),
                       {"name": "markov"})


def cmd_demo(args):
    name = args.name
    t0 = time.perf_counter()
    if name in ("dephasing", "markov"):
        spec = dephasing_spec() if name == "dephasing" else markov_spec()
        L, _ = generator_of(spec, args.tol)
        checks = _run_checks(L, args.tol)
        extraction = None
        verdict = all(c.passed for c in checks)
        if verdict:
            try:
                res = extract.decompose(L, tol=args.tol)
                extraction = _extraction_summary(res)
            except extract.ExtractionError as exc:
                verdict = False
                extraction = {"error": str(exc)}
        rr = RunReport(f"demo {name}", verdict, checks, extraction=extraction,
                       generator_norm=L.norm(),
                       timing={"demo": time.perf_counter() - t0})
    elif name == "grid":
        grid = GridSpec(1, 16, 1.0)
        checks, extras = corner_suite(grid, [4, 8], args.tol)
        rr = RunReport("demo grid", all(c.passed for c in checks), checks,
                       extra=extras, timing={"demo": time.perf_counter() - t0})
    else:
        raise InputError(f"unknown demo '{name}'")
    return emit(rr, args.format, args.out)


# -- entry point ----------------------------------------------------------


def _default_tol():
    env = os.environ.get("QDS_DEFAULT_TOL")
    if env is not None:
        try:
            return float(env)
        except ValueError:
            raise InputError(f"QDS_DEFAULT_TOL is not a number: {env!r}")
    return 1e-9


def _add_common(p):
    p.add_argument("--tol", type=float, default=None,
                   help="check tolerance (default 1e-9 or QDS_DEFAULT_TOL)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="also write the JSON report to this path")
    p.add_argument("--weights", type=lambda s: tuple(float(v) for v in s.split(",")),
                   default=None, help="override trace weights, comma separated")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="qdsym",
        description="Checks, decomposition, evolution and dilation of "
                    "trace-symmetric semigroup generators on block algebras.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the four generator checks")
    p.add_argument("file")
    _add_common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("decompose", help="checks plus derivation extraction")
    p.add_argument("file")
    p.add_argument("--decomposition", help="write extracted family to this file")
    _add_common(p)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("evolve", help="apply T_t = exp(tL) to an element")
    p.add_argument("file")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x-index", type=int, default=0,
                   help="global basis index of the observable")
    p.add_argument("--x-file", help="JSON element file for the observable")
    _add_common(p)
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("dilate", help="Monte Carlo dilation vs exact semigroup")
    p.add_argument("file")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=dilate.SCHEMES,
                   default="unitary-increment")
    p.add_argument("--x-index", type=int, default=0)
    p.add_argument("--x-file")
    _add_common(p)
    p.set_defaults(fn=cmd_dilate)

    p = sub.add_parser("corner", help="grid-truncation suite")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--points", type=int, default=16)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--m", type=lambda s: [int(v) for v in s.split(",")],
                   default=[4, 8])
    _add_common(p)
    p.set_defaults(fn=cmd_corner)

    p = sub.add_parser("demo", help="built-in fixtures")
    p.add_argument("name", choices=("dephasing", "markov", "grid"))
    _add_common(p)
    p.set_defaults(fn=cmd_demo)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.tol is None:
            args.tol = _default_tol()
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (blockalg.ValidationError, blockalg.StructureMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
