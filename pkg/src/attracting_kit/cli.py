"""Command-line orchestration: config ingestion, pipeline execution,
JSON and CSV reporting, deterministic rasters, and parameter scans.

Design constraints the implementation leans on:

* Real numbers inside config files are decimal strings ("0.05", "1e-3")
  parsed with float(), so a config means the same doubles on every
  platform.  Integers (seed, samples, depths, budgets) are plain JSON
  integers.  A seed is mandatory: no wall-clock defaults anywhere.
* Reports are JSON with sorted keys and shortest round-trip floats;
  byte-identical across reruns with the same config and seed except for
  the "timing" block.  Every numeric claim carries the tolerance or
  sample count it was tested at.
* Rasters are binary portable pixmaps written pixel-for-pixel from
  numpy arrays (identical bytes for identical inputs); the optional PNG
  mirror goes through matplotlib and is excluded from the byte
  contract.
* Exit codes are scriptable: 0 pass, 2 certification fail, 3 degenerate
  input, 4 budget, 5 bad config.
"""

import argparse
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from .degcert import certify
from .errors import (
    BudgetExceeded,
    ConfigInvalid,
    DegenerateFamily,
    InsufficientData,
    KitError,
    NonConvergence,
    PrerequisiteFailed,
    TrappingFails,
)
from .families import generic_family
from .p3ext import (
    Box,
    apply3,
    box_counting_dim,
    build as build_p3,
    certify_p3_degree,
    fiber_slice_cloud,
    horizontal_like_check,
    project_first_fiber,
    project_second_fiber,
)
from .pencilmap import PencilEndo, apply, base_preimages
from .potential import fiber_chart, potential_trace, slice_measure
from .precision import DEFAULT, Profile
from .projgeom import (
    BinaryForm,
    ProjPoint,
    chordal_distance,
    sphere_extrema,
)
from .specialsets import assemble_sets, check_conditions
from .trapping import certify_trapping, sample_attractor, solenoid_points

__all__ = ["main", "run", "EXIT_CODES", "SCHEMA_TAG"]

SCHEMA_TAG = "attracting-kit/report/v1"

EXIT_OK = 0
EXIT_CERTIFICATION = 2
EXIT_DEGENERATE = 3
EXIT_BUDGET = 4
EXIT_CONFIG = 5

# exception class -> exit code; first match wins on the MRO walk, so
# DepthExceeded inherits the budget code through BudgetExceeded
EXIT_CODES = {
    ConfigInvalid: EXIT_CONFIG,
    BudgetExceeded: EXIT_BUDGET,
    DegenerateFamily: EXIT_DEGENERATE,
    TrappingFails: EXIT_CERTIFICATION,
    PrerequisiteFailed: EXIT_CERTIFICATION,
    InsufficientData: EXIT_CERTIFICATION,
    NonConvergence: EXIT_CERTIFICATION,
}


def _exit_code_for(exc: KitError) -> int:
    for klass in type(exc).__mro__:
        if klass in EXIT_CODES:
            return EXIT_CODES[klass]
    return EXIT_CERTIFICATION


# ---------------------------------------------------------------------------
# config parsing


def _real(value, where: str) -> float:
    """Decimal-string (or plain number) to double."""
    if isinstance(value, bool):
        raise ConfigInvalid(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigInvalid(f"{where}: not a decimal string: {value!r}") from exc
    raise ConfigInvalid(f"{where}: expected a decimal string, got {type(value).__name__}")


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(f"{where}: expected an integer")
    return value


def _complex_of(value, where: str) -> complex:
    """[re, im] pair of decimal strings to a complex double."""
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigInvalid(f"{where}: expected an [re, im] pair")
    return complex(_real(value[0], where + "[0]"), _real(value[1], where + "[1]"))


def _form_of(value, degree: int, where: str) -> BinaryForm:
    if not isinstance(value, list) or len(value) != degree + 1:
        raise ConfigInvalid(
            f"{where}: coefficient array must have length degree+1 = {degree + 1}"
        )
    coeffs = [_complex_of(c, f"{where}[{j}]") for j, c in enumerate(value)]
    return BinaryForm(coeffs)


def _profile_of(cfg: dict) -> Profile:
    raw = cfg.get("profile")
    if raw is None:
        return DEFAULT
    if not isinstance(raw, dict):
        raise ConfigInvalid("profile: expected an object")
    field_map = {
        "aberthMaxIter": ("aberth_max_iter", _integer),
        "newtonMaxIter": ("newton_max_iter", _integer),
        "topTrimRel": ("top_trim_rel", _real),
        "clusterTol": ("cluster_tol", _real),
        "rootBackwardTol": ("root_backward_tol", _real),
        "pointTol": ("point_tol", _real),
        "setTol": ("set_tol", _real),
        "residualTol": ("residual_tol", _real),
    }
    kwargs = {}
    for key, value in raw.items():
        if key not in field_map:
            raise ConfigInvalid(f"profile: unknown field {key!r}")
        name, parse = field_map[key]
        kwargs[name] = parse(value, f"profile.{key}")
    return Profile(**kwargs)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config root must be a JSON object")
    if "seed" not in cfg:
        raise ConfigInvalid("config must carry an explicit seed")
    _integer(cfg["seed"], "seed")
    return cfg


def parse_map(cfg: dict) -> PencilEndo:
    for key in ("degree", "P", "Q", "R", "epsilon"):
        if key not in cfg:
            raise ConfigInvalid(f"config missing required field {key!r}")
    d = _integer(cfg["degree"], "degree")
    if d < 2:
        raise ConfigInvalid("degree must be at least 2")
    P = _form_of(cfg["P"], d, "P")
    Q = _form_of(cfg["Q"], d, "Q")
    R = _form_of(cfg["R"], d, "R")
    eps_raw = cfg["epsilon"]
    if isinstance(eps_raw, (list, tuple)):
        eps = _complex_of(eps_raw, "epsilon")
    else:
        eps = complex(_real(eps_raw, "epsilon"))
    try:
        return PencilEndo(P=P, Q=Q, R=R, epsilon=eps)
    except (ValueError, KitError) as exc:
        raise ConfigInvalid(f"map construction failed: {exc}") from exc


def _point_of(value, where: str) -> ProjPoint:
    if not isinstance(value, list) or len(value) < 2:
        raise ConfigInvalid(f"{where}: expected a list of [re, im] coordinate pairs")
    return ProjPoint([_complex_of(c, f"{where}[{j}]") for j, c in enumerate(value)])


# ---------------------------------------------------------------------------
# serialization helpers


def _point_json(p: ProjPoint) -> list:
    return [[float(c.real), float(c.imag)] for c in p.coords]


def _points_json(points) -> list:
    return [_point_json(p) for p in points]


def report_text(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _skeleton(command: str, cfg: dict) -> dict:
    return {
        "schema": SCHEMA_TAG,
        "command": command,
        "config": cfg,
        "results": {},
        "failures": [],
        "timing": {},
    }


def _record_failure(report: dict, stage: str, exc: Exception) -> None:
    report["failures"].append(
        {"stage": stage, "error": type(exc).__name__, "message": str(exc)}
    )


def _write_report(report: dict, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_text(report))
    return path


def _write_csv(out_dir: str, name: str, header: str, rows) -> str:
    clouds = os.path.join(out_dir, "clouds")
    os.makedirs(clouds, exist_ok=True)
    path = os.path.join(clouds, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def _write_ppm(out_dir: str, name: str, rgb: np.ndarray) -> str:
    renders = os.path.join(out_dir, "renders")
    os.makedirs(renders, exist_ok=True)
    path = os.path.join(renders, name)
    height, width = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (width, height))
        fh.write(rgb.astype(np.uint8).tobytes())
    return path


def _maybe_png(path_ppm: str, rgb: np.ndarray, enabled: bool) -> None:
    """Optional PNG mirror of a raster; outside the byte contract."""
    if not enabled:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.imsave(path_ppm[:-4] + ".png", rgb.astype(np.uint8))


# ---------------------------------------------------------------------------
# pipeline stages


def _timed(report: dict, stage: str, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        return fn(*args, **kwargs)
    finally:
        report["timing"][stage] = time.perf_counter() - t0


def _sets_block(sets, profile: Profile) -> dict:
    return {
        "X": _points_json(sets.x_set),
        "Y": _points_json(sets.y_set),
        "Z": _points_json(sets.z_set),
        "scriptZ": _points_json(sets.script_z),
        "Xminus1": _points_json(sets.x_minus1),
        "Yminus2": _points_json(sets.y_minus2),
        "Yminus1": _points_json(sets.y_minus1),
        "marginR": float(sets.margin_r),
        "degenerate": bool(sets.degenerate),
        "pointTolerance": profile.point_tol,
    }


def _conditions_block(verdict, samples: int) -> dict:
    return {
        "cond1": bool(verdict.cond1_disjoint),
        "cond1Margin": float(verdict.cond1_margin),
        "cond2": bool(verdict.cond2_chain),
        "cond2Margin": float(verdict.cond2_margin),
        "cond2simplified": bool(verdict.cond2_simplified),
        "cond2simplifiedMargin": float(verdict.cond2_simplified_margin),
        "cond53relaxed": bool(verdict.cond_53_relaxed),
        "gammaHat": float(verdict.gamma_hat),
        "epsilonMax": float(verdict.epsilon_max),
        "samples": samples,
    }


def _trapping_block(cert) -> dict:
    return {
        "alphaLo": float(cert.alpha_lo),
        "betaHi": float(cert.beta_hi),
        "rho": float(cert.rho),
        "epsilonUsed": float(cert.epsilon_used),
        "inequalitySlack": float(cert.inequality_slack),
        "sampledOk": bool(cert.sampled_ok),
        "samples": int(cert.samples),
        "delta": float(cert.delta),
    }


def _degree_block(cert) -> dict:
    return {
        "m": int(cert.iterate_m),
        "samples": int(cert.samples),
        "maxCount": int(cert.max_count),
        "threshold": int(cert.threshold),
        "verdict": bool(cert.verdict),
        "worstPoint": _point_json(cert.worst_point),
        "dtOneStep": int(cert.dt_one_step),
    }


def _potential_block(trace) -> dict:
    return {
        "spreads": [[int(n), float(v)] for n, v in trace.spreads],
        "verdict": trace.verdict,
        "predictedContraction": float(trace.predicted_contraction),
        "resampled": int(trace.resampled),
    }


def _summary_figure(out_dir: str, sets, trace) -> None:
    """Matplotlib overview on the report path; not byte-stable."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for label, pts, marker in (
        ("X", sets.x_set, "o"),
        ("Y", sets.y_set, "s"),
        ("Z", sets.z_set, "^"),
        ("script Z", sets.script_z, "*"),
    ):
        if not pts:
            continue
        us = []
        for p in pts:
            z, w = p.coords
            us.append(z / w if abs(w) > 1e-12 else complex(3.5, 3.5))
        ax1.scatter(
            [u.real for u in us], [u.imag for u in us], label=label, marker=marker
        )
    ax1.set_title("special sets (z/w chart)")
    ax1.set_xlim(-4, 4)
    ax1.set_ylim(-4, 4)
    ax1.legend(fontsize=8)
    if trace is not None:
        ns = [n for n, _ in trace.spreads]
        vs = [v for _, v in trace.spreads]
        ax2.plot(ns, vs, "o-")
        ax2.set_title(f"potential spreads ({trace.verdict})")
        ax2.set_xlabel("iterate")
    fig.tight_layout()
    renders = os.path.join(out_dir, "renders")
    os.makedirs(renders, exist_ok=True)
    fig.savefig(os.path.join(renders, "summary.png"), dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands


def run_analyze(cfg: dict, out_dir: str) -> tuple:
    """Full plane pipeline: extrema, sets, conditions, trapping, degree,
    potential.  Short-circuits with a partial report on hard failure."""
    report = _skeleton("analyze", cfg)
    profile = _profile_of(cfg)
    seed = cfg["seed"]
    f = parse_map(cfg)

    alpha_lo, beta_hi = _timed(
        report, "sphereExtrema", sphere_extrema, f.P, f.Q, f.R, profile
    )
    report["results"]["sphereExtrema"] = {
        "alphaLo": float(alpha_lo),
        "betaHi": float(beta_hi),
    }

    sets = _timed(report, "specialSets", assemble_sets, f, profile)
    report["results"]["sets"] = _sets_block(sets, profile)
    if sets.degenerate:
        failure = DegenerateFamily("collision variety is positive-dimensional")
        _record_failure(report, "specialSets", failure)
        return report, EXIT_DEGENERATE

    cond_samples = cfg.get("conditionSamples", 20000)
    verdict = _timed(
        report,
        "conditions",
        check_conditions,
        sets,
        f,
        profile,
        samples=cond_samples,
        seed=seed,
    )
    report["results"]["conditions"] = _conditions_block(verdict, cond_samples)
    conditions_pass = verdict.cond1_disjoint and (
        verdict.cond2_chain or verdict.cond2_simplified
    )
    if not conditions_pass:
        _record_failure(
            report,
            "conditions",
            PrerequisiteFailed("genericity conditions fail"),
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        trap = _timed(
            report,
            "trapping",
            certify_trapping,
            f,
            profile,
            samples=cfg.get("trappingSamples", 10000),
            seed=seed,
            epsilon_bound=verdict.epsilon_max,
        )
    report["results"]["trapping"] = _trapping_block(trap)
    report["results"]["trapping"]["epsilonBeyondGenericityBound"] = bool(
        abs(f.epsilon) >= verdict.epsilon_max > 0.0
    )
    trapping_pass = trap.sampled_ok and trap.inequality_slack > 0.0

    cloud = sample_attractor(f, trap.rho, burn=50, keep=cfg.get("cloudSize", 1000), seed=seed)
    _write_csv(
        out_dir,
        "attractor-sample.csv",
        "z_re,z_im,w_re,w_im,t_re,t_im",
        [
            [
                p.coords[0].real,
                p.coords[0].imag,
                p.coords[1].real,
                p.coords[1].imag,
                p.coords[2].real,
                p.coords[2].imag,
            ]
            for p in cloud
        ],
    )

    deg = _timed(
        report,
        "degree",
        certify,
        f,
        trap.rho,
        m=cfg.get("m", 3),
        samples=cfg.get("samples", 100),
        seed=seed,
        profile=profile,
        budget=cfg.get("budget", 10**6),
    )
    report["results"]["degree"] = _degree_block(deg)

    trace = _timed(
        report,
        "potential",
        potential_trace,
        f,
        trap.rho,
        n_max=cfg.get("potentialDepth", 5),
        sample_count=cfg.get("potentialSamples", 5),
        seed=seed,
        profile=profile,
        dt_one_step=deg.dt_one_step,
        budget=cfg.get("budget", 10**6),
    )
    report["results"]["potential"] = _potential_block(trace)

    _timed(report, "figure", _summary_figure, out_dir, sets, trace)

    ok = (
        conditions_pass
        and trapping_pass
        and deg.verdict
        and trace.verdict != "diverging"
    )
    if not trapping_pass:
        _record_failure(report, "trapping", TrappingFails("collar not certified"))
    if not deg.verdict:
        _record_failure(
            report, "degree", PrerequisiteFailed("preimage count not resolved below threshold")
        )
    if trace.verdict == "diverging":
        _record_failure(
            report, "potential", PrerequisiteFailed("potential spreads diverge")
        )
    return report, EXIT_OK if ok else EXIT_CERTIFICATION


def run_certify(cfg: dict, out_dir: str) -> tuple:
    """Trapping plus degree certificate, skipping set construction."""
    report = _skeleton("certify", cfg)
    profile = _profile_of(cfg)
    seed = cfg["seed"]
    f = parse_map(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        trap = _timed(
            report,
            "trapping",
            certify_trapping,
            f,
            profile,
            samples=cfg.get("trappingSamples", 10000),
            seed=seed,
        )
    report["results"]["trapping"] = _trapping_block(trap)
    deg = _timed(
        report,
        "degree",
        certify,
        f,
        trap.rho,
        m=cfg.get("m", 3),
        samples=cfg.get("samples", 100),
        seed=seed,
        profile=profile,
        budget=cfg.get("budget", 10**6),
    )
    report["results"]["degree"] = _degree_block(deg)
    ok = trap.sampled_ok and trap.inequality_slack > 0.0 and deg.verdict
    if not deg.verdict:
        _record_failure(
            report, "degree", PrerequisiteFailed("preimage count not resolved below threshold")
        )
    return report, EXIT_OK if ok else EXIT_CERTIFICATION


def run_potential(cfg: dict, out_dir: str) -> tuple:
    report = _skeleton("potential", cfg)
    profile = _profile_of(cfg)
    seed = cfg["seed"]
    f = parse_map(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        trap = _timed(
            report, "trapping", certify_trapping, f, profile, samples=2000, seed=seed
        )
    report["results"]["trapping"] = _trapping_block(trap)
    trace = _timed(
        report,
        "potential",
        potential_trace,
        f,
        trap.rho,
        n_max=cfg.get("depth", 6),
        sample_count=cfg.get("samples", 20),
        seed=seed,
        profile=profile,
        fiber_shrink=bool(cfg.get("fiberShrink", False)),
        budget=cfg.get("budget", 10**6),
    )
    report["results"]["potential"] = _potential_block(trace)
    return report, EXIT_OK if trace.verdict == "bounded" else EXIT_CERTIFICATION


def run_slice(cfg: dict, out_dir: str) -> tuple:
    report = _skeleton("slice", cfg)
    profile = _profile_of(cfg)
    f = parse_map(cfg)
    base = _point_of(cfg.get("basePoint", [["1.05", "0"], ["1", "0"]]), "basePoint")
    depth = cfg.get("depth", 8)
    sm = _timed(
        report,
        "slice",
        slice_measure,
        f,
        base,
        depth=depth,
        budget=cfg.get("budget", 10**6),
        profile=profile,
    )
    weight_sum = float(sum(w for _, w in sm.atoms))
    _write_csv(
        out_dir,
        "slice.csv",
        "re,im,weight",
        [[a.real, a.imag, w] for a, w in sm.atoms],
    )
    report["results"]["slice"] = {
        "depth": depth,
        "atoms": len(sm.atoms),
        "weightSum": weight_sum,
        "weightTolerance": 1e-10,
        "basePoint": _point_json(base),
    }
    ok = abs(weight_sum - 1.0) < 1e-10
    if not ok:
        _record_failure(
            report, "slice", PrerequisiteFailed("atom weights do not sum to one")
        )
    return report, EXIT_OK if ok else EXIT_CERTIFICATION


def run_scan(cfg: dict, out_dir: str) -> tuple:
    """Genericity map over the degree-d two-parameter family: per-cell
    degenerate flag and condition verdicts on an (a, b) grid."""
    report = _skeleton("scan", cfg)
    profile = _profile_of(cfg)
    seed = cfg["seed"]
    scan_cfg = cfg.get("scan")
    if not isinstance(scan_cfg, dict):
        raise ConfigInvalid("scan subcommand needs a 'scan' config object")
    d = _integer(scan_cfg.get("degree", 2), "scan.degree")
    eps = complex(_real(scan_cfg.get("epsilon", "1e-3"), "scan.epsilon"))
    a_values = [_real(v, "scan.aValues") for v in scan_cfg.get("aValues", [])]
    b_values = [_real(v, "scan.bValues") for v in scan_cfg.get("bValues", [])]
    if not a_values or not b_values:
        raise ConfigInvalid("scan needs nonempty aValues and bValues")
    cells = len(a_values) * len(b_values)
    budget = cfg.get("budget", 10**6)
    if cells > budget:
        raise BudgetExceeded(f"scan grid has {cells} cells, budget {budget}")
    samples = cfg.get("conditionSamples", 2000)

    t0 = time.perf_counter()
    rows = []
    tally = {"degenerate": 0, "cond1": 0, "cond2": 0, "cond2simplified": 0}
    for a in a_values:
        for b in b_values:
            try:
                fam = generic_family(d=d, a=a, b=b, epsilon=eps)
            except (ValueError, KitError):
                rows.append([a, b, 1, 0, 0, 0])
                tally["degenerate"] += 1
                continue
            sets = assemble_sets(fam, profile)
            if sets.degenerate:
                rows.append([a, b, 1, 0, 0, 0])
                tally["degenerate"] += 1
                continue
            verdict = check_conditions(
                sets, fam, profile, samples=samples, seed=seed
            )
            c1 = int(verdict.cond1_disjoint)
            c2 = int(verdict.cond2_chain)
            c2s = int(verdict.cond2_simplified)
            tally["cond1"] += c1
            tally["cond2"] += c2
            tally["cond2simplified"] += c2s
            rows.append([a, b, 0, c1, c2, c2s])
    report["timing"]["scan"] = time.perf_counter() - t0

    _write_csv(
        out_dir,
        "scan.csv",
        "a,b,degenerate,cond1,cond2,cond2simplified",
        rows,
    )
    report["results"]["scan"] = {
        "cells": cells,
        "degree": d,
        "conditionSamples": samples,
        "degenerateCells": tally["degenerate"],
        "cond1Pass": tally["cond1"],
        "cond2Pass": tally["cond2"],
        "cond2simplifiedPass": tally["cond2simplified"],
    }
    return report, EXIT_OK


def _p3_forms(cfg: dict):
    d = _integer(cfg["degree"], "degree")
    return (
        _form_of(cfg["P"], d, "P"),
        _form_of(cfg["Q"], d, "Q"),
        _form_of(cfg["R"], d, "R"),
    )


def run_p3(cfg: dict, out_dir: str) -> tuple:
    """Four-coordinate tasks: hyperplane-certify, product-gap, box-check."""
    report = _skeleton("p3", cfg)
    profile = _profile_of(cfg)
    seed = cfg["seed"]
    p3_cfg = cfg.get("p3")
    if not isinstance(p3_cfg, dict):
        raise ConfigInvalid("p3 subcommand needs a 'p3' config object")
    task = p3_cfg.get("task")

    if task == "hyperplane-certify":
        P, Q, R = _p3_forms(cfg)
        eps1 = complex(_real(p3_cfg["epsilon1"], "p3.epsilon1"))
        eps2 = complex(_real(p3_cfg["epsilon2"], "p3.epsilon2"))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            f3 = build_p3(
                "hyperplane", epsilon1=eps1, epsilon2=eps2, P=P, Q=Q, R=R,
                profile=profile,
            )
        rng = np.random.default_rng(seed)
        n_res = cfg.get("residualSamples", 10**4)
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(n_res):
            z, w, t = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            y = apply3(f3, ProjPoint([z, w, t, eps2 * w]))
            worst = max(worst, abs(y.coords[3] - eps2 * y.coords[1]))
        report["timing"]["residual"] = time.perf_counter() - t0
        rho1 = _real(p3_cfg["rho1"], "p3.rho1")
        rho2 = _real(p3_cfg["rho2"], "p3.rho2")
        cert = _timed(
            report,
            "degree",
            certify_p3_degree,
            f3,
            rho1,
            rho2,
            m=cfg.get("m", 6),
            samples=cfg.get("samples", 200),
            seed=seed,
            profile=profile,
            budget=cfg.get("budget", 10**6),
        )
        report["results"]["hyperplane"] = {
            "residualMax": worst,
            "residualSamples": n_res,
            "residualTolerance": 1e-12,
            "rho1": rho1,
            "rho2": rho2,
            "degree": _degree_block(cert),
        }
        ok = worst < 1e-12 and cert.verdict
        if not ok:
            _record_failure(
                report, "hyperplane", PrerequisiteFailed("certificate failed")
            )
        return report, EXIT_OK if ok else EXIT_CERTIFICATION

    if task == "product-gap":
        eps1 = complex(_real(p3_cfg["epsilon1"], "p3.epsilon1"))
        eps2 = complex(_real(p3_cfg["epsilon2"], "p3.epsilon2"))
        f3 = build_p3("product", epsilon1=eps1, epsilon2=eps2, profile=profile)
        rng = np.random.default_rng(seed)
        worst = 0.0
        t0 = time.perf_counter()
        for _ in range(cfg.get("residualSamples", 500)):
            x = ProjPoint(rng.standard_normal(4) + 1j * rng.standard_normal(4))
            y = apply3(f3, x)
            for which, proj in ((1, project_first_fiber), (2, project_second_fiber)):
                worst = max(
                    worst,
                    chordal_distance(proj(y), apply(f3.factor(which), proj(x))),
                )
        report["timing"]["equivariance"] = time.perf_counter() - t0
        base = _point_of(
            cfg.get("basePoint", [["1.05", "0"], ["1", "0"]]), "basePoint"
        )
        depth = cfg.get("depth", 14)
        scales = [
            _real(s, "p3.scales") for s in p3_cfg.get("scales", [])
        ] or list(np.geomspace(1e-4, 1e-12, 12))
        t0 = time.perf_counter()
        fits = {}
        for which in (1, 2):
            cloud = fiber_slice_cloud(
                f3.factor(which), base, depth=depth, profile=profile,
                budget=cfg.get("budget", 10**6),
            )
            _write_csv(
                out_dir,
                f"slice-factor{which}.csv",
                "re,im",
                [[c.real, c.imag] for c in cloud],
            )
            fits[which] = box_counting_dim(cloud, None, scales)
        report["timing"]["clouds"] = time.perf_counter() - t0
        fit1, fit2 = fits[1], fits[2]
        report["results"]["product"] = {
            "equivarianceMax": worst,
            "equivarianceTolerance": 1e-12,
            "depth": depth,
            "slope1": fit1.slope,
            "residual1": fit1.residual,
            "counts1": [[s, c] for s, c in fit1.counts],
            "slope2": fit2.slope,
            "residual2": fit2.residual,
            "counts2": [[s, c] for s, c in fit2.counts],
            "slopeGap": fit1.slope - fit2.slope,
        }
        ok = worst < 1e-12 and fit1.slope > fit2.slope
        if not ok:
            _record_failure(
                report, "product", PrerequisiteFailed("slope gap not established")
            )
        return report, EXIT_OK if ok else EXIT_CERTIFICATION

    if task == "box-check":
        f = parse_map(cfg)
        box_cfg = p3_cfg.get("box")
        if not isinstance(box_cfg, dict):
            raise ConfigInvalid("box-check needs a 'p3.box' object")
        box = Box(
            _real(box_cfg["inner"], "p3.box.inner"),
            _real(box_cfg["outer"], "p3.box.outer"),
            _real(box_cfg["rho"], "p3.box.rho"),
        )
        rep = _timed(
            report,
            "box",
            horizontal_like_check,
            f,
            box,
            boundary_samples=cfg.get("boundarySamples", 10**4),
            injectivity_samples=cfg.get("injectivitySamples", 10**3),
            seed=seed,
            profile=profile,
        )
        report["results"]["box"] = {
            "inner": box.inner,
            "outer": box.outer,
            "rho": box.rho,
            "verticalEscape": bool(rep.vertical_escape),
            "horizontalContraction": bool(rep.horizontal_contraction),
            "marginVertical": float(rep.margin_vertical),
            "marginHorizontal": float(rep.margin_horizontal),
            "injectivityMax": int(rep.injectivity_max),
            "horizontalLike": bool(rep.horizontal_like),
            "henonLike": bool(rep.henon_like),
            "boundarySamples": int(rep.boundary_samples),
            "injectivitySamples": int(rep.injectivity_samples),
            "witnessVertical": _point_json(rep.witness_vertical)
            if rep.witness_vertical is not None
            else None,
            "witnessHorizontal": _point_json(rep.witness_horizontal)
            if rep.witness_horizontal is not None
            else None,
        }
        if not rep.horizontal_like:
            _record_failure(
                report, "box", PrerequisiteFailed("box conditions fail")
            )
        return report, EXIT_OK if rep.horizontal_like else EXIT_CERTIFICATION

    raise ConfigInvalid(f"unknown p3 task {task!r}")


# ---------------------------------------------------------------------------
# rasters


def _blank(width: int, height: int) -> np.ndarray:
    return np.full((height, width, 3), 255, dtype=np.uint8)


def _draw_disc(rgb: np.ndarray, x: float, y: float, radius: float, color) -> None:
    height, width = rgb.shape[:2]
    r = max(radius, 1.5)
    x0, x1 = int(max(0, x - r - 1)), int(min(width, x + r + 2))
    y0, y1 = int(max(0, y - r - 1)), int(min(height, y + r + 2))
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mask = (xs - x) ** 2 + (ys - y) ** 2 <= r * r
    rgb[y0:y1, x0:x1][mask] = color


def _chart_to_pixel(u: complex, half_width: float, size: int):
    x = (u.real + half_width) / (2 * half_width) * (size - 1)
    y = (half_width - u.imag) / (2 * half_width) * (size - 1)
    return x, y


def render_sphere_sets(cfg: dict, out_dir: str) -> tuple:
    """X, Y, Z, script-Z and the Z preimages as discs on the z/w chart;
    disc radius is the separation margin converted to chart scale."""
    report = _skeleton("render", cfg)
    profile = _profile_of(cfg)
    f = parse_map(cfg)
    render_cfg = cfg.get("render", {})
    size = _integer(render_cfg.get("size", 240), "render.size")
    half_width = _real(render_cfg.get("chartHalfWidth", "3"), "render.chartHalfWidth")
    sets = _timed(report, "specialSets", assemble_sets, f, profile)
    pre_z = []
    for q in sets.z_set:
        for lift in base_preimages(f, q):
            pre_z.append(lift.base)
    rgb = _blank(size, size)
    groups = [
        (pre_z, (160, 210, 235), 0.5),
        (sets.z_set, (40, 80, 200), 1.0),
        (sets.script_z, (230, 190, 40), 1.4),
        (sets.y_set, (40, 160, 60), 1.0),
        (sets.x_set, (200, 40, 40), 1.0),
    ]
    drawn = {}
    for points, color, boost in groups:
        count = 0
        for p in points:
            z, w = p.coords
            if abs(w) < 1e-12 * abs(z):
                u = complex(half_width * 0.92, half_width * 0.92)
            else:
                u = z / w
            if max(abs(u.real), abs(u.imag)) > half_width:
                u = complex(
                    max(-half_width, min(half_width, u.real)),
                    max(-half_width, min(half_width, u.imag)),
                )
            x, y = _chart_to_pixel(u, half_width, size)
            chart_scale = 1.0 + abs(u) ** 2
            radius = (
                sets.margin_r * chart_scale / (2 * half_width) * size * boost
            )
            _draw_disc(rgb, x, y, radius, color)
            count += 1
        drawn[str(len(drawn))] = count
    path = _write_ppm(out_dir, "sphere-sets.ppm", rgb)
    _maybe_png(path, rgb, bool(render_cfg.get("png", False)))
    report["results"]["render"] = {
        "kind": "sphere-sets",
        "file": os.path.relpath(path, out_dir),
        "size": size,
        "points": {
            "X": len(sets.x_set),
            "Y": len(sets.y_set),
            "Z": len(sets.z_set),
            "scriptZ": len(sets.script_z),
            "Zpreimages": len(pre_z),
        },
    }
    return report, EXIT_OK


def render_fiber_slice(cfg: dict, out_dir: str) -> tuple:
    """Solenoid slice points at increasing depth, darker with depth."""
    report = _skeleton("render", cfg)
    profile = _profile_of(cfg)
    f = parse_map(cfg)
    render_cfg = cfg.get("render", {})
    size = _integer(render_cfg.get("size", 240), "render.size")
    depths = render_cfg.get("depths", [2, 4, 6])
    base = _point_of(cfg.get("basePoint", [["1.05", "0"], ["1", "0"]]), "basePoint")
    if "rho" in render_cfg:
        rho = _real(render_cfg["rho"], "render.rho")
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            rho = certify_trapping(f, profile, samples=200, seed=cfg["seed"]).rho
    charts = []
    t0 = time.perf_counter()
    for depth in depths:
        pts = solenoid_points(
            f, base, depth=_integer(depth, "render.depths"), rho=rho,
            budget=cfg.get("budget", 10**6), profile=profile,
        )
        charts.append([fiber_chart(base, x) for x in pts])
    report["timing"]["solenoid"] = time.perf_counter() - t0
    window = max(
        (max((abs(c) for c in chart), default=0.0) for chart in charts),
        default=0.0,
    )
    window = max(window * 1.2, 1e-6)
    rgb = _blank(size, size)
    shades = np.linspace(180, 30, max(len(depths), 2)).astype(int)
    for chart, shade in zip(charts, shades):
        color = (int(shade), int(shade), 230)
        for c in chart:
            x = (c.real + window) / (2 * window) * (size - 1)
            y = (window - c.imag) / (2 * window) * (size - 1)
            _draw_disc(rgb, x, y, size / 120.0, color)
    path = _write_ppm(out_dir, "fiber-slice.ppm", rgb)
    _maybe_png(path, rgb, bool(render_cfg.get("png", False)))
    report["results"]["render"] = {
        "kind": "fiber-slice",
        "file": os.path.relpath(path, out_dir),
        "size": size,
        "depths": [int(d) for d in depths],
        "window": window,
        "pointCounts": [len(c) for c in charts],
    }
    return report, EXIT_OK


def render_scan_heatmap(cfg: dict, out_dir: str) -> tuple:
    """Colors a scan CSV: gray degenerate, green full pass, yellow
    partial, red fail; one upscaled block per grid cell."""
    report = _skeleton("render", cfg)
    render_cfg = cfg.get("render", {})
    src = render_cfg.get("input")
    if not src:
        raise ConfigInvalid("scan-heatmap needs render.input pointing at a scan CSV")
    try:
        with open(src, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigInvalid(f"cannot read scan CSV {src}: {exc}") from exc
    rows = []
    for ln in lines[1:]:
        a, b, degen, c1, c2, c2s = ln.split(",")
        rows.append((float(a), float(b), int(float(degen)), int(float(c1)),
                     int(float(c2)), int(float(c2s))))
    if not rows:
        raise ConfigInvalid("scan CSV has no data rows")
    a_values = sorted({r[0] for r in rows})
    b_values = sorted({r[1] for r in rows})
    cell = _integer(render_cfg.get("cellPixels", 24), "render.cellPixels")
    rgb = _blank(len(a_values) * cell, len(b_values) * cell)
    index = {(r[0], r[1]): r for r in rows}
    for i, a in enumerate(a_values):
        for j, b in enumerate(b_values):
            r = index.get((a, b))
            if r is None:
                color = (255, 255, 255)
            elif r[2]:
                color = (150, 150, 150)
            elif r[3] and (r[4] or r[5]):
                color = (60, 170, 60)
            elif r[3] or r[4] or r[5]:
                color = (230, 200, 60)
            else:
                color = (200, 60, 60)
            y0 = (len(b_values) - 1 - j) * cell
            x0 = i * cell
            rgb[y0 : y0 + cell, x0 : x0 + cell] = color
    path = _write_ppm(out_dir, "scan-heatmap.ppm", rgb)
    _maybe_png(path, rgb, bool(render_cfg.get("png", False)))
    report["results"]["render"] = {
        "kind": "scan-heatmap",
        "file": os.path.relpath(path, out_dir),
        "cells": len(rows),
        "gridA": len(a_values),
        "gridB": len(b_values),
    }
    return report, EXIT_OK


def run_render(cfg: dict, out_dir: str) -> tuple:
    render_cfg = cfg.get("render")
    if not isinstance(render_cfg, dict):
        raise ConfigInvalid("render subcommand needs a 'render' config object")
    kind = render_cfg.get("kind")
    if kind == "sphere-sets":
        return render_sphere_sets(cfg, out_dir)
    if kind == "fiber-slice":
        return render_fiber_slice(cfg, out_dir)
    if kind == "scan-heatmap":
        return render_scan_heatmap(cfg, out_dir)
    raise ConfigInvalid(f"unknown render kind {kind!r}")


# ---------------------------------------------------------------------------
# entry point

_RUNNERS = {
    "analyze": run_analyze,
    "certify": run_certify,
    "potential": run_potential,
    "slice": run_slice,
    "scan": run_scan,
    "p3": run_p3,
    "render": run_render,
}


def run(command: str, cfg: dict, out_dir: str) -> int:
    """Execute one subcommand and write report.json; returns the exit
    code.  KitError failures still produce a structured report."""
    runner = _RUNNERS[command]
    try:
        report, code = runner(cfg, out_dir)
    except KitError as exc:
        report = _skeleton(command, cfg)
        _record_failure(report, command, exc)
        code = _exit_code_for(exc)
    report["exitCode"] = code
    _write_report(report, out_dir)
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attracting-kit",
        description=(
            "Certification toolkit for pencil-preserving endomorphisms of "
            "projective space: trapping regions, genericity conditions, "
            "small-topological-degree certificates, quasi-potential traces, "
            "slice measures, parameter scans, and static renders."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("analyze", "full plane pipeline: sets, conditions, trapping, degree, potential"),
        ("certify", "trapping and degree certificates only"),
        ("potential", "quasi-potential spread trace"),
        ("slice", "attracting-current slice measure to CSV"),
        ("scan", "(a, b) genericity grid to CSV"),
        ("p3", "four-coordinate tasks: hyperplane-certify, product-gap, box-check"),
        ("render", "deterministic rasters: sphere-sets, fiber-slice, scan-heatmap"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--samples", type=int, default=None, help="override sample count")
        p.add_argument("--depth", type=int, default=None, help="override depth")
        p.add_argument("--budget", type=int, default=None, help="override node budget")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for key in ("seed", "samples", "depth", "budget"):
            override = getattr(args, key)
            if override is not None:
                cfg[key] = override
        code = run(args.command, cfg, args.out)
    except KitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    report_path = os.path.join(args.out, "report.json")
    print(f"{args.command}: exit {code}, report at {report_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
