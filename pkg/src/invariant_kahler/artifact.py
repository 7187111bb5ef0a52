"""Run artifacts: solve from a config, persist as JSON, reload and verify."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import SolveConfig
from .geometry import (
    GeometryError,
    closedness_check,
    default_stencil_radius,
    fit_local_quadratic,
    metric_eigenvalues,
    positivity_check,
    properness_check,
    spectral_data,
)
from .oracles import su2_profile
from .ot_solver import (
    ConvexPotential,
    TargetCloud,
    TransportDiagnostics,
    TransportRun,
    assign_cells,
    ball_region,
    ma_measure_check,
    make_source_grid,
    rank1_closed_form,
    solve_sequence,
)
from .rootsys import chamber_rays, in_chamber, wall_distance, weyl_orbit

SCHEMA = "invariant-kahler/run"
SCHEMA_VERSION = 1


class VerificationDomainError(ValueError):
    """Requested samples fall outside the solved domain."""


# --- writing -------------------------------------------------------------------


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path, header: list, rows: list) -> None:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    write_atomic(path, buf.getvalue())


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


# --- solve ---------------------------------------------------------------------


def _run_record(cfg: SolveConfig, run: TransportRun) -> dict:
    return {
        "k": run.k,
        "epsilon": run.spec.regularization,
        "R_k": run.radius,
        "grid_resolution": run.source.n_cells,
        "source_mass": run.source.total_mass,
        "rank": run.cloud.points.shape[1],
        "points": run.cloud.points.ravel().tolist(),
        "masses": run.cloud.masses.tolist(),
        "orbit_ids": run.cloud.orbit_ids.tolist(),
        "weights": np.asarray(run.weights).tolist(),
        "psi": run.potential.psi.tolist(),
        "gauge_offset": run.potential.offset,
        "diagnostics": run.diagnostics.to_dict(),
    }


def solve_config(cfg: SolveConfig) -> dict:
    """Run the configured solve and return the artifact document."""
    spec = cfg.density_spec()
    rs = spec.rs
    doc = {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg.to_dict(),
        "root_system": rs.to_dict(),
        "method": cfg.method,
    }
    if cfg.method == "su2-oracle":
        doc["runs"] = [
            {"k": k, "epsilon": 0.0, "R_k": float(rank1_closed_form(spec, k)), "rank": 1} for k in cfg.k_list
        ]
        doc["sequence"] = {"sup_differences": [], "lipschitz": [], "monitor_radius": None}
        return doc
    report = solve_sequence(
        spec,
        cfg.k_list,
        cfg.m_schedule,
        tol=cfg.tol,
        resolution=cfg.grid_resolution,
        seed=cfg.seed,
        regularization=cfg.regularization,
        monitor_radius=min(0.5, cfg.k_list[0]),
        max_iter=cfg.max_iter,
    )
    doc["runs"] = [_run_record(cfg, r) for r in report.runs]
    doc["sequence"] = {
        "sup_differences": report.sup_differences,
        "lipschitz": report.lipschitz,
        "monitor_radius": report.monitor_radius,
    }
    return doc


def summary_rows(doc: dict) -> list:
    rows = []
    sups = doc["sequence"]["sup_differences"]
    for i, r in enumerate(doc["runs"]):
        res = r.get("diagnostics", {}).get("max_rel_cell_residual", 0.0)
        rows.append((r["k"], r["R_k"], res, sups[i - 1] if i > 0 and sups else float("nan")))
    return rows


# --- reload --------------------------------------------------------------------


def load_artifact(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"{path} is not a run artifact")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported artifact schema version {doc.get('schema_version')}")
    return doc


def artifact_config(doc: dict) -> SolveConfig:
    return SolveConfig.from_dict(doc["config"])


def rebuild_run(doc: dict, index: int = -1) -> TransportRun:
    """Reconstruct a solved run from its stored arrays (the source grid is rebuilt)."""
    cfg = artifact_config(doc)
    rec = doc["runs"][index]
    spec = cfg.density_spec().with_regularization(rec["epsilon"])
    n = rec["rank"]
    pts = np.asarray(rec["points"], dtype=float).reshape(-1, n)
    cloud = TargetCloud(
        points=pts,
        masses=np.asarray(rec["masses"], dtype=float),
        orbit_ids=np.asarray(rec["orbit_ids"], dtype=int),
        radius=rec["R_k"],
    )
    src = make_source_grid(spec, rec["k"], rec["grid_resolution"])
    pot = ConvexPotential(points=pts, psi=np.asarray(rec["psi"], dtype=float), offset=rec["gauge_offset"])
    d = rec["diagnostics"]
    diag = TransportDiagnostics(
        d["max_rel_cell_residual"], d["iterations"], d["empty_cells"], d["duality_gap_estimate"], d["dual_history"]
    )
    return TransportRun(spec, rec["k"], rec["R_k"], src, cloud, np.asarray(rec["weights"], dtype=float), pot, diag)


def recheck_diagnostics(run: TransportRun) -> dict:
    """Recompute the mass-balance diagnostics from the stored weights."""
    m = assign_cells(run.cloud, run.weights, run.source)
    rel = np.abs(m - run.cloud.masses) / run.cloud.masses
    return {
        "max_rel_cell_residual": float(rel.max()),
        "empty_cells": int(np.sum(m <= 0)),
        "source_mass": run.source.total_mass,
    }


# --- verify --------------------------------------------------------------------


@dataclass
class VerifyResult:
    header: list
    rows: list
    summary: dict


def sample_points(rs, k: float, n: int, seed: int, inner: float, collar: float) -> np.ndarray:
    """Chamber points with |x| <= inner and wall distance >= collar."""
    if inner <= collar:
        raise VerificationDomainError("no admissible samples: the wall collar fills the sampling ball")
    rng = np.random.default_rng(seed)
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 1000:
            raise VerificationDomainError("could not draw samples inside the admissible region")
        batch = rng.uniform(-inner, inner, size=(4 * n, rs.rank))
        ok = (np.linalg.norm(batch, axis=1) <= inner) & in_chamber(rs, batch) & (wall_distance(rs, batch) >= collar)
        out.extend(batch[ok][: n - len(out)])
    return np.array(out)


def verify_document(doc: dict, samples: int, run_index: int = -1, points=None) -> VerifyResult:
    cfg = artifact_config(doc)
    spec = cfg.density_spec()
    rs = spec.rs
    n = rs.rank
    rec = doc["runs"][run_index]
    k = rec["k"]
    oracle = doc["method"] == "su2-oracle"
    if oracle:
        run = None
        radius = 0.0
        phi = None
    else:
        run = rebuild_run(doc, run_index)
        phi = run.potential
        radius = default_stencil_radius(run.cloud.points)
    # the fit stencil must stay inside the solved ball; it may cross walls since phi is W-invariant
    inner = min(0.9 * k, k - radius)
    collar = cfg.eps_wall
    if points is None:
        if samples <= 0:
            raise VerificationDomainError("samples must be positive")
        points = sample_points(rs, k, samples, cfg.seed + 1, inner, collar)
    else:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        bad = (np.linalg.norm(points, axis=1) > inner) | (wall_distance(rs, points) < collar)
        if np.any(bad):
            raise VerificationDomainError("samples outside the solved ball or inside the wall collar")

    def derivatives(x):
        if oracle:
            p = su2_profile(float(x[0]))
            return np.array([p.Kp]), np.array([[p.Kpp]]), 0.0, True
        fit = fit_local_quadratic(phi, x, radius)
        return fit.grad, fit.hess, fit.residual, fit.consistent

    npos = rs.num_positive
    eps = float(rec.get("epsilon", 0.0))
    header = [f"x{i + 1}" for i in range(n)] + ["defect", "defect_normalized", "equation_ratio"]
    header += [f"h_{j + 1}" for j in range(npos)] + [f"phi_{j + 1}" for j in range(npos)]
    header += ["hess_min_eig", "hessian_positive", "phi_positive", "second_positive", "positive"]
    header += ["invariance_residual", "fit_residual", "fit_consistent"]
    rows = []
    defects = []
    for x in points:
        grad, hess, fres, consistent = derivatives(x)
        sm = spectral_data(rs, x, grad, hess, cfg.overflow_radius)
        verdict = positivity_check(sm)
        u = float(spec.u_value(x))
        try:
            rep = metric_eigenvalues(rs, sm, u)
            defect, h = rep.ricci_defect, rep.horizontal_root
        except GeometryError:
            defect, h = float("nan"), np.full(npos, np.nan)
        # (prod a(grad)^2 + eps) det hess / (e^u prod sinh^2 a(x) + eps): 1 for the solved equation
        lhs = (np.prod(sm.a**2) + eps) * np.linalg.det(sm.hess)
        eq_ratio = float(lhs / (np.exp(u) * np.prod(np.sinh(sm.root_values) ** 2) + eps))
        if oracle:
            inv = 0.0
        else:
            orbit = weyl_orbit(rs, x)
            vals = phi(orbit)
            inv = float(np.max(np.abs(vals - vals[0])))
        defects.append(defect)
        rows.append(
            list(x)
            + [defect, None, eq_ratio]
            + list(h)
            + list(sm.phi)
            + [verdict.min_hessian_eigenvalue, verdict.hessian_positive, verdict.phi_positive]
            + [verdict.second_condition, verdict.ok, inv, fres, consistent]
        )
    defects = np.array(defects)
    med = float(np.nanmedian(defects))
    ratios = np.array([r[n + 2] for r in rows])
    for row, dv in zip(rows, defects):
        row[n + 1] = dv / med
    summary = {
        "run_k": k,
        "samples": len(points),
        "median_defect": med,
        "max_rel_defect_spread": float(np.nanmax(np.abs(defects / med - 1.0))),
        "epsilon": eps,
        "median_equation_ratio": float(np.median(ratios)),
        "max_invariance_residual": float(max(r[header.index("invariance_residual")] for r in rows)),
        "all_positive": bool(all(r[header.index("positive")] for r in rows)),
    }
    if not oracle:
        re = recheck_diagnostics(run)
        summary["recomputed_max_rel_cell_residual"] = re["max_rel_cell_residual"]
        summary["stored_max_rel_cell_residual"] = run.diagnostics.max_rel_cell_residual
        summary["ma_measure_residual_full_ball"] = ma_measure_check(run, ball_region(n, k))
        mu = lambda p: fit_local_quadratic(phi, p, radius).grad  # noqa: E731
        summary["closedness_residual"] = closedness_check(mu, points[: min(5, len(points))], spacing=min(radius / 2, 0.05))
        rays = np.vstack([chamber_rays(rs), -chamber_rays(rs)])
        prop = properness_check(phi, rays, radius=0.95 * k)
        summary["proper_on_sampled_rays"] = prop.proper
        summary["min_properness_margin"] = prop.min_margin
    return VerifyResult(header, rows, summary)
