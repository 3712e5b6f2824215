"""Config-driven experiments with reproducible machine-readable outputs.

One experiment = one JSON config = one deterministic artifact set.  Tables
are CSV, nested reports JSON, both UTF-8 with LF endings, written atomically
(temp file + rename) and stamped with a provenance block (config hash,
package and numpy versions, seed) so identical configs produce identical
bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__
from . import billiards as bl
from . import kernels, monodromy, oracle, scattering
from .models import ModelSpec, ModelError, model_from_config

EXPERIMENTS = (
    "scattering_tables",
    "billiard_periodicity",
    "upsilon_checks",
    "cluster_structure",
    "correction_improvement",
    "trapped_mode_scan",
)

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "model"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "model": {
            "type": "object",
            "required": ["kind", "d", "h", "media"],
            "properties": {
                "kind": {"type": "string"},
                "d": {"type": "integer", "minimum": 1},
                "h": {"type": "number", "exclusiveMinimum": 0},
                "media": {"type": "array", "minItems": 1, "maxItems": 2},
                "bc": {"type": "object"},
                "transverse_period": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "h_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                   "minItems": 1},
        "window": {"type": "array", "items": {"type": "number"},
                   "minItems": 2, "maxItems": 2},
        "tau": {"type": "number"},
        "grid": {"type": "object"},
        "seed": {"type": "integer"},
        "out_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


class CertificationError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    model: ModelSpec
    h_list: tuple = ()
    window: tuple = ()
    tau: float | None = None
    grid: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "."
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        model = model_from_config(cfg["model"])
        h_list = tuple(cfg.get("h_list", [model.h]))
        if any(b >= a for a, b in zip(h_list, h_list[1:])) is False and len(h_list) > 1:
            pass
        if list(h_list) != sorted(h_list, reverse=True):
            raise ConfigError("h_list must be decreasing")
        return cls(
            experiment=cfg["experiment"],
            model=model,
            h_list=h_list,
            window=tuple(cfg.get("window", ())),
            tau=cfg.get("tau"),
            grid=dict(cfg.get("grid", {})),
            seed=int(cfg.get("seed", 0)),
            out_dir=cfg.get("out_dir", "."),
            raw=cfg,
        )


@dataclass
class ResultTable:
    name: str
    fieldnames: list
    rows: list
    provenance: dict

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.provenance, sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=self.fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row.get(k)) for k in self.fieldnames})
        return buf.getvalue().encode("utf-8")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def provenance_block(config: ExperimentConfig) -> dict:
    return {
        "config_hash": config_hash(config.raw),
        "billspec_version": __version__,
        "numpy_version": np.__version__,
        "seed": config.seed,
        "experiment": config.experiment,
    }


def atomic_write(path: str, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_billspec_")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def validate(cfg: dict) -> list:
    """Schema plus physics diagnostics; returns messages, never raises."""
    diags = []
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        diags.append(f"schema: {exc.message}")
        return diags
    try:
        model = model_from_config(cfg["model"])
    except (ModelError, KeyError, TypeError) as exc:
        diags.append(f"model: {exc}")
        return diags
    h_list = cfg.get("h_list", [model.h])
    if list(h_list) != sorted(h_list, reverse=True):
        diags.append("h_list: must be decreasing")
    window = cfg.get("window")
    if window is not None and window[0] >= window[1]:
        diags.append("window: lower bound must be below upper bound")
    if cfg["experiment"] in ("cluster_structure", "correction_improvement"):
        if model.kind != "glued_half_lines_oscillator":
            diags.append(f"{cfg['experiment']}: needs glued_half_lines_oscillator")
        elif window:
            for h in h_list:
                for tau in window:
                    et = [m.E + 2 * tau / m.omega**2 for m in model.media]
                    if min(et) <= 0:
                        diags.append(
                            f"window: tau={tau} below the propagation range")
                        break
    return diags


# -- experiment bodies ---------------------------------------------------------


def _run_scattering_tables(config: ExperimentConfig):
    model = config.model
    if model.kind != "glued_half_spaces_free":
        raise ConfigError("scattering_tables needs glued_half_spaces_free")
    tau = config.tau if config.tau is not None else 1.0
    n = int(config.grid.get("n_xi", 200))
    c1, c2 = model.media[0].c, model.media[1].c
    xi_max = math.sqrt(tau) / min(c1, c2) * 1.05
    xi_grid = np.linspace(0.0, xi_max, n)
    rows = scattering.scattering_table_rows(
        c1, c2, model.bc.alpha, model.bc.beta, xi_grid, tau)
    fields = ["xi_perp", "tau", "regime",
              "re_k11", "im_k11", "re_k12", "im_k12",
              "re_k21", "im_k21", "re_k22", "im_k22",
              "w1", "w2", "unitarity_residual"]
    return [ResultTable("scattering_tables", fields, rows,
                        provenance_block(config))]


def _run_billiard_periodicity(config: ExperimentConfig):
    model = config.model
    rng = np.random.default_rng(config.seed)
    tau = config.tau if config.tau is not None else 1.0
    n = int(config.grid.get("n_samples", 50))
    rows = []
    for i in range(n):
        if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
            m = model.medium(1)
            rad = math.sqrt(tau / m.omega**2 + m.E)
            phi = rng.uniform(0, 2 * math.pi)
            xicap = rad * 0.95
            xiphi = rng.uniform(-xicap, xicap)
            z = bl.BoundaryPoint((phi,), (xiphi,), tau)
        elif model.kind == "half_space_oscillator":
            m = model.medium(1)
            R2 = 2 * tau / m.omega**2 + m.E
            vec = rng.normal(size=2 * (model.d - 1))
            vec *= math.sqrt(0.5 * R2) / max(np.linalg.norm(vec), 1e-12) * rng.uniform(0, 0.9)
            z = bl.BoundaryPoint(vec[: model.d - 1], vec[model.d - 1:], tau)
        else:
            z = bl.BoundaryPoint((), (), tau)
        row = {"sample": i, "tau": tau}
        side = 1
        image = bl.boundary_map(model, side, z)
        back = bl.boundary_map(model, side, image)
        row["two_step_residual"] = bl.boundary_distance(model, back, z)
        row["antipodal_residual"] = bl.boundary_distance(
            model, image, bl.antipodal_map(model, z))
        if model.n_sides == 2 and model.kind != "glued_half_spaces_free":
            row["commutation_residual"] = bl.check_commutation(model, z)
        rows.append(row)
    fields = ["sample", "tau", "two_step_residual", "antipodal_residual",
              "commutation_residual"]
    return [ResultTable("billiard_periodicity", fields, rows,
                        provenance_block(config))]


def _run_upsilon_checks(config: ExperimentConfig):
    rows = []
    # harmonicity: unnormalised 5-point stencil over a grid
    spacing = float(config.grid.get("stencil_spacing", 1e-2))
    a = np.arange(spacing, 2 * math.pi, spacing * 10)
    b = np.arange(0.1, 5.0, spacing * 10)
    A, B = np.meshgrid(a, b, indexing="ij")
    sten = (kernels.sawtooth_harmonic(A + spacing, B) +
            kernels.sawtooth_harmonic(A - spacing, B) +
            kernels.sawtooth_harmonic(A, B + spacing) +
            kernels.sawtooth_harmonic(A, B - spacing) -
            4 * kernels.sawtooth_harmonic(A, B))
    rows.append({"check": "harmonicity_stencil", "value": float(np.max(np.abs(sten)))})
    al = np.linspace(0, 2 * math.pi, 1001)
    rows.append({"check": "decay_beta_20",
                 "value": float(np.max(np.abs(kernels.sawtooth_harmonic(al, 20.0))))})
    mask = (al > 0.1) & (al < 2 * math.pi - 0.1)
    rows.append({"check": "boundary_recovery",
                 "value": float(np.max(np.abs(
                     kernels.sawtooth_harmonic(al[mask], 1e-6)
                     - kernels.sawtooth(al[mask]))))})
    conv_err = max(
        abs(kernels.sawtooth_poisson_reference(x, 0.7)
            - kernels.sawtooth_harmonic(x, 0.7))
        for x in (0.5, 2.0, 4.0))
    rows.append({"check": "poisson_convolution", "value": conv_err})
    dg_err = max(
        abs(kernels.damped_geometric_sum(x, b)
            - kernels.damped_geometric_partial_sum(x, b))
        for x in (0.3, 1.7, 5.1) for b in (0.01, 0.5, 5.0))
    rows.append({"check": "damped_geometric_vs_partial_sum", "value": dg_err})
    return [ResultTable("upsilon_checks", ["check", "value"], rows,
                        provenance_block(config))]


def _run_cluster_structure(config: ExperimentConfig):
    model = config.model
    if model.kind != "glued_half_lines_oscillator":
        raise ConfigError("cluster_structure needs glued_half_lines_oscillator")
    lo, hi = config.window or (2.0, 2.5)
    rows = []
    for h in config.h_list:
        mh = ModelSpec(model.kind, model.d, h, model.media, model.bc,
                       model.transverse_period)
        sample = oracle.glued_oscillator_spectrum(mh, lo, hi)
        pad = 0.05 * (hi - lo)
        pred = monodromy.predict_clusters(mh, h, (lo - pad, hi + pad))
        if not pred.roots:
            raise CertificationError("no predicted roots on the window")
        proots = np.asarray(pred.roots)
        for e in sample.eigenvalues:
            gap = float(np.min(np.abs(proots - e)))
            rows.append({"h": h, "oracle_eigenvalue": e,
                         "nearest_prediction": float(proots[np.argmin(np.abs(proots - e))]),
                         "gap_over_h": gap / h})
    fields = ["h", "oracle_eigenvalue", "nearest_prediction", "gap_over_h"]
    return [ResultTable("cluster_structure", fields, rows,
                        provenance_block(config))]


def _run_correction_improvement(config: ExperimentConfig):
    model = config.model
    lo, hi = config.window or (2.0, 2.5)
    report = oracle.remainder_report(model, config.h_list, (lo, hi),
                                     n_grid=int(config.grid.get("n_lambda", 400)))
    rows = []
    for i, h in enumerate(report.h_list):
        rows.append({
            "h": h,
            "sup_with_correction": report.sup_with[i],
            "sup_without_correction": report.sup_without[i],
            "l1_with_correction": report.l1_with[i],
            "l1_without_correction": report.l1_without[i],
        })
    fields = ["h", "sup_with_correction", "sup_without_correction",
              "l1_with_correction", "l1_without_correction"]
    table = ResultTable("correction_improvement", fields, rows,
                        provenance_block(config))
    table.provenance = dict(table.provenance, report=report.to_dict())
    return [table]


def _run_trapped_mode_scan(config: ExperimentConfig):
    model = config.model
    if model.kind != "glued_half_spaces_free":
        raise ConfigError("trapped_mode_scan needs glued_half_spaces_free")
    tau = config.tau if config.tau is not None else 1.0
    n = int(config.grid.get("n_xi", 1000))
    c1, c2 = model.media[0].c, model.media[1].c
    xi_grid = np.linspace(0.0, 2.0 * math.sqrt(tau) / min(c1, c2), n)
    mask, frac = scattering.detect_trapped_modes(
        c1, c2, model.bc.alpha, model.bc.beta, xi_grid, tau)
    rows = [{"xi_perp": float(x), "trapped": int(t)}
            for x, t in zip(xi_grid, mask)]
    table = ResultTable("trapped_mode_scan", ["xi_perp", "trapped"], rows,
                        provenance_block(config))
    table.provenance = dict(table.provenance, measure_fraction=frac)
    return [table]


_RUNNERS = {
    "scattering_tables": _run_scattering_tables,
    "billiard_periodicity": _run_billiard_periodicity,
    "upsilon_checks": _run_upsilon_checks,
    "cluster_structure": _run_cluster_structure,
    "correction_improvement": _run_correction_improvement,
    "trapped_mode_scan": _run_trapped_mode_scan,
}


def run(cfg: dict, out_dir: str | None = None):
    """Run one experiment config; returns the written paths.

    Raises ConfigError for invalid configs and CertificationError when an
    oracle cannot certify the requested window.
    """
    diags = validate(cfg)
    if diags:
        raise ConfigError("; ".join(diags))
    config = ExperimentConfig.from_dict(cfg)
    if out_dir is not None:
        config.out_dir = out_dir
    tables = _RUNNERS[config.experiment](config)
    paths = []
    for table in tables:
        path = os.path.join(config.out_dir, f"{table.name}.csv")
        atomic_write(path, table.to_csv_bytes())
        paths.append(path)
        print(f"{table.name}: {len(table.rows)} rows -> {path}")
    return paths
