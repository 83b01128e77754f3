"""Configuration-driven experiments writing CSV tables and a JSON manifest.

A config is one JSON object::

    {"experiment": "rho-surface", "seed": 1, "output_dir": "out",
     "workers": 1, "parameters": {"J": 4000}}

Missing parameters take the defaults listed by :func:`describe`. Every run
writes long-format CSV files (17 significant digits) plus ``manifest.json``
with the resolved config, library version and SHA-256 of each emitted file.
"""

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from infosel import __version__
from infosel.covariogram import CovariogramModel
from infosel.density_ratio import MIN_REPLICATIONS, RhoQuery, pair_at_distance, rho_curve
from infosel.density_ratio import rho_property_suite, rho_surface
from infosel.design import DesignSpec, DesignVariableSpec, calibrate_xi0, draw_bpp, draw_ppp
from infosel.design import make_design_variable
from infosel.domain import Domain, make_grid
from infosel.errors import InvalidArgument
from infosel.gaussian_field import FieldRealization, GaussianSpec, sampler_for
from infosel.likelihood import full_loglik, naive_mle
from infosel.variogram import BiasStudyConfig, StudyDesign, naive_bias_study

OUTPUT_ENV = "INFOSEL_OUTPUT_DIR"
DEFAULT_OUTPUT = "infosel-output"
MANIFEST = "manifest.json"


# --- parameter checks -------------------------------------------------------

def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(v):
    return None if _is_real(v) and v > 0 else "must be a positive number"


def _real(v):
    return None if _is_real(v) else "must be a finite number"


def _nonnegative(v):
    return None if _is_real(v) and v >= 0 else "must be a number >= 0"


def _int_at_least(k):
    def check(v):
        ok = isinstance(v, int) and not isinstance(v, bool) and v >= k
        return None if ok else f"must be an integer >= {k}"
    return check


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(map(str, options))}"
    return check


def _list_of(item, minimum=1):
    def check(v):
        if not isinstance(v, list) or len(v) < minimum:
            return f"must be a list with at least {minimum} element(s)"
        for x in v:
            msg = item(x)
            if msg:
                return f"element {x!r} {msg}"
        return None
    return check


def _replications(v):
    ok = isinstance(v, int) and not isinstance(v, bool) and v >= MIN_REPLICATIONS
    return None if ok else f"replications must be >= {MIN_REPLICATIONS} for rho experiments"


def _designs(v):
    if not isinstance(v, list) or not v:
        return "must be a nonempty list of {name, xi1, xi2} objects"
    for d in v:
        if not isinstance(d, dict) or set(d) != {"name", "xi1", "xi2"}:
            return "each design needs exactly the keys name, xi1, xi2"
        if not isinstance(d["name"], str) or _real(d["xi1"]) or _nonnegative(d["xi2"]):
            return "design name must be a string, xi1 finite and xi2 >= 0"
    if len({d["name"] for d in v}) != len(v):
        return "design names must be unique"
    return None


def _optional(check):
    return lambda v: None if v is None else check(v)


_FIELD = {
    "resolution": (64, _int_at_least(2)),
    "theta1": (1.0, _positive),
}
_NOISE = {
    "eps_deviation": (1.0, _positive),
    "eps_scale": (0.1, _positive),
}
_RHO = {
    **_FIELD,
    "theta2": (0.1, _positive),
    **_NOISE,
    "family": ("bpp", _choice("bpp", "ppp")),
    "n": (10, _int_at_least(1)),
    "xi0": (math.log(10.0), _real),
}
_FIG2_DESIGNS = [
    {"name": "a", "xi1": 0.0, "xi2": 0.0},
    {"name": "b", "xi1": 0.0, "xi2": 0.5},
    {"name": "c", "xi1": 0.4, "xi2": 0.3},
]
_STUDY_DESIGNS = [{"name": d.name, "xi1": d.xi1, "xi2": d.xi2} for d in BiasStudyConfig().designs]

PARAMETERS = {
    "simulate-field": {
        **_FIELD,
        "theta2_values": ([0.01, 0.1, 1.0], _list_of(_positive)),
    },
    "sample-plot": {
        **_FIELD,
        "theta2": (0.1, _positive),
        **_NOISE,
        "family": ("bpp", _choice("bpp", "ppp")),
        "n": (100, _int_at_least(1)),
        "target_intensity": (10.0, _positive),
        "designs": (_FIG2_DESIGNS, _designs),
    },
    "rho-curve": {
        **_RHO,
        "sweep": ("xi1", _choice("xi1", "xi2")),
        "values": ([round(-3 + 0.25 * k, 2) for k in range(25)], _list_of(_real)),
        "xi1": (1.0, _real),
        "xi2": (1.0, _nonnegative),
        "y_values": ([-2.0, -1.0, 0.0, 1.0, 2.0], _list_of(_real)),
        "J": (10_000, _replications),
    },
    "rho-surface": {
        **_RHO,
        "xi1": (1.0, _real),
        "xi2": (1.0, _nonnegative),
        "distances": ([0.018, 0.074, 0.357, 0.711], _list_of(_positive)),
        "y_values": ([round(-2 + 0.5 * k, 2) for k in range(9)], _list_of(_real)),
        "J": (4_000, _replications),
    },
    "variogram-study": {
        **_FIELD,
        "theta1": (5.0, _positive),
        "theta2": (0.1, _positive),
        **_NOISE,
        "n": (100, _int_at_least(2)),
        "M": (200, _int_at_least(2)),
        "target_intensity": (10.0, _positive),
        "n_bins": (15, _int_at_least(2)),
        "field_mode": ("fixed", _choice("fixed", "resampled")),
        "weights": ("cressie", _choice("cressie", "counts")),
        "hist_bins": (30, _int_at_least(2)),
        "designs": (_STUDY_DESIGNS, _designs),
    },
    "properties-check": {
        **_RHO,
        "xi1": (1.0, _real),
        "xi2": (1.0, _nonnegative),
        "J": (2_000, _replications),
    },
    "likelihood-profile": {
        **_RHO,
        "resolution": (32, _int_at_least(2)),
        "theta1": (5.0, _positive),
        "n": (20, _int_at_least(3)),
        "xi0": (None, _optional(_real)),
        "xi1": (0.4, _real),
        "xi2": (0.3, _nonnegative),
        "target_intensity": (10.0, _positive),
        "theta1_values": ([2.5, 5.0, 10.0], _list_of(_positive)),
        "theta2_values": ([0.05, 0.1, 0.2], _list_of(_positive)),
        "J": (2_000, _replications),
    },
}

DESCRIPTIONS = {
    "simulate-field": "Gaussian field realizations over a list of scale parameters",
    "sample-plot": "design variables, signal and drawn samples on one realization",
    "rho-curve": "density ratio of one draw while sweeping xi1 or xi2",
    "rho-surface": "density ratio of two draws over a (y1, y2) grid per pair distance",
    "variogram-study": "naive variogram estimation under informative and uninformative designs",
    "properties-check": "Monte Carlo checks of the qualitative density ratio properties",
    "likelihood-profile": "naive and selection-aware log-likelihood over a theta grid",
}


def list_experiments():
    return list(PARAMETERS)


def describe(name):
    """Default parameters of one experiment."""
    if name not in PARAMETERS:
        raise InvalidArgument(f"unknown experiment {name!r}")
    return {k: v[0] for k, v in PARAMETERS[name].items()}


# --- config ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    parameters: dict = field(default_factory=dict)
    output_dir: str | None = None
    workers: int = 1
    figures: bool = True

    def resolved(self):
        """Parameters with defaults filled in."""
        out = describe(self.experiment)
        out.update(self.parameters)
        return out

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "workers": self.workers,
            "parameters": self.resolved(),
        }


_TOP_LEVEL = {"experiment", "seed", "parameters", "output_dir", "workers", "figures"}


def validate(config):
    """All violations of a config (dict or :class:`ExperimentConfig`); empty if runnable."""
    raw = config.__dict__ if isinstance(config, ExperimentConfig) else config
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    errors = [f"unknown top-level field {k!r}" for k in sorted(set(raw) - _TOP_LEVEL)]
    name = raw.get("experiment")
    if name is None:
        errors.append("missing experiment")
    elif name not in PARAMETERS:
        errors.append(f"unknown experiment {name!r}; choose from {', '.join(PARAMETERS)}")
    seed = raw.get("seed")
    if seed is None:
        errors.append("missing seed")
    elif not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append("seed must be a nonnegative integer")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        errors.append("workers must be an integer >= 1")
    if not isinstance(raw.get("figures", True), bool):
        errors.append("figures must be true or false")
    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        errors.append("output_dir must be a string")
    params = raw.get("parameters", {})
    if not isinstance(params, dict):
        errors.append("parameters must be an object")
    elif name in PARAMETERS:
        spec = PARAMETERS[name]
        for k in sorted(set(params) - set(spec)):
            errors.append(f"unknown parameter {k!r} for {name}")
        for k, (_, check) in spec.items():
            if k in params:
                msg = check(params[k])
                if msg:
                    errors.append(f"{k}: {msg}")
    return errors


def from_dict(raw):
    errors = validate(raw)
    if errors:
        raise InvalidArgument("; ".join(errors))
    return ExperimentConfig(
        experiment=raw["experiment"],
        seed=raw["seed"],
        parameters=dict(raw.get("parameters", {})),
        output_dir=raw.get("output_dir"),
        workers=raw.get("workers", 1),
        figures=raw.get("figures", True),
    )


def load_config(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"{path}: not valid JSON ({exc})") from None


def output_dir_for(config, override=None):
    return Path(override or config.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


# --- output -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _grid(p):
    return make_grid(Domain(2), p["resolution"])


def _xi(p, xi1, xi2, xi0=None):
    return DesignVariableSpec(
        p["xi0"] if xi0 is None else xi0, xi1, xi2, p["eps_deviation"], p["eps_scale"]
    )


def _design(p, xi):
    return DesignSpec(p["family"], p["n"] if p["family"] == "bpp" else None, xi)


def _signal(p):
    return GaussianSpec(CovariogramModel(p["theta1"], p["theta2"]))


# --- experiments ----------------------------------------------------------------
# Each runner returns (tables, figure_data): tables maps a file name to
# (header, rows) and figure_data is handed to the matching plotting function.

def _simulate_field(p, seed, workers):
    grid = _grid(p)
    pts = grid.points
    tables, fields = {}, []
    for k, t2 in enumerate(p["theta2_values"]):
        spec = GaussianSpec(CovariogramModel(p["theta1"], t2))
        y = sampler_for(spec, grid).batch(seed, "field", k, 1)[0]
        rows = [(c, t2, pts[c, 0], pts[c, 1], y[c]) for c in range(grid.size)]
        tables[f"field_theta2_{t2:g}.csv"] = (("cell", "theta2", "x1", "x2", "value"), rows)
        fields.append((t2, y.reshape(grid.shape)))
    return tables, {"fields": fields}


def _sample_plot(p, seed, workers):
    grid = _grid(p)
    pts = grid.points
    y = sampler_for(_signal(p), grid).batch(seed, "population", 0, 1)[0]
    eps = sampler_for(GaussianSpec(CovariogramModel(p["eps_deviation"], p["eps_scale"])), grid)
    e = eps.batch(seed, "noise", 0, 1)[0]
    field_rows, sample_rows, summary_rows, panels = [], [], [], []
    for k, d in enumerate(p["designs"]):
        xi0 = calibrate_xi0(d["xi1"], d["xi2"], p["theta1"], p["eps_deviation"], p["target_intensity"])
        xi = DesignVariableSpec(xi0, d["xi1"], d["xi2"], p["eps_deviation"], p["eps_scale"])
        z = make_design_variable(FieldRealization(grid, y), FieldRealization(grid, e), xi)
        s = draw_bpp(z, p["n"], seed, k) if p["family"] == "bpp" else draw_ppp(z, seed, k)
        for c in range(grid.size):
            field_rows.append((d["name"], c, pts[c, 0], pts[c, 1], y[c], z.values[c]))
        for i, c in enumerate(s.draws):
            sample_rows.append((d["name"], i, c, pts[c, 0], pts[c, 1], y[c], z.values[c]))
        cor = float(np.corrcoef(y, z.values)[0, 1]) if np.ptp(z.values) > 0 else 0.0
        summary_rows.append((d["name"], xi0, d["xi1"], d["xi2"], cor, z.values.mean(), s.size))
        panels.append((d["name"], xi, z.values.reshape(grid.shape), pts[s.draws]))
    tables = {
        "fields.csv": (("design", "cell", "x1", "x2", "y", "z"), field_rows),
        "samples.csv": (("design", "draw", "cell", "x1", "x2", "y", "z"), sample_rows),
        "designs.csv": (("design", "xi0", "xi1", "xi2", "cor_yz", "mean_z", "sample_size"), summary_rows),
    }
    return tables, {"y": y.reshape(grid.shape), "y_flat": y, "panels": panels}


def _rho_curve(p, seed, workers):
    grid = _grid(p)
    x = grid.index_of([0.5, 0.5])
    xi = _xi(p, p["xi1"], p["xi2"])
    design = _design(p, xi)
    rows, curves = [], []
    for yv in p["y_values"]:
        q = RhoQuery((x,), (yv,), design, _signal(p))
        res = rho_curve(q, grid, p["sweep"], p["values"], p["J"], seed, workers)
        for r in res:
            rows.append((p["sweep"], r["value"], yv, r["rho"], r["mc_se"]))
        curves.append((yv, res))
    header = ("sweep", "value", "y", "rho", "mc_se")
    return {"rho_curve.csv": (header, rows)}, {"sweep": p["sweep"], "curves": curves}


def _rho_surface(p, seed, workers):
    grid = _grid(p)
    design = _design(p, _xi(p, p["xi1"], p["xi2"]))
    yv = p["y_values"]
    tables, surfaces = {}, []
    for k, dist in enumerate(p["distances"]):
        i, j, achieved = pair_at_distance(grid, dist)
        rho, se = rho_surface(grid, (i, j), yv, yv, design, _signal(p), p["J"], seed, workers)
        rows = [
            (dist, achieved, i, j, a, b, rho[u, v], se[u, v])
            for u, a in enumerate(yv)
            for v, b in enumerate(yv)
        ]
        header = ("distance", "achieved_distance", "cell1", "cell2", "y1", "y2", "rho", "mc_se")
        tables[f"rho_surface_{k}.csv"] = (header, rows)
        surfaces.append((dist, achieved, rho))
    return tables, {"y_values": yv, "surfaces": surfaces}


def _variogram_study(p, seed, workers):
    cfg = BiasStudyConfig(
        resolution=p["resolution"], theta1=p["theta1"], theta2=p["theta2"], n=p["n"], M=p["M"],
        designs=tuple(StudyDesign(d["name"], d["xi1"], d["xi2"]) for d in p["designs"]),
        eps_deviation=p["eps_deviation"], eps_scale=p["eps_scale"],
        target_intensity=p["target_intensity"], n_bins=p["n_bins"], field_mode=p["field_mode"],
        weights=p["weights"], hist_bins=p["hist_bins"], seed=seed,
    )
    rep = naive_bias_study(cfg)
    h = rep.bin_centers
    vrows, srows, drows = [], [], []
    values = rep.population_values
    edges = np.linspace(values.min(), values.max(), cfg.hist_bins + 1)
    pop_density, _ = np.histogram(values, edges, density=True)
    for b in range(cfg.hist_bins):
        drows.append(("population", b, edges[b], edges[b + 1], pop_density[b]))
    for d in rep.designs:
        zp, zf, ze = d.z_scores("pooled"), d.z_scores("fitted"), d.z_scores("empirical")
        fm, fse = d.fitted_deviation
        em, ese = d.empirical_deviation
        for b in range(h.size):
            vrows.append((
                d.name, b, h[b], rep.population_empirical[b], rep.population_fitted[b],
                np.nanmean(d.empirical[:, b]), d.mean_fitted[b], d.pooled_fitted[b],
                d.pooled_reference[b], d.pooled_se[b], zp[b], zf[b], ze[b],
            ))
        dens, _ = np.histogram(np.clip(d.sample_values, edges[0], edges[-1]), edges, density=True)
        for b in range(cfg.hist_bins):
            drows.append((d.name, b, edges[b], edges[b + 1], dens[b]))
        worst = float(np.nanmax(np.abs(zp)))
        srows.append((
            d.name, d.xi.xi0, d.xi.xi1, d.xi.xi2, d.correlation, d.converged.mean(),
            d.sample_values.mean(), worst, worst > 3.0,
        ))
    tables = {
        "variogram_mean.csv": ((
            "design", "bin", "h", "population_empirical", "population_fitted", "mean_empirical",
            "mean_fitted", "pooled_fitted", "pooled_reference", "pooled_se", "z_pooled",
            "z_fitted", "z_empirical",
        ), vrows),
        "density_summary.csv": (("design", "bin", "left", "right", "density"), drows),
        "designs.csv": ((
            "design", "xi0", "xi1", "xi2", "cor_yz", "converged_rate", "mean_sampled_y",
            "max_abs_z", "biased",
        ), srows),
    }
    return tables, {"report": rep, "edges": edges, "pop_density": pop_density}


def _properties_check(p, seed, workers):
    grid = _grid(p)
    design = _design(p, _xi(p, p["xi1"], p["xi2"]))
    rows = rho_property_suite(design, _signal(p), grid, seed, J=p["J"], workers=workers)
    keys = ("check", "parameter", "value", "rho", "mc_se", "passed", "asserted", "note")
    return {"properties.csv": (keys, [tuple(r[k] for k in keys) for r in rows])}, None


def _distinct_sample(z, n, seed):
    """First bpp draw (by replication index) whose n cells are all distinct."""
    for index in range(1000):
        s = draw_bpp(z, n, seed, index)
        if np.unique(s.draws).size == n:
            return s, index
    raise InvalidArgument("could not draw a sample of distinct cells; lower n")


def _likelihood_profile(p, seed, workers):
    grid = _grid(p)
    pts = grid.points
    truth = _signal(p)
    xi0 = p["xi0"]
    if xi0 is None:
        xi0 = calibrate_xi0(p["xi1"], p["xi2"], p["theta1"], p["eps_deviation"], p["target_intensity"])
    xi = _xi(p, p["xi1"], p["xi2"], xi0)
    design = _design(p, xi)
    # data streams use their own tags so they never coincide with the MC streams
    y = sampler_for(truth, grid).batch(seed, "data-signal", 0, 1)[0]
    e = sampler_for(xi.noise_spec, grid).batch(seed, "data-noise", 0, 1)[0]
    z = make_design_variable(y, e, xi)
    if p["family"] == "bpp":
        s, attempt = _distinct_sample(z, p["n"], seed)
    else:
        s, attempt = draw_ppp(z, seed, 0), 0
        if s.size < 3 or np.unique(s.draws).size != s.size:
            raise InvalidArgument("ppp draw has fewer than 3 or repeated cells; change the seed")
        design = DesignSpec("ppp", None, xi)
    x = s.draws
    yx = y[x]
    rows = []
    for t1 in p["theta1_values"]:
        for t2 in p["theta2_values"]:
            ev = full_loglik(CovariogramModel(t1, t2), xi, x, yx, design, grid, p["J"], seed, workers=workers)
            rows.append((
                t1, t2, ev.naive, ev.log_rho, ev.log_rho_se, ev.log_sample_density,
                ev.log_sample_density_se, ev.full, ev.full_se,
            ))
    mle = naive_mle(pts[x], yx)
    sample_rows = [(i, c, pts[c, 0], pts[c, 1], yx[i], z[c]) for i, c in enumerate(x)]
    tables = {
        "likelihood_profile.csv": ((
            "theta1", "theta2", "naive", "log_rho", "log_rho_se", "log_sample_density",
            "log_sample_density_se", "full", "full_se",
        ), rows),
        "sample.csv": (("draw", "cell", "x1", "x2", "y", "z"), sample_rows),
        "naive_mle.csv": (
            ("theta1", "theta2", "negative_loglik", "converged", "sample_attempt"),
            [(mle.model.deviation, mle.model.scale, mle.objective, mle.converged, attempt)],
        ),
    }
    return tables, {"rows": rows, "theta1": p["theta1_values"], "theta2": p["theta2_values"]}


RUNNERS = {
    "simulate-field": _simulate_field,
    "sample-plot": _sample_plot,
    "rho-curve": _rho_curve,
    "rho-surface": _rho_surface,
    "variogram-study": _variogram_study,
    "properties-check": _properties_check,
    "likelihood-profile": _likelihood_profile,
}


def run(config, output_dir=None):
    """Run one experiment; returns the manifest dict (also written to disk).

    Raises :class:`InvalidArgument` for invalid configs and lets
    :class:`~infosel.errors.NumericalFailure` propagate.
    """
    if not isinstance(config, ExperimentConfig):
        config = from_dict(config)
    errors = validate(config)
    if errors:
        raise InvalidArgument("; ".join(errors))
    out = output_dir_for(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = config.resolved()
    tables, figure_data = RUNNERS[config.experiment](params, config.seed, config.workers)
    files = []
    for name, (header, rows) in tables.items():
        path = write_csv(out / name, header, rows)
        files.append({"path": name, "rows": len(rows), "sha256": sha256(path)})
    figures = []
    if config.figures:
        from infosel import plotting

        for path in plotting.render(config.experiment, figure_data, out):
            figures.append({"path": path.name, "sha256": sha256(path)})
    manifest = {
        "experiment": config.experiment,
        "seed": config.seed,
        "version": __version__,
        "config": config.to_dict(),
        "files": files,
        "figures": figures,
    }
    with open(out / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def verify_manifest(output_dir):
    """Names of files whose checksum no longer matches the manifest."""
    out = Path(output_dir)
    with open(out / MANIFEST) as fh:
        manifest = json.load(fh)
    entries = manifest["files"] + manifest["figures"]
    return [e["path"] for e in entries if sha256(out / e["path"]) != e["sha256"]]
