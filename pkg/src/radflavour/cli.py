"""Batch front end: phantom generation through reports and plots.

Every subcommand reads one JSON config, writes its artifacts plus a
``run.json`` provenance record into ``--out``, and is deterministic
for a given (config, seed).  Schema problems exit with code 2 and a
path-qualified message; domain failures exit 1.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from types import SimpleNamespace

import numpy as np
import scipy

from . import __version__
from .core import DomainError, FlavourKey, Unit
from .features import ALL_FEATURES, ExtractConfig, extract_many
from .io import FeatureTable, FormatError
from .ml import (AnovaStage, Dataset, EnsembleModel, FoldPlan, LdaModel,
                 LogregModel, MajorityModel, MetricsReport, Pipeline,
                 PolyStage, PruneStage, RandomForestModel, SfsStage,
                 SmoteStage, ZScaler, balanced_accuracy,
                 corrected_resampled_ttest, cross_validate, mcnemar)
from .phantom import (ClassTexture, PhantomSpec, gen_classification_cohort,
                      gen_pet_ct_pair, gen_test_retest, read_cohort,
                      write_cohort)
from .plot import pr_svg, roc_svg, write_svg
from .tensor import (assemble, enumerate_flavour_combinations, load_tensor,
                     save_tensor, slice_concat, tr_repeatability_report)
from .trnet import TrNetConfig, TrNetModel, random_search, save_checkpoint


class SchemaError(Exception):
    """Config or input-file schema violation (exit code 2)."""


# ---------------------------------------------------------------- schema

_TYPE_NAMES = {str: "string", int: "integer", float: "number",
               list: "array", dict: "object", bool: "boolean"}


def _typecheck(value, types, path):
    if types is None:
        return value
    if not isinstance(types, tuple):
        types = (types,)
    if int in types and float not in types and isinstance(value, bool):
        raise SchemaError(f"{path}: expected integer")
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return value
    if not isinstance(value, types):
        want = " or ".join(_TYPE_NAMES.get(t, t.__name__) for t in types)
        raise SchemaError(f"{path}: expected {want}")
    return value


def _req(cfg, key, path, types=None):
    if not isinstance(cfg, dict):
        raise SchemaError(f"{path}: expected object")
    if key not in cfg:
        raise SchemaError(f"{path}.{key}: required field missing")
    return _typecheck(cfg[key], types, f"{path}.{key}")


def _opt(cfg, key, default, path, types=None):
    if key not in cfg:
        return default
    return _typecheck(cfg[key], types, f"{path}.{key}")


def _reject_unknown(cfg, known, path):
    for key in cfg:
        if key not in known:
            raise SchemaError(f"{path}.{key}: unknown field")


def _existing_file(path_value, path):
    if not isinstance(path_value, str):
        raise SchemaError(f"{path}: expected string path")
    if not os.path.isfile(path_value):
        raise SchemaError(f"{path}: file not found: {path_value}")
    return path_value


# ---------------------------------------------------------------- output

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_predictions(path, case_ids, fold_of, y_true, y_pred,
                       y_proba) -> None:
    rows = [(cid, int(f), int(t), int(p), float(s))
            for cid, f, t, p, s in zip(case_ids, fold_of, y_true, y_pred,
                                       y_proba)]
    _write_csv(path, ("case_id", "fold", "y_true", "y_pred", "y_proba"),
               rows)


def _read_predictions(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != "case_id,fold,y_true,y_pred,y_proba":
        raise SchemaError(f"{path}: not a predictions CSV "
                          "(expected header case_id,fold,y_true,y_pred,y_proba)")
    recs = {}
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 5:
            raise SchemaError(f"{path}:{i}: expected 5 columns")
        cid, fold, yt, yp, ys = parts
        recs[cid] = (int(fold), int(yt), int(yp), float(ys))
    cids = sorted(recs)
    return (cids,
            np.array([recs[c][0] for c in cids]),
            np.array([recs[c][1] for c in cids]),
            np.array([recs[c][2] for c in cids]),
            np.array([recs[c][3] for c in cids]))


# ---------------------------------------------------------------- phantom

_TEXTURE_FIELDS = ("base", "coarse_sigma_mm", "coarse_amp",
                   "fine_sigma_mm", "fine_amp")


def _parse_texture(d, path) -> ClassTexture:
    _typecheck(d, dict, path)
    _reject_unknown(d, _TEXTURE_FIELDS, path)
    kwargs = {k: _typecheck(d[k], (int, float), f"{path}.{k}")
              for k in d}
    return ClassTexture(**{k: float(v) for k, v in kwargs.items()})


def _parse_spec(d, path, seed_override) -> PhantomSpec:
    _typecheck(d, dict, path)
    known = ("n_cases", "dims", "spacing", "radius_range", "class_a",
             "class_b", "noise_sigma", "cases_per_patient",
             "pet_hotspot_amp", "pet_sigma_mm", "seed")
    _reject_unknown(d, known, path)
    kwargs = {}
    if "n_cases" in d:
        kwargs["n_cases"] = _typecheck(d["n_cases"], int, f"{path}.n_cases")
    for key, length in (("dims", 3), ("spacing", 3), ("radius_range", 2),
                        ("pet_hotspot_amp", 2)):
        if key in d:
            val = _typecheck(d[key], list, f"{path}.{key}")
            if len(val) != length:
                raise SchemaError(f"{path}.{key}: expected {length} entries")
            for i, v in enumerate(val):
                _typecheck(v, (int, float), f"{path}.{key}[{i}]")
            kwargs[key] = tuple(int(v) if key == "dims" else float(v)
                                for v in val)
    for key in ("noise_sigma", "pet_sigma_mm"):
        if key in d:
            kwargs[key] = float(_typecheck(d[key], (int, float),
                                           f"{path}.{key}"))
    for key in ("cases_per_patient", "seed"):
        if key in d:
            kwargs[key] = _typecheck(d[key], int, f"{path}.{key}")
    for key in ("class_a", "class_b"):
        if key in d:
            kwargs[key] = _parse_texture(d[key], f"{path}.{key}")
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return PhantomSpec(**kwargs)


def cmd_phantom(cfg, out, threads):
    _reject_unknown(cfg, ("kind", "spec", "seed"), "config")
    kind = _req(cfg, "kind", "config", str)
    if kind not in ("classification", "test_retest", "pet_ct"):
        raise SchemaError(
            f"config.kind: unknown phantom kind {kind!r} (expected "
            "classification, test_retest or pet_ct)")
    spec = _parse_spec(cfg.get("spec", {}), "config.spec", cfg.get("seed"))
    outputs = []
    if kind == "classification":
        outputs.append(write_cohort(gen_classification_cohort(spec),
                                    os.path.join(out, "cohort")))
    elif kind == "pet_ct":
        outputs.append(write_cohort(gen_pet_ct_pair(spec),
                                    os.path.join(out, "cohort")))
    else:
        test, retest = gen_test_retest(spec)
        outputs.append(write_cohort(test, os.path.join(out, "test")))
        outputs.append(write_cohort(retest, os.path.join(out, "retest")))
    return outputs


# ---------------------------------------------------------------- extract

def _parse_flavours(items, path):
    flavours = []
    for i, text in enumerate(items):
        _typecheck(text, str, f"{path}[{i}]")
        try:
            flavours.append(FlavourKey.parse(text))
        except DomainError as e:
            raise SchemaError(f"{path}[{i}]: {e}") from None
    if not flavours:
        raise SchemaError(f"{path}: need at least one flavour")
    if len(set(flavours)) != len(flavours):
        raise SchemaError(f"{path}: duplicate flavours")
    return flavours


def _parse_extract_config(d, path) -> ExtractConfig:
    _typecheck(d, dict, path)
    known = ("scheme", "param", "primary_unit", "fusion_units",
             "min_roi_voxels")
    _reject_unknown(d, known, path)
    kwargs = {}
    if "scheme" in d:
        scheme = _typecheck(d["scheme"], str, f"{path}.scheme")
        if scheme not in ("fbw", "fbc"):
            raise SchemaError(f"{path}.scheme: expected fbw or fbc")
        kwargs["scheme"] = scheme
    if "param" in d:
        kwargs["param"] = float(_typecheck(d["param"], (int, float),
                                           f"{path}.param"))
    if "min_roi_voxels" in d:
        kwargs["min_roi_voxels"] = _typecheck(d["min_roi_voxels"], int,
                                              f"{path}.min_roi_voxels")
    if "primary_unit" in d:
        kwargs["primary_unit"] = _parse_unit(d["primary_unit"],
                                             f"{path}.primary_unit")
    if "fusion_units" in d:
        val = _typecheck(d["fusion_units"], list, f"{path}.fusion_units")
        if len(val) != 2:
            raise SchemaError(f"{path}.fusion_units: expected 2 entries")
        kwargs["fusion_units"] = tuple(
            _parse_unit(v, f"{path}.fusion_units[{i}]")
            for i, v in enumerate(val))
    return ExtractConfig(**kwargs)


def _parse_unit(value, path) -> Unit:
    _typecheck(value, str, path)
    try:
        return Unit(value)
    except ValueError:
        raise SchemaError(
            f"{path}: unknown unit {value!r} (expected "
            f"{', '.join(u.value for u in Unit)})") from None


def cmd_extract(cfg, out, threads):
    _reject_unknown(cfg, ("manifest", "flavours", "extract", "seed"),
                    "config")
    manifest = _existing_file(_req(cfg, "manifest", "config", str),
                              "config.manifest")
    flavours = _parse_flavours(_req(cfg, "flavours", "config", list),
                               "config.flavours")
    econf = _parse_extract_config(cfg.get("extract", {}), "config.extract")
    cases = read_cohort(manifest)

    def work(case):
        return extract_many(case, flavours, econf)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cases))
    else:
        results = [work(c) for c in cases]

    table = FeatureTable(ALL_FEATURES)
    for case, vectors in zip(cases, results):
        for flavour in flavours:
            fv = vectors[flavour]
            if fv.diagnostic:
                warnings.warn(
                    f"case {case.case_id}, flavour {flavour}: "
                    f"{fv.diagnostic}", stacklevel=2)
            table.set_row(case.case_id, flavour.canonical, fv.as_list())
    path = os.path.join(out, "features.csv")
    table.to_csv(path)
    return [path]


# ---------------------------------------------------------------- tensor

def cmd_tensor(cfg, out, threads):
    _reject_unknown(cfg, ("tables", "manifest", "seed"), "config")
    table_paths = _req(cfg, "tables", "config", list)
    if not table_paths:
        raise SchemaError("config.tables: need at least one table")
    tables = []
    for i, p in enumerate(table_paths):
        _existing_file(p, f"config.tables[{i}]")
        tables.append(FeatureTable.from_csv(p))
    labels = groups = None
    if "manifest" in cfg:
        manifest = _existing_file(cfg["manifest"], "config.manifest")
        cohort = read_cohort(manifest)
        labels = {c.case_id: c.label for c in cohort}
        groups = {c.case_id: c.patient_id for c in cohort}
        if any(v is None for v in labels.values()):
            labels = None
    tensor = assemble(tables, labels=labels, groups=groups)
    path = os.path.join(out, "tensor.json")
    save_tensor(tensor, path)
    return [path]


# ---------------------------------------------------------------- icc

def cmd_icc(cfg, out, threads):
    _reject_unknown(cfg, ("test_tensor", "retest_tensor", "variant", "seed"),
                    "config")
    test = load_tensor(_existing_file(
        _req(cfg, "test_tensor", "config", str), "config.test_tensor"))
    retest = load_tensor(_existing_file(
        _req(cfg, "retest_tensor", "config", str), "config.retest_tensor"))
    variant = _opt(cfg, "variant", "1,1", "config", str)
    if variant not in ("1,1", "3,1"):
        raise SchemaError('config.variant: expected "1,1" or "3,1"')
    report = tr_repeatability_report(test, retest, variant)

    json_path = os.path.join(out, "icc_report.json")
    _write_json(json_path, report.to_json_dict())

    header = ["feature"] + [fl.canonical for fl in report.flavours] \
        + ["aggregated"]
    rows = []
    for feat in report.features:
        per = report.per_flavour[feat]
        row = [feat] + [per[fl.canonical].value for fl in report.flavours]
        row.append(report.aggregated[feat].value)
        rows.append(row)
    csv_path = os.path.join(out, "icc_values.csv")
    _write_csv(csv_path, header, rows)

    bands_path = os.path.join(out, "icc_band_counts.csv")
    agg = report.band_counts("aggregated")
    per = report.band_counts("per_flavour")
    _write_csv(bands_path, ("band", "per_flavour", "aggregated"),
               [(band, per[band], agg[band]) for band in
                ("low", "medium", "high", "excellent", "missing")])
    return [json_path, csv_path, bands_path]


# ---------------------------------------------------------------- trainml

_CV_FIELDS = ("n_splits", "kind", "seed")


def _parse_plan(d, path, seed_override) -> FoldPlan:
    _typecheck(d, dict, path)
    _reject_unknown(d, _CV_FIELDS, path)
    n_splits = _opt(d, "n_splits", 5, path, int)
    kind = _opt(d, "kind", "stratified", path, str)
    if kind not in ("stratified", "grouped"):
        raise SchemaError(f"{path}.kind: expected stratified or grouped")
    seed = _opt(d, "seed", 0, path, int)
    if seed_override is not None:
        seed = seed_override
    try:
        return FoldPlan(n_splits, kind=kind, seed=seed)
    except DomainError as e:
        raise SchemaError(f"{path}: {e}") from None


def _build_model(spec, path):
    kind = _req(spec, "kind", path, str)
    if kind == "lda":
        _reject_unknown(spec, ("kind", "ridge"), path)
        return LdaModel(ridge=float(_opt(spec, "ridge", 1e-6, path,
                                         (int, float))))
    if kind == "logreg":
        _reject_unknown(spec, ("kind", "l2"), path)
        return LogregModel(l2=float(_opt(spec, "l2", 1.0, path,
                                         (int, float))))
    if kind == "forest":
        _reject_unknown(spec, ("kind", "n_trees"), path)
        return RandomForestModel(n_trees=_opt(spec, "n_trees", 100, path,
                                              int))
    if kind == "majority":
        _reject_unknown(spec, ("kind",), path)
        return MajorityModel()
    if kind == "ensemble":
        _reject_unknown(spec, ("kind", "base", "members"), path)
        base = _build_model(_req(spec, "base", path, dict), f"{path}.base")
        return EnsembleModel(base, n_members=_opt(spec, "members", 9,
                                                  path, int))
    raise SchemaError(f"{path}.kind: unknown model kind {kind!r}")


def _build_stage(spec, path):
    kind = _req(spec, "kind", path, str)
    if kind == "zscore":
        _reject_unknown(spec, ("kind",), path)
        return ZScaler()
    if kind == "smote":
        _reject_unknown(spec, ("kind", "k"), path)
        return SmoteStage(k=_opt(spec, "k", 5, path, int))
    if kind == "prune":
        _reject_unknown(spec, ("kind", "threshold"), path)
        return PruneStage(threshold=float(_opt(spec, "threshold", 0.95,
                                               path, (int, float))))
    if kind == "poly":
        _reject_unknown(spec, ("kind", "degree"), path)
        return PolyStage(degree=_opt(spec, "degree", 2, path, int))
    if kind == "anova":
        _reject_unknown(spec, ("kind", "top_k"), path)
        return AnovaStage(top_k=_req(spec, "top_k", path, int))
    if kind == "sfs":
        _reject_unknown(spec, ("kind", "model", "k_range", "inner_splits"),
                        path)
        model = _build_model(_opt(spec, "model", {"kind": "lda"}, path,
                                  dict), f"{path}.model")
        k_range = _req(spec, "k_range", path, list)
        return SfsStage(model, k_range,
                        inner_splits=_opt(spec, "inner_splits", 5, path,
                                          int))
    return _build_model(spec, path)


def _build_pipeline(d, path) -> Pipeline:
    _typecheck(d, dict, path)
    _reject_unknown(d, ("stages",), path)
    stage_specs = _req(d, "stages", path, list)
    if not stage_specs:
        raise SchemaError(f"{path}.stages: need at least one stage")
    steps = []
    for i, spec in enumerate(stage_specs):
        _typecheck(spec, dict, f"{path}.stages[{i}]")
        stage = _build_stage(spec, f"{path}.stages[{i}]")
        steps.append((f"{i}_{spec['kind']}", stage))
    try:
        return Pipeline(steps)
    except DomainError as e:
        raise SchemaError(f"{path}.stages: {e}") from None


def _tensor_dataset(tensor, subset):
    matrix, names = slice_concat(tensor, subset)
    keep = ~np.isnan(matrix).any(axis=0)
    if not keep.all():
        dropped = int((~keep).sum())
        warnings.warn(f"dropping {dropped} incomplete feature columns",
                      stacklevel=2)
    matrix = matrix[:, keep]
    if matrix.shape[1] == 0:
        raise DomainError("no complete feature columns to train on")
    names = [n for n, k in zip(names, keep) if k]
    if tensor.labels is None:
        raise SchemaError("tensor has no labels; assemble with a manifest")
    groups = tensor.groups if tensor.groups is not None else tensor.cases
    return Dataset(X=matrix, y=tensor.labels, groups=np.asarray(groups),
                   names=names)


def _select_flavours(tensor, cfg, path):
    if "flavours" not in cfg:
        return list(tensor.flavours)
    subset = _parse_flavours(_typecheck(cfg["flavours"], list, path), path)
    for fl in subset:
        tensor.flavour_index(fl)
    return subset


def cmd_trainml(cfg, out, threads):
    _reject_unknown(cfg, ("tensor", "mode", "pipeline", "cv", "flavours",
                          "audit", "sweep", "seed"), "config")
    mode = _opt(cfg, "mode", "single", "config", str)
    if mode not in ("single", "sweep"):
        raise SchemaError("config.mode: expected single or sweep")
    tensor = load_tensor(_existing_file(
        _req(cfg, "tensor", "config", str), "config.tensor"))
    pipeline = _build_pipeline(
        _opt(cfg, "pipeline", {"stages": [{"kind": "zscore"},
                                          {"kind": "lda"}]},
             "config", dict), "config.pipeline")
    plan = _parse_plan(cfg.get("cv", {}), "config.cv", cfg.get("seed"))
    subset = _select_flavours(tensor, cfg, "config.flavours")

    if mode == "single":
        ds = _tensor_dataset(tensor, subset)
        report = cross_validate(pipeline, ds, plan,
                                audit=_opt(cfg, "audit", False, "config",
                                           bool))
        metrics_path = os.path.join(out, "metrics.json")
        _write_json(metrics_path, report.to_json_dict())
        pred_path = os.path.join(out, "predictions.csv")
        _write_predictions(pred_path, tensor.cases, report.fold_of,
                           ds.y, report.oof_pred, report.oof_proba)
        return [metrics_path, pred_path]

    sweep_cfg = _opt(cfg, "sweep", {}, "config", dict)
    _reject_unknown(sweep_cfg, ("min_size", "include_singles", "top_n"),
                    "config.sweep")
    min_size = _opt(sweep_cfg, "min_size", 2, "config.sweep", int)
    include_singles = _opt(sweep_cfg, "include_singles", True,
                           "config.sweep", bool)
    top_n = _opt(sweep_cfg, "top_n", 0, "config.sweep", int)
    combos = []
    if include_singles:
        combos.extend((fl,) for fl in subset)
    combos.extend(enumerate_flavour_combinations(subset, min_size=min_size))
    rows = []
    for combo in combos:
        ds = _tensor_dataset(tensor, list(combo))
        report = cross_validate(pipeline, ds, plan)
        rows.append(("+".join(fl.canonical for fl in combo), len(combo),
                     report.mean("balanced_accuracy"),
                     report.std("balanced_accuracy"),
                     report.mean("f1")))
    rows.sort(key=lambda r: (-r[2], r[0]))
    if top_n > 0:
        rows = rows[:top_n]
    sweep_path = os.path.join(out, "sweep.csv")
    _write_csv(sweep_path,
               ("flavours", "n_flavours", "mean_balanced_accuracy",
                "std_balanced_accuracy", "mean_f1"), rows)
    return [sweep_path]


# ---------------------------------------------------------------- trainnet

def _blocks_from_tensor(tensor, subset):
    blocks = []
    for fl in subset:
        k = tensor.flavour_index(fl)
        block = tensor.values[:, :, k]
        keep = ~np.isnan(block).any(axis=0)
        if not keep.all():
            warnings.warn(
                f"flavour {fl}: dropping {int((~keep).sum())} incomplete "
                "features", stacklevel=2)
        if not keep.any():
            raise DomainError(f"flavour {fl} has no complete features")
        blocks.append((fl.canonical, block[:, keep]))
    return blocks


def _parse_net(d, path, seed_override) -> TrNetConfig:
    _typecheck(d, dict, path)
    known = ("leg_sizes", "body_sizes", "dropout", "lr", "epochs",
             "batch_size", "seed")
    _reject_unknown(d, known, path)
    kwargs = {}
    for key in ("leg_sizes", "body_sizes"):
        if key in d:
            val = _typecheck(d[key], list, f"{path}.{key}")
            kwargs[key] = tuple(
                tuple(v) if isinstance(v, list) else int(v) for v in val)
    for key in ("dropout", "lr"):
        if key in d:
            kwargs[key] = float(_typecheck(d[key], (int, float),
                                           f"{path}.{key}"))
    for key in ("epochs", "batch_size", "seed"):
        if key in d:
            kwargs[key] = _typecheck(d[key], int, f"{path}.{key}")
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return TrNetConfig(**kwargs)
    except DomainError as e:
        raise SchemaError(f"{path}: {e}") from None


def _scaled_blocks(blocks, fit_rows, apply_rows):
    out = []
    for name, x in blocks:
        scaler = ZScaler().fit(x[fit_rows])
        out.append((name, scaler.transform(x[apply_rows])))
    return out


def cmd_trainnet(cfg, out, threads):
    _reject_unknown(cfg, ("tensor", "net", "search", "cv", "flavours",
                          "seed"), "config")
    tensor = load_tensor(_existing_file(
        _req(cfg, "tensor", "config", str), "config.tensor"))
    if tensor.labels is None:
        raise SchemaError("tensor has no labels; assemble with a manifest")
    plan = _parse_plan(cfg.get("cv", {}), "config.cv", cfg.get("seed"))
    subset = _select_flavours(tensor, cfg, "config.flavours")
    blocks = _blocks_from_tensor(tensor, subset)
    y = np.asarray(tensor.labels)
    groups = np.asarray(tensor.groups if tensor.groups is not None
                        else tensor.cases)
    outputs = []

    if "search" in cfg and "net" in cfg:
        raise SchemaError("config: give either net or search, not both")
    if "search" in cfg:
        sd = _typecheck(cfg["search"], dict, "config.search")
        _reject_unknown(sd, ("space", "budget", "inner_splits"),
                        "config.search")
        space = _req(sd, "space", "config.search", dict)
        parsed = {}
        for key, vals in space.items():
            vals = _typecheck(vals, list, f"config.search.space.{key}")
            if key in ("leg_sizes", "body_sizes"):
                parsed[key] = [
                    tuple(tuple(x) if isinstance(x, list) else int(x)
                          for x in v) for v in vals]
            else:
                parsed[key] = vals
        inner = FoldPlan(_opt(sd, "inner_splits", 3, "config.search", int),
                         kind=plan.kind, seed=plan.seed + 1)
        try:
            best, trials = random_search(
                parsed, blocks, y, inner,
                budget=_req(sd, "budget", "config.search", int),
                groups=groups, seed=plan.seed)
        except DomainError as e:
            raise SchemaError(f"config.search: {e}") from None
        net_cfg = best
        search_path = os.path.join(out, "search.json")
        _write_json(search_path,
                    {"best": best.to_json_dict(),
                     "trials": [{"config": c.to_json_dict(), "score": s}
                                for c, s in trials]})
        outputs.append(search_path)
    else:
        net_cfg = _parse_net(_opt(cfg, "net", {}, "config", dict),
                             "config.net", cfg.get("seed"))

    n = len(y)
    oof_pred = np.full(n, -1, dtype=np.int64)
    oof_proba = np.full(n, np.nan)
    fold_of = plan.assignments(y, groups)
    fold_metrics = []
    for f in range(plan.n_splits):
        te = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        model = TrNetModel(net_cfg)
        model.fit(_scaled_blocks(blocks, tr, tr), y[tr])
        proba = model.predict_proba(_scaled_blocks(blocks, tr, te))
        pred = (proba >= 0.5).astype(np.int64)
        oof_pred[te] = pred
        oof_proba[te] = proba
        fold_metrics.append(MetricsReport.from_predictions(y[te], pred,
                                                           proba))
    pooled = MetricsReport.from_predictions(y, oof_pred, oof_proba,
                                            curves=True)
    metrics_path = os.path.join(out, "metrics.json")
    _write_json(metrics_path, {
        "folds": [m.to_json_dict() for m in fold_metrics],
        "pooled": pooled.to_json_dict(),
        "config": net_cfg.to_json_dict()})
    pred_path = os.path.join(out, "predictions.csv")
    _write_predictions(pred_path, tensor.cases, fold_of, y, oof_pred,
                       oof_proba)

    all_rows = np.arange(n)
    final = TrNetModel(net_cfg)
    final.fit(_scaled_blocks(blocks, all_rows, all_rows), y)
    ck_path = os.path.join(out, "trnet.json")
    save_checkpoint(final, ck_path)
    outputs.extend([metrics_path, pred_path, ck_path])
    return outputs


# ---------------------------------------------------------------- stats

def cmd_stats(cfg, out, threads):
    _reject_unknown(cfg, ("predictions", "n_train", "n_test", "seed"),
                    "config")
    entries = _req(cfg, "predictions", "config", list)
    if len(entries) < 2:
        raise SchemaError("config.predictions: need at least two entries")
    models = []
    for i, entry in enumerate(entries):
        path = f"config.predictions[{i}]"
        _typecheck(entry, dict, path)
        _reject_unknown(entry, ("label", "path"), path)
        label = _req(entry, "label", path, str)
        fpath = _existing_file(_req(entry, "path", path, str),
                               f"{path}.path")
        models.append((label, _read_predictions(fpath)))
    labels = [m[0] for m in models]
    if len(set(labels)) != len(labels):
        raise SchemaError("config.predictions: duplicate labels")
    base_cids = models[0][1][0]
    base_y = models[0][1][2]
    for label, (cids, _, yt, _, _) in models[1:]:
        if cids != base_cids:
            raise SchemaError(
                f"predictions for {label!r} cover different case ids")
        if not np.array_equal(yt, base_y):
            raise SchemaError(
                f"predictions for {label!r} disagree on true labels")

    mc_stat = {}
    for i, (la, (_, _, y, pa, _)) in enumerate(models):
        for j, (lb, (_, _, _, pb, _)) in enumerate(models):
            if i < j:
                r = mcnemar(pa, pb, y)
                mc_stat[(la, lb)] = r
    header = ["model"] + labels
    rows = []
    for la in labels:
        row = [la]
        for lb in labels:
            if la == lb:
                row.append(None)
            else:
                r = mc_stat.get((la, lb)) or mc_stat.get((lb, la))
                row.append(r.p_value)
        rows.append(row)
    mc_path = os.path.join(out, "mcnemar_matrix.csv")
    _write_csv(mc_path, header, rows)

    k_set = set()
    fold_scores = {}
    for label, (cids, fold, y, pred, _) in models:
        ks = sorted(set(int(f) for f in fold))
        k_set.add(tuple(ks))
        scores = []
        for f in ks:
            sel = fold == f
            scores.append(balanced_accuracy(y[sel], pred[sel]))
        fold_scores[label] = np.array(scores)
    tt_rows = []
    tt_json = []
    if len(k_set) == 1:
        k = len(next(iter(k_set)))
        n_cases = len(base_cids)
        n_test = _opt(cfg, "n_test", max(1, round(n_cases / k)), "config",
                      int)
        n_train = _opt(cfg, "n_train", n_cases - n_test, "config", int)
        for i, la in enumerate(labels):
            for lb in labels[i + 1:]:
                r = corrected_resampled_ttest(fold_scores[la],
                                              fold_scores[lb],
                                              n_train, n_test)
                tt_rows.append((la, lb, r.mean_diff, r.t, r.p_value,
                                r.t_plain, r.p_plain))
                tt_json.append({"model_a": la, "model_b": lb,
                                **r.to_json_dict()})
    else:
        warnings.warn("prediction files use different fold counts; "
                      "skipping corrected t-tests", stacklevel=2)
    tt_path = os.path.join(out, "ttest.csv")
    _write_csv(tt_path, ("model_a", "model_b", "mean_diff", "t_corrected",
                         "p_corrected", "t_plain", "p_plain"), tt_rows)

    json_path = os.path.join(out, "stats.json")
    _write_json(json_path, {
        "mcnemar": [{"model_a": la, "model_b": lb, **r.to_json_dict()}
                    for (la, lb), r in sorted(mc_stat.items())],
        "ttests": tt_json})
    return [mc_path, tt_path, json_path]


# ---------------------------------------------------------------- plot

def _report_shim(doc, path):
    source = doc.get("pooled", doc)
    if "roc" not in source or "pr" not in source:
        raise SchemaError(
            f"{path}: no curve points found (run trainml/trainnet first)")
    return SimpleNamespace(
        roc=[tuple(p) for p in source["roc"]],
        pr=[tuple(p) for p in source["pr"]],
        roc_auc=source.get("roc_auc"),
        average_precision=source.get("average_precision"))


def cmd_plot(cfg, out, threads):
    _reject_unknown(cfg, ("reports", "kind", "seed"), "config")
    entries = _req(cfg, "reports", "config", list)
    if not entries:
        raise SchemaError("config.reports: need at least one report")
    kind = _opt(cfg, "kind", "both", "config", str)
    if kind not in ("roc", "pr", "both"):
        raise SchemaError("config.kind: expected roc, pr or both")
    labelled = []
    for i, entry in enumerate(entries):
        path = f"config.reports[{i}]"
        _typecheck(entry, dict, path)
        _reject_unknown(entry, ("label", "path"), path)
        label = _req(entry, "label", path, str)
        fpath = _existing_file(_req(entry, "path", path, str),
                               f"{path}.path")
        with open(fpath) as fh:
            doc = json.load(fh)
        labelled.append((label, _report_shim(doc, f"{path}.path")))
    outputs = []
    if kind in ("roc", "both"):
        p = os.path.join(out, "roc.svg")
        write_svg(roc_svg(labelled), p)
        outputs.append(p)
    if kind in ("pr", "both"):
        p = os.path.join(out, "pr.svg")
        write_svg(pr_svg(labelled), p)
        outputs.append(p)
    return outputs


# ---------------------------------------------------------------- driver

_HANDLERS = {
    "phantom": cmd_phantom,
    "extract": cmd_extract,
    "tensor": cmd_tensor,
    "icc": cmd_icc,
    "trainml": cmd_trainml,
    "trainnet": cmd_trainnet,
    "stats": cmd_stats,
    "plot": cmd_plot,
}


def _write_run(out, command, config_bytes, seed, outputs) -> None:
    rel = []
    for p in outputs:
        try:
            rel.append(os.path.relpath(p, out))
        except ValueError:
            rel.append(p)
    _write_json(os.path.join(out, "run.json"), {
        "subcommand": command,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "seed": seed,
        "versions": {
            "radflavour": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": sorted(rel),
    })


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radflavour",
        description="Flavoured radiomics: phantoms, extraction, tensors, "
                    "repeatability, classification, and plots.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("phantom", "generate a synthetic cohort"),
            ("extract", "compute features for a cohort under a flavour grid"),
            ("tensor", "assemble feature tables into a tensor archive"),
            ("icc", "test-retest repeatability report"),
            ("trainml", "cross-validated classical pipeline or flavour sweep"),
            ("trainnet", "train or search the flavour-fusion network"),
            ("stats", "McNemar and corrected t-test comparisons"),
            ("plot", "render ROC/PR curves as SVG")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True,
                       help="path to the JSON config for this run")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker pool size (never changes outputs)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    args = parser.parse_args(argv)

    try:
        try:
            with open(args.config, "rb") as fh:
                config_bytes = fh.read()
        except OSError as e:
            raise SchemaError(f"{args.config}: {e.strerror}") from None
        try:
            cfg = json.loads(config_bytes)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{args.config}: invalid JSON: {e}") from None
        if not isinstance(cfg, dict):
            raise SchemaError(f"{args.config}: top level must be an object")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.threads < 1:
            raise SchemaError("--threads: must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            outputs = _HANDLERS[args.command](cfg, args.out, args.threads)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        _write_run(args.out, args.command, config_bytes,
                   cfg.get("seed"), outputs)
    except (SchemaError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
