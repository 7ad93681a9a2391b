"""
End-to-end pipeline: corpus extraction, model fitting, indexing, querying
and evaluation.

The cmd_* functions back the command-line subcommands. They return summary
dicts and raise CbirError subclasses; printing and exit codes belong to
app.py.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from src import artifacts, report_generator, svm
from src.errors import (CbirError, ConfigError, DataError, EmptyTestSet, MissingFile,
                        NonFiniteFeature)
from src.gabor import GaborParams, build_bank, extract_grf_grbf
from src.imaging import GrayImage, load_image, normalize_input, write_pgm
from src.irma import build_alphabets, irma_error, load_manifest, parse_irma, total_error
from src.radon import Sinogram, radon_barcode, radon_transform
from src.retrieval import build_index, query, query_global
from utils import bit_utils
from utils.constants import SWEEP_BANKS, SWEEP_PROJECTIONS

logger = logging.getLogger(__name__)

EVAL_MODES = ("two-stage", "barcode-only")
DETAIL_COLUMNS = ["query_id", "truth", "predicted_class", "retrieved_id", "retrieved_code",
                  "distance", "error", "mode"]


# ============================================================================
# PER-IMAGE DESCRIPTION
# ============================================================================

@dataclass(frozen=True, eq=False)
class ImageDescriptor:
    grf: np.ndarray  # float32
    grbf: np.ndarray  # uint8 bits
    rbc: np.ndarray  # uint8 bits
    sinogram: Sinogram = None


def describe_image(img: GrayImage, config, bank) -> ImageDescriptor:
    """
    Normalize an image and compute all three descriptors from one sinogram

    Args:
        img: Image at any size
        config: PipelineConfig
        bank: GaborBank built from config

    Returns:
        ImageDescriptor
    """
    img = normalize_input(img, config.image_side)
    sino = radon_transform(img, config.n_angles)
    features, barcode = extract_grf_grbf(img, bank, config.n_angles, config.d1, config.d2,
                                         config.sinogram_side, sino=sino)
    grf = features.values.astype(np.float32)
    if not np.all(np.isfinite(grf)):
        raise NonFiniteFeature("feature vector contains non-finite values")
    rbc = radon_barcode(sino, config.rbc_bits)
    return ImageDescriptor(grf=grf, grbf=barcode.bits, rbc=rbc.bits, sinogram=sino)


def _extract_one(image_id, source, config, bank, dump_dir):
    try:
        img = source if isinstance(source, GrayImage) else load_image(source)
        desc = describe_image(img, config, bank)
    except (CbirError, OSError) as e:
        return image_id, None, str(e)
    if dump_dir is not None:
        write_pgm(Path(dump_dir) / f"{image_id}.pgm", desc.sinogram.data)
    # Drop the sinogram before it is shipped back from a worker
    return image_id, ImageDescriptor(desc.grf, desc.grbf, desc.rbc), None


# ============================================================================
# CORPUS EXTRACTION
# ============================================================================

@dataclass(frozen=True, eq=False)
class ExtractionResult:
    ids: list
    labels: list
    codes: list  # IrmaCode per record
    grf: np.ndarray  # (n, vector_dim) float32
    grbf: np.ndarray  # (n, vector_dim) uint8
    rbc: np.ndarray  # (n, rbc_dim) uint8
    failures: list = field(default_factory=list)  # (image_id, reason)
    seconds: float = 0.0

    def __len__(self):
        return len(self.ids)

    @property
    def throughput(self):
        return len(self.ids) / self.seconds if self.seconds > 0 else 0.0

    def codes_of(self, kind):
        return self.grbf if kind == "grbf" else self.rbc


def load_images(records):
    """Decode every record's image once; failures are logged and left out"""
    images = {}
    for row in records.itertuples(index=False):
        try:
            images[row.image_id] = load_image(row.path)
        except (CbirError, OSError) as e:
            logger.warning("Skipped %s: %s", row.image_id, e)
    return images


def extract_corpus(records: pd.DataFrame, config, bank=None, dump_dir=None, images=None,
                   progress=False) -> ExtractionResult:
    """
    Extract GRF, GRBF and Radon barcodes for every record

    Args:
        records: Categorized manifest rows (image_id, path, code, label)
        config: PipelineConfig
        bank: Prebuilt GaborBank; built from config if None
        dump_dir: Write each sinogram as PGM here if given
        images: Optional {image_id: GrayImage} cache used instead of reading paths
        progress: Show a progress bar

    Returns:
        ExtractionResult in manifest order; unreadable images are listed in failures
    """
    start = time.perf_counter()
    if bank is None:
        bank = build_bank(GaborParams.from_config(config))

    sources = []
    for row in records.itertuples(index=False):
        if images is not None:
            sources.append((row.image_id, images.get(row.image_id, row.path)))
        else:
            sources.append((row.image_id, row.path))

    jobs = (delayed(_extract_one)(image_id, source, config, bank, dump_dir)
            for image_id, source in sources)
    outputs = []
    if sources:
        results = Parallel(n_jobs=config.workers, return_as="generator")(jobs)
        outputs = list(tqdm(results, total=len(sources), desc="Extracting", unit="img",
                            disable=not progress))

    meta = {row.image_id: (row.label, row.code) for row in records.itertuples(index=False)}
    ids, labels, codes, grf, grbf, rbc, failures = [], [], [], [], [], [], []
    for image_id, desc, reason in outputs:
        if desc is None:
            logger.warning("Skipped %s: %s", image_id, reason)
            failures.append((image_id, reason))
            continue
        label, code = meta[image_id]
        ids.append(image_id)
        labels.append(label)
        codes.append(code)
        grf.append(desc.grf)
        grbf.append(desc.grbf)
        rbc.append(desc.rbc)

    def stack(rows, width, dtype):
        return np.vstack(rows).astype(dtype) if rows else np.zeros((0, width), dtype=dtype)

    result = ExtractionResult(
        ids=ids, labels=labels, codes=codes,
        grf=stack(grf, config.vector_dim, np.float32),
        grbf=stack(grbf, config.vector_dim, np.uint8),
        rbc=stack(rbc, config.rbc_dim, np.uint8),
        failures=failures,
        seconds=time.perf_counter() - start,
    )
    logger.info("Extracted %d images in %.2fs (%.1f img/s), %d failed",
                len(result), result.seconds, result.throughput, len(failures))
    return result


def _table_params(config):
    return {"U": config.n_scales, "V": config.n_orients, "d1": config.d1, "d2": config.d2,
            "n_angles": config.n_angles}


def feature_table(result: ExtractionResult, config) -> artifacts.FeatureTable:
    return artifacts.FeatureTable(ids=list(result.ids), matrix=result.grf,
                                  fingerprint=config.feature_fingerprint(),
                                  params=_table_params(config))


def barcode_table(result: ExtractionResult, config, kind="grbf") -> artifacts.BarcodeTable:
    bits = result.codes_of(kind)
    return artifacts.BarcodeTable(ids=list(result.ids), packed=bit_utils.pack_bits(bits),
                                  code_len=bits.shape[1],
                                  fingerprint=config.code_fingerprint(kind), kind=kind,
                                  params=_table_params(config))


# ============================================================================
# MODEL AND INDEX
# ============================================================================

def fit_model(X, labels, config, progress=False):
    """
    Train the one-against-one SVM, optionally picking C and gamma by CV first

    Returns:
        Tuple (MulticlassModel, cv_table or None)
    """
    X = np.asarray(X, dtype=np.float64)
    C, gamma, cv_table = config.C, config.effective_kernel_gamma, None
    if config.grid_search:
        C, searched_gamma, cv_table = svm.grid_search(
            X, labels, kind=config.kernel, degree=config.degree, coef0=config.coef0,
            tol=config.tol, max_passes=config.max_passes,
            feature_scaling=config.feature_scaling, folds=config.cv_folds,
            seed=config.seed, workers=config.workers)
        if config.kernel == "rbf":
            gamma = searched_gamma
        logger.info("Grid search picked C=%g gamma=%g", C, gamma)

    spec = svm.KernelSpec(kind=config.kernel, gamma=gamma, degree=config.degree,
                          coef0=config.coef0)
    model = svm.train_multiclass(X, labels, spec, C, tol=config.tol,
                                 max_passes=config.max_passes,
                                 feature_scaling=config.feature_scaling,
                                 workers=config.workers, progress=progress)
    return model, cv_table


def index_extraction(result: ExtractionResult, config, kind=None):
    kind = kind or config.barcode_kind
    bits = result.codes_of(kind)
    records = zip(result.ids, result.labels, bits)
    return build_index(records, config.code_fingerprint(kind), code_len_bits=bits.shape[1])


# ============================================================================
# EVALUATION
# ============================================================================

@dataclass(frozen=True, eq=False)
class Evaluation:
    details: pd.DataFrame  # DETAIL_COLUMNS
    confusion: pd.DataFrame  # truth x predicted counts
    accuracy: float
    total_error: float
    timings: dict
    mode: str

    @property
    def n_queries(self):
        return len(self.details)

    @property
    def mean_error(self):
        return self.total_error / self.n_queries if self.n_queries else 0.0

    @property
    def hit_rate(self):
        """Fraction of queries whose rank-1 neighbour carries the true code"""
        if not self.n_queries:
            return 0.0
        return float((self.details["truth"] == self.details["retrieved_code"]).mean())


def evaluate(model, index, queries: ExtractionResult, config, mode="two-stage", kind=None,
             progress=False) -> Evaluation:
    """
    Classify and retrieve every query, then score the retrieved codes

    Args:
        model: MulticlassModel (unused in barcode-only mode)
        index: ClassIndex over training barcodes of `kind`
        queries: Extracted test records
        config: PipelineConfig (k and error flags)
        mode: two-stage or barcode-only
        kind: grbf or rbc; defaults to config.barcode_kind
        progress: Show a progress bar

    Returns:
        Evaluation
    """
    if mode not in EVAL_MODES:
        raise ConfigError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    if len(queries) == 0:
        raise EmptyTestSet("no categorized test records to evaluate")
    kind = kind or config.barcode_kind
    codes = queries.codes_of(kind)
    fingerprint = config.code_fingerprint(kind)

    timings = {}
    start = time.perf_counter()
    predicted = None
    if mode == "two-stage":
        predicted = svm.predict_many(model, queries.grf.astype(np.float64))
    timings["classify"] = time.perf_counter() - start

    start = time.perf_counter()
    neighbors = []
    for i in tqdm(range(len(queries)), desc="Retrieving", unit="query", disable=not progress):
        if mode == "two-stage":
            hits = query(index, predicted[i], codes[i], k=config.k, fingerprint=fingerprint)
        else:
            hits = query_global(index, codes[i], k=config.k, fingerprint=fingerprint)
        neighbors.append(hits[0])
    timings["retrieve"] = time.perf_counter() - start

    if predicted is None:
        predicted = [n.label for n in neighbors]

    retrieved = [parse_irma(n.label) for n in neighbors]
    table = build_alphabets([parse_irma(label) for label in index.labels()] + list(queries.codes))
    flags = {"normalize": config.normalize, "propagate": config.propagate,
             "axis_local": config.axis_local}
    pairs = list(zip(queries.codes, retrieved))
    errors = [irma_error(t, r, table, **flags) for t, r in pairs]

    details = pd.DataFrame({
        "query_id": queries.ids,
        "truth": [c.formatted() for c in queries.codes],
        "predicted_class": [parse_irma(p).formatted() for p in predicted],
        "retrieved_id": [n.image_id for n in neighbors],
        "retrieved_code": [c.formatted() for c in retrieved],
        "distance": [n.distance for n in neighbors],
        "error": errors,
        "mode": mode,
    }, columns=DETAIL_COLUMNS)
    confusion = pd.crosstab(details["truth"], details["predicted_class"])
    accuracy = float(np.mean([p == t for p, t in zip(predicted, queries.labels)]))

    return Evaluation(details=details, confusion=confusion, accuracy=accuracy,
                      total_error=total_error(pairs, table, **flags), timings=timings,
                      mode=mode)


# ============================================================================
# COMMANDS
# ============================================================================

def _categorized(manifest_path, split):
    manifest = load_manifest(manifest_path, split)
    return manifest, manifest.categorized()


def _labels_for(ids, records):
    lookup = dict(zip(records["image_id"], records["label"]))
    missing = [i for i in ids if i not in lookup]
    if missing:
        raise DataError(f"{len(missing)} records have no categorized manifest entry, "
                        f"e.g. {missing[0]!r}")
    return [lookup[i] for i in ids]


def cmd_extract(manifest_path, config, features_out, barcodes_out, rbc_out=None,
                dump_dir=None, split="train", progress=False):
    """Extract and write feature and barcode files for a manifest"""
    manifest, records = _categorized(manifest_path, split)
    if records.empty:
        logger.warning("Manifest %s has no categorized records", manifest_path)
    result = extract_corpus(records, config, dump_dir=dump_dir, progress=progress)

    outputs = [artifacts.write_features(features_out, feature_table(result, config)),
               artifacts.write_barcodes(barcodes_out, barcode_table(result, config, "grbf"))]
    if rbc_out is not None:
        outputs.append(artifacts.write_barcodes(rbc_out, barcode_table(result, config, "rbc")))
    return {
        "records": len(manifest),
        "uncategorized": manifest.n_uncategorized,
        "extracted": len(result),
        "failures": result.failures,
        "seconds": result.seconds,
        "throughput": result.throughput,
        "vector_dim": config.vector_dim,
        "outputs": outputs,
    }


def cmd_train(features_path, manifest_path, config, model_out, progress=False):
    """Train the classifier on a feature file; the model is written only on success"""
    table = artifacts.read_features(features_path)
    artifacts.check_fingerprint(f"feature file {features_path}", config.feature_fingerprint(),
                                table.fingerprint)
    _, records = _categorized(manifest_path, "train")
    labels = _labels_for(table.ids, records)

    start = time.perf_counter()
    model, cv_table = fit_model(table.matrix, labels, config, progress=progress)
    seconds = time.perf_counter() - start
    path = artifacts.write_model(model_out, model, config.feature_fingerprint())
    return {
        "class_counts": pd.Series(labels).value_counts().sort_index(),
        "n_classes": len(model.classes),
        "n_binaries": len(model.binaries),
        "C": model.C,
        "gamma": model.kernel.gamma,
        "cv_table": pd.DataFrame(cv_table) if cv_table else None,
        "seconds": seconds,
        "outputs": [path],
    }


def cmd_build_index(barcodes_path, manifest_path, index_out, config):
    """Partition a barcode file by class and write the index"""
    table = artifacts.read_barcodes(barcodes_path)
    artifacts.check_fingerprint(f"{table.kind} barcode file {barcodes_path}",
                                config.code_fingerprint(table.kind), table.fingerprint)
    _, records = _categorized(manifest_path, "train")
    labels = _labels_for(table.ids, records)
    index = build_index(((image_id, label, table.bits(i))
                         for i, (image_id, label) in enumerate(zip(table.ids, labels))),
                        table.fingerprint, code_len_bits=table.code_len)
    path = artifacts.write_index(index_out, index)
    return {
        "kind": table.kind,
        "n_records": index.n_records,
        "n_classes": index.n_classes,
        "code_len": index.code_len_bits,
        "bucket_sizes": {label: len(b) for label, b in index.buckets.items()},
        "outputs": [path],
    }


def _load_model_and_index(model_path, index_path, config, need_model=True):
    """Read both artifacts and check their fingerprints before any computation"""
    model = None
    if need_model:
        if model_path is None:
            raise ConfigError("a model file is required in two-stage mode")
        model, model_fp = artifacts.read_model(model_path)
        artifacts.check_fingerprint(f"model {model_path}", config.feature_fingerprint(), model_fp)
    index = artifacts.read_index(index_path)
    artifacts.check_fingerprint(f"index {index_path}", config.code_fingerprint(),
                                index.fingerprint)
    return model, index


def cmd_query(image_path, model_path, index_path, config, k=None, csv_out=None,
              contact_sheet=None, train_manifest=None):
    """Classify one image and list its nearest neighbours inside the predicted class"""
    if contact_sheet is not None and train_manifest is None:
        raise ConfigError("--contact-sheet needs --train-manifest to locate neighbour images")
    model, index = _load_model_and_index(model_path, index_path, config)
    k = k or config.k

    img = load_image(image_path)
    bank = build_bank(GaborParams.from_config(config))
    desc = describe_image(img, config, bank)
    predicted = svm.predict(model, desc.grf.astype(np.float64))
    neighbors = query(index, predicted, desc.grbf if config.barcode_kind == "grbf" else desc.rbc,
                      k=k, fingerprint=config.code_fingerprint())

    results = pd.DataFrame({
        "rank": range(1, len(neighbors) + 1),
        "image_id": [n.image_id for n in neighbors],
        "distance": [n.distance for n in neighbors],
        "label": [parse_irma(n.label).formatted() for n in neighbors],
    })
    outputs = []
    if csv_out is not None:
        outputs.append(report_generator.write_csv(results, csv_out))
    if contact_sheet is not None:
        _, records = _categorized(train_manifest, "train")
        paths = dict(zip(records["image_id"], records["path"]))
        missing = [n.image_id for n in neighbors if n.image_id not in paths]
        if missing:
            raise MissingFile(f"neighbour {missing[0]!r} is not in {train_manifest}")
        thumbs = [load_image(paths[n.image_id]) for n in neighbors]
        outputs.append(report_generator.write_contact_sheet(contact_sheet, img, thumbs))
    return {"predicted_class": parse_irma(predicted).formatted(), "results": results,
            "outputs": outputs}


def cmd_evaluate(test_manifest, model_path, index_path, config, details_out=None,
                 confusion_out=None, mode="two-stage", progress=False):
    """Run classify-then-retrieve over a test manifest and score it"""
    if mode not in EVAL_MODES:
        raise ConfigError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    model, index = _load_model_and_index(model_path, index_path, config,
                                         need_model=(mode == "two-stage"))
    _, records = _categorized(test_manifest, "test")
    if records.empty:
        raise EmptyTestSet(f"{test_manifest} has no categorized records")

    queries = extract_corpus(records, config, progress=progress)
    evaluation = evaluate(model, index, queries, config, mode=mode, progress=progress)
    evaluation.timings["extract"] = queries.seconds

    outputs = []
    if details_out is not None:
        outputs.append(report_generator.write_csv(evaluation.details, details_out))
    if confusion_out is not None:
        outputs.append(report_generator.write_csv(evaluation.confusion.reset_index(),
                                                  confusion_out))
    return {"evaluation": evaluation, "failures": queries.failures, "outputs": outputs}


def run_in_memory(train_records, test_records, config, images=None, mode="two-stage",
                  progress=False):
    """Extract, train, index and evaluate without touching artifact files"""
    train = extract_corpus(train_records, config, images=images, progress=progress)
    test = extract_corpus(test_records, config, images=images, progress=progress)
    model = None
    if mode == "two-stage":
        model, _ = fit_model(train.grf, train.labels, config, progress=progress)
    index = index_extraction(train, config)
    evaluation = evaluate(model, index, test, config, mode=mode, progress=progress)
    evaluation.timings["extract"] = train.seconds + test.seconds
    return evaluation


def cmd_sweep(train_manifest, test_manifest, config, out_csv, banks=None, projections=None,
              progress=False):
    """Evaluate every (bank, projection count) pair and tabulate A, E_total and VD"""
    banks = banks or SWEEP_BANKS
    projections = projections or SWEEP_PROJECTIONS
    _, train_records = _categorized(train_manifest, "train")
    _, test_records = _categorized(test_manifest, "test")
    if test_records.empty:
        raise EmptyTestSet(f"{test_manifest} has no categorized records")
    images = load_images(pd.concat([train_records, test_records], ignore_index=True))

    rows = []
    for n_scales, n_orients in banks:
        for n_p in projections:
            cfg = config.with_overrides(n_scales=n_scales, n_orients=n_orients, n_angles=n_p)
            evaluation = run_in_memory(train_records, test_records, cfg, images=images,
                                       progress=progress)
            rows.append({
                "bank": f"GBF({n_scales},{n_orients},{cfg.win_h},{cfg.win_w})",
                "n_scales": n_scales,
                "n_orients": n_orients,
                "n_p": n_p,
                "A": round(evaluation.accuracy * 100.0, 2),
                "E_total": round(evaluation.total_error, 2),
                "VD": cfg.vector_dim,
            })
            logger.info("%s n_p=%d: A=%.2f%% E_total=%.2f", rows[-1]["bank"], n_p,
                        rows[-1]["A"], rows[-1]["E_total"])
    table = pd.DataFrame(rows, columns=["bank", "n_scales", "n_orients", "n_p", "A",
                                        "E_total", "VD"])
    path = report_generator.write_csv(table, out_csv)
    return {"table": table, "outputs": [path]}
