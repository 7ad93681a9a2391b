"""
Configuration file for the Gabor-Radon retrieval engine
"""
import hashlib
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from dotenv import load_dotenv

from src.errors import ConfigError
from utils.constants import FINGERPRINT_BYTES

# Load environment variables
load_dotenv()

# Project paths
ROOT_DIR = Path(__file__).parent
DATA_DIR = ROOT_DIR / "data"
SYNTH_DATA_DIR = DATA_DIR / "synth"

# Image normalization
IMAGE_CONFIG = {
    "image_side": 128,  # Query/database images are resized to side x side
    "sinogram_side": 32,  # Sinograms are resized to side x side before filtering
}

# Radon transform and classic Radon barcodes
RADON_CONFIG = {
    "n_angles": 32,  # Projection count n_p over [0, 180)
    "rbc_bits": 32,  # Samples per projection for Radon barcodes
}

# Gabor filter bank and pooling
GABOR_CONFIG = {
    "n_scales": 4,  # U
    "n_orients": 5,  # V
    "win_h": 23,
    "win_w": 23,
    "f_max": 0.25,  # Central frequency of scale 0, cycles/pixel
    "scale_factor": math.sqrt(2.0),
    "gamma": 0.5,  # Spatial aspect ratio
    "bandwidth": 1.0,  # Octaves
    "phi": 0.0,  # Phase offset, radians
    "dc_correct": True,  # Zero-mean real part
    "d1": 4,  # Pooling block height
    "d2": 4,  # Pooling block width
}

# Support vector machine
SVM_CONFIG = {
    "kernel": "rbf",  # rbf | polynomial | linear
    "kernel_gamma": 0.0,  # 0 means 1 / vector_dim
    "degree": 3,
    "coef0": 1.0,
    "C": 32.0,
    "tol": 1e-3,
    "max_passes": 100,
    "feature_scaling": True,
    "grid_search": False,
    "cv_folds": 5,
}

# Retrieval
RETRIEVAL_CONFIG = {
    "k": 1,
    "barcode_kind": "grbf",  # grbf | rbc
}

# Retrieval error
ERROR_CONFIG = {
    "propagate": True,  # A wrong character makes deeper positions in its axis wrong
    "normalize": True,  # Each image contributes at most 1
    "axis_local": True,  # Position weight 1/i restarts on every axis
}

# Runtime
RUNTIME_CONFIG = {
    "workers": 1,  # CBIR_WORKERS in the environment or .env overrides this at load time
    "seed": 7,
}

DEFAULTS = {
    **IMAGE_CONFIG,
    **RADON_CONFIG,
    **GABOR_CONFIG,
    **SVM_CONFIG,
    **RETRIEVAL_CONFIG,
    **ERROR_CONFIG,
    **RUNTIME_CONFIG,
}

KERNEL_KINDS = ("rbf", "polynomial", "linear")
BARCODE_KINDS = ("grbf", "rbc")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline; defaults come from the groups above"""

    image_side: int = DEFAULTS["image_side"]
    sinogram_side: int = DEFAULTS["sinogram_side"]
    n_angles: int = DEFAULTS["n_angles"]
    rbc_bits: int = DEFAULTS["rbc_bits"]
    n_scales: int = DEFAULTS["n_scales"]
    n_orients: int = DEFAULTS["n_orients"]
    win_h: int = DEFAULTS["win_h"]
    win_w: int = DEFAULTS["win_w"]
    f_max: float = DEFAULTS["f_max"]
    scale_factor: float = DEFAULTS["scale_factor"]
    gamma: float = DEFAULTS["gamma"]
    bandwidth: float = DEFAULTS["bandwidth"]
    phi: float = DEFAULTS["phi"]
    dc_correct: bool = DEFAULTS["dc_correct"]
    d1: int = DEFAULTS["d1"]
    d2: int = DEFAULTS["d2"]
    kernel: str = DEFAULTS["kernel"]
    kernel_gamma: float = DEFAULTS["kernel_gamma"]
    degree: int = DEFAULTS["degree"]
    coef0: float = DEFAULTS["coef0"]
    C: float = DEFAULTS["C"]
    tol: float = DEFAULTS["tol"]
    max_passes: int = DEFAULTS["max_passes"]
    feature_scaling: bool = DEFAULTS["feature_scaling"]
    grid_search: bool = DEFAULTS["grid_search"]
    cv_folds: int = DEFAULTS["cv_folds"]
    k: int = DEFAULTS["k"]
    barcode_kind: str = DEFAULTS["barcode_kind"]
    propagate: bool = DEFAULTS["propagate"]
    normalize: bool = DEFAULTS["normalize"]
    axis_local: bool = DEFAULTS["axis_local"]
    workers: int = DEFAULTS["workers"]
    seed: int = DEFAULTS["seed"]

    def __post_init__(self):
        problems = []
        for name in ("image_side", "sinogram_side", "n_angles", "rbc_bits", "n_scales",
                     "n_orients", "d1", "d2", "degree", "max_passes", "k", "workers"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.win_h % 2 == 0 or self.win_w % 2 == 0 or min(self.win_h, self.win_w) < 1:
            problems.append("win_h and win_w must be odd positive integers")
        if self.sinogram_side % self.d1 or self.sinogram_side % self.d2:
            problems.append("d1 and d2 must divide sinogram_side")
        if not 0.0 < self.f_max <= 0.5:
            problems.append("f_max must lie in (0, 0.5]")
        if self.scale_factor <= 1.0:
            problems.append("scale_factor must be > 1")
        if self.gamma <= 0.0 or self.bandwidth <= 0.0:
            problems.append("gamma and bandwidth must be > 0")
        if self.kernel not in KERNEL_KINDS:
            problems.append(f"kernel must be one of {KERNEL_KINDS}")
        if self.kernel_gamma < 0.0:
            problems.append("kernel_gamma must be >= 0 (0 selects 1/vector_dim)")
        if self.C <= 0.0 or self.tol <= 0.0:
            problems.append("C and tol must be > 0")
        if self.cv_folds < 2:
            problems.append("cv_folds must be >= 2")
        if self.barcode_kind not in BARCODE_KINDS:
            problems.append(f"barcode_kind must be one of {BARCODE_KINDS}")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_filters(self):
        return self.n_scales * self.n_orients

    @property
    def vector_dim(self):
        return (self.sinogram_side * self.sinogram_side * self.n_filters) // (self.d1 * self.d2)

    @property
    def rbc_dim(self):
        return self.n_angles * self.rbc_bits

    @property
    def effective_kernel_gamma(self):
        return self.kernel_gamma if self.kernel_gamma > 0 else 1.0 / self.vector_dim

    def with_overrides(self, **changes):
        return replace(self, **changes)

    def describe(self):
        """Ordered (key, value) pairs for report provenance"""
        return list(asdict(self).items())

    def feature_fingerprint(self):
        return _fingerprint(
            "grf",
            self.image_side, self.sinogram_side, self.n_angles,
            self.n_scales, self.n_orients, self.d1, self.d2,
            self.win_h, self.win_w, self.f_max, self.scale_factor,
            self.gamma, self.bandwidth, self.phi, self.dc_correct,
        )

    def rbc_fingerprint(self):
        return _fingerprint("rbc", self.image_side, self.n_angles, self.rbc_bits)

    def code_fingerprint(self, kind=None):
        kind = kind or self.barcode_kind
        return self.feature_fingerprint() if kind == "grbf" else self.rbc_fingerprint()


def _fingerprint(*parts):
    canonical = "|".join(repr(p) for p in parts)
    return hashlib.sha256(canonical.encode("utf-8")).digest()[:FINGERPRINT_BYTES].hex()


def _coerce(name, raw, kind):
    text = str(raw).strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def parse_assignments(lines, source="<overrides>"):
    """
    Parse key=value lines into a dict of typed values

    Args:
        lines: Iterable of strings; '#' comments and blank lines are skipped
        source: Name used in error messages

    Returns:
        Dict mapping config keys to coerced values
    """
    types = {f.name: f.type for f in fields(PipelineConfig)}
    types = {k: {"int": int, "float": float, "bool": bool, "str": str}.get(v, v)
             for k, v in types.items()}
    values = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw, types[key])
    return values


def load_pipeline_config(path=None, overrides=None):
    """
    Build a PipelineConfig from defaults, CBIR_WORKERS, an optional key=value file and overrides

    Args:
        path: Optional config file path
        overrides: Optional list of "key=value" strings (CLI --set flags)

    Returns:
        PipelineConfig
    """
    values = {}
    env_workers = os.getenv("CBIR_WORKERS", "").strip()
    if env_workers:
        values["workers"] = _coerce("CBIR_WORKERS", env_workers, int)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_assignments(path.read_text(encoding="utf-8").splitlines(), str(path)))
    if overrides:
        values.update(parse_assignments(overrides))
    return PipelineConfig(**values)
