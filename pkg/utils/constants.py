"""
Constants for the Gabor-Radon retrieval engine
"""

# Artifact file magics
FEATURE_MAGIC = b"GRF1"
BARCODE_MAGIC = b"GRB1"
RBC_MAGIC = b"RBC1"
MODEL_MAGIC = b"SVM1"
INDEX_MAGIC = b"IDX1"

FORMAT_VERSION = 1
FINGERPRINT_BYTES = 8

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MISMATCH = 3

# ITU-R BT.601 luminance weights (R, G, B)
LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)

# Supported encoded image formats, keyed by file suffix
IMAGE_FORMATS = {
    ".png": "PNG",
    ".pgm": "PGM",
    ".pnm": "PGM",
    ".bmp": "BMP",
    ".tif": "TIFF",
    ".tiff": "TIFF",
}

# Manifest marker for records without a category
UNCATEGORIZED = "*"

# IRMA code axes: (name, length)
IRMA_AXES = (("T", 4), ("D", 3), ("A", 3), ("B", 3))
IRMA_CODE_LENGTH = 13
IRMA_ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"

# Gabor bank grid swept in the published comparison: (scales, orientations)
SWEEP_BANKS = [(3, 4), (4, 3), (4, 5), (5, 4), (4, 6), (6, 4), (6, 8), (8, 6)]
SWEEP_PROJECTIONS = [8, 16, 32]

# Grid-search candidates; gamma values are multiples of 1/vector_dim
GRID_C = [1.0, 8.0, 32.0, 128.0]
GRID_GAMMA_SCALE = [0.25, 1.0, 4.0]

# Retained-support threshold for SMO multipliers
ALPHA_EPS = 1e-12

# Samples per pixel step along each Radon ray
RADON_RAY_SAMPLES = 4
