"""
Human-readable reports: console summaries, summary text files, CSV tables
and PGM contact sheets.
"""
import logging
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image

from src.imaging import GrayImage, resize_array

logger = logging.getLogger(__name__)

RULE_WIDTH = 80


def banner(title):
    print("\n" + "=" * RULE_WIDTH)
    print(title.upper())
    print("=" * RULE_WIDTH)


def print_config(config):
    """Print every configuration value, in declaration order"""
    print("\nCONFIGURATION")
    print("-" * RULE_WIDTH)
    for key, value in config.describe():
        print(f"  {key:<16} {value}")


def print_lines(pairs):
    for label, value in pairs:
        print(f"  {label:<28} {value}")


def done(message):
    print(f"✓ {message}")


def warn(message):
    print(f"⚠️  {message}")


def write_csv(df: pd.DataFrame, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    done(f"Wrote {path}")
    return path


# ============================================================================
# EVALUATION REPORTS
# ============================================================================

def evaluation_lines(evaluation):
    """(label, value) rows summarizing an Evaluation"""
    rows = [
        ("Mode", evaluation.mode),
        ("Queries", evaluation.n_queries),
        ("Classification accuracy (A)", f"{evaluation.accuracy * 100:.2f}%"),
        ("Total error (E_total)", f"{evaluation.total_error:.4f}"),
        ("Mean error per query", f"{evaluation.mean_error:.4f}"),
        ("Rank-1 same-class rate", f"{evaluation.hit_rate * 100:.2f}%"),
    ]
    for stage, seconds in evaluation.timings.items():
        rows.append((f"Time {stage}", f"{seconds:.2f}s"))
    return rows


def write_summary(path, title, sections, config=None):
    """
    Write a plain-text report

    Args:
        path: Output file
        title: Report title
        sections: Ordered mapping of section name -> list of (label, value)
        config: Optional PipelineConfig whose values are appended for provenance

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("=" * RULE_WIDTH + "\n")
        f.write(title.upper() + "\n")
        f.write("=" * RULE_WIDTH + "\n")
        f.write(f"\nGenerated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
        for name, rows in sections.items():
            f.write(f"\n{name.upper()}\n")
            f.write("-" * RULE_WIDTH + "\n")
            for label, value in rows:
                f.write(f"{label}: {value}\n")
        if config is not None:
            f.write("\nCONFIGURATION\n")
            f.write("-" * RULE_WIDTH + "\n")
            for key, value in config.describe():
                f.write(f"{key}={value}\n")
        f.write("\n" + "=" * RULE_WIDTH + "\n")
        f.write("END OF SUMMARY\n")
        f.write("=" * RULE_WIDTH + "\n")
    done(f"Summary file created: {path}")
    return path


# ============================================================================
# CONTACT SHEETS
# ============================================================================

def contact_sheet(query: GrayImage, neighbors, thumb=96, gap=4):
    """
    Lay the query and its neighbours out left to right

    Args:
        query: Query image
        neighbors: Retrieved images in rank order
        thumb: Thumbnail side in pixels
        gap: White separator width

    Returns:
        (thumb, width) uint8 array
    """
    tiles = [query, *neighbors]
    width = len(tiles) * thumb + (len(tiles) - 1) * gap
    sheet = np.full((thumb, width), 255, dtype=np.uint8)
    for i, tile in enumerate(tiles):
        pixels = resize_array(tile.pixels, thumb, thumb)
        x0 = i * (thumb + gap)
        sheet[:, x0:x0 + thumb] = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    return sheet


def write_contact_sheet(path, query: GrayImage, neighbors, thumb=96):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(contact_sheet(query, neighbors, thumb)).save(path, format="PPM")
    done(f"Contact sheet written: {path}")
    return path
