"""
Gabor-Radon Image Retrieval - command-line entry point
Two-stage retrieval: SVM classification on Gabor-Radon features, then
Hamming search over Gabor-Radon barcodes inside the predicted class
"""

import argparse
import logging
import sys

from config import SYNTH_DATA_DIR, load_pipeline_config
from src import pipeline, report_generator
from src.errors import CbirError
from src.synth import generate_dataset
from utils.constants import EXIT_DATA, EXIT_OK, EXIT_USAGE

logger = logging.getLogger(__name__)


# ────────────────────────────────────────────────
# Argument parsing
# ────────────────────────────────────────────────
class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the usage code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("--workers", type=int, help="parallel workers (default: CBIR_WORKERS or 1)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="no progress bars, warnings only")

    parser = CliParser(prog="app.py", description="Gabor-Radon two-stage image retrieval")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("extract", parents=[common], help="extract GRF/GRBF files from a manifest")
    p.add_argument("manifest")
    p.add_argument("--features-out", required=True)
    p.add_argument("--barcodes-out", required=True)
    p.add_argument("--rbc-out", help="also write classic Radon barcodes")
    p.add_argument("--dump-sinograms", metavar="DIR", help="write every sinogram as PGM")
    p.add_argument("--split", choices=["train", "test"], default="train")

    p = sub.add_parser("train", parents=[common], help="train the one-against-one SVM")
    p.add_argument("features")
    p.add_argument("manifest")
    p.add_argument("--model-out", required=True)

    p = sub.add_parser("build-index", parents=[common], help="build the class-partitioned index")
    p.add_argument("barcodes")
    p.add_argument("manifest")
    p.add_argument("--index-out", required=True)

    p = sub.add_parser("query", parents=[common], help="classify one image and retrieve neighbours")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("-k", type=int, help="neighbours to return (default: config k)")
    p.add_argument("--csv", help="write the ranked results as CSV")
    p.add_argument("--contact-sheet", metavar="OUT.pgm", help="write query + neighbour thumbnails")
    p.add_argument("--train-manifest", help="manifest locating neighbour images")

    p = sub.add_parser("evaluate", parents=[common], help="score a test manifest")
    p.add_argument("manifest")
    p.add_argument("--model", help="model file (required in two-stage mode)")
    p.add_argument("--index", required=True)
    p.add_argument("--mode", choices=list(pipeline.EVAL_MODES), default="two-stage")
    p.add_argument("--details-out", help="per-query CSV")
    p.add_argument("--confusion-out", help="truth x predicted CSV")
    p.add_argument("--summary-out", help="plain-text summary")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic labelled corpus")
    p.add_argument("out_dir", nargs="?", default=str(SYNTH_DATA_DIR),
                   help="output directory (default: data/synth)")
    p.add_argument("--n-classes", type=int, default=4)
    p.add_argument("--n-per-class", type=int, default=50)
    p.add_argument("--n-test-per-class", type=int, default=0)
    p.add_argument("--size", type=int, default=96)

    p = sub.add_parser("sweep", parents=[common], help="evaluate the bank x projection grid")
    p.add_argument("train_manifest")
    p.add_argument("test_manifest")
    p.add_argument("--out", required=True, help="CSV output")
    return parser


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


# ────────────────────────────────────────────────
# Subcommands
# ────────────────────────────────────────────────
def run_extract(args, config, progress):
    summary = pipeline.cmd_extract(args.manifest, config, args.features_out, args.barcodes_out,
                                   rbc_out=args.rbc_out, dump_dir=args.dump_sinograms,
                                   split=args.split, progress=progress)
    report_generator.banner("Extraction summary")
    report_generator.print_lines([
        ("Manifest records", summary["records"]),
        ("Uncategorized (ignored)", summary["uncategorized"]),
        ("Extracted", summary["extracted"]),
        ("Failed", len(summary["failures"])),
        ("Vector dimension", summary["vector_dim"]),
        ("Elapsed", f"{summary['seconds']:.2f}s"),
        ("Throughput", f"{summary['throughput']:.1f} images/sec"),
    ])
    report_generator.print_config(config)
    for path in summary["outputs"]:
        report_generator.done(f"Wrote {path}")
    for image_id, reason in summary["failures"]:
        report_generator.warn(f"{image_id}: {reason}")
    return EXIT_DATA if summary["failures"] else EXIT_OK


def run_train(args, config, progress):
    summary = pipeline.cmd_train(args.features, args.manifest, config, args.model_out,
                                 progress=progress)
    report_generator.banner("Training summary")
    report_generator.print_lines([
        ("Classes", summary["n_classes"]),
        ("Binary models", summary["n_binaries"]),
        ("C", summary["C"]),
        ("Kernel gamma", f"{summary['gamma']:.6g}"),
        ("Elapsed", f"{summary['seconds']:.2f}s"),
    ])
    report_generator.print_config(config)
    print("\nSamples per class")
    print("-" * report_generator.RULE_WIDTH)
    for label, count in summary["class_counts"].items():
        print(f"  {label}  {count}")
    if summary["cv_table"] is not None:
        print("\nCross-validation grid")
        print("-" * report_generator.RULE_WIDTH)
        print(summary["cv_table"].to_string(index=False))
    for path in summary["outputs"]:
        report_generator.done(f"Wrote {path}")
    return EXIT_OK


def run_build_index(args, config, progress):
    summary = pipeline.cmd_build_index(args.barcodes, args.manifest, args.index_out, config)
    report_generator.banner("Index summary")
    report_generator.print_lines([
        ("Barcode kind", summary["kind"]),
        ("Records", summary["n_records"]),
        ("Classes", summary["n_classes"]),
        ("Code length (bits)", summary["code_len"]),
    ])
    for path in summary["outputs"]:
        report_generator.done(f"Wrote {path}")
    return EXIT_OK


def run_query(args, config, progress):
    summary = pipeline.cmd_query(args.image, args.model, args.index, config, k=args.k,
                                 csv_out=args.csv, contact_sheet=args.contact_sheet,
                                 train_manifest=args.train_manifest)
    print(f"Predicted class: {summary['predicted_class']}")
    for row in summary["results"].itertuples(index=False):
        print(f"{row.rank}\t{row.image_id}\t{row.distance}")
    return EXIT_OK


def run_evaluate(args, config, progress):
    summary = pipeline.cmd_evaluate(args.manifest, args.model, args.index, config,
                                    details_out=args.details_out,
                                    confusion_out=args.confusion_out,
                                    mode=args.mode, progress=progress)
    evaluation = summary["evaluation"]
    lines = report_generator.evaluation_lines(evaluation)
    report_generator.banner("Evaluation summary")
    report_generator.print_lines(lines)
    report_generator.print_config(config)
    if args.summary_out:
        report_generator.write_summary(args.summary_out, "Retrieval evaluation",
                                       {"Results": lines}, config=config)
    for image_id, reason in summary["failures"]:
        report_generator.warn(f"{image_id}: {reason}")
    return EXIT_DATA if summary["failures"] else EXIT_OK


def run_synth(args, config, progress):
    result = generate_dataset(args.out_dir, n_classes=args.n_classes,
                              n_per_class=args.n_per_class, seed=config.seed,
                              n_test_per_class=args.n_test_per_class, size=args.size,
                              progress=progress)
    report_generator.done(f"Generated {result['n_train']} training images in {result['out_dir']}")
    report_generator.done(f"Manifest: {result['train_manifest']}")
    if "test_manifest" in result:
        report_generator.done(f"Generated {result['n_test']} test images")
        report_generator.done(f"Manifest: {result['test_manifest']}")
    return EXIT_OK


def run_sweep(args, config, progress):
    summary = pipeline.cmd_sweep(args.train_manifest, args.test_manifest, config, args.out,
                                 progress=progress)
    report_generator.banner("Bank sweep")
    print(summary["table"].to_string(index=False))
    report_generator.print_config(config)
    return EXIT_OK


COMMANDS = {
    "extract": run_extract,
    "train": run_train,
    "build-index": run_build_index,
    "query": run_query,
    "evaluate": run_evaluate,
    "synth": run_synth,
    "sweep": run_sweep,
}


# ────────────────────────────────────────────────
# Main
# ────────────────────────────────────────────────
def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    progress = not args.quiet and sys.stderr.isatty()

    try:
        config = load_pipeline_config(args.config, args.set)
        changes = {}
        if args.workers is not None:
            changes["workers"] = args.workers
        if args.seed is not None:
            changes["seed"] = args.seed
        if changes:
            config = config.with_overrides(**changes)
        return COMMANDS[args.command](args, config, progress)
    except CbirError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
