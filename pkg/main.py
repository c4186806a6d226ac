import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from core.controller import cmd_energy, cmd_evaluate, cmd_predict, cmd_probplot, cmd_select, cmd_stratify
from core.errors import EXIT_OK, EXIT_VALIDATION, DissipateError
from core.logs import setup_logging
from core.settings import METHODS, SELECTION_MODES, TRANSFORM_FITS, TRANSFORMS, load_config

load_dotenv()

logger = logging.getLogger("dissipate")


def _feature_list(text: str) -> list[str]:
    return [f.strip() for f in text.split(",") if f.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run settings (flags override it)")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="parallel trial workers (joblib n_jobs)")
    common.add_argument("--log-level", dest="log_level")

    modelling = argparse.ArgumentParser(add_help=False)
    modelling.add_argument("--db", help="walls CSV database")
    modelling.add_argument("--method", choices=METHODS)
    modelling.add_argument("--transform", choices=TRANSFORMS)
    modelling.add_argument("--transform-fit", dest="transform_fit", choices=TRANSFORM_FITS)
    modelling.add_argument("--trials", type=int)
    modelling.add_argument("--ranking-trials", dest="ranking_trials", type=int)
    modelling.add_argument("--selection", choices=SELECTION_MODES)
    modelling.add_argument("--features", type=_feature_list, help="comma-separated feature ids (explicit mode)")
    modelling.add_argument("--tolerance", type=float, help="R2 tolerance for the best subset")
    modelling.add_argument("--gpr-restarts", dest="gpr_restarts", type=int)
    modelling.add_argument("--nca-starts", dest="nca_starts", type=int)
    modelling.add_argument("--nca-lambda", dest="nca_regularization", type=float)
    modelling.add_argument("--nca-sigma", dest="nca_kernel_width", type=float)
    modelling.add_argument("--lasso-penalty", dest="lasso_penalty", type=float)

    parser = argparse.ArgumentParser(prog="dissipate", description="Hysteretic energy and NCDE regression toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    energy = commands.add_parser("energy", parents=[common], help="NCDE from load-displacement curves")
    energy.add_argument("--curves", dest="curves_dir", help="directory of displacement_mm,force_kN CSV files")
    energy.add_argument("--height", dest="height_mm", type=float, help="wall height in mm for every curve")
    energy.add_argument("--db", help="walls CSV supplying h_w per specimen id")

    commands.add_parser("evaluate", parents=[common, modelling], help="seeded train/test trials")
    commands.add_parser("select", parents=[common, modelling], help="feature ranking and selection")

    predict = commands.add_parser("predict", parents=[common], help="predict with a stored model")
    predict.add_argument("--model", required=True, help="model JSON written by evaluate")
    predict.add_argument("--specimens", required=True, help="walls CSV to predict")

    stratify = commands.add_parser("stratify", parents=[common], help="metrics per failure mode or shape")
    stratify.add_argument("--predictions", required=True, help="scatter.csv or predictions.csv")
    stratify.add_argument("--by", choices=("failure_mode", "shape"), default="failure_mode")

    probplot = commands.add_parser("probplot", parents=[common], help="normal probability plot data of NCDE")
    probplot.add_argument("--db", help="walls CSV database")
    return parser


_NOT_CONFIG = ("command", "config", "model", "specimens", "predictions", "by")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or os.getenv("DISSIPATE_LOG_LEVEL", "INFO"))

    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if overrides.get("features") and not overrides.get("selection"):
        overrides["selection"] = "explicit"

    try:
        config = load_config(args.config, **overrides)
        setup_logging(config.log_level)

        if args.command == "energy":
            _, failures = cmd_energy(config)
            if failures:
                logger.error(f"{len(failures)} curve file(s) failed")
                return EXIT_VALIDATION
        elif args.command == "evaluate":
            cmd_evaluate(config)
        elif args.command == "select":
            cmd_select(config)
        elif args.command == "predict":
            cmd_predict(config.validate(), args.model, args.specimens)
        elif args.command == "stratify":
            cmd_stratify(config.validate(), args.predictions, args.by)
        elif args.command == "probplot":
            cmd_probplot(config)
    except DissipateError as e:
        logger.error(f"Error: {e}")
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
