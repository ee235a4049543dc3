"""Command line: train a regressor on gold-labeled exchanges, then score
exchanges with it.

    qptrainer train --exchanges out/exchanges.jsonl --gold out/gold_unfiltered.csv --out trained
    qptrainer predict --model trained/model --exchanges out/exchanges.jsonl \
        --predictions trained/predictions.jsonl --name roberta

train writes the model artifact to OUT/model and the held-out metrics to
OUT/metrics.json. Exit codes: 0 success, 1 bad input, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import InputTemplate, load_exchanges, load_gold
from .errors import InputError
from .train import TrainSpec, load_trained, predict, train, write_predictions


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qptrainer", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit the regressor and report held-out rho")
    p_train.add_argument("--exchanges", required=True, metavar="PATH")
    p_train.add_argument("--gold", required=True, metavar="PATH")
    p_train.add_argument("--out", required=True, metavar="DIR")
    p_train.add_argument("--variant", default="unfiltered", choices=["unfiltered", "filtered"])
    p_train.add_argument("--epochs", type=int, default=10, metavar="N")
    p_train.add_argument("--split", type=float, default=0.8, metavar="FRACTION")
    p_train.add_argument("--seed", type=int, default=0, metavar="N")
    p_train.add_argument(
        "--template",
        default="student_sep_teacher",
        choices=[t.value for t in InputTemplate],
    )
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="score exchanges with a trained model")
    p_predict.add_argument("--model", required=True, metavar="DIR")
    p_predict.add_argument("--exchanges", required=True, metavar="PATH")
    p_predict.add_argument("--predictions", required=True, metavar="PATH")
    p_predict.add_argument("--name", default="roberta", metavar="NAME")
    p_predict.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def cmd_train(args: argparse.Namespace) -> None:
    spec = TrainSpec(
        variant=args.variant,
        epochs=args.epochs,
        split=args.split,
        seed=args.seed,
        input_template=InputTemplate(args.template),
    )
    exchanges = load_exchanges(args.exchanges)
    gold = load_gold(args.gold)
    trained = train(exchanges, gold, spec)
    out = Path(args.out)
    trained.save(out / "model")
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps(trained.metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"trained on {trained.metrics['n_train']} examples, "
        f"held-out spearman {trained.metrics['heldout_spearman']:.3f} "
        f"(n={trained.metrics['n_heldout']})"
    )


def cmd_predict(args: argparse.Namespace) -> None:
    trained = load_trained(args.model)
    exchanges = load_exchanges(args.exchanges)
    values = predict(trained, exchanges)
    write_predictions(args.name, values, args.predictions)
    print(f"wrote {len(values)} predictions to {args.predictions}")


if __name__ == "__main__":
    sys.exit(main())
