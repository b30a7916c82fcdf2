"""Generate a synthetic 10-class digit-style IDX archive.

The archive uses the conventional MNIST file names, so any IDX-format
dataset dropped into the same layout works with `task.kind = idx` configs.

    python scripts/make_digits.py --out data/digits --train 1250 --test 400 --noise 1.0
"""

import argparse

from gemmine.data import make_digit_archive


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--train", type=int, default=1250)
    parser.add_argument("--test", type=int, default=400)
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--noise", type=float, default=1.0)
    args = parser.parse_args()
    directory = make_digit_archive(args.out, n_train=args.train, n_test=args.test, seed=args.seed, noise=args.noise)
    print(f"wrote IDX archive to {directory}")


if __name__ == "__main__":
    main()
