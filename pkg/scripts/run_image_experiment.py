"""End-to-end image experiment: generate the digit archive, mine a sparse
subnetwork per seed, run the sanity-variant matrix, and print the summary.

    python scripts/run_image_experiment.py --out-dir out --sparsity 0.05
"""

import argparse
from pathlib import Path

from gemmine.config import build_experiment_config
from gemmine.data import make_digit_archive
from gemmine.harness import read_summary, run_experiment

CONFIG_TEMPLATE = """\
run.id = digits_gem
task.kind = idx
task.path = {data_dir}
task.train_limit = 1000
task.val_fraction = 0.1
net.widths = 784,128,10
miner.algorithm = gem
miner.lr = 0.5
miner.lambda = 1e-6
miner.batch_size = 32
schedule.sparsity = {sparsity}
schedule.epochs = 30
schedule.freeze_period = 5
finetune.epochs = 15
finetune.lr = 0.1
finetune.batch_size = 32
sanity = shuffle,reinit,invert
seeds = 1,2,3
"""


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--sparsity", type=float, default=0.05)
    parser.add_argument("--noise", type=float, default=1.0)
    args = parser.parse_args()

    data_dir = Path(args.out_dir) / "digits_data"
    make_digit_archive(data_dir, n_train=1250, n_test=400, seed=5, noise=args.noise)
    text = CONFIG_TEMPLATE.format(data_dir=data_dir, sparsity=args.sparsity)
    cfg = build_experiment_config(text, default_run_id="digits_gem")
    run_dir = run_experiment(cfg, args.out_dir)

    print(f"artifacts in {run_dir}")
    for row in read_summary(run_dir / "summary.csv"):
        print(
            f"  {row['algorithm']:>4} {row['variant']:>8} seed={row['seed']} "
            f"sparsity={float(row['sparsity']):.4f} pre={float(row['pre_acc']):.3f} post={float(row['post_acc']):.3f}"
        )


if __name__ == "__main__":
    main()
