"""Prior network on three Gaussian blobs: OOD AUROC per seed and per uncertainty score."""

import argparse

import numpy as np

from evidential import demos
from evidential import harness as h


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--hidden", default="gauss", choices=["gauss", "relu", "tanh"])
    args = p.parse_args()

    table = {s: [] for s in h.SCORES}
    for seed in range(args.seeds):
        cfg = demos.cluster_config(seed, args.epochs)
        cfg.model = type(cfg.model)(cfg.model.widths, args.hidden, cfg.model.output, seed)
        data = h.build_dataset(cfg.dataset, seed)
        model = h.train_classifier(cfg, data)
        for s in h.SCORES:
            table[s].append(h.evaluate_ood(model, data, s)["ood_auroc"])
    print(f"hidden={args.hidden}, {args.seeds} seeds")
    for s, vals in table.items():
        print(f"  {s:<20} mean AUROC {np.mean(vals):.4f}  [{', '.join(f'{v:.3f}' for v in vals)}]")


if __name__ == "__main__":
    main()
