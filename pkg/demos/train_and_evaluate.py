"""Train the classifier at desk scale and sweep two families through it.

Uses a reduced dataset and epoch budget so the whole script runs in
about a minute; the full-scale protocol lives behind
`clickstats reproduce fig4`.
"""

import numpy as np

from clickstats import (
    TrainingConfig,
    generate_evaluation_set,
    generate_training_data,
    predict_batch,
    train,
)

SEED = 7


def main():
    train_set, val_set = generate_training_data(
        points_per_family=100, sample_size=1000, seed=SEED
    )
    print(f"training rows: {len(train_set)}, validation rows: {len(val_set)}")

    config = TrainingConfig(max_epochs=200, patience=25, seed=SEED)
    model, history = train(train_set, val_set, config)
    print(f"stopped after {history.epochs_run} epochs, "
          f"best validation MSE {min(history.val_mse):.4f} "
          f"at epoch {history.best_epoch}")

    for family in ("thermal", "fock"):
        sweep = generate_evaluation_set(
            family, realizations=60, sample_size=1000, seed=SEED + 1
        )
        outputs = predict_batch(model, sweep.features())
        rate = float(np.mean(outputs > 0.9))
        print(f"{family:8s} mean output {outputs.mean():.3f}, "
              f"flag rate at t=0.9: {rate:.2f}")


if __name__ == "__main__":
    main()
