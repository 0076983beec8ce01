"""Stance classification with the four classifiers and ten-fold CV.

Uses the two sparse feature families, which need no embedding training,
so the whole grid runs in well under a minute.

    python3 demos/classification.py
"""

from natid.classify import ALL_KINDS, cross_validate, results_table
from natid.features import interaction_features, network_features
from natid.synth import generate, preset_config


def main():
    dataset = generate(preset_config("Catalonia", n_users=800, seed=3))
    reports = []
    for matrix in (interaction_features(dataset), network_features(dataset)):
        print(f"{matrix.family.value}: {matrix.shape[0]} users x {matrix.shape[1]} accounts")
        for kind in ALL_KINDS:
            hp = {"n_trees": 30} if kind.short == "RF" else None
            rep = cross_validate(matrix, kind, k=10, seed=3, hyperparams=hp, territory="Catalonia")
            reports.append(rep)
            print(f"  {kind.short}  {rep.correct}/{rep.total} = {rep.micro_accuracy:.3f}")
    print()
    print(results_table(reports), end="")


if __name__ == "__main__":
    main()
