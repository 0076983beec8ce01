"""Labelling users from profile locations and comparing the two groups.

Builds a handful of users by hand, labels them with the built-in Catalan
rules, then runs the behavioural comparison on a larger synthetic dataset
where the direction of every difference is known in advance.

    python3 demos/labeling_and_features.py
"""

from natid.features import behavioral_features, group_comparison_report
from natid.labeler import builtin_rules, label_dataset
from natid.model import CATALONIA, Dataset, UserRecord
from natid.synth import SynthConfig, generate, planted_directions

T0 = 1.6e9


def hand_made():
    users = [
        UserRecord("anna", location="Països Catalans"),
        UserRecord("bernat", location="Girona, Espanya"),
        UserRecord("carla", location="Barcelona"),
        UserRecord("dani", location="Sabadell, Espanya"),
    ]
    return Dataset(CATALONIA, {u.user_id: u for u in users}, T0)


def main():
    labeled, report = label_dataset(hand_made(), builtin_rules(CATALONIA))
    for uid, user in labeled.users.items():
        print(f"  {uid:<8} {user.location!r:<22} -> {user.label.value if user.label else 'abstain'}")
    print(f"  PI {report.pi}, AI {report.ai}, unlabeled {report.unlabeled}\n")

    cfg = SynthConfig(n_users=1200, pi_activity=1.5, seed=2)
    planted = planted_directions(cfg)
    rows = group_comparison_report(behavioral_features(generate(cfg)))
    print("feature                    larger in  p          planted")
    for r in rows:
        side = r.prominent.value if r.prominent else "--"
        want = planted[r.feature_id].value if r.feature_id in planted else "--"
        print(f"  {r.feature_id:>2} {r.name:<24} {side:<4} {r.result.p_value:<10.2e} {want} {r.stars}")


if __name__ == "__main__":
    main()
