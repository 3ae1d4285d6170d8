"""
Cross-subject ablation
======================

Leave-one-subject-out on a shifted, label-noisy synthetic cohort, with the
two regularizers switched on and off. The domain branch trains against the
held-out subject's unlabeled features; the soft-label branch absorbs the
trial-level annotation noise. Takes about half a minute.

The release gate runs this comparison averaged over three seeds; a single
seed, as here, wobbles a point or two around those numbers.
"""
import numpy as np

from eegraph.data import SynthConfig, synthesize
from eegraph.eval import run_protocol
from eegraph.train import TrainConfig

ds = synthesize(SynthConfig(
    subjects=8, trials_per_class=3, samples_per_trial=12,
    n_channels=4, n_bands=5, n_classes=4,
    class_separation=8.5, subject_shift_scale=2.0,
    label_noise_rate=0.2, seed=77,
))
print(f"cohort: {len(ds.subjects())} subjects, {ds.n_samples} samples, "
      f"20% of trials mislabeled toward adjacent emotions")

shared = dict(epochs=30, lr=0.005, hidden_dim=8, batch_size=12,
              dropout=0.0, alpha=0.01, seed=0)
variants = [
    ("plain",          dict()),
    ("soft labels",    dict(emotion_dl=True, epsilon=0.4)),
    ("domain branch",  dict(node_dat=True)),
    ("both",           dict(emotion_dl=True, epsilon=0.4, node_dat=True)),
]

print(f"\n{'variant':14s} {'mean':>6s} {'std':>6s}   per-subject accuracy")
for name, extra in variants:
    report, _ = run_protocol(ds, "loso", TrainConfig(**shared, **extra))
    folds = " ".join(f"{a:.2f}" for a in report.fold_accuracies)
    print(f"{name:14s} {report.mean:6.3f} {report.std:6.3f}   {folds}", flush=True)
