"""Plant phenotypes, train the decomposition, and score the recovery.

Uses a smaller cohort than the library defaults so the demo finishes in
about half a minute; bump GenConfig(individuals=500) for the full-scale
protocol.
"""

import numpy as np

from tempheno import (
    GenConfig,
    HyperParams,
    TrainConfig,
    fit,
    fit_report,
    generate,
    match_phenotypes,
    project,
    reconstruct_all,
    split,
    train,
)

seed = 7
cfg = GenConfig(individuals=150, rng_seed=seed)
X, truth_phenotypes, truth_pathways = generate(cfg)
print(f"generated {X.n_individuals} individuals, {X.n_features} features, "
      f"{np.mean([m.sum() for m in X.matrices]):.1f} events each")

x_train, x_test = split(X, 0.3, np.random.default_rng(seed))

hp = HyperParams(rank=4, window=3, sparsity_weight=1.0, nonsuccession_weight=0.5,
                 learning_rate=1e-3, batch_size=50, epochs=200, rng_seed=seed)
model = train(x_train, TrainConfig(hp=hp))

first = model.loss_history[0][1].total
last = model.loss_history[-1][1].total
print(f"loss: {first:.0f} -> {last:.0f} over {hp.epochs} epochs")

# Training-set fit uses the pathways learned during training; test-set fit
# projects fresh pathways with the phenotypes frozen.
fit_train = fit(x_train, reconstruct_all(model.phenotypes, model.pathways))
w_test = project(model, x_test)
fit_test = fit(x_test, reconstruct_all(model.phenotypes, w_test))
print(f"FIT_X train {fit_train:.3f} / test {fit_test:.3f}")

# Against the planted truth, phenotypes are compared after Hungarian
# alignment, so the label order of the learned set does not matter.
report = fit_report(
    x_test,
    reconstruct_all(model.phenotypes, w_test),
    truth_phenotypes=truth_phenotypes,
    learned_phenotypes=model.phenotypes,
)
print(f"FIT_P {report.fit_p:.3f}, matching permutation {report.matching}")

_, similarity = match_phenotypes(truth_phenotypes, model.phenotypes)
print(f"mean matched cosine between truth and learned sets: {similarity:.3f}")
