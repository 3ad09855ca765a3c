"""Walk through the data model and the convolutional reconstruction.

A temporal phenotype is a features x window matrix; a pathway says when each
phenotype starts for one individual. Reconstruction superposes phenotype
occurrences shifted to their start times, so two occurrences may overlap and
a cell can exceed 1.
"""

import numpy as np

from tempheno import (
    IrregularTensor,
    PathwayCollection,
    PhenotypeTensor,
    reconstruct,
    reconstruct_all,
    reconstruct_batched_regular,
    validate_tensor,
)
from tempheno.io import render_phenotype_text

# Two phenotypes over a 2-day window and 4 features:
#   phenotype 0: feature a on day 0, feature b on day 1 (a "handover")
#   phenotype 1: feature c on both days (a repeated delivery)
features = ["a", "b", "c", "d"]
P = np.zeros((2, 4, 2))
P[0, 0, 0] = 1.0
P[0, 1, 1] = 1.0
P[1, 2, :] = 1.0
phenotypes = PhenotypeTensor(P, feature_names=features)

for r in range(2):
    print(f"phenotype {r}")
    print(render_phenotype_text(P[r], features))
    print()

# One individual observed for 7 days; phenotype 0 starts at t=0 and t=4,
# phenotype 1 starts at t=3. Horizon is T - window + 1 = 6 start slots.
w = np.zeros((2, 6))
w[0, 0] = 1.0
w[0, 4] = 1.0
w[1, 3] = 1.0

x_hat = reconstruct(phenotypes, w)
print("reconstruction (rows = features, columns = days):")
print(x_hat)

# The reconstruction is linear in the pathway, and a start only touches the
# window it opens:
assert np.allclose(
    reconstruct(phenotypes, 2.0 * w), 2.0 * x_hat
), "reconstruction is linear in W"

# A whole cohort is an irregular tensor: same features, personal durations.
rng = np.random.default_rng(0)
pathways = PathwayCollection(
    [w, (rng.random((2, 4)) < 0.3).astype(float)], individual_ids=["ana", "bo"]
)
cohort = reconstruct_all(phenotypes, pathways)
print("\ncohort durations after reconstruction:", [m.shape[1] for m in cohort])

X = IrregularTensor(
    [(m > 0).astype(float) for m in cohort],
    feature_names=features,
    individual_ids=["ana", "bo"],
)
validate_tensor(X)
print("binarized cohort validates as a proper input tensor")

# When every individual shares one duration, the stacked fast path computes
# the same reconstruction as the per-individual loop.
same_length = [rng.random((2, 5)) for _ in range(3)]
stacked = reconstruct_batched_regular(phenotypes, same_length)
looped = reconstruct_all(phenotypes, same_length)
print("fast path max deviation:", max(np.max(np.abs(a - b)) for a, b in zip(stacked, looped)))
