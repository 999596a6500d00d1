"""Build a synthetic embedding store, write it to disk, and look inside.

The store holds a class catalog (names + unit-norm text embeddings) and
labeled train/test image embeddings in a compact little-endian binary file.
Half of the classes here get a planted "confusable" partner: a second class
whose text embedding sits closer than the usual 0.65 selection threshold.
"""

import numpy as np

from rapf import load_store, make_synthetic, save_store

store = make_synthetic(
    num_classes=10,
    dim=32,
    train_per_class=30,
    test_per_class=10,
    intra_class_spread=0.12,
    confusable_fraction=0.5,
    seed=0,
)
print(f"generated: {store.num_classes} classes, dim {store.dim}, {store.num_records} records")

save_store(store, "/tmp/demo.rapfemb")
reloaded = load_store("/tmp/demo.rapfemb")
assert np.array_equal(reloaded.vectors, store.vectors), "round-trip must be bit-exact"
print("saved and reloaded bit-exactly")

texts = reloaded.catalog.text_embeddings.astype(np.float64)
dist = np.linalg.norm(texts[:, None, :] - texts[None, :, :], axis=2)
np.fill_diagonal(dist, np.inf)
print("\nnearest text neighbor per class:")
for c, name in enumerate(reloaded.catalog.names):
    j = int(np.argmin(dist[c]))
    mark = "  <- confusable" if dist[c, j] < 0.65 else ""
    print(f"  {name}: {reloaded.catalog.names[j]} at distance {dist[c, j]:.3f}{mark}")

train, test = reloaded.class_counts()
print(f"\nper-class records: {train[0]} train / {test[0]} test; partial={reloaded.is_partial}")
