"""Select confusable old/new class pairs from text distances alone.

When a task introduces new classes, their text embeddings are compared with
every already-seen class's. Pairs closer than the threshold (default 0.65,
equivalently cosine above 0.78875) are the ones most likely to steal each
other's samples, and they are the only pairs the separation hinge touches.
No image data is involved at any point.
"""

import numpy as np

from rapf import build_task_stream, make_synthetic, select_pairs, text_distance_matrix

store = make_synthetic(12, 32, 10, 4, 0.1, 0.5, seed=4)
stream = build_task_stream(store.catalog, base_size=6, inc_size=6, order_seed=0)
old_ids = list(stream.tasks[0])
new_ids = list(stream.tasks[1])
texts = store.catalog.text_embeddings.astype(np.float64)

dist = text_distance_matrix(texts[old_ids], texts[new_ids])
print(f"distance matrix (old {len(old_ids)} x new {len(new_ids)}):")
print(np.round(dist, 2))

pairs = select_pairs(dist, alpha=0.65, old_ids=old_ids, new_ids=new_ids)
print(f"\npairs under 0.65: {len(pairs)}")
for old, new, d in pairs.pairs:
    cos = 1 - d * d / 2
    print(f"  old {store.catalog.names[old]} <-> new {store.catalog.names[new]}: "
          f"distance {d:.3f} (cosine {cos:.3f})")

loose = select_pairs(dist, alpha=1.0, old_ids=old_ids, new_ids=new_ids)
print(f"\nraising the threshold to 1.0 selects {len(loose)} pairs "
      f"(supersets only: monotone in alpha)")
