"""Fuse two consecutive adapter weights in a shared orthonormal basis.

The previous weight is factored by SVD into a basis B and coefficients
R_old; the new weight is projected into the same basis. An importance mask,
driven by how much each coefficient changed, blends the two: entries that
barely moved keep their old value, entries that moved a lot take the new
one. Reconstruction is exact because B is square orthonormal.
"""

import numpy as np

from rapf import FusionConfig, decompose, fuse, project

rng = np.random.default_rng(7)
w_old = np.eye(8) + 0.05 * rng.standard_normal((8, 8))
w_new = w_old + 0.02 * rng.standard_normal((8, 8))
w_new[2, 5] += 0.4  # one coordinate changed a lot: "important" new knowledge

basis, r_old = decompose(w_old)
r_new = project(basis, w_new)
print(f"basis orthonormality |B^T B - I|_F = {np.linalg.norm(basis.T @ basis - np.eye(8)):.2e}")
print(f"decomposition residual |B R - W|_F = {np.linalg.norm(basis @ r_old - w_old):.2e}")

for b in (0.0, 0.3, 1.0):
    fused, trace = fuse(w_old, w_new, FusionConfig(bias_b=b))
    s = trace.summary()
    toward_new = np.linalg.norm(fused - w_old) / np.linalg.norm(w_new - w_old)
    print(f"bias {b:.1f}: mean mask {s['mean_mask']:.2f}, "
          f"clamped {s['clamped_fraction']:.2f}, moved {toward_new:.2f} of the way to W_new")

# the coarse variant skips the decomposition and masks raw weight entries
fused_flat, trace_flat = fuse(w_old, w_new, FusionConfig(bias_b=0.0, decompose=False))
print(f"\nwithout decomposition: basis is I, mean mask {trace_flat.summary()['mean_mask']:.2f}")
print(f"b=1 recovers W_new exactly in both variants: "
      f"{np.allclose(fuse(w_old, w_new, FusionConfig(bias_b=1.0))[0], w_new)}")
