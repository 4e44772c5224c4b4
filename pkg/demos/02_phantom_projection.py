"""Phantoms, the pencil-beam projector, and reproducible noise.

A sinogram stacks line integrals of the image: one reading per
(angle, detector pixel) ray. The system matrix holds the exact
ray-pixel intersection lengths, so a row sum equals the chord length of
that ray through the unit square -- a useful invariant to spot-check.
"""

import numpy as np

import tvtomo as tv

n = 64
phantom = tv.Phantom.nested_shells([(0.375, 1.0), (0.25, 2.0), (0.125, 0.5)])
img = tv.render_phantom(phantom, n)
print("phantom tv (analytic):", phantom.analytic_tv)
print("phantom tv (rendered):", tv.tv_norm(img))

geom = tv.ScanGeometry(num_angles=30, num_detector_pixels=96)
A = tv.assemble_system_matrix(geom, n)
print(f"\nsystem matrix: {A.matrix.shape} with {A.matrix.nnz} nonzeros "
      f"({A.matrix.nnz / np.prod(A.matrix.shape):.2%} dense)")

g = tv.forward_project(A, img)
print("sinogram range:", g.data.min(), "to", g.data.max())

# Gaussian noise with standard deviation = level * max(clean data);
# the seed makes it bit-reproducible.
noisy = tv.add_noise(g, tv.NoiseSpec(relative_level=0.05, seed=7))
print("noise std (measured):", (noisy.data - g.data).std())
print("noise std (nominal): ", 0.05 * g.data.max())

# A fan-beam geometry only changes how rays are generated.
fan = tv.ScanGeometry(mode="fan", num_angles=30, num_detector_pixels=96,
                      source_radius=2.0, detector_radius=2.0)
A_fan = tv.assemble_system_matrix(fan, n)
print("\nfan-beam matrix:", A_fan.matrix.shape, "nnz", A_fan.matrix.nnz)
