#pragma once

// Reverse-mode differentiation through the Green's-function recursion. The
// backward pass works entirely on realified 2M×2M' real blocks cached by the
// forward pass; per-entry parameter derivatives are read off the accumulated
// block gradients at the end, without ever materializing 4-index tensors.

#include <functional>
#include <vector>

#include "fnn/common.hpp"
#include "fnn/greens.hpp"
#include "fnn/model.hpp"

namespace fnn {

MatR realify(const MatC& a);   // [[Re, Im], [−Im, Re]]
MatC unrealify(const MatR& r); // inverse on structured matrices (upper half)

// Parameter-space gradients, aligned with FnnParameters:
//   d_intra[k] — layers 1..L, entries ∂L/∂Re t_ab + i·∂L/∂Im t_ab for the
//     free coordinates (upper triangle; mirror entries hold the conjugate so
//     a plain complex SGD step keeps Hermiticity); diagonal = real ∂L/∂μ.
//   d_inter[k] — pairs 0..L−1, same Re/Im packing (inter[0] is the
//     surface coupling under the external encoding).
// Raw results are dense; apply_masks() zeroes non-mask entries in place.
struct GradientSet {
  std::vector<MatC> d_intra;
  std::vector<MatC> d_inter;

  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
  static GradientSet zeros_like(const FnnParameters& params);
};

void apply_masks(GradientSet& grads, const FnnParameters& params);

// loss_grad = ∂L/∂y_m at the last-layer LDOS head. The cache must have been
// produced at a retarded point (or, for the Matsubara overload below, at one
// Matsubara point of a grid).
GradientSet ldos_gradients(const RecursionCache& cache, const VecR& loss_grad);

// Per-frequency contribution of the Matsubara LDOS head: loss_grad is
// ∂L/∂ρ_m and the cache's n-index supplies the (−1)^n weight. Summing the
// returned sets over n ≥ 0 of the folded grid gives the full gradient.
GradientSet matsubara_ldos_gradients(const RecursionCache& cache, const VecR& loss_grad);

// loss_grad = ∂L/∂y at the conductance head (needs corner blocks: forward
// must have run with want_corner = true, else missing-cache error).
GradientSet cc_gradients(const RecursionCache& cache, double loss_grad);

// ---------------------------------------------------------------------------
// Finite-difference oracle. Central differences with step h on every free
// parameter coordinate: intra diagonals, Re/Im of masked upper-triangle intra
// entries, Re/Im of masked inter entries. loss(params) must be deterministic.
GradientSet finite_difference_grad(const FnnParameters& params,
                                   const std::function<double(const FnnParameters&)>& loss,
                                   double h = 1e-5);

// Flat view of the free coordinates (for comparisons and norms): masked
// entries in a fixed order, Re and Im listed separately.
std::vector<double> flatten_free(const GradientSet& grads, const FnnParameters& params);

// Mean |∂L/∂t| over the masked inter entries of each pair 0..L−1 (the
// layer-profile diagnostic used to compare heads).
std::vector<double> gradient_layer_profile(const GradientSet& grads, const FnnParameters& params);

}  // namespace fnn
