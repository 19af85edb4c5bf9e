#pragma once

// Layered Green's functions: the layer-by-layer recursion for diagonal and
// corner blocks, a brute-force full-inverse oracle, and the two output heads
// (last-layer LDOS, input-to-output conditional conductance).

#include <functional>
#include <vector>

#include "fnn/common.hpp"

namespace fnn {

// ---------------------------------------------------------------------------
// Evaluation points: retarded z = E + iγ, or Matsubara z = iω_n with
// ω_n = 2πT(n + 1/2). Matsubara points carry (T, n) so grids can be paired.
struct EvaluationPoint {
  enum class Kind { retarded, matsubara };
  Kind kind = Kind::retarded;
  double energy = 0.0;       // E (retarded)
  double broadening = 0.0;   // γ > 0 (retarded)
  double temperature = 0.0;  // T > 0 (matsubara)
  int n_index = 0;           // matsubara index n (may be negative)

  static EvaluationPoint retarded(double energy, double broadening);
  static EvaluationPoint matsubara(double temperature, int n);

  double frequency() const { return 2.0 * kPi * temperature * (n_index + 0.5); }
  cxd z() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Realified block [[Re A, Im A], [-Im A, Re A]] of a complex M×M' matrix.
// Square diagonal blocks (image-style layer-0 inputs can be 784 sites wide)
// keep a compressed two-vector form; everything else is dense 2M×2M'.
struct RealBlock {
  bool is_diag = false;
  VecR dre, dim;  // diagonal storage: Re/Im of the complex diagonal
  MatR dense;

  Eigen::Index block_rows() const { return is_diag ? dre.size() : dense.rows() / 2; }
  Eigen::Index block_cols() const { return is_diag ? dre.size() : dense.cols() / 2; }

  static RealBlock from_complex(const MatC& a);
  static RealBlock from_diag(const VecC& d);
  MatR to_dense() const;
  MatC to_complex() const;

  // this * b and this^T * b for dense b with 2M rows (row-half scaling in the
  // diagonal case, plain products otherwise).
  MatR mul(const MatR& b) const;
  MatR tmul(const MatR& b) const;
};

// ---------------------------------------------------------------------------
// A layered tight-binding system: intra-layer Hermitian blocks Ĥ_l and
// inter-layer hoppings T̂_l (M_l × M_{l+1}, coupling layer l to layer l+1).
//
// Two optional attachments cover the paper-style input encodings:
//  * a purely diagonal layer 0 (intra0_diag used instead of intra[0]);
//  * a fixed surface Green's function Ĝ00 feeding the first recursion step as
//    T̂_s† Ĝ00 T̂_s (the surface block is not part of layer_sizes);
//  * per-frequency self-energies added to the layer-0 diagonal at Matsubara
//    points (indexed by n ≥ 0; negative n uses the conjugate of entry −n−1).
struct LayeredSystem {
  std::vector<Eigen::Index> layer_sizes;  // M_0..M_L
  std::vector<MatC> intra;                // Ĥ_l; intra[0] empty when diagonal
  std::vector<MatC> inter;                // T̂_l
  bool layer0_diagonal = false;
  VecC intra0_diag;

  bool has_surface = false;
  VecC surface_g00;       // diagonal of the fixed Ĝ00 (surface size)
  MatC surface_coupling;  // T̂ from surface sites into layer 0

  std::vector<VecC> onsite_self_energy;  // Σ_r(iω_n) for n = 0..n0-1

  Eigen::Index depth() const { return static_cast<Eigen::Index>(layer_sizes.size()) - 1; }
  Eigen::Index total_sites() const;
  Eigen::Index corner_rows() const;  // surface size if attached, else M_0
  MatC intra_block(Eigen::Index l) const;  // materializes the diagonal case
  VecC self_energy_at(int n) const;        // conjugate-extended; empty if none
  void validate() const;
};

// Dense assembly of all layers (no surface, no self-energy): the block
// tridiagonal Ĥ with Ĥ_l on the diagonal and T̂_l above it.
MatC full_hamiltonian(const LayeredSystem& system);

// ---------------------------------------------------------------------------
// Forward recursion results. diag_blocks[N] = Ĝ^(N)_{N,N} and
// corner_blocks[N] = Ĝ^(N)_{0,N} ("0" meaning the surface when one is
// attached; both left empty at index 0 when layer 0 is compressed diagonal —
// that block lives in O[0]). The realified forms O = realify(Ĝ_NN),
// Y = realify(Ĝ_0N) and T[N] = realify(T̂_N) are what the backward pass
// consumes.
struct RecursionCache {
  EvaluationPoint point;
  std::vector<Eigen::Index> layer_sizes;
  bool has_surface = false;
  bool has_corner = true;

  std::vector<MatC> diag_blocks;
  std::vector<MatC> corner_blocks;

  std::vector<RealBlock> O, Y;
  std::vector<MatR> T;  // dense: hoppings are masked, not diagonal
  RealBlock surf_O;     // realify(Ĝ00)
  MatR surf_T;          // realify(surface coupling)
  MatR surf_prefix;     // realify(Ĝ00 T̂_s), the corner-chain prefix

  Eigen::Index last_size() const { return layer_sizes.back(); }
  MatC diag_block_at(Eigen::Index n) const;    // materializes the compressed case
  MatC corner_block_at(Eigen::Index n) const;  // requires corner cache
};

// The two recursion lines per layer: solve the diagonal block, then propagate
// the corner block. want_corner=false skips the corner chain (an allowed
// perf knob for LDOS-only training; the default keeps the full contract).
RecursionCache recursive_forward(const LayeredSystem& system, const EvaluationPoint& point,
                                 bool want_corner = true);

// Brute-force oracle: the full inverse (zI − Ĥ_total)⁻¹, with the surface
// term (if any) folded into the layer-0 block exactly as the recursion does.
// Refuses systems above the cap (default 512 sites) — it is O(N³).
MatC direct_greens(const LayeredSystem& system, const EvaluationPoint& point,
                   Eigen::Index oracle_cap = 512);
MatC direct_greens_at(const LayeredSystem& system, cxd z, Eigen::Index oracle_cap = 512);

// Output heads.
VecR ldos_output(const RecursionCache& cache);  // y_m = −Im[Ĝ^(L)_LL]_mm / π
double cc_output(const RecursionCache& cache);  // y = Σ_m |[Ĝ^(L)_0L]_m1|², M_L = 1

// Matsubara LDOS at one site: ρ = (i/π)·Σ_n (−1)^n G(iω_n)_rr over the full
// grid n = −n_0..n_0−1 (values ordered by n ascending). The result must be
// real to 1e-10; the imaginary residue is checked and discarded.
double matsubara_ldos(const std::vector<cxd>& diag_values);

// Truncation-error helper: |ρ(n_0) − ρ(2n_0)| for a callable producing
// G(iω_n)_rr at any n (documents the Matsubara cutoff quality).
double matsubara_truncation_error(const std::function<cxd(int)>& g_of_n, int n0);

}  // namespace fnn
