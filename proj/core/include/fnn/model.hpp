#pragma once

// Trainable layered models: architecture specs with masked connectivity,
// parameter initialization, input encodings, assembly into a LayeredSystem,
// and binary checkpoint I/O.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fnn/common.hpp"
#include "fnn/greens.hpp"

namespace fnn {

// Intra-layer connectivity over an optional 2D layer geometry. The diagonal
// (chemical potentials) is always allowed. Without a geometry the layer is
// treated as a 1D chain.
enum class IntraConnectivity { none, nearest, next_nearest, full };

// Inter-layer connectivity. tree: disjoint 2×2 windows (previous layer must
// be exactly twice the next in both directions). overlapping: 4- or 3-wide
// windows per direction (previous width 2w+2 or 2w+1), clipped at the edges.
enum class InterConnectivity { full, tree, overlapping };

struct LayerGeometry {
  Eigen::Index width = 0, height = 0;
  bool valid() const { return width > 0 && height > 0; }
  Eigen::Index count() const { return width * height; }
};

// Sizes are the trainable layers M_1..M_L; the input layer M_0 is part of the
// encoding, not the parameters. Geometries are optional per layer (required
// by tree/overlapping inter masks and by 2D intra masks).
struct ArchitectureSpec {
  Eigen::Index input_size = 0;
  LayerGeometry input_geometry;                       // optional
  std::vector<Eigen::Index> layer_sizes;              // M_1..M_L
  std::vector<LayerGeometry> layer_geometry;          // per trainable layer; may be invalid()
  std::vector<IntraConnectivity> intra_connectivity;  // per trainable layer
  std::vector<InterConnectivity> inter_connectivity;  // pairs (0,1)..(L-1,L)

  Eigen::Index depth() const { return static_cast<Eigen::Index>(layer_sizes.size()); }
  void validate() const;
};

MaskMat intra_mask(const LayerGeometry& geom, Eigen::Index size, IntraConnectivity conn);
MaskMat inter_mask(const LayerGeometry& prev, Eigen::Index prev_size, const LayerGeometry& next,
                   Eigen::Index next_size, InterConnectivity conn);

// Parameters: Hermitian intra blocks for layers 1..L and inter blocks for
// pairs (l,l+1), l = 0..L−1, each with a frozen boolean mask. Off-diagonal
// intra entries are stored as a full Hermitian matrix whose lower triangle
// mirrors the upper (kept consistent by construction); diagonals are real.
// cc_scale is the frozen scale y0 of the conductance head's logistic map
// (0 until calibrated on the first training batch).
struct FnnParameters {
  ArchitectureSpec spec;
  std::vector<MatC> intra;
  std::vector<MatC> inter;
  std::vector<MaskMat> intra_masks;
  std::vector<MaskMat> inter_masks;
  double cc_scale = 0.0;

  Eigen::Index depth() const { return static_cast<Eigen::Index>(intra.size()); }
  void validate() const;  // masks respected, Hermiticity, shape consistency
};

// Masked i.i.d. complex Gaussian entries, std 1/√fan-in with fan-in counted
// per receiving site (the column of each block); diagonals are real Gaussian.
// Deterministic for a fixed seed: entries are drawn in a fixed matrix order.
FnnParameters init_parameters(const ArchitectureSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Input encodings.
//  * onsite: input-layer Hamiltonian Ĥ_0, dense Hermitian or purely diagonal
//    (diagonal values must be real).
//  * external_ldos: nonnegative intensities x_m enter as a fixed surface
//    Ĝ00 = −iπ·diag(x); the first trainable hopping couples surface → layer 1.
//  * interacting: dense Ĥ_0 plus a Hubbard-type interaction strength U on the
//    input sites; per-frequency self-energies (from the mean-field solver)
//    are injected at assembly.
struct InputEncoding {
  enum class Variant { onsite, external_ldos, interacting };
  Variant variant = Variant::onsite;

  bool diagonal = false;  // onsite fast path
  VecR onsite_diag;
  MatC dense_h0;

  VecR ldos_values;  // external_ldos, x_m ≥ 0

  double interaction_u = 0.0;  // interacting

  static InputEncoding onsite_diagonal(const VecR& diag);
  static InputEncoding onsite_dense(const MatC& h0);
  static InputEncoding external(const VecR& x);
  static InputEncoding interacting(const MatC& h0, double u);

  Eigen::Index input_size() const;
  void validate() const;
};

// Builds the evaluable system for one input. Self-energies (interacting
// encoding) are copied into the system when provided.
LayeredSystem assemble(const FnnParameters& params, const InputEncoding& input,
                       const std::vector<VecC>* self_energy = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints. Layout (little-endian throughout):
//   magic "FNN1" | version u8 = 1 | L u32 | input_size u64 | M_1..M_L u64 |
//   cc_scale f64 | intra matrices 1..L | inter matrices 0..L−1 |
//   intra masks | inter masks
// Matrices are row-major (re, im) f64 pairs; masks are row-major bit arrays
// padded to whole bytes per matrix. Connectivity enums are not stored: masks
// are authoritative after loading (the spec records sizes and full/none tags).
void save_checkpoint(const FnnParameters& params, const std::string& path);
FnnParameters load_checkpoint(const std::string& path);

}  // namespace fnn
