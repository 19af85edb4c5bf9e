#pragma once

// Free-fermion interpretability tools: ground-state correlation matrices,
// entanglement entropies and mutual information, the layer-block unitary
// that triangularizes cross-correlations with the output layer, in-gap
// spectral probes, and locality-truncated column perturbations that keep the
// coupled matrix near-singular.

#include <cstdint>
#include <optional>
#include <vector>

#include "fnn/common.hpp"
#include "fnn/model.hpp"

namespace fnn {

// Site partition of a coupled system: offsets[l]..offsets[l+1] are the site
// indices of layer l; offsets.back() is the total site count.
struct SiteLayout {
  std::vector<Eigen::Index> offsets;
  Eigen::Index layers() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }
  Eigen::Index layer_size(Eigen::Index l) const { return offsets[l + 1] - offsets[l]; }
};
SiteLayout layout_of(const LayeredSystem& system);

// C_ij = ⟨c_i† c_j⟩ of the filled Fermi sea: C = (Q Λ̃ Q†)ᵀ where Λ̃ marks
// ε_n ≤ fermi_energy. Degenerate Fermi level (any ε within 1e-9) is an error.
MatC ground_state_correlation(const MatC& h, double fermi_energy);

// Entropies of a subsystem from the principal submatrix C_A (spectrum must
// lie in [0, 1] up to 1e-10; eigenvalues are clamped to [1e-14, 1−1e-14]
// before logs). Rényi: S_α = (1/(1−α)) Σ_k ln(ζ_k^α + (1−ζ_k)^α), α > 0, ≠ 1.
double entanglement_entropy(const MatC& c_sub);
double renyi_entropy(const MatC& c_sub, double alpha);

struct EntanglementReport {
  double s_a = 0.0, s_b = 0.0, s_ab = 0.0, i_ab = 0.0;
  std::vector<Eigen::Index> a, b;
};
EntanglementReport mutual_information(const MatC& c, const std::vector<Eigen::Index>& a,
                                      const std::vector<Eigen::Index>& b);

// Mean input↔output mutual information of the coupled ground state at
// fermi_energy over one sample (onsite encodings only — the external surface
// has no explicit Hamiltonian).
double input_output_mi(const FnnParameters& params, const InputEncoding& input,
                       double fermi_energy);

// Block-diagonal unitary U (identity on the input and output layers) chosen
// per hidden layer by Gram–Schmidt on the columns of C_{l,L}, making
// C'_{l,L} = U_l† C_{l,L} upper triangular with rows below M_L exactly zero;
// returns U and C' = U† C U. Rank-deficient columns are completed with
// standard basis vectors (lowest available index).
struct LogicFlow {
  MatC u;
  MatC c_prime;
};
LogicFlow logic_flow_transform(const MatC& c, const SiteLayout& layout);

// Dense spectrum plus the distance of the eigenvalue nearest zero.
struct IngapProbe {
  VecR eigenvalues;
  double min_abs = 0.0;
};
IngapProbe spectral_ingap_probe(const MatC& h);

// ---------------------------------------------------------------------------
// Column perturbations of a coupled (input lattice + model) matrix K that is
// already near-singular (σ_min(K) < tol, else criterion-not-satisfied
// error). For each returned copy a target input-layer column i is drawn and
// a unit direction ĥ_δi is built as a random combination of the other
// columns of K; with truncate, entries farther than `radius` (minimum-image
// lattice metric) from site i are dropped before renormalizing; with
// hermitize, Ĥ_0 ← H_in + ω(ĥ_δi e_i† + h.c.) restricted to input rows.
// The exact mode (no truncation, no hermitization) adds ω·ĥ_δi to column i
// of K only, which preserves det K = 0 identically.
struct PerturbationOptions {
  double omega = 0.1;        // |ω_i| ≤ ω (the full strength is used)
  int count = 1;             // number of perturbed copies
  double radius = 2.0;       // locality radius (lattice constants)
  bool hermitize = true;
  bool truncate = true;
  double tol = 1e-6;         // singularity precondition on σ_min(K)
  std::uint64_t seed = 1;
};

struct PerturbedModel {
  MatC h0;                 // perturbed input block (hermitize mode)
  MatC overall;            // perturbed coupled matrix
  Eigen::Index target = 0; // perturbed column
  double sigma_min_after = 0.0;
};

struct PerturbationOutcome {
  std::vector<PerturbedModel> models;
  double sigma_min_before = 0.0;
};

PerturbationOutcome generative_perturbation(const MatC& h_input, const FnnParameters& params,
                                            Eigen::Index lattice_size,
                                            const PerturbationOptions& options);

}  // namespace fnn
