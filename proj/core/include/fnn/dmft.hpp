#pragma once

// Real-space (inhomogeneous) mean-field solver for Falicov–Kimball-type
// models on Matsubara grids, and the training loop that re-solves the
// mean field per sample and differentiates through the frozen self-energy.

#include <cstdint>
#include <vector>

#include "fnn/common.hpp"
#include "fnn/datasets.hpp"
#include "fnn/training.hpp"

namespace fnn {

// Symmetric fermionic grid ω_n = 2πT(n + 1/2), n = −n0..n0−1. Only n ≥ 0 is
// stored anywhere; negative frequencies follow by conjugation.
struct MatsubaraGrid {
  double temperature = 0.0;
  int n0 = 0;
  double omega(int n) const { return 2.0 * kPi * temperature * (n + 0.5); }
  void validate() const;
};

struct DmftConfig {
  double mixing = 0.5;
  double tolerance = 1e-6;
  int max_iterations = 500;
  bool search_ef = true;   // bisect E_f for mean f occupation 1/2
  double fixed_ef = 0.0;   // used when search_ef is false
  double ef_bracket = 30.0;  // initial bisection bracket ±(|U|+this)
  // Lattice geometry for the seed patterns and order parameters (0 = infer a
  // square from the matrix size).
  Eigen::Index lx = 0, ly = 0;
  FkInstance::SeedPattern seed_pattern = FkInstance::SeedPattern::checkerboard;
  std::uint64_t seed = 0;             // random seed pattern only
  const std::vector<VecC>* warm_start = nullptr;  // Σ from a previous solve
};

struct DmftResult {
  std::vector<VecC> sigma;   // Σ_r(iω_n), n = 0..n0−1 (size n0, each length N)
  std::vector<VecC> g_loc;   // converged local Green's function, same layout
  VecR n_f;                  // localized occupations per site
  double ef = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;  // Σ_n‖G_imp − G_loc‖₂ per iteration
  // Staggered order parameters of n_f: |⟨n_f (−1)^{x+y}⟩|, |⟨n_f (−1)^x⟩|,
  // |⟨n_f (−1)^y⟩|.
  double checkerboard_op = 0.0, stripe_x_op = 0.0, stripe_y_op = 0.0;
};

// Self-consistency loop over the sites of h (the full one-body matrix; for
// coupled lattice+model systems pass the assembled matrix and list the
// interacting sites). Σ is initialized at the Hartree value U·n_f_seed from
// the configured symmetry-breaking pattern unless a warm start is given.
DmftResult dmft_solve(const MatC& h, const std::vector<Eigen::Index>& interacting_sites, double u,
                      double mu, const MatsubaraGrid& grid, const DmftConfig& cfg);

// Occupation of one localized level against a Weiss field:
//   n_f = 1 / (1 + exp[(E_f − μ)/T − S]),
//   S = Σ_n ln(1 − U·𝒢_0(iω_n)) summed over the full symmetric grid.
// weiss takes 𝒢_0(iω_n) for n = 0..n0−1 (negative n by conjugation).
double nf_occupation(const std::vector<cxd>& weiss, double ef, double mu, double temperature,
                     double u, int n0);

// ---------------------------------------------------------------------------
// Interacting training: per sample and epoch, re-solve the mean field on the
// coupled (input lattice + trainable model) matrix with warm-started Σ,
// evaluate Matsubara LDOS outputs at the folded grid (n ≥ 0), and accumulate
// per-frequency gradients with Σ held fixed. Samples whose solver does not
// converge are skipped and counted.
struct InteractingTrainConfig {
  TrainConfig base;          // loss, lr, batching, epochs, seed
  // grid.n0 fixes the frequency count; each sample is solved and read out at
  // its instance temperature (grid.temperature is the fallback when an
  // instance leaves it unset).
  MatsubaraGrid grid;
  DmftConfig dmft;
  int readout_sites = 0;     // 0 = all last-layer sites feed the class scores
};

struct InteractingTrainResult {
  FnnParameters best;
  FnnParameters final;
  std::vector<EpochMetrics> history;
  int skipped_samples = 0;
  int best_epoch = 0;
};

InteractingTrainResult train_interacting(FnnParameters params,
                                         const std::vector<FkSample>& train_set,
                                         const std::vector<FkSample>& test_set,
                                         const InteractingTrainConfig& cfg);

}  // namespace fnn
