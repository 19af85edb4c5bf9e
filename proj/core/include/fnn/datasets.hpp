#pragma once

// Dataset builders: MNIST loading (IDX, gzip), the two-band lattice model
// with tunable topology, disorder sampling, a real-space Chern marker, and
// Falicov–Kimball instances, plus a binary sample container format.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fnn/common.hpp"
#include "fnn/training.hpp"

namespace fnn {

// ---------------------------------------------------------------------------
// MNIST (IDX format, plain or gzip-compressed). Pixels are scaled to [0, 1].
struct ImageSample {
  VecR pixels;  // row-major, height×width
  int label = 0;
  int width = 28, height = 28;
};

std::vector<ImageSample> load_mnist(const std::string& images_path, const std::string& labels_path);
// Convenience: directory holding the canonical four files; train or test split.
std::vector<ImageSample> load_mnist_dir(const std::string& dir, bool train);

// 2×2 average-pool down to 14×14 (averaging preserves the [0,1] range).
ImageSample downsample_2x2(const ImageSample& s);

// Image → input encodings. onsite: diagonal Ĥ_0 = scale·diag(pixels);
// external: x = pixels (clipped at 0).
InputEncoding encode_image_onsite(const ImageSample& s, double scale = 1.0);
InputEncoding encode_image_external(const ImageSample& s);

// ---------------------------------------------------------------------------
// Two-band model on an L×L periodic square lattice (single orbital per site,
// complex diagonal hoppings opening a topological gap at half filling):
//   x-bonds: (−1)^y · 1
//   y-bonds: 1 + (−1)^y (1 − κ)
//   (+x̂+ŷ): (−1)^y · iκ/2,   (+x̂−ŷ): −(−1)^y · iκ/2        (+ h.c.)
// κ = 1 is the clean topological point; the transition sits at κ = 1/2.
// L must be even (the two-site magnetic cell must tile the torus).
MatC chern_hamiltonian(double kappa, Eigen::Index lattice_size);

// Uniform disorder: onsite U[−w0, w0]; every nearest-neighbor bond gets an
// independent real U[−w1, w1] added; every diagonal bond U[−w2, w2].
// Deterministic in (seed).
MatC add_disorder(const MatC& h, double w0, double w1, double w2, Eigen::Index lattice_size,
                  std::uint64_t seed);

// Real-space Chern marker at fermi energy 0 (half filling):
//   C = (24π/N) Σ_{j<k<l, |S| ≤ max_area} Im(P_jk P_kl P_lj) S_jkl
// with P the occupied-state projector and S the signed (counterclockwise
// positive) triangle area under minimum-image coordinates. Normalized so the
// clean κ = 0.9 lattice gives C ≈ +1. Also reports the spectral gap around 0.
struct ChernMarker {
  double c = 0.0;
  double gap = 0.0;
};
ChernMarker kubo_chern(const MatC& h, Eigen::Index lattice_size, double max_area = 3.0);

// Two-sided labeling with a reject band: 1 ("chern") for C ∈ [0.7, 1.3],
// 0 ("normal") for |C| ≤ 0.3, nullopt otherwise; also rejects gap < gap_min.
std::optional<int> label_sample(const ChernMarker& marker, double gap_min = 0.05);

struct ChernDatasetConfig {
  Eigen::Index lattice_size = 12;
  double kappa = 0.5;          // used when sweep_kappa is false
  bool sweep_kappa = false;    // κ ~ U[0, 1] per sample when true
  double w0_max = 3.0, w0_min = 1.0;  // W0 ~ U[w0_min, w0_max]
  double w1_max = 1.0;                // W1 ~ U[0, w1_max]
  double w2_max = 0.5;                // W2 ~ U[0, w2_max]
  double gap_min = 0.05;
  bool balanced = true;  // alternate accepted labels until both quotas fill
};

struct ChernSample {
  MatC h;
  double kappa = 0.0, w0 = 0.0, w1 = 0.0, w2 = 0.0;
  ChernMarker marker;
  int label = 0;
};

std::vector<ChernSample> generate_chern_dataset(int count, std::uint64_t seed,
                                                const ChernDatasetConfig& cfg);

// ---------------------------------------------------------------------------
// Falicov–Kimball instances on an Lx×Ly periodic lattice: spinless c
// electrons with NN hopping t, NNN hopping tp, chemical potential μ, coupled
// with strength U to localized f occupations; f count fixed at half filling
// through the f-level E_f. The fkmit convention pins μ = U/2, E_f = −μ.
struct FkInstance {
  Eigen::Index lx = 4, ly = 4;
  double t = 1.0, tp = 0.0;
  double u = 1.0, mu = 0.0, ef = 0.0;
  double temperature = 0.05;
  bool fkmit = false;  // μ := U/2, E_f := −μ
  // Optional frozen f occupations (size lx·ly): fk_build then adds U·n_f to
  // the diagonal and the instance describes a one-body model.
  VecR f_occupations;
  // Symmetry-breaking seed for the mean-field solver.
  enum class SeedPattern { checkerboard, stripe_x, stripe_y, uniform, random };
  SeedPattern seed_pattern = SeedPattern::checkerboard;
  std::uint64_t seed = 0;
};

struct FkModel {
  MatC h;  // hoppings − μ·I (+ U·diag(n_f) when occupations are frozen)
  double u = 0.0, mu = 0.0, ef = 0.0, temperature = 0.0;
  Eigen::Index lx = 0, ly = 0;
  bool explicit_f = false;
  FkInstance::SeedPattern seed_pattern = FkInstance::SeedPattern::checkerboard;
  std::uint64_t seed = 0;
};

FkModel fk_build(const FkInstance& inst);

struct FkSample {
  FkInstance instance;
  int label = 0;
};

// ---------------------------------------------------------------------------
// Binary sample container: magic "FNND" | version u8 = 1 | manifest (JSON,
// u64 length prefix) | per sample: metadata (JSON, u64 length prefix) +
// row-major complex f64 matrix (dims in the metadata). Little-endian.
struct StoredSample {
  std::string metadata_json;
  MatC matrix;
};

void save_container(const std::string& path, const std::string& manifest_json,
                    const std::vector<StoredSample>& samples);
struct LoadedContainer {
  std::string manifest_json;
  std::vector<StoredSample> samples;
};
LoadedContainer load_container(const std::string& path);

}  // namespace fnn
