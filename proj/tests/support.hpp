#pragma once

// Shared helpers for the unit suites: seeded random matrices and systems.

#include <random>

#include "fnn/greens.hpp"

namespace fnn::test {

inline MatC random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                           double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  MatC a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = cxd(dist(rng), dist(rng));
  return a;
}

inline MatC random_hermitian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  return hermitize(random_complex(n, n, rng, scale));
}

struct RandomSystemOptions {
  int min_layers = 2, max_layers = 6;
  Eigen::Index min_width = 2, max_width = 8;
  bool diagonal_layer0 = false;
  bool surface = false;
  Eigen::Index force_last = 0;  // >0 pins the last-layer width (CC heads)
};

inline LayeredSystem random_system(std::mt19937_64& rng, const RandomSystemOptions& opt = {}) {
  std::uniform_int_distribution<int> nlayers(opt.min_layers, opt.max_layers);
  std::uniform_int_distribution<Eigen::Index> width(opt.min_width, opt.max_width);
  LayeredSystem sys;
  const int layers = nlayers(rng);
  for (int l = 0; l < layers; ++l) sys.layer_sizes.push_back(width(rng));
  if (opt.force_last > 0) sys.layer_sizes.back() = opt.force_last;

  sys.intra.resize(sys.layer_sizes.size());
  for (std::size_t l = 0; l < sys.layer_sizes.size(); ++l) {
    if (l == 0 && opt.diagonal_layer0) {
      sys.layer0_diagonal = true;
      std::normal_distribution<double> dist(0.0, 1.0);
      sys.intra0_diag.resize(sys.layer_sizes[0]);
      for (Eigen::Index i = 0; i < sys.intra0_diag.size(); ++i)
        sys.intra0_diag[i] = cxd(dist(rng), 0.0);
      continue;
    }
    sys.intra[l] = random_hermitian(sys.layer_sizes[l], rng);
  }
  for (std::size_t l = 0; l + 1 < sys.layer_sizes.size(); ++l)
    sys.inter.push_back(random_complex(sys.layer_sizes[l], sys.layer_sizes[l + 1], rng));

  if (opt.surface) {
    std::uniform_int_distribution<Eigen::Index> swidth(2, 6);
    const Eigen::Index ms = swidth(rng);
    sys.has_surface = true;
    std::uniform_real_distribution<double> pos(0.1, 2.0);
    sys.surface_g00.resize(ms);
    for (Eigen::Index i = 0; i < ms; ++i) sys.surface_g00[i] = cxd(0.0, -kPi * pos(rng));
    sys.surface_coupling = random_complex(ms, sys.layer_sizes[0], rng);
  }
  return sys;
}

}  // namespace fnn::test
