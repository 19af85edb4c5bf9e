#include "fnn/dmft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fnn/backprop.hpp"
#include "fnn/greens.hpp"

namespace fnn {

void MatsubaraGrid::validate() const {
  if (temperature <= 0.0) throw shape_error("temperature must be positive");
  if (n0 <= 0) throw shape_error("grid needs at least one positive frequency");
}

double nf_occupation(const std::vector<cxd>& weiss, double ef, double mu, double temperature,
                     double u, int n0) {
  if (temperature <= 0.0) throw shape_error("temperature must be positive");
  if (static_cast<int>(weiss.size()) != n0) throw shape_error("weiss field does not match grid");
  double s = 0.0;
  for (int n = 0; n < n0; ++n) {
    // negative frequencies contribute the conjugate term: 2·Re ln(1 − U·𝒢₀)
    s += 2.0 * std::real(std::log(cxd(1.0, 0.0) - u * weiss[static_cast<std::size_t>(n)]));
  }
  const double x = (ef - mu) / temperature - s;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

namespace {

VecR seed_occupations(FkInstance::SeedPattern pattern, Eigen::Index lx, Eigen::Index ly,
                      std::uint64_t seed) {
  VecR n(lx * ly);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index y = 0; y < ly; ++y)
    for (Eigen::Index x = 0; x < lx; ++x) {
      double v = 0.5;
      switch (pattern) {
        case FkInstance::SeedPattern::checkerboard: v = ((x + y) % 2 == 0) ? 1.0 : 0.0; break;
        case FkInstance::SeedPattern::stripe_x: v = (x % 2 == 0) ? 1.0 : 0.0; break;
        case FkInstance::SeedPattern::stripe_y: v = (y % 2 == 0) ? 1.0 : 0.0; break;
        case FkInstance::SeedPattern::uniform: v = 0.5; break;
        case FkInstance::SeedPattern::random: v = coin(rng) ? 1.0 : 0.0; break;
      }
      n[y * lx + x] = v;
    }
  return n;
}

double stable_logistic(double x) {  // 1/(1+e^x)
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace

DmftResult dmft_solve(const MatC& h, const std::vector<Eigen::Index>& interacting_sites, double u,
                      double mu, const MatsubaraGrid& grid, const DmftConfig& cfg) {
  grid.validate();
  if (h.rows() != h.cols() || h.rows() == 0) throw shape_error("matrix must be square");
  if (interacting_sites.empty()) throw shape_error("need at least one interacting site");
  const Eigen::Index n_sites = h.rows();
  for (Eigen::Index r : interacting_sites)
    if (r < 0 || r >= n_sites) throw shape_error("interacting site out of range");
  if (cfg.mixing <= 0.0 || cfg.mixing > 1.0) throw shape_error("mixing must lie in (0, 1]");

  const Eigen::Index n_int = static_cast<Eigen::Index>(interacting_sites.size());
  Eigen::Index lx = cfg.lx, ly = cfg.ly;
  if (lx <= 0 || ly <= 0) {
    const auto root = static_cast<Eigen::Index>(std::llround(std::sqrt(double(n_int))));
    if (root * root != n_int)
      throw shape_error("cannot infer a square lattice from the interacting sites");
    lx = ly = root;
  }
  if (lx * ly != n_int) throw shape_error("lattice does not match the interacting sites");

  const int n0 = grid.n0;
  const double temp = grid.temperature;

  // Σ and the per-iteration fields live on the full site set; entries off the
  // interacting sites stay zero.
  std::vector<VecC> sigma(n0, VecC::Zero(n_sites));
  if (cfg.warm_start != nullptr) {
    if (static_cast<int>(cfg.warm_start->size()) != n0) throw shape_error("warm start grid differs");
    for (int n = 0; n < n0; ++n) {
      if ((*cfg.warm_start)[n].size() != n_sites) throw shape_error("warm start size differs");
      sigma[n] = (*cfg.warm_start)[n];
    }
  } else {
    const VecR n_seed = seed_occupations(cfg.seed_pattern, lx, ly, cfg.seed);
    for (int n = 0; n < n0; ++n)
      for (Eigen::Index s = 0; s < n_int; ++s) sigma[n][interacting_sites[s]] = u * n_seed[s];
  }

  DmftResult result;
  std::vector<VecC> gloc(n0, VecC::Zero(n_sites));  // diagonal entries, all sites
  std::vector<VecC> winv(n0, VecC::Zero(n_sites));  // 𝒢₀⁻¹ on interacting sites
  MatC work(n_sites, n_sites);

  auto local_greens = [&]() {
    for (int n = 0; n < n0; ++n) {
      work = -h;
      const cxd z(0.0, grid.omega(n));
      work.diagonal().array() += z;
      work.diagonal() -= sigma[n];
      Eigen::PartialPivLU<MatC> lu(work);
      const MatC g = lu.inverse();
      gloc[n] = g.diagonal();
    }
  };

  VecR s_field(n_int);
  VecR n_f = VecR::Constant(n_int, 0.5);
  double ef = cfg.search_ef ? 0.0 : cfg.fixed_ef;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    local_greens();
    for (int n = 0; n < n0; ++n)
      for (Eigen::Index s = 0; s < n_int; ++s) {
        const Eigen::Index r = interacting_sites[s];
        winv[n][r] = 1.0 / gloc[n][r] + sigma[n][r];
      }
    // S_r = Σ_n 2 Re ln(1 − U·𝒢₀) decides the f occupation together with E_f
    for (Eigen::Index s = 0; s < n_int; ++s) {
      const Eigen::Index r = interacting_sites[s];
      double acc = 0.0;
      for (int n = 0; n < n0; ++n)
        acc += 2.0 * std::real(std::log(cxd(1.0, 0.0) - u / winv[n][r]));
      s_field[s] = acc;
    }
    auto mean_nf = [&](double level) {
      double acc = 0.0;
      for (Eigen::Index s = 0; s < n_int; ++s)
        acc += stable_logistic((level - mu) / temp - s_field[s]);
      return acc / static_cast<double>(n_int);
    };
    if (cfg.search_ef) {
      double lo = mu - (std::abs(u) + cfg.ef_bracket);
      double hi = mu + (std::abs(u) + cfg.ef_bracket);
      if (mean_nf(lo) < 0.5 || mean_nf(hi) > 0.5)
        throw convergence_error("f-level bracket does not straddle half filling");
      for (int b = 0; b < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++b) {
        const double mid = 0.5 * (lo + hi);
        (mean_nf(mid) > 0.5 ? lo : hi) = mid;
      }
      ef = 0.5 * (lo + hi);
    }
    for (Eigen::Index s = 0; s < n_int; ++s)
      n_f[s] = stable_logistic((ef - mu) / temp - s_field[s]);

    // two-pole impurity solution and the self-energy it implies
    double residual_sq = 0.0;
    std::vector<VecC> sigma_new = sigma;
    for (int n = 0; n < n0; ++n)
      for (Eigen::Index s = 0; s < n_int; ++s) {
        const Eigen::Index r = interacting_sites[s];
        const cxd gimp = (1.0 - n_f[s]) / winv[n][r] + n_f[s] / (winv[n][r] - u);
        sigma_new[n][r] = winv[n][r] - 1.0 / gimp;
        residual_sq += std::norm(gimp - gloc[n][r]);
      }
    const double residual = std::sqrt(residual_sq);
    result.residual_history.push_back(residual);
    result.iterations = it;
    if (residual < cfg.tolerance) {
      result.converged = true;
      sigma = std::move(sigma_new);
      break;
    }
    for (int n = 0; n < n0; ++n)
      sigma[n] = cfg.mixing * sigma_new[n] + (1.0 - cfg.mixing) * sigma[n];
  }

  local_greens();  // final G with the converged (or last) Σ
  result.sigma = std::move(sigma);
  result.g_loc = gloc;
  result.n_f = n_f;
  result.ef = ef;
  double cb = 0.0, sx = 0.0, sy = 0.0;
  for (Eigen::Index s = 0; s < n_int; ++s) {
    const Eigen::Index x = s % lx, y = s / lx;
    cb += n_f[s] * (((x + y) % 2 == 0) ? 1.0 : -1.0);
    sx += n_f[s] * ((x % 2 == 0) ? 1.0 : -1.0);
    sy += n_f[s] * ((y % 2 == 0) ? 1.0 : -1.0);
  }
  result.checkerboard_op = std::abs(cb) / static_cast<double>(n_int);
  result.stripe_x_op = std::abs(sx) / static_cast<double>(n_int);
  result.stripe_y_op = std::abs(sy) / static_cast<double>(n_int);
  return result;
}

// ---------------------------------------------------------------------------
// Interacting training

namespace {

struct SampleForward {
  bool ok = false;
  VecR rho;                           // folded density per last-layer site
  std::vector<RecursionCache> caches; // one per n ≥ 0 (only when requested)
};

// Re-solve the mean field on the coupled matrix, then run the layered
// recursion with the frozen Σ injected on the input layer.
SampleForward coupled_forward(const FnnParameters& params, const FkSample& sample,
                              const InteractingTrainConfig& cfg, std::vector<VecC>* warm,
                              int* skipped, bool keep_caches) {
  SampleForward out;
  const FkModel model = fk_build(sample.instance);
  const InputEncoding enc = InputEncoding::interacting(model.h, model.u);
  const Eigen::Index m0 = model.h.rows();
  MatsubaraGrid grid = cfg.grid;  // per-sample temperature, shared count
  if (model.temperature > 0.0) grid.temperature = model.temperature;
  grid.validate();

  std::vector<VecC> sigma_in(grid.n0, VecC::Zero(m0));
  if (!model.explicit_f && model.u != 0.0) {
    const MatC coupled = full_hamiltonian(assemble(params, enc));
    std::vector<Eigen::Index> sites(m0);
    std::iota(sites.begin(), sites.end(), 0);
    DmftConfig dc = cfg.dmft;
    dc.lx = model.lx;
    dc.ly = model.ly;
    dc.seed_pattern = model.seed_pattern;
    dc.seed = model.seed;
    if (!dc.search_ef) dc.fixed_ef = model.ef;
    if (warm != nullptr && static_cast<int>(warm->size()) == grid.n0) dc.warm_start = warm;
    const DmftResult solved = dmft_solve(coupled, sites, model.u, model.mu, grid, dc);
    if (!solved.converged) {
      if (skipped != nullptr) ++(*skipped);
      return out;
    }
    for (int n = 0; n < grid.n0; ++n) sigma_in[n] = solved.sigma[n].head(m0);
    if (warm != nullptr) *warm = solved.sigma;
  }

  const LayeredSystem sys = assemble(params, enc, &sigma_in);
  const Eigen::Index ml = params.spec.layer_sizes.back();
  out.rho = VecR::Zero(ml);
  for (int n = 0; n < grid.n0; ++n) {
    auto cache = recursive_forward(sys, EvaluationPoint::matsubara(grid.temperature, n), false);
    const MatC g = cache.diag_block_at(static_cast<Eigen::Index>(cache.layer_sizes.size()) - 1);
    const double c = -2.0 * ((n % 2 != 0) ? -1.0 : 1.0) / kPi;
    for (Eigen::Index m = 0; m < ml; ++m) out.rho[m] += c * g(m, m).imag();
    if (keep_caches) out.caches.push_back(std::move(cache));
  }
  out.ok = true;
  return out;
}

}  // namespace

InteractingTrainResult train_interacting(FnnParameters params,
                                         const std::vector<FkSample>& train_set,
                                         const std::vector<FkSample>& test_set,
                                         const InteractingTrainConfig& cfg) {
  params.validate();
  cfg.grid.validate();
  if (train_set.empty()) throw shape_error("empty training set");
  if (cfg.base.batch_size <= 0 || cfg.base.epochs <= 0)
    throw shape_error("batch size and epochs must be positive");
  const Eigen::Index ml = params.spec.layer_sizes.back();
  const Eigen::Index n_classes = cfg.readout_sites > 0 ? cfg.readout_sites : ml;
  if (n_classes > ml) throw shape_error("more readout sites than the output layer has");

  InteractingTrainResult result;
  std::mt19937_64 rng(cfg.base.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<VecC>> warm_train(train_set.size());
  std::vector<std::vector<VecC>> warm_test(test_set.size());

  double best_acc = -1.0;
  for (int epoch = 0; epoch < cfg.base.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double running_loss = 0.0;
    int running_hits = 0, seen = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.base.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.base.batch_size));
      GradientSet batch = GradientSet::zeros_like(params);
      int batch_used = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const FkSample& sample = train_set[order[k]];
        auto fwd = coupled_forward(params, sample, cfg, &warm_train[order[k]],
                                   &result.skipped_samples, true);
        if (!fwd.ok) continue;
        const VecR scores = fwd.rho.head(n_classes);
        const auto [value, grad] = ldos_loss(scores, sample.label, cfg.base.loss, n_classes);
        running_loss += value;
        ++seen;
        Eigen::Index arg = 0;
        scores.maxCoeff(&arg);
        running_hits += (arg == sample.label) ? 1 : 0;
        VecR padded = VecR::Zero(ml);
        padded.head(n_classes) = grad;
        for (const auto& cache : fwd.caches) batch += matsubara_ldos_gradients(cache, padded);
        ++batch_used;
      }
      if (batch_used == 0) continue;
      batch *= 1.0 / static_cast<double>(batch_used);
      apply_masks(batch, params);
      for (std::size_t k = 0; k < params.intra.size(); ++k)
        params.intra[k] -=
            cfg.base.learning_rate * (batch.d_intra[k] + cfg.base.weight_decay * params.intra[k]);
      for (std::size_t k = 0; k < params.inter.size(); ++k)
        params.inter[k] -=
            cfg.base.learning_rate * (batch.d_inter[k] + cfg.base.weight_decay * params.inter[k]);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = seen > 0 ? running_loss / seen : 0.0;
    metrics.train_accuracy = seen > 0 ? static_cast<double>(running_hits) / seen : 0.0;

    if (!test_set.empty()) {
      double loss_acc = 0.0;
      int hits = 0, used = 0;
      std::vector<double> scores1;
      std::vector<int> labels;
      for (std::size_t k = 0; k < test_set.size(); ++k) {
        auto fwd = coupled_forward(params, test_set[k], cfg, &warm_test[k],
                                   &result.skipped_samples, false);
        if (!fwd.ok) continue;
        const VecR scores = fwd.rho.head(n_classes);
        const auto [value, grad] = ldos_loss(scores, test_set[k].label, cfg.base.loss, n_classes);
        (void)grad;
        loss_acc += value;
        ++used;
        Eigen::Index arg = 0;
        scores.maxCoeff(&arg);
        hits += (arg == test_set[k].label) ? 1 : 0;
        if (n_classes == 2) {
          scores1.push_back(scores[1] - scores[0]);
          labels.push_back(test_set[k].label == 1 ? 1 : 0);
        }
      }
      if (used > 0) {
        metrics.test_loss = loss_acc / used;
        metrics.test_accuracy = static_cast<double>(hits) / used;
        if (n_classes == 2) metrics.test_auroc = auroc(scores1, labels);
      }
    }
    result.history.push_back(metrics);

    const double track = test_set.empty() ? metrics.train_accuracy : metrics.test_accuracy;
    if (track > best_acc) {
      best_acc = track;
      result.best = params;
      result.best_epoch = epoch;
    }
    if (cfg.base.epoch_sink) cfg.base.epoch_sink(epoch, params);
    if (cfg.base.stop_at_full_train_accuracy && metrics.train_accuracy == 1.0) break;
  }
  result.final = params;
  if (best_acc < 0.0) {
    result.best = params;
    result.best_epoch = static_cast<int>(result.history.size()) - 1;
  }
  return result;
}

}  // namespace fnn
