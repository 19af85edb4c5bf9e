#include "fnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "fnn/interpret.hpp"

namespace fnn {

namespace {

VecR softmax(const VecR& y) {
  const double peak = y.maxCoeff();
  VecR e = (y.array() - peak).exp();
  return e / e.sum();
}

constexpr double kProbFloor = 1e-12;

}  // namespace

std::pair<double, VecR> ldos_loss(const VecR& y, int target, Loss loss, Eigen::Index n_classes) {
  if (y.size() != n_classes) throw shape_error("output size does not match the class count");
  if (target < 0 || target >= n_classes) throw shape_error("label out of range");
  if (loss == Loss::cross_entropy) {
    const VecR p = softmax(y);
    VecR grad = p;
    grad[target] -= 1.0;
    return {-std::log(std::max(p[target], kProbFloor)), grad};
  }
  VecR diff = y;
  diff[target] -= 1.0;
  return {0.5 * diff.squaredNorm(), diff};
}

std::pair<double, double> cc_loss(double y, int target, double y0, Loss loss) {
  if (y0 <= 0.0) throw shape_error("cc scale must be positive (calibrate before use)");
  if (target != 0 && target != 1) throw shape_error("cc labels must be 0 or 1");
  const double s_raw = y / (y + y0);
  const double s = std::clamp(s_raw, kProbFloor, 1.0 - kProbFloor);
  const double t = static_cast<double>(target);
  if (loss == Loss::cross_entropy) {
    const double value = -(t * std::log(s) + (1.0 - t) * std::log(1.0 - s));
    // dL/ds · ds/dy collapses to (s − t)/y for the logistic map s = y/(y+y0)
    const double grad = (y > kProbFloor) ? (s - t) / y : (s - t) / kProbFloor;
    return {value, grad};
  }
  const double ds_dy = y0 / ((y + y0) * (y + y0));
  return {0.5 * (s - t) * (s - t), (s - t) * ds_dy};
}

VecR model_scores(const FnnParameters& params, const InputEncoding& input,
                  const TrainConfig& cfg) {
  const auto pt = EvaluationPoint::retarded(cfg.energy, cfg.broadening);
  const bool cc = cfg.head == Head::cc;
  auto cache = recursive_forward(assemble(params, input), pt, cc);
  if (!cc) return ldos_output(cache);
  const double y = cc_output(cache);
  if (params.cc_scale <= 0.0) throw shape_error("cc scale must be positive (calibrate before use)");
  VecR s(1);
  s[0] = y / (y + params.cc_scale);
  return s;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw shape_error("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // average ranks over tie groups (1-based)
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k] == 1) {
      rank_pos += rank[k];
      ++n_pos;
    }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double u = rank_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

struct EvalOutcome {
  double loss = 0.0;
  double accuracy = 0.0;
  double auroc_value = std::numeric_limits<double>::quiet_NaN();
};

EvalOutcome evaluate(const FnnParameters& params, const std::vector<TrainSample>& set,
                     const TrainConfig& cfg) {
  EvalOutcome out;
  if (set.empty()) return out;
  const Eigen::Index n_classes = params.spec.layer_sizes.back();
  std::vector<double> scores;
  std::vector<int> labels;
  double loss_acc = 0.0;
  int hits = 0;
  const bool binary = (cfg.head == Head::cc) || n_classes == 2;
  for (const auto& sample : set) {
    const VecR s = model_scores(params, sample.input, cfg);
    if (cfg.head == Head::ldos) {
      const auto [value, grad] = ldos_loss(s, sample.label, cfg.loss, n_classes);
      (void)grad;
      loss_acc += value;
      Eigen::Index arg = 0;
      s.maxCoeff(&arg);
      hits += (arg == sample.label) ? 1 : 0;
      if (binary) scores.push_back(s[1] - s[0]);
    } else {
      // model_scores already maps through the logistic; recover y for the loss
      const double sc = s[0];
      const double y = params.cc_scale * sc / std::max(1.0 - sc, kProbFloor);
      const auto [value, grad] = cc_loss(y, sample.label, params.cc_scale, cfg.loss);
      (void)grad;
      loss_acc += value;
      hits += ((sc >= 0.5 ? 1 : 0) == sample.label) ? 1 : 0;
      scores.push_back(sc);
    }
    if (binary) labels.push_back(sample.label == 1 ? 1 : 0);
  }
  out.loss = loss_acc / static_cast<double>(set.size());
  out.accuracy = static_cast<double>(hits) / static_cast<double>(set.size());
  if (binary) out.auroc_value = auroc(scores, labels);
  return out;
}

double mi_trace_value(const FnnParameters& params, const std::vector<TrainSample>& train_set,
                      const TrainConfig& cfg) {
  double acc = 0.0;
  int n = 0;
  const int probes = std::min<int>(cfg.mi_probe_count, static_cast<int>(train_set.size()));
  for (int i = 0; i < probes; ++i) {
    if (train_set[i].input.variant != InputEncoding::Variant::onsite) continue;
    acc += input_output_mi(params, train_set[i].input, cfg.energy);
    ++n;
  }
  return n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrainResult train(FnnParameters params, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& test_set, const TrainConfig& cfg) {
  params.validate();
  if (train_set.empty()) throw shape_error("empty training set");
  if (cfg.batch_size <= 0 || cfg.epochs <= 0) throw shape_error("batch size and epochs must be positive");
  const Eigen::Index n_classes = params.spec.layer_sizes.back();
  if (cfg.head == Head::cc && n_classes != 1)
    throw shape_error("conductance head needs a single-site output layer");

  const auto pt = EvaluationPoint::retarded(cfg.energy, cfg.broadening);
  const bool cc = cfg.head == Head::cc;

  // Conductance scale: if unset, freeze the median bare output of the first
  // batch (dataset order) so s = y/(y+y0) starts centred.
  if (cc && params.cc_scale <= 0.0) {
    std::vector<double> ys;
    const int probe = std::min<int>(cfg.batch_size, static_cast<int>(train_set.size()));
    for (int i = 0; i < probe; ++i) {
      auto cache = recursive_forward(assemble(params, train_set[i].input), pt, true);
      ys.push_back(cc_output(cache));
    }
    std::sort(ys.begin(), ys.end());
    const double median = ys[ys.size() / 2];
    params.cc_scale = std::max(median, 1e-12);
  }

  TrainResult result;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double running_loss = 0.0;
    int running_hits = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      GradientSet batch = GradientSet::zeros_like(params);
      for (std::size_t k = start; k < stop; ++k) {
        const TrainSample& sample = train_set[order[k]];
        auto cache = recursive_forward(assemble(params, sample.input), pt, cc);
        if (cc) {
          const double y = cc_output(cache);
          const auto [value, grad] = cc_loss(y, sample.label, params.cc_scale, cfg.loss);
          running_loss += value;
          const double s = y / (y + params.cc_scale);
          running_hits += ((s >= 0.5 ? 1 : 0) == sample.label) ? 1 : 0;
          batch += cc_gradients(cache, grad);
        } else {
          const VecR y = ldos_output(cache);
          const auto [value, grad] = ldos_loss(y, sample.label, cfg.loss, n_classes);
          running_loss += value;
          Eigen::Index arg = 0;
          y.maxCoeff(&arg);
          running_hits += (arg == sample.label) ? 1 : 0;
          batch += ldos_gradients(cache, grad);
        }
      }
      batch *= 1.0 / static_cast<double>(stop - start);
      apply_masks(batch, params);
      const double lr = cfg.learning_rate;
      for (std::size_t k = 0; k < params.intra.size(); ++k)
        params.intra[k] -= lr * (batch.d_intra[k] + cfg.weight_decay * params.intra[k]);
      for (std::size_t k = 0; k < params.inter.size(); ++k)
        params.inter[k] -= lr * (batch.d_inter[k] + cfg.weight_decay * params.inter[k]);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = running_loss / static_cast<double>(train_set.size());
    metrics.train_accuracy =
        static_cast<double>(running_hits) / static_cast<double>(train_set.size());
    const EvalOutcome test = evaluate(params, test_set, cfg);
    metrics.test_loss = test.loss;
    metrics.test_accuracy = test.accuracy;
    metrics.test_auroc = test.auroc_value;
    if (cfg.record_mi_trace) metrics.mi_trace = mi_trace_value(params, train_set, cfg);
    result.history.push_back(metrics);

    if (test_set.empty() ? metrics.train_accuracy > best_acc : metrics.test_accuracy > best_acc) {
      best_acc = test_set.empty() ? metrics.train_accuracy : metrics.test_accuracy;
      result.best = params;
      result.best_epoch = epoch;
    }
    if (cfg.epoch_sink) cfg.epoch_sink(epoch, params);
    if (cfg.stop_at_full_train_accuracy && metrics.train_accuracy == 1.0) break;
  }
  result.final = params;
  if (best_acc < 0.0) {
    result.best = params;
    result.best_epoch = static_cast<int>(result.history.size()) - 1;
  }
  return result;
}

std::string metrics_to_jsonl(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["train_accuracy"] = m.train_accuracy;
  j["test_loss"] = m.test_loss;
  j["test_accuracy"] = m.test_accuracy;
  if (std::isnan(m.test_auroc))
    j["test_auroc"] = nullptr;
  else
    j["test_auroc"] = m.test_auroc;
  if (std::isnan(m.mi_trace))
    j["mi_trace"] = nullptr;
  else
    j["mi_trace"] = m.mi_trace;
  return j.dump();
}

}  // namespace fnn
