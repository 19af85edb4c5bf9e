#pragma once

// Supervised training of layered models: losses over the two heads,
// minibatch SGD with weight decay, deterministic shuffling, and evaluation
// (accuracy, rank-based AUROC).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fnn/backprop.hpp"
#include "fnn/model.hpp"

namespace fnn {

enum class Head { ldos, cc };
enum class Loss { cross_entropy, mean_square };

struct TrainSample {
  InputEncoding input;
  int label = 0;  // class index (LDOS head) or 0/1 (CC head)
};

struct TrainConfig {
  Head head = Head::ldos;
  Loss loss = Loss::cross_entropy;
  double energy = 0.0;        // retarded evaluation energy E
  double broadening = 0.005;  // γ
  double learning_rate = 0.005;
  double weight_decay = 0.0;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 1;
  bool stop_at_full_train_accuracy = false;
  bool record_mi_trace = false;  // per-epoch input↔output mutual information
  int mi_probe_count = 8;        // samples used for the MI trace
  // Optional per-epoch sink (checkpointing, live logging).
  std::function<void(int epoch, const FnnParameters&)> epoch_sink;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double test_auroc = std::numeric_limits<double>::quiet_NaN();  // binary only
  double mi_trace = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  FnnParameters best;   // highest test accuracy (ties: earliest epoch)
  FnnParameters final;  // after the last epoch
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
};

// LDOS head: softmax cross-entropy over y (loss seed = softmax − onehot) or
// mean-square against a one-hot target. Returns (loss, ∂L/∂y).
std::pair<double, VecR> ldos_loss(const VecR& y, int target, Loss loss, Eigen::Index n_classes);

// CC head: s = y/(y + y0) with frozen scale y0 > 0; cross-entropy on s or
// mean-square (s − t)²/2. Returns (loss, ∂L/∂y).
std::pair<double, double> cc_loss(double y, int target, double y0, Loss loss);

// Forward evaluation of one sample: class scores (LDOS: raw y per class;
// CC: the logistic s). Used by eval paths and threshold metrics.
VecR model_scores(const FnnParameters& params, const InputEncoding& input, const TrainConfig& cfg);

// Rank-based AUROC with ties counted half. labels are 0/1; scores any reals.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

TrainResult train(FnnParameters params, const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& test_set, const TrainConfig& cfg);

// JSONL serialization of one epoch record (no timestamps: reruns must be
// byte-identical).
std::string metrics_to_jsonl(const EpochMetrics& m);

}  // namespace fnn
