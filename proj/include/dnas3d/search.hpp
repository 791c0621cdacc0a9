#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnas3d/data.hpp"
#include "dnas3d/gumbel.hpp"
#include "dnas3d/metrics.hpp"
#include "dnas3d/network.hpp"
#include "dnas3d/optim.hpp"

namespace dnas3d {

struct SearchConfig {
  int epochs = 100;
  int batch_size = 8;
  double tau_start = 5.0;
  double tau_end = 0.5;
  double alpha_lr = 1e-3;
  double weight_lr = 1e-3;
  double weight_momentum = 0.9;
  double weight_decay = 3e-4;
  double val_fraction = 0.2;
  bool resample_per_phase = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Batch {
  Tensor input;  // [B, 1, d, h, w]
  std::vector<int> labels;
};

Batch make_batch(const std::vector<Volume>& volumes, std::span<const std::size_t> indices,
                 const TransformConfig& transforms, Split split, Rng& rng);

// Consecutive chunks of `order`; a trailing chunk of one item is dropped
// when `drop_singleton` (train-mode BN needs two samples when features are 1x1x1).
std::vector<std::vector<std::size_t>> make_chunks(const std::vector<std::size_t>& order, int batch_size,
                                                  bool drop_singleton);

/// Phase 1 without the optimizer step: samples selections with
/// straight-through gates, backpropagates the validation loss into alpha
/// only. Returns the loss; selections are written to `selections`.
double alpha_gradient(Supernet& net, GumbelSampler& sampler, const Batch& val, std::vector<int>& selections);

/// Phase 2 without the optimizer step: backpropagates the training loss into
/// the stem, head and selected candidates only.
double weight_gradient(Supernet& net, std::span<const int> selections, const Batch& train);

struct StepStats {
  double val_loss = 0.0;
  double train_loss = 0.0;
  std::vector<int> alpha_selections;
  std::vector<int> weight_selections;
};

StepStats search_step(Supernet& net, GumbelSampler& sampler, const Batch& train, const Batch& val,
                      Optimizer& alpha_opt, Optimizer& weight_opt, bool resample_per_phase = true);

struct SearchRecord {
  int epoch = 0;
  std::vector<int> choices;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double tau = 0.0;
  double train_loss = 0.0;
};

struct SearchHistory {
  SupernetConfig config;
  std::vector<SearchRecord> records;

  ArchDescriptor descriptor(std::size_t i) const;
};

nlohmann::json to_json(const SearchHistory& h);
SearchHistory history_from_json(const nlohmann::json& j);
void save_history(const std::string& path, const SearchHistory& h);
SearchHistory load_history(const std::string& path);

using SearchProgress = std::function<void(const SearchRecord&)>;

/// Alternating first-order search. Splits `train_pool` 80/20 (stratified)
/// into D_T / D_V, and per epoch records the argmax-of-alpha architecture
/// evaluated on D_V with supernet weights in eval mode.
SearchHistory run_search(Supernet& net, const std::vector<Volume>& train_pool, const TransformConfig& transforms,
                         const SearchConfig& config, const SearchProgress& progress = {});

SplitIndices search_split(const std::vector<Volume>& train_pool, double val_fraction, std::uint64_t seed);

/// Top k records by val_accuracy (ties: lower val_loss, then later epoch).
/// Records are not merged when epochs sampled the same architecture.
std::vector<ArchDescriptor> select_top_k(const SearchHistory& history, int k = 10);

struct ShortlistConfig {
  int batches_per_arch = 50;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct ShortlistResult {
  ArchDescriptor best;
  std::vector<ArchDescriptor> candidates;  // provenance updated with shortlist scores
};

ShortlistResult shortlist_train(const std::vector<ArchDescriptor>& archs, const std::vector<Volume>& train_pool,
                                const TransformConfig& transforms, const ShortlistConfig& config);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<int> labels;
};

EvalResult evaluate(ChildNet& net, const std::vector<Volume>& volumes, const TransformConfig& transforms,
                    int batch_size = 8);

// Populates uninitialized BN running statistics with one no-grad train-mode
// pass; statistics that were already initialized are left untouched.
void calibrate_batchnorm(ChildNet& net, const std::vector<Volume>& volumes, const TransformConfig& transforms,
                         int batch_size, Rng& rng);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double lr_min = 1e-5;
  double weight_decay = 0.0;
  int positive_class = 1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ChildNet model;
  std::vector<double> epoch_losses;
  MetricsReport report;
  EvalResult test;
};

using TrainProgress = std::function<void(int epoch, double loss, double lr)>;

/// Fresh child, Adam with cosine annealing, cross-entropy; metrics on `test`.
TrainResult train_child(const ArchDescriptor& arch, const std::vector<Volume>& train,
                        const std::vector<Volume>& test, const TransformConfig& transforms,
                        const TrainConfig& config, const TrainProgress& progress = {});

MetricsReport metrics_for(ChildNet& net, const EvalResult& eval, int positive_class);

}  // namespace dnas3d
