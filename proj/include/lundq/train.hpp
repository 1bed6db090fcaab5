#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lundq/data.hpp"
#include "lundq/models.hpp"

namespace lundq::train {

struct EpochStats;

struct TrainConfig {
  int epochs = 50;
  int batch_size = 1024;
  double lr_init = 1e-3;
  double lr_peak = 5e-3;
  double lr_final = 1e-3;
  int warmup_epochs = 10;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 0;  // 0 disables early stopping
  std::uint64_t seed = 0;
  int threads = 0;  // 0 picks hardware concurrency
  std::function<void(const EpochStats&)> on_epoch;  // optional progress hook

  void validate() const;
};

/// Learning rate at normalized progress t in [0, 1]: linear warmup from
/// lr_init to lr_peak over the first warmup_epochs/epochs of progress, then
/// cosine decay to lr_final. Continuous, peaks exactly once.
double lr_at(double t, const TrainConfig& cfg);

/// Decoupled-weight-decay Adam. Decay multiplies masked parameters by
/// (1 - lr * wd) before the moment update, so a zero-gradient fresh step
/// leaves v * (1 - lr * wd).
class AdamW {
 public:
  AdamW(std::size_t n_params, const TrainConfig& cfg);
  void step(std::span<double> params, std::span<const double> grad, double lr,
            const std::vector<bool>& decay_mask);

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long step_count_ = 0;
  std::vector<double> m_, v_;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
  double lr = 0.0;  // rate used by the epoch's last optimizer step
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;  // epoch with the highest validation AUC
};

/// Minibatch training with a per-epoch reseeded shuffle, the warmup-cosine
/// schedule evaluated at every optimizer step, and per-epoch metrics
/// computed with frozen end-of-epoch parameters. The model is left holding
/// the parameters of the best-validation-AUC epoch. Early stopping (when
/// patience > 0) watches validation loss.
TrainResult train_model(models::Model& model, const data::Dataset& dataset,
                        const TrainConfig& cfg);

struct EarlyStopResult {
  int stop_epoch = 0;  // 0 when the trace never triggers the patience rule
  int best_epoch = 0;  // 1-based argmin of the validation loss
};

/// Pure scan of a validation-loss trace: an improvement is a strict new
/// minimum, the first epoch is the baseline, and training stops at the first
/// epoch lying `patience` epochs past the last improvement.
EarlyStopResult early_stopping(std::span<const double> val_losses, int patience);

using ModelFactory = std::function<std::unique_ptr<models::Model>(std::uint64_t seed)>;

struct LowdataPoint {
  std::size_t size = 0;  // training jets per class
  double mean_auc = 0.0;
  double std_auc = 0.0;
};

/// k independently seeded subsample folds per training-set size. Each fold
/// draws `size` jets per class from the train split (and up to `size` per
/// class from the val split), trains a fresh model, and scores AUC on the
/// full test split. A fold asking for the whole pool keeps it in natural
/// order, so size = pool with k = 1 reproduces a plain train_model run.
std::vector<LowdataPoint> kfold_lowdata(const data::Dataset& dataset,
                                        std::span<const std::size_t> sizes,
                                        int k, const ModelFactory& factory,
                                        const TrainConfig& cfg);

}  // namespace lundq::train
