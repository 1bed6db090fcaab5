#include "lundq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lundq/common.hpp"
#include "lundq/metrics.hpp"

namespace lundq::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw usage_error("epochs must be >= 1");
  if (batch_size < 1) throw usage_error("batch size must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw usage_error("warmup must be shorter than the epoch budget");
  if (!(lr_init > 0.0) || !(lr_peak > 0.0) || !(lr_final > 0.0))
    throw usage_error("learning rates must be positive");
  if (weight_decay < 0.0) throw usage_error("weight decay must be >= 0");
  if (patience < 0) throw usage_error("patience must be >= 0");
}

double lr_at(double t, const TrainConfig& cfg) {
  cfg.validate();
  if (!(t >= 0.0 && t <= 1.0))
    throw usage_error("schedule progress must lie in [0, 1]");
  const double warmup_frac =
      static_cast<double>(cfg.warmup_epochs) / static_cast<double>(cfg.epochs);
  if (t <= warmup_frac && warmup_frac > 0.0)
    return cfg.lr_init + (cfg.lr_peak - cfg.lr_init) * (t / warmup_frac);
  const double u = warmup_frac < 1.0 ? (t - warmup_frac) / (1.0 - warmup_frac) : 1.0;
  return cfg.lr_final +
         (cfg.lr_peak - cfg.lr_final) * 0.5 * (1.0 + std::cos(kPi * u));
}

AdamW::AdamW(std::size_t n_params, const TrainConfig& cfg)
    : beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay),
      m_(n_params, 0.0),
      v_(n_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad,
                 double lr, const std::vector<bool>& decay_mask) {
  if (params.size() != m_.size() || grad.size() != m_.size() ||
      decay_mask.size() != m_.size())
    throw usage_error("optimizer size mismatch");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (decay_mask[i]) params[i] -= lr * weight_decay_ * params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
}

EarlyStopResult early_stopping(std::span<const double> val_losses,
                               int patience) {
  if (patience < 1) throw usage_error("patience must be >= 1");
  if (val_losses.empty()) throw usage_error("empty validation trace");
  EarlyStopResult out;
  double best = val_losses[0];
  out.best_epoch = 1;
  int last_improvement = 0;  // the baseline epoch does not count
  for (std::size_t e = 1; e <= val_losses.size(); ++e) {
    if (e > 1 && val_losses[e - 1] < best) {
      best = val_losses[e - 1];
      out.best_epoch = static_cast<int>(e);
      last_improvement = static_cast<int>(e);
    }
    if (static_cast<int>(e) - last_improvement >= patience) {
      out.stop_epoch = static_cast<int>(e);
      break;
    }
  }
  return out;
}

namespace {

struct SplitView {
  std::vector<const data::JetRecord*> records;
  std::vector<std::size_t> ids;
  std::vector<int> labels;
};

SplitView view_of(const data::Dataset& ds, data::Split split) {
  SplitView view;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.split[i] != split) continue;
    view.records.push_back(&ds.records[i]);
    view.ids.push_back(i);
    view.labels.push_back(ds.records[i].label);
  }
  return view;
}

void require_both_classes(const SplitView& view, const char* name) {
  if (view.records.empty())
    throw data_error(std::string(name) + " split is empty");
  const bool has0 = std::find(view.labels.begin(), view.labels.end(), 0) !=
                    view.labels.end();
  const bool has1 = std::find(view.labels.begin(), view.labels.end(), 1) !=
                    view.labels.end();
  if (!has0 || !has1)
    throw data_error(std::string(name) + " split must contain both classes");
}

struct SplitEval {
  double loss = 0.0;
  double auc = 0.0;
};

SplitEval evaluate_split(const models::Model& model, const SplitView& view,
                         int threads) {
  const auto logits = models::batch_logits(model, view.records, threads);
  SplitEval out;
  std::vector<metrics::ScoredSample> scored(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.loss += models::bce_loss(logits[i], view.labels[i]);
    scored[i] = {models::sigmoid(logits[i]), view.labels[i]};
  }
  out.loss /= static_cast<double>(logits.size());
  out.auc = metrics::roc_auc(scored).auc;
  return out;
}

}  // namespace

TrainResult train_model(models::Model& model, const data::Dataset& dataset,
                        const TrainConfig& cfg) {
  cfg.validate();
  const SplitView train_view = view_of(dataset, data::Split::Train);
  const SplitView val_view = view_of(dataset, data::Split::Val);
  require_both_classes(train_view, "train");
  require_both_classes(val_view, "val");

  const std::size_t n_train = train_view.records.size();
  const std::size_t steps_per_epoch =
      (n_train + static_cast<std::size_t>(cfg.batch_size) - 1) /
      static_cast<std::size_t>(cfg.batch_size);
  const std::size_t total_steps =
      steps_per_epoch * static_cast<std::size_t>(cfg.epochs);

  AdamW optimizer(model.params().size(), cfg);
  const std::vector<bool> mask = model.decay_mask();
  std::mt19937_64 shuffle_rng(cfg.seed);

  TrainResult result;
  std::vector<double> best_params;
  double best_auc = -1.0;
  std::vector<double> val_losses;
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::size_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    double last_lr = 0.0;
    for (std::size_t begin = 0; begin < n_train;
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(cfg.batch_size), n_train);
      std::vector<const data::JetRecord*> batch;
      std::vector<std::size_t> batch_ids;
      batch.reserve(end - begin);
      batch_ids.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(train_view.records[perm[k]]);
        batch_ids.push_back(train_view.ids[perm[k]]);
      }

      const double t =
          total_steps > 1
              ? static_cast<double>(step) / static_cast<double>(total_steps - 1)
              : 0.0;
      last_lr = lr_at(t, cfg);
      const auto bg =
          models::bce_batch_backward(model, batch, batch_ids, cfg.threads);
      if (!std::isfinite(bg.loss)) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", step " << step;
        throw data_error(os.str());
      }
      optimizer.step(model.params().flat(), bg.grad, last_lr, mask);
      ++step;
    }

    const SplitEval train_eval = evaluate_split(model, train_view, cfg.threads);
    const SplitEval val_eval = evaluate_split(model, val_view, cfg.threads);
    result.history.push_back(
        {epoch, train_eval.loss, val_eval.loss, val_eval.auc, last_lr});
    val_losses.push_back(val_eval.loss);
    if (cfg.on_epoch) cfg.on_epoch(result.history.back());

    if (val_eval.auc > best_auc) {
      best_auc = val_eval.auc;
      result.best_epoch = epoch;
      const auto flat = model.params().flat();
      best_params.assign(flat.begin(), flat.end());
    }
    if (cfg.patience > 0 &&
        early_stopping(val_losses, cfg.patience).stop_epoch == epoch)
      break;
  }

  model.params().set_flat(best_params);
  return result;
}

namespace {

// Seeded per-class subsample of a split, returned in natural (stable) order.
// Asking for at least the whole pool returns the pool untouched.
std::vector<std::size_t> subsample_split(const data::Dataset& ds,
                                         data::Split split,
                                         std::size_t per_class,
                                         std::mt19937_64& rng) {
  std::vector<std::size_t> chosen;
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      if (ds.split[i] == split && ds.records[i].label == label)
        pool.push_back(i);
    if (per_class < pool.size()) {
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(per_class);
      std::sort(pool.begin(), pool.end());
    }
    chosen.insert(chosen.end(), pool.begin(), pool.end());
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

std::vector<LowdataPoint> kfold_lowdata(const data::Dataset& dataset,
                                        std::span<const std::size_t> sizes,
                                        int k, const ModelFactory& factory,
                                        const TrainConfig& cfg) {
  cfg.validate();
  if (k < 1) throw usage_error("fold count must be >= 1");
  if (sizes.empty()) throw usage_error("no training-set sizes given");

  const auto train_counts = dataset.class_counts(data::Split::Train);
  for (std::size_t size : sizes)
    if (size == 0 || size > train_counts[0] || size > train_counts[1])
      throw data_error("requested size exceeds the available training jets per class");

  const SplitView test_view = view_of(dataset, data::Split::Test);
  require_both_classes(test_view, "test");

  std::vector<LowdataPoint> out;
  for (std::size_t size : sizes) {
    std::vector<double> fold_aucs;
    for (int fold = 0; fold < k; ++fold) {
      const std::uint64_t fold_seed = cfg.seed + static_cast<std::uint64_t>(fold);
      std::seed_seq membership_seq{cfg.seed, static_cast<std::uint64_t>(size),
                                   static_cast<std::uint64_t>(fold)};
      std::mt19937_64 membership_rng(membership_seq);

      data::Dataset fold_ds;
      for (std::size_t i :
           subsample_split(dataset, data::Split::Train, size, membership_rng)) {
        fold_ds.records.push_back(dataset.records[i]);
        fold_ds.split.push_back(data::Split::Train);
      }
      for (std::size_t i :
           subsample_split(dataset, data::Split::Val, size, membership_rng)) {
        fold_ds.records.push_back(dataset.records[i]);
        fold_ds.split.push_back(data::Split::Val);
      }

      auto model = factory(fold_seed);
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = fold_seed;
      train_model(*model, fold_ds, fold_cfg);
      fold_aucs.push_back(evaluate_split(*model, test_view, cfg.threads).auc);
    }

    LowdataPoint point;
    point.size = size;
    point.mean_auc =
        std::accumulate(fold_aucs.begin(), fold_aucs.end(), 0.0) /
        static_cast<double>(fold_aucs.size());
    if (fold_aucs.size() > 1) {
      double acc = 0.0;
      for (double a : fold_aucs) acc += (a - point.mean_auc) * (a - point.mean_auc);
      point.std_auc = std::sqrt(acc / static_cast<double>(fold_aucs.size() - 1));
    }
    out.push_back(point);
  }
  return out;
}

}  // namespace lundq::train
