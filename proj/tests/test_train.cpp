#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "lundq/common.hpp"
#include "lundq/data.hpp"
#include "lundq/metrics.hpp"
#include "lundq/models.hpp"
#include "lundq/train.hpp"

using lundq::data::Dataset;
using lundq::models::make_qttn;
using lundq::models::QttnConfig;
using lundq::train::AdamW;
using lundq::train::early_stopping;
using lundq::train::lr_at;
using lundq::train::train_model;
using lundq::train::TrainConfig;

namespace {

Dataset toy_dataset(int n_per_class, std::uint64_t gen_seed,
                    double val_frac, double test_frac) {
  lundq::data::ToyGenConfig gen;
  gen.n_per_class = n_per_class;
  gen.seed = gen_seed;
  std::vector<lundq::data::JetRecord> records;
  for (const auto& ev : lundq::data::generate_toy_events(gen))
    if (auto rec =
            lundq::data::prepare_record(ev, lundq::data::PrepareOptions{}))
      records.push_back(std::move(*rec));
  return Dataset::from_records(std::move(records), val_frac, test_frac, 1);
}

TrainConfig quick_config(int epochs, int warmup) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.warmup_epochs = warmup;
  cfg.batch_size = 32;
  cfg.threads = 1;
  return cfg;
}

// mirrors the frozen end-of-epoch evaluation: mean BCE plus AUC over the
// sigmoid scores of a split, iterated in dataset order
std::pair<double, double> eval_split(const lundq::models::Model& model,
                                     const Dataset& ds,
                                     lundq::data::Split split) {
  double loss = 0.0;
  std::vector<lundq::metrics::ScoredSample> scored;
  const auto idx = ds.indices_of(split);
  for (std::size_t i : idx) {
    const double logit = model.logit(ds.records[i]);
    loss += lundq::models::bce_loss(logit, ds.records[i].label);
    scored.push_back(
        {lundq::models::sigmoid(logit), ds.records[i].label});
  }
  loss /= static_cast<double>(idx.size());
  return {loss, lundq::metrics::roc_auc(scored).auc};
}

}  // namespace

TEST_CASE("the schedule warms up linearly and decays along a cosine") {
  TrainConfig cfg = quick_config(50, 10);
  cfg.lr_init = 1e-3;
  cfg.lr_peak = 5e-3;
  cfg.lr_final = 1e-3;
  CHECK(lr_at(0.0, cfg) == 1e-3);
  CHECK(lr_at(0.2, cfg) == doctest::Approx(5e-3).epsilon(1e-15));  // 10/50
  CHECK(lr_at(1.0, cfg) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(lr_at(0.1, cfg) == doctest::Approx(3e-3).epsilon(1e-12));
  // halfway down the cosine: final + (peak - final)/2
  CHECK(lr_at(0.6, cfg) == doctest::Approx(3e-3).epsilon(1e-12));

  // continuity across the warmup knee, single interior peak
  double prev = lr_at(0.0, cfg);
  double max_seen = prev;
  for (int i = 1; i <= 1000; ++i) {
    const double t = static_cast<double>(i) / 1000.0;
    const double lr = lr_at(t, cfg);
    CHECK(std::abs(lr - prev) < 5e-5);
    max_seen = std::max(max_seen, lr);
    prev = lr;
  }
  CHECK(max_seen == doctest::Approx(5e-3).epsilon(1e-6));

  TrainConfig flat = quick_config(5, 0);  // no warmup: start at the peak
  CHECK(lr_at(0.0, flat) == doctest::Approx(flat.lr_peak).epsilon(1e-15));

  CHECK_THROWS_AS(lr_at(-0.1, cfg), lundq::usage_error);
  CHECK_THROWS_AS(lr_at(1.1, cfg), lundq::usage_error);
  CHECK_THROWS_AS(lr_at(std::nan(""), cfg), lundq::usage_error);
}

TEST_CASE("config validation rejects impossible schedules") {
  TrainConfig cfg = quick_config(5, 1);
  CHECK_NOTHROW(cfg.validate());
  cfg.warmup_epochs = 5;  // warmup must leave room for decay
  CHECK_THROWS_AS(cfg.validate(), lundq::usage_error);
  cfg = quick_config(0, 0);
  CHECK_THROWS_AS(cfg.validate(), lundq::usage_error);
  cfg = quick_config(5, 1);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), lundq::usage_error);
  cfg = quick_config(5, 1);
  cfg.lr_peak = 0.0;
  CHECK_THROWS_AS(cfg.validate(), lundq::usage_error);
  cfg = quick_config(5, 1);
  cfg.weight_decay = -1e-4;
  CHECK_THROWS_AS(cfg.validate(), lundq::usage_error);
  cfg = quick_config(5, 1);
  cfg.patience = -1;
  CHECK_THROWS_AS(cfg.validate(), lundq::usage_error);
}

TEST_CASE("a zero-gradient step applies pure decoupled decay") {
  TrainConfig cfg = quick_config(5, 1);
  cfg.weight_decay = 0.01;
  AdamW opt(3, cfg);
  std::vector<double> params{2.0, -1.5, 0.75};
  const std::vector<double> grad{0.0, 0.0, 0.0};
  const std::vector<bool> mask{true, false, true};
  const double lr = 0.1;
  opt.step(params, grad, lr, mask);
  CHECK(params[0] == 2.0 * (1.0 - lr * 0.01));
  CHECK(params[1] == -1.5);  // exempt from decay
  CHECK(params[2] == 0.75 * (1.0 - lr * 0.01));
}

TEST_CASE("the first optimizer step moves by a signed learning rate") {
  TrainConfig cfg = quick_config(5, 1);
  cfg.weight_decay = 0.0;
  AdamW opt(2, cfg);
  std::vector<double> params{1.0, -0.25};
  const std::vector<double> grad{0.5, -2.0};
  opt.step(params, grad, 0.1, std::vector<bool>{true, true});
  // bias-corrected first step: lr * g / (|g| + eps)
  CHECK(params[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8))
                         .epsilon(1e-15));
  CHECK(params[1] == doctest::Approx(-0.25 + 0.1 * 2.0 / (2.0 + 1e-8))
                         .epsilon(1e-15));

  std::vector<double> wrong_size{1.0};
  CHECK_THROWS_AS(opt.step(wrong_size, grad, 0.1, {true, true}),
                  lundq::usage_error);
}

TEST_CASE("the loss-trace scan stops a fixed distance past the last minimum") {
  // constant trace: the opening epoch is the baseline, never an improvement
  const std::vector<double> flat(30, 0.5);
  for (int p : {1, 3, 20}) {
    const auto r = early_stopping(flat, p);
    CHECK(r.stop_epoch == p);
    CHECK(r.best_epoch == 1);
  }

  std::vector<double> dip{0.7, 0.6, 0.65, 0.66};
  dip.resize(25, 0.66);
  const auto r = early_stopping(dip, 20);
  CHECK(r.stop_epoch == 22);  // last strict minimum at epoch 2
  CHECK(r.best_epoch == 2);

  // steady improvement never triggers
  std::vector<double> falling;
  for (int i = 0; i < 10; ++i) falling.push_back(1.0 - 0.05 * i);
  const auto never = early_stopping(falling, 3);
  CHECK(never.stop_epoch == 0);
  CHECK(never.best_epoch == 10);

  // ties are not improvements
  const std::vector<double> tie{0.5, 0.5, 0.5};
  CHECK(early_stopping(tie, 2).stop_epoch == 2);

  CHECK_THROWS_AS(early_stopping(flat, 0), lundq::usage_error);
  CHECK_THROWS_AS(early_stopping(std::vector<double>{}, 1),
                  lundq::usage_error);
}

TEST_CASE("training is reproducible and indifferent to worker count") {
  const Dataset ds = toy_dataset(60, 5, 0.25, 0.15);
  TrainConfig cfg = quick_config(4, 1);
  cfg.seed = 7;

  auto run = [&](int threads) {
    auto model = make_qttn(QttnConfig::make(3, 1), 7);
    TrainConfig c = cfg;
    c.threads = threads;
    const auto result = train_model(*model, ds, c);
    const auto flat = model->params().flat();
    return std::make_pair(result,
                          std::vector<double>(flat.begin(), flat.end()));
  };

  const auto [res1, params1] = run(1);
  const auto [res2, params2] = run(1);
  const auto [res4, params4] = run(4);

  REQUIRE(res1.history.size() == 4);
  for (const auto* other : {&res2, &res4}) {
    CHECK(other->best_epoch == res1.best_epoch);
    REQUIRE(other->history.size() == res1.history.size());
    for (std::size_t e = 0; e < res1.history.size(); ++e) {
      CHECK(other->history[e].train_loss == res1.history[e].train_loss);
      CHECK(other->history[e].val_loss == res1.history[e].val_loss);
      CHECK(other->history[e].val_auc == res1.history[e].val_auc);
      CHECK(other->history[e].lr == res1.history[e].lr);
    }
  }
  CHECK(params1 == params2);
  CHECK(params1 == params4);

  // a different shuffle seed changes the trajectory
  auto model_b = make_qttn(QttnConfig::make(3, 1), 7);
  TrainConfig other_seed = cfg;
  other_seed.seed = 8;
  const auto res_b = train_model(*model_b, ds, other_seed);
  CHECK(res_b.history.back().train_loss != res1.history.back().train_loss);
}

TEST_CASE("epoch records carry the schedule rate of their last step") {
  const Dataset ds = toy_dataset(40, 3, 0.25, 0.15);
  TrainConfig cfg = quick_config(5, 1);
  cfg.seed = 2;
  auto model = make_qttn(QttnConfig::make(3, 1), 2);
  const auto result = train_model(*model, ds, cfg);

  const std::size_t n_train = ds.indices_of(lundq::data::Split::Train).size();
  const std::size_t steps_per_epoch =
      (n_train + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size);
  const std::size_t total = steps_per_epoch * 5;
  REQUIRE(result.history.size() == 5);
  for (std::size_t e = 0; e < 5; ++e) {
    const std::size_t last_step = (e + 1) * steps_per_epoch - 1;
    const double t = double(last_step) / double(total - 1);
    CHECK(result.history[e].lr == lr_at(t, cfg));
    CHECK(result.history[e].epoch == int(e) + 1);
  }
}

TEST_CASE("training lowers the loss and leaves the best-epoch parameters") {
  const Dataset ds = toy_dataset(150, 11, 0.2, 0.2);
  TrainConfig cfg = quick_config(5, 1);
  cfg.seed = 4;
  cfg.lr_peak = 2e-2;
  auto model = make_qttn(QttnConfig::make(3, 1), 4);
  const auto result = train_model(*model, ds, cfg);

  REQUIRE(result.history.size() == 5);
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
  CHECK(result.history.back().val_auc > 0.55);

  // best_epoch is the first strict maximum of the validation AUC
  int want_best = 1;
  for (std::size_t e = 1; e < result.history.size(); ++e)
    if (result.history[e].val_auc >
        result.history[std::size_t(want_best) - 1].val_auc)
      want_best = int(e) + 1;
  CHECK(result.best_epoch == want_best);

  // the model was rewound to that epoch: re-scoring the val split must
  // reproduce its frozen metrics bit for bit
  const auto [val_loss, val_auc] =
      eval_split(*model, ds, lundq::data::Split::Val);
  CHECK(val_auc == result.history[std::size_t(want_best) - 1].val_auc);
  CHECK(val_loss == result.history[std::size_t(want_best) - 1].val_loss);
}

TEST_CASE("patience cuts training short by the documented rule") {
  const Dataset ds = toy_dataset(40, 9, 0.25, 0.15);
  TrainConfig cfg = quick_config(30, 1);
  cfg.seed = 3;
  cfg.patience = 2;
  cfg.lr_peak = 1.0;  // oversized rate so the validation loss stalls
  auto model = make_qttn(QttnConfig::make(3, 1), 3);
  const auto result = train_model(*model, ds, cfg);

  REQUIRE(!result.history.empty());
  CHECK(result.history.size() < 30);
  std::vector<double> trace;
  for (const auto& h : result.history) trace.push_back(h.val_loss);
  CHECK(early_stopping(trace, 2).stop_epoch == int(result.history.size()));

  // patience 1 can never see an improvement past the baseline
  auto eager = make_qttn(QttnConfig::make(3, 1), 3);
  TrainConfig one = cfg;
  one.patience = 1;
  CHECK(train_model(*eager, ds, one).history.size() == 1);
}

TEST_CASE("training refuses datasets with a missing class or empty split") {
  TrainConfig cfg = quick_config(2, 1);
  auto model = make_qttn(QttnConfig::make(3, 1), 0);

  Dataset no_val = toy_dataset(20, 1, 0.0, 0.2);
  CHECK_THROWS_AS(train_model(*model, no_val, cfg), lundq::data_error);

  Dataset ds = toy_dataset(20, 1, 0.25, 0.15);
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    if (ds.split[i] == lundq::data::Split::Train) ds.records[i].label = 1;
  CHECK_THROWS_AS(train_model(*model, ds, cfg), lundq::data_error);
}

TEST_CASE("subsample folds with the whole pool reproduce plain training") {
  const Dataset ds = toy_dataset(40, 21, 0.25, 0.2);
  TrainConfig cfg = quick_config(3, 1);
  cfg.seed = 13;

  auto factory = [](std::uint64_t seed) {
    return make_qttn(QttnConfig::make(3, 1), seed);
  };

  auto reference = factory(cfg.seed);
  train_model(*reference, ds, cfg);
  double ref_loss = 0.0;
  std::vector<lundq::metrics::ScoredSample> scored;
  for (std::size_t i : ds.indices_of(lundq::data::Split::Test)) {
    const double logit = reference->logit(ds.records[i]);
    ref_loss += logit;  // consume the value; only the AUC matters below
    scored.push_back(
        {lundq::models::sigmoid(logit), ds.records[i].label});
  }
  const double ref_auc = lundq::metrics::roc_auc(scored).auc;

  const auto counts = ds.class_counts(lundq::data::Split::Train);
  const std::size_t pool = std::min(counts[0], counts[1]);
  const std::vector<std::size_t> sizes{pool};
  const auto points = lundq::train::kfold_lowdata(ds, sizes, 1, factory, cfg);
  REQUIRE(points.size() == 1);
  CHECK(points[0].size == pool);
  CHECK(points[0].std_auc == 0.0);  // a single fold has no spread
  CHECK(points[0].mean_auc == ref_auc);
}

TEST_CASE("subsample folds vary by seed and respect the pool bounds") {
  const Dataset ds = toy_dataset(30, 8, 0.25, 0.2);
  TrainConfig cfg = quick_config(2, 1);
  cfg.seed = 5;
  auto factory = [](std::uint64_t seed) {
    return make_qttn(QttnConfig::make(3, 1), seed);
  };

  const std::vector<std::size_t> sizes{6};
  const auto points = lundq::train::kfold_lowdata(ds, sizes, 3, factory, cfg);
  REQUIRE(points.size() == 1);
  CHECK(points[0].std_auc > 0.0);  // distinct folds, distinct models
  CHECK(points[0].mean_auc > 0.0);
  CHECK(points[0].mean_auc < 1.0);

  // byte-stable across repeat calls
  const auto again = lundq::train::kfold_lowdata(ds, sizes, 3, factory, cfg);
  CHECK(again[0].mean_auc == points[0].mean_auc);
  CHECK(again[0].std_auc == points[0].std_auc);

  CHECK_THROWS_AS(lundq::train::kfold_lowdata(ds, std::vector<std::size_t>{0},
                                              1, factory, cfg),
                  lundq::data_error);
  CHECK_THROWS_AS(lundq::train::kfold_lowdata(
                      ds, std::vector<std::size_t>{100000}, 1, factory, cfg),
                  lundq::data_error);
  CHECK_THROWS_AS(lundq::train::kfold_lowdata(ds, sizes, 0, factory, cfg),
                  lundq::usage_error);
  CHECK_THROWS_AS(lundq::train::kfold_lowdata(ds, std::vector<std::size_t>{},
                                              1, factory, cfg),
                  lundq::usage_error);
}
