#include "lundq/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lundq/common.hpp"
#include "lundq/data.hpp"
#include "lundq/metrics.hpp"
#include "lundq/models.hpp"
#include "lundq/train.hpp"

namespace lundq::cli {
namespace {

using nlohmann::json;

/// Shortest text that round-trips a double exactly.
std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::ofstream open_for_write(const std::string& path) {
  ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  return out;
}

/// Maps JSON config keys onto options the command line left unset. Keys the
/// active subcommand does not know are rejected.
class ConfigBinder {
 public:
  template <typename T>
  void bind(CLI::Option* opt, const std::string& key, T* target) {
    keys_.insert(key);
    appliers_.push_back([opt, key, target](const json& j) {
      if (opt->count() > 0 || !j.contains(key)) return;
      try {
        *target = j.at(key).get<T>();
      } catch (const json::exception& e) {
        throw usage_error("config key '" + key + "': " + e.what());
      }
    });
  }

  void apply(const std::string& path) const {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open config file: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw usage_error(std::string("config file ") + path + ": " +
                                e.what());
    }
    if (!j.is_object())
      throw usage_error("config file must hold one JSON object");
    for (const auto& item : j.items())
      if (!keys_.count(item.key()))
        throw usage_error("unknown config key: " + item.key());
    for (const auto& f : appliers_) f(j);
  }

 private:
  std::set<std::string> keys_;
  std::vector<std::function<void(const json&)>> appliers_;
};

struct PrepFields {
  double radius = 0.8;
  int depth = 3;
  double lnkt_cut = 1.0;
  std::string mass_window;  // "lo:hi", empty disables the cut
};

std::optional<std::pair<double, double>> parse_mass_window(
    const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto colon = s.find(':');
  if (colon == std::string::npos)
    throw usage_error("mass window must look like lo:hi, got " + s);
  double lo = 0.0, hi = 0.0;
  try {
    std::size_t used = 0;
    lo = std::stod(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(s);
    const std::string rest = s.substr(colon + 1);
    hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw usage_error("mass window must look like lo:hi, got " + s);
  }
  if (!(lo <= hi))
    throw usage_error("mass window needs lo <= hi, got " + s);
  return std::make_pair(lo, hi);
}

data::PrepareOptions to_prepare(const PrepFields& p) {
  if (!(p.radius > 0.0))
    throw usage_error("jet radius must be positive");
  if (p.depth < 1) throw usage_error("depth must be at least 1");
  data::PrepareOptions opts;
  opts.r = p.radius;
  opts.depth = p.depth;
  opts.ln_kt_cut = p.lnkt_cut;
  opts.mass_window = parse_mass_window(p.mass_window);
  return opts;
}

void add_prep_options(CLI::App* cmd, ConfigBinder& bind, PrepFields& p) {
  bind.bind(cmd->add_option("--radius", p.radius,
                            "anti-kt radius for the jet finding"),
            "radius", &p.radius);
  bind.bind(cmd->add_option("--depth", p.depth,
                            "declustering depth (tree has 2^depth - 1 slots)"),
            "depth", &p.depth);
  bind.bind(cmd->add_option("--lnkt-cut", p.lnkt_cut,
                            "drop splittings with ln(kt) at or below this"),
            "lnkt_cut", &p.lnkt_cut);
  bind.bind(cmd->add_option("--mass-window", p.mass_window,
                            "keep only leading jets with mass in lo:hi"),
            "mass_window", &p.mass_window);
}

struct ModelFields {
  std::string model = "qttn";
  int layers = 3;
  int n_qubits = 8;
  std::vector<int> hidden{4, 3};
};

void add_model_options(CLI::App* cmd, ConfigBinder& bind, ModelFields& m) {
  bind.bind(cmd->add_option("--model", m.model, "qttn, p1q, or mlp"), "model",
            &m.model);
  bind.bind(cmd->add_option("--layers", m.layers,
                            "entangling layers in the tree circuit"),
            "layers", &m.layers);
  bind.bind(cmd->add_option("--n-qubits", m.n_qubits,
                            "qubits (leading particles) for the p1q model"),
            "n_qubits", &m.n_qubits);
  bind.bind(cmd->add_option("--hidden", m.hidden, "mlp hidden layer widths")
                ->delimiter(','),
            "hidden", &m.hidden);
}

std::unique_ptr<models::Model> build_model(const ModelFields& m, int depth,
                                           std::uint64_t seed) {
  if (m.model == "qttn")
    return models::make_qttn(models::QttnConfig::make(depth, m.layers), seed);
  if (m.model == "p1q") return models::make_p1q(m.n_qubits, seed);
  if (m.model == "mlp") {
    models::MlpConfig cfg;
    cfg.input_dim = 2 * ((1 << depth) - 1);
    cfg.hidden = m.hidden;
    return models::make_mlp(cfg, seed);
  }
  throw usage_error("unknown model '" + m.model +
                            "' (expected qttn, p1q, or mlp)");
}

struct TrainFields {
  int epochs = 50;
  int batch_size = 1024;
  double lr_init = 1e-3;
  double lr_peak = 5e-3;
  double lr_final = 1e-3;
  int warmup_epochs = 10;
  double weight_decay = 1e-4;
  int patience = -1;  // -1: 20 for mlp, 0 otherwise
  std::uint64_t seed = 0;
  int threads = 0;
  double val_frac = 0.1;
  double test_frac = 0.1;
};

void add_train_options(CLI::App* cmd, ConfigBinder& bind, TrainFields& t) {
  bind.bind(cmd->add_option("--epochs", t.epochs, "training epochs"), "epochs",
            &t.epochs);
  bind.bind(cmd->add_option("--batch-size", t.batch_size, "minibatch size"),
            "batch_size", &t.batch_size);
  bind.bind(cmd->add_option("--lr-init", t.lr_init, "warmup start rate"),
            "lr_init", &t.lr_init);
  bind.bind(cmd->add_option("--lr-peak", t.lr_peak, "rate at warmup end"),
            "lr_peak", &t.lr_peak);
  bind.bind(cmd->add_option("--lr-final", t.lr_final, "rate at the last step"),
            "lr_final", &t.lr_final);
  bind.bind(cmd->add_option("--warmup-epochs", t.warmup_epochs,
                            "epochs of linear warmup"),
            "warmup_epochs", &t.warmup_epochs);
  bind.bind(cmd->add_option("--weight-decay", t.weight_decay,
                            "decoupled weight decay (biases exempt)"),
            "weight_decay", &t.weight_decay);
  bind.bind(cmd->add_option("--patience", t.patience,
                            "early-stopping patience, 0 disables"),
            "patience", &t.patience);
  bind.bind(cmd->add_option("--seed", t.seed,
                            "seed for init, splits, and shuffling"),
            "seed", &t.seed);
  bind.bind(cmd->add_option("--threads", t.threads,
                            "worker threads, 0 = all cores"),
            "threads", &t.threads);
  bind.bind(cmd->add_option("--val-frac", t.val_frac,
                            "validation fraction per class"),
            "val_frac", &t.val_frac);
  bind.bind(
      cmd->add_option("--test-frac", t.test_frac, "test fraction per class"),
      "test_frac", &t.test_frac);
}

train::TrainConfig to_train_config(const TrainFields& t,
                                   const std::string& model) {
  train::TrainConfig cfg;
  cfg.epochs = t.epochs;
  cfg.batch_size = t.batch_size;
  cfg.lr_init = t.lr_init;
  cfg.lr_peak = t.lr_peak;
  cfg.lr_final = t.lr_final;
  cfg.warmup_epochs = t.warmup_epochs;
  cfg.weight_decay = t.weight_decay;
  cfg.patience = t.patience >= 0 ? t.patience : (model == "mlp" ? 20 : 0);
  cfg.seed = t.seed;
  cfg.threads = t.threads;
  return cfg;
}

void require_set(const std::string& value, const char* flag) {
  if (value.empty())
    throw usage_error(std::string(flag) + " is required");
}

void check_model_inputs(const models::Model& model,
                        const std::vector<data::JetRecord>& records) {
  if (records.empty()) throw data_error("no usable jets in input");
  if (model.kind() == "p1q" && !records.front().axis.has_value())
    throw usage_error(
        "the per-particle model needs event-format input with constituents");
}

std::vector<const data::JetRecord*> gather(
    const std::vector<data::JetRecord>& records,
    const std::vector<std::size_t>& idx) {
  std::vector<const data::JetRecord*> ptrs;
  ptrs.reserve(idx.size());
  for (std::size_t i : idx) ptrs.push_back(&records[i]);
  return ptrs;
}

std::vector<metrics::ScoredSample> score_subset(
    const models::Model& model, const std::vector<data::JetRecord>& records,
    const std::vector<std::size_t>& idx, int threads, double* mean_loss) {
  const auto ptrs = gather(records, idx);
  const auto logits = models::batch_logits(model, ptrs, threads);
  std::vector<metrics::ScoredSample> scored(idx.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    scored[k] = {models::sigmoid(logits[k]), records[idx[k]].label};
    loss += models::bce_loss(logits[k], records[idx[k]].label);
  }
  if (mean_loss) *mean_loss = idx.size() ? loss / double(idx.size()) : 0.0;
  return scored;
}

void write_history_csv(const std::string& path,
                       const std::vector<train::EpochStats>& history) {
  auto out = open_for_write(path);
  out << "epoch,train_loss,val_loss,val_auc,lr\n";
  for (const auto& row : history)
    out << row.epoch << ',' << fmt17(row.train_loss) << ','
        << fmt17(row.val_loss) << ',' << fmt17(row.val_auc) << ','
        << fmt17(row.lr) << '\n';
  if (!out) throw data_error("failed writing " + path);
}

void write_roc_csv(const std::string& path, const metrics::RocResult& roc) {
  auto out = open_for_write(path);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : roc.points)
    out << fmt17(p.fpr) << ',' << fmt17(p.tpr) << ',' << fmt17(p.threshold)
        << '\n';
  if (!out) throw data_error("failed writing " + path);
}

/// One-decimal percent, truncated toward zero (0.46875% prints as 0.4%).
// ---------------------------------------------------------------- gen-toy

struct GenCmd {
  std::string config;
  std::string output;
  int n_per_class = 10000;
  std::uint64_t seed = 0;
};

void run_gen(const GenCmd& c) {
  require_set(c.output, "--output");
  if (c.n_per_class < 1)
    throw usage_error("--n-per-class must be positive");
  data::ToyGenConfig cfg;
  cfg.n_per_class = c.n_per_class;
  cfg.seed = c.seed;
  const auto events = data::generate_toy_events(cfg);
  ensure_parent_dir(c.output);
  data::write_events_jsonl(c.output, events);
  std::cout << "wrote " << events.size() << " events to " << c.output << "\n";
}

// -------------------------------------------------------------- decluster

struct DeclusterCmd {
  std::string config;
  std::string input;
  std::string output;
  PrepFields prep;
};

void run_decluster(const DeclusterCmd& c) {
  require_set(c.input, "--input");
  require_set(c.output, "--output");
  const auto opts = to_prepare(c.prep);
  const auto events = data::read_events_jsonl(c.input);
  std::vector<data::JetRecord> records;
  records.reserve(events.size());
  for (const auto& ev : events)
    if (auto rec = data::prepare_record(ev, opts))
      records.push_back(std::move(*rec));
  ensure_parent_dir(c.output);
  data::write_trees_jsonl(c.output, records);
  if (records.empty())
    std::cerr << "warning: no jets passed selection, wrote an empty file\n";
  std::cout << "kept " << records.size() << " of " << events.size()
            << " events: " << c.output << "\n";
}

// ------------------------------------------------------------------ train

struct TrainCmd {
  std::string config;
  std::string input;
  std::string outdir;
  PrepFields prep;
  ModelFields model;
  TrainFields train;
};

void run_train(const TrainCmd& c) {
  require_set(c.input, "--input");
  require_set(c.outdir, "--outdir");
  auto records = data::load_records(c.input, to_prepare(c.prep));
  auto model = build_model(c.model, c.prep.depth, c.train.seed);
  check_model_inputs(*model, records);

  auto cfg = to_train_config(c.train, c.model.model);
  cfg.on_epoch = [&cfg](const train::EpochStats& s) {
    std::cerr << "epoch " << s.epoch << "/" << cfg.epochs
              << " train_loss=" << s.train_loss << " val_loss=" << s.val_loss
              << " val_auc=" << s.val_auc << " lr=" << s.lr << "\n";
  };
  const auto dataset = data::Dataset::from_records(
      std::move(records), c.train.val_frac, c.train.test_frac, cfg.seed);
  const auto result = train::train_model(*model, dataset, cfg);

  std::filesystem::create_directories(c.outdir);
  const auto dir = std::filesystem::path(c.outdir);
  models::save_checkpoint(*model, (dir / "checkpoint.json").string(),
                          cfg.seed, result.best_epoch);
  write_history_csv((dir / "history.csv").string(), result.history);

  double val_loss = 0.0;
  const auto scored = score_subset(*model, dataset.records,
                                   dataset.indices_of(data::Split::Val),
                                   cfg.threads, &val_loss);
  const auto est = metrics::delong_variance(scored);
  json out = {{"auc", est.auc},
              {"auc_std", est.std_error},
              {"n_signal", est.n_signal},
              {"n_background", est.n_background},
              {"loss", val_loss},
              {"split", "val"},
              {"best_epoch", result.best_epoch}};
  auto mf = open_for_write((dir / "metrics.json").string());
  mf << out.dump(2) << "\n";
  std::cout << "best epoch " << result.best_epoch << ", val AUC "
            << fmt17(est.auc) << " +- " << fmt17(est.std_error) << "\n"
            << "artifacts in " << c.outdir << "\n";
}

// ------------------------------------------------------- eval / transfer

struct EvalCmd {
  std::string config;
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string roc;
  std::string split = "all";
  PrepFields prep;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::int64_t seed = -1;  // -1: reuse the checkpoint's training seed
  double native_auc = -1.0;
  int threads = 0;
  bool require_native = false;
};

data::Split parse_split(const std::string& s) {
  if (s == "train") return data::Split::Train;
  if (s == "val") return data::Split::Val;
  if (s == "test") return data::Split::Test;
  throw usage_error("--split must be all, train, val, or test");
}

/// Rebuilds the stratified split a training run used, returning the record
/// store plus the indices of the wanted subset.
std::pair<data::Dataset, std::vector<std::size_t>> select_subset(
    std::vector<data::JetRecord> records, const std::string& split,
    double val_frac, double test_frac, std::uint64_t seed) {
  data::Dataset ds;
  std::vector<std::size_t> idx;
  if (split == "all") {
    ds.records = std::move(records);
    ds.split.assign(ds.records.size(), data::Split::Train);
    idx.resize(ds.records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  } else {
    const data::Split want = parse_split(split);
    ds = data::Dataset::from_records(std::move(records), val_frac, test_frac,
                                     seed);
    idx = ds.indices_of(want);
    if (idx.empty())
      throw data_error("split '" + split + "' holds no jets");
  }
  return {std::move(ds), std::move(idx)};
}

void run_eval(const EvalCmd& c) {
  require_set(c.checkpoint, "--checkpoint");
  require_set(c.input, "--input");
  require_set(c.output, "--output");
  if (c.require_native && c.native_auc < 0.0)
    throw usage_error("transfer requires --native-auc");
  if (c.native_auc >= 0.0 && !(c.native_auc > 0.0))
    throw usage_error("--native-auc must be positive");

  auto ck = models::load_checkpoint(c.checkpoint);
  auto records = data::load_records(c.input, to_prepare(c.prep));
  check_model_inputs(*ck.model, records);
  const std::uint64_t split_seed =
      c.seed >= 0 ? std::uint64_t(c.seed) : ck.seed;
  auto [ds, idx] = select_subset(std::move(records), c.split, c.val_frac,
                                 c.test_frac, split_seed);

  double loss = 0.0;
  const auto scored = score_subset(*ck.model, ds.records, idx, c.threads,
                                   &loss);
  const auto est = metrics::delong_variance(scored);
  const auto roc = metrics::roc_auc(scored);

  json out = {{"auc", est.auc},
              {"auc_std", est.std_error},
              {"n_signal", est.n_signal},
              {"n_background", est.n_background},
              {"loss", loss},
              {"split", c.split}};
  std::cout << "AUC " << fmt17(est.auc) << " +- " << fmt17(est.std_error)
            << " on " << idx.size() << " jets (" << c.split << ")\n";
  if (c.native_auc >= 0.0) {
    const double gap = metrics::transfer_gap(c.native_auc, est.auc);
    out["native_auc"] = c.native_auc;
    out["transfer_gap"] = gap;
    std::cout << "transfer gap " << metrics::truncated_percent(gap) << " of native AUC "
              << fmt17(c.native_auc) << "\n";
  }
  auto mf = open_for_write(c.output);
  mf << out.dump(2) << "\n";
  if (!c.roc.empty()) write_roc_csv(c.roc, roc);
}

// ---------------------------------------------------------------- lowdata

struct LowdataCmd {
  std::string config;
  std::string input;
  std::string output;
  PrepFields prep;
  ModelFields model;
  TrainFields train;
  std::vector<std::size_t> sizes{100, 1000, 10000};
  int k = 10;
};

void run_lowdata(const LowdataCmd& c) {
  require_set(c.input, "--input");
  require_set(c.output, "--output");
  if (c.k < 1) throw usage_error("--k must be positive");
  if (c.sizes.empty()) throw usage_error("--sizes must be non-empty");
  auto records = data::load_records(c.input, to_prepare(c.prep));
  {
    const auto probe = build_model(c.model, c.prep.depth, 0);
    check_model_inputs(*probe, records);
  }
  const auto dataset = data::Dataset::from_records(
      std::move(records), c.train.val_frac, c.train.test_frac, c.train.seed);
  const auto cfg = to_train_config(c.train, c.model.model);
  const train::ModelFactory factory = [&](std::uint64_t seed) {
    return build_model(c.model, c.prep.depth, seed);
  };
  const auto points =
      train::kfold_lowdata(dataset, c.sizes, c.k, factory, cfg);

  auto out = open_for_write(c.output);
  out << "size,mean_auc,std_auc\n";
  for (const auto& p : points) {
    out << p.size << ',' << fmt17(p.mean_auc) << ',' << fmt17(p.std_auc)
        << '\n';
    std::cout << "size " << p.size << ": test AUC " << fmt17(p.mean_auc)
              << " +- " << fmt17(p.std_auc) << " over " << c.k << " folds\n";
  }
  if (!out) throw data_error("failed writing " + c.output);
}

// --------------------------------------------------------------- saliency

struct SaliencyCmd {
  std::string config;
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string split = "all";
  PrepFields prep;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::int64_t seed = -1;
  std::size_t n_samples = 0;  // 0: every jet in the split
  std::uint64_t sample_seed = 0;
  int threads = 0;
};

void run_saliency(const SaliencyCmd& c) {
  require_set(c.checkpoint, "--checkpoint");
  require_set(c.input, "--input");
  require_set(c.output, "--output");
  auto ck = models::load_checkpoint(c.checkpoint);
  auto records = data::load_records(c.input, to_prepare(c.prep));
  check_model_inputs(*ck.model, records);
  const std::uint64_t split_seed =
      c.seed >= 0 ? std::uint64_t(c.seed) : ck.seed;
  auto [ds, idx] = select_subset(std::move(records), c.split, c.val_frac,
                                 c.test_frac, split_seed);

  if (c.n_samples > 0 && c.n_samples < idx.size()) {
    std::vector<std::size_t> sampled;
    sampled.reserve(c.n_samples);
    std::mt19937_64 rng(c.sample_seed);
    std::sample(idx.begin(), idx.end(), std::back_inserter(sampled),
                c.n_samples, rng);
    idx = std::move(sampled);
  }

  const auto ptrs = gather(ds.records, idx);
  const auto report = metrics::saliency(*ck.model, ptrs, idx, c.threads);

  auto out = open_for_write(c.output);
  out << "param_index,block,mean_abs_gradient\n";
  for (std::size_t i = 0; i < report.mean_abs_gradient.size(); ++i)
    out << i << ',' << report.block[i] << ','
        << fmt17(report.mean_abs_gradient[i]) << '\n';
  if (!out) throw data_error("failed writing " + c.output);
  std::cout << "saliency over " << idx.size() << " jets, "
            << report.mean_abs_gradient.size() << " parameters: " << c.output
            << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Lund-tree quantum jet tagging toolkit"};
  app.require_subcommand(1);

  GenCmd gen;
  DeclusterCmd dec;
  TrainCmd trn;
  EvalCmd evl;
  EvalCmd tra;
  tra.require_native = true;
  LowdataCmd low;
  SaliencyCmd sal;

  ConfigBinder gen_bind, dec_bind, trn_bind, evl_bind, tra_bind, low_bind,
      sal_bind;

  {
    auto* cmd = app.add_subcommand("gen-toy", "write a labelled toy sample");
    cmd->add_option("--config", gen.config, "JSON file with defaults");
    gen_bind.bind(cmd->add_option("--output", gen.output, "events JSONL path"),
                  "output", &gen.output);
    gen_bind.bind(
        cmd->add_option("--n-per-class", gen.n_per_class, "events per class"),
        "n_per_class", &gen.n_per_class);
    gen_bind.bind(cmd->add_option("--seed", gen.seed, "generator seed"),
                  "seed", &gen.seed);
    cmd->callback([&] {
      gen_bind.apply(gen.config);
      run_gen(gen);
    });
  }
  {
    auto* cmd = app.add_subcommand(
        "decluster", "cluster events and emit declustering trees");
    cmd->add_option("--config", dec.config, "JSON file with defaults");
    dec_bind.bind(cmd->add_option("--input", dec.input, "events JSONL path"),
                  "input", &dec.input);
    dec_bind.bind(cmd->add_option("--output", dec.output, "trees JSONL path"),
                  "output", &dec.output);
    add_prep_options(cmd, dec_bind, dec.prep);
    cmd->callback([&] {
      dec_bind.apply(dec.config);
      run_decluster(dec);
    });
  }
  {
    auto* cmd = app.add_subcommand("train", "fit a tagger and save artifacts");
    cmd->add_option("--config", trn.config, "JSON file with defaults");
    trn_bind.bind(
        cmd->add_option("--input", trn.input, "events or trees JSONL"),
        "input", &trn.input);
    trn_bind.bind(
        cmd->add_option("--outdir", trn.outdir,
                        "directory for checkpoint, history, and metrics"),
        "outdir", &trn.outdir);
    add_prep_options(cmd, trn_bind, trn.prep);
    add_model_options(cmd, trn_bind, trn.model);
    add_train_options(cmd, trn_bind, trn.train);
    cmd->callback([&] {
      trn_bind.apply(trn.config);
      run_train(trn);
    });
  }
  {
    auto* cmd =
        app.add_subcommand("eval", "score a checkpoint on a dataset");
    cmd->add_option("--config", evl.config, "JSON file with defaults");
    evl_bind.bind(
        cmd->add_option("--checkpoint", evl.checkpoint, "checkpoint JSON"),
        "checkpoint", &evl.checkpoint);
    evl_bind.bind(
        cmd->add_option("--input", evl.input, "events or trees JSONL"),
        "input", &evl.input);
    evl_bind.bind(cmd->add_option("--output", evl.output, "metrics JSON path"),
                  "output", &evl.output);
    evl_bind.bind(cmd->add_option("--roc", evl.roc, "ROC curve CSV path"),
                  "roc", &evl.roc);
    evl_bind.bind(
        cmd->add_option("--split", evl.split, "all, train, val, or test"),
        "split", &evl.split);
    add_prep_options(cmd, evl_bind, evl.prep);
    evl_bind.bind(
        cmd->add_option("--val-frac", evl.val_frac, "split fraction"),
        "val_frac", &evl.val_frac);
    evl_bind.bind(
        cmd->add_option("--test-frac", evl.test_frac, "split fraction"),
        "test_frac", &evl.test_frac);
    evl_bind.bind(cmd->add_option("--seed", evl.seed,
                                  "split seed, default from the checkpoint"),
                  "seed", &evl.seed);
    evl_bind.bind(cmd->add_option("--native-auc", evl.native_auc,
                                  "report the gap against this AUC"),
                  "native_auc", &evl.native_auc);
    evl_bind.bind(cmd->add_option("--threads", evl.threads, "worker threads"),
                  "threads", &evl.threads);
    cmd->callback([&] {
      evl_bind.apply(evl.config);
      run_eval(evl);
    });
  }
  {
    auto* cmd = app.add_subcommand(
        "transfer", "eval on another sample, reporting the relative gap");
    cmd->add_option("--config", tra.config, "JSON file with defaults");
    tra_bind.bind(
        cmd->add_option("--checkpoint", tra.checkpoint, "checkpoint JSON"),
        "checkpoint", &tra.checkpoint);
    tra_bind.bind(
        cmd->add_option("--input", tra.input, "events or trees JSONL"),
        "input", &tra.input);
    tra_bind.bind(cmd->add_option("--output", tra.output, "metrics JSON path"),
                  "output", &tra.output);
    tra_bind.bind(cmd->add_option("--roc", tra.roc, "ROC curve CSV path"),
                  "roc", &tra.roc);
    tra_bind.bind(
        cmd->add_option("--split", tra.split, "all, train, val, or test"),
        "split", &tra.split);
    add_prep_options(cmd, tra_bind, tra.prep);
    tra_bind.bind(
        cmd->add_option("--val-frac", tra.val_frac, "split fraction"),
        "val_frac", &tra.val_frac);
    tra_bind.bind(
        cmd->add_option("--test-frac", tra.test_frac, "split fraction"),
        "test_frac", &tra.test_frac);
    tra_bind.bind(cmd->add_option("--seed", tra.seed,
                                  "split seed, default from the checkpoint"),
                  "seed", &tra.seed);
    tra_bind.bind(cmd->add_option("--native-auc", tra.native_auc,
                                  "AUC on the model's native sample"),
                  "native_auc", &tra.native_auc);
    tra_bind.bind(cmd->add_option("--threads", tra.threads, "worker threads"),
                  "threads", &tra.threads);
    cmd->callback([&] {
      tra_bind.apply(tra.config);
      run_eval(tra);
    });
  }
  {
    auto* cmd = app.add_subcommand(
        "lowdata", "training-set-size scan with k seeded folds per size");
    cmd->add_option("--config", low.config, "JSON file with defaults");
    low_bind.bind(
        cmd->add_option("--input", low.input, "events or trees JSONL"),
        "input", &low.input);
    low_bind.bind(cmd->add_option("--output", low.output, "summary CSV path"),
                  "output", &low.output);
    low_bind.bind(cmd->add_option("--sizes", low.sizes,
                                  "training jets per class, comma separated")
                      ->delimiter(','),
                  "sizes", &low.sizes);
    low_bind.bind(cmd->add_option("--k", low.k, "folds per size"), "k",
                  &low.k);
    add_prep_options(cmd, low_bind, low.prep);
    add_model_options(cmd, low_bind, low.model);
    add_train_options(cmd, low_bind, low.train);
    cmd->callback([&] {
      low_bind.apply(low.config);
      run_lowdata(low);
    });
  }
  {
    auto* cmd = app.add_subcommand(
        "saliency", "mean absolute logit gradient per parameter");
    cmd->add_option("--config", sal.config, "JSON file with defaults");
    sal_bind.bind(
        cmd->add_option("--checkpoint", sal.checkpoint, "checkpoint JSON"),
        "checkpoint", &sal.checkpoint);
    sal_bind.bind(
        cmd->add_option("--input", sal.input, "events or trees JSONL"),
        "input", &sal.input);
    sal_bind.bind(cmd->add_option("--output", sal.output, "saliency CSV path"),
                  "output", &sal.output);
    sal_bind.bind(
        cmd->add_option("--split", sal.split, "all, train, val, or test"),
        "split", &sal.split);
    add_prep_options(cmd, sal_bind, sal.prep);
    sal_bind.bind(
        cmd->add_option("--val-frac", sal.val_frac, "split fraction"),
        "val_frac", &sal.val_frac);
    sal_bind.bind(
        cmd->add_option("--test-frac", sal.test_frac, "split fraction"),
        "test_frac", &sal.test_frac);
    sal_bind.bind(cmd->add_option("--seed", sal.seed,
                                  "split seed, default from the checkpoint"),
                  "seed", &sal.seed);
    sal_bind.bind(cmd->add_option("--n-samples", sal.n_samples,
                                  "jets to sample, 0 = all"),
                  "n_samples", &sal.n_samples);
    sal_bind.bind(cmd->add_option("--sample-seed", sal.sample_seed,
                                  "seed for the jet subsample"),
                  "sample_seed", &sal.sample_seed);
    sal_bind.bind(cmd->add_option("--threads", sal.threads, "worker threads"),
                  "threads", &sal.threads);
    cmd->callback([&] {
      sal_bind.apply(sal.config);
      run_saliency(sal);
    });
  }

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lundq::cli
