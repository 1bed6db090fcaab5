#include "lundq/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "lundq/common.hpp"

namespace lundq::models {

using nlohmann::json;

void ParameterSet::add_block(std::string name, std::size_t size) {
  for (const Block& b : blocks_)
    if (b.name == name) throw usage_error("duplicate parameter block " + name);
  blocks_.push_back({std::move(name), values_.size(), size});
  values_.resize(values_.size() + size, 0.0);
}

void ParameterSet::set_flat(std::span<const double> values) {
  if (values.size() != values_.size())
    throw usage_error("flat parameter length mismatch");
  std::copy(values.begin(), values.end(), values_.begin());
}

std::span<double> ParameterSet::block(std::string_view name) {
  for (const Block& b : blocks_)
    if (b.name == name) return {values_.data() + b.offset, b.size};
  throw usage_error("unknown parameter block " + std::string(name));
}

std::span<const double> ParameterSet::block(std::string_view name) const {
  for (const Block& b : blocks_)
    if (b.name == name) return {values_.data() + b.offset, b.size};
  throw usage_error("unknown parameter block " + std::string(name));
}

std::size_t ParameterSet::block_offset(std::string_view name) const {
  for (const Block& b : blocks_)
    if (b.name == name) return b.offset;
  throw usage_error("unknown parameter block " + std::string(name));
}

const std::string& ParameterSet::block_of(std::size_t flat_index) const {
  for (const Block& b : blocks_)
    if (flat_index >= b.offset && flat_index < b.offset + b.size) return b.name;
  throw usage_error("flat index outside every block");
}

json ParameterSet::to_json() const {
  json j = json::object();
  for (const Block& b : blocks_) {
    json arr = json::array();
    for (std::size_t k = 0; k < b.size; ++k) arr.push_back(values_[b.offset + k]);
    j[b.name] = std::move(arr);
  }
  return j;
}

void ParameterSet::load_json(const json& j) {
  for (const Block& b : blocks_) {
    if (!j.contains(b.name) || !j[b.name].is_array() ||
        j[b.name].size() != b.size)
      throw data_error("checkpoint block " + b.name + " has the wrong shape");
    for (std::size_t k = 0; k < b.size; ++k)
      values_[b.offset + k] = j[b.name][k].get<double>();
  }
}

QttnConfig QttnConfig::make(int depth, int layers) {
  QttnConfig cfg;
  cfg.depth = depth;
  cfg.layers = layers;
  if (depth < 1 || layers < 1)
    throw usage_error("tree model needs depth >= 1 and layers >= 1");
  const int n = cfg.n_nodes();
  cfg.qubit_map.resize(n);
  std::iota(cfg.qubit_map.begin(), cfg.qubit_map.end(), 0);
  for (int level = depth - 1; level >= 1; --level) {
    const int lo = (1 << level) - 1;
    const int hi = (1 << (level + 1)) - 1;
    for (int node = lo; node < hi; ++node)
      cfg.tree_edges.push_back({node, (node - 1) / 2});
  }
  return cfg;
}

void QttnConfig::validate() const {
  if (depth < 1 || layers < 1)
    throw usage_error("tree model needs depth >= 1 and layers >= 1");
  const int n = n_nodes();
  if (static_cast<int>(qubit_map.size()) != n)
    throw usage_error("qubit map size must equal the node count");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int q : qubit_map) {
    if (q < 0 || q >= n || seen[static_cast<std::size_t>(q)])
      throw usage_error("qubit map must be a permutation of the nodes");
    seen[static_cast<std::size_t>(q)] = true;
  }
  if (static_cast<int>(tree_edges.size()) != n - 1)
    throw usage_error("edge list must contain one edge per non-root node");
  std::vector<bool> child_seen(static_cast<std::size_t>(n), false);
  for (const auto& e : tree_edges) {
    const int child = e[0], parent = e[1];
    if (child < 1 || child >= n || parent < 0 || parent >= n || child == parent)
      throw usage_error("edge endpoints out of range");
    if (child_seen[static_cast<std::size_t>(child)])
      throw usage_error("node appears twice as an edge child");
    child_seen[static_cast<std::size_t>(child)] = true;
  }
}

qsim::Circuit build_qttn(const QttnConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_nodes();
  const int n_edges = static_cast<int>(cfg.tree_edges.size());
  const int layers = cfg.layers;

  qsim::Circuit c;
  c.n_qubits = n;
  c.readout_qubit = cfg.qubit_map[0];
  c.n_slots = 2 * n + layers * n_edges + 3 * n * (layers - 1) + 3;

  for (int node = 0; node < n; ++node) {
    const int q = cfg.qubit_map[node];
    c.gates.push_back(qsim::GateOp::ry_slot(q, 2 * node));
    c.gates.push_back(qsim::GateOp::rz_slot(q, 2 * node + 1));
  }

  const int cry_base = 2 * n;
  const int rot_base = cry_base + layers * n_edges;
  const int readout_base = rot_base + 3 * n * (layers - 1);

  for (int layer = 0; layer < layers; ++layer) {
    for (int e = 0; e < n_edges; ++e) {
      const int child_q = cfg.qubit_map[cfg.tree_edges[e][0]];
      const int parent_q = cfg.qubit_map[cfg.tree_edges[e][1]];
      c.gates.push_back(qsim::GateOp::cry_slot(
          child_q, parent_q, cry_base + layer * n_edges + e));
    }
    if (layer + 1 < layers) {
      for (int node = 0; node < n; ++node) {
        const int base = rot_base + layer * 3 * n + 3 * node;
        c.gates.push_back(qsim::GateOp::rot_slots(cfg.qubit_map[node], base,
                                                  base + 1, base + 2));
      }
    }
  }
  // Readout basis change RZ(alpha) RY(beta) RX(gamma) as an operator
  // product, so RX enters the gate list first.
  c.gates.push_back(qsim::GateOp::rx_slot(c.readout_qubit, readout_base + 2));
  c.gates.push_back(qsim::GateOp::ry_slot(c.readout_qubit, readout_base + 1));
  c.gates.push_back(qsim::GateOp::rz_slot(c.readout_qubit, readout_base));
  return c;
}

qsim::Circuit build_p1q(int n_qubits) {
  if (n_qubits < 2) throw usage_error("per-particle circuit needs >= 2 qubits");
  qsim::Circuit c;
  c.n_qubits = n_qubits;
  c.readout_qubit = 0;
  c.n_slots = 5 * n_qubits;
  for (int q = 0; q < n_qubits; ++q) {
    c.gates.push_back(qsim::GateOp::rx_slot(q, 2 * q));
    c.gates.push_back(qsim::GateOp::ry_slot(q, 2 * q + 1));
  }
  for (int q = 0; q < n_qubits; ++q)
    c.gates.push_back(qsim::GateOp::cnot(q, (q + 1) % n_qubits));
  const int rot_base = 2 * n_qubits;
  for (int q = 0; q < n_qubits; ++q)
    c.gates.push_back(qsim::GateOp::rot_slots(q, rot_base + 3 * q,
                                              rot_base + 3 * q + 1,
                                              rot_base + 3 * q + 2));
  return c;
}

std::size_t qttn_parameter_count(const QttnConfig& cfg) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.n_nodes());
  const std::size_t e = cfg.tree_edges.size();
  const std::size_t l = static_cast<std::size_t>(cfg.layers);
  return 2 * n + l * e + 3 * n * (l - 1) + 3 + 2;
}

std::size_t p1q_parameter_count(int n_qubits) {
  if (n_qubits < 2) throw usage_error("per-particle circuit needs >= 2 qubits");
  return 3 * static_cast<std::size_t>(n_qubits) + 2;
}

std::size_t mlp_parameter_count(const MlpConfig& cfg) {
  if (cfg.input_dim < 1) throw usage_error("mlp needs a positive input size");
  std::size_t count = 0;
  int fan_in = cfg.input_dim;
  for (int h : cfg.hidden) {
    if (h < 1) throw usage_error("mlp hidden sizes must be positive");
    count += static_cast<std::size_t>(fan_in) * h + h;
    fan_in = h;
  }
  count += static_cast<std::size_t>(fan_in) + 1;  // linear logit
  return count;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(double logit, int label) {
  // max(l, 0) - l*y + log(1 + exp(-|l|)) avoids overflow on both tails
  return std::max(logit, 0.0) - logit * label +
         std::log1p(std::exp(-std::abs(logit)));
}

namespace {

constexpr const char* kTreeModelKind = "qttn";
constexpr const char* kParticleModelKind = "p1q";
constexpr const char* kMlpKind = "mlp";

class QttnModel final : public Model {
 public:
  QttnModel(QttnConfig cfg, std::uint64_t seed) : QttnModel(std::move(cfg)) {
    auto lambda = params_.block("lambda");
    auto omega = params_.block("omega");
    std::fill(lambda.begin(), lambda.end(), 1.0);
    std::fill(omega.begin(), omega.end(), 1.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> angle(0.0, 0.1);
    for (double& v : params_.block("cry")) v = angle(rng);
    for (double& v : params_.block("rot")) v = angle(rng);
    for (double& v : params_.block("readout_rot")) v = angle(rng);
    params_.block("linear")[0] = 1.0;  // c_w
    params_.block("linear")[1] = 0.0;  // c_b
  }

  QttnModel(QttnConfig cfg, const json& param_blocks) : QttnModel(std::move(cfg)) {
    params_.load_json(param_blocks);
  }

  std::string kind() const override { return kTreeModelKind; }

  json config_json() const override {
    json edges = json::array();
    for (const auto& e : cfg_.tree_edges) edges.push_back({e[0], e[1]});
    return json{{"depth", cfg_.depth},
                {"layers", cfg_.layers},
                {"tree_edges", std::move(edges)},
                {"qubit_map", cfg_.qubit_map}};
  }

  ParameterSet& params() override { return params_; }
  const ParameterSet& params() const override { return params_; }

  std::vector<bool> decay_mask() const override {
    std::vector<bool> mask(params_.size(), true);
    mask[params_.block_offset("linear") + 1] = false;  // c_b
    return mask;
  }

  double logit(const data::JetRecord& rec) const override {
    std::vector<double> slots;
    fill_slots(rec, slots);
    const double e0 = qsim::run(circuit_, slots);
    const auto linear = params_.block("linear");
    return linear[0] * e0 + linear[1];
  }

  double logit_with_gradient(const data::JetRecord& rec,
                             std::span<double> grad_out) const override {
    if (grad_out.size() != params_.size())
      throw usage_error("gradient buffer size mismatch");
    std::vector<double> slots;
    const jets::LundTree& tree = fill_slots(rec, slots);
    const auto rg = qsim::run_with_gradient(circuit_, slots);
    const auto linear = params_.block("linear");
    const double c_w = linear[0];

    const std::size_t n = static_cast<std::size_t>(cfg_.n_nodes());
    const auto jac = encodings::lp2b_jacobian(tree, lp2b_params());
    for (std::size_t i = 0; i < n; ++i) {
      grad_out[i] = c_w * rg.gradient[2 * i] * jac.dtheta_dlambda[i];
      grad_out[n + i] = c_w * rg.gradient[2 * i + 1] * jac.dphi_domega[i];
    }
    // Entangler, rotation and readout slots line up with the flat layout.
    const std::size_t n_slots = static_cast<std::size_t>(circuit_.n_slots);
    for (std::size_t s = 2 * n; s < n_slots; ++s)
      grad_out[s] = c_w * rg.gradient[s];
    grad_out[n_slots] = rg.value;  // c_w
    grad_out[n_slots + 1] = 1.0;   // c_b
    return c_w * rg.value + linear[1];
  }

  QttnForward forward(const data::JetRecord& rec) const {
    std::vector<double> slots;
    fill_slots(rec, slots);
    const double e0 = qsim::run(circuit_, slots);
    const auto linear = params_.block("linear");
    const double logit = linear[0] * e0 + linear[1];
    return {e0, logit, sigmoid(logit)};
  }

 private:
  explicit QttnModel(QttnConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    circuit_ = build_qttn(cfg_);
    const std::size_t n = static_cast<std::size_t>(cfg_.n_nodes());
    const std::size_t e = cfg_.tree_edges.size();
    const std::size_t l = static_cast<std::size_t>(cfg_.layers);
    params_.add_block("lambda", n);
    params_.add_block("omega", n);
    params_.add_block("cry", l * e);
    params_.add_block("rot", 3 * n * (l - 1));
    params_.add_block("readout_rot", 3);
    params_.add_block("linear", 2);
  }

  encodings::Lp2bParams lp2b_params() const {
    const auto lambda = params_.block("lambda");
    const auto omega = params_.block("omega");
    return {{lambda.begin(), lambda.end()}, {omega.begin(), omega.end()}};
  }

  const jets::LundTree& fill_slots(const data::JetRecord& rec,
                                   std::vector<double>& slots) const {
    if (!rec.tree) throw usage_error("tree model fed a record without a tree");
    if (rec.tree->depth != cfg_.depth)
      throw usage_error("record tree depth does not match the model");
    const auto angles = encodings::lp2b_angles(*rec.tree, lp2b_params());
    slots.assign(static_cast<std::size_t>(circuit_.n_slots), 0.0);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      slots[2 * i] = angles[i].theta;
      slots[2 * i + 1] = angles[i].phi;
    }
    const std::size_t base = 2 * angles.size();
    const auto cry = params_.block("cry");
    const auto rot = params_.block("rot");
    const auto readout = params_.block("readout_rot");
    std::copy(cry.begin(), cry.end(), slots.begin() + base);
    std::copy(rot.begin(), rot.end(), slots.begin() + base + cry.size());
    std::copy(readout.begin(), readout.end(),
              slots.begin() + base + cry.size() + rot.size());
    return *rec.tree;
  }

  QttnConfig cfg_;
  qsim::Circuit circuit_;
  ParameterSet params_;
};

class P1qModel final : public Model {
 public:
  P1qModel(int n_qubits, std::uint64_t seed) : P1qModel(n_qubits) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> angle(0.0, 0.1);
    params_.block("w")[0] = angle(rng);
    for (double& v : params_.block("rot")) v = angle(rng);
    params_.block("bias")[0] = 0.0;
  }

  P1qModel(int n_qubits, const json& param_blocks) : P1qModel(n_qubits) {
    params_.load_json(param_blocks);
  }

  std::string kind() const override { return kParticleModelKind; }

  json config_json() const override { return json{{"n_qubits", n_qubits_}}; }

  ParameterSet& params() override { return params_; }
  const ParameterSet& params() const override { return params_; }

  std::vector<bool> decay_mask() const override {
    std::vector<bool> mask(params_.size(), true);
    mask[params_.block_offset("bias")] = false;
    return mask;
  }

  double logit(const data::JetRecord& rec) const override {
    std::vector<double> slots;
    fill_slots(rec, slots);
    return qsim::run(circuit_, slots) + params_.block("bias")[0];
  }

  double logit_with_gradient(const data::JetRecord& rec,
                             std::span<double> grad_out) const override {
    if (grad_out.size() != params_.size())
      throw usage_error("gradient buffer size mismatch");
    std::vector<double> slots;
    fill_slots(rec, slots);
    const auto rg = qsim::run_with_gradient(circuit_, slots);

    const double w = params_.block("w")[0];
    const auto d_angles = encodings::p1q_angles_dw(rec.constituents, *rec.axis,
                                                   n_qubits_, w);
    double dw = 0.0;
    for (std::size_t k = 0; k < d_angles.size(); ++k)
      dw += rg.gradient[2 * k] * d_angles[k].theta +
            rg.gradient[2 * k + 1] * d_angles[k].phi;
    grad_out[0] = dw;
    const std::size_t rot_slots = 3 * static_cast<std::size_t>(n_qubits_);
    const std::size_t rot_base = 2 * static_cast<std::size_t>(n_qubits_);
    for (std::size_t j = 0; j < rot_slots; ++j)
      grad_out[1 + j] = rg.gradient[rot_base + j];
    grad_out[1 + rot_slots] = 1.0;  // c_b
    return rg.value + params_.block("bias")[0];
  }

 private:
  explicit P1qModel(int n_qubits) : n_qubits_(n_qubits) {
    circuit_ = build_p1q(n_qubits);
    params_.add_block("w", 1);
    params_.add_block("rot", 3 * static_cast<std::size_t>(n_qubits));
    params_.add_block("bias", 1);
  }

  void fill_slots(const data::JetRecord& rec, std::vector<double>& slots) const {
    if (!rec.axis || rec.constituents.empty())
      throw usage_error("per-particle model needs constituents and a jet axis");
    const auto angles = encodings::p1q_angles(rec.constituents, *rec.axis,
                                              n_qubits_, params_.block("w")[0]);
    slots.assign(static_cast<std::size_t>(circuit_.n_slots), 0.0);
    for (std::size_t k = 0; k < angles.size(); ++k) {
      slots[2 * k] = angles[k].theta;
      slots[2 * k + 1] = angles[k].phi;
    }
    const auto rot = params_.block("rot");
    std::copy(rot.begin(), rot.end(),
              slots.begin() + 2 * static_cast<std::size_t>(n_qubits_));
  }

  int n_qubits_;
  qsim::Circuit circuit_;
  ParameterSet params_;
};

class MlpModel final : public Model {
 public:
  MlpModel(MlpConfig cfg, std::uint64_t seed) : MlpModel(std::move(cfg)) {
    std::mt19937_64 rng(seed);
    int fan_in = cfg_.input_dim;
    for (std::size_t layer = 0; layer < layer_sizes_.size(); ++layer) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> uniform(-bound, bound);
      for (double& v : params_.block(weight_name(layer))) v = uniform(rng);
      fan_in = layer_sizes_[layer];
    }
  }

  MlpModel(MlpConfig cfg, const json& param_blocks) : MlpModel(std::move(cfg)) {
    params_.load_json(param_blocks);
  }

  std::string kind() const override { return kMlpKind; }

  json config_json() const override {
    return json{{"input_dim", cfg_.input_dim}, {"hidden", cfg_.hidden}};
  }

  ParameterSet& params() override { return params_; }
  const ParameterSet& params() const override { return params_; }

  std::vector<bool> decay_mask() const override {
    std::vector<bool> mask(params_.size(), true);
    for (std::size_t layer = 0; layer < layer_sizes_.size(); ++layer) {
      const std::size_t off = params_.block_offset(bias_name(layer));
      for (int k = 0; k < layer_sizes_[layer]; ++k) mask[off + k] = false;
    }
    return mask;
  }

  double logit(const data::JetRecord& rec) const override {
    std::vector<std::vector<double>> acts;
    return forward(rec, acts);
  }

  double logit_with_gradient(const data::JetRecord& rec,
                             std::span<double> grad_out) const override {
    if (grad_out.size() != params_.size())
      throw usage_error("gradient buffer size mismatch");
    std::vector<std::vector<double>> acts;  // acts[0] = input, then per layer
    const double out = forward(rec, acts);

    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    // Backprop with d(logit)/d(logit) = 1.
    std::vector<double> delta{1.0};
    for (std::size_t layer = layer_sizes_.size(); layer-- > 0;) {
      const auto w = params_.block(weight_name(layer));
      const std::size_t w_off = params_.block_offset(weight_name(layer));
      const std::size_t b_off = params_.block_offset(bias_name(layer));
      const std::vector<double>& input = acts[layer];
      const int n_out = layer_sizes_[layer];
      const int n_in = static_cast<int>(input.size());

      std::vector<double> next_delta(static_cast<std::size_t>(n_in), 0.0);
      for (int o = 0; o < n_out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        grad_out[b_off + static_cast<std::size_t>(o)] += d;
        for (int i = 0; i < n_in; ++i) {
          grad_out[w_off + static_cast<std::size_t>(o * n_in + i)] +=
              d * input[static_cast<std::size_t>(i)];
          next_delta[static_cast<std::size_t>(i)] +=
              d * w[static_cast<std::size_t>(o * n_in + i)];
        }
      }
      if (layer > 0) {
        // Pull back through the tanh of the previous layer's output.
        const std::vector<double>& a = acts[layer];
        for (int i = 0; i < n_in; ++i)
          next_delta[static_cast<std::size_t>(i)] *=
              1.0 - a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)];
      }
      delta = std::move(next_delta);
    }
    return out;
  }

 private:
  explicit MlpModel(MlpConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.input_dim < 1) throw usage_error("mlp needs a positive input size");
    for (int h : cfg_.hidden) {
      if (h < 1) throw usage_error("mlp hidden sizes must be positive");
      layer_sizes_.push_back(h);
    }
    layer_sizes_.push_back(1);
    int fan_in = cfg_.input_dim;
    for (std::size_t layer = 0; layer < layer_sizes_.size(); ++layer) {
      params_.add_block(weight_name(layer),
                        static_cast<std::size_t>(fan_in) * layer_sizes_[layer]);
      params_.add_block(bias_name(layer),
                        static_cast<std::size_t>(layer_sizes_[layer]));
      fan_in = layer_sizes_[layer];
    }
  }

  static std::string weight_name(std::size_t layer) {
    return "w" + std::to_string(layer);
  }
  static std::string bias_name(std::size_t layer) {
    return "b" + std::to_string(layer);
  }

  double forward(const data::JetRecord& rec,
                 std::vector<std::vector<double>>& acts) const {
    if (!rec.tree) throw usage_error("mlp fed a record without a tree");
    std::vector<double> x = jets::flatten(*rec.tree);
    if (static_cast<int>(x.size()) != cfg_.input_dim)
      throw usage_error("record feature size does not match the mlp input");
    acts.clear();
    acts.push_back(std::move(x));
    for (std::size_t layer = 0; layer < layer_sizes_.size(); ++layer) {
      const auto w = params_.block(weight_name(layer));
      const auto b = params_.block(bias_name(layer));
      const std::vector<double>& input = acts.back();
      const int n_out = layer_sizes_[layer];
      const int n_in = static_cast<int>(input.size());
      std::vector<double> z(static_cast<std::size_t>(n_out));
      for (int o = 0; o < n_out; ++o) {
        double acc = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < n_in; ++i)
          acc += w[static_cast<std::size_t>(o * n_in + i)] *
                 input[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(o)] = acc;
      }
      const bool last = layer + 1 == layer_sizes_.size();
      if (!last)
        for (double& v : z) v = std::tanh(v);
      acts.push_back(std::move(z));
    }
    return acts.back()[0];
  }

  MlpConfig cfg_;
  std::vector<int> layer_sizes_;  // hidden sizes then the final 1
  ParameterSet params_;
};

}  // namespace

std::unique_ptr<Model> make_qttn(const QttnConfig& cfg, std::uint64_t seed) {
  return std::make_unique<QttnModel>(cfg, seed);
}

std::unique_ptr<Model> make_p1q(int n_qubits, std::uint64_t seed) {
  return std::make_unique<P1qModel>(n_qubits, seed);
}

std::unique_ptr<Model> make_mlp(const MlpConfig& cfg, std::uint64_t seed) {
  return std::make_unique<MlpModel>(cfg, seed);
}

QttnForward qttn_forward(const Model& qttn, const data::JetRecord& rec) {
  const auto* impl = dynamic_cast<const QttnModel*>(&qttn);
  if (!impl) throw usage_error("qttn_forward expects the tree model");
  return impl->forward(rec);
}

BatchGrad bce_batch_backward(const Model& model,
                             std::span<const data::JetRecord* const> records,
                             std::span<const std::size_t> ids, int threads) {
  if (records.empty()) throw usage_error("empty batch");
  if (records.size() != ids.size())
    throw usage_error("batch ids must pair with records");

  const std::size_t n_params = model.params().size();
  const std::size_t batch = records.size();
  std::vector<double> losses(batch);
  std::vector<std::vector<double>> grads(batch);

  parallel_for(batch, threads, [&](std::size_t s) {
    grads[s].resize(n_params);
    const double logit =
        model.logit_with_gradient(*records[s], grads[s]);
    const int label = records[s]->label;
    losses[s] = bce_loss(logit, label);
    const double dlogit = sigmoid(logit) - static_cast<double>(label);
    for (double& g : grads[s]) g *= dlogit;
  });

  // Reduce keyed by the caller's sample ids, so batch order and worker count
  // never change the sums.
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ids[a] != ids[b]) return ids[a] < ids[b];
    return a < b;
  });

  BatchGrad out;
  out.grad.assign(n_params, 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t s : order) {
    out.loss += losses[s];
    for (std::size_t k = 0; k < n_params; ++k) out.grad[k] += grads[s][k];
  }
  out.loss *= inv_batch;
  for (double& g : out.grad) g *= inv_batch;
  return out;
}

std::vector<double> batch_logits(const Model& model,
                                 std::span<const data::JetRecord* const> records,
                                 int threads) {
  std::vector<double> out(records.size());
  parallel_for(records.size(), threads,
               [&](std::size_t s) { out[s] = model.logit(*records[s]); });
  return out;
}

void save_checkpoint(const Model& model, const std::string& path,
                     std::uint64_t seed, int epoch) {
  json j{{"model", model.kind()},
         {"config", model.config_json()},
         {"params", model.params().to_json()},
         {"seed", seed},
         {"epoch", epoch}};
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw data_error(path + ": " + e.what());
  }
  for (const char* key : {"model", "config", "params", "seed", "epoch"})
    if (!j.contains(key))
      throw data_error(path + ": checkpoint missing \"" + key + "\"");

  Checkpoint ck;
  ck.seed = j["seed"].get<std::uint64_t>();
  ck.epoch = j["epoch"].get<int>();
  const std::string kind = j["model"].get<std::string>();
  const json& cfg = j["config"];
  if (kind == kTreeModelKind) {
    QttnConfig qc;
    qc.depth = cfg.at("depth").get<int>();
    qc.layers = cfg.at("layers").get<int>();
    for (const auto& e : cfg.at("tree_edges"))
      qc.tree_edges.push_back({e[0].get<int>(), e[1].get<int>()});
    qc.qubit_map = cfg.at("qubit_map").get<std::vector<int>>();
    ck.model = std::make_unique<QttnModel>(std::move(qc), j["params"]);
  } else if (kind == kParticleModelKind) {
    ck.model = std::make_unique<P1qModel>(cfg.at("n_qubits").get<int>(),
                                          j["params"]);
  } else if (kind == kMlpKind) {
    MlpConfig mc;
    mc.input_dim = cfg.at("input_dim").get<int>();
    mc.hidden = cfg.at("hidden").get<std::vector<int>>();
    ck.model = std::make_unique<MlpModel>(std::move(mc), j["params"]);
  } else {
    throw data_error(path + ": unknown model kind " + kind);
  }
  return ck;
}

}  // namespace lundq::models
