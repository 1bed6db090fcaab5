#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lundq/data.hpp"
#include "lundq/qsim.hpp"

namespace lundq::models {

/// Named, ordered parameter blocks over one flat storage vector. The flat
/// index of block b entry k is offset(b) + k, and flat <-> blocks is
/// lossless by construction.
class ParameterSet {
 public:
  void add_block(std::string name, std::size_t size);

  std::size_t size() const { return values_.size(); }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  void set_flat(std::span<const double> values);

  std::span<double> block(std::string_view name);
  std::span<const double> block(std::string_view name) const;
  std::size_t block_offset(std::string_view name) const;
  /// Block label owning a flat index (used to annotate saliency rows).
  const std::string& block_of(std::size_t flat_index) const;

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);  // shapes must match exactly

 private:
  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<Block> blocks_;
  std::vector<double> values_;
};

/// Binary classifier over jet records: a logit plus its exact parameter
/// gradient. Training, metrics, and saliency all run through this interface.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual ParameterSet& params() = 0;
  virtual const ParameterSet& params() const = 0;
  /// false entries (pure bias/offset scalars) are exempt from weight decay.
  virtual std::vector<bool> decay_mask() const = 0;

  virtual double logit(const data::JetRecord& rec) const = 0;
  /// Returns the logit and writes d(logit)/d(flat param) into grad_out,
  /// which must have params().size() entries.
  virtual double logit_with_gradient(const data::JetRecord& rec,
                                     std::span<double> grad_out) const = 0;
};

/// Tree-topology circuit layout. Nodes are breadth-first Lund slots; the
/// default map sends node i to qubit i, and the default edges run
/// child-to-parent starting from the deepest level:
///   depth 3: (3,1) (4,1) (5,2) (6,2) (1,0) (2,0).
struct QttnConfig {
  int depth = 3;
  int layers = 3;
  std::vector<std::array<int, 2>> tree_edges;  // {child node, parent node}
  std::vector<int> qubit_map;                  // node index -> qubit

  static QttnConfig make(int depth, int layers);
  int n_nodes() const { return (1 << depth) - 1; }
  void validate() const;
};

/// Circuit slot layout (shared by the model and its tests):
///   node i encoding: theta at 2i, phi at 2i+1;
///   entangler slot for layer l, edge e: 2N + l*E + e;
///   mid-layer rotation (layer l < L-1, node q, component c):
///     2N + L*E + l*3N + 3q + c, emitted as Rot(alpha, beta, gamma);
///   readout rotation slots (alpha, beta, gamma) last, applied to the root
///   qubit as RX(gamma), RY(beta), RZ(alpha) in circuit order.
qsim::Circuit build_qttn(const QttnConfig& cfg);

/// Per-particle circuit: per qubit RX(theta_k) then RY(phi_k), a CNOT ring
/// q0->q1 ... q_{N-1}->q0, then Rot on every qubit; readout on qubit 0.
qsim::Circuit build_p1q(int n_qubits);

struct MlpConfig {
  int input_dim = 14;
  std::vector<int> hidden{4, 3};  // tanh layers feeding one linear logit
};

std::size_t qttn_parameter_count(const QttnConfig& cfg);
std::size_t p1q_parameter_count(int n_qubits);
std::size_t mlp_parameter_count(const MlpConfig& cfg);

/// Fresh models. Gate angles start near zero (normal, sigma 0.1), the
/// encoding deformations at lambda = omega = 1, and the affine readout at
/// c_w = 1, c_b = 0; the MLP uses fan-in scaled uniform weights with zero
/// biases. All draws come from the given seed.
std::unique_ptr<Model> make_qttn(const QttnConfig& cfg, std::uint64_t seed);
std::unique_ptr<Model> make_p1q(int n_qubits, std::uint64_t seed);
std::unique_ptr<Model> make_mlp(const MlpConfig& cfg, std::uint64_t seed);

struct QttnForward {
  double e0 = 0.0;
  double logit = 0.0;
  double probability = 0.0;
};
/// Readout triple for a tree-model record (exposed for inspection; the Model
/// interface covers training).
QttnForward qttn_forward(const Model& qttn, const data::JetRecord& rec);

double sigmoid(double x);
/// Numerically safe binary cross-entropy of a logit against label {0, 1}.
double bce_loss(double logit, int label);

struct BatchGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean BCE over a batch plus its parameter gradient. Per-sample terms are
/// computed independently (parallelizable) and reduced in ascending `ids`
/// order, so the result is bit-identical for any worker count and any
/// within-batch permutation that keeps ids paired with records.
BatchGrad bce_batch_backward(const Model& model,
                             std::span<const data::JetRecord* const> records,
                             std::span<const std::size_t> ids, int threads);

/// Logits in input order, computed in parallel.
std::vector<double> batch_logits(const Model& model,
                                 std::span<const data::JetRecord* const> records,
                                 int threads);

void save_checkpoint(const Model& model, const std::string& path,
                     std::uint64_t seed, int epoch);

struct Checkpoint {
  std::unique_ptr<Model> model;
  std::uint64_t seed = 0;
  int epoch = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lundq::models
