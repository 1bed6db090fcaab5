#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace lundq::qsim {

enum class GateKind { RX, RY, RZ, Rot, CRY, CNOT };

int angle_count(GateKind kind);
const char* gate_name(GateKind kind);

/// One gate application. Each angle comes either from the literal `angles`
/// entry or, when the matching `slots` entry is >= 0, from the slot-value
/// vector supplied at execution time. Rot(alpha, beta, gamma) is the operator
/// product RZ(alpha) RY(beta) RZ(gamma), so RZ(gamma) acts on the state first.
struct GateOp {
  GateKind kind = GateKind::RY;
  int target = 0;
  int control = -1;  // used by CRY and CNOT
  std::array<double, 3> angles{{0.0, 0.0, 0.0}};
  std::array<int, 3> slots{{-1, -1, -1}};

  static GateOp rx(int target, double angle);
  static GateOp ry(int target, double angle);
  static GateOp rz(int target, double angle);
  static GateOp rot(int target, double alpha, double beta, double gamma);
  static GateOp cry(int control, int target, double angle);
  static GateOp cnot(int control, int target);

  static GateOp rx_slot(int target, int slot);
  static GateOp ry_slot(int target, int slot);
  static GateOp rz_slot(int target, int slot);
  static GateOp rot_slots(int target, int sa, int sb, int sg);
  static GateOp cry_slot(int control, int target, int slot);
};

struct Circuit {
  int n_qubits = 0;
  int readout_qubit = 0;
  int n_slots = 0;
  std::vector<GateOp> gates;  // gates[0] acts on the state first

  void validate() const;  // throws usage_error on bad wires or slot indices
};

/// Exact complex amplitudes over n qubits, starting in |0...0>. Basis index b
/// stores qubit 0 in the most significant bit:
///   bit of qubit q in index b = (b >> (n_qubits - 1 - q)) & 1.
class StateVector {
 public:
  explicit StateVector(int n_qubits);

  int n_qubits() const { return n_qubits_; }
  std::size_t size() const { return amp_.size(); }
  std::span<const std::complex<double>> amplitudes() const { return amp_; }
  std::complex<double>& operator[](std::size_t i) { return amp_[i]; }
  const std::complex<double>& operator[](std::size_t i) const { return amp_[i]; }

  void reset();  // back to |0...0>
  double norm_sq() const;

  std::complex<double>* data() { return amp_.data(); }
  const std::complex<double>* data() const { return amp_.data(); }

 private:
  int n_qubits_;
  std::vector<std::complex<double>> amp_;
};

/// Applies one gate in place. Slot-bound angles are read from slot_values.
void apply_gate(StateVector& state, const GateOp& gate,
                std::span<const double> slot_values = {});

/// <psi| Z_qubit |psi> for the current amplitudes.
double expectation_z(const StateVector& state, int qubit);

/// Runs the circuit from |0...0> and returns the Z expectation on the
/// readout qubit. slot_values.size() must equal circuit.n_slots.
double run(const Circuit& circuit, std::span<const double> slot_values);

struct RunResult {
  double value = 0.0;               // readout Z expectation
  std::vector<double> gradient;     // d value / d slot, length n_slots
};

/// Forward value plus the exact gradient with respect to every parameter
/// slot, computed with a reverse (adjoint) sweep: one forward pass, then one
/// backward unwinding that scores each parameterized gate via its generator.
/// Slots referenced by several gates accumulate their contributions.
RunResult run_with_gradient(const Circuit& circuit,
                            std::span<const double> slot_values);

std::vector<double> gradient(const Circuit& circuit,
                             std::span<const double> slot_values);

}  // namespace lundq::qsim
