#include "lundq/qsim.hpp"

#include <cmath>
#include <string>

#include "lundq/common.hpp"

namespace lundq::qsim {

namespace {

using cplx = std::complex<double>;

// Row-major 2x2 complex matrix [[a, b], [c, d]].
struct Mat2 {
  cplx a, b, c, d;
};

Mat2 mat_mul(const Mat2& x, const Mat2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
          x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Mat2 mat_rx(double t) {
  double h = 0.5 * t;
  cplx ms(0.0, -std::sin(h));
  return {cplx(std::cos(h), 0.0), ms, ms, cplx(std::cos(h), 0.0)};
}

Mat2 mat_ry(double t) {
  double h = 0.5 * t;
  return {cplx(std::cos(h), 0.0), cplx(-std::sin(h), 0.0),
          cplx(std::sin(h), 0.0), cplx(std::cos(h), 0.0)};
}

Mat2 mat_rz(double t) {
  double h = 0.5 * t;
  return {cplx(std::cos(h), -std::sin(h)), cplx(0.0, 0.0),
          cplx(0.0, 0.0), cplx(std::cos(h), std::sin(h))};
}

Mat2 mat_rot(double alpha, double beta, double gamma) {
  return mat_mul(mat_rz(alpha), mat_mul(mat_ry(beta), mat_rz(gamma)));
}

constexpr Mat2 kPauliX{cplx(0, 0), cplx(1, 0), cplx(1, 0), cplx(0, 0)};

std::size_t bit_mask(int n_qubits, int qubit) {
  return std::size_t{1} << (n_qubits - 1 - qubit);
}

// The kernels below spell the complex products out in real arithmetic; the
// operator form would round identically but routes through __muldc3.
inline cplx cmul(const cplx& x, const cplx& y) {
  return {x.real() * y.real() - x.imag() * y.imag(),
          x.real() * y.imag() + x.imag() * y.real()};
}

void apply_1q(StateVector& s, int target, const Mat2& m) {
  const std::size_t size = s.size();
  const std::size_t mask = bit_mask(s.n_qubits(), target);
  cplx* amp = s.data();
  for (std::size_t i = 0; i < size; ++i) {
    if (i & mask) continue;
    const cplx v0 = amp[i];
    const cplx v1 = amp[i | mask];
    amp[i] = cmul(m.a, v0) + cmul(m.b, v1);
    amp[i | mask] = cmul(m.c, v0) + cmul(m.d, v1);
  }
}

void apply_controlled_1q(StateVector& s, int control, int target,
                         const Mat2& m) {
  const std::size_t size = s.size();
  const std::size_t cmask = bit_mask(s.n_qubits(), control);
  const std::size_t tmask = bit_mask(s.n_qubits(), target);
  cplx* amp = s.data();
  for (std::size_t i = 0; i < size; ++i) {
    if (!(i & cmask) || (i & tmask)) continue;
    const cplx v0 = amp[i];
    const cplx v1 = amp[i | tmask];
    amp[i] = cmul(m.a, v0) + cmul(m.b, v1);
    amp[i | tmask] = cmul(m.c, v0) + cmul(m.d, v1);
  }
}

void apply_pauli_z(StateVector& s, int qubit) {
  const std::size_t size = s.size();
  const std::size_t mask = bit_mask(s.n_qubits(), qubit);
  cplx* amp = s.data();
  for (std::size_t i = 0; i < size; ++i)
    if (i & mask) amp[i] = -amp[i];
}

// Im <a|b> = sum_i Im(conj(a_i) b_i)
double im_inner(const StateVector& a, const StateVector& b) {
  double acc = 0.0;
  const cplx* pa = a.data();
  const cplx* pb = b.data();
  const std::size_t size = a.size();
  for (std::size_t i = 0; i < size; ++i)
    acc += pa[i].real() * pb[i].imag() - pa[i].imag() * pb[i].real();
  return acc;
}

void check_wire(const Circuit& c, int wire, const char* what) {
  if (wire < 0 || wire >= c.n_qubits)
    throw usage_error(std::string(what) + " wire out of range");
}

std::array<double, 3> resolved_angles(const GateOp& g,
                                      std::span<const double> slot_values) {
  std::array<double, 3> out = g.angles;
  const int n = angle_count(g.kind);
  for (int k = 0; k < n; ++k) {
    if (g.slots[k] < 0) continue;
    if (static_cast<std::size_t>(g.slots[k]) >= slot_values.size())
      throw usage_error("gate references a parameter slot beyond the supplied values");
    out[k] = slot_values[g.slots[k]];
  }
  return out;
}

// Elementary decomposition used by the reverse sweep: Rot expands into its
// three rotations (RZ(gamma) first in circuit order), everything else maps
// one to one. `slot` is -1 for fixed angles and for CNOT.
struct Elem {
  GateKind kind;  // RX, RY, RZ, CRY or CNOT
  int target;
  int control;
  double angle;
  int slot;
};

void expand_gate(const GateOp& g, std::span<const double> slot_values,
                 std::vector<Elem>& out) {
  const auto ang = resolved_angles(g, slot_values);
  switch (g.kind) {
    case GateKind::Rot:
      out.push_back({GateKind::RZ, g.target, -1, ang[2], g.slots[2]});
      out.push_back({GateKind::RY, g.target, -1, ang[1], g.slots[1]});
      out.push_back({GateKind::RZ, g.target, -1, ang[0], g.slots[0]});
      break;
    case GateKind::CNOT:
      out.push_back({GateKind::CNOT, g.target, g.control, 0.0, -1});
      break;
    default:
      out.push_back({g.kind, g.target, g.control, ang[0], g.slots[0]});
      break;
  }
}

void apply_elem(StateVector& s, const Elem& e, double sign = 1.0) {
  switch (e.kind) {
    case GateKind::RX: apply_1q(s, e.target, mat_rx(sign * e.angle)); break;
    case GateKind::RY: apply_1q(s, e.target, mat_ry(sign * e.angle)); break;
    case GateKind::RZ: apply_1q(s, e.target, mat_rz(sign * e.angle)); break;
    case GateKind::CRY:
      apply_controlled_1q(s, e.control, e.target, mat_ry(sign * e.angle));
      break;
    case GateKind::CNOT:
      apply_controlled_1q(s, e.control, e.target, kPauliX);
      break;
    case GateKind::Rot: throw usage_error("Rot reaches the sweep unexpanded");
  }
}

// Applies the generator G of U = exp(-i angle/2 G) for the elementary
// rotations: X, Y, Z, or |1><1| (x) Y for CRY.
void apply_generator(StateVector& s, const Elem& e) {
  const std::size_t size = s.size();
  cplx* amp = s.data();
  switch (e.kind) {
    case GateKind::RX: {
      const std::size_t mask = bit_mask(s.n_qubits(), e.target);
      for (std::size_t i = 0; i < size; ++i) {
        if (i & mask) continue;
        std::swap(amp[i], amp[i | mask]);
      }
      break;
    }
    case GateKind::RY: {
      const std::size_t mask = bit_mask(s.n_qubits(), e.target);
      for (std::size_t i = 0; i < size; ++i) {
        if (i & mask) continue;
        const cplx v0 = amp[i];
        const cplx v1 = amp[i | mask];
        amp[i] = cplx(v1.imag(), -v1.real());        // -i * v1
        amp[i | mask] = cplx(-v0.imag(), v0.real()); //  i * v0
      }
      break;
    }
    case GateKind::RZ: {
      const std::size_t mask = bit_mask(s.n_qubits(), e.target);
      for (std::size_t i = 0; i < size; ++i)
        if (i & mask) amp[i] = -amp[i];
      break;
    }
    case GateKind::CRY: {
      const std::size_t cmask = bit_mask(s.n_qubits(), e.control);
      const std::size_t tmask = bit_mask(s.n_qubits(), e.target);
      for (std::size_t i = 0; i < size; ++i) {
        if (!(i & cmask)) {
          amp[i] = cplx(0.0, 0.0);
          continue;
        }
        if (i & tmask) continue;
        const cplx v0 = amp[i];
        const cplx v1 = amp[i | tmask];
        amp[i] = cplx(v1.imag(), -v1.real());
        amp[i | tmask] = cplx(-v0.imag(), v0.real());
      }
      break;
    }
    default:
      throw usage_error("gate has no generator");
  }
}

}  // namespace

int angle_count(GateKind kind) {
  switch (kind) {
    case GateKind::Rot: return 3;
    case GateKind::CNOT: return 0;
    default: return 1;
  }
}

const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::Rot: return "Rot";
    case GateKind::CRY: return "CRY";
    case GateKind::CNOT: return "CNOT";
  }
  return "?";
}

GateOp GateOp::rx(int target, double angle) {
  return {GateKind::RX, target, -1, {angle, 0, 0}, {-1, -1, -1}};
}
GateOp GateOp::ry(int target, double angle) {
  return {GateKind::RY, target, -1, {angle, 0, 0}, {-1, -1, -1}};
}
GateOp GateOp::rz(int target, double angle) {
  return {GateKind::RZ, target, -1, {angle, 0, 0}, {-1, -1, -1}};
}
GateOp GateOp::rot(int target, double alpha, double beta, double gamma) {
  return {GateKind::Rot, target, -1, {alpha, beta, gamma}, {-1, -1, -1}};
}
GateOp GateOp::cry(int control, int target, double angle) {
  return {GateKind::CRY, target, control, {angle, 0, 0}, {-1, -1, -1}};
}
GateOp GateOp::cnot(int control, int target) {
  return {GateKind::CNOT, target, control, {0, 0, 0}, {-1, -1, -1}};
}
GateOp GateOp::rx_slot(int target, int slot) {
  return {GateKind::RX, target, -1, {0, 0, 0}, {slot, -1, -1}};
}
GateOp GateOp::ry_slot(int target, int slot) {
  return {GateKind::RY, target, -1, {0, 0, 0}, {slot, -1, -1}};
}
GateOp GateOp::rz_slot(int target, int slot) {
  return {GateKind::RZ, target, -1, {0, 0, 0}, {slot, -1, -1}};
}
GateOp GateOp::rot_slots(int target, int sa, int sb, int sg) {
  return {GateKind::Rot, target, -1, {0, 0, 0}, {sa, sb, sg}};
}
GateOp GateOp::cry_slot(int control, int target, int slot) {
  return {GateKind::CRY, target, control, {0, 0, 0}, {slot, -1, -1}};
}

void Circuit::validate() const {
  if (n_qubits < 1) throw usage_error("circuit needs at least one qubit");
  if (readout_qubit < 0 || readout_qubit >= n_qubits)
    throw usage_error("readout wire out of range");
  if (n_slots < 0) throw usage_error("negative slot count");
  for (const GateOp& g : gates) {
    check_wire(*this, g.target, "target");
    const bool controlled = g.kind == GateKind::CRY || g.kind == GateKind::CNOT;
    if (controlled) {
      check_wire(*this, g.control, "control");
      if (g.control == g.target)
        throw usage_error("control and target coincide");
    } else if (g.control != -1) {
      throw usage_error("control wire set on an uncontrolled gate");
    }
    for (int k = 0; k < angle_count(g.kind); ++k)
      if (g.slots[k] >= n_slots)
        throw usage_error("slot index beyond the circuit's slot count");
  }
}

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > 24)
    throw usage_error("state vector supports 1..24 qubits");
  amp_.assign(std::size_t{1} << n_qubits, cplx(0.0, 0.0));
  amp_[0] = cplx(1.0, 0.0);
}

void StateVector::reset() {
  std::fill(amp_.begin(), amp_.end(), cplx(0.0, 0.0));
  amp_[0] = cplx(1.0, 0.0);
}

double StateVector::norm_sq() const {
  double acc = 0.0;
  for (const cplx& a : amp_)
    acc += a.real() * a.real() + a.imag() * a.imag();
  return acc;
}

void apply_gate(StateVector& state, const GateOp& gate,
                std::span<const double> slot_values) {
  if (gate.target < 0 || gate.target >= state.n_qubits())
    throw usage_error("target wire out of range");
  const auto ang = resolved_angles(gate, slot_values);
  const bool controlled = gate.kind == GateKind::CRY || gate.kind == GateKind::CNOT;
  if (controlled) {
    if (gate.control < 0 || gate.control >= state.n_qubits())
      throw usage_error("control wire out of range");
    if (gate.control == gate.target)
      throw usage_error("control and target coincide");
  }
  switch (gate.kind) {
    case GateKind::RX: apply_1q(state, gate.target, mat_rx(ang[0])); break;
    case GateKind::RY: apply_1q(state, gate.target, mat_ry(ang[0])); break;
    case GateKind::RZ: apply_1q(state, gate.target, mat_rz(ang[0])); break;
    case GateKind::Rot:
      apply_1q(state, gate.target, mat_rot(ang[0], ang[1], ang[2]));
      break;
    case GateKind::CRY:
      apply_controlled_1q(state, gate.control, gate.target, mat_ry(ang[0]));
      break;
    case GateKind::CNOT:
      apply_controlled_1q(state, gate.control, gate.target, kPauliX);
      break;
  }
}

double expectation_z(const StateVector& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits())
    throw usage_error("readout wire out of range");
  const std::size_t mask = bit_mask(state.n_qubits(), qubit);
  const cplx* amp = state.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double p = amp[i].real() * amp[i].real() + amp[i].imag() * amp[i].imag();
    acc += (i & mask) ? -p : p;
  }
  return acc;
}

double run(const Circuit& circuit, std::span<const double> slot_values) {
  circuit.validate();
  if (static_cast<int>(slot_values.size()) != circuit.n_slots)
    throw usage_error("slot value count does not match the circuit");
  StateVector state(circuit.n_qubits);
  for (const GateOp& g : circuit.gates) apply_gate(state, g, slot_values);
  return expectation_z(state, circuit.readout_qubit);
}

RunResult run_with_gradient(const Circuit& circuit,
                            std::span<const double> slot_values) {
  circuit.validate();
  if (static_cast<int>(slot_values.size()) != circuit.n_slots)
    throw usage_error("slot value count does not match the circuit");

  std::vector<Elem> elems;
  elems.reserve(circuit.gates.size() * 2);
  for (const GateOp& g : circuit.gates) expand_gate(g, slot_values, elems);

  StateVector ket(circuit.n_qubits);
  for (const Elem& e : elems) apply_elem(ket, e);

  RunResult out;
  out.value = expectation_z(ket, circuit.readout_qubit);
  out.gradient.assign(static_cast<std::size_t>(circuit.n_slots), 0.0);
  if (circuit.n_slots == 0) return out;

  // Reverse sweep. Invariant entering step k: ket = U_k ... U_1 |0>,
  // bra = (U_N ... U_{k+1})^dag Z_readout U_N ... U_1 |0>. The slot-k score
  // is d<Z>/d(angle_k) = Im <bra| G_k |ket> for U = exp(-i angle/2 G).
  StateVector bra = ket;
  apply_pauli_z(bra, circuit.readout_qubit);
  StateVector mu(circuit.n_qubits);

  for (std::size_t k = elems.size(); k-- > 0;) {
    const Elem& e = elems[k];
    if (e.slot >= 0) {
      mu = ket;
      apply_generator(mu, e);
      out.gradient[e.slot] += im_inner(bra, mu);
    }
    if (k == 0) break;
    apply_elem(ket, e, -1.0);  // rotations invert by negating the angle
    apply_elem(bra, e, -1.0);  // CNOT is self-inverse, sign is ignored
  }
  return out;
}

std::vector<double> gradient(const Circuit& circuit,
                             std::span<const double> slot_values) {
  return run_with_gradient(circuit, slot_values).gradient;
}

}  // namespace lundq::qsim
