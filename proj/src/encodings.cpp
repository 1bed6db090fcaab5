#include "lundq/encodings.hpp"

#include <cmath>

#include "lundq/common.hpp"

namespace lundq::encodings {

namespace {

void check_params(const jets::LundTree& tree, const Lp2bParams& params) {
  const std::size_t n = tree.nodes.size();
  if (params.lambda.size() != n || params.omega.size() != n)
    throw usage_error("lp2b parameter count does not match the tree");
}

double node_azimuth(const jets::LundNode& node) {
  if (node.x1 == 0.0 && node.x2 == 0.0) return 0.0;
  return std::atan2(node.x2, node.x1);
}

}  // namespace

std::vector<AnglePair> lp2b_angles(const jets::LundTree& tree,
                                   const Lp2bParams& params) {
  check_params(tree, params);
  std::vector<AnglePair> out(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const jets::LundNode& n = tree.nodes[i];
    const double r = std::sqrt(n.x1 * n.x1 + n.x2 * n.x2 + kREpsilon);
    out[i].theta = 2.0 * std::atan(params.lambda[i] * r);
    out[i].phi = params.omega[i] * node_azimuth(n);
  }
  return out;
}

Lp2bJacobian lp2b_jacobian(const jets::LundTree& tree,
                           const Lp2bParams& params) {
  check_params(tree, params);
  Lp2bJacobian jac;
  jac.dtheta_dlambda.resize(tree.nodes.size());
  jac.dphi_domega.resize(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const jets::LundNode& n = tree.nodes[i];
    const double r2 = n.x1 * n.x1 + n.x2 * n.x2 + kREpsilon;
    const double r = std::sqrt(r2);
    const double lr = params.lambda[i] * r;
    jac.dtheta_dlambda[i] = 2.0 * r / (1.0 + lr * lr);
    jac.dphi_domega[i] = node_azimuth(n);
  }
  return jac;
}

double p1q_deformation(double w) {
  return 1.0 + 2.0 * kPi / (1.0 + std::exp(-w));
}

double p1q_deformation_dw(double w) {
  const double s = 1.0 / (1.0 + std::exp(-w));
  return 2.0 * kPi * s * (1.0 - s);
}

namespace {

std::vector<AnglePair> p1q_scaled(std::span<const jets::Particle> constituents,
                                  const JetAxis& axis, int n_qubits,
                                  double scale) {
  if (n_qubits < 2) throw usage_error("per-particle encoding needs >= 2 qubits");
  if (!(axis.pt > 0.0)) throw data_error("jet axis with non-positive pt");
  std::vector<AnglePair> out(static_cast<std::size_t>(n_qubits));
  const std::size_t n =
      std::min(constituents.size(), static_cast<std::size_t>(n_qubits));
  for (std::size_t k = 0; k < n; ++k) {
    const jets::Particle& c = constituents[k];
    const double weight = scale * c.pt / axis.pt;
    out[k].theta = weight * (c.y - axis.eta);  // massless: eta == y
    out[k].phi = weight * wrap_delta_phi(c.phi - axis.phi);
  }
  return out;
}

}  // namespace

std::vector<AnglePair> p1q_angles(std::span<const jets::Particle> constituents,
                                  const JetAxis& axis, int n_qubits, double w) {
  return p1q_scaled(constituents, axis, n_qubits, p1q_deformation(w));
}

std::vector<AnglePair> p1q_angles_dw(
    std::span<const jets::Particle> constituents, const JetAxis& axis,
    int n_qubits, double w) {
  return p1q_scaled(constituents, axis, n_qubits, p1q_deformation_dw(w));
}

}  // namespace lundq::encodings
