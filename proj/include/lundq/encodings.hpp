#pragma once

#include <span>
#include <vector>

#include "lundq/jets.hpp"

namespace lundq::encodings {

/// Floor under r^2 so empty nodes sit at r = 1e-5 instead of the exact pole.
inline constexpr double kREpsilon = 1e-10;

struct AnglePair {
  double theta = 0.0;
  double phi = 0.0;
};

/// Trainable deformation of the stereographic Lund-plane map, one pair per
/// tree node.
struct Lp2bParams {
  std::vector<double> lambda;
  std::vector<double> omega;
};

/// Per node i with coordinates (x1, x2):
///   r     = sqrt(x1^2 + x2^2 + eps)
///   theta = 2 * atan(lambda_i * r)
///   phi   = omega_i * atan2(x2, x1)        (atan2(0, 0) := 0)
/// Unoccupied nodes therefore give theta = 2*atan(lambda * 1e-5) ~ 0 and
/// phi = 0: the encoded qubit stays within 1e-8 of |0> for |lambda| <= 10.
std::vector<AnglePair> lp2b_angles(const jets::LundTree& tree,
                                   const Lp2bParams& params);

/// Diagonal Jacobian of lp2b_angles: theta depends only on lambda_i and phi
/// only on omega_i.
struct Lp2bJacobian {
  std::vector<double> dtheta_dlambda;  // 2r / (1 + lambda^2 r^2)
  std::vector<double> dphi_domega;     // atan2(x2, x1)
};

Lp2bJacobian lp2b_jacobian(const jets::LundTree& tree,
                           const Lp2bParams& params);

/// Jet axis used to center the per-particle encoding.
struct JetAxis {
  double pt = 0.0;
  double eta = 0.0;
  double phi = 0.0;
};

/// Trainable scale of the per-particle encoding, squashed into (1, 1 + 2pi).
double p1q_deformation(double w);
double p1q_deformation_dw(double w);

/// Per-particle angles: constituent k (sorted by descending pt, first
/// n_qubits, zero-padded when fewer) maps to
///   theta_k = f(w) * (pt_k / pt_jet) * (eta_k - eta_jet)
///   phi_k   = f(w) * (pt_k / pt_jet) * wrap(phi_k - phi_jet)
std::vector<AnglePair> p1q_angles(std::span<const jets::Particle> constituents,
                                  const JetAxis& axis, int n_qubits, double w);

/// d(theta_k, phi_k)/dw for the same inputs.
std::vector<AnglePair> p1q_angles_dw(std::span<const jets::Particle> constituents,
                                     const JetAxis& axis, int n_qubits,
                                     double w);

}  // namespace lundq::encodings
