#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lundq/common.hpp"
#include "lundq/encodings.hpp"
#include "support/oracles.hpp"

using lundq::encodings::JetAxis;
using lundq::encodings::lp2b_angles;
using lundq::encodings::lp2b_jacobian;
using lundq::encodings::Lp2bParams;
using lundq::encodings::p1q_angles;
using lundq::encodings::p1q_angles_dw;
using lundq::encodings::p1q_deformation;
using lundq::encodings::p1q_deformation_dw;
using lundq::jets::LundTree;
using lundq::jets::Particle;

namespace {

LundTree one_node_tree(double x1, double x2) {
  LundTree t = LundTree::empty(3);
  t.nodes[0] = {x1, x2};
  return t;
}

Lp2bParams unit_params(std::size_t n) {
  Lp2bParams p;
  p.lambda.assign(n, 1.0);
  p.omega.assign(n, 1.0);
  return p;
}

}  // namespace

TEST_CASE("stereographic angles follow the closed-form map") {
  auto tree = one_node_tree(1.0, 1.5);
  auto params = unit_params(7);
  params.lambda[0] = 0.8;
  params.omega[0] = 1.3;
  const auto angles = lp2b_angles(tree, params);
  const double r = std::sqrt(1.0 + 2.25 + 1e-10);
  CHECK(angles[0].theta ==
        doctest::Approx(2.0 * std::atan(0.8 * r)).epsilon(1e-15));
  CHECK(angles[0].phi ==
        doctest::Approx(1.3 * std::atan2(1.5, 1.0)).epsilon(1e-15));
}

TEST_CASE("polar angle grows monotonically with the radial coordinate") {
  auto params = unit_params(7);
  double last = 0.0;
  for (double x : {0.2, 0.5, 1.0, 2.0, 4.0}) {
    const auto angles = lp2b_angles(one_node_tree(x, x), params);
    CHECK(angles[0].theta > last);
    last = angles[0].theta;
  }
  CHECK(last < lundq::kPi);  // theta saturates below pi
}

TEST_CASE("empty slots encode within 1e-8 of |0> for moderate deformations") {
  const LundTree tree = LundTree::empty(3);
  for (double lam : {-10.0, -1.0, 0.5, 1.0, 10.0}) {
    Lp2bParams params = unit_params(7);
    params.lambda.assign(7, lam);
    params.omega.assign(7, 3.0);
    const auto angles = lp2b_angles(tree, params);
    for (const auto& a : angles) {
      CHECK(a.phi == 0.0);  // atan2(0, 0) is pinned to zero
      const double overlap = std::cos(a.theta / 2.0) * std::cos(a.theta / 2.0);
      CHECK(overlap >= 1.0 - 1e-8);
    }
  }
}

TEST_CASE("deformation gradients match finite differences") {
  LundTree tree = one_node_tree(0.9, 1.4);
  tree.nodes[3] = {2.0, 0.7};
  Lp2bParams params = unit_params(7);
  params.lambda = {0.5, 1.0, 1.5, -0.8, 1.0, 2.0, 0.1};
  params.omega = {1.2, 0.9, 1.0, 1.1, 1.0, 0.7, 1.3};
  const auto jac = lp2b_jacobian(tree, params);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto th = oracle::fd_gradient(
        [&](std::span<const double> lam) {
          Lp2bParams p = params;
          p.lambda.assign(lam.begin(), lam.end());
          return lp2b_angles(tree, p)[i].theta;
        },
        params.lambda, 1e-6);
    const auto ph = oracle::fd_gradient(
        [&](std::span<const double> om) {
          Lp2bParams p = params;
          p.omega.assign(om.begin(), om.end());
          return lp2b_angles(tree, p)[i].phi;
        },
        params.omega, 1e-6);
    CAPTURE(i);
    CHECK(jac.dtheta_dlambda[i] ==
          doctest::Approx(th[i]).epsilon(1e-6).scale(1.0));
    CHECK(jac.dphi_domega[i] == doctest::Approx(ph[i]).epsilon(1e-6).scale(1.0));
    for (std::size_t j = 0; j < 7; ++j)
      if (j != i) {
        CHECK(th[j] == doctest::Approx(0.0).scale(1.0));  // diagonal Jacobian
        CHECK(ph[j] == doctest::Approx(0.0).scale(1.0));
      }
  }
}

TEST_CASE("parameter shape mismatches are refused") {
  const LundTree tree = LundTree::empty(3);
  Lp2bParams params = unit_params(5);
  CHECK_THROWS_AS(lp2b_angles(tree, params), lundq::usage_error);
  CHECK_THROWS_AS(lp2b_jacobian(tree, params), lundq::usage_error);
}

TEST_CASE("the scale squashing lands strictly inside (1, 1 + 2pi)") {
  CHECK(p1q_deformation(0.0) ==
        doctest::Approx(1.0 + lundq::kPi).epsilon(1e-15));
  CHECK(p1q_deformation(-40.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p1q_deformation(40.0) ==
        doctest::Approx(1.0 + 2.0 * lundq::kPi).epsilon(1e-12));
  double last = 0.0;
  for (double w = -6.0; w <= 6.0; w += 0.5) {
    const double f = p1q_deformation(w);
    CHECK(f > 1.0);
    CHECK(f < 1.0 + 2.0 * lundq::kPi);
    CHECK(f > last);
    last = f;
    const std::vector<double> at{w};
    const auto fd = oracle::fd_gradient(
        [](std::span<const double> x) { return p1q_deformation(x[0]); }, at,
        1e-6);
    CHECK(p1q_deformation_dw(w) ==
          doctest::Approx(fd[0]).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("per-particle angles scale momenta relative to the axis") {
  const JetAxis axis{100.0, 0.5, 1.0};
  const std::vector<Particle> parts{{60.0, 0.6, 1.2}, {40.0, 0.3, 0.9}};
  const auto angles = p1q_angles(parts, axis, 4, 0.0);
  REQUIRE(angles.size() == 4);
  const double f = 1.0 + lundq::kPi;
  CHECK(angles[0].theta == doctest::Approx(f * 0.6 * 0.1).epsilon(1e-12));
  CHECK(angles[0].phi == doctest::Approx(f * 0.6 * 0.2).epsilon(1e-12));
  CHECK(angles[1].theta == doctest::Approx(f * 0.4 * -0.2).epsilon(1e-12));
  CHECK(angles[1].phi == doctest::Approx(f * 0.4 * -0.1).epsilon(1e-12));
  // unused qubits stay exactly at zero
  CHECK(angles[2].theta == 0.0);
  CHECK(angles[2].phi == 0.0);
  CHECK(angles[3].theta == 0.0);
  CHECK(angles[3].phi == 0.0);
}

TEST_CASE("only the leading n_qubits constituents are encoded") {
  const JetAxis axis{100.0, 0.0, 0.0};
  const std::vector<Particle> parts{
      {60.0, 0.1, 0.0}, {30.0, 0.2, 0.0}, {10.0, 0.3, 0.0}};
  const auto angles = p1q_angles(parts, axis, 2, 0.3);
  REQUIRE(angles.size() == 2);
  CHECK(angles[1].theta ==
        doctest::Approx(p1q_deformation(0.3) * 0.3 * 0.2).epsilon(1e-12));
}

TEST_CASE("azimuthal offsets wrap across the seam") {
  const JetAxis axis{50.0, 0.0, 3.0};
  const std::vector<Particle> parts{{50.0, 0.0, -3.0}};
  const auto angles = p1q_angles(parts, axis, 2, 0.0);
  const double wrapped = 2.0 * lundq::kPi - 6.0;  // from -3 - 3 = -6
  CHECK(angles[0].phi ==
        doctest::Approx((1.0 + lundq::kPi) * wrapped).epsilon(1e-12));
}

TEST_CASE("per-particle scale gradient matches finite differences") {
  const JetAxis axis{80.0, -0.2, 0.4};
  const std::vector<Particle> parts{{50.0, 0.1, 0.6}, {20.0, -0.5, 0.2}};
  for (double w : {-1.5, 0.0, 0.8}) {
    const std::vector<double> at{w};
    const auto dw = p1q_angles_dw(parts, axis, 3, w);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto fd_t = oracle::fd_gradient(
          [&](std::span<const double> x) {
            return p1q_angles(parts, axis, 3, x[0])[k].theta;
          },
          at, 1e-6);
      const auto fd_p = oracle::fd_gradient(
          [&](std::span<const double> x) {
            return p1q_angles(parts, axis, 3, x[0])[k].phi;
          },
          at, 1e-6);
      CAPTURE(w);
      CAPTURE(k);
      CHECK(dw[k].theta == doctest::Approx(fd_t[0]).epsilon(1e-6).scale(1.0));
      CHECK(dw[k].phi == doctest::Approx(fd_p[0]).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("per-particle encoding rejects degenerate inputs") {
  const std::vector<Particle> parts{{10.0, 0.0, 0.0}};
  CHECK_THROWS_AS(p1q_angles(parts, JetAxis{10.0, 0.0, 0.0}, 1, 0.0),
                  lundq::usage_error);
  CHECK_THROWS_AS(p1q_angles(parts, JetAxis{0.0, 0.0, 0.0}, 4, 0.0),
                  lundq::data_error);
}
