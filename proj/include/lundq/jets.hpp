#pragma once

#include <memory>
#include <span>
#include <vector>

namespace lundq::jets {

/// Massless particle in hadron-collider coordinates. phi is canonicalized to
/// [-pi, pi) on construction; for massless particles rapidity and
/// pseudorapidity coincide.
struct Particle {
  double pt;
  double y;
  double phi;

  Particle(double pt, double y, double phi);  // throws data_error on junk
};

/// Four-momentum plus clustering provenance. Jets produced by cluster() know
/// which input particles they contain and, when they arose from a merge,
/// which two pseudojets were combined (E-scheme, four-vector sum).
class PseudoJet {
 public:
  static PseudoJet from_particle(const Particle& p, int id);
  static PseudoJet from_components(double px, double py, double pz, double e);
  static PseudoJet merge(const PseudoJet& a, const PseudoJet& b);

  double px() const { return px_; }
  double py() const { return py_; }
  double pz() const { return pz_; }
  double e() const { return e_; }

  double pt() const;
  double pt_sq() const;
  double rapidity() const;
  double pseudorapidity() const;
  double phi() const;  // [-pi, pi)
  double mass() const;

  bool has_history() const { return child_a_ != nullptr; }
  const PseudoJet& child_a() const { return *child_a_; }
  const PseudoJet& child_b() const { return *child_b_; }

  const std::vector<int>& constituent_ids() const { return constituent_ids_; }

 private:
  double px_ = 0, py_ = 0, pz_ = 0, e_ = 0;
  std::vector<int> constituent_ids_;  // sorted ascending
  std::shared_ptr<const PseudoJet> child_a_, child_b_;
};

/// Squared angular distance (delta y)^2 + (delta phi)^2 with the azimuthal
/// difference wrapped to (-pi, pi].
double delta_r_sq(const PseudoJet& a, const PseudoJet& b);

/// Generalized-kt sequential recombination:
///   d_ij = min(pt_i^{2p}, pt_j^{2p}) * dR_ij^2 / R^2,   d_iB = pt_i^{2p}
/// p = 0 is Cambridge/Aachen, p = -1 anti-kt. Returns every beam-merged
/// pseudojet (the inclusive jets), sorted by descending pt. Distances equal
/// within 1e-12 relative are tie-broken toward the lexicographically smaller
/// (i, j) creation-index pair, so reruns replay identically.
std::vector<PseudoJet> cluster(std::span<const Particle> particles, double R,
                               double p);

/// One Lund-plane declustering node. A slot left empty by truncation or
/// trimming stays exactly (0, 0); real splittings always have x2 >= ln 2, so
/// occupancy is recoverable from the coordinates alone.
struct LundNode {
  double x1 = 0.0;  // ln(R0 / deltaR), R0 = 1
  double x2 = 0.0;  // ln(1 / z)
  bool occupied() const { return x1 != 0.0 || x2 != 0.0; }
};

/// Fixed-shape binary tree of depth D stored breadth-first: node i has
/// children 2i+1 and 2i+2, 2^D - 1 slots in total.
struct LundTree {
  int depth = 0;
  std::vector<LundNode> nodes;

  static LundTree empty(int depth);
  int node_count() const { return static_cast<int>(nodes.size()); }
};

/// Walks the C/A merge history of `jet` from the top. At each splitting the
/// softer prong defines z = pt_s / (pt_s + pt_h) and kt = pt_s * deltaR;
/// splittings with ln(kt) <= ln_kt_cut are trimmed (the softer prong is
/// dropped and declustering continues with the harder prong in the same
/// slot). Surviving splittings fill (x1, x2), then recurse: harder prong to
/// child slot 2i+1, softer to 2i+2, down to the requested depth.
LundTree extract_lund_tree(const PseudoJet& jet, int depth, double ln_kt_cut);

/// Breadth-first (x1, x2) pairs, 2 * (2^depth - 1) values.
std::vector<double> flatten(const LundTree& tree);

/// Inverse of flatten for a given depth.
LundTree unflatten(std::span<const double> values, int depth);

}  // namespace lundq::jets
