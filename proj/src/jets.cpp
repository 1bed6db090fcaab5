#include "lundq/jets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lundq/common.hpp"

namespace lundq::jets {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool near_equal(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

Particle::Particle(double pt_in, double y_in, double phi_in)
    : pt(pt_in), y(y_in), phi(canonical_phi(phi_in)) {
  if (!std::isfinite(pt_in) || !std::isfinite(y_in) || !std::isfinite(phi_in))
    throw data_error("particle with non-finite momentum");
  if (pt_in <= 0.0) throw data_error("particle with non-positive pt");
}

PseudoJet PseudoJet::from_particle(const Particle& p, int id) {
  PseudoJet j;
  j.px_ = p.pt * std::cos(p.phi);
  j.py_ = p.pt * std::sin(p.phi);
  j.pz_ = p.pt * std::sinh(p.y);
  j.e_ = p.pt * std::cosh(p.y);
  j.constituent_ids_ = {id};
  return j;
}

PseudoJet PseudoJet::from_components(double px, double py, double pz, double e) {
  if (!std::isfinite(px) || !std::isfinite(py) || !std::isfinite(pz) ||
      !std::isfinite(e))
    throw data_error("pseudojet with non-finite momentum");
  const double pmag = std::sqrt(px * px + py * py + pz * pz);
  if (e < pmag * (1.0 - 1e-9))
    throw data_error("pseudojet with spacelike four-momentum");
  PseudoJet j;
  j.px_ = px;
  j.py_ = py;
  j.pz_ = pz;
  j.e_ = e;
  return j;
}

PseudoJet PseudoJet::merge(const PseudoJet& a, const PseudoJet& b) {
  PseudoJet j;
  j.px_ = a.px_ + b.px_;
  j.py_ = a.py_ + b.py_;
  j.pz_ = a.pz_ + b.pz_;
  j.e_ = a.e_ + b.e_;
  j.constituent_ids_.resize(a.constituent_ids_.size() + b.constituent_ids_.size());
  std::merge(a.constituent_ids_.begin(), a.constituent_ids_.end(),
             b.constituent_ids_.begin(), b.constituent_ids_.end(),
             j.constituent_ids_.begin());
  j.child_a_ = std::make_shared<PseudoJet>(a);
  j.child_b_ = std::make_shared<PseudoJet>(b);
  return j;
}

double PseudoJet::pt_sq() const { return px_ * px_ + py_ * py_; }
double PseudoJet::pt() const { return std::sqrt(pt_sq()); }

double PseudoJet::rapidity() const {
  return 0.5 * std::log((e_ + pz_) / (e_ - pz_));
}

double PseudoJet::pseudorapidity() const { return std::asinh(pz_ / pt()); }

double PseudoJet::phi() const { return canonical_phi(std::atan2(py_, px_)); }

double PseudoJet::mass() const {
  const double m2 = e_ * e_ - px_ * px_ - py_ * py_ - pz_ * pz_;
  return m2 > 0.0 ? std::sqrt(m2) : 0.0;
}

double delta_r_sq(const PseudoJet& a, const PseudoJet& b) {
  const double dy = a.rapidity() - b.rapidity();
  const double dphi = wrap_delta_phi(a.phi() - b.phi());
  return dy * dy + dphi * dphi;
}

namespace {

// Working entry for the recombination loop. `nn` caches the geometrically
// nearest active neighbour; the pair distance served from entry i is always
// dij(i, nn_i), which is enough to find the global minimum because
// min(a, b) <= a.
struct ClusterEntry {
  PseudoJet jet;
  double y, phi, pt2p;
  int id;
  bool active = true;
  int nn = -1;
  double nn_dr2 = kInf;
};

double entry_dr2(const ClusterEntry& a, const ClusterEntry& b) {
  const double dy = a.y - b.y;
  const double dphi = wrap_delta_phi(a.phi - b.phi);
  return dy * dy + dphi * dphi;
}

void rescan_nn(std::vector<ClusterEntry>& entries, int i) {
  ClusterEntry& ei = entries[i];
  ei.nn = -1;
  ei.nn_dr2 = kInf;
  for (int j = 0; j < static_cast<int>(entries.size()); ++j) {
    if (j == i || !entries[j].active) continue;
    const double d = entry_dr2(ei, entries[j]);
    if (d < ei.nn_dr2) {
      ei.nn_dr2 = d;
      ei.nn = j;
    }
  }
}

struct Candidate {
  double value = kInf;
  // Creation-index key; beam merges use (id, INT_MAX) so that a tied
  // pair-merge wins over a tied beam-merge.
  std::pair<int, int> key{0, 0};
  int slot_i = -1, slot_j = -1;  // slot_j = -1 marks a beam merge
  bool valid = false;

  bool beats(const Candidate& other) const {
    if (!other.valid) return true;
    if (near_equal(value, other.value)) return key < other.key;
    return value < other.value;
  }
};

}  // namespace

std::vector<PseudoJet> cluster(std::span<const Particle> particles, double R,
                               double p) {
  if (particles.empty()) throw data_error("cluster: no particles");
  if (!std::isfinite(R) || R <= 0.0)
    throw usage_error("cluster: R must be positive and finite");
  if (!std::isfinite(p)) throw usage_error("cluster: non-finite power p");

  const double inv_r2 = 1.0 / (R * R);
  std::vector<ClusterEntry> entries;
  entries.reserve(particles.size() * 2);
  int next_id = 0;
  for (const Particle& part : particles) {
    ClusterEntry e;
    e.jet = PseudoJet::from_particle(part, next_id);
    e.y = e.jet.rapidity();
    e.phi = e.jet.phi();
    e.pt2p = std::pow(e.jet.pt_sq(), p);
    e.id = next_id++;
    entries.push_back(std::move(e));
  }
  for (int i = 0; i < static_cast<int>(entries.size()); ++i)
    rescan_nn(entries, i);

  std::vector<PseudoJet> inclusive;
  std::size_t remaining = entries.size();

  while (remaining > 0) {
    Candidate best;
    for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
      const ClusterEntry& ei = entries[i];
      if (!ei.active) continue;

      Candidate beam;
      beam.value = ei.pt2p;
      beam.key = {ei.id, std::numeric_limits<int>::max()};
      beam.slot_i = i;
      beam.valid = true;
      if (beam.beats(best)) best = beam;

      if (ei.nn >= 0) {
        const ClusterEntry& ej = entries[ei.nn];
        Candidate pair;
        pair.value = std::min(ei.pt2p, ej.pt2p) * ei.nn_dr2 * inv_r2;
        pair.key = {std::min(ei.id, ej.id), std::max(ei.id, ej.id)};
        pair.slot_i = i;
        pair.slot_j = ei.nn;
        pair.valid = true;
        if (pair.beats(best)) best = pair;
      }
    }

    if (best.slot_j < 0) {
      // beam merge: the pseudojet becomes an inclusive jet
      ClusterEntry& ei = entries[best.slot_i];
      ei.active = false;
      --remaining;
      inclusive.push_back(std::move(ei.jet));
      for (int k = 0; k < static_cast<int>(entries.size()); ++k)
        if (entries[k].active && entries[k].nn == best.slot_i)
          rescan_nn(entries, k);
      continue;
    }

    const int ia = best.slot_i;
    const int ib = best.slot_j;
    ClusterEntry merged;
    merged.jet = PseudoJet::merge(entries[ia].jet, entries[ib].jet);
    merged.y = merged.jet.rapidity();
    merged.phi = merged.jet.phi();
    merged.pt2p = std::pow(merged.jet.pt_sq(), p);
    merged.id = next_id++;
    entries[ia].active = false;
    entries[ib].active = false;
    --remaining;

    const int im = static_cast<int>(entries.size());
    entries.push_back(std::move(merged));
    rescan_nn(entries, im);
    for (int k = 0; k < im; ++k) {
      ClusterEntry& ek = entries[k];
      if (!ek.active) continue;
      if (ek.nn == ia || ek.nn == ib) {
        rescan_nn(entries, k);
      } else {
        const double d = entry_dr2(ek, entries[im]);
        if (d < ek.nn_dr2) {
          ek.nn_dr2 = d;
          ek.nn = im;
        }
      }
    }
  }

  std::sort(inclusive.begin(), inclusive.end(),
            [](const PseudoJet& a, const PseudoJet& b) {
              if (a.pt_sq() != b.pt_sq()) return a.pt_sq() > b.pt_sq();
              return a.constituent_ids() < b.constituent_ids();
            });
  return inclusive;
}

LundTree LundTree::empty(int depth) {
  if (depth < 1) throw usage_error("lund tree depth must be >= 1");
  LundTree t;
  t.depth = depth;
  t.nodes.assign((std::size_t{1} << depth) - 1, LundNode{});
  return t;
}

namespace {

void fill_slot(const PseudoJet& start, int slot, double ln_kt_cut,
               LundTree& tree) {
  const PseudoJet* cur = &start;
  while (cur->has_history()) {
    const PseudoJet* a = &cur->child_a();
    const PseudoJet* b = &cur->child_b();
    if (b->pt_sq() > a->pt_sq()) std::swap(a, b);  // a is the harder prong
    const double pt_h = a->pt();
    const double pt_s = b->pt();
    const double dr = std::sqrt(delta_r_sq(*a, *b));
    const double kt = pt_s * dr;
    if (!(std::log(kt) > ln_kt_cut)) {  // trimmed; log(0) = -inf falls here
      cur = a;
      continue;
    }
    const double z = pt_s / (pt_s + pt_h);
    tree.nodes[slot] = {-std::log(dr), -std::log(z)};
    const int child_h = 2 * slot + 1;
    const int child_s = 2 * slot + 2;
    if (child_h < tree.node_count()) fill_slot(*a, child_h, ln_kt_cut, tree);
    if (child_s < tree.node_count()) fill_slot(*b, child_s, ln_kt_cut, tree);
    return;
  }
}

}  // namespace

LundTree extract_lund_tree(const PseudoJet& jet, int depth, double ln_kt_cut) {
  if (depth < 1) throw usage_error("lund tree depth must be >= 1");
  if (!jet.has_history() && jet.constituent_ids().size() != 1)
    throw usage_error("jet carries no clustering history");
  LundTree tree = LundTree::empty(depth);
  fill_slot(jet, 0, ln_kt_cut, tree);
  return tree;
}

std::vector<double> flatten(const LundTree& tree) {
  std::vector<double> out;
  out.reserve(tree.nodes.size() * 2);
  for (const LundNode& n : tree.nodes) {
    out.push_back(n.x1);
    out.push_back(n.x2);
  }
  return out;
}

LundTree unflatten(std::span<const double> values, int depth) {
  LundTree tree = LundTree::empty(depth);
  if (values.size() != tree.nodes.size() * 2)
    throw usage_error("flattened length does not match the requested depth");
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    tree.nodes[i] = {values[2 * i], values[2 * i + 1]};
  return tree;
}

}  // namespace lundq::jets
