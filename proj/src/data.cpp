#include "lundq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lundq/common.hpp"

namespace lundq::data {

namespace {

using nlohmann::json;

// Radius for the C/A re-clustering pass. Large enough that the constituents
// of one jet always collapse into a single tree.
constexpr double kReclusterRadius = 16.0;

std::string at_line(const std::string& path, std::size_t line_no,
                    const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line_no << ": " << what;
  return os.str();
}

int parse_label(const json& j, const std::string& path, std::size_t line_no) {
  if (!j.contains("label") || !j["label"].is_number_integer())
    throw data_error(at_line(path, line_no, "missing integer \"label\""));
  const int label = j["label"].get<int>();
  if (label != 0 && label != 1)
    throw data_error(at_line(path, line_no, "label must be 0 or 1"));
  return label;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  return out;
}

}  // namespace

std::optional<JetRecord> prepare_record(const EventRecord& event,
                                        const PrepareOptions& opts) {
  if (event.constituents.empty()) throw data_error("event with no constituents");

  auto jets_found = jets::cluster(event.constituents, opts.r, -1.0);
  const jets::PseudoJet& leading = jets_found.front();

  if (opts.mass_window) {
    const double m = leading.mass();
    if (m < opts.mass_window->first || m > opts.mass_window->second)
      return std::nullopt;
  }

  std::vector<jets::Particle> members;
  members.reserve(leading.constituent_ids().size());
  for (int id : leading.constituent_ids())
    members.push_back(event.constituents[static_cast<std::size_t>(id)]);

  auto rejets = jets::cluster(members, kReclusterRadius, 0.0);

  JetRecord rec;
  rec.label = event.label;
  rec.tree = jets::extract_lund_tree(rejets.front(), opts.depth, opts.ln_kt_cut);
  rec.axis = encodings::JetAxis{leading.pt(), leading.pseudorapidity(),
                                leading.phi()};
  std::sort(members.begin(), members.end(),
            [](const jets::Particle& a, const jets::Particle& b) {
              return a.pt > b.pt;
            });
  rec.constituents = std::move(members);
  return rec;
}

Dataset Dataset::from_records(std::vector<JetRecord> records, double val_frac,
                              double test_frac, std::uint64_t seed) {
  if (val_frac < 0.0 || test_frac < 0.0 || val_frac + test_frac >= 1.0)
    throw usage_error("split fractions must be non-negative and sum below 1");
  Dataset ds;
  ds.records = std::move(records);
  ds.split.assign(ds.records.size(), Split::Train);

  std::mt19937_64 rng(seed);
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      if (ds.records[i].label == label) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(idx.size())));
    const std::size_t n_val =
        static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k < n_test)
        ds.split[idx[k]] = Split::Test;
      else if (k < n_test + n_val)
        ds.split[idx[k]] = Split::Val;
    }
  }
  return ds;
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::array<std::size_t, 2> Dataset::class_counts(Split s) const {
  std::array<std::size_t, 2> counts{0, 0};
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) ++counts[static_cast<std::size_t>(records[i].label)];
  return counts;
}

std::vector<EventRecord> read_events_jsonl(const std::string& path) {
  auto in = open_input(path);
  std::vector<EventRecord> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw data_error(at_line(path, line_no, e.what()));
    }
    EventRecord ev;
    ev.label = parse_label(j, path, line_no);
    if (!j.contains("constituents") || !j["constituents"].is_array())
      throw data_error(at_line(path, line_no, "missing \"constituents\" array"));
    for (const auto& c : j["constituents"]) {
      if (!c.is_array() || c.size() != 3)
        throw data_error(at_line(path, line_no, "constituent must be [pt, y, phi]"));
      try {
        ev.constituents.emplace_back(c[0].get<double>(), c[1].get<double>(),
                                     c[2].get<double>());
      } catch (const data_error& e) {
        throw data_error(at_line(path, line_no, e.what()));
      }
    }
    if (ev.constituents.empty())
      throw data_error(at_line(path, line_no, "event with no constituents"));
    events.push_back(std::move(ev));
  }
  return events;
}

void write_events_jsonl(const std::string& path,
                        std::span<const EventRecord> events) {
  auto out = open_output(path);
  for (const EventRecord& ev : events) {
    json constituents = json::array();
    for (const jets::Particle& c : ev.constituents)
      constituents.push_back({c.pt, c.y, c.phi});
    json j{{"label", ev.label}, {"constituents", std::move(constituents)}};
    out << j.dump() << '\n';
  }
}

std::vector<JetRecord> read_trees_jsonl(const std::string& path) {
  auto in = open_input(path);
  std::vector<JetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw data_error(at_line(path, line_no, e.what()));
    }
    JetRecord rec;
    rec.label = parse_label(j, path, line_no);
    if (!j.contains("nodes") || !j["nodes"].is_array())
      throw data_error(at_line(path, line_no, "missing \"nodes\" array"));
    const std::size_t n = j["nodes"].size();
    int depth = 0;
    while ((std::size_t{1} << (depth + 1)) - 1 <= n) ++depth;
    if (n == 0 || (std::size_t{1} << depth) - 1 != n)
      throw data_error(at_line(path, line_no, "node count must be 2^depth - 1"));
    std::vector<double> flat;
    flat.reserve(2 * n);
    for (const auto& node : j["nodes"]) {
      if (!node.is_array() || node.size() != 2)
        throw data_error(at_line(path, line_no, "node must be [x1, x2]"));
      flat.push_back(node[0].get<double>());
      flat.push_back(node[1].get<double>());
    }
    rec.tree = jets::unflatten(flat, depth);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_trees_jsonl(const std::string& path,
                       std::span<const JetRecord> records) {
  auto out = open_output(path);
  for (const JetRecord& rec : records) {
    if (!rec.tree) throw usage_error("record without a tree cannot be written");
    json nodes = json::array();
    for (const jets::LundNode& n : rec.tree->nodes)
      nodes.push_back({n.x1, n.x2});
    json j{{"label", rec.label}, {"nodes", std::move(nodes)}};
    out << j.dump() << '\n';
  }
}

std::vector<JetRecord> load_records(const std::string& path,
                                    const PrepareOptions& opts) {
  {
    auto in = open_input(path);
    std::string first;
    while (std::getline(in, first) && first.empty()) {
    }
    if (first.empty()) throw data_error(path + ": empty input");
    json j;
    try {
      j = json::parse(first);
    } catch (const json::parse_error& e) {
      throw data_error(at_line(path, 1, e.what()));
    }
    if (j.contains("nodes")) return read_trees_jsonl(path);
  }

  auto events = read_events_jsonl(path);
  std::vector<JetRecord> records;
  records.reserve(events.size());
  for (const EventRecord& ev : events)
    if (auto rec = prepare_record(ev, opts)) records.push_back(std::move(*rec));
  return records;
}

namespace {

// Symmetric Beta(8, 8) bump via two gamma draws, folded onto (0, 0.5].
double draw_signal_z(std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(8.0, 1.0);
  const double g1 = gamma(rng);
  const double g2 = gamma(rng);
  const double zeta = g1 / (g1 + g2);
  return std::min(zeta, 1.0 - zeta);
}

}  // namespace

std::vector<EventRecord> generate_toy_events(const ToyGenConfig& cfg) {
  if (cfg.n_per_class < 1) throw usage_error("toy generator needs n >= 1");
  if (!(cfg.bkg_z_min > 0.0 && cfg.bkg_z_min < 0.5))
    throw usage_error("background z_min must lie in (0, 0.5)");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> soft_count(cfg.soft_min, cfg.soft_max);

  std::vector<EventRecord> events;
  events.reserve(static_cast<std::size_t>(cfg.n_per_class) * 2);

  for (int i = 0; i < cfg.n_per_class; ++i) {
    for (int label = 1; label >= 0; --label) {
      const double pt = cfg.pt_min + (cfg.pt_max - cfg.pt_min) * unit(rng);
      const double y0 = -1.0 + 2.0 * unit(rng);
      const double phi0 = -kPi + 2.0 * kPi * unit(rng);

      double z, dr;
      if (label == 1) {
        z = draw_signal_z(rng);
        dr = cfg.sig_dr_min + (cfg.sig_dr_max - cfg.sig_dr_min) * unit(rng);
      } else {
        z = cfg.bkg_z_min * std::exp(unit(rng) * std::log(0.5 / cfg.bkg_z_min));
        dr = cfg.bkg_dr_min + (cfg.bkg_dr_max - cfg.bkg_dr_min) * unit(rng);
      }

      // Prongs straddle the axis so the pt-weighted centroid stays on it.
      const double psi = 2.0 * kPi * unit(rng);
      const double uy = std::cos(psi);
      const double uphi = std::sin(psi);

      EventRecord ev;
      ev.label = label;
      ev.constituents.emplace_back((1.0 - z) * pt, y0 + z * dr * uy,
                                   phi0 + z * dr * uphi);
      ev.constituents.emplace_back(z * pt, y0 - (1.0 - z) * dr * uy,
                                   phi0 - (1.0 - z) * dr * uphi);

      const int n_soft = soft_count(rng);
      for (int s = 0; s < n_soft; ++s) {
        const double frac = cfg.soft_frac_min +
                            (cfg.soft_frac_max - cfg.soft_frac_min) * unit(rng);
        const std::size_t prong = unit(rng) < 0.5 ? 0 : 1;
        const double rs = 0.03 + 0.22 * unit(rng);
        const double as = 2.0 * kPi * unit(rng);
        const jets::Particle& host = ev.constituents[prong];
        ev.constituents.emplace_back(frac * pt, host.y + rs * std::cos(as),
                                     host.phi + rs * std::sin(as));
      }
      events.push_back(std::move(ev));
    }
  }
  return events;
}

}  // namespace lundq::data
