#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lundq/common.hpp"
#include "lundq/data.hpp"
#include "support/oracles.hpp"

using lundq::data::Dataset;
using lundq::data::EventRecord;
using lundq::data::generate_toy_events;
using lundq::data::JetRecord;
using lundq::data::load_records;
using lundq::data::prepare_record;
using lundq::data::PrepareOptions;
using lundq::data::read_events_jsonl;
using lundq::data::read_trees_jsonl;
using lundq::data::Split;
using lundq::data::ToyGenConfig;
using lundq::data::write_events_jsonl;
using lundq::data::write_trees_jsonl;
using lundq::jets::Particle;

namespace {

std::string temp_path(const char* stem) {
  return std::string("/tmp/lundq_data_test_") + stem + ".jsonl";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

EventRecord two_prong_event(int label) {
  EventRecord ev;
  ev.label = label;
  ev.constituents = {Particle(300.0, 0.0, 0.0), Particle(100.0, 0.4, 0.0)};
  return ev;
}

}  // namespace

TEST_CASE("the per-event pipeline fills tree, members, and axis") {
  const auto rec = prepare_record(two_prong_event(1), PrepareOptions{});
  REQUIRE(rec.has_value());
  CHECK(rec->label == 1);
  REQUIRE(rec->tree.has_value());
  CHECK(rec->tree->node_count() == 7);
  CHECK(rec->tree->nodes[0].x1 ==
        doctest::Approx(std::log(1.0 / 0.4)).epsilon(1e-12));
  CHECK(rec->tree->nodes[0].x2 == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  REQUIRE(rec->axis.has_value());
  CHECK(rec->axis->pt == doctest::Approx(400.0).epsilon(1e-9));
  REQUIRE(rec->constituents.size() == 2);
  CHECK(rec->constituents[0].pt >= rec->constituents[1].pt);
}

TEST_CASE("soft junk far from the jet does not enter the record") {
  auto ev = two_prong_event(0);
  ev.constituents.emplace_back(1.0, 3.5, 2.0);  // outside the R = 0.8 jet
  const auto rec = prepare_record(ev, PrepareOptions{});
  REQUIRE(rec.has_value());
  CHECK(rec->constituents.size() == 2);
}

TEST_CASE("the mass window keeps or rejects the leading jet") {
  // m^2 = 2 * 300 * 100 * (cosh 0.4 - 1) for the two-prong system
  const double mass = std::sqrt(2.0 * 300.0 * 100.0 * (std::cosh(0.4) - 1.0));
  PrepareOptions keep;
  keep.mass_window = {{mass - 1.0, mass + 1.0}};
  CHECK(prepare_record(two_prong_event(1), keep).has_value());
  PrepareOptions drop;
  drop.mass_window = {{mass + 1.0, mass + 2.0}};
  CHECK_FALSE(prepare_record(two_prong_event(1), drop).has_value());
}

TEST_CASE("splits are stratified per class with rounded counts") {
  std::vector<JetRecord> records;
  for (int i = 0; i < 100; ++i) {
    JetRecord r;
    r.label = i < 60 ? 1 : 0;
    records.push_back(r);
  }
  const auto ds = Dataset::from_records(records, 0.2, 0.1, 5);
  REQUIRE(ds.records.size() == 100);
  REQUIRE(ds.split.size() == 100);
  const auto test_counts = ds.class_counts(Split::Test);
  const auto val_counts = ds.class_counts(Split::Val);
  const auto train_counts = ds.class_counts(Split::Train);
  CHECK(test_counts[1] == 6);
  CHECK(test_counts[0] == 4);
  CHECK(val_counts[1] == 12);
  CHECK(val_counts[0] == 8);
  CHECK(train_counts[1] == 42);
  CHECK(train_counts[0] == 28);

  // same seed reproduces the assignment, a different seed moves it
  const auto again = Dataset::from_records(records, 0.2, 0.1, 5);
  CHECK(again.split == ds.split);
  const auto other = Dataset::from_records(records, 0.2, 0.1, 6);
  CHECK(other.split != ds.split);

  // indices_of partitions the records
  const auto tr = ds.indices_of(Split::Train);
  const auto va = ds.indices_of(Split::Val);
  const auto te = ds.indices_of(Split::Test);
  CHECK(tr.size() + va.size() + te.size() == 100);
}

TEST_CASE("split fractions outside the simplex are refused") {
  std::vector<JetRecord> records(10);
  for (int i = 0; i < 10; ++i) records[std::size_t(i)].label = i % 2;
  CHECK_THROWS_AS(Dataset::from_records(records, -0.1, 0.1, 0),
                  lundq::usage_error);
  CHECK_THROWS_AS(Dataset::from_records(records, 0.6, 0.5, 0),
                  lundq::usage_error);
  CHECK_NOTHROW(Dataset::from_records(records, 0.0, 0.0, 0));
}

TEST_CASE("event files round-trip exactly") {
  const auto path = temp_path("events_rt");
  ToyGenConfig cfg;
  cfg.n_per_class = 20;
  cfg.seed = 9;
  const auto events = generate_toy_events(cfg);
  write_events_jsonl(path, events);
  const auto back = read_events_jsonl(path);
  REQUIRE(back.size() == events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(back[i].label == events[i].label);
    REQUIRE(back[i].constituents.size() == events[i].constituents.size());
    for (std::size_t k = 0; k < events[i].constituents.size(); ++k) {
      CHECK(back[i].constituents[k].pt == events[i].constituents[k].pt);
      CHECK(back[i].constituents[k].y == events[i].constituents[k].y);
      CHECK(back[i].constituents[k].phi == events[i].constituents[k].phi);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("tree files round-trip exactly") {
  const auto path = temp_path("trees_rt");
  ToyGenConfig cfg;
  cfg.n_per_class = 15;
  cfg.seed = 4;
  std::vector<JetRecord> records;
  for (const auto& ev : generate_toy_events(cfg))
    if (auto rec = prepare_record(ev, PrepareOptions{}))
      records.push_back(std::move(*rec));
  REQUIRE(!records.empty());
  write_trees_jsonl(path, records);
  const auto back = read_trees_jsonl(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].label == records[i].label);
    REQUIRE(back[i].tree.has_value());
    for (int k = 0; k < 7; ++k) {
      CHECK(back[i].tree->nodes[std::size_t(k)].x1 ==
            records[i].tree->nodes[std::size_t(k)].x1);
      CHECK(back[i].tree->nodes[std::size_t(k)].x2 ==
            records[i].tree->nodes[std::size_t(k)].x2);
    }
    CHECK(back[i].constituents.empty());  // tree files carry no particles
  }
  std::remove(path.c_str());
}

TEST_CASE("malformed lines report the file and line number") {
  const auto path = temp_path("bad");

  spit(path, R"({"constituents":[[10,0,0]],"label":1})"
             "\n"
             R"({"constituents":[[10,0]],"label":0})"
             "\n");
  CHECK_THROWS_WITH_AS(read_events_jsonl(path),
                       doctest::Contains(":2:"), lundq::data_error);

  spit(path, R"({"constituents":[[10,0,0]]})" "\n");
  CHECK_THROWS_AS(read_events_jsonl(path), lundq::data_error);

  spit(path, R"({"constituents":[[10,0,0]],"label":2})" "\n");
  CHECK_THROWS_AS(read_events_jsonl(path), lundq::data_error);

  spit(path, R"({"constituents":[[10,0,0]],"label":0.5})" "\n");
  CHECK_THROWS_AS(read_events_jsonl(path), lundq::data_error);

  spit(path, "this is not json\n");
  CHECK_THROWS_AS(read_events_jsonl(path), lundq::data_error);

  spit(path, R"({"label":1,"nodes":[[1,1],[0,0],[0,0]]})"
             "\n"
             R"({"label":1,"nodes":[[1,1],[0,0]]})"
             "\n");
  CHECK_THROWS_WITH_AS(read_trees_jsonl(path),
                       doctest::Contains(":2:"), lundq::data_error);

  CHECK_THROWS_AS(read_events_jsonl("/nonexistent/nope.jsonl"),
                  lundq::data_error);
  std::remove(path.c_str());
}

TEST_CASE("load_records dispatches on the line shape") {
  const auto epath = temp_path("load_events");
  const auto tpath = temp_path("load_trees");
  ToyGenConfig cfg;
  cfg.n_per_class = 10;
  cfg.seed = 2;
  const auto events = generate_toy_events(cfg);
  write_events_jsonl(epath, events);

  const auto from_events = load_records(epath, PrepareOptions{});
  REQUIRE(!from_events.empty());
  CHECK(from_events.front().tree.has_value());
  CHECK(from_events.front().axis.has_value());
  CHECK(!from_events.front().constituents.empty());

  write_trees_jsonl(tpath, from_events);
  const auto from_trees = load_records(tpath, PrepareOptions{});
  REQUIRE(from_trees.size() == from_events.size());
  CHECK(from_trees.front().tree.has_value());
  CHECK_FALSE(from_trees.front().axis.has_value());
  for (int k = 0; k < 7; ++k)
    CHECK(from_trees.front().tree->nodes[std::size_t(k)].x1 ==
          from_events.front().tree->nodes[std::size_t(k)].x1);
  std::remove(epath.c_str());
  std::remove(tpath.c_str());
}

TEST_CASE("the toy generator is byte-reproducible and alternates labels") {
  const auto a = temp_path("gen_a");
  const auto b = temp_path("gen_b");
  ToyGenConfig cfg;
  cfg.n_per_class = 50;
  cfg.seed = 31;
  write_events_jsonl(a, generate_toy_events(cfg));
  write_events_jsonl(b, generate_toy_events(cfg));
  CHECK(slurp(a) == slurp(b));

  cfg.seed = 32;
  write_events_jsonl(b, generate_toy_events(cfg));
  CHECK(slurp(a) != slurp(b));

  const auto events = generate_toy_events(cfg);
  REQUIRE(events.size() == 100);
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].label == (i % 2 == 0 ? 1 : 0));
    CHECK(events[i].constituents.size() >= std::size_t(2 + cfg.soft_min));
    CHECK(events[i].constituents.size() <= std::size_t(2 + cfg.soft_max));
    for (const auto& c : events[i].constituents) CHECK(c.pt > 0.0);
  }
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("toy splitting fractions follow the stated class distributions") {
  ToyGenConfig cfg;
  cfg.n_per_class = 2000;
  cfg.seed = 77;
  const auto events = generate_toy_events(cfg);
  std::vector<double> z_sig, z_bkg, dr_sig, dr_bkg;
  for (const auto& ev : events) {
    // constituents 0 and 1 are the two prongs by construction
    const auto& a = ev.constituents[0];
    const auto& b = ev.constituents[1];
    const double z = b.pt / (a.pt + b.pt);
    const double dy = a.y - b.y;
    const double dphi = lundq::wrap_delta_phi(a.phi - b.phi);
    const double dr = std::sqrt(dy * dy + dphi * dphi);
    (ev.label == 1 ? z_sig : z_bkg).push_back(z);
    (ev.label == 1 ? dr_sig : dr_bkg).push_back(dr);
  }

  for (double z : z_sig) CHECK(z <= 0.5);
  for (double z : z_bkg) {
    CHECK(z <= 0.5);
    CHECK(z >= cfg.bkg_z_min * (1.0 - 1e-12));
  }
  for (double dr : dr_sig) {
    CHECK(dr >= cfg.sig_dr_min - 1e-9);
    CHECK(dr <= cfg.sig_dr_max + 1e-9);
  }
  for (double dr : dr_bkg) {
    CHECK(dr >= cfg.bkg_dr_min - 1e-9);
    CHECK(dr <= cfg.bkg_dr_max + 1e-9);
  }

  // background z is log-uniform on [z_min, 1/2]
  const double lo = cfg.bkg_z_min;
  const double ks_z = oracle::ks_statistic(z_bkg, [lo](double z) {
    return std::log(z / lo) / std::log(0.5 / lo);
  });
  CHECK(ks_z < 0.05);

  // opening angles are uniform within each class window
  const double ks_dr_sig = oracle::ks_statistic(dr_sig, [&](double x) {
    return (x - cfg.sig_dr_min) / (cfg.sig_dr_max - cfg.sig_dr_min);
  });
  CHECK(ks_dr_sig < 0.05);

  // signal z is pulled toward 1/2, background toward zero
  const double mean_sig =
      std::accumulate(z_sig.begin(), z_sig.end(), 0.0) / double(z_sig.size());
  const double mean_bkg =
      std::accumulate(z_bkg.begin(), z_bkg.end(), 0.0) / double(z_bkg.size());
  CHECK(mean_sig > 0.35);
  CHECK(mean_sig < 0.47);
  CHECK(mean_bkg < 0.20);
}

TEST_CASE("declustered toys separate the classes at the tree root") {
  ToyGenConfig cfg;
  cfg.n_per_class = 300;
  cfg.seed = 12;
  double sum_sig = 0.0, sum_bkg = 0.0;
  int n_sig = 0, n_bkg = 0;
  for (const auto& ev : generate_toy_events(cfg)) {
    const auto rec = prepare_record(ev, PrepareOptions{});
    if (!rec || !rec->tree->nodes[0].occupied()) continue;
    if (rec->label == 1) {
      sum_sig += rec->tree->nodes[0].x2;
      ++n_sig;
    } else {
      sum_bkg += rec->tree->nodes[0].x2;
      ++n_bkg;
    }
  }
  REQUIRE(n_sig > 200);
  REQUIRE(n_bkg > 200);
  // ln(1/z) is small for symmetric splittings, large for soft ones
  CHECK(sum_sig / n_sig < sum_bkg / n_bkg);
}
