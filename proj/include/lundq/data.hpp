#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lundq/encodings.hpp"
#include "lundq/jets.hpp"

namespace lundq::data {

/// One event line: a labelled list of particles.
struct EventRecord {
  int label = 0;  // 1 = signal, 0 = background
  std::vector<jets::Particle> constituents;
};

/// Feature bundle consumed by the models. Tree-based models need `tree`;
/// the per-particle model needs `constituents` (descending pt) plus `axis`.
struct JetRecord {
  int label = 0;
  std::optional<jets::LundTree> tree;
  std::vector<jets::Particle> constituents;
  std::optional<encodings::JetAxis> axis;
};

struct PrepareOptions {
  double r = 0.8;           // anti-kt radius for the jet finding
  int depth = 3;            // declustering depth
  double ln_kt_cut = 1.0;   // trimming threshold on ln(kt)
  std::optional<std::pair<double, double>> mass_window;  // on the leading jet
};

/// Full per-event pipeline: anti-kt jet finding, leading-jet selection,
/// optional mass window, C/A re-clustering of the leading jet's
/// constituents, Lund declustering. Returns nothing when the mass window
/// rejects the jet.
std::optional<JetRecord> prepare_record(const EventRecord& event,
                                        const PrepareOptions& opts);

enum class Split { Train, Val, Test };

/// Record store with a per-record split tag. Splits are stratified per
/// class, so every class keeps the same proportions in train/val/test.
struct Dataset {
  std::vector<JetRecord> records;
  std::vector<Split> split;

  static Dataset from_records(std::vector<JetRecord> records, double val_frac,
                              double test_frac, std::uint64_t seed);

  std::vector<std::size_t> indices_of(Split s) const;
  /// {background count, signal count} within a split.
  std::array<std::size_t, 2> class_counts(Split s) const;
};

std::vector<EventRecord> read_events_jsonl(const std::string& path);
void write_events_jsonl(const std::string& path,
                        std::span<const EventRecord> events);

std::vector<JetRecord> read_trees_jsonl(const std::string& path);
void write_trees_jsonl(const std::string& path,
                       std::span<const JetRecord> records);

/// Reads either file flavour, keyed on the first line ("constituents" vs
/// "nodes"), running prepare_record over event files.
std::vector<JetRecord> load_records(const std::string& path,
                                    const PrepareOptions& opts);

/// Two-prong toy jets. Signal draws the leading splitting fraction from a
/// symmetric unimodal bump peaked at z = 0.5 with a moderate opening angle;
/// background draws z from 1/z on [z_min, 0.5] with a broad opening angle.
/// Both classes add a handful of soft secondary emissions. Same seed, same
/// bytes out.
struct ToyGenConfig {
  int n_per_class = 10000;
  std::uint64_t seed = 0;
  double pt_min = 250.0, pt_max = 800.0;
  double sig_dr_min = 0.2, sig_dr_max = 0.6;
  double bkg_z_min = 0.01;
  double bkg_dr_min = 0.05, bkg_dr_max = 0.8;
  int soft_min = 2, soft_max = 6;
  double soft_frac_min = 0.002, soft_frac_max = 0.05;
};

/// Alternates signal and background lines (label 1 first), 2 * n_per_class
/// events in total.
std::vector<EventRecord> generate_toy_events(const ToyGenConfig& cfg);

}  // namespace lundq::data
