#include "lundq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "lundq/common.hpp"

namespace lundq::metrics {

namespace {

void check_samples(std::span<const ScoredSample> samples) {
  std::size_t m = 0, n = 0;
  for (const ScoredSample& s : samples) {
    if (!std::isfinite(s.score)) throw data_error("non-finite score");
    if (s.label != 0 && s.label != 1) throw data_error("label must be 0 or 1");
    (s.label == 1 ? m : n) += 1;
  }
  if (m == 0 || n == 0)
    throw data_error("scores must contain both classes");
}

// Midranks (1-based, ties averaged) of v in ascending order.
std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  return rank;
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw data_error("variance needs at least two values");
  const double mean =
      std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

RocResult roc_auc(std::span<const ScoredSample> samples) {
  check_samples(samples);
  std::vector<double> scores;
  scores.reserve(samples.size());
  std::vector<double> sig_scores;
  std::size_t m = 0, n = 0;
  for (const ScoredSample& s : samples) {
    scores.push_back(s.score);
    if (s.label == 1) {
      sig_scores.push_back(s.score);
      ++m;
    } else {
      ++n;
    }
  }

  const auto rank_all = midranks(scores);
  const auto rank_sig = midranks(sig_scores);
  double placements = 0.0;  // sum over signals of (#bkg below + ties/2)
  std::size_t si = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label != 1) continue;
    placements += rank_all[i] - rank_sig[si];
    ++si;
  }

  RocResult out;
  out.auc = placements / (static_cast<double>(m) * static_cast<double>(n));

  // Sweep thresholds downward, one point per distinct score.
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].score > samples[b].score;
  });
  out.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double threshold = samples[order[i]].score;
    while (i < order.size() && samples[order[i]].score == threshold) {
      (samples[order[i]].label == 1 ? tp : fp) += 1;
      ++i;
    }
    out.points.push_back({static_cast<double>(fp) / static_cast<double>(n),
                          static_cast<double>(tp) / static_cast<double>(m),
                          threshold});
  }
  return out;
}

AucEstimate delong_variance(std::span<const ScoredSample> samples) {
  check_samples(samples);
  std::vector<double> scores, sig, bkg;
  for (const ScoredSample& s : samples) {
    scores.push_back(s.score);
    (s.label == 1 ? sig : bkg).push_back(s.score);
  }
  const std::size_t m = sig.size();
  const std::size_t n = bkg.size();
  if (m < 2 || n < 2)
    throw data_error("the variance needs at least two samples per class");

  const auto rank_all = midranks(scores);
  const auto rank_sig = midranks(sig);
  const auto rank_bkg = midranks(bkg);

  std::vector<double> v10, v01;
  v10.reserve(m);
  v01.reserve(n);
  std::size_t si = 0, bi = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label == 1)
      v10.push_back((rank_all[i] - rank_sig[si++]) / static_cast<double>(n));
    else
      v01.push_back(1.0 - (rank_all[i] - rank_bkg[bi++]) / static_cast<double>(m));
  }

  AucEstimate est;
  est.n_signal = m;
  est.n_background = n;
  est.auc = std::accumulate(v10.begin(), v10.end(), 0.0) / static_cast<double>(m);
  est.std_error = std::sqrt(sample_variance(v10) / static_cast<double>(m) +
                            sample_variance(v01) / static_cast<double>(n));
  return est;
}

double transfer_gap(double auc_native, double auc_transferred) {
  if (!(auc_native > 0.0))
    throw data_error("transfer gap needs a positive native AUC");
  return std::abs(auc_native - auc_transferred) / auc_native;
}

std::string truncated_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%",
                std::floor(fraction * 1000.0) / 10.0);
  return buf;
}

SaliencyReport saliency(const models::Model& model,
                        std::span<const data::JetRecord* const> records,
                        std::span<const std::size_t> ids, int threads) {
  if (records.empty()) throw usage_error("saliency needs at least one record");
  if (records.size() != ids.size())
    throw usage_error("saliency ids must pair with records");

  const std::size_t n_params = model.params().size();
  std::vector<std::vector<double>> grads(records.size());
  parallel_for(records.size(), threads, [&](std::size_t s) {
    grads[s].resize(n_params);
    model.logit_with_gradient(*records[s], grads[s]);
    for (double& g : grads[s]) g = std::abs(g);
  });

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ids[a] != ids[b]) return ids[a] < ids[b];
    return a < b;
  });

  SaliencyReport report;
  report.mean_abs_gradient.assign(n_params, 0.0);
  for (std::size_t s : order)
    for (std::size_t k = 0; k < n_params; ++k)
      report.mean_abs_gradient[k] += grads[s][k];
  const double inv = 1.0 / static_cast<double>(records.size());
  for (double& v : report.mean_abs_gradient) v *= inv;

  report.block.reserve(n_params);
  for (std::size_t k = 0; k < n_params; ++k)
    report.block.push_back(model.params().block_of(k));
  return report;
}

}  // namespace lundq::metrics
