#include "pdgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace pdgan {

namespace {

void validate(const ScoredSet& set, bool need_both_classes) {
  if (set.scores.size() != set.labels.size())
    throw std::invalid_argument("scored set: length mismatch");
  if (set.scores.empty()) throw std::invalid_argument("scored set: empty");
  for (double s : set.scores)
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("score outside [0,1]");
  if (need_both_classes) {
    bool has_live = false, has_spoof = false;
    for (int l : set.labels) (l == 0 ? has_live : has_spoof) = true;
    if (!has_live || !has_spoof)
      throw std::invalid_argument("scored set: both classes required");
  }
}

}  // namespace

Confusion confusion_at(const ScoredSet& set, double threshold) {
  validate(set, false);
  if (threshold < 0.0 || threshold > 1.0)
    throw std::invalid_argument("threshold outside [0,1]");
  Confusion c;
  for (size_t i = 0; i < set.scores.size(); ++i) {
    bool predicted_live = set.scores[i] >= threshold;
    bool is_live = set.labels[i] == 0;
    if (is_live)
      (predicted_live ? c.tp : c.fn)++;
    else
      (predicted_live ? c.fp : c.tn)++;
  }
  return c;
}

double apcer_of(const Confusion& c) {
  if (c.fp + c.tn == 0) throw std::invalid_argument("APCER: no attack samples");
  return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

double bpcer_of(const Confusion& c) {
  if (c.tp + c.fn == 0) throw std::invalid_argument("BPCER: no bona fide samples");
  return static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
}

double f1_at(const Confusion& c) {
  long denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double auc(const ScoredSet& set) {
  validate(set, true);
  // rank-sum form: O(n log n) and exact for ties
  const size_t n = set.scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return set.scores[a] < set.scores[b]; });
  double live_rank_sum = 0.0;
  long n_live = 0, n_spoof = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && set.scores[order[j]] == set.scores[order[i]]) ++j;
    double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average 1-based rank
    for (size_t k = i; k < j; ++k)
      if (set.labels[order[k]] == 0) live_rank_sum += mid_rank;
    i = j;
  }
  for (int l : set.labels) (l == 0 ? n_live : n_spoof)++;
  double u = live_rank_sum - 0.5 * static_cast<double>(n_live) * (n_live + 1);
  return u / (static_cast<double>(n_live) * static_cast<double>(n_spoof));
}

MetricsReport sweep_threshold(const ScoredSet& set) {
  validate(set, true);
  std::vector<double> distinct = set.scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(0.0);
  for (size_t i = 0; i + 1 < distinct.size(); ++i)
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());

  MetricsReport best;
  double best_acer = 2.0;
  for (double t : candidates) {
    Confusion c = confusion_at(set, t);
    double ap = apcer_of(c);
    double bp = bpcer_of(c);
    double acer = 0.5 * (ap + bp);
    if (acer < best_acer) {  // strict: ties keep the smaller threshold
      best_acer = acer;
      best.apcer = ap;
      best.bpcer = bp;
      best.acer = acer;
      best.f1 = f1_at(c);
      best.threshold = t;
      best.counts = c;
    }
  }
  best.auc = auc(set);
  return best;
}

PcaProjection pca_2d(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<int>& labels) {
  const size_t n = embeddings.size();
  if (n < 3) throw std::invalid_argument("pca_2d: need at least 3 points");
  if (labels.size() != n) throw std::invalid_argument("pca_2d: label count mismatch");
  const size_t d = embeddings[0].size();
  if (d < 2) throw std::invalid_argument("pca_2d: dimension must be >= 2");
  for (const auto& e : embeddings)
    if (e.size() != d) throw std::invalid_argument("pca_2d: ragged embeddings");

  PcaProjection out;
  out.labels = labels;
  out.mean.assign(d, 0.0);
  for (const auto& e : embeddings)
    for (size_t j = 0; j < d; ++j) out.mean[j] += e[j];
  for (double& m : out.mean) m /= static_cast<double>(n);

  std::vector<std::vector<double>> centered(n, std::vector<double>(d));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) centered[i][j] = embeddings[i][j] - out.mean[j];

  // power iteration on the sample covariance, applied matrix-free:
  // cov * v = (1/(n-1)) * X^T (X v)
  auto cov_apply = [&](const std::vector<double>& v, const std::vector<double>* deflate,
                       double deflate_var) {
    std::vector<double> result(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += centered[i][j] * v[j];
      for (size_t j = 0; j < d; ++j) result[j] += dot * centered[i][j];
    }
    double inv = 1.0 / static_cast<double>(n - 1);
    for (double& r : result) r *= inv;
    if (deflate) {
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += (*deflate)[j] * v[j];
      for (size_t j = 0; j < d; ++j) result[j] -= deflate_var * dot * (*deflate)[j];
    }
    return result;
  };

  auto power_iterate = [&](const std::vector<double>* deflate, double deflate_var,
                           std::uint64_t salt) {
    // deterministic start vector
    std::vector<double> v(d);
    std::uint64_t s = 0x243f6a8885a308d3ULL ^ salt;
    for (size_t j = 0; j < d; ++j) {
      s = s * 6364136223846793005ULL + 1442695040888963407ULL;
      v[j] = static_cast<double>((s >> 33) & 0xffff) / 65535.0 - 0.5;
    }
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    double eig = 0.0;
    const double tol = 1e-10;
    for (int it = 0; it < 10000; ++it) {
      std::vector<double> w = cov_apply(v, deflate, deflate_var);
      double wn = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (wn == 0.0) return std::make_pair(v, 0.0);  // zero variance direction
      for (double& x : w) x /= wn;
      double diff = 0.0;
      for (size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(std::abs(w[j]) - std::abs(v[j])));
      v = std::move(w);
      eig = wn;
      if (diff < tol) {
        // fix sign: largest-magnitude component positive
        size_t arg = 0;
        for (size_t j = 1; j < d; ++j)
          if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
        if (v[arg] < 0.0)
          for (double& x : v) x = -x;
        return std::make_pair(v, eig);
      }
    }
    throw std::runtime_error("pca_2d: power iteration did not converge");
  };

  auto [d1, v1] = power_iterate(nullptr, 0.0, 1);
  if (v1 <= 0.0) throw std::runtime_error("pca_2d: zero-variance data");
  auto [d2, v2] = power_iterate(&d1, v1, 2);
  // deflation leaves floating-point residue; compare against the first
  // eigenvalue to detect data that is genuinely rank one
  if (v2 <= v1 * 1e-12) throw std::runtime_error("pca_2d: degenerate second direction");

  out.dir1 = d1;
  out.dir2 = d2;
  out.var1 = v1;
  out.var2 = v2;
  out.x.resize(n);
  out.y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double px = 0.0, py = 0.0;
    for (size_t j = 0; j < d; ++j) {
      px += centered[i][j] * d1[j];
      py += centered[i][j] * d2[j];
    }
    out.x[i] = px;
    out.y[i] = py;
  }
  return out;
}

}  // namespace pdgan
