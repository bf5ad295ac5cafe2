#pragma once

#include <vector>

#include "pdgan/tensor.hpp"

namespace pdgan {

// Liveness scores with ground-truth labels. label 0 = live (bona fide),
// label 1 = spoof (attack), matching the dataset convention.
struct ScoredSet {
  std::vector<double> scores;  // in [0,1]; higher means "more live"
  std::vector<int> labels;     // 0 live, 1 spoof
};

struct Confusion {
  long tp = 0;  // live predicted live
  long fp = 0;  // spoof predicted live
  long tn = 0;  // spoof predicted spoof
  long fn = 0;  // live predicted spoof
};

struct MetricsReport {
  double bpcer = 0.0;
  double apcer = 0.0;
  double acer = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double threshold = 0.0;
  Confusion counts;
};

// Predicted live iff score >= threshold.
Confusion confusion_at(const ScoredSet& set, double threshold);

double apcer_of(const Confusion& c);  // fp / (fp + tn)
double bpcer_of(const Confusion& c);  // fn / (tp + fn)
double f1_at(const Confusion& c);     // live positive: 2tp / (2tp + fp + fn)

// Mann-Whitney: P(live score > spoof score), ties counting 1/2.
double auc(const ScoredSet& set);

// Exhaustive ACER-minimizing threshold over {0, 1, score midpoints};
// ties broken toward the smaller threshold.
MetricsReport sweep_threshold(const ScoredSet& set);

struct PcaProjection {
  std::vector<double> mean;
  std::vector<double> dir1, dir2;      // orthonormal principal directions
  double var1 = 0.0, var2 = 0.0;       // explained variances, descending
  std::vector<double> x, y;            // projected 2-D points
  std::vector<int> labels;
};

// Top-2 PCA via power iteration with deflation. Throws on degenerate
// (zero second variance) data or non-convergence.
PcaProjection pca_2d(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<int>& labels);

}  // namespace pdgan
