#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fscil/geometry.hpp"
#include "fscil/nn.hpp"
#include "fscil/protocol.hpp"

namespace fscil {

/// 1 - cosine(a, b), in [0, 2].
double inter_class_distance(const Vector& a, const Vector& b);

/// Mean of 1 - cosine(z_i, prototype) over the rows of `samples`.
double intra_class_distance(const Matrix& samples, const Vector& prototype);

/// 1 - d_within / d_total. d_within averages same-class pair distances per
/// class (self pairs included), d_total averages over every class pair.
/// Throws undefined-separation when d_total vanishes.
double class_separation(const Matrix& embeddings, std::span<const int> labels);

struct CdfPoint {
  double threshold = 0.0;
  double probability = 0.0;
};

/// Empirical CDF on `grid_points` evenly spaced thresholds over [0, 2].
std::vector<CdfPoint> cumulative_distance_distribution(std::span<const double> values, int grid_points = 201);

struct SessionResult {
  int session_index = 0;
  double total_accuracy = 0.0;
  double base_accuracy = 0.0;
  std::optional<double> novel_accuracy;  // absent while no novel class is seen
  std::map<int, double> per_class_accuracy;
  std::vector<int> class_order;                // rows/cols of `confusion`
  std::vector<std::vector<long>> confusion;    // [true][predicted]
};

SessionResult evaluate_session(const PrototypeClassifier& classifier, const Matrix& test_embeddings,
                               std::span<const int> labels, std::span<const int> base_class_ids, int session_index);

SessionResult evaluate_session(const PrototypeClassifier& classifier, const Encoder& encoder,
                               std::span<const LabeledSample> test_set, std::span<const int> base_class_ids,
                               int session_index);

struct InterClassEntry {
  int a = 0;
  int b = 0;
  double distance = 0.0;
};

struct GeometryReport {
  std::vector<InterClassEntry> inter_class;  // a < b
  std::map<int, double> intra_class;
  double separation = 0.0;
  std::optional<double> separation_base;
  std::optional<double> separation_novel;

  double inter(int a, int b) const;
};

/// Prototypes are the normalized class means of `embeddings`.
GeometryReport geometry_report(const Matrix& embeddings, std::span<const int> labels,
                               std::span<const int> base_class_ids);

}  // namespace fscil
