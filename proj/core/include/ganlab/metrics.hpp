#pragma once

#include <string>

#include "ganlab/gan.hpp"
#include "ganlab/worlds.hpp"

namespace ganlab::metrics {

struct GaussianMoments {
  Vec mean;
  Mat cov;  // symmetric PSD

  void validate() const;
};

// Sample mean and unbiased covariance; requires at least two rows.
GaussianMoments moments(const Mat& points);
GaussianMoments moments(const worlds::SampleBatch& batch);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), the Frechet distance
// between Gaussian summaries. The cross term is evaluated through the
// symmetrized product sqrt(Sa)^T Sb sqrt(Sa) with negative eigenvalues
// clipped at -1e-10.
double frechet_distance(const GaussianMoments& a, const GaussianMoments& b);

struct ClassDistribution {
  Mat centroids;    // k x dim
  Vec proportions;  // k, sums to 1

  void validate() const;
};

// Lloyd iterations with greedy farthest-point seeding, best of `restarts`
// by within-cluster sum of squares.
ClassDistribution kmeans(const Mat& points, int k, std::uint64_t seed,
                         int restarts = 10, int max_iters = 300);

// Nearest-centroid assignment shares against a fixed reference clustering.
Vec class_proportions(const Mat& points, const ClassDistribution& reference);
Vec class_proportions(const worlds::SampleBatch& batch, const ClassDistribution& reference);

// Jensen-Shannon divergence, natural log, 0*log 0 := 0; result in [0, ln 2].
double js_divergence(const Vec& p, const Vec& q);

struct AttackReport {
  double accuracy = 0.0;     // Frechet(attack, target)
  double fidelity = 0.0;     // Frechet(attack, world)
  double js_accuracy = 0.0;  // JS(attack proportions, target proportions)
  double js_fidelity = 0.0;  // JS(attack proportions, world proportions)
  double hq_fraction = 0.0;
  long queries = 0;

  std::string to_json() const;
  static AttackReport from_json(const std::string& text);
  static std::string csv_header();
  std::string csv_row() const;
};

// Fills accuracy, fidelity, hq_fraction from n-sample summaries (js fields
// come from dissect below).
AttackReport accuracy_and_fidelity(const gan::GanModel& attack, const gan::GanModel& target,
                                   const worlds::MixtureSpec& world, long n,
                                   std::uint64_t seed);

// Shared clustering fit on world samples; per-model proportions feed the JS
// columns of the report.
struct Dissection {
  ClassDistribution reference;  // fit on world samples
  Vec world_proportions;
  Vec target_proportions;
  Vec attack_proportions;
  double js_accuracy = 0.0;
  double js_fidelity = 0.0;
};

Dissection dissect(const gan::GanModel& attack, const gan::GanModel& target,
                   const worlds::MixtureSpec& world, int k, long n, std::uint64_t seed);

}  // namespace ganlab::metrics
