#include "ganlab/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <json.hpp>
#include <limits>

namespace ganlab::metrics {

using nlohmann::json;

namespace {
constexpr double kEigClip = -1e-10;

// Symmetric PSD square root via self-adjoint eigendecomposition; eigenvalues
// in [kEigClip, 0) are clipped to 0, anything lower is rejected.
Mat psd_sqrt(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  if (es.info() != Eigen::Success) throw NumericError("psd_sqrt: eigensolver failed");
  Vec lam = es.eigenvalues();
  for (long i = 0; i < lam.size(); ++i) {
    if (lam[i] < kEigClip) throw NumericError("psd_sqrt: matrix not PSD");
    lam[i] = std::sqrt(std::max(lam[i], 0.0));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}
}  // namespace

void GaussianMoments::validate() const {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw ShapeError("GaussianMoments: shape mismatch");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw NumericError("GaussianMoments: covariance not symmetric");
}

GaussianMoments moments(const Mat& points) {
  if (points.rows() < 2) throw UndefinedInputError("moments: need at least 2 samples");
  GaussianMoments m;
  m.mean = points.colwise().mean().transpose();
  Mat centered = points.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(points.rows() - 1);
  m.cov = 0.5 * (m.cov + m.cov.transpose());
  return m;
}

GaussianMoments moments(const worlds::SampleBatch& batch) { return moments(batch.points); }

double frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
  a.validate();
  b.validate();
  if (a.mean.size() != b.mean.size())
    throw ShapeError("frechet_distance: dimension mismatch");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const Mat root_a = psd_sqrt(a.cov);
  const Mat inner = root_a * b.cov * root_a;
  // inner is symmetric up to round-off; symmetrize before the second root.
  const Mat cross = psd_sqrt(0.5 * (inner + inner.transpose()));
  const double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
  return mean_term + trace_term;
}

void ClassDistribution::validate() const {
  if (centroids.rows() != proportions.size())
    throw ShapeError("ClassDistribution: centroid/proportion count mismatch");
  if (std::abs(proportions.sum() - 1.0) > 1e-12)
    throw UndefinedInputError("ClassDistribution: proportions must sum to 1");
}

namespace {

long nearest_centroid(const Mat& centroids, const Eigen::RowVectorXd& x) {
  long best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (long c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct LloydResult {
  Mat centroids;
  std::vector<long> assignment;
  double objective = 0.0;
};

LloydResult lloyd_once(const Mat& pts, int k, Rng& rng, int max_iters) {
  const long n = pts.rows();
  // Greedy farthest-point seeding from a random start.
  Mat centroids(k, pts.cols());
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  long first = static_cast<long>(rng.uniform_index(n));
  centroids.row(0) = pts.row(first);
  for (int c = 1; c < k; ++c) {
    long far = 0;
    double far_d = -1.0;
    for (long i = 0; i < n; ++i) {
      const double d = (pts.row(i) - centroids.row(c - 1)).squaredNorm();
      min_d2[i] = std::min(min_d2[i], d);
      if (min_d2[i] > far_d) {
        far_d = min_d2[i];
        far = i;
      }
    }
    centroids.row(c) = pts.row(far);
  }

  std::vector<long> assign(n, -1);
  double objective = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    objective = 0.0;
    for (long i = 0; i < n; ++i) {
      const long c = nearest_centroid(centroids, pts.row(i));
      objective += (pts.row(i) - centroids.row(c)).squaredNorm();
      if (c != assign[i]) {
        assign[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    Mat sums = Mat::Zero(k, pts.cols());
    std::vector<long> counts(k, 0);
    for (long i = 0; i < n; ++i) {
      sums.row(assign[i]) += pts.row(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      } else {
        // Re-seed an empty cluster at the point farthest from its centroid.
        long far = 0;
        double far_d = -1.0;
        for (long i = 0; i < n; ++i) {
          const double d = (pts.row(i) - centroids.row(assign[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids.row(c) = pts.row(far);
      }
    }
  }
  return {std::move(centroids), std::move(assign), objective};
}

}  // namespace

ClassDistribution kmeans(const Mat& points, int k, std::uint64_t seed, int restarts,
                         int max_iters) {
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (points.rows() < k) throw ConfigError("kmeans: k larger than sample");
  Rng rng(seed);
  LloydResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    LloydResult res = lloyd_once(points, k, rng, max_iters);
    if (res.objective < best.objective) best = std::move(res);
  }
  ClassDistribution dist;
  dist.centroids = std::move(best.centroids);
  Vec counts = Vec::Zero(k);
  for (long a : best.assignment) counts[a] += 1.0;
  dist.proportions = counts / static_cast<double>(points.rows());
  return dist;
}

Vec class_proportions(const Mat& points, const ClassDistribution& reference) {
  reference.validate();
  if (points.rows() == 0) throw UndefinedInputError("class_proportions: empty batch");
  Vec counts = Vec::Zero(reference.centroids.rows());
  for (long i = 0; i < points.rows(); ++i)
    counts[nearest_centroid(reference.centroids, points.row(i))] += 1.0;
  return counts / static_cast<double>(points.rows());
}

Vec class_proportions(const worlds::SampleBatch& batch, const ClassDistribution& reference) {
  return class_proportions(batch.points, reference);
}

double js_divergence(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw UndefinedInputError("js_divergence: length mismatch");
  if (std::abs(p.sum() - 1.0) > 1e-8 || std::abs(q.sum() - 1.0) > 1e-8)
    throw UndefinedInputError("js_divergence: inputs must sum to 1");
  if ((p.array() < 0).any() || (q.array() < 0).any())
    throw UndefinedInputError("js_divergence: negative probability");
  auto kl_to_mid = [](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (long i = 0; i < a.size(); ++i) {
      if (a[i] > 0.0) s += a[i] * std::log(a[i] / (0.5 * (a[i] + b[i])));
    }
    return s;
  };
  return 0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p);
}

std::string AttackReport::to_json() const {
  json j;
  j["accuracy"] = accuracy;
  j["fidelity"] = fidelity;
  j["js_accuracy"] = js_accuracy;
  j["js_fidelity"] = js_fidelity;
  j["hq_fraction"] = hq_fraction;
  j["queries"] = queries;
  return j.dump();
}

AttackReport AttackReport::from_json(const std::string& text) {
  json j = json::parse(text);
  AttackReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.fidelity = j.at("fidelity").get<double>();
  r.js_accuracy = j.at("js_accuracy").get<double>();
  r.js_fidelity = j.at("js_fidelity").get<double>();
  r.hq_fraction = j.at("hq_fraction").get<double>();
  r.queries = j.at("queries").get<long>();
  return r;
}

std::string AttackReport::csv_header() {
  return "accuracy,fidelity,js_accuracy,js_fidelity,hq_fraction,queries";
}

std::string AttackReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g,%ld", accuracy,
                fidelity, js_accuracy, js_fidelity, hq_fraction, queries);
  return buf;
}

AttackReport accuracy_and_fidelity(const gan::GanModel& attack, const gan::GanModel& target,
                                   const worlds::MixtureSpec& world, long n,
                                   std::uint64_t seed) {
  if (n < 2) throw UndefinedInputError("accuracy_and_fidelity: n must be >= 2");
  const Mat attack_pts = gan::generate(attack, n, derive_seed(seed, 1)).points;
  const Mat target_pts = gan::generate(target, n, derive_seed(seed, 2)).points;
  const Mat real_pts = worlds::sample(world, n, derive_seed(seed, 3)).points;
  AttackReport r;
  const GaussianMoments ma = moments(attack_pts);
  r.accuracy = frechet_distance(ma, moments(target_pts));
  r.fidelity = frechet_distance(ma, moments(real_pts));
  r.hq_fraction = worlds::high_quality_fraction(attack_pts, world);
  return r;
}

Dissection dissect(const gan::GanModel& attack, const gan::GanModel& target,
                   const worlds::MixtureSpec& world, int k, long n, std::uint64_t seed) {
  const Mat real_pts = worlds::sample(world, n, derive_seed(seed, 10)).points;
  Dissection d;
  d.reference = kmeans(real_pts, k, derive_seed(seed, 11));
  d.world_proportions = class_proportions(real_pts, d.reference);
  d.target_proportions =
      class_proportions(gan::generate(target, n, derive_seed(seed, 12)).points, d.reference);
  d.attack_proportions =
      class_proportions(gan::generate(attack, n, derive_seed(seed, 13)).points, d.reference);
  d.js_accuracy = js_divergence(d.attack_proportions, d.target_proportions);
  d.js_fidelity = js_divergence(d.attack_proportions, d.world_proportions);
  return d;
}

}  // namespace ganlab::metrics
