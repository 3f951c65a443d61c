#pragma once

#include <functional>
#include <string>

#include "ganlab/common.hpp"

namespace ganlab::worlds {

// Isotropic 2-D Gaussian mixture: the analytic training distribution.
struct MixtureSpec {
  Mat means;    // m x 2
  Vec weights;  // m, non-negative, sums to 1
  double sigma = 0.0;

  void validate() const;
  MixtureSpec translated(const Vector2d& delta) const;
};

// 5x5 grid over {-2,-1,0,1,2}^2, uniform weights, sigma 0.05.
MixtureSpec grid25();

enum class Provenance { Real, Generated, Refined };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct SampleBatch {
  Mat points;  // n x 2
  Provenance provenance = Provenance::Real;

  long size() const { return points.rows(); }
};

SampleBatch sample(const MixtureSpec& spec, long n, std::uint64_t seed);
Mat sample_points(const MixtureSpec& spec, long n, Rng& rng);

double log_density(const MixtureSpec& spec, const Vector2d& x);
double density(const MixtureSpec& spec, const Vector2d& x);

// Fraction of points within 4*sigma (Euclidean) of the nearest mixture mean.
double high_quality_fraction(const SampleBatch& batch, const MixtureSpec& spec);
double high_quality_fraction(const Mat& points, const MixtureSpec& spec);

using DensityFn = std::function<double(const Vector2d&)>;

// p_r(x) / (p_r(x) + p_g(x)).
double optimal_discriminator(const MixtureSpec& p_r, const DensityFn& p_g,
                             const Vector2d& x);

// CSV: "x,y" per row, 17 significant digits. Binary: magic + count +
// provenance + little-endian doubles, exact round-trip.
void save_csv(const SampleBatch& batch, const std::string& path);
SampleBatch load_csv(const std::string& path);
void save_binary(const SampleBatch& batch, const std::string& path);
SampleBatch load_binary(const std::string& path);

}  // namespace ganlab::worlds
