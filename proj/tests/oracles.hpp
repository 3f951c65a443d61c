// Test-side oracles, deliberately independent of the library's
// implementation paths: straight-line re-evaluation, finite differences,
// brute-force matrix functions, and two-sample statistics.
#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <vector>

#include "ganlab/common.hpp"
#include "ganlab/nnet.hpp"

namespace oracles {

using ganlab::Mat;
using ganlab::Vec;

// Plain-loop MLP evaluation; no shared code with nnet::forward.
inline std::vector<double> forward_reference(const ganlab::nnet::MlpParams& params,
                                             const std::vector<double>& input) {
  std::vector<double> x = input;
  for (const auto& layer : params.layers) {
    const long out = layer.weight.rows(), in = layer.weight.cols();
    std::vector<double> y(out, 0.0);
    for (long r = 0; r < out; ++r) {
      double s = layer.bias[r];
      for (long c = 0; c < in; ++c) s += layer.weight(r, c) * x[c];
      switch (layer.act) {
        case ganlab::nnet::Activation::ReLU: s = s > 0 ? s : 0; break;
        case ganlab::nnet::Activation::Tanh: s = std::tanh(s); break;
        case ganlab::nnet::Activation::Sigmoid: s = 1.0 / (1.0 + std::exp(-s)); break;
        case ganlab::nnet::Activation::Identity: break;
      }
      y[r] = s;
    }
    x = std::move(y);
  }
  return x;
}

// Central finite difference of a scalar function of one parameter entry.
inline double central_diff(const std::function<double()>& eval, double* coord,
                           double h = 1e-5) {
  const double saved = *coord;
  *coord = saved + h;
  const double hi = eval();
  *coord = saved - h;
  const double lo = eval();
  *coord = saved;
  return (hi - lo) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-10});
  return std::abs(a - b) / denom;
}

// Trace of the principal square root of (a*b) via the general (complex)
// eigendecomposition -- the brute-force route the Frechet implementation
// must agree with.
inline double sqrtm_trace_bruteforce(const Mat& a, const Mat& b) {
  const Mat prod = a * b;
  Eigen::EigenSolver<Mat> es(prod);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  const auto lam = es.eigenvalues();
  std::complex<double> trace(0.0, 0.0);
  for (long i = 0; i < lam.size(); ++i) trace += std::sqrt(lam[i]);
  return trace.real();
}

// Random PSD matrix with spread eigenvalues.
inline Mat random_psd(int dim, ganlab::Rng& rng, double scale = 1.0) {
  Mat m(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) m(r, c) = rng.normal();
  Mat psd = scale * (m * m.transpose()) / dim;
  psd.diagonal().array() += 1e-6;
  return psd;
}

// chi-square critical values at alpha = 0.001 (upper tail).
inline double chi2_crit_999(int df) {
  switch (df) {
    case 1: return 10.828;
    case 2: return 13.816;
    case 3: return 16.266;
    case 24: return 51.179;
    default: break;
  }
  // Wilson-Hilferty approximation for other dfs.
  const double z = 3.0902;  // Phi^{-1}(0.999)
  const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  return df * t * t * t;
}

// Energy statistic T = nm/(n+m) * E with E the usual two-sample energy
// distance. Pair sums are estimated with `pairs` random draws, which keeps
// the cost flat in the sample sizes; the Monte-Carlo threshold calibration
// below absorbs the extra estimator noise.
inline double energy_statistic(const Mat& x, const Mat& y, ganlab::Rng& rng,
                               long pairs = 2000000) {
  const long n = x.rows(), m = y.rows();
  auto mean_cross = [&](const Mat& a, const Mat& b) {
    double s = 0.0;
    for (long i = 0; i < pairs; ++i) {
      const long p = static_cast<long>(rng.uniform_index(a.rows()));
      const long q = static_cast<long>(rng.uniform_index(b.rows()));
      s += (a.row(p) - b.row(q)).norm();
    }
    return s / static_cast<double>(pairs);
  };
  const double e = 2.0 * mean_cross(x, y) - mean_cross(x, x) - mean_cross(y, y);
  return static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m) * e;
}

// Two-sample test with a resampling-calibrated threshold: `draw` yields
// fresh same-distribution pairs under H0. Rejects at far beyond the 99.9th
// percentile for these light-tailed statistics.
inline bool energy_two_sample_reject(const Mat& x, const Mat& y,
                                     const std::function<Mat(long)>& draw,
                                     ganlab::Rng& rng, int null_reps = 24,
                                     long pairs = 1000000) {
  const double observed = energy_statistic(x, y, rng, pairs);
  std::vector<double> nulls;
  nulls.reserve(null_reps);
  for (int i = 0; i < null_reps; ++i) {
    const Mat a = draw(x.rows());
    const Mat b = draw(y.rows());
    nulls.push_back(energy_statistic(a, b, rng, pairs));
  }
  double mean = 0.0;
  for (double v : nulls) mean += v;
  mean /= nulls.size();
  double var = 0.0;
  for (double v : nulls) var += (v - mean) * (v - mean);
  var /= (nulls.size() - 1);
  const double threshold = mean + 8.0 * std::sqrt(std::max(var, 1e-12));
  return observed > threshold;
}

}  // namespace oracles
