#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ganlab/gan.hpp"
#include "ganlab/worlds.hpp"

namespace ganlab::defenses {

// Semantic boundary w . z + b = 0 in latent space, ||w|| = 1.
struct Hyperplane {
  Vec normal;
  double offset = 0.0;

  void validate() const;
};

struct DefensePolicy {
  enum class Kind { None, LinearInterp, SemanticInterp, GaussianNoise, Quantize };
  Kind kind = Kind::None;
  int k = 9;                        // LinearInterp: points per pair
  std::vector<Hyperplane> planes;   // SemanticInterp
  std::vector<double> schedule;     // SemanticInterp step sizes
  double variance = 0.001;          // GaussianNoise
  double step = 0.1;                // Quantize

  bool perturbs_input() const {
    return kind == Kind::LinearInterp || kind == Kind::SemanticInterp;
  }
  bool perturbs_output() const {
    return kind == Kind::GaussianNoise || kind == Kind::Quantize;
  }
  void validate() const;

  std::string to_json() const;
  static DefensePolicy from_json(const std::string& text);
};

// Replaces n submitted codes with interpolations: each round picks two
// distinct submitted codes and emits the k open-interval points
// (1-t) z_a + t z_b, t = i/(k+1); the last round truncates to fill n.
// Fewer than two codes pass through unchanged.
Mat linear_interp_defense(const Mat& codes, int k, Rng& rng);

// For output position i: codes.row(i) + schedule[i % S] * planes[(i/S) % P].
Mat semantic_interp_defense(const Mat& codes, const std::vector<Hyperplane>& planes,
                            const std::vector<double>& schedule);

worlds::SampleBatch gaussian_noise_defense(const worlds::SampleBatch& batch,
                                           double variance, Rng& rng);

// Coordinates rounded to the nearest multiple of step, ties away from zero.
worlds::SampleBatch quantize_defense(const worlds::SampleBatch& batch, double step);

using SampleScorer = std::function<double(const Vector2d&)>;

// Scores generated samples for pool latent codes, labels the top-k / bottom-k
// extremes, and fits a linear SVM (hinge + L2) on the codes.
Hyperplane fit_semantic_hyperplane(const gan::GanModel& generator_view,
                                   const SampleScorer& scorer, long pool_size, long top_k,
                                   std::uint64_t seed);

// Built-in scorers standing in for attribute predictors.
SampleScorer scorer_by_name(const std::string& name);  // "x", "y", "radius"

Mat apply_input_defense(const DefensePolicy& policy, const Mat& codes, Rng& rng);
worlds::SampleBatch apply_output_defense(const DefensePolicy& policy,
                                         const worlds::SampleBatch& batch, Rng& rng);

}  // namespace ganlab::defenses
