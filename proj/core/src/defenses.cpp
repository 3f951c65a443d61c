#include "ganlab/defenses.hpp"

#include <algorithm>
#include <json.hpp>

namespace ganlab::defenses {

using nlohmann::json;

void Hyperplane::validate() const {
  if (normal.size() < 1) throw ShapeError("Hyperplane: empty normal");
  if (std::abs(normal.norm() - 1.0) > 1e-12)
    throw UndefinedInputError("Hyperplane: normal must be unit length");
}

void DefensePolicy::validate() const {
  switch (kind) {
    case Kind::None:
      break;
    case Kind::LinearInterp:
      if (k < 1) throw ConfigError("DefensePolicy: linear_interp requires k >= 1");
      break;
    case Kind::SemanticInterp:
      if (planes.empty())
        throw ConfigError("DefensePolicy: semantic_interp requires >= 1 plane");
      for (const auto& p : planes) p.validate();
      if (schedule.empty())
        throw ConfigError("DefensePolicy: semantic_interp requires a step schedule");
      break;
    case Kind::GaussianNoise:
      if (variance < 0.0) throw ConfigError("DefensePolicy: variance must be >= 0");
      break;
    case Kind::Quantize:
      if (!(step > 0.0)) throw ConfigError("DefensePolicy: step must be > 0");
      break;
  }
}

Mat linear_interp_defense(const Mat& codes, int k, Rng& rng) {
  if (k < 1) throw ConfigError("linear_interp_defense: k must be >= 1");
  const long n = codes.rows();
  if (n < 2) return codes;  // passthrough; nothing to pair
  Mat out(n, codes.cols());
  long filled = 0;
  while (filled < n) {
    const long a = static_cast<long>(rng.uniform_index(n));
    long b = static_cast<long>(rng.uniform_index(n - 1));
    if (b >= a) ++b;  // distinct pair
    for (int i = 1; i <= k && filled < n; ++i, ++filled) {
      const double t = static_cast<double>(i) / (k + 1);
      out.row(filled) = (1.0 - t) * codes.row(a) + t * codes.row(b);
    }
  }
  return out;
}

Mat semantic_interp_defense(const Mat& codes, const std::vector<Hyperplane>& planes,
                            const std::vector<double>& schedule) {
  if (planes.empty()) throw ConfigError("semantic_interp_defense: no planes");
  if (schedule.empty()) throw ConfigError("semantic_interp_defense: empty schedule");
  for (const auto& p : planes) {
    p.validate();
    if (p.normal.size() != codes.cols())
      throw ShapeError("semantic_interp_defense: plane dimension != code dimension");
  }
  const long s = static_cast<long>(schedule.size());
  const long np = static_cast<long>(planes.size());
  Mat out(codes.rows(), codes.cols());
  for (long i = 0; i < codes.rows(); ++i) {
    const double step = schedule[i % s];
    const Hyperplane& plane = planes[(i / s) % np];
    out.row(i) = codes.row(i) + step * plane.normal.transpose();
  }
  return out;
}

worlds::SampleBatch gaussian_noise_defense(const worlds::SampleBatch& batch,
                                           double variance, Rng& rng) {
  if (variance < 0.0) throw ConfigError("gaussian_noise_defense: variance must be >= 0");
  worlds::SampleBatch out = batch;
  if (variance == 0.0) return out;
  const double sd = std::sqrt(variance);
  for (long r = 0; r < out.points.rows(); ++r)
    for (long c = 0; c < out.points.cols(); ++c) out.points(r, c) += sd * rng.normal();
  return out;
}

worlds::SampleBatch quantize_defense(const worlds::SampleBatch& batch, double step) {
  if (!(step > 0.0)) throw ConfigError("quantize_defense: step must be > 0");
  worlds::SampleBatch out = batch;
  for (long r = 0; r < out.points.rows(); ++r)
    for (long c = 0; c < out.points.cols(); ++c) {
      const double v = out.points(r, c) / step;
      // round half away from zero
      out.points(r, c) = step * (v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
    }
  return out;
}

Hyperplane fit_semantic_hyperplane(const gan::GanModel& generator_view,
                                   const SampleScorer& scorer, long pool_size, long top_k,
                                   std::uint64_t seed) {
  if (pool_size < 2 * top_k)
    throw ConfigError("fit_semantic_hyperplane: pool must cover 2*top_k extremes");
  Rng rng(derive_seed(seed, 0x5e11));
  const Mat codes = generator_view.prior.draw(pool_size, rng);
  const Mat samples = gan::generate_from(generator_view, codes).points;
  Vec scores(pool_size);
  for (long i = 0; i < pool_size; ++i)
    scores[i] = scorer(Vector2d(samples(i, 0), samples(i, 1)));
  if (scores.maxCoeff() == scores.minCoeff())
    throw UndefinedInputError("fit_semantic_hyperplane: scorer constant on pool");

  std::vector<long> order(pool_size);
  for (long i = 0; i < pool_size; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](long a, long b) { return scores[a] < scores[b]; });

  // top_k highest scores labelled +1, lowest -1.
  Mat x(2 * top_k, codes.cols());
  Vec y(2 * top_k);
  for (long i = 0; i < top_k; ++i) {
    x.row(i) = codes.row(order[i]);
    y[i] = -1.0;
    x.row(top_k + i) = codes.row(order[pool_size - 1 - i]);
    y[top_k + i] = 1.0;
  }

  // Linear SVM: hinge loss + L2 (lambda 1e-3), plain subgradient descent.
  const double lambda = 1e-3;
  const long steps = 10000;
  const long m = x.rows();
  Vec w = Vec::Zero(x.cols());
  double b = 0.0;
  for (long t = 1; t <= steps; ++t) {
    const double lr = 1.0 / (lambda * static_cast<double>(t));
    Vec gw = lambda * w;
    double gb = 0.0;
    for (long i = 0; i < m; ++i) {
      const double margin = y[i] * (w.dot(x.row(i).transpose()) + b);
      if (margin < 1.0) {
        gw -= y[i] * x.row(i).transpose() / static_cast<double>(m);
        gb -= y[i] / static_cast<double>(m);
      }
    }
    w -= lr * gw;
    b -= lr * gb;
  }
  const double norm = w.norm();
  if (norm == 0.0)
    throw NumericError("fit_semantic_hyperplane: degenerate separating direction");
  Hyperplane plane;
  plane.normal = w / norm;
  plane.offset = b / norm;
  return plane;
}

SampleScorer scorer_by_name(const std::string& name) {
  if (name == "x") return [](const Vector2d& p) { return p.x(); };
  if (name == "y") return [](const Vector2d& p) { return p.y(); };
  if (name == "radius") return [](const Vector2d& p) { return p.norm(); };
  throw ConfigError("unknown scorer: " + name);
}

Mat apply_input_defense(const DefensePolicy& policy, const Mat& codes, Rng& rng) {
  switch (policy.kind) {
    case DefensePolicy::Kind::LinearInterp:
      return linear_interp_defense(codes, policy.k, rng);
    case DefensePolicy::Kind::SemanticInterp:
      return semantic_interp_defense(codes, policy.planes, policy.schedule);
    default:
      return codes;
  }
}

worlds::SampleBatch apply_output_defense(const DefensePolicy& policy,
                                         const worlds::SampleBatch& batch, Rng& rng) {
  switch (policy.kind) {
    case DefensePolicy::Kind::GaussianNoise:
      return gaussian_noise_defense(batch, policy.variance, rng);
    case DefensePolicy::Kind::Quantize:
      return quantize_defense(batch, policy.step);
    default:
      return batch;
  }
}

namespace {
std::string kind_name(DefensePolicy::Kind k) {
  switch (k) {
    case DefensePolicy::Kind::None: return "none";
    case DefensePolicy::Kind::LinearInterp: return "linear_interp";
    case DefensePolicy::Kind::SemanticInterp: return "semantic_interp";
    case DefensePolicy::Kind::GaussianNoise: return "gaussian_noise";
    case DefensePolicy::Kind::Quantize: return "quantize";
  }
  throw ConfigError("unknown defense kind");
}

DefensePolicy::Kind kind_from_name(const std::string& name) {
  if (name == "none") return DefensePolicy::Kind::None;
  if (name == "linear_interp") return DefensePolicy::Kind::LinearInterp;
  if (name == "semantic_interp") return DefensePolicy::Kind::SemanticInterp;
  if (name == "gaussian_noise") return DefensePolicy::Kind::GaussianNoise;
  if (name == "quantize") return DefensePolicy::Kind::Quantize;
  throw ConfigError("unknown defense kind: " + name);
}
}  // namespace

std::string DefensePolicy::to_json() const {
  json j;
  j["kind"] = kind_name(kind);
  switch (kind) {
    case Kind::LinearInterp:
      j["k"] = k;
      break;
    case Kind::SemanticInterp: {
      json jp = json::array();
      for (const auto& p : planes) {
        json one;
        one["normal"] = std::vector<double>(p.normal.data(), p.normal.data() + p.normal.size());
        one["offset"] = p.offset;
        jp.push_back(one);
      }
      j["planes"] = jp;
      j["schedule"] = schedule;
      break;
    }
    case Kind::GaussianNoise:
      j["variance"] = variance;
      break;
    case Kind::Quantize:
      j["step"] = step;
      break;
    case Kind::None:
      break;
  }
  return j.dump();
}

DefensePolicy DefensePolicy::from_json(const std::string& text) {
  json j = json::parse(text);
  DefensePolicy p;
  p.kind = kind_from_name(j.at("kind").get<std::string>());
  switch (p.kind) {
    case Kind::LinearInterp:
      p.k = j.value("k", 9);
      break;
    case Kind::SemanticInterp: {
      for (const json& one : j.at("planes")) {
        Hyperplane plane;
        const auto n = one.at("normal").get<std::vector<double>>();
        plane.normal = Eigen::Map<const Vec>(n.data(), static_cast<long>(n.size()));
        plane.offset = one.value("offset", 0.0);
        p.planes.push_back(std::move(plane));
      }
      p.schedule = j.at("schedule").get<std::vector<double>>();
      break;
    }
    case Kind::GaussianNoise:
      p.variance = j.value("variance", 0.001);
      break;
    case Kind::Quantize:
      p.step = j.at("step").get<double>();
      break;
    case Kind::None:
      break;
  }
  p.validate();
  return p;
}

}  // namespace ganlab::defenses
