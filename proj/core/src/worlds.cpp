#include "ganlab/worlds.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace ganlab::worlds {

void MixtureSpec::validate() const {
  if (means.cols() != 2) throw ShapeError("MixtureSpec: means must be m x 2");
  if (weights.size() != means.rows())
    throw ShapeError("MixtureSpec: one weight per component required");
  if ((weights.array() < 0.0).any())
    throw UndefinedInputError("MixtureSpec: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw UndefinedInputError("MixtureSpec: weights must sum to 1");
  if (!(sigma > 0.0)) throw UndefinedInputError("MixtureSpec: sigma must be > 0");
}

MixtureSpec MixtureSpec::translated(const Vector2d& delta) const {
  MixtureSpec out = *this;
  out.means.rowwise() += delta.transpose();
  return out;
}

MixtureSpec grid25() {
  MixtureSpec spec;
  spec.means.resize(25, 2);
  int idx = 0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) spec.means.row(idx++) << i, j;
  spec.weights = Vec::Constant(25, 1.0 / 25.0);
  spec.sigma = 0.05;
  return spec;
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Real: return "real";
    case Provenance::Generated: return "generated";
    case Provenance::Refined: return "refined";
  }
  throw ShapeError("unknown provenance");
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "real") return Provenance::Real;
  if (name == "generated") return Provenance::Generated;
  if (name == "refined") return Provenance::Refined;
  throw ConfigError("unknown provenance: " + name);
}

Mat sample_points(const MixtureSpec& spec, long n, Rng& rng) {
  spec.validate();
  if (n < 0) throw UndefinedInputError("sample: n must be >= 0");
  Mat pts(n, 2);
  // Cumulative weights for component selection.
  Vec cum(spec.weights.size());
  double acc = 0.0;
  for (int i = 0; i < spec.weights.size(); ++i) {
    acc += spec.weights[i];
    cum[i] = acc;
  }
  for (long r = 0; r < n; ++r) {
    const double u = rng.uniform();
    int comp = 0;
    while (comp + 1 < cum.size() && u > cum[comp]) ++comp;
    pts(r, 0) = spec.means(comp, 0) + spec.sigma * rng.normal();
    pts(r, 1) = spec.means(comp, 1) + spec.sigma * rng.normal();
  }
  return pts;
}

SampleBatch sample(const MixtureSpec& spec, long n, std::uint64_t seed) {
  Rng rng(seed);
  return SampleBatch{sample_points(spec, n, rng), Provenance::Real};
}

double log_density(const MixtureSpec& spec, const Vector2d& x) {
  const double inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
  const double log_norm = -std::log(2.0 * M_PI * spec.sigma * spec.sigma);
  // log-sum-exp over components.
  double max_term = -std::numeric_limits<double>::infinity();
  Vec terms(spec.means.rows());
  for (int i = 0; i < spec.means.rows(); ++i) {
    const double dx = x[0] - spec.means(i, 0);
    const double dy = x[1] - spec.means(i, 1);
    const double t = std::log(spec.weights[i]) + log_norm - (dx * dx + dy * dy) * inv2s2;
    terms[i] = t;
    max_term = std::max(max_term, t);
  }
  double s = 0.0;
  for (int i = 0; i < terms.size(); ++i) s += std::exp(terms[i] - max_term);
  return max_term + std::log(s);
}

double density(const MixtureSpec& spec, const Vector2d& x) {
  return std::exp(log_density(spec, x));
}

double high_quality_fraction(const Mat& points, const MixtureSpec& spec) {
  if (points.rows() == 0)
    throw UndefinedInputError("high_quality_fraction: empty batch");
  const double threshold2 = 16.0 * spec.sigma * spec.sigma;  // (4 sigma)^2
  long hits = 0;
  for (long r = 0; r < points.rows(); ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (int m = 0; m < spec.means.rows(); ++m) {
      const double dx = points(r, 0) - spec.means(m, 0);
      const double dy = points(r, 1) - spec.means(m, 1);
      best = std::min(best, dx * dx + dy * dy);
    }
    if (best <= threshold2) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(points.rows());
}

double high_quality_fraction(const SampleBatch& batch, const MixtureSpec& spec) {
  return high_quality_fraction(batch.points, spec);
}

double optimal_discriminator(const MixtureSpec& p_r, const DensityFn& p_g,
                             const Vector2d& x) {
  const double pr = density(p_r, x);
  const double pg = p_g(x);
  if (!std::isfinite(pr) || !std::isfinite(pg) || pg < 0.0)
    throw NumericError("optimal_discriminator: invalid density");
  if (pr + pg == 0.0) return 0.5;
  return pr / (pr + pg);
}

void save_csv(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "# provenance=" << provenance_name(batch.provenance) << "\n";
  char buf[64];
  for (long r = 0; r < batch.points.rows(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", batch.points(r, 0),
                  batch.points(r, 1));
    out << buf;
  }
}

SampleBatch load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  SampleBatch batch;
  std::vector<double> xs, ys;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos && line.find("provenance") != std::string::npos)
        batch.provenance = provenance_from_name(line.substr(eq + 1));
      continue;
    }
    double x = 0.0, y = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &x, &y) != 2)
      throw ConfigError("bad CSV row: " + line);
    xs.push_back(x);
    ys.push_back(y);
  }
  batch.points.resize(static_cast<long>(xs.size()), 2);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    batch.points(static_cast<long>(i), 0) = xs[i];
    batch.points(static_cast<long>(i), 1) = ys[i];
  }
  return batch;
}

namespace {
constexpr char kBinaryMagic[8] = {'G', 'L', 'S', 'B', 'A', 'T', 'C', '1'};
}

void save_binary(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  const std::uint64_t n = static_cast<std::uint64_t>(batch.points.rows());
  const std::uint32_t prov = static_cast<std::uint32_t>(batch.provenance);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&prov), sizeof(prov));
  for (long r = 0; r < batch.points.rows(); ++r) {
    const double xy[2] = {batch.points(r, 0), batch.points(r, 1)};
    out.write(reinterpret_cast<const char*>(xy), sizeof(xy));
  }
}

SampleBatch load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0)
    throw ConfigError("bad binary batch header: " + path);
  std::uint64_t n = 0;
  std::uint32_t prov = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&prov), sizeof(prov));
  if (!in || prov > 2) throw ConfigError("bad binary batch header: " + path);
  SampleBatch batch;
  batch.provenance = static_cast<Provenance>(prov);
  batch.points.resize(static_cast<long>(n), 2);
  for (std::uint64_t r = 0; r < n; ++r) {
    double xy[2];
    in.read(reinterpret_cast<char*>(xy), sizeof(xy));
    if (!in) throw ConfigError("truncated binary batch: " + path);
    batch.points(static_cast<long>(r), 0) = xy[0];
    batch.points(static_cast<long>(r), 1) = xy[1];
  }
  return batch;
}

}  // namespace ganlab::worlds
