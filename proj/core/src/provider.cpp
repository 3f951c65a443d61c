#include "ganlab/provider.hpp"

#include <json.hpp>

namespace ganlab::provider {

using nlohmann::json;

void Capability::validate() const {
  if (partial_real_fraction < 0.0 || partial_real_fraction > 1.0)
    throw ConfigError("Capability: partial_real_fraction must lie in [0,1]");
}

std::string Capability::to_json() const {
  json j;
  switch (query_mode) {
    case QueryMode::None: j["query_mode"] = "none"; break;
    case QueryMode::GeneratedDataOnly: j["query_mode"] = "generated_data"; break;
    case QueryMode::LatentQueries: j["query_mode"] = "latent_queries"; break;
  }
  j["partial_real_fraction"] = partial_real_fraction;
  j["discriminator_access"] = discriminator_access;
  return j.dump();
}

Capability Capability::from_json(const std::string& text) {
  json j = json::parse(text);
  Capability c;
  const std::string mode = j.value("query_mode", "generated_data");
  if (mode == "none") c.query_mode = QueryMode::None;
  else if (mode == "generated_data") c.query_mode = QueryMode::GeneratedDataOnly;
  else if (mode == "latent_queries") c.query_mode = QueryMode::LatentQueries;
  else throw ConfigError("Capability: unknown query_mode " + mode);
  c.partial_real_fraction = j.value("partial_real_fraction", 0.0);
  c.discriminator_access = j.value("discriminator_access", false);
  c.validate();
  return c;
}

void QueryLedger::charge(long n) {
  if (n < 0) throw UndefinedInputError("QueryLedger: negative charge");
  if (!unlimited() && used + n > budget)
    throw QuotaError("query budget exceeded: " + std::to_string(used) + "+" +
                     std::to_string(n) + " > " + std::to_string(budget));
  used += n;
}

worlds::SampleBatch Provider::query(long n) {
  if (n < 0) throw UndefinedInputError("query: n must be >= 0");
  if (capability_.query_mode == Capability::QueryMode::None)
    throw PermissionError("query capability not granted");
  if (n == 0) return {Mat(0, 2), worlds::Provenance::Generated};
  ledger_.charge(n);
  return do_query(n);
}

worlds::SampleBatch Provider::query_with_codes(const Mat& codes) {
  if (capability_.query_mode != Capability::QueryMode::LatentQueries)
    throw PermissionError("latent query capability not granted");
  if (codes.rows() == 0) return {Mat(0, 2), worlds::Provenance::Generated};
  ledger_.charge(codes.rows());
  return do_query_with_codes(codes);
}

worlds::SampleBatch Provider::real_data(double fraction) {
  if (fraction < 0.0) throw UndefinedInputError("real_data: negative fraction");
  if (capability_.partial_real_fraction <= 0.0)
    throw PermissionError("partial real data capability not granted");
  if (fraction > capability_.partial_real_fraction + 1e-12)
    throw PermissionError("requested real fraction exceeds grant");
  return do_real_data(fraction);
}

double Provider::discriminator_logit(const Vector2d& x) {
  if (!capability_.discriminator_access)
    throw PermissionError("discriminator access not granted");
  return do_discriminator_logit(x);
}

Vec Provider::discriminator_logits(const Mat& points) {
  if (!capability_.discriminator_access)
    throw PermissionError("discriminator access not granted");
  return do_discriminator_logits(points);
}

Vec Provider::do_discriminator_logits(const Mat& points) {
  Vec out(points.rows());
  for (long i = 0; i < points.rows(); ++i)
    out[i] = do_discriminator_logit(Vector2d(points(i, 0), points(i, 1)));
  return out;
}

ModelProvider::ModelProvider(gan::GanModel target, const worlds::MixtureSpec& world,
                             const ProviderConfig& config)
    : Provider(config.capability, config.budget),
      target_(std::move(target)),
      defense_(config.defense),
      rng_(derive_seed(config.seed, 0x70726f76)) {
  target_.validate();
  defense_.validate();
  if (config.corpus_size < 1) throw ConfigError("ModelProvider: corpus_size must be >= 1");
  Rng corpus_rng(derive_seed(config.seed, 0x636f7270));
  corpus_ = worlds::sample_points(world, config.corpus_size, corpus_rng);
}

worlds::SampleBatch ModelProvider::do_query(long n) {
  Mat codes = target_.prior.draw(n, rng_);
  codes = defenses::apply_input_defense(defense_, codes, rng_);
  worlds::SampleBatch batch = gan::generate_from(target_, codes);
  return defenses::apply_output_defense(defense_, batch, rng_);
}

worlds::SampleBatch ModelProvider::do_query_with_codes(const Mat& codes) {
  if (codes.cols() != target_.prior.dim)
    throw ShapeError("query_with_codes: code dimension != prior dim");
  const Mat replaced = defenses::apply_input_defense(defense_, codes, rng_);
  worlds::SampleBatch batch = gan::generate_from(target_, replaced);
  return defenses::apply_output_defense(defense_, batch, rng_);
}

worlds::SampleBatch ModelProvider::do_real_data(double fraction) {
  const long n = static_cast<long>(fraction * static_cast<double>(corpus_.rows()));
  worlds::SampleBatch batch;
  batch.provenance = worlds::Provenance::Real;
  batch.points = corpus_.topRows(n);
  return batch;
}

double ModelProvider::do_discriminator_logit(const Vector2d& x) {
  return nnet::forward(target_.discriminator, Vec(x))[0];
}

Vec ModelProvider::do_discriminator_logits(const Mat& points) {
  return nnet::forward(target_.discriminator, points).col(0);
}

}  // namespace ganlab::provider
