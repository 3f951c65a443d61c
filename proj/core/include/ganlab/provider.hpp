#pragma once

#include <memory>
#include <string>

#include "ganlab/defenses.hpp"
#include "ganlab/gan.hpp"
#include "ganlab/worlds.hpp"

namespace ganlab::provider {

// Declared adversary background knowledge. GeneratedDataOnly and
// LatentQueries are mutually exclusive query modes.
struct Capability {
  enum class QueryMode { None, GeneratedDataOnly, LatentQueries };
  QueryMode query_mode = QueryMode::GeneratedDataOnly;
  double partial_real_fraction = 0.0;  // in (0,1] when granted, 0 = denied
  bool discriminator_access = false;

  void validate() const;
  std::string to_json() const;
  static Capability from_json(const std::string& text);
};

struct QueryLedger {
  long used = 0;
  long budget = -1;  // -1 = unlimited

  bool unlimited() const { return budget < 0; }
  void charge(long n);  // throws QuotaError; used never decreases
};

// Adversary-facing boundary. The concrete ModelProvider wraps a target
// GanModel; tests substitute analytic sources through this interface.
class Provider {
 public:
  virtual ~Provider() = default;

  worlds::SampleBatch query(long n);
  worlds::SampleBatch query_with_codes(const Mat& codes);
  worlds::SampleBatch real_data(double fraction);
  double discriminator_logit(const Vector2d& x);
  Vec discriminator_logits(const Mat& points);

  const QueryLedger& ledger() const { return ledger_; }
  const Capability& capability() const { return capability_; }
  virtual int latent_dim() const = 0;

 protected:
  Provider(Capability capability, long budget) : capability_(capability) {
    capability_.validate();
    ledger_.budget = budget;
  }

  virtual worlds::SampleBatch do_query(long n) = 0;
  virtual worlds::SampleBatch do_query_with_codes(const Mat& codes) = 0;
  virtual worlds::SampleBatch do_real_data(double fraction) = 0;
  virtual double do_discriminator_logit(const Vector2d& x) = 0;
  virtual Vec do_discriminator_logits(const Mat& points);

 private:
  Capability capability_;
  QueryLedger ledger_;
};

struct ProviderConfig {
  Capability capability;
  long budget = -1;
  defenses::DefensePolicy defense;
  long corpus_size = 200000;  // declared training corpus for real_data
  std::uint64_t seed = 1;
};

// Serves a target model. query(n) draws n prior codes, routes them through
// any input defense, generates, then applies any output defense; ledger cost
// is always the submitted count.
class ModelProvider : public Provider {
 public:
  ModelProvider(gan::GanModel target, const worlds::MixtureSpec& world,
                const ProviderConfig& config);

  const gan::GanModel& target_for_evaluation() const { return target_; }

 protected:
  worlds::SampleBatch do_query(long n) override;
  worlds::SampleBatch do_query_with_codes(const Mat& codes) override;
  worlds::SampleBatch do_real_data(double fraction) override;
  double do_discriminator_logit(const Vector2d& x) override;
  Vec do_discriminator_logits(const Mat& points) override;
  int latent_dim() const override { return target_.prior.dim; }

 private:
  gan::GanModel target_;
  Mat corpus_;  // fixed at construction; real_data returns its prefix
  defenses::DefensePolicy defense_;
  Rng rng_;
};

}  // namespace ganlab::provider
