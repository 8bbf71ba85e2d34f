#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsedit/config.hpp"
#include "lsedit/core.hpp"
#include "lsedit/linfit.hpp"
#include "lsedit/metrics.hpp"
#include "lsedit/neutralizer.hpp"
#include "lsedit/nn.hpp"
#include "lsedit/oracle.hpp"
#include "lsedit/sampler.hpp"

namespace lsedit {

// Binary nuisance column appended to generated tables: 0 for rows edited from
// real neutral codes, 1 for rows edited from neutralized synthetic draws.
inline constexpr std::string_view kSyntheticColumn = "synthetic";

struct AugmentationPlan {
  std::size_t copies_per_au = 1;
  double step = 1.0;              // predictor-output units
  double neutral_threshold = 0.1;
};

// Rows whose AU labels are all below the threshold.
std::vector<std::size_t> neutral_rows(const AttributeTable& table, double threshold);

// For every (neutral) row and every AU-role attribute, `copies_per_au` codes
// edited along that AU's direction. AU labels are commanded (edited AU 1,
// others 0); other label columns are copied from the source row; the
// `synthetic` column is 0. Throws ValidationError on non-neutral input rows
// or missing directions.
AttributeTable build_edited_set(const AttributeTable& neutral, const DirectionBank& bank, const AugmentationPlan& plan);

struct SyntheticSetOptions {
  std::vector<CellAttribute> cells;  // demographic cells to balance
  std::size_t per_cell = 2;
  NeutralizeOptions neutralize;
  // Neutralizations may fail at most max_failure_rate * (cells * per_cell) times.
  double max_failure_rate = 0.2;
  std::size_t draws_per_target = kDefaultDrawsPerTarget;
};

struct SyntheticSet {
  AttributeTable table;
  std::size_t draws = 0;
  std::size_t neutralizations = 0;
  std::size_t failures = 0;  // neutralized codes with some AU prediction >= threshold
};

// Balanced-demographic sample from `source`, each accepted code neutralized
// and then edited once per AU as in build_edited_set (`synthetic` = 1).
// Aborts with NumericalError when failures exceed the configured bound.
SyntheticSet build_synthetic_set(GeneratorSource& source, std::span<const LinearPredictor> predictors,
                                 const NeutralizerModel& neutralizer, const DirectionBank& bank,
                                 const AugmentationPlan& plan, const SyntheticSetOptions& options);

struct DetectorConfig {
  std::size_t hidden = 64;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 40;  // epochs without validation-loss improvement
  std::uint64_t seed = 0;
};

// x -> SiLU(W1 x + b1) -> sigmoid(W2 h + b2).
struct DownstreamDetector {
  nn::Dense hidden;
  nn::Dense output;

  // Observations as rows in, AU values as rows out.
  Matrix predict(const Matrix& observations) const;
};

struct DetectorTraining {
  DownstreamDetector model;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based
};

// Minimizes the per-AU weighted squared error (weights default to 1) with Adam;
// early stopping and checkpoint choice use the unweighted validation MSE.
DetectorTraining train_detector(const Matrix& train_x, const Matrix& train_y, const Matrix& val_x,
                                const Matrix& val_y, const DetectorConfig& config, const Vector& au_weights = {});

// Inverse positive frequency per column (floored at one row), scaled to mean 1.
Vector inverse_frequency_weights(const Matrix& labels, double threshold);

enum class Scenario { baseline, augmented, reweighted, edited_only, synthetic_only, combined };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);
std::vector<Scenario> all_scenarios();

struct ExperimentConfig {
  OracleSpec oracle;
  std::size_t train_rows = 2000;
  std::size_t val_rows = 500;
  std::size_t test_rows = 2000;
  double alpha = 10.0;
  double logistic_l2 = 1e-2;
  bool condition_on_peers = true;
  bool project_nuisance = true;  // project AU directions off demographic/nuisance directions
  double threshold = 0.1;
  AugmentationPlan plan;
  std::size_t max_edit_sources = 0;  // 0: every neutral training row
  std::string balance_filter = "gender,age3";
  std::size_t per_cell = 20;
  double max_failure_rate = 0.2;
  NeutralizerConfig neutralizer;
  NeutralizeOptions neutralize;
  DetectorConfig detector;
  bool learning_curve = false;
  std::vector<double> curve_fractions{0.05, 0.10, 0.25, 0.50, 1.00};
};

// Six long-tailed AUs (activation rates 40%..2%) with two correlated pairs
// (copula correlation 0.6), a binary gender, a continuous age and a binary
// eyeglasses nuisance, in a 32-dimensional latent space.
OracleSpec entangled_oracle_spec();
ExperimentConfig default_experiment_config();

// Reads keys under `prefix` (e.g. "experiment."); `<prefix>oracle.*` keys
// replace the default oracle. Unknown keys under the prefix are rejected.
ExperimentConfig experiment_config_from(const KeyValueConfig& config, std::string_view prefix,
                                        std::span<const std::string> ignored_prefixes = {});

// Everything one seed of an experiment shares across scenarios. Generated
// sets, the neutralizer and the learning curve are built on first use.
class ExperimentWorld {
 public:
  ExperimentWorld(ExperimentConfig config, std::uint64_t seed);

  const ExperimentConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const AttributeTable& train() const { return train_; }
  const AttributeTable& validation() const { return val_; }
  const AttributeTable& test() const { return test_; }
  const std::vector<std::string>& au_names() const { return au_names_; }
  const DirectionBank& bank() const { return bank_; }
  const std::vector<LinearPredictor>& predictors() const { return predictors_; }
  const ObservationMap& observation() const { return observation_; }

  const AttributeTable& edited_set();
  const SyntheticSet& synthetic_set();
  const TrainedNeutralizer& neutralizer();
  const std::vector<LearningPoint>& learning_curve();

  // Observations and AU labels of a table.
  Matrix observe(const AttributeTable& table) const;
  Matrix au_labels(const AttributeTable& table) const;

 private:
  ExperimentConfig config_;
  std::uint64_t seed_;
  AttributeTable train_, val_, test_;
  std::vector<std::string> au_names_;
  DirectionBank bank_;
  std::vector<LinearPredictor> predictors_;
  ObservationMap observation_;
  std::optional<AttributeTable> edited_;
  std::optional<SyntheticSet> synthetic_;
  std::optional<TrainedNeutralizer> neutralizer_;
  std::optional<std::vector<LearningPoint>> curve_;
};

struct ScenarioResult {
  Scenario scenario = Scenario::baseline;
  std::uint64_t seed = 0;
  std::size_t real_rows = 0;
  std::size_t edited_rows = 0;
  std::size_t synthetic_rows = 0;
  std::size_t best_epoch = 0;
  F1Report f1;
  PairFprReport pair;
  std::vector<LearningPoint> curve;
  std::optional<Pow3Fit> pow3;
  std::optional<double> data_multiplier;
  std::string curve_note;
};

ScenarioResult run_scenario(ExperimentWorld& world, Scenario scenario);

// One report per scenario: summary over seeds (mean and sample sd), per-seed
// metric table, per-AU F1 table, mean pair-FPR matrix and learning-curve points.
std::string format_scenario_report(std::span<const ScenarioResult> results, std::span<const std::string> au_names);

}  // namespace lsedit
