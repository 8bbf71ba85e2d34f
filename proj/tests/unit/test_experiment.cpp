#include <doctest.h>

#include "lsedit/editor.hpp"
#include "lsedit/errors.hpp"
#include "lsedit/experiment.hpp"
#include "support.hpp"

using namespace lsedit;

namespace {

ExperimentConfig tiny_config() {
  auto cfg = default_experiment_config();
  cfg.train_rows = 2000;
  cfg.val_rows = 100;
  cfg.test_rows = 200;
  cfg.per_cell = 2;
  cfg.neutralizer.width = 32;
  cfg.neutralizer.max_epochs = 60;
  cfg.detector.hidden = 16;
  cfg.detector.max_epochs = 5;
  cfg.max_failure_rate = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("edited set has equal positives per AU and one-hot AU labels") {
  const auto spec = entangled_oracle_spec();
  const auto table = oracle_sample(spec, 300, 1);
  const auto au = table.names_with_role(AttributeRole::au);
  const auto bank = fit_direction_bank(table, au, true, 10.0);
  const auto rows = neutral_rows(table, 0.1);
  REQUIRE(rows.size() > 10);
  const auto neutral = table.select_rows(rows);
  AugmentationPlan plan;
  plan.copies_per_au = 2;
  const auto edited = build_edited_set(neutral, bank, plan);
  CHECK(edited.rows() == rows.size() * au.size() * 2);
  const auto synth = edited.index_of(kSyntheticColumn);
  CHECK(edited.labels().col(static_cast<Eigen::Index>(synth)).sum() == 0.0);
  for (const auto& name : au) {
    CHECK(edited.column(name).sum() == doctest::Approx(static_cast<double>(rows.size() * 2)));
  }
  for (std::size_t i = 0; i < edited.rows(); ++i) {
    double s = 0.0;
    for (const auto& name : au) s += edited.labels()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(edited.index_of(name)));
    CHECK(s == 1.0);
  }
  // Non-AU labels travel with the source row.
  CHECK(edited.labels()(0, static_cast<Eigen::Index>(edited.index_of("gender"))) ==
        neutral.labels()(0, static_cast<Eigen::Index>(neutral.index_of("gender"))));
  CHECK_THROWS_AS(build_edited_set(table, bank, plan), ValidationError);
}

TEST_CASE("inverse frequency weights have mean one") {
  Matrix labels = Matrix::Zero(10, 3);
  labels.col(0).head(5).setOnes();
  labels(0, 1) = 1;
  const Vector w = inverse_frequency_weights(labels, 0.1);
  CHECK(w.mean() == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(5.0 * w[0]));
  CHECK(w[2] == doctest::Approx(w[1]));
}

TEST_CASE("detector learns a simple mapping") {
  const Matrix x = testing::gaussian(400, 3, 2);
  Matrix y(400, 1);
  y.col(0) = (x.col(0).array() > 0).cast<double>();
  DetectorConfig cfg;
  cfg.hidden = 16;
  cfg.max_epochs = 40;
  cfg.learning_rate = 1e-2;
  const auto trained = train_detector(x.topRows(300), y.topRows(300), x.bottomRows(100), y.bottomRows(100), cfg);
  CHECK(trained.val_loss.back() < 0.1);
  const Matrix p = trained.model.predict(x.bottomRows(100));
  CHECK(f1_scores(p, y.bottomRows(100), 0.5).macro > 0.9);
}

TEST_CASE("scenario names") {
  for (auto s : all_scenarios()) CHECK(parse_scenario(to_string(s)) == s);
  CHECK_THROWS_AS(parse_scenario("bogus"), UsageError);
}

TEST_CASE("experiment config keys") {
  auto kv = KeyValueConfig::parse("experiment.train_rows=123\nexperiment.neutralize.dropout=0.1\n"
                                  "experiment.oracle.dimension=12\nexperiment.oracle.factors=a,b\n");
  const auto cfg = experiment_config_from(kv, "experiment.");
  CHECK(cfg.train_rows == 123);
  CHECK(cfg.neutralize.dropout == 0.1);
  CHECK(cfg.oracle.dimension() == 12);
  const auto bad = KeyValueConfig::parse("experiment.trian_rows=5\n");
  CHECK_THROWS_AS(experiment_config_from(bad, "experiment."), UsageError);
}

TEST_CASE("entangled oracle") {
  const auto spec = entangled_oracle_spec();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.factor_count() == 9);
  CHECK(spec.factor_correlation(spec.factor_index("au1"), spec.factor_index("au5")) == 0.6);
}

TEST_CASE("tiny world runs every scenario deterministically") {
  ExperimentWorld world(tiny_config(), 3);
  const auto& synth = world.synthetic_set();
  CHECK(synth.table.rows() == 6 * 2 * world.au_names().size());
  const auto a = run_scenario(world, Scenario::combined);
  CHECK(a.edited_rows > 0);
  CHECK(a.synthetic_rows == synth.table.rows());
  CHECK(a.edited_rows == world.edited_set().rows());
  CHECK(a.real_rows == world.train().rows());
  ExperimentWorld again(tiny_config(), 3);
  const auto b = run_scenario(again, Scenario::combined);
  CHECK(a.f1.f1 == b.f1.f1);
  const auto base = run_scenario(world, Scenario::baseline);
  CHECK(base.edited_rows == 0);
  const std::vector<ScenarioResult> results{base};
  const auto report = format_scenario_report(results, world.au_names());
  CHECK(report.find("scenario=baseline") != std::string::npos);
}

TEST_CASE("edited rows differ from their source by one calibrated displacement") {
  const auto spec = entangled_oracle_spec();
  const auto table = oracle_sample(spec, 300, 2);
  const auto au = table.names_with_role(AttributeRole::au);
  const auto bank = fit_direction_bank(table, au, true, 10.0);
  const auto neutral = table.select_rows(neutral_rows(table, 0.1));
  const AugmentationPlan plan;
  const auto edited = build_edited_set(neutral, bank, plan);
  std::size_t row = 0;
  for (std::size_t src = 0; src < neutral.rows(); ++src) {
    for (const auto& name : au) {
      const auto expected = apply_edit(neutral.code(src), bank.get(name), plan.step);
      CHECK((edited.code(row).z - expected.z).cwiseAbs().maxCoeff() == 0.0);
      ++row;
    }
  }
  CHECK(row == edited.rows());
}
