// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "lsedit/cli.hpp"
#include "lsedit/editor.hpp"
#include "lsedit/experiment.hpp"
#include "lsedit/geometry.hpp"
#include "lsedit/table_io.hpp"

using namespace lsedit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
int ran = 0;
std::vector<int> selected;  // empty: every criterion

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
  ++ran;
  Outcome o;
  const auto start = Clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(start));
  std::fflush(stdout);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

OracleSpec independent_au_spec(std::size_t k, std::size_t d, double noise, std::uint64_t mixing_seed) {
  OracleSpec s;
  for (std::size_t i = 0; i < k; ++i) {
    s.factors.push_back({"au" + std::to_string(i + 1), AttributeRole::au, AttributeKind::continuous, 0.5});
  }
  s.factor_correlation = Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  s.mixing = random_orthonormal_mixing(d, k, 1.0, mixing_seed);
  s.noise_sigma = noise;
  return s;
}

Matrix random_codes(Eigen::Index rows, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// ---------------------------------------------------------------------------

Outcome direction_fidelity() {
  const auto start = Clock::now();
  const auto spec = independent_au_spec(6, 32, 0.05, 101);
  const auto table = oracle_sample(spec, 5000, 102);
  const auto names = table.names_with_role(AttributeRole::au);
  const auto bank = fit_direction_bank(table, names, false, 10.0);
  double worst = 1.0;
  for (std::size_t f = 0; f < names.size(); ++f) {
    worst = std::min(worst, std::abs(bank.get(names[f]).unit().dot(spec.latent_axis(f))));
  }
  const double elapsed = seconds_since(start);
  return {worst >= 0.9 && elapsed < 10.0, "min |cos| " + fmt(worst) + " (need >= 0.9), runtime " + fmt(elapsed, 3) + " s (< 10)"};
}

Outcome conditioning_reduces_leakage() {
  int wins = 0;
  double worst_gap = 1.0;
  constexpr int kInstances = 20;
  for (int inst = 0; inst < kInstances; ++inst) {
    auto spec = independent_au_spec(6, 32, 0.1, 200 + static_cast<std::uint64_t>(inst));
    spec.factor_correlation(0, 1) = spec.factor_correlation(1, 0) = 0.6;
    const auto table = oracle_sample(spec, 2000, 300 + static_cast<std::uint64_t>(inst));
    const std::vector<std::string> target{"au1"};
    const auto base = fit_direction_bank(table, target, false, 10.0).get("au1");
    const auto cond = fit_direction_bank(table, target, true, 10.0).get("au1");
    const Vector axis2 = spec.latent_axis(1);
    const double gap = std::abs(base.unit().dot(axis2)) - std::abs(cond.unit().dot(axis2));
    worst_gap = std::min(worst_gap, gap);
    wins += gap > 0.0;
  }
  return {wins == kInstances, std::to_string(wins) + "/" + std::to_string(kInstances) +
                                  " instances with smaller f2 alignment, min reduction " + fmt(worst_gap)};
}

Outcome projection_exactness() {
  const auto start = Clock::now();
  double max_dot = 0.0, max_idem = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const Matrix m = random_codes(32, 6, 400 + trial);
    std::vector<Direction> nuisance;
    for (int j = 0; j < 5; ++j) nuisance.push_back(Direction::from_raw("n" + std::to_string(j), m.col(j), 0, {}));
    const auto basis = orthonormalize(nuisance, 32);
    const auto p = project_out(Direction::from_raw("t", m.col(5), 0, {}), basis);
    for (int e = 0; e < 5; ++e) max_dot = std::max(max_dot, std::abs(p.unit().dot(basis.basis[static_cast<std::size_t>(e)])));
    max_idem = std::max(max_idem, (project_out(p, basis).unit() - p.unit()).cwiseAbs().maxCoeff());
  }
  Vector a(2), b(2);
  a << 1, 1;
  b << 1, 0;
  const std::vector<Direction> hand{Direction::from_raw("x", b, 0, {})};
  const auto h = project_out(Direction::from_raw("t", a / std::sqrt(2.0), 0, {}), orthonormalize(hand, 2));
  const double hand_err = std::max(std::abs(h.unit()[0]), std::abs(h.unit()[1] - 1.0));
  const double elapsed = seconds_since(start);
  const bool pass = max_dot < 1e-9 && max_idem < 1e-9 && hand_err < 1e-12 && elapsed < 1.0;
  return {pass, "max |dot| " + fmt(max_dot, 3) + ", idempotency " + fmt(max_idem, 3) + ", hand case error " +
                    fmt(hand_err, 3) + ", runtime " + fmt(elapsed, 3) + " s (< 1)"};
}

Outcome edit_calibration() {
  const auto spec = entangled_oracle_spec();
  const auto table = oracle_sample(spec, 2000, 501);
  const auto au = table.names_with_role(AttributeRole::au);
  const Matrix codes = random_codes(1000, static_cast<Eigen::Index>(spec.dimension()), 502);
  std::mt19937_64 rng(503);
  std::uniform_real_distribution<double> step(-2.0, 2.0);
  const std::vector<std::string> demo{"gender", "age", "eyeglasses"};
  std::vector<Direction> nuisance;
  for (const auto& p : fit_attribute_predictors(table, demo, 10.0, 1e-2)) nuisance.push_back(extract_direction(p));
  const auto basis = orthonormalize(nuisance, spec.dimension());

  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& name : au) {
    const auto peers = peer_covariates(table, name);
    const auto base_pred = fit_ridge(table, name, {}, 10.0);
    const auto cond_pred = fit_ridge(table, name, peers, 10.0);
    const auto cond_dir = extract_direction(cond_pred);
    const std::vector<std::pair<const LinearPredictor*, Direction>> cases{
        {&base_pred, extract_direction(base_pred)}, {&cond_pred, cond_dir}, {&cond_pred, project_out(cond_dir, basis)}};
    const std::vector<double> cov(peers.size(), 0.25);
    for (const auto& [pred, dir] : cases) {
      for (Eigen::Index i = 0; i < codes.rows(); ++i) {
        const double s = step(rng);
        const LatentCode code(codes.row(i).transpose());
        const auto edited = apply_edit(code, dir, s);
        const std::span<const double> cv = pred->covariates.empty() ? std::span<const double>() : std::span(cov);
        const double change = affine_value(*pred, edited.z, cv) - affine_value(*pred, code.z, cv);
        worst = std::max(worst, std::abs(change - s));
        ++checked;
      }
    }
  }
  return {worst < 1e-9, "max |output change - step| " + fmt(worst, 3) + " over " + std::to_string(checked) +
                            " edits (base, conditioned, projected directions)"};
}

// The six-AU oracle of the fidelity check plus two demographic factors.
OracleSpec neutralization_oracle_spec() {
  auto s = independent_au_spec(6, 32, 0.05, 101);
  s.factors.push_back({"gender", AttributeRole::demographic, AttributeKind::binary, 0.5});
  s.factors.push_back({"age", AttributeRole::demographic, AttributeKind::continuous, 1.0});
  s.factor_correlation = Matrix::Identity(8, 8);
  s.mixing = random_orthonormal_mixing(32, 8, 1.0, 101);
  return s;
}

Outcome neutralization_effectiveness() {
  const auto start = Clock::now();
  const auto config = default_experiment_config();
  const auto spec = neutralization_oracle_spec();
  const auto table = oracle_sample(spec, 5000, 601);
  auto nz_config = config.neutralizer;
  nz_config.seed = 602;
  const auto model = train_neutralizer(table, nz_config).model;

  std::vector<std::size_t> au_factors;
  for (std::size_t f = 0; f < spec.factor_count(); ++f) {
    if (spec.factors[f].role == AttributeRole::au) au_factors.push_back(f);
  }
  OracleStream stream(spec, 603);
  std::mt19937_64 rng(604);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, au_factors.size() - 1);
  std::uniform_real_distribution<double> level(0.6, 1.0);

  int successes = 0;
  double worst_grad = 0.0;
  constexpr int kSamples = 100;
  for (int s = 0; s < kSamples; ++s) {
    Vector factors;
    LatentCode drawn;
    stream.draw(factors, drawn);
    for (auto f : au_factors) factors[static_cast<Eigen::Index>(f)] = 0.0;
    factors[static_cast<Eigen::Index>(au_factors[pick(rng)])] = level(rng);
    Vector z = spec.encode(factors);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += spec.noise_sigma * noise(rng);
    const LatentCode code(z, drawn.tag);

    auto options = config.neutralize;
    options.seed = mix_seed(605, static_cast<std::uint64_t>(s));
    const auto result = neutralize(code, model, options);
    const Vector pred = model.predict_aus(result.z_neutral.z);
    const Matrix recovered = spec.recover_factors(result.z_neutral.z.transpose());
    bool ok = (pred.array() < 0.1).all();
    for (auto f : au_factors) ok = ok && recovered(0, static_cast<Eigen::Index>(f)) < 0.2;
    successes += ok;

    if (s < 5) {
      const Vector targets = model.static_logits(z);
      const Vector probe = z + 0.1 * Vector::NullaryExpr(z.size(), [&] { return noise(rng); });
      const auto value = neutralization_objective(model, probe, z, targets, options.lambda);
      Vector fd(z.size());
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        Vector up = probe, down = probe;
        up[i] += h;
        down[i] -= h;
        fd[i] = (neutralization_objective(model, up, z, targets, options.lambda).value -
                 neutralization_objective(model, down, z, targets, options.lambda).value) /
                (2 * h);
      }
      worst_grad = std::max(worst_grad, (value.gradient - fd).norm() / std::max(fd.norm(), 1e-12));
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = successes >= 95 && worst_grad < 1e-4 && elapsed < 120.0;
  return {pass, std::to_string(successes) + "/" + std::to_string(kSamples) +
                    " samples neutral (need >= 95), gradient relative error " + fmt(worst_grad, 3) +
                    " (< 1e-4), runtime " + fmt(elapsed, 3) + " s (< 120)"};
}

Outcome stop_policy() {
  StopMonitor monitor(StopPolicy{});
  while (!monitor.push(0.5)) {
  }
  const auto policy = StopPolicy{};
  const std::size_t expected = policy.window + policy.horizon;
  return {monitor.steps() == expected && !monitor.hit_max_steps(),
          "flat trace stopped after " + std::to_string(monitor.steps()) + " steps (expected " + std::to_string(expected) + ")"};
}

Outcome balanced_augmentation() {
  const auto spec = entangled_oracle_spec();
  const auto table = oracle_sample(spec, 2000, 701);
  const auto au = table.names_with_role(AttributeRole::au);
  const auto bank = fit_direction_bank(table, au, true, 10.0);
  const AugmentationPlan plan;
  const auto edited = build_edited_set(table.select_rows(neutral_rows(table, plan.neutral_threshold)), bank, plan);
  const Matrix positives = binarize(edited.labels(), plan.neutral_threshold);
  std::vector<double> counts;
  for (const auto& name : au) counts.push_back(positives.col(static_cast<Eigen::Index>(edited.index_of(name))).sum());
  const bool equal = !counts.empty() && counts.front() > 0 &&
                     std::all_of(counts.begin(), counts.end(), [&](double c) { return c == counts.front(); });
  std::string list;
  for (double c : counts) list += (list.empty() ? "" : ",") + fmt(c, 10);
  return {equal, "per-AU positive counts " + list};
}

Outcome downstream_direction() {
  const auto start = Clock::now();
  const auto config = default_experiment_config();
  int f1_wins = 0, fpr_wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentWorld world(config, seed);
    const auto base = run_scenario(world, Scenario::baseline);
    const auto aug = run_scenario(world, Scenario::augmented);
    f1_wins += aug.f1.macro > base.f1.macro;
    fpr_wins += aug.pair.mean < base.pair.mean;
    detail += " [seed " + std::to_string(seed) + ": F1 " + fmt(base.f1.macro, 3) + "->" + fmt(aug.f1.macro, 3) +
              ", pair-FPR " + fmt(base.pair.mean, 3) + "->" + fmt(aug.pair.mean, 3) + "]";
  }
  const double elapsed = seconds_since(start);
  const bool pass = f1_wins >= 4 && fpr_wins >= 4 && elapsed < 600.0;
  return {pass, "macro-F1 better in " + std::to_string(f1_wins) + "/5, pair-FPR lower in " + std::to_string(fpr_wins) +
                    "/5 (need >= 4 each), runtime " + fmt(elapsed, 3) + " s (< 600);" + detail};
}

Outcome pow3_recovery() {
  std::vector<LearningPoint> points;
  for (double n : {10.0, 30.0, 100.0, 300.0, 1000.0}) points.push_back({n, 0.6 - 0.5 * std::pow(n, -0.4)});
  const auto fit = fit_pow3(points);
  const double param_err = std::max({std::abs(fit.a - 0.6), std::abs(fit.b - 0.5), std::abs(fit.c - 0.4)});
  Pow3Fit exact;
  exact.a = 0.6;
  exact.b = 0.5;
  exact.c = 0.4;
  double inv_err = 0.0;
  for (double score : {0.3, 0.45, 0.55, 0.59}) {
    const double analytic = std::pow((exact.a - score) / exact.b, -1.0 / exact.c);
    inv_err = std::max(inv_err, std::abs(data_multiplier(exact, score, 50.0) - analytic / 50.0));
  }
  return {param_err < 1e-3 && inv_err < 1e-6,
          "fit (" + fmt(fit.a, 6) + ", " + fmt(fit.b, 6) + ", " + fmt(fit.c, 6) + "), max parameter error " +
              fmt(param_err, 3) + " (< 1e-3), multiplier error " + fmt(inv_err, 3) + " (< 1e-6)"};
}

// Twelve AUs in three co-activating groups of four, plus two demographics.
OracleSpec coactivation_oracle_spec() {
  OracleSpec s;
  constexpr int k = 12;
  for (int i = 0; i < k; ++i) s.factors.push_back({"au" + std::to_string(i + 1), AttributeRole::au, AttributeKind::continuous, 0.3});
  s.factors.push_back({"gender", AttributeRole::demographic, AttributeKind::binary, 0.5});
  s.factors.push_back({"age", AttributeRole::demographic, AttributeKind::continuous, 1.0});
  s.factor_correlation = Matrix::Identity(k + 2, k + 2);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i != j && i / 4 == j / 4) s.factor_correlation(i, j) = 0.85;
    }
  }
  s.mixing = random_orthonormal_mixing(32, k + 2, 1.0, 7);
  s.noise_sigma = 0.15;
  return s;
}

double mean_abs_au_correlation(const OracleSpec& spec, const AttributeTable& table, std::span<const std::string> au) {
  const Matrix factors = spec.recover_factors(table.codes());
  Matrix cols(factors.rows(), static_cast<Eigen::Index>(au.size()));
  for (std::size_t j = 0; j < au.size(); ++j) {
    cols.col(static_cast<Eigen::Index>(j)) = factors.col(static_cast<Eigen::Index>(spec.factor_index(au[j])));
  }
  return correlation_matrix(cols).mean_abs_offdiag;
}

Outcome correlation_mechanism() {
  auto config = default_experiment_config();
  config.oracle = coactivation_oracle_spec();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentWorld world(config, seed);
    const std::vector<AttributeTable> parts{world.edited_set(), world.synthetic_set().table};
    const auto generated = concat(parts);
    const double raw = mean_abs_au_correlation(config.oracle, world.train(), world.au_names());
    const double gen = mean_abs_au_correlation(config.oracle, generated, world.au_names());
    wins += gen < raw;
    detail += " [seed " + std::to_string(seed) + ": " + fmt(raw, 3) + "->" + fmt(gen, 3) + "]";
  }
  return {wins == 5, std::to_string(wins) + "/5 seeds with lower mean |corr| of recovered AU factors in generated tables;" + detail};
}

// ---------------------------------------------------------------------------

int cli(const std::vector<std::string>& args, std::string& err_text) {
  std::vector<const char*> argv{"lsedit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) err_text += err.str();
  return code;
}

const char* kReproOracle =
    "dimension=12\nnoise_sigma=0.1\nfactors=au1,au2,au3,gender,age\nfactor.au1.rate=0.4\nfactor.au2.rate=0.3\n"
    "factor.au3.rate=0.2\nfactor.gender.role=demographic\nfactor.gender.kind=binary\nfactor.gender.rate=0.5\n"
    "factor.age.role=demographic\ncorrelation.au1.au2=0.6\nmixing.seed=3\n";

const char* kReproExperiment =
    "experiment.train_rows=1500\nexperiment.val_rows=200\nexperiment.test_rows=300\nexperiment.synthetic.per_cell=2\n"
    "experiment.neutralizer.width=32\nexperiment.neutralizer.max_epochs=40\nexperiment.detector.hidden=16\n"
    "experiment.detector.max_epochs=10\nexperiment.learning_curve=true\n";

// Runs every command in `dir` with relative paths; returns the commands that failed.
std::string run_all_commands(const std::filesystem::path& dir) {
  const auto previous = std::filesystem::current_path();
  std::filesystem::create_directories(dir);
  std::filesystem::current_path(dir);
  write_text_file("oracle.cfg", kReproOracle);
  write_text_file("experiment.cfg", kReproExperiment);
  write_text_file("curve.txt", "100 0.41\n200 0.47\n400 0.52\n800 0.55\n1600 0.57\n");
  const std::vector<std::vector<std::string>> commands{
      {"sample", "--oracle", "oracle.cfg", "--n", "600", "--out", "raw.tbl", "--seed", "5"},
      {"fit-directions", "--table", "raw.tbl", "--targets", "au1,au2,au3,gender,age", "--condition-on-peers", "--out",
       "bank.dir", "--predictors-out", "pred.txt"},
      {"project", "--bank", "bank.dir", "--target", "au1,au2,au3", "--against", "gender,age", "--out", "proj.dir"},
      {"edit", "--table", "raw.tbl", "--bank", "proj.dir", "--set", "au1=+1,au3=0.5", "--out", "edited.tbl"},
      {"train-neutralizer", "--table", "raw.tbl", "--out", "model.nz", "--seed", "6", "--width", "16", "--max-epochs", "20"},
      {"sample", "--oracle", "oracle.cfg", "--n", "4", "--out", "few.tbl", "--seed", "7"},
      {"neutralize", "--table", "few.tbl", "--model", "model.nz", "--out", "neutral.tbl", "--trace", "traces", "--seed", "8"},
      {"sample-balanced", "--filter", "gender,age3", "--per-cell", "5", "--predictors", "pred.txt", "--oracle", "oracle.cfg",
       "--out", "balanced.tbl", "--seed", "9"},
      {"metrics", "corr", "--table", "raw.tbl", "--oracle", "oracle.cfg", "--out", "corr.txt"},
      {"metrics", "f1", "--pred", "neutral.tbl", "--truth", "few.tbl", "--out", "f1.txt"},
      {"metrics", "pair-fpr", "--pred", "edited.tbl", "--truth", "raw.tbl", "--out", "fpr.txt"},
      {"metrics", "mae", "--edited", "edited.tbl", "--target", "raw.tbl", "--count-column", "gender", "--out", "mae.txt"},
      {"metrics", "learning-curve", "--points", "curve.txt", "--reference", "0.6", "--n-current", "1600", "--out", "pow3.txt"},
      {"--config", "experiment.cfg", "experiment", "run", "--scenario", "all", "--seeds", "1", "--seed", "10", "--out", "exp"},
  };
  std::string failed;
  for (const auto& c : commands) {
    std::string err;
    if (cli(c, err) != 0) failed += " '" + c.front() + (c.size() > 1 ? " " + c[1] : "") + "': " + err;
  }
  std::filesystem::current_path(previous);
  return failed;
}

Outcome reproducibility() {
  const auto root = std::filesystem::temp_directory_path() / ("lsedit_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  const std::string fail_a = run_all_commands(root / "a");
  const std::string fail_b = run_all_commands(root / "b");
  if (!fail_a.empty() || !fail_b.empty()) {
    std::filesystem::remove_all(root);
    return {false, "command failed:" + fail_a + fail_b};
  }
  std::size_t files = 0;
  std::string differing;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), root / "a");
    const auto other = root / "b" / rel;
    ++files;
    if (!std::filesystem::exists(other) || read_text_file(entry.path()) != read_text_file(other)) {
      differing += " " + rel.string();
    }
  }
  std::filesystem::remove_all(root);
  return {differing.empty() && files > 0,
          std::to_string(files) + " output files compared across two runs of 14 commands" +
              (differing.empty() ? ", all byte-identical" : "; differing:" + differing)};
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  run_criterion(1, "direction fidelity", direction_fidelity);
  run_criterion(2, "conditioning reduces leakage", conditioning_reduces_leakage);
  run_criterion(3, "projection exactness", projection_exactness);
  run_criterion(4, "edit calibration", edit_calibration);
  run_criterion(5, "neutralization effectiveness", neutralization_effectiveness);
  run_criterion(6, "stop policy", stop_policy);
  run_criterion(7, "balanced augmentation", balanced_augmentation);
  run_criterion(8, "downstream direction of effect", downstream_direction);
  run_criterion(9, "learning-curve recovery", pow3_recovery);
  run_criterion(10, "correlation report mechanism", correlation_mechanism);
  run_criterion(11, "reproducibility", reproducibility);
  std::printf("%d of %d criteria failed\n", failures, ran);
  return failures == 0 ? 0 : 1;
}
