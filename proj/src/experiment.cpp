#include "lsedit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lsedit/editor.hpp"
#include "lsedit/errors.hpp"
#include "lsedit/geometry.hpp"
#include "lsedit/table_io.hpp"

namespace lsedit {

namespace {

std::vector<std::size_t> au_columns(const AttributeTable& table) { return table.indices_with_role(AttributeRole::au); }

// Edits every row once per AU (times copies) without checking neutrality.
AttributeTable edit_each_au(const AttributeTable& source, const DirectionBank& bank, const AugmentationPlan& plan,
                            double synthetic_flag) {
  if (source.find(kSyntheticColumn)) {
    throw ValidationError("table already has a '" + std::string(kSyntheticColumn) + "' column");
  }
  auto attributes = source.attributes();
  attributes.push_back({std::string(kSyntheticColumn), AttributeKind::binary, AttributeRole::nuisance});
  const auto aus = au_columns(source);
  std::vector<const Direction*> dirs;
  for (auto j : aus) {
    const auto& name = source.attributes()[j].name;
    if (!bank.contains(name)) throw ValidationError("direction bank has no direction for AU '" + name + "'");
    dirs.push_back(&bank.get(name));
  }
  AttributeTable::Builder out(source.dimension(), attributes);
  const auto m = static_cast<Eigen::Index>(source.attribute_count());
  for (std::size_t r = 0; r < source.rows(); ++r) {
    const auto code = source.code(r);
    Vector labels(m + 1);
    labels.head(m) = source.label_row(r);
    labels[m] = synthetic_flag;
    for (auto j : aus) labels[static_cast<Eigen::Index>(j)] = 0.0;
    for (std::size_t a = 0; a < aus.size(); ++a) {
      const auto edited = apply_edit(code, *dirs[a], plan.step);
      Vector row = labels;
      row[static_cast<Eigen::Index>(aus[a])] = 1.0;
      for (std::size_t c = 0; c < plan.copies_per_au; ++c) out.add(edited, row);
    }
  }
  return out.build();
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string real_or_na(double v) { return std::isnan(v) ? "NA" : format_real(v); }

}  // namespace

std::vector<std::size_t> neutral_rows(const AttributeTable& table, double threshold) {
  const auto aus = au_columns(table);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    bool neutral = true;
    for (auto j : aus) neutral = neutral && table.labels()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) < threshold;
    if (neutral) rows.push_back(r);
  }
  return rows;
}

AttributeTable build_edited_set(const AttributeTable& neutral, const DirectionBank& bank, const AugmentationPlan& plan) {
  if (au_columns(neutral).empty()) throw ValidationError("edited set: table has no AU attributes");
  const auto ok = neutral_rows(neutral, plan.neutral_threshold);
  if (ok.size() != neutral.rows()) {
    std::size_t bad = 0;
    while (bad < ok.size() && ok[bad] == bad) ++bad;
    throw ValidationError("edited set: row " + std::to_string(bad) + " is not neutral (an AU label is >= " +
                          format_real(plan.neutral_threshold) + ")");
  }
  return edit_each_au(neutral, bank, plan, 0.0);
}

SyntheticSet build_synthetic_set(GeneratorSource& source, std::span<const LinearPredictor> predictors,
                                 const NeutralizerModel& neutralizer, const DirectionBank& bank,
                                 const AugmentationPlan& plan, const SyntheticSetOptions& options) {
  if (neutralizer.dimension() != source.dimension()) throw ValidationError("synthetic set: neutralizer dimension mismatch");
  const auto plan_cells = balanced_demographic_plan(options.cells, options.per_cell);
  const std::size_t target = plan_cells.size() * options.per_cell;
  const auto allowed = static_cast<std::size_t>(std::floor(options.max_failure_rate * static_cast<double>(target)));

  std::vector<std::size_t> au_index;
  for (const auto& name : neutralizer.au_names()) {
    std::size_t k = 0;
    while (k < source.attributes().size() && source.attributes()[k].name != name) ++k;
    if (k == source.attributes().size()) throw ValidationError("synthetic set: source lacks AU '" + name + "'");
    au_index.push_back(k);
  }

  SyntheticSet result{AttributeTable(source.dimension(), source.attributes()), 0, 0, 0};
  auto hook = [&](std::size_t, LatentCode& code, Vector& labels) {
    NeutralizeOptions o = options.neutralize;
    o.seed = mix_seed(options.neutralize.seed, result.neutralizations);
    ++result.neutralizations;
    auto neutral = neutralize(code, neutralizer, o);
    const Vector p = neutralizer.predict_aus(neutral.z_neutral.z);
    if ((p.array() < plan.neutral_threshold).all()) {
      code = std::move(neutral.z_neutral);
      for (auto k : au_index) labels[static_cast<Eigen::Index>(k)] = 0.0;
      return true;
    }
    if (++result.failures > allowed) {
      throw NumericalError("synthetic set: " + std::to_string(result.failures) + " of " +
                           std::to_string(result.neutralizations) +
                           " neutralizations left an AU prediction >= " + format_real(plan.neutral_threshold) +
                           " (bound " + format_real(options.max_failure_rate) + " of " + std::to_string(target) + ")");
    }
    return false;
  };
  auto sampled = sample_plan(source, plan_cells, predictors, options.draws_per_target * std::max<std::size_t>(target, 1), hook);
  result.draws = sampled.draws;
  result.table = edit_each_au(sampled.table, bank, plan, 1.0);
  return result;
}

// ---------------------------------------------------------------------------
// Downstream detector

Matrix DownstreamDetector::predict(const Matrix& observations) const {
  const Matrix h = nn::silu(hidden.forward(observations.transpose()));
  return nn::sigmoid(output.forward(h)).transpose();
}

Vector inverse_frequency_weights(const Matrix& labels, double threshold) {
  const auto n = static_cast<double>(labels.rows());
  if (labels.rows() == 0 || labels.cols() == 0) throw ValidationError("reweighting needs a non-empty label matrix");
  Vector w(labels.cols());
  for (Eigen::Index j = 0; j < labels.cols(); ++j) {
    const double positives = std::max(1.0, (labels.col(j).array() >= threshold).cast<double>().sum());
    w[j] = n / positives;
  }
  return w / w.mean();
}

DetectorTraining train_detector(const Matrix& train_x, const Matrix& train_y, const Matrix& val_x,
                                const Matrix& val_y, const DetectorConfig& config, const Vector& au_weights) {
  if (train_x.rows() == 0) throw ValidationError("detector: empty training set");
  if (train_x.rows() != train_y.rows() || val_x.rows() != val_y.rows()) throw ValidationError("detector: row count mismatch");
  if (val_x.rows() == 0) throw ValidationError("detector: empty validation set");
  if (train_x.cols() != val_x.cols() || train_y.cols() != val_y.cols()) {
    throw ValidationError("detector: observation or label dimension differs between training and validation");
  }
  if (config.batch_size == 0 || config.hidden == 0) throw ValidationError("detector: batch size and width must be positive");
  const auto m = train_y.cols();
  const Vector weights = au_weights.size() ? au_weights : Vector::Ones(m);
  if (weights.size() != m) throw ValidationError("detector: weight count does not match AU count");

  nn::Rng rng(config.seed);
  DetectorTraining result;
  result.model.hidden = nn::make_dense(train_x.cols(), static_cast<Eigen::Index>(config.hidden), rng);
  result.model.output = nn::make_dense(static_cast<Eigen::Index>(config.hidden), m, rng);
  DownstreamDetector current = result.model;
  nn::Dense params[2];
  nn::Dense grads[2];
  nn::Adam adam(nn::AdamConfig{config.learning_rate});

  const Matrix xt = train_x.transpose();
  const Matrix yt = train_y.transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_x.rows()));
  std::iota(order.begin(), order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::size_t since = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto b = static_cast<Eigen::Index>(end - start);
      Matrix x(xt.rows(), b), y(m, b);
      for (Eigen::Index k = 0; k < b; ++k) {
        x.col(k) = xt.col(order[start + static_cast<std::size_t>(k)]);
        y.col(k) = yt.col(order[start + static_cast<std::size_t>(k)]);
      }
      const Matrix pre = current.hidden.forward(x);
      const Matrix h = nn::silu(pre);
      const Matrix p = nn::sigmoid(current.output.forward(h));
      const double scale = 2.0 / static_cast<double>(b * m);
      const Matrix d_out =
          (weights.asDiagonal() * ((p - y).array() * p.array() * (1.0 - p.array())).matrix()) * scale;
      grads[0] = nn::zeros_like(current.hidden);
      grads[1] = nn::zeros_like(current.output);
      nn::accumulate(grads[1], d_out, h);
      const Matrix d_h = (current.output.weight.transpose() * d_out).cwiseProduct(nn::silu_derivative(pre));
      nn::accumulate(grads[0], d_h, x);
      params[0] = std::move(current.hidden);
      params[1] = std::move(current.output);
      adam.step(nn::param_refs(params, grads));
      current.hidden = std::move(params[0]);
      current.output = std::move(params[1]);
    }
    if (!current.hidden.weight.allFinite() || !current.output.weight.allFinite()) {
      throw NumericalError("detector: non-finite weights at epoch " + std::to_string(epoch));
    }
    const double loss = (current.predict(val_x) - val_y).squaredNorm() / static_cast<double>(val_y.size());
    result.val_loss.push_back(loss);
    if (loss < best) {
      best = loss;
      result.model = current;
      result.best_epoch = epoch;
      since = 0;
    } else if (++since >= config.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Scenarios and configuration

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::baseline: return "baseline";
    case Scenario::augmented: return "augmented";
    case Scenario::reweighted: return "reweighted";
    case Scenario::edited_only: return "edited_only";
    case Scenario::synthetic_only: return "synthetic_only";
    case Scenario::combined: return "combined";
  }
  return "baseline";
}

std::vector<Scenario> all_scenarios() {
  return {Scenario::baseline, Scenario::augmented, Scenario::reweighted,
          Scenario::edited_only, Scenario::synthetic_only, Scenario::combined};
}

Scenario parse_scenario(std::string_view text) {
  for (auto s : all_scenarios()) {
    if (to_string(s) == text) return s;
  }
  throw UsageError("unknown scenario '" + std::string(text) +
                   "' (expected baseline, augmented, reweighted, edited_only, synthetic_only or combined)");
}

OracleSpec entangled_oracle_spec() {
  OracleSpec spec;
  const double rates[] = {0.40, 0.30, 0.20, 0.10, 0.05, 0.02};
  for (int i = 0; i < 6; ++i) {
    spec.factors.push_back({"au" + std::to_string(i + 1), AttributeRole::au, AttributeKind::continuous, rates[i]});
  }
  spec.factors.push_back({"gender", AttributeRole::demographic, AttributeKind::binary, 0.5});
  spec.factors.push_back({"age", AttributeRole::demographic, AttributeKind::continuous, 1.0});
  spec.factors.push_back({"eyeglasses", AttributeRole::nuisance, AttributeKind::binary, 0.3});
  const auto k = static_cast<Eigen::Index>(spec.factors.size());
  spec.factor_correlation = Matrix::Identity(k, k);
  // A frequent AU paired with a rare one, twice.
  spec.factor_correlation(0, 4) = spec.factor_correlation(4, 0) = 0.6;
  spec.factor_correlation(1, 5) = spec.factor_correlation(5, 1) = 0.6;
  spec.mixing = random_orthonormal_mixing(32, static_cast<std::size_t>(k), 1.0, 7);
  spec.noise_sigma = 0.15;
  spec.observation = ObservationMapSpec{{64, 48}, 11, 2.0};
  spec.validate();
  return spec;
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.oracle = entangled_oracle_spec();
  c.neutralizer.width = 64;
  c.neutralizer.max_epochs = 100;
  c.neutralize.stop.max_steps = 1000;
  return c;
}

ExperimentConfig experiment_config_from(const KeyValueConfig& cfg, std::string_view prefix,
                                        std::span<const std::string> ignored_prefixes) {
  const std::string p(prefix);
  ExperimentConfig c = default_experiment_config();
  if (cfg.has(p + "oracle.dimension")) c.oracle = oracle_spec_from_config(cfg, p + "oracle.");
  c.train_rows = cfg.get_count(p + "train_rows", c.train_rows);
  c.val_rows = cfg.get_count(p + "val_rows", c.val_rows);
  c.test_rows = cfg.get_count(p + "test_rows", c.test_rows);
  c.alpha = cfg.get_real(p + "alpha", c.alpha);
  c.logistic_l2 = cfg.get_real(p + "logistic_l2", c.logistic_l2);
  c.condition_on_peers = cfg.get_bool(p + "condition_on_peers", c.condition_on_peers);
  c.project_nuisance = cfg.get_bool(p + "project_nuisance", c.project_nuisance);
  c.threshold = cfg.get_real(p + "threshold", c.threshold);
  c.plan.neutral_threshold = c.threshold;
  c.neutralizer.recall_threshold = c.threshold;
  c.plan.step = cfg.get_real(p + "edit.step", c.plan.step);
  c.plan.copies_per_au = cfg.get_count(p + "edit.copies_per_au", c.plan.copies_per_au);
  c.max_edit_sources = cfg.get_count(p + "edit.max_sources", c.max_edit_sources);
  c.balance_filter = cfg.get_string(p + "synthetic.filter", c.balance_filter);
  c.per_cell = cfg.get_count(p + "synthetic.per_cell", c.per_cell);
  c.max_failure_rate = cfg.get_real(p + "synthetic.max_failure_rate", c.max_failure_rate);
  c.neutralizer.width = cfg.get_count(p + "neutralizer.width", c.neutralizer.width);
  c.neutralizer.learning_rate = cfg.get_real(p + "neutralizer.learning_rate", c.neutralizer.learning_rate);
  c.neutralizer.batch_size = cfg.get_count(p + "neutralizer.batch_size", c.neutralizer.batch_size);
  c.neutralizer.patience = cfg.get_count(p + "neutralizer.patience", c.neutralizer.patience);
  c.neutralizer.max_epochs = cfg.get_count(p + "neutralizer.max_epochs", c.neutralizer.max_epochs);
  c.neutralizer.validation_fraction = cfg.get_real(p + "neutralizer.validation_fraction", c.neutralizer.validation_fraction);
  const auto monitor = cfg.get_string(p + "neutralizer.monitor", "balanced");
  if (monitor != "balanced" && monitor != "positive") {
    throw ValidationError("key '" + p + "neutralizer.monitor' must be balanced or positive");
  }
  c.neutralizer.monitor = monitor == "positive" ? RecallMonitor::positive : RecallMonitor::balanced;
  c.neutralize.lambda = cfg.get_real(p + "neutralize.lambda", c.neutralize.lambda);
  c.neutralize.dropout = cfg.get_real(p + "neutralize.dropout", c.neutralize.dropout);
  c.neutralize.learning_rate = cfg.get_real(p + "neutralize.learning_rate", c.neutralize.learning_rate);
  c.neutralize.stop.window = cfg.get_count(p + "neutralize.window", c.neutralize.stop.window);
  c.neutralize.stop.horizon = cfg.get_count(p + "neutralize.horizon", c.neutralize.stop.horizon);
  c.neutralize.stop.min_decrease = cfg.get_real(p + "neutralize.min_decrease", c.neutralize.stop.min_decrease);
  c.neutralize.stop.max_steps = cfg.get_count(p + "neutralize.max_steps", c.neutralize.stop.max_steps);
  c.detector.hidden = cfg.get_count(p + "detector.hidden", c.detector.hidden);
  c.detector.learning_rate = cfg.get_real(p + "detector.learning_rate", c.detector.learning_rate);
  c.detector.batch_size = cfg.get_count(p + "detector.batch_size", c.detector.batch_size);
  c.detector.max_epochs = cfg.get_count(p + "detector.max_epochs", c.detector.max_epochs);
  c.detector.patience = cfg.get_count(p + "detector.patience", c.detector.patience);
  c.learning_curve = cfg.get_bool(p + "learning_curve", c.learning_curve);
  if (cfg.has(p + "curve_fractions")) c.curve_fractions = cfg.get_real_list(p + "curve_fractions");
  c.neutralize.stop.validate();
  for (double f : c.curve_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("key '" + p + "curve_fractions': fractions must be in (0, 1]");
  }
  for (const auto& key : cfg.unused_keys()) {
    if (key.rfind(p, 0) != 0) continue;
    const bool ignored = std::any_of(ignored_prefixes.begin(), ignored_prefixes.end(),
                                     [&](const std::string& ip) { return key.rfind(ip, 0) == 0; });
    if (!ignored) throw UsageError("unknown configuration key '" + key + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// World

ExperimentWorld::ExperimentWorld(ExperimentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      train_(oracle_sample(config_.oracle, config_.train_rows, mix_seed(seed, 1))),
      val_(oracle_sample(config_.oracle, config_.val_rows, mix_seed(seed, 2))),
      test_(oracle_sample(config_.oracle, config_.test_rows, mix_seed(seed, 3))),
      au_names_(train_.names_with_role(AttributeRole::au)),
      bank_(train_.dimension()),
      observation_(config_.oracle) {
  if (au_names_.empty()) throw ValidationError("experiment oracle has no AU factors");
  bank_ = fit_direction_bank(train_, au_names_, config_.condition_on_peers, config_.alpha);
  std::vector<std::string> others;
  for (const auto& a : train_.attributes()) {
    if (a.role != AttributeRole::au) others.push_back(a.name);
  }
  if (config_.project_nuisance && !others.empty()) {
    std::vector<Direction> nuisance;
    for (const auto& name : others) {
      const auto& meta = train_.attribute(name);
      nuisance.push_back(extract_direction(meta.kind == AttributeKind::binary
                                               ? fit_logistic(train_, name, {}, config_.logistic_l2)
                                               : fit_ridge(train_, name, {}, config_.alpha)));
    }
    const auto basis = orthonormalize(nuisance, train_.dimension());
    for (const auto& name : au_names_) bank_.put(project_out(bank_.get(name), basis));
  }
  std::vector<std::string> demographic = train_.names_with_role(AttributeRole::demographic);
  predictors_ = fit_attribute_predictors(train_, demographic, config_.alpha, config_.logistic_l2);
}

Matrix ExperimentWorld::observe(const AttributeTable& table) const { return observation_.observe(table.codes()); }

Matrix ExperimentWorld::au_labels(const AttributeTable& table) const {
  Matrix y(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(au_names_.size()));
  for (std::size_t j = 0; j < au_names_.size(); ++j) {
    y.col(static_cast<Eigen::Index>(j)) = table.column(au_names_[j]);
  }
  return y;
}

const AttributeTable& ExperimentWorld::edited_set() {
  if (!edited_) {
    auto rows = neutral_rows(train_, config_.plan.neutral_threshold);
    if (config_.max_edit_sources && rows.size() > config_.max_edit_sources) rows.resize(config_.max_edit_sources);
    edited_ = build_edited_set(train_.select_rows(rows), bank_, config_.plan);
  }
  return *edited_;
}

const TrainedNeutralizer& ExperimentWorld::neutralizer() {
  if (!neutralizer_) {
    NeutralizerConfig nc = config_.neutralizer;
    nc.seed = mix_seed(seed_, 4);
    neutralizer_ = train_neutralizer(train_, nc);
  }
  return *neutralizer_;
}

const SyntheticSet& ExperimentWorld::synthetic_set() {
  if (!synthetic_) {
    const auto& model = neutralizer().model;
    SyntheticSetOptions options;
    options.cells = parse_cell_attributes(config_.balance_filter, predictors_);
    options.per_cell = config_.per_cell;
    options.neutralize = config_.neutralize;
    options.neutralize.seed = mix_seed(seed_, 5);
    options.max_failure_rate = config_.max_failure_rate;
    auto source = GeneratorSource::oracle(config_.oracle, mix_seed(seed_, 6));
    synthetic_ = build_synthetic_set(source, predictors_, model, bank_, config_.plan, options);
  }
  return *synthetic_;
}

const std::vector<LearningPoint>& ExperimentWorld::learning_curve() {
  if (!curve_) {
    std::vector<std::size_t> order(train_.rows());
    std::iota(order.begin(), order.end(), 0);
    nn::Rng rng(mix_seed(seed_, 7));
    std::shuffle(order.begin(), order.end(), rng);
    const Matrix val_x = observe(val_), val_y = au_labels(val_);
    const Matrix test_x = observe(test_), test_y = au_labels(test_);
    DetectorConfig dc = config_.detector;
    dc.seed = mix_seed(seed_, 8);
    std::vector<LearningPoint> points;
    for (double f : config_.curve_fractions) {
      const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(order.size()))));
      const std::vector<std::size_t> rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n, order.size())));
      const auto subset = train_.select_rows(rows);
      const auto trained = train_detector(observe(subset), au_labels(subset), val_x, val_y, dc);
      const auto f1 = f1_scores(trained.model.predict(test_x), test_y, config_.threshold);
      points.push_back({static_cast<double>(rows.size()), f1.macro});
    }
    curve_ = std::move(points);
  }
  return *curve_;
}

ScenarioResult run_scenario(ExperimentWorld& world, Scenario scenario) {
  const auto& cfg = world.config();
  const bool use_edited = scenario == Scenario::augmented || scenario == Scenario::edited_only || scenario == Scenario::combined;
  const bool use_synthetic =
      scenario == Scenario::augmented || scenario == Scenario::synthetic_only || scenario == Scenario::combined;
  const bool reweight = scenario == Scenario::reweighted || scenario == Scenario::combined;

  ScenarioResult r;
  r.scenario = scenario;
  r.seed = world.seed();
  std::vector<Matrix> xs{world.observe(world.train())};
  std::vector<Matrix> ys{world.au_labels(world.train())};
  r.real_rows = world.train().rows();
  if (use_edited) {
    const auto& e = world.edited_set();
    xs.push_back(world.observe(e));
    ys.push_back(world.au_labels(e));
    r.edited_rows = e.rows();
  }
  if (use_synthetic) {
    const auto& s = world.synthetic_set().table;
    xs.push_back(world.observe(s));
    ys.push_back(world.au_labels(s));
    r.synthetic_rows = s.rows();
  }
  const auto total = static_cast<Eigen::Index>(r.real_rows + r.edited_rows + r.synthetic_rows);
  Matrix train_x(total, xs[0].cols()), train_y(total, ys[0].cols());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    train_x.middleRows(at, xs[i].rows()) = xs[i];
    train_y.middleRows(at, ys[i].rows()) = ys[i];
    at += xs[i].rows();
  }
  const Vector weights = reweight ? inverse_frequency_weights(train_y, cfg.threshold) : Vector();

  DetectorConfig dc = cfg.detector;
  dc.seed = mix_seed(world.seed(), 8);
  const auto trained = train_detector(train_x, train_y, world.observe(world.validation()),
                                      world.au_labels(world.validation()), dc, weights);
  r.best_epoch = trained.best_epoch;
  const Matrix pred = trained.model.predict(world.observe(world.test()));
  const Matrix truth = world.au_labels(world.test());
  r.f1 = f1_scores(pred, truth, cfg.threshold);
  r.pair = pair_fpr(binarize(pred, cfg.threshold), binarize(truth, cfg.threshold));

  if (cfg.learning_curve) {
    r.curve = world.learning_curve();
    try {
      r.pow3 = fit_pow3(r.curve);
      r.data_multiplier = data_multiplier(*r.pow3, r.f1.macro, static_cast<double>(r.real_rows));
    } catch (const ValidationError& e) {
      r.curve_note = e.what();
    }
  }
  return r;
}

std::string format_scenario_report(std::span<const ScenarioResult> results, std::span<const std::string> au_names) {
  if (results.empty()) throw ValidationError("scenario report needs at least one result");
  std::vector<double> f1s, fprs;
  for (const auto& r : results) {
    f1s.push_back(r.f1.macro);
    fprs.push_back(r.pair.mean);
  }
  std::ostringstream out;
  out << "report=scenario\nscenario=" << to_string(results[0].scenario) << "\nseeds=" << results.size() << '\n';
  out << "macro_f1_mean=" << real_or_na(mean_of(f1s)) << "\nmacro_f1_sd=" << real_or_na(sd_of(f1s)) << '\n';
  out << "mean_pair_fpr_mean=" << real_or_na(mean_of(fprs)) << "\nmean_pair_fpr_sd=" << real_or_na(sd_of(fprs)) << '\n';

  out << "table runs\nseed\treal_rows\tedited_rows\tsynthetic_rows\tbest_epoch\tmacro_f1\tmean_pair_fpr\tdata_multiplier\n";
  for (const auto& r : results) {
    out << r.seed << '\t' << r.real_rows << '\t' << r.edited_rows << '\t' << r.synthetic_rows << '\t' << r.best_epoch
        << '\t' << format_real(r.f1.macro) << '\t' << real_or_na(r.pair.mean) << '\t'
        << (r.data_multiplier ? format_real(*r.data_multiplier) : "NA") << '\n';
  }

  out << "table per_au_f1\nseed";
  for (const auto& n : au_names) out << '\t' << n;
  out << '\n';
  for (const auto& r : results) {
    out << r.seed;
    for (double v : r.f1.f1) out << '\t' << format_real(v);
    out << '\n';
  }

  const auto m = results[0].pair.fpr.rows();
  out << "table pair_fpr_mean\nattribute";
  for (const auto& n : au_names) out << '\t' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < m; ++i) {
    out << au_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      std::vector<double> vals;
      for (const auto& r : results) {
        if (r.pair.valid(i, j)) vals.push_back(r.pair.fpr(i, j));
      }
      out << '\t' << real_or_na(mean_of(vals));
    }
    out << '\n';
  }

  bool any_curve = false;
  for (const auto& r : results) any_curve = any_curve || !r.curve.empty();
  if (any_curve) {
    out << "table learning_curve\nseed\tn\tmacro_f1\n";
    for (const auto& r : results) {
      for (const auto& p : r.curve) out << r.seed << '\t' << format_real(p.n) << '\t' << format_real(p.score) << '\n';
    }
    out << "table pow3\nseed\ta\tb\tc\tresidual\tnote\n";
    for (const auto& r : results) {
      if (r.pow3) {
        out << r.seed << '\t' << format_real(r.pow3->a) << '\t' << format_real(r.pow3->b) << '\t'
            << format_real(r.pow3->c) << '\t' << format_real(r.pow3->residual);
      } else {
        out << r.seed << "\tNA\tNA\tNA\tNA";
      }
      out << '\t' << (r.curve_note.empty() ? "-" : r.curve_note) << '\n';
    }
  }
  return out.str();
}

}  // namespace lsedit
