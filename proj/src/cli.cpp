#include "lsedit/cli.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsedit/config.hpp"
#include "lsedit/core.hpp"
#include "lsedit/editor.hpp"
#include "lsedit/errors.hpp"
#include "lsedit/experiment.hpp"
#include "lsedit/geometry.hpp"
#include "lsedit/linfit.hpp"
#include "lsedit/metrics.hpp"
#include "lsedit/neutralizer.hpp"
#include "lsedit/oracle.hpp"
#include "lsedit/sampler.hpp"
#include "lsedit/table_io.hpp"

namespace fs = std::filesystem;

namespace lsedit::cli {

namespace {

// Everything needed to write the provenance record of one run.
class RunRecord {
 public:
  RunRecord(std::string command, CLI::App* app, std::optional<std::uint64_t> seed)
      : command_(std::move(command)), seed_(seed) {
    for (const CLI::Option* opt : app->get_options()) {
      const auto name = opt->get_single_name();
      if (name.empty() || name == "help") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = opt->get_default_str();
      }
      parameters_.emplace_back(name, value);
    }
  }

  void input(const fs::path& path) { inputs_.push_back(path); }
  void output(const fs::path& path) { outputs_.push_back(path); }

  // Writes `<output>.provenance` for every file output, or `record` when given.
  void write(const std::optional<fs::path>& record = std::nullopt) const {
    std::ostringstream out;
    out << "tool=lsedit\nversion=" << kVersion << "\ncommand=" << command_ << "\nseed="
        << (seed_ ? std::to_string(*seed_) : "-") << '\n';
    for (const auto& [k, v] : parameters_) out << "param " << k << '=' << v << '\n';
    for (const auto& p : inputs_) out << "input " << p.string() << " fnv1a=" << fnv1a_hex(read_text_file(p)) << '\n';
    for (const auto& p : outputs_) out << "output " << p.string() << " fnv1a=" << fnv1a_hex(read_text_file(p)) << '\n';
    if (record) {
      write_text_file(*record, out.str());
      return;
    }
    for (const auto& p : outputs_) write_text_file(fs::path(p.string() + ".provenance"), out.str());
  }

 private:
  std::string command_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::pair<std::string, std::string>> parameters_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

struct Command {
  CLI::App* app = nullptr;
  std::string key;  // config-key prefix, e.g. "metrics.corr"
  bool stochastic = false;
  std::optional<std::uint64_t>* seed = nullptr;
  std::function<void(RunRecord&)> run;
};

void need(const CLI::App* app, const std::string& key, const std::string& name) {
  const auto* opt = app->get_option("--" + name);
  if (opt->count() == 0) {
    throw UsageError("option --" + name + " is required (or set configuration key '" + key + "." + name + "')");
  }
}

void apply_config(Command& cmd, const KeyValueConfig& cfg) {
  for (CLI::Option* opt : cmd.app->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    const auto key = cmd.key + "." + name;
    if (opt->count() == 0 && cfg.has(key)) {
      try {
        opt->add_result(cfg.get_string(key));
        opt->run_callback();
      } catch (const CLI::Error& e) {
        throw UsageError("configuration key '" + key + "': " + e.what());
      }
    }
  }
}

Matrix columns_of(const AttributeTable& table, std::span<const std::string> names) {
  Matrix out(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = table.column(names[j]);
  return out;
}

Direction fit_single_direction(const AttributeTable& table, const std::string& target,
                               std::span<const std::string> covariates, double alpha, double l2) {
  if (table.attribute(target).kind == AttributeKind::binary) {
    return extract_direction(fit_logistic(table, target, covariates, l2));
  }
  return extract_direction(fit_ridge(table, target, covariates, alpha));
}

std::vector<LearningPoint> read_points(const fs::path& path) {
  std::vector<LearningPoint> points;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_whitespace(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() != 2) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected '<n> <score>'");
    }
    points.push_back({parse_real(fields[0], "n"), parse_real(fields[1], "score")});
  }
  return points;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-space attribute editing toolkit", "lsedit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(kVersion));
  std::string config_path;
  app.add_option("--config", config_path, "Configuration file of flat dotted keys (<command>.<option>=value)")
      ->envname(kConfigEnv);

  std::vector<Command> commands;
  auto add = [&](CLI::App* sub, std::string key, bool stochastic = false) -> Command& {
    commands.push_back(Command{sub, std::move(key), stochastic, nullptr, {}});
    return commands.back();
  };
  commands.reserve(16);

  // fit-directions -----------------------------------------------------------
  struct {
    std::string table, out, predictors_out;
    std::vector<std::string> targets, condition_on, predict;
    bool peers = false;
    double alpha = 10.0, l2 = 1e-2;
  } fd;
  {
    auto* s = app.add_subcommand("fit-directions", "Fit edit directions by (conditioned) ridge regression");
    s->add_option("--table", fd.table, "Attribute table");
    s->add_option("--targets", fd.targets, "Target attributes (default: every AU)")->delimiter(',');
    s->add_flag("--condition-on-peers", fd.peers, "Condition each target on every other AU attribute");
    s->add_option("--condition-on", fd.condition_on, "Explicit covariates for every target")->delimiter(',');
    s->add_option("--alpha", fd.alpha, "Ridge penalty");
    s->add_option("--l2", fd.l2, "Logistic L2 penalty (binary targets)");
    s->add_option("--out", fd.out, "Output direction bank");
    s->add_option("--predictors-out", fd.predictors_out, "Also write demographic predictors with bin boundaries");
    s->add_option("--predict", fd.predict, "Attributes for --predictors-out (default: demographic ones)")->delimiter(',');
    auto& c = add(s, "fit-directions");
    c.run = [&, s](RunRecord& rec) {
      need(s, "fit-directions", "table");
      need(s, "fit-directions", "out");
      if (fd.peers && !fd.condition_on.empty()) {
        throw UsageError("--condition-on-peers and --condition-on are mutually exclusive");
      }
      const auto table = load_attribute_table(fd.table);
      rec.input(fd.table);
      const auto targets = fd.targets.empty() ? table.names_with_role(AttributeRole::au) : fd.targets;
      if (targets.empty()) throw ValidationError("no target attributes (the table has no AU columns)");
      for (const auto& c : fd.condition_on) {
        if (table.attribute(c).role != AttributeRole::au) {
          err << "warning: covariate '" << c << "' is not an AU attribute; conditioning on a collider can open "
              << "spurious paths\n";
        }
      }
      DirectionBank bank(table.dimension());
      for (const auto& t : targets) {
        std::vector<std::string> covs;
        if (fd.peers) covs = peer_covariates(table, t);
        for (const auto& c : fd.condition_on) {
          if (c != t) covs.push_back(c);
        }
        bank.put(fit_single_direction(table, t, covs, fd.alpha, fd.l2));
      }
      save_direction_bank(bank, fd.out);
      rec.output(fd.out);
      out << "directions=" << bank.size() << '\n';
      if (!fd.predictors_out.empty()) {
        const auto names = fd.predict.empty() ? table.names_with_role(AttributeRole::demographic) : fd.predict;
        const auto preds = fit_attribute_predictors(table, names, fd.alpha, fd.l2);
        save_predictors(preds, table.dimension(), fd.predictors_out);
        rec.output(fd.predictors_out);
        out << "predictors=" << preds.size() << '\n';
      }
    };
  }

  // project ------------------------------------------------------------------
  struct {
    std::string bank, out;
    std::vector<std::string> targets, against;
  } pj;
  {
    auto* s = app.add_subcommand("project", "Project directions off the span of nuisance directions");
    s->add_option("--bank", pj.bank, "Direction bank");
    s->add_option("--target", pj.targets, "Directions to project")->delimiter(',');
    s->add_option("--against", pj.against, "Directions spanning the removed subspace")->delimiter(',');
    s->add_option("--out", pj.out, "Output direction bank");
    auto& c = add(s, "project");
    c.run = [&, s](RunRecord& rec) {
      need(s, "project", "bank");
      need(s, "project", "target");
      need(s, "project", "against");
      need(s, "project", "out");
      auto bank = load_direction_bank(pj.bank);
      rec.input(pj.bank);
      std::vector<Direction> nuisance;
      for (const auto& a : pj.against) nuisance.push_back(bank.get(a));
      const auto basis = orthonormalize(nuisance, bank.dimension());
      for (const auto& d : basis.dropped) err << "warning: '" << d << "' is linearly dependent on earlier directions\n";
      for (const auto& t : pj.targets) {
        const auto projected = project_out(bank.get(t), basis);
        if (projected.degenerate()) err << "warning: '" << t << "' lies inside the projected span (degenerate)\n";
        bank.put(projected);
      }
      save_direction_bank(bank, pj.out);
      rec.output(pj.out);
      out << "projected=" << pj.targets.size() << " basis=" << basis.basis.size() << '\n';
    };
  }

  // edit ---------------------------------------------------------------------
  struct {
    std::string table, bank, set, out, mode = "relative";
  } ed;
  {
    auto* s = app.add_subcommand("edit", "Apply calibrated edits to every code of a table");
    s->add_option("--table", ed.table, "Attribute table");
    s->add_option("--bank", ed.bank, "Direction bank");
    s->add_option("--set", ed.set, "Edits, e.g. au12=+1,au6=+0.5 (steps in predictor-output units)");
    s->add_option("--mode", ed.mode, "relative or absolute-after-neutralization")
        ->check(CLI::IsMember({"relative", "absolute-after-neutralization"}));
    s->add_option("--out", ed.out, "Output table");
    auto& c = add(s, "edit");
    c.run = [&, s](RunRecord& rec) {
      need(s, "edit", "table");
      need(s, "edit", "bank");
      need(s, "edit", "set");
      need(s, "edit", "out");
      const auto table = load_attribute_table(ed.table);
      const auto bank = load_direction_bank(ed.bank, table.dimension());
      rec.input(ed.table);
      rec.input(ed.bank);
      const auto mode = ed.mode == "relative" ? EditMode::relative : EditMode::absolute_after_neutralization;
      const auto edited = apply_multi_edit(table, bank, parse_edit_request(ed.set, mode));
      save_attribute_table(edited, ed.out);
      rec.output(ed.out);
      out << "rows=" << edited.rows() << '\n';
    };
  }

  // train-neutralizer --------------------------------------------------------
  struct {
    std::string table, out;
    std::optional<std::uint64_t> seed;
    NeutralizerConfig cfg;
    std::string monitor = "balanced";
  } tn;
  {
    auto* s = app.add_subcommand("train-neutralizer", "Train the AU/static attribute network used for neutralization");
    s->add_option("--table", tn.table, "Attribute table");
    s->add_option("--out", tn.out, "Output model file");
    s->add_option("--seed", tn.seed, "Random seed");
    s->add_option("--width", tn.cfg.width, "Hidden width");
    s->add_option("--lr", tn.cfg.learning_rate, "Adam learning rate");
    s->add_option("--batch", tn.cfg.batch_size, "Batch size");
    s->add_option("--threshold", tn.cfg.recall_threshold, "Recall binarization threshold");
    s->add_option("--patience", tn.cfg.patience, "Epochs without recall improvement before stopping");
    s->add_option("--max-epochs", tn.cfg.max_epochs, "Epoch limit");
    s->add_option("--val-fraction", tn.cfg.validation_fraction, "Validation fraction");
    s->add_option("--monitor", tn.monitor, "Early-stopping recall: balanced (active and inactive AUs) or positive")
        ->check(CLI::IsMember({"balanced", "positive"}));
    auto& c = add(s, "train-neutralizer", true);
    c.seed = &tn.seed;
    c.run = [&, s](RunRecord& rec) {
      need(s, "train-neutralizer", "table");
      need(s, "train-neutralizer", "out");
      const auto table = load_attribute_table(tn.table);
      rec.input(tn.table);
      auto cfg = tn.cfg;
      cfg.seed = *tn.seed;
      cfg.monitor = tn.monitor == "positive" ? RecallMonitor::positive : RecallMonitor::balanced;
      const auto trained = train_neutralizer(table, cfg);
      save_neutralizer(trained.model, tn.out);
      rec.output(tn.out);
      std::ostringstream log;
      log << "best_epoch=" << trained.report.best_epoch << "\nbest_recall=" << format_real(trained.report.best_recall)
          << "\ntable\nepoch\ttrain_loss\tval_loss\tval_recall\tval_monitor\n";
      for (std::size_t e = 0; e < trained.report.train_loss.size(); ++e) {
        log << e + 1 << '\t' << format_real(trained.report.train_loss[e]) << '\t'
            << format_real(trained.report.val_loss[e]) << '\t' << format_real(trained.report.val_recall[e])
            << '\t' << format_real(trained.report.val_monitor[e]) << '\n';
      }
      const fs::path log_path = tn.out + ".training";
      write_text_file(log_path, log.str());
      rec.output(log_path);
      out << "best_epoch=" << trained.report.best_epoch << " best_recall=" << format_real(trained.report.best_recall)
          << '\n';
    };
  }

  // neutralize ---------------------------------------------------------------
  struct {
    std::string table, model, out, trace;
    std::optional<std::uint64_t> seed;
    NeutralizeOptions opt;
  } nz;
  {
    auto* s = app.add_subcommand("neutralize", "Optimize codes towards zero AU activation");
    s->add_option("--table", nz.table, "Table of codes to neutralize");
    s->add_option("--model", nz.model, "Trained neutralizer model");
    s->add_option("--out", nz.out, "Output table (AU columns hold the model's predictions after neutralization)");
    s->add_option("--trace", nz.trace, "Directory for per-row objective traces");
    s->add_option("--seed", nz.seed, "Random seed (dropout masks)");
    s->add_option("--lambda", nz.opt.lambda, "Proximity weight");
    s->add_option("--dropout", nz.opt.dropout, "Dropout rate on the code");
    s->add_option("--lr", nz.opt.learning_rate, "Adam learning rate");
    s->add_option("--window", nz.opt.stop.window, "Moving-average window");
    s->add_option("--horizon", nz.opt.stop.horizon, "Steps over which the average must decrease");
    s->add_option("--min-decrease", nz.opt.stop.min_decrease, "Required decrease over the horizon");
    s->add_option("--max-steps", nz.opt.stop.max_steps, "Step limit");
    auto& c = add(s, "neutralize", true);
    c.seed = &nz.seed;
    c.run = [&, s](RunRecord& rec) {
      need(s, "neutralize", "table");
      need(s, "neutralize", "model");
      need(s, "neutralize", "out");
      const auto table = load_attribute_table(nz.table);
      const auto model = load_neutralizer(nz.model);
      rec.input(nz.table);
      rec.input(nz.model);
      if (model.dimension() != table.dimension()) {
        throw ValidationError("model dimension " + std::to_string(model.dimension()) + " does not match table dimension " +
                              std::to_string(table.dimension()));
      }
      std::vector<std::optional<std::size_t>> au_column;
      for (const auto& a : table.attributes()) {
        std::optional<std::size_t> k;
        for (std::size_t i = 0; i < model.au_names().size(); ++i) {
          if (model.au_names()[i] == a.name) k = i;
        }
        au_column.push_back(k);
      }
      AttributeTable::Builder result(table.dimension(), table.attributes());
      std::size_t capped = 0;
      for (std::size_t r = 0; r < table.rows(); ++r) {
        auto o = nz.opt;
        o.seed = mix_seed(*nz.seed, r);
        const auto res = neutralize(table.code(r), model, o);
        capped += res.hit_max_steps ? 1 : 0;
        Vector labels = table.label_row(r);
        const Vector aus = model.predict_aus(res.z_neutral.z);
        for (std::size_t j = 0; j < au_column.size(); ++j) {
          if (au_column[j]) labels[static_cast<Eigen::Index>(j)] = aus[static_cast<Eigen::Index>(*au_column[j])];
        }
        result.add(res.z_neutral, labels);
        if (!nz.trace.empty()) {
          std::ostringstream t;
          t << "step\tobjective\n";
          for (std::size_t i = 0; i < res.trace.size(); ++i) t << i + 1 << '\t' << format_real(res.trace[i]) << '\n';
          const auto path = fs::path(nz.trace) / ("trace_" + std::to_string(r) + ".txt");
          write_text_file(path, t.str());
        }
      }
      save_attribute_table(result.build(), nz.out);
      rec.output(nz.out);
      out << "rows=" << table.rows() << " hit_max_steps=" << capped << '\n';
    };
  }

  // sample -------------------------------------------------------------------
  struct {
    std::string oracle, out;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;
  } sm;
  {
    auto* s = app.add_subcommand("sample", "Draw a labelled table from a synthetic oracle");
    s->add_option("--oracle", sm.oracle, "Oracle specification file");
    s->add_option("--n", sm.n, "Number of rows");
    s->add_option("--out", sm.out, "Output table");
    s->add_option("--seed", sm.seed, "Random seed");
    auto& c = add(s, "sample", true);
    c.seed = &sm.seed;
    c.run = [&, s](RunRecord& rec) {
      need(s, "sample", "oracle");
      need(s, "sample", "n");
      need(s, "sample", "out");
      const auto spec = load_oracle_spec(sm.oracle);
      rec.input(sm.oracle);
      const auto table = oracle_sample(spec, sm.n, *sm.seed);
      save_attribute_table(table, sm.out);
      rec.output(sm.out);
      out << "rows=" << table.rows() << '\n';
    };
  }

  // sample-balanced ----------------------------------------------------------
  struct {
    std::string filter, predictors, out, oracle, source;
    std::size_t per_cell = 0, draws_per_target = kDefaultDrawsPerTarget;
    std::optional<std::uint64_t> seed;
  } sb;
  {
    auto* s = app.add_subcommand("sample-balanced", "Acceptance-rejection sampling balanced over demographic cells");
    s->add_option("--filter", sb.filter, "Cell attributes, e.g. gender,age3 (trailing K = K quantile bins)");
    s->add_option("--per-cell", sb.per_cell, "Rows per cell");
    s->add_option("--predictors", sb.predictors, "Predictor file (see fit-directions --predictors-out)");
    s->add_option("--oracle", sb.oracle, "Draw from this oracle specification");
    s->add_option("--source", sb.source, "Draw from the rows of this table, in order");
    s->add_option("--draws-per-target", sb.draws_per_target, "Draw budget per requested row");
    s->add_option("--out", sb.out, "Output table");
    s->add_option("--seed", sb.seed, "Random seed");
    auto& c = add(s, "sample-balanced", true);
    c.seed = &sb.seed;
    c.run = [&, s](RunRecord& rec) {
      need(s, "sample-balanced", "filter");
      need(s, "sample-balanced", "per-cell");
      need(s, "sample-balanced", "predictors");
      need(s, "sample-balanced", "out");
      if (sb.oracle.empty() == sb.source.empty()) throw UsageError("give exactly one of --oracle and --source");
      const auto preds = load_predictors(sb.predictors);
      rec.input(sb.predictors);
      auto source = sb.oracle.empty() ? GeneratorSource::table(load_attribute_table(sb.source))
                                      : GeneratorSource::oracle(load_oracle_spec(sb.oracle), *sb.seed);
      rec.input(sb.oracle.empty() ? sb.source : sb.oracle);
      const auto cells = parse_cell_attributes(sb.filter, preds);
      const auto plan = balanced_demographic_plan(cells, sb.per_cell);
      const auto result = sample_plan(source, plan, preds, sb.draws_per_target * std::max<std::size_t>(1, plan.size() * sb.per_cell));
      save_attribute_table(result.table, sb.out);
      rec.output(sb.out);
      out << "rows=" << result.table.rows() << " cells=" << plan.size() << " draws=" << result.draws
          << " acceptance_rate=" << format_real(result.acceptance_rate()) << '\n';
    };
  }

  // metrics ------------------------------------------------------------------
  auto* metrics = app.add_subcommand("metrics", "Evaluation reports");
  metrics->require_subcommand(1);
  struct {
    std::string table, pred, truth, edited, target, points, out, oracle, count_column;
    std::vector<std::string> columns;
    double threshold = 0.1;
    std::optional<double> reference;
    std::optional<double> n_current;
  } mt;
  auto emit = [&](RunRecord& rec, const std::string& text) {
    write_text_file(mt.out, text);
    rec.output(mt.out);
    out << text.substr(0, text.find("table"));
  };
  auto truth_columns = [&](const AttributeTable& t) {
    return mt.columns.empty() ? t.names_with_role(AttributeRole::au) : mt.columns;
  };
  {
    auto* s = metrics->add_subcommand("corr", "Pearson correlation between label (or recovered factor) columns");
    s->add_option("--table", mt.table, "Attribute table");
    s->add_option("--columns", mt.columns, "Columns (default: every AU)")->delimiter(',');
    s->add_option("--oracle", mt.oracle, "Use factors recovered from the codes with this oracle's mixing");
    s->add_option("--out", mt.out, "Report file");
    auto& c = add(s, "metrics.corr");
    c.run = [&, s](RunRecord& rec) {
      need(s, "metrics.corr", "table");
      need(s, "metrics.corr", "out");
      const auto table = load_attribute_table(mt.table);
      rec.input(mt.table);
      const auto names = truth_columns(table);
      Matrix values;
      if (mt.oracle.empty()) {
        values = columns_of(table, names);
      } else {
        const auto spec = load_oracle_spec(mt.oracle);
        rec.input(mt.oracle);
        if (spec.dimension() != table.dimension()) throw ValidationError("oracle dimension does not match the table");
        const Matrix factors = spec.recover_factors(table.codes());
        values.resize(factors.rows(), static_cast<Eigen::Index>(names.size()));
        for (std::size_t j = 0; j < names.size(); ++j) {
          values.col(static_cast<Eigen::Index>(j)) = factors.col(static_cast<Eigen::Index>(spec.factor_index(names[j])));
        }
      }
      emit(rec, format_correlation_report(correlation_matrix(values), names));
    };
  }
  for (const std::string kind : {"f1", "pair-fpr"}) {
    auto* s = metrics->add_subcommand(kind, kind == "f1" ? "Per-AU and macro F1" : "AU-pair false-positive rates");
    s->add_option("--pred", mt.pred, "Table whose label columns are predictions");
    s->add_option("--truth", mt.truth, "Table of true labels");
    s->add_option("--columns", mt.columns, "Columns (default: every AU of the truth table)")->delimiter(',');
    s->add_option("--threshold", mt.threshold, "Binarization threshold");
    s->add_option("--out", mt.out, "Report file");
    const auto key = "metrics." + kind;
    auto& c = add(s, key);
    c.run = [&, s, key, kind](RunRecord& rec) {
      need(s, key, "pred");
      need(s, key, "truth");
      need(s, key, "out");
      const auto pred = load_attribute_table(mt.pred);
      const auto truth = load_attribute_table(mt.truth);
      rec.input(mt.pred);
      rec.input(mt.truth);
      const auto names = truth_columns(truth);
      const Matrix p = columns_of(pred, names), t = columns_of(truth, names);
      if (kind == "f1") {
        emit(rec, format_f1_report(f1_scores(p, t, mt.threshold), names, mt.threshold));
      } else {
        emit(rec, format_pair_fpr_report(pair_fpr(binarize(p, mt.threshold), binarize(t, mt.threshold)), names));
      }
    };
  }
  {
    auto* s = metrics->add_subcommand("mae", "Mean absolute error between predictions on edits and on targets");
    s->add_option("--edited", mt.edited, "Predictions on edited codes");
    s->add_option("--target", mt.target, "Predictions on matched targets (same row order)");
    s->add_option("--count-column", mt.count_column, "Column of --edited holding the number of edited AUs");
    s->add_option("--columns", mt.columns, "Compared columns (default: every AU of --target)")->delimiter(',');
    s->add_option("--out", mt.out, "Report file");
    auto& c = add(s, "metrics.mae");
    c.run = [&, s](RunRecord& rec) {
      need(s, "metrics.mae", "edited");
      need(s, "metrics.mae", "target");
      need(s, "metrics.mae", "count-column");
      need(s, "metrics.mae", "out");
      const auto edited = load_attribute_table(mt.edited);
      const auto target = load_attribute_table(mt.target);
      rec.input(mt.edited);
      rec.input(mt.target);
      auto names = truth_columns(target);
      std::erase(names, mt.count_column);
      std::vector<std::size_t> counts;
      for (double v : edited.column(mt.count_column)) {
        if (v < 0 || v != std::floor(v)) throw ValidationError("column '" + mt.count_column + "' must hold counts");
        counts.push_back(static_cast<std::size_t>(v));
      }
      emit(rec, format_mae_report(mae_to_target(columns_of(edited, names), columns_of(target, names), counts)));
    };
  }
  {
    auto* s = metrics->add_subcommand("learning-curve", "Fit a - b n^-c and extrapolate the data needed for a score");
    s->add_option("--points", mt.points, "File of '<n> <score>' lines");
    s->add_option("--reference", mt.reference, "Score to reach");
    s->add_option("--n-current", mt.n_current, "Current sample size for the data multiplier");
    s->add_option("--out", mt.out, "Report file");
    auto& c = add(s, "metrics.learning-curve");
    c.run = [&, s](RunRecord& rec) {
      need(s, "metrics.learning-curve", "points");
      need(s, "metrics.learning-curve", "out");
      const auto points = read_points(mt.points);
      rec.input(mt.points);
      const auto fit = fit_pow3(points);
      auto text = format_pow3_report(fit, points);
      if (mt.reference) {
        const auto head = text.find("table");
        std::ostringstream extra;
        extra << "reference=" << format_real(*mt.reference) << '\n';
        extra << "n_needed=" << format_real(solve_pow3(fit, *mt.reference)) << '\n';
        if (mt.n_current) extra << "data_multiplier=" << format_real(data_multiplier(fit, *mt.reference, *mt.n_current)) << '\n';
        text.insert(head, extra.str());
      }
      emit(rec, text);
    };
  }

  // experiment ---------------------------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "Desk-scale augmentation experiments on the oracle");
  experiment->require_subcommand(1);
  struct {
    std::vector<std::string> scenarios{"augmented"};
    std::size_t seeds = 5;
    std::string out;
    std::optional<std::uint64_t> seed;
  } ex;
  {
    auto* s = experiment->add_subcommand("run", "Run scenarios over consecutive seeds");
    s->add_option("--scenario", ex.scenarios, "Scenario list, or 'all'")->delimiter(',');
    s->add_option("--seeds", ex.seeds, "Number of seeds (seed, seed+1, ...)");
    s->add_option("--seed", ex.seed, "First seed");
    s->add_option("--out", ex.out, "Report directory");
    auto& c = add(s, "experiment.run", true);
    c.seed = &ex.seed;
    c.run = [&, s](RunRecord& rec) {
      need(s, "experiment.run", "out");
      if (ex.seeds == 0) throw UsageError("--seeds must be positive");
      std::vector<Scenario> scenarios;
      for (const auto& name : ex.scenarios) {
        if (name == "all") {
          scenarios = all_scenarios();
          break;
        }
        scenarios.push_back(parse_scenario(name));
      }
      KeyValueConfig cfg;
      if (!config_path.empty()) {
        cfg = KeyValueConfig::load(config_path);
        rec.input(config_path);
      }
      const std::vector<std::string> ignored{"experiment.run."};
      const auto config = experiment_config_from(cfg, "experiment.", ignored);
      std::map<Scenario, std::vector<ScenarioResult>> results;
      std::vector<std::string> au_names;
      for (std::size_t i = 0; i < ex.seeds; ++i) {
        ExperimentWorld world(config, *ex.seed + i);
        au_names = world.au_names();
        for (auto sc : scenarios) results[sc].push_back(run_scenario(world, sc));
      }
      for (auto sc : scenarios) {
        const auto path = fs::path(ex.out) / (std::string(to_string(sc)) + ".txt");
        const auto text = format_scenario_report(results[sc], au_names);
        write_text_file(path, text);
        rec.output(path);
        out << text.substr(0, text.find("table"));
      }
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  Command* active = nullptr;
  for (auto& c : commands) {
    if (c.app->parsed()) active = &c;
  }
  if (!active) {
    err << app.help();
    return 1;
  }

  try {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
    std::set<std::string> known;
    for (const auto& c : commands) {
      for (const CLI::Option* opt : c.app->get_options()) {
        if (!opt->get_single_name().empty()) known.insert(c.key + "." + opt->get_single_name());
      }
    }
    for (const auto& [key, value] : cfg.entries()) {
      const bool experiment_key = key.rfind("experiment.", 0) == 0 && key.rfind("experiment.run.", 0) != 0;
      if (!known.count(key) && !experiment_key) throw UsageError("unknown configuration key '" + key + "'");
    }
    apply_config(*active, cfg);
    if (active->stochastic && !*active->seed) {
      throw UsageError("--seed is required for this command (or set configuration key '" + active->key + ".seed')");
    }
    RunRecord record(active->key, active->app, active->seed ? *active->seed : std::nullopt);
    active->run(record);
    if (active->key == "experiment.run") {
      record.write(fs::path(ex.out) / "provenance.txt");
    } else {
      record.write();
    }
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace lsedit::cli
