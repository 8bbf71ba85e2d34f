#include "lsedit/neutralizer.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lsedit/errors.hpp"

namespace lsedit {

using nn::Dense;

NeutralizerModel::NeutralizerModel(std::size_t dimension, std::size_t width, std::vector<std::string> au_names,
                                   std::vector<std::string> static_names, std::uint64_t seed)
    : dimension_(dimension), width_(width), au_names_(std::move(au_names)), static_names_(std::move(static_names)) {
  if (dimension_ == 0 || width_ == 0) throw ValidationError("neutralizer dimension and width must be positive");
  if (au_names_.empty()) throw ValidationError("neutralizer needs at least one AU attribute");
  nn::Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dimension_);
  const auto w = static_cast<Eigen::Index>(width_);
  trunk_ = nn::make_dense(d, w, rng);
  dynamic_ = nn::make_dense(w, w, rng);
  static_ = nn::make_dense(w, w, rng);
  for (std::size_t a = 0; a < au_names_.size(); ++a) {
    au_hidden_.push_back(nn::make_dense(w, w, rng));
    au_head_.push_back(nn::make_dense(w, 1, rng));
  }
  for (std::size_t s = 0; s < static_names_.size(); ++s) {
    static_hidden_.push_back(nn::make_dense(w, w, rng));
    static_head_.push_back(nn::make_dense(w, 1, rng));
  }
}

NeutralizerModel::Cache NeutralizerModel::forward_cached(const Matrix& codes) const {
  if (static_cast<std::size_t>(codes.rows()) != dimension_) {
    throw ValidationError("neutralizer expects codes of length " + std::to_string(dimension_) + ", got " +
                          std::to_string(codes.rows()));
  }
  Cache c;
  c.input = codes;
  c.trunk_pre = trunk_.forward(codes);
  c.trunk_out = nn::silu(c.trunk_pre);
  c.dynamic_pre = dynamic_.forward(c.trunk_out);
  c.dynamic_out = nn::silu(c.dynamic_pre);
  c.static_pre = static_.forward(c.trunk_out);
  c.static_out = nn::silu(c.static_pre);
  const auto batch = codes.cols();
  c.outputs.au_logits.resize(static_cast<Eigen::Index>(au_names_.size()), batch);
  c.outputs.static_logits.resize(static_cast<Eigen::Index>(static_names_.size()), batch);
  for (std::size_t a = 0; a < au_names_.size(); ++a) {
    c.au_pre.push_back(au_hidden_[a].forward(c.dynamic_out));
    c.au_out.push_back(nn::silu(c.au_pre.back()));
    c.outputs.au_logits.row(static_cast<Eigen::Index>(a)) = au_head_[a].forward(c.au_out.back());
  }
  for (std::size_t s = 0; s < static_names_.size(); ++s) {
    c.st_pre.push_back(static_hidden_[s].forward(c.static_out));
    c.st_out.push_back(nn::silu(c.st_pre.back()));
    c.outputs.static_logits.row(static_cast<Eigen::Index>(s)) = static_head_[s].forward(c.st_out.back());
  }
  return c;
}

NeutralizerModel::Outputs NeutralizerModel::forward(const Matrix& codes) const {
  return forward_cached(codes).outputs;
}

Matrix NeutralizerModel::backward(const Cache& c, const Matrix& d_au_logits, const Matrix& d_static_logits,
                                  NeutralizerModel* grads) const {
  Matrix d_dynamic_out = Matrix::Zero(c.dynamic_out.rows(), c.dynamic_out.cols());
  for (std::size_t a = 0; a < au_names_.size(); ++a) {
    const Matrix g = d_au_logits.row(static_cast<Eigen::Index>(a));
    const Matrix d_pre = (au_head_[a].weight.transpose() * g).cwiseProduct(nn::silu_derivative(c.au_pre[a]));
    if (grads) {
      nn::accumulate(grads->au_head_[a], g, c.au_out[a]);
      nn::accumulate(grads->au_hidden_[a], d_pre, c.dynamic_out);
    }
    d_dynamic_out.noalias() += au_hidden_[a].weight.transpose() * d_pre;
  }
  Matrix d_static_out = Matrix::Zero(c.static_out.rows(), c.static_out.cols());
  for (std::size_t s = 0; s < static_names_.size(); ++s) {
    const Matrix g = d_static_logits.row(static_cast<Eigen::Index>(s));
    const Matrix d_pre = (static_head_[s].weight.transpose() * g).cwiseProduct(nn::silu_derivative(c.st_pre[s]));
    if (grads) {
      nn::accumulate(grads->static_head_[s], g, c.st_out[s]);
      nn::accumulate(grads->static_hidden_[s], d_pre, c.static_out);
    }
    d_static_out.noalias() += static_hidden_[s].weight.transpose() * d_pre;
  }
  const Matrix d_dynamic_pre = d_dynamic_out.cwiseProduct(nn::silu_derivative(c.dynamic_pre));
  const Matrix d_static_pre = d_static_out.cwiseProduct(nn::silu_derivative(c.static_pre));
  Matrix d_trunk_out = dynamic_.weight.transpose() * d_dynamic_pre;
  if (!static_names_.empty()) d_trunk_out.noalias() += static_.weight.transpose() * d_static_pre;
  const Matrix d_trunk_pre = d_trunk_out.cwiseProduct(nn::silu_derivative(c.trunk_pre));
  if (grads) {
    nn::accumulate(grads->dynamic_, d_dynamic_pre, c.trunk_out);
    if (!static_names_.empty()) nn::accumulate(grads->static_, d_static_pre, c.trunk_out);
    nn::accumulate(grads->trunk_, d_trunk_pre, c.input);
  }
  return trunk_.weight.transpose() * d_trunk_pre;
}

Vector NeutralizerModel::predict_aus(const Vector& z) const {
  return nn::sigmoid(forward(z).au_logits).col(0);
}

Vector NeutralizerModel::static_logits(const Vector& z) const { return forward(z).static_logits.col(0); }

std::vector<Dense*> NeutralizerModel::layers() {
  std::vector<Dense*> out{&trunk_, &dynamic_, &static_};
  for (std::size_t a = 0; a < au_hidden_.size(); ++a) {
    out.push_back(&au_hidden_[a]);
    out.push_back(&au_head_[a]);
  }
  for (std::size_t s = 0; s < static_hidden_.size(); ++s) {
    out.push_back(&static_hidden_[s]);
    out.push_back(&static_head_[s]);
  }
  return out;
}

std::vector<const Dense*> NeutralizerModel::layers() const {
  auto mutable_layers = const_cast<NeutralizerModel*>(this)->layers();
  return {mutable_layers.begin(), mutable_layers.end()};
}

NeutralizerModel NeutralizerModel::zeros_like() const {
  NeutralizerModel z = *this;
  for (auto* layer : z.layers()) {
    layer->weight.setZero();
    layer->bias.setZero();
  }
  return z;
}

void NeutralizerModel::round_to_float() {
  for (auto* layer : layers()) nn::round_to_float(*layer);
}

bool NeutralizerModel::operator==(const NeutralizerModel& other) const {
  if (dimension_ != other.dimension_ || width_ != other.width_ || au_names_ != other.au_names_ ||
      static_names_ != other.static_names_) {
    return false;
  }
  const auto a = layers();
  const auto b = other.layers();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Training

double micro_recall(const Matrix& predictions, const Matrix& truth, double threshold) {
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols()) {
    throw ValidationError("recall: shape mismatch");
  }
  std::size_t tp = 0, fn = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth.data()[i] >= threshold) {
      if (predictions.data()[i] >= threshold) {
        ++tp;
      } else {
        ++fn;
      }
    }
  }
  if (tp + fn == 0) throw ValidationError("recall is undefined: no active AU labels");
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double balanced_recall(const Matrix& predictions, const Matrix& truth, double threshold) {
  const double positive = micro_recall(predictions, truth, threshold);
  std::size_t tn = 0, fp = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth.data()[i] < threshold) {
      if (predictions.data()[i] < threshold) {
        ++tn;
      } else {
        ++fp;
      }
    }
  }
  if (tn + fp == 0) return positive;
  return 0.5 * (positive + static_cast<double>(tn) / static_cast<double>(tn + fp));
}

namespace {

struct Batch {
  Matrix codes;   // d x B
  Matrix au;      // n_au x B
  Matrix statik;  // n_static x B
};

Batch gather(const AttributeTable& table, std::span<const std::size_t> rows, const std::vector<std::size_t>& au_idx,
             const std::vector<std::size_t>& static_idx) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.codes.resize(static_cast<Eigen::Index>(table.dimension()), n);
  b.au.resize(static_cast<Eigen::Index>(au_idx.size()), n);
  b.statik.resize(static_cast<Eigen::Index>(static_idx.size()), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]);
    b.codes.col(j) = table.codes().row(r).transpose();
    for (std::size_t a = 0; a < au_idx.size(); ++a) {
      b.au(static_cast<Eigen::Index>(a), j) = table.labels()(r, static_cast<Eigen::Index>(au_idx[a]));
    }
    for (std::size_t s = 0; s < static_idx.size(); ++s) {
      b.statik(static_cast<Eigen::Index>(s), j) = table.labels()(r, static_cast<Eigen::Index>(static_idx[s]));
    }
  }
  return b;
}

struct LossTerms {
  double value = 0.0;
  Matrix d_au;
  Matrix d_static;
};

// MSE on sigmoid AU outputs plus BCE-with-logits on static outputs.
LossTerms training_loss(const NeutralizerModel::Outputs& out, const Batch& b) {
  LossTerms l;
  const Matrix p = nn::sigmoid(out.au_logits);
  const double au_count = static_cast<double>(p.size());
  const Matrix diff = p - b.au;
  l.value = diff.squaredNorm() / au_count;
  l.d_au = (2.0 / au_count) * diff.cwiseProduct(p).cwiseProduct((1.0 - p.array()).matrix());
  l.d_static = Matrix::Zero(out.static_logits.rows(), out.static_logits.cols());
  if (out.static_logits.size() > 0) {
    const double st_count = static_cast<double>(out.static_logits.size());
    double bce = 0.0;
    for (Eigen::Index i = 0; i < out.static_logits.size(); ++i) {
      const double t = out.static_logits.data()[i];
      const double y = b.statik.data()[i];
      bce += (t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t))) - y * t;
      l.d_static.data()[i] = (nn::sigmoid(t) - y) / st_count;
    }
    l.value += bce / st_count;
  }
  return l;
}

void zero(NeutralizerModel& grads) {
  for (auto* layer : grads.layers()) {
    layer->weight.setZero();
    layer->bias.setZero();
  }
}

}  // namespace

TrainedNeutralizer train_neutralizer(const AttributeTable& table, const NeutralizerConfig& config) {
  const auto au_idx = table.indices_with_role(AttributeRole::au);
  if (au_idx.empty()) throw ValidationError("train_neutralizer: table has no AU-role attributes");
  if (table.rows() == 0) throw ValidationError("train_neutralizer: empty table");
  if (config.batch_size == 0 || table.rows() < config.batch_size) {
    throw ValidationError("train_neutralizer: table has fewer rows than the batch size");
  }
  if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
    throw ValidationError("train_neutralizer: validation_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> static_idx;
  for (std::size_t j = 0; j < table.attribute_count(); ++j) {
    if (table.attributes()[j].role != AttributeRole::au) static_idx.push_back(j);
  }
  std::vector<std::string> au_names, static_names;
  for (auto j : au_idx) au_names.push_back(table.attributes()[j].name);
  for (auto j : static_idx) static_names.push_back(table.attributes()[j].name);

  bool any_active = false;
  for (auto j : au_idx) {
    any_active = any_active || (table.labels().col(static_cast<Eigen::Index>(j)).array() >= config.recall_threshold).any();
  }
  if (!any_active) {
    throw ValidationError("train_neutralizer: no AU label reaches the recall threshold; recall is undefined");
  }

  nn::Rng rng(config.seed);
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.validation_fraction * static_cast<double>(table.rows())));
  if (n_val >= table.rows()) throw ValidationError("train_neutralizer: too few rows for a validation split");
  const std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const Batch val = gather(table, val_rows, au_idx, static_idx);
  if (!(val.au.array() >= config.recall_threshold).any()) {
    throw ValidationError("train_neutralizer: validation split has no active AU labels; recall is undefined");
  }

  TrainedNeutralizer result;
  NeutralizerModel model(table.dimension(), config.width, au_names, static_names, rng());
  NeutralizerModel grads = model.zeros_like();
  auto params = model.layers();
  auto grad_layers = grads.layers();
  std::vector<nn::ParamRef> refs;
  for (std::size_t i = 0; i < params.size(); ++i) {
    refs.push_back({params[i]->weight.data(), grad_layers[i]->weight.data(), static_cast<std::size_t>(params[i]->weight.size())});
    refs.push_back({params[i]->bias.data(), grad_layers[i]->bias.data(), static_cast<std::size_t>(params[i]->bias.size())});
  }
  nn::Adam adam({config.learning_rate});

  NeutralizerModel best = model;
  double best_recall = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const auto stop = std::min(train_rows.size(), start + config.batch_size);
      const Batch b = gather(table, std::span(train_rows).subspan(start, stop - start), au_idx, static_idx);
      const auto cache = model.forward_cached(b.codes);
      const auto loss = training_loss(cache.outputs, b);
      zero(grads);
      model.backward(cache, loss.d_au, loss.d_static, &grads);
      adam.step(refs);
      loss_sum += loss.value;
      ++batches;
    }
    for (const auto* layer : params) {
      if (!layer->weight.allFinite() || !layer->bias.allFinite()) {
        throw NumericalError("train_neutralizer: non-finite weights at epoch " + std::to_string(epoch));
      }
    }
    const auto out = model.forward(val.codes);
    const double val_loss = training_loss(out, val).value;
    const Matrix val_pred = nn::sigmoid(out.au_logits);
    const double positive_recall = micro_recall(val_pred, val.au, config.recall_threshold);
    const double recall = config.monitor == RecallMonitor::positive
                              ? positive_recall
                              : balanced_recall(val_pred, val.au, config.recall_threshold);
    result.report.train_loss.push_back(loss_sum / static_cast<double>(batches));
    result.report.val_loss.push_back(val_loss);
    result.report.val_recall.push_back(positive_recall);
    result.report.val_monitor.push_back(recall);

    const bool recall_up = recall > best_recall;
    if (recall_up || (recall == best_recall && val_loss < best_loss)) {
      best_recall = recall;
      best_loss = val_loss;
      best = model;
      result.report.best_epoch = epoch;
    }
    since_improvement = recall_up ? 0 : since_improvement + 1;
    if (since_improvement >= config.patience) break;
  }
  best.round_to_float();
  result.model = std::move(best);
  result.report.best_recall = best_recall;
  return result;
}

// ---------------------------------------------------------------------------
// Stop rule

void StopPolicy::validate() const {
  if (window == 0 || horizon == 0) throw ValidationError("stop policy window and horizon must be positive");
  if (window > horizon) throw ValidationError("stop policy window must not exceed horizon");
  if (!(min_decrease > 0.0)) throw ValidationError("stop policy min_decrease must be positive");
  if (max_steps == 0) throw ValidationError("stop policy max_steps must be positive");
}

StopMonitor::StopMonitor(StopPolicy policy) : policy_(policy) { policy_.validate(); }

double StopMonitor::moving_average(std::size_t t) const {
  if (t < policy_.window || t > values_.size()) throw Error("moving_average: step out of range");
  double sum = 0.0;
  for (std::size_t i = t - policy_.window; i < t; ++i) sum += values_[i];
  return sum / static_cast<double>(policy_.window);
}

bool StopMonitor::push(double objective) {
  values_.push_back(objective);
  const std::size_t t = values_.size();
  if (t >= policy_.window + policy_.horizon) {
    const double now = moving_average(t);
    if (moving_average(t - policy_.horizon) - now <= policy_.min_decrease && now <= moving_average(policy_.window)) {
      return true;
    }
  }
  if (t >= policy_.max_steps) {
    hit_max_ = true;
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Neutralization

ObjectiveValue neutralization_objective(const NeutralizerModel& model, const Vector& z, const Vector& anchor,
                                        const Vector& static_targets, double lambda, const Vector* dropout_mask) {
  if (static_cast<std::size_t>(z.size()) != model.dimension() || anchor.size() != z.size()) {
    throw ValidationError("neutralization: code length does not match model dimension " +
                          std::to_string(model.dimension()));
  }
  if (static_cast<std::size_t>(static_targets.size()) != model.static_names().size()) {
    throw ValidationError("neutralization: static target count mismatch");
  }
  const Vector input = dropout_mask ? Vector(z.cwiseProduct(*dropout_mask)) : z;
  const auto cache = model.forward_cached(input);
  const Vector p = nn::sigmoid(cache.outputs.au_logits).col(0);
  const double n_au = static_cast<double>(p.size());
  ObjectiveValue result;
  result.value = p.squaredNorm() / n_au;
  const Matrix d_au = ((2.0 / n_au) * p.array().square() * (1.0 - p.array())).matrix();
  const Matrix no_static = Matrix::Zero(cache.outputs.static_logits.rows(), 1);
  Vector grad = model.backward(cache, d_au, no_static, nullptr).col(0);
  if (dropout_mask) grad = grad.cwiseProduct(*dropout_mask);
  if (!model.static_names().empty()) {
    // Static attributes are held at their targets on the raw code.
    const auto clean = dropout_mask ? model.forward_cached(z) : cache;
    const double n_st = static_cast<double>(static_targets.size());
    const Vector diff = clean.outputs.static_logits.col(0) - static_targets;
    result.value += diff.squaredNorm() / n_st;
    const Matrix d_static = (2.0 / n_st) * diff;
    const Matrix no_au = Matrix::Zero(p.size(), 1);
    grad += model.backward(clean, no_au, d_static, nullptr).col(0);
  }
  const Vector delta = z - anchor;
  result.value += lambda * delta.squaredNorm();
  result.gradient = grad + 2.0 * lambda * delta;
  return result;
}

namespace {

double objective_value(const NeutralizerModel& model, const Vector& z, const Vector& anchor,
                       const Vector& static_targets, double lambda) {
  const auto out = model.forward(z);
  const Vector p = nn::sigmoid(out.au_logits).col(0);
  double value = p.squaredNorm() / static_cast<double>(p.size());
  if (static_targets.size() > 0) {
    value += (out.static_logits.col(0) - static_targets).squaredNorm() / static_cast<double>(static_targets.size());
  }
  return value + lambda * (z - anchor).squaredNorm();
}

}  // namespace

NeutralizationResult neutralize(const LatentCode& sample, const NeutralizerModel& model,
                                const NeutralizeOptions& options) {
  if (sample.dimension() != model.dimension()) {
    throw ValidationError("neutralize: code length " + std::to_string(sample.dimension()) +
                          " does not match model dimension " + std::to_string(model.dimension()));
  }
  if (!(options.dropout >= 0.0 && options.dropout < 1.0)) throw ValidationError("neutralize: dropout must be in [0, 1)");
  if (!(options.lambda >= 0.0)) throw ValidationError("neutralize: lambda must be non-negative");
  if (!(options.learning_rate >= 0.0)) throw ValidationError("neutralize: learning rate must be non-negative");
  StopMonitor monitor(options.stop);

  const Vector anchor = sample.z;
  const Vector static_targets = model.static_logits(anchor);
  Vector z = anchor;
  Vector grad = Vector::Zero(z.size());
  const nn::ParamRef ref{z.data(), grad.data(), static_cast<std::size_t>(z.size())};
  nn::Adam adam({options.learning_rate});
  nn::Rng rng(options.seed);
  std::bernoulli_distribution keep(1.0 - options.dropout);
  const double scale = 1.0 / (1.0 - options.dropout);
  Vector mask(z.size());

  NeutralizationResult result;
  while (true) {
    const double value = objective_value(model, z, anchor, static_targets, options.lambda);
    if (!std::isfinite(value)) throw NumericalError("neutralize: objective became non-finite");
    result.trace.push_back(value);
    if (monitor.push(value)) break;
    ObjectiveValue step;
    if (options.dropout > 0.0) {
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale : 0.0;
      step = neutralization_objective(model, z, anchor, static_targets, options.lambda, &mask);
    } else {
      step = neutralization_objective(model, z, anchor, static_targets, options.lambda);
    }
    if (!step.gradient.allFinite()) throw NumericalError("neutralize: non-finite gradient");
    grad = step.gradient;
    adam.step(std::span(&ref, 1));
  }
  result.z_neutral = LatentCode(z, sample.tag);
  result.hit_max_steps = monitor.hit_max_steps();
  return result;
}

// ---------------------------------------------------------------------------
// Binary model container

namespace {

constexpr char kMagic[4] = {'L', 'S', 'N', 'Z'};
constexpr std::uint32_t kVersion = 1;

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  void u32(std::uint32_t v) { raw(to_little(v)); }
  void f32(float v) { raw(to_little(std::bit_cast<std::uint32_t>(v))); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& data() const { return buf_; }

 private:
  template <class T>
  void raw(T v) {
    char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf_.append(tmp, sizeof(T));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}
  std::uint32_t u32() { return to_little(raw<std::uint32_t>()); }
  float f32() { return std::bit_cast<float>(to_little(raw<std::uint32_t>())); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_bytes(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(data_.data() + pos_, p, n) != 0) throw ValidationError(source_ + ": not a neutralizer model file");
    pos_ += n;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) throw ValidationError(source_ + ": truncated model file");
  }
  template <class T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_neutralizer(const NeutralizerModel& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.dimension()));
  w.u32(static_cast<std::uint32_t>(model.width()));
  w.u32(static_cast<std::uint32_t>(model.au_names().size()));
  w.u32(static_cast<std::uint32_t>(model.static_names().size()));
  for (const auto& n : model.au_names()) w.str(n);
  for (const auto& n : model.static_names()) w.str(n);
  for (const auto* layer : model.layers()) {
    w.u32(static_cast<std::uint32_t>(layer->weight.rows()));
    w.u32(static_cast<std::uint32_t>(layer->weight.cols()));
    for (Eigen::Index i = 0; i < layer->weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer->weight.cols(); ++j) w.f32(static_cast<float>(layer->weight(i, j)));
    }
    for (Eigen::Index i = 0; i < layer->bias.size(); ++i) w.f32(static_cast<float>(layer->bias[i]));
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

NeutralizerModel load_neutralizer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  r.expect_bytes(kMagic, 4);
  const auto version = r.u32();
  if (version != kVersion) throw ValidationError(path.string() + ": unsupported model version " + std::to_string(version));
  const auto d = r.u32();
  const auto width = r.u32();
  const auto n_au = r.u32();
  const auto n_static = r.u32();
  if (d == 0 || width == 0 || n_au == 0 || d > (1u << 20) || width > (1u << 16) || n_au > 4096 || n_static > 4096) {
    throw ValidationError(path.string() + ": implausible model header");
  }
  std::vector<std::string> au_names, static_names;
  for (std::uint32_t i = 0; i < n_au; ++i) au_names.push_back(r.str());
  for (std::uint32_t i = 0; i < n_static; ++i) static_names.push_back(r.str());
  NeutralizerModel model(d, width, std::move(au_names), std::move(static_names), 0);
  for (auto* layer : model.layers()) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows != layer->weight.rows() || cols != layer->weight.cols()) {
      throw ValidationError(path.string() + ": layer shape does not match header");
    }
    for (Eigen::Index i = 0; i < layer->weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer->weight.cols(); ++j) layer->weight(i, j) = r.f32();
    }
    for (Eigen::Index i = 0; i < layer->bias.size(); ++i) layer->bias[i] = r.f32();
    if (!layer->weight.allFinite() || !layer->bias.allFinite()) {
      throw ValidationError(path.string() + ": non-finite weights");
    }
  }
  if (!r.done()) throw ValidationError(path.string() + ": trailing bytes after last layer");
  return model;
}

}  // namespace lsedit
