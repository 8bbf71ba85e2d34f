#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsedit/core.hpp"
#include "lsedit/nn.hpp"

namespace lsedit {

// Two-branch network mapping a latent code to AU intensities and static
// attribute logits:
//
//   trunk   : d -> W, SiLU
//   dynamic : W -> W, SiLU  -> per AU:     W -> W, SiLU -> 1 (sigmoid)
//   static  : W -> W, SiLU  -> per static: W -> W, SiLU -> 1 (logit)
//
// W defaults to 512.
class NeutralizerModel {
 public:
  struct Outputs {
    Matrix au_logits;      // n_au x batch
    Matrix static_logits;  // n_static x batch
  };

  NeutralizerModel() = default;
  NeutralizerModel(std::size_t dimension, std::size_t width, std::vector<std::string> au_names,
                   std::vector<std::string> static_names, std::uint64_t seed);

  std::size_t dimension() const { return dimension_; }
  std::size_t width() const { return width_; }
  const std::vector<std::string>& au_names() const { return au_names_; }
  const std::vector<std::string>& static_names() const { return static_names_; }

  // Intermediate activations kept for the backward pass.
  struct Cache {
    Matrix input;
    Matrix trunk_pre, trunk_out;
    Matrix dynamic_pre, dynamic_out;
    Matrix static_pre, static_out;
    std::vector<Matrix> au_pre, au_out;
    std::vector<Matrix> st_pre, st_out;
    Outputs outputs;
  };

  // Batch forward pass; codes are columns.
  Outputs forward(const Matrix& codes) const;
  Cache forward_cached(const Matrix& codes) const;

  // Given dLoss/d(logits) for the cached batch, returns dLoss/d(codes) and,
  // when `grads` is non-null, accumulates parameter gradients into it (same layout).
  Matrix backward(const Cache& cache, const Matrix& d_au_logits, const Matrix& d_static_logits,
                  NeutralizerModel* grads) const;

  // Deterministic AU intensities in (0, 1).
  Vector predict_aus(const Vector& z) const;
  Vector static_logits(const Vector& z) const;

  // Layers in serialization order.
  std::vector<nn::Dense*> layers();
  std::vector<const nn::Dense*> layers() const;
  NeutralizerModel zeros_like() const;
  void round_to_float();

  bool operator==(const NeutralizerModel& other) const;

 private:
  std::size_t dimension_ = 0;
  std::size_t width_ = 0;
  std::vector<std::string> au_names_;
  std::vector<std::string> static_names_;
  nn::Dense trunk_;
  nn::Dense dynamic_;
  nn::Dense static_;
  std::vector<nn::Dense> au_hidden_;
  std::vector<nn::Dense> au_head_;
  std::vector<nn::Dense> static_hidden_;
  std::vector<nn::Dense> static_head_;
};

// Early-stopping monitor. `positive`: micro-averaged recall of active AUs.
// `balanced`: mean of that and the recall of inactive AUs, which an
// untrained network predicting every AU as active cannot saturate.
enum class RecallMonitor { positive, balanced };

struct NeutralizerConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double recall_threshold = 0.1;
  std::size_t patience = 15;  // epochs without recall improvement
  RecallMonitor monitor = RecallMonitor::balanced;
  std::size_t max_epochs = 200;
  double validation_fraction = 0.2;
  std::size_t width = 512;
  std::uint64_t seed = 0;
};

struct NeutralizerTrainingReport {
  std::vector<double> train_loss;  // per epoch, mean over batches
  std::vector<double> val_loss;
  std::vector<double> val_recall;   // micro-averaged over (sample, AU) pairs
  std::vector<double> val_monitor;  // the early-stopping quantity
  std::size_t best_epoch = 0;       // 1-based
  double best_recall = 0.0;         // monitor value of the returned checkpoint
};

struct TrainedNeutralizer {
  NeutralizerModel model;
  NeutralizerTrainingReport report;
};

// Trains on MSE over AU-role columns plus binary cross-entropy over every other
// column. Early stopping monitors validation AU recall (labels and predictions
// binarized at recall_threshold, see RecallMonitor); ties are broken by
// validation loss.
// The best checkpoint is returned with its weights rounded to 32-bit floats.
TrainedNeutralizer train_neutralizer(const AttributeTable& table, const NeutralizerConfig& config);

// Micro-averaged recall: TP / (TP + FN) over all (row, AU) pairs.
double micro_recall(const Matrix& predictions, const Matrix& truth, double threshold);
// (recall of active pairs + recall of inactive pairs) / 2.
double balanced_recall(const Matrix& predictions, const Matrix& truth, double threshold);

struct StopPolicy {
  std::size_t window = 50;
  std::size_t horizon = 150;
  double min_decrease = 0.002;
  std::size_t max_steps = 5000;

  void validate() const;
};

// Moving-average stop rule. After pushing the objective of step t (1-based),
// stop once t >= window + horizon and
//   MA(t - horizon) - MA(t) <= min_decrease,
// with MA(t) the mean of the last `window` objectives; or when t reaches max_steps.
class StopMonitor {
 public:
  explicit StopMonitor(StopPolicy policy);
  bool push(double objective);
  std::size_t steps() const { return values_.size(); }
  // Moving average ending at 1-based step t (t >= window).
  double moving_average(std::size_t t) const;
  bool hit_max_steps() const { return hit_max_; }

 private:
  StopPolicy policy_;
  std::vector<double> values_;
  bool hit_max_ = false;
};

struct NeutralizeOptions {
  double lambda = 0.004;
  double dropout = 0.2;
  double learning_rate = 1e-2;
  StopPolicy stop;
  std::uint64_t seed = 0;
};

struct NeutralizationResult {
  LatentCode z_neutral;
  std::vector<double> trace;  // clean objective per step
  bool hit_max_steps = false;
};

struct ObjectiveValue {
  double value = 0.0;
  Vector gradient;
};

// Attribute loss plus proximity term:
//   mean_a sigmoid(au_logit_a(z))^2 + mean_s (static_logit_s(z) - target_s)^2 + lambda ||z - anchor||^2
// `dropout_mask`, when given, holds the inverted-dropout multipliers applied to z
// before the AU heads; the static and proximity terms always see the raw z.
ObjectiveValue neutralization_objective(const NeutralizerModel& model, const Vector& z, const Vector& anchor,
                                        const Vector& static_targets, double lambda,
                                        const Vector* dropout_mask = nullptr);

// Optimizes the latent code with Adam (model frozen) until the stop policy fires.
NeutralizationResult neutralize(const LatentCode& sample, const NeutralizerModel& model, const NeutralizeOptions& options);

// Binary container: magic "LSNZ", u32 version, u32 dimension, u32 width,
// u32 n_au, u32 n_static, length-prefixed names, then per layer
// u32 rows, u32 cols, row-major f32 weights, f32 biases. Little-endian.
void save_neutralizer(const NeutralizerModel& model, const std::filesystem::path& path);
NeutralizerModel load_neutralizer(const std::filesystem::path& path);

}  // namespace lsedit
