#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "imbmix/augment.hpp"
#include "imbmix/data.hpp"
#include "imbmix/matrix.hpp"
#include "imbmix/rng.hpp"

namespace imbmix {

enum class Architecture { linear, mlp };

/// Affine layer: y = x Wᵀ + b, W is [out x in].
struct Layer {
  Matrix weights;
  std::vector<double> bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Softmax-linear classifier or a one-hidden-layer ReLU MLP.
struct ModelParams {
  Architecture architecture = Architecture::linear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;  // mlp only
  std::size_t num_classes = 0;
  std::vector<Layer> layers;

  /// Uniform in +-1/sqrt(fan_in) per layer.
  static ModelParams init(Architecture arch, std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                          Rng& rng);
  static ModelParams zeros(Architecture arch, std::size_t input_dim, std::size_t hidden, std::size_t num_classes);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

enum class LossKind { soft_ce, ldam };

struct LossConfig {
  LossKind kind = LossKind::soft_ce;
  double max_margin = 0.5;  // ldam
  double scale = 30.0;      // ldam
};

enum class ReweightScheme { none, inverse_freq, class_balanced };

std::string_view to_string(ReweightScheme scheme) noexcept;

struct TrainConfig {
  Architecture architecture = Architecture::mlp;
  std::size_t hidden = 64;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  std::size_t warmup_epochs = 5;
  std::vector<std::size_t> decay_epochs{80, 90};
  double decay_factor = 0.1;
  /// First re-weighted epoch. Unset with a scheme means weights from the start.
  std::optional<std::size_t> drw_epoch;
  LossConfig loss;
  ReweightScheme reweight = ReweightScheme::none;
  double cb_beta = 0.9999;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Per-class loss weights normalized to mean 1.
struct ClassWeights {
  std::vector<double> values;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits
};

Matrix forward_logits(const ModelParams& params, const Matrix& inputs);

/// Mean over rows of w_row * (-sum_k y_k log softmax(z)_k), where
/// w_row = sum_k y_k * weight_k (1 without weights).
LossResult soft_cross_entropy(const Matrix& logits, const Matrix& soft_labels, const ClassWeights* weights = nullptr);

/// Per-class margins C / n_j^(1/4), with C chosen so the largest is max_margin.
std::vector<double> ldam_margins(const ClassHistogram& counts, double max_margin);

/// Weighted cross-entropy over scale * (z - margin_y on the true logit).
LossResult ldam_loss(const Matrix& logits, std::span<const int> labels, const ClassHistogram& counts,
                     double max_margin, double scale, const ClassWeights* weights = nullptr);

/// Recovers class ids from one-hot rows; rejects any soft row.
std::vector<int> hard_labels(const Matrix& soft_labels);

/// Uniform before drw_epoch (or with scheme none), class-dependent afterwards.
ClassWeights drw_weights(const ClassHistogram& counts, std::size_t epoch, std::optional<std::size_t> drw_epoch,
                         ReweightScheme scheme, double cb_beta = 0.9999);

/// Linear warm-up from lr/warmup_epochs to lr, then cumulative step decay.
double lr_at(std::size_t epoch, const TrainConfig& config);

/// Parameter gradients of `loss` given d loss / d logits for `inputs`.
std::vector<Layer> backward(const ModelParams& params, const Matrix& inputs, const Matrix& grad_logits);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> eval_balanced_accuracy;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

/// Mini-batch SGD following the mixing loop: per batch select pairs, draw
/// lambda_x, mix, evaluate the loss under the epoch's class weights, step.
/// `mixer` unset means plain training on hard labels.
TrainResult train(const LabeledDataset& train_set, const std::optional<MixerConfig>& mixer,
                  const TrainConfig& config, const LabeledDataset* eval_set = nullptr);

/// Argmax of the logits, ties to the lowest class id.
std::vector<int> predict(const ModelParams& params, const Matrix& inputs);
Matrix export_logits(const ModelParams& params, const LabeledDataset& data);

void write_logits_csv(const Matrix& logits, const std::filesystem::path& path);
Matrix read_logits_csv(const std::filesystem::path& path);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& doc);

}  // namespace imbmix
