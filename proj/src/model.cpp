#include "imbmix/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "imbmix/error.hpp"
#include "imbmix/kernels.hpp"
#include "imbmix/metrics.hpp"

namespace imbmix {

std::string_view to_string(ReweightScheme scheme) noexcept {
  switch (scheme) {
    case ReweightScheme::none: return "none";
    case ReweightScheme::inverse_freq: return "inverse_freq";
    case ReweightScheme::class_balanced: return "class_balanced";
  }
  return "unknown";
}

namespace {

Layer make_layer(std::size_t out, std::size_t in) { return Layer{Matrix(out, in), std::vector<double>(out, 0.0)}; }

std::vector<Layer> layer_shapes(Architecture arch, std::size_t input_dim, std::size_t hidden, std::size_t classes) {
  if (arch == Architecture::linear) return {make_layer(classes, input_dim)};
  return {make_layer(hidden, input_dim), make_layer(classes, hidden)};
}

void check_params(const ModelParams& params) {
  const std::size_t expected = params.architecture == Architecture::linear ? 1 : 2;
  if (params.layers.size() != expected) throw Error(ErrorKind::shape_mismatch, "wrong number of layers");
  std::size_t in = params.input_dim;
  for (const auto& layer : params.layers) {
    if (layer.weights.cols() != in || layer.bias.size() != layer.weights.rows()) {
      throw Error(ErrorKind::shape_mismatch, "layer shapes do not chain");
    }
    in = layer.weights.rows();
  }
  if (in != params.num_classes) throw Error(ErrorKind::shape_mismatch, "last layer does not produce K outputs");
}

struct Activations {
  Matrix hidden;  // post-ReLU, mlp only
  Matrix logits;
};

Activations forward(const ModelParams& params, const Matrix& inputs) {
  if (inputs.cols() != params.input_dim) {
    throw Error(ErrorKind::shape_mismatch, "inputs have " + std::to_string(inputs.cols()) +
                                               " features, model expects " + std::to_string(params.input_dim));
  }
  Activations act;
  if (params.architecture == Architecture::linear) {
    kernels::parallel::affine(inputs, params.layers[0].weights, params.layers[0].bias, act.logits);
    return act;
  }
  kernels::parallel::affine(inputs, params.layers[0].weights, params.layers[0].bias, act.hidden);
  for (double& v : act.hidden.values()) v = std::max(v, 0.0);
  kernels::parallel::affine(act.hidden, params.layers[1].weights, params.layers[1].bias, act.logits);
  return act;
}

std::vector<Layer> backward_from(const ModelParams& params, const Matrix& inputs, const Activations& act,
                                 const Matrix& grad_logits) {
  std::vector<Layer> grads = layer_shapes(params.architecture, params.input_dim, params.hidden, params.num_classes);
  if (params.architecture == Architecture::linear) {
    kernels::parallel::affine_backward_params(grad_logits, inputs, grads[0].weights, grads[0].bias);
    return grads;
  }
  kernels::parallel::affine_backward_params(grad_logits, act.hidden, grads[1].weights, grads[1].bias);
  Matrix grad_hidden;
  kernels::parallel::affine_backward_input(grad_logits, params.layers[1].weights, grad_hidden);
  const auto h = act.hidden.values();
  auto gh = grad_hidden.values();
  for (std::size_t i = 0; i < gh.size(); ++i) {
    if (!(h[i] > 0.0)) gh[i] = 0.0;
  }
  kernels::parallel::affine_backward_params(grad_hidden, inputs, grads[0].weights, grads[0].bias);
  return grads;
}

// log softmax of one row, written into `out`.
void log_softmax(std::span<const double> z, std::span<double> out) {
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - peak);
  const double log_norm = peak + std::log(sum);
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] - log_norm;
}

void check_weights(const ClassWeights* weights, std::size_t classes) {
  if (weights && weights->values.size() != classes) {
    throw Error(ErrorKind::shape_mismatch, "class weight vector has the wrong length");
  }
}

}  // namespace

ModelParams ModelParams::zeros(Architecture arch, std::size_t input_dim, std::size_t hidden, std::size_t num_classes) {
  if (input_dim == 0 || num_classes < 2 || (arch == Architecture::mlp && hidden == 0)) {
    throw Error(ErrorKind::invalid_argument, "model dimensions must be positive and K >= 2");
  }
  return ModelParams{arch, input_dim, arch == Architecture::mlp ? hidden : 0, num_classes,
                     layer_shapes(arch, input_dim, hidden, num_classes)};
}

ModelParams ModelParams::init(Architecture arch, std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                              Rng& rng) {
  ModelParams params = zeros(arch, input_dim, hidden, num_classes);
  for (auto& layer : params.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    for (double& w : layer.weights.values()) w = (2.0 * uniform01(rng) - 1.0) * bound;
    for (double& b : layer.bias) b = (2.0 * uniform01(rng) - 1.0) * bound;
  }
  return params;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::invalid_argument, "train: " + what); };
  if (epochs == 0) bad("epochs must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(lr >= 0.0)) bad("lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) bad("decay_factor must lie in (0, 1)");
  if (drw_epoch && *drw_epoch >= epochs) bad("drw_epoch must be < epochs");
  if (architecture == Architecture::mlp && hidden == 0) bad("mlp needs hidden > 0");
  if (loss.kind == LossKind::ldam && !(loss.max_margin > 0.0 && loss.scale > 0.0)) bad("ldam margin/scale must be > 0");
  if (reweight == ReweightScheme::class_balanced && !(cb_beta > 0.0 && cb_beta < 1.0)) bad("cb_beta must lie in (0,1)");
}

Matrix forward_logits(const ModelParams& params, const Matrix& inputs) {
  check_params(params);
  return forward(params, inputs).logits;
}

std::vector<Layer> backward(const ModelParams& params, const Matrix& inputs, const Matrix& grad_logits) {
  check_params(params);
  const Activations act = forward(params, inputs);
  if (grad_logits.rows() != inputs.rows() || grad_logits.cols() != params.num_classes) {
    throw Error(ErrorKind::shape_mismatch, "logit gradient has the wrong shape");
  }
  return backward_from(params, inputs, act, grad_logits);
}

LossResult soft_cross_entropy(const Matrix& logits, const Matrix& soft_labels, const ClassWeights* weights) {
  if (logits.rows() != soft_labels.rows() || logits.cols() != soft_labels.cols()) {
    throw Error(ErrorKind::shape_mismatch, "logits and soft labels differ in shape");
  }
  if (logits.rows() == 0) throw Error(ErrorKind::invalid_argument, "empty batch");
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  check_weights(weights, k);

  LossResult result{0.0, Matrix(m, k)};
  std::vector<double> logp(k);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const auto y = soft_labels.row(r);
    double mass = 0.0;
    double row_weight = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (y[c] < 0.0) throw Error(ErrorKind::non_normalized_labels, "row " + std::to_string(r) + " has negative mass");
      mass += y[c];
      row_weight += y[c] * (weights ? weights->values[c] : 1.0);
    }
    if (std::abs(mass - 1.0) > 1e-9) {
      throw Error(ErrorKind::non_normalized_labels, "row " + std::to_string(r) + " sums to " + std::to_string(mass));
    }
    if (!weights) row_weight = 1.0;

    log_softmax(logits.row(r), logp);
    double ce = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (y[c] != 0.0) ce -= y[c] * logp[c];
    }
    result.loss += row_weight * ce;
    auto g = result.grad.row(r);
    for (std::size_t c = 0; c < k; ++c) g[c] = row_weight * (std::exp(logp[c]) - y[c]) * inv_m;
  }
  result.loss *= inv_m;
  return result;
}

std::vector<double> ldam_margins(const ClassHistogram& counts, double max_margin) {
  if (counts.counts.empty()) throw Error(ErrorKind::invalid_argument, "no classes");
  if (counts.min() == 0) throw Error(ErrorKind::empty_class, "LDAM margins need every class count >= 1");
  // The smallest class gets the largest margin.
  const double c = max_margin * std::pow(static_cast<double>(counts.min()), 0.25);
  std::vector<double> margins(counts.counts.size());
  for (std::size_t j = 0; j < margins.size(); ++j) margins[j] = c / std::pow(static_cast<double>(counts.counts[j]), 0.25);
  return margins;
}

LossResult ldam_loss(const Matrix& logits, std::span<const int> labels, const ClassHistogram& counts,
                     double max_margin, double scale, const ClassWeights* weights) {
  const std::size_t m = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != m) throw Error(ErrorKind::shape_mismatch, "label count does not match logit rows");
  if (counts.counts.size() != k) throw Error(ErrorKind::shape_mismatch, "class counts do not match logit columns");
  if (m == 0) throw Error(ErrorKind::invalid_argument, "empty batch");
  check_weights(weights, k);
  const auto margins = ldam_margins(counts, max_margin);

  LossResult result{0.0, Matrix(m, k)};
  std::vector<double> shifted(k);
  std::vector<double> logp(k);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw Error(ErrorKind::invalid_argument, "label out of range");
    }
    const auto y = static_cast<std::size_t>(labels[r]);
    const auto z = logits.row(r);
    for (std::size_t c = 0; c < k; ++c) shifted[c] = scale * (c == y ? z[c] - margins[y] : z[c]);
    log_softmax(shifted, logp);
    const double w = weights ? weights->values[y] : 1.0;
    result.loss -= w * logp[y];
    auto g = result.grad.row(r);
    for (std::size_t c = 0; c < k; ++c) g[c] = w * scale * (std::exp(logp[c]) - (c == y ? 1.0 : 0.0)) * inv_m;
  }
  result.loss *= inv_m;
  return result;
}

std::vector<int> hard_labels(const Matrix& soft_labels) {
  std::vector<int> labels(soft_labels.rows());
  for (std::size_t r = 0; r < soft_labels.rows(); ++r) {
    int hot = -1;
    for (std::size_t c = 0; c < soft_labels.cols(); ++c) {
      const double v = soft_labels(r, c);
      if (v == 1.0 && hot < 0) {
        hot = static_cast<int>(c);
      } else if (v != 0.0) {
        hot = -2;
        break;
      }
    }
    if (hot < 0) {
      throw Error(ErrorKind::hard_labels_required, "row " + std::to_string(r) + " is not a one-hot label");
    }
    labels[r] = hot;
  }
  return labels;
}

ClassWeights drw_weights(const ClassHistogram& counts, std::size_t epoch, std::optional<std::size_t> drw_epoch,
                         ReweightScheme scheme, double cb_beta) {
  const std::size_t k = counts.counts.size();
  ClassWeights w{std::vector<double>(k, 1.0)};
  if (scheme == ReweightScheme::none || (drw_epoch && epoch < *drw_epoch)) return w;
  if (counts.min() == 0) throw Error(ErrorKind::empty_class, "re-weighting needs every class count >= 1");

  for (std::size_t j = 0; j < k; ++j) {
    const auto n = static_cast<double>(counts.counts[j]);
    if (scheme == ReweightScheme::inverse_freq) {
      w.values[j] = 1.0 / n;
    } else {
      // (1 - beta) / (1 - beta^n), with 1 - beta^n = -expm1(n log beta).
      w.values[j] = (1.0 - cb_beta) / -std::expm1(n * std::log(cb_beta));
    }
  }
  const double mean = std::accumulate(w.values.begin(), w.values.end(), 0.0) / static_cast<double>(k);
  for (double& v : w.values) v /= mean;
  return w;
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  double lr = config.lr;
  if (epoch < config.warmup_epochs) {
    lr = config.lr * static_cast<double>(epoch + 1) / static_cast<double>(config.warmup_epochs);
  }
  for (std::size_t e : config.decay_epochs) {
    if (epoch >= e) lr *= config.decay_factor;
  }
  return lr;
}

namespace {

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
              double momentum, double weight_decay) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    velocity[i] = momentum * velocity[i] + g;
    params[i] -= lr * velocity[i];
  }
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix y(labels.size(), classes);
  for (std::size_t r = 0; r < labels.size(); ++r) y(r, static_cast<std::size_t>(labels[r])) = 1.0;
  return y;
}

}  // namespace

TrainResult train(const LabeledDataset& train_set, const std::optional<MixerConfig>& mixer, const TrainConfig& config,
                  const LabeledDataset* eval_set) {
  config.validate();
  if (mixer) mixer->validate();
  if (mixer && config.loss.kind == LossKind::ldam) {
    throw Error(ErrorKind::hard_labels_required, "LDAM needs hard labels and cannot be combined with a mixer");
  }
  if (eval_set && (eval_set->dim() != train_set.dim() || eval_set->num_classes() != train_set.num_classes())) {
    throw Error(ErrorKind::shape_mismatch, "eval set does not match the training set's shape");
  }

  const std::size_t n = train_set.size();
  const auto classes = static_cast<std::size_t>(train_set.num_classes());
  const ClassHistogram counts = train_set.class_counts();

  Rng init_rng = make_stream(config.seed, "init");
  Rng order_rng = make_stream(config.seed, "shuffle");
  Rng pair_rng = make_stream(config.seed, "pairs");
  Rng lambda_rng = make_stream(config.seed, "lambda");

  TrainResult result{ModelParams::init(config.architecture, train_set.dim(), config.hidden, classes, init_rng), {}};
  ModelParams& params = result.params;
  std::vector<Layer> velocity =
      layer_shapes(config.architecture, train_set.dim(), params.hidden, classes);

  std::optional<NeighborIndex> index;
  if (mixer && uses_neighbors(mixer->method)) {
    index = NeighborIndex::build(train_set, mixer->k_neighbors, mixer->method == MixMethod::smote_mix);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    const bool reweighting =
        config.reweight != ReweightScheme::none && (!config.drw_epoch || epoch >= *config.drw_epoch);
    const ClassWeights weights = drw_weights(counts, epoch, config.drw_epoch, config.reweight, config.cb_beta);
    shuffle(std::span<std::size_t>(order), order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(config.batch_size, n - start));

      Matrix inputs;
      Matrix targets;
      std::vector<int> labels;
      if (mixer) {
        const auto pairs = select_pairs(batch, mixer->method, index ? &*index : nullptr, pair_rng);
        std::vector<double> lambdas;
        if (mixer->fixed_lambda) {
          lambdas.assign(1, *mixer->fixed_lambda);
        } else if (mixer->per_pair_lambda) {
          for (std::size_t m = 0; m < pairs.size(); ++m) lambdas.push_back(sample_lambda_x(mixer->alpha, lambda_rng));
        } else {
          lambdas.assign(1, sample_lambda_x(mixer->alpha, lambda_rng));
        }
        MixedBatch mixed = mix_batch(train_set, pairs, lambdas, *mixer, counts);
        inputs = std::move(mixed.inputs);
        targets = std::move(mixed.soft_labels);
      } else {
        const LabeledDataset rows = train_set.subset(batch);
        inputs = rows.features();
        labels.assign(rows.labels().begin(), rows.labels().end());
        if (config.loss.kind == LossKind::soft_ce) targets = one_hot(labels, classes);
      }

      const Activations act = forward(params, inputs);
      const ClassWeights* w = reweighting ? &weights : nullptr;
      const LossResult loss = config.loss.kind == LossKind::ldam
                                  ? ldam_loss(act.logits, labels, counts, config.loss.max_margin, config.loss.scale, w)
                                  : soft_cross_entropy(act.logits, targets, w);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorKind::divergence, "loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                               std::to_string(batches) + " (lr " + std::to_string(lr) + ")");
      }
      const auto grads = backward_from(params, inputs, act, loss.grad);
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        sgd_step(params.layers[l].weights.values(), grads[l].weights.values(), velocity[l].weights.values(), lr,
                 config.momentum, config.weight_decay);
        sgd_step(params.layers[l].bias, grads[l].bias, velocity[l].bias, lr, config.momentum, config.weight_decay);
      }
      loss_sum += loss.loss;
      ++batches;
    }

    EpochStats stats{epoch, loss_sum / static_cast<double>(batches), lr, std::nullopt};
    if (eval_set) {
      stats.eval_balanced_accuracy = balanced_accuracy(forward(params, eval_set->features()).logits, eval_set->labels());
    }
    result.history.push_back(stats);
  }
  return result;
}

std::vector<int> predict(const ModelParams& params, const Matrix& inputs) {
  const Matrix logits = forward_logits(params, inputs);
  std::vector<int> labels(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) labels[r] = static_cast<int>(argmax(logits.row(r)));
  return labels;
}

Matrix export_logits(const ModelParams& params, const LabeledDataset& data) {
  return forward_logits(params, data.features());
}

void write_logits_csv(const Matrix& logits, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  char buf[64];
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      if (c) out.put(',');
      const auto res = std::to_chars(buf, buf + sizeof(buf), logits(r, c));
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
}

Matrix read_logits_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      const std::string_view field =
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw Error(ErrorKind::parse_error, "logits row " + std::to_string(rows + 1) + ": cannot parse '" +
                                                std::string(field) + "'");
      }
      values.push_back(v);
      ++fields;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols == 0) cols = fields;
    if (fields != cols) {
      throw Error(ErrorKind::parse_error, "logits row " + std::to_string(rows + 1) + " has " +
                                              std::to_string(fields) + " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

nlohmann::json params_to_json(const ModelParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : params.layers) {
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", std::vector<double>(layer.weights.values().begin(), layer.weights.values().end())},
                      {"bias", layer.bias}});
  }
  return {{"architecture",
           {{"kind", params.architecture == Architecture::linear ? "linear" : "mlp"},
            {"input_dim", params.input_dim},
            {"hidden", params.hidden},
            {"num_classes", params.num_classes}}},
          {"layers", layers}};
}

ModelParams params_from_json(const nlohmann::json& doc) {
  try {
    const auto& arch = doc.at("architecture");
    const std::string kind = arch.at("kind");
    if (kind != "linear" && kind != "mlp") throw Error(ErrorKind::parse_error, "unknown architecture " + kind);
    ModelParams params{kind == "linear" ? Architecture::linear : Architecture::mlp,
                       arch.at("input_dim").get<std::size_t>(), arch.at("hidden").get<std::size_t>(),
                       arch.at("num_classes").get<std::size_t>(), {}};
    for (const auto& layer : doc.at("layers")) {
      params.layers.push_back(Layer{Matrix(layer.at("rows").get<std::size_t>(), layer.at("cols").get<std::size_t>(),
                                           layer.at("weights").get<std::vector<double>>()),
                                    layer.at("bias").get<std::vector<double>>()});
    }
    check_params(params);
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad checkpoint: ") + e.what());
  }
}

}  // namespace imbmix
