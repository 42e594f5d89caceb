#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "imbmix/augment.hpp"
#include "imbmix/data.hpp"
#include "imbmix/metrics.hpp"
#include "imbmix/model.hpp"

namespace imbmix {

struct DatasetConfig {
  std::string source = "blobs";  // blobs | csv
  int num_classes = 10;
  std::size_t dim = 16;
  std::size_t n_max = 1000;
  std::size_t n_eval_per_class = 200;
  double sep = 3.0;
  /// Seeds the source data and the held-out split; the run seed drives subsampling.
  std::uint64_t seed = 0;
  std::string csv_path;
  bool csv_header = false;
  ImbalanceKind imbalance = ImbalanceKind::long_tailed;
  double rho = 100.0;
  double mu = 0.5;
};

/// A catalog entry: base method, optionally with the deferred re-weighting suffix.
struct ResolvedMethod {
  std::string name;
  std::optional<MixMethod> mixer;
  bool smote_preprocess = false;
  LossKind loss = LossKind::soft_ce;
  bool deferred_reweight = false;
};

/// Every accepted method name.
std::vector<std::string> method_catalog();
ResolvedMethod resolve_method(std::string_view name);

struct ExperimentConfig {
  DatasetConfig dataset;
  std::string method = "erm";
  MixerConfig mixer;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path output_dir = "runs/default";
};

/// Parses the JSON experiment file. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// The desk-scale benchmark: K=10 blobs in 16-d, n_max=1000, long-tailed rho=100,
/// MLP-64, 100 epochs, re-weighting from epoch 80, seeds 1..5.
ExperimentConfig default_benchmark_config();

/// Effective training recipe for a method (DRW epoch, scheme and loss filled in).
TrainConfig effective_train_config(const ExperimentConfig& config, const ResolvedMethod& method, std::uint64_t seed);

struct RunRecord {
  std::uint64_t seed = 0;
  std::string method;
  nlohmann::json dataset;  // descriptor, identical across a table
  ClassHistogram train_counts;
  double balanced_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  MarginReport margins;
  std::vector<double> epoch_loss;
};

nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& doc);

/// One seed end to end. The logits of the held-out set and the model are
/// returned alongside the record.
struct RunOutput {
  RunRecord record;
  Matrix eval_logits;
  ModelParams params;
  std::vector<std::vector<std::size_t>> manifest;
};

RunOutput run_single(const ExperimentConfig& config, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n-1) convention; 0 for one run
};

struct SummaryTable {
  std::string method;
  nlohmann::json dataset;
  std::vector<std::uint64_t> seeds;
  bool single_run = false;
  MetricSummary balanced_accuracy;
  std::optional<MetricSummary> margin_gap;
  MetricSummary l2_fit_error;
  std::vector<MetricSummary> per_class_accuracy;
};

MetricSummary summarize_values(const std::vector<double>& values);
SummaryTable summarize(const std::vector<RunRecord>& records);
nlohmann::json summary_to_json(const SummaryTable& table);
SummaryTable summary_from_json(const nlohmann::json& doc);
/// method,rho,kind,mean,std,margin_gap_mean rows.
std::string summary_csv(const std::vector<SummaryTable>& tables);

/// Runs every seed (in parallel), writing into config.output_dir:
///   config.json, records/seed_<s>.json, logits/seed_<s>.csv,
///   manifests/seed_<s>.json, checkpoints/seed_<s>.json,
///   summary.json, summary.csv, timing.json.
/// If any seed fails the completed records stay on disk and the error is rethrown.
SummaryTable run_experiment(const ExperimentConfig& config);

struct Comparison {
  nlohmann::json report;
  std::string csv;
};

/// Side-by-side view of summaries over the same dataset; deltas are relative
/// to the first table.
Comparison compare(const std::vector<SummaryTable>& tables);

struct Correlation {
  double rho = 0.0;
  nlohmann::json report;
  std::string scatter_csv;  // method,seed,margin_gap,balanced_accuracy
};

/// Spearman correlation between margin gap and balanced accuracy across records.
Correlation correlate(const std::vector<RunRecord>& records);

/// Expands files, directories (every *.json under records/ or the directory
/// itself) and glob patterns into record files, sorted.
std::vector<std::filesystem::path> expand_record_paths(const std::vector<std::string>& args);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `doc.dump(2)` plus a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace imbmix
