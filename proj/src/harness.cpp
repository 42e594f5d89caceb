#include "imbmix/harness.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "imbmix/error.hpp"

namespace imbmix {

namespace {

constexpr std::string_view kDrwSuffix = "-drw";

struct BaseMethod {
  std::string_view name;
  std::optional<MixMethod> mixer;
  bool smote_preprocess;
  LossKind loss;
};

constexpr BaseMethod kBaseMethods[] = {
    {"erm", std::nullopt, false, LossKind::soft_ce},
    {"ldam", std::nullopt, false, LossKind::ldam},
    {"smote", std::nullopt, true, LossKind::soft_ce},
    {"smote-mix", MixMethod::smote_mix, false, LossKind::soft_ce},
    {"neighbor-mix", MixMethod::neighbor_mix, false, LossKind::soft_ce},
    {"mixup", MixMethod::mixup, false, LossKind::soft_ce},
    {"remix", MixMethod::remix, false, LossKind::soft_ce},
    {"mamix", MixMethod::mamix, false, LossKind::soft_ce},
    {"mamix-remix", MixMethod::mamix_remix, false, LossKind::soft_ce},
};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::config_error, what); }

void reject_unknown_keys(const nlohmann::json& section, std::string_view where,
                         std::initializer_list<std::string_view> allowed) {
  if (!section.is_object()) config_error(std::string(where) + " must be an object");
  for (const auto& [key, value] : section.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_if(const nlohmann::json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string kind_name(ImbalanceKind kind) { return kind == ImbalanceKind::long_tailed ? "long_tailed" : "step"; }

ImbalanceKind parse_kind(const std::string& s) {
  if (s == "long_tailed" || s == "lt") return ImbalanceKind::long_tailed;
  if (s == "step") return ImbalanceKind::step;
  config_error("imbalance must be long_tailed|lt|step, got '" + s + "'");
}

ReweightScheme parse_scheme(const std::string& s) {
  if (s == "none") return ReweightScheme::none;
  if (s == "inverse_freq") return ReweightScheme::inverse_freq;
  if (s == "class_balanced") return ReweightScheme::class_balanced;
  config_error("reweight must be none|inverse_freq|class_balanced, got '" + s + "'");
}

nlohmann::json dataset_descriptor(const DatasetConfig& d) {
  nlohmann::json j{{"source", d.source},
                   {"num_classes", d.num_classes},
                   {"n_max", d.n_max},
                   {"n_eval_per_class", d.n_eval_per_class},
                   {"seed", d.seed},
                   {"imbalance", kind_name(d.imbalance)},
                   {"rho", d.rho}};
  if (d.imbalance == ImbalanceKind::step) j["mu"] = d.mu;
  if (d.source == "blobs") {
    j["dim"] = d.dim;
    j["sep"] = d.sep;
  } else {
    j["csv_path"] = d.csv_path;
  }
  return j;
}

std::string seed_file(std::uint64_t seed, std::string_view ext) {
  return "seed_" + std::to_string(seed) + std::string(ext);
}

}  // namespace

std::vector<std::string> method_catalog() {
  std::vector<std::string> names{"drw"};
  for (const auto& base : kBaseMethods) {
    names.emplace_back(base.name);
    names.emplace_back(std::string(base.name) + std::string(kDrwSuffix));
  }
  return names;
}

ResolvedMethod resolve_method(std::string_view name) {
  std::string_view base_name = name;
  bool deferred = false;
  if (name == "drw") {
    base_name = "erm";
    deferred = true;
  } else if (name.size() > kDrwSuffix.size() && name.ends_with(kDrwSuffix)) {
    base_name = name.substr(0, name.size() - kDrwSuffix.size());
    deferred = true;
  }
  for (const auto& base : kBaseMethods) {
    if (base.name == base_name) {
      return ResolvedMethod{std::string(name), base.mixer, base.smote_preprocess, base.loss, deferred};
    }
  }
  std::string valid;
  for (const auto& n : method_catalog()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::unknown_method, "'" + std::string(name) + "'; valid methods: " + valid);
}

ExperimentConfig default_benchmark_config() { return ExperimentConfig{}; }

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
  reject_unknown_keys(doc, "config", {"dataset", "method", "mixer", "train", "seeds", "output_dir"});
  ExperimentConfig cfg;

  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    reject_unknown_keys(d, "dataset",
                        {"source", "num_classes", "dim", "n_max", "n_eval_per_class", "sep", "seed", "csv_path",
                         "csv_header", "imbalance", "rho", "mu"});
    auto& ds = cfg.dataset;
    read_if(d, "source", ds.source);
    read_if(d, "num_classes", ds.num_classes);
    read_if(d, "dim", ds.dim);
    read_if(d, "n_max", ds.n_max);
    read_if(d, "n_eval_per_class", ds.n_eval_per_class);
    read_if(d, "sep", ds.sep);
    read_if(d, "seed", ds.seed);
    read_if(d, "csv_path", ds.csv_path);
    read_if(d, "csv_header", ds.csv_header);
    std::string kind = kind_name(ds.imbalance);
    read_if(d, "imbalance", kind);
    ds.imbalance = parse_kind(kind);
    read_if(d, "rho", ds.rho);
    read_if(d, "mu", ds.mu);
    if (ds.source != "blobs" && ds.source != "csv") config_error("dataset.source must be blobs or csv");
    if (ds.source == "csv" && ds.csv_path.empty()) config_error("dataset.csv_path is required for csv sources");
  }

  read_if(doc, "method", cfg.method);
  resolve_method(cfg.method);

  if (doc.contains("mixer")) {
    const auto& m = doc.at("mixer");
    reject_unknown_keys(m, "mixer", {"alpha", "omega", "tau", "p_majority", "k_neighbors", "per_pair_lambda"});
    read_if(m, "alpha", cfg.mixer.alpha);
    read_if(m, "omega", cfg.mixer.omega);
    read_if(m, "tau", cfg.mixer.tau);
    read_if(m, "p_majority", cfg.mixer.p_majority);
    read_if(m, "k_neighbors", cfg.mixer.k_neighbors);
    read_if(m, "per_pair_lambda", cfg.mixer.per_pair_lambda);
  }
  cfg.mixer.validate();

  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    reject_unknown_keys(t, "train",
                        {"architecture", "hidden", "epochs", "batch_size", "lr", "momentum", "weight_decay",
                         "warmup_epochs", "decay_epochs", "decay_factor", "drw_epoch", "reweight", "cb_beta",
                         "ldam_max_margin", "ldam_scale"});
    auto& tr = cfg.train;
    std::string arch = tr.architecture == Architecture::mlp ? "mlp" : "linear";
    read_if(t, "architecture", arch);
    if (arch != "mlp" && arch != "linear") config_error("train.architecture must be mlp or linear");
    tr.architecture = arch == "mlp" ? Architecture::mlp : Architecture::linear;
    read_if(t, "hidden", tr.hidden);
    read_if(t, "epochs", tr.epochs);
    read_if(t, "batch_size", tr.batch_size);
    read_if(t, "lr", tr.lr);
    read_if(t, "momentum", tr.momentum);
    read_if(t, "weight_decay", tr.weight_decay);
    read_if(t, "warmup_epochs", tr.warmup_epochs);
    read_if(t, "decay_epochs", tr.decay_epochs);
    read_if(t, "decay_factor", tr.decay_factor);
    if (t.contains("drw_epoch")) {
      std::size_t e = 0;
      read_if(t, "drw_epoch", e);
      tr.drw_epoch = e;
    }
    std::string scheme = "class_balanced";
    read_if(t, "reweight", scheme);
    tr.reweight = parse_scheme(scheme);
    read_if(t, "cb_beta", tr.cb_beta);
    read_if(t, "ldam_max_margin", tr.loss.max_margin);
    read_if(t, "ldam_scale", tr.loss.scale);
  } else {
    cfg.train.reweight = ReweightScheme::class_balanced;
  }

  read_if(doc, "seeds", cfg.seeds);
  if (cfg.seeds.empty()) config_error("at least one seed is required");
  std::string out = cfg.output_dir.string();
  read_if(doc, "output_dir", out);
  cfg.output_dir = out;
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_json_file(path));
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  const auto& tr = cfg.train;
  nlohmann::json dataset{{"source", ds.source},
                         {"num_classes", ds.num_classes},
                         {"dim", ds.dim},
                         {"n_max", ds.n_max},
                         {"n_eval_per_class", ds.n_eval_per_class},
                         {"sep", ds.sep},
                         {"seed", ds.seed},
                         {"csv_path", ds.csv_path},
                         {"csv_header", ds.csv_header},
                         {"imbalance", kind_name(ds.imbalance)},
                         {"rho", ds.rho},
                         {"mu", ds.mu}};
  nlohmann::json train{{"architecture", tr.architecture == Architecture::mlp ? "mlp" : "linear"},
                       {"hidden", tr.hidden},
                       {"epochs", tr.epochs},
                       {"batch_size", tr.batch_size},
                       {"lr", tr.lr},
                       {"momentum", tr.momentum},
                       {"weight_decay", tr.weight_decay},
                       {"warmup_epochs", tr.warmup_epochs},
                       {"decay_epochs", tr.decay_epochs},
                       {"decay_factor", tr.decay_factor},
                       {"reweight", to_string(tr.reweight)},
                       {"cb_beta", tr.cb_beta},
                       {"ldam_max_margin", tr.loss.max_margin},
                       {"ldam_scale", tr.loss.scale}};
  if (tr.drw_epoch) train["drw_epoch"] = *tr.drw_epoch;
  return {{"dataset", dataset},
          {"method", cfg.method},
          {"mixer",
           {{"alpha", cfg.mixer.alpha},
            {"omega", cfg.mixer.omega},
            {"tau", cfg.mixer.tau},
            {"p_majority", cfg.mixer.p_majority},
            {"k_neighbors", cfg.mixer.k_neighbors},
            {"per_pair_lambda", cfg.mixer.per_pair_lambda}}},
          {"train", train},
          {"seeds", cfg.seeds},
          {"output_dir", cfg.output_dir.string()}};
}

TrainConfig effective_train_config(const ExperimentConfig& config, const ResolvedMethod& method, std::uint64_t seed) {
  TrainConfig tr = config.train;
  tr.seed = seed;
  tr.loss.kind = method.loss;
  if (method.deferred_reweight) {
    if (!tr.drw_epoch) tr.drw_epoch = static_cast<std::size_t>(round_half_up(0.8 * static_cast<double>(tr.epochs)));
    if (tr.reweight == ReweightScheme::none) tr.reweight = ReweightScheme::class_balanced;
  } else {
    tr.drw_epoch.reset();
    tr.reweight = ReweightScheme::none;
  }
  return tr;
}

RunOutput run_single(const ExperimentConfig& config, std::uint64_t seed) {
  const ResolvedMethod method = resolve_method(config.method);
  const DatasetConfig& ds = config.dataset;

  // The source pool and the balanced held-out set are shared by every seed.
  const LabeledDataset source =
      ds.source == "csv" ? load_csv(ds.csv_path, ds.csv_header)
                         : synth_gaussian_blobs(ds.num_classes, ds.dim, ds.n_max + ds.n_eval_per_class, ds.sep, ds.seed);
  const BalancedSplit split = split_balanced_eval(source, ds.n_eval_per_class, ds.seed);

  ImbalanceSpec spec{ds.imbalance, ds.rho, ds.mu, derive_seed(seed, "imbalance"), ds.n_max, std::nullopt};
  Subsample sub = subsample_imbalanced(split.train, spec);
  const ClassHistogram train_counts = sub.data.class_counts();

  LabeledDataset train_set = std::move(sub.data);
  if (method.smote_preprocess) {
    Rng rng = make_stream(seed, "smote");
    train_set = smote_oversample(train_set, config.mixer.k_neighbors, rng);
  }

  std::optional<MixerConfig> mixer;
  if (method.mixer) {
    mixer = config.mixer;
    mixer->method = *method.mixer;
  }
  const TrainConfig tr = effective_train_config(config, method, seed);
  TrainResult trained = train(train_set, mixer, tr);

  RunOutput out{RunRecord{}, export_logits(trained.params, split.eval), std::move(trained.params),
                std::move(sub.selected)};
  RunRecord& rec = out.record;
  rec.seed = seed;
  rec.method = config.method;
  rec.dataset = dataset_descriptor(ds);
  rec.train_counts = train_counts;
  rec.margins = margin_report(out.eval_logits, split.eval.labels(), train_counts);
  rec.balanced_accuracy = rec.margins.balanced_accuracy;
  rec.per_class_accuracy = rec.margins.per_class_accuracy;
  for (const auto& e : trained.history) rec.epoch_loss.push_back(e.loss);
  return out;
}

nlohmann::json record_to_json(const RunRecord& r) {
  return {{"seed", r.seed},
          {"method", r.method},
          {"dataset", r.dataset},
          {"train_counts", r.train_counts.counts},
          {"balanced_accuracy", r.balanced_accuracy},
          {"per_class_accuracy", r.per_class_accuracy},
          {"margin_report", report_to_json(r.margins)},
          {"epoch_loss", r.epoch_loss}};
}

RunRecord record_from_json(const nlohmann::json& doc) {
  try {
    RunRecord r;
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.method = doc.at("method").get<std::string>();
    r.dataset = doc.at("dataset");
    r.train_counts.counts = doc.at("train_counts").get<std::vector<std::size_t>>();
    r.balanced_accuracy = doc.at("balanced_accuracy").get<double>();
    r.per_class_accuracy = doc.at("per_class_accuracy").get<std::vector<double>>();
    r.margins = report_from_json(doc.at("margin_report"));
    r.epoch_loss = doc.at("epoch_loss").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad run record: ") + e.what());
  }
}

MetricSummary summarize_values(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::invalid_argument, "nothing to summarize");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  // Repeated values summarize exactly, without the rounding of the running sum.
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

SummaryTable summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "no records to summarize");
  SummaryTable t;
  t.method = records.front().method;
  t.dataset = records.front().dataset;
  t.single_run = records.size() == 1;
  std::vector<double> acc, gap, l2;
  const std::size_t k = records.front().per_class_accuracy.size();
  std::vector<std::vector<double>> per_class(k);
  bool all_gaps = true;
  for (const auto& r : records) {
    if (r.method != t.method || r.dataset != t.dataset) {
      throw Error(ErrorKind::mismatched_specs, "records of one summary must share method and dataset");
    }
    t.seeds.push_back(r.seed);
    acc.push_back(r.balanced_accuracy);
    l2.push_back(r.margins.l2_fit_error);
    if (r.margins.margin_gap) {
      gap.push_back(*r.margins.margin_gap);
    } else {
      all_gaps = false;
    }
    for (std::size_t c = 0; c < k; ++c) per_class[c].push_back(r.per_class_accuracy.at(c));
  }
  t.balanced_accuracy = summarize_values(acc);
  t.l2_fit_error = summarize_values(l2);
  if (all_gaps) t.margin_gap = summarize_values(gap);
  for (const auto& v : per_class) t.per_class_accuracy.push_back(summarize_values(v));
  return t;
}

namespace {

nlohmann::json metric_json(const MetricSummary& m) { return {{"mean", m.mean}, {"std", m.std}}; }
MetricSummary metric_from(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

nlohmann::json summary_to_json(const SummaryTable& t) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& m : t.per_class_accuracy) per_class.push_back(metric_json(m));
  return {{"method", t.method},
          {"dataset", t.dataset},
          {"seeds", t.seeds},
          {"runs", t.seeds.size()},
          {"single_run", t.single_run},
          {"balanced_accuracy", metric_json(t.balanced_accuracy)},
          {"margin_gap", t.margin_gap ? metric_json(*t.margin_gap) : nlohmann::json()},
          {"l2_fit_error", metric_json(t.l2_fit_error)},
          {"per_class_accuracy", per_class}};
}

SummaryTable summary_from_json(const nlohmann::json& doc) {
  try {
    SummaryTable t;
    t.method = doc.at("method").get<std::string>();
    t.dataset = doc.at("dataset");
    t.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    t.single_run = doc.at("single_run").get<bool>();
    t.balanced_accuracy = metric_from(doc.at("balanced_accuracy"));
    if (!doc.at("margin_gap").is_null()) t.margin_gap = metric_from(doc.at("margin_gap"));
    t.l2_fit_error = metric_from(doc.at("l2_fit_error"));
    for (const auto& m : doc.at("per_class_accuracy")) t.per_class_accuracy.push_back(metric_from(m));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("bad summary: ") + e.what());
  }
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::string dataset_rho(const nlohmann::json& d) {
  std::ostringstream os;
  os << d.value("rho", 0.0);
  return os.str();
}

}  // namespace

std::string summary_csv(const std::vector<SummaryTable>& tables) {
  std::string csv = "method,rho,kind,mean,std,margin_gap_mean\n";
  for (const auto& t : tables) {
    csv += t.method + "," + dataset_rho(t.dataset) + "," + t.dataset.value("imbalance", std::string()) + "," +
           fmt(t.balanced_accuracy.mean) + "," + fmt(t.balanced_accuracy.std) + "," +
           (t.margin_gap ? fmt(t.margin_gap->mean) : std::string()) + "\n";
  }
  return csv;
}

SummaryTable run_experiment(const ExperimentConfig& config) {
  resolve_method(config.method);
  config.mixer.validate();
  namespace fs = std::filesystem;
  const fs::path out = config.output_dir;
  for (const char* sub : {"records", "logits", "manifests", "checkpoints"}) fs::create_directories(out / sub);
  write_json_file(out / "config.json", config_to_json(config));

  const std::size_t runs = config.seeds.size();
  std::vector<std::optional<RunRecord>> records(runs);
  std::vector<std::string> failures(runs);
  std::vector<double> seconds(runs, 0.0);

  // Runs own their rng streams and output files; the kernels inside a run fall
  // back to one thread when nested in this region.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(runs); ++s) {
    const auto i = static_cast<std::size_t>(s);
    const std::uint64_t seed = config.seeds[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      RunOutput run = run_single(config, seed);
      write_json_file(out / "records" / seed_file(seed, ".json"), record_to_json(run.record));
      write_logits_csv(run.eval_logits, out / "logits" / seed_file(seed, ".csv"));
      write_json_file(out / "manifests" / seed_file(seed, ".json"), manifest_to_json(run.manifest));
      write_json_file(out / "checkpoints" / seed_file(seed, ".json"), params_to_json(run.params));
      records[i] = std::move(run.record);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  nlohmann::json timing = nlohmann::json::object();
  for (std::size_t i = 0; i < runs; ++i) timing[std::to_string(config.seeds[i])] = seconds[i];
  write_json_file(out / "timing.json", {{"wall_seconds", timing}});

  std::string failed;
  for (std::size_t i = 0; i < runs; ++i) {
    if (!failures[i].empty()) failed += "\n  seed " + std::to_string(config.seeds[i]) + ": " + failures[i];
  }
  if (!failed.empty()) throw Error(ErrorKind::divergence, "experiment aborted; failed seeds:" + failed);

  std::vector<RunRecord> done;
  for (auto& r : records) done.push_back(std::move(*r));
  SummaryTable table = summarize(done);
  write_json_file(out / "summary.json", summary_to_json(table));
  std::ofstream(out / "summary.csv") << summary_csv({table});
  return table;
}

Comparison compare(const std::vector<SummaryTable>& tables) {
  if (tables.empty()) throw Error(ErrorKind::invalid_argument, "nothing to compare");
  const auto& base = tables.front();
  Comparison cmp;
  cmp.report = {{"dataset", base.dataset}, {"baseline", base.method}, {"rows", nlohmann::json::array()}};
  cmp.csv = "method,accuracy_mean,accuracy_std,delta_accuracy,margin_gap_mean,delta_margin_gap\n";
  for (const auto& t : tables) {
    if (t.dataset != base.dataset) {
      throw Error(ErrorKind::mismatched_specs, "summary for '" + t.method + "' was run on a different dataset");
    }
    const double d_acc = t.balanced_accuracy.mean - base.balanced_accuracy.mean;
    nlohmann::json row{{"method", t.method},
                       {"accuracy_mean", t.balanced_accuracy.mean},
                       {"accuracy_std", t.balanced_accuracy.std},
                       {"delta_accuracy", d_acc},
                       {"margin_gap_mean", nlohmann::json()},
                       {"delta_margin_gap", nlohmann::json()}};
    std::string gap_cols = ",";
    if (t.margin_gap && base.margin_gap) {
      const double d_gap = t.margin_gap->mean - base.margin_gap->mean;
      row["margin_gap_mean"] = t.margin_gap->mean;
      row["delta_margin_gap"] = d_gap;
      gap_cols = fmt(t.margin_gap->mean) + "," + fmt(d_gap);
    }
    cmp.report["rows"].push_back(row);
    cmp.csv += t.method + "," + fmt(t.balanced_accuracy.mean) + "," + fmt(t.balanced_accuracy.std) + "," + fmt(d_acc) +
               "," + gap_cols + "\n";
  }
  return cmp;
}

Correlation correlate(const std::vector<RunRecord>& records) {
  std::vector<double> gaps, accs;
  Correlation c;
  c.scatter_csv = "method,seed,margin_gap,balanced_accuracy\n";
  nlohmann::json points = nlohmann::json::array();
  for (const auto& r : records) {
    if (!r.margins.margin_gap) {
      throw Error(ErrorKind::degenerate_split, "record " + r.method + "/" + std::to_string(r.seed) + " has no margin gap");
    }
    gaps.push_back(*r.margins.margin_gap);
    accs.push_back(r.balanced_accuracy);
    points.push_back({{"method", r.method}, {"seed", r.seed}, {"margin_gap", gaps.back()},
                      {"balanced_accuracy", accs.back()}});
    c.scatter_csv += r.method + "," + std::to_string(r.seed) + "," + fmt(gaps.back()) + "," + fmt(accs.back()) + "\n";
  }
  if (records.size() < 3) throw Error(ErrorKind::undefined_statistic, "correlation needs at least three records");
  c.rho = spearman_rho(gaps, accs);
  c.report = {{"spearman_rho", c.rho}, {"n", records.size()}, {"points", points}};
  return c;
}

std::vector<std::filesystem::path> expand_record_paths(const std::vector<std::string>& args) {
  namespace fs = std::filesystem;
  std::set<fs::path> found;
  for (const auto& arg : args) {
    if (arg.find_first_of("*?[") != std::string::npos) {
      glob_t g{};
      if (::glob(arg.c_str(), 0, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) found.insert(g.gl_pathv[i]);
      }
      ::globfree(&g);
    } else if (fs::is_directory(arg)) {
      const fs::path dir = fs::is_directory(fs::path(arg) / "records") ? fs::path(arg) / "records" : fs::path(arg);
      for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json" &&
            entry.path().parent_path().filename() == "records") {
          found.insert(entry.path());
        }
      }
    } else if (fs::exists(arg)) {
      found.insert(arg);
    } else {
      throw Error(ErrorKind::io_error, "no such file: " + arg);
    }
  }
  return {found.begin(), found.end()};
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace imbmix
