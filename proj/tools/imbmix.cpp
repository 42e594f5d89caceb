// imbmix: run imbalanced-classification experiments and analyze margins.
//
//   imbmix run <config.json> [--seeds 1,2,3] [--out dir] [--method name] [--rho r] [--imbalance lt|step] [--header]
//   imbmix compare <summary.json|dir>...
//   imbmix correlate <records-glob|dir|file>...
//   imbmix margins <logits.csv> <labels> <counts>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "imbmix/error.hpp"
#include "imbmix/harness.hpp"
#include "imbmix/metrics.hpp"
#include "imbmix/model.hpp"

namespace fs = std::filesystem;
using namespace imbmix;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    std::istringstream field(item);
    T v{};
    if (!(field >> v)) throw Error(ErrorKind::parse_error, "cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// A comma list inline, or a file of integers separated by commas/whitespace.
template <typename T>
std::vector<T> list_arg(const std::string& arg) {
  if (!fs::exists(arg)) return parse_list<T>(arg);
  std::ifstream in(arg);
  std::vector<T> out;
  std::string tok;
  while (in >> tok) {
    for (auto v : parse_list<T>(tok)) out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << text;
}

SummaryTable load_summary(const std::string& arg) {
  const fs::path p = fs::is_directory(arg) ? fs::path(arg) / "summary.json" : fs::path(arg);
  return summary_from_json(read_json_file(p));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixup-family training and margin analytics for imbalanced classification"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a multi-seed experiment from a JSON config");
  std::string config_path;
  std::string seeds_arg, out_arg, method_arg, imbalance_arg;
  double rho_arg = 0.0;
  run->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seeds", seeds_arg, "comma-separated seeds");
  run->add_option("--out", out_arg, "output directory");
  run->add_option("--method", method_arg, "method name, e.g. mamix-drw");
  run->add_option("--rho", rho_arg, "imbalance ratio");
  run->add_option("--imbalance", imbalance_arg, "lt or step")->check(CLI::IsMember({"lt", "step"}));
  bool csv_header = false;
  run->add_flag("--header", csv_header, "csv source has a header line to skip");

  auto* cmp = app.add_subcommand("compare", "compare experiment summaries");
  std::vector<std::string> summaries;
  std::string cmp_out;
  cmp->add_option("summaries", summaries, "summary.json files or experiment directories")->required();
  cmp->add_option("--out", cmp_out, "directory for comparison.json/.csv");

  auto* cor = app.add_subcommand("correlate", "Spearman correlation of margin gap vs accuracy");
  std::vector<std::string> record_args;
  std::string cor_out;
  cor->add_option("records", record_args, "record files, directories, or glob patterns")->required();
  cor->add_option("--out", cor_out, "directory for correlation.json and scatter.csv");

  auto* mar = app.add_subcommand("margins", "margin report from exported logits");
  std::string logits_path, labels_arg, counts_arg, mar_out;
  mar->add_option("logits", logits_path, "logits CSV (n x K)")->required()->check(CLI::ExistingFile);
  mar->add_option("labels", labels_arg, "label file or comma list")->required();
  mar->add_option("counts", counts_arg, "training class counts: file or comma list")->required();
  mar->add_option("--out", mar_out, "write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (!seeds_arg.empty()) cfg.seeds = parse_list<std::uint64_t>(seeds_arg);
      if (!out_arg.empty()) cfg.output_dir = out_arg;
      if (!method_arg.empty()) {
        resolve_method(method_arg);
        cfg.method = method_arg;
      }
      if (rho_arg > 0.0) cfg.dataset.rho = rho_arg;
      if (csv_header) cfg.dataset.csv_header = true;
      if (!imbalance_arg.empty()) {
        cfg.dataset.imbalance = imbalance_arg == "lt" ? ImbalanceKind::long_tailed : ImbalanceKind::step;
      }
      const SummaryTable table = run_experiment(cfg);
      std::cout << summary_csv({table});
    } else if (*cmp) {
      std::vector<SummaryTable> tables;
      for (const auto& s : summaries) tables.push_back(load_summary(s));
      const Comparison c = compare(tables);
      if (!cmp_out.empty()) {
        fs::create_directories(cmp_out);
        write_json_file(fs::path(cmp_out) / "comparison.json", c.report);
        write_text(fs::path(cmp_out) / "comparison.csv", c.csv);
      }
      std::cout << c.csv;
    } else if (*cor) {
      std::vector<RunRecord> records;
      for (const auto& p : expand_record_paths(record_args)) records.push_back(record_from_json(read_json_file(p)));
      const Correlation c = correlate(records);
      if (!cor_out.empty()) {
        fs::create_directories(cor_out);
        write_json_file(fs::path(cor_out) / "correlation.json", c.report);
        write_text(fs::path(cor_out) / "scatter.csv", c.scatter_csv);
      }
      std::cout << "spearman_rho," << c.rho << "\nn," << records.size() << "\n";
    } else if (*mar) {
      const Matrix logits = read_logits_csv(logits_path);
      const auto labels = list_arg<int>(labels_arg);
      const ClassHistogram counts{list_arg<std::size_t>(counts_arg)};
      if (counts.num_classes() != logits.cols()) {
        throw Error(ErrorKind::shape_mismatch, "counts list has " + std::to_string(counts.num_classes()) +
                                                   " classes, logits have " + std::to_string(logits.cols()));
      }
      const auto doc = report_to_json(margin_report(logits, labels, counts));
      if (mar_out.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        write_json_file(mar_out, doc);
      }
    }
  } catch (const Error& e) {
    std::cerr << "imbmix: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "imbmix: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
