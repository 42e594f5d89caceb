#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "imbmix/error.hpp"
#include "imbmix/harness.hpp"

using namespace imbmix;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::invalid_argument;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("imbmix_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_config(const std::string& method, const fs::path& out) {
  ExperimentConfig cfg;
  cfg.dataset.num_classes = 3;
  cfg.dataset.dim = 4;
  cfg.dataset.n_max = 60;
  cfg.dataset.n_eval_per_class = 20;
  cfg.dataset.rho = 10;
  cfg.method = method;
  cfg.train.hidden = 8;
  cfg.train.epochs = 4;
  cfg.train.batch_size = 16;
  cfg.train.warmup_epochs = 1;
  cfg.train.decay_epochs = {3};
  cfg.seeds = {1, 2, 3};
  cfg.output_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunRecord fake_record(std::uint64_t seed, double gap, double acc) {
  RunRecord r;
  r.seed = seed;
  r.method = "m";
  r.dataset = {{"rho", 10}};
  r.margins.margin_gap = gap;
  r.balanced_accuracy = acc;
  r.per_class_accuracy = {acc, acc};
  r.margins.per_class_accuracy = r.per_class_accuracy;
  r.margins.balanced_accuracy = acc;
  return r;
}

struct CliResult {
  int status;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(IMBMIX_CLI_PATH) + " " + args + " 2>&1";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  std::string out;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe.get())) out += buf;
  const int raw = pclose(pipe.release());
  return {WEXITSTATUS(raw), out};
}

}  // namespace

TEST(ResolveMethod, Examples) {
  const auto erm = resolve_method("erm");
  EXPECT_FALSE(erm.mixer);
  EXPECT_FALSE(erm.deferred_reweight);
  EXPECT_EQ(erm.loss, LossKind::soft_ce);

  const auto m = resolve_method("mixup-drw");
  EXPECT_EQ(m.mixer, MixMethod::mixup);
  EXPECT_TRUE(m.deferred_reweight);

  const auto s = resolve_method("smote-mix-drw");
  EXPECT_EQ(s.mixer, MixMethod::smote_mix);
  EXPECT_TRUE(s.deferred_reweight);

  const auto l = resolve_method("ldam-drw");
  EXPECT_FALSE(l.mixer);
  EXPECT_EQ(l.loss, LossKind::ldam);
  EXPECT_TRUE(l.deferred_reweight);

  const auto smote = resolve_method("smote");
  EXPECT_TRUE(smote.smote_preprocess);
  EXPECT_FALSE(smote.mixer);

  const auto drw = resolve_method("drw");
  EXPECT_FALSE(drw.mixer);
  EXPECT_TRUE(drw.deferred_reweight);
}

TEST(ResolveMethod, TotalOverCatalogAndRejectsOthers) {
  const auto names = method_catalog();
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  for (const auto& n : names) EXPECT_NO_THROW(resolve_method(n)) << n;
  for (const char* bad : {"", "cutmix", "mixup-", "drw-drw", "mixup-drw-drw", "MIXUP", "erm "}) {
    try {
      resolve_method(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::unknown_method);
      EXPECT_NE(std::string(e.what()).find("mamix-drw"), std::string::npos);
    }
  }
}

TEST(EffectiveTrain, DrwDefaults) {
  ExperimentConfig cfg;
  cfg.train.epochs = 100;
  cfg.train.reweight = ReweightScheme::none;
  const auto tr = effective_train_config(cfg, resolve_method("mamix-drw"), 7);
  EXPECT_EQ(tr.drw_epoch, 80u);
  EXPECT_EQ(tr.reweight, ReweightScheme::class_balanced);
  EXPECT_EQ(tr.seed, 7u);
  const auto plain = effective_train_config(cfg, resolve_method("mamix"), 7);
  EXPECT_EQ(plain.reweight, ReweightScheme::none);
  EXPECT_FALSE(plain.drw_epoch);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(kind_of([] { parse_experiment_config({{"bogus", 1}}); }), ErrorKind::config_error);
  EXPECT_EQ(kind_of([] { parse_experiment_config({{"train", {{"epochz", 3}}}}); }), ErrorKind::config_error);
  EXPECT_EQ(kind_of([] { parse_experiment_config({{"dataset", {{"rho", "high"}}}}); }), ErrorKind::config_error);
  EXPECT_EQ(kind_of([] { parse_experiment_config({{"method", "nope"}}); }), ErrorKind::unknown_method);
}

TEST(Config, RoundTrip) {
  auto cfg = tiny_config("remix-drw", "some/dir");
  cfg.train.drw_epoch = 2;
  cfg.mixer.omega = 0.4;
  const auto doc = config_to_json(cfg);
  EXPECT_EQ(config_to_json(parse_experiment_config(nlohmann::json::parse(doc.dump()))), doc);
  EXPECT_EQ(config_to_json(parse_experiment_config(config_to_json(default_benchmark_config()))),
            config_to_json(default_benchmark_config()));
}

TEST(Summary, SingleRunHasZeroStd) {
  const auto t = summarize({fake_record(1, 0.3, 0.7)});
  EXPECT_TRUE(t.single_run);
  EXPECT_EQ(t.balanced_accuracy.std, 0.0);
  EXPECT_EQ(t.balanced_accuracy.mean, 0.7);
}

TEST(Summary, MeanAndSampleStd) {
  const auto t = summarize({fake_record(1, 0.1, 0.5), fake_record(2, 0.2, 0.6), fake_record(3, 0.6, 0.7)});
  EXPECT_FALSE(t.single_run);
  EXPECT_NEAR(t.balanced_accuracy.mean, 0.6, 1e-15);
  EXPECT_NEAR(t.balanced_accuracy.std, 0.1, 1e-15);
  EXPECT_NEAR(t.margin_gap->mean, 0.3, 1e-15);
  const auto back = summary_from_json(nlohmann::json::parse(summary_to_json(t).dump()));
  EXPECT_EQ(summary_to_json(back), summary_to_json(t));
  const auto csv = summary_csv({t});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,rho,kind,mean,std,margin_gap_mean");
}

TEST(Compare, IdenticalTablesGiveZeroDeltas) {
  const auto t = summarize({fake_record(1, 0.1, 0.5), fake_record(2, 0.2, 0.6)});
  const auto c = compare({t, t});
  for (const auto& row : c.report["rows"]) {
    EXPECT_EQ(row["delta_accuracy"].get<double>(), 0.0);
    EXPECT_EQ(row["delta_margin_gap"].get<double>(), 0.0);
  }
  auto other = t;
  other.dataset = {{"rho", 100}};
  EXPECT_EQ(kind_of([&] { compare({t, other}); }), ErrorKind::mismatched_specs);
}

TEST(Correlate, StrictlyOpposedGivesMinusOne) {
  std::vector<RunRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(fake_record(static_cast<std::uint64_t>(i), 1.0 - 0.2 * i, 0.5 + 0.05 * i));
  const auto c = correlate(recs);
  EXPECT_EQ(c.rho, -1.0);
  EXPECT_EQ(c.report["points"].size(), 5u);
  EXPECT_EQ(std::count(c.scatter_csv.begin(), c.scatter_csv.end(), '\n'), 6);
}

TEST(Correlate, HandRankedSixRuns) {
  // gap ranks (3,1,4,2,6,5), accuracy ranks (4,6,2,5,1,3):
  // d = (-1,-5,2,-3,5,2), sum d^2 = 68, rho = 1 - 6*68/(6*35) = -33/35.
  const double gaps[] = {0.3, 0.1, 0.4, 0.2, 0.6, 0.5};
  const double accs[] = {0.64, 0.66, 0.62, 0.65, 0.61, 0.63};
  std::vector<RunRecord> recs;
  for (int i = 0; i < 6; ++i) recs.push_back(fake_record(static_cast<std::uint64_t>(i), gaps[i], accs[i]));
  EXPECT_NEAR(correlate(recs).rho, -33.0 / 35.0, 1e-12);
}

TEST(Correlate, NeedsThreeRecords) {
  EXPECT_EQ(kind_of([] { correlate({fake_record(1, 0.1, 0.5), fake_record(2, 0.2, 0.4)}); }),
            ErrorKind::undefined_statistic);
}

TEST(RunExperiment, WritesLayoutAndIsDeterministic) {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  const auto table = run_experiment(tiny_config("mamix-drw", a));
  run_experiment(tiny_config("mamix-drw", b));
  for (const char* f : {"config.json", "summary.json", "summary.csv", "timing.json"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  std::vector<RunRecord> records;
  for (std::uint64_t s : {1, 2, 3}) {
    const std::string name = "seed_" + std::to_string(s);
    for (const char* sub : {"logits", "manifests", "checkpoints"}) {
      EXPECT_FALSE(fs::is_empty(a / sub)) << sub;
    }
    const auto rec = slurp(a / "records" / (name + ".json"));
    EXPECT_EQ(rec, slurp(b / "records" / (name + ".json")));
    records.push_back(record_from_json(nlohmann::json::parse(rec)));
  }
  EXPECT_EQ(table.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  double mean = 0;
  for (const auto& r : records) mean += r.balanced_accuracy;
  EXPECT_NEAR(table.balanced_accuracy.mean, mean / 3, 1e-15);
  EXPECT_EQ(summary_to_json(summarize(records)), read_json_file(a / "summary.json"));
  for (const auto& r : records) EXPECT_EQ(r.train_counts.counts, long_tailed_counts(60, 3, 10).counts);
}

TEST(RunExperiment, RepeatedSeedGivesZeroStd) {
  const auto dir = fresh_dir("repeat");
  auto cfg = tiny_config("erm", dir);
  cfg.seeds = {4, 4, 4, 4, 4};
  const auto t = run_experiment(cfg);
  EXPECT_EQ(t.balanced_accuracy.std, 0.0);
  EXPECT_FALSE(t.single_run);
}

TEST(RunExperiment, EveryCatalogMethodRuns) {
  for (const auto& name : method_catalog()) {
    auto cfg = tiny_config(name, fresh_dir("catalog"));
    cfg.seeds = {1};
    const auto t = run_experiment(cfg);
    EXPECT_TRUE(t.single_run) << name;
    EXPECT_GT(t.balanced_accuracy.mean, 0.0) << name;
  }
}

TEST(RunExperiment, SmoteBalancesTrainingButRecordsOriginalCounts) {
  auto cfg = tiny_config("smote", fresh_dir("smote"));
  const auto out = run_single(cfg, 1);
  EXPECT_EQ(out.record.train_counts.counts, long_tailed_counts(60, 3, 10).counts);
}

TEST(Cli, MarginsSubcommand) {
  const auto dir = fresh_dir("cli_margins");
  fs::create_directories(dir);
  std::ofstream(dir / "logits.csv") << "3,1,0\n0,2,1\n0,1,4\n1,0,0\n";
  const auto r = run_cli("margins " + (dir / "logits.csv").string() + " 0,1,2,0 100,10,10 --out " +
                         (dir / "report.json").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto report = report_from_json(read_json_file(dir / "report.json"));
  EXPECT_EQ(report.per_class_margin, (std::vector<double>{1.5, 1.0, 3.0}));
  EXPECT_EQ(report.majority_mask, (std::vector<bool>{true, false, false}));
  EXPECT_DOUBLE_EQ(*report.margin_gap, 1.5 - 2.0);
}

TEST(Cli, RunCompareCorrelate) {
  const auto dir = fresh_dir("cli_run");
  fs::create_directories(dir);
  auto cfg = tiny_config("erm", dir / "unused");
  write_json_file(dir / "config.json", config_to_json(cfg));

  auto r = run_cli("run " + (dir / "config.json").string() + " --seeds 1,2 --out " + (dir / "erm").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("method,rho,kind,mean,std,margin_gap_mean"), std::string::npos);
  r = run_cli("run " + (dir / "config.json").string() + " --seeds 1,2 --method mixup-drw --out " +
              (dir / "mixup").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(read_json_file(dir / "mixup" / "summary.json")["method"], "mixup-drw");

  r = run_cli("compare " + (dir / "erm").string() + " " + (dir / "mixup").string() + " --out " +
              (dir / "cmp").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "cmp" / "comparison.csv"));

  r = run_cli("correlate '" + (dir / "*" / "records" / "*.json").string() + "' --out " + (dir / "cor").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(read_json_file(dir / "cor" / "correlation.json")["n"], 4);

  r = run_cli("run " + (dir / "config.json").string() + " --method bogus");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("unknown"), std::string::npos);

  r = run_cli("run " + (dir / "config.json").string() + " --rho 3 --imbalance step --seeds 1 --out " +
              (dir / "step").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto rec = read_json_file(dir / "step" / "records" / "seed_1.json");
  EXPECT_EQ(rec["train_counts"].get<std::vector<std::size_t>>(), step_counts(60, 3, 3, 0.5).counts);
}
