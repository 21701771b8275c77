#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "imle/commands.hpp"
#include "imle/errors.hpp"
#include "imle/flow_matching.hpp"

namespace imle {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("imle_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "imle_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path WriteText(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

Policy SmallPolicy(NetKind kind) {
  Rng rng(3);
  Policy p;
  p.horizons = {2, 4, 2};
  p.flow_steps = kind == NetKind::kVelocity ? 5 : 1;
  p.normalizer.obs_min = {-1.0, 0.0, 2.0};
  p.normalizer.obs_max = {1.0, 0.5, 3.0};
  p.normalizer.act_min = {-0.02, -0.03};
  p.normalizer.act_max = {0.02, 0.01};
  const std::size_t in = kind == NetKind::kVelocity ? 8 + 6 + 1 : 8 + 6;
  p.net = GeneratorNet::Initialized({in, 12, 8}, OutputShape{4, 2}, rng, kind);
  return p;
}

TEST(CheckpointTest, RoundTripAndHeader) {
  for (NetKind kind : {NetKind::kGenerator, NetKind::kVelocity}) {
    const Policy p = SmallPolicy(kind);
    const std::string bytes = SerializeCheckpoint(p);
    EXPECT_EQ(bytes.substr(0, 6), "IMLEv1");
    const Policy q = DeserializeCheckpoint(bytes);
    EXPECT_EQ(q.net, p.net);
    EXPECT_EQ(q.normalizer, p.normalizer);
    EXPECT_EQ(q.horizons, p.horizons);
    EXPECT_EQ(q.flow_steps, p.flow_steps);
    EXPECT_EQ(SerializeCheckpoint(q), bytes);
  }
}

TEST(CheckpointTest, RejectsCorruptInput) {
  std::string bytes = SerializeCheckpoint(SmallPolicy(NetKind::kGenerator));
  EXPECT_THROW(DeserializeCheckpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(DeserializeCheckpoint(bytes + "x"), FormatError);
  bytes[0] = 'X';
  EXPECT_THROW(DeserializeCheckpoint(bytes), FormatError);
}

TEST(DatasetFileTest, RoundTrip) {
  RunConfig cfg = DefaultConfig(Task::kPushLite);
  cfg.n_demos = 3;
  const Dataset ds = BuildDataset(cfg);
  const Dataset back = DeserializeDataset(SerializeDataset(ds));
  EXPECT_EQ(back.task, "pushlite");
  EXPECT_EQ(back.spec_text, ds.spec_text);
  EXPECT_EQ(back.normalizer, ds.normalizer);
  EXPECT_EQ(back.episode, ds.episode);
  EXPECT_EQ(back.mode, ds.mode);
  ASSERT_EQ(back.demos.size(), ds.demos.size());
  for (std::size_t i = 0; i < ds.demos.size(); ++i) {
    EXPECT_EQ(back.demos[i].observation, ds.demos[i].observation);
    EXPECT_EQ(back.demos[i].actions, ds.demos[i].actions);
  }
  EXPECT_EQ(back.num_episodes(), 3u);
}

TEST(ConfigTest, RoundTrip) {
  for (Task task : {Task::kToy, Task::kPushLite}) {
    RunConfig cfg = DefaultConfig(task);
    EXPECT_EQ(ParseConfig(SerializeConfig(cfg)), cfg);
    cfg.method = Method::kFmK;
    cfg.seed = 12345678901234ULL;
    cfg.train.adam.lr = 0.1 + 0.2;
    cfg.train.epsilon = 1.0 / 3.0;
    cfg.fractions = {0.25, 0.5, 1.0};
    cfg.sweep_methods = {Method::kImleNoConsistency, Method::kFmK};
    cfg.out_dir = "some dir/x";
    EXPECT_EQ(ParseConfig(SerializeConfig(cfg)), cfg);
  }
}

TEST(ConfigTest, PartialFileKeepsTaskDefaults) {
  const RunConfig cfg = ParseConfig("[run]\ntask = pushlite\nseed = 4\n\n[train]\nepochs = 7\n");
  RunConfig want = DefaultConfig(Task::kPushLite);
  want.seed = 4;
  want.train.epochs = 7;
  EXPECT_EQ(cfg, want);
}

TEST(ConfigTest, RejectsMalformedInput) {
  EXPECT_THROW(ParseConfig("[run]\nmethod = unknown\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[run]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[nosuch]\nx = 1\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[train]\nepochs = 12abc\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[run]\nfraction = 0\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[train]\npred_horizon = 4\nexec_horizon = 3\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[sweep]\nfractions = 0.5, 0.2\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[train]\nobs_horizon = 2\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[run\n"), ConfigError);
}

TEST(ConfigTest, HashIgnoresSeedAndOutput) {
  RunConfig a = DefaultConfig(Task::kToy), b = a;
  b.seed = 99;
  b.out_dir = "elsewhere";
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
  b.train.epochs = 3;
  EXPECT_NE(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(OutputPath(a, "model", ".imle").filename().string(),
            "model_" + ConfigHash(a) + "_s0.imle");
}

TEST(ConfigTest, MethodSpecificSettings) {
  RunConfig cfg = DefaultConfig(Task::kPushLite);
  cfg.method = Method::kImle;
  EXPECT_TRUE(EffectiveInferenceConfig(cfg).consistency);
  EXPECT_EQ(EffectiveInferenceConfig(cfg).num_candidates, 20u);
  cfg.method = Method::kImleNoConsistency;
  EXPECT_FALSE(EffectiveInferenceConfig(cfg).consistency);
  cfg.method = Method::kFm1;
  EXPECT_EQ(EffectiveFlowSteps(cfg), 1);
  EXPECT_EQ(EffectiveInferenceConfig(cfg).num_candidates, 1u);
  cfg.method = Method::kFmK;
  EXPECT_EQ(EffectiveFlowSteps(cfg), 100);
}

TEST(SubsetTest, NestedPrefixes) {
  std::vector<int> prev;
  for (double f : {0.1, 0.2, 0.35, 0.5, 1.0}) {
    const auto s = SubsetEpisodes(100, f, 7);
    EXPECT_EQ(s.size(), static_cast<std::size_t>(std::ceil(f * 100 - 1e-9)));
    EXPECT_TRUE(std::includes(s.begin(), s.end(), prev.begin(), prev.end()));
    prev = s;
  }
  EXPECT_NE(SubsetEpisodes(100, 0.1, 7), SubsetEpisodes(100, 0.1, 8));
  EXPECT_THROW(SubsetEpisodes(10, 0.0, 1), PreconditionError);
}

TEST(CliTest, UsageAndConfigErrorsExitTwo) {
  EXPECT_EQ(Cli({"--method", "unknown", "train"}).code, 2);
  EXPECT_EQ(Cli({}).code, 2);
  EXPECT_EQ(Cli({"no-such-verb"}).code, 2);
  EXPECT_EQ(Cli({"--task", "cube", "gen-data"}).code, 2);
  const fs::path dir = FreshDir("cli_errors");
  EXPECT_EQ(Cli({"--config", WriteText(dir / "bad.ini", "[train]\nepochs = x\n").string(),
                 "train"}).code, 2);
  EXPECT_EQ(Cli({"--config", (dir / "missing.ini").string(), "train"}).code, 2);
  EXPECT_EQ(Cli({"--help"}).code, 0);
}

TEST(CliTest, OtherFailuresExitOne) {
  const fs::path dir = FreshDir("cli_fail");
  const CliRun r = Cli({"--task", "toy", "--out", dir.string(), "train"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dataset not found"), std::string::npos) << r.err;
  EXPECT_EQ(Cli({"--task", "toy", "--out", dir.string(), "rollout"}).code, 1);
}

TEST(CliTest, GenDataToyWritesTwentyDemosAndSummary) {
  const fs::path dir = FreshDir("gen_toy");
  const CliRun r = Cli({"--task", "toy", "--out", dir.string(), "gen-data"});
  ASSERT_EQ(r.code, 0) << r.err;
  RunConfig cfg = DefaultConfig(Task::kToy);
  cfg.out_dir = dir.string();
  const fs::path data = OutputPath(cfg, "dataset", ".imld");
  const Dataset ds = ReadDataset(data);
  EXPECT_EQ(ds.demos.size(), 20u);
  const std::string bytes = ReadFileBytes(data);
  const std::string summary = ReadFileBytes(OutputPath(cfg, "dataset", ".txt"));
  EXPECT_NE(summary.find("demos upper: "), std::string::npos);
  EXPECT_NE(summary.find("demos lower: "), std::string::npos);
  ASSERT_EQ(Cli({"--task", "toy", "--out", dir.string(), "gen-data"}).code, 0);
  EXPECT_EQ(ReadFileBytes(data), bytes);
}

TEST(CliTest, GenDataPushLiteThirtyFiveEpisodes) {
  const fs::path dir = FreshDir("gen_push");
  const fs::path ini = WriteText(dir / "p.ini", "[run]\ntask = pushlite\nn_demos = 35\n");
  ASSERT_EQ(Cli({"--config", ini.string(), "--out", dir.string(), "gen-data"}).code, 0);
  RunConfig cfg = LoadConfigFile(ini);
  cfg.out_dir = dir.string();
  const Dataset ds = ReadDataset(OutputPath(cfg, "dataset", ".imld"));
  EXPECT_EQ(ds.num_episodes(), 35u);
  const auto episodes = GenPushLiteEpisodes(35, cfg.seed, DemonstratorOptionsFor(cfg));
  std::size_t windows = 0;
  for (const auto& ep : episodes) {
    const std::size_t len = ep.actions.size();
    windows += len - 16 + 1 + std::min<std::size_t>(7, len - 16);
  }
  EXPECT_EQ(ds.demos.size(), windows);
  EXPECT_TRUE(fs::exists(OutputPath(cfg, "episodes", ".csv")));
}

TEST(CliTest, ZeroEpochCheckpointEqualsInitialization) {
  const fs::path dir = FreshDir("zero_epochs");
  for (const std::string method : {"imle", "fm1"}) {
    const fs::path ini = WriteText(dir / "z.ini", "[run]\ntask = toy\nmethod = " + method +
                                                      "\n\n[train]\nepochs = 0\n");
    ASSERT_EQ(Cli({"--config", ini.string(), "--out", dir.string(), "gen-data"}).code, 0);
    ASSERT_EQ(Cli({"--config", ini.string(), "--out", dir.string(), "train"}).code, 0);
    RunConfig cfg = LoadConfigFile(ini);
    cfg.out_dir = dir.string();
    const Policy p = ReadCheckpoint(OutputPath(cfg, "model", ".imle"));
    const Dataset ds = ReadDataset(OutputPath(cfg, "dataset", ".imld"));
    const auto demos = ds.normalizer.NormalizeDemos(ds.demos);
    const TrainConfig tc = EffectiveTrainConfig(cfg);
    const GeneratorNet init =
        method == "imle" ? InitialGenerator(demos, tc) : InitialVelocityNet(demos, tc);
    EXPECT_EQ(p.net, init) << method;
    EXPECT_EQ(p.normalizer, ds.normalizer);
  }
}

TEST(CliTest, CommandsAreByteReproducible) {
  const fs::path a = FreshDir("repro_a"), b = FreshDir("repro_b");
  const std::string ini_text =
      "[run]\ntask = pushlite\nn_demos = 4\ncheckpoint_every = 2\n\n[train]\nepochs = 4\n"
      "hidden = 16, 16\n\n[pushlite]\nrollout_episodes = 3\n\n[eval]\nsamples = 10\n";
  for (const auto& dir : {a, b}) {
    const std::string ini = WriteText(dir / "r.ini", ini_text).string();
    for (const std::string verb : {"gen-data", "train", "rollout", "eval-modes"}) {
      ASSERT_EQ(Cli({"--config", ini, "--out", dir.string(), verb}).code, 0) << verb;
    }
  }
  RunConfig cfg = LoadConfigFile(a / "r.ini");
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    std::string x = ReadFileBytes(entry.path()), y = ReadFileBytes(b / rel);
    if (rel.filename().string().rfind("train_", 0) == 0) {
      // Drop the trailing wall_ms column.
      auto strip = [](const std::string& csv) {
        std::istringstream in(csv);
        std::string line, out;
        while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
        return out;
      };
      x = strip(x);
      y = strip(y);
    }
    EXPECT_EQ(x, y) << rel;
    ++compared;
  }
  cfg.out_dir = a.string();
  EXPECT_TRUE(fs::exists(OutputPath(cfg, "model_e2", ".imle")));
  EXPECT_GE(compared, 10u);
}

TEST(CliTest, BenchWritesPairedRows) {
  const fs::path dir = FreshDir("bench");
  const fs::path ini = WriteText(dir / "b.ini", "[run]\ntask = toy\n\n[bench]\nruns = 5\n");
  const CliRun r = Cli({"--config", ini.string(), "--out", dir.string(), "bench"});
  ASSERT_EQ(r.code, 0) << r.err;
  RunConfig cfg = LoadConfigFile(ini);
  cfg.out_dir = dir.string();
  const std::string csv = ReadFileBytes(OutputPath(cfg, "bench", ".csv"));
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
  EXPECT_EQ(lines, (std::vector<std::string>{"method,k_inner_steps", "imle,1", "fm,1", "fm,100"}));
}

// Full-size toy run: 20 demos, 4000 epochs.
TEST(CliTest, ToyTrainingReachesLowLossAndCoversBothBranches) {
  const fs::path dir = FreshDir("toy_full");
  const std::vector<std::string> base = {"--task", "toy", "--out", dir.string()};
  auto run = [&](const std::string& verb) {
    auto args = base;
    args.push_back(verb);
    return Cli(args);
  };
  ASSERT_EQ(run("gen-data").code, 0);
  ASSERT_EQ(run("train").code, 0);
  RunConfig cfg = DefaultConfig(Task::kToy);
  cfg.out_dir = dir.string();
  std::istringstream report(ReadFileBytes(OutputPath(cfg, "train", ".csv")));
  std::string line, last;
  while (std::getline(report, line)) last = line;
  const double final_loss = std::stod(last.substr(last.find(',') + 1));
  EXPECT_LT(final_loss, 0.1);

  const Policy p = ReadCheckpoint(OutputPath(cfg, "model", ".imle"));
  const auto samples = ModeSamples(cfg, p, 0.5, 0);
  std::size_t upper = 0, lower = 0;
  for (const auto& s : samples) {
    // Nearest analytic branch.
    const double y = s[0];
    (std::abs(y - ToyUpper(0.5)) < std::abs(y - ToyLower(0.5)) ? upper : lower)++;
  }
  EXPECT_EQ(samples.size(), 200u);
  EXPECT_GE(upper, 50u);
  EXPECT_GE(lower, 50u);
  ASSERT_EQ(run("eval-modes").code, 0);
  ASSERT_EQ(run("rollout").code, 0);
}

}  // namespace
}  // namespace imle
