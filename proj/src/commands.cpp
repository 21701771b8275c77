#include "imle/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "imle/errors.hpp"
#include "imle/flow_matching.hpp"

namespace imle {

namespace fs = std::filesystem;

fs::path OutputPath(const RunConfig& cfg, const std::string& kind,
                    const std::string& ext) {
  return fs::path(cfg.out_dir) /
         (kind + "_" + ConfigHash(cfg) + "_s" + std::to_string(cfg.seed) + ext);
}

namespace {

struct Generated {
  Dataset dataset;
  std::vector<Episode> episodes;  // pushlite only
};

Generated Generate(const RunConfig& cfg) {
  Generated g;
  Dataset& ds = g.dataset;
  ds.task = TaskName(cfg.task);
  ds.horizons = cfg.train.horizons;
  std::ostringstream spec;
  spec << std::setprecision(17);
  if (cfg.task == Task::kToy) {
    const ToyBranchSpec toy = ToySpecFor(cfg);
    const ToyDataset td = GenToyBranchDataset(toy);
    spec << "n_demos=" << toy.n_demos << "\nnoise_std=" << toy.noise_std
         << "\nw_upper=" << cfg.toy_w_upper << "\nseed=" << toy.seed << "\n";
    ds.obs_dim = 1;
    ds.action_dim = 1;
    ds.demos = td.demos;
    for (std::size_t i = 0; i < td.demos.size(); ++i) {
      ds.episode.push_back(static_cast<int>(i));
      ds.mode.push_back(static_cast<int>(td.labels[i]));
    }
  } else {
    const DemonstratorOptions opts = DemonstratorOptionsFor(cfg);
    g.episodes = GenPushLiteEpisodes(cfg.n_demos, cfg.seed, opts);
    spec << "n_episodes=" << cfg.n_demos << "\njitter=" << opts.jitter
         << "\nseed=" << cfg.seed << "\n";
    ds.obs_dim = kPushLiteObsDim;
    ds.action_dim = kPushLiteActionDim;
    ds.demos = EpisodesToDemos(g.episodes, cfg.train.horizons, &ds.episode);
    for (int e : ds.episode) ds.mode.push_back(g.episodes[static_cast<std::size_t>(e)].mode);
  }
  ds.spec_text = spec.str();
  ds.normalizer = Normalizer::Fit(ds.demos, ds.obs_dim);
  return g;
}

Policy FreshPolicy(const RunConfig& cfg, NetKind kind) {
  const std::size_t obs_dim = cfg.task == Task::kToy ? 1 : kPushLiteObsDim;
  const std::size_t act_dim = cfg.task == Task::kToy ? 1 : kPushLiteActionDim;
  const Horizons& hz = cfg.train.horizons;
  const OutputShape out{hz.pred, act_dim};
  const std::size_t obs_width = hz.obs * obs_dim;
  std::vector<std::size_t> sizes;
  if (kind == NetKind::kGenerator) {
    sizes.push_back(cfg.train.ResolvedLatentDim(out) + obs_width);
  } else {
    sizes.push_back(out.width() + obs_width + 1);
  }
  sizes.insert(sizes.end(), cfg.train.hidden.begin(), cfg.train.hidden.end());
  sizes.push_back(out.width());
  Rng rng = Rng::ForStream(cfg.seed, Stream::kInit);
  Normalizer norm;
  norm.obs_min.assign(obs_dim, -1.0);
  norm.obs_max.assign(obs_dim, 1.0);
  norm.act_min.assign(act_dim, -1.0);
  norm.act_max.assign(act_dim, 1.0);
  return Policy{GeneratorNet::Initialized(std::move(sizes), out, rng, kind), norm,
                hz, kind == NetKind::kVelocity ? EffectiveFlowSteps(cfg) : 1};
}

DenseArray ObservationWindow(const RunConfig& cfg, std::span<const double> frame) {
  const std::size_t t_o = cfg.train.horizons.obs;
  DenseArray w({t_o, frame.size()});
  for (std::size_t r = 0; r < t_o; ++r) {
    std::copy(frame.begin(), frame.end(), w.row(r).begin());
  }
  return w;
}

DenseArray ProbeWindow(const RunConfig& cfg, double condition) {
  if (cfg.task == Task::kToy) {
    const double x[1] = {condition};
    return ObservationWindow(cfg, x);
  }
  const auto obs = PushLiteObservation(PushLiteProbeState(condition));
  return ObservationWindow(cfg, obs);
}

double Mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// First T_p scripted actions from `initial`, final action repeated if the
// demonstrator finishes early.
DenseArray ScriptedChunk(const RunConfig& cfg, const PushLiteState& initial, Rng& rng) {
  const DemonstratorOptions opts = DemonstratorOptionsFor(cfg);
  const PushMode mode = ModeForInitialState(initial, rng);
  PushLiteDemonstrator demo(mode, initial, rng, opts);
  const std::size_t t_p = cfg.train.horizons.pred;
  DenseArray chunk({t_p, kPushLiteActionDim});
  PushLiteState s = initial;
  Vec2 last{};
  for (std::size_t t = 0; t < t_p; ++t) {
    Vec2 a = last;
    if (!demo.done()) {
      a = demo.NextAction(s, rng);
      if (demo.done()) a = last;
    }
    chunk.at(t, 0) = a.x;
    chunk.at(t, 1) = a.y;
    s = PushLiteStep(s, a, opts.params);
    last = a;
  }
  return chunk;
}

void CheckPolicyMatchesTask(const RunConfig& cfg, const Policy& p) {
  const std::size_t obs_dim = cfg.task == Task::kToy ? 1 : kPushLiteObsDim;
  const std::size_t act_dim = cfg.task == Task::kToy ? 1 : kPushLiteActionDim;
  if (p.obs_dim() != obs_dim || p.action_dim() != act_dim) {
    throw DimensionError("checkpoint has obs_dim " + std::to_string(p.obs_dim()) +
                         " / action_dim " + std::to_string(p.action_dim()) +
                         ", task " + TaskName(cfg.task) + " needs " +
                         std::to_string(obs_dim) + " / " + std::to_string(act_dim));
  }
  if (!(p.horizons == cfg.train.horizons)) {
    throw DimensionError("checkpoint horizons differ from the config horizons");
  }
  const bool flow = p.net.kind() == NetKind::kVelocity;
  if (flow != IsFlowMethod(cfg.method)) {
    throw PreconditionError("checkpoint holds a " +
                            std::string(flow ? "flow-matching" : "generator") +
                            " net but method is " + MethodName(cfg.method));
  }
}

Policy LoadPolicy(const RunConfig& cfg, const CommandOptions& opt) {
  const fs::path path = opt.checkpoint.value_or(OutputPath(cfg, "model", ".imle"));
  if (!fs::exists(path)) {
    throw std::runtime_error("checkpoint not found: " + path.string() +
                             " (run train first or pass --checkpoint)");
  }
  Policy p = ReadCheckpoint(path);
  CheckPolicyMatchesTask(cfg, p);
  if (p.net.kind() == NetKind::kVelocity) p.flow_steps = EffectiveFlowSteps(cfg);
  return p;
}

Dataset LoadDataset(const RunConfig& cfg, const CommandOptions& opt) {
  const fs::path path = opt.dataset.value_or(OutputPath(cfg, "dataset", ".imld"));
  if (!fs::exists(path)) {
    throw std::runtime_error("dataset not found: " + path.string() +
                             " (run gen-data first or pass --dataset)");
  }
  Dataset ds = ReadDataset(path);
  if (ds.task != TaskName(cfg.task)) {
    throw PreconditionError("dataset task '" + ds.task + "' differs from config task '" +
                            TaskName(cfg.task) + "'");
  }
  if (!(ds.horizons == cfg.train.horizons)) {
    throw PreconditionError("dataset horizons differ from the config horizons");
  }
  return ds;
}

std::ofstream OpenOut(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << std::setprecision(17);
  return os;
}

std::string ModeName(Task task, int mode) {
  if (task == Task::kToy) {
    return mode == 0 ? "upper" : mode == 1 ? "lower" : "shared";
  }
  return mode == 0 ? "left" : "right";
}

}  // namespace

Dataset BuildDataset(const RunConfig& cfg) { return Generate(cfg).dataset; }

std::vector<int> SubsetEpisodes(std::size_t num_episodes, double fraction,
                                std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw PreconditionError("subset fraction must be in (0, 1]");
  }
  std::vector<int> order(num_episodes);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::ForStream(seed, Stream::kSubset);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(fraction * static_cast<double>(num_episodes) - 1e-9)));
  order.resize(std::min(k, num_episodes));
  std::sort(order.begin(), order.end());
  return order;
}

Dataset SubsetDataset(const Dataset& ds, double fraction, std::uint64_t seed) {
  const std::vector<int> keep = SubsetEpisodes(ds.num_episodes(), fraction, seed);
  Dataset out = ds;
  out.demos.clear();
  out.episode.clear();
  out.mode.clear();
  for (std::size_t i = 0; i < ds.demos.size(); ++i) {
    if (std::binary_search(keep.begin(), keep.end(), ds.episode[i])) {
      out.demos.push_back(ds.demos[i]);
      out.episode.push_back(ds.episode[i]);
      out.mode.push_back(ds.mode[i]);
    }
  }
  if (out.demos.empty()) throw PreconditionError("subset selected no demos");
  out.normalizer = Normalizer::Fit(out.demos, out.obs_dim);
  return out;
}

TrainedPolicy TrainPolicy(const RunConfig& cfg, const Dataset& ds,
                          const std::function<void(int, const Policy&)>& on_checkpoint) {
  const std::vector<Demo> demos = ds.normalizer.NormalizeDemos(ds.demos);
  const TrainConfig tc = EffectiveTrainConfig(cfg);
  const int flow_steps = EffectiveFlowSteps(cfg);
  TrainHooks hooks;
  if (on_checkpoint) {
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](int epoch, const GeneratorNet& net) {
      on_checkpoint(epoch, Policy{net, ds.normalizer, ds.horizons, flow_steps});
    };
  }
  TrainResult r = IsFlowMethod(cfg.method) ? TrainFlowMatching(demos, tc, hooks)
                                           : Train(demos, tc, hooks);
  return {Policy{std::move(r.net), ds.normalizer, ds.horizons, flow_steps},
          std::move(r.report)};
}

EvalResult EvaluatePolicy(const RunConfig& cfg, const Policy& policy) {
  EvalResult out;
  if (cfg.task == Task::kPushLite) {
    PolicyController controller(policy, EffectiveInferenceConfig(cfg));
    out.rollouts = RolloutSuccessRate(controller, cfg.rollout_episodes,
                                      cfg.max_steps, cfg.seed);
    out.success_rate = out.rollouts.success_rate;
    return out;
  }
  int successes = 0;
  for (int e = 0; e < cfg.rollout_episodes; ++e) {
    const auto idx = static_cast<std::uint64_t>(e);
    Rng init = Rng::ForStream(cfg.seed, Stream::kEpisode, idx);
    Rng rng = Rng::ForStream(cfg.seed, Stream::kPolicy, idx);
    const double x = init.Uniform(-1.0, 1.0);
    const double frame[1] = {x};
    const auto samples = GenerateBatch(policy, ObservationWindow(cfg, frame), 1, rng);
    const double y = Mean(samples.front().values());
    out.toy_x.push_back(x);
    out.toy_y.push_back(y);
    if (ToySuccess(x, y, cfg.toy_noise_std)) ++successes;
  }
  out.success_rate = static_cast<double>(successes) / cfg.rollout_episodes;
  return out;
}

std::vector<DenseArray> ModeSamples(const RunConfig& cfg, const Policy& policy,
                                    double condition, std::uint64_t probe) {
  Rng rng = Rng::ForStream(cfg.seed, Stream::kProbe, probe);
  return GenerateBatch(policy, ProbeWindow(cfg, condition), cfg.mode_samples, rng);
}

std::vector<ModeRow> EvalModes(const RunConfig& cfg, const Policy& policy) {
  std::vector<ModeRow> rows;
  for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
    const double c = cfg.grid[k];
    const auto samples = ModeSamples(cfg, policy, c, k);
    ModeRow row;
    row.condition = c;
    if (cfg.task == Task::kToy) {
      row.report = ModeCoverage(samples, ToyModeClassifier(c, 3.0 * cfg.toy_noise_std),
                                2, cfg.min_fraction);
      std::vector<DenseArray> means;
      for (const auto& s : samples) means.emplace_back(std::vector<std::size_t>{1}, Mean(s.values()));
      const std::vector<DenseArray> branches{
          DenseArray(std::vector<std::size_t>{1}, ToyUpper(c)),
          DenseArray(std::vector<std::size_t>{1}, ToyLower(c))};
      row.report.nn_distance = SymmetricNnDistance(means, branches);
    } else {
      const PushLiteState probe = PushLiteProbeState(c);
      row.report = ModeCoverage(samples, PushLiteChunkClassifier(probe), 2,
                                cfg.min_fraction);
      std::vector<DenseArray> scripted;
      for (std::size_t i = 0; i < cfg.mode_samples; ++i) {
        Rng rng = Rng::ForStream(cfg.seed, Stream::kProbe, k, i + 1);
        scripted.push_back(ScriptedChunk(cfg, probe, rng));
      }
      row.report.nn_distance = SymmetricNnDistance(samples, scripted);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> SweepResult::SmallestFraction(Method method,
                                                    double threshold) const {
  std::optional<double> best;
  for (const auto& c : cells) {
    if (c.method == method && c.final_success >= threshold &&
        (!best || c.fraction < *best)) {
      best = c.fraction;
    }
  }
  return best;
}

SweepResult SweepData(const RunConfig& cfg, const Dataset& full, std::ostream* log) {
  SweepResult result;
  for (double f : cfg.fractions) {
    const Dataset sub = SubsetDataset(full, f, cfg.seed);
    for (Method m : cfg.sweep_methods) {
      RunConfig c = cfg;
      c.method = m;
      c.fraction = f;
      SweepCell cell;
      cell.method = m;
      cell.fraction = f;
      cell.episodes = sub.num_episodes() == 0 ? 0 : SubsetEpisodes(full.num_episodes(), f, cfg.seed).size();
      cell.windows = sub.demos.size();
      const TrainedPolicy tp = TrainPolicy(c, sub, [&](int epoch, const Policy& p) {
        cell.checkpoint_epochs.push_back(epoch);
        cell.checkpoint_success.push_back(EvaluatePolicy(c, p).success_rate);
      });
      if (!cell.checkpoint_epochs.empty() && cell.checkpoint_epochs.back() == cfg.train.epochs) {
        cell.final_success = cell.checkpoint_success.back();
      } else {
        cell.final_success = EvaluatePolicy(c, tp.policy).success_rate;
        cell.checkpoint_epochs.push_back(cfg.train.epochs);
        cell.checkpoint_success.push_back(cell.final_success);
      }
      if (log) {
        *log << MethodName(m) << " fraction " << f << " (" << cell.episodes
             << " episodes): success " << cell.final_success << "\n";
        log->flush();
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::vector<BenchRow> Bench(const RunConfig& cfg, const Policy& imle_policy,
                            const Policy& fm_policy) {
  const DenseArray window = ProbeWindow(cfg, cfg.task == Task::kToy ? 0.5 : 0.0);
  std::vector<BenchRow> rows;
  {
    Rng rng = Rng::ForStream(cfg.seed, Stream::kProbe);
    rows.push_back({"imle", BenchLatency([&] { GenerateBatch(imle_policy, window, 1, rng); },
                                         1, cfg.bench_runs)});
  }
  for (int k : {1, cfg.fm_steps}) {
    Policy p = fm_policy;
    p.flow_steps = k;
    Rng rng = Rng::ForStream(cfg.seed, Stream::kProbe, static_cast<std::uint64_t>(k));
    rows.push_back({"fm", BenchLatency([&] { GenerateBatch(p, window, 1, rng); }, k,
                                       cfg.bench_runs)});
  }
  return rows;
}

int CmdGenData(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const Generated g = Generate(cfg);
  const Dataset& ds = g.dataset;
  const fs::path path = opt.dataset.value_or(OutputPath(cfg, "dataset", ".imld"));
  WriteDataset(path, ds);

  std::map<int, std::size_t> demo_modes;
  for (int m : ds.mode) ++demo_modes[m];
  std::ostringstream summary;
  summary << "task: " << ds.task << "\n"
          << "demos: " << ds.demos.size() << "\n"
          << "episodes: " << ds.num_episodes() << "\n";
  if (cfg.task == Task::kPushLite) {
    std::map<int, std::size_t> ep_modes;
    std::size_t successes = 0;
    for (const auto& e : g.episodes) {
      ++ep_modes[e.mode];
      if (e.success) ++successes;
    }
    summary << "scripted successes: " << successes << "/" << g.episodes.size() << "\n";
    for (const auto& [m, n] : ep_modes) {
      summary << "episodes " << ModeName(cfg.task, m) << ": " << n << "\n";
    }
    auto csv = OpenOut(OutputPath(cfg, "episodes", ".csv"));
    WriteEpisodesCsv(csv, g.episodes);
  }
  for (const auto& [m, n] : demo_modes) {
    summary << "demos " << ModeName(cfg.task, m) << ": " << n << "\n";
  }
  auto txt = OpenOut(OutputPath(cfg, "dataset", ".txt"));
  txt << summary.str();
  out << summary.str() << "wrote " << path.string() << "\n";
  return 0;
}

int CmdTrain(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const Dataset full = LoadDataset(cfg, opt);
  const Dataset ds = cfg.fraction < 1.0 ? SubsetDataset(full, cfg.fraction, cfg.seed) : full;
  const TrainedPolicy tp = TrainPolicy(cfg, ds, [&](int epoch, const Policy& p) {
    WriteCheckpoint(OutputPath(cfg, "model_e" + std::to_string(epoch), ".imle"), p);
  });
  const fs::path model = opt.checkpoint.value_or(OutputPath(cfg, "model", ".imle"));
  WriteCheckpoint(model, tp.policy);
  auto csv = OpenOut(OutputPath(cfg, "train", ".csv"));
  tp.report.WriteCsv(csv);
  out << "method " << MethodName(cfg.method) << ", " << ds.demos.size() << " demos, "
      << cfg.train.epochs << " epochs\n";
  if (!tp.report.epochs.empty()) {
    out << "final mean loss " << tp.report.epochs.back().mean_loss << "\n";
  }
  out << "wrote " << model.string() << "\n";
  return 0;
}

int CmdRollout(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const Policy policy = LoadPolicy(cfg, opt);
  const EvalResult r = EvaluatePolicy(cfg, policy);
  auto csv = OpenOut(OutputPath(cfg, "rollout", ".csv"));
  if (cfg.task == Task::kPushLite) {
    csv << "episode,success,mode,steps,block_x,block_y,angle\n";
    const RolloutResult& rr = r.rollouts;
    for (std::size_t e = 0; e < rr.successes.size(); ++e) {
      const PushLiteState& f = rr.final_states[e];
      csv << e << ',' << (rr.successes[e] ? 1 : 0) << ',' << rr.modes[e] << ','
          << rr.steps[e] << ',' << f.block.x << ',' << f.block.y << ',' << f.angle << '\n';
      auto log = OpenOut(OutputPath(cfg, "rolloutlog", "") /
                         ("episode_" + std::to_string(e) + ".csv"));
      rr.logs[e].WriteCsv(log);
    }
  } else {
    csv << "episode,x,y,success\n";
    for (std::size_t e = 0; e < r.toy_x.size(); ++e) {
      csv << e << ',' << r.toy_x[e] << ',' << r.toy_y[e] << ','
          << (ToySuccess(r.toy_x[e], r.toy_y[e], cfg.toy_noise_std) ? 1 : 0) << '\n';
    }
  }
  out << "success rate " << r.success_rate << " over " << cfg.rollout_episodes
      << " episodes\n";
  return 0;
}

int CmdSweepData(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const fs::path path = opt.dataset.value_or(OutputPath(cfg, "dataset", ".imld"));
  const Dataset full = fs::exists(path) ? LoadDataset(cfg, opt) : BuildDataset(cfg);
  const SweepResult sweep = SweepData(cfg, full, &out);
  auto csv = OpenOut(OutputPath(cfg, "sweep", ".csv"));
  csv << "method,fraction,episodes,windows,epoch,success_rate\n";
  for (const auto& c : sweep.cells) {
    for (std::size_t k = 0; k < c.checkpoint_epochs.size(); ++k) {
      csv << MethodName(c.method) << ',' << c.fraction << ',' << c.episodes << ','
          << c.windows << ',' << c.checkpoint_epochs[k] << ','
          << c.checkpoint_success[k] << '\n';
    }
  }
  auto summary = OpenOut(OutputPath(cfg, "sweep_summary", ".csv"));
  summary << "method,fraction,episodes,final_success,max_success,last3_mean\n";
  for (const auto& c : sweep.cells) {
    const auto& s = c.checkpoint_success;
    const double best = *std::max_element(s.begin(), s.end());
    const std::size_t n3 = std::min<std::size_t>(3, s.size());
    const double last3 = std::accumulate(s.end() - static_cast<std::ptrdiff_t>(n3),
                                         s.end(), 0.0) / static_cast<double>(n3);
    summary << MethodName(c.method) << ',' << c.fraction << ',' << c.episodes << ','
            << c.final_success << ',' << best << ',' << last3 << '\n';
  }
  for (Method m : cfg.sweep_methods) {
    const auto f = sweep.SmallestFraction(m, 0.5);
    out << MethodName(m) << ": smallest fraction with success >= 0.5: "
        << (f ? std::to_string(*f) : std::string("none")) << "\n";
  }
  return 0;
}

int CmdEvalModes(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  const Policy policy = LoadPolicy(cfg, opt);
  const auto rows = EvalModes(cfg, policy);
  auto csv = OpenOut(OutputPath(cfg, "modes", ".csv"));
  csv << "condition,samples," << ModeName(cfg.task, 0) << ',' << ModeName(cfg.task, 1)
      << ",unassigned,fraction_" << ModeName(cfg.task, 0) << ",fraction_"
      << ModeName(cfg.task, 1) << ",recall,collapse,nn_distance\n";
  for (const auto& r : rows) {
    const ModeReport& m = r.report;
    csv << r.condition << ',' << m.total << ',' << m.counts[0] << ',' << m.counts[1] << ','
        << m.unassigned << ',' << m.fractions[0] << ',' << m.fractions[1] << ','
        << m.recall << ',' << (m.collapse ? 1 : 0) << ',' << m.nn_distance.value_or(0.0)
        << '\n';
    out << "condition " << r.condition << ": " << ModeName(cfg.task, 0) << ' '
        << m.fractions[0] << ", " << ModeName(cfg.task, 1) << ' ' << m.fractions[1]
        << ", unassigned " << m.unassigned << ", collapse " << (m.collapse ? "yes" : "no")
        << "\n";
  }
  auto samples = OpenOut(OutputPath(cfg, "mode_samples", ".csv"));
  samples << (cfg.task == Task::kToy ? "condition,index,y\n" : "condition,index,dx,dy\n");
  for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
    const auto s = ModeSamples(cfg, policy, cfg.grid[k], k);
    for (std::size_t i = 0; i < s.size(); ++i) {
      samples << cfg.grid[k] << ',' << i;
      if (cfg.task == Task::kToy) {
        samples << ',' << Mean(s[i].values()) << '\n';
      } else {
        double dx = 0.0, dy = 0.0;
        for (std::size_t t = 0; t < s[i].dim(0); ++t) {
          dx += s[i].at(t, 0);
          dy += s[i].at(t, 1);
        }
        samples << ',' << dx << ',' << dy << '\n';
      }
    }
  }
  return 0;
}

int CmdBench(const RunConfig& cfg, const CommandOptions& opt, std::ostream& out) {
  RunConfig imle_cfg = cfg;
  imle_cfg.method = Method::kImle;
  RunConfig fm_cfg = cfg;
  fm_cfg.method = Method::kFmK;
  Policy imle_policy = FreshPolicy(imle_cfg, NetKind::kGenerator);
  if (opt.checkpoint) {
    CommandOptions o;
    o.checkpoint = opt.checkpoint;
    imle_policy = LoadPolicy(imle_cfg, o);
  }
  Policy fm_policy = FreshPolicy(fm_cfg, NetKind::kVelocity);
  if (opt.fm_checkpoint) {
    CommandOptions o;
    o.checkpoint = opt.fm_checkpoint;
    fm_policy = LoadPolicy(fm_cfg, o);
  }
  const auto rows = Bench(cfg, imle_policy, fm_policy);
  auto csv = OpenOut(OutputPath(cfg, "bench", ".csv"));
  csv << "method,k_inner_steps,runs,mean_ms,stddev_ms\n";
  for (const auto& r : rows) {
    csv << r.method << ',' << r.report.k_inner_steps << ',' << r.report.runs << ','
        << r.report.mean_ms << ',' << r.report.stddev_ms << '\n';
    out << r.method << " k=" << r.report.k_inner_steps << ": " << r.report.mean_ms
        << " ms (sd " << r.report.stddev_ms << ")\n";
  }
  out << "fm k=" << cfg.fm_steps << " / imle time ratio: "
      << rows.back().report.mean_ms / rows.front().report.mean_ms << "\n";
  return 0;
}

namespace {

std::vector<double> ParseList(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw ConfigError(flag + ": expected comma-separated numbers, got '" + text + "'");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional RS-IMLE behaviour cloning"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, task_name, out_dir, method_name;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "config file (INI sections)");
  app.add_option("--task", task_name, "toy or pushlite when no config is given");
  app.add_option("--seed", seed, "seed override");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--method", method_name, "imle, imle_no_consistency, fm1 or fm_k");

  CommandOptions opt;
  std::string dataset, checkpoint, fm_checkpoint, fractions, grid;
  auto* gen = app.add_subcommand("gen-data", "generate a demonstration dataset");
  gen->add_option("--dataset", dataset, "output dataset path");
  auto* train = app.add_subcommand("train", "train a policy");
  train->add_option("--dataset", dataset, "dataset path");
  train->add_option("--checkpoint", checkpoint, "output checkpoint path");
  auto* rollout = app.add_subcommand("rollout", "evaluate a checkpoint");
  rollout->add_option("--checkpoint", checkpoint, "checkpoint path");
  auto* sweep = app.add_subcommand("sweep-data", "dataset-size sweep");
  sweep->add_option("--dataset", dataset, "dataset path");
  sweep->add_option("--fractions", fractions, "comma-separated fractions");
  auto* modes = app.add_subcommand("eval-modes", "mode coverage per condition");
  modes->add_option("--checkpoint", checkpoint, "checkpoint path");
  modes->add_option("--grid", grid, "comma-separated conditions");
  auto* bench = app.add_subcommand("bench", "inference latency");
  bench->add_option("--checkpoint", checkpoint, "imle checkpoint path");
  bench->add_option("--fm-checkpoint", fm_checkpoint, "flow-matching checkpoint path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = LoadConfigFile(config_path);
      if (!task_name.empty() && ParseTask(task_name) != cfg.task) {
        throw ConfigError("--task " + task_name + " contradicts the config task " +
                          TaskName(cfg.task));
      }
    } else {
      cfg = DefaultConfig(task_name.empty() ? Task::kToy : ParseTask(task_name));
    }
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!method_name.empty()) cfg.method = ParseMethod(method_name);
    if (!fractions.empty()) cfg.fractions = ParseList("--fractions", fractions);
    if (!grid.empty()) cfg.grid = ParseList("--grid", grid);
    cfg.Validate();
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  if (!dataset.empty()) opt.dataset = dataset;
  if (!checkpoint.empty()) opt.checkpoint = checkpoint;
  if (!fm_checkpoint.empty()) opt.fm_checkpoint = fm_checkpoint;

  try {
    if (gen->parsed()) return CmdGenData(cfg, opt, out);
    if (train->parsed()) return CmdTrain(cfg, opt, out);
    if (rollout->parsed()) return CmdRollout(cfg, opt, out);
    if (sweep->parsed()) return CmdSweepData(cfg, opt, out);
    if (modes->parsed()) return CmdEvalModes(cfg, opt, out);
    if (bench->parsed()) return CmdBench(cfg, opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace imle
