#include "imle/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace imle {

namespace pt = boost::property_tree;

std::string MethodName(Method method) {
  switch (method) {
    case Method::kImle: return "imle";
    case Method::kImleNoConsistency: return "imle_no_consistency";
    case Method::kFm1: return "fm1";
    case Method::kFmK: return "fm_k";
  }
  return "imle";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kImle, Method::kImleNoConsistency, Method::kFm1,
                   Method::kFmK}) {
    if (MethodName(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected imle, imle_no_consistency, fm1 or fm_k)");
}

bool IsFlowMethod(Method method) {
  return method == Method::kFm1 || method == Method::kFmK;
}

namespace {

std::string Fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string JoinList(const std::vector<T>& values,
                     const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    out += fmt(values[i]);
  }
  return out;
}

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitList(std::string_view s) {
  std::vector<std::string> out;
  if (Trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(Trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

template <class Int>
Int ParseInt(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::vector<double> ParseDoubleList(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : SplitList(v)) out.push_back(ParseDouble(key, item));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key,
                                  const std::string& value)>;

// section -> key -> setter
const std::map<std::string, std::map<std::string, Setter>>& Setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"run",
       {{"task", [](RunConfig&, const std::string&, const std::string&) {}},
        {"method",
         [](RunConfig& c, const std::string&, const std::string& v) {
           c.method = ParseMethod(v);
         }},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.seed = ParseInt<std::uint64_t>(k, v);
         }},
        {"out", [](RunConfig& c, const std::string&,
                   const std::string& v) { c.out_dir = v; }},
        {"n_demos",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.n_demos = ParseInt<std::size_t>(k, v);
         }},
        {"fraction",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.fraction = ParseDouble(k, v);
         }},
        {"fm_steps",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.fm_steps = ParseInt<int>(k, v);
         }},
        {"checkpoint_every",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.checkpoint_every = ParseInt<int>(k, v);
         }}}},
      {"train",
       {{"epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.epochs = ParseInt<int>(k, v);
         }},
        {"batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.batch_size = ParseInt<std::size_t>(k, v);
         }},
        {"num_latents",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.num_latents = ParseInt<std::size_t>(k, v);
         }},
        {"epsilon",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.epsilon = ParseDouble(k, v);
         }},
        {"latent_dim",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.latent_dim = ParseInt<std::size_t>(k, v);
         }},
        {"hidden",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.hidden.clear();
           for (const auto& item : SplitList(v)) {
             c.train.hidden.push_back(ParseInt<std::size_t>(k, item));
           }
         }},
        {"lr",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.adam.lr = ParseDouble(k, v);
         }},
        {"beta1",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.adam.beta1 = ParseDouble(k, v);
         }},
        {"beta2",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.adam.beta2 = ParseDouble(k, v);
         }},
        {"adam_eps",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.adam.eps = ParseDouble(k, v);
         }},
        {"obs_horizon",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.horizons.obs = ParseInt<std::size_t>(k, v);
         }},
        {"pred_horizon",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.horizons.pred = ParseInt<std::size_t>(k, v);
         }},
        {"exec_horizon",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.train.horizons.exec = ParseInt<std::size_t>(k, v);
         }}}},
      {"inference",
       {{"num_candidates",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.inference.num_candidates = ParseInt<std::size_t>(k, v);
         }},
        {"reset_period",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.inference.reset_period = ParseInt<int>(k, v);
         }}}},
      {"toy",
       {{"noise_std",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.toy_noise_std = ParseDouble(k, v);
         }},
        {"w_upper",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.toy_w_upper = ParseDouble(k, v);
         }}}},
      {"pushlite",
       {{"jitter",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.jitter = ParseDouble(k, v);
         }},
        {"rollout_episodes",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.rollout_episodes = ParseInt<int>(k, v);
         }},
        {"max_steps",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.max_steps = ParseInt<int>(k, v);
         }}}},
      {"sweep",
       {{"fractions",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.fractions = ParseDoubleList(k, v);
         }},
        {"methods",
         [](RunConfig& c, const std::string&, const std::string& v) {
           c.sweep_methods.clear();
           for (const auto& item : SplitList(v)) {
             c.sweep_methods.push_back(ParseMethod(item));
           }
         }}}},
      {"eval",
       {{"grid",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.grid = ParseDoubleList(k, v);
         }},
        {"samples",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.mode_samples = ParseInt<std::size_t>(k, v);
         }},
        {"min_fraction",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.min_fraction = ParseDouble(k, v);
         }}}},
      {"bench",
       {{"runs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
           c.bench_runs = ParseInt<int>(k, v);
         }}}},
  };
  return table;
}

}  // namespace

RunConfig DefaultConfig(Task task) {
  RunConfig c;
  c.task = task;
  c.fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  if (task == Task::kToy) {
    c.n_demos = 20;
    c.train.epochs = 4000;
    c.train.horizons = {1, 4, 2};
    c.train.hidden = {128, 128};
    c.grid = {0.25, 0.5, 0.75};
  } else {
    c.n_demos = 100;
    c.train.epochs = 200;
    c.train.horizons = {2, 16, 8};
    c.train.hidden = {64, 64};
    c.grid = {-0.03, -0.015, 0.0, 0.015, 0.03};
  }
  return c;
}

void RunConfig::Validate() const {
  try {
    train.Validate();
    inference.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("run.fraction must be in (0, 1], got " + Fmt(fraction));
  }
  if (n_demos < 1) throw ConfigError("run.n_demos must be >= 1");
  if (task == Task::kToy && n_demos < 2) {
    throw ConfigError("run.n_demos must be >= 2 for the toy task");
  }
  if (task == Task::kToy && train.horizons.obs != 1) {
    throw ConfigError("train.obs_horizon must be 1 for the toy task");
  }
  if (checkpoint_every < 0) throw ConfigError("run.checkpoint_every must be >= 0");
  if (method == Method::kFmK && fm_steps < 1) {
    throw ConfigError("run.fm_steps must be >= 1 for fm_k");
  }
  if (method == Method::kImle && train.horizons.pred != 2 * train.horizons.exec) {
    throw ConfigError(
        "method imle uses temporal consistency, which needs pred_horizon == "
        "2 * exec_horizon");
  }
  if (train.hidden.empty()) throw ConfigError("train.hidden must list at least one layer");
  for (std::size_t h : train.hidden) {
    if (h < 1) throw ConfigError("train.hidden sizes must be >= 1");
  }
  if (!(toy_noise_std >= 0.0)) throw ConfigError("toy.noise_std must be >= 0");
  if (!(toy_w_upper >= 0.0 && toy_w_upper <= 1.0)) {
    throw ConfigError("toy.w_upper must be in [0, 1]");
  }
  if (!(jitter >= 0.0)) throw ConfigError("pushlite.jitter must be >= 0");
  if (rollout_episodes < 1) throw ConfigError("pushlite.rollout_episodes must be >= 1");
  if (max_steps < 1) throw ConfigError("pushlite.max_steps must be >= 1");
  double prev = 0.0;
  for (double f : fractions) {
    if (!(f > prev && f <= 1.0)) {
      throw ConfigError("sweep.fractions must be ascending in (0, 1]");
    }
    prev = f;
  }
  for (Method m : sweep_methods) {
    if (m == Method::kImle && train.horizons.pred != 2 * train.horizons.exec) {
      throw ConfigError("sweep method imle needs pred_horizon == 2 * exec_horizon");
    }
  }
  for (double g : grid) {
    if (task == Task::kToy && !(g > 0.0 && g <= 1.0)) {
      throw ConfigError("eval.grid: toy conditions must lie in the branching region (0, 1]");
    }
    if (task == Task::kPushLite && !(std::abs(g) <= 0.03)) {
      throw ConfigError("eval.grid: pushlite effector offsets must lie in [-0.03, 0.03]");
    }
  }
  if (mode_samples < 1) throw ConfigError("eval.samples must be >= 1");
  if (!(min_fraction > 0.0 && min_fraction <= 1.0)) {
    throw ConfigError("eval.min_fraction must be in (0, 1]");
  }
  if (bench_runs < 1) throw ConfigError("bench.runs must be >= 1");
}

RunConfig ParseConfig(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  Task task = Task::kToy;
  if (auto run = tree.get_child_optional("run")) {
    if (auto t = run->get_optional<std::string>("task")) {
      try {
        task = ParseTask(Trim(*t));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  RunConfig cfg = DefaultConfig(task);

  const auto& setters = Setters();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' must sit inside a [section]");
    }
    const auto sec = setters.find(section);
    if (sec == setters.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) {
        throw ConfigError("config: unknown key " + section + "." + key);
      }
      it->second(cfg, section + "." + key, Trim(node.data()));
    }
  }
  cfg.Validate();
  return cfg;
}

std::string SerializeConfig(const RunConfig& c) {
  std::ostringstream os;
  auto ints = [](const std::vector<std::size_t>& v) {
    return JoinList<std::size_t>(v, [](const std::size_t& x) { return std::to_string(x); });
  };
  auto reals = [](const std::vector<double>& v) {
    return JoinList<double>(v, [](const double& x) { return Fmt(x); });
  };
  os << "[run]\n"
     << "task = " << TaskName(c.task) << "\n"
     << "method = " << MethodName(c.method) << "\n"
     << "seed = " << c.seed << "\n"
     << "out = " << c.out_dir << "\n"
     << "n_demos = " << c.n_demos << "\n"
     << "fraction = " << Fmt(c.fraction) << "\n"
     << "fm_steps = " << c.fm_steps << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n\n";
  os << "[train]\n"
     << "epochs = " << c.train.epochs << "\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "num_latents = " << c.train.num_latents << "\n"
     << "epsilon = " << Fmt(c.train.epsilon) << "\n"
     << "latent_dim = " << c.train.latent_dim << "\n"
     << "hidden = " << ints(c.train.hidden) << "\n"
     << "lr = " << Fmt(c.train.adam.lr) << "\n"
     << "beta1 = " << Fmt(c.train.adam.beta1) << "\n"
     << "beta2 = " << Fmt(c.train.adam.beta2) << "\n"
     << "adam_eps = " << Fmt(c.train.adam.eps) << "\n"
     << "obs_horizon = " << c.train.horizons.obs << "\n"
     << "pred_horizon = " << c.train.horizons.pred << "\n"
     << "exec_horizon = " << c.train.horizons.exec << "\n\n";
  os << "[inference]\n"
     << "num_candidates = " << c.inference.num_candidates << "\n"
     << "reset_period = " << c.inference.reset_period << "\n\n";
  os << "[toy]\n"
     << "noise_std = " << Fmt(c.toy_noise_std) << "\n"
     << "w_upper = " << Fmt(c.toy_w_upper) << "\n\n";
  os << "[pushlite]\n"
     << "jitter = " << Fmt(c.jitter) << "\n"
     << "rollout_episodes = " << c.rollout_episodes << "\n"
     << "max_steps = " << c.max_steps << "\n\n";
  os << "[sweep]\n"
     << "fractions = " << reals(c.fractions) << "\n"
     << "methods = "
     << JoinList<Method>(c.sweep_methods, [](const Method& m) { return MethodName(m); })
     << "\n\n";
  os << "[eval]\n"
     << "grid = " << reals(c.grid) << "\n"
     << "samples = " << c.mode_samples << "\n"
     << "min_fraction = " << Fmt(c.min_fraction) << "\n\n";
  os << "[bench]\n"
     << "runs = " << c.bench_runs << "\n";
  return os.str();
}

RunConfig LoadConfigFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string ConfigHash(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.seed = 0;
  c.out_dir.clear();
  const std::string text = SerializeConfig(c);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig EffectiveTrainConfig(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

InferenceConfig EffectiveInferenceConfig(const RunConfig& cfg) {
  InferenceConfig ic = cfg.inference;
  ic.seed = cfg.seed;
  ic.consistency = cfg.method == Method::kImle;
  if (IsFlowMethod(cfg.method)) ic.num_candidates = 1;
  return ic;
}

int EffectiveFlowSteps(const RunConfig& cfg) {
  return cfg.method == Method::kFmK ? cfg.fm_steps : 1;
}

ToyBranchSpec ToySpecFor(const RunConfig& cfg) {
  ToyBranchSpec spec;
  spec.n_demos = cfg.n_demos;
  spec.noise_std = cfg.toy_noise_std;
  spec.regions = {BranchRegion{1.0, cfg.toy_w_upper, 1.0 - cfg.toy_w_upper}};
  spec.seed = cfg.seed;
  spec.pred_horizon = cfg.train.horizons.pred;
  return spec;
}

DemonstratorOptions DemonstratorOptionsFor(const RunConfig& cfg) {
  DemonstratorOptions o;
  o.jitter = cfg.jitter;
  return o;
}

}  // namespace imle
