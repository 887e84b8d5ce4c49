#pragma once

// Experiment configuration and its flat text format.
//
//   # comment
//   [section]
//   key = value
//
// Every key lives in exactly one section and maps to one field. Unknown
// sections or keys are errors. `dump_config` writes the full effective
// configuration in the same format, so a dump parses back to an equal config.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sleepnet/datasets.hpp"
#include "sleepnet/encoding.hpp"
#include "sleepnet/error.hpp"
#include "sleepnet/network.hpp"
#include "sleepnet/readout.hpp"
#include "sleepnet/sg_model.hpp"
#include "sleepnet/sleep.hpp"

namespace sleepnet {

enum class ModelKind { kStdp, kSg };

inline std::string to_string(ModelKind m) { return m == ModelKind::kStdp ? "stdp" : "sg"; }

inline ModelKind parse_model(std::string_view s) {
  if (s == "stdp" || s == "STDP") return ModelKind::kStdp;
  if (s == "sg" || s == "SG") return ModelKind::kSg;
  throw InputValidationError("unknown model '" + std::string(s) + "' (expected stdp or sg)");
}

inline const std::vector<std::string>& known_datasets() {
  static const std::vector<std::string> names = {"geometric", "mnist", "fmnist", "kmnist", "notmnist"};
  return names;
}

struct EarlyStoppingConfig {
  double patience_fraction = 0.2;
  double min_improvement = 0.001;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::kStdp;
  std::string dataset = "geometric";
  std::uint64_t seed = 1;
  double sleep_ratio = 0.1;
  std::string dataset_root;  // empty: --dataset-root or $SLEEPNET_DATA_ROOT
  std::string telemetry_dir;  // empty: no JSON-lines telemetry

  NetworkParams network;
  SleepSchedule stdp_sleep;  // interval: wake simulation steps
  EncoderConfig encoder;
  SplitPlan split;
  GeometricConfig geometric;
  ReadoutConfig readout;
  EarlyStoppingConfig early_stopping;

  SGConfig sg;
  SleepSchedule sg_sleep{.sleep_ratio = 0.1, .sleep_interval = 40000, .lambda = 0.999, .w_tgt = 0.2};

  ExperimentConfig() {
    // STDP sleeps once per stimulus presentation; one phase per 400-sample
    // batch lets the first batch run away before any sleep happens.
    stdp_sleep.sleep_interval = 100;
  }

  SleepSchedule active_schedule() const {
    SleepSchedule s = model == ModelKind::kStdp ? stdp_sleep : sg_sleep;
    s.sleep_ratio = sleep_ratio;
    return s;
  }

  void validate() const {
    network.validate();
    encoder.validate();
    split.validate();
    sg.validate();
    active_schedule().validate();
    if (network.arch.n_in != encoder.height * encoder.width)
      throw InputValidationError("config: n_in must equal image_height * image_width");
    if (sg.n_in != encoder.height * encoder.width)
      throw InputValidationError("config: sg n_in must equal image_height * image_width");
    if (!(early_stopping.patience_fraction > 0.0)) throw InputValidationError("config: patience must be > 0");
    bool known = false;
    for (const auto& d : known_datasets()) known |= d == dataset;
    if (!known) throw InputValidationError("config: unknown dataset '" + dataset + "'");
  }

  std::size_t patience_batches() const {
    const auto p = static_cast<std::size_t>(std::llround(early_stopping.patience_fraction *
                                                         static_cast<double>(split.n_batches)));
    return p < 1 ? 1 : p;
  }
};

namespace detail {

struct KeyBinding {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Variances are stored as a standard deviation; squaring it back picks up
// rounding noise, so print 12 significant digits.
inline std::string fmt_variance(double std_dev) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), std_dev * std_dev, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw FormatError("expected a number, got '" + s + "'");
  }
  if (pos != s.size()) throw FormatError("expected a number, got '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw FormatError("expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) throw FormatError("expected an integer, got '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw FormatError("expected a boolean, got '" + s + "'");
}

inline std::vector<KeyBinding> build_bindings() {
  std::vector<KeyBinding> b;
  using C = ExperimentConfig;
  auto num = [&b](std::string sec, std::string key, auto accessor) {
    b.push_back({sec, key,
                 [accessor](C& c, const std::string& v) { accessor(c) = parse_double(v); },
                 [accessor](const C& c) { return fmt_double(accessor(const_cast<C&>(c))); }});
  };
  auto integer = [&b](std::string sec, std::string key, auto accessor) {
    b.push_back({sec, key,
                 [accessor](C& c, const std::string& v) {
                   const auto n = parse_int(v);
                   using T = std::remove_reference_t<decltype(accessor(c))>;
                   if constexpr (std::is_unsigned_v<T>) {
                     if (n < 0) throw FormatError("expected a non-negative integer, got '" + v + "'");
                   }
                   accessor(c) = static_cast<T>(n);
                 },
                 [accessor](const C& c) { return std::to_string(accessor(const_cast<C&>(c))); }});
  };
  auto boolean = [&b](std::string sec, std::string key, auto accessor) {
    b.push_back({sec, key, [accessor](C& c, const std::string& v) { accessor(c) = parse_bool(v); },
                 [accessor](const C& c) { return std::string(accessor(const_cast<C&>(c)) ? "true" : "false"); }});
  };
  auto text = [&b](std::string sec, std::string key, auto accessor) {
    b.push_back({sec, key, [accessor](C& c, const std::string& v) { accessor(c) = v; },
                 [accessor](const C& c) { return std::string(accessor(const_cast<C&>(c))); }});
  };
  auto choice = [&b](std::string sec, std::string key, auto setter, auto getter) { b.push_back({sec, key, setter, getter}); };

  // [experiment]
  choice("experiment", "model", [](C& c, const std::string& v) { c.model = parse_model(v); },
         [](const C& c) { return to_string(c.model); });
  text("experiment", "dataset", [](C& c) -> std::string& { return c.dataset; });
  integer("experiment", "seed", [](C& c) -> std::uint64_t& { return c.seed; });
  num("experiment", "sleep_ratio", [](C& c) -> double& { return c.sleep_ratio; });
  text("experiment", "dataset_root", [](C& c) -> std::string& { return c.dataset_root; });
  text("experiment", "telemetry_dir", [](C& c) -> std::string& { return c.telemetry_dir; });

  // [network]  (STDP model architecture)
  integer("network", "n_in", [](C& c) -> std::size_t& { return c.network.arch.n_in; });
  integer("network", "n_exc", [](C& c) -> std::size_t& { return c.network.arch.n_exc; });
  integer("network", "n_inh", [](C& c) -> std::size_t& { return c.network.arch.n_inh; });
  num("network", "p_in_exc", [](C& c) -> double& { return c.network.arch.p_in_exc; });
  num("network", "p_exc_exc", [](C& c) -> double& { return c.network.arch.p_exc_exc; });
  num("network", "p_exc_inh", [](C& c) -> double& { return c.network.arch.p_exc_inh; });
  num("network", "p_inh_exc", [](C& c) -> double& { return c.network.arch.p_inh_exc; });
  num("network", "w_in_exc", [](C& c) -> double& { return c.network.arch.w_in_exc; });
  num("network", "w_exc_exc", [](C& c) -> double& { return c.network.arch.w_exc_exc; });
  num("network", "w_inh_exc", [](C& c) -> double& { return c.network.arch.w_inh_exc; });
  num("network", "w_exc_inh", [](C& c) -> double& { return c.network.arch.w_exc_inh; });
  num("network", "safety_factor", [](C& c) -> double& { return c.network.safety_factor; });

  // [stdp]
  num("stdp", "eta_exc", [](C& c) -> double& { return c.network.stdp.eta_exc; });
  num("stdp", "eta_inh", [](C& c) -> double& { return c.network.stdp.eta_inh; });
  num("stdp", "a_plus", [](C& c) -> double& { return c.network.stdp.a_plus; });
  num("stdp", "a_minus", [](C& c) -> double& { return c.network.stdp.a_minus; });
  num("stdp", "tau_plus", [](C& c) -> double& { return c.network.stdp.tau_plus; });
  num("stdp", "tau_minus", [](C& c) -> double& { return c.network.stdp.tau_minus; });

  // [neuro]
  num("neuro", "dt", [](C& c) -> double& { return c.network.lif.dt; });
  num("neuro", "tau_m", [](C& c) -> double& { return c.network.lif.tau_m; });
  num("neuro", "u_rest", [](C& c) -> double& { return c.network.lif.u_rest; });
  num("neuro", "u_reset", [](C& c) -> double& { return c.network.lif.u_reset; });
  num("neuro", "u_max", [](C& c) -> double& { return c.network.lif.u_max; });
  num("neuro", "u_min", [](C& c) -> double& { return c.network.lif.u_min; });
  num("neuro", "r_m", [](C& c) -> double& { return c.network.lif.r_m; });
  num("neuro", "noise_mean", [](C& c) -> double& { return c.network.lif.noise_mean; });
  choice("neuro", "noise_var",
         [](C& c, const std::string& v) {
           const double var = parse_double(v);
           if (var < 0.0) throw FormatError("noise_var must be >= 0");
           c.network.lif.noise_std = std::sqrt(var);
         },
         [](const C& c) { return fmt_variance(c.network.lif.noise_std); });
  choice("neuro", "noise_placement",
         [](C& c, const std::string& v) {
           if (v == "inside_euler") c.network.lif.noise_placement = NoisePlacement::kInsideEuler;
           else if (v == "additive") c.network.lif.noise_placement = NoisePlacement::kAdditive;
           else throw FormatError("noise_placement must be inside_euler or additive");
         },
         [](const C& c) {
           return std::string(c.network.lif.noise_placement == NoisePlacement::kInsideEuler ? "inside_euler"
                                                                                            : "additive");
         });
  boolean("neuro", "noise_in_wake", [](C& c) -> bool& { return c.network.noise_in_wake; });
  num("neuro", "u_th0", [](C& c) -> double& { return c.network.threshold.u_th0; });
  num("neuro", "tau_th", [](C& c) -> double& { return c.network.threshold.tau_th; });
  num("neuro", "delta", [](C& c) -> double& { return c.network.threshold.delta; });
  boolean("neuro", "reset_between_samples", [](C& c) -> bool& { return c.network.reset_between_samples; });

  // [sleep]  (STDP model)
  num("sleep", "alpha_base", [](C& c) -> double& { return c.stdp_sleep.alpha_base; });
  num("sleep", "alpha_trig", [](C& c) -> double& { return c.stdp_sleep.alpha_trig; });
  num("sleep", "lambda", [](C& c) -> double& { return c.stdp_sleep.lambda; });
  num("sleep", "w_tgt", [](C& c) -> double& { return c.stdp_sleep.w_tgt; });
  integer("sleep", "sleep_interval", [](C& c) -> std::int64_t& { return c.stdp_sleep.sleep_interval; });
  boolean("sleep", "plasticity_in_sleep", [](C& c) -> bool& { return c.network.plasticity_in_sleep; });
  choice("sleep", "reference",
         [](C& c, const std::string& v) {
           if (v == "training_start") c.stdp_sleep.reference = WakeReference::kTrainingStart;
           else if (v == "phase_entry") c.stdp_sleep.reference = WakeReference::kPhaseEntry;
           else throw FormatError("reference must be training_start or phase_entry");
         },
         [](const C& c) {
           return std::string(c.stdp_sleep.reference == WakeReference::kTrainingStart ? "training_start"
                                                                                      : "phase_entry");
         });

  // [data]
  integer("data", "n_train", [](C& c) -> std::size_t& { return c.split.n_train; });
  integer("data", "n_val", [](C& c) -> std::size_t& { return c.split.n_val; });
  integer("data", "n_test", [](C& c) -> std::size_t& { return c.split.n_test; });
  integer("data", "batch_size", [](C& c) -> std::size_t& { return c.split.batch_size; });
  integer("data", "n_batches", [](C& c) -> std::size_t& { return c.split.n_batches; });
  boolean("data", "balance", [](C& c) -> bool& { return c.split.balance; });
  integer("data", "image_height", [](C& c) -> std::size_t& { return c.encoder.height; });
  integer("data", "image_width", [](C& c) -> std::size_t& { return c.encoder.width; });
  num("data", "f_max", [](C& c) -> double& { return c.encoder.f_max; });
  num("data", "t_image", [](C& c) -> double& { return c.encoder.t_image; });
  integer("data", "geometric_total", [](C& c) -> std::size_t& { return c.geometric.n_total; });
  num("data", "geometric_noise_var", [](C& c) -> double& { return c.geometric.noise_variance; });

  // [readout]
  num("readout", "variance_retained", [](C& c) -> double& { return c.readout.variance_retained; });
  num("readout", "l2", [](C& c) -> double& { return c.readout.mlr.l2; });
  integer("readout", "max_iters", [](C& c) -> int& { return c.readout.mlr.max_iters; });
  num("readout", "grad_tol", [](C& c) -> double& { return c.readout.mlr.grad_tol; });

  // [early_stopping]
  num("early_stopping", "patience", [](C& c) -> double& { return c.early_stopping.patience_fraction; });
  num("early_stopping", "min_improvement", [](C& c) -> double& { return c.early_stopping.min_improvement; });

  // [sg]
  integer("sg", "n_hidden", [](C& c) -> std::size_t& { return c.sg.n_hidden; });
  integer("sg", "n_out", [](C& c) -> std::size_t& { return c.sg.n_out; });
  integer("sg", "steps", [](C& c) -> std::size_t& { return c.sg.steps; });
  num("sg", "beta", [](C& c) -> double& { return c.sg.beta; });
  num("sg", "threshold", [](C& c) -> double& { return c.sg.threshold; });
  num("sg", "alpha_surr", [](C& c) -> double& { return c.sg.alpha_surr; });
  choice("sg", "init",
         [](C& c, const std::string& v) {
           if (v == "uniform_fan_in") c.sg.init = SGInit::kUniformFanIn;
           else if (v == "uniform") c.sg.init = SGInit::kUniform;
           else throw FormatError("sg init must be uniform_fan_in or uniform");
         },
         [](const C& c) { return std::string(c.sg.init == SGInit::kUniform ? "uniform" : "uniform_fan_in"); });
  num("sg", "init_gain", [](C& c) -> double& { return c.sg.init_gain; });
  choice("sg", "loss",
         [](C& c, const std::string& v) {
           if (v == "membrane") c.sg.loss = LossMode::kMembraneLogits;
           else if (v == "spikes") c.sg.loss = LossMode::kSpikeLogits;
           else throw FormatError("sg loss must be membrane or spikes");
         },
         [](const C& c) { return std::string(c.sg.loss == LossMode::kMembraneLogits ? "membrane" : "spikes"); });
  num("sg", "lr", [](C& c) -> double& { return c.sg.lr; });
  num("sg", "adam_beta1", [](C& c) -> double& { return c.sg.adam_beta1; });
  num("sg", "adam_beta2", [](C& c) -> double& { return c.sg.adam_beta2; });
  num("sg", "adam_eps", [](C& c) -> double& { return c.sg.adam_eps; });
  integer("sg", "minibatch", [](C& c) -> std::size_t& { return c.sg.minibatch; });
  num("sg", "noise_mean", [](C& c) -> double& { return c.sg.sleep_noise_mean; });
  choice("sg", "noise_var",
         [](C& c, const std::string& v) {
           const double var = parse_double(v);
           if (var < 0.0) throw FormatError("noise_var must be >= 0");
           c.sg.sleep_noise_std = std::sqrt(var);
         },
         [](const C& c) { return fmt_variance(c.sg.sleep_noise_std); });
  num("sg", "sleep_alpha_base", [](C& c) -> double& { return c.sg_sleep.alpha_base; });
  num("sg", "sleep_lambda", [](C& c) -> double& { return c.sg_sleep.lambda; });
  num("sg", "sleep_w_tgt", [](C& c) -> double& { return c.sg_sleep.w_tgt; });
  integer("sg", "sleep_interval", [](C& c) -> std::int64_t& { return c.sg_sleep.sleep_interval; });
  return b;
}

inline const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> b = build_bindings();
  return b;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace detail

// Sets one "section.key" (or a bare key, if unique) from text.
inline void set_config_value(ExperimentConfig& cfg, const std::string& section, const std::string& key,
                             const std::string& value) {
  for (const auto& kb : detail::bindings())
    if (kb.key == key && (section.empty() || kb.section == section)) {
      try {
        kb.set(cfg, value);
      } catch (const FormatError& e) {
        throw FormatError("[" + kb.section + "] " + key + ": " + e.what());
      }
      return;
    }
  throw FormatError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
}

inline void apply_config_text(ExperimentConfig& cfg, std::istream& in) {
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw FormatError("line " + std::to_string(lineno) + ": bad section header");
      section = detail::trim(std::string_view(body).substr(1, body.size() - 2));
      bool known = false;
      for (const auto& kb : detail::bindings()) known |= kb.section == section;
      if (!known) throw FormatError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw FormatError("line " + std::to_string(lineno) + ": key outside any section");
    set_config_value(cfg, section, detail::trim(std::string_view(body).substr(0, eq)),
                     detail::trim(std::string_view(body).substr(eq + 1)));
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  ExperimentConfig cfg;
  apply_config_text(cfg, in);
  return cfg;
}

inline void dump_config(std::ostream& os, const ExperimentConfig& cfg) {
  std::string section;
  for (const auto& kb : detail::bindings()) {
    if (kb.section != section) {
      if (!section.empty()) os << '\n';
      section = kb.section;
      os << '[' << section << "]\n";
    }
    os << kb.key << " = " << kb.get(cfg) << '\n';
  }
}

inline std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& kb : detail::bindings()) out.emplace_back(kb.section, kb.key);
  return out;
}

// FNV-1a over the dumped config with seed and sleep ratio blanked; two runs
// with the same hash differ only in those two grid coordinates.
inline std::uint64_t config_hash(ExperimentConfig cfg) {
  cfg.seed = 0;
  cfg.sleep_ratio = 0.0;
  cfg.telemetry_dir.clear();
  cfg.dataset_root.clear();
  std::ostringstream os;
  dump_config(os, cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sleepnet
