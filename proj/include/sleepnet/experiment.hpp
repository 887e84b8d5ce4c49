#pragma once

// Single-run drivers for the STDP and SG models.
//
// Both follow the same protocol: 15 training batches, the readout (STDP) or
// the decoder (SG) scored on a fixed validation split after every batch,
// early stopping on validation accuracy, then one test accuracy.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sleepnet/config.hpp"
#include "sleepnet/datasets.hpp"
#include "sleepnet/encoding.hpp"
#include "sleepnet/error.hpp"
#include "sleepnet/network.hpp"
#include "sleepnet/random.hpp"
#include "sleepnet/readout.hpp"
#include "sleepnet/sg_model.hpp"
#include "sleepnet/sleep.hpp"

namespace sleepnet {

struct BatchRecord {
  std::size_t batch = 0;  // 1-based
  double val_accuracy = 0.0;
  double max_abs_weight = 0.0;
  double abs_weight_sum = 0.0;
  std::size_t sleep_phases = 0;
};

struct RunRecord {
  ModelKind model = ModelKind::kStdp;
  std::string dataset;
  std::uint64_t seed = 0;
  double sleep_ratio = 0.0;
  std::size_t batch = 0;  // batches actually trained
  double val_accuracy = 0.0;  // at the last trained batch
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double wall_time_s = 0.0;
  std::int64_t wake_threshold_count = 0;
  std::int64_t wake_budget_count = 0;
  bool early_stopped = false;
  bool aborted = false;
  std::string abort_reason;
  double initial_mean_abs = 0.0;
  double peak_max_abs = 0.0;  // largest max |w| seen at any batch boundary or abort
  double final_max_abs = 0.0;
  std::vector<BatchRecord> batches;
};

// Patience counts batches without an improvement of at least min_improvement
// over the best validation accuracy so far.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_improvement) : patience_(patience), min_improvement_(min_improvement) {}

  // Returns true when training should stop after this batch.
  bool update(double val_accuracy) {
    if (val_accuracy >= best_ + min_improvement_ || !seen_) {
      best_ = std::max(best_, val_accuracy);
      seen_ = true;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= patience_;
  }

  double best() const { return best_; }
  std::size_t stale() const { return stale_; }

 private:
  std::size_t patience_;
  double min_improvement_;
  double best_ = -std::numeric_limits<double>::infinity();
  bool seen_ = false;
  std::size_t stale_ = 0;
};

// ---------------------------------------------------------------------------
// Data

inline std::filesystem::path resolve_dataset_root(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("SLEEPNET_DATA_ROOT")) return env;
  return {};
}

// Pools every {train,t10k} IDX pair found under <root>/<name>/.
inline std::optional<LabeledImageSet> load_idx_directory(const std::filesystem::path& dir) {
  std::optional<LabeledImageSet> pool;
  for (const char* prefix : {"train", "t10k"}) {
    const auto images = dir / (std::string(prefix) + "-images-idx3-ubyte");
    const auto labels = dir / (std::string(prefix) + "-labels-idx1-ubyte");
    if (!std::filesystem::exists(images) || !std::filesystem::exists(labels)) continue;
    auto part = load_idx(images, labels);
    if (!pool) pool = std::move(part);
    else pool->append(part);
  }
  return pool;
}

inline LabeledImageSet load_dataset(const ExperimentConfig& cfg) {
  const auto root = resolve_dataset_root(cfg.dataset_root);
  std::optional<LabeledImageSet> set;
  if (!root.empty()) set = load_idx_directory(root / cfg.dataset);
  if (!set) {
    if (cfg.dataset != "geometric")
      throw FormatError("dataset '" + cfg.dataset + "' not found under '" + root.string() +
                        "' (expected " + cfg.dataset + "/{train,t10k}-{images-idx3,labels-idx1}-ubyte)");
    Rng rng = make_rng(cfg.seed, Stream::kDataset);
    set = generate_geometric(cfg.geometric, rng);
  }
  if (set->height != cfg.encoder.height || set->width != cfg.encoder.width)
    return set->resized(cfg.encoder.height, cfg.encoder.width);
  return std::move(*set);
}

// ---------------------------------------------------------------------------
// Telemetry

class Telemetry {
 public:
  Telemetry(const ExperimentConfig& cfg) {
    if (cfg.telemetry_dir.empty()) return;
    std::filesystem::create_directories(cfg.telemetry_dir);
    std::ostringstream name;
    name << to_string(cfg.model) << '_' << cfg.dataset << "_seed" << cfg.seed << "_ratio" << cfg.sleep_ratio
         << ".jsonl";
    out_ = std::make_unique<std::ofstream>(std::filesystem::path(cfg.telemetry_dir) / name.str());
  }

  void emit(const nlohmann::json& j) {
    if (out_) *out_ << j.dump() << '\n';
  }

  void sleep_phase(const SleepPhaseRecord& r) {
    if (!out_) return;
    emit({{"event", "sleep"},
          {"wake_step", r.wake_step},
          {"budget", r.budget},
          {"iterations", r.iterations},
          {"weight_sum_before", r.weight_sum_before},
          {"weight_sum_after", r.weight_sum_after},
          {"threshold", r.threshold},
          {"spontaneous_spikes", r.spontaneous_spikes},
          {"reason", to_string(r.reason)}});
  }

  void batch(const BatchRecord& b) {
    emit({{"event", "batch"},
          {"batch", b.batch},
          {"val_accuracy", b.val_accuracy},
          {"max_abs_weight", b.max_abs_weight},
          {"abs_weight_sum", b.abs_weight_sum},
          {"sleep_phases", b.sleep_phases}});
  }

 private:
  std::unique_ptr<std::ofstream> out_;
};

namespace detail {

inline void count_wake(RunRecord& rec, const SleepPhaseRecord& p) {
  if (p.reason == WakeReason::kThreshold) ++rec.wake_threshold_count;
  else ++rec.wake_budget_count;
}

inline std::vector<int> labels_of(const LabeledImageSet& s, std::size_t begin, std::size_t end) {
  return {s.labels.begin() + static_cast<std::ptrdiff_t>(begin), s.labels.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// STDP model

// Rates of the excitatory population for every sample of `set`, presented to
// a frozen copy of the network. The encoder stream is seeded per split so the
// same spike trains are used at every evaluation.
inline MatrixXd stdp_features(const StdpNetwork& net, const LabeledImageSet& set, const EncoderConfig& enc,
                              std::uint64_t seed, std::uint64_t split_tag) {
  StdpNetwork frozen = net;
  Rng enc_rng = make_rng(mix_seed(seed ^ mix_seed(split_tag)), Stream::kEvaluation);
  Rng noise_rng = make_rng(mix_seed(seed ^ mix_seed(split_tag + 1)), Stream::kEvaluation);
  MatrixXd features(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(net.params().arch.n_exc));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto raster = poisson_encode(set.image(i), enc, enc_rng);
    const auto counts = frozen.present(raster, false, noise_rng);
    features.row(static_cast<Eigen::Index>(i)) = aggregate_rates(counts, enc.t_image);
  }
  return features;
}

inline RunRecord run_stdp_experiment(const ExperimentConfig& cfg, const DataSplit& data) {
  if (cfg.model != ModelKind::kStdp) throw InputValidationError("run_stdp_experiment: model must be stdp");
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.model = cfg.model;
  rec.dataset = cfg.dataset;
  rec.seed = cfg.seed;
  rec.sleep_ratio = cfg.sleep_ratio;
  Telemetry tel(cfg);

  const SleepSchedule schedule = cfg.active_schedule();
  const int classes = data.train.class_count;
  StdpNetwork net(cfg.network, cfg.seed);
  rec.initial_mean_abs = net.initial_mean_abs();
  Rng enc_rng = make_rng(cfg.seed, Stream::kEncoding);
  Rng noise_rng = make_rng(cfg.seed, Stream::kNoise);
  Rng sleep_rng = make_rng(cfg.seed, Stream::kSleep);

  MatrixXd train_features(static_cast<Eigen::Index>(data.train.size()), static_cast<Eigen::Index>(cfg.network.arch.n_exc));
  std::size_t seen = 0;
  std::int64_t wake_step = 0;
  std::size_t phases_this_batch = 0;
  EarlyStopping stopper(cfg.patience_batches(), cfg.early_stopping.min_improvement);
  std::optional<FittedReadout> readout;

  auto before_step = [&](std::size_t) {
    if (wake_sleep_scheduler(wake_step, schedule) == Phase::kSleep) {
      const auto p = sleep_phase(net, schedule, net.initial_abs_sum(), wake_step, sleep_rng);
      detail::count_wake(rec, p);
      tel.sleep_phase(p);
      ++phases_this_batch;
    }
    ++wake_step;
  };

  auto fit = [&]() {
    const auto labels = detail::labels_of(data.train, 0, seen);
    readout = fit_readout(train_features.topRows(static_cast<Eigen::Index>(seen)), labels, classes, cfg.readout,
                          readout ? &*readout : nullptr);
  };

  for (std::size_t b = 0; b < cfg.split.n_batches && !rec.aborted; ++b) {
    phases_this_batch = 0;
    const std::size_t end = std::min(data.train.size(), (b + 1) * cfg.split.batch_size);
    try {
      for (; seen < end; ++seen) {
        const auto raster = poisson_encode(data.train.image(seen), cfg.encoder, enc_rng);
        const auto counts = net.present(raster, true, noise_rng, before_step);
        train_features.row(static_cast<Eigen::Index>(seen)) = aggregate_rates(counts, cfg.encoder.t_image);
        net.check_finite();
      }
      net.check_weights();
    } catch (const WeightExplosion& e) {
      rec.aborted = true;
      rec.abort_reason = "batch " + std::to_string(b + 1) + ": " + e.what();
      rec.peak_max_abs = std::max(rec.peak_max_abs, net.max_abs_weight());
      tel.emit({{"event", "abort"}, {"reason", rec.abort_reason}, {"samples", seen}});
      break;
    }
    fit();
    BatchRecord br{.batch = b + 1,
                   .max_abs_weight = net.max_abs_weight(),
                   .abs_weight_sum = net.plastic_abs_sum(),
                   .sleep_phases = phases_this_batch};
    const auto val_pred = readout->predict(stdp_features(net, data.val, cfg.encoder, cfg.seed, 0x7661));
    br.val_accuracy = accuracy(val_pred, data.val.labels);
    rec.peak_max_abs = std::max(rec.peak_max_abs, br.max_abs_weight);
    rec.batches.push_back(br);
    tel.batch(br);
    rec.batch = b + 1;
    rec.val_accuracy = br.val_accuracy;
    if (stopper.update(br.val_accuracy)) {
      rec.early_stopped = true;
      break;
    }
  }
  rec.best_val_accuracy = std::max(0.0, stopper.best());

  // An aborted run is scored with whatever the frozen network learned so far.
  if (rec.aborted && seen >= 2) fit();
  if (readout) {
    const auto test_pred = readout->predict(stdp_features(net, data.test, cfg.encoder, cfg.seed, 0x7465));
    rec.test_accuracy = accuracy(test_pred, data.test.labels);
  }
  rec.final_max_abs = net.max_abs_weight();
  rec.peak_max_abs = std::max(rec.peak_max_abs, rec.final_max_abs);
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// SG model

inline double sg_accuracy(const SGParams& p, const SGConfig& sg, const LabeledImageSet& set) {
  if (set.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto fwd = sg_forward(set.image(i), p, sg);
    hits += spike_count_decode(fwd.counts) == set.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

// Number of scheduler onsets in the wake-step range (from, to].
inline std::int64_t sleep_onsets_between(std::int64_t from, std::int64_t to, const SleepSchedule& s) {
  if (s.sleep_ratio <= 0.0 || to <= from) return 0;
  return to / s.sleep_interval - std::max<std::int64_t>(from, 0) / s.sleep_interval;
}

inline RunRecord run_sg_experiment(const ExperimentConfig& cfg, const DataSplit& data) {
  if (cfg.model != ModelKind::kSg) throw InputValidationError("run_sg_experiment: model must be sg");
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.model = cfg.model;
  rec.dataset = cfg.dataset;
  rec.seed = cfg.seed;
  rec.sleep_ratio = cfg.sleep_ratio;
  Telemetry tel(cfg);

  const SleepSchedule schedule = cfg.active_schedule();
  const SGConfig& sg = cfg.sg;
  Rng init_rng = make_rng(cfg.seed, Stream::kInit);
  Rng sleep_rng = make_rng(cfg.seed, Stream::kSleep);
  SGParams params = SGParams::init(sg, init_rng);
  const double reference_sum = params.abs_sum();
  rec.initial_mean_abs = reference_sum / static_cast<double>(params.w1.size() + params.w2.size());
  auto max_abs = [&] { return std::max(params.w1.cwiseAbs().maxCoeff(), params.w2.cwiseAbs().maxCoeff()); };

  SGGradients grad;
  grad.set_zero_like(params);
  std::size_t pending = 0;
  auto flush = [&] {
    if (pending == 0) return;
    grad.w1 /= static_cast<double>(pending);
    grad.w2 /= static_cast<double>(pending);
    adam_step(params, grad, sg);
    grad.set_zero_like(params);
    pending = 0;
  };

  EarlyStopping stopper(cfg.patience_batches(), cfg.early_stopping.min_improvement);
  std::int64_t wake_step = 0;
  const auto steps = static_cast<std::int64_t>(sg.steps);
  std::size_t seen = 0;
  for (std::size_t b = 0; b < cfg.split.n_batches; ++b) {
    std::size_t phases = 0;
    const std::size_t end = std::min(data.train.size(), (b + 1) * cfg.split.batch_size);
    for (; seen < end; ++seen) {
      const auto fwd = sg_forward(data.train.image(seen), params, sg);
      sg_backward_accumulate(fwd.trace, data.train.labels[seen], params, sg, grad);
      if (++pending == sg.minibatch) flush();
      const std::int64_t prev = wake_step;
      wake_step += steps;
      for (std::int64_t k = sleep_onsets_between(prev, wake_step, schedule); k > 0; --k) {
        flush();
        SGSleeper sleeper(params, sg);
        const auto p = sleep_phase(sleeper, schedule, reference_sum, wake_step, sleep_rng);
        detail::count_wake(rec, p);
        tel.sleep_phase(p);
        ++phases;
      }
    }
    flush();
    BatchRecord br{.batch = b + 1, .max_abs_weight = max_abs(), .abs_weight_sum = params.abs_sum(), .sleep_phases = phases};
    br.val_accuracy = sg_accuracy(params, sg, data.val);
    rec.peak_max_abs = std::max(rec.peak_max_abs, br.max_abs_weight);
    rec.batches.push_back(br);
    tel.batch(br);
    rec.batch = b + 1;
    rec.val_accuracy = br.val_accuracy;
    if (stopper.update(br.val_accuracy)) {
      rec.early_stopped = true;
      break;
    }
  }
  rec.best_val_accuracy = std::max(0.0, stopper.best());
  rec.test_accuracy = sg_accuracy(params, sg, data.test);
  rec.final_max_abs = max_abs();
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// Loads the dataset, splits it and dispatches on the model.
inline RunRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto set = load_dataset(cfg);
  const auto split = balanced_split(set, cfg.split, cfg.seed);
  return cfg.model == ModelKind::kStdp ? run_stdp_experiment(cfg, split) : run_sg_experiment(cfg, split);
}

}  // namespace sleepnet
