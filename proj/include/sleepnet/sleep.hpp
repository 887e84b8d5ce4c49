#pragma once

// Sleep-wake scheduling and the homeostatic sleep operator.
//
// Training time is cut into intervals of `sleep_interval` wake steps. At each
// interval boundary the model enters a hard-pause sleep phase: external input
// is zeroed, intrinsic noise drives spontaneous activity, and every plastic
// weight relaxes toward the target magnitude under the power law
//
//     |w| <- w_tgt (|w| / w_tgt)^lambda        (sign preserved)
//
// for at most sleep_budget() iterations. The phase ends early once the summed
// absolute plastic weight falls to alpha_base times the reference sum. Sleep
// iterations do not advance the wake step counter.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"

namespace sleepnet {

enum class WakeReference {
  kTrainingStart,  // reference sum captured from the initial weights
  kPhaseEntry,     // reference sum captured when each phase starts
};

struct SleepSchedule {
  double sleep_ratio = 0.1;
  std::int64_t sleep_interval = 40000;
  double lambda = 0.9997;
  double w_tgt = 0.2;
  double alpha_base = 1.0;
  double alpha_trig = 1.0;  // accepted for completeness; onset is purely periodic
  WakeReference reference = WakeReference::kTrainingStart;

  void validate() const {
    if (!(sleep_ratio >= 0.0 && sleep_ratio <= 1.0)) throw InputValidationError("sleep: ratio must lie in [0,1]");
    if (sleep_interval < 1) throw InputValidationError("sleep: interval must be >= 1");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw InputValidationError("sleep: lambda must lie in (0,1]");
    if (!(w_tgt > 0.0)) throw InputValidationError("sleep: w_tgt must be > 0");
    if (!(alpha_base > 0.0)) throw InputValidationError("sleep: alpha_base must be > 0");
    if (alpha_trig < alpha_base) throw InputValidationError("sleep: alpha_trig must not be below alpha_base");
  }
};

enum class Phase { kWake, kSleep };

enum class WakeReason { kThreshold, kBudget };

inline const char* to_string(WakeReason r) { return r == WakeReason::kThreshold ? "threshold" : "budget"; }

struct SleepPhaseRecord {
  std::int64_t wake_step = 0;  // wake step at which the phase began
  std::int64_t budget = 0;
  std::int64_t iterations = 0;
  double weight_sum_before = 0.0;
  double weight_sum_after = 0.0;
  double threshold = 0.0;
  std::int64_t spontaneous_spikes = 0;
  WakeReason reason = WakeReason::kBudget;
};

// Round half away from zero inside max(1, .); zero ratio disables sleep.
inline std::int64_t sleep_budget(const SleepSchedule& s) {
  if (s.sleep_ratio <= 0.0) return 0;
  const auto n = static_cast<std::int64_t>(std::round(s.sleep_ratio * static_cast<double>(s.sleep_interval)));
  return n < 1 ? 1 : n;
}

inline double decay_step(double w, const SleepSchedule& s) {
  if (!std::isfinite(w)) throw NumericError("decay_step: non-finite weight");
  if (w == 0.0) return 0.0;
  const double mag = s.w_tgt * std::pow(std::abs(w) / s.w_tgt, s.lambda);
  return w > 0.0 ? mag : -mag;
}

inline void decay_weights(std::span<double> w, const SleepSchedule& s) {
  for (double& v : w) v = decay_step(v, s);
}

inline bool wake_condition(double weight_sum_now, double weight_sum_initial, const SleepSchedule& s) {
  return weight_sum_now <= s.alpha_base * weight_sum_initial;
}

// First onset at step == interval; step 0 is always wake.
inline Phase wake_sleep_scheduler(std::int64_t step, const SleepSchedule& s) {
  if (s.sleep_ratio <= 0.0 || step <= 0) return Phase::kWake;
  return step % s.sleep_interval == 0 ? Phase::kSleep : Phase::kWake;
}

inline double abs_weight_sum(const std::vector<std::span<double>>& groups) {
  double total = 0.0;
  for (auto g : groups)
    for (double w : g) total += std::abs(w);
  return total;
}

// A model the sleep operator can drive. plastic_weights() exposes every
// weight that decays; spontaneous_step() advances one noise-driven,
// input-free step (with whatever sleep-time plasticity the model keeps
// active) and returns the number of spikes it produced.
template <typename M>
concept Sleeper = requires(M& m, Rng& rng) {
  { m.plastic_weights() } -> std::same_as<std::vector<std::span<double>>>;
  { m.spontaneous_step(rng) } -> std::convertible_to<std::int64_t>;
};

// Runs one sleep phase. `reference_sum` is the training-start weight sum;
// with WakeReference::kPhaseEntry the sum at entry is used instead.
template <Sleeper M>
SleepPhaseRecord sleep_phase(M& model, const SleepSchedule& schedule, double reference_sum, std::int64_t wake_step,
                             Rng& rng) {
  SleepPhaseRecord rec;
  rec.wake_step = wake_step;
  rec.budget = sleep_budget(schedule);
  auto groups = model.plastic_weights();
  rec.weight_sum_before = abs_weight_sum(groups);
  const double reference =
      schedule.reference == WakeReference::kPhaseEntry ? rec.weight_sum_before : reference_sum;
  rec.threshold = schedule.alpha_base * reference;
  rec.weight_sum_after = rec.weight_sum_before;

  for (std::int64_t it = 0; it < rec.budget; ++it) {
    rec.spontaneous_spikes += model.spontaneous_step(rng);
    groups = model.plastic_weights();
    for (auto g : groups) decay_weights(g, schedule);
    rec.iterations = it + 1;
    rec.weight_sum_after = abs_weight_sum(groups);
    if (wake_condition(rec.weight_sum_after, reference, schedule)) {
      rec.reason = WakeReason::kThreshold;
      return rec;
    }
  }
  rec.reason = WakeReason::kBudget;
  return rec;
}

}  // namespace sleepnet
