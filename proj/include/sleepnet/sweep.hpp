#pragma once

// Grid sweeps over (model, dataset, seed, sleep_ratio), the results CSV, and
// the per-(model, ratio) summary.
//
// The CSV is append-only with one writer. A sweep restarted with resume on
// skips every key already present, so an interrupted and resumed sweep ends
// with the same rows as an uninterrupted one (wall time aside).

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sleepnet/config.hpp"
#include "sleepnet/error.hpp"
#include "sleepnet/experiment.hpp"

namespace sleepnet {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kCsvHeader =
    "model,dataset,seed,sleep_ratio,batch,val_accuracy,test_accuracy,wall_time_s,wake_threshold_count,"
    "wake_budget_count";

// Shortest round-trip text for a double, so keys compare exactly after a
// write/read cycle.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct RunKey {
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  std::string sleep_ratio;  // canonical text

  auto tie() const { return std::tie(model, dataset, seed, sleep_ratio); }
  bool operator<(const RunKey& o) const { return tie() < o.tie(); }
  bool operator==(const RunKey& o) const { return tie() == o.tie(); }
};

inline RunKey key_of(const ExperimentConfig& c) {
  return {to_string(c.model), c.dataset, c.seed, format_number(c.sleep_ratio)};
}

struct CsvRow {
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  double sleep_ratio = 0.0;
  std::size_t batch = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double wall_time_s = 0.0;
  std::int64_t wake_threshold_count = 0;
  std::int64_t wake_budget_count = 0;

  RunKey key() const { return {model, dataset, seed, format_number(sleep_ratio)}; }

  // Everything except wall time; used for multiset comparisons.
  std::string deterministic_text() const {
    std::ostringstream os;
    os << model << ',' << dataset << ',' << seed << ',' << format_number(sleep_ratio) << ',' << batch << ','
       << format_number(val_accuracy) << ',' << format_number(test_accuracy) << ',' << wake_threshold_count << ','
       << wake_budget_count;
    return os.str();
  }
};

inline CsvRow to_row(const RunRecord& r) {
  return {to_string(r.model), r.dataset,       r.seed,        r.sleep_ratio,          r.batch,
          r.val_accuracy,     r.test_accuracy, r.wall_time_s, r.wake_threshold_count, r.wake_budget_count};
}

inline std::string format_row(const CsvRow& r) {
  std::ostringstream os;
  os << r.model << ',' << r.dataset << ',' << r.seed << ',' << format_number(r.sleep_ratio) << ',' << r.batch << ','
     << format_number(r.val_accuracy) << ',' << format_number(r.test_accuracy) << ','
     << format_number(r.wall_time_s) << ',' << r.wake_threshold_count << ',' << r.wake_budget_count;
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_cell(const std::string& s, int lineno) {
  T v{};
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw FormatError("csv line " + std::to_string(lineno) + ": bad field '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<CsvRow> read_results_csv(std::istream& in) {
  std::vector<CsvRow> rows;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kCsvHeader) throw FormatError("csv: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw FormatError("csv line " + std::to_string(lineno) + ": expected 10 fields");
    CsvRow r;
    r.model = f[0];
    r.dataset = f[1];
    r.seed = detail::parse_cell<std::uint64_t>(f[2], lineno);
    r.sleep_ratio = detail::parse_cell<double>(f[3], lineno);
    r.batch = detail::parse_cell<std::size_t>(f[4], lineno);
    r.val_accuracy = detail::parse_cell<double>(f[5], lineno);
    r.test_accuracy = detail::parse_cell<double>(f[6], lineno);
    r.wall_time_s = detail::parse_cell<double>(f[7], lineno);
    r.wake_threshold_count = detail::parse_cell<std::int64_t>(f[8], lineno);
    r.wake_budget_count = detail::parse_cell<std::int64_t>(f[9], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<CsvRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_results_csv(in);
}

// ---------------------------------------------------------------------------

struct SweepGrid {
  std::vector<ModelKind> models{ModelKind::kStdp};
  std::vector<std::string> datasets{"geometric"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<double> sleep_ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  std::size_t size() const { return models.size() * datasets.size() * seeds.size() * sleep_ratios.size(); }

  // Row-major over (model, dataset, seed, ratio).
  std::vector<ExperimentConfig> expand(const ExperimentConfig& base) const {
    if (size() == 0) throw InputValidationError("sweep: empty grid");
    std::vector<ExperimentConfig> out;
    for (auto m : models)
      for (const auto& d : datasets)
        for (auto s : seeds)
          for (auto r : sleep_ratios) {
            ExperimentConfig c = base;
            c.model = m;
            c.dataset = d;
            c.seed = s;
            c.sleep_ratio = r;
            out.push_back(std::move(c));
          }
    return out;
  }
};

struct SweepOptions {
  std::filesystem::path out;
  std::size_t jobs = 1;
  bool resume = false;
  std::size_t max_runs = 0;  // 0: no limit (used to simulate interruption)
};

struct SweepReport {
  std::size_t planned = 0;
  std::size_t skipped = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t aborted = 0;  // weight-explosion aborts (still written as rows)
};

using RunFunction = std::function<RunRecord(const ExperimentConfig&)>;

inline std::filesystem::path failures_path(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".failures.jsonl");
}

inline SweepReport run_sweep(const SweepGrid& grid, const ExperimentConfig& base, const SweepOptions& opt,
                             const RunFunction& run = run_experiment) {
  SweepReport rep;
  auto configs = grid.expand(base);
  rep.planned = configs.size();

  std::set<RunKey> done;
  const bool exists = std::filesystem::exists(opt.out) && std::filesystem::file_size(opt.out) > 0;
  if (exists && !opt.resume)
    throw InputValidationError("sweep: " + opt.out.string() + " exists; pass --resume or choose another --out");
  if (exists)
    for (const auto& r : read_results_csv(opt.out)) done.insert(r.key());

  std::vector<ExperimentConfig> todo;
  for (auto& c : configs) {
    if (done.count(key_of(c))) ++rep.skipped;
    else todo.push_back(std::move(c));
  }
  if (opt.max_runs && todo.size() > opt.max_runs) todo.resize(opt.max_runs);

  if (!opt.out.parent_path().empty()) std::filesystem::create_directories(opt.out.parent_path());
  std::ofstream csv(opt.out, std::ios::app);
  if (!csv) throw FormatError("cannot write " + opt.out.string());
  if (!exists) csv << "# schema=" << kCsvSchemaVersion << '\n' << kCsvHeader << '\n' << std::flush;
  std::ofstream failures;

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const auto& cfg = todo[i];
      try {
        const auto rec = run(cfg);
        std::lock_guard lock(mu);
        csv << format_row(to_row(rec)) << '\n' << std::flush;
        ++rep.completed;
        rep.aborted += rec.aborted;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failures.is_open()) failures.open(failures_path(opt.out), std::ios::app);
        const auto k = key_of(cfg);
        failures << nlohmann::json{{"model", k.model},
                                   {"dataset", k.dataset},
                                   {"seed", k.seed},
                                   {"sleep_ratio", cfg.sleep_ratio},
                                   {"error", e.what()}}
                        .dump()
                 << '\n'
                 << std::flush;
        ++rep.failed;
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(opt.jobs, todo.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rep;
}

// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string model;
  double sleep_ratio = 0.0;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Mean test accuracy per (model, ratio) across seeds and datasets, with a
// normal-approximation 95% interval mean +- 1.96 sd / sqrt(n) (sample sd;
// degenerate at n = 1).
inline std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows) {
  if (rows.empty()) throw InputValidationError("summarize: no rows");
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.model, r.sleep_ratio}].push_back(r.test_accuracy);
  std::vector<SummaryRow> out;
  for (const auto& [k, v] : groups) {
    SummaryRow s{.model = k.first, .sleep_ratio = k.second, .n = v.size()};
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double half = 0.0;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      half = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
    }
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    out.push_back(s);
  }
  return out;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "model,sleep_ratio,n,mean,ci_low,ci_high\n";
  for (const auto& r : rows)
    os << r.model << ',' << format_number(r.sleep_ratio) << ',' << r.n << ',' << format_number(r.mean) << ','
       << format_number(r.ci_low) << ',' << format_number(r.ci_high) << '\n';
}

inline void print_summary_table(std::ostream& os, const std::vector<SummaryRow>& rows) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-6s %6s %4s %8s %8s %8s\n", "model", "ratio", "n", "mean", "ci_low", "ci_high");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-6s %6.2f %4zu %8.4f %8.4f %8.4f\n", r.model.c_str(), r.sleep_ratio, r.n, r.mean,
                  r.ci_low, r.ci_high);
    os << buf;
  }
}

}  // namespace sleepnet
