// sleepnet command line: generate-geometric, run, sweep, summarize, config.
//
// exit codes: 0 ok, 1 usage, 2 data error, 3 run failure

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sleepnet/sleepnet.hpp"

using namespace sleepnet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRunFailure = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError("bad list element '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

// Shared config flags: --config, --dataset-root, --set section.key=value.
struct ConfigFlags {
  std::string path;
  std::string dataset_root;
  std::vector<std::string> overrides;

  void add(CLI::App* app) {
    app->add_option("--config", path, "config file (flat [section] key = value)");
    app->add_option("--dataset-root", dataset_root, "dataset root (default: $SLEEPNET_DATA_ROOT)");
    app->add_option("--set", overrides, "override, e.g. --set sleep.lambda=0.999 (repeatable)");
  }

  ExperimentConfig load() const {
    ExperimentConfig cfg;
    try {
      if (!path.empty()) cfg = load_config(path);
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
          throw UsageError("--set expects section.key=value, got '" + o + "'");
        set_config_value(cfg, o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
      }
    } catch (const FormatError& e) {
      throw UsageError(e.what());
    }
    if (!dataset_root.empty()) cfg.dataset_root = dataset_root;
    return cfg;
  }
};

void print_record(const RunRecord& r) {
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& b : r.batches)
    batches.push_back({{"batch", b.batch},
                       {"val_accuracy", b.val_accuracy},
                       {"max_abs_weight", b.max_abs_weight},
                       {"abs_weight_sum", b.abs_weight_sum},
                       {"sleep_phases", b.sleep_phases}});
  nlohmann::json j{{"model", to_string(r.model)},
                   {"dataset", r.dataset},
                   {"seed", r.seed},
                   {"sleep_ratio", r.sleep_ratio},
                   {"batch", r.batch},
                   {"val_accuracy", r.val_accuracy},
                   {"best_val_accuracy", r.best_val_accuracy},
                   {"test_accuracy", r.test_accuracy},
                   {"wall_time_s", r.wall_time_s},
                   {"wake_threshold_count", r.wake_threshold_count},
                   {"wake_budget_count", r.wake_budget_count},
                   {"early_stopped", r.early_stopped},
                   {"aborted", r.aborted},
                   {"abort_reason", r.abort_reason},
                   {"initial_mean_abs", r.initial_mean_abs},
                   {"peak_max_abs", r.peak_max_abs},
                   {"final_max_abs", r.final_max_abs},
                   {"batches", batches}};
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sleepnet: spiking networks with a sleep phase"};
  app.require_subcommand(1);

  // generate-geometric
  auto* gen = app.add_subcommand("generate-geometric", "write the geometric shapes dataset as IDX files");
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  GeometricConfig gcfg;
  gen->add_option("--out", gen_out, "output directory (files land in <out>/geometric/)")->required();
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--count", gcfg.n_total, "number of images");
  gen->add_option("--noise-var", gcfg.noise_variance, "pixel noise variance");

  // run
  auto* run = app.add_subcommand("run", "run a single experiment and print its record as JSON");
  ConfigFlags run_flags;
  run_flags.add(run);
  std::string run_model, run_dataset, run_csv;
  std::uint64_t run_seed = 0;
  double run_ratio = -1.0;
  run->add_option("--model", run_model, "stdp or sg");
  run->add_option("--dataset", run_dataset, "geometric, mnist, fmnist, kmnist, notmnist");
  run->add_option("--seed", run_seed, "seed");
  run->add_option("--sleep-ratio", run_ratio, "sleep ratio in [0,1]");
  run->add_option("--out", run_csv, "also append the row to this results CSV");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a grid of experiments into one CSV");
  ConfigFlags sweep_flags;
  sweep_flags.add(sweep);
  std::string sw_models, sw_datasets, sw_seeds = "1,2,3,4,5",
              sw_ratios = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1", sw_out;
  SweepOptions sw_opt;
  sweep->add_option("--models", sw_models, "comma list of stdp,sg (default: the config's model)");
  sweep->add_option("--datasets", sw_datasets, "comma list of datasets (default: the config's dataset)");
  sweep->add_option("--seeds", sw_seeds, "comma list of seeds");
  sweep->add_option("--sleep-ratios", sw_ratios, "comma list of sleep ratios");
  sweep->add_option("--jobs", sw_opt.jobs, "parallel runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sw_out, "results CSV")->required();
  sweep->add_flag("--resume", sw_opt.resume, "skip runs already in --out");

  // summarize
  auto* summ = app.add_subcommand("summarize", "mean test accuracy and 95% CI per (model, ratio)");
  std::vector<std::string> summ_in;
  std::string summ_out;
  summ->add_option("csv", summ_in, "results CSV(s)")->required();
  summ->add_option("--out", summ_out, "write the summary CSV here");

  // config
  auto* conf = app.add_subcommand("config", "print the effective configuration");
  ConfigFlags conf_flags;
  conf_flags.add(conf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      Rng rng = make_rng(gen_seed, Stream::kDataset);
      const auto set = generate_geometric(gcfg, rng);
      const auto dir = std::filesystem::path(gen_out) / "geometric";
      std::filesystem::create_directories(dir);
      write_idx(set, dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
      std::cout << "wrote " << set.size() << " images to " << dir.string() << '\n';
      return kOk;
    }
    if (*conf) {
      dump_config(std::cout, conf_flags.load());
      return kOk;
    }
    if (*run) {
      auto cfg = run_flags.load();
      if (!run_model.empty()) cfg.model = parse_model(run_model);
      if (!run_dataset.empty()) cfg.dataset = run_dataset;
      if (run->count("--seed")) cfg.seed = run_seed;
      if (run->count("--sleep-ratio")) cfg.sleep_ratio = run_ratio;
      try {
        cfg.validate();
      } catch (const InputValidationError& e) {
        throw UsageError(e.what());
      }
      const auto rec = run_experiment(cfg);
      print_record(rec);
      if (!run_csv.empty()) {
        const bool fresh = !std::filesystem::exists(run_csv) || std::filesystem::file_size(run_csv) == 0;
        std::ofstream out(run_csv, std::ios::app);
        if (fresh) out << "# schema=" << kCsvSchemaVersion << '\n' << kCsvHeader << '\n';
        out << format_row(to_row(rec)) << '\n';
      }
      return rec.aborted ? kRunFailure : kOk;
    }
    if (*sweep) {
      auto base = sweep_flags.load();
      SweepGrid grid;
      grid.models = {base.model};
      if (!sw_models.empty()) {
        grid.models.clear();
        for (const auto& m : parse_names(sw_models)) grid.models.push_back(parse_model(m));
      }
      grid.datasets = sw_datasets.empty() ? std::vector<std::string>{base.dataset} : parse_names(sw_datasets);
      grid.seeds = parse_list<std::uint64_t>(sw_seeds);
      grid.sleep_ratios = parse_list<double>(sw_ratios);
      for (const auto& c : grid.expand(base)) {
        try {
          c.validate();
        } catch (const InputValidationError& e) {
          throw UsageError(e.what());
        }
      }
      sw_opt.out = sw_out;
      const auto rep = run_sweep(grid, base, sw_opt);
      std::cerr << "sweep: planned " << rep.planned << ", skipped " << rep.skipped << ", completed " << rep.completed
                << " (" << rep.aborted << " aborted), failed " << rep.failed << '\n';
      if (rep.failed) std::cerr << "failures logged to " << failures_path(sw_opt.out).string() << '\n';
      return rep.failed ? kRunFailure : kOk;
    }
    if (*summ) {
      std::vector<CsvRow> rows;
      for (const auto& p : summ_in) {
        auto part = read_results_csv(p);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      if (rows.empty()) throw UsageError("summarize: no result rows");
      const auto s = summarize(rows);
      print_summary_table(std::cout, s);
      if (!summ_out.empty()) {
        std::ofstream out(summ_out);
        write_summary_csv(out, s);
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InputValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const LengthError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ConsistencyError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const CapacityError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "run failure: " << e.what() << '\n';
    return kRunFailure;
  }
  return kUsage;
}
