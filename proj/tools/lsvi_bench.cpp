// Experiment harness for LSVI-UCB under refit budgets.
//
//   lsvi_bench run      --config cfg.json [--out DIR] [overrides]
//   lsvi_bench sweep    --config suite.json [--out DIR]
//   lsvi_bench diagnose ARTIFACT.json [--out DIR]
//
// Exit codes: 0 success, 1 failed diagnostics checks, 2 validation or usage
// errors, 3 numerical failures, 4 sweep with at least one failed run.

#include <CLI11.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lsvi/diagnostics.hpp"
#include "lsvi/harness.hpp"
#include "lsvi/serialization.hpp"

namespace {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheduler;
  std::optional<std::int64_t> budget;
  std::optional<double> eta;
  std::optional<double> bonus_scale;
  std::optional<double> lambda;
  std::optional<double> delta;
  std::optional<std::int64_t> episodes;
};

lsvi::json parse_json_file(const std::string& path, const char* what) {
  const std::string text = lsvi::read_file(path);
  try {
    return lsvi::json::parse(text);
  } catch (const lsvi::json::exception& e) {
    throw std::invalid_argument(std::string(what) + ": " + path + ": " +
                                e.what());
  }
}

// Flag beats file beats default. A scheduler override resets the file's
// budget/eta pairing only where the flags say so; the combined result is
// re-validated before the run.
void apply_overrides(lsvi::RunConfig& cfg, const RunOverrides& ov) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.episodes) cfg.episodes = *ov.episodes;
  if (ov.lambda) cfg.ridge = *ov.lambda;
  if (ov.delta) cfg.delta = *ov.delta;
  if (ov.bonus_scale) cfg.bonus_scale = *ov.bonus_scale;
  if (ov.scheduler) {
    const lsvi::SchedulerKind kind =
        lsvi::scheduler_kind_from_string(*ov.scheduler);
    if (kind != cfg.scheduler.kind) {
      cfg.scheduler.kind = kind;
      cfg.scheduler.budget.reset();
      cfg.scheduler.eta.reset();
    }
  }
  if (ov.budget) {
    cfg.scheduler.budget = *ov.budget;
    cfg.scheduler.eta.reset();
  }
  if (ov.eta) {
    cfg.scheduler.eta = *ov.eta;
    cfg.scheduler.budget.reset();
  }
  lsvi::validate_config(cfg);
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const RunOverrides& ov, bool realized_column) {
  lsvi::RunConfig cfg =
      lsvi::config_from_json(parse_json_file(config_path, "config"));
  apply_overrides(cfg, ov);

  const lsvi::RunReport report = lsvi::run_experiment(cfg);

  std::filesystem::create_directories(out_dir);
  lsvi::write_file(out_dir + "/run.csv", lsvi::run_csv(report, realized_column));
  lsvi::write_file(out_dir + "/summary", lsvi::run_summary(report));
  lsvi::write_file(out_dir + "/run.json", lsvi::artifact_json(report).dump());
  std::cout << lsvi::run_summary(report);

  if (!report.valid) {
    std::cerr << "run aborted: " << report.failure << "\n";
    return 3;
  }
  return 0;
}

int cmd_sweep(const std::string& suite_path,
              const std::optional<std::string>& out_override) {
  const lsvi::SuiteConfig suite =
      lsvi::suite_from_json(parse_json_file(suite_path, "suite"));
  const std::vector<lsvi::SweepEntry> entries = lsvi::expand_suite(suite);
  const std::string out_dir = out_override.value_or(suite.output_dir);

  std::vector<lsvi::SweepRow> rows(entries.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_workers = std::max(
      1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                             static_cast<unsigned>(entries.size())));
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= entries.size()) return;
      rows[i].entry = entries[i];
      try {
        const lsvi::RunReport report = lsvi::run_experiment(entries[i].config);
        if (!report.valid) {
          rows[i].error = report.failure;
          continue;
        }
        rows[i].ok = true;
        rows[i].regret = report.total_regret();
        rows[i].n_switches = report.n_switches;
        rows[i].n_refits =
            static_cast<std::int64_t>(report.switch_episodes.size());
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::filesystem::create_directories(out_dir);
  lsvi::write_file(out_dir + "/sweep.csv", lsvi::sweep_csv(rows));

  std::size_t failed = 0;
  for (const lsvi::SweepRow& r : rows)
    if (!r.ok) ++failed;
  std::cout << "sweep: " << rows.size() << " runs, " << failed
            << " failed, results in " << out_dir << "/sweep.csv\n";
  if (failed > 0) {
    for (const lsvi::SweepRow& r : rows)
      if (!r.ok)
        std::cerr << "failed: " << r.entry.scheduler << " seed "
                  << r.entry.seed << ": " << r.error << "\n";
    return 4;
  }
  return 0;
}

int cmd_diagnose(const std::string& artifact_path,
                 const std::optional<std::string>& out_dir) {
  const lsvi::RunReport report =
      lsvi::load_artifact(parse_json_file(artifact_path, "artifact"));
  if (!report.valid) {
    std::cerr << "artifact records an aborted run: " << report.failure
              << "\n";
    return 3;
  }
  const lsvi::DiagnosticsReport diag = lsvi::run_all_checks(report);
  const std::string text = lsvi::diagnostics_text(diag);
  std::cout << text;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    lsvi::write_file(*out_dir + "/diagnostics.txt", text);
  }
  return diag.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSVI-UCB with limited adaptivity: run, sweep, diagnose"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", artifact_path;
  std::optional<std::string> out_opt;
  RunOverrides ov;
  bool realized_column = false;

  CLI::App* run = app.add_subcommand("run", "one experiment");
  run->add_option("--config", config_path, "run config (json)")->required();
  run->add_option("--out", out_dir, "output directory (default: out)");
  run->add_option("--seed", ov.seed, "override: episode stream seed");
  run->add_option("--scheduler", ov.scheduler,
                  "override: full, batch, det_switch");
  CLI::Option* budget_opt =
      run->add_option("--budget", ov.budget, "override: refit budget B");
  run->add_option("--eta", ov.eta, "override: det-switch threshold")
      ->excludes(budget_opt);
  run->add_option("--bonus-scale", ov.bonus_scale,
                  "override: bonus multiplier");
  run->add_option("--lambda", ov.lambda, "override: ridge parameter");
  run->add_option("--delta", ov.delta, "override: failure probability");
  run->add_option("--episodes", ov.episodes, "override: episode count K");
  run->add_flag("--realized-return", realized_column,
                "append realized_return to run.csv");

  CLI::App* sweep = app.add_subcommand("sweep", "a suite of experiments");
  sweep->add_option("--config", config_path, "suite config (json)")
      ->required();
  sweep->add_option("--out", out_opt,
                    "output directory (default: suite output_dir)");

  CLI::App* diagnose =
      app.add_subcommand("diagnose", "analysis checks on a run artifact");
  diagnose->add_option("artifact", artifact_path, "run.json from a run")
      ->required();
  diagnose->add_option("--out", out_opt, "also write diagnostics.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, ov, realized_column);
    if (sweep->parsed()) return cmd_sweep(config_path, out_opt);
    return cmd_diagnose(artifact_path, out_opt);
  } catch (const lsvi::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
