#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsvi/diagnostics.hpp"
#include "lsvi/harness.hpp"

namespace lsvi {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Shortest exact decimal: doubles round-trip bit-for-bit through text.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline const json& require_field(const json& j, const char* key,
                                 const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::invalid_argument(ctx + "." + key + ": missing");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& ctx) {
  try {
    return require_field(j, key, ctx).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(ctx + "." + key + ": " + e.what());
  }
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key,
                              const std::string& ctx) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_as<T>(j, key, ctx);
}

inline void require_version(const json& j, const std::string& ctx) {
  const int v = get_as<int>(j, "schema_version", ctx);
  if (v != kSchemaVersion)
    throw std::invalid_argument(ctx + ".schema_version: unsupported version " +
                                std::to_string(v));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model instance

inline json spec_to_json(const LinearMdp& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["horizon"] = m.horizon;
  j["states"] = m.states();
  j["actions"] = m.actions();
  j["dim"] = m.dim();
  json feats = json::array();
  for (const Eigen::VectorXd& phi : m.features.table)
    feats.push_back(std::vector<double>(phi.data(), phi.data() + phi.size()));
  j["features"] = std::move(feats);
  json measures = json::array();
  for (const Eigen::MatrixXd& mh : m.measures) {
    json rows = json::array();
    for (int i = 0; i < mh.rows(); ++i) {
      std::vector<double> row(mh.cols());
      for (int t = 0; t < mh.cols(); ++t) row[t] = mh(i, t);
      rows.push_back(std::move(row));
    }
    measures.push_back(std::move(rows));
  }
  j["measures"] = std::move(measures);
  json rewards = json::array();
  for (const Eigen::VectorXd& th : m.rewards)
    rewards.push_back(std::vector<double>(th.data(), th.data() + th.size()));
  j["rewards"] = std::move(rewards);
  if (m.initial.is_fixed())
    j["initial"] = m.initial.state;
  else
    j["initial"] = m.initial.distribution;
  return j;
}

inline LinearMdp spec_from_json(const json& j) {
  const std::string ctx = "spec";
  detail::require_version(j, ctx);
  LinearMdp m;
  m.horizon = detail::get_as<int>(j, "horizon", ctx);
  const int S = detail::get_as<int>(j, "states", ctx);
  const int A = detail::get_as<int>(j, "actions", ctx);
  const int d = detail::get_as<int>(j, "dim", ctx);
  if (S < 1 || A < 1 || d < 1 || m.horizon < 1)
    throw std::invalid_argument(ctx + ": sizes must be >= 1");
  m.features.states = S;
  m.features.actions = A;
  m.features.dim = d;
  const auto feats =
      detail::get_as<std::vector<std::vector<double>>>(j, "features", ctx);
  if (feats.size() != static_cast<std::size_t>(S) * A)
    throw std::invalid_argument(ctx + ".features: expected one row per"
                                      " state-action pair");
  for (const std::vector<double>& row : feats) {
    if (row.size() != static_cast<std::size_t>(d))
      throw std::invalid_argument(ctx + ".features: row of wrong length");
    m.features.table.push_back(
        Eigen::Map<const Eigen::VectorXd>(row.data(), d));
  }
  const auto measures = detail::get_as<std::vector<std::vector<std::vector<double>>>>(
      j, "measures", ctx);
  if (measures.size() != static_cast<std::size_t>(m.horizon))
    throw std::invalid_argument(ctx + ".measures: one block per stage");
  for (const auto& block : measures) {
    if (block.size() != static_cast<std::size_t>(d))
      throw std::invalid_argument(ctx + ".measures: block must have d rows");
    Eigen::MatrixXd mh(d, S);
    for (int i = 0; i < d; ++i) {
      if (block[i].size() != static_cast<std::size_t>(S))
        throw std::invalid_argument(ctx + ".measures: row of wrong length");
      for (int t = 0; t < S; ++t) mh(i, t) = block[i][t];
    }
    m.measures.push_back(std::move(mh));
  }
  const auto rewards =
      detail::get_as<std::vector<std::vector<double>>>(j, "rewards", ctx);
  if (rewards.size() != static_cast<std::size_t>(m.horizon))
    throw std::invalid_argument(ctx + ".rewards: one row per stage");
  for (const std::vector<double>& row : rewards) {
    if (row.size() != static_cast<std::size_t>(d))
      throw std::invalid_argument(ctx + ".rewards: row of wrong length");
    m.rewards.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), d));
  }
  const json& init = detail::require_field(j, "initial", ctx);
  if (init.is_number_integer()) {
    m.initial.state = init.get<int>();
  } else if (init.is_array()) {
    m.initial.distribution = init.get<std::vector<double>>();
  } else {
    throw std::invalid_argument(
        ctx + ".initial: expected a state index or a distribution");
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------
// Run configuration

inline json config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["episodes"] = cfg.episodes;
  j["seed"] = cfg.seed;
  j["lambda"] = cfg.ridge;
  j["delta"] = cfg.delta;
  j["bonus_scale"] = cfg.bonus_scale;
  j["gram_refresh"] = cfg.gram_refresh;
  json sched;
  sched["kind"] = to_string(cfg.scheduler.kind);
  if (cfg.scheduler.budget) sched["budget"] = *cfg.scheduler.budget;
  if (cfg.scheduler.eta) sched["eta"] = *cfg.scheduler.eta;
  j["scheduler"] = std::move(sched);
  if (cfg.generator) {
    json g;
    g["dim"] = cfg.generator->dim;
    g["states"] = cfg.generator->states;
    g["actions"] = cfg.generator->actions;
    g["horizon"] = cfg.generator->horizon;
    g["seed"] = cfg.generator->seed;
    j["generator"] = std::move(g);
  }
  if (cfg.spec) j["spec"] = spec_to_json(*cfg.spec);
  return j;
}

inline RunConfig config_from_json(const json& j,
                                  bool require_version = true) {
  const std::string ctx = "config";
  if (!j.is_object())
    throw std::invalid_argument(ctx + ": expected an object");
  if (require_version) detail::require_version(j, ctx);
  RunConfig cfg;
  cfg.episodes = detail::get_as<std::int64_t>(j, "episodes", ctx);
  cfg.seed = detail::get_optional<std::uint64_t>(j, "seed", ctx).value_or(0);
  cfg.ridge = detail::get_optional<double>(j, "lambda", ctx).value_or(1.0);
  cfg.delta = detail::get_optional<double>(j, "delta", ctx).value_or(0.01);
  cfg.bonus_scale =
      detail::get_optional<double>(j, "bonus_scale", ctx).value_or(1.0);
  cfg.gram_refresh = detail::get_optional<int>(j, "gram_refresh", ctx)
                         .value_or(kDefaultRefreshPeriod);
  const json& sched = detail::require_field(j, "scheduler", ctx);
  cfg.scheduler.kind = scheduler_kind_from_string(
      detail::get_as<std::string>(sched, "kind", ctx + ".scheduler"));
  cfg.scheduler.budget =
      detail::get_optional<std::int64_t>(sched, "budget", ctx + ".scheduler");
  cfg.scheduler.eta =
      detail::get_optional<double>(sched, "eta", ctx + ".scheduler");
  if (j.contains("generator") && !j.at("generator").is_null()) {
    const json& g = j.at("generator");
    GeneratorParams p;
    p.dim = detail::get_as<int>(g, "dim", ctx + ".generator");
    p.states = detail::get_as<int>(g, "states", ctx + ".generator");
    p.actions = detail::get_as<int>(g, "actions", ctx + ".generator");
    p.horizon = detail::get_as<int>(g, "horizon", ctx + ".generator");
    p.seed = detail::get_optional<std::uint64_t>(g, "seed", ctx + ".generator")
                 .value_or(0);
    cfg.generator = p;
  }
  if (j.contains("spec") && !j.at("spec").is_null())
    cfg.spec = spec_from_json(j.at("spec"));
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment suite

// Sweep over the cartesian product of the axes; empty axes fall back to the
// base config's own value. The budget axis does not apply to the full
// scheduler, which contributes one row per seed pair.
struct SuiteConfig {
  RunConfig base;
  std::vector<std::string> schedulers;
  std::vector<std::int64_t> budgets;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> spec_seeds;
  std::string output_dir = "out";
  std::int64_t max_runs = 10000;
};

struct SweepEntry {
  std::string scheduler;
  std::optional<std::int64_t> budget;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> spec_seed;
  RunConfig config;
};

inline SuiteConfig suite_from_json(const json& j) {
  const std::string ctx = "suite";
  detail::require_version(j, ctx);
  SuiteConfig suite;
  suite.base =
      config_from_json(detail::require_field(j, "base", ctx), false);
  suite.schedulers = detail::get_optional<std::vector<std::string>>(
                         j, "schedulers", ctx)
                         .value_or(std::vector<std::string>{});
  suite.budgets = detail::get_optional<std::vector<std::int64_t>>(j, "budgets",
                                                                  ctx)
                      .value_or(std::vector<std::int64_t>{});
  suite.seeds =
      detail::get_optional<std::vector<std::uint64_t>>(j, "seeds", ctx)
          .value_or(std::vector<std::uint64_t>{});
  suite.spec_seeds =
      detail::get_optional<std::vector<std::uint64_t>>(j, "spec_seeds", ctx)
          .value_or(std::vector<std::uint64_t>{});
  suite.output_dir =
      detail::get_optional<std::string>(j, "output_dir", ctx).value_or("out");
  suite.max_runs =
      detail::get_optional<std::int64_t>(j, "max_runs", ctx).value_or(10000);
  if (!suite.spec_seeds.empty() && !suite.base.generator)
    throw std::invalid_argument(
        ctx + ".spec_seeds: requires a generator-based base config");
  return suite;
}

inline std::vector<SweepEntry> expand_suite(const SuiteConfig& suite) {
  std::vector<std::string> schedulers = suite.schedulers;
  if (schedulers.empty())
    schedulers.push_back(to_string(suite.base.scheduler.kind));
  std::vector<std::uint64_t> seeds = suite.seeds;
  if (seeds.empty()) seeds.push_back(suite.base.seed);

  std::vector<std::optional<std::uint64_t>> spec_seeds;
  if (suite.spec_seeds.empty())
    spec_seeds.push_back(std::nullopt);
  else
    for (std::uint64_t s : suite.spec_seeds) spec_seeds.push_back(s);

  std::vector<SweepEntry> entries;
  for (const std::string& sched_name : schedulers) {
    const SchedulerKind kind = scheduler_kind_from_string(sched_name);
    // The budget axis applies only to the batched schedulers; without one,
    // the base config must already carry a usable budget or eta.
    std::vector<SchedulerConfig> scheds;
    if (kind == SchedulerKind::kFull) {
      scheds.push_back({kind, std::nullopt, std::nullopt});
    } else if (!suite.budgets.empty()) {
      for (std::int64_t b : suite.budgets)
        scheds.push_back({kind, b, std::nullopt});
    } else if (kind == suite.base.scheduler.kind) {
      scheds.push_back(suite.base.scheduler);
    } else {
      throw std::invalid_argument(
          "suite: scheduler " + sched_name +
          " needs a budget axis or a matching base scheduler");
    }
    for (const SchedulerConfig& sched : scheds) {
      for (const std::optional<std::uint64_t>& spec_seed : spec_seeds) {
        for (std::uint64_t seed : seeds) {
          SweepEntry e;
          e.scheduler = sched_name;
          e.budget = sched.budget;
          e.seed = seed;
          e.spec_seed = spec_seed;
          e.config = suite.base;
          e.config.scheduler = sched;
          e.config.seed = seed;
          if (spec_seed && e.config.generator)
            e.config.generator->seed = *spec_seed;
          // Not validated here: a bad axis value (say, budget 0) fails its
          // own rows at run time and surfaces as a partial sweep failure
          // rather than aborting the whole suite.
          entries.push_back(std::move(e));
          if (static_cast<std::int64_t>(entries.size()) > suite.max_runs)
            throw std::invalid_argument(
                "suite: expansion exceeds max_runs = " +
                std::to_string(suite.max_runs));
        }
      }
    }
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Run artifacts

inline std::string run_csv(const RunReport& report,
                           bool realized_column = false) {
  std::string out = "episode,b_k,inst_regret,cum_regret,n_switches_so_far";
  if (realized_column) out += ",realized_return";
  out += "\n";
  for (const EpisodeRow& row : report.per_episode) {
    out += std::to_string(row.episode) + "," + std::to_string(row.fit_episode) +
           "," + fmt_double(row.inst_regret) + "," +
           fmt_double(row.cum_regret) + "," +
           std::to_string(row.switches_so_far);
    if (realized_column) out += "," + fmt_double(row.realized_return);
    out += "\n";
  }
  return out;
}

inline std::string run_summary(const RunReport& report) {
  std::ostringstream out;
  out << "schema_version: " << kSchemaVersion << "\n";
  out << "scheduler: " << to_string(report.config.scheduler.kind) << "\n";
  if (report.config.scheduler.budget)
    out << "budget: " << *report.config.scheduler.budget << "\n";
  out << "episodes: " << report.config.episodes << "\n";
  out << "horizon: " << report.spec.horizon << "\n";
  out << "dim: " << report.spec.dim() << "\n";
  out << "states: " << report.spec.states() << "\n";
  out << "actions: " << report.spec.actions() << "\n";
  out << "lambda: " << fmt_double(report.config.ridge) << "\n";
  out << "delta: " << fmt_double(report.config.delta) << "\n";
  out << "bonus_scale: " << fmt_double(report.config.bonus_scale) << "\n";
  out << "seed: " << report.config.seed << "\n";
  out << "beta: " << fmt_double(report.beta) << "\n";
  if (report.eta) out << "eta: " << fmt_double(*report.eta) << "\n";
  if (report.grid) {
    out << "grid:";
    for (std::size_t i = 0; i < report.grid->points.size(); ++i)
      out << (i == 0 ? " " : ",") << report.grid->points[i];
    out << "\n";
    out << "grid_sentinel: " << report.grid->sentinel << "\n";
  }
  out << "n_refits: " << report.switch_episodes.size() << "\n";
  out << "n_switches: " << report.n_switches << "\n";
  out << "regret: " << fmt_double(report.total_regret()) << "\n";
  out << "runtime_seconds: " << fmt_double(report.timing.total_seconds)
      << "\n";
  out << "valid: " << (report.valid ? "true" : "false") << "\n";
  if (!report.valid) out << "failure: " << report.failure << "\n";
  return out.str();
}

inline json artifact_json(const RunReport& report) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "lsvi-run";
  j["config"] = config_to_json(report.config);
  j["spec"] = spec_to_json(report.spec);
  j["beta"] = report.beta;
  j["eta"] = report.eta ? json(*report.eta) : json(nullptr);
  if (report.grid) {
    j["grid"] = {{"points", report.grid->points},
                 {"sentinel", report.grid->sentinel}};
  } else {
    j["grid"] = nullptr;
  }
  json rows = json::array();
  for (const EpisodeRow& r : report.per_episode)
    rows.push_back({r.episode, r.fit_episode, r.inst_regret, r.cum_regret,
                    r.switches_so_far, r.realized_return});
  j["per_episode"] = std::move(rows);
  j["switch_episodes"] = report.switch_episodes;
  j["n_switches"] = report.n_switches;
  j["gram_logdets"] = report.gram_logdets;
  json traces = json::array();
  for (const EpisodeTrace& t : report.traces)
    traces.push_back({{"states", t.states},
                      {"actions", t.actions},
                      {"rewards", t.rewards}});
  j["traces"] = std::move(traces);
  json snaps = json::array();
  for (const SnapshotRecord& rec : report.snapshots) {
    json stages = json::array();
    for (int h = 0; h < report.spec.horizon; ++h) {
      const StageFit& sf = rec.snapshot.stage(h);
      json stage;
      stage["w"] = std::vector<double>(sf.weights.data(),
                                       sf.weights.data() + sf.weights.size());
      json inv_rows = json::array();
      for (int i = 0; i < sf.gram_inv.rows(); ++i) {
        std::vector<double> row(sf.gram_inv.cols());
        for (int t = 0; t < sf.gram_inv.cols(); ++t) row[t] = sf.gram_inv(i, t);
        inv_rows.push_back(std::move(row));
      }
      stage["gram_inv"] = std::move(inv_rows);
      stage["log_det"] = sf.gram_log_det;
      stages.push_back(std::move(stage));
    }
    json pv_rows = json::array();
    for (int i = 0; i < rec.policy_v.rows(); ++i) {
      std::vector<double> row(rec.policy_v.cols());
      for (int t = 0; t < rec.policy_v.cols(); ++t) row[t] = rec.policy_v(i, t);
      pv_rows.push_back(std::move(row));
    }
    snaps.push_back({{"episode", rec.episode},
                     {"stages", std::move(stages)},
                     {"policy", rec.policy},
                     {"policy_v", std::move(pv_rows)}});
  }
  j["snapshots"] = std::move(snaps);
  j["timing"] = {{"fit_seconds", report.timing.fit_seconds},
                 {"act_seconds", report.timing.act_seconds},
                 {"oracle_seconds", report.timing.oracle_seconds},
                 {"total_seconds", report.timing.total_seconds}};
  j["valid"] = report.valid;
  j["failure"] = report.failure;
  return j;
}

// Loads and structurally validates an artifact. Trace features are rebuilt
// from the spec's feature table, which reproduces the recorded run exactly
// because traces only ever reference table entries.
inline RunReport load_artifact(const json& j) {
  const std::string ctx = "artifact";
  detail::require_version(j, ctx);
  if (detail::get_as<std::string>(j, "kind", ctx) != "lsvi-run")
    throw std::invalid_argument(ctx + ".kind: not an lsvi-run artifact");
  RunReport report;
  report.config = config_from_json(detail::require_field(j, "config", ctx));
  report.spec = spec_from_json(detail::require_field(j, "spec", ctx));
  report.beta = detail::get_as<double>(j, "beta", ctx);
  report.eta = detail::get_optional<double>(j, "eta", ctx);
  if (j.contains("grid") && !j.at("grid").is_null()) {
    BatchGrid grid;
    grid.points = detail::get_as<std::vector<std::int64_t>>(
        j.at("grid"), "points", ctx + ".grid");
    grid.sentinel =
        detail::get_as<std::int64_t>(j.at("grid"), "sentinel", ctx + ".grid");
    report.grid = std::move(grid);
  }
  report.valid = detail::get_as<bool>(j, "valid", ctx);
  report.failure = detail::get_as<std::string>(j, "failure", ctx);
  report.n_switches = detail::get_as<std::int64_t>(j, "n_switches", ctx);
  report.switch_episodes =
      detail::get_as<std::vector<std::int64_t>>(j, "switch_episodes", ctx);
  report.gram_logdets = detail::get_as<std::vector<std::vector<double>>>(
      j, "gram_logdets", ctx);

  const int H = report.spec.horizon;
  const json& rows = detail::require_field(j, "per_episode", ctx);
  for (const json& r : rows) {
    if (!r.is_array() || r.size() != 6)
      throw std::invalid_argument(ctx + ".per_episode: malformed row");
    EpisodeRow row;
    row.episode = r[0].get<std::int64_t>();
    row.fit_episode = r[1].get<std::int64_t>();
    row.inst_regret = r[2].get<double>();
    row.cum_regret = r[3].get<double>();
    row.switches_so_far = r[4].get<std::int64_t>();
    row.realized_return = r[5].get<double>();
    report.per_episode.push_back(row);
  }

  const json& traces = detail::require_field(j, "traces", ctx);
  for (const json& t : traces) {
    EpisodeTrace trace;
    trace.states = detail::get_as<std::vector<int>>(t, "states",
                                                    ctx + ".traces");
    trace.actions = detail::get_as<std::vector<int>>(t, "actions",
                                                     ctx + ".traces");
    trace.rewards = detail::get_as<std::vector<double>>(t, "rewards",
                                                        ctx + ".traces");
    if (trace.states.size() != static_cast<std::size_t>(H) + 1 ||
        trace.actions.size() != static_cast<std::size_t>(H) ||
        trace.rewards.size() != static_cast<std::size_t>(H))
      throw std::invalid_argument(ctx + ".traces: truncated trace");
    for (int h = 0; h < H; ++h) {
      if (trace.states[h] < 0 || trace.states[h] >= report.spec.states() ||
          trace.actions[h] < 0 || trace.actions[h] >= report.spec.actions())
        throw std::invalid_argument(ctx + ".traces: index out of range");
      trace.features.push_back(
          report.spec.features.phi(trace.states[h], trace.actions[h]));
    }
    if (trace.states[H] < 0 || trace.states[H] >= report.spec.states())
      throw std::invalid_argument(ctx + ".traces: index out of range");
    report.traces.push_back(std::move(trace));
  }
  if (report.valid) {
    if (report.traces.size() !=
        static_cast<std::size_t>(report.config.episodes))
      throw std::invalid_argument(ctx + ".traces: wrong episode count");
    if (report.per_episode.size() != report.traces.size())
      throw std::invalid_argument(ctx + ".per_episode: wrong episode count");
    if (report.gram_logdets.size() != report.traces.size() + 1)
      throw std::invalid_argument(ctx + ".gram_logdets: wrong row count");
  }

  const json& snaps = detail::require_field(j, "snapshots", ctx);
  for (const json& rec_j : snaps) {
    SnapshotRecord rec;
    rec.episode =
        detail::get_as<std::int64_t>(rec_j, "episode", ctx + ".snapshots");
    const json& stages_j =
        detail::require_field(rec_j, "stages", ctx + ".snapshots");
    if (stages_j.size() != static_cast<std::size_t>(H))
      throw std::invalid_argument(ctx + ".snapshots: wrong stage count");
    std::vector<StageFit> stages;
    for (const json& stage_j : stages_j) {
      StageFit sf;
      const auto w =
          detail::get_as<std::vector<double>>(stage_j, "w", ctx + ".snapshots");
      if (w.size() != static_cast<std::size_t>(report.spec.dim()))
        throw std::invalid_argument(ctx + ".snapshots: weight length");
      sf.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
      const auto inv = detail::get_as<std::vector<std::vector<double>>>(
          stage_j, "gram_inv", ctx + ".snapshots");
      if (inv.size() != static_cast<std::size_t>(report.spec.dim()))
        throw std::invalid_argument(ctx + ".snapshots: gram_inv shape");
      sf.gram_inv.resize(report.spec.dim(), report.spec.dim());
      for (int i = 0; i < report.spec.dim(); ++i) {
        if (inv[i].size() != static_cast<std::size_t>(report.spec.dim()))
          throw std::invalid_argument(ctx + ".snapshots: gram_inv shape");
        for (int t = 0; t < report.spec.dim(); ++t) sf.gram_inv(i, t) = inv[i][t];
      }
      sf.gram_log_det =
          detail::get_as<double>(stage_j, "log_det", ctx + ".snapshots");
      stages.push_back(std::move(sf));
    }
    rec.snapshot = QSnapshot(H, report.beta, rec.episode, std::move(stages));
    rec.policy = detail::get_as<std::vector<std::vector<int>>>(
        rec_j, "policy", ctx + ".snapshots");
    const auto pv = detail::get_as<std::vector<std::vector<double>>>(
        rec_j, "policy_v", ctx + ".snapshots");
    if (pv.size() != static_cast<std::size_t>(H) + 1)
      throw std::invalid_argument(ctx + ".snapshots: policy_v shape");
    rec.policy_v.resize(H + 1, report.spec.states());
    for (int i = 0; i <= H; ++i) {
      if (pv[i].size() != static_cast<std::size_t>(report.spec.states()))
        throw std::invalid_argument(ctx + ".snapshots: policy_v shape");
      for (int s = 0; s < report.spec.states(); ++s) rec.policy_v(i, s) = pv[i][s];
    }
    report.snapshots.push_back(std::move(rec));
  }
  if (report.snapshots.empty() && !report.per_episode.empty())
    throw std::invalid_argument(ctx + ".snapshots: empty");

  const json& timing = detail::require_field(j, "timing", ctx);
  report.timing.fit_seconds =
      detail::get_as<double>(timing, "fit_seconds", ctx + ".timing");
  report.timing.act_seconds =
      detail::get_as<double>(timing, "act_seconds", ctx + ".timing");
  report.timing.oracle_seconds =
      detail::get_as<double>(timing, "oracle_seconds", ctx + ".timing");
  report.timing.total_seconds =
      detail::get_as<double>(timing, "total_seconds", ctx + ".timing");
  return report;
}

// ---------------------------------------------------------------------------
// Diagnostics and sweep output

inline std::string diagnostics_text(const DiagnosticsReport& report) {
  std::string out;
  for (const CheckResult& c : report.checks) {
    out += "name=" + c.name;
    out += " pass=";
    out += c.applicable ? (c.pass ? "true" : "false") : "not-applicable";
    out += " worst_margin=" + fmt_double(c.worst_margin);
    out += " n_violations=" + std::to_string(c.n_violations);
    if (!c.note.empty()) out += " note=\"" + c.note + "\"";
    out += "\n";
  }
  return out;
}

struct SweepRow {
  SweepEntry entry;
  bool ok = false;
  double regret = 0.0;
  std::int64_t n_switches = 0;
  std::int64_t n_refits = 0;
  std::string error;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "scheduler,budget,seed,spec_seed,regret,n_switches,n_refits,status\n";
  for (const SweepRow& r : rows) {
    out += r.entry.scheduler + ",";
    out += (r.entry.budget ? std::to_string(*r.entry.budget) : "") + ",";
    out += std::to_string(r.entry.seed) + ",";
    out += (r.entry.spec_seed ? std::to_string(*r.entry.spec_seed) : "") + ",";
    if (r.ok) {
      out += fmt_double(r.regret) + "," + std::to_string(r.n_switches) + "," +
             std::to_string(r.n_refits) + ",ok\n";
    } else {
      std::string msg = r.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      out += ",,,error:" + msg + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small file helpers shared by the CLI and tests

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace lsvi
