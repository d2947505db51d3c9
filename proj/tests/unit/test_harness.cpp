#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lsvi/harness.hpp"

using lsvi::GeneratorParams;
using lsvi::LinearMdp;
using lsvi::RunConfig;
using lsvi::RunReport;
using lsvi::SchedulerKind;

namespace {

RunConfig generated_config(std::int64_t episodes) {
  RunConfig cfg;
  GeneratorParams gen;
  gen.dim = 5;
  gen.states = 3;
  gen.actions = 2;
  gen.horizon = 3;
  gen.seed = 7;
  cfg.generator = gen;
  cfg.episodes = episodes;
  cfg.seed = 11;
  return cfg;
}

// Two-state tabular spec with a random start so initial-state draws are
// exercised.
LinearMdp coin_mdp() {
  using Row = std::vector<double>;
  std::vector<std::vector<std::vector<Row>>> p = {
      {{Row{0.9, 0.1}, Row{0.2, 0.8}}, {Row{0.5, 0.5}, Row{1.0, 0.0}}},
      {{Row{1.0, 0.0}, Row{0.0, 1.0}}, {Row{0.3, 0.7}, Row{0.6, 0.4}}},
  };
  std::vector<std::vector<std::vector<double>>> r = {
      {{0.1, 0.6}, {0.9, 0.4}},
      {{0.8, 0.2}, {0.0, 1.0}},
  };
  lsvi::InitialState init;
  init.distribution = {0.5, 0.5};
  return lsvi::tabular_embedding(p, r, init);
}

const LinearMdp& opt_spec_of(const RunReport& rep) { return rep.spec; }

void check_accounting(const RunReport& rep) {
  REQUIRE(rep.valid);
  const lsvi::ValueTables opt = lsvi::optimal_values(opt_spec_of(rep));
  double cum = 0.0;
  for (std::size_t i = 0; i < rep.per_episode.size(); ++i) {
    const lsvi::EpisodeRow& row = rep.per_episode[i];
    CHECK(row.episode == static_cast<std::int64_t>(i) + 1);
    CHECK(row.inst_regret >= 0.0);
    cum += row.inst_regret;
    CHECK(row.cum_regret == cum);

    // recompute b_k's regret from the recorded snapshot and start state
    const auto snap = std::find_if(
        rep.snapshots.begin(), rep.snapshots.end(),
        [&](const lsvi::SnapshotRecord& r) { return r.episode == row.fit_episode; });
    REQUIRE(snap != rep.snapshots.end());
    const int s1 = rep.traces[i].states[0];
    const double expected =
        std::max(0.0, opt.v(0, s1) - snap->policy_v(0, s1));
    CHECK(row.inst_regret == expected);

    // switches_so_far counts refits before or at k, minus the initial fit
    const std::int64_t fits_by_k = static_cast<std::int64_t>(
        std::count_if(rep.switch_episodes.begin(), rep.switch_episodes.end(),
                      [&](std::int64_t e) { return e <= row.episode; }));
    CHECK(row.switches_so_far == fits_by_k - 1);

    CHECK(row.realized_return == rep.traces[i].total_reward());
  }
}

}  // namespace

TEST_CASE("full scheduler refits every episode") {
  RunConfig cfg = generated_config(12);
  const RunReport rep = lsvi::run_experiment(cfg);
  REQUIRE(rep.valid);
  REQUIRE(rep.per_episode.size() == 12);
  REQUIRE(rep.snapshots.size() == 12);
  for (const lsvi::EpisodeRow& row : rep.per_episode)
    CHECK(row.fit_episode == row.episode);
  CHECK(rep.switch_episodes.size() == 12);
  CHECK(rep.n_switches == 11);
  for (std::size_t i = 0; i < rep.snapshots.size(); ++i) {
    CHECK(rep.snapshots[i].episode == static_cast<std::int64_t>(i) + 1);
    CHECK(rep.snapshots[i].snapshot.fit_episode() ==
          static_cast<std::int64_t>(i) + 1);
  }
  check_accounting(rep);
}

TEST_CASE("uniform batching pins b_k to the grid") {
  RunConfig cfg = generated_config(10);
  cfg.scheduler.kind = SchedulerKind::kUniformBatch;
  cfg.scheduler.budget = 3;
  const RunReport rep = lsvi::run_experiment(cfg);
  REQUIRE(rep.valid);
  REQUIRE(rep.grid.has_value());
  CHECK(rep.grid->points == std::vector<std::int64_t>{1, 4, 7});
  CHECK(rep.switch_episodes == std::vector<std::int64_t>{1, 4, 7});
  CHECK(rep.n_switches == 2);

  const std::vector<std::int64_t> expect_bk = {1, 1, 1, 4, 4, 4, 7, 7, 7, 7};
  const std::vector<std::int64_t> expect_sw = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  REQUIRE(rep.per_episode.size() == expect_bk.size());
  for (std::size_t i = 0; i < expect_bk.size(); ++i) {
    CHECK(rep.per_episode[i].fit_episode == expect_bk[i]);
    CHECK(rep.per_episode[i].switches_so_far == expect_sw[i]);
  }
  check_accounting(rep);
}

TEST_CASE("batch with budget K reproduces the full run bitwise") {
  RunConfig full = generated_config(30);
  RunConfig batch = generated_config(30);
  batch.scheduler.kind = SchedulerKind::kUniformBatch;
  batch.scheduler.budget = 30;
  const RunReport a = lsvi::run_experiment(full);
  const RunReport b = lsvi::run_experiment(batch);
  std::string why;
  CHECK(lsvi::reports_bitwise_equal(a, b, &why));
  CHECK(why.empty());
}

TEST_CASE("runs are deterministic in the config") {
  RunConfig cfg = generated_config(20);
  cfg.scheduler.kind = SchedulerKind::kDetSwitch;
  cfg.scheduler.budget = 5;
  const RunReport a = lsvi::run_experiment(cfg);
  const RunReport b = lsvi::run_experiment(cfg);
  CHECK(lsvi::reports_bitwise_equal(a, b));
}

TEST_CASE("the stream seed matters") {
  RunConfig cfg = generated_config(20);
  const RunReport a = lsvi::run_experiment(cfg);
  cfg.seed = 12;
  const RunReport b = lsvi::run_experiment(cfg);
  CHECK_FALSE(lsvi::reports_bitwise_equal(a, b));
}

TEST_CASE("huge eta never re-triggers") {
  RunConfig cfg = generated_config(15);
  cfg.scheduler.kind = SchedulerKind::kDetSwitch;
  cfg.scheduler.eta = 1e12;
  const RunReport rep = lsvi::run_experiment(cfg);
  REQUIRE(rep.valid);
  CHECK(rep.switch_episodes == std::vector<std::int64_t>{1});
  CHECK(rep.n_switches == 0);
  for (const lsvi::EpisodeRow& row : rep.per_episode)
    CHECK(row.fit_episode == 1);
  check_accounting(rep);
}

TEST_CASE("eta at the floor refits every episode and matches full") {
  RunConfig det = generated_config(15);
  det.scheduler.kind = SchedulerKind::kDetSwitch;
  det.scheduler.eta = 1.0 + 1e-12;
  const RunReport a = lsvi::run_experiment(det);
  REQUIRE(a.valid);
  CHECK(a.switch_episodes.size() == 15);
  CHECK(a.n_switches == 14);

  const RunReport b = lsvi::run_experiment(generated_config(15));
  CHECK(lsvi::reports_bitwise_equal(a, b));
}

TEST_CASE("det trigger replays from the log-det ledger") {
  RunConfig cfg = generated_config(60);
  cfg.scheduler.kind = SchedulerKind::kDetSwitch;
  cfg.scheduler.budget = 6;
  const RunReport rep = lsvi::run_experiment(cfg);
  REQUIRE(rep.valid);
  REQUIRE(rep.eta.has_value());
  CHECK(*rep.eta == lsvi::eta_from_budget(60, 5, 3, 6));

  std::vector<std::int64_t> expected_switches = {1};
  std::vector<double> anchor = rep.gram_logdets[0];
  for (std::int64_t k = 2; k <= 60; ++k) {
    const std::vector<double>& now = rep.gram_logdets[k - 1];
    if (lsvi::det_switch_decision(now, anchor, *rep.eta)) {
      expected_switches.push_back(k);
      anchor = now;
    }
  }
  CHECK(rep.switch_episodes == expected_switches);
  CHECK(rep.n_switches ==
        static_cast<std::int64_t>(expected_switches.size()) - 1);
  check_accounting(rep);
}

TEST_CASE("log-det ledger shape and growth") {
  RunConfig cfg = generated_config(25);
  cfg.ridge = 2.5;
  const RunReport rep = lsvi::run_experiment(cfg);
  REQUIRE(rep.valid);
  REQUIRE(rep.gram_logdets.size() == 26);
  for (const std::vector<double>& row : rep.gram_logdets)
    REQUIRE(row.size() == 3);
  for (double v : rep.gram_logdets[0])
    CHECK(v == Catch::Approx(5.0 * std::log(2.5)).margin(1e-12));
  for (std::size_t k = 1; k < rep.gram_logdets.size(); ++k)
    for (int h = 0; h < 3; ++h)
      CHECK(rep.gram_logdets[k][h] >= rep.gram_logdets[k - 1][h]);
}

TEST_CASE("experiments run on explicit specs with random starts") {
  RunConfig cfg;
  cfg.spec = coin_mdp();
  cfg.episodes = 40;
  cfg.seed = 3;
  const RunReport rep = lsvi::run_experiment(cfg);
  REQUIRE(rep.valid);
  bool saw[2] = {false, false};
  for (const lsvi::EpisodeTrace& t : rep.traces) {
    REQUIRE(t.states.size() == 3);
    REQUIRE(t.states[0] >= 0);
    REQUIRE(t.states[0] < 2);
    saw[t.states[0]] = true;
  }
  CHECK(saw[0]);
  CHECK(saw[1]);
  check_accounting(rep);
}

TEST_CASE("run_episode plays the snapshot greedily") {
  const LinearMdp spec = coin_mdp();
  const lsvi::QSnapshot snap =
      lsvi::fit_snapshot({}, spec.features, spec.horizon, 1.0, 1.0);
  lsvi::RandomStream rng = lsvi::RandomStream::substream(5, 1);
  const lsvi::EpisodeTrace t = lsvi::run_episode(spec, snap, 1, rng);
  REQUIRE(t.states.size() == 3);
  REQUIRE(t.actions.size() == 2);
  REQUIRE(t.rewards.size() == 2);
  REQUIRE(t.features.size() == 2);
  CHECK(t.states[0] == 1);
  for (int h = 0; h < 2; ++h) {
    CHECK(t.actions[h] == snap.greedy_action(h, t.states[h], spec.features));
    CHECK(t.rewards[h] == spec.reward(h, t.states[h], t.actions[h]));
    CHECK(t.features[h] == spec.features.phi(t.states[h], t.actions[h]));
  }

  const lsvi::QSnapshot short_snap =
      lsvi::fit_snapshot({}, spec.features, 1, 1.0, 1.0);
  CHECK_THROWS_AS(lsvi::run_episode(spec, short_snap, 0, rng),
                  std::invalid_argument);
}

TEST_CASE("config validation rejects each malformed field") {
  const RunConfig good = generated_config(5);
  CHECK_NOTHROW(lsvi::validate_config(good));

  RunConfig c = good;
  c.spec = coin_mdp();  // both spec and generator
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.generator.reset();  // neither
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.generator->dim = 1;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.episodes = 0;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.ridge = 0.0;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.delta = 1.0;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.bonus_scale = -0.5;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.gram_refresh = 0;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);

  c = good;
  c.scheduler.budget = 4;  // full takes no budget
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c = good;
  c.scheduler.kind = SchedulerKind::kUniformBatch;  // batch needs budget
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c.scheduler.budget = 0;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c.scheduler.budget = 4;
  c.scheduler.eta = 2.0;  // batch takes no eta
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);

  c = good;
  c.scheduler.kind = SchedulerKind::kDetSwitch;  // needs budget xor eta
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c.scheduler.budget = 4;
  c.scheduler.eta = 2.0;
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c.scheduler.budget.reset();
  c.scheduler.eta = 1.0;  // eta must exceed 1
  CHECK_THROWS_AS(lsvi::validate_config(c), std::invalid_argument);
  c.scheduler.eta = 2.0;
  CHECK_NOTHROW(lsvi::validate_config(c));
}

TEST_CASE("scheduler names round-trip") {
  for (SchedulerKind k : {SchedulerKind::kFull, SchedulerKind::kUniformBatch,
                          SchedulerKind::kDetSwitch})
    CHECK(lsvi::scheduler_kind_from_string(lsvi::to_string(k)) == k);
  CHECK_THROWS_AS(lsvi::scheduler_kind_from_string("rare"),
                  std::invalid_argument);
}
