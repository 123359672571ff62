#include <gtest/gtest.h>

#include <filesystem>

#include "adrl/baselines.hpp"

using namespace adrl;

namespace {

EnvConfig small_env(int views) {
  EnvConfig e;
  e.num_views = views;
  e.dynamics.max_steps = 60;
  return e;
}

AdrlConfig small_agent(int iterations, int episodes) {
  AdrlConfig c;
  c.hyper.warmup = 50;
  c.hyper.batch_size = 8;
  c.sizes = {{8}, {8}, {16}};
  c.schedule.iterations = iterations;
  c.schedule.episodes_per_iteration = episodes;
  return c;
}

std::vector<EpisodeStats> train_log(Coordinator& c) {
  std::vector<EpisodeStats> log;
  c.train([&](const EpisodeStats& s) { log.push_back(s); });
  return log;
}

}  // namespace

TEST(Coordinator, StageOneFillsOnlyTheActingWorkersBuffer) {
  Coordinator c(small_env(3), small_agent(1, 1), 1);
  const EpisodeStats s = c.run_stage1_episode(1, c.env(), 9);
  EXPECT_EQ(c.workers()[0].buffer.size(), 0u);
  EXPECT_EQ(c.workers()[1].buffer.size(), static_cast<std::size_t>(s.steps));
  EXPECT_EQ(c.workers()[2].buffer.size(), 0u);
  EXPECT_EQ(c.workers()[1].buffer.at(0).views.size(), 1u);
  EXPECT_EQ(s.shaped_ret, s.ret);  // shaping is off before the first stage-2 episode
}

TEST(Coordinator, StageTwoLeavesEncodersAndWorkerHeadsUntouched) {
  Coordinator c(small_env(3), small_agent(1, 1), 2);
  std::vector<std::uint64_t> enc, heads, trunks;
  for (const auto& w : c.workers()) {
    enc.push_back(parameter_hash(w.view.encoder.params()));
    heads.push_back(parameter_hash(w.heads.actor.params()) ^ parameter_hash(w.heads.critic.params()));
    trunks.push_back(parameter_hash(w.view.trunk.params()));
  }
  const Vector gains = c.gate().gains;
  c.set_shaping_active(true);
  long steps = 0;
  for (int k = 0; steps < 200; ++k) steps += c.run_stage2_episode(c.env(), static_cast<std::uint64_t>(k)).steps;
  ASSERT_GT(c.global_buffer().size(), 50u);
  for (std::size_t w = 0; w < c.workers().size(); ++w) {
    EXPECT_EQ(parameter_hash(c.workers()[w].view.encoder.params()), enc[w]);
    EXPECT_EQ(parameter_hash(c.workers()[w].heads.actor.params()) ^ parameter_hash(c.workers()[w].heads.critic.params()),
              heads[w]);
    EXPECT_NE(parameter_hash(c.workers()[w].view.trunk.params()), trunks[w]);
  }
  EXPECT_NE((c.gate().gains - gains).norm(), 0.0);
}

TEST(Coordinator, StageTwoLogsNormalisedAttentionEveryStep) {
  Coordinator c(small_env(4), small_agent(1, 1), 3);
  const EpisodeStats s = c.run_stage2_episode(c.env(), 5);
  ASSERT_EQ(static_cast<int>(s.attention.size()), s.steps);
  for (const auto& p : s.attention) {
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GT(p.minCoeff(), 0.0);
  }
  EXPECT_NEAR(s.attention_mean.sum(), 1.0, 1e-9);
  EXPECT_EQ(s.worker, kGlobalWorker);
}

TEST(Coordinator, TrainFollowsTheScheduleWithRoundRobinWorkers) {
  AdrlConfig a = small_agent(6, 5);
  Coordinator c(small_env(3), a, 4);
  const auto log = train_log(c);
  ASSERT_EQ(static_cast<long>(log.size()), a.schedule.total_episodes());
  int next_worker = 0;
  bool seen_stage2 = false;
  for (int i = 1; i <= 6; ++i) {
    int s1 = 0, s2 = 0;
    for (const auto& s : log) {
      if (s.iteration != i) continue;
      if (s.stage == 1) {
        ++s1;
        EXPECT_EQ(s.worker, next_worker);
        next_worker = (next_worker + 1) % 3;
        if (!seen_stage2) EXPECT_EQ(s.shaped_ret, s.ret);
        else EXPECT_LE(s.shaped_ret, s.ret);
      } else {
        ++s2;
        seen_stage2 = true;
      }
    }
    EXPECT_EQ(s1, a.schedule.worker_episodes(i));
    EXPECT_EQ(s2, a.schedule.global_episodes(i));
  }
  for (std::size_t k = 0; k < log.size(); ++k) EXPECT_EQ(log[k].episode, static_cast<long>(k));
}

TEST(Coordinator, WithoutStageTwoEveryEpisodeTrainsAWorker) {
  AdrlConfig a = small_agent(3, 4);
  a.stage2 = false;
  Coordinator c(small_env(2), a, 5);
  for (const auto& s : train_log(c)) EXPECT_EQ(s.stage, 1);
  EXPECT_EQ(c.global_buffer().size(), 0u);
}

TEST(Coordinator, StepBudgetStopsTraining) {
  AdrlConfig a = small_agent(50, 10);
  a.max_train_steps = 300;
  Coordinator c(small_env(2), a, 6);
  const auto log = train_log(c);
  long steps = 0;
  for (const auto& s : log) steps += s.steps;
  EXPECT_EQ(steps, 300);
}

TEST(Coordinator, SameSeedSameRun) {
  const AdrlConfig a = small_agent(3, 4);
  Coordinator c1(small_env(3), a, 7), c2(small_env(3), a, 7), c3(small_env(3), a, 8);
  const auto l1 = train_log(c1), l2 = train_log(c2), l3 = train_log(c3);
  ASSERT_EQ(l1.size(), l2.size());
  bool differs = false;
  for (std::size_t k = 0; k < l1.size(); ++k) {
    EXPECT_EQ(l1[k].ret, l2[k].ret);
    EXPECT_EQ(l1[k].mean_deviation, l2[k].mean_deviation);
    differs = differs || l1[k].ret != l3[k].ret;
  }
  EXPECT_TRUE(differs);
}

TEST(Coordinator, SingleViewRetracesDdpg) {
  const AdrlConfig a = small_agent(3, 4);
  Coordinator c(small_env(1), a, 9);
  DdpgAgent d(small_env(1), a, 9);
  std::vector<EpisodeStats> lc, ld;
  c.train([&](const EpisodeStats& s) { lc.push_back(s); });
  d.train([&](const EpisodeStats& s) { ld.push_back(s); });
  ASSERT_EQ(lc.size(), ld.size());
  for (std::size_t k = 0; k < lc.size(); ++k) {
    EXPECT_EQ(lc[k].ret, ld[k].ret);
    EXPECT_EQ(lc[k].steps, ld[k].steps);
  }
  EXPECT_EQ(parameter_hash(c.workers()[0].heads.actor.params()), parameter_hash(d.worker().heads.actor.params()));
}

TEST(Coordinator, CheckpointRoundTripReproducesThePolicy) {
  Coordinator c(small_env(3), small_agent(2, 4), 10);
  train_log(c);
  const auto dir = std::filesystem::temp_directory_path() / "adrl_ckpt_test";
  std::filesystem::remove_all(dir);
  c.save(dir);
  Coordinator fresh(small_env(3), small_agent(2, 4), 11);
  fresh.load(dir);
  MultiViewEnv env(small_env(3));
  const StepResult r = env.reset(3);
  EXPECT_EQ(c.act(r.observations), fresh.act(r.observations));
  EXPECT_EQ(c.gate().gains, fresh.gate().gains);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(fresh.load(dir), ConfigError);
}

TEST(Coordinator, AdaptationRunsTheRequestedNumberOfSteps) {
  Coordinator c(small_env(2), small_agent(1, 1), 12);
  MultiViewEnv env(small_env(2));
  const std::size_t before = c.global_buffer().size();
  c.adapt(env, 137, 1);
  EXPECT_EQ(c.global_buffer().size() - before, 137u);
}

TEST(Baselines, EnsembleAndConcatAgentsAct) {
  AdrlConfig a = small_agent(1, 2);
  a.stage2 = false;
  Coordinator c(small_env(3), a, 13);
  MultiViewEnv env(small_env(3));
  const StepResult r = env.reset(1);
  for (Combiner how : {Combiner::average, Combiner::centroid, Combiner::majority}) {
    const Vector act = ensemble_action(c, r.observations, how);
    EXPECT_EQ(act.size(), 2);
    EXPECT_LE(act.cwiseAbs().maxCoeff(), 1.0);
  }
  ConcatAgent f(small_env(3), small_agent(2, 3), 14);
  EXPECT_EQ(f.features(r.observations).size(), 3 * 8);
  std::vector<EpisodeStats> log;
  f.train([&](const EpisodeStats& s) { log.push_back(s); });
  EXPECT_EQ(log.size(), 6u);
}
