#include "generators.hpp"
#include "pnnl/errors.hpp"
#include "pnnl/progression.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace pnnl {
namespace {

TEST(ImprovementTracker, Examples) {
    const std::vector<double> rising{0.5, 0.6, 0.7};
    EXPECT_FALSE(improvement_tracker(rising, 0.001, 2));
    const std::vector<double> flat{0.7, 0.7, 0.7};
    EXPECT_TRUE(improvement_tracker(flat, 0.001, 2));
    // 0.71 - 0.7 is not below 0.01 in binary64, so only the last value stalls.
    const std::vector<double> bump{0.7, 0.71, 0.7005};
    EXPECT_FALSE(improvement_tracker(bump, 0.01, 2));
}

TEST(ImprovementTracker, NeedsPatienceValuesAfterTheFirst) {
    const std::vector<double> two{0.5, 0.5};
    EXPECT_FALSE(improvement_tracker(two, 0.001, 2));
    const std::vector<double> three{0.5, 0.5, 0.5};
    EXPECT_TRUE(improvement_tracker(three, 0.001, 2));
    const std::vector<double> dip{0.9, 0.2, 0.3};
    EXPECT_TRUE(improvement_tracker(dip, 0.001, 2));
    EXPECT_FALSE(improvement_tracker({}, 0.001, 1));
}

TEST(ImprovementTracker, MatchesDirectDefinition) {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> h(rng.below(10));
        for (double& v : h) v = static_cast<double>(rng.below(6)) / 10.0;
        const std::size_t r = 1 + rng.below(4);
        const double eps = 0.05;
        bool expected = h.size() > r;
        for (std::size_t i = h.size() >= r ? h.size() - r : 0; expected && i < h.size(); ++i) {
            double best = -1e300;
            for (std::size_t j = 0; j < i; ++j) best = std::max(best, h[j]);
            if (!(h[i] - best < eps)) expected = false;
        }
        EXPECT_EQ(improvement_tracker(h, eps, r), expected);
    }
}

TEST(ModalChoice, MostFrequentEarliestOnTies) {
    std::vector<StepRecord> steps(5);
    const std::size_t chosen[] = {2, 1, 2, 1, 0};
    for (std::size_t i = 0; i < 5; ++i) steps[i].chosen = chosen[i];
    EXPECT_EQ(modal_choice(steps, 3), 1u);
    steps[4].chosen = 2;
    EXPECT_EQ(modal_choice(steps, 3), 2u);
}

TEST(SubsetSize, CeilingOfFraction) {
    ProgressionConfig c;
    c.subset_fraction = 0.1;
    EXPECT_EQ(subset_size_for(c, 4000), 400u);
    EXPECT_EQ(subset_size_for(c, 4001), 401u);
    EXPECT_EQ(subset_size_for(c, 5), 1u);
    c.subset_fraction = 1.0;
    EXPECT_EQ(subset_size_for(c, 77), 77u);
    c.subset_size = 12;
    EXPECT_EQ(subset_size_for(c, 77), 12u);
    c.subset_size = 500;
    EXPECT_EQ(subset_size_for(c, 77), 77u);
}

TEST(Strategy, ParseRoundTrip) {
    for (Strategy s : {Strategy::random, Strategy::top_loss, Strategy::cluster_top_loss})
        EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_THROW(parse_strategy("greedy"), ConfigError);
}

TEST(Config, ValidationRejectsNonsense) {
    ProgressionConfig c;
    c.block_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.subset_fraction = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.max_layers = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------

struct Problem {
    Dataset data;
    DataSplit split;
};

Problem blobs(std::size_t n, std::size_t d, std::uint32_t k, double noise, std::uint64_t seed) {
    Problem p{testing::gaussian_blobs({.n = n, .dim = d, .classes = k, .label_noise = noise, .seed = seed}), {}};
    p.split = split(p.data, {}, seed);
    return p;
}

const HyperGrid kSmallGrid = enumerate_grid({{0.01, 0.003}, {0.0}, {0.0, 0.2}, {2}});

ProgressionConfig small_config(Strategy s) {
    ProgressionConfig c;
    c.block_size = 4;
    c.max_blocks_per_layer = 4;
    c.max_layers = 2;
    c.patience = 2;
    c.subset_fraction = 0.2;
    c.strategy = s;
    c.base_seed = 11;
    return c;
}

void expect_same_report(const RunReport& a, const RunReport& b) {
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const StepRecord &x = a.steps[i], &y = b.steps[i];
        EXPECT_EQ(x.chosen, y.chosen);
        EXPECT_EQ(x.layer, y.layer);
        EXPECT_EQ(x.subset, y.subset);
        EXPECT_EQ(x.val_accuracy_before, y.val_accuracy_before);
        EXPECT_EQ(x.val_accuracy_after, y.val_accuracy_after);
        EXPECT_EQ(x.unique_count, y.unique_count);
        ASSERT_EQ(x.candidates.size(), y.candidates.size());
        for (std::size_t h = 0; h < x.candidates.size(); ++h) {
            EXPECT_EQ(x.candidates[h].val_accuracy, y.candidates[h].val_accuracy);
            EXPECT_EQ(x.candidates[h].val_loss, y.candidates[h].val_loss);
        }
    }
    EXPECT_EQ(a.test_accuracy, b.test_accuracy);
    EXPECT_EQ(a.test_loss, b.test_loss);
    EXPECT_EQ(a.param_count, b.param_count);
    EXPECT_EQ(a.fine_tune.best_epoch, b.fine_tune.best_epoch);
    EXPECT_EQ(a.fine_tune.val_accuracy_best, b.fine_tune.val_accuracy_best);
}

TEST(Run, CapsOfOneGiveOneStepThenFineTune) {
    const Problem p = blobs(300, 5, 3, 0.0, 2);
    ProgressionConfig c = small_config(Strategy::random);
    c.max_layers = 1;
    c.max_blocks_per_layer = 1;
    c.fine_tune_epochs = 2;
    const RunResult r = run(c, kSmallGrid, p.data, p.split);
    ASSERT_TRUE(r.report.completed) << r.report.error;
    EXPECT_EQ(r.report.steps.size(), 1u);
    EXPECT_TRUE(r.report.fine_tune.ran);
    EXPECT_EQ(r.report.fine_tune.epochs, 2u);
    EXPECT_EQ(r.report.layers, 1u);
    EXPECT_EQ(r.topology.trainable_block_count(), 0u);
}

TEST(Run, FullFractionUsesWholeTrainSplitEveryStep) {
    const Problem p = blobs(200, 4, 3, 0.0, 3);
    ProgressionConfig c = small_config(Strategy::random);
    c.subset_fraction = 1.0;
    const RunResult r = run(c, kSmallGrid, p.data, p.split);
    ASSERT_TRUE(r.report.completed) << r.report.error;
    std::vector<std::size_t> all(p.split.train.size());
    std::iota(all.begin(), all.end(), 0);
    for (const auto& s : r.report.steps) {
        EXPECT_EQ(s.subset, all);
        EXPECT_EQ(s.unique_count, all.size());
    }
}

class RunInvariants : public ::testing::TestWithParam<Strategy> {};

TEST_P(RunInvariants, ReportIsConsistent) {
    const Problem p = blobs(400, 6, 4, 0.05, 4);
    ProgressionConfig c = small_config(GetParam());
    c.fine_tune_epochs = 2;

    std::vector<std::vector<std::uint8_t>> frozen_after;
    const RunResult r = run(c, kSmallGrid, p.data, p.split, [&](const Topology& t, const StepRecord&) {
        EXPECT_EQ(t.trainable_block_count(), 0u);
        frozen_after.push_back(frozen_block_bytes(t));
    });
    ASSERT_TRUE(r.report.completed) << r.report.error;
    const auto& steps = r.report.steps;
    ASSERT_FALSE(steps.empty());
    EXPECT_LE(steps.size(), c.max_layers * c.max_blocks_per_layer);
    EXPECT_EQ(r.report.subset_size, subset_size_for(c, p.split.train.size()));

    // Earlier blocks are bytes-identical prefixes of every later snapshot.
    for (std::size_t i = 1; i < frozen_after.size(); ++i) {
        ASSERT_GE(frozen_after[i].size(), frozen_after[i - 1].size());
        EXPECT_TRUE(std::equal(frozen_after[i - 1].begin(), frozen_after[i - 1].end(), frozen_after[i].begin()));
    }

    UniqueTracker tracker(p.split.train.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        EXPECT_EQ(steps[i].step, i + 1);
        EXPECT_EQ(steps[i].subset.size(), r.report.subset_size);
        std::vector<CandidateMetrics> metrics;
        for (const auto& cand : steps[i].candidates) metrics.push_back({cand.val_accuracy, cand.val_loss, cand.ok});
        EXPECT_EQ(select_best(metrics), steps[i].chosen);
        tracker.track({steps[i].subset, i + 1});
        EXPECT_EQ(tracker.unique_count(), steps[i].unique_count);
    }
    EXPECT_EQ(r.report.unique_samples_total(), tracker.unique_count());
    EXPECT_EQ(r.report.param_count, param_count(r.topology));

    const RunResult again = run(c, kSmallGrid, p.data, p.split);
    expect_same_report(r.report, again.report);
    EXPECT_EQ(encode_model(r.topology), encode_model(again.topology));

    c.candidate_jobs = 3;
    expect_same_report(r.report, run(c, kSmallGrid, p.data, p.split).report);
}

INSTANTIATE_TEST_SUITE_P(Strategies, RunInvariants,
                         ::testing::Values(Strategy::random, Strategy::top_loss, Strategy::cluster_top_loss),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Run, TestAccuracyMatchesReloadedEvaluation) {
    const Problem p = blobs(300, 5, 3, 0.0, 5);
    const RunResult r = run(small_config(Strategy::cluster_top_loss), kSmallGrid, p.data, p.split);
    const LabeledMatrix test = materialize(p.data, p.split.test);
    const Evaluation e = evaluate(decode_model(encode_model(r.topology)), test);
    EXPECT_EQ(e.accuracy, r.report.test_accuracy);
    EXPECT_EQ(e.loss, r.report.test_loss);
}

TEST(Run, BlobUniqueCountsRiseUntilPlateau) {
    const Problem p = blobs(5000, 32, 10, 0.05, 6);
    ProgressionConfig c;
    c.block_size = 8;
    c.max_blocks_per_layer = 6;
    c.max_layers = 2;
    c.patience = 6;
    c.subset_fraction = 0.1;
    c.base_seed = 6;
    const HyperGrid grid = enumerate_grid({{0.01}, {0.0}, {0.0}, {1}});
    const RunResult r = run(c, grid, p.data, p.split);
    ASSERT_TRUE(r.report.completed) << r.report.error;
    ASSERT_GE(r.report.steps.size(), 2u);
    const std::size_t n_train = p.split.train.size();
    for (std::size_t i = 1; i < r.report.steps.size(); ++i) {
        const std::size_t prev = r.report.steps[i - 1].unique_count, cur = r.report.steps[i].unique_count;
        if (prev < n_train) {
            EXPECT_GT(cur, prev);
        }
        EXPECT_LE(cur, n_train);
    }
    EXPECT_GT(r.report.test_accuracy, 0.5);
}

TEST(Run, DivergenceYieldsPartialReport) {
    const Problem p = blobs(200, 4, 3, 0.0, 7);
    ProgressionConfig c = small_config(Strategy::random);
    const HyperGrid wild = enumerate_grid({{1e308}, {0.0}, {0.0}, {3}});
    const RunResult r = run(c, wild, p.data, p.split);
    EXPECT_FALSE(r.report.completed);
    EXPECT_FALSE(r.report.error.empty());
    EXPECT_LT(r.report.steps.size(), c.max_layers * c.max_blocks_per_layer);
    EXPECT_EQ(r.topology.trainable_block_count(), 0u);
}

TEST(Run, StepCapAndLayerTransitions) {
    const Problem p = blobs(300, 4, 3, 0.3, 8);
    ProgressionConfig c = small_config(Strategy::random);
    c.max_blocks_per_layer = 2;
    c.max_layers = 3;
    c.patience = 50;   // only the block cap ends a layer
    const RunResult r = run(c, kSmallGrid, p.data, p.split);
    ASSERT_TRUE(r.report.completed);
    ASSERT_EQ(r.report.steps.size(), 6u);
    const std::size_t layers[] = {0, 0, 1, 1, 2, 2};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(r.report.steps[i].layer, layers[i]);
    EXPECT_EQ(r.topology.layers().size(), 3u);
    EXPECT_EQ(r.topology.last_width(), 8u);
}

}  // namespace
}  // namespace pnnl
