#include "cytocoset/training.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace cytocoset;

TEST(BceLoss, Values) {
    EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
    EXPECT_LT(bce_loss(1.0 - 1e-9, 1), 1e-6);
    EXPECT_LT(bce_loss(1e-9, 0), 1e-6);
    for (double p : {0.01, 0.2, 0.5, 0.77, 0.999}) {
        EXPECT_DOUBLE_EQ(bce_loss(p, 1), bce_loss(1 - p, 0));
    }
    EXPECT_NEAR(bce_loss(0.0, 1), -std::log(1e-7), 1e-9);
    EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
}

TEST(TripletTerm, Arithmetic) {
    // Place points on a line so the distances are exact.
    std::vector<double> ref{0.0}, same{0.25}, diff{1.0};
    EXPECT_EQ(triplet_term(ref, diff, same, 0.5), 0.0);
    std::vector<double> same2{1.0}, diff2{0.5};
    EXPECT_NEAR(triplet_term(ref, diff2, same2, 0.1), 0.6, 1e-15);
    EXPECT_EQ(triplet_term(ref, ref, ref, 0.0), 0.0);
    EXPECT_THROW(triplet_term(ref, std::vector<double>{1, 2}, same, 0.0), DataError);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        auto m = fixtures::random_matrix(3, 4, rng);
        std::vector<double> a(m.row(0).data(), m.row(0).data() + 4);
        std::vector<double> b(m.row(1).data(), m.row(1).data() + 4);
        std::vector<double> c(m.row(2).data(), m.row(2).data() + 4);
        EXPECT_GE(triplet_term(a, b, c, 0.3), 0.0);
    }
}

TEST(TotalLoss, WeightsBothTerms) {
    std::vector<double> probs{0.8, 0.3, 0.6};
    std::vector<int> labels{1, 0, 1};
    const double mean_bce = (bce_loss(0.8, 1) + bce_loss(0.3, 0) + bce_loss(0.6, 1)) / 3;
    std::vector<double> trip{0.5, 1.5};
    EXPECT_EQ(total_loss(probs, labels, trip, LossConfig{1.0, 1.0}), mean_bce);
    EXPECT_EQ(total_loss(std::vector<double>{1 - 1e-12}, std::vector<int>{1}, std::vector<double>{0.0, 0.0},
                         LossConfig{0.0, 1.0}),
              0.0);
    EXPECT_NEAR(total_loss(probs, labels, trip, LossConfig{0.5, 1.0}), 0.5 * mean_bce + 0.5 * 1.0, 1e-15);
    EXPECT_NEAR(total_loss(probs, labels, {}, LossConfig{0.3, 1.0}), 0.3 * mean_bce, 1e-15);

    // 0.5 * 0.6 + 0.5 * 0.2 = 0.4, with the BCE mean reverse-engineered from a probability.
    const double p = std::exp(-0.6);
    EXPECT_NEAR(total_loss(std::vector<double>{p}, std::vector<int>{1}, std::vector<double>{0.2}, LossConfig{0.5, 1.0}),
                0.4, 1e-12);
}

TEST(CompositeLoss, GradientMatchesFiniteDifferences) {
    int active_hinges = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto c = fixtures::random_gradient_case(seed);
        Gradients g(c.params.config());
        auto lb = composite_loss(c.params, c.batch, c.loss, &g);
        EXPECT_EQ(lb.num_bound, 2u);
        active_hinges += lb.mean_triplet > 0.0;

        const oracle::ReferenceNet ref(c.params.config());
        long double kink = 1e30L;
        const auto ref_loss = ref.loss(oracle::to_real(c.params.values()), c.batch, c.loss, kink);
        EXPECT_NEAR(lb.total, static_cast<double>(ref_loss), 1e-12);

        auto fd = oracle::finite_difference_gradient(ref, c.params, c.batch, c.loss, 1e-4L);
        EXPECT_LT(fixtures::max_relative_error(g.values(), fd), 1e-4) << "seed " << seed;
    }
    // Most draws should exercise the triplet branch of the gradient.
    EXPECT_GE(active_hinges, 4);
}

TEST(CompositeLoss, AlphaOneIgnoresBindings) {
    auto c = fixtures::random_gradient_case(42);
    c.loss.alpha = 1.0;
    Batch stripped = c.batch;
    for (auto& inst : stripped.instances) {
        inst.binding.reset();
    }
    Gradients g1(c.params.config()), g2(c.params.config());
    auto a = composite_loss(c.params, c.batch, c.loss, &g1);
    auto b = composite_loss(c.params, stripped, c.loss, &g2);
    EXPECT_EQ(a.total, b.total);
    EXPECT_EQ(a.triplet_component, 0.0);
    EXPECT_TRUE(g1 == g2);
}

namespace {

struct SmallCohort {
    CohortDataset cohort;
    SplitPlan split;
    std::vector<Triplet> triplets;
};

SmallCohort small_cohort() {
    SynthConfig sc;
    sc.n_samples = 10;
    sc.cells_per_sample = 60;
    sc.n_markers = 4;
    sc.effect_size = 3.0;
    sc.signal_fraction = 0.5;
    sc.seed = 3;
    SmallCohort out;
    out.cohort = generate_cohort(sc);
    out.split.train_ids = out.cohort.ids();
    out.split.train_ids.resize(8);
    out.split.test_ids = {"s008", "s009"};
    // s000 and s002 have outcome 0, s001 outcome 1.
    out.triplets = {{"s000", "s001", "s002", 0.1, 0.2}, {"s000", "s003", "s004", 0.1, 0.3}};
    return out;
}

}

TEST(MakeBatch, WithReplacementBindingsAndDeterminism) {
    auto sc = small_cohort();
    TripletIndex index(sc.cohort, sc.triplets);
    std::vector<std::size_t> train{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto b = make_batch(sc.cohort, train, index, 16, 200, 77, 0);
    ASSERT_EQ(b.instances.size(), 200u);
    std::set<std::size_t> seen;
    std::size_t bound = 0;
    for (const auto& inst : b.instances) {
        seen.insert(inst.sample_index);
        EXPECT_EQ(inst.set.rows(), 16);
        EXPECT_EQ(inst.label, sc.cohort.at(inst.sample_index).record.outcome);
        if (inst.sample_index == 0) {
            ASSERT_TRUE(inst.binding.has_value());
            EXPECT_TRUE(inst.binding->diff_index == 1 || inst.binding->diff_index == 3);
            ++bound;
        } else {
            EXPECT_FALSE(inst.binding.has_value());
        }
    }
    EXPECT_LE(seen.size(), 10u);
    EXPECT_EQ(b.num_bound(), bound);

    // Partner sets come from the partner's own cells.
    for (const auto& inst : b.instances) {
        if (!inst.binding) {
            continue;
        }
        const auto& cells = sc.cohort.at(inst.binding->same_index).cells.values;
        for (Eigen::Index r = 0; r < inst.binding->same_set.rows(); ++r) {
            bool found = false;
            for (Eigen::Index q = 0; q < cells.rows() && !found; ++q) {
                found = cells.row(q) == inst.binding->same_set.row(r);
            }
            EXPECT_TRUE(found);
        }
    }

    auto again = make_batch(sc.cohort, train, index, 16, 200, 77, 0);
    for (std::size_t i = 0; i < b.instances.size(); ++i) {
        EXPECT_EQ(again.instances[i].sample_index, b.instances[i].sample_index);
        EXPECT_TRUE(again.instances[i].set == b.instances[i].set);
    }
}

TEST(MakeBatch, RoundRobinOverTriplets) {
    auto sc = small_cohort();
    TripletIndex index(sc.cohort, sc.triplets);
    std::vector<std::size_t> only_ref{0};
    auto b = make_batch(sc.cohort, only_ref, index, 4, 4, 1, 0);
    std::vector<std::size_t> diffs;
    for (const auto& inst : b.instances) {
        diffs.push_back(inst.binding->diff_index);
    }
    EXPECT_EQ(diffs, (std::vector<std::size_t>{1, 3, 1, 3}));
}

TEST(Fit, AlphaOneMatchesTripletFreeTrainer) {
    auto sc = small_cohort();
    SetEncoderConfig net;
    net.input_dim = 4;
    net.block_widths = {8, 8};
    net.embed_dim = 4;
    net.set_size = 16;
    net.seed = 5;
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.batch_size = 12;
    tc.epochs = 15;
    tc.seed = 6;
    auto with = fit(sc.cohort, sc.split, sc.triplets, net, LossConfig{1.0, 1.0}, tc);
    auto without = fit(sc.cohort, sc.split, {}, net, LossConfig{1.0, 1.0}, tc);
    EXPECT_TRUE(with.params == without.params);
    EXPECT_EQ(with.log, without.log);
    for (const auto& e : with.log) {
        EXPECT_EQ(e.triplet_component, 0.0);
    }
}

TEST(Fit, LossDecreasesOnSeparableCohort) {
    auto sc = small_cohort();
    SetEncoderConfig net;
    net.input_dim = 4;
    net.block_widths = {16, 16};
    net.embed_dim = 8;
    net.set_size = 32;
    net.seed = 11;
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.batch_size = 32;
    tc.epochs = 60;
    tc.seed = 12;
    auto res = fit(sc.cohort, sc.split, sc.triplets, net, LossConfig{0.5, 1.0}, tc);
    ASSERT_EQ(res.log.size(), 60u);
    double first = 0, last = 0;
    for (int i = 0; i < 10; ++i) {
        first += res.log[i].total;
        last += res.log[res.log.size() - 1 - i].total;
    }
    EXPECT_LT(last, first);
    EXPECT_LT(res.log.back().total, res.log.front().total);

    auto again = fit(sc.cohort, sc.split, sc.triplets, net, LossConfig{0.5, 1.0}, tc);
    EXPECT_TRUE(again.params == res.params);
}

TEST(Fit, Preconditions) {
    auto sc = small_cohort();
    SetEncoderConfig net;
    net.input_dim = 4;
    TrainConfig tc;
    tc.epochs = 0;
    EXPECT_THROW(fit(sc.cohort, sc.split, {}, net, LossConfig{}, tc), DataError);
    tc.epochs = 1;
    auto leaky = sc.triplets;
    leaky.push_back({"s000", "s009", "s002", 0.1, 0.2});
    EXPECT_THROW(fit(sc.cohort, sc.split, leaky, net, LossConfig{}, tc), DataError);
    EXPECT_THROW(fit(sc.cohort, sc.split, {}, net, LossConfig{1.5, 1.0}, tc), DataError);
    net.input_dim = 5;
    EXPECT_THROW(fit(sc.cohort, sc.split, {}, net, LossConfig{}, tc), DataError);
}

TEST(Fit, NonFiniteLossAbortsWithStep) {
    auto sc = small_cohort();
    SetEncoderConfig net;
    net.input_dim = 4;
    net.block_widths = {8};
    net.embed_dim = 4;
    net.set_size = 8;
    TrainConfig tc;
    tc.learning_rate = 1e200;
    tc.batch_size = 8;
    tc.epochs = 20;
    try {
        fit(sc.cohort, sc.split, sc.triplets, net, LossConfig{0.5, 1.0}, tc);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(TrainingLog, CsvLayout) {
    auto dir = fixtures::temp_dir("log");
    write_training_log(dir / "log.csv", {{0, 0.5, 0.25, 0.75}});
    auto lines = csv::read_lines(dir / "log.csv");
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "step,bce_component,triplet_component,total");
    EXPECT_EQ(lines[1], "0,0.5,0.25,0.75");
}
