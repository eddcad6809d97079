#include "cytocoset/setnet.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace cytocoset;

namespace {

SetEncoderConfig small_config(std::uint64_t seed = 1) {
    SetEncoderConfig cfg;
    cfg.input_dim = 3;
    cfg.block_widths = {8, 6};
    cfg.embed_dim = 4;
    cfg.set_size = 5;
    cfg.seed = seed;
    return cfg;
}

}

TEST(InitParams, ShapeChainAndZeroBiases) {
    SetEncoderConfig cfg;
    cfg.input_dim = 2;
    cfg.block_widths = {4};
    cfg.embed_dim = 3;
    auto p = init_params(cfg);
    ASSERT_EQ(p.num_layers(), 3u);
    EXPECT_EQ(p.shape(0).in, 2);
    EXPECT_EQ(p.shape(0).out, 4);
    EXPECT_EQ(p.shape(1).in, 4);
    EXPECT_EQ(p.shape(1).out, 3);
    EXPECT_EQ(p.shape(2).in, 3);
    EXPECT_EQ(p.shape(2).out, 1);
    EXPECT_EQ(p.size(), 2u * 4 + 4 + 4 * 3 + 3 + 3 + 1);
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        for (double b : p.bias(l)) {
            EXPECT_EQ(b, 0.0);
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(p.shape(l).in));
        for (double w : p.weight(l)) {
            EXPECT_LE(std::fabs(w), bound);
        }
    }
    EXPECT_TRUE(init_params(cfg) == p);
    cfg.seed = 2;
    EXPECT_FALSE(init_params(cfg) == p);
}

TEST(InitParams, RejectsBadConfig) {
    auto cfg = small_config();
    cfg.block_widths = {4, 0};
    EXPECT_THROW(init_params(cfg), DataError);
    cfg = small_config();
    cfg.set_size = 0;
    EXPECT_THROW(init_params(cfg), DataError);
}

TEST(Forward, ZeroWeights) {
    auto cfg = small_config();
    ModelParams p(cfg);
    p.bias(p.head_layer())[0] = 0.7;
    p.bias(p.head_layer())[1] = -0.3;
    p.bias(p.output_layer())[0] = -1.25;
    std::mt19937_64 rng(1);
    auto out = forward(p, fixtures::random_matrix(5, 3, rng));
    EXPECT_EQ(out.logit, -1.25);
    EXPECT_EQ(out.embedding, (std::vector<double>{0.7, 0.0, 0.0, 0.0}));
    EXPECT_NEAR(out.probability(), 1.0 / (1.0 + std::exp(1.25)), 1e-15);
}

TEST(Forward, PermutationInvariantAndIdempotentOnDuplicates) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        auto p = fixtures::random_params(small_config(), rng);
        auto X = fixtures::random_matrix(5 + trial, 3, rng);
        auto a = forward(p, X);
        auto b = forward(p, fixtures::permute_rows(X, rng));
        ASSERT_EQ(a.logit, b.logit);
        ASSERT_EQ(a.embedding, b.embedding);

        RowMatrix doubled(2 * X.rows(), X.cols());
        doubled << X, X;
        auto c = forward(p, doubled);
        ASSERT_EQ(a.logit, c.logit);
        ASSERT_EQ(a.embedding, c.embedding);
    }
}

TEST(Forward, Errors) {
    auto p = init_params(small_config());
    EXPECT_THROW(forward(p, RowMatrix::Zero(5, 4)), DataError);
    auto q = p;
    q.bias(q.output_layer())[0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(forward(q, RowMatrix::Zero(5, 3)), NumericError);
}

TEST(Logistic, StaysInOpenInterval) {
    for (double z : {-30.0, -5.0, 0.0, 5.0, 30.0}) {
        const double p = logistic(z);
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
    EXPECT_EQ(logistic(0), 0.5);
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
    std::mt19937_64 rng(9);
    auto p = fixtures::random_params(small_config(), rng);
    auto X = fixtures::random_matrix(5, 3, rng);
    auto out = forward(p, X);
    Gradients g(p.config());
    backward(p, X, out.trace, 0.0, std::vector<double>(4, 0.0), g);
    for (double v : g.values()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Backward, MatchesFiniteDifferencesOnSingleInstance) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto c = fixtures::random_gradient_case(100 + seed);
        // Single instance, no triplet: d loss / d logit is the BCE gradient scaled by alpha / B.
        Batch one;
        one.instances.push_back(c.batch.instances[2]);
        Gradients g(c.params.config());
        composite_loss(c.params, one, c.loss, &g);
        const oracle::ReferenceNet ref(c.params.config());
        auto fd = oracle::finite_difference_gradient(ref, c.params, one, c.loss, 1e-4L);
        EXPECT_LT(fixtures::max_relative_error(g.values(), fd), 1e-4) << "seed " << seed;
    }
}

TEST(Backward, DeadUnitReceivesNoGradient) {
    std::mt19937_64 rng(13);
    auto cfg = small_config();
    auto p = fixtures::random_params(cfg, rng);
    // Unit 2 of the first block can never fire: no cell is on any argmax path through it.
    p.bias(0)[2] = -100.0;
    auto X = fixtures::random_matrix(5, 3, rng);
    auto out = forward(p, X);
    Gradients g(cfg);
    std::vector<double> de{0.3, -0.2, 0.5, 0.1};
    backward(p, X, out.trace, 0.7, de, g);

    const auto w = g.weight(0);
    const int width = p.shape(0).out;
    for (int i = 0; i < p.shape(0).in; ++i) {
        EXPECT_EQ(w[i * width + 2], 0.0);
    }
    EXPECT_EQ(g.bias(0)[2], 0.0);

    // The finite-difference oracle agrees that those coordinates are flat.
    LossConfig lc{0.5, 1.0};
    Batch b;
    BatchInstance inst;
    inst.set = X;
    inst.label = 1;
    b.instances.push_back(inst);
    const oracle::ReferenceNet ref(cfg);
    auto fd = oracle::finite_difference_gradient(ref, p, b, lc, 1e-4L);
    const auto off = p.shape(0).weight_offset;
    for (int i = 0; i < p.shape(0).in; ++i) {
        EXPECT_EQ(fd[off + i * width + 2], 0.0);
    }
}

TEST(Backward, ShapeMismatch) {
    auto p = init_params(small_config());
    auto X = RowMatrix::Zero(5, 3).eval();
    auto out = forward(p, X);
    auto other = small_config();
    other.embed_dim = 5;
    Gradients wrong(other);
    EXPECT_THROW(backward(p, X, out.trace, 1.0, {}, wrong), DataError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    std::mt19937_64 rng(44);
    auto cfg = small_config(0xdeadbeefcafef00dULL);
    auto p = fixtures::random_params(cfg, rng);
    p.values()[0] = 1e-310;
    p.values()[1] = -0.0;
    auto dir = fixtures::temp_dir("ckpt");
    write_checkpoint(dir / "m.ckpt", p);
    auto back = read_checkpoint(dir / "m.ckpt");
    EXPECT_TRUE(back == p);
    EXPECT_EQ(back.config().seed, cfg.seed);
    EXPECT_TRUE(std::signbit(back.values()[1]));
}

TEST(Checkpoint, RejectsCorruptFiles) {
    auto p = init_params(small_config());
    auto text = checkpoint_to_string(p);
    EXPECT_THROW(checkpoint_from_string("nonsense\n"), DataError);
    auto bad_version = text;
    bad_version.replace(bad_version.find(" 1\n"), 3, " 9\n");
    EXPECT_THROW(checkpoint_from_string(bad_version), DataError);
    EXPECT_THROW(checkpoint_from_string(text.substr(0, text.size() / 2)), DataError);
}
