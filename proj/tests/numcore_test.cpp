#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fraudfuse/errors.hpp"
#include "fraudfuse/numcore/checkpoint.hpp"
#include "fraudfuse/numcore/gradcheck.hpp"
#include "fraudfuse/numcore/ops.hpp"
#include "fraudfuse/numcore/optim.hpp"

using namespace fraudfuse;
using namespace fraudfuse::nc;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool rg = false) {
    Tensor t = Tensor::zeros(r, c, rg);
    for (double& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST(Ops, ReluDefinition) {
    Tensor x = Tensor::from(1, 3, {-1.0, 0.0, 2.0});
    const auto y = relu(x);
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{0, 0, 2}));
}

TEST(Ops, SoftmaxOfEqualLogitsIsUniform) {
    const auto y = softmax(Tensor::from(1, 2, {0.0, 0.0}));
    EXPECT_DOUBLE_EQ(y.at(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(y.at(0, 1), 0.5);
}

TEST(Ops, IdentityMatmul) {
    Rng rng(1);
    const Tensor x = random_matrix(3, 5, rng);
    const auto y = matmul(Tensor::identity(3), x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
    try {
        matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
        FAIL();
    } catch (const ShapeError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("matmul"), std::string::npos);
        EXPECT_NE(what.find("[2,3]"), std::string::npos);
    }
    EXPECT_THROW(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)), ShapeError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_matrix(4, 7, rng);
        for (double& v : x.mutable_data()) v *= 30.0;
        const auto y = softmax(x, 1);
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 7; ++c) s += y.at(r, c);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Ops, MaskedSoftmaxZeroesMaskedColumns) {
    const auto y = masked_softmax(Tensor::from(1, 3, {5.0, 1.0, 1.0}), {false, true, true});
    EXPECT_EQ(y.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(y.at(0, 1), 0.5);
    EXPECT_THROW(masked_softmax(Tensor::zeros(1, 2), {false, false}), ShapeError);
}

TEST(Ops, LayerNormMomentsPerRow) {
    Rng rng(3);
    const Tensor x = random_matrix(6, 16, rng);
    const auto y = layer_norm(x, Tensor::full(1, 16, 1.0), Tensor::zeros(1, 16));
    for (std::size_t r = 0; r < 6; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < 16; ++c) mu += y.at(r, c);
        mu /= 16.0;
        double var = 0.0;
        for (std::size_t c = 0; c < 16; ++c) var += (y.at(r, c) - mu) * (y.at(r, c) - mu);
        var /= 16.0;
        EXPECT_LE(std::abs(mu), 1e-10);
        EXPECT_NEAR(var, 1.0, 1e-8);
    }
}

TEST(Ops, EmbeddingLookupRejectsOutOfRangeId) {
    const std::vector<std::size_t> ids{0, 4};
    EXPECT_THROW(embedding_lookup(Tensor::zeros(4, 2), ids), ShapeError);
}

TEST(Ops, StraightThroughIsOneHot) {
    const auto y = straight_through_onehot(Tensor::from(2, 3, {0.2, 0.5, 0.3, 0.4, 0.4, 0.2}));
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
              (std::vector<double>{0, 1, 0, 1, 0, 0}));
}

TEST(CrossEntropy, HandValues) {
    const std::vector<int> y1{1};
    EXPECT_NEAR(binary_cross_entropy(Tensor::from(1, 1, {0.5}), y1).item(), std::log(2.0), 1e-15);
    const std::vector<int> y2{1, 0};
    EXPECT_NEAR(binary_cross_entropy(Tensor::from(2, 1, {0.9, 0.1}), y2).item(), 0.105360515657826,
                1e-12);
    const std::vector<int> y3{1, 0};
    EXPECT_LT(binary_cross_entropy(Tensor::from(2, 1, {1.0, 0.0}), y3).item(), 1e-11);
}

TEST(CrossEntropy, EmptyBatchIsAnError) {
    EXPECT_THROW(binary_cross_entropy(Tensor::zeros(0, 1), std::vector<int>{}), NumericError);
}

TEST(Backward, SumOfMatVecGivesOuterProduct) {
    Rng rng(4);
    Tensor w = random_matrix(3, 4, rng, true);
    const Tensor x = random_matrix(4, 1, rng);
    w.zero_grad();
    backward(sum(matmul(w, x)));
    // d/dW sum(W x) = 1 x^T
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(w.grad()[r * 4 + c], x.at(c, 0));
    }
}

TEST(Backward, DisconnectedParameterGetsZero) {
    Tensor w = Tensor::full(2, 2, 1.0, true);
    Tensor unused = Tensor::full(2, 2, 1.0, true);
    w.zero_grad();
    unused.zero_grad();
    backward(sum(w));
    for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, RepeatedCallsAccumulateExactly) {
    Rng rng(5);
    Tensor w = random_matrix(3, 3, rng, true);
    const Tensor x = random_matrix(3, 3, rng);
    auto loss_fn = [&] { return sum(gelu(matmul(add(w, w), x))); };
    w.zero_grad();
    backward(loss_fn());
    const std::vector<double> once(w.grad().begin(), w.grad().end());
    backward(loss_fn());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(w.grad()[i], 2.0 * once[i]);
}

TEST(Backward, NonScalarRootRejected) {
    Tensor w = Tensor::full(2, 2, 1.0, true);
    EXPECT_THROW(backward(scale(w, 2.0)), ShapeError);
}

TEST(Backward, Linearity) {
    Rng rng(6);
    Tensor w = random_matrix(4, 4, rng, true);
    const Tensor x = random_matrix(4, 4, rng);
    auto f = [&] { return sum(gelu(matmul(w, x))); };
    auto g = [&] { return sum(softmax(matmul(x, w), 1)); };
    const double a = 0.7;
    const double b = -1.3;
    w.zero_grad();
    backward(f());
    const std::vector<double> gf(w.grad().begin(), w.grad().end());
    w.zero_grad();
    backward(g());
    const std::vector<double> gg(w.grad().begin(), w.grad().end());
    w.zero_grad();
    backward(add(scale(f(), a), scale(g(), b)));
    for (std::size_t i = 0; i < gf.size(); ++i) EXPECT_NEAR(w.grad()[i], a * gf[i] + b * gg[i], 1e-12);
}

TEST(Backward, NoGradGuardSkipsGraph) {
    Tensor w = Tensor::full(2, 2, 1.0, true);
    NoGradGuard guard;
    const auto y = relu(w);
    EXPECT_FALSE(y.requires_grad());
}

TEST(GradCheck, EveryPrimitivePasses) {
    const auto report = grad_check_ops();
    for (const auto& e : report.entries) {
        EXPECT_TRUE(e.passed) << e.name << " rel_err=" << e.max_rel_error;
    }
    EXPECT_GE(report.entries.size(), 20u);
}

TEST(GradCheck, LinearLayerPasses) {
    Rng rng(7);
    std::vector<Parameter> params{{"W", random_matrix(5, 3, rng, true)}, {"b", random_matrix(1, 3, rng, true)}};
    const Tensor x = random_matrix(4, 5, rng);
    const Tensor weights = random_matrix(4, 3, rng);
    auto loss = [&] { return sum(mul(add(matmul(x, params[0].tensor), params[1].tensor), weights)); };
    const auto report = grad_check(loss, params);
    EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(GradCheck, CorruptedBackwardIsReportedByName) {
    debug::inject_backward_fault(OpKind::Gelu, 1.5);
    const auto report = grad_check_ops();
    debug::clear_backward_faults();
    EXPECT_FALSE(report.passed());
    ASSERT_NE(report.worst(), nullptr);
    EXPECT_EQ(report.worst()->name, "gelu");
    for (const auto& e : report.entries) {
        if (e.name != "gelu") {
            EXPECT_TRUE(e.passed) << e.name;
        }
    }
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoop) {
    ParameterStore ps;
    ps.add("w", 1, 3).mutable_data()[1] = 2.0;
    ps.zero_grad();
    AdamW opt({.weight_decay = 0.0});
    opt.step(ps, 0.1);
    EXPECT_EQ(ps.get("w").data()[1], 2.0);
}

TEST(AdamW, FirstStepWithBiasCorrection) {
    ParameterStore ps;
    Tensor& w = ps.add("w", 1, 1);
    w.mutable_data()[0] = 1.0;
    w.zero_grad();
    backward(sum(w));  // g = 1
    AdamW opt({.weight_decay = 0.0});
    opt.step(ps, 0.1);
    EXPECT_NEAR(w.data()[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, DecoupledDecay) {
    ParameterStore ps;
    Tensor& w = ps.add("w", 1, 1);
    w.mutable_data()[0] = 3.0;
    w.zero_grad();
    AdamW opt({.weight_decay = 0.001});
    opt.step(ps, 0.1);
    EXPECT_DOUBLE_EQ(w.data()[0], 3.0 * (1.0 - 1e-4));
}

TEST(AdamW, WithoutDecayMatchesPlainAdamBitwise) {
    Rng rng(8);
    ParameterStore ps;
    Tensor& w = ps.add("w", 2, 3);
    for (double& v : w.mutable_data()) v = rng.uniform(-1, 1);
    std::vector<double> theta(w.data().begin(), w.data().end());
    std::vector<double> m(6, 0.0), v(6, 0.0);
    AdamW opt({.weight_decay = 0.0});
    for (int t = 1; t <= 5; ++t) {
        w.zero_grad();
        backward(sum(mul(w, w)));
        const std::vector<double> g(w.grad().begin(), w.grad().end());
        opt.step(ps, 0.01);
        for (std::size_t i = 0; i < 6; ++i) {
            m[i] = 0.9 * m[i] + (1.0 - 0.9) * g[i];
            v[i] = 0.999 * v[i] + (1.0 - 0.999) * g[i] * g[i];
            const double mh = m[i] / (1.0 - std::pow(0.9, t));
            const double vh = v[i] / (1.0 - std::pow(0.999, t));
            theta[i] = theta[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8) - 0.01 * 0.0 * theta[i];
            EXPECT_EQ(w.data()[i], theta[i]);
        }
    }
}

TEST(AdamW, MissingGradientNamesParameter) {
    ParameterStore ps;
    ps.add("encoder.W", 1, 1);
    AdamW opt;
    try {
        opt.step(ps, 0.1);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("encoder.W"), std::string::npos);
    }
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42, "x"), b(42, "x"), c(42, "y");
    bool differs = false;
    for (int i = 0; i < 10; ++i) {
        const auto va = a.next_u64();
        EXPECT_EQ(va, b.next_u64());
        differs = differs || va != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Checkpoint, RoundTripPreservesValuesAndMeta) {
    Rng rng(9);
    ParameterStore ps;
    for (double& v : ps.add("a.W", 3, 2).mutable_data()) v = rng.normal();
    for (double& v : ps.add("b", 1, 4).mutable_data()) v = rng.normal();
    const auto path = std::filesystem::temp_directory_path() / "numcore_test.cfck";
    save_checkpoint(path, ps, {{"d_model", 8}});
    const auto ck = load_checkpoint(path);
    EXPECT_EQ(ck.meta.at("d_model"), 8);
    ParameterStore other;
    other.add("a.W", 3, 2);
    other.add("b", 1, 4);
    apply_checkpoint(ck, other);
    for (std::size_t i = 0; i < ps.count(); ++i) {
        const auto x = ps.all()[i].tensor.data();
        const auto y = other.all()[i].tensor.data();
        EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
    }
    ParameterStore wrong;
    wrong.add("a.W", 2, 3);
    EXPECT_THROW(apply_checkpoint(ck, wrong), DataError);
    std::filesystem::remove(path);
}
