#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ospn/adam.hpp"
#include "ospn/error.hpp"
#include "ospn/graph.hpp"
#include "ospn/rng.hpp"
#include "test_util.hpp"

using namespace ospn;

namespace {

ParamTensor make_param(const std::string& id, std::size_t rows, std::size_t cols, Rng& rng,
                       double scale = 0.5) {
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : t.data) v = scale * rng.normal();
    return ParamTensor(id, std::move(t));
}

ParamTensor make_bias(const std::string& id, std::size_t n, Rng& rng, double scale = 0.1) {
    Tensor t = Tensor::zeros({n});
    for (double& v : t.data) v = scale * rng.normal();
    return ParamTensor(id, std::move(t));
}

// Mask with arbitrary block rows for small hand-built cases.
BlockMask manual_mask(std::size_t rows, std::size_t cols, std::size_t block_rows,
                      std::vector<std::uint8_t> keep) {
    BlockMask m;
    m.rows = rows;
    m.cols = cols;
    m.block_rows = block_rows;
    m.keep = std::move(keep);
    return m;
}

} // namespace

TEST_CASE("tensor shape/value consistency is enforced") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
    CHECK(Tensor::zeros({3, 4}).numel() == 12);
    CHECK(Tensor::vector({1, 2, 3}).rank() == 1);
}

TEST_CASE("linear: unit basis input selects a weight column") {
    Graph g;
    ParamTensor w("w", Tensor::matrix(2, 2, {2, 3, 4, 5}));
    ParamTensor b("b", Tensor::vector({0, 0}));
    const auto x = g.input(Tensor::matrix(1, 2, {1, 0}));

    const BlockMask keep_all = manual_mask(2, 2, 1, {1, 1, 1, 1});
    const auto y = g.linear(x, w, b, &keep_all);
    CHECK(g.value(y).at(0, 0) == 2.0);
    CHECK(g.value(y).at(0, 1) == 4.0);
}

TEST_CASE("linear: masked weights act as zeros") {
    Graph g;
    ParamTensor w("w", Tensor::matrix(2, 2, {2, 3, 4, 5}));
    ParamTensor b("b", Tensor::vector({0, 0}));
    const auto x = g.input(Tensor::matrix(1, 2, {1, 0}));

    const BlockMask mask = manual_mask(2, 2, 1, {0, 0, 1, 1});  // zero row 0 of W
    const auto y = g.linear(x, w, b, &mask);
    CHECK(g.value(y).at(0, 0) == 0.0);
    CHECK(g.value(y).at(0, 1) == 4.0);
}

TEST_CASE("linear: random 4x8 case matches the naive triple-loop oracle") {
    Rng rng(42);
    ParamTensor w = make_param("w", 8, 8, rng);
    ParamTensor b = make_bias("b", 8, rng);
    Tensor x = Tensor::zeros({4, 8});
    for (double& v : x.data) v = rng.normal();

    // Random 8x1-blocked mask over the 8x8 weight (one block row).
    BlockMask mask = BlockMask::all_keep(8, 8);
    std::vector<int> keep_elem(64, 1);
    for (std::size_t c = 0; c < 8; ++c) {
        const bool keep = rng.uniform01() < 0.5;
        mask.keep[c] = keep ? 1 : 0;
        for (std::size_t r = 0; r < 8; ++r) keep_elem[r * 8 + c] = keep ? 1 : 0;
    }

    Graph g;
    const auto y = g.linear(g.input(x), w, b, &mask);
    const Tensor expect = testutil::naive_masked_linear(x, w.value, b.value, keep_elem);
    for (std::size_t i = 0; i < expect.numel(); ++i) {
        CHECK(g.value(y).data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("linear: masked positions get exactly zero gradient") {
    Rng rng(7);
    ParamTensor w = make_param("w", 16, 4, rng);
    ParamTensor b = make_bias("b", 16, rng);
    Tensor x = Tensor::zeros({3, 4});
    for (double& v : x.data) v = rng.normal();

    BlockMask mask = BlockMask::all_keep(16, 4);
    mask.keep[1] = 0;  // block (0, col 1): rows 0..7, col 1
    mask.keep[6] = 0;  // block (1, col 2): rows 8..15, col 2

    Graph g;
    const auto y = g.linear(g.input(x), w, b, &mask);
    const auto loss = g.softmax_cross_entropy(y, {0, 1, 2});
    g.backward(loss);

    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            if (!mask.keep_weight(r, c)) {
                CHECK(w.grad.at(r, c) == 0.0);
            }
        }
    }
    // Unmasked positions did receive gradient.
    double sum = 0.0;
    for (double v : w.grad.data) sum += std::abs(v);
    CHECK(sum > 0.0);
    // Bias gradient is full.
    double bsum = 0.0;
    for (double v : b.grad.data) bsum += std::abs(v);
    CHECK(bsum > 0.0);
}

TEST_CASE("relu forward and non-finite input rejection") {
    Graph g;
    const auto y = g.relu(g.input(Tensor::matrix(1, 2, {-1, 2})));
    CHECK(g.value(y).data[0] == 0.0);
    CHECK(g.value(y).data[1] == 2.0);

    Graph g2;
    ParamTensor w("w", Tensor::matrix(1, 1, {1}));
    ParamTensor b("b", Tensor::vector({0}));
    const auto bad = g2.input(Tensor::matrix(1, 1, {std::nan("")}));
    CHECK_THROWS_AS(g2.linear(bad, w, b), NumericError);
}

TEST_CASE("dropout: zero rate is the identity node") {
    Graph g;
    Rng rng(5);
    Tensor x = Tensor::zeros({4, 4});
    for (double& v : x.data) v = rng.normal();
    const auto in = g.input(x);
    const auto out = g.dropout(in, 0.0, rng);
    CHECK(out == in);
    CHECK(testutil::bitwise_equal(g.value(out), x));
}

TEST_CASE("dropout: survivor fraction concentrates near 1-rate") {
    Graph g;
    Rng rng(123);
    Tensor x = Tensor::zeros({100, 1000});
    x.fill(1.0);
    const auto out = g.dropout(g.input(x), 0.1, rng);
    std::size_t survivors = 0;
    for (double v : g.value(out).data) {
        if (v != 0.0) {
            ++survivors;
            CHECK(v == doctest::Approx(1.0 / 0.9).epsilon(1e-12));
        }
    }
    const double fraction = double(survivors) / 1e5;
    CHECK(fraction >= 0.88);
    CHECK(fraction <= 0.92);
}

TEST_CASE("dropout: gradients flow only through survivors; backward runs once") {
    Rng rng(9);
    Graph g;
    Tensor x = Tensor::zeros({1, 64});
    x.fill(2.0);
    const auto in = g.input(x);
    const auto out = g.dropout(in, 0.5, rng);
    const auto loss = g.softmax_cross_entropy(out, {0});
    g.backward(loss);
    for (std::size_t i = 0; i < 64; ++i) {
        if (g.value(out).data[i] == 0.0) {
            CHECK(g.grad(in).data[i] == 0.0);
        }
    }
    CHECK_THROWS_AS(g.backward(loss), StateError);

    Graph g2;
    CHECK_THROWS_AS(g2.dropout(g2.input(x), 1.0, rng), ValueError);
    CHECK_THROWS_AS(g2.dropout(g2.input(x), -0.1, rng), ValueError);
}

TEST_CASE("cross entropy: confident correct prediction is near zero") {
    Graph g;
    const auto loss = g.softmax_cross_entropy(g.input(Tensor::matrix(1, 2, {10, -10})), {0});
    CHECK(g.scalar(loss) < 1e-4);
    CHECK(g.scalar(loss) >= 0.0);
}

TEST_CASE("cross entropy: uniform logits give ln C") {
    Graph g;
    const auto loss = g.softmax_cross_entropy(g.input(Tensor::matrix(1, 4, {3, 3, 3, 3})), {2});
    CHECK(g.scalar(loss) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy: random 3x5 matches the log-sum-exp oracle") {
    Rng rng(77);
    Tensor logits = Tensor::zeros({3, 5});
    for (double& v : logits.data) v = 3.0 * rng.normal();
    const std::vector<int> labels{4, 0, 2};
    Graph g;
    const auto loss = g.softmax_cross_entropy(g.input(logits), labels);
    CHECK(g.scalar(loss) ==
          doctest::Approx(testutil::naive_cross_entropy(logits, labels)).epsilon(1e-12));
}

TEST_CASE("cross entropy: empty batch and bad labels are rejected") {
    Graph g;
    CHECK_THROWS_AS(g.softmax_cross_entropy(g.input(Tensor::zeros({0, 3})), {}), ValueError);
    Graph g2;
    CHECK_THROWS_AS(g2.softmax_cross_entropy(g2.input(Tensor::zeros({1, 3})), {3}), ValueError);
}

TEST_CASE("distillation: identical logits give exactly zero") {
    Graph g;
    Tensor t = Tensor::matrix(2, 3, {1, 2, 3, -1, 0, 1});
    const auto loss = g.kl_distillation(g.input(t), t, 2.0);
    CHECK(g.scalar(loss) == 0.0);
}

TEST_CASE("distillation: opposing logits match the direct KL oracle") {
    Tensor teacher = Tensor::matrix(1, 2, {1, 0});
    Tensor student = Tensor::matrix(1, 2, {0, 1});
    Graph g;
    const auto loss = g.kl_distillation(g.input(student), teacher, 1.0);
    const double oracle = testutil::naive_distill_kl(student, teacher, 1.0);
    CHECK(g.scalar(loss) == doctest::Approx(oracle).epsilon(1e-12));
    // Closed form for this case: p1 - p2 = tanh(1/2).
    CHECK(g.scalar(loss) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
    CHECK(g.scalar(loss) > 0.0);

    Graph g2;
    CHECK_THROWS_AS(g2.kl_distillation(g2.input(student), teacher, 0.0), ValueError);
    CHECK_THROWS_AS(g2.kl_distillation(g2.input(student), teacher, -1.0), ValueError);
}

TEST_CASE("distillation: no gradient reaches the teacher parameters") {
    Rng rng(31);
    ParamTensor teacher_w = make_param("tw", 3, 4, rng);
    ParamTensor teacher_b = make_bias("tb", 3, rng);
    ParamTensor student_w = make_param("sw", 3, 4, rng);
    ParamTensor student_b = make_bias("sb", 3, rng);
    Tensor x = Tensor::zeros({2, 4});
    for (double& v : x.data) v = rng.normal();

    // Teacher logits computed tape-free, used as constants.
    const Tensor teacher_logits = linear_forward(x, teacher_w.value, teacher_b.value, nullptr);

    Graph g;
    const auto logits = g.linear(g.input(x), student_w, student_b);
    const auto kd = g.kl_distillation(logits, teacher_logits, 2.0);
    g.backward(kd);

    for (double v : teacher_w.grad.data) CHECK(v == 0.0);
    for (double v : teacher_b.grad.data) CHECK(v == 0.0);
    CHECK(teacher_w.grad_fresh == false);
    double ssum = 0.0;
    for (double v : student_w.grad.data) ssum += std::abs(v);
    CHECK(ssum > 0.0);
}

TEST_CASE("adam: lr=0 leaves values unchanged but advances the step count") {
    Rng rng(11);
    std::vector<ParamTensor> params;
    params.push_back(make_param("w", 4, 4, rng));
    params.push_back(ParamTensor("b", Tensor::zeros({4})));
    const Tensor before = params[0].value;

    AdamState st;
    st.lr = 0.0;
    st.init(params);

    Graph g;
    const auto y = g.linear(g.input(Tensor::matrix(1, 4, {1, 2, 3, 4})), params[0], params[1]);
    g.backward(g.softmax_cross_entropy(y, {1}));
    adam_step(params, st);

    CHECK(st.step_count == 1);
    CHECK(testutil::bitwise_equal(params[0].value, before));
}

TEST_CASE("adam: first bias-corrected step moves a scalar by about lr") {
    std::vector<ParamTensor> params;
    params.emplace_back("w", Tensor::vector({1.0}));
    params[0].grad.data[0] = 1.0;
    params[0].grad_fresh = true;

    AdamState st;
    st.lr = 0.1;
    st.init(params);
    adam_step(params, st);

    // Hand evaluation: m=0.1, v=0.001, mhat=1, vhat=1 -> w = 1 - 0.1/(1+eps).
    const double expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
    CHECK(params[0].value.data[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(params[0].value.data[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(st.step_count == 1);
    CHECK(params[0].grad.data[0] == 0.0);
    CHECK(params[0].grad_fresh == false);

    // A second step without fresh gradients is a state error.
    CHECK_THROWS_AS(adam_step(params, st), StateError);
}

TEST_CASE("adam: v stays nonnegative under random training") {
    Rng rng(55);
    std::vector<ParamTensor> params;
    params.push_back(make_param("w", 6, 6, rng));
    params.push_back(make_bias("b", 6, rng));
    AdamState st;
    st.lr = 0.05;
    st.init(params);

    for (int step = 0; step < 30; ++step) {
        Graph g;
        Tensor x = Tensor::zeros({3, 6});
        for (double& v : x.data) v = rng.normal();
        const auto y = g.linear(g.input(x), params[0], params[1]);
        g.backward(g.softmax_cross_entropy(y, {0, 3, 5}));
        adam_step(params, st);
        for (const Tensor& v : st.v) {
            for (double e : v.data) CHECK(e >= 0.0);
        }
    }
    CHECK(st.step_count == 30);
}

TEST_CASE("gradcheck: 2-layer MLP with mask, dropout and both losses") {
    Rng init_rng(2024);
    ParamTensor w1 = make_param("w1", 16, 6, init_rng);
    ParamTensor b1 = make_bias("b1", 16, init_rng);
    ParamTensor w2 = make_param("w2", 5, 16, init_rng);
    ParamTensor b2 = make_bias("b2", 5, init_rng);
    Tensor x = Tensor::zeros({4, 6});
    for (double& v : x.data) v = init_rng.normal();
    const std::vector<int> labels{0, 1, 2, 4};
    Tensor teacher = Tensor::zeros({4, 5});
    for (double& v : teacher.data) v = init_rng.normal();

    BlockMask mask = BlockMask::all_keep(16, 6);
    for (std::size_t i = 0; i < mask.keep.size(); ++i) mask.keep[i] = (i % 3 != 0);

    const auto forward = [&](Graph& g) {
        Rng drop_rng(99);  // reseeded per call so the dropout mask is stable
        auto h = g.relu(g.linear(g.input(x), w1, b1, &mask));
        h = g.dropout(h, 0.2, drop_rng);
        const auto logits = g.linear(h, w2, b2);
        const auto task = g.softmax_cross_entropy(logits, labels);
        const auto kd = g.kl_distillation(logits, teacher, 1.5);
        return g.weighted_sum({{task, 0.5}, {kd, 0.5}});
    };

    Graph g;
    g.backward(forward(g));

    const auto loss_fn = [&]() {
        Graph fresh;
        return fresh.scalar(forward(fresh));
    };
    const double err = testutil::max_grad_rel_error({&w1, &b1, &w2, &b2}, loss_fn);
    CHECK(err < 1e-4);

    // Masked positions stayed exactly zero even with the combined loss.
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 6; ++c) {
            if (!mask.keep_weight(r, c)) CHECK(w1.grad.at(r, c) == 0.0);
        }
    }
}

TEST_CASE("determinism: identical seeds give bitwise-identical grads and Adam state") {
    const auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<ParamTensor> params;
        params.push_back(make_param("w", 8, 8, rng));
        params.push_back(make_bias("b", 8, rng));
        AdamState st;
        st.lr = 0.01;
        st.init(params);
        for (int step = 0; step < 5; ++step) {
            Graph g;
            Tensor x = Tensor::zeros({4, 8});
            for (double& v : x.data) v = rng.normal();
            auto h = g.dropout(g.relu(g.linear(g.input(x), params[0], params[1])), 0.1, rng);
            g.backward(g.softmax_cross_entropy(h, {0, 1, 2, 3}));
            adam_step(params, st);
        }
        return std::pair{params, st};
    };
    const auto [p1, s1] = run(31337);
    const auto [p2, s2] = run(31337);
    CHECK(testutil::bitwise_equal(p1[0].value, p2[0].value));
    CHECK(testutil::bitwise_equal(p1[1].value, p2[1].value));
    CHECK(testutil::bitwise_equal(s1.m[0], s2.m[0]));
    CHECK(testutil::bitwise_equal(s1.v[0], s2.v[0]));
}

TEST_CASE("weighted_sum combines scalars and routes coefficients backward") {
    Graph g;
    const auto a = g.input(Tensor({1}, {2.0}));
    const auto b = g.input(Tensor({1}, {3.0}));
    const auto s = g.weighted_sum({{a, 0.25}, {b, 0.75}});
    CHECK(g.scalar(s) == doctest::Approx(0.25 * 2.0 + 0.75 * 3.0).epsilon(1e-15));
    g.backward(s);
    CHECK(g.grad(a).data[0] == 0.25);
    CHECK(g.grad(b).data[0] == 0.75);
}
