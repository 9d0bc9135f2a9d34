#include <doctest.h>

#include <cmath>
#include <random>

#include "rng.hpp"
#include "tensor.hpp"

using namespace wdtl;

namespace {

std::vector<double> random_values(int n, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

// Central finite differences over every parameter against the tape's
// accumulated gradients for a scalar objective.
void check_gradients(const std::function<Tensor(Tape&)>& build,
                     const std::vector<Tensor>& params, double step,
                     double tol) {
    Tape tape;
    for (auto& p : params) p->zero_grad();
    Tensor loss = build(tape);
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p->grad);

    auto objective = [&]() {
        Tape t;
        return build(t)->value[0];
    };
    const GradReport report = finite_diff_check(objective, params, analytic, step);
    CHECK(report.all_finite);
    CHECK(report.max_rel_error < tol);
}

} // namespace

TEST_CASE("shape product and conv output length") {
    CHECK(shape_product({2, 3, 4}) == 24);
    CHECK(conv_out_len(1000, 20, 2) == 491);
    CHECK(conv_out_len(491, 2, 2) == 245);
    CHECK(conv_out_len(245, 20, 2) == 113);
    CHECK(conv_out_len(113, 2, 2) == 56);
}

TEST_CASE("sum and dot match hand values") {
    Tape tape;
    auto a = make_tensor({3}, {1.0, 2.0, 3.0});
    auto b = make_tensor({3}, {4.0, -1.0, 0.5});
    CHECK(tape.sum(a)->value[0] == doctest::Approx(6.0));
    CHECK(tape.dot(a, b)->value[0] == doctest::Approx(4.0 - 2.0 + 1.5));
    CHECK(tape.mean(a)->value[0] == doctest::Approx(2.0));
}

TEST_CASE("backward on non-scalar loss throws") {
    Tape tape;
    auto a = make_tensor({2}, {1.0, 2.0}, true);
    auto b = tape.relu(a);
    CHECK_THROWS_AS(tape.backward(b), ContractError);
}

TEST_CASE("elementwise op gradients") {
    auto rng = make_rng(7, "test-elementwise");
    auto a = make_tensor({5}, random_values(5, rng), true, "a");
    auto b = make_tensor({5}, random_values(5, rng), true, "b");
    check_gradients(
        [&](Tape& t) {
            auto s = t.add(a, t.scale(b, -0.7));
            auto d = t.sub(s, b);
            return t.dot(d, s);
        },
        {a, b}, 1e-5, 1e-6);
}

TEST_CASE("relu gradient away from the kink") {
    auto rng = make_rng(8, "test-relu");
    std::vector<double> vals = random_values(16, rng);
    for (auto& v : vals)
        if (std::abs(v) < 0.05) v = 0.1; // keep finite differences clean
    auto a = make_tensor({16}, vals, true, "a");
    check_gradients([&](Tape& t) { return t.sum(t.relu(a)); }, {a}, 1e-5, 1e-6);
}

TEST_CASE("linear layer gradients") {
    auto rng = make_rng(9, "test-linear");
    auto x = make_tensor({3, 4}, random_values(12, rng), true, "x");
    auto w = make_tensor({2, 4}, random_values(8, rng), true, "w");
    auto b = make_tensor({2}, random_values(2, rng), true, "b");
    check_gradients(
        [&](Tape& t) {
            auto y = t.linear(x, w, b);
            return t.dot(y, y);
        },
        {x, w, b}, 1e-5, 1e-5);
}

TEST_CASE("conv1d gradients, multi-channel strided") {
    auto rng = make_rng(10, "test-conv");
    auto x = make_tensor({2, 3, 11}, random_values(2 * 3 * 11, rng), true, "x");
    auto w = make_tensor({4, 3, 3}, random_values(4 * 3 * 3, rng), true, "w");
    auto b = make_tensor({4}, random_values(4, rng), true, "b");
    check_gradients(
        [&](Tape& t) {
            auto y = t.conv1d(x, w, b, 2);
            return t.dot(y, y);
        },
        {x, w, b}, 1e-5, 1e-5);
}

TEST_CASE("maxpool1d gradient routes to the argmax") {
    auto x = make_tensor({1, 1, 4}, {1.0, 3.0, 2.0, 5.0}, true, "x");
    Tape tape;
    auto y = tape.maxpool1d(x, 2, 2);
    REQUIRE(y->shape == std::vector<int>{1, 1, 2});
    CHECK(y->value[0] == doctest::Approx(3.0));
    CHECK(y->value[1] == doctest::Approx(5.0));
    auto loss = tape.sum(y);
    tape.backward(loss);
    CHECK(x->grad == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("maxpool ties route to the first maximum") {
    auto x = make_tensor({1, 1, 2}, {2.0, 2.0}, true, "x");
    Tape tape;
    auto loss = tape.sum(tape.maxpool1d(x, 2, 2));
    tape.backward(loss);
    CHECK(x->grad == std::vector<double>{1.0, 0.0});
}

TEST_CASE("softmax rows sum to one and gradcheck") {
    auto rng = make_rng(11, "test-softmax");
    auto z = make_tensor({3, 4}, random_values(12, rng, -2.0, 2.0), true, "z");
    {
        Tape tape;
        auto p = tape.softmax(z);
        for (int r = 0; r < 3; ++r) {
            double s = 0.0;
            for (int c = 0; c < 4; ++c) s += p->value[r * 4 + c];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    auto probe = make_tensor({3, 4}, random_values(12, rng), false);
    check_gradients(
        [&](Tape& t) { return t.dot(t.softmax(z), probe); }, {z}, 1e-5, 1e-5);
}

TEST_CASE("softmax is shift invariant") {
    Tape tape;
    auto a = make_tensor({1, 3}, {1.0, 2.0, 3.0});
    auto b = make_tensor({1, 3}, {101.0, 102.0, 103.0});
    auto pa = tape.softmax(a);
    auto pb = tape.softmax(b);
    for (int i = 0; i < 3; ++i)
        CHECK(pa->value[i] == doctest::Approx(pb->value[i]).epsilon(1e-12));
}

TEST_CASE("cross entropy of the uniform distribution is ln K") {
    Tape tape;
    auto probs = make_tensor({2, 4}, std::vector<double>(8, 0.25));
    auto loss = tape.cross_entropy(probs, {0, 3});
    CHECK(loss->value[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy validates rows and labels") {
    Tape tape;
    auto bad = make_tensor({1, 4}, {0.5, 0.5, 0.5, 0.5});
    CHECK_THROWS_AS(tape.cross_entropy(bad, {0}), ContractError);
    auto ok = make_tensor({1, 4}, {0.25, 0.25, 0.25, 0.25});
    CHECK_THROWS_AS(tape.cross_entropy(ok, {4}), ContractError);
    CHECK_THROWS_AS(tape.cross_entropy(ok, {-1}), ContractError);
}

TEST_CASE("softmax + cross entropy gradcheck") {
    auto rng = make_rng(12, "test-ce");
    auto z = make_tensor({4, 4}, random_values(16, rng, -1.5, 1.5), true, "z");
    const std::vector<int> labels = {0, 1, 2, 3};
    check_gradients(
        [&](Tape& t) { return t.cross_entropy(t.softmax(z), labels); }, {z},
        1e-5, 1e-5);
}

TEST_CASE("slice_rows keeps gradients aligned") {
    auto x = make_tensor({3, 2}, {1, 2, 3, 4, 5, 6}, true, "x");
    Tape tape;
    auto s = tape.slice_rows(x, 1, 2);
    REQUIRE(s->shape == std::vector<int>{2, 2});
    CHECK(s->value == std::vector<double>{3, 4, 5, 6});
    tape.backward(tape.sum(s));
    CHECK(x->grad == std::vector<double>{0, 0, 1, 1, 1, 1});
}

TEST_CASE("flatten reshapes without reordering") {
    auto x = make_tensor({2, 2, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, true);
    Tape tape;
    auto f = tape.flatten(x);
    CHECK(f->shape == std::vector<int>{2, 6});
    CHECK(f->value == x->value);
    tape.backward(tape.sum(f));
    CHECK(x->grad == std::vector<double>(12, 1.0));
}

TEST_CASE("backward accumulates over reuse") {
    auto a = make_tensor({2}, {1.0, 2.0}, true, "a");
    Tape tape;
    auto loss = tape.dot(a, a); // d/da = 2a
    tape.backward(loss);
    CHECK(a->grad[0] == doctest::Approx(2.0));
    CHECK(a->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("gradients are linear in the upstream seed") {
    auto a = make_tensor({3}, {0.5, -1.0, 2.0}, true, "a");
    auto grad_of = [&](double c) {
        a->zero_grad();
        Tape tape;
        auto loss = tape.scale(tape.dot(a, a), c);
        tape.backward(loss);
        return a->grad;
    };
    const auto g1 = grad_of(1.0);
    const auto g3 = grad_of(3.0);
    for (int i = 0; i < 3; ++i) CHECK(g3[i] == doctest::Approx(3.0 * g1[i]));
}

TEST_CASE("tape evaluation is deterministic") {
    auto rng1 = make_rng(99, "det");
    auto rng2 = make_rng(99, "det");
    auto run = [](std::mt19937_64& rng) {
        auto x = make_tensor({2, 2, 8}, random_values(32, rng), true);
        auto w = make_tensor({3, 2, 3}, random_values(18, rng), true);
        auto b = make_tensor({3}, random_values(3, rng), true);
        Tape tape;
        auto loss = tape.sum(tape.relu(tape.conv1d(x, w, b, 1)));
        tape.backward(loss);
        return std::make_pair(loss->value[0], x->grad);
    };
    const auto r1 = run(rng1);
    const auto r2 = run(rng2);
    CHECK(r1.first == r2.first);
    CHECK(r1.second == r2.second);
}

TEST_CASE("precision32 tape tracks the double path") {
    auto rng = make_rng(321, "fp32");
    auto x = make_tensor({3, 2, 19}, random_values(3 * 2 * 19, rng), true);
    auto w = make_tensor({4, 2, 5}, random_values(4 * 2 * 5, rng), true);
    auto b = make_tensor({4}, random_values(4, rng), true);
    auto w2 = make_tensor({5, 32}, random_values(5 * 32, rng), true);
    auto b2 = make_tensor({5}, random_values(5, rng), true);
    const std::vector<Tensor> params = {x, w, b, w2, b2};

    auto run = [&](bool fp32) {
        for (const auto& p : params) p->zero_grad();
        Tape tape;
        tape.set_precision32(fp32);
        auto y = tape.linear(tape.flatten(tape.relu(tape.conv1d(x, w, b, 2))),
                             w2, b2);
        auto loss = tape.dot(y, y);
        tape.backward(loss);
        return loss->value[0];
    };

    const double l64 = run(false);
    std::vector<std::vector<double>> g64;
    for (const auto& p : params) g64.push_back(p->grad);

    const double l32 = run(true);
    CHECK(l32 == doctest::Approx(l64).epsilon(1e-5));
    for (size_t p = 0; p < params.size(); ++p)
        for (size_t i = 0; i < g64[p].size(); ++i) {
            const double denom = std::max(std::abs(g64[p][i]), 1e-3);
            CHECK(std::abs(params[p]->grad[i] - g64[p][i]) / denom < 1e-4);
        }

    // the 32-bit path is itself bitwise repeatable
    std::vector<std::vector<double>> g32;
    for (const auto& p : params) g32.push_back(p->grad);
    const double l32b = run(true);
    CHECK(l32b == l32);
    for (size_t p = 0; p < params.size(); ++p) CHECK(params[p]->grad == g32[p]);
}

TEST_CASE("finite_diff_check flags non-finite objectives") {
    // sqrt at zero: the negative probe point evaluates to NaN
    auto a = make_tensor({1}, {0.0}, true, "a");
    const GradReport report = finite_diff_check(
        [&]() { return std::sqrt(a->value[0]); }, {a}, {{0.0}}, 1e-6);
    CHECK_FALSE(report.all_finite);
}
