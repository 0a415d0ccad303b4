#include <catch2/catch_amalgamated.hpp>

#include "msd/rng.hpp"
#include "msd/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace msd;
using gradcheck::LeafSpec;

namespace {

std::shared_ptr<std::vector<double>> random_storage(size_t n, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    auto v = std::make_shared<std::vector<double>>(rng.normal_vector(n, scale));
    return v;
}

}  // namespace

TEST_CASE("elementwise forward values") {
    Tensor a = Tensor::constant(1, 3, {1, 2, 3});
    Tensor b = Tensor::constant(1, 3, {10, 20, 30});
    REQUIRE(add(a, b).values() == std::vector<double>{11, 22, 33});
    REQUIRE(sub(b, a).values() == std::vector<double>{9, 18, 27});
    REQUIRE(mul(a, b).values() == std::vector<double>{10, 40, 90});
    REQUIRE(scale(a, -2).values() == std::vector<double>{-2, -4, -6});
    REQUIRE(axpy(a, 0.5, b).values() == std::vector<double>{6, 12, 18});
    REQUIRE(sum(a).scalar_value() == 6.0);
    REQUIRE(mean_all(a).scalar_value() == 2.0);
}

TEST_CASE("matmul forward") {
    Tensor a = Tensor::constant(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::constant(3, 2, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    REQUIRE(c.values() == std::vector<double>{58, 64, 139, 154});
    // a * a^T via matmul_nt
    Tensor g = matmul_nt(a, a);
    REQUIRE(g.values() == std::vector<double>{14, 32, 32, 77});
}

TEST_CASE("softmax of uniform logits is uniform") {
    Tensor a = Tensor::constant(2, 4, std::vector<double>(8, 1.7));
    Tensor y = softmax_rows(a);
    for (double v : y.values()) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("shape mismatch raises") {
    Tensor a = Tensor::constant(1, 3, {1, 2, 3});
    Tensor b = Tensor::constant(1, 2, {1, 2});
    REQUIRE_THROWS_AS(add(a, b), ShapeMismatch);
    REQUIRE_THROWS_AS(matmul(a, b), ShapeMismatch);
    REQUIRE_THROWS_AS(backward(a), NonScalarLoss);
}

TEST_CASE("loss = sum(w^2) has gradient 2w") {
    auto storage = random_storage(6, 5);
    Tensor w = Tensor::leaf(storage, 2, 3, true);
    Tensor loss = sum(mul(w, w));
    backward(loss);
    for (size_t i = 0; i < 6; ++i)
        REQUIRE(w.grad()[i] == Catch::Approx(2.0 * (*storage)[i]).margin(1e-12));
}

TEST_CASE("constant loss has zero gradients") {
    auto storage = random_storage(4, 6);
    Tensor w = Tensor::leaf(storage, 1, 4, true);
    Tensor loss = scale(sum(w), 0.0);
    backward(loss);
    for (double g : w.grad()) REQUIRE(g == 0.0);
}

TEST_CASE("repeated use of one leaf accumulates gradient") {
    auto storage = std::make_shared<std::vector<double>>(std::vector<double>{3.0});
    Tensor w = Tensor::leaf(storage, 1, 1, true);
    Tensor loss = add(mul(w, w), w);  // w^2 + w -> d/dw = 2w + 1
    backward(loss);
    REQUIRE(w.grad()[0] == Catch::Approx(7.0));
}

TEST_CASE("gradcheck: every elementwise and matrix op") {
    auto a = random_storage(12, 11);
    auto b = random_storage(12, 12);
    auto c = random_storage(20, 13);

    auto run = [&](auto builder, std::vector<LeafSpec> specs) {
        auto res = gradcheck::check(builder, specs);
        CAPTURE(res.max_rel_err, res.checked);
        REQUIRE(res.ok);
    };

    run([](std::vector<Tensor>& l) { return sum(mul(add(l[0], l[1]), sub(l[0], l[1]))); },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) { return mean_all(axpy(l[0], -1.7, l[1])); },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) { return sum(matmul(l[0], l[1])); }, {{a, 3, 4}, {c, 4, 5}});
    run([](std::vector<Tensor>& l) { return sum(matmul_nt(l[0], l[1])); }, {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) { return sum(gelu(l[0])); }, {{a, 3, 4}});
    run([](std::vector<Tensor>& l) { return sum(mul(relu(l[0]), l[0])); }, {{a, 3, 4}});
    run([](std::vector<Tensor>& l) { return sum(mul(softmax_rows(l[0]), l[1])); },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) { return mse(l[0], l[1]); }, {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) { return cosine_similarity_t(l[0], l[1]); },
        {{a, 1, 12}, {b, 1, 12}});
    run([](std::vector<Tensor>& l) { return cross_entropy_logits(mean_rows(l[0]), 2); },
        {{a, 3, 4}});
    run([](std::vector<Tensor>& l) {
            return sum(mul(row_slice(l[0], 1, 3), row_slice(l[1], 0, 2)));
        },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) {
            return sum(mul(col_slice(l[0], 1, 3), col_slice(l[1], 0, 2)));
        },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) {
            return sum(mul(row_concat({l[0], l[1]}), row_concat({l[1], l[0]})));
        },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) {
            return sum(mul(col_concat({l[0], l[1]}), col_concat({l[1], l[0]})));
        },
        {{a, 3, 4}, {b, 3, 4}});
    run([](std::vector<Tensor>& l) { return sum(mul(im2col_rows(l[0], 2), im2col_rows(l[1], 2))); },
        {{a, 4, 3}, {b, 4, 3}});
    auto bias = random_storage(4, 14);
    run([](std::vector<Tensor>& l) { return sum(mul(add_row_broadcast(l[0], l[1]), l[0])); },
        {{a, 3, 4}, {bias, 1, 4}});
}

TEST_CASE("cosine similarity at the clamped denominator") {
    auto a = std::make_shared<std::vector<double>>(std::vector<double>(4, 0.0));
    auto b = random_storage(4, 21);
    Tensor ta = Tensor::leaf(a, 1, 4, false);
    Tensor tb = Tensor::leaf(b, 1, 4, false);
    // zero vector: denominator clamps to delta, cosine = 0
    REQUIRE(cosine_similarity_t(ta, tb).scalar_value() == 0.0);
}

TEST_CASE("stop_gradient cuts the graph") {
    auto a = random_storage(4, 31);
    Tensor w = Tensor::leaf(a, 1, 4, true);
    Tensor loss = sum(mul(stop_gradient(w), w));
    backward(loss);
    for (size_t i = 0; i < 4; ++i) REQUIRE(w.grad()[i] == Catch::Approx((*a)[i]));
}

TEST_CASE("layer_norm zero-centers rows and gradchecks") {
    auto x = random_storage(8, 41);
    auto g = random_storage(4, 42, 0.5);
    auto b = random_storage(4, 43, 0.5);
    auto res = gradcheck::check(
        [](std::vector<Tensor>& l) { return sum(mul(layer_norm_rows(l[0], l[1], l[2]), l[0])); },
        {{x, 2, 4}, {g, 1, 4}, {b, 1, 4}});
    CAPTURE(res.max_rel_err);
    REQUIRE(res.ok);

    Tensor ones = Tensor::constant(1, 4, {1, 1, 1, 1});
    Tensor zeros = Tensor::constant(1, 4, {0, 0, 0, 0});
    Tensor xt = Tensor::leaf(x, 2, 4, false);
    Tensor y = layer_norm_rows(xt, ones, zeros);
    for (size_t r = 0; r < 2; ++r) {
        double mean = 0;
        for (size_t c = 0; c < 4; ++c) mean += y.values()[r * 4 + c];
        REQUIRE(mean / 4.0 == Catch::Approx(0.0).margin(1e-12));
    }
}
