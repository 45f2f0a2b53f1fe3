#include "doctest.h"

#include <cmath>

#include "surimi/csv.hpp"
#include "testutil.hpp"

using namespace testutil;

TEST_CASE("scalar activations") {
    CHECK(activate(Activation::leaky_relu, -2.0, 5.0) == doctest::Approx(-0.4));
    CHECK(activate(Activation::leaky_relu, 3.0, 5.0) == 3.0);
    CHECK(activate(Activation::relu, -1.5) == 0.0);
    CHECK(activate(Activation::relu, 2.5) == 2.5);
    CHECK(activate(Activation::elu, 1.0) == 1.0);
    CHECK(activate(Activation::elu, -1.0) ==
          doctest::Approx(std::expm1(-1.0)));
    CHECK(activate(Activation::sigmoid, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("conv1d with unit kernel is the identity on its channel") {
    auto spec = NetworkSpec::sequential(
        {5, 1}, {LayerSpec::conv1d(1, 1, Activation::linear)});
    Network net = Network::build(spec, 1);
    std::vector<double> w = {1.0, 0.0};  // weight 1, bias 0
    net.set_flat_params(w);
    Rng rng(3);
    Tensor x = random_tensor({2, 5, 1}, rng);
    const Tensor y = net.forward(x);
    REQUIRE(y.shape == Shape{2, 5, 1});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == x.data[i]);
}

TEST_CASE("softmax on equal logits is uniform and rows sum to one") {
    auto spec = NetworkSpec::sequential(
        {3}, {LayerSpec::dense(4, Activation::softmax)});
    Network net = Network::build(spec, 5);
    // zero weights/bias -> equal logits
    std::vector<double> zeros(net.param_count(), 0.0);
    net.set_flat_params(zeros);
    Rng rng(7);
    const Tensor y = net.forward(random_tensor({3, 3}, rng));
    for (int b = 0; b < 3; ++b) {
        double sum = 0.0;
        for (int c = 0; c < 4; ++c) {
            CHECK(y(b, c) == doctest::Approx(0.25).epsilon(1e-12));
            sum += y(b, c);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("softmax rows sum to one on random logits") {
    auto spec = NetworkSpec::sequential(
        {6}, {LayerSpec::dense(5, Activation::softmax)});
    Network net = Network::build(spec, 11);
    Rng rng(13);
    const Tensor y = net.forward(random_tensor({8, 6}, rng, 3.0));
    for (int b = 0; b < 8; ++b) {
        double sum = 0.0;
        for (int c = 0; c < 5; ++c) sum += y(b, c);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("dropout statistics and inference identity") {
    const double rate = 0.3;
    auto spec = NetworkSpec::sequential({10000}, {LayerSpec::dropout(rate)});
    Network net = Network::build(spec, 17);
    Tensor x({1, 10000});
    x.fill(1.0);

    Rng drop_rng(99);
    const Tensor y = net.forward(x, true, &drop_rng);
    std::size_t zeroed = 0;
    for (double v : y.data) {
        if (v == 0.0)
            ++zeroed;
        else
            CHECK(v == doctest::Approx(1.0 / (1.0 - rate)).epsilon(1e-12));
    }
    // binomial: std ~ 45.8 at n=1e4, allow ~4 sigma
    CHECK(std::abs(static_cast<double>(zeroed) / 10000.0 - rate) < 0.02);

    const Tensor yi = net.forward(x, false, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(yi.data[i] == x.data[i]);
}

TEST_CASE("max_pool1d equals brute-force per-window maximum") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const int L = 4 + static_cast<int>(rng.uniform_index(9));
        const int p = 1 + static_cast<int>(rng.uniform_index(3));
        if (L < p) continue;
        const int C = 1 + static_cast<int>(rng.uniform_index(3));
        auto spec =
            NetworkSpec::sequential({L, C}, {LayerSpec::max_pool1d(p)});
        Network net = Network::build(spec, 29);
        Tensor x = random_tensor({2, L, C}, rng);
        const Tensor y = net.forward(x);
        const int M = L / p;
        REQUIRE(y.shape == Shape{2, M, C});
        for (int b = 0; b < 2; ++b)
            for (int m = 0; m < M; ++m)
                for (int c = 0; c < C; ++c) {
                    double mx = x(b, m * p, c);
                    for (int i = m * p; i < (m + 1) * p; ++i)
                        mx = std::max(mx, x(b, i, c));
                    CHECK(y(b, m, c) == mx);
                }
    }
}

TEST_CASE("loss definitions") {
    SUBCASE("binary_ce is nonnegative, zero only at exact hits") {
        Tensor p({1, 2}, {0.7, 0.2});
        Tensor t({1, 2}, {1.0, 0.0});
        CHECK(loss_value(Loss::binary_ce, p, t) > 0.0);
        Tensor exact({1, 2}, {1.0, 0.0});
        CHECK(loss_value(Loss::binary_ce, exact, t) ==
              doctest::Approx(0.0).epsilon(1e-9));
        Rng rng(31);
        for (int i = 0; i < 50; ++i) {
            Tensor pp({1, 3}, {rng.uniform(), rng.uniform(), rng.uniform()});
            Tensor tt({1, 3},
                      {rng.uniform() < 0.5 ? 0.0 : 1.0,
                       rng.uniform() < 0.5 ? 0.0 : 1.0,
                       rng.uniform() < 0.5 ? 0.0 : 1.0});
            CHECK(loss_value(Loss::binary_ce, pp, tt) >= 0.0);
        }
    }
    SUBCASE("categorical_ce of a one-hot target picks -log of that class") {
        Tensor p({1, 3}, {0.7, 0.2, 0.1});
        Tensor t({1, 3}, {1.0, 0.0, 0.0});
        CHECK(loss_value(Loss::categorical_ce, p, t) ==
              doctest::Approx(-std::log(0.7)).epsilon(1e-12));
    }
    SUBCASE("mse averages over every element") {
        Tensor p({2, 2}, {1.0, 2.0, 3.0, 4.0});
        Tensor t({2, 2}, {0.0, 2.0, 3.0, 2.0});
        CHECK(loss_value(Loss::mse, p, t) == doctest::Approx((1.0 + 4.0) / 4.0));
    }
}

TEST_CASE("inference is pure: repeated forward passes are identical") {
    auto spec = NetworkSpec::sequential(
        {6, 1},
        {LayerSpec::conv1d(4, 1, Activation::elu), LayerSpec::max_pool1d(2),
         LayerSpec::dropout(0.5), LayerSpec::flatten(),
         LayerSpec::lstm(5, Activation::elu),
         LayerSpec::dense(3, Activation::elu)});
    Network net = Network::build(spec, 37);
    Rng rng(41);
    Tensor x = random_tensor({3, 6, 1}, rng);
    const Tensor y1 = net.forward(x);
    const Tensor y2 = net.forward(x);
    CHECK(y1.data == y2.data);
}

TEST_CASE("shape mismatch reports the failing layer") {
    auto spec = NetworkSpec::sequential(
        {4}, {LayerSpec::dense(2, Activation::linear)});
    Network net = Network::build(spec, 43);
    Tensor bad({2, 5});
    CHECK_THROWS_AS(net.forward(bad), ShapeError);
    auto conv_after_dense = NetworkSpec::sequential(
        {4}, {LayerSpec::dense(2, Activation::linear),
              LayerSpec::conv1d(1, 1, Activation::linear)});
    CHECK_THROWS_WITH_AS(static_cast<void>(Network::build(conv_after_dense, 1)),
                         doctest::Contains("layer 1"), ShapeError);
}

TEST_CASE("network save/load round-trips parameters and rejects corruption") {
    auto spec = NetworkSpec::sequential(
        {5, 1}, {LayerSpec::conv1d(3, 2, Activation::elu), LayerSpec::flatten(),
                 LayerSpec::dense(2, Activation::sigmoid)});
    Network net = Network::build(spec, 47);
    const std::string base = "/tmp/surimi_test_net";
    nlohmann::json meta;
    meta["note"] = "unit";
    net.save(base, meta);

    nlohmann::json meta2;
    Network back = Network::load(base, &meta2);
    CHECK(meta2["note"] == "unit");
    CHECK(back.flat_params() == net.flat_params());
    CHECK(back.params_checksum() == net.params_checksum());

    Rng rng(53);
    Tensor x = random_tensor({2, 5, 1}, rng);
    CHECK(net.forward(x).data == back.forward(x).data);

    // flip one byte in the blob: checksum must catch it
    auto blob = surimi::csv::read_file(base + ".bin");
    blob[3] = static_cast<char>(blob[3] ^ 0x40);
    surimi::csv::write_file(base + ".bin", blob);
    CHECK_THROWS_AS(static_cast<void>(Network::load(base)), SchemaError);
}
