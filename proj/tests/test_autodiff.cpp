#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "pinncert/network.hpp"

using namespace pinncert;

namespace {

double tanh_fn(double x) { return std::tanh(x); }

Network random_net(std::vector<std::size_t> dims, Activation act, std::uint64_t seed) {
    Network net = Network::glorot(std::move(dims), act, seed);
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& b : net.parameters()) b += 0.1 * u(rng);  // nonzero biases
    return net;
}

double scalar_loss(const Network& net, const std::vector<double>& x, double y) {
    const double d = forward(net, x)[0] - y;
    return d * d;
}

}  // namespace

TEST_CASE("dual arithmetic follows the chain rule") {
    const Dual<double> a(1.5, 2.0), b(-0.5, 3.0);
    CHECK((a * b).deriv == doctest::Approx(2.0 * -0.5 + 1.5 * 3.0));
    CHECK((a / b).deriv == doctest::Approx((2.0 * -0.5 - 1.5 * 3.0) / 0.25));
    CHECK((a + b).deriv == 5.0);
    CHECK((a - b).deriv == -1.0);
    CHECK(sin(a).deriv == doctest::Approx(std::cos(1.5) * 2.0));
    CHECK(exp(a).deriv == doctest::Approx(std::exp(1.5) * 2.0));
    CHECK(sqrt(a).deriv == doctest::Approx(0.5 / std::sqrt(1.5) * 2.0));
    CHECK((2.0 * a).deriv == 4.0);
    CHECK((a * 2.0).value == 3.0);
}

TEST_CASE("tape gradients of elementary expressions") {
    Tape tape;
    const Var x = tape.leaf(0.7);
    const Var y = tape.leaf(-1.3);
    const Var f = sin(x) * y + exp(x / y) - tanh(y) * x;
    tape.backward(f);
    const double dx = std::cos(0.7) * -1.3 + std::exp(0.7 / -1.3) / -1.3 - std::tanh(-1.3);
    const double th = std::tanh(-1.3);
    const double dy = std::sin(0.7) + std::exp(0.7 / -1.3) * (-0.7 / (1.3 * 1.3)) - (1 - th * th) * 0.7;
    CHECK(tape.adjoint(x) == doctest::Approx(dx).epsilon(1e-14));
    CHECK(tape.adjoint(y) == doctest::Approx(dy).epsilon(1e-14));
}

TEST_CASE("tape rejects constants and foreign scalars") {
    Tape a, b;
    const Var x = a.leaf(1.0);
    CHECK_THROWS_AS(a.backward(Var(3.0)), UsageError);
    CHECK_THROWS_AS(b.backward(x * 2.0), UsageError);
    CHECK_THROWS_AS((void)(x + b.leaf(1.0)), UsageError);
}

TEST_CASE("activation derivative identities") {
    for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
        const double th = std::tanh(x);
        CHECK(activate_d1(Activation::tanh, x) == doctest::Approx(1 - th * th).epsilon(1e-12));
        CHECK(activate_d2(Activation::tanh, x) == doctest::Approx(-2 * th * (1 - th * th)).epsilon(1e-12));
        const double s = 1.0 / (1.0 + std::exp(-x));
        CHECK(activate(Activation::sigmoid, x) == doctest::Approx(s).epsilon(1e-12));
        CHECK(activate_d1(Activation::sigmoid, x) == doctest::Approx(s * (1 - s)).epsilon(1e-12));
        CHECK(activate(Activation::silu, x) == doctest::Approx(x * s).epsilon(1e-12));
        CHECK(activate_d1(Activation::silu, x) == doctest::Approx(s + x * s * (1 - s)).epsilon(1e-12));
        const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        CHECK(activate(Activation::gelu, x) == doctest::Approx(x * cdf).epsilon(1e-12));
        CHECK(activate_d1(Activation::gelu, x) == doctest::Approx(cdf + x * pdf).epsilon(1e-12));
        // Second derivatives against central differences of the first.
        for (auto act : {Activation::tanh, Activation::gelu, Activation::silu, Activation::sigmoid}) {
            const double fd = oracle::central([&](double v) { return activate_d1(act, v); }, x, 1e-5);
            CHECK(activate_d2(act, x) == doctest::Approx(fd).epsilon(1e-8));
        }
    }
    CHECK(activate_d1(Activation::tanh, 0.0) == 1.0);
    CHECK(parse_activation("gelu") == Activation::gelu);
    CHECK_THROWS_AS(parse_activation("relu"), ConfigError);
}

TEST_CASE("forward pass basics") {
    Network zero({3, 5, 2}, Activation::tanh);
    const std::vector<double> in{0.3, -1.0, 2.0};
    for (double v : forward(zero, in)) CHECK(v == 0.0);

    Network id({1, 1}, Activation::tanh);
    id.weights(0)[0] = 1.0;
    CHECK(forward(id, std::vector<double>{3.0})[0] == 3.0);

    CHECK_THROWS_AS(forward(zero, std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS(Network({3}, Activation::tanh), ShapeError);
    CHECK_THROWS_AS(Network({3, 0, 1}, Activation::tanh), ShapeError);
}

TEST_CASE("forward pass matches an independent implementation") {
    const Network net = random_net({1, 4, 4, 1}, Activation::tanh, 7);
    for (double x : {0.5, -1.2, 1.9}) {
        const auto ours = forward(net, std::vector<double>{x});
        const auto ref = oracle::forward(net, {x}, tanh_fn);
        CHECK(ours[0] == doctest::Approx(ref[0]).epsilon(1e-15));
    }
    const Network wide = random_net({6, 32, 32, 4}, Activation::tanh, 8);
    const std::vector<double> in{0.05, 0.3, -2.0, 0.5, 1.0, -7.0};
    const auto a = forward(wide, in);
    const auto b = oracle::forward(wide, in, tanh_fn);
    CHECK(oracle::relative_error(a, b) < 1e-14);
}

TEST_CASE("evaluation is bit-reproducible and initialisation is seeded") {
    const Network a = Network::glorot({2, 8, 3}, Activation::silu, 42);
    const Network b = Network::glorot({2, 8, 3}, Activation::silu, 42);
    const Network c = Network::glorot({2, 8, 3}, Activation::silu, 43);
    CHECK(a == b);
    CHECK_FALSE(a.parameters()[0] == c.parameters()[0]);
    const std::vector<double> in{0.25, -0.75};
    CHECK(forward(a, in) == forward(b, in));
}

TEST_CASE("input jacobian") {
    Network affine({3, 2}, Activation::tanh);
    const double w[] = {1, 2, 3, 4, 5, 6};
    std::copy(std::begin(w), std::end(w), affine.weights(0).begin());
    const auto j = input_jacobian(affine, std::vector<double>{0.1, 0.2, 0.3});
    for (int o = 0; o < 2; ++o)
        for (int i = 0; i < 3; ++i) CHECK(j(o, i) == w[o * 3 + i]);

    Network th({1, 1, 1}, Activation::tanh);
    th.weights(0)[0] = 1.0;
    th.weights(1)[0] = 1.0;
    CHECK(input_jacobian(th, std::vector<double>{0.0})(0, 0) == 1.0);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Network net = random_net({1, 4, 4, 1}, Activation::tanh, seed);
        const double t = 0.3 + 0.2 * static_cast<double>(seed);
        const double ad = input_jacobian(net, std::vector<double>{t})(0, 0);
        const double fd = oracle::central([&](double v) { return forward(net, std::vector<double>{v})[0]; }, t, 1e-5);
        CHECK(std::abs(ad - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("parameter gradient by hand") {
    Network lin({1, 1}, Activation::tanh);
    lin.weights(0)[0] = 2.0;
    Tape tape;
    auto params = record_parameters(tape, lin);
    std::vector<Var> x{Var(1.0)};
    auto out = forward_generic<Var, Var>(lin.layer_dims(), lin.activation(), std::span<const Var>(params),
                                         std::span<const Var>(x));
    const Var loss = (out[0] - Var(0.0)) * (out[0] - Var(0.0));
    const auto g = parameter_gradient(tape, params, loss);
    CHECK(g[0] == doctest::Approx(4.0));
    CHECK(g[1] == doctest::Approx(4.0));
}

TEST_CASE("zero loss has zero gradient") {
    const Network net = random_net({1, 4, 1}, Activation::tanh, 3);
    const double target = forward(net, std::vector<double>{0.4})[0];
    Tape tape;
    auto params = record_parameters(tape, net);
    std::vector<Var> x{Var(0.4)};
    auto out = forward_generic<Var, Var>(net.layer_dims(), net.activation(), std::span<const Var>(params),
                                         std::span<const Var>(x));
    const Var d = out[0] - Var(target);
    for (double g : parameter_gradient(tape, params, d * d)) CHECK(g == 0.0);
    CHECK_THROWS_AS(parameter_gradient(tape, params, Var(1.0)), UsageError);
}

TEST_CASE("reverse gradients match finite differences on random nets") {
    for (auto act : {Activation::tanh, Activation::gelu, Activation::silu, Activation::sigmoid}) {
        const Network net = random_net({2, 5, 3, 1}, act, 11);
        const std::vector<double> x{0.3, -0.8};
        const double y = 0.25;
        Tape tape;
        auto params = record_parameters(tape, net);
        std::vector<Var> xin(x.begin(), x.end());
        auto out = forward_generic<Var, Var>(net.layer_dims(), act, std::span<const Var>(params),
                                             std::span<const Var>(xin));
        const Var d = out[0] - Var(y);
        const auto g = parameter_gradient(tape, params, d * d);
        const auto fd = oracle::fd_gradient(
            [&](const std::vector<double>& p) {
                Network m = net;
                std::copy(p.begin(), p.end(), m.parameters().begin());
                return scalar_loss(m, x, y);
            },
            std::vector<double>(net.parameters().begin(), net.parameters().end()), 1e-6);
        CHECK(oracle::relative_error(g, fd) <= 1e-6);
    }
}

TEST_CASE("forward and reverse mode agree per parameter") {
    const Network net = random_net({1, 4, 4, 1}, Activation::tanh, 5);
    REQUIRE(net.parameter_count() <= 50);
    const std::vector<double> x{0.6};
    Tape tape;
    auto params = record_parameters(tape, net);
    std::vector<Var> xin{Var(0.6)};
    auto out = forward_generic<Var, Var>(net.layer_dims(), net.activation(), std::span<const Var>(params),
                                         std::span<const Var>(xin));
    const auto rev = parameter_gradient(tape, params, out[0]);
    for (std::size_t k = 0; k < net.parameter_count(); ++k) {
        std::vector<Dual<double>> p(net.parameters().begin(), net.parameters().end());
        p[k].deriv = 1.0;
        std::vector<Dual<double>> in{Dual<double>(0.6)};
        const auto fwd = forward_generic<Dual<double>, Dual<double>>(
            net.layer_dims(), net.activation(), std::span<const Dual<double>>(p), std::span<const Dual<double>>(in));
        CHECK(std::abs(fwd[0].deriv - rev[k]) <= 1e-10);
    }
}

TEST_CASE("serialization round trip is bit exact") {
    Network net = random_net({6, 32, 32, 4}, Activation::gelu, 9);
    net.seed = 9;
    net.training_metadata = {{"epochs", 12}};
    const auto path = std::filesystem::temp_directory_path() / "pinncert_roundtrip.json";
    save_network(net, path);
    const Network back = load_network(path);
    CHECK(back == net);
    std::filesystem::remove(path);

    auto doc = to_json(net);
    doc["layer_dims"] = {6, 32, 4};
    CHECK_THROWS(network_from_json(doc));
    doc = to_json(net);
    doc["schema_version"] = 99;
    CHECK_THROWS_AS(network_from_json(doc), ConfigError);
}
