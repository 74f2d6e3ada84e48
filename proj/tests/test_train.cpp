#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pinncert/certify.hpp"
#include "pinncert/optimizer.hpp"
#include "pinncert/train.hpp"

using namespace pinncert;

namespace {

// Network that reproduces its input state: x_hat(t, x0) = x0 for decay_1d
// variants with a state input.
OdeProblem decay_with_state() {
    OdeProblem p = decay_1d();
    p.fixed_initial_state.reset();
    p.state_box = {{0.5, 2.5}};
    return p;
}

}  // namespace

TEST_CASE("collocation sampling") {
    const auto p = decay_1d();
    const auto one = sample_collocation(p, 1, 0);
    REQUIRE(one.points.size() == 1);
    CHECK(one.points[0].x0 == std::vector<double>{2.0});

    const auto set = sample_collocation(p, 200, 17);
    CHECK(set.points.size() == 200);
    for (const auto& y : set.points) {
        CHECK(y.t >= 0.0);
        CHECK(y.t <= 2.0);
        CHECK(y.x0[0] == 2.0);
        CHECK(y.u.empty());
    }
    const auto again = sample_collocation(p, 200, 17);
    for (std::size_t i = 0; i < 200; ++i) CHECK(again.points[i].t == set.points[i].t);

    const auto pend = sample_collocation(inverted_pendulum(), 500, 2);
    for (const auto& y : pend.points) {
        CHECK(y.t <= 0.1);
        for (std::size_t i = 0; i < 4; ++i) CHECK(pend.state_box[i].contains(y.x0[i]));
        CHECK(std::abs(y.u[0]) <= 15.0);
    }

    CHECK_THROWS_AS(sample_collocation(p, 0, 1), ConfigError);
    auto empty = p;
    empty.state_box = {{1.0, 0.0}};
    CHECK_THROWS_AS(sample_collocation(empty, 3, 1), ConfigError);
}

TEST_CASE("data loss examples") {
    const auto p = inverted_pendulum();
    Network zero({6, 4}, Activation::tanh);
    DataSet data;
    data.records.push_back({0.0, {0, 0, 0, 0}, {0}, {0.3, 0.4, 0, 0}});
    CHECK(loss_data(zero, p, data) == doctest::Approx(0.25).epsilon(1e-15));
    data.records = {{0.0, {0, 0, 0, 0}, {0}, {1, 0, 0, 0}}, {0.0, {0, 0, 0, 0}, {0}, {1, 1, 1, 0}}};
    CHECK(loss_data(zero, p, data) == doctest::Approx(2.0));
    data.records = {{0.0, {0, 0, 0, 0}, {0}, {0, 0, 0, 0}}};
    CHECK(loss_data(zero, p, data) == 0.0);
    CHECK_THROWS_AS(loss_data(zero, p, DataSet{}), ConfigError);
}

TEST_CASE("physics loss examples") {
    // x_hat(t) = 2 - 4t on decay_1d: R(t) = -8t, so ||R(1/16)|| = 0.5.
    const auto p = decay_1d();
    Network line({1, 1}, Activation::tanh);
    line.weights(0)[0] = -4.0;
    line.biases(0)[0] = 2.0;
    CollocationSet colloc;
    colloc.points = {{1.0 / 16.0, {2.0}, {}}};
    CHECK(loss_physics(line, p, colloc) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(loss_physics(line, p, colloc, Eta::constant(4.0)) == doctest::Approx(1.0).epsilon(1e-14));

    // Exact solution x_hat(t, x0) = x0 for the still problem.
    auto still = make_problem("still", 1, 0, [](double, auto x, std::span<const double>) {
        using S = typename decltype(x)::value_type;
        return std::vector<S>{S(0.0) * x[0]};
    });
    still.t_final = 1.0;
    still.state_box = {{-1.0, 1.0}};
    Network pass({2, 1}, Activation::tanh);
    pass.weights(0)[1] = 1.0;
    CHECK(loss_physics(pass, still, sample_collocation(still, 20, 3)) == 0.0);
    CHECK_THROWS_AS(loss_physics(pass, still, CollocationSet{}), ConfigError);
}

TEST_CASE("physics loss is permutation invariant") {
    const auto p = decay_with_state();
    const Network net = Network::glorot({2, 6, 1}, Activation::tanh, 4);
    auto colloc = sample_collocation(p, 64, 8);
    const double before = loss_physics(net, p, colloc);
    std::mt19937_64 rng(1);
    std::shuffle(colloc.points.begin(), colloc.points.end(), rng);
    std::reverse(colloc.points.begin(), colloc.points.end());
    CHECK(std::abs(loss_physics(net, p, colloc) - before) <= 1e-15 * before);
}

TEST_CASE("eta tables") {
    const auto eta = Eta::table({{0.0, 1.0}, {1.0, 3.0}});
    CHECK(eta(-1.0) == 1.0);
    CHECK(eta(0.5) == 2.0);
    CHECK(eta(4.0) == 3.0);
    CHECK_THROWS_AS(Eta::table({{0.0, 1.0}, {0.0, 2.0}}), ConfigError);
    CHECK_THROWS_AS(Eta::constant(-1.0), ConfigError);
}

TEST_CASE("total loss gradient matches finite differences") {
    const auto p = decay_with_state();
    const Network net = Network::glorot({2, 4, 1}, Activation::tanh, 21);
    const auto colloc = sample_collocation(p, 5, 22);
    const DataSet data = initial_value_records(colloc, 2);
    const Eta eta = Eta::table({{0.0, 1.0}, {2.0, 2.0}});
    const auto eval = evaluate_loss(net, p, data, colloc, 0.7, 1.3, eta);
    CHECK(eval.total == doctest::Approx(0.7 * loss_data(net, p, data) + 1.3 * loss_physics(net, p, colloc, eta)));
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& w) {
            Network m = net;
            std::copy(w.begin(), w.end(), m.parameters().begin());
            return 0.7 * loss_data(m, p, data) + 1.3 * loss_physics(m, p, colloc, eta);
        },
        std::vector<double>(net.parameters().begin(), net.parameters().end()), 1e-6);
    CHECK(oracle::relative_error(eval.gradient, fd) <= 1e-5);
}

TEST_CASE("adam step matches the hand update") {
    // loss = 0.5 * (a (x - c)^2), gradient a (x - c).
    const double a = 3.0, c = 1.0, x0 = 4.0, lr = 0.1;
    std::vector<double> x{x0};
    Adam adam(AdamConfig{lr}, 1);
    std::vector<double> g{a * (x0 - c)};
    adam.step(x, g);
    const double m = 0.1 * g[0], v = 0.001 * g[0] * g[0];
    const double mhat = m / (1 - 0.9), vhat = v / (1 - 0.999);
    CHECK(std::abs(x[0] - (x0 - lr * mhat / (std::sqrt(vhat) + 1e-8))) <= 1e-12);
    // second step
    const double x1 = x[0];
    g[0] = a * (x1 - c);
    adam.step(x, g);
    const double m2 = 0.9 * m + 0.1 * g[0], v2 = 0.999 * v + 0.001 * g[0] * g[0];
    const double expect = x1 - lr * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
    CHECK(std::abs(x[0] - expect) <= 1e-12);
}

TEST_CASE("lbfgs minimises a quadratic") {
    std::vector<double> x{3.0, -2.0, 1.0};
    const Objective f = [](std::span<const double> p, std::span<double> g) {
        const double w[] = {1.0, 10.0, 100.0};
        double v = 0.0;
        for (int i = 0; i < 3; ++i) {
            v += 0.5 * w[i] * (p[i] - 1.0) * (p[i] - 1.0);
            g[i] = w[i] * (p[i] - 1.0);
        }
        return v;
    };
    const double final_value = minimize(x, f, LbfgsConfig{}, 100);
    CHECK(final_value <= 1e-14);
    for (double v : x) CHECK(v == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("divergence is reported") {
    std::vector<double> x{1.0};
    const Objective f = [](std::span<const double> p, std::span<double> g) {
        g[0] = 1.0;
        return p[0] < 0.95 ? std::nan("") : p[0];
    };
    CHECK_THROWS_AS(minimize(x, f, AdamConfig{0.1}, 10), DivergenceError);
}

TEST_CASE("zero epochs return the initial network") {
    const auto p = decay_1d();
    const Network net = Network::glorot({1, 4, 4, 1}, Activation::tanh, 1);
    const auto colloc = sample_collocation(p, 10, 2);
    TrainingRun run;
    run.epochs = 0;
    const auto result = train(net, p, initial_value_records(colloc, 1), colloc, run);
    CHECK(result.network.parameters()[0] == net.parameters()[0]);
    CHECK(std::equal(net.parameters().begin(), net.parameters().end(), result.network.parameters().begin()));
    CHECK(run.loss_history.empty());
}

TEST_CASE("training validation") {
    const auto p = decay_1d();
    const Network net = Network::glorot({1, 4, 1}, Activation::tanh, 1);
    const auto colloc = sample_collocation(p, 10, 2);
    TrainingRun run;
    run.epochs = 1;
    run.gamma_data = 0.0;
    run.gamma_phys = 0.0;
    CHECK_THROWS_AS(train(net, p, {}, colloc, run), ConfigError);
    run.gamma_phys = 1.0;
    CHECK_THROWS_AS(train(Network({2, 1}, Activation::tanh), p, {}, colloc, run), ShapeError);
}

TEST_CASE("data-only regression of the decay solution") {
    // Exact samples of 2 e^{-2t}, physics weight zero.
    const auto p = decay_1d();
    DataSet data;
    for (double t : linspace(0.0, 2.0, 41)) data.records.push_back({t, {2.0}, {}, {2.0 * std::exp(-2.0 * t)}});
    TrainingRun run;
    run.gamma_phys = 0.0;
    run.epochs = 5000;
    run.optimizer = AdamConfig{1e-2};
    const auto result = train(Network::glorot({1, 4, 4, 1}, Activation::tanh, 0), p, data, {}, run);
    CHECK(result.final_loss.data <= 1e-4);
    CHECK(run.loss_history.size() == 5000);
    CHECK(result.final_loss.total <= run.loss_history.front().total);
}

TEST_CASE("physics-informed training of the decay problem") {
    // Initial-value record plus residual loss.
    const auto p = decay_1d();
    const auto colloc = sample_collocation(p, 200, 1);
    TrainingRun run;
    run.epochs = 5000;
    run.optimizer = AdamConfig{1e-2};
    const auto result =
        train(Network::glorot({1, 4, 4, 1}, Activation::tanh, 0), p, initial_value_records(colloc, 1), colloc, run);
    CHECK(result.final_loss.total <= 1e-4);
    for (const auto& r : run.loss_history) CHECK(std::isfinite(r.total));
    double err = 0.0;
    for (double t : linspace(0.0, 2.0, 101))
        err = std::max(err, std::abs(predict(result.network, p, std::vector<double>{2.0}, {}, t)[0] -
                                     2.0 * std::exp(-2.0 * t)));
    CHECK(err <= 5e-2);

    std::ostringstream out;
    write_loss_csv(out, run.loss_history);
    CHECK(out.str().rfind("epoch,loss_total,loss_data,loss_phys\n0,", 0) == 0);
}
