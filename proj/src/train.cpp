#include "pinncert/train.hpp"

#include <algorithm>
#include <ostream>
#include <random>

#include "pinncert/certify.hpp"
#include "pinncert/csv.hpp"

namespace pinncert {

namespace {

double draw(std::mt19937_64& rng, const Interval& box) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    return box.lo + (box.hi - box.lo) * u;
}

void check_box(const std::vector<Interval>& box, const char* what) {
    for (const auto& iv : box)
        if (!(iv.hi >= iv.lo)) throw ConfigError(std::string("empty ") + what + " domain interval");
}

}  // namespace

CollocationSet sample_collocation(const OdeProblem& problem, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw ConfigError("collocation count must be at least 1");
    CollocationSet set;
    set.seed = seed;
    set.time_box = problem.time_domain();
    set.state_box = problem.state_box;
    set.control_box = problem.control_box;
    if (set.state_box.size() != problem.dimension) throw ConfigError(problem.name + ": state box has wrong size");
    if (set.control_box.size() != problem.control_dim)
        throw ConfigError(problem.name + ": control box has wrong size");
    check_box({set.time_box}, "time");
    check_box(set.state_box, "state");
    check_box(set.control_box, "control");

    std::mt19937_64 rng(seed);
    set.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        CollocationPoint p;
        p.t = draw(rng, set.time_box);
        for (const auto& iv : set.state_box) p.x0.push_back(draw(rng, iv));
        for (const auto& iv : set.control_box) p.u.push_back(draw(rng, iv));
        set.points.push_back(std::move(p));
    }
    return set;
}

DataSet initial_value_records(const CollocationSet& colloc, std::size_t count) {
    DataSet data;
    const std::size_t n = std::min(count, colloc.points.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = colloc.points[i];
        data.records.push_back({0.0, p.x0, p.u, p.x0});
    }
    return data;
}

Eta Eta::constant(double weight) {
    if (!(weight >= 0.0)) throw ConfigError("eta weights must be non-negative");
    Eta eta;
    eta.table_ = {{0.0, weight}};
    return eta;
}

Eta Eta::table(std::vector<std::pair<double, double>> breakpoints) {
    if (breakpoints.empty()) throw ConfigError("eta table needs at least one breakpoint");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i].second >= 0.0)) throw ConfigError("eta weights must be non-negative");
        if (i > 0 && !(breakpoints[i].first > breakpoints[i - 1].first))
            throw ConfigError("eta breakpoints must have increasing times");
    }
    Eta eta;
    eta.table_ = std::move(breakpoints);
    return eta;
}

double Eta::operator()(double t) const {
    if (t <= table_.front().first) return table_.front().second;
    if (t >= table_.back().first) return table_.back().second;
    const auto hi = std::upper_bound(table_.begin(), table_.end(), t,
                                     [](double v, const auto& bp) { return v < bp.first; });
    const auto lo = hi - 1;
    const double w = (t - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

double loss_data(const Network& net, const OdeProblem& problem, const DataSet& data) {
    if (data.records.empty()) throw ConfigError("data set is empty");
    double sum = 0.0;
    for (const auto& z : data.records) {
        if (z.target.size() != problem.dimension) throw ShapeError("data target has the wrong dimension");
        const auto out = forward(net, network_input(problem, z.t, z.x0, z.u));
        for (std::size_t i = 0; i < out.size(); ++i) sum += (out[i] - z.target[i]) * (out[i] - z.target[i]);
    }
    return sum / static_cast<double>(data.records.size());
}

double loss_physics(const Network& net, const OdeProblem& problem, const CollocationSet& colloc, const Eta& eta) {
    if (colloc.points.empty()) throw ConfigError("collocation set is empty");
    double sum = 0.0;
    for (const auto& y : colloc.points) {
        const auto r = residual(net, problem, y.x0, y.u, y.t);
        double sq = 0.0;
        for (double v : r) sq += v * v;
        sum += eta(y.t) * sq;
    }
    return sum / static_cast<double>(colloc.points.size());
}

LossEvaluation evaluate_loss(const Network& net, const OdeProblem& problem, const DataSet& data,
                             const CollocationSet& colloc, double gamma_data, double gamma_phys, const Eta& eta) {
    LossEvaluation eval;
    eval.gradient.assign(net.parameter_count(), 0.0);

    Tape tape;
    const auto params = record_parameters(tape, net);
    const std::size_t mark = tape.size();
    auto accumulate = [&](const Var& contribution) {
        if (contribution.is_constant()) return;
        tape.backward(contribution);
        for (std::size_t i = 0; i < params.size(); ++i) eval.gradient[i] += tape.adjoint(params[i]);
    };

    if (!data.records.empty()) {
        const double scale = gamma_data / static_cast<double>(data.records.size());
        double sum = 0.0;
        for (const auto& z : data.records) {
            if (z.target.size() != problem.dimension) throw ShapeError("data target has the wrong dimension");
            tape.rewind(mark);
            const auto in = network_input(problem, z.t, z.x0, z.u);
            std::vector<Var> inputs(in.begin(), in.end());
            const auto out = forward_generic<Var, Var>(net.layer_dims(), net.activation(), std::span<const Var>(params),
                                                       std::span<const Var>(inputs));
            Var sq(0.0);
            for (std::size_t i = 0; i < out.size(); ++i) {
                const Var diff = out[i] - Var(z.target[i]);
                sq = sq + diff * diff;
            }
            sum += sq.value();
            if (scale > 0.0) accumulate(sq * Var(scale));
        }
        eval.data = sum / static_cast<double>(data.records.size());
    }

    if (!colloc.points.empty()) {
        const double scale = gamma_phys / static_cast<double>(colloc.points.size());
        double sum = 0.0;
        for (const auto& y : colloc.points) {
            tape.rewind(mark);
            const auto r = residual_recorded(params, net, problem, y.x0, y.u, y.t);
            Var sq(0.0);
            for (const auto& ri : r) sq = sq + ri * ri;
            const double weight = eta(y.t);
            sum += weight * sq.value();
            if (scale * weight > 0.0) accumulate(sq * Var(scale * weight));
        }
        eval.physics = sum / static_cast<double>(colloc.points.size());
    }

    eval.total = gamma_data * eval.data + gamma_phys * eval.physics;
    return eval;
}

TrainResult train(Network net, const OdeProblem& problem, const DataSet& data, const CollocationSet& colloc,
                  TrainingRun& run) {
    if (run.gamma_data < 0.0 || run.gamma_phys < 0.0) throw ConfigError("loss weights must be non-negative");
    if (!(run.gamma_data > 0.0 || run.gamma_phys > 0.0)) throw ConfigError("at least one loss weight must be positive");
    if (net.input_dim() != network_input_dim(problem) || net.output_dim() != problem.dimension)
        throw ShapeError("network shape does not match the problem's input layout");
    if (data.records.empty() && colloc.points.empty()) throw ConfigError("nothing to train on");

    LossEvaluation last;
    Objective objective = [&](std::span<const double> params, std::span<double> grad) {
        std::copy(params.begin(), params.end(), net.parameters().begin());
        last = evaluate_loss(net, problem, data, colloc, run.gamma_data, run.gamma_phys, run.eta);
        std::copy(last.gradient.begin(), last.gradient.end(), grad.begin());
        return last.total;
    };

    std::vector<double> params(net.parameters().begin(), net.parameters().end());
    const std::size_t first_epoch = run.loss_history.size();
    minimize(params, objective, run.optimizer, run.epochs, [&](std::size_t epoch, double total) {
        run.loss_history.push_back({first_epoch + epoch, total, last.data, last.physics});
    });
    std::copy(params.begin(), params.end(), net.parameters().begin());

    const auto final_eval = evaluate_loss(net, problem, data, colloc, run.gamma_data, run.gamma_phys, run.eta);
    TrainResult result{std::move(net), {first_epoch + run.epochs, final_eval.total, final_eval.data, final_eval.physics}};
    return result;
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history) {
    out << "epoch,loss_total,loss_data,loss_phys\n";
    for (const auto& r : history)
        out << r.epoch << ',' << csv::real(r.total) << ',' << csv::real(r.data) << ',' << csv::real(r.physics) << '\n';
}

}  // namespace pinncert
