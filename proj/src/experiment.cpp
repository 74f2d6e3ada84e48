#include "pinncert/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "pinncert/csv.hpp"

namespace pinncert {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

double parse_real(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
        throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, text));
    return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, text));
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& text, F item) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(item(key, part));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& text) {
    auto v = parse_list<std::size_t>(key, text, parse_count);
    for (auto n : v)
        if (n == 0) throw ConfigError(key + ": layer widths must be positive");
    return v;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>)
            s += csv::real(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

template <class T>
std::string auto_or(const std::optional<T>& v) {
    if (!v) return "auto";
    if constexpr (std::is_floating_point_v<T>)
        return csv::real(*v);
    else
        return std::to_string(*v);
}

void validate(const ExperimentConfig& c) {
    if (c.preset != "decay1d" && c.preset != "pendulum")
        throw ConfigError("unknown preset '" + c.preset + "' (expected decay1d or pendulum)");
    if (c.collocation == 0) throw ConfigError("train.collocation must be at least 1");
    if (c.optimizer != "adam" && c.optimizer != "lbfgs")
        throw ConfigError("train.optimizer must be adam or lbfgs");
    if (!(c.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (c.gamma_data < 0.0 || c.gamma_phys < 0.0) throw ConfigError("loss weights must be non-negative");
    if (!(c.eps > 0.0)) throw ConfigError("certify.eps must be positive");
    if (c.mu && *c.mu < 0.0) throw ConfigError("certify.mu must be non-negative");
    if (c.k_grid < 10) throw ConfigError("certify.k_grid must be at least 10");
    if (!(c.k_safety >= 1.0)) throw ConfigError("certify.k_safety must be at least 1");
    if (c.query_points < 2) throw ConfigError("certify.query_points must be at least 2");
    if (c.control_intervals == 0 || !(c.control_horizon > 0.0))
        throw ConfigError("schedule needs at least one interval and a positive horizon");
    if (c.certified_intervals > c.control_intervals)
        throw ConfigError("schedule.certified_intervals exceeds schedule.intervals");
    if (c.interval_points < 2) throw ConfigError("schedule.interval_points must be at least 2");
    if (c.surrogate_points == 0 || c.heldout_points == 0) throw ConfigError("surrogate point counts must be positive");
    if (!(c.under_weight >= 1.0)) throw ConfigError("surrogate.under_weight must be at least 1");
    if (!(c.surrogate_learning_rate > 0.0)) throw ConfigError("surrogate.learning_rate must be positive");
}

std::filesystem::path network_path(const ExperimentConfig& config, const CommandOptions& options) {
    return options.network.value_or(config.out / "network.json");
}

void prepare_out(const ExperimentConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + config.out.string() + ": " + ec.message());
    std::ofstream f(config.out / "config.ini");
    if (!f) throw ConfigError("cannot write " + (config.out / "config.ini").string());
    write_config(f, config);
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path.string());
    return f;
}

Network load_for(const std::filesystem::path& path, const OdeProblem& problem) {
    Network net = load_network(path);
    if (net.input_dim() != network_input_dim(problem) || net.output_dim() != problem.dimension)
        throw ShapeError(path.string() + " does not match the input layout of " + problem.name);
    return net;
}

bool in_box(std::span<const double> v, const std::vector<Interval>& box) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!box[i].contains(v[i])) return false;
    return true;
}

// One certificate query: time t along the trajectory entered at x0 under u.
struct Query {
    std::size_t interval = 0;
    double t_start = 0.0;
    double t = 0.0;
    std::vector<double> x0;
    std::vector<double> u;
    std::string note;
};

struct QuerySet {
    bool scheduled = false;
    std::vector<Query> queries;
};

std::vector<double> default_state(const OdeProblem& problem) {
    if (problem.fixed_initial_state) return *problem.fixed_initial_state;
    std::vector<double> x0;
    for (const auto& iv : problem.state_box) x0.push_back(0.5 * (iv.lo + iv.hi));
    return x0;
}

QuerySet build_queries(const ExperimentConfig& config, const OdeProblem& problem, const CommandOptions& options,
                       std::ostream& log) {
    QuerySet set;
    if (problem.control_dim == 0) {
        const auto x0 = default_state(problem);
        for (double t : linspace(0.0, problem.t_final, config.query_points)) set.queries.push_back({0, 0.0, t, x0, {}, ""});
        return set;
    }

    set.scheduled = true;
    const double duration = config.control_horizon / static_cast<double>(config.control_intervals);
    std::vector<ControlInterval> schedule;
    if (options.schedule) {
        schedule = read_schedule_csv(*options.schedule, problem, duration);
    } else {
        schedule = pendulum_schedule(problem, config.schedule_start, config.control_intervals, config.control_horizon);
        auto f = open_output(config.out / "schedule.csv");
        write_schedule_csv(f, schedule);
        log << "wrote " << (config.out / "schedule.csv").string() << '\n';
    }
    if (schedule.size() != config.control_intervals)
        throw ConfigError(fmt::format("control schedule has {} intervals, expected {}", schedule.size(),
                                      config.control_intervals));
    for (std::size_t k = 0; k < config.certified_intervals; ++k) {
        const auto& iv = schedule[k];
        std::string note;
        if (!in_box(iv.x0, problem.state_box) || !in_box(iv.u, problem.control_box)) note = "outside_domain";
        for (double t : linspace(0.0, iv.duration, config.interval_points)) {
            const bool in_time = problem.time_domain().contains(t);
            set.queries.push_back({k, iv.t_start, t, iv.x0, iv.u, in_time ? note : "outside_domain"});
        }
    }
    return set;
}

CertifyConfig resolved_certify_config(const ExperimentConfig& config, const Network& net, const OdeProblem& problem) {
    return prepare_certification(net, problem, training_collocation(config, problem), make_certify_config(config),
                                 config.lipschitz, config.lipschitz_seed());
}

// Reference errors per query, one reference solve per trajectory.
std::vector<double> reference_errors(const Network& net, const OdeProblem& problem, const QuerySet& set) {
    std::vector<double> out;
    std::size_t i = 0;
    while (i < set.queries.size()) {
        std::size_t j = i;
        std::vector<double> times;
        while (j < set.queries.size() && set.queries[j].interval == set.queries[i].interval &&
               set.queries[j].x0 == set.queries[i].x0 && set.queries[j].u == set.queries[i].u) {
            times.push_back(set.queries[j].t);
            ++j;
        }
        const auto err = actual_error(net, problem, set.queries[i].x0, set.queries[i].u, times);
        out.insert(out.end(), err.begin(), err.end());
        i = j;
    }
    return out;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"experiment", {"preset", "desk_scale", "seed", "out"}},
        {"network", {"hidden", "activation"}},
        {"train",
         {"collocation", "data_records", "gamma_data", "gamma_phys", "optimizer", "learning_rate", "lbfgs_memory",
          "epochs"}},
        {"certify",
         {"mode", "eps", "mu", "k_grid", "k_safety", "lipschitz", "subintervals", "max_subintervals",
          "query_points"}},
        {"schedule", {"intervals", "horizon", "certified_intervals", "interval_points", "start"}},
        {"surrogate", {"points", "heldout_points", "hidden", "under_weight", "epochs", "learning_rate"}},
    };
    return keys;
}

}  // namespace

ExperimentConfig preset_config(const std::string& name, bool desk_scale) {
    ExperimentConfig c;
    c.preset = name;
    c.desk_scale = desk_scale;
    if (name == "decay1d") return c;
    if (name != "pendulum") throw ConfigError("unknown preset '" + name + "' (expected decay1d or pendulum)");

    c.hidden = {32, 32, 32, 32};
    c.data_records = 50;
    c.under_weight = 1.0;
    c.surrogate_hidden = std::vector<std::size_t>(8, 32);
    c.surrogate_points = 1000;
    c.heldout_points = 200;
    if (desk_scale) {
        c.collocation = 500;
        c.optimizer = "adam";
        c.learning_rate = 3e-3;
        c.epochs = 3000;
        c.certified_intervals = 5;
        c.surrogate_points = 100;
        c.surrogate_hidden = {16, 16};
        c.surrogate_epochs = 2000;
        c.surrogate_learning_rate = 1e-2;
    } else {
        c.collocation = 10000;
        c.optimizer = "lbfgs";
        c.epochs = 100000;
        c.surrogate_epochs = 20000;
    }
    return c;
}

ExperimentConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("configuration key '" + section + "' must be inside a section");
        const auto known = known_keys().find(section);
        if (known == known_keys().end()) throw ConfigError("unknown configuration section [" + section + "]");
        for (const auto& [key, value] : body)
            if (!known->second.count(key)) throw ConfigError("unknown configuration key " + section + "." + key);
    }

    auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trim(*v);
        return std::nullopt;
    };

    ExperimentConfig c = preset_config(get("experiment.preset").value_or("decay1d"),
                                       get("experiment.desk_scale")
                                           ? parse_bool("experiment.desk_scale", *get("experiment.desk_scale"))
                                           : false);
    auto count = [&](const std::string& key, auto& field) {
        if (auto v = get(key)) field = static_cast<std::remove_reference_t<decltype(field)>>(parse_count(key, *v));
    };
    auto real = [&](const std::string& key, double& field) {
        if (auto v = get(key)) field = parse_real(key, *v);
    };

    count("experiment.seed", c.seed);
    if (auto v = get("experiment.out")) c.out = *v;
    if (auto v = get("network.hidden")) c.hidden = parse_sizes("network.hidden", *v);
    if (auto v = get("network.activation")) c.activation = parse_activation(*v);

    count("train.collocation", c.collocation);
    count("train.data_records", c.data_records);
    real("train.gamma_data", c.gamma_data);
    real("train.gamma_phys", c.gamma_phys);
    if (auto v = get("train.optimizer")) c.optimizer = *v;
    real("train.learning_rate", c.learning_rate);
    count("train.lbfgs_memory", c.lbfgs_memory);
    count("train.epochs", c.epochs);

    if (auto v = get("certify.mode")) c.mode = parse_bound_mode(*v);
    real("certify.eps", c.eps);
    if (auto v = get("certify.mu")) c.mu = *v == "auto" ? std::nullopt : std::optional(parse_real("certify.mu", *v));
    count("certify.k_grid", c.k_grid);
    real("certify.k_safety", c.k_safety);
    if (auto v = get("certify.lipschitz"))
        c.lipschitz = *v == "auto" ? std::nullopt : std::optional(parse_real("certify.lipschitz", *v));
    if (auto v = get("certify.subintervals"))
        c.subintervals = *v == "auto" ? std::nullopt
                                      : std::optional<std::size_t>(parse_count("certify.subintervals", *v));
    count("certify.max_subintervals", c.max_subintervals);
    count("certify.query_points", c.query_points);

    count("schedule.intervals", c.control_intervals);
    real("schedule.horizon", c.control_horizon);
    count("schedule.certified_intervals", c.certified_intervals);
    count("schedule.interval_points", c.interval_points);
    if (auto v = get("schedule.start")) c.schedule_start = parse_list<double>("schedule.start", *v, parse_real);

    count("surrogate.points", c.surrogate_points);
    count("surrogate.heldout_points", c.heldout_points);
    if (auto v = get("surrogate.hidden")) c.surrogate_hidden = parse_sizes("surrogate.hidden", *v);
    real("surrogate.under_weight", c.under_weight);
    count("surrogate.epochs", c.surrogate_epochs);
    real("surrogate.learning_rate", c.surrogate_learning_rate);

    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open configuration " + path.string());
    return parse_config(f);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
    out << "[experiment]\n"
        << "preset = " << c.preset << '\n'
        << "desk_scale = " << (c.desk_scale ? "true" : "false") << '\n'
        << "seed = " << c.seed << '\n'
        << "out = " << c.out.string() << "\n\n"
        << "[network]\n"
        << "hidden = " << join(c.hidden) << '\n'
        << "activation = " << to_string(c.activation) << "\n\n"
        << "[train]\n"
        << "collocation = " << c.collocation << '\n'
        << "data_records = " << c.data_records << '\n'
        << "gamma_data = " << csv::real(c.gamma_data) << '\n'
        << "gamma_phys = " << csv::real(c.gamma_phys) << '\n'
        << "optimizer = " << c.optimizer << '\n'
        << "learning_rate = " << csv::real(c.learning_rate) << '\n'
        << "lbfgs_memory = " << c.lbfgs_memory << '\n'
        << "epochs = " << c.epochs << "\n\n"
        << "[certify]\n"
        << "mode = " << to_string(c.mode) << '\n'
        << "eps = " << csv::real(c.eps) << '\n'
        << "mu = " << auto_or(c.mu) << '\n'
        << "k_grid = " << c.k_grid << '\n'
        << "k_safety = " << csv::real(c.k_safety) << '\n'
        << "lipschitz = " << auto_or(c.lipschitz) << '\n'
        << "subintervals = " << auto_or(c.subintervals) << '\n'
        << "max_subintervals = " << c.max_subintervals << '\n'
        << "query_points = " << c.query_points << "\n\n"
        << "[schedule]\n"
        << "intervals = " << c.control_intervals << '\n'
        << "horizon = " << csv::real(c.control_horizon) << '\n'
        << "certified_intervals = " << c.certified_intervals << '\n'
        << "interval_points = " << c.interval_points << '\n'
        << "start = " << join(c.schedule_start) << "\n\n"
        << "[surrogate]\n"
        << "points = " << c.surrogate_points << '\n'
        << "heldout_points = " << c.heldout_points << '\n'
        << "hidden = " << join(c.surrogate_hidden) << '\n'
        << "under_weight = " << csv::real(c.under_weight) << '\n'
        << "epochs = " << c.surrogate_epochs << '\n'
        << "learning_rate = " << csv::real(c.surrogate_learning_rate) << '\n';
}

OdeProblem make_problem(const ExperimentConfig& config) {
    if (config.preset == "decay1d") return decay_1d();
    if (config.preset == "pendulum") return inverted_pendulum();
    throw ConfigError("unknown preset '" + config.preset + "'");
}

TrainingRun make_training_run(const ExperimentConfig& config) {
    TrainingRun run;
    run.gamma_data = config.gamma_data;
    run.gamma_phys = config.gamma_phys;
    run.epochs = config.epochs;
    run.seed = config.seed;
    if (config.optimizer == "adam") {
        AdamConfig adam;
        adam.learning_rate = config.learning_rate;
        run.optimizer = adam;
    } else {
        LbfgsConfig lbfgs;
        lbfgs.memory = config.lbfgs_memory;
        run.optimizer = lbfgs;
    }
    return run;
}

CertifyConfig make_certify_config(const ExperimentConfig& config) {
    CertifyConfig c;
    c.mode = config.mode;
    c.eps = config.eps;
    c.mu = config.mu ? MuPolicy::explicit_mu(*config.mu) : MuPolicy::tenth_of_mean();
    c.k.grid_points = config.k_grid;
    c.k.safety_factor = config.k_safety;
    c.subintervals = config.subintervals;
    c.max_subintervals = config.max_subintervals;
    return c;
}

ErrorNetConfig make_error_net_config(const ExperimentConfig& config) {
    ErrorNetConfig c;
    c.hidden = config.surrogate_hidden;
    c.activation = config.activation;
    AdamConfig adam;
    adam.learning_rate = config.surrogate_learning_rate;
    c.optimizer = adam;
    c.epochs = config.surrogate_epochs;
    c.under_weight = config.under_weight;
    c.seed = config.error_net_seed();
    return c;
}

CollocationSet training_collocation(const ExperimentConfig& config, const OdeProblem& problem) {
    return sample_collocation(problem, config.collocation, config.collocation_seed());
}

std::vector<ControlInterval> pendulum_schedule(const OdeProblem& problem, std::span<const double> start,
                                               std::size_t intervals, double horizon) {
    const std::size_t n = problem.dimension;
    const std::size_t m = problem.control_dim;
    if (start.size() != n) throw ConfigError("schedule start state has the wrong dimension");
    if (m == 0) throw ConfigError(problem.name + " has no control input to schedule");
    if (intervals == 0 || !(horizon > 0.0)) throw ConfigError("schedule needs intervals and a positive horizon");
    const double dt = horizon / static_cast<double>(intervals);

    // Linearisation at rest; f is affine in u, so a central difference is exact.
    const std::vector<double> origin(n, 0.0);
    std::vector<double> u0(m, 0.0);
    const Eigen::MatrixXd a = rhs_jacobian(problem, 0.0, origin, u0);
    Eigen::MatrixXd b(n, m);
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<double> up(m, 0.0), um(m, 0.0);
        up[k] = 1.0;
        um[k] = -1.0;
        const auto fp = evaluate_rhs(problem, 0.0, origin, up);
        const auto fm = evaluate_rhs(problem, 0.0, origin, um);
        for (std::size_t i = 0; i < n; ++i) b(i, k) = 0.5 * (fp[i] - fm[i]);
    }

    // Zero-order hold via the exponential of the augmented matrix.
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = a * dt;
    aug.topRightCorner(n, m) = b * dt;
    const Eigen::MatrixXd phi = aug.exp();
    const Eigen::MatrixXd ad = phi.topLeftCorner(n, n);
    const Eigen::MatrixXd bd = phi.topRightCorner(n, m);

    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
    q(0, 0) = 10.0;
    const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd p = q;
    Eigen::MatrixXd gain;
    for (int it = 0; it < 10000; ++it) {
        const Eigen::MatrixXd s = r + bd.transpose() * p * bd;
        gain = s.ldlt().solve(bd.transpose() * p * ad);
        const Eigen::MatrixXd next = q + ad.transpose() * p * (ad - bd * gain);
        const double change = (next - p).norm();
        p = next;
        if (change <= 1e-12 * p.norm()) break;
    }

    std::vector<ControlInterval> schedule;
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(start.data(), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < intervals; ++k) {
        ControlInterval iv;
        iv.t_start = static_cast<double>(k) * dt;
        iv.duration = dt;
        iv.x0.assign(x.data(), x.data() + n);
        const Eigen::VectorXd u = -gain * x;
        for (std::size_t j = 0; j < m; ++j)
            iv.u.push_back(std::clamp(u(static_cast<Eigen::Index>(j)), problem.control_box[j].lo,
                                      problem.control_box[j].hi));
        const double grid[] = {0.0, dt};
        const auto traj = solve_reference(problem, iv.x0, iv.u, grid, Integrator::rk4, 1e-4);
        x = traj.states.row(1).transpose();
        schedule.push_back(std::move(iv));
    }
    return schedule;
}

void write_schedule_csv(std::ostream& out, const std::vector<ControlInterval>& schedule) {
    out << "k,t_start";
    if (!schedule.empty()) {
        const auto& first = schedule.front();
        if (first.u.size() == 1) {
            out << ",u";
        } else {
            for (std::size_t j = 0; j < first.u.size(); ++j) out << ",u" << j + 1;
        }
        for (std::size_t i = 0; i < first.x0.size(); ++i) out << ",x0_" << i + 1;
    }
    out << '\n';
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        out << k << ',' << csv::real(schedule[k].t_start);
        for (double v : schedule[k].u) out << ',' << csv::real(v);
        for (double v : schedule[k].x0) out << ',' << csv::real(v);
        out << '\n';
    }
}

std::vector<ControlInterval> read_schedule_csv(const std::filesystem::path& path, const OdeProblem& problem,
                                               double duration) {
    const auto table = csv::read(path);
    const std::size_t expected = 2 + problem.control_dim + problem.dimension;
    if (table.header.size() != expected || table.header[0] != "k" || table.header[1] != "t_start")
        throw ConfigError(path.string() + ": expected columns k,t_start,u...,x0_1..x0_" +
                          std::to_string(problem.dimension));
    std::vector<ControlInterval> schedule;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ControlInterval iv;
        iv.t_start = table.number(r, 1);
        iv.duration = duration;
        std::size_t c = 2;
        for (std::size_t j = 0; j < problem.control_dim; ++j) iv.u.push_back(table.number(r, c++));
        for (std::size_t i = 0; i < problem.dimension; ++i) iv.x0.push_back(table.number(r, c++));
        schedule.push_back(std::move(iv));
    }
    return schedule;
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
    validate(config);
    const OdeProblem problem = make_problem(config);
    prepare_out(config);

    const CollocationSet colloc = training_collocation(config, problem);
    const DataSet data = initial_value_records(colloc, config.data_records);
    std::vector<std::size_t> dims{network_input_dim(problem)};
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(problem.dimension);
    Network net = Network::glorot(dims, config.activation, config.network_seed());

    TrainingRun run = make_training_run(config);
    const TrainResult result = train(std::move(net), problem, data, colloc, run);
    Network trained = result.network;
    trained.training_metadata = {{"problem", problem.name},
                                 {"preset", config.preset},
                                 {"desk_scale", config.desk_scale},
                                 {"optimizer", config.optimizer},
                                 {"epochs", config.epochs},
                                 {"collocation", config.collocation},
                                 {"collocation_seed", config.collocation_seed()},
                                 {"final_loss_total", result.final_loss.total},
                                 {"final_loss_data", result.final_loss.data},
                                 {"final_loss_phys", result.final_loss.physics}};
    save_network(trained, config.out / "network.json");
    auto loss = open_output(config.out / "loss.csv");
    write_loss_csv(loss, run.loss_history);

    log << fmt::format("trained {} ({} epochs, {}): loss_total {:.6g}, loss_data {:.6g}, loss_phys {:.6g}\n",
                       problem.name, config.epochs, config.optimizer, result.final_loss.total,
                       result.final_loss.data, result.final_loss.physics);
    log << "wrote " << (config.out / "network.json").string() << " and " << (config.out / "loss.csv").string()
        << '\n';
}

void cmd_certify(const ExperimentConfig& config, const CommandOptions& options, std::ostream& log) {
    validate(config);
    const OdeProblem problem = make_problem(config);
    const Network net = load_for(network_path(config, options), problem);
    prepare_out(config);

    const CertifyConfig cfg = resolved_certify_config(config, net, problem);
    const QuerySet set = build_queries(config, problem, options, log);

    std::vector<Certificate> certs;
    certs.reserve(set.queries.size());
    for (const auto& q : set.queries) certs.push_back(certify(net, problem, q.x0, q.u, q.t, cfg));
    std::vector<double> actual;
    if (options.with_reference) actual = reference_errors(net, problem, set);

    auto out = open_output(config.out / "certificates.csv");
    if (set.scheduled) {
        out << "interval,t_start,t,e_init,i_hat,e_int,total";
        if (options.with_reference) out << ",actual_error";
        out << ",note\n";
        for (std::size_t i = 0; i < certs.size(); ++i) {
            const auto& c = certs[i];
            out << set.queries[i].interval << ',' << csv::real(set.queries[i].t_start) << ','
                << csv::row({c.t, c.e_init, c.i_hat, c.e_int, c.total});
            if (options.with_reference) out << ',' << csv::real(actual[i]);
            out << ',' << set.queries[i].note << '\n';
        }
    } else {
        std::vector<std::string> notes;
        for (const auto& q : set.queries) notes.push_back(q.note);
        write_certificates_csv(out, certs, options.with_reference ? &actual : nullptr, notes);
    }

    nlohmann::json meta;
    meta["problem"] = problem.name;
    meta["network"] = network_path(config, options).string();
    meta["lipschitz"] = cfg.lipschitz;
    meta["lipschitz_source"] = config.lipschitz ? "explicit" : "collocation_estimate";
    meta["lipschitz_seed"] = config.lipschitz_seed();
    meta["mean_residual"] = cfg.mean_residual;
    meta["eps"] = cfg.eps;
    meta["k_grid_points"] = cfg.k.grid_points;
    meta["k_safety_factor"] = cfg.k.safety_factor;
    meta["constants"] = nlohmann::json::array();
    for (const auto& c : certs) meta["constants"].push_back(constants_to_json(c.constants));
    auto side = open_output(config.out / "certificates.meta.json");
    side << meta.dump(2) << '\n';

    std::size_t violations = 0;
    for (std::size_t i = 0; i < actual.size(); ++i)
        if (certs[i].total < actual[i] - 1e-12) ++violations;
    double worst = 0.0;
    for (const auto& c : certs) worst = std::max(worst, c.total);
    log << fmt::format("certified {} query times (L = {:.6g}, mean residual = {:.6g}); largest bound {:.6g}\n",
                       certs.size(), cfg.lipschitz, cfg.mean_residual, worst);
    if (options.with_reference) log << fmt::format("rigor violations against the reference: {}\n", violations);
    log << "wrote " << (config.out / "certificates.csv").string() << '\n';
}

void cmd_surrogate(const ExperimentConfig& config, const CommandOptions& options, std::ostream& log) {
    validate(config);
    const OdeProblem problem = make_problem(config);
    const Network net = load_for(network_path(config, options), problem);
    prepare_out(config);
    const CertifyConfig cfg = resolved_certify_config(config, net, problem);

    SurrogateDataset data;
    if (options.data) {
        data = read_surrogate_csv(*options.data, problem);
        data.seed = config.surrogate_seed();
        log << "reusing " << data.points.size() << " surrogate points from " << options.data->string() << '\n';
    } else {
        data = generate_surrogate_data(net, problem, config.surrogate_points, config.surrogate_seed(), cfg);
    }
    {
        auto f = open_output(config.out / "surrogate_data.csv");
        write_surrogate_csv(f, problem, data);
    }

    Network error_net = train_error_net(data, problem, make_error_net_config(config));
    save_network(error_net, config.out / "error_net.json");

    // Held-out points: a uniform time grid when the trajectory is fixed,
    // otherwise a fresh uniform sample of the domain.
    CollocationSet heldout_inputs;
    if (problem.control_dim == 0 && problem.fixed_initial_state) {
        heldout_inputs.seed = config.heldout_seed();
        for (double t : linspace(0.0, problem.t_final, config.heldout_points))
            heldout_inputs.points.push_back({t, *problem.fixed_initial_state, {}});
    } else {
        heldout_inputs = sample_collocation(problem, config.heldout_points, config.heldout_seed());
    }
    const SurrogateDataset heldout = certify_points(net, problem, heldout_inputs, cfg);
    {
        auto f = open_output(config.out / "surrogate_heldout.csv");
        write_comparison_csv(f, error_net, problem, heldout);
    }

    // E_NN on the certificate query set, for cmd_compare.
    const QuerySet set = build_queries(config, problem, options, log);
    {
        auto f = open_output(config.out / "surrogate_grid.csv");
        if (set.scheduled) f << "interval,t_start,";
        f << "t,e_nn\n";
        for (const auto& q : set.queries) {
            if (set.scheduled) f << q.interval << ',' << csv::real(q.t_start) << ',';
            f << csv::real(q.t) << ',' << csv::real(predict_error(error_net, problem, q.x0, q.u, q.t)) << '\n';
        }
    }

    log << fmt::format("error indicator trained on {} points (under_weight {:g}); held-out overestimation {:.4f}\n",
                       data.points.size(), config.under_weight, overestimation_fraction(error_net, problem, heldout));
    log << "wrote " << (config.out / "error_net.json").string() << ", surrogate_heldout.csv, surrogate_grid.csv\n";
}

ComparisonSummary cmd_compare(const std::filesystem::path& certificates, const std::filesystem::path& surrogate,
                              std::ostream& log) {
    const auto certs = csv::read(certificates);
    const auto sur = csv::read(surrogate);
    if (certs.rows.empty()) throw ConfigError(certificates.string() + " has no rows");
    if (sur.rows.empty()) throw ConfigError(surrogate.string() + " has no rows");
    if (certs.rows.size() != sur.rows.size())
        throw ConfigError(fmt::format("misaligned grids: {} certificate rows, {} surrogate rows", certs.rows.size(),
                                      sur.rows.size()));

    const std::size_t ct = certs.column("t");
    const std::size_t ctotal = certs.column("total");
    const std::size_t st = sur.column("t");
    const std::size_t snn = sur.column("e_nn");
    ComparisonSummary s;
    s.rows = certs.rows.size();
    s.has_reference = certs.has_column("actual_error");
    const std::size_t cact = s.has_reference ? certs.column("actual_error") : 0;

    std::size_t ratios = 0;
    std::size_t over = 0;
    double ratio_sum = 0.0;
    for (std::size_t r = 0; r < s.rows; ++r) {
        const double t = certs.number(r, ct);
        if (std::abs(t - sur.number(r, st)) > 1e-12 * std::max(1.0, std::abs(t)))
            throw ConfigError(fmt::format("misaligned grids at row {}: t = {} vs {}", r + 1, t, sur.number(r, st)));
        const double total = certs.number(r, ctotal);
        if (sur.number(r, snn) >= total) ++over;
        if (s.has_reference) {
            const double actual = certs.number(r, cact);
            if (total < actual - 1e-12) ++s.rigor_violations;
            if (actual > 0.0) {
                const double f = total / actual;
                s.max_overestimation = std::max(s.max_overestimation, f);
                ratio_sum += f;
                ++ratios;
                if (r + 1 == s.rows) s.final_overestimation = f;
            }
        }
    }
    s.mean_overestimation = ratios ? ratio_sum / static_cast<double>(ratios) : 0.0;
    s.surrogate_overestimation = static_cast<double>(over) / static_cast<double>(s.rows);

    log << fmt::format("rows                          {}\n", s.rows);
    if (s.has_reference) {
        log << fmt::format("rigor violations              {}\n", s.rigor_violations);
        log << fmt::format("max overestimation factor     {:.6g}\n", s.max_overestimation);
        log << fmt::format("mean overestimation factor    {:.6g}\n", s.mean_overestimation);
        log << fmt::format("overestimation at final row   {:.6g}\n", s.final_overestimation);
    } else {
        log << "no actual_error column: rerun certify with --with-reference for overestimation factors\n";
    }
    log << fmt::format("surrogate overestimation      {:.4f}\n", s.surrogate_overestimation);
    return s;
}

int report_failure(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const DivergenceError*>(&e)) return exit_divergence;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
        dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DomainError*>(&e))
        return exit_config;
    return 1;
}

}  // namespace pinncert
