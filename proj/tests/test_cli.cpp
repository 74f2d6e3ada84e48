#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pinncert/experiment.hpp"

using namespace pinncert;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("pinncert_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PINNCERT_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("presets") {
    const auto d = preset_config("decay1d");
    CHECK(d.hidden == std::vector<std::size_t>{4, 4});
    CHECK(d.collocation == 200);
    CHECK(d.epochs == 5000);
    CHECK(d.optimizer == "adam");
    CHECK(d.under_weight == 1000.0);

    const auto full = preset_config("pendulum");
    CHECK(full.hidden == std::vector<std::size_t>(4, 32));
    CHECK(full.collocation == 10000);
    CHECK(full.epochs == 100000);
    CHECK(full.optimizer == "lbfgs");
    CHECK(full.data_records == 50);
    CHECK(full.under_weight == 1.0);

    const auto desk = preset_config("pendulum", true);
    CHECK(desk.hidden == full.hidden);
    CHECK(desk.epochs < full.epochs);
    CHECK(desk.certified_intervals == 5);
    CHECK_THROWS_AS(preset_config("lorenz"), ConfigError);
}

TEST_CASE("configuration round trip") {
    auto c = preset_config("pendulum", true);
    c.seed = 17;
    c.mu = 0.25;
    c.subintervals = 40;
    c.out = "somewhere";
    std::stringstream text;
    write_config(text, c);
    const auto back = parse_config(text);
    std::stringstream again;
    write_config(again, back);
    CHECK(again.str() == text.str());
    CHECK(back.seed == 17);
    CHECK(back.mu == 0.25);
    CHECK(back.subintervals == std::optional<std::size_t>(40));
}

TEST_CASE("configuration errors") {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return parse_config(in);
    };
    CHECK(parse("[train]\nepochs = 10\n").epochs == 10);
    CHECK(parse("[experiment]\npreset = pendulum\n").collocation == 10000);
    CHECK_THROWS_AS(parse("[train]\nepocs = 10\n"), ConfigError);
    CHECK_THROWS_AS(parse("[training]\nepochs = 10\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nepochs = ten\n"), ConfigError);
    CHECK_THROWS_AS(parse("[train]\nlearning_rate = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[certify]\neps = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[network]\nactivation = relu\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\npreset = lorenz\n"), ConfigError);
    CHECK_THROWS_AS(parse("[surrogate]\nunder_weight = 0.5\n"), ConfigError);
}

TEST_CASE("pendulum schedule") {
    const auto p = inverted_pendulum();
    const std::vector<double> start{0.3, 0.0, 0.0, 0.0};
    const auto s = pendulum_schedule(p, start, 50, 4.0);
    REQUIRE(s.size() == 50);
    CHECK(s[0].x0 == start);
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK(s[k].t_start == doctest::Approx(0.08 * static_cast<double>(k)));
        CHECK(s[k].duration == doctest::Approx(0.08));
        CHECK(std::abs(s[k].u[0]) <= 15.0);
        for (std::size_t i = 0; i < 4; ++i) CHECK(p.state_box[i].contains(s[k].x0[i]));
    }
    // Interval k + 1 starts where the reference trajectory of interval k ends.
    const double grid[] = {0.0, 0.08};
    const auto traj = solve_reference(p, s[3].x0, s[3].u, grid, Integrator::rk4, 1e-4);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(traj.states(1, i) == s[4].x0[static_cast<std::size_t>(i)]);
    // Stabilising: the angle decays.
    CHECK(std::abs(s.back().x0[0]) < 0.1 * std::abs(start[0]));

    const auto path = fs::temp_directory_path() / "pinncert_schedule.csv";
    {
        std::ofstream f(path);
        write_schedule_csv(f, s);
    }
    const auto back = read_schedule_csv(path, p, 0.08);
    REQUIRE(back.size() == 50);
    CHECK(back[7].x0 == s[7].x0);
    CHECK(back[7].u == s[7].u);
    fs::remove(path);
}

TEST_CASE("compare summaries") {
    const auto dir = scratch("compare");
    write_file(dir / "certs.csv", "t,e_init,i_hat,e_int,total,actual_error,note\n0,0,0,0,0.5,0.25,\n1,0,0,0,1,0.1,\n");
    write_file(dir / "nn.csv", "t,e_nn\n0,0.6\n1,0.9\n");
    std::ostringstream log;
    const auto s = cmd_compare(dir / "certs.csv", dir / "nn.csv", log);
    CHECK(s.rows == 2);
    CHECK(s.rigor_violations == 0);
    CHECK(s.max_overestimation == doctest::Approx(10.0));
    CHECK(s.mean_overestimation == doctest::Approx(6.0));
    CHECK(s.final_overestimation == doctest::Approx(10.0));
    CHECK(s.surrogate_overestimation == doctest::Approx(0.5));

    write_file(dir / "bad.csv", "t,e_init,i_hat,e_int,total,actual_error,note\n0,0,0,0,0.1,0.25,\n");
    write_file(dir / "nn1.csv", "t,e_nn\n0,0.6\n");
    CHECK(cmd_compare(dir / "bad.csv", dir / "nn1.csv", log).rigor_violations == 1);

    write_file(dir / "shift.csv", "t,e_nn\n0,0.6\n1.5,0.9\n");
    CHECK_THROWS_AS(cmd_compare(dir / "certs.csv", dir / "shift.csv", log), ConfigError);
    CHECK_THROWS_AS(cmd_compare(dir / "certs.csv", dir / "nn1.csv", log), ConfigError);
    write_file(dir / "empty.csv", "t,e_init,i_hat,e_int,total,note\n");
    CHECK_THROWS_AS(cmd_compare(dir / "empty.csv", dir / "nn.csv", log), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("failure reporting maps to exit codes") {
    std::ostringstream err;
    CHECK(report_failure(ConfigError("x"), err) == 2);
    CHECK(report_failure(ShapeError("x"), err) == 2);
    CHECK(report_failure(DivergenceError("x", 1.0), err) == 3);
}

TEST_CASE("command line: decay workflow") {
    const auto dir = scratch("decay") / "nested" / "out";
    write_file(dir.parent_path() / "quick.ini", "[train]\nepochs = 200\n[surrogate]\nepochs = 100\n");
    const std::string common = "--config " + (dir.parent_path() / "quick.ini").string() + " --out " + dir.string();
    REQUIRE(run_cli("train " + common) == 0);
    CHECK(fs::exists(dir / "network.json"));
    CHECK(fs::exists(dir / "loss.csv"));
    CHECK(fs::exists(dir / "config.ini"));
    CHECK(slurp(dir / "loss.csv").rfind("epoch,loss_total,loss_data,loss_phys\n", 0) == 0);

    REQUIRE(run_cli("certify --with-reference " + common) == 0);
    const std::string certs = slurp(dir / "certificates.csv");
    CHECK(certs.rfind("t,e_init,i_hat,e_int,total,actual_error,note\n", 0) == 0);
    CHECK(std::count(certs.begin(), certs.end(), '\n') == 102);
    CHECK(fs::exists(dir / "certificates.meta.json"));

    REQUIRE(run_cli("surrogate " + common) == 0);
    CHECK(fs::exists(dir / "error_net.json"));
    CHECK(slurp(dir / "surrogate_heldout.csv").rfind("t,x0_1,e_certified,e_nn\n", 0) == 0);
    const std::string first_grid = slurp(dir / "surrogate_grid.csv");

    // Reusing the saved data set reproduces the indicator.
    const auto saved = dir.parent_path() / "data.csv";
    fs::copy_file(dir / "surrogate_data.csv", saved);
    REQUIRE(run_cli("surrogate --data " + saved.string() + " " + common) == 0);
    CHECK(slurp(dir / "surrogate_grid.csv") == first_grid);

    CHECK(run_cli("compare " + (dir / "certificates.csv").string() + " " + (dir / "surrogate_grid.csv").string()) ==
          0);
    CHECK(run_cli("compare " + (dir / "certificates.csv").string() + " " + (dir / "loss.csv").string()) == 2);
    fs::remove_all(dir.parent_path().parent_path());
}

TEST_CASE("command line: validation failures exit with 2") {
    const auto dir = scratch("invalid");
    write_file(dir / "bad.ini", "[train]\nepochs = many\n");
    CHECK(run_cli("train --config " + (dir / "bad.ini").string() + " --out " + dir.string()) == 2);
    CHECK(run_cli("train --preset lorenz --out " + dir.string()) == 2);
    CHECK(run_cli("certify --out " + (dir / "nothing").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);

    // A schedule with the wrong number of intervals.
    write_file(dir / "p.ini", "[experiment]\npreset = pendulum\ndesk_scale = true\n[train]\nepochs = 1\ncollocation = 4\n");
    const std::string common = "--config " + (dir / "p.ini").string() + " --out " + dir.string();
    REQUIRE(run_cli("train " + common) == 0);
    write_file(dir / "short.csv", "k,t_start,u,x0_1,x0_2,x0_3,x0_4\n0,0,1,0.1,0,0,0\n1,0.08,1,0.1,0,0,0\n");
    CHECK(run_cli("certify --schedule " + (dir / "short.csv").string() + " " + common) == 2);
    fs::remove_all(dir);
}
