// Runs every primary acceptance check and prints one PASS/FAIL line each.
// Exit status is nonzero when any check fails.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "cbfw/bench.hpp"
#include "cbfw/certify.hpp"
#include "cbfw/qp.hpp"
#include "cbfw/rng.hpp"
#include "cli.hpp"
#include "oracles.hpp"

using namespace cbfw;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& why)
    {
        if (!ok) {
            if (!pass) detail << "; ";
            detail << why;
            pass = false;
        }
    }
};

int failures = 0;

void report(const std::string& name, const Check& c)
{
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << name;
    const std::string d = c.detail.str();
    if (!d.empty()) std::cout << "  (" << d << ")";
    std::cout << std::endl;
    failures += !c.pass;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

double pct(const json& e, const char* count)
{
    return 100.0 * e.at(count).get<double>() / e.at("trials").get<double>();
}

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

struct SweepRun {
    json table;
    bool deterministic = true;
    std::string error;
};

// Runs a table through the command line twice, with one and three workers.
SweepRun sweep(int table, const fs::path& root)
{
    SweepRun r;
    const std::string stem = "table" + std::to_string(table);
    std::map<int, fs::path> dirs;
    for (int jobs : {1, 3}) {
        dirs[jobs] = root / (stem + "_jobs" + std::to_string(jobs));
        std::ostringstream out, err;
        const int code = cli::run({"cbfw", "sweep", "--table", std::to_string(table), "--trials", "100", "--seed", "42",
                                   "--jobs", std::to_string(jobs), "--out", dirs[jobs].string()},
                                  out, err);
        if (code != cli::kExitOk) {
            r.error = "sweep exited " + std::to_string(code) + ": " + err.str();
            return r;
        }
    }
    for (const char* ext : {".csv", ".md", ".json"})
        r.deterministic = r.deterministic && slurp(dirs[1] / (stem + ext)) == slurp(dirs[3] / (stem + ext));
    r.table = json::parse(slurp(dirs[1] / (stem + ".json")));
    return r;
}

Check table_one(const SweepRun& run)
{
    Check c;
    if (!run.error.empty()) {
        c.require(false, run.error);
        return c;
    }
    c.require(run.table.at("entries").size() == 4, "expected four rows");
    for (const auto& e : run.table.at("entries")) {
        c.require(e.at("trials").get<int>() >= 100, "too few trials");
        c.require(e.at("collisions") == 0 && e.at("infeasible") == 0,
                  e.at("row").get<std::string>() + ": " + fmt(pct(e, "collisions")) + "% / " +
                      fmt(pct(e, "infeasible")) + "%");
    }
    return c;
}

Check table_two(const SweepRun& run)
{
    Check c;
    if (!run.error.empty()) {
        c.require(false, run.error);
        return c;
    }
    c.require(run.table.at("entries").size() == 5, "expected five rows");
    for (const auto& e : run.table.at("entries")) {
        const std::string row = "v_max " + e.at("row").get<std::string>();
        c.require(pct(e, "collisions") >= 70.0, row + " collision " + fmt(pct(e, "collisions")) + "% < 70%");
        c.require(e.at("infeasible") == 0, row + " infeasibility " + fmt(pct(e, "infeasible")) + "%");
    }
    return c;
}

Check table_three(const SweepRun& run)
{
    Check c;
    if (!run.error.empty()) {
        c.require(false, run.error);
        return c;
    }
    const json& rows = run.table.at("rows");
    const json& cols = run.table.at("columns");
    c.require(rows.size() == 5 && cols.size() == 5, "expected a 5x5 grid");
    std::map<std::pair<std::string, std::string>, json> cell;
    for (const auto& e : run.table.at("entries")) cell[{e.at("row"), e.at("column")}] = e;
    const auto gain = [](const json& label) { return std::stod(label.get<std::string>()); };
    const auto vmax = [](const json& label) {
        const std::string s = label.get<std::string>();
        return std::stod(s.substr(s.find('=') == std::string::npos ? 0 : s.find('=') + 1));
    };
    std::string low, high;
    for (const auto& r : rows) {
        if (gain(r) == 1.0) low = r;
        if (gain(r) == 5.0) high = r;
    }
    for (const auto& r : rows) {
        if (gain(r) > 2.0) continue;
        for (const auto& col : cols) {
            const json& e = cell.at({r, col});
            c.require(e.at("collisions") == 0 && e.at("infeasible") == 0,
                      "gamma " + r.get<std::string>() + " " + col.get<std::string>() + " not 0%/0%");
        }
    }
    for (const auto& col : cols) {
        const json& hi = cell.at({high, col});
        const json& lo = cell.at({low, col});
        if (vmax(col) >= 2.0)
            c.require(pct(hi, "collisions") >= 40.0, "gamma 5, " + col.get<std::string>() + ": collision " +
                                                         fmt(pct(hi, "collisions")) + "% < 40%");
        c.require(pct(hi, "collisions") >= pct(lo, "collisions"),
                  col.get<std::string>() + ": gamma 5 rate below gamma 1 rate");
    }
    return c;
}

Check inward_speed_at_wall()
{
    Check c;
    const auto di = SystemModel::double_integrator();
    const Barrier wall = Barrier::wall({1.0, 0.0}, 0.0);
    for (double speed : {1.0, 1e-6, 0.5, 3.0, 1e3}) {
        for (int k = -6; k <= 6; ++k) {
            const double gamma = std::pow(10.0, k);
            State x(4);
            x << 0.0, 5.0, -speed, 0.0;
            const double m = pointwise_margin(di, wall, {gamma}, x);
            c.require(m < 0.0, "margin " + fmt(m) + " at v=-" + fmt(speed) + ", gamma " + fmt(gamma));
        }
    }
    return c;
}

Check viability_kernel()
{
    Check c;
    const auto di = SystemModel::double_integrator();
    const double u_max = di.input_box[0];
    const double dt = SimConfig{}.dt;
    const double band = 2.0 * dt * u_max;
    int outside_band = 0;
    for (int i = 0; i < 200; ++i) {
        const double p = 3.0 * i / 199.0;
        for (int j = 0; j < 200; ++j) {
            const double v = -6.0 + 8.0 * j / 199.0;
            if (in_viability_kernel(p, v, u_max) == kernel_oracle_check(p, v, u_max, dt, 5.0)) continue;
            if (std::abs(v + std::sqrt(2.0 * u_max * p)) > band) ++outside_band;
        }
    }
    c.require(outside_band == 0, std::to_string(outside_band) + " disagreements outside the boundary band");

    DomainGrid g;
    g.axes = {{-1, 3, 81}, {0, 1, 2}, {-5, 2, 71}, {-1, 1, 3}};
    for (double gamma : {0.5, 1.0, 2.0, 5.0}) {
        const auto restricted =
            scan_domain(di, Barrier::viability_wall({1, 0}, 0.0, u_max), {gamma}, g, true);
        const auto plain = scan_domain(di, Barrier::wall({1, 0}, 0.0), {gamma}, g, false);
        c.require(restricted.total_points > 0 && restricted.violations.empty(),
                  "kernel domain has " + std::to_string(restricted.violations.size()) + " violations at gamma " +
                      fmt(gamma));
        c.require(!plain.violations.empty(), "unrestricted domain certified at gamma " + fmt(gamma));
    }
    return c;
}

Check passive_safety()
{
    Check c;
    int failed = 0;
    for (int i = 0; i < 1000; ++i) {
        TrialConfig cfg;
        cfg.kind = i % 2 ? SystemKind::Manipulator3 : SystemKind::SingleIntegrator;
        cfg.filter.family = (i / 2) % 2 ? FilterFamily::Naive : FilterFamily::Cbf;
        cfg.filter.bounds = default_input_bounds(cfg.filter.family);
        cfg.filter.gamma = 1.0 + (i % 5);
        cfg.nominal = NominalPolicy::Zero;
        cfg.seed = derive_seed(2024, {static_cast<std::uint64_t>(i)});
        const TrialResult r = run_trial(cfg);
        if (r.collided || r.final_state != trial_environment(cfg).start) ++failed;
    }
    c.require(failed == 0, std::to_string(failed) + " of 1000 trials moved or collided");
    return c;
}

double rel_error(const Vec& a, const Vec& b)
{
    return (a - b).norm() / std::max(1.0, b.norm());
}

Check numerical_properties()
{
    Check c;
    const auto si = SystemModel::single_integrator();
    const auto di = SystemModel::double_integrator(5.0, 2.0);
    const auto arm = SystemModel::manipulator();
    const std::vector<std::pair<Barrier, SystemModel>> pairings = {
        {Barrier::circle({4.0, 6.0}, 0.65), si},
        {Barrier::circle({4.0, 6.0}, 0.65), di},
        {Barrier::velocity_bound(2.0), di},
        {Barrier::segment(0, {6.0, 1.5}, 0.65), arm},
        {Barrier::segment(1, {4.0, 2.0}, 0.65), arm},
        {Barrier::segment(2, {5.5, 2.5}, 0.65), arm},
        {Barrier::wall({1.0, 0.5}, 2.0), di},
        {Barrier::viability_wall({1.0, 0.0}, 1.0, 5.0), di},
    };
    double worst_grad = 0.0;
    Rng rng(9001);
    for (const auto& [b, m] : pairings) {
        int checked = 0;
        while (checked < 1000) {
            State x(m.state_dim);
            for (int i = 0; i < m.state_dim; ++i)
                x[i] = m.kind == SystemKind::Manipulator3 ? rng.uniform(-std::numbers::pi, std::numbers::pi)
                       : i < 2                            ? rng.uniform(0.0, 10.0)
                                                          : rng.uniform(-4.0, 4.0);
            if (b.kind == BarrierKind::Segment) {
                // Skip the kink where the closest point leaves the segment interior.
                const auto seg = forward_kinematics(m, x)[static_cast<std::size_t>(b.link_index)];
                const Vec2 d = seg.b - seg.a;
                const double t = (b.center - seg.a).dot(d) / d.squaredNorm();
                if (std::abs(t) < 1e-4 || std::abs(t - 1.0) < 1e-4) continue;
            }
            const Vec fd = oracle::gradient([&](const State& s) { return barrier_value(b, m, s); }, x);
            worst_grad = std::max(worst_grad, rel_error(barrier_gradient(b, m, x), fd));
            ++checked;
        }
    }
    c.require(worst_grad < 1e-5, "gradient rel. error " + fmt(worst_grad));

    double worst_qp = 0.0;
    Rng qrng(9002);
    for (int i = 0; i < 10000; ++i) {
        QpProblem p;
        p.box = Vec::Zero(2);
        p.box << qrng.uniform(0.5, 1.0), qrng.uniform(0.5, 1.0);
        p.u_nom = Vec::Zero(2);
        p.u_nom << qrng.uniform(-2.0, 2.0), qrng.uniform(-2.0, 2.0);
        Vec z(2);
        z << qrng.uniform(-0.9, 0.9) * (p.box[0] - 0.05), qrng.uniform(-0.9, 0.9) * (p.box[1] - 0.05);
        const int n = static_cast<int>(qrng.uniform(0.0, 5.0));
        for (int k = 0; k < n; ++k) {
            const double th = qrng.uniform(0.0, 2.0 * std::numbers::pi);
            Vec a(2);
            a << std::cos(th), std::sin(th);
            a *= qrng.uniform(0.2, 3.0);
            p.rows.push_back({a, a.dot(z) - qrng.uniform(0.05, 0.6) * a.norm()});
        }
        const QpOutcome o = solve(p);
        const auto g = oracle::line_grid_qp(p);
        if (!o.optimal() || !g) {
            worst_qp = INFINITY;
            break;
        }
        worst_qp = std::max(worst_qp, (o.u_star - *g).lpNorm<Eigen::Infinity>());
    }
    c.require(worst_qp < 2e-3, "QP vs grid " + fmt(worst_qp));

    // Closed-form sup against brute force over the input box.
    double worst_sup = 0.0;
    Rng srng(9003);
    const auto residual = [](const SystemModel& m, const Barrier& b, double gamma, const State& x) {
        const Vec grad = oracle::gradient([&](const State& s) { return barrier_value(b, m, s); }, x);
        const double h = barrier_value(b, m, x);
        return [=](const Vec& u) { return grad.dot(oracle::vector_field(m, x, u)) + gamma * h; };
    };
    for (int i = 0; i < 200; ++i) {
        const double gamma = srng.uniform(0.1, 5.0);
        const Barrier circle = Barrier::circle({srng.uniform(0, 10), srng.uniform(0, 10)}, 0.65);
        State xs(2);
        xs << srng.uniform(0, 10), srng.uniform(0, 10);
        worst_sup = std::max(worst_sup, std::abs(pointwise_margin(si, circle, {gamma}, xs) -
                                                 oracle::grid_sup(si.input_box, 101, residual(si, circle, gamma, xs))));
        State xd(4);
        xd << srng.uniform(0, 10), srng.uniform(0, 10), srng.uniform(-3, 3), srng.uniform(-3, 3);
        const Barrier vb = Barrier::velocity_bound(2.0);
        worst_sup = std::max(worst_sup, std::abs(pointwise_margin(di, vb, {gamma}, xd) -
                                                 oracle::grid_sup(di.input_box, 101, residual(di, vb, gamma, xd))));
        const double g2 = srng.uniform(0.1, 5.0);
        const Vec2 d = xd.head<2>() - circle.center;
        const Vec2 vel = xd.tail<2>();
        const double hh = d.squaredNorm() - circle.combined_radius * circle.combined_radius;
        const auto hocbf = [&](const Vec& u) {
            return 2.0 * vel.squaredNorm() + 2.0 * d.dot(Vec2(u)) + (gamma + g2) * 2.0 * d.dot(vel) + gamma * g2 * hh;
        };
        worst_sup = std::max(worst_sup, std::abs(pointwise_margin(di, circle, {gamma, g2}, xd) -
                                                 oracle::grid_sup(di.input_box, 101, hocbf)));
    }
    for (int i = 0; i < 10; ++i) {
        const double gamma = srng.uniform(0.1, 5.0);
        const Barrier s = Barrier::segment(i % 3, {srng.uniform(0, 10), srng.uniform(0, 5)}, 0.65);
        State q(3);
        q << srng.uniform(-3, 3), srng.uniform(-3, 3), srng.uniform(-3, 3);
        worst_sup = std::max(worst_sup, std::abs(pointwise_margin(arm, s, {gamma}, q) -
                                                 oracle::grid_sup(arm.input_box, 101, residual(arm, s, gamma, q))));
    }
    c.require(worst_sup < 1e-6, "closed-form sup vs grid " + fmt(worst_sup));
    return c;
}

}  // namespace

int main()
{
    const fs::path root = fs::temp_directory_path() / ("cbfw_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);

    const SweepRun t1 = sweep(1, root);
    report("Table 1 reproduction: 0% collision and 0% infeasibility in all rows", table_one(t1));
    const SweepRun t2 = sweep(2, root);
    report("Table 2 reproduction: naive double integrator collides in >= 70%, never infeasible", table_two(t2));
    const SweepRun t3 = sweep(3, root);
    report("Table 3 reproduction: low gains safe, gamma 5 collides at speed, rate grows with gain", table_three(t3));
    report("Wall with inward speed: no admissible input for any gain", inward_speed_at_wall());
    report("Viability kernel: braking oracle agreement and feasibility on the restricted domain", viability_kernel());
    report("Passive safety: zero input keeps driftless systems at rest without collision", passive_safety());
    report("Numerical properties: gradients, QP and closed-form sup against oracles", numerical_properties());

    Check det;
    for (const auto* run : {&t1, &t2, &t3}) {
        det.require(run->error.empty(), run->error);
        det.require(run->deterministic, "table files differ between --jobs 1 and --jobs 3");
    }
    report("Determinism: identical table bytes for --jobs 1 and --jobs 3", det);

    fs::remove_all(root);
    return failures == 0 ? 0 : 1;
}
