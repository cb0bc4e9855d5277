#include "cbfw/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

namespace cbfw {

std::size_t DomainGrid::size() const
{
    if (axes.empty()) return 0;
    std::size_t n = 1;
    for (const auto& a : axes) {
        if (a.count <= 0) return 0;
        const auto c = static_cast<std::size_t>(a.count);
        if (n > std::numeric_limits<std::size_t>::max() / c) return std::numeric_limits<std::size_t>::max();
        n *= c;
    }
    return n;
}

State DomainGrid::point(std::size_t index) const
{
    State x(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t d = axes.size(); d-- > 0;) {
        const auto c = static_cast<std::size_t>(axes[d].count);
        x[static_cast<Eigen::Index>(d)] = axes[d].at(static_cast<int>(index % c));
        index /= c;
    }
    return x;
}

void DomainGrid::validate() const
{
    if (axes.empty()) throw ContractViolation("grid needs at least one axis");
    for (const auto& a : axes) {
        if (a.count < 2) throw ContractViolation("grid axes need count >= 2");
        if (!(a.min < a.max)) throw ContractViolation("grid axes need min < max");
    }
    if (size() > cap)
        throw GridSizeError("grid has " + std::to_string(size()) + " points, cap is " + std::to_string(cap));
}

DomainGrid default_grid(const SystemModel& model)
{
    DomainGrid g;
    switch (model.kind) {
    case SystemKind::SingleIntegrator:
        g.axes = {{0.0, 10.0, 201}, {0.0, 10.0, 201}};
        break;
    case SystemKind::DoubleIntegrator:
        g.axes = {{0.0, 10.0, 41}, {0.0, 10.0, 41}, {-5.0, 5.0, 41}, {-5.0, 5.0, 41}};
        break;
    case SystemKind::Manipulator3: {
        constexpr double pi = std::numbers::pi;
        g.axes = {{-pi, pi, 61}, {-pi, pi, 61}, {-pi, pi, 61}};
        break;
    }
    }
    return g;
}

double pointwise_margin(const SystemModel& model, const Barrier& b, const CertifyGains& gains, const State& x)
{
    const Vec& box = model.input_box;
    if (gains.gamma2) {
        const Hocbf2Data d = hocbf_terms(b, model, x);
        const double g1 = ClassKappa(gains.gamma).gamma;
        const double g2 = ClassKappa(*gains.gamma2).gamma;
        const double reach = d.LgLf_h.cwiseAbs().dot(box);
        return reach + d.Lf2_h + (g1 + g2) * d.hdot + g1 * g2 * d.h;
    }
    const ClassKappa alpha(gains.gamma);
    const LieData d = first_order_terms(b, model, x);
    return d.Lf_h + d.Lg_h.cwiseAbs().dot(box) + alpha(d.h);
}

namespace {

struct ChunkResult {
    std::size_t evaluated = 0;
    std::vector<Violation> violations;
    double min_margin = std::numeric_limits<double>::infinity();
    State worst;
};

void require_grid_matches(const SystemModel& model, const DomainGrid& grid)
{
    grid.validate();
    if (static_cast<int>(grid.axes.size()) != model.state_dim)
        throw ContractViolation("grid dimension must equal the state dimension");
}

}  // namespace

FeasibilityReport scan_domain(const SystemModel& model, const Barrier& b, const CertifyGains& gains,
                              const DomainGrid& grid, bool restrict_to_safe, int jobs)
{
    require_grid_matches(model, grid);
    require_compatible(b, model);

    const std::size_t n = grid.size();
    const std::size_t n_chunks = static_cast<std::size_t>(std::max(1, jobs));
    std::vector<ChunkResult> chunks(n_chunks);

    const auto scan = [&](std::size_t c) {
        ChunkResult& out = chunks[c];
        const std::size_t lo = n * c / n_chunks;
        const std::size_t hi = n * (c + 1) / n_chunks;
        for (std::size_t i = lo; i < hi; ++i) {
            const State x = grid.point(i);
            if (restrict_to_safe && barrier_value(b, model, x) < 0.0) continue;
            ++out.evaluated;
            const double m = pointwise_margin(model, b, gains, x);
            if (m < 0.0) out.violations.push_back({x, m});
            if (m < out.min_margin) {
                out.min_margin = m;
                out.worst = x;
            }
        }
    };
    if (n_chunks == 1) {
        scan(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t c = 0; c < n_chunks; ++c) pool.emplace_back(scan, c);
    }

    FeasibilityReport report;
    report.grid_points = n;
    report.min_margin = std::numeric_limits<double>::infinity();
    // Chunks are contiguous index ranges, merged in order; strict < keeps the
    // first worst point, same as a serial scan.
    for (auto& c : chunks) {
        report.total_points += c.evaluated;
        for (auto& v : c.violations) report.violations.push_back(std::move(v));
        if (c.min_margin < report.min_margin) {
            report.min_margin = c.min_margin;
            report.worst_state = c.worst;
        }
    }
    return report;
}

double passive_safety_margin(const SystemModel& model, const Barrier& b, const DomainGrid& grid)
{
    require_grid_matches(model, grid);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, n = grid.size(); i < n; ++i) {
        const State x = grid.point(i);
        const LieData d = first_order_terms(b, model, x);
        if (d.h >= 0.0) best = std::min(best, d.Lf_h);
    }
    return best;
}

bool in_viability_kernel(double p, double v, double u_max)
{
    if (!(u_max > 0.0)) throw ContractViolation("u_max must be positive");
    if (p < 0.0) return false;
    return v >= -std::sqrt(2.0 * u_max * p);
}

bool kernel_oracle_check(double p, double v, double u_max, double dt, double horizon)
{
    if (!(u_max > 0.0) || !(dt > 0.0)) throw ContractViolation("u_max and dt must be positive");
    if (p < 0.0) return false;
    for (double t = 0.0; t < horizon && v < 0.0; t += dt) {
        p += dt * v;
        v += dt * u_max;
        if (p < 0.0) return false;
    }
    return true;
}

nlohmann::json to_json(const FeasibilityReport& report, std::size_t violation_cap)
{
    const auto vec = [](const State& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
    nlohmann::json violations = nlohmann::json::array();
    for (std::size_t i = 0; i < report.violations.size() && i < violation_cap; ++i)
        violations.push_back({{"state", vec(report.violations[i].x)}, {"margin", report.violations[i].margin}});
    const bool any = std::isfinite(report.min_margin);
    return {{"grid_points", report.grid_points},
            {"total_points", report.total_points},
            {"violation_count", report.violations.size()},
            {"min_margin", any ? nlohmann::json(report.min_margin) : nlohmann::json(nullptr)},
            {"worst_state", any ? nlohmann::json(vec(report.worst_state)) : nlohmann::json(nullptr)},
            {"violations", violations},
            {"violations_truncated", report.violations.size() > violation_cap}};
}

}  // namespace cbfw
