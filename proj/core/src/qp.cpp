#include "cbfw/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbfw {

namespace {

constexpr double kViolationTol = 1e-10;  // on unit-normalized rows
constexpr double kPivotTol = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct NormalizedRow {
    Vec n;
    double b = 0.0;
    double scale = 1.0;  // original ||a||
    bool present = true;
};

}  // namespace

std::string_view to_string(QpStatus status)
{
    switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::SolverFailure: return "solver-failure";
    }
    return "unknown";
}

void QpProblem::validate() const
{
    if (u_nom.size() == 0) throw ContractViolation("QP needs at least one variable");
    if (!u_nom.allFinite()) throw ContractViolation("u_nom must be finite");
    if (box.size() != u_nom.size()) throw ContractViolation("box size must match u_nom");
    for (int j = 0; j < box.size(); ++j)
        if (!(box[j] > 0.0)) throw ContractViolation("box entries must be positive");
    for (const auto& r : rows) {
        if (r.a.size() != u_nom.size()) throw ContractViolation("row dimension mismatch");
        if (!r.a.allFinite() || !std::isfinite(r.b)) throw ContractViolation("row coefficients must be finite");
    }
}

std::vector<QpRow> expanded_constraints(const QpProblem& p)
{
    std::vector<QpRow> all = p.rows;
    const int n = p.dim();
    for (int j = 0; j < n; ++j) {
        const bool finite = std::isfinite(p.box[j]);
        QpRow upper{Vec::Zero(n), finite ? -p.box[j] : -kInf};
        QpRow lower{Vec::Zero(n), finite ? -p.box[j] : -kInf};
        if (finite) {
            upper.a[j] = -1.0;
            lower.a[j] = 1.0;
        }
        all.push_back(std::move(upper));
        all.push_back(std::move(lower));
    }
    return all;
}

QpOutcome solve(const QpProblem& p)
{
    p.validate();
    const int n = p.dim();
    const auto all = expanded_constraints(p);
    const int m = static_cast<int>(all.size());

    QpOutcome out;
    out.multipliers = Vec::Zero(m);
    out.certificate = Vec::Zero(m);

    std::vector<NormalizedRow> rows(m);
    for (int i = 0; i < m; ++i) {
        const double norm = all[i].a.norm();
        if (!std::isfinite(all[i].b)) {
            rows[i].present = false;
            continue;
        }
        if (norm < 1e-14) {
            // 0 >= b: either vacuous or a one-row contradiction.
            rows[i].present = false;
            if (all[i].b > 1e-8) {
                out.status = QpStatus::Infeasible;
                out.certificate[i] = 1.0;
                out.u_star = p.u_nom;
                return out;
            }
            continue;
        }
        rows[i].n = all[i].a / norm;
        rows[i].b = all[i].b / norm;
        rows[i].scale = norm;
    }

    Vec x = p.u_nom;
    std::vector<int> active;
    std::vector<double> lambda;
    std::vector<char> in_active(m, 0);

    const int max_iter = 50 * (m + n) + 100;
    int iter = 0;

    const auto finish_optimal = [&] {
        out.status = QpStatus::Optimal;
        out.u_star = x;
        out.active_set = active;
        std::sort(out.active_set.begin(), out.active_set.end());
        for (std::size_t k = 0; k < active.size(); ++k)
            out.multipliers[active[k]] = lambda[k] / rows[active[k]].scale;
        out.iterations = iter;
        return out;
    };

    while (true) {
        // Most violated row enters; ties go to the lowest index.
        int entering = -1;
        double worst = -kViolationTol;
        for (int i = 0; i < m; ++i) {
            if (!rows[i].present || in_active[i]) continue;
            const double s = rows[i].n.dot(x) - rows[i].b;
            if (s < worst) {
                worst = s;
                entering = i;
            }
        }
        if (entering < 0) return finish_optimal();

        const Vec& np = rows[entering].n;
        double lambda_p = 0.0;

        while (true) {
            if (++iter > max_iter) {
                out.status = QpStatus::SolverFailure;
                out.u_star = x;
                out.iterations = iter;
                return out;
            }
            const int k_act = static_cast<int>(active.size());
            Vec z = np;
            Vec r = Vec::Zero(k_act);
            if (k_act > 0) {
                Mat N(n, k_act);
                for (int k = 0; k < k_act; ++k) N.col(k) = rows[active[k]].n;
                r = N.colPivHouseholderQr().solve(np);
                z = np - N * r;
            }

            double t1 = kInf;
            int drop = -1;
            for (int k = 0; k < k_act; ++k) {
                if (r[k] <= kPivotTol) continue;
                const double ratio = lambda[k] / r[k];
                if (ratio < t1 || (ratio == t1 && active[k] < active[drop])) {
                    t1 = ratio;
                    drop = k;
                }
            }

            const double zn = z.dot(np);
            double t2 = kInf;
            if (z.norm() > kPivotTol && zn > kPivotTol)
                t2 = (rows[entering].b - np.dot(x)) / zn;

            const double t = std::min(t1, t2);
            if (!std::isfinite(t)) {
                // np lies in the cone spanned by -N: combine into a Farkas certificate.
                out.status = QpStatus::Infeasible;
                out.u_star = x;
                out.certificate[entering] = 1.0 / rows[entering].scale;
                for (int k = 0; k < k_act; ++k)
                    out.certificate[active[k]] = std::max(0.0, -r[k]) / rows[active[k]].scale;
                out.iterations = iter;
                return out;
            }

            for (int k = 0; k < k_act; ++k) lambda[k] -= t * r[k];
            lambda_p += t;

            if (std::isfinite(t2)) x += t * z;

            if (std::isfinite(t2) && t2 <= t1) {
                active.push_back(entering);
                lambda.push_back(lambda_p);
                in_active[entering] = 1;
                break;
            }
            in_active[active[drop]] = 0;
            active.erase(active.begin() + drop);
            lambda.erase(lambda.begin() + drop);
        }
    }
}

bool feasible(const QpProblem& p)
{
    return solve(p).status == QpStatus::Optimal;
}

}  // namespace cbfw
