#pragma once

#include <string_view>
#include <vector>

#include "cbfw/models.hpp"

namespace cbfw {

/// One linear inequality a . u >= b.
struct QpRow {
    Vec a;
    double b = 0.0;
};

/**
 * minimize ||u - u_nom||^2  s.t.  a_i . u >= b_i,  |u_j| <= box_j.
 *
 * box entries may be +infinity, which drops that axis bound.
 */
struct QpProblem {
    Vec u_nom;
    std::vector<QpRow> rows;
    Vec box;

    int dim() const { return static_cast<int>(u_nom.size()); }
    void validate() const;
};

enum class QpStatus { Optimal, Infeasible, SolverFailure };

std::string_view to_string(QpStatus status);

/**
 * Result of a solve. Constraint indices refer to the expanded list returned by
 * expanded_constraints(): the user rows first, then for each axis j the upper
 * bound (-u_j >= -box_j) at rows.size() + 2j and the lower bound at +1.
 */
struct QpOutcome {
    QpStatus status = QpStatus::SolverFailure;
    Vec u_star;
    std::vector<int> active_set;
    /// KKT multipliers over the expanded list (optimal only): u* - u_nom = sum_i lambda_i a_i.
    Vec multipliers;
    /// Farkas certificate over the expanded list (infeasible only):
    /// y >= 0, sum_i y_i a_i = 0 and sum_i y_i b_i > 0.
    Vec certificate;
    int iterations = 0;

    bool optimal() const { return status == QpStatus::Optimal; }
};

/// User rows followed by the finite box bounds, in the indexing used by QpOutcome.
/// Infinite bounds appear with a zero normal and b = -infinity.
std::vector<QpRow> expanded_constraints(const QpProblem& p);

/// Dual active-set (Goldfarb-Idnani) solve. Deterministic.
QpOutcome solve(const QpProblem& p);

/// True iff the rows intersected with the box admit a point.
bool feasible(const QpProblem& p);

}  // namespace cbfw
