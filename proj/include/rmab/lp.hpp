#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rmab {

enum class Relation { LessEq, Eq };

struct LinearRow {
    std::vector<std::pair<int, double>> coeffs;  // (variable index, coefficient)
    Relation relation = Relation::LessEq;
    double rhs = 0.0;
    std::string name;
};

/// A maximization LP over non-negative variables with named columns.
struct LinearProgram {
    std::vector<double> objective;       // maximize objective . x, x >= 0
    std::vector<std::string> var_names;
    std::unordered_map<std::string, int> var_index;
    std::vector<LinearRow> rows;

    int num_vars() const { return static_cast<int>(objective.size()); }

    int add_var(const std::string& name, double obj_coeff = 0.0) {
        int idx = num_vars();
        objective.push_back(obj_coeff);
        var_names.push_back(name);
        var_index.emplace(name, idx);
        return idx;
    }

    void add_row(LinearRow row) {
        for (const auto& [j, c] : row.coeffs) {
            (void)c;
            if (j < 0 || j >= num_vars())
                throw std::invalid_argument("LP row '" + row.name + "' references unmapped variable");
        }
        rows.push_back(std::move(row));
    }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::IterationLimit: return "iteration-limit";
    }
    return "?";
}

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
    long pivots = 0;
    double primal_residual = 0.0;  // max constraint violation at the reported point
};

/// Dense two-phase primal simplex. Pivot selection is Dantzig's rule with a
/// deterministic switch to Bland's rule once degenerate pivots pile up, so the
/// solve is cycle-free and reproducible bit-for-bit for identical input.
class SimplexSolver {
   public:
    static constexpr double kPivotTol = 1e-10;
    static constexpr double kFeasTol = 1e-9;

    explicit SimplexSolver(const LinearProgram& lp) : lp_(lp) { build_tableau(); }

    LpSolution solve() {
        LpSolution sol;
        // Phase 1: drive artificial variables to zero.
        if (num_art_ > 0) {
            load_phase1_objective();
            Outcome o = iterate();
            if (o == Outcome::IterationLimit) return finish(sol, LpStatus::IterationLimit);
            double art_sum = tab_[obj_row_ * stride_ + rhs_col_];
            if (art_sum > 1e-7 * scale_) return finish(sol, LpStatus::Infeasible);
            expel_artificials();
        }
        load_phase2_objective();
        switch (iterate()) {
            case Outcome::Optimal: return finish(sol, LpStatus::Optimal);
            case Outcome::Unbounded: return finish(sol, LpStatus::Unbounded);
            case Outcome::IterationLimit: return finish(sol, LpStatus::IterationLimit);
        }
        return sol;
    }

   private:
    enum class Outcome { Optimal, Unbounded, IterationLimit };

    const LinearProgram& lp_;
    int m_ = 0;                   // constraint rows
    int n_ = 0;                   // structural variables
    int num_slack_ = 0;
    int num_art_ = 0;
    int total_cols_ = 0;          // structural + slack + artificial
    int rhs_col_ = 0;
    int obj_row_ = 0;
    std::size_t stride_ = 0;
    double scale_ = 1.0;
    std::vector<double> tab_;     // (m_+1) x (total_cols_+1), row-major
    std::vector<int> basis_;      // basic column of each row
    std::vector<char> is_art_;
    long pivots_ = 0;
    long max_pivots_ = 0;

    double& at(int r, int c) { return tab_[static_cast<std::size_t>(r) * stride_ + c]; }

    void build_tableau() {
        m_ = static_cast<int>(lp_.rows.size());
        n_ = lp_.num_vars();
        // Count extra columns. Rows are normalized to rhs >= 0 first; a <= row
        // with negative rhs becomes >= and needs surplus + artificial.
        std::vector<int> kind(m_);  // 0: <=, 1: >=, 2: ==
        for (int r = 0; r < m_; ++r) {
            bool neg = lp_.rows[r].rhs < 0;
            if (lp_.rows[r].relation == Relation::Eq)
                kind[r] = 2;
            else
                kind[r] = neg ? 1 : 0;
            if (kind[r] != 2) num_slack_++;
            if (kind[r] != 0) num_art_++;
        }
        total_cols_ = n_ + num_slack_ + num_art_;
        rhs_col_ = total_cols_;
        obj_row_ = m_;
        stride_ = static_cast<std::size_t>(total_cols_) + 1;
        tab_.assign(static_cast<std::size_t>(m_ + 1) * stride_, 0.0);
        basis_.assign(m_, -1);
        is_art_.assign(total_cols_, 0);

        int next_slack = n_;
        int next_art = n_ + num_slack_;
        scale_ = 1.0;
        for (int r = 0; r < m_; ++r) {
            const LinearRow& row = lp_.rows[r];
            double sign = row.rhs < 0 ? -1.0 : 1.0;
            for (const auto& [j, c] : row.coeffs) at(r, j) += sign * c;
            at(r, rhs_col_) = sign * row.rhs;
            scale_ = std::max(scale_, std::abs(row.rhs));
            if (kind[r] == 0) {
                at(r, next_slack) = 1.0;
                basis_[r] = next_slack++;
            } else if (kind[r] == 1) {
                at(r, next_slack) = -1.0;
                ++next_slack;
                at(r, next_art) = 1.0;
                is_art_[next_art] = 1;
                basis_[r] = next_art++;
            } else {
                at(r, next_art) = 1.0;
                is_art_[next_art] = 1;
                basis_[r] = next_art++;
            }
        }
        max_pivots_ = 50000 + 200L * (m_ + total_cols_);
    }

    // The objective row stores reduced costs c_j - c_B B^{-1} A_j (entering
    // columns have positive entries) and, in the rhs cell, minus the current
    // objective value.
    void load_phase1_objective() {
        // Phase 1 maximizes -(sum of artificials), i.e. c = -1 on artificials.
        for (int c = 0; c <= total_cols_; ++c) at(obj_row_, c) = 0.0;
        for (int c = 0; c < total_cols_; ++c)
            if (is_art_[c]) at(obj_row_, c) = -1.0;
        for (int r = 0; r < m_; ++r) {
            if (!is_art_[basis_[r]]) continue;
            for (int c = 0; c <= total_cols_; ++c) at(obj_row_, c) += at(r, c);
        }
    }

    void load_phase2_objective() {
        for (int c = 0; c <= total_cols_; ++c) at(obj_row_, c) = 0.0;
        for (int j = 0; j < n_; ++j) at(obj_row_, j) = lp_.objective[j];
        for (int r = 0; r < m_; ++r) {
            int b = basis_[r];
            if (b < n_ && lp_.objective[b] != 0.0) {
                double coef = lp_.objective[b];
                for (int c = 0; c <= total_cols_; ++c) at(obj_row_, c) -= coef * at(r, c);
            }
        }
    }

    bool eligible(int c) const {
        // Artificial columns may never re-enter after phase 1.
        return !is_art_[c];
    }

    Outcome iterate() {
        int degenerate_run = 0;
        const int bland_after = 2 * (m_ + total_cols_) + 16;
        while (true) {
            bool bland = degenerate_run > bland_after;
            int enter = -1;
            if (bland) {
                for (int c = 0; c < total_cols_; ++c)
                    if (eligible(c) && at(obj_row_, c) > kPivotTol) { enter = c; break; }
            } else {
                double best = kPivotTol;
                for (int c = 0; c < total_cols_; ++c)
                    if (eligible(c) && at(obj_row_, c) > best) { best = at(obj_row_, c); enter = c; }
            }
            if (enter < 0) return Outcome::Optimal;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m_; ++r) {
                double a = at(r, enter);
                if (a > kPivotTol) {
                    double ratio = at(r, rhs_col_) / a;
                    if (ratio < best_ratio - 1e-12 ||
                        (ratio < best_ratio + 1e-12 && (leave < 0 || basis_[r] < basis_[leave]))) {
                        best_ratio = ratio;
                        leave = r;
                    }
                }
            }
            if (leave < 0) return Outcome::Unbounded;
            if (best_ratio < 1e-12)
                ++degenerate_run;
            else
                degenerate_run = 0;
            pivot(leave, enter);
            if (++pivots_ > max_pivots_) return Outcome::IterationLimit;
        }
    }

    void pivot(int r, int c) {
        double p = at(r, c);
        double* prow = &tab_[static_cast<std::size_t>(r) * stride_];
        double inv = 1.0 / p;
        for (int j = 0; j <= total_cols_; ++j) prow[j] *= inv;
        prow[c] = 1.0;
        for (int i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double f = at(i, c);
            if (f == 0.0) continue;
            double* irow = &tab_[static_cast<std::size_t>(i) * stride_];
            for (int j = 0; j <= total_cols_; ++j) irow[j] -= f * prow[j];
            irow[c] = 0.0;
        }
        basis_[r] = c;
    }

    void expel_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (!is_art_[basis_[r]]) continue;
            int c = -1;
            for (int j = 0; j < n_ + num_slack_; ++j)
                if (std::abs(at(r, j)) > kPivotTol) { c = j; break; }
            if (c >= 0) pivot(r, c);
            // Otherwise the row is redundant; the artificial stays basic at
            // zero and its column is never eligible to move.
        }
    }

    LpSolution finish(LpSolution& sol, LpStatus status) {
        sol.status = status;
        sol.pivots = pivots_;
        sol.x.assign(n_, 0.0);
        for (int r = 0; r < m_; ++r)
            if (basis_[r] < n_) sol.x[basis_[r]] = at(r, rhs_col_);
        for (double& v : sol.x)
            if (v < 0 && v > -kFeasTol) v = 0.0;
        sol.objective = 0.0;
        for (int j = 0; j < n_; ++j) sol.objective += lp_.objective[j] * sol.x[j];
        sol.primal_residual = 0.0;
        for (const LinearRow& row : lp_.rows) {
            double lhs = 0;
            for (const auto& [j, c] : row.coeffs) lhs += c * sol.x[j];
            double viol = row.relation == Relation::Eq ? std::abs(lhs - row.rhs)
                                                       : std::max(0.0, lhs - row.rhs);
            sol.primal_residual = std::max(sol.primal_residual, viol);
        }
        return sol;
    }
};

inline LpSolution solve_lp(const LinearProgram& lp) { return SimplexSolver(lp).solve(); }

/// Human-readable dump in a conventional LP interchange layout (for debugging;
/// the exact text is documented in the README, not a bit-critical contract).
inline std::string dump_lp(const LinearProgram& lp) {
    std::ostringstream os;
    os << "Maximize\n obj:";
    for (int j = 0; j < lp.num_vars(); ++j) {
        if (lp.objective[j] == 0.0) continue;
        os << (lp.objective[j] >= 0 ? " + " : " - ") << std::abs(lp.objective[j]) << " "
           << lp.var_names[j];
    }
    os << "\nSubject To\n";
    for (std::size_t r = 0; r < lp.rows.size(); ++r) {
        const LinearRow& row = lp.rows[r];
        os << " " << (row.name.empty() ? "c" + std::to_string(r) : row.name) << ":";
        for (const auto& [j, c] : row.coeffs)
            os << (c >= 0 ? " + " : " - ") << std::abs(c) << " " << lp.var_names[j];
        os << (row.relation == Relation::Eq ? " = " : " <= ") << row.rhs << "\n";
    }
    os << "Bounds\n";
    for (int j = 0; j < lp.num_vars(); ++j) os << " 0 <= " << lp.var_names[j] << "\n";
    os << "End\n";
    return os.str();
}

}  // namespace rmab
