#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace tnn {

/// min sum |lambda_j|  s.t.  sum_j lambda_j a_j = b,
/// where columns 0..n-1 must be the coordinate vectors e_0..e_{n-1}
/// (this makes a feasible starting basis available without a phase one).
/// Dense revised simplex on the split lambda = p - q, p, q >= 0.
class L1EqualityLp {
 public:
  explicit L1EqualityLp(Eigen::VectorXd b) : b_(std::move(b)) {
    const auto n = b_.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[i] = 1.0;
      cols_.push_back(e);
      basis_.push_back(var_id(static_cast<std::size_t>(i), b_[i] < 0.0));
    }
  }

  std::size_t rows() const { return static_cast<std::size_t>(b_.size()); }
  std::size_t columns() const { return cols_.size(); }
  const Eigen::VectorXd& column(std::size_t j) const { return cols_[j]; }

  std::size_t add_column(Eigen::VectorXd a) {
    if (a.size() != b_.size()) throw DimensionError("LP column has wrong length");
    cols_.push_back(std::move(a));
    return cols_.size() - 1;
  }

  /// Drops non-basic columns j >= rows() for which keep(j) is false.
  /// Returns the old-to-new index map (-1 for removed).
  template <class Keep>
  std::vector<long> prune(Keep keep) {
    std::vector<char> basic(cols_.size(), 0);
    for (auto v : basis_) basic[v / 2] = 1;
    std::vector<long> remap(cols_.size(), -1);
    std::vector<Eigen::VectorXd> kept;
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      if (j < rows() || basic[j] || keep(j)) {
        remap[j] = static_cast<long>(kept.size());
        kept.push_back(std::move(cols_[j]));
      }
    }
    cols_.swap(kept);
    for (auto& v : basis_) v = var_id(static_cast<std::size_t>(remap[v / 2]), v % 2 == 1);
    return remap;
  }

  struct Result {
    double value = 0.0;
    Eigen::VectorXd lambda;  // one weight per column
    Eigen::VectorXd dual;    // y with |y^T a_j| <= 1 at optimum
    long pivots = 0;
  };

  /// Warm-started from the previous basis.
  Result solve(long max_pivots = 100000) {
    const auto n = b_.size();
    Result res;
    long degenerate_run = 0;
    for (;;) {
      Eigen::MatrixXd bm(n, n);
      for (Eigen::Index i = 0; i < n; ++i) bm.col(i) = signed_column(basis_[static_cast<std::size_t>(i)]);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
      Eigen::VectorXd xb = lu.solve(b_);
      for (Eigen::Index i = 0; i < n; ++i)
        if (xb[i] < 0.0 && xb[i] > -1e-11) xb[i] = 0.0;
      const Eigen::VectorXd y = lu.transpose().solve(Eigen::VectorXd::Ones(n));

      // pricing: Dantzig, or Bland's smallest index after a degenerate run
      const bool bland = degenerate_run > 50;
      std::size_t enter = npos;
      double best_rc = -kReducedCostTol;
      std::vector<char> in_basis(2 * cols_.size(), 0);
      for (auto v : basis_) in_basis[v] = 1;
      for (std::size_t j = 0; j < cols_.size() && !(bland && enter != npos); ++j) {
        const double v = y.dot(cols_[j]);
        const double rc_pos = 1.0 - v, rc_neg = 1.0 + v;
        if (!in_basis[var_id(j, false)] && rc_pos < best_rc) {
          best_rc = bland ? -kReducedCostTol : rc_pos;
          enter = var_id(j, false);
          if (bland) break;
        }
        if (!in_basis[var_id(j, true)] && rc_neg < best_rc) {
          best_rc = bland ? -kReducedCostTol : rc_neg;
          enter = var_id(j, true);
          if (bland) break;
        }
      }
      if (enter == npos) {
        res.value = xb.sum();
        res.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols_.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto v = basis_[static_cast<std::size_t>(i)];
          res.lambda[static_cast<Eigen::Index>(v / 2)] += (v % 2 ? -1.0 : 1.0) * xb[i];
        }
        res.dual = y;
        res.pivots = pivots_;
        return res;
      }
      if (pivots_ >= max_pivots) throw ConvergenceError("simplex pivot limit reached", xb.sum());

      const Eigen::VectorXd w = lu.solve(signed_column(enter));
      Eigen::Index leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (w[i] <= 1e-12) continue;
        const double ratio = std::max(xb[i], 0.0) / w[i];
        if (ratio < best_ratio - 1e-15 ||
            (bland && std::abs(ratio - best_ratio) <= 1e-15 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          best_ratio = ratio;
          leave = i;
        }
      }
      if (leave < 0) throw ConvergenceError("simplex: unbounded direction in a bounded problem", xb.sum());
      degenerate_run = best_ratio <= 1e-14 ? degenerate_run + 1 : 0;
      basis_[static_cast<std::size_t>(leave)] = enter;
      ++pivots_;
    }
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  static constexpr double kReducedCostTol = 1e-11;

  static std::size_t var_id(std::size_t col, bool neg) { return 2 * col + (neg ? 1 : 0); }
  Eigen::VectorXd signed_column(std::size_t v) const { return v % 2 ? Eigen::VectorXd(-cols_[v / 2]) : cols_[v / 2]; }

  Eigen::VectorXd b_;
  std::vector<Eigen::VectorXd> cols_;
  std::vector<std::size_t> basis_;
  long pivots_ = 0;
};

}  // namespace tnn
