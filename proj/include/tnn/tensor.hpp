#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace tnn {

using Shape = std::vector<std::size_t>;
using MultiIndex = std::vector<std::size_t>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::string out;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) out += "x";
    out += std::to_string(shape[k]);
  }
  return out;
}

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Dense real tensor, row-major (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), 0.0);
  }

  DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_))
      throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_string(shape_));
    for (double v : data_)
      if (!std::isfinite(v)) throw ParameterError("tensor entries must be finite");
  }

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t dim(std::size_t k) const { return shape_.at(k); }
  std::size_t size() const { return data_.size(); }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  std::size_t offset(const MultiIndex& idx) const {
    if (idx.size() != shape_.size()) throw DimensionError("multi-index has wrong order");
    std::size_t off = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
      if (idx[k] >= shape_[k]) throw IndexError("index out of range in mode " + std::to_string(k + 1));
      off = off * shape_[k] + idx[k];
    }
    return off;
  }

  MultiIndex unravel(std::size_t off) const {
    MultiIndex idx(shape_.size());
    for (std::size_t k = shape_.size(); k-- > 0;) {
      idx[k] = off % shape_[k];
      off /= shape_[k];
    }
    return idx;
  }

  double& operator()(const MultiIndex& idx) { return data_[offset(idx)]; }
  double operator()(const MultiIndex& idx) const { return data_[offset(idx)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  DenseTensor& operator+=(const DenseTensor& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  DenseTensor& operator-=(const DenseTensor& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  DenseTensor& operator*=(double c) {
    for (double& v : data_) v *= c;
    return *this;
  }

  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(DenseTensor a, double c) { return a *= c; }
  friend DenseTensor operator*(double c, DenseTensor a) { return a *= c; }
  friend DenseTensor operator-(DenseTensor a) { return a *= -1.0; }

  bool operator==(const DenseTensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  void require_same_shape(const DenseTensor& o) const {
    if (shape_ != o.shape_)
      throw DimensionError("shape mismatch: " + shape_string(shape_) + " vs " + shape_string(o.shape_));
  }

  Eigen::Map<const Vector> as_vector() const {
    return Eigen::Map<const Vector>(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }
  Eigen::Map<Vector> as_vector() { return Eigen::Map<Vector>(data_.data(), static_cast<Eigen::Index>(data_.size())); }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor order must be at least 1");
    for (auto s : shape_)
      if (s == 0) throw DimensionError("mode dimensions must be positive");
  }

  Shape shape_;
  std::vector<double> data_;
};

struct RankOneAtom {
  double weight = 0.0;
  std::vector<Vector> factors;
};

struct NuclearDecomposition {
  Shape shape;
  std::vector<RankOneAtom> atoms;

  double weight_sum() const {
    CompensatedSum s;
    for (const auto& a : atoms) s.add(std::abs(a.weight));
    return s.value();
  }
};

inline double inner(const DenseTensor& a, const DenseTensor& b) {
  a.require_same_shape(b);
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

enum class Holder { One, Two, Inf };

inline double holder_norm(const DenseTensor& t, Holder p) {
  switch (p) {
    case Holder::One: {
      CompensatedSum s;
      for (double v : t.data()) s.add(std::abs(v));
      return s.value();
    }
    case Holder::Two: {
      // scale first so tiny or huge entries do not under/overflow
      double m = 0.0;
      for (double v : t.data()) m = std::max(m, std::abs(v));
      if (m == 0.0) return 0.0;
      CompensatedSum s;
      for (double v : t.data()) s.add((v / m) * (v / m));
      return m * std::sqrt(s.value());
    }
    case Holder::Inf: {
      double m = 0.0;
      for (double v : t.data()) m = std::max(m, std::abs(v));
      return m;
    }
  }
  return 0.0;
}

inline double norm1(const DenseTensor& t) { return holder_norm(t, Holder::One); }
inline double norm2(const DenseTensor& t) { return holder_norm(t, Holder::Two); }
inline double norm_inf(const DenseTensor& t) { return holder_norm(t, Holder::Inf); }

inline DenseTensor outer_atom(const std::vector<Vector>& factors, double weight = 1.0) {
  if (factors.empty()) throw DimensionError("outer_atom needs at least one factor");
  Shape shape;
  for (const auto& f : factors) {
    if (f.size() == 0) throw DimensionError("outer_atom factors must be nonempty");
    shape.push_back(static_cast<std::size_t>(f.size()));
  }
  DenseTensor out(shape);
  // grow the product one mode at a time
  std::vector<double> acc{weight};
  for (const auto& f : factors) {
    std::vector<double> next(acc.size() * static_cast<std::size_t>(f.size()));
    std::size_t o = 0;
    for (double a : acc)
      for (Eigen::Index i = 0; i < f.size(); ++i) next[o++] = a * f[i];
    acc.swap(next);
  }
  out.data() = std::move(acc);
  return out;
}

inline DenseTensor outer_atom(const RankOneAtom& a) { return outer_atom(a.factors, a.weight); }

inline Vector basis_vector(std::size_t n, std::size_t i) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  v[static_cast<Eigen::Index>(i)] = 1.0;
  return v;
}

// Sizes of the modes before and after k.
inline std::pair<std::size_t, std::size_t> outer_inner_sizes(const Shape& shape, std::size_t k) {
  std::size_t pre = 1, post = 1;
  for (std::size_t j = 0; j < k; ++j) pre *= shape[j];
  for (std::size_t j = k + 1; j < shape.size(); ++j) post *= shape[j];
  return {pre, post};
}

inline void check_mode(const DenseTensor& t, std::size_t k) {
  if (k >= t.order())
    throw IndexError("mode " + std::to_string(k + 1) + " out of range for order " + std::to_string(t.order()));
}

/// Mode-k unfolding, k zero-based. Column (p, q) holds the fiber with
/// leading index block p and trailing block q, column = p*post + q.
inline Matrix mode_matricize(const DenseTensor& t, std::size_t k) {
  check_mode(t, k);
  const auto [pre, post] = outer_inner_sizes(t.shape(), k);
  const std::size_t n = t.dim(k);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pre * post));
  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = 0; q < post; ++q)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p * post + q)) = t[(p * n + i) * post + q];
  return m;
}

inline DenseTensor mode_dematricize(const Matrix& m, std::size_t k, const Shape& shape) {
  if (k >= shape.size()) throw IndexError("mode out of range");
  const auto [pre, post] = outer_inner_sizes(shape, k);
  const std::size_t n = shape[k];
  if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != pre * post)
    throw DimensionError("matrix does not match unfolding of shape " + shape_string(shape));
  DenseTensor t(shape);
  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = 0; q < post; ++q)
        t[(p * n + i) * post + q] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p * post + q));
  return t;
}

/// T x_k M: replaces mode k (zero-based) by M's row count.
inline DenseTensor mode_product(const DenseTensor& t, std::size_t k, const Matrix& m) {
  check_mode(t, k);
  const std::size_t n = t.dim(k);
  if (static_cast<std::size_t>(m.cols()) != n)
    throw DimensionError("mode product: matrix has " + std::to_string(m.cols()) + " columns, mode " +
                         std::to_string(k + 1) + " has dimension " + std::to_string(n));
  const auto [pre, post] = outer_inner_sizes(t.shape(), k);
  Shape out_shape = t.shape();
  out_shape[k] = static_cast<std::size_t>(m.rows());
  DenseTensor out(out_shape);
  if (out.size() == 0) return out;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto rows = static_cast<Eigen::Index>(m.rows());
  for (std::size_t p = 0; p < pre; ++p) {
    Eigen::Map<const RowMat> in_block(t.raw() + p * n * post, static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(post));
    Eigen::Map<RowMat> out_block(out.raw() + p * m.rows() * post, rows, static_cast<Eigen::Index>(post));
    out_block.noalias() = m * in_block;
  }
  return out;
}

/// Contracts the modes whose slot holds a vector. Free modes stay in order.
/// With no free modes the result has shape {1}.
inline DenseTensor multilinear_contract(const DenseTensor& t, const std::vector<std::optional<Vector>>& slots) {
  if (slots.size() != t.order()) throw DimensionError("need one slot per mode");
  for (std::size_t k = 0; k < slots.size(); ++k)
    if (slots[k] && static_cast<std::size_t>(slots[k]->size()) != t.dim(k))
      throw DimensionError("slot " + std::to_string(k + 1) + " has wrong length");
  DenseTensor cur = t;
  // contract from the last mode so earlier mode indices stay valid
  for (std::size_t k = slots.size(); k-- > 0;) {
    if (!slots[k]) continue;
    cur = mode_product(cur, k, slots[k]->transpose());
  }
  Shape free;
  for (std::size_t k = 0; k < slots.size(); ++k)
    if (!slots[k]) free.push_back(t.dim(k));
  if (free.empty()) free.push_back(1);
  return DenseTensor(free, std::move(cur.data()));
}

/// T(x_1, ..., x_d).
inline double contract_all(const DenseTensor& t, const std::vector<Vector>& xs) {
  if (xs.size() != t.order()) throw DimensionError("need one vector per mode");
  for (std::size_t k = 0; k < xs.size(); ++k)
    if (static_cast<std::size_t>(xs[k].size()) != t.dim(k)) throw DimensionError("vector length mismatch");
  const std::size_t d = t.order();
  // weights for all but the last mode, then a dot product per trailing fiber
  std::vector<double> w{1.0};
  for (std::size_t k = 0; k + 1 < d; ++k) {
    std::vector<double> next;
    next.reserve(w.size() * t.dim(k));
    for (double a : w)
      for (std::size_t i = 0; i < t.dim(k); ++i) next.push_back(a * xs[k][static_cast<Eigen::Index>(i)]);
    w.swap(next);
  }
  const std::size_t n = t.dim(d - 1);
  const Vector& last = xs[d - 1];
  CompensatedSum s;
  for (std::size_t p = 0; p < w.size(); ++p) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) f += t[p * n + i] * last[static_cast<Eigen::Index>(i)];
    s.add(w[p] * f);
  }
  return s.value();
}

/// All d partial contractions T(x_1, .., ., .., x_d) in one sweep.
inline std::vector<Vector> all_partials(const DenseTensor& t, const std::vector<Vector>& xs) {
  const std::size_t d = t.order();
  std::vector<Vector> g(d);
  for (std::size_t k = 0; k < d; ++k) g[k] = Vector::Zero(static_cast<Eigen::Index>(t.dim(k)));
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> prefix(d + 1), suffix(d + 1);
  const double* data = t.raw();
  for (std::size_t off = 0; off < t.size(); ++off) {
    const double v = data[off];
    if (v != 0.0) {
      prefix[0] = 1.0;
      for (std::size_t k = 0; k < d; ++k) prefix[k + 1] = prefix[k] * xs[k][static_cast<Eigen::Index>(idx[k])];
      suffix[d] = 1.0;
      for (std::size_t k = d; k-- > 0;) suffix[k] = suffix[k + 1] * xs[k][static_cast<Eigen::Index>(idx[k])];
      for (std::size_t k = 0; k < d; ++k) g[k][static_cast<Eigen::Index>(idx[k])] += v * prefix[k] * suffix[k + 1];
    }
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < t.dim(k)) break;
      idx[k] = 0;
    }
  }
  return g;
}

inline Vector contract_except(const DenseTensor& t, const std::vector<Vector>& xs, std::size_t skip) {
  std::vector<std::optional<Vector>> slots(t.order());
  for (std::size_t k = 0; k < t.order(); ++k)
    if (k != skip) slots[k] = xs[k];
  const DenseTensor r = multilinear_contract(t, slots);
  return Eigen::Map<const Vector>(r.raw(), static_cast<Eigen::Index>(r.size()));
}

inline DenseTensor decomposition_sum(const NuclearDecomposition& dec) {
  DenseTensor out(dec.shape);
  for (const auto& a : dec.atoms) {
    const DenseTensor piece = outer_atom(a);
    out += piece;
  }
  return out;
}

/// Tensor whose only nonzero is `value` at `idx`.
inline DenseTensor unit_tensor(const Shape& shape, const MultiIndex& idx, double value = 1.0) {
  DenseTensor t(shape);
  t(idx) = value;
  return t;
}

inline DenseTensor from_vector(const Shape& shape, const Vector& v) {
  return DenseTensor(shape, std::vector<double>(v.data(), v.data() + v.size()));
}

inline double max_dim(const Shape& shape) {
  return static_cast<double>(*std::max_element(shape.begin(), shape.end()));
}

/// Result mode j is input mode perm[j].
inline DenseTensor permute_modes(const DenseTensor& t, const std::vector<std::size_t>& perm) {
  const std::size_t d = t.order();
  if (perm.size() != d) throw DimensionError("permutation has wrong length");
  std::vector<char> seen(d, 0);
  for (auto p : perm) {
    if (p >= d || seen[p]) throw ParameterError("not a permutation");
    seen[p] = 1;
  }
  Shape shape(d);
  for (std::size_t j = 0; j < d; ++j) shape[j] = t.dim(perm[j]);
  // stride in the input for each output mode
  std::vector<std::size_t> in_stride(d, 1);
  for (std::size_t k = d - 1; k-- > 0;) in_stride[k] = in_stride[k + 1] * t.dim(k + 1);
  DenseTensor out(shape);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t off = 0; off < out.size(); ++off) {
    std::size_t src = 0;
    for (std::size_t j = 0; j < d; ++j) src += idx[j] * in_stride[perm[j]];
    out[off] = t[src];
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < shape[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

}  // namespace tnn
