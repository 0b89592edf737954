#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace tnn {

/// Orthonormal basis of a subspace of R^n. r = 0 is the zero subspace.
class ModeSubspace {
 public:
  ModeSubspace() = default;

  /// Takes columns that are already orthonormal (checked to 1e-10).
  static ModeSubspace from_orthonormal(const Matrix& basis) {
    const Matrix g = basis.transpose() * basis;
    if (basis.cols() > 0 && (g - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw ParameterError("basis columns are not orthonormal");
    return ModeSubspace(basis);
  }

  /// Column space of `span`, keeping singular values above rank_tol * largest.
  static ModeSubspace column_space(const Matrix& span, double rank_tol = 1e-10) {
    const auto n = span.rows();
    if (span.cols() == 0 || span.cwiseAbs().maxCoeff() == 0.0) return zero(static_cast<std::size_t>(n));
    Eigen::JacobiSVD<Matrix> svd(span, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s[r] > rank_tol * s[0]) ++r;
    return ModeSubspace(svd.matrixU().leftCols(r));
  }

  static ModeSubspace zero(std::size_t n) { return ModeSubspace(Matrix(static_cast<Eigen::Index>(n), 0)); }
  static ModeSubspace full(std::size_t n) {
    return ModeSubspace(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  }

  std::size_t ambient_dim() const { return static_cast<std::size_t>(basis_.rows()); }
  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }
  const Matrix& basis() const { return basis_; }
  const Matrix& projector() const { return proj_; }
  const Matrix& complement_projector() const { return comp_; }

  ModeSubspace complement() const {
    const auto n = basis_.rows();
    if (basis_.cols() == 0) return full(static_cast<std::size_t>(n));
    if (basis_.cols() == n) return zero(static_cast<std::size_t>(n));
    // trailing columns of a full QR span the orthogonal complement
    Eigen::HouseholderQR<Matrix> qr(basis_);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    return ModeSubspace(q.rightCols(n - basis_.cols()));
  }

  bool contains(const Vector& v, double tol = 1e-10) const {
    return (comp_ * v).norm() <= tol * std::max(1.0, v.norm());
  }

 private:
  explicit ModeSubspace(Matrix basis) : basis_(std::move(basis)) {
    const auto n = basis_.rows();
    proj_ = basis_ * basis_.transpose();
    comp_ = Matrix::Identity(n, n) - proj_;
  }

  Matrix basis_;
  Matrix proj_;
  Matrix comp_;
};

struct ModeFamily {
  std::vector<ModeSubspace> modes;

  std::size_t order() const { return modes.size(); }
  Shape shape() const {
    Shape s;
    for (const auto& m : modes) s.push_back(m.ambient_dim());
    return s;
  }
  std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r;
    for (const auto& m : modes) r.push_back(m.rank());
    return r;
  }
  void require_shape(const Shape& s) const {
    if (s != shape())
      throw DimensionError("family shape " + shape_string(shape()) + " does not match tensor shape " + shape_string(s));
  }
};

/// sp_k(T) for every mode.
inline ModeFamily family_from_tensor(const DenseTensor& t, double rank_tol = 1e-10) {
  ModeFamily f;
  for (std::size_t k = 0; k < t.order(); ++k) f.modes.push_back(ModeSubspace::column_space(mode_matricize(t, k), rank_tol));
  return f;
}

/// Subset of modes as a bitmask; bit k is mode k+1.
struct ModeSet {
  std::uint32_t bits = 0;

  static ModeSet all(std::size_t d) { return ModeSet{d >= 32 ? ~0u : ((1u << d) - 1u)}; }
  /// From 1-based mode numbers.
  static ModeSet of(std::initializer_list<std::size_t> modes) {
    ModeSet s;
    for (auto m : modes) s.bits |= 1u << (m - 1);
    return s;
  }
  bool contains(std::size_t k) const { return (bits >> k) & 1u; }
  std::size_t size() const { return static_cast<std::size_t>(__builtin_popcount(bits)); }
  bool empty() const { return bits == 0; }
  bool operator<(const ModeSet& o) const { return bits < o.bits; }
  bool operator==(const ModeSet& o) const { return bits == o.bits; }
  bool subset_of(const ModeSet& o) const { return (bits & ~o.bits) == 0; }

  std::string to_string() const {
    std::string out;
    for (std::size_t k = 0; k < 32; ++k)
      if (contains(k)) {
        if (!out.empty()) out += ",";
        out += std::to_string(k + 1);
      }
    return out;
  }
};

/// All index sets I of [d] with lo <= |I| <= hi.
inline std::vector<ModeSet> sets_by_size(std::size_t d, std::size_t lo, std::size_t hi) {
  std::vector<ModeSet> out;
  for (std::uint32_t b = 0; b < (1u << d); ++b) {
    const ModeSet s{b};
    if (s.size() >= lo && s.size() <= hi) out.push_back(s);
  }
  return out;
}

struct SubspaceSelector {
  enum class Kind { Basic, UpperU, LowerU, DirectSum };
  Kind kind = Kind::Basic;
  ModeSet set;                 // Basic / UpperU / LowerU
  std::vector<ModeSet> sets;   // DirectSum

  static SubspaceSelector basic(ModeSet s) { return {Kind::Basic, s, {}}; }
  static SubspaceSelector upper(ModeSet s) { return {Kind::UpperU, s, {}}; }
  static SubspaceSelector lower(ModeSet s) { return {Kind::LowerU, s, {}}; }
  static SubspaceSelector direct_sum(std::vector<ModeSet> ss) {
    std::sort(ss.begin(), ss.end());
    if (std::adjacent_find(ss.begin(), ss.end()) != ss.end())
      throw ParameterError("direct sum index sets must be distinct");
    return {Kind::DirectSum, {}, std::move(ss)};
  }

  void validate(std::size_t d) const {
    const ModeSet full = ModeSet::all(d);
    if (kind == Kind::DirectSum) {
      for (const auto& s : sets)
        if (!s.subset_of(full)) throw IndexError("selector mode index exceeds order " + std::to_string(d));
    } else if (!set.subset_of(full)) {
      throw IndexError("selector mode index exceeds order " + std::to_string(d));
    }
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::Basic: return "basic:" + set.to_string();
      case Kind::UpperU: return "upperU:" + set.to_string();
      case Kind::LowerU: return "lowerU:" + set.to_string();
      case Kind::DirectSum: {
        std::string out = "sum:[";
        for (std::size_t i = 0; i < sets.size(); ++i) {
          if (i) out += ";";
          out += sets[i].to_string();
        }
        return out + "]";
      }
    }
    return {};
  }
};

inline ModeSet parse_mode_set(const std::string& text) {
  ModeSet s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw ParameterError("bad mode index '" + item + "'");
    }
    if (pos != item.size() || v == 0 || v > 31) throw ParameterError("bad mode index '" + item + "'");
    s.bits |= 1u << (v - 1);
  }
  return s;
}

inline SubspaceSelector parse_selector(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ParameterError("selector needs a kind prefix: " + text);
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "basic") return SubspaceSelector::basic(parse_mode_set(rest));
  if (kind == "upperU") return SubspaceSelector::upper(parse_mode_set(rest));
  if (kind == "lowerU") return SubspaceSelector::lower(parse_mode_set(rest));
  if (kind == "sum") {
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
      throw ParameterError("sum selector must look like sum:[1,2;1,3]");
    std::vector<ModeSet> sets;
    std::stringstream ss(rest.substr(1, rest.size() - 2));
    std::string item;
    while (std::getline(ss, item, ';')) sets.push_back(parse_mode_set(item));
    return SubspaceSelector::direct_sum(std::move(sets));
  }
  throw ParameterError("unknown selector kind '" + kind + "'");
}

namespace detail {

inline DenseTensor apply_basic(const ModeFamily& f, ModeSet s, const DenseTensor& t) {
  DenseTensor out = t;
  for (std::size_t k = 0; k < f.order(); ++k)
    out = mode_product(out, k, s.contains(k) ? f.modes[k].complement_projector() : f.modes[k].projector());
  return out;
}

}  // namespace detail

inline DenseTensor project(const SubspaceSelector& sel, const ModeFamily& f, const DenseTensor& t) {
  f.require_shape(t.shape());
  sel.validate(f.order());
  switch (sel.kind) {
    case SubspaceSelector::Kind::Basic: return detail::apply_basic(f, sel.set, t);
    case SubspaceSelector::Kind::UpperU: {
      DenseTensor out = t;
      for (std::size_t k = 0; k < f.order(); ++k)
        if (sel.set.contains(k)) out = mode_product(out, k, f.modes[k].complement_projector());
      return out;
    }
    case SubspaceSelector::Kind::LowerU: {
      DenseTensor out = t;
      for (std::size_t k = 0; k < f.order(); ++k)
        if (sel.set.contains(k)) out = mode_product(out, k, f.modes[k].projector());
      return out;
    }
    case SubspaceSelector::Kind::DirectSum: {
      DenseTensor out(t.shape());
      for (const auto& s : sel.sets) out += detail::apply_basic(f, s, t);
      return out;
    }
  }
  return t;
}

/// The 2^d basic components, indexed by ModeSet bits.
inline std::vector<DenseTensor> basic_split(const ModeFamily& f, const DenseTensor& t) {
  f.require_shape(t.shape());
  std::vector<DenseTensor> parts{t};
  // peel one mode at a time; part b's bit k says whether mode k took the complement
  for (std::size_t k = 0; k < f.order(); ++k) {
    std::vector<DenseTensor> next(parts.size() * 2);
    for (std::size_t b = 0; b < parts.size(); ++b) {
      next[b] = mode_product(parts[b], k, f.modes[k].projector());
      next[b | (std::size_t{1} << k)] = mode_product(parts[b], k, f.modes[k].complement_projector());
    }
    parts.swap(next);
  }
  return parts;
}

/// Set of entries of a fixed shape, stored as sorted linear offsets.
class EntrySupport {
 public:
  EntrySupport() = default;
  explicit EntrySupport(Shape shape) : shape_(std::move(shape)), member_(shape_size(shape_), 0) {}

  static EntrySupport from_offsets(const Shape& shape, std::vector<std::size_t> offsets) {
    EntrySupport s(shape);
    for (auto o : offsets) {
      if (o >= s.member_.size()) throw IndexError("support offset out of range");
      s.member_[o] = 1;
    }
    s.rebuild();
    return s;
  }

  static EntrySupport from_indices(const Shape& shape, const std::vector<MultiIndex>& idx) {
    EntrySupport s(shape);
    for (const auto& m : idx) {
      if (m.size() != shape.size()) throw IndexError("support multi-index has wrong order");
      std::size_t off = 0;
      for (std::size_t k = 0; k < shape.size(); ++k) {
        if (m[k] >= shape[k]) throw IndexError("support multi-index out of range");
        off = off * shape[k] + m[k];
      }
      s.member_[off] = 1;
    }
    s.rebuild();
    return s;
  }

  static EntrySupport nonzeros(const DenseTensor& t) {
    EntrySupport s(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) s.member_[i] = t[i] != 0.0;
    s.rebuild();
    return s;
  }

  static EntrySupport full(const Shape& shape) {
    EntrySupport s(shape);
    std::fill(s.member_.begin(), s.member_.end(), 1);
    s.rebuild();
    return s;
  }

  EntrySupport complement() const {
    EntrySupport s(shape_);
    for (std::size_t i = 0; i < member_.size(); ++i) s.member_[i] = !member_[i];
    s.rebuild();
    return s;
  }

  EntrySupport intersect(const EntrySupport& o) const {
    if (o.shape_ != shape_) throw DimensionError("support shapes differ");
    EntrySupport s(shape_);
    for (std::size_t i = 0; i < member_.size(); ++i) s.member_[i] = member_[i] && o.member_[i];
    s.rebuild();
    return s;
  }

  const Shape& shape() const { return shape_; }
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  std::size_t count() const { return offsets_.size(); }
  bool contains(std::size_t off) const { return member_[off] != 0; }
  bool operator==(const EntrySupport& o) const { return shape_ == o.shape_ && member_ == o.member_; }

 private:
  void rebuild() {
    offsets_.clear();
    for (std::size_t i = 0; i < member_.size(); ++i)
      if (member_[i]) offsets_.push_back(i);
  }

  Shape shape_;
  std::vector<char> member_;
  std::vector<std::size_t> offsets_;
};

inline DenseTensor support_project(const EntrySupport& s, const DenseTensor& t, bool complement = false) {
  if (s.shape() != t.shape()) throw DimensionError("support shape does not match tensor shape");
  DenseTensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i)
    if (s.contains(i) != complement) out[i] = t[i];
  return out;
}

/// A self-adjoint linear map on tensors of one shape.
struct ChainStep {
  std::function<DenseTensor(const DenseTensor&)> apply;
  std::string label;
};

inline ChainStep projector_step(SubspaceSelector sel, ModeFamily fam, bool complement = false) {
  std::string label = (complement ? "I-" : "") + sel.to_string();
  return {[sel = std::move(sel), fam = std::move(fam), complement](const DenseTensor& t) {
            DenseTensor p = project(sel, fam, t);
            return complement ? t - p : p;
          },
          label};
}

inline ChainStep support_step(EntrySupport s, bool complement = false) {
  return {[s = std::move(s), complement](const DenseTensor& t) { return support_project(s, t, complement); },
          complement ? "support-complement" : "support"};
}

/// a*identity + b*p_S.
inline ChainStep affine_support_step(EntrySupport s, double a, double b) {
  return {[s = std::move(s), a, b](const DenseTensor& t) { return a * t + b * support_project(s, t); },
          "affine-support"};
}

/// Composition applied right to left: chain {A, B, C} is A(B(C(x))).
inline DenseTensor apply_chain(const std::vector<ChainStep>& chain, DenseTensor t) {
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) t = it->apply(t);
  return t;
}

struct ChainNormOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  std::uint64_t seed = 0;
  std::size_t dense_cutoff = 4096;
};

/// Largest singular value of a composition of self-adjoint steps.
inline double operator_norm_chain(const std::vector<ChainStep>& chain, const Shape& shape, ChainNormOptions opt = {}) {
  if (chain.empty()) throw ParameterError("operator_norm_chain needs a nonempty chain");
  const std::size_t n = shape_size(shape);
  if (n <= opt.dense_cutoff) {
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<Eigen::Index> live_cols;
    for (std::size_t j = 0; j < n; ++j) {
      DenseTensor e(shape);
      e[j] = 1.0;
      const DenseTensor col = apply_chain(chain, e);
      m.col(static_cast<Eigen::Index>(j)) = col.as_vector();
      if (col.as_vector().cwiseAbs().maxCoeff() != 0.0) live_cols.push_back(static_cast<Eigen::Index>(j));
    }
    if (live_cols.empty()) return 0.0;
    std::vector<Eigen::Index> live_rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      bool nz = false;
      for (auto j : live_cols)
        if (m(i, j) != 0.0) {
          nz = true;
          break;
        }
      if (nz) live_rows.push_back(i);
    }
    if (live_rows.empty()) return 0.0;
    Matrix r(static_cast<Eigen::Index>(live_rows.size()), static_cast<Eigen::Index>(live_cols.size()));
    for (std::size_t a = 0; a < live_rows.size(); ++a)
      for (std::size_t b = 0; b < live_cols.size(); ++b)
        r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m(live_rows[a], live_cols[b]);
    if (std::min(r.rows(), r.cols()) <= 300) {
      Eigen::JacobiSVD<Matrix> svd(r);
      return svd.singularValues()[0];
    }
    Eigen::BDCSVD<Matrix> svd(r);
    return svd.singularValues()[0];
  }
  // power iteration on chain^T chain; adjoint of a self-adjoint chain is the reversed chain
  std::vector<ChainStep> adjoint(chain.rbegin(), chain.rend());
  Rng rng = make_stream(opt.seed, 0x6f706e6fu);
  DenseTensor x = from_vector(shape, unit_vector(rng, static_cast<Eigen::Index>(n)));
  double lambda = 0.0, best = 0.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    DenseTensor y = apply_chain(adjoint, apply_chain(chain, x));
    const double ny = norm2(y);
    if (ny == 0.0) return 0.0;
    const double next = inner(x, y);
    best = std::max(best, next);
    y *= 1.0 / ny;
    x = std::move(y);
    if (it > 0 && std::abs(next - lambda) <= opt.tol * std::max(next, 1e-300)) return std::sqrt(std::max(next, 0.0));
    lambda = next;
  }
  throw ConvergenceError("operator_norm_chain: power iteration did not converge", std::sqrt(std::max(best, 0.0)));
}

}  // namespace tnn
