#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace tnn {

struct SpectralOptions {
  int starts = 32;
  double tol = 1e-12;
  int max_iter = 2000;
  std::uint64_t seed = 0;
  bool record_trace = false;
};

struct SpectralResult {
  double value = 0.0;
  std::vector<Vector> maximizers;
  double certified_lower = 0.0;
  std::optional<double> certified_upper;
  int starts_used = 0;
  long iterations = 0;
  // objective after every single-mode update of the winning start
  std::vector<double> trace;
};

struct HopmRun {
  double value = 0.0;
  std::vector<Vector> xs;
  long iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

/// One alternating-maximization run from xs (normalized here).
inline HopmRun hopm_run(const DenseTensor& t, std::vector<Vector> xs, double tol, int max_iter, bool trace = false) {
  HopmRun run;
  for (auto& x : xs) {
    const double nx = x.norm();
    if (nx == 0.0) x = basis_vector(static_cast<std::size_t>(x.size()), 0);
    else x /= nx;
  }
  double prev = contract_all(t, xs);
  for (int it = 0; it < max_iter; ++it) {
    double cur = prev;
    for (std::size_t k = 0; k < t.order(); ++k) {
      const Vector g = contract_except(t, xs, k);
      const double ng = g.norm();
      if (ng > 0.0) {
        xs[k] = g / ng;
        cur = ng;
      } else {
        cur = 0.0;
      }
      if (trace) run.trace.push_back(cur);
    }
    ++run.iterations;
    if (it > 0 && std::abs(cur - prev) < tol) {
      run.converged = true;
      prev = cur;
      break;
    }
    prev = cur;
  }
  run.xs = std::move(xs);
  run.value = contract_all(t, run.xs);
  if (run.value < 0.0) {
    run.xs[0] = -run.xs[0];
    run.value = -run.value;
  }
  return run;
}

/// Leading left singular vector of each unfolding.
inline std::vector<Vector> hosvd_start(const DenseTensor& t) {
  std::vector<Vector> xs;
  for (std::size_t k = 0; k < t.order(); ++k) {
    const Matrix m = mode_matricize(t, k);
    const Matrix g = m * m.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    xs.push_back(es.eigenvectors().col(g.rows() - 1));
  }
  return xs;
}

/// Every start's result, in start order. Start 0 is the HOSVD start.
inline std::vector<HopmRun> hopm_all_starts(const DenseTensor& t, const SpectralOptions& opt) {
  const int starts = std::max(1, opt.starts);
  std::vector<HopmRun> runs(static_cast<std::size_t>(starts));
  parallel_for(runs.size(), [&](std::size_t s) {
    std::vector<Vector> x0;
    if (s == 0) {
      x0 = hosvd_start(t);
    } else {
      Rng rng = make_stream(opt.seed, s);
      for (std::size_t k = 0; k < t.order(); ++k) x0.push_back(unit_vector(rng, static_cast<Eigen::Index>(t.dim(k))));
    }
    runs[s] = hopm_run(t, std::move(x0), opt.tol, opt.max_iter, opt.record_trace);
  });
  return runs;
}

inline SpectralResult spectral_hopm(const DenseTensor& t, const SpectralOptions& opt = {}) {
  SpectralResult res;
  if (norm_inf(t) == 0.0) {
    for (std::size_t k = 0; k < t.order(); ++k) res.maximizers.push_back(basis_vector(t.dim(k), 0));
    res.starts_used = 0;
    return res;
  }
  const auto runs = hopm_all_starts(t, opt);
  std::size_t best = 0;
  bool any_converged = false;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    res.iterations += runs[s].iterations;
    any_converged = any_converged || runs[s].converged;
    if (runs[s].value > runs[best].value) best = s;
  }
  if (!any_converged)
    throw ConvergenceError("spectral_hopm: no start converged within max_iter", runs[best].value);
  res.value = runs[best].value;
  res.maximizers = runs[best].xs;
  res.certified_lower = res.value;
  res.starts_used = static_cast<int>(runs.size());
  res.trace = runs[best].trace;
  return res;
}

// ---------------------------------------------------------------------------
// Uniform product nets on cube faces.

struct NetSpec {
  double epsilon = 0.0;
  std::vector<std::vector<Vector>> points;  // per mode, half-sphere representatives
  bool covering_certified = false;
};

/// Per mode: centers of a g^{n-1} grid on each positive cube face, pushed to
/// the sphere. Radial projection from outside the ball is 1-Lipschitz, so a
/// face cell of half-width h has covering radius at most h*sqrt(n-1); the
/// negated points cover the other half of the sphere.
inline NetSpec make_net(const Shape& shape, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("net epsilon must be positive");
  NetSpec net;
  net.epsilon = epsilon;
  net.covering_certified = true;
  for (std::size_t n : shape) {
    std::vector<Vector> pts;
    if (n == 1) {
      pts.push_back(Vector::Ones(1));
    } else if (n > 4) {
      throw ParameterError("nets are only built for mode dimensions up to 4");
    } else {
      const double spread = std::sqrt(static_cast<double>(n - 1));
      const auto g = static_cast<std::size_t>(std::ceil(spread / epsilon));
      const double h = 1.0 / static_cast<double>(g);
      std::size_t cells = 1;
      for (std::size_t j = 0; j + 1 < n; ++j) cells *= g;
      for (std::size_t face = 0; face < n; ++face)
        for (std::size_t c = 0; c < cells; ++c) {
          Vector y(static_cast<Eigen::Index>(n));
          std::size_t rem = c;
          for (std::size_t i = 0; i < n; ++i) {
            if (i == face) {
              y[static_cast<Eigen::Index>(i)] = 1.0;
              continue;
            }
            const std::size_t cell = rem % g;
            rem /= g;
            y[static_cast<Eigen::Index>(i)] = -1.0 + h * (2.0 * static_cast<double>(cell) + 1.0);
          }
          pts.push_back(y / y.norm());
        }
    }
    net.points.push_back(std::move(pts));
  }
  return net;
}

struct NetBounds {
  double lower = 0.0;
  double upper = 0.0;
};

namespace detail {

// T(v, ., ..., .) for a vector v on the leading mode. Order 1 gives shape {1}.
inline DenseTensor contract_front(const DenseTensor& s, const Vector& v) {
  const std::size_t n = s.dim(0);
  const std::size_t rest = s.size() / n;
  Shape sh(s.shape().begin() + 1, s.shape().end());
  if (sh.empty()) sh.push_back(1);
  DenseTensor out(sh);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = v[static_cast<Eigen::Index>(i)];
    for (std::size_t r = 0; r < rest; ++r) out[r] += c * s[i * rest + r];
  }
  return out;
}

// max |T(v_k, ..., v_d)| over the net points of modes k..d-1; s is already
// contracted on the modes before k.
inline double net_max(const DenseTensor& s, const NetSpec& net, std::size_t k) {
  if (k == net.points.size()) return std::abs(s[0]);
  double best = 0.0;
  if (k + 1 == net.points.size()) {
    for (const auto& v : net.points[k]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) acc += s[i] * v[static_cast<Eigen::Index>(i)];
      best = std::max(best, std::abs(acc));
    }
    return best;
  }
  for (const auto& v : net.points[k]) best = std::max(best, net_max(contract_front(s, v), net, k + 1));
  return best;
}

}  // namespace detail

inline NetBounds spectral_net_bounds(const DenseTensor& t, const NetSpec& net) {
  const std::size_t d = t.order();
  if (net.points.size() != d) throw DimensionError("net has wrong number of modes");
  for (std::size_t k = 0; k < d; ++k)
    for (const auto& p : net.points[k])
      if (static_cast<std::size_t>(p.size()) != t.dim(k)) throw DimensionError("net point has wrong length");
  if (net.epsilon * static_cast<double>(d) >= 1.0) throw ParameterError("net epsilon must be below 1/d");
  if (!net.covering_certified) throw PreconditionError("net covering radius is not certified; no upper bound");
  double total = 1.0;
  for (const auto& p : net.points) total *= static_cast<double>(p.size());
  if (total > 2e9) throw ParameterError("net product too large to enumerate");

  std::vector<double> best_slot(net.points[0].size(), 0.0);
  parallel_for(net.points[0].size(), [&](std::size_t i0) {
    best_slot[i0] = detail::net_max(detail::contract_front(t, net.points[0][i0]), net, 1);
  });
  NetBounds nb;
  for (double b : best_slot) nb.lower = std::max(nb.lower, b);
  nb.upper = nb.lower / (1.0 - static_cast<double>(d) * net.epsilon);
  return nb;
}

// ---------------------------------------------------------------------------
// Adaptive certified bound by branch and bound over cube-face cells.

struct CertifyOptions {
  double rel_gap = 1e-9;
  double abs_gap = 1e-14;
  long max_cells = 200000;
  std::uint64_t seed = 0;
  int hopm_starts = 16;
};

struct CertifiedBound {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<Vector> maximizers;
  long cells = 0;
  bool target_met = false;
};

inline constexpr std::size_t kCertMaxModes = 6;
inline constexpr std::size_t kCertMaxDim = 5;

inline bool certifiable_shape(const Shape& shape) {
  if (shape.size() > kCertMaxModes) return false;
  std::size_t free = 0;
  for (auto n : shape) {
    if (n > kCertMaxDim) return false;
    free += n - 1;
  }
  return free <= 12;
}

namespace detail {

struct BoxMode {
  std::uint8_t face = 0;
  double h = 1.0;
  std::array<double, kCertMaxDim - 1> u{};
};

struct Box {
  double bound = 0.0;
  std::array<BoxMode, kCertMaxModes> m{};
  bool operator<(const Box& o) const { return bound < o.bound; }
};

inline Vector box_center(const BoxMode& b, std::size_t n) {
  Vector y(static_cast<Eigen::Index>(n));
  std::size_t slot = 0;
  for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = (i == b.face) ? 1.0 : b.u[slot++];
  return y / y.norm();
}

}  // namespace detail

namespace detail {

/// Order-3 variant: search only the smallest mode; the other two are solved
/// by an SVD of M(x) = T x_1 x. For x = a c + b w in a cell (|b| <= s,
/// w tangent at c), with A = M(c) = U S V^T and W = M(w):
///   ||a A + b W||^2 <= lambda_max [[s1^2 + e11, e12], [e12, s2^2 + e22]]
/// where e11 = 2 s s1 g + s^2 r1^2, e12 = s (s2 r1 + s1 r2) + s^2 w r1,
/// e22 = 2 s s1 w + s^2 w^2; g bounds T(w, u1, v1), r1 and r2 bound ||W v1||
/// and ||W^T u1||, and w bounds ||W||.
inline CertifiedBound certified_order3(const DenseTensor& t_in, const CertifyOptions& opt) {
  std::size_t search = 0;
  for (std::size_t k = 1; k < 3; ++k)
    if (t_in.dim(k) < t_in.dim(search)) search = k;
  std::vector<std::size_t> perm{search};
  for (std::size_t k = 0; k < 3; ++k)
    if (k != search) perm.push_back(k);
  const DenseTensor t = permute_modes(t_in, perm);
  const auto n1 = static_cast<Eigen::Index>(t.dim(0));
  const auto n2 = static_cast<Eigen::Index>(t.dim(1));
  const auto n3 = static_cast<Eigen::Index>(t.dim(2));
  const double fro = norm2(t);

  // slices T_i = T(e_i, ., .)
  std::vector<Matrix> slice(static_cast<std::size_t>(n1), Matrix(n2, n3));
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n2; ++j)
      for (Eigen::Index k = 0; k < n3; ++k)
        slice[static_cast<std::size_t>(i)](j, k) = t[static_cast<std::size_t>((i * n2 + j) * n3 + k)];

  CertifiedBound out;
  std::vector<Vector> best_x;
  SpectralOptions so;
  so.starts = opt.hopm_starts;
  so.seed = opt.seed;
  so.max_iter = 5000;
  for (const auto& r : hopm_all_starts(t, so))
    if (r.value > out.lower) {
      out.lower = r.value;
      best_x = r.xs;
    }

  const double spread = std::sqrt(static_cast<double>(n1 - 1));
  std::priority_queue<Box> heap;
  double pruned_max = 0.0;
  auto target = [&] { return out.lower * (1.0 + opt.rel_gap) + opt.abs_gap; };

  auto evaluate = [&](Box& b) {
    const Vector c = box_center(b.m[0], static_cast<std::size_t>(n1));
    Matrix a = Matrix::Zero(n2, n3);
    for (Eigen::Index i = 0; i < n1; ++i) a += c[i] * slice[static_cast<std::size_t>(i)];
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double s1 = sv[0];
    const double s2 = sv.size() > 1 ? sv[1] : 0.0;
    const Vector u1 = svd.matrixU().col(0);
    const Vector v1 = svd.matrixV().col(0);
    if (s1 > out.lower) {
      out.lower = s1;
      best_x = {c, u1, v1};
    }
    const double s = std::min(1.0, b.m[0].h * spread);
    double bound = s1;
    if (s > 0.0) {
      const Matrix proj = Matrix::Identity(n1, n1) - c * c.transpose();
      Vector g(n1);
      Matrix j1(n1, n2), j2(n1, n3);
      double tang_fro2 = 0.0;
      std::vector<Matrix> tang(static_cast<std::size_t>(n1), Matrix::Zero(n2, n3));
      for (Eigen::Index i = 0; i < n1; ++i) {
        const Matrix& ti = slice[static_cast<std::size_t>(i)];
        g[i] = u1.dot(ti * v1);
        j1.row(i) = (ti * v1).transpose();
        j2.row(i) = (ti.transpose() * u1).transpose();
        for (Eigen::Index l = 0; l < n1; ++l) tang[static_cast<std::size_t>(l)] += proj(l, i) * ti;
      }
      for (const auto& m : tang) tang_fro2 += m.squaredNorm();
      auto opnorm = [](const Matrix& m) {
        Eigen::JacobiSVD<Matrix> sv2(m);
        return sv2.singularValues().size() ? sv2.singularValues()[0] : 0.0;
      };
      const double gam = (proj * g).norm();
      const double r1 = opnorm(proj * j1);
      const double r2 = opnorm(proj * j2);
      // ||W|| over unit tangent w: bounded by the Frobenius norm of T x_1 P
      const double om = std::min(std::sqrt(tang_fro2), fro);
      const double e11 = 2.0 * s * s1 * gam + s * s * r1 * r1;
      const double e12 = s * (s2 * r1 + s1 * r2) + s * s * om * r1;
      const double e22 = 2.0 * s * s1 * om + s * s * om * om;
      const double p = s1 * s1 + e11, q = s2 * s2 + e22;
      const double lam = 0.5 * (p + q) + std::sqrt(0.25 * (p - q) * (p - q) + e12 * e12);
      bound = std::sqrt(lam);
    }
    b.bound = std::min(bound, fro);
    ++out.cells;
  };
  auto push = [&](Box& b) {
    evaluate(b);
    if (b.bound <= target())
      pruned_max = std::max(pruned_max, b.bound);
    else
      heap.push(b);
  };
  for (Eigen::Index f = 0; f < n1; ++f) {
    Box b;
    b.m[0].face = static_cast<std::uint8_t>(f);
    b.m[0].h = 1.0;
    push(b);
  }
  const std::size_t free = static_cast<std::size_t>(n1 - 1);
  while (!heap.empty()) {
    Box b = heap.top();
    if (b.bound <= target() || out.cells >= opt.max_cells) break;
    heap.pop();
    if (free == 0) {
      pruned_max = std::max(pruned_max, b.bound);
      continue;
    }
    const double h = b.m[0].h * 0.5;
    for (std::size_t mask = 0; mask < (std::size_t{1} << free); ++mask) {
      Box c = b;
      c.m[0].h = h;
      for (std::size_t j = 0; j < free; ++j) c.m[0].u[j] += ((mask >> j) & 1u) ? h : -h;
      push(c);
    }
  }
  const double top = heap.empty() ? 0.0 : heap.top().bound;
  out.upper = std::max({top, pruned_max, out.lower});
  out.target_met = out.upper <= target();
  out.maximizers.assign(3, Vector());
  for (std::size_t k = 0; k < 3; ++k) out.maximizers[perm[k]] = best_x[k];
  out.lower = contract_all(t_in, out.maximizers);
  if (out.lower < 0.0) {
    out.maximizers[0] = -out.maximizers[0];
    out.lower = -out.lower;
  }
  out.upper = std::max(out.upper, out.lower);
  return out;
}

}  // namespace detail

/// Rigorous enclosure of ||T||_sigma by branch and bound. The largest mode
/// (moved last) is maximized exactly: F(x) = ||T(x_1, .., x_{d-1}, .)||_2.
/// Over a cell with centers c_k and chord radii s_k,
///   F(x) <= sqrt(F_c^2 + 2 F_c sum s_k g_k + (sum s_k r_k)^2) + q U,
/// where g_k is the tangential gradient at the best last-mode vector, r_k the
/// norm of the tangential Jacobian, q = prod(1+s_k) - 1 - sum s_k and U an
/// upper bound on ||T||_sigma (||T||_2, or the cell's own value via 1/(1-q)).
inline CertifiedBound spectral_certified(const DenseTensor& t_in, const CertifyOptions& opt = {}) {
  if (!certifiable_shape(t_in.shape()))
    throw ParameterError("shape " + shape_string(t_in.shape()) + " is too large to certify");
  const std::size_t d = t_in.order();
  const double fro = norm2(t_in);
  CertifiedBound out;
  if (fro == 0.0 || d == 1) {
    for (std::size_t k = 0; k < d; ++k) out.maximizers.push_back(basis_vector(t_in.dim(k), 0));
    if (d == 1 && fro > 0.0) {
      out.maximizers[0] = t_in.as_vector() / fro;
      out.lower = out.upper = fro;
    }
    out.target_met = true;
    return out;
  }

  if (d == 3) return detail::certified_order3(t_in, opt);

  // move the largest mode last
  std::size_t exact = d - 1;
  for (std::size_t k = 0; k < d; ++k)
    if (t_in.dim(k) > t_in.dim(exact)) exact = k;
  std::vector<std::size_t> perm;
  for (std::size_t k = 0; k < d; ++k)
    if (k != exact) perm.push_back(k);
  perm.push_back(exact);
  const DenseTensor t = permute_modes(t_in, perm);
  const std::size_t m = d - 1;  // searched modes
  const std::size_t nd = t.dim(m);

  SpectralOptions so;
  so.starts = opt.hopm_starts;
  so.seed = opt.seed;
  so.max_iter = 5000;
  std::vector<Vector> best_x;
  for (const auto& r : hopm_all_starts(t, so))
    if (r.value > out.lower) {
      out.lower = r.value;
      best_x = r.xs;
    }

  std::vector<double> spread(m);
  for (std::size_t k = 0; k < m; ++k) spread[k] = std::sqrt(static_cast<double>(t.dim(k) - 1));

  std::priority_queue<detail::Box> heap;
  double pruned_max = 0.0;
  auto target = [&] { return out.lower * (1.0 + opt.rel_gap) + opt.abs_gap; };

  std::vector<Vector> cs(m);
  std::vector<std::optional<Vector>> slots(d);
  auto evaluate = [&](detail::Box& b) {
    for (std::size_t k = 0; k < m; ++k) cs[k] = detail::box_center(b.m[k], t.dim(k));
    for (std::size_t k = 0; k < m; ++k) slots[k] = cs[k];
    slots[m].reset();
    const DenseTensor vt = multilinear_contract(t, slots);
    const Vector v = Eigen::Map<const Vector>(vt.raw(), static_cast<Eigen::Index>(nd));
    const double fc = v.norm();
    if (fc > out.lower) {
      out.lower = fc;
      best_x = cs;
      best_x.push_back(v / fc);
    }
    double grad = 0.0, jac = 0.0, q = 1.0, ssum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double s = std::min(1.0, b.m[k].h * spread[k]);
      q *= 1.0 + s;
      ssum += s;
      if (s == 0.0) continue;
      slots[k].reset();
      const DenseTensor jt = multilinear_contract(t, slots);  // shape (n_k, n_d)
      slots[k] = cs[k];
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      const Eigen::Map<const RowMat> jk(jt.raw(), static_cast<Eigen::Index>(t.dim(k)), static_cast<Eigen::Index>(nd));
      const Matrix proj = Matrix::Identity(cs[k].size(), cs[k].size()) - cs[k] * cs[k].transpose();
      const Matrix tj = proj * jk;  // tangential Jacobian, n_k x n_d
      if (fc > 0.0) grad += s * (tj * v).norm() / fc;
      const Matrix gram = tj.transpose() * tj;
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
      jac += s * std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    }
    q -= 1.0 + ssum;
    const double a = std::sqrt(fc * fc + 2.0 * fc * grad + jac * jac);
    double bound = a + q * fro;
    if (q < 1.0) bound = std::min(bound, a / (1.0 - q));
    b.bound = std::min(bound, fro);
    ++out.cells;
  };
  auto push = [&](detail::Box& b) {
    evaluate(b);
    if (b.bound <= target())
      pruned_max = std::max(pruned_max, b.bound);
    else
      heap.push(b);
  };

  {
    std::vector<std::size_t> face(m, 0);
    for (;;) {
      detail::Box b;
      for (std::size_t k = 0; k < m; ++k) {
        b.m[k].face = static_cast<std::uint8_t>(face[k]);
        b.m[k].h = 1.0;
      }
      push(b);
      std::size_t k = m;
      while (k-- > 0) {
        if (++face[k] < t.dim(k)) break;
        face[k] = 0;
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
  }

  long pops = 0;
  while (!heap.empty()) {
    detail::Box b = heap.top();
    if (b.bound <= target()) break;
    if (out.cells >= opt.max_cells) break;
    heap.pop();
    ++pops;
    if (pops % 4096 == 0) {
      std::vector<Vector> x0(d);
      for (std::size_t k = 0; k < m; ++k) x0[k] = detail::box_center(b.m[k], t.dim(k));
      x0[m] = Vector::Ones(static_cast<Eigen::Index>(nd));
      const auto run = hopm_run(t, x0, 1e-15, 200);
      if (run.value > out.lower) {
        out.lower = run.value;
        best_x = run.xs;
      }
    }
    std::size_t split = m;
    double widest = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double s = b.m[k].h * spread[k];
      if (s > widest) {
        widest = s;
        split = k;
      }
    }
    if (split == m) {
      pruned_max = std::max(pruned_max, b.bound);
      continue;
    }
    const std::size_t free = t.dim(split) - 1;
    const double h = b.m[split].h * 0.5;
    for (std::size_t mask = 0; mask < (std::size_t{1} << free); ++mask) {
      detail::Box c = b;
      c.m[split].h = h;
      for (std::size_t j = 0; j < free; ++j) c.m[split].u[j] += ((mask >> j) & 1u) ? h : -h;
      push(c);
    }
  }
  const double top = heap.empty() ? 0.0 : heap.top().bound;
  out.upper = std::max({top, pruned_max, out.lower});
  out.target_met = out.upper <= target();
  out.maximizers.assign(d, Vector());
  for (std::size_t k = 0; k < d; ++k) out.maximizers[perm[k]] = best_x[k];
  out.lower = contract_all(t_in, out.maximizers);
  if (out.lower < 0.0) {
    out.maximizers[0] = -out.maximizers[0];
    out.lower = -out.lower;
  }
  out.upper = std::max(out.upper, out.lower);
  return out;
}

/// HOPM value plus a certified upper bound when the shape permits.
/// Order 1 and 2 are exact through the Euclidean norm and the SVD.
inline SpectralResult spectral_norm(const DenseTensor& t, const SpectralOptions& opt = {},
                                    const CertifyOptions& copt = {}) {
  if (t.order() <= 2) {
    SpectralResult res;
    if (t.order() == 1) {
      const double n = norm2(t);
      res.value = n;
      res.maximizers.push_back(n > 0 ? Vector(t.as_vector() / n) : basis_vector(t.dim(0), 0));
    } else {
      const Matrix m = mode_matricize(t, 0);
      Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
      res.maximizers = {svd.matrixU().col(0), svd.matrixV().col(0)};
      res.value = contract_all(t, res.maximizers);
      if (res.value < 0) {
        res.maximizers[0] = -res.maximizers[0];
        res.value = -res.value;
      }
      res.value = std::max(res.value, 0.0);
    }
    res.certified_lower = res.value;
    // SVD backward error is a few ulps of ||T||_2
    res.certified_upper = res.value + 64 * std::numeric_limits<double>::epsilon() * std::max(norm2(t), 1e-300);
    res.starts_used = 1;
    return res;
  }
  SpectralResult res = spectral_hopm(t, opt);
  if (certifiable_shape(t.shape())) {
    CertifyOptions c = copt;
    c.seed = opt.seed;
    const auto cb = spectral_certified(t, c);
    if (cb.lower > res.value) {
      res.value = cb.lower;
      res.maximizers = cb.maximizers;
      res.value = contract_all(t, res.maximizers);
    }
    res.certified_lower = res.value;
    res.certified_upper = std::max(cb.upper, res.value);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Symmetric tensors: a single vector suffices.

inline bool is_symmetric(const DenseTensor& t, double tol = 1e-12) {
  const std::size_t d = t.order();
  for (std::size_t k = 1; k < d; ++k)
    if (t.dim(k) != t.dim(0)) return false;
  for (std::size_t off = 0; off < t.size(); ++off) {
    MultiIndex idx = t.unravel(off);
    for (std::size_t k = 0; k + 1 < d; ++k) {
      std::swap(idx[k], idx[k + 1]);
      if (std::abs(t(idx) - t[off]) > tol) return false;
      std::swap(idx[k], idx[k + 1]);
    }
  }
  return true;
}

struct BanachOptions {
  int grid = 2000;
  int polish_iters = 200;
};

inline double symmetric_form(const DenseTensor& t, const Vector& x) {
  return contract_all(t, std::vector<Vector>(t.order(), x));
}

inline double spectral_symmetric_banach(const DenseTensor& t, const BanachOptions& opt = {}) {
  if (!is_symmetric(t)) throw PreconditionError("spectral_symmetric_banach needs a symmetric tensor");
  const std::size_t n = t.dim(0);
  const std::size_t d = t.order();
  if (n == 1) return std::abs(t[0]);
  if (n == 2) {
    // |f| on the half circle, then golden-section refinement around the best grid points
    constexpr double pi = 3.14159265358979323846;
    auto f = [&](double th) {
      Vector x(2);
      x << std::cos(th), std::sin(th);
      return std::abs(symmetric_form(t, x));
    };
    const int g = std::max(opt.grid, 16);
    const double step = pi / g;
    std::vector<double> vals(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) vals[static_cast<std::size_t>(i)] = f(step * i);
    double best = 0.0;
    for (int i = 0; i < g; ++i) {
      const double v = vals[static_cast<std::size_t>(i)];
      const double l = vals[static_cast<std::size_t>((i + g - 1) % g)];
      const double r = vals[static_cast<std::size_t>((i + 1) % g)];
      best = std::max(best, v);
      if (v < l || v < r) continue;
      double a = step * (i - 1), b = step * (i + 1);
      const double phi = 0.6180339887498949;
      double c = b - phi * (b - a), e = a + phi * (b - a);
      double fc = f(c), fe = f(e);
      for (int it = 0; it < opt.polish_iters && b - a > 1e-15; ++it) {
        if (fc >= fe) {
          b = e; e = c; fe = fc; c = b - phi * (b - a); fc = f(c);
        } else {
          a = c; c = e; fc = fe; e = a + phi * (b - a); fe = f(e);
        }
      }
      best = std::max({best, fc, fe});
    }
    return best;
  }
  // n >= 3: face grid plus shifted symmetric power iterations
  const double eps = std::sqrt(static_cast<double>(n - 1)) / std::max(4.0, std::pow(opt.grid, 1.0 / static_cast<double>(n - 1)));
  const NetSpec net = make_net(Shape(1, n), eps);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < net.points[0].size(); ++i)
    scored.emplace_back(std::abs(symmetric_form(t, net.points[0][i])), i);
  std::sort(scored.begin(), scored.end(), std::greater<>());
  const double shift = static_cast<double>(d) * norm2(t);
  double best = scored.empty() ? 0.0 : scored[0].first;
  for (std::size_t s = 0; s < std::min<std::size_t>(scored.size(), 24); ++s) {
    Vector x = net.points[0][scored[s].second];
    const double sign = symmetric_form(t, x) < 0 ? -1.0 : 1.0;
    for (int it = 0; it < opt.polish_iters * 50; ++it) {
      const Vector g = contract_except(t, std::vector<Vector>(d, x), d - 1) * sign;
      Vector y = g + shift * x;
      y /= y.norm();
      const double moved = (y - x).norm();
      x = y;
      if (moved < 1e-15) break;
    }
    best = std::max(best, std::abs(symmetric_form(t, x)));
  }
  return best;
}

}  // namespace tnn
