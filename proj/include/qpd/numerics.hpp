#pragma once

// Dense/sparse complex linear algebra used throughout the library:
// column-stacking vectorization, superoperator construction, matrix
// exponentials and a fixed-step Runge-Kutta integrator.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qpd/errors.hpp"

namespace qpd {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;

inline constexpr Complex kI{0.0, 1.0};

// ---------------------------------------------------------------------------
// predicates

inline bool is_square(const ComplexMatrix& m) { return m.rows() == m.cols(); }

inline bool is_hermitian(const ComplexMatrix& m, double tol) {
  if (!is_square(m)) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_unitary(const ComplexMatrix& m, double tol) {
  if (!is_square(m)) return false;
  const auto n = m.rows();
  return (m.adjoint() * m - ComplexMatrix::Identity(n, n)).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_diagonal(const ComplexMatrix& m, double tol) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && std::abs(m(i, j)) > tol) return false;
  return true;
}

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    const Complex z = m.data()[k];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (!is_square(m))
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

// ---------------------------------------------------------------------------
// Kronecker products and vectorization

/// (a ⊗ b)[i*b.rows()+k, j*b.cols()+l] = a[i,j]*b[k,l].
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (int ja = 0; ja < a.outerSize(); ++ja)
    for (SparseMatrix::InnerIterator ia(a, ja); ia; ++ia)
      for (int jb = 0; jb < b.outerSize(); ++jb)
        for (SparseMatrix::InnerIterator ib(b, jb); ib; ++ib)
          trips.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                             static_cast<int>(ia.col() * b.cols() + ib.col()),
                             ia.value() * ib.value());
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline SparseMatrix to_sparse(const ComplexMatrix& m, double drop = 0.0) {
  std::vector<Triplet> trips;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > drop)
        trips.emplace_back(static_cast<int>(i), static_cast<int>(j), m(i, j));
  SparseMatrix out(m.rows(), m.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

/// Column stacking: out[i*n + j] = rho(j, i).
inline ComplexVector vectorize(const ComplexMatrix& rho) {
  require_square(rho, "vectorize");
  return Eigen::Map<const ComplexVector>(rho.data(), rho.size());
}

inline ComplexMatrix devectorize(const ComplexVector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size())
    throw DimensionError("devectorize: length " + std::to_string(v.size()) + " is not a square");
  return Eigen::Map<const ComplexMatrix>(v.data(), n, n);
}

/// Index of the vectorized element rho(row, col) for dimension n.
constexpr Eigen::Index vec_index(Eigen::Index row, Eigen::Index col, Eigen::Index n) {
  return col * n + row;
}

// ---------------------------------------------------------------------------
// superoperators in the column-stacking convention

/// Matrix of rho -> o * rho * q, i.e. (q^T ⊗ o).
inline ComplexMatrix sandwich_superop(const ComplexMatrix& o, const ComplexMatrix& q) {
  require_square(o, "sandwich_superop");
  require_square(q, "sandwich_superop");
  if (o.rows() != q.rows()) throw DimensionError("sandwich_superop: o and q differ in dimension");
  return kron(q.transpose(), o);
}

/// Matrix of rho -> o rho o^† - ½ o^†o rho - ½ rho o^†o.
inline ComplexMatrix lindblad_superop(const ComplexMatrix& o) {
  require_square(o, "lindblad_superop");
  const auto n = o.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const ComplexMatrix ko = o.adjoint() * o;
  return kron(o.conjugate(), o) - 0.5 * kron(id, ko) - 0.5 * kron(ko.transpose(), id);
}

/// Matrix of rho -> -i[h, rho].
inline ComplexMatrix hamiltonian_superop(const ComplexMatrix& h) {
  require_square(h, "hamiltonian_superop");
  const auto n = h.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  return -kI * (kron(id, h) - kron(h.transpose(), id));
}

inline SparseMatrix sparse_sandwich_superop(const SparseMatrix& o, const SparseMatrix& q) {
  return kron(SparseMatrix(q.transpose()), o);
}

inline SparseMatrix sparse_lindblad_superop(const SparseMatrix& o) {
  const auto n = o.rows();
  const SparseMatrix id = sparse_identity(n);
  const SparseMatrix ko = SparseMatrix(o.adjoint()) * o;
  SparseMatrix out = kron(SparseMatrix(o.conjugate()), o);
  out -= 0.5 * kron(id, ko);
  out -= 0.5 * kron(SparseMatrix(ko.transpose()), id);
  return out;
}

inline SparseMatrix sparse_hamiltonian_superop(const SparseMatrix& h) {
  const SparseMatrix id = sparse_identity(h.rows());
  SparseMatrix out = kron(id, h) - kron(SparseMatrix(h.transpose()), id);
  return Complex(0.0, -1.0) * out;
}

// ---------------------------------------------------------------------------
// matrix exponential

inline double norm1(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().colwise().sum().maxCoeff();
}

inline double norm1(const SparseMatrix& a) {
  double best = 0.0;
  for (int j = 0; j < a.outerSize(); ++j) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

namespace detail {

inline void pade_uv(const ComplexMatrix& a, int m, ComplexMatrix& u, ComplexMatrix& v) {
  const auto n = a.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const ComplexMatrix a2 = a * a;
  switch (m) {
    case 3: {
      constexpr std::array<double, 4> b{120., 60., 12., 1.};
      u = a * (b[3] * a2 + b[1] * id);
      v = b[2] * a2 + b[0] * id;
      return;
    }
    case 5: {
      constexpr std::array<double, 6> b{30240., 15120., 3360., 420., 30., 1.};
      const ComplexMatrix a4 = a2 * a2;
      u = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    case 7: {
      constexpr std::array<double, 8> b{17297280., 8648640., 1995840., 277200.,
                                        25200.,    1512.,    56.,      1.};
      const ComplexMatrix a4 = a2 * a2;
      const ComplexMatrix a6 = a4 * a2;
      u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    case 9: {
      constexpr std::array<double, 10> b{17643225600., 8821612800., 2075673600., 302702400.,
                                         30270240.,    2162160.,    110880.,     3960.,
                                         90.,          1.};
      const ComplexMatrix a4 = a2 * a2;
      const ComplexMatrix a6 = a4 * a2;
      const ComplexMatrix a8 = a6 * a2;
      u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    default: {
      constexpr std::array<double, 14> b{64764752532480000., 32382376266240000.,
                                         7771770303897600.,  1187353796428800.,
                                         129060195264000.,   10559470521600.,
                                         670442572800.,      33522128640.,
                                         1323241920.,        40840800.,
                                         960960.,            16380.,
                                         182.,               1.};
      const ComplexMatrix a4 = a2 * a2;
      const ComplexMatrix a6 = a4 * a2;
      const ComplexMatrix inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
      u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      const ComplexMatrix inner_v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2);
      v = inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
  }
}

}  // namespace detail

/// Matrix exponential by scaling and squaring around Padé approximants of
/// degree 3..13, selecting the degree from the 1-norm.
inline ComplexMatrix expm(const ComplexMatrix& a) {
  require_square(a, "expm");
  if (!all_finite(a)) throw NumericError("expm: non-finite entries");
  const auto n = a.rows();
  if (n == 0) return a;

  constexpr std::array<double, 5> theta{1.495585217958292e-2, 2.539398330063230e-1,
                                        9.504178996162932e-1, 2.097847961257068e0,
                                        5.371920351148152e0};
  constexpr std::array<int, 5> degree{3, 5, 7, 9, 13};

  const double nrm = norm1(a);
  ComplexMatrix u, v;
  for (std::size_t k = 0; k < 4; ++k) {
    if (nrm <= theta[k]) {
      detail::pade_uv(a, degree[k], u, v);
      return (v - u).partialPivLu().solve(v + u);
    }
  }
  int s = 0;
  if (nrm > theta[4]) s = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / theta[4]))));
  const ComplexMatrix scaled = a / std::ldexp(1.0, s);
  detail::pade_uv(scaled, 13, u, v);
  ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  if (!all_finite(r)) throw NumericError("expm: overflow during squaring");
  return r;
}

/// exp(t*A) v for any linear map given as `apply(x) -> A x`, by a scaled
/// truncated Taylor series. `norm_bound` must bound the operator 1-norm.
template <class Apply>
ComplexVector expm_action_op(Apply&& apply, double norm_bound, const ComplexVector& v, double t,
                             double tol = 1e-15) {
  if (!std::isfinite(norm_bound) || !std::isfinite(t)) throw NumericError("expm_action: non-finite input");
  if (t == 0.0 || norm_bound == 0.0) return v;
  const double scaled = norm_bound * std::abs(t);
  const int steps = std::max(1, static_cast<int>(std::ceil(scaled)));
  const double h = t / steps;
  ComplexVector x = v;
  for (int s = 0; s < steps; ++s) {
    ComplexVector term = x;
    ComplexVector acc = x;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 60; ++k) {
      term = apply(term);
      term *= h / k;
      acc += term;
      const double cur = term.cwiseAbs().maxCoeff();
      const double ref = std::max(acc.cwiseAbs().maxCoeff(), 1e-300);
      if (cur <= tol * ref && prev <= tol * ref) break;
      prev = cur;
    }
    x = std::move(acc);
  }
  return x;
}

inline ComplexVector expm_action(const ComplexMatrix& a, const ComplexVector& v, double t) {
  require_square(a, "expm_action");
  if (a.cols() != v.size()) throw DimensionError("expm_action: vector length does not match matrix");
  if (!all_finite(a)) throw NumericError("expm_action: non-finite entries");
  const Complex mu = a.trace() / static_cast<double>(a.rows());
  const ComplexMatrix shifted = a - mu * ComplexMatrix::Identity(a.rows(), a.cols());
  ComplexVector out = expm_action_op([&](const ComplexVector& x) { return ComplexVector(shifted * x); },
                                     norm1(shifted), v, t);
  return std::exp(mu * t) * out;
}

inline ComplexVector expm_action(const SparseMatrix& a, const ComplexVector& v, double t) {
  if (a.rows() != a.cols()) throw DimensionError("expm_action: matrix not square");
  if (a.cols() != v.size()) throw DimensionError("expm_action: vector length does not match matrix");
  return expm_action_op([&](const ComplexVector& x) { return ComplexVector(a * x); }, norm1(a), v, t);
}

// ---------------------------------------------------------------------------
// time grids, quadrature, RK4

/// Uniform grid t_k = start + k*dt, k = 0..steps.
inline std::vector<double> uniform_grid(double start, double end, double dt) {
  if (!(dt > 0.0) || !(end > start)) throw PreconditionError("uniform_grid: need dt > 0 and end > start");
  const auto steps = static_cast<std::size_t>(std::ceil((end - start) / dt - 1e-9));
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = start + static_cast<double>(k) * dt;
  return g;
}

inline void require_increasing(std::span<const double> grid, const char* what) {
  if (grid.empty()) throw PreconditionError(std::string(what) + ": empty time grid");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      throw PreconditionError(std::string(what) + ": time grid not strictly increasing at index " +
                              std::to_string(k));
}

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) acc += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return acc;
}

inline std::vector<double> cumulative_trapezoid(std::span<const double> x, std::span<const double> y) {
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t k = 1; k < x.size(); ++k)
    out[k] = out[k - 1] + 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return out;
}

/// Linear interpolation of (x, y) at `t`, clamped to the end values.
inline double interpolate(std::span<const double> x, std::span<const double> y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  const auto k = static_cast<std::size_t>(it - x.begin());
  const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return (1.0 - w) * y[k - 1] + w * y[k];
}

/// Classical fourth-order Runge-Kutta for y' = rhs(t, y) evaluated on every
/// point of `grid`. Returns y at each grid point (front() == y0).
template <class Rhs>
std::vector<ComplexVector> ode_step_sequence(Rhs&& rhs, const ComplexVector& y0, std::span<const double> grid) {
  require_increasing(grid, "ode_step_sequence");
  std::vector<ComplexVector> out;
  out.reserve(grid.size());
  out.push_back(y0);
  ComplexVector y = y0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double t = grid[k - 1];
    const double h = grid[k] - t;
    const ComplexVector k1 = rhs(t, y);
    const ComplexVector k2 = rhs(t + 0.5 * h, ComplexVector(y + 0.5 * h * k1));
    const ComplexVector k3 = rhs(t + 0.5 * h, ComplexVector(y + 0.5 * h * k2));
    const ComplexVector k4 = rhs(t + h, ComplexVector(y + h * k3));
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(y);
  }
  return out;
}

/// y' = generator(t) y + source(t).
template <class Generator, class Source>
std::vector<ComplexVector> ode_step_sequence(Generator&& generator, Source&& source, const ComplexVector& y0,
                                             std::span<const double> grid) {
  return ode_step_sequence(
      [&](double t, const ComplexVector& y) -> ComplexVector {
        return ComplexVector(generator(t) * y + source(t));
      },
      y0, grid);
}

}  // namespace qpd
