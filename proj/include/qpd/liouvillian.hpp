#pragma once

// Vectorized generator of the average detector dynamics, the field-coupling
// maps, Green's functions, spectral classification and the Dyson expansion.

#include <algorithm>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "qpd/model.hpp"

namespace qpd {

namespace detail {

inline bool sparse_is_diagonal(const SparseMatrix& m) {
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0) return false;
  return true;
}

inline SparseMatrix prune_zeros(SparseMatrix m) {
  m.prune([](Eigen::Index, Eigen::Index, const Complex& v) { return v != 0.0; });
  return m;
}

/// Row index when every nonzero of `m` lies in one row, else -1.
inline Eigen::Index single_row(const SparseMatrix& m) {
  Eigen::Index row = -1;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      if (it.value() == 0.0) continue;
      if (row >= 0 && it.row() != row) return -1;
      row = it.row();
    }
  return row;
}

}  // namespace detail

/// Matrix-free action of the generator on d×d operators. Diagonal jump
/// operators, single-entry jumps and a diagonal Hamiltonian are folded into
/// an elementwise rate matrix; everything else goes through sparse products.
class OperatorAction {
 public:
  OperatorAction() = default;

  OperatorAction(const SparseMatrix& h, const std::vector<SparseMatrix>& jumps) : d_(h.rows()) {
    rate_ = ComplexMatrix::Zero(d_, d_);
    if (detail::sparse_is_diagonal(h)) {
      const ComplexVector hd = ComplexMatrix(h).diagonal();
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index i = 0; i < d_; ++i) rate_(i, j) += -kI * (hd(i) - hd(j));
    } else {
      h_ = h;
      has_h_ = true;
    }
    for (const auto& raw : jumps) {
      const SparseMatrix o = detail::prune_zeros(raw);
      if (o.nonZeros() == 0) continue;
      if (detail::sparse_is_diagonal(o)) {
        ComplexVector od = ComplexVector::Zero(d_);
        for (int c = 0; c < o.outerSize(); ++c)
          for (SparseMatrix::InnerIterator it(o, c); it; ++it) od(it.row()) = it.value();
        for (Eigen::Index j = 0; j < d_; ++j)
          for (Eigen::Index i = 0; i < d_; ++i)
            rate_(i, j) += od(i) * std::conj(od(j)) - 0.5 * std::norm(od(i)) - 0.5 * std::norm(od(j));
      } else if (o.nonZeros() == 1) {
        Eigen::Index a = 0, b = 0;
        double w = 0.0;
        for (int c = 0; c < o.outerSize(); ++c)
          for (SparseMatrix::InnerIterator it(o, c); it; ++it) {
            a = it.row();
            b = it.col();
            w = std::norm(it.value());
          }
        rate_.row(b).array() -= 0.5 * w;
        rate_.col(b).array() -= 0.5 * w;
        feeds_.emplace_back(a, b, w);
      } else if (const auto r = detail::single_row(o); r >= 0) {
        row_ops_.push_back({r, ComplexMatrix(o).row(r)});
      } else {
        general_.push_back(o);
        general_adj_.push_back(SparseMatrix(o.adjoint()));
      }
    }
  }

  ComplexMatrix apply(const ComplexMatrix& rho) const {
    ComplexMatrix out = rate_.cwiseProduct(rho);
    if (has_h_) out += -kI * (ComplexMatrix(h_ * rho) - ComplexMatrix(rho * h_));
    for (const auto& [a, b, w] : feeds_) out(a, a) += w * rho(b, b);
    // O = |r><u|: O rho O† = |r><r| (u rho u†), O†O rho = u† (u rho)
    for (const auto& op : row_ops_) {
      const Eigen::RowVectorXcd u_rho = op.u * rho;
      const ComplexVector rho_ud = rho * op.u.adjoint();
      out(op.row, op.row) += u_rho.cwiseProduct(op.u.conjugate()).sum();
      out.noalias() -= 0.5 * op.u.adjoint() * u_rho;
      out.noalias() -= 0.5 * rho_ud * op.u;
    }
    for (std::size_t k = 0; k < general_.size(); ++k) {
      const auto& o = general_[k];
      const auto& od = general_adj_[k];
      const ComplexMatrix o_rho = o * rho;
      const ComplexMatrix rho_od = rho * od;
      out += o_rho * od;
      out -= 0.5 * ComplexMatrix(od * o_rho);
      out -= 0.5 * ComplexMatrix(rho_od * o);
    }
    return out;
  }

 private:
  Eigen::Index d_ = 0;
  ComplexMatrix rate_;
  SparseMatrix h_;
  bool has_h_ = false;
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> feeds_;
  struct RowOp {
    Eigen::Index row;
    Eigen::RowVectorXcd u;
  };
  std::vector<RowOp> row_ops_;
  std::vector<SparseMatrix> general_, general_adj_;
};

/// Vectorized generator A (rotating frame), field maps L⁺, L⁻, S̄.
///   L⁺ ρ = [Sρ, L†],  L⁻ ρ = [L, ρS†],  S̄ ρ = SρS† − ρ.
/// Small systems carry dense superoperators; larger ones act matrix-free.
/// Values are immutable; lazily built caches are thread safe.
class Liouvillian {
 public:
  /// Hilbert dimension up to which dense superoperators are used.
  static constexpr Eigen::Index dense_limit = 16;

  static Liouvillian build(const DetectorSpec& spec, double carrier = 0.0) {
    const auto problems = spec.structural_problems();
    if (!problems.empty()) throw DimensionError("Liouvillian::build: " + problems.front());
    Liouvillian lv;
    lv.spec_ = std::make_shared<const DetectorSpec>(spec);
    lv.carrier_ = carrier;
    const Eigen::Index d = spec.dim;
    lv.h_rot_ = spec.H;
    if (carrier != 0.0) {
      std::vector<Triplet> t;
      for (Eigen::Index i = 0; i < d; ++i)
        if (spec.excitation(i) != 0.0)
          t.emplace_back(static_cast<int>(i), static_cast<int>(i), -carrier * spec.excitation(i));
      SparseMatrix shift(d, d);
      shift.setFromTriplets(t.begin(), t.end());
      lv.h_rot_ += shift;
    }
    lv.jumps_ = spec.baths;
    lv.jumps_.push_back(spec.L);
    for (const auto& a : spec.amplifiers) lv.jumps_.push_back(std::sqrt(2.0 * a.rate) * a.observable(d));
    lv.L_ = spec.L;
    lv.L_adj_ = spec.L.adjoint();
    lv.S_ = spec.S;
    lv.S_adj_ = spec.S.adjoint();
    lv.s_identity_ = spec.scattering_is_identity();
    lv.l_row_ = detail::single_row(spec.L);
    if (lv.l_row_ >= 0) lv.l_u_ = ComplexMatrix(spec.L).row(lv.l_row_);
    lv.cache_ = std::make_shared<Cache>();
    if (d <= dense_limit) {
      lv.dense_ = true;
      lv.A_dense_ = ComplexMatrix(lv.sparse_generator());
      lv.Lp_dense_ = ComplexMatrix(lv.sparse_lplus());
      lv.Lm_dense_ = ComplexMatrix(lv.sparse_lminus());
      lv.S_dense_ = ComplexMatrix(lv.sparse_ssuper());
    } else {
      lv.action_ = std::make_shared<OperatorAction>(lv.h_rot_, lv.jumps_);
    }
    return lv;
  }

  const DetectorSpec& spec() const { return *spec_; }
  double carrier() const noexcept { return carrier_; }
  Eigen::Index hilbert_dim() const { return spec_->dim; }
  Eigen::Index dim() const { return spec_->dim * spec_->dim; }
  bool has_scattering() const noexcept { return !s_identity_; }
  const SparseMatrix& rotating_hamiltonian() const noexcept { return h_rot_; }

  ComplexVector apply(const ComplexVector& v) const {
    if (dense_) return A_dense_ * v;
    const auto d = hilbert_dim();
    const Eigen::Map<const ComplexMatrix> rho(v.data(), d, d);
    const ComplexMatrix out = action_->apply(rho);
    return Eigen::Map<const ComplexVector>(out.data(), d * d);
  }

  ComplexVector apply_lplus(const ComplexVector& v) const {
    if (dense_) return Lp_dense_ * v;
    const auto d = hilbert_dim();
    const Eigen::Map<const ComplexMatrix> rho(v.data(), d, d);
    ComplexMatrix out;
    if (s_identity_ && l_row_ >= 0) {
      // L = |r><u|: rho L† puts rho u† in column r, L† rho = u† rho(r,:)
      out = -l_u_.adjoint() * rho.row(l_row_);
      out.col(l_row_) += rho * l_u_.adjoint();
    } else if (s_identity_) {
      out = rho * L_adj_;
      out -= L_adj_ * rho;
    } else {
      const ComplexMatrix s_rho = S_ * rho;
      out = s_rho * L_adj_;
      out -= L_adj_ * s_rho;
    }
    return Eigen::Map<const ComplexVector>(out.data(), d * d);
  }

  ComplexVector apply_lminus(const ComplexVector& v) const {
    if (dense_) return Lm_dense_ * v;
    const auto d = hilbert_dim();
    const Eigen::Map<const ComplexMatrix> rho(v.data(), d, d);
    ComplexMatrix out;
    if (s_identity_ && l_row_ >= 0) {
      out = -rho.col(l_row_) * l_u_;
      out.row(l_row_) += l_u_ * rho;
    } else if (s_identity_) {
      out = L_ * rho;
      out -= rho * L_;
    } else {
      const ComplexMatrix rho_sd = rho * S_adj_;
      out = L_ * rho_sd;
      out -= rho_sd * L_;
    }
    return Eigen::Map<const ComplexVector>(out.data(), d * d);
  }

  ComplexVector apply_ssuper(const ComplexVector& v) const {
    if (s_identity_) return ComplexVector::Zero(v.size());
    if (dense_) return S_dense_ * v;
    const auto d = hilbert_dim();
    const Eigen::Map<const ComplexMatrix> rho(v.data(), d, d);
    ComplexMatrix out = ComplexMatrix(S_ * rho) * S_adj_;
    out -= rho;
    return Eigen::Map<const ComplexVector>(out.data(), d * d);
  }

  /// Sparse superoperator of A (built on first use).
  const SparseMatrix& A_sparse() const {
    std::call_once(cache_->a_once, [&] { cache_->a = detail::prune_zeros(sparse_generator()); });
    return cache_->a;
  }

  ComplexMatrix A() const { return dense_ ? A_dense_ : ComplexMatrix(checked_sparse(A_sparse(), "A")); }
  ComplexMatrix Lplus() const { return dense_ ? Lp_dense_ : ComplexMatrix(checked_sparse(sparse_lplus(), "Lplus")); }
  ComplexMatrix Lminus() const {
    return dense_ ? Lm_dense_ : ComplexMatrix(checked_sparse(sparse_lminus(), "Lminus"));
  }
  ComplexMatrix Ssuper() const {
    return dense_ ? S_dense_ : ComplexMatrix(checked_sparse(sparse_ssuper(), "Ssuper"));
  }

  /// Upper bound on the superoperator 1-norm of A; exact for d ≤ 64.
  double norm_bound() const {
    std::call_once(cache_->norm_once, [&] {
      if (hilbert_dim() <= 64) {
        cache_->norm = norm1(A_sparse());
      } else {
        // single-entry jumps sharing a source level add up to 2·max_b Σ|c|²
        double acc = 2.0 * norm1(h_rot_);
        std::vector<double> outflow(static_cast<std::size_t>(hilbert_dim()), 0.0);
        for (const auto& raw : jumps_) {
          const SparseMatrix o = detail::prune_zeros(raw);
          if (o.nonZeros() == 0) continue;
          if (detail::sparse_is_diagonal(o)) {
            double mx = 0.0;
            for (int c = 0; c < o.outerSize(); ++c)
              for (SparseMatrix::InnerIterator it(o, c); it; ++it) mx = std::max(mx, std::norm(it.value()));
            acc += 2.0 * mx;
          } else if (o.nonZeros() == 1) {
            for (int c = 0; c < o.outerSize(); ++c)
              for (SparseMatrix::InnerIterator it(o, c); it; ++it)
                outflow[static_cast<std::size_t>(it.col())] += std::norm(it.value());
          } else {
            const double n1 = norm1(o);
            const double ninf = norm1(SparseMatrix(o.adjoint()));
            acc += n1 * n1 + n1 * ninf;
          }
        }
        acc += 2.0 * *std::max_element(outflow.begin(), outflow.end());
        cache_->norm = acc;
      }
    });
    return cache_->norm;
  }

  /// Vectorized identity; 1̄ᵀA = 0 expresses trace preservation.
  ComplexVector identity_vector() const {
    return vectorize(ComplexMatrix::Identity(hilbert_dim(), hilbert_dim()));
  }

  /// x̄ for amplifier `channel` (the vectorized projector).
  ComplexVector monitored_vector(std::size_t channel) const {
    if (channel >= spec_->amplifiers.size()) throw PreconditionError("monitored_vector: channel out of range");
    return vectorize(ComplexMatrix(spec_->amplifiers[channel].projector(hilbert_dim())));
  }

  ComplexVector observable_vector(std::size_t channel) const {
    if (channel >= spec_->amplifiers.size()) throw PreconditionError("observable_vector: channel out of range");
    return vectorize(ComplexMatrix(spec_->amplifiers[channel].observable(hilbert_dim())));
  }

 private:
  struct Cache {
    std::once_flag a_once, norm_once;
    SparseMatrix a;
    double norm = 0.0;
  };

  static const SparseMatrix& checked_sparse(const SparseMatrix& m, const char* what) {
    if (m.rows() > 4096)
      throw DimensionError(std::string("Liouvillian::") + what + ": dense superoperator requested for d > 64");
    return m;
  }

  SparseMatrix sparse_generator() const {
    SparseMatrix a = sparse_hamiltonian_superop(h_rot_);
    for (const auto& o : jumps_) a += sparse_lindblad_superop(o);
    return a;
  }
  SparseMatrix sparse_lplus() const {
    const auto d = hilbert_dim();
    const SparseMatrix id = sparse_identity(d);
    return SparseMatrix(kron(SparseMatrix(L_adj_.transpose()), S_) - kron(id, SparseMatrix(L_adj_ * S_)));
  }
  SparseMatrix sparse_lminus() const {
    const auto d = hilbert_dim();
    const SparseMatrix id = sparse_identity(d);
    return SparseMatrix(kron(SparseMatrix(S_adj_.transpose()), L_) -
                        kron(SparseMatrix(SparseMatrix(S_adj_ * L_).transpose()), id));
  }
  SparseMatrix sparse_ssuper() const {
    return SparseMatrix(kron(SparseMatrix(S_adj_.transpose()), S_) - sparse_identity(dim()));
  }

  std::shared_ptr<const DetectorSpec> spec_;
  double carrier_ = 0.0;
  SparseMatrix h_rot_, L_, L_adj_, S_, S_adj_;
  std::vector<SparseMatrix> jumps_;
  bool s_identity_ = true;
  Eigen::Index l_row_ = -1;
  Eigen::RowVectorXcd l_u_;
  bool dense_ = false;
  ComplexMatrix A_dense_, Lp_dense_, Lm_dense_, S_dense_;
  std::shared_ptr<const OperatorAction> action_;
  std::shared_ptr<Cache> cache_;
};

// ---------------------------------------------------------------------------
// validation

struct ValidationReport {
  std::vector<std::string> problems;
  double stationarity_residual = 0.0;  // ‖A ρ̄(t₀)‖
  bool stationary = true;

  bool ok() const { return problems.empty(); }
};

inline ValidationReport validate(const DetectorSpec& spec, double carrier = 0.0) {
  ValidationReport r;
  r.problems = spec.structural_problems();
  if (!r.problems.empty()) return r;
  const auto lv = Liouvillian::build(spec, carrier);
  r.stationarity_residual = lv.apply(vectorize(spec.initial_state)).cwiseAbs().maxCoeff();
  r.stationary = r.stationarity_residual <= 1e-10 * std::max(1.0, lv.norm_bound());
  return r;
}

// ---------------------------------------------------------------------------
// block structure and Green's functions

using Partition = std::vector<std::vector<Eigen::Index>>;

/// Connected components of the sparsity graph of A (exact zeros only),
/// each sorted, ordered by smallest member.
inline Partition detect_blocks(const Liouvillian& liou) {
  const SparseMatrix& a = liou.A_sparse();
  const Eigen::Index n = a.rows();
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  auto find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (int c = 0; c < a.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(a, c); it; ++it) {
      if (it.value() == 0.0) continue;
      const auto r1 = find(it.row()), r2 = find(it.col());
      if (r1 != r2) parent[static_cast<std::size_t>(std::max(r1, r2))] = std::min(r1, r2);
    }
  std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) groups[static_cast<std::size_t>(find(i))].push_back(i);
  Partition out;
  for (auto& g : groups)
    if (!g.empty()) out.push_back(std::move(g));
  return out;
}

namespace detail {

inline ComplexMatrix block_of(const SparseMatrix& a, const std::vector<Eigen::Index>& idx) {
  ComplexMatrix sub(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a.coeff(idx[i], idx[j]);
  return sub;
}

}  // namespace detail

/// G(t) = exp(A t), exponentiated block by block.
inline ComplexMatrix greens_function(const Liouvillian& liou, double t) {
  if (t < 0.0) throw PreconditionError("greens_function: t must be non-negative");
  if (liou.hilbert_dim() > 64) throw DimensionError("greens_function: dense Green's function limited to d <= 64");
  const auto n = liou.dim();
  ComplexMatrix g = ComplexMatrix::Zero(n, n);
  for (const auto& blk : detect_blocks(liou)) {
    const ComplexMatrix e = expm(ComplexMatrix(t * detail::block_of(liou.A_sparse(), blk)));
    for (std::size_t i = 0; i < blk.size(); ++i)
      for (std::size_t j = 0; j < blk.size(); ++j)
        g(blk[i], blk[j]) = e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return g;
}

/// G(t) v without forming G.
inline ComplexVector greens_action(const Liouvillian& liou, const ComplexVector& v, double t) {
  if (t < 0.0) throw PreconditionError("greens_action: t must be non-negative");
  if (v.size() != liou.dim()) throw DimensionError("greens_action: vector length mismatch");
  return expm_action_op([&](const ComplexVector& x) { return liou.apply(x); }, liou.norm_bound(), v, t);
}

// ---------------------------------------------------------------------------
// spectrum

enum class ModeKind { persistent, decaying, oscillatory_decaying };

inline const char* to_string(ModeKind k) {
  switch (k) {
    case ModeKind::persistent: return "persistent";
    case ModeKind::decaying: return "decaying";
    case ModeKind::oscillatory_decaying: return "oscillatory-decaying";
  }
  return "";
}

struct Mode {
  Complex eigenvalue;
  ModeKind kind;
  std::vector<Eigen::Index> block;  // support of the eigenvector
  ComplexVector eigenvector;        // full-length, zero outside `block`
};

/// Classification tolerance 1e-10·max(1, ‖A‖).
inline double spectrum_tolerance(const Liouvillian& liou) { return 1e-10 * std::max(1.0, liou.norm_bound()); }

inline ModeKind classify(Complex ev, double tol) {
  if (std::abs(ev.imag()) <= tol) return ev.real() >= -tol ? ModeKind::persistent : ModeKind::decaying;
  return ModeKind::oscillatory_decaying;
}

inline std::vector<Mode> spectrum(const Liouvillian& liou, bool with_vectors = false) {
  const double tol = spectrum_tolerance(liou);
  std::vector<Mode> out;
  for (const auto& blk : detect_blocks(liou)) {
    const ComplexMatrix sub = detail::block_of(liou.A_sparse(), blk);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(sub, with_vectors);
    if (es.info() != Eigen::Success) throw NumericError("spectrum: eigensolver failed");
    for (Eigen::Index k = 0; k < sub.rows(); ++k) {
      Mode m{es.eigenvalues()(k), classify(es.eigenvalues()(k), tol), blk, {}};
      if (with_vectors) {
        m.eigenvector = ComplexVector::Zero(liou.dim());
        for (std::size_t i = 0; i < blk.size(); ++i) m.eigenvector(blk[i]) = es.eigenvectors()(static_cast<Eigen::Index>(i), k);
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

inline std::size_t count_modes(const std::vector<Mode>& modes, ModeKind kind) {
  return static_cast<std::size_t>(std::count_if(modes.begin(), modes.end(), [&](const Mode& m) { return m.kind == kind; }));
}

// ---------------------------------------------------------------------------
// Dyson expansion

/// Σ_{k≤order} G_k(t) with G_0(τ) = exp(diag(a0) τ) and
/// G_k(t) = ∫₀ᵗ G_0(t−τ) A1 G_{k−1}(τ) dτ, evaluated on an m-interval grid
/// with composite Simpson / 3-8 quadrature.
inline ComplexMatrix dyson_series(const ComplexVector& a0, const ComplexMatrix& a1, double t, int order,
                                  int intervals = 400) {
  if (order < 0) throw PreconditionError("dyson_greens: order must be non-negative");
  if (a1.rows() != a0.size() || a1.cols() != a0.size()) throw DimensionError("dyson_greens: split size mismatch");
  if (t < 0.0) throw PreconditionError("dyson_greens: t must be non-negative");
  const Eigen::Index n = a0.size();
  const int m = std::max(intervals, 4);
  const double h = t / m;
  std::vector<ComplexVector> g0(static_cast<std::size_t>(m + 1));  // diagonal of G_0(j h)
  for (int j = 0; j <= m; ++j) g0[static_cast<std::size_t>(j)] = (a0 * (j * h)).array().exp();
  if (t == 0.0 || order == 0) return ComplexMatrix(g0.back().asDiagonal());

  // quadrature weights for ∫ over [0, j h]
  auto weights = [&](int j) {
    std::vector<double> w(static_cast<std::size_t>(j + 1), 0.0);
    if (j == 0) return w;
    if (j == 1) {
      w[0] = w[1] = 0.5 * h;
      return w;
    }
    int simpson_end = j;
    if (j % 2 == 1) simpson_end = j - 3;
    for (int i = 0; i + 2 <= simpson_end; i += 2) {
      w[static_cast<std::size_t>(i)] += h / 3.0;
      w[static_cast<std::size_t>(i + 1)] += 4.0 * h / 3.0;
      w[static_cast<std::size_t>(i + 2)] += h / 3.0;
    }
    if (j % 2 == 1) {
      const int s = simpson_end;
      const double c = 3.0 * h / 8.0;
      w[static_cast<std::size_t>(s)] += c;
      w[static_cast<std::size_t>(s + 1)] += 3.0 * c;
      w[static_cast<std::size_t>(s + 2)] += 3.0 * c;
      w[static_cast<std::size_t>(s + 3)] += c;
    }
    return w;
  };

  std::vector<ComplexMatrix> prev(static_cast<std::size_t>(m + 1));
  for (int j = 0; j <= m; ++j) prev[static_cast<std::size_t>(j)] = g0[static_cast<std::size_t>(j)].asDiagonal();
  ComplexMatrix total = prev.back();
  for (int k = 1; k <= order; ++k) {
    std::vector<ComplexMatrix> b(static_cast<std::size_t>(m + 1));
    for (int i = 0; i <= m; ++i) b[static_cast<std::size_t>(i)] = a1 * prev[static_cast<std::size_t>(i)];
    std::vector<ComplexMatrix> cur(static_cast<std::size_t>(m + 1), ComplexMatrix::Zero(n, n));
    for (int j = 1; j <= m; ++j) {
      const auto w = weights(j);
      ComplexMatrix acc = ComplexMatrix::Zero(n, n);
      for (int i = 0; i <= j; ++i)
        acc += w[static_cast<std::size_t>(i)] *
               (g0[static_cast<std::size_t>(j - i)].asDiagonal() * b[static_cast<std::size_t>(i)]);
      cur[static_cast<std::size_t>(j)] = std::move(acc);
    }
    total += cur.back();
    prev = std::move(cur);
  }
  return total;
}

/// Dyson-series Green's function for the split A = A0 + A1 (A0 diagonal).
inline ComplexMatrix dyson_greens(const Liouvillian& liou, const ComplexMatrix& a0, const ComplexMatrix& a1, double t,
                                  int order, int intervals = 400) {
  if (order < 0) throw PreconditionError("dyson_greens: order must be non-negative");
  if (!is_diagonal(a0, 0.0)) throw PreconditionError("dyson_greens: A0 must be diagonal");
  const ComplexMatrix a = liou.A();
  if (a0.rows() != a.rows() || a1.rows() != a.rows() || a0.cols() != a.cols() || a1.cols() != a.cols())
    throw DimensionError("dyson_greens: split does not match the generator size");
  if ((a0 + a1 - a).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw PreconditionError("dyson_greens: A0 + A1 differs from A");
  return dyson_series(a0.diagonal(), a1, t, order, intervals);
}

}  // namespace qpd
