#pragma once

// Ground states, low-lying spectra, full spectra and thermal states.
//
// Sparse problems use Lanczos with full reorthogonalization and locking of
// converged vectors; dense problems go through LAPACK's divide-and-conquer
// symmetric/Hermitian eigensolvers, block by block over Sz sectors when the
// model conserves total Sz.

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "hamiltonians.hpp"
#include "spinspace.hpp"

namespace stchain {

struct EigenPair {
  double energy = 0.0;
  StateVector vector;
};

using Spectrum = std::vector<EigenPair>;

struct SolveOptions {
  bool full_space = false;  // ignore Sz conservation and work in the full basis
  int max_krylov = 300;     // further capped by memory_cap()
  int max_restarts = 60;
  double tol = 1e-9;  // residual < tol * max(1, |E|)
  std::uint64_t seed = 0x5eedULL;
  int threads = 0;
};

/// Basis a sparse solve runs in: the N/2 sector (which holds a member of
/// every spin multiplet) for field-free models, otherwise the full space.
inline BasisPtr solver_basis(const ModelSpec& model, bool full_space = false) {
  if (!full_space && model.field_free()) return build_basis(model.n_sites(), model.n_sites() / 2);
  return build_basis(model.n_sites());
}

namespace detail {

template <class T>
double dot_re(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (std::is_same_v<T, double>)
      s += a[i] * b[i];
    else
      s += (std::conj(a[i]) * b[i]).real();
  }
  return s;
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if constexpr (std::is_same_v<T, double>)
      s += a[i] * b[i];
    else
      s += std::conj(a[i]) * b[i];
  }
  return s;
}

template <class T>
double nrm(std::span<const T> a) {
  return std::sqrt(dot_re<T>(a, a));
}

template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Removes the components of w along every vector in `against` (two passes).
template <class T>
void orthogonalize(std::span<T> w, const std::vector<std::vector<T>>& against) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : against) {
      T c = dot<T>(q, std::span<const T>(w));
      axpy<T>(-c, q, w);
    }
}

/// Lanczos eigensolver restricted to the orthogonal complement of the
/// vectors already locked. Each call to next() returns the lowest
/// eigenpair of that complement and locks it.
template <class T>
class Lanczos {
 public:
  Lanczos(const ModelSpec& model, BasisPtr basis, const SolveOptions& opts)
      : model_(model), basis_(std::move(basis)), opts_(opts) {
    check_basis_for_model(model_, *basis_);
    const std::size_t dim = basis_->dim();
    std::size_t per_vec = dim * sizeof(T);
    std::size_t by_mem = std::max<std::size_t>(memory_cap() / std::max<std::size_t>(per_vec, 1), 24);
    max_krylov_ = static_cast<int>(std::min<std::size_t>({static_cast<std::size_t>(opts_.max_krylov), by_mem, dim}));
  }

  const std::vector<std::vector<T>>& locked() const { return locked_; }

  std::pair<double, std::vector<T>> next() {
    const std::size_t dim = basis_->dim();
    if (locked_.size() >= dim) throw SearchExhausted("Lanczos: the whole space has been exhausted");
    const std::size_t free_dim = dim - locked_.size();

    std::vector<T> start(dim);
    std::mt19937_64 rng(opts_.seed + 0x9E3779B97F4A7C15ULL * (locked_.size() + 1));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& x : start) {
      if constexpr (std::is_same_v<T, double>)
        x = u(rng);
      else
        x = T(u(rng), u(rng));
    }
    orthogonalize<T>(start, locked_);
    scale(start, 1.0 / nrm<T>(start));

    double last_residual = 0.0;
    for (int restart = 0; restart <= opts_.max_restarts; ++restart) {
      auto [theta, x, converged, residual] = run_krylov(std::move(start), free_dim);
      last_residual = residual;
      if (converged) {
        locked_.push_back(x);
        return {theta, std::move(x)};
      }
      start = std::move(x);
    }
    throw ConvergenceError("Lanczos did not converge", last_residual);
  }

 private:
  struct KrylovResult {
    double theta;
    std::vector<T> x;
    bool converged;
    double residual;
  };

  static void scale(std::vector<T>& v, double s) {
    for (auto& x : v) x *= s;
  }

  void apply(std::span<const T> in, std::span<T> out) const {
    apply_hamiltonian<T>(model_, *basis_, in, out, opts_.threads);
  }

  KrylovResult run_krylov(std::vector<T> v0, std::size_t free_dim) {
    const std::size_t dim = basis_->dim();
    const int m = static_cast<int>(std::min<std::size_t>(max_krylov_, free_dim));
    std::vector<std::vector<T>> V;
    V.reserve(m);
    V.push_back(std::move(v0));
    std::vector<double> alpha, beta;
    std::vector<T> w(dim);
    double theta = 0.0;
    Eigen::VectorXd s;
    for (int j = 0; j < m; ++j) {
      apply(V[j], w);
      orthogonalize<T>(w, locked_);
      alpha.push_back(dot_re<T>(V[j], std::span<const T>(w)));
      orthogonalize<T>(w, V);
      double b = nrm<T>(w);
      beta.push_back(b);

      const int k = j + 1;
      Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), k);
      Eigen::VectorXd sub = k > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), k - 1)) : Eigen::VectorXd();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      theta = tri.eigenvalues()(0);
      s = tri.eigenvectors().col(0);
      const double scale_e = std::max(1.0, std::abs(theta));
      const double est = std::abs(b * s(k - 1));
      const bool invariant = b < 1e-12 * scale_e;
      if (est < 0.1 * opts_.tol * scale_e || invariant || k == static_cast<int>(free_dim) || k == m) {
        std::vector<T> x = ritz_vector(V, s);
        // Rayleigh quotient and true residual.
        apply(x, w);
        orthogonalize<T>(w, locked_);
        double rq = dot_re<T>(x, std::span<const T>(w));
        axpy<T>(T(-rq), std::span<const T>(x), std::span<T>(w));
        double res = nrm<T>(w);
        bool ok = res < opts_.tol * std::max(1.0, std::abs(rq));
        return {rq, std::move(x), ok, res};
      }
      std::vector<T> next(w);
      scale(next, 1.0 / b);
      V.push_back(std::move(next));
    }
    return {theta, ritz_vector(V, s), false, 0.0};
  }

  std::vector<T> ritz_vector(const std::vector<std::vector<T>>& V, const Eigen::VectorXd& s) const {
    std::vector<T> x(basis_->dim());
    for (Eigen::Index i = 0; i < s.size(); ++i) axpy<T>(T(s(i)), std::span<const T>(V[i]), std::span<T>(x));
    orthogonalize<T>(x, locked_);
    scale(x, 1.0 / nrm<T>(x));
    return x;
  }

  const ModelSpec& model_;
  BasisPtr basis_;
  SolveOptions opts_;
  int max_krylov_ = 0;
  std::vector<std::vector<T>> locked_;
};

// Fixes the global phase: the largest-magnitude amplitude becomes real positive.
inline void canonical_phase(StateVector& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.dim(); ++i)
    if (std::abs(v.amps[i]) > std::abs(v.amps[best]) + 1e-12) best = i;
  if (v.dim() == 0 || std::abs(v.amps[best]) == 0.0) return;
  cplx phase = std::abs(v.amps[best]) / v.amps[best];
  for (auto& a : v.amps) a *= phase;
}

template <class T>
StateVector to_state(const BasisPtr& basis, const std::vector<T>& x) {
  StateVector v(basis);
  for (std::size_t i = 0; i < x.size(); ++i) v.amps[i] = x[i];
  canonical_phase(v);
  return v;
}

template <class T>
Spectrum lowest_pairs(const ModelSpec& model, const BasisPtr& basis, int k, const SolveOptions& opts) {
  Lanczos<T> solver(model, basis, opts);
  Spectrum out;
  for (int i = 0; i < k; ++i) {
    auto [e, x] = solver.next();
    out.push_back({e, to_state<T>(basis, x)});
  }
  std::stable_sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) { return a.energy < b.energy; });
  return out;
}

inline Spectrum lowest_pairs_dispatch(const ModelSpec& model, int k, const SolveOptions& opts) {
  BasisPtr basis = solver_basis(model, opts.full_space);
  if (static_cast<std::size_t>(k) > basis->dim())
    throw InvalidArgument("requested more eigenpairs than the basis dimension");
  if (model.is_real()) return lowest_pairs<double>(model, basis, k, opts);
  return lowest_pairs<cplx>(model, basis, k, opts);
}

}  // namespace detail

inline EigenPair ground_state(const ModelSpec& model, const SolveOptions& opts = {}) {
  return detail::lowest_pairs_dispatch(model, 1, opts).front();
}

/// The k lowest eigenpairs (k <= 12), energies nondecreasing. Degenerate
/// levels come back in an arbitrary orthonormal basis.
inline Spectrum lowest_k_states(const ModelSpec& model, int k, const SolveOptions& opts = {}) {
  if (k < 1 || k > 12) throw InvalidArgument("lowest_k_states: k must lie in [1, 12]");
  return detail::lowest_pairs_dispatch(model, k, opts);
}

/// <S_tot^2> with S = sum_i sigma_i / 2.
inline double total_spin_sq(const StateVector& psi) {
  const int n = psi.n_sites();
  const double nsq = psi.norm_sq();
  if (n == 1) return 0.75;
  // S^2 = 3N/4 + (1/2) sum_{i<j} sigma_i . sigma_j
  auto pairs = all_pairs_model(n, 0.5);
  auto hv = matvec(pairs, psi);
  cplx s = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) s += std::conj(psi.amps[i]) * hv[i];
  return 0.75 * n + s.real() / nsq;
}

/// Lowest global singlet above the ground state. Eigenpairs are computed
/// one at a time in the Sz = 0 sector; degenerate clusters are resolved by
/// diagonalizing S^2 inside the cluster.
inline EigenPair first_excited_singlet(const ModelSpec& model, const SolveOptions& opts = {}, int k_cap = 32) {
  if (!model.field_free()) throw InvalidArgument("first_excited_singlet: model must be field free");
  if (model.n_sites() % 2 != 0) throw InvalidArgument("first_excited_singlet: n_sites must be even");
  BasisPtr basis = solver_basis(model, false);
  detail::Lanczos<double> solver(model, basis, opts);
  const int cap = static_cast<int>(std::min<std::size_t>(k_cap, basis->dim()));
  Spectrum found;
  constexpr double kDegenerate = 1e-8;
  int singlets_seen = 0;
  std::size_t cluster_begin = 0;

  auto resolve_cluster = [&](std::size_t b, std::size_t e) -> std::optional<EigenPair> {
    const auto n = static_cast<Eigen::Index>(e - b);
    Eigen::MatrixXcd s2(n, n);
    auto pairs = all_pairs_model(model.n_sites(), 0.5);
    for (Eigen::Index r = 0; r < n; ++r) {
      auto hv = matvec(pairs, found[b + r].vector);
      for (Eigen::Index c = 0; c < n; ++c) {
        cplx v = 0.0;
        const auto& bra = found[b + c].vector.amps;
        for (std::size_t i = 0; i < hv.size(); ++i) v += std::conj(bra[i]) * hv[i];
        s2(c, r) = v;
      }
      s2(r, r) += 0.75 * model.n_sites();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (s2 + s2.adjoint()));
    for (Eigen::Index q = 0; q < n; ++q) {
      if (es.eigenvalues()(q) >= 1e-6) continue;
      if (singlets_seen++ == 0) continue;  // the ground state
      StateVector v(basis);
      double energy = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        cplx c = es.eigenvectors()(r, q);
        energy += std::norm(c) * found[b + r].energy;
        for (std::size_t i = 0; i < v.dim(); ++i) v.amps[i] += c * found[b + r].vector.amps[i];
      }
      v.normalize();
      detail::canonical_phase(v);
      return EigenPair{energy, std::move(v)};
    }
    return std::nullopt;
  };

  for (int i = 0; i < cap; ++i) {
    auto [e, x] = solver.next();
    found.push_back({e, detail::to_state<double>(basis, x)});
    const std::size_t last = found.size() - 1;
    if (last > cluster_begin && e - found[last - 1].energy > kDegenerate) {
      if (auto hit = resolve_cluster(cluster_begin, last)) return *hit;
      cluster_begin = last;
    }
  }
  if (found.size() == basis->dim())
    if (auto hit = resolve_cluster(cluster_begin, found.size())) return *hit;
  throw SearchExhausted("first_excited_singlet: no excited singlet among the lowest " + std::to_string(cap) + " states");
}

namespace detail {

// In-place Hermitian eigendecomposition (LAPACK zheevd); eigenvalues ascending.
inline Eigen::VectorXd hermitian_eigen(Eigen::MatrixXcd& a, bool vectors) {
  const auto d = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(d);
  if (d == 0) return w;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', d,
                                   reinterpret_cast<lapack_complex_double*>(a.data()), d, w.data());
  if (info != 0) throw ConvergenceError("zheevd failed with info " + std::to_string(info), 0.0);
  return w;
}

// Dense eigendecomposition of one block; eigenvalues ascending.
inline void dense_block_spectrum(const ModelSpec& model, const BasisPtr& basis, Spectrum& out) {
  const auto d = static_cast<lapack_int>(basis->dim());
  if (basis->dim() > kDenseBlockCap)
    throw CapacityError("full_spectrum: block dimension " + std::to_string(basis->dim()) + " exceeds dense cap");
  std::vector<double> w(d);
  if (model.is_real()) {
    Eigen::MatrixXd h = dense_hamiltonian<double>(model, *basis);
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', d, h.data(), d, w.data());
    if (info != 0) throw ConvergenceError("dsyevd failed with info " + std::to_string(info), 0.0);
    for (lapack_int c = 0; c < d; ++c) {
      StateVector v(basis);
      for (lapack_int r = 0; r < d; ++r) v.amps[r] = h(r, c);
      out.push_back({w[c], std::move(v)});
    }
  } else {
    Eigen::MatrixXcd h = dense_hamiltonian<cplx>(model, *basis);
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', d, reinterpret_cast<lapack_complex_double*>(h.data()), d, w.data());
    if (info != 0) throw ConvergenceError("zheevd failed with info " + std::to_string(info), 0.0);
    for (lapack_int c = 0; c < d; ++c) {
      StateVector v(basis);
      for (lapack_int r = 0; r < d; ++r) v.amps[r] = h(r, c);
      out.push_back({w[c], std::move(v)});
    }
  }
}

}  // namespace detail

/// Complete orthonormal eigenbasis, sorted by energy. Sz-conserving models
/// are diagonalized sector by sector, so eigenvectors live in sector bases.
inline Spectrum full_spectrum(const ModelSpec& model) {
  const int n = model.n_sites();
  if (n > kDenseSiteCap) throw CapacityError("full_spectrum: n_sites above dense cap " + std::to_string(kDenseSiteCap));
  Spectrum out;
  out.reserve(std::size_t{1} << n);
  if (model.conserves_sz()) {
    for (int up = 0; up <= n; ++up) detail::dense_block_spectrum(model, build_basis(n, up), out);
  } else {
    detail::dense_block_spectrum(model, build_basis(n), out);
  }
  std::stable_sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) { return a.energy < b.energy; });
  return out;
}

/// Boltzmann weights over a sorted spectrum, truncated once the cumulative
/// weight reaches 1 - cutoff and renormalized.
inline std::vector<double> thermal_weights(const Spectrum& spectrum, double beta, double cutoff = 1e-12) {
  if (beta < 0.0) throw InvalidArgument("thermal weights: beta must be nonnegative");
  if (spectrum.empty()) throw InvalidArgument("thermal weights: empty spectrum");
  const double e0 = spectrum.front().energy;
  std::vector<double> w(spectrum.size());
  double z = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) z += (w[k] = std::exp(-beta * (spectrum[k].energy - e0)));
  double cum = 0.0;
  std::size_t keep = spectrum.size();
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    w[k] /= z;
    cum += w[k];
    if (cum >= 1.0 - cutoff) {
      keep = k + 1;
      break;
    }
  }
  w.resize(keep);
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

inline DensityOp thermal_state(const Spectrum& spectrum, double beta) {
  auto w = thermal_weights(spectrum, beta);
  std::vector<StateVector> vecs;
  vecs.reserve(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) vecs.push_back(spectrum[k].vector);
  return DensityOp::mixture(std::move(w), std::move(vecs));
}

/// exp(-beta H) / Z for n_sites <= 14.
inline DensityOp thermal_state(const ModelSpec& model, double beta) {
  if (beta < 0.0) throw InvalidArgument("thermal_state: beta must be nonnegative");
  Spectrum spectrum = full_spectrum(model);
  auto w = thermal_weights(spectrum, beta);
  std::vector<StateVector> vecs;
  vecs.reserve(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) vecs.push_back(std::move(spectrum[k].vector));
  return DensityOp::mixture(std::move(w), std::move(vecs));
}

}  // namespace stchain
