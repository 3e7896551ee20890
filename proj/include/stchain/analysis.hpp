#pragma once

// Distinguishability and entanglement metrics.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "eigensolver.hpp"
#include "spinspace.hpp"
#include "stmeasure.hpp"

namespace stchain {

/// Probability vector over a shared outcome index.
struct Distribution {
  std::vector<double> probs;

  Distribution() = default;
  explicit Distribution(std::vector<double> p) : probs(std::move(p)) {
    double total = 0.0;
    for (double x : probs) {
      if (x < 0.0) throw InvalidArgument("distribution entries must be nonnegative");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("distribution must sum to 1");
  }
};

/// (1/2) sum_a |p(a) - q(a)|; the shorter vector is zero-padded.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    double pa = a < p.size() ? p[a] : 0.0;
    double qa = a < q.size() ? q[a] : 0.0;
    s += std::abs(pa - qa);
  }
  return std::min(1.0, 0.5 * s);
}

inline double total_variation(const Distribution& p, const Distribution& q) { return total_variation(p.probs, q.probs); }

inline double total_variation(const TripletProfile& p, const TripletProfile& q) { return total_variation(p.probs, q.probs); }

namespace detail {

inline double trace_distance_uniform(const DensityOp& rho) {
  const double d = std::ldexp(1.0, rho.n_sites());
  double s = 0.0;
  for (double w : rho.weights()) s += std::abs(w - 1.0 / d);
  s += (d - static_cast<double>(rho.rank())) / d;
  return std::clamp(0.5 * s, 0.0, 1.0);
}

}  // namespace detail

namespace detail {

// Trace norm of sum_k d_k |u_k><u_k| for vectors sharing one basis.
//
// The operator is expressed in an orthonormal basis of span(u) built from
// the Gram matrix G = U^dag U = V L V^dag, where it reads
// L^{-1/2} V^dag G D G V L^{-1/2}. Gram directions below 1e-12 of the
// largest are dropped, otherwise their square roots inject ~1e-8 noise.
inline double weighted_trace_norm(const std::vector<const StateVector*>& vs, const std::vector<double>& d) {
  const auto r = static_cast<Eigen::Index>(vs.size());
  if (r == 0) return 0.0;
  const auto dim = static_cast<Eigen::Index>(vs.front()->dim());
  Eigen::MatrixXcd u(dim, r);
  for (Eigen::Index k = 0; k < r; ++k) u.col(k) = Eigen::Map<const Eigen::VectorXcd>(vs[k]->amps.data(), dim);
  Eigen::MatrixXcd g = u.adjoint() * u;
  Eigen::MatrixXcd v = g;
  Eigen::VectorXd lam = hermitian_eigen(v, true);
  const double floor = 1e-12 * lam.maxCoeff();
  Eigen::Index first = 0;
  while (first < r && lam(first) <= floor) ++first;
  const Eigen::Index keep = r - first;
  Eigen::VectorXd inv_root = lam.tail(keep).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXcd gv = g * v.rightCols(keep);
  Eigen::MatrixXcd m = inv_root.asDiagonal() * (gv.adjoint() * Eigen::Map<const Eigen::VectorXd>(d.data(), r).asDiagonal() * gv) *
                       inv_root.asDiagonal();
  m = 0.5 * (m + m.adjoint()).eval();
  return hermitian_eigen(m, false).cwiseAbs().sum();
}

}  // namespace detail

/// (1/2) ||rho - sigma||_tr.
///
/// Pure pairs use sqrt(1 - |<a|b>|^2). Otherwise rho - sigma is split into
/// Sz-sector blocks when every component has a definite sector, and each
/// block's trace norm is taken in an orthonormal basis of its span.
inline double trace_distance(const DensityOp& rho, const DensityOp& sigma) {
  if (rho.n_sites() != sigma.n_sites()) throw InvalidArgument("trace_distance: site counts differ");
  if (rho.is_maximally_mixed() && sigma.is_maximally_mixed()) return 0.0;
  if (rho.is_maximally_mixed()) return detail::trace_distance_uniform(sigma);
  if (sigma.is_maximally_mixed()) return detail::trace_distance_uniform(rho);
  if (rho.is_pure() && sigma.is_pure()) {
    const StateVector& a = rho.vectors().front();
    const StateVector& b = sigma.vectors().front();
    double ov = std::norm(inner(a, b)) / (a.norm_sq() * b.norm_sq());
    return std::sqrt(std::max(0.0, 1.0 - ov));
  }
  bool all_sectors = true;
  for (const auto* op : {&rho, &sigma})
    for (const auto& v : op->vectors()) all_sectors = all_sectors && v.basis->sector().has_value();

  // Group components by sector (or one group over the full space).
  std::map<int, std::pair<std::vector<const StateVector*>, std::vector<double>>> groups;
  std::vector<StateVector> embedded;
  embedded.reserve(all_sectors ? 0 : rho.rank() + sigma.rank());
  const BasisPtr full = all_sectors ? nullptr : build_basis(rho.n_sites());
  auto add = [&](const DensityOp& op, double sign) {
    for (std::size_t k = 0; k < op.rank(); ++k) {
      const StateVector& v = op.vectors()[k];
      const StateVector* p = &v;
      int key = -1;
      if (all_sectors) {
        key = *v.basis->sector();
      } else if (!v.basis->is_full()) {
        embedded.push_back(embed(v, full));
        p = &embedded.back();
      }
      auto& grp = groups[key];
      grp.first.push_back(p);
      grp.second.push_back(sign * op.weights()[k]);
    }
  };
  add(rho, 1.0);
  add(sigma, -1.0);
  double norm = 0.0;
  for (const auto& [key, grp] : groups) {
    if (grp.first.size() > kDenseBlockCap) throw CapacityError("trace_distance: block rank exceeds dense cap");
    norm += detail::weighted_trace_norm(grp.first, grp.second);
  }
  return std::clamp(0.5 * norm, 0.0, 1.0);
}

inline double trace_distance(const StateVector& a, const StateVector& b) {
  return trace_distance(DensityOp::pure(a), DensityOp::pure(b));
}

namespace detail {

// Probability of a correct guess after r independent single-shot guesses,
// deciding by likelihood between Binomial(r, p) and Binomial(r, 1 - p).
inline double repeat_success(int r, double d1) {
  const double p = 0.5 * (1.0 + d1), q = 0.5 * (1.0 - d1);
  const double lp = std::log(p), lq = std::log(q);
  double tv = 0.0;
  for (int k = 0; k <= r; ++k) {
    double lc = std::lgamma(r + 1.0) - std::lgamma(k + 1.0) - std::lgamma(r - k + 1.0);
    double a = std::exp(lc + k * lp + (r - k) * lq);
    double b = std::exp(lc + k * lq + (r - k) * lp);
    tv += std::abs(a - b);
  }
  return 0.5 * (1.0 + 0.5 * tv);
}

}  // namespace detail

/// Smallest number of repeats r whose majority-likelihood decision succeeds
/// with probability >= target, when one shot succeeds with (1 + d1) / 2.
/// Success is nondecreasing in r, so the search gallops then bisects.
inline int required_repeats(double d1, double target) {
  if (!(d1 >= 0.0 && d1 <= 1.0)) throw InvalidArgument("required_repeats: d1 must lie in (0, 1]");
  if (d1 == 0.0) throw InvalidArgument("required_repeats: d1 = 0 needs infinitely many repeats");
  if (!(target > 0.5 && target < 1.0)) throw InvalidArgument("required_repeats: target must lie in (0.5, 1)");
  if (d1 == 1.0) return 1;
  constexpr int kMaxRepeats = 1 << 24;
  auto ok = [&](int r) { return detail::repeat_success(r, d1) >= target; };
  int hi = 1;
  while (!ok(hi)) {
    if (hi >= kMaxRepeats) throw InvalidArgument("required_repeats: more than 2^24 repeats needed");
    hi *= 2;
  }
  int lo = hi / 2;  // ok(lo) is false unless lo == 0
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Wootters concurrence of a two-qubit state.
///
/// With subnormalized spectral vectors x_i = sqrt(w_i) v_i, the Wootters
/// lambdas are the singular values of tau_ij = <x_i| Y(x)Y |x_j^*>, which
/// avoids square roots of tiny eigenvalues of rho rho~.
inline double concurrence(const DensityOp& pair_state) {
  if (pair_state.n_sites() != 2) throw InvalidArgument("concurrence: expected a two-qubit state");
  if (pair_state.is_maximally_mixed()) return 0.0;
  const auto r = static_cast<Eigen::Index>(pair_state.rank());
  Eigen::MatrixXcd x(4, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    StateVector v = embed(pair_state.vectors()[i], build_basis(2));
    for (int c = 0; c < 4; ++c) x(c, i) = std::sqrt(pair_state.weights()[i]) * v.amps[c];
  }
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::MatrixXcd tau = x.adjoint() * yy * x.conjugate();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(tau);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(4);
  lam.head(svd.singularValues().size()) = svd.singularValues();
  std::sort(lam.data(), lam.data() + 4, std::greater<>());
  return std::clamp(lam(0) - lam(1) - lam(2) - lam(3), 0.0, 1.0);
}

/// Squared-overlap fidelity |<a|b>|^2.
inline double fidelity(const StateVector& a, const StateVector& b) {
  if (!a.basis->same_space(*b.basis)) throw InvalidArgument("fidelity: states live in different bases");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a.amps[i]) * b.amps[i];
  return std::clamp(std::norm(s) / (a.norm_sq() * b.norm_sq()), 0.0, 1.0);
}

}  // namespace stchain
