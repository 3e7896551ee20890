#pragma once

// Singlet-triplet pair measurements: projectors, outcome-string
// probabilities, triplet profiles, heralded end-pair states and the
// Bell-measurement variant.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "common.hpp"
#include "spinspace.hpp"

namespace stchain {

/// Disjoint measured pairs plus the sites left unmeasured.
struct PairingLayout {
  int n_sites = 0;
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmeasured;
  std::string name = "custom";

  static PairingLayout custom(int n_sites, std::vector<std::pair<int, int>> pairs, std::string name = "custom") {
    PairingLayout l;
    l.n_sites = n_sites;
    l.name = std::move(name);
    std::vector<bool> used(n_sites + 1, false);
    for (auto [a, b] : pairs) {
      if (a < 1 || b < 1 || a > n_sites || b > n_sites || a == b)
        throw InvalidArgument("layout: pair sites out of range");
      if (used[a] || used[b]) throw InvalidArgument("layout: pairs must be disjoint");
      used[a] = used[b] = true;
    }
    for (int s = 1; s <= n_sites; ++s)
      if (!used[s]) l.unmeasured.push_back(s);
    l.pairs = std::move(pairs);
    return l;
  }

  std::size_t size() const { return pairs.size(); }
};

/// (1,2), (3,4), ..., (N-1,N).
inline PairingLayout standard_layout(int n_sites) {
  if (n_sites < 2 || n_sites % 2 != 0) throw InvalidArgument("standard_layout: n_sites must be even");
  std::vector<std::pair<int, int>> pairs;
  for (int s = 1; s < n_sites; s += 2) pairs.emplace_back(s, s + 1);
  return PairingLayout::custom(n_sites, std::move(pairs), "standard");
}

/// (2,3), (4,5), ..., (N-2,N-1); sites 1 and N stay unmeasured.
inline PairingLayout middle_layout(int n_sites) {
  if (n_sites < 2 || n_sites % 2 != 0) throw InvalidArgument("middle_layout: n_sites must be even");
  std::vector<std::pair<int, int>> pairs;
  for (int s = 2; s < n_sites - 1; s += 2) pairs.emplace_back(s, s + 1);
  return PairingLayout::custom(n_sites, std::move(pairs), "middle");
}

inline PairingLayout parse_layout(std::string_view name, int n_sites) {
  if (name == "standard") return standard_layout(n_sites);
  if (name == "middle") return middle_layout(n_sites);
  throw InvalidArgument("unknown layout '" + std::string(name) + "'");
}

enum class Outcome { singlet, triplet };
using OutcomeString = std::vector<Outcome>;

inline OutcomeString parse_outcomes(std::string_view text) {
  OutcomeString x;
  for (char c : text) {
    if (c == 's')
      x.push_back(Outcome::singlet);
    else if (c == 't')
      x.push_back(Outcome::triplet);
    else
      throw InvalidArgument("outcome strings use only 's' and 't'");
  }
  return x;
}

struct ProfileMeta {
  std::string model_label;
  int n_sites = 0;
  std::string layout;
  std::optional<double> beta;
  std::optional<double> bn;
  std::optional<double> sigma_j;
  std::optional<std::uint64_t> seed;
  double clamped = 0.0;  // largest negative roundoff removed
};

/// p(m) for m = 0..M triplet outcomes across M measured pairs.
struct TripletProfile {
  std::vector<double> probs;
  ProfileMeta meta;

  std::size_t pairs() const { return probs.empty() ? 0 : probs.size() - 1; }
  double operator[](std::size_t m) const { return m < probs.size() ? probs[m] : 0.0; }
};

enum class ProfileMode { recursion, streaming };

namespace detail {

inline void check_layout(const PairingLayout& layout, int n_sites) {
  if (layout.n_sites != n_sites) throw InvalidArgument("layout site count does not match the state");
}

struct PairMasks {
  code_t a, b;
};

inline std::vector<PairMasks> pair_masks(const PairingLayout& layout) {
  std::vector<PairMasks> m;
  for (auto [a, b] : layout.pairs) m.push_back({code_t{1} << (a - 1), code_t{1} << (b - 1)});
  return m;
}

// In place: w <- P_s w (singlet = true) or P_t w on one pair.
inline void project_pair(const SpinBasis& basis, PairMasks pm, bool singlet, std::span<cplx> w) {
  const code_t both = pm.a | pm.b;
  for (std::size_t x = 0; x < w.size(); ++x) {
    const code_t c = basis.code(x);
    const bool up_a = c & pm.a, up_b = c & pm.b;
    if (up_a == up_b) {
      if (singlet) w[x] = 0.0;
      continue;
    }
    if (!up_a) continue;  // handled together with its partner
    const std::size_t y = basis.index_of_member(c ^ both);
    const cplx d = 0.5 * (w[x] - w[y]);
    if (singlet) {
      w[x] = d;
      w[y] = -d;
    } else {
      w[x] -= d;
      w[y] += d;
    }
  }
}

// Renormalizes p after clamping negative roundoff; returns the largest clamp.
inline double clamp_and_normalize(std::vector<double>& p) {
  double clamped = 0.0, total = 0.0;
  for (double& x : p) {
    if (x < 0.0) {
      clamped = std::max(clamped, -x);
      x = 0.0;
    }
    total += x;
  }
  if (total > 0.0)
    for (double& x : p) x /= total;
  return clamped;
}

// Unnormalized coefficients <psi| sum_{x in X_m} Pi_x |psi> via the
// per-pair recursion v'_k = P_s v_k + P_t v_{k-1}, vectors interleaved by
// basis index so that each pair update is local.
inline std::vector<double> profile_recursion(const StateVector& psi, const PairingLayout& layout) {
  const SpinBasis& basis = *psi.basis;
  const std::size_t dim = psi.dim();
  const std::size_t M = layout.size();
  const std::size_t stride = M + 1;
  const double bytes = static_cast<double>(stride) * static_cast<double>(dim) * sizeof(cplx);
  if (bytes > static_cast<double>(memory_cap()))
    throw CapacityError("triplet_profile: recursion needs " + std::to_string(static_cast<long long>(bytes / (1 << 20))) +
                        " MiB, above the memory cap; use the streaming evaluation mode");
  std::vector<cplx> coef(stride * dim, cplx{});
  for (std::size_t x = 0; x < dim; ++x) coef[x * stride] = psi.amps[x];
  const auto masks = pair_masks(layout);
  for (std::size_t p = 0; p < M; ++p) {
    const PairMasks pm = masks[p];
    const code_t both = pm.a | pm.b;
    const std::size_t top = p + 1;  // highest k that can be nonzero after this pair
    parallel_for(dim, [&](std::size_t begin, std::size_t end) {
      for (std::size_t x = begin; x < end; ++x) {
        const code_t c = basis.code(x);
        const bool up_a = c & pm.a, up_b = c & pm.b;
        cplx* vx = &coef[x * stride];
        if (up_a == up_b) {
          // pure triplet component: shift every coefficient up by one
          for (std::size_t k = top; k > 0; --k) vx[k] = vx[k - 1];
          vx[0] = 0.0;
          continue;
        }
        if (!up_a) continue;
        cplx* vy = &coef[basis.index_of_member(c ^ both) * stride];
        cplx tx_prev = 0.0, ty_prev = 0.0;
        for (std::size_t k = 0; k <= top; ++k) {
          const cplx d = 0.5 * (vx[k] - vy[k]);
          const cplx tx = vx[k] - d, ty = vy[k] + d;  // triplet part of v_k
          vx[k] = d + tx_prev;
          vy[k] = -d + ty_prev;
          tx_prev = tx;
          ty_prev = ty;
        }
      }
    });
  }
  std::vector<double> probs(stride, 0.0);
  for (std::size_t x = 0; x < dim; ++x) {
    const cplx bra = std::conj(psi.amps[x]);
    for (std::size_t k = 0; k < stride; ++k) probs[k] += (bra * coef[x * stride + k]).real();
  }
  return probs;
}

// Same coefficients from the generating function G(z) = <psi| prod (P_s + z P_t) |psi>
// evaluated at the M+1 roots of unity; needs a single work vector.
inline std::vector<double> profile_streaming(const StateVector& psi, const PairingLayout& layout) {
  const SpinBasis& basis = *psi.basis;
  const std::size_t M = layout.size();
  const std::size_t n = M + 1;
  const auto masks = pair_masks(layout);
  std::vector<cplx> g(n);
  std::vector<cplx> w(psi.dim());
  for (std::size_t j = 0; j < n; ++j) {
    const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
    w = psi.amps;
    for (const auto& pm : masks) {
      const code_t both = pm.a | pm.b;
      for (std::size_t x = 0; x < w.size(); ++x) {
        const code_t c = basis.code(x);
        const bool up_a = c & pm.a, up_b = c & pm.b;
        if (up_a == up_b) {
          w[x] *= z;
          continue;
        }
        if (!up_a) continue;
        const std::size_t y = basis.index_of_member(c ^ both);
        const cplx d = 0.5 * (w[x] - w[y]);
        w[x] = z * w[x] + (1.0 - z) * d;
        w[y] = z * w[y] - (1.0 - z) * d;
      }
    }
    cplx s = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) s += std::conj(psi.amps[x]) * w[x];
    g[j] = s;
  }
  std::vector<double> probs(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      s += g[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * m % n) / static_cast<double>(n));
    probs[m] = s.real() / static_cast<double>(n);
  }
  return probs;
}

inline std::vector<double> raw_profile(const StateVector& psi, const PairingLayout& layout, ProfileMode mode) {
  auto raw = mode == ProfileMode::recursion ? profile_recursion(psi, layout) : profile_streaming(psi, layout);
  const double nsq = psi.norm_sq();
  for (double& x : raw) x /= nsq;
  return raw;
}

inline TripletProfile finish_profile(std::vector<double> raw, const PairingLayout& layout, int n_sites) {
  TripletProfile p;
  p.meta.clamped = clamp_and_normalize(raw);
  p.probs = std::move(raw);
  p.meta.n_sites = n_sites;
  p.meta.layout = layout.name;
  return p;
}

}  // namespace detail

/// Tr(Pi_x rho) for the outcome string x over the layout's pairs.
inline double outcome_probability(const StateVector& psi, const PairingLayout& layout, const OutcomeString& x) {
  detail::check_layout(layout, psi.n_sites());
  if (x.size() != layout.size()) throw InvalidArgument("outcome string length must equal the number of pairs");
  std::vector<cplx> w = psi.amps;
  const auto masks = detail::pair_masks(layout);
  for (std::size_t p = 0; p < masks.size(); ++p)
    detail::project_pair(*psi.basis, masks[p], x[p] == Outcome::singlet, w);
  double s = 0.0;
  for (const auto& a : w) s += std::norm(a);
  return s / psi.norm_sq();
}

inline double outcome_probability(const DensityOp& rho, const PairingLayout& layout, const OutcomeString& x) {
  detail::check_layout(layout, rho.n_sites());
  if (x.size() != layout.size()) throw InvalidArgument("outcome string length must equal the number of pairs");
  if (rho.is_maximally_mixed()) {
    double p = 1.0;
    for (auto o : x) p *= (o == Outcome::singlet) ? 0.25 : 0.75;
    return p;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < rho.rank(); ++k) s += rho.weights()[k] * outcome_probability(rho.vectors()[k], layout, x);
  return s;
}

/// Exact triplet profile of a pure state.
inline TripletProfile triplet_profile(const StateVector& psi, const PairingLayout& layout,
                                      ProfileMode mode = ProfileMode::recursion) {
  detail::check_layout(layout, psi.n_sites());
  return detail::finish_profile(detail::raw_profile(psi, layout, mode), layout, psi.n_sites());
}

/// Weight-summed per-vector profiles; Binomial(M, 3/4) for the maximally mixed state.
inline TripletProfile triplet_profile(const DensityOp& rho, const PairingLayout& layout,
                                      ProfileMode mode = ProfileMode::recursion) {
  detail::check_layout(layout, rho.n_sites());
  if (rho.is_maximally_mixed())
    return detail::finish_profile(binomial_pmf(static_cast<int>(layout.size()), 0.75), layout, rho.n_sites());
  std::vector<double> acc(layout.size() + 1, 0.0);
  for (std::size_t k = 0; k < rho.rank(); ++k) {
    auto raw = detail::raw_profile(rho.vectors()[k], layout, mode);
    for (std::size_t m = 0; m < acc.size(); ++m) acc[m] += rho.weights()[k] * raw[m];
  }
  return detail::finish_profile(std::move(acc), layout, rho.n_sites());
}

/// Literal sum over all 2^M outcome strings. Test oracle; M <= 13.
template <class State>
TripletProfile triplet_profile_bruteforce(const State& state, const PairingLayout& layout) {
  const std::size_t M = layout.size();
  if (M > 13) throw CapacityError("triplet_profile_bruteforce: at most 13 pairs");
  std::vector<double> acc(M + 1, 0.0);
  for (std::uint32_t bits = 0; bits < (1u << M); ++bits) {
    OutcomeString x(M);
    for (std::size_t p = 0; p < M; ++p) x[p] = ((bits >> p) & 1u) ? Outcome::triplet : Outcome::singlet;
    acc[std::popcount(bits)] += outcome_probability(state, layout, x);
  }
  return detail::finish_profile(std::move(acc), layout, state.n_sites());
}

/// Singlet projector on two qubits (qubit 1 = bit 0).
inline Eigen::Matrix4cd singlet_projector() {
  Eigen::Vector4cd s = Eigen::Vector4cd::Zero();
  s(1) = 1.0 / std::sqrt(2.0);   // up-down
  s(2) = -1.0 / std::sqrt(2.0);  // down-up
  return s * s.adjoint();
}

struct HeraldResult {
  double q0 = 0.0;
  std::optional<DensityOp> end_state;  // empty when q0 < 1e-14
};

namespace detail {

inline void check_herald_layout(const PairingLayout& layout) {
  if (layout.unmeasured.size() != 2) throw InvalidArgument("heralding requires exactly two unmeasured sites");
}

// All-singlet projection of psi; returns q0 and the unnormalized end-pair matrix.
inline std::pair<double, Eigen::MatrixXcd> herald_unnormalized(const StateVector& psi, const PairingLayout& layout) {
  StateVector w = psi;
  for (const auto& pm : pair_masks(layout)) project_pair(*psi.basis, pm, true, w.amps);
  const double nsq = psi.norm_sq();
  const double q0 = w.norm_sq() / nsq;
  Eigen::MatrixXcd m = reduced_matrix(w, layout.unmeasured) / nsq;
  return {q0, m};
}

}  // namespace detail

/// Projects every measured pair onto the singlet. q0 is the success
/// probability; end_state is the normalized state of the unmeasured pair.
inline HeraldResult herald_all_singlet(const StateVector& psi, const PairingLayout& layout) {
  detail::check_layout(layout, psi.n_sites());
  detail::check_herald_layout(layout);
  auto [q0, m] = detail::herald_unnormalized(psi, layout);
  HeraldResult r{q0, std::nullopt};
  if (q0 >= 1e-14) r.end_state = density_from_matrix(m / q0);
  return r;
}

inline HeraldResult herald_all_singlet(const DensityOp& rho, const PairingLayout& layout) {
  detail::check_layout(layout, rho.n_sites());
  detail::check_herald_layout(layout);
  if (rho.is_maximally_mixed())
    return {std::pow(0.25, static_cast<double>(layout.size())), DensityOp::maximally_mixed(2)};
  double q0 = 0.0;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(4, 4);
  for (std::size_t k = 0; k < rho.rank(); ++k) {
    auto [q, m] = detail::herald_unnormalized(rho.vectors()[k], layout);
    q0 += rho.weights()[k] * q;
    acc += rho.weights()[k] * m;
  }
  HeraldResult r{q0, std::nullopt};
  if (q0 >= 1e-14) r.end_state = density_from_matrix(acc / q0);
  return r;
}

enum class Bell { psi_minus, psi_plus, phi_plus, phi_minus };

inline char bell_symbol(Bell b) {
  switch (b) {
    case Bell::psi_minus: return 's';
    case Bell::psi_plus: return 'p';
    case Bell::phi_plus: return 'F';
    case Bell::phi_minus: return 'f';
  }
  return '?';
}

struct BellOutcome {
  std::vector<Bell> outcome;
  double probability = 0.0;
  std::optional<DensityOp> end_state;  // empty when probability < 1e-14
};

/// Full Bell-basis measurement of every measured pair, enumerating all 4^M
/// outcome strings in (psi-, psi+, phi+, phi-) order, first pair slowest.
inline std::vector<BellOutcome> bell_localize(const StateVector& psi, const PairingLayout& layout) {
  detail::check_layout(layout, psi.n_sites());
  detail::check_herald_layout(layout);
  const std::size_t M = layout.size();
  if (M > 10) throw CapacityError("bell_localize: at most 10 measured pairs");
  if (psi.n_sites() > 22) throw CapacityError("bell_localize: at most 22 sites");
  // phi projectors leave the Sz sector, so work in the full space.
  StateVector full = embed(psi, build_basis(psi.n_sites()));
  full.normalize();
  const auto masks = detail::pair_masks(layout);
  const double r2 = 1.0 / std::sqrt(2.0);

  auto project_bell = [&](std::vector<cplx>& w, detail::PairMasks pm, Bell b) {
    const code_t both = pm.a | pm.b;
    for (code_t c0 = 0; c0 < w.size(); ++c0) {
      if (c0 & both) continue;
      cplx& dd = w[c0];
      cplx& ud = w[c0 | pm.a];
      cplx& du = w[c0 | pm.b];
      cplx& uu = w[c0 | both];
      cplx o;
      switch (b) {
        case Bell::psi_minus:
        case Bell::psi_plus: {
          const double sgn = b == Bell::psi_minus ? -1.0 : 1.0;
          o = (ud + sgn * du) * r2;
          ud = o * r2;
          du = sgn * o * r2;
          uu = dd = 0.0;
          break;
        }
        case Bell::phi_plus:
        case Bell::phi_minus: {
          const double sgn = b == Bell::phi_plus ? 1.0 : -1.0;
          o = (uu + sgn * dd) * r2;
          uu = o * r2;
          dd = sgn * o * r2;
          ud = du = 0.0;
          break;
        }
      }
    }
  };

  std::vector<BellOutcome> out;
  out.reserve(std::size_t{1} << (2 * M));
  std::vector<std::vector<cplx>> stack(M + 1);
  stack[0] = full.amps;
  std::vector<Bell> current(M);
  constexpr Bell order[] = {Bell::psi_minus, Bell::psi_plus, Bell::phi_plus, Bell::phi_minus};

  auto recurse = [&](auto&& self, std::size_t level) -> void {
    if (level == M) {
      StateVector leaf(full.basis, stack[M]);
      BellOutcome o{current, leaf.norm_sq(), std::nullopt};
      if (o.probability >= 1e-14) {
        leaf.normalize();
        o.end_state = partial_trace(leaf, layout.unmeasured);
      }
      out.push_back(std::move(o));
      return;
    }
    for (Bell b : order) {
      stack[level + 1] = stack[level];
      project_bell(stack[level + 1], masks[level], b);
      current[level] = b;
      self(self, level + 1);
    }
  };
  recurse(recurse, 0);
  return out;
}

struct WernerFit {
  double alpha = 0.0;
  double residual = 0.0;
};

/// alpha = Tr(P_s rho) and the trace-norm distance of rho from the Werner
/// state alpha P_s + (1 - alpha) P_t / 3.
inline WernerFit werner_fraction(const DensityOp& pair_state) {
  if (pair_state.n_sites() != 2) throw InvalidArgument("werner_fraction: expected a two-qubit state");
  const Eigen::MatrixXcd rho = to_matrix(pair_state);
  const Eigen::Matrix4cd ps = singlet_projector();
  const Eigen::Matrix4cd pt = Eigen::Matrix4cd::Identity() - ps;
  const double alpha = (ps * rho).trace().real();
  const Eigen::Matrix4cd diff = rho - (alpha * ps + (1.0 - alpha) / 3.0 * pt);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return {alpha, es.eigenvalues().cwiseAbs().sum()};
}

// --- serialization --------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const TripletProfile& p) {
  os << "m_t,probability\n";
  for (std::size_t m = 0; m < p.probs.size(); ++m) os << m << ',' << format_double(p.probs[m]) << '\n';
}

inline void to_json(nlohmann::json& j, const TripletProfile& p) {
  j = {{"probabilities", p.probs},
       {"meta",
        {{"model", p.meta.model_label},
         {"n_sites", p.meta.n_sites},
         {"layout", p.meta.layout},
         {"clamped", p.meta.clamped}}}};
  if (p.meta.beta) j["meta"]["beta"] = *p.meta.beta;
  if (p.meta.bn) j["meta"]["bn"] = *p.meta.bn;
  if (p.meta.sigma_j) j["meta"]["sigma_j"] = *p.meta.sigma_j;
  if (p.meta.seed) j["meta"]["seed"] = *p.meta.seed;
}

}  // namespace stchain
