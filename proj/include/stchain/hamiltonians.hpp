#pragma once

// Heisenberg-family Hamiltonians as weighted coupling graphs, applied
// matrix-free. Pauli convention throughout: every bond contributes
// J_ij sigma_i . sigma_j and every site field contributes B_i . sigma_i.

#include <array>
#include <random>
#include <set>
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

struct Bond {
  int i = 0;  // 1-based, i < j
  int j = 0;
  double J = 0.0;

  friend bool operator==(const Bond&, const Bond&) = default;
};

using FieldVec = std::array<double, 3>;

enum class Variant { ring, open, j1j2_ring, end_weakened, alternating };

inline Variant parse_variant(std::string_view name) {
  if (name == "ring") return Variant::ring;
  if (name == "open") return Variant::open;
  if (name == "j1j2_ring" || name == "j1j2") return Variant::j1j2_ring;
  if (name == "end_weakened") return Variant::end_weakened;
  if (name == "alternating") return Variant::alternating;
  throw InvalidArgument("unknown model variant '" + std::string(name) + "'");
}

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::ring: return "ring";
    case Variant::open: return "open";
    case Variant::j1j2_ring: return "j1j2_ring";
    case Variant::end_weakened: return "end_weakened";
    case Variant::alternating: return "alternating";
  }
  return "unknown";
}

struct ModelParams {
  double J1 = 1.0;
  double J2 = 0.0;     // j1j2_ring
  double Je = 1.0;     // end_weakened
  double delta = 0.0;  // alternating
};

/// A coupling graph with optional per-site fields. Immutable once built.
class ModelSpec {
 public:
  ModelSpec() = default;

  ModelSpec(int n_sites, std::vector<Bond> bonds, std::vector<FieldVec> fields = {}, std::string label = "custom")
      : n_sites_(n_sites), bonds_(std::move(bonds)), fields_(std::move(fields)), label_(std::move(label)) {
    if (n_sites_ < 1 || n_sites_ > kMaxSites) throw InvalidArgument("model: n_sites out of range");
    if (fields_.empty()) fields_.assign(n_sites_, FieldVec{0.0, 0.0, 0.0});
    if (static_cast<int>(fields_.size()) != n_sites_) throw InvalidArgument("model: one field vector per site required");
    std::set<std::pair<int, int>> seen;
    for (auto& b : bonds_) {
      if (b.i > b.j) std::swap(b.i, b.j);
      if (b.i < 1 || b.j > n_sites_ || b.i == b.j) throw InvalidArgument("model: bond sites out of range");
      if (!seen.emplace(b.i, b.j).second) throw InvalidArgument("model: duplicate bond");
    }
  }

  int n_sites() const { return n_sites_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<FieldVec>& fields() const { return fields_; }
  const std::string& label() const { return label_; }

  bool field_free() const {
    for (const auto& f : fields_)
      if (f[0] != 0.0 || f[1] != 0.0 || f[2] != 0.0) return false;
    return true;
  }

  /// Total Sz is conserved unless some field has a transverse component.
  bool conserves_sz() const {
    for (const auto& f : fields_)
      if (f[0] != 0.0 || f[1] != 0.0) return false;
    return true;
  }

  /// The Hamiltonian is a real matrix in the computational basis unless a
  /// field has a y component.
  bool is_real() const {
    for (const auto& f : fields_)
      if (f[1] != 0.0) return false;
    return true;
  }

  ModelSpec with_label(std::string label) const {
    ModelSpec m = *this;
    m.label_ = std::move(label);
    return m;
  }

 private:
  int n_sites_ = 0;
  std::vector<Bond> bonds_;
  std::vector<FieldVec> fields_;
  std::string label_;
};

/// Bonds for one of the named chain geometries. Sites wrap modulo N on
/// rings; a bond that would repeat an existing neighbour pair (ring of two,
/// next-nearest ring of four) appears once.
inline ModelSpec build_model(Variant variant, int n_sites, const ModelParams& p = {}) {
  if (n_sites < 2 || n_sites % 2 != 0) throw InvalidArgument("build_model: n_sites must be even and >= 2");
  const int n = n_sites;
  std::vector<Bond> bonds;
  std::set<std::pair<int, int>> seen;
  auto add = [&](int a, int b, double J) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    if (seen.emplace(a, b).second) bonds.push_back({a, b, J});
  };
  auto wrap = [n](int s) { return (s - 1) % n + 1; };
  std::string label = variant_name(variant);
  switch (variant) {
    case Variant::ring:
      for (int i = 1; i <= n; ++i) add(i, wrap(i + 1), p.J1);
      break;
    case Variant::open:
      for (int i = 1; i < n; ++i) add(i, i + 1, p.J1);
      break;
    case Variant::j1j2_ring:
      for (int i = 1; i <= n; ++i) add(i, wrap(i + 1), p.J1);
      for (int i = 1; i <= n; ++i) add(i, wrap(i + 2), p.J2);
      break;
    case Variant::end_weakened:
      for (int i = 1; i < n; ++i) add(i, i + 1, (i == 1 || i == n - 1) ? p.Je : p.J1);
      break;
    case Variant::alternating:
      for (int i = 1; i < n; ++i) add(i, i + 1, p.J1 * (1.0 + ((i % 2 == 0) ? 1.0 : -1.0) * p.delta));
      break;
  }
  return ModelSpec(n, std::move(bonds), {}, std::move(label));
}

inline ModelSpec with_random_fields(const ModelSpec& model, std::span<const FieldVec> fields) {
  if (static_cast<int>(fields.size()) != model.n_sites())
    throw InvalidArgument("with_random_fields: need exactly one field vector per site");
  return ModelSpec(model.n_sites(), model.bonds(), std::vector<FieldVec>(fields.begin(), fields.end()), model.label());
}

/// Adds independent Gaussian noise of width sigma_j to every bond.
template <class URBG>
ModelSpec with_random_couplings(const ModelSpec& model, double sigma_j, URBG& rng) {
  if (sigma_j < 0.0) throw InvalidArgument("with_random_couplings: sigma_j must be nonnegative");
  std::vector<Bond> bonds = model.bonds();
  if (sigma_j > 0.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& b : bonds) b.J += g(rng) * sigma_j;
  }
  return ModelSpec(model.n_sites(), std::move(bonds), model.fields(), model.label());
}

/// Every pair (i < j) coupled with strength J; used for total-spin evaluation.
inline ModelSpec all_pairs_model(int n_sites, double J) {
  std::vector<Bond> bonds;
  for (int i = 1; i <= n_sites; ++i)
    for (int j = i + 1; j <= n_sites; ++j) bonds.push_back({i, j, J});
  return ModelSpec(n_sites, std::move(bonds), {}, "all_pairs");
}

namespace detail {

struct CompiledModel {
  struct Pair {
    code_t mask;
    double J;
  };
  struct Site {
    code_t bit;
    double bx, by, bz;
  };
  std::vector<Pair> pairs;
  std::vector<Site> zfields;
  std::vector<Site> tfields;  // sites with transverse components

  explicit CompiledModel(const ModelSpec& m) {
    for (const auto& b : m.bonds())
      if (b.J != 0.0) pairs.push_back({(code_t{1} << (b.i - 1)) | (code_t{1} << (b.j - 1)), b.J});
    for (int s = 0; s < m.n_sites(); ++s) {
      const auto& f = m.fields()[s];
      Site site{code_t{1} << s, f[0], f[1], f[2]};
      if (f[2] != 0.0) zfields.push_back(site);
      if (f[0] != 0.0 || f[1] != 0.0) tfields.push_back(site);
    }
  }

  double diagonal(code_t c) const {
    double d = 0.0;
    for (const auto& p : pairs) d += (popcount(c & p.mask) == 1) ? -p.J : p.J;
    for (const auto& s : zfields) d += (c & s.bit) ? s.bz : -s.bz;
    return d;
  }

  // Calls f(target_code, <c|H|target>) for every off-diagonal element in row c.
  template <class F>
  void visit_offdiagonal(code_t c, F&& f) const {
    for (const auto& p : pairs)
      if (popcount(c & p.mask) == 1) f(c ^ p.mask, cplx(2.0 * p.J, 0.0));
    for (const auto& s : tfields) {
      // <up|sigma_y|down> = -i, <down|sigma_y|up> = +i
      double y = (c & s.bit) ? -s.by : s.by;
      f(c ^ s.bit, cplx(s.bx, y));
    }
  }
};

inline void check_basis_for_model(const ModelSpec& model, const SpinBasis& basis) {
  if (basis.n_sites() != model.n_sites()) throw InvalidArgument("matvec: basis and model site counts differ");
  if (basis.sector() && !model.conserves_sz())
    throw InvalidArgument("matvec: transverse fields require the full (unrestricted) basis");
}

template <class T>
T as_scalar(cplx v) {
  if constexpr (std::is_same_v<T, double>)
    return v.real();
  else
    return v;
}

}  // namespace detail

/// out = H in, evaluated row by row (gather form) so that any split of the
/// rows across threads gives bitwise-identical output.
template <class T>
void apply_hamiltonian(const ModelSpec& model, const SpinBasis& basis, std::span<const T> in, std::span<T> out,
                       int threads = 0) {
  detail::check_basis_for_model(model, basis);
  if (in.size() != basis.dim() || out.size() != basis.dim()) throw InvalidArgument("matvec: vector length mismatch");
  if constexpr (std::is_same_v<T, double>) {
    if (!model.is_real()) throw InvalidArgument("matvec: real arithmetic requested for a complex Hamiltonian");
  }
  const detail::CompiledModel cm(model);
  parallel_for(
      basis.dim(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a) {
          const code_t c = basis.code(a);
          T acc = cm.diagonal(c) * in[a];
          cm.visit_offdiagonal(c, [&](code_t target, cplx h) {
            acc += detail::as_scalar<T>(h) * in[basis.index_of_member(target)];
          });
          out[a] = acc;
        }
      },
      threads);
}

inline std::vector<cplx> matvec(const ModelSpec& model, const StateVector& v, int threads = 0) {
  std::vector<cplx> out(v.dim());
  apply_hamiltonian<cplx>(model, *v.basis, v.amps, out, threads);
  return out;
}

/// Explicit Hamiltonian matrix on `basis` (rows and columns in basis order).
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> dense_hamiltonian(const ModelSpec& model, const SpinBasis& basis) {
  detail::check_basis_for_model(model, basis);
  if constexpr (std::is_same_v<T, double>) {
    if (!model.is_real()) throw InvalidArgument("dense_hamiltonian: model is not real");
  }
  if (basis.dim() > kDenseBlockCap * 4)
    throw CapacityError("dense_hamiltonian: dimension " + std::to_string(basis.dim()) + " too large");
  const auto d = static_cast<Eigen::Index>(basis.dim());
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> h = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, d);
  const detail::CompiledModel cm(model);
  for (Eigen::Index a = 0; a < d; ++a) {
    const code_t c = basis.code(a);
    h(a, a) = cm.diagonal(c);
    cm.visit_offdiagonal(c, [&](code_t target, cplx v) {
      h(a, static_cast<Eigen::Index>(basis.index_of_member(target))) += detail::as_scalar<T>(v);
    });
  }
  return h;
}

/// <psi|H|psi> for a normalized state.
inline double expectation(const ModelSpec& model, const StateVector& psi) {
  auto hv = matvec(model, psi);
  cplx s = 0.0;
  for (std::size_t i = 0; i < hv.size(); ++i) s += std::conj(psi.amps[i]) * hv[i];
  return s.real();
}

// JSON form: {n_sites, bonds: [[i, j, J], ...], fields: [[Bx, By, Bz], ...], label}
inline void to_json(nlohmann::json& j, const ModelSpec& m) {
  nlohmann::json bonds = nlohmann::json::array();
  for (const auto& b : m.bonds()) bonds.push_back({b.i, b.j, b.J});
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : m.fields()) fields.push_back({f[0], f[1], f[2]});
  j = {{"n_sites", m.n_sites()}, {"bonds", bonds}, {"fields", fields}, {"label", m.label()}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& m) {
  std::vector<Bond> bonds;
  for (const auto& b : j.at("bonds")) bonds.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<double>()});
  std::vector<FieldVec> fields;
  if (j.contains("fields"))
    for (const auto& f : j.at("fields")) fields.push_back({f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()});
  m = ModelSpec(j.at("n_sites").get<int>(), std::move(bonds), std::move(fields), j.value("label", std::string("custom")));
}

}  // namespace stchain
