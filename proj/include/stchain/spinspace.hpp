#pragma once

// Bit-coded spin-1/2 Hilbert spaces, pure and mixed states, partial trace.
//
// Site s (1-based) is bit s-1 of a basis code; a set bit means spin up.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace stchain {

class SpinBasis {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  SpinBasis(int n_sites, std::optional<int> sector) : n_sites_(n_sites), sector_(sector) {
    if (n_sites < 1 || n_sites > kMaxSites)
      throw InvalidArgument("n_sites must lie in [1, " + std::to_string(kMaxSites) + "]");
    if (sector && (*sector < 0 || *sector > n_sites))
      throw InvalidArgument("sector n_up must lie in [0, n_sites]");
    double dim = sector ? binomial_coefficient(n_sites, *sector) : std::ldexp(1.0, n_sites);
    if (dim > static_cast<double>(kMaxDimension))
      throw CapacityError("basis dimension " + std::to_string(static_cast<long long>(dim)) +
                          " exceeds cap " + std::to_string(kMaxDimension));
    dim_ = static_cast<std::size_t>(dim);
    if (sector_) build_sector_tables();
  }

  int n_sites() const { return n_sites_; }
  std::optional<int> sector() const { return sector_; }
  std::size_t dim() const { return dim_; }
  bool is_full() const { return !sector_; }

  code_t code(std::size_t i) const { return sector_ ? states_[i] : static_cast<code_t>(i); }

  /// Position of `c` in the basis, or npos if `c` is not a member.
  std::size_t index_of(code_t c) const {
    if (c >> n_sites_) return npos;
    if (!sector_) return static_cast<std::size_t>(c);
    if (popcount(c) != *sector_) return npos;
    return index_of_member(c);
  }

  /// index_of without the membership check; `c` must belong to the basis.
  std::size_t index_of_member(code_t c) const {
    if (!sector_) return static_cast<std::size_t>(c);
    return offset_hi_[c >> lo_bits_] + rank_lo_[c & lo_mask_];
  }

  bool same_space(const SpinBasis& o) const { return n_sites_ == o.n_sites_ && sector_ == o.sector_; }

 private:
  void build_sector_tables() {
    const int k = *sector_;
    states_.reserve(dim_);
    if (k == 0) {
      states_.push_back(0);
    } else {
      // Gosper's hack enumerates k-bit codes in increasing order.
      code_t c = (code_t{1} << k) - 1;
      const code_t limit = code_t{1} << n_sites_;
      while (c < limit) {
        states_.push_back(c);
        code_t lowest = c & (~c + 1);
        code_t ripple = c + lowest;
        c = (((ripple ^ c) >> 2) / lowest) | ripple;
      }
    }
    // Two-table (Lin) ranking: index = offset_hi[high bits] + rank_lo[low bits].
    lo_bits_ = n_sites_ / 2;
    lo_mask_ = (code_t{1} << lo_bits_) - 1;
    rank_lo_.assign(std::size_t{1} << lo_bits_, 0);
    std::vector<std::uint32_t> seen(lo_bits_ + 1, 0);
    for (code_t lo = 0; lo <= lo_mask_; ++lo) rank_lo_[lo] = seen[popcount(lo)]++;
    const int hi_bits = n_sites_ - lo_bits_;
    offset_hi_.assign(std::size_t{1} << hi_bits, 0);
    std::uint32_t running = 0;
    for (code_t hi = 0; hi < (code_t{1} << hi_bits); ++hi) {
      offset_hi_[hi] = running;
      int need = k - popcount(hi);
      running += static_cast<std::uint32_t>(binomial_coefficient(lo_bits_, need));
    }
  }

  int n_sites_;
  std::optional<int> sector_;
  std::size_t dim_ = 0;
  std::vector<code_t> states_;
  int lo_bits_ = 0;
  code_t lo_mask_ = 0;
  std::vector<std::uint32_t> rank_lo_;
  std::vector<std::uint32_t> offset_hi_;
};

using BasisPtr = std::shared_ptr<const SpinBasis>;

inline BasisPtr build_basis(int n_sites, std::optional<int> sector = std::nullopt) {
  return std::make_shared<const SpinBasis>(n_sites, sector);
}

/// Pure state over a SpinBasis. Amplitudes are stored in basis order.
struct StateVector {
  BasisPtr basis;
  std::vector<cplx> amps;

  StateVector() = default;
  explicit StateVector(BasisPtr b) : basis(std::move(b)), amps(basis->dim()) {}
  StateVector(BasisPtr b, std::vector<cplx> a) : basis(std::move(b)), amps(std::move(a)) {
    if (amps.size() != basis->dim()) throw InvalidArgument("amplitude count does not match basis dimension");
  }

  int n_sites() const { return basis->n_sites(); }
  std::size_t dim() const { return amps.size(); }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    return s;
  }
  double norm() const { return std::sqrt(norm_sq()); }

  StateVector& normalize() {
    double n = norm();
    if (n == 0.0) throw InvalidArgument("cannot normalize the zero vector");
    for (auto& a : amps) a /= n;
    return *this;
  }
};

inline StateVector basis_state(const BasisPtr& basis, code_t code) {
  std::size_t i = basis->index_of(code);
  if (i == SpinBasis::npos) throw InvalidArgument("code is not a member of the basis");
  StateVector v(basis);
  v.amps[i] = 1.0;
  return v;
}

/// Antiferromagnetic product state with site 1 up, stored in the n_up = N/2 sector.
inline StateVector neel_state(int n_sites) {
  if (n_sites < 2 || n_sites % 2 != 0) throw InvalidArgument("neel_state requires an even number of sites");
  code_t code = 0;
  for (int s = 0; s < n_sites; s += 2) code |= code_t{1} << s;
  return basis_state(build_basis(n_sites, n_sites / 2), code);
}

/// ⟨a|b⟩. The two states may live in different bases over the same sites.
inline cplx inner(const StateVector& a, const StateVector& b) {
  if (a.n_sites() != b.n_sites()) throw InvalidArgument("inner product of states on different site counts");
  const SpinBasis& ba = *a.basis;
  const SpinBasis& bb = *b.basis;
  cplx s = 0.0;
  if (ba.same_space(bb)) {
    for (std::size_t i = 0; i < a.amps.size(); ++i) s += std::conj(a.amps[i]) * b.amps[i];
    return s;
  }
  if (ba.sector() && bb.sector()) return 0.0;
  // One side is the full space; walk the smaller basis.
  if (ba.dim() <= bb.dim()) {
    for (std::size_t i = 0; i < ba.dim(); ++i) {
      std::size_t j = bb.index_of(ba.code(i));
      if (j != SpinBasis::npos) s += std::conj(a.amps[i]) * b.amps[j];
    }
  } else {
    for (std::size_t j = 0; j < bb.dim(); ++j) {
      std::size_t i = ba.index_of(bb.code(j));
      if (i != SpinBasis::npos) s += std::conj(a.amps[i]) * b.amps[j];
    }
  }
  return s;
}

/// Re-expresses `v` over `target`. Amplitude outside the target space must vanish.
inline StateVector embed(const StateVector& v, const BasisPtr& target, double tol = 1e-12) {
  if (target->n_sites() != v.n_sites()) throw InvalidArgument("embed: site count mismatch");
  if (target->same_space(*v.basis)) return StateVector(target, v.amps);
  StateVector out(target);
  double lost = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    std::size_t j = target->index_of(v.basis->code(i));
    if (j == SpinBasis::npos)
      lost += std::norm(v.amps[i]);
    else
      out.amps[j] = v.amps[i];
  }
  if (lost > tol) throw InvalidArgument("embed: state has weight outside the target sector");
  return out;
}

/// Mixed state in spectral form: weights over orthonormal pure states.
///
/// The components may live in different sector bases of the same site
/// count (vectors from distinct sectors are orthogonal by construction).
/// The maximally mixed state is kept implicit: no weights or vectors are
/// stored, and computational-basis components are materialized on request.
class DensityOp {
 public:
  DensityOp() = default;

  static DensityOp pure(StateVector v) {
    DensityOp d;
    d.n_sites_ = v.n_sites();
    d.weights_ = {1.0};
    d.vectors_.push_back(std::move(v));
    return d;
  }

  static DensityOp mixture(std::vector<double> weights, std::vector<StateVector> vectors) {
    if (weights.size() != vectors.size() || weights.empty())
      throw InvalidArgument("mixture: weights and vectors must be nonempty and of equal length");
    DensityOp d;
    d.n_sites_ = vectors.front().n_sites();
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] < 0.0) throw InvalidArgument("mixture: negative weight");
      if (vectors[i].n_sites() != d.n_sites_) throw InvalidArgument("mixture: site count mismatch");
      total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-10) throw InvalidArgument("mixture: weights must sum to 1");
    d.weights_ = std::move(weights);
    d.vectors_ = std::move(vectors);
    return d;
  }

  static DensityOp maximally_mixed(int n_sites) {
    if (n_sites < 1) throw InvalidArgument("maximally_mixed: n_sites must be positive");
    if (n_sites > kMaxSites) throw CapacityError("maximally_mixed: at most " + std::to_string(kMaxSites) + " sites");
    DensityOp d;
    d.n_sites_ = n_sites;
    d.uniform_ = true;
    return d;
  }

  int n_sites() const { return n_sites_; }
  bool is_maximally_mixed() const { return uniform_; }
  bool is_pure() const { return !uniform_ && weights_.size() == 1; }
  std::size_t rank() const { return uniform_ ? std::size_t{1} << n_sites_ : weights_.size(); }
  /// Stored weights; empty for the implicit maximally mixed state (each is 2^-N).
  const std::vector<double>& weights() const { return weights_; }

  /// Stored vectors; empty for the implicit maximally mixed state.
  const std::vector<StateVector>& vectors() const { return vectors_; }

  /// The i-th spectral vector, materialized for the implicit case.
  StateVector component(std::size_t i) const {
    if (!uniform_) return vectors_.at(i);
    if (i >= rank()) throw InvalidArgument("component: index out of range");
    return basis_state(build_basis(n_sites_), static_cast<code_t>(i));
  }

 private:
  int n_sites_ = 0;
  bool uniform_ = false;
  std::vector<double> weights_;
  std::vector<StateVector> vectors_;
};

inline DensityOp maximally_mixed(int n_sites) { return DensityOp::maximally_mixed(n_sites); }

namespace detail {

inline void check_keep(int n_sites, std::span<const int> keep) {
  if (keep.empty()) throw InvalidArgument("partial_trace: keep must be nonempty");
  if (keep.size() > 12) throw CapacityError("partial_trace: at most 12 kept sites");
  std::vector<bool> seen(n_sites + 1, false);
  for (int s : keep) {
    if (s < 1 || s > n_sites) throw InvalidArgument("partial_trace: site index out of range");
    if (seen[s]) throw InvalidArgument("partial_trace: duplicate site index");
    seen[s] = true;
  }
}

// Accumulates weight * Tr_env |v><v| into rho (kept site keep[j] -> bit j).
inline void accumulate_reduced(const StateVector& v, std::span<const int> keep, double weight,
                               Eigen::MatrixXcd& rho) {
  const SpinBasis& basis = *v.basis;
  code_t keep_mask = 0;
  for (int s : keep) keep_mask |= code_t{1} << (s - 1);
  struct Entry {
    code_t env;
    std::uint32_t local;
    cplx amp;
  };
  std::vector<Entry> entries;
  entries.reserve(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v.amps[i] == cplx{}) continue;
    code_t c = basis.code(i);
    std::uint32_t local = 0;
    for (std::size_t j = 0; j < keep.size(); ++j)
      if ((c >> (keep[j] - 1)) & 1) local |= 1u << j;
    entries.push_back({c & ~keep_mask, local, v.amps[i]});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.env < b.env || (a.env == b.env && a.local < b.local);
  });
  for (std::size_t g = 0; g < entries.size();) {
    std::size_t h = g;
    while (h < entries.size() && entries[h].env == entries[g].env) ++h;
    for (std::size_t x = g; x < h; ++x)
      for (std::size_t y = g; y < h; ++y)
        rho(entries[x].local, entries[y].local) += weight * entries[x].amp * std::conj(entries[y].amp);
    g = h;
  }
}

}  // namespace detail

/// Density matrix (dense, full basis of `keep.size()` qubits) of the
/// reduced state on `keep`. Kept site keep[j] becomes qubit j + 1.
inline Eigen::MatrixXcd reduced_matrix(const DensityOp& rho, std::span<const int> keep) {
  detail::check_keep(rho.n_sites(), keep);
  const std::size_t d = std::size_t{1} << keep.size();
  if (rho.is_maximally_mixed()) return Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t k = 0; k < rho.rank(); ++k)
    detail::accumulate_reduced(rho.vectors()[k], keep, rho.weights()[k], out);
  return out;
}

inline Eigen::MatrixXcd reduced_matrix(const StateVector& psi, std::span<const int> keep) {
  detail::check_keep(psi.n_sites(), keep);
  const std::size_t d = std::size_t{1} << keep.size();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  detail::accumulate_reduced(psi, keep, 1.0, out);
  return out;
}

/// Spectral DensityOp of a dense Hermitian matrix on log2(dim) qubits.
/// Eigenvalues below `cutoff` are dropped and the rest renormalized.
inline DensityOp density_from_matrix(const Eigen::MatrixXcd& m, double cutoff = 1e-14) {
  const auto dim = static_cast<std::size_t>(m.rows());
  if (dim == 0 || !std::has_single_bit(dim)) throw InvalidArgument("density_from_matrix: dimension must be 2^k");
  const int n = std::countr_zero(dim);
  Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
  auto basis = build_basis(n);
  std::vector<double> w;
  std::vector<StateVector> vecs;
  double total = 0.0;
  for (Eigen::Index i = es.eigenvalues().size() - 1; i >= 0; --i) {
    double lambda = es.eigenvalues()(i);
    if (lambda <= cutoff) continue;
    StateVector v(basis);
    for (std::size_t r = 0; r < dim; ++r) v.amps[r] = es.eigenvectors()(r, i);
    w.push_back(lambda);
    vecs.push_back(std::move(v));
    total += lambda;
  }
  if (w.empty()) throw InvalidArgument("density_from_matrix: matrix has no positive spectrum");
  for (auto& x : w) x /= total;
  return DensityOp::mixture(std::move(w), std::move(vecs));
}

/// Dense matrix of a DensityOp over the full basis. Limited to 12 sites.
inline Eigen::MatrixXcd to_matrix(const DensityOp& rho) {
  std::vector<int> all(rho.n_sites());
  std::iota(all.begin(), all.end(), 1);
  return reduced_matrix(rho, all);
}

inline DensityOp partial_trace(const DensityOp& rho, std::span<const int> keep) {
  if (rho.is_maximally_mixed()) {
    detail::check_keep(rho.n_sites(), keep);
    return DensityOp::maximally_mixed(static_cast<int>(keep.size()));
  }
  return density_from_matrix(reduced_matrix(rho, keep));
}

inline DensityOp partial_trace(const StateVector& psi, std::span<const int> keep) {
  return density_from_matrix(reduced_matrix(psi, keep));
}

inline DensityOp partial_trace(const StateVector& psi, std::initializer_list<int> keep) {
  return partial_trace(psi, std::span<const int>(keep.begin(), keep.size()));
}

inline DensityOp partial_trace(const DensityOp& rho, std::initializer_list<int> keep) {
  return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

// ---------------------------------------------------------------------------
// Binary state files.
//
// Layout (all integers little-endian):
//   char[4]  magic "STSV"
//   u32      format version (1)
//   u32      endianness tag 0x01020304
//   u32      n_sites
//   i32      sector n_up, or -1 for the full space
//   u64      dimension
//   f64[2*dimension]  amplitudes as (re, im) pairs in basis order

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw InvalidArgument("state file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_state(std::ostream& os, const StateVector& v) {
  os.write("STSV", 4);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<std::uint32_t>(os, 0x01020304u);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.n_sites()));
  detail::put_le<std::int32_t>(os, v.basis->sector().value_or(-1));
  detail::put_le<std::uint64_t>(os, v.dim());
  for (const auto& a : v.amps) {
    detail::put_le<double>(os, a.real());
    detail::put_le<double>(os, a.imag());
  }
}

inline StateVector read_state(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "STSV") throw InvalidArgument("not a state file");
  if (detail::get_le<std::uint32_t>(is) != 1) throw InvalidArgument("unsupported state file version");
  if (detail::get_le<std::uint32_t>(is) != 0x01020304u) throw InvalidArgument("bad endianness tag");
  int n = static_cast<int>(detail::get_le<std::uint32_t>(is));
  std::int32_t sector = detail::get_le<std::int32_t>(is);
  std::uint64_t dim = detail::get_le<std::uint64_t>(is);
  auto basis = build_basis(n, sector < 0 ? std::nullopt : std::optional<int>(sector));
  if (basis->dim() != dim) throw InvalidArgument("state file dimension does not match its header");
  StateVector v(basis);
  for (auto& a : v.amps) {
    double re = detail::get_le<double>(is);
    double im = detail::get_le<double>(is);
    a = {re, im};
  }
  return v;
}

}  // namespace stchain
