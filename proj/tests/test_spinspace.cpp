#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace stchain;

TEST(SpinBasis, FullSpaceOfTwoSites) {
  auto b = build_basis(2);
  ASSERT_EQ(b->dim(), 4u);
  for (code_t c = 0; c < 4; ++c) {
    EXPECT_EQ(b->code(c), c);
    EXPECT_EQ(b->index_of(c), c);
  }
  EXPECT_EQ(b->index_of(4), SpinBasis::npos);
}

TEST(SpinBasis, SectorFourTwo) {
  auto b = build_basis(4, 2);
  ASSERT_EQ(b->dim(), 6u);
  for (std::size_t i = 0; i < b->dim(); ++i) {
    EXPECT_EQ(popcount(b->code(i)), 2);
    if (i > 0) EXPECT_LT(b->code(i - 1), b->code(i));
  }
  EXPECT_EQ(b->index_of(0b0111), SpinBasis::npos);
}

TEST(SpinBasis, IndexIsInverseOfCode) {
  for (int n : {1, 5, 10, 13}) {
    for (int up = 0; up <= n; ++up) {
      auto b = build_basis(n, up);
      ASSERT_EQ(b->dim(), static_cast<std::size_t>(oracle::binomial(n, 0.5)[up] * std::ldexp(1.0, n) + 0.5));
      for (std::size_t i = 0; i < b->dim(); ++i) ASSERT_EQ(b->index_of(b->code(i)), i);
      // Every code of the right weight is present.
      std::size_t members = 0;
      for (code_t c = 0; c < (code_t{1} << n); ++c)
        if (b->index_of(c) != SpinBasis::npos) {
          ++members;
          ASSERT_EQ(popcount(c), up);
        }
      ASSERT_EQ(members, b->dim());
    }
  }
}

TEST(SpinBasis, TwentyFourHalfFilling) {
  // C(24,12) from Pascal's triangle.
  std::vector<std::vector<std::uint64_t>> pascal(25);
  for (int n = 0; n <= 24; ++n) {
    pascal[n].assign(n + 1, 1);
    for (int k = 1; k < n; ++k) pascal[n][k] = pascal[n - 1][k - 1] + pascal[n - 1][k];
  }
  ASSERT_EQ(pascal[24][12], 2704156u);
  auto b = build_basis(24, 12);
  EXPECT_EQ(b->dim(), pascal[24][12]);
  for (std::size_t i = 0; i < b->dim(); i += 9973) EXPECT_EQ(b->index_of(b->code(i)), i);
}

TEST(SpinBasis, RejectsBadArguments) {
  EXPECT_THROW(build_basis(0), InvalidArgument);
  EXPECT_THROW(build_basis(29), InvalidArgument);
  EXPECT_THROW(build_basis(4, 5), InvalidArgument);
  EXPECT_THROW(build_basis(4, -1), InvalidArgument);
  EXPECT_THROW(build_basis(28), CapacityError);
}

TEST(NeelState, SiteOneUp) {
  auto v2 = neel_state(2);
  EXPECT_EQ(v2.dim(), 2u);
  EXPECT_EQ(v2.amps[v2.basis->index_of(0b01)], cplx(1.0));
  auto v4 = neel_state(4);
  EXPECT_EQ(v4.amps[v4.basis->index_of(0b0101)], cplx(1.0));
  EXPECT_DOUBLE_EQ(v4.norm_sq(), 1.0);
  EXPECT_THROW(neel_state(5), InvalidArgument);
}

TEST(MaximallyMixed, ImplicitUniformState) {
  auto rho = maximally_mixed(2);
  ASSERT_EQ(rho.rank(), 4u);
  EXPECT_TRUE(rho.weights().empty());
  EXPECT_TRUE(rho.is_maximally_mixed());
  EXPECT_FALSE(rho.is_pure());
  EXPECT_EQ(rho.component(2).amps, basis_state(build_basis(2), 2).amps);
  EXPECT_THROW(rho.component(4), InvalidArgument);
  EXPECT_EQ(maximally_mixed(24).rank(), std::size_t{1} << 24);
  EXPECT_THROW(maximally_mixed(29), CapacityError);
}

TEST(DensityOp, MixtureValidatesWeights) {
  auto b = build_basis(1);
  EXPECT_THROW(DensityOp::mixture({0.5, 0.6}, {basis_state(b, 0), basis_state(b, 1)}), InvalidArgument);
  EXPECT_THROW(DensityOp::mixture({-0.5, 1.5}, {basis_state(b, 0), basis_state(b, 1)}), InvalidArgument);
  EXPECT_NO_THROW(DensityOp::mixture({0.5, 0.5}, {basis_state(b, 0), basis_state(b, 1)}));
}

namespace {

StateVector singlet() {
  auto b = build_basis(2);
  StateVector v(b);
  v.amps[0b01] = 1.0 / std::sqrt(2.0);
  v.amps[0b10] = -1.0 / std::sqrt(2.0);
  return v;
}

}  // namespace

TEST(PartialTrace, SingletMarginalIsMixed) {
  auto rho = partial_trace(singlet(), {1});
  ASSERT_EQ(rho.rank(), 2u);
  EXPECT_NEAR(rho.weights()[0], 0.5, 1e-14);
  EXPECT_NEAR(rho.weights()[1], 0.5, 1e-14);
}

TEST(PartialTrace, ProductStateMarginalIsPure) {
  auto v = basis_state(build_basis(2), 0b01);  // site 1 up, site 2 down
  auto rho = partial_trace(v, {2});
  ASSERT_TRUE(rho.is_pure());
  auto m = to_matrix(rho);
  EXPECT_NEAR(std::abs(m(0, 0)), 1.0, 1e-14);  // down
}

TEST(PartialTrace, MatchesDenseOracle) {
  const int n = 6;
  auto psi = oracle::random_state(build_basis(n), 11);
  Eigen::MatrixXcd full = oracle::full_vector(psi) * oracle::full_vector(psi).adjoint();
  for (std::vector<int> keep : {std::vector<int>{1, 2}, {3, 6}, {5, 2, 4}, {6}}) {
    Eigen::MatrixXcd want = oracle::partial_trace(full, n, keep);
    Eigen::MatrixXcd got = reduced_matrix(psi, keep);
    EXPECT_LT((want - got).cwiseAbs().maxCoeff(), 1e-13);
    auto rho = partial_trace(psi, std::span<const int>(keep));
    EXPECT_LT((to_matrix(rho) - want).cwiseAbs().maxCoeff(), 1e-12);
  }
  auto mix = oracle::random_mixture(5, 3, 7);
  std::vector<int> keep{2, 4};
  EXPECT_LT((reduced_matrix(mix, keep) - oracle::partial_trace(oracle::density(mix), 5, keep)).cwiseAbs().maxCoeff(),
            1e-13);
}

TEST(PartialTrace, TraceAndPositivity) {
  auto mix = oracle::random_mixture(6, 5, 3);
  for (std::vector<int> keep : {std::vector<int>{1, 2}, {2, 3, 5}}) {
    Eigen::MatrixXcd m = reduced_matrix(mix, keep);
    EXPECT_NEAR(m.trace().real(), 1.0, 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(PartialTrace, SectorAndFullRepresentationsAgree) {
  auto sector_state = oracle::random_state(build_basis(8, 4), 5);
  auto full_state = embed(sector_state, build_basis(8));
  for (std::vector<int> keep : {std::vector<int>{1, 2}, {4, 7}}) {
    EXPECT_LT((reduced_matrix(sector_state, keep) - reduced_matrix(full_state, keep)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PartialTrace, RejectsBadSites) {
  auto psi = neel_state(4);
  EXPECT_THROW(partial_trace(psi, {0}), InvalidArgument);
  EXPECT_THROW(partial_trace(psi, {5}), InvalidArgument);
  EXPECT_THROW(partial_trace(psi, {1, 1}), InvalidArgument);
  EXPECT_THROW(partial_trace(psi, std::span<const int>()), InvalidArgument);
}

TEST(StateVector, EmbedAndInnerAcrossBases) {
  auto s = oracle::random_state(build_basis(6, 3), 2);
  auto f = embed(s, build_basis(6));
  EXPECT_NEAR(std::abs(inner(s, f) - 1.0), 0.0, 1e-14);
  EXPECT_EQ(inner(s, neel_state(6)), inner(f, neel_state(6)));
  auto other = basis_state(build_basis(6, 2), 0b000011);
  EXPECT_EQ(inner(s, other), cplx(0.0));
  EXPECT_THROW(embed(f, build_basis(6, 2)), InvalidArgument);
}

TEST(StateFile, RoundTrip) {
  for (auto basis : {build_basis(7, 3), build_basis(5)}) {
    auto v = oracle::random_state(basis, 99);
    std::stringstream ss;
    write_state(ss, v);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "STSV");
    EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 4 + 4 + 8 + 16 * v.dim());
    auto w = read_state(ss);
    EXPECT_TRUE(w.basis->same_space(*v.basis));
    EXPECT_EQ(w.amps, v.amps);
  }
}

TEST(StateFile, RejectsGarbage) {
  std::stringstream bad("NOPE");
  EXPECT_THROW(read_state(bad), InvalidArgument);
  std::stringstream ss;
  write_state(ss, neel_state(4));
  std::string truncated = ss.str().substr(0, 30);
  std::stringstream t(truncated);
  EXPECT_THROW(read_state(t), InvalidArgument);
}
