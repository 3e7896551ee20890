#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace stchain;

namespace {

// Dense Tr(rho Pi_x) with Pi_x a product of singlet/triplet projectors.
double oracle_outcome(const Eigen::MatrixXcd& rho, int n, const PairingLayout& layout, const OutcomeString& x) {
  const auto d = rho.rows();
  Eigen::MatrixXcd pi = Eigen::MatrixXcd::Identity(d, d);
  for (std::size_t p = 0; p < layout.size(); ++p) {
    Eigen::MatrixXcd ps = oracle::singlet_projector_on(n, layout.pairs[p].first, layout.pairs[p].second);
    pi = pi * (x[p] == Outcome::singlet ? ps : Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(d, d) - ps));
  }
  return (rho * pi).trace().real();
}

OutcomeString outcome_from_bits(std::size_t m, unsigned bits) {
  OutcomeString x(m);
  for (std::size_t p = 0; p < m; ++p) x[p] = ((bits >> p) & 1u) ? Outcome::triplet : Outcome::singlet;
  return x;
}

double max_dev(const std::vector<double>& a, const std::vector<double>& b) {
  EXPECT_EQ(a.size(), b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(Layouts, StandardAndMiddle) {
  auto s = standard_layout(6);
  EXPECT_EQ(s.pairs, (std::vector<std::pair<int, int>>{{1, 2}, {3, 4}, {5, 6}}));
  EXPECT_TRUE(s.unmeasured.empty());
  auto m = middle_layout(6);
  EXPECT_EQ(m.pairs, (std::vector<std::pair<int, int>>{{2, 3}, {4, 5}}));
  EXPECT_EQ(m.unmeasured, (std::vector<int>{1, 6}));
  EXPECT_THROW(standard_layout(5), InvalidArgument);
  EXPECT_THROW(PairingLayout::custom(4, {{1, 2}, {2, 3}}), InvalidArgument);
  EXPECT_THROW(PairingLayout::custom(4, {{1, 5}}), InvalidArgument);
  EXPECT_THROW(parse_layout("diagonal", 4), InvalidArgument);
}

TEST(Outcomes, Parse) {
  EXPECT_EQ(parse_outcomes("st"), (OutcomeString{Outcome::singlet, Outcome::triplet}));
  EXPECT_THROW(parse_outcomes("sx"), InvalidArgument);
}

TEST(OutcomeProbability, MatchesDenseOracle) {
  const int n = 6;
  auto psi = oracle::random_state(build_basis(n), 31);
  auto mix = oracle::random_mixture(n, 4, 32);
  Eigen::MatrixXcd rho_psi = oracle::full_vector(psi) * oracle::full_vector(psi).adjoint();
  Eigen::MatrixXcd rho_mix = oracle::density(mix);
  for (const auto& layout : {standard_layout(n), middle_layout(n), PairingLayout::custom(n, {{1, 4}, {6, 2}})}) {
    for (unsigned bits = 0; bits < (1u << layout.size()); ++bits) {
      auto x = outcome_from_bits(layout.size(), bits);
      EXPECT_NEAR(outcome_probability(psi, layout, x), oracle_outcome(rho_psi, n, layout, x), 1e-13);
      EXPECT_NEAR(outcome_probability(mix, layout, x), oracle_outcome(rho_mix, n, layout, x), 1e-13);
    }
  }
  EXPECT_THROW(outcome_probability(psi, standard_layout(n), parse_outcomes("st")), InvalidArgument);
}

TEST(TripletProfile, NeelIsBinomialHalf) {
  for (int n : {4, 8, 12, 16}) {
    auto p = triplet_profile(neel_state(n), standard_layout(n));
    EXPECT_LT(max_dev(p.probs, oracle::binomial(n / 2, 0.5)), 1e-12);
  }
}

TEST(TripletProfile, MaximallyMixedIsBinomialThreeQuarters) {
  for (int n : {4, 10, 14}) {
    auto p = triplet_profile(maximally_mixed(n), standard_layout(n));
    EXPECT_LT(max_dev(p.probs, oracle::binomial(n / 2, 0.75)), 1e-12);
  }
  // The explicit uniform mixture over basis states takes the generic path.
  const int n = 6;
  auto basis = build_basis(n);
  std::vector<double> w(64, 1.0 / 64);
  std::vector<StateVector> v;
  for (code_t c = 0; c < 64; ++c) v.push_back(basis_state(basis, c));
  auto p = triplet_profile(DensityOp::mixture(w, v), standard_layout(n));
  EXPECT_LT(max_dev(p.probs, oracle::binomial(3, 0.75)), 1e-12);
}

TEST(TripletProfile, ProductOverPairsIsBinomial) {
  // The same two-qubit state on every measured pair.
  auto pair = oracle::random_state(build_basis(2), 8);
  const double singlet_weight = std::norm((pair.amps[1] - pair.amps[2]) / std::sqrt(2.0));
  const int n = 8;
  auto basis = build_basis(n);
  StateVector psi(basis);
  for (code_t c = 0; c < basis->dim(); ++c) {
    cplx a = 1.0;
    for (int p = 0; p < n / 2; ++p) a *= pair.amps[(c >> (2 * p)) & 3];
    psi.amps[c] = a;
  }
  auto p = triplet_profile(psi, standard_layout(n));
  EXPECT_LT(max_dev(p.probs, oracle::binomial(n / 2, 1.0 - singlet_weight)), 1e-12);
}

TEST(TripletProfile, RecursionStreamingAndBruteForceAgree) {
  for (int n : {6, 8, 10}) {
    for (const auto& layout : {standard_layout(n), middle_layout(n)}) {
      auto psi = oracle::random_state(build_basis(n), 100 + n);
      auto rec = triplet_profile(psi, layout, ProfileMode::recursion);
      auto str = triplet_profile(psi, layout, ProfileMode::streaming);
      auto bf = triplet_profile_bruteforce(psi, layout);
      EXPECT_LT(max_dev(rec.probs, bf.probs), 1e-12);
      EXPECT_LT(max_dev(str.probs, bf.probs), 1e-12);
      double total = 0.0;
      for (double x : rec.probs) total += x;
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_EQ(rec.pairs(), layout.size());
    }
  }
  auto mix = oracle::random_mixture(6, 3, 4);
  EXPECT_LT(max_dev(triplet_profile(mix, standard_layout(6)).probs,
                    triplet_profile_bruteforce(mix, standard_layout(6)).probs),
            1e-12);
}

TEST(TripletProfile, IndependentOfThreads) {
  auto psi = ground_state(build_model(Variant::ring, 16)).vector;
  const int saved = thread_cap();
  set_thread_cap(1);
  auto a = triplet_profile(psi, standard_layout(16));
  set_thread_cap(4);
  auto b = triplet_profile(psi, standard_layout(16));
  set_thread_cap(saved);
  EXPECT_EQ(a.probs, b.probs);
}

TEST(TripletProfile, GlobalSingletHasNoSingleTriplet) {
  for (auto v : {Variant::ring, Variant::open}) {
    auto gs = ground_state(build_model(v, 10));
    for (const auto& layout : {standard_layout(10), PairingLayout::custom(10, {{1, 6}, {2, 9}, {3, 4}, {5, 10}, {7, 8}})})
      EXPECT_LE(triplet_profile(gs.vector, layout)[1], 1e-9);
  }
}

TEST(TripletProfile, SmallCapacityPointsAtStreaming) {
  auto psi = ground_state(build_model(Variant::ring, 12)).vector;
  const auto saved = memory_cap();
  set_memory_cap(1024);
  EXPECT_THROW(triplet_profile(psi, standard_layout(12)), CapacityError);
  auto s = triplet_profile(psi, standard_layout(12), ProfileMode::streaming);
  set_memory_cap(saved);
  EXPECT_LT(max_dev(s.probs, triplet_profile(psi, standard_layout(12)).probs), 1e-12);
}

TEST(TripletProfile, CsvAndJson) {
  auto p = triplet_profile(neel_state(4), standard_layout(4));
  std::ostringstream os;
  write_csv(os, p);
  EXPECT_EQ(os.str(), "m_t,probability\n0,0.25\n1,0.5\n2,0.25\n");
  p.meta.model_label = "neel";
  p.meta.seed = 7;
  nlohmann::json j = p;
  EXPECT_EQ(j["meta"]["n_sites"], 4);
  EXPECT_EQ(j["meta"]["layout"], "standard");
  EXPECT_EQ(j["meta"]["seed"], 7);
  EXPECT_FALSE(j["meta"].contains("beta"));
}

TEST(Herald, MatchesDenseOracle) {
  const int n = 8;
  auto layout = middle_layout(n);
  auto psi = oracle::random_state(build_basis(n), 55);
  Eigen::VectorXcd x = oracle::full_vector(psi);
  for (auto [a, b] : layout.pairs) x = oracle::singlet_projector_on(n, a, b) * x;
  const double q0 = x.squaredNorm();
  Eigen::MatrixXcd end = oracle::partial_trace(x * x.adjoint() / q0, n, {1, n});
  auto h = herald_all_singlet(psi, layout);
  EXPECT_NEAR(h.q0, q0, 1e-13);
  ASSERT_TRUE(h.end_state);
  EXPECT_LT((to_matrix(*h.end_state) - end).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(herald_all_singlet(psi, standard_layout(n)), InvalidArgument);
}

TEST(Herald, ProjectionIsIdempotent) {
  const int n = 8;
  auto layout = middle_layout(n);
  auto psi = oracle::random_state(build_basis(n, 4), 9);
  auto once = psi;
  for (const auto& pm : detail::pair_masks(layout)) detail::project_pair(*psi.basis, pm, true, once.amps);
  auto twice = once;
  for (const auto& pm : detail::pair_masks(layout)) detail::project_pair(*psi.basis, pm, true, twice.amps);
  for (std::size_t i = 0; i < once.dim(); ++i) EXPECT_LT(std::abs(once.amps[i] - twice.amps[i]), 1e-12);
}

TEST(Herald, MixedStatesAndUniform) {
  auto mix = oracle::random_mixture(6, 3, 12);
  auto layout = middle_layout(6);
  auto h = herald_all_singlet(mix, layout);
  double q0 = 0.0;
  for (std::size_t k = 0; k < mix.rank(); ++k) q0 += mix.weights()[k] * herald_all_singlet(mix.vectors()[k], layout).q0;
  EXPECT_NEAR(h.q0, q0, 1e-13);
  auto u = herald_all_singlet(maximally_mixed(8), middle_layout(8));
  EXPECT_DOUBLE_EQ(u.q0, 1.0 / 64);
  EXPECT_TRUE(u.end_state->is_maximally_mixed());
}

TEST(Herald, OpenChainEndsFormSinglet) {
  for (int n : {4, 6, 8}) {
    auto gs = ground_state(build_model(Variant::open, n));
    auto h = herald_all_singlet(gs.vector, middle_layout(n));
    ASSERT_TRUE(h.end_state);
    EXPECT_NEAR(werner_fraction(*h.end_state).alpha, 1.0, 1e-10);
  }
}

TEST(BellLocalize, OutcomesAreCompleteAndOrdered) {
  auto gs = ground_state(build_model(Variant::open, 6));
  auto layout = middle_layout(6);
  auto outs = bell_localize(gs.vector, layout);
  ASSERT_EQ(outs.size(), 16u);
  EXPECT_EQ(outs[0].outcome, (std::vector<Bell>{Bell::psi_minus, Bell::psi_minus}));
  EXPECT_EQ(outs[1].outcome, (std::vector<Bell>{Bell::psi_minus, Bell::psi_plus}));
  EXPECT_EQ(outs[15].outcome, (std::vector<Bell>{Bell::phi_minus, Bell::phi_minus}));
  double total = 0.0;
  for (const auto& o : outs) total += o.probability;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(outs[0].probability, herald_all_singlet(gs.vector, layout).q0, 1e-12);
  EXPECT_EQ(bell_symbol(Bell::phi_plus), 'F');
}

TEST(Werner, SingletAndMixed) {
  auto b = build_basis(2);
  StateVector s(b);
  s.amps[1] = 1.0 / std::sqrt(2.0);
  s.amps[2] = -1.0 / std::sqrt(2.0);
  auto fs = werner_fraction(DensityOp::pure(s));
  EXPECT_NEAR(fs.alpha, 1.0, 1e-14);
  EXPECT_NEAR(fs.residual, 0.0, 1e-14);
  auto fm = werner_fraction(maximally_mixed(2));
  EXPECT_NEAR(fm.alpha, 0.25, 1e-14);
  EXPECT_NEAR(fm.residual, 0.0, 1e-14);
  auto prod = werner_fraction(DensityOp::pure(basis_state(b, 0b01)));
  EXPECT_NEAR(prod.alpha, 0.5, 1e-14);
  EXPECT_GT(prod.residual, 0.1);
}

TEST(Werner, RingGroundStatePairs) {
  const int n = 8;
  auto m = build_model(Variant::ring, n);
  auto gs = ground_state(m);
  // Dense oracle for the singlet fraction of the adjacent pair (1,2).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(oracle::hamiltonian(m));
  Eigen::VectorXcd g = es.eigenvectors().col(0);
  const double alpha = (g.adjoint() * oracle::singlet_projector_on(n, 1, 2) * g)(0, 0).real();
  auto fit = werner_fraction(partial_trace(gs.vector, {1, 2}));
  EXPECT_NEAR(fit.alpha, alpha, 1e-9);
  EXPECT_LT(fit.residual, 1e-10);
  // Every pair marginal commutes with the singlet projector.
  const Eigen::Matrix4cd ps = singlet_projector();
  for (std::vector<int> keep : {std::vector<int>{2, 3}, {1, 5}, {3, 8}}) {
    Eigen::MatrixXcd r = reduced_matrix(gs.vector, keep);
    EXPECT_LT((r * ps - ps * r).cwiseAbs().maxCoeff(), 1e-8);
  }
}
