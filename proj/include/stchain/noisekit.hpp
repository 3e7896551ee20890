#pragma once

// Quasi-static disorder ensembles and thermal scans.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "analysis.hpp"
#include "common.hpp"
#include "eigensolver.hpp"
#include "hamiltonians.hpp"
#include "spinspace.hpp"
#include "stmeasure.hpp"

namespace stchain {

/// Independent random stream for sample `index` of an ensemble keyed by
/// `master_seed`. Streams do not depend on the order they are requested in.
inline std::mt19937_64 sample_stream(std::uint64_t master_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x53544348u};
  return std::mt19937_64(seq);
}

/// Isotropic Gaussian fields: every Cartesian component ~ N(0, Bn^2).
template <class URBG>
std::vector<FieldVec> sample_nuclear_fields(int n_sites, double bn, URBG& rng) {
  if (bn < 0.0) throw InvalidArgument("sample_nuclear_fields: Bn must be nonnegative");
  std::vector<FieldVec> fields(n_sites, FieldVec{0.0, 0.0, 0.0});
  if (bn == 0.0) return fields;
  std::normal_distribution<double> g(0.0, bn);
  for (auto& f : fields)
    for (double& c : f) c = g(rng);
  return fields;
}

enum class DisorderKind { nuclear_fields, random_couplings };

inline std::string disorder_name(DisorderKind k) {
  return k == DisorderKind::nuclear_fields ? "nuclear_fields" : "random_couplings";
}

struct DisorderConfig {
  DisorderKind kind = DisorderKind::nuclear_fields;
  double strength = 0.0;  // Bn or sigma_J, units of J1
  int samples = 200;
  std::uint64_t master_seed = 1;
  double convergence_tol = 1e-3;
};

struct Observables {
  bool profile = false;
  bool localization = false;
  bool fidelity = false;
};

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct EnsembleResult {
  DisorderConfig config;
  std::optional<TripletProfile> mean_profile;
  std::vector<double> profile_stderr;
  std::optional<Estimate> concurrence;
  std::optional<Estimate> q0;
  std::optional<Estimate> fidelity;
  int samples_used = 0;
  int failures = 0;
};

struct EnsembleOptions {
  int threads = 0;  // workers across samples
  SolveOptions solve;
  bool verbose = false;
};

namespace detail {

struct SampleResult {
  bool ok = false;
  std::vector<double> profile;
  double q0 = 0.0;
  double concurrence = 0.0;
  double fidelity = 0.0;
};

inline Estimate estimate(const std::vector<double>& xs) {
  Estimate e;
  if (xs.empty()) return e;
  double s = 0.0;
  for (double x : xs) s += x;
  e.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - e.mean) * (x - e.mean);
    v /= static_cast<double>(xs.size() - 1);
    e.stderr_ = std::sqrt(v / static_cast<double>(xs.size()));
  }
  return e;
}

}  // namespace detail

/// Disorder average of ground-state observables. Each sample draws its
/// perturbation from sample_stream(master_seed, index); batches of 10% of
/// the requested samples run in parallel and are reduced in index order, so
/// the result does not depend on the worker count.
inline EnsembleResult ensemble_average(const DisorderConfig& config, const ModelSpec& base_model,
                                       const Observables& obs, const EnsembleOptions& opts = {}) {
  if (config.samples < 1) throw InvalidArgument("ensemble_average: samples must be >= 1");
  if (config.strength < 0.0) throw InvalidArgument("ensemble_average: strength must be nonnegative");
  if (!base_model.field_free()) throw InvalidArgument("ensemble_average: base model must be field free");
  if (!obs.profile && !obs.localization && !obs.fidelity) throw InvalidArgument("ensemble_average: no observables");
  const int n = base_model.n_sites();
  const PairingLayout profile_layout = standard_layout(n);
  const PairingLayout loc_layout = middle_layout(n);

  std::optional<StateVector> clean;
  if (obs.fidelity) {
    StateVector gs = ground_state(base_model, opts.solve).vector;
    if (config.kind == DisorderKind::nuclear_fields) gs = embed(gs, build_basis(n));
    clean = std::move(gs);
  }

  auto run_sample = [&](int index, const SolveOptions& solve) {
    detail::SampleResult r;
    auto rng = sample_stream(config.master_seed, static_cast<std::uint64_t>(index));
    ModelSpec model = config.kind == DisorderKind::nuclear_fields
                          ? with_random_fields(base_model, sample_nuclear_fields(n, config.strength, rng))
                          : with_random_couplings(base_model, config.strength, rng);
    SolveOptions so = solve;
    // Keep the solver's space fixed across samples (strength 0 included).
    so.full_space = config.kind == DisorderKind::nuclear_fields;
    StateVector gs;
    try {
      gs = ground_state(model, so).vector;
    } catch (const ConvergenceError& e) {
      if (opts.verbose) std::cerr << "sample " << index << " skipped: " << e.what() << '\n';
      return r;
    }
    if (obs.profile) r.profile = triplet_profile(gs, profile_layout).probs;
    if (obs.localization) {
      HeraldResult h = herald_all_singlet(gs, loc_layout);
      r.q0 = h.q0;
      r.concurrence = h.end_state ? concurrence(*h.end_state) : 0.0;
    }
    if (obs.fidelity) r.fidelity = stchain::fidelity(*clean, gs);
    r.ok = true;
    return r;
  };

  const int workers = std::max(1, opts.threads > 0 ? opts.threads : thread_cap());
  SolveOptions inner = opts.solve;
  if (workers > 1) inner.threads = 1;

  const int batch = std::max(1, (config.samples + 9) / 10);
  std::vector<detail::SampleResult> results;
  results.reserve(config.samples);
  EnsembleResult out;
  out.config = config;
  std::vector<double> prev_profile;
  double prev_q0 = 0, prev_conc = 0, prev_fid = 0;
  bool have_prev = false;

  for (int start = 0; start < config.samples; start += batch) {
    const int end = std::min(config.samples, start + batch);
    std::vector<detail::SampleResult> chunk(end - start);
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < std::min(workers, end - start); ++w)
        pool.emplace_back([&, w] {
          for (int i = start + w; i < end; i += workers) chunk[i - start] = run_sample(i, inner);
        });
    }
    for (auto& r : chunk) results.push_back(std::move(r));

    // Running means over successful samples, in index order.
    std::vector<double> q0s, concs, fids;
    std::vector<std::vector<double>> profiles;
    int failures = 0;
    for (const auto& r : results) {
      if (!r.ok) {
        ++failures;
        continue;
      }
      if (obs.profile) profiles.push_back(r.profile);
      if (obs.localization) {
        q0s.push_back(r.q0);
        concs.push_back(r.concurrence);
      }
      if (obs.fidelity) fids.push_back(r.fidelity);
    }
    if (failures > 0.05 * static_cast<double>(results.size()))
      throw EnsembleError("ensemble_average: " + std::to_string(failures) + " of " + std::to_string(results.size()) +
                          " samples failed to converge");
    out.samples_used = static_cast<int>(results.size()) - failures;
    out.failures = failures;

    std::vector<double> mean_profile;
    if (obs.profile) {
      const std::size_t len = profile_layout.size() + 1;
      mean_profile.assign(len, 0.0);
      out.profile_stderr.assign(len, 0.0);
      for (std::size_t m = 0; m < len; ++m) {
        std::vector<double> col;
        col.reserve(profiles.size());
        for (const auto& p : profiles) col.push_back(p[m]);
        Estimate e = detail::estimate(col);
        mean_profile[m] = e.mean;
        out.profile_stderr[m] = e.stderr_;
      }
      TripletProfile tp;
      tp.probs = mean_profile;
      tp.meta.model_label = base_model.label();
      tp.meta.n_sites = n;
      tp.meta.layout = profile_layout.name;
      tp.meta.seed = config.master_seed;
      if (config.kind == DisorderKind::nuclear_fields)
        tp.meta.bn = config.strength;
      else
        tp.meta.sigma_j = config.strength;
      out.mean_profile = std::move(tp);
    }
    if (obs.localization) {
      out.q0 = detail::estimate(q0s);
      out.concurrence = detail::estimate(concs);
    }
    if (obs.fidelity) out.fidelity = detail::estimate(fids);

    auto rel = [](double now, double before) { return std::abs(now - before) / std::max(std::abs(now), 1e-12); };
    bool converged = have_prev;
    if (have_prev) {
      if (obs.profile) {
        double l1 = 0.0;
        for (std::size_t m = 0; m < mean_profile.size(); ++m) l1 += std::abs(mean_profile[m] - prev_profile[m]);
        converged = converged && l1 < config.convergence_tol;
      }
      if (obs.localization)
        converged = converged && rel(out.q0->mean, prev_q0) < config.convergence_tol &&
                    rel(out.concurrence->mean, prev_conc) < config.convergence_tol;
      if (obs.fidelity) converged = converged && rel(out.fidelity->mean, prev_fid) < config.convergence_tol;
    }
    prev_profile = mean_profile;
    if (obs.localization) {
      prev_q0 = out.q0->mean;
      prev_conc = out.concurrence->mean;
    }
    if (obs.fidelity) prev_fid = out.fidelity->mean;
    have_prev = true;
    if (converged) break;
  }
  return out;
}

struct ThermalPoint {
  double beta = 0.0;
  std::optional<TripletProfile> profile;  // standard layout
  std::optional<double> q0;               // all-singlet heralding, middle layout
  std::optional<double> concurrence;
};

/// Thermal observables over a list of inverse temperatures. The spectrum
/// is computed once and each eigenvector's profile and heralded end-pair
/// matrix are cached, so extra temperatures cost only a weighted sum.
inline std::vector<ThermalPoint> thermal_scan(const ModelSpec& model, const std::vector<double>& betas,
                                              const Observables& obs) {
  if (!obs.profile && !obs.localization) throw InvalidArgument("thermal_scan: request profile and/or localization");
  for (double b : betas)
    if (b < 0.0) throw InvalidArgument("thermal_scan: beta must be nonnegative");
  const int n = model.n_sites();
  const PairingLayout profile_layout = standard_layout(n);
  const PairingLayout loc_layout = middle_layout(n);

  Spectrum spectrum = full_spectrum(model);
  const std::size_t count = spectrum.size();
  std::vector<std::vector<double>> profiles;
  std::vector<double> q0s;
  std::vector<Eigen::MatrixXcd> ends;
  if (obs.profile) profiles.resize(count);
  if (obs.localization) {
    q0s.resize(count);
    ends.resize(count);
  }
  parallel_for(
      count,
      [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
          const StateVector& v = spectrum[k].vector;
          if (obs.profile) profiles[k] = detail::raw_profile(v, profile_layout, ProfileMode::recursion);
          if (obs.localization) std::tie(q0s[k], ends[k]) = detail::herald_unnormalized(v, loc_layout);
        }
      },
      0, 64);
  // Only energies are needed from here on.
  Spectrum energies;
  energies.reserve(count);
  for (auto& p : spectrum) energies.push_back({p.energy, StateVector{}});
  spectrum.clear();

  std::vector<ThermalPoint> out;
  for (double beta : betas) {
    ThermalPoint pt;
    pt.beta = beta;
    auto w = thermal_weights(energies, beta);
    if (obs.profile) {
      std::vector<double> acc(profile_layout.size() + 1, 0.0);
      for (std::size_t k = 0; k < w.size(); ++k)
        for (std::size_t m = 0; m < acc.size(); ++m) acc[m] += w[k] * profiles[k][m];
      TripletProfile tp = detail::finish_profile(std::move(acc), profile_layout, n);
      tp.meta.model_label = model.label();
      tp.meta.beta = beta;
      pt.profile = std::move(tp);
    }
    if (obs.localization) {
      double q0 = 0.0;
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(4, 4);
      for (std::size_t k = 0; k < w.size(); ++k) {
        q0 += w[k] * q0s[k];
        acc += w[k] * ends[k];
      }
      pt.q0 = q0;
      pt.concurrence = q0 >= 1e-14 ? concurrence(density_from_matrix(acc / q0)) : 0.0;
    }
    out.push_back(std::move(pt));
  }
  return out;
}

inline void to_json(nlohmann::json& j, const EnsembleResult& r) {
  j = nlohmann::json::object();
  j["config"] = {{"kind", disorder_name(r.config.kind)},
                 {"strength", r.config.strength},
                 {"samples", r.config.samples},
                 {"master_seed", r.config.master_seed},
                 {"convergence_tol", r.config.convergence_tol}};
  j["seed"] = r.config.master_seed;
  j["samples_used"] = r.samples_used;
  j["failures"] = r.failures;
  j["fidelity_definition"] = "squared-overlap fidelity";
  auto est = [](const Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"stderr", e.stderr_}}; };
  if (r.mean_profile) j["profile"] = {{"mean", r.mean_profile->probs}, {"stderr", r.profile_stderr}};
  if (r.q0) j["q0"] = est(*r.q0);
  if (r.concurrence) j["concurrence"] = est(*r.concurrence);
  if (r.fidelity) j["fidelity"] = est(*r.fidelity);
}

}  // namespace stchain
