#pragma once

// Command-line front end. Each subcommand composes library operations,
// writes one CSV and a JSON run manifest next to it.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "analysis.hpp"
#include "common.hpp"
#include "eigensolver.hpp"
#include "hamiltonians.hpp"
#include "noisekit.hpp"
#include "spinspace.hpp"
#include "stmeasure.hpp"

namespace stchain::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchema = 1;

enum ExitCode : int { kOk = 0, kReplayMismatch = 1, kBadArgs = 2, kSolverError = 3 };

/// start:stop:step (inclusive of stop within half a step), a comma list, or
/// a single value. Grid points are start + k*step, never accumulated.
inline std::vector<double> parse_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw InvalidArgument("bad number '" + s + "' in grid '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw InvalidArgument("grid '" + text + "' must be start:stop:step");
    const double a = number(parts[0]), b = number(parts[1]), h = number(parts[2]);
    if (!(h > 0.0) || b < a) throw InvalidArgument("grid '" + text + "' needs step > 0 and stop >= start");
    for (long k = 0;; ++k) {
      double x = a + static_cast<double>(k) * h;
      if (x > b + 0.5 * h) break;
      out.push_back(x);
      if (out.size() > 100000) throw InvalidArgument("grid '" + text + "' has too many points");
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw InvalidArgument("empty grid '" + text + "'");
  return out;
}

inline std::vector<int> parse_int_grid(const std::string& text) {
  std::vector<int> out;
  for (double x : parse_grid(text)) {
    double r = std::round(x);
    if (std::abs(x - r) > 1e-9) throw InvalidArgument("grid '" + text + "' must contain integers");
    out.push_back(static_cast<int>(r));
  }
  return out;
}

inline void check_sites(int n, int lo = 2, int hi = 24) {
  if (n < lo || n > hi || n % 2 != 0)
    throw InvalidArgument("N = " + std::to_string(n) + " must be even and within [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
}

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

/// Rows of a CSV with a fixed header; numbers are written with %.17g.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<double> row) {
    if (row.size() != header_.size()) throw std::logic_error("csv row width mismatch");
    rows_.push_back(std::move(row));
  }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidArgument("cannot write '" + path + "'");
    for (std::size_t c = 0; c < header_.size(); ++c) os << (c ? "," : "") << header_[c];
    os << '\n';
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format_double(r[c]);
      os << '\n';
    }
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> params;
  std::uint64_t master_seed = 0;
  int threads = 0;
  double wall_time_s = 0.0;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, hash
  nlohmann::json extra = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& [p, h] : m.outputs) outs.push_back({{"path", p}, {"fnv1a64", h}});
  j = {{"schema_version", kManifestSchema},
       {"tool", "stchain"},
       {"tool_version", kToolVersion},
       {"command", m.command},
       {"argv", m.argv},
       {"params", m.params},
       {"master_seed", m.master_seed},
       {"threads", m.threads},
       {"float_tolerance", 1e-12},
       {"wall_time_s", m.wall_time_s},
       {"outputs", outs},
       {"extra", m.extra}};
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.value("schema_version", 0) != kManifestSchema) throw InvalidArgument("unsupported manifest schema");
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.params = j.at("params").get<std::map<std::string, std::string>>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& o : j.at("outputs")) m.outputs.emplace_back(o.at("path"), o.at("fnv1a64"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

namespace detail {

struct ModelArgs {
  std::string model = "ring";
  double j1 = 1.0;
  double j2 = 0.0;
  double je = 0.5;
  double delta = 0.1;

  void add(CLI::App* app, const std::string& default_model) {
    model = default_model;
    app->add_option("--model", model, "ring|open|j1j2_ring|end_weakened|alternating")->capture_default_str();
    app->add_option("--j1", j1, "nearest-neighbour coupling")->capture_default_str();
    app->add_option("--j2", j2, "next-nearest coupling (j1j2_ring)")->capture_default_str();
    app->add_option("--je", je, "end coupling (end_weakened)")->capture_default_str();
    app->add_option("--delta", delta, "alternation (alternating)")->capture_default_str();
  }

  ModelSpec build(int n) const {
    ModelParams p;
    p.J1 = j1;
    p.J2 = j2;
    p.Je = je;
    p.delta = delta;
    return build_model(parse_variant(model), n, p);
  }
};

inline std::vector<std::string> profile_columns(int m_max) {
  std::vector<std::string> cols;
  for (int m = 0; m <= m_max; ++m) cols.push_back("p_" + std::to_string(m));
  return cols;
}

inline void append_profile(std::vector<double>& row, const std::vector<double>& probs, int m_max) {
  for (int m = 0; m <= m_max; ++m) row.push_back(m < static_cast<int>(probs.size()) ? probs[m] : 0.0);
}

// Heralding target for one localize column: h0, he[:Je], ha[:delta].
struct LocalizeModel {
  std::string tag;
  Variant variant;
  ModelParams params;
};

inline std::vector<LocalizeModel> parse_localize_models(const std::string& text) {
  std::vector<LocalizeModel> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::string name = item, arg;
    if (auto c = item.find(':'); c != std::string::npos) {
      name = item.substr(0, c);
      arg = item.substr(c + 1);
    }
    LocalizeModel lm;
    lm.tag = item;
    for (char& ch : lm.tag)
      if (ch == ':') ch = '_';
    std::optional<double> value;
    if (!arg.empty()) value = parse_grid(arg).at(0);
    if (name == "h0") {
      if (value) throw InvalidArgument("h0 takes no parameter");
      lm.variant = Variant::open;
    } else if (name == "he") {
      lm.variant = Variant::end_weakened;
      lm.params.Je = value.value_or(0.5);
    } else if (name == "ha") {
      lm.variant = Variant::alternating;
      lm.params.delta = value.value_or(0.1);
    } else {
      throw InvalidArgument("unknown localize model '" + item + "' (use h0, he[:Je], ha[:delta])");
    }
    out.push_back(lm);
  }
  if (out.empty()) throw InvalidArgument("--models is empty");
  return out;
}

}  // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline int execute(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Singlet-triplet measurement simulations on Heisenberg spin chains", "stchain"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string out_path, manifest_path;
  int threads = 0;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> default_out;
  auto common = [&](CLI::App* s, const std::string& fallback) {
    default_out[s->get_name()] = fallback;
    s->add_option("--out", out_path, "CSV output path (default: " + fallback + ")");
    s->add_option("--manifest", manifest_path, "manifest path (default: <out>.manifest.json)");
    s->add_option("--threads", threads, "thread cap (0: STCHAIN_THREADS or hardware)")->check(CLI::NonNegativeNumber);
    s->add_option("--seed", seed, "master seed")->capture_default_str();
  };

  // profile
  auto* profile = app.add_subcommand("profile", "triplet profile of one state");
  detail::ModelArgs profile_model;
  int profile_n = 12;
  std::string profile_layout = "standard", profile_state = "ground", profile_mode = "recursion";
  double profile_beta = 1.0;
  bool profile_oracle = false;
  common(profile, "profile.csv");
  profile_model.add(profile, "ring");
  profile->add_option("--n", profile_n, "number of sites")->capture_default_str();
  profile->add_option("--layout", profile_layout, "standard|middle")->capture_default_str();
  profile->add_option("--state", profile_state, "ground|neel|mixed|thermal")->capture_default_str();
  profile->add_option("--beta", profile_beta, "inverse temperature for --state thermal")->capture_default_str();
  profile->add_option("--mode", profile_mode, "recursion|streaming")->capture_default_str();
  profile->add_flag("--oracle", profile_oracle, "cross-check against the brute-force sum (N <= 10)");

  // distinguish
  auto* distinguish = app.add_subcommand("distinguish", "ground state vs classical states");
  detail::ModelArgs dist_model;
  std::string dist_n = "4:16:2";
  double dist_target = 0.99;
  common(distinguish, "distinguish.csv");
  dist_model.add(distinguish, "ring");
  distinguish->add_option("--n", dist_n, "grid of N")->capture_default_str();
  distinguish->add_option("--target", dist_target, "success probability for repeat counts")->capture_default_str();

  // scan-j2
  auto* scan = app.add_subcommand("scan-j2", "profiles across the J1-J2 ring");
  std::string scan_n = "10:16:2", scan_j2 = "0:0.5:0.05", scan_track = "m3";
  double scan_j1 = 1.0;
  common(scan, "scan_j2.csv");
  scan->add_option("--n", scan_n, "grid of N")->capture_default_str();
  scan->add_option("--j2", scan_j2, "grid of J2/J1")->capture_default_str();
  scan->add_option("--j1", scan_j1, "nearest-neighbour coupling")->capture_default_str();
  scan->add_option("--track", scan_track, "tracked outcome count, m<k>")->capture_default_str();

  // localize
  auto* localize = app.add_subcommand("localize", "all-singlet heralding on the middle layout");
  std::string loc_models = "h0,he:0.5,ha:0.1", loc_n = "4:16:2";
  common(localize, "localize.csv");
  localize->add_option("--models", loc_models, "comma list of h0, he[:Je], ha[:delta]")->capture_default_str();
  localize->add_option("--n", loc_n, "grid of N")->capture_default_str();

  // noise-thermal
  auto* thermal = app.add_subcommand("noise-thermal", "thermal profiles and heralded concurrence");
  detail::ModelArgs thermal_model;
  std::string thermal_n = "8:12:2", thermal_kt = "0.1:2:0.1";
  common(thermal, "noise_thermal.csv");
  thermal_model.add(thermal, "ring");
  thermal->add_option("--n", thermal_n, "grid of N (<= 14)")->capture_default_str();
  thermal->add_option("--kt", thermal_kt, "grid of k_B T / J1 (> 0)")->capture_default_str();

  // noise-nuclear / noise-couplings
  struct EnsembleArgs {
    detail::ModelArgs model;
    std::string n = "8:12:2";
    std::string strength = "0:0.3:0.05";
    int samples = 200;
    double tol = 1e-3;
  };
  EnsembleArgs nuc, cpl;
  auto* nuclear = app.add_subcommand("noise-nuclear", "ensembles over quasi-static nuclear fields");
  common(nuclear, "noise_nuclear.csv");
  nuc.model.add(nuclear, "open");
  nuclear->add_option("--n", nuc.n, "grid of N")->capture_default_str();
  nuclear->add_option("--bn", nuc.strength, "grid of Bn / J1 (per-component standard deviation)")->capture_default_str();
  nuclear->add_option("--samples", nuc.samples, "samples per point")->capture_default_str()->check(CLI::PositiveNumber);
  nuclear->add_option("--tol", nuc.tol, "relative batch-change stopping tolerance")->capture_default_str();

  auto* couplings = app.add_subcommand("noise-couplings", "ensembles over random exchange couplings");
  cpl.strength = "0:0.1:0.02";
  common(couplings, "noise_couplings.csv");
  cpl.model.add(couplings, "open");
  couplings->add_option("--n", cpl.n, "grid of N")->capture_default_str();
  couplings->add_option("--sigma", cpl.strength, "grid of sigma_J / J1")->capture_default_str();
  couplings->add_option("--samples", cpl.samples, "samples per point")->capture_default_str()->check(CLI::PositiveNumber);
  couplings->add_option("--tol", cpl.tol, "relative batch-change stopping tolerance")->capture_default_str();

  // replay
  auto* replay = app.add_subcommand("replay", "re-run a manifest and compare output hashes");
  std::string replay_manifest, replay_out;
  replay->add_option("manifest", replay_manifest, "manifest to replay")->required();
  replay->add_option("--out", replay_out, "write the replayed CSV here instead of the recorded path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kBadArgs;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  if (command == "replay") {
    try {
      RunManifest m = read_manifest(replay_manifest);
      std::vector<std::string> argv = m.argv;
      std::string target = m.outputs.empty() ? std::string() : m.outputs.front().first;
      if (!replay_out.empty()) {
        // Drop the recorded output paths and point them at the replay target.
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < argv.size(); ++i) {
          if (argv[i] == "--out" || argv[i] == "--manifest") {
            ++i;
            continue;
          }
          if (argv[i].rfind("--out=", 0) == 0 || argv[i].rfind("--manifest=", 0) == 0) continue;
          kept.push_back(argv[i]);
        }
        argv = kept;
        argv.push_back("--out");
        argv.push_back(replay_out);
        target = replay_out;
      }
      int rc = execute(argv, out, err);
      if (rc != kOk) return rc;
      if (m.outputs.empty()) return kOk;
      const std::string got = file_hash(target);
      if (got != m.outputs.front().second) {
        err << "replay mismatch: " << target << " hash " << got << " != recorded " << m.outputs.front().second << '\n';
        return kReplayMismatch;
      }
      out << "replay ok: " << target << " " << got << '\n';
      return kOk;
    } catch (const InvalidArgument& e) {
      err << "error: " << e.what() << '\n';
      return kBadArgs;
    }
  }

  if (out_path.empty()) out_path = default_out.at(command);
  if (manifest_path.empty()) manifest_path = out_path + ".manifest.json";
  if (threads > 0) set_thread_cap(threads);

  RunManifest manifest;
  manifest.command = command;
  manifest.argv = args;
  manifest.master_seed = seed;
  manifest.threads = thread_cap();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    std::string key = opt->get_name();
    key.erase(0, key.find_first_not_of('-'));
    manifest.params[key] = value;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (command == "profile") {
      check_sites(profile_n, 2, 24);
      const ModelSpec model = profile_model.build(profile_n);
      const PairingLayout layout = parse_layout(profile_layout, profile_n);
      ProfileMode mode;
      if (profile_mode == "recursion")
        mode = ProfileMode::recursion;
      else if (profile_mode == "streaming")
        mode = ProfileMode::streaming;
      else
        throw InvalidArgument("--mode must be recursion or streaming");
      if (profile_oracle && profile_n > 10) throw InvalidArgument("--oracle needs N <= 10");

      TripletProfile p, oracle;
      if (profile_state == "ground") {
        const EigenPair gs = ground_state(model);
        manifest.extra["energy"] = gs.energy;
        p = triplet_profile(gs.vector, layout, mode);
        if (profile_oracle) oracle = triplet_profile_bruteforce(gs.vector, layout);
      } else if (profile_state == "neel") {
        const StateVector v = neel_state(profile_n);
        p = triplet_profile(v, layout, mode);
        if (profile_oracle) oracle = triplet_profile_bruteforce(v, layout);
      } else if (profile_state == "mixed") {
        const DensityOp rho = maximally_mixed(profile_n);
        p = triplet_profile(rho, layout, mode);
        if (profile_oracle) oracle = triplet_profile_bruteforce(rho, layout);
      } else if (profile_state == "thermal") {
        if (!(profile_beta >= 0.0)) throw InvalidArgument("--beta must be nonnegative");
        if (profile_n > kDenseSiteCap) throw InvalidArgument("thermal profiles need N <= 14");
        const DensityOp rho = thermal_state(model, profile_beta);
        p = triplet_profile(rho, layout, mode);
        if (profile_oracle) oracle = triplet_profile_bruteforce(rho, layout);
      } else {
        throw InvalidArgument("--state must be ground, neel, mixed or thermal");
      }
      if (profile_oracle) {
        double dev = 0.0;
        for (std::size_t m = 0; m < p.probs.size(); ++m) dev = std::max(dev, std::abs(p.probs[m] - oracle.probs[m]));
        manifest.extra["oracle_max_deviation"] = dev;
        if (dev > 1e-10) {
          err << "oracle mismatch: max deviation " << format_double(dev) << " exceeds 1e-10\n";
          return kSolverError;
        }
      }
      manifest.extra["clamped"] = p.meta.clamped;
      CsvTable t({"m_t", "probability"});
      for (std::size_t m = 0; m < p.probs.size(); ++m) t.add({static_cast<double>(m), p.probs[m]});
      t.write(out_path);
    } else if (command == "distinguish") {
      if (!(dist_target > 0.5 && dist_target < 1.0)) throw InvalidArgument("--target must lie in (0.5, 1)");
      const auto ns = parse_int_grid(dist_n);
      for (int n : ns) check_sites(n, 4, 22);
      CsvTable t({"n", "d1_neel", "d1q_neel", "d1_mixed", "d1q_excited_singlet", "repeats_neel"});
      for (int n : ns) {
        const ModelSpec model = dist_model.build(n);
        const PairingLayout layout = standard_layout(n);
        const EigenPair gs = ground_state(model);
        const StateVector neel = neel_state(n);
        const TripletProfile pg = triplet_profile(gs.vector, layout);
        const double d1 = total_variation(pg, triplet_profile(neel, layout));
        const double d1q = trace_distance(gs.vector, neel);
        const double d1_mixed = total_variation(pg, triplet_profile(maximally_mixed(n), layout));
        const EigenPair es = first_excited_singlet(model);
        const double d1q_es = trace_distance(gs.vector, es.vector);
        const int r = required_repeats(d1, dist_target);
        t.add({static_cast<double>(n), d1, d1q, d1_mixed, d1q_es, static_cast<double>(r)});
      }
      t.write(out_path);
    } else if (command == "scan-j2") {
      const auto ns = parse_int_grid(scan_n);
      for (int n : ns) check_sites(n, 4, 24);
      const auto j2s = parse_grid(scan_j2);
      if (scan_track.size() < 2 || scan_track[0] != 'm') throw InvalidArgument("--track must look like m3");
      const int track = parse_int_grid(scan_track.substr(1)).at(0);
      int m_max = 0;
      for (int n : ns) m_max = std::max(m_max, n / 2);
      if (track < 0 || track > m_max) throw InvalidArgument("--track outside 0..N/2");
      std::vector<std::string> cols{"n", "j2", "p_track", "p_track_normalized"};
      for (auto& c : detail::profile_columns(m_max)) cols.push_back(c);
      CsvTable t(cols);
      ModelParams mp;
      mp.J1 = scan_j1;
      for (int n : ns) {
        auto profile_at = [&](double j2) {
          ModelParams q = mp;
          q.J2 = j2;
          return triplet_profile(ground_state(build_model(Variant::j1j2_ring, n, q)).vector, standard_layout(n));
        };
        const double ref = profile_at(0.0)[track];
        for (double j2 : j2s) {
          const TripletProfile p = profile_at(j2);
          std::vector<double> row{static_cast<double>(n), j2, p[track], ref > 0.0 ? p[track] / ref : 0.0};
          detail::append_profile(row, p.probs, m_max);
          t.add(std::move(row));
        }
      }
      t.write(out_path);
    } else if (command == "localize") {
      const auto models = detail::parse_localize_models(loc_models);
      const auto ns = parse_int_grid(loc_n);
      for (int n : ns) check_sites(n, 4, 24);
      std::vector<std::string> cols{"n"};
      for (const auto& lm : models) {
        cols.push_back("q0_" + lm.tag);
        cols.push_back("concurrence_" + lm.tag);
      }
      CsvTable t(cols);
      for (int n : ns) {
        std::vector<double> row{static_cast<double>(n)};
        for (const auto& lm : models) {
          const EigenPair gs = ground_state(build_model(lm.variant, n, lm.params));
          const HeraldResult h = herald_all_singlet(gs.vector, middle_layout(n));
          row.push_back(h.q0);
          row.push_back(h.end_state ? concurrence(*h.end_state) : 0.0);
        }
        t.add(std::move(row));
      }
      t.write(out_path);
    } else if (command == "noise-thermal") {
      const auto ns = parse_int_grid(thermal_n);
      for (int n : ns) check_sites(n, 4, kDenseSiteCap);
      const auto kts = parse_grid(thermal_kt);
      std::vector<double> betas;
      for (double kt : kts) {
        if (!(kt > 0.0)) throw InvalidArgument("--kt values must be positive");
        betas.push_back(1.0 / kt);
      }
      int m_max = 0;
      for (int n : ns) m_max = std::max(m_max, n / 2);
      std::vector<std::string> cols{"n", "kt", "q0", "concurrence", "tv_ground", "tv_classical"};
      for (auto& c : detail::profile_columns(m_max)) cols.push_back(c);
      CsvTable t(cols);
      for (int n : ns) {
        const ModelSpec model = thermal_model.build(n);
        const TripletProfile ground = triplet_profile(ground_state(model).vector, standard_layout(n));
        const auto classical = binomial_pmf(n / 2, 0.75);
        const auto points = thermal_scan(model, betas, Observables{true, true, false});
        for (std::size_t k = 0; k < points.size(); ++k) {
          const auto& pt = points[k];
          std::vector<double> row{static_cast<double>(n), kts[k], *pt.q0, *pt.concurrence,
                                  total_variation(*pt.profile, ground),
                                  total_variation(pt.profile->probs, classical)};
          detail::append_profile(row, pt.profile->probs, m_max);
          t.add(std::move(row));
        }
      }
      t.write(out_path);
    } else if (command == "noise-nuclear" || command == "noise-couplings") {
      const bool nuclear_run = command == "noise-nuclear";
      const EnsembleArgs& ea = nuclear_run ? nuc : cpl;
      const auto ns = parse_int_grid(ea.n);
      for (int n : ns) check_sites(n, 4, nuclear_run ? 16 : 24);
      const auto strengths = parse_grid(ea.strength);
      for (double s : strengths)
        if (s < 0.0) throw InvalidArgument("disorder strengths must be nonnegative");
      if (!(ea.tol >= 0.0)) throw InvalidArgument("--tol must be nonnegative");
      int m_max = 0;
      for (int n : ns) m_max = std::max(m_max, n / 2);
      const std::string sname = nuclear_run ? "bn" : "sigma_j";
      std::vector<std::string> cols{"n", sname, "samples_used", "failures", "q0", "q0_stderr", "concurrence",
                                    "concurrence_stderr", "fidelity", "fidelity_stderr"};
      for (auto& c : detail::profile_columns(m_max)) cols.push_back(c);
      CsvTable t(cols);
      EnsembleOptions eo;
      eo.threads = threads;
      for (int n : ns) {
        const ModelSpec base = ea.model.build(n);
        for (double s : strengths) {
          DisorderConfig cfg;
          cfg.kind = nuclear_run ? DisorderKind::nuclear_fields : DisorderKind::random_couplings;
          cfg.strength = s;
          cfg.samples = ea.samples;
          cfg.master_seed = seed;
          cfg.convergence_tol = ea.tol;
          const EnsembleResult r = ensemble_average(cfg, base, Observables{true, true, true}, eo);
          std::vector<double> row{static_cast<double>(n), s, static_cast<double>(r.samples_used),
                                  static_cast<double>(r.failures), r.q0->mean, r.q0->stderr_,
                                  r.concurrence->mean, r.concurrence->stderr_, r.fidelity->mean,
                                  r.fidelity->stderr_};
          detail::append_profile(row, r.mean_profile->probs, m_max);
          t.add(std::move(row));
        }
      }
      manifest.extra["fidelity_definition"] = "squared-overlap fidelity";
      t.write(out_path);
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kBadArgs;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kSolverError;
  } catch (const ConvergenceError& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const SearchExhausted& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const EnsembleError& e) {
    err << "ensemble error: " << e.what() << '\n';
    return kSolverError;
  }

  manifest.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.outputs.emplace_back(out_path, file_hash(out_path));
  std::ofstream mf(manifest_path);
  if (!mf) {
    err << "error: cannot write manifest '" << manifest_path << "'\n";
    return kBadArgs;
  }
  mf << nlohmann::json(manifest).dump(2) << '\n';
  out << "wrote " << out_path << " and " << manifest_path << '\n';
  return kOk;
}

}  // namespace stchain::cli
