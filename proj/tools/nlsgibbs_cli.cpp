#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlsgibbs/dynamics.hpp"
#include "nlsgibbs/gibbs.hpp"
#include "nlsgibbs/harness.hpp"
#include "nlsgibbs/io.hpp"
#include "nlsgibbs/normal_form.hpp"

namespace fs = std::filesystem;
using namespace nlsgibbs;

namespace {

std::vector<double> parse_coefficients(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("--c: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("--c: no coefficients given");
  return out;
}

ModelParams model_from(const std::string& c_text, int q, double beta, int n) {
  ModelParams p;
  p.c = parse_coefficients(c_text);
  if (q > 0 && static_cast<int>(p.c.size()) != q - 1) {
    throw InvalidArgument("--q " + std::to_string(q) + " needs " + std::to_string(q - 1) + " coefficients in --c");
  }
  p.beta = beta;
  p.n = n;
  return p;
}

std::ofstream open_out(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write '" + path + "'");
  return os;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  return j;
}

using CoefficientMap = std::map<std::string, Complex>;

CoefficientMap read_coefficients(std::istream& is) {
  CoefficientMap m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string key = j.at("holo").dump() + "|" + j.at("anti").dump() + "|" + j.at("tag").get<std::string>();
    m[key] = Complex(j.at("re").get<double>(), j.at("im").get<double>());
  }
  return m;
}

/// Same monomials and coefficients within 1e-12 relative.
std::string compare_coefficients(const CoefficientMap& expected, const CoefficientMap& actual) {
  for (const auto& [key, c] : expected) {
    const auto it = actual.find(key);
    if (it == actual.end()) return "missing term " + key;
    if (std::abs(it->second - c) > 1e-12 * std::max(1.0, std::abs(c))) return "coefficient mismatch at " + key;
  }
  for (const auto& [key, c] : actual) {
    if (!expected.count(key)) return "unexpected term " + key;
  }
  return {};
}

/// Writes (bless) or checks the Z4 and Z6 golden files.
int golden(const NormalFormPackage& pkg, const std::string& dir, bool bless) {
  const std::pair<std::string, const SparsePolynomial*> files[] = {
      {"z4_n" + std::to_string(pkg.n) + ".jsonl", &pkg.z4}, {"z6_n" + std::to_string(pkg.n) + ".jsonl", &pkg.z6}};
  int status = 0;
  for (const auto& [name, poly] : files) {
    const fs::path path = fs::path(dir) / name;
    std::stringstream fresh;
    poly->write_jsonl(fresh);
    if (bless) {
      auto os = open_out(path.string());
      os << fresh.str();
      std::cout << "blessed " << path.string() << '\n';
      continue;
    }
    std::ifstream is(path);
    if (!is) {
      std::cerr << "golden file " << path.string() << " missing; rerun with --bless to create it\n";
      status = 1;
      continue;
    }
    const auto diff = compare_coefficients(read_coefficients(is), read_coefficients(fresh));
    if (!diff.empty()) {
      std::cerr << "golden mismatch in " << path.string() << ": " << diff << '\n';
      status = 1;
    } else {
      std::cout << "golden ok " << path.string() << '\n';
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Defocusing NLS on the torus: Gibbs sampling, normal forms, dynamics and drift experiments"};
  app.require_subcommand(1);

  // sample
  auto* sample = app.add_subcommand("sample", "Draw Gibbs or Gaussian samples to JSON lines");
  double s_beta = 16.0;
  int s_n = 8, s_q = 2, s_count = 100;
  std::string s_c = "1", s_out, s_method = "importance-weights";
  std::uint64_t s_seed = 1;
  sample->add_option("--beta", s_beta, "inverse temperature")->required();
  sample->add_option("--n", s_n, "truncation N")->required();
  sample->add_option("--q", s_q, "highest power index q (P has terms j = 2..q)");
  sample->add_option("--c", s_c, "comma-separated c_2,...,c_q");
  sample->add_option("--seed", s_seed);
  sample->add_option("--count", s_count, "number of samples");
  sample->add_option("--method", s_method, "gaussian-only | importance-weights | independence-metropolis");
  sample->add_option("--out", s_out)->required();

  // build-nf
  auto* build = app.add_subcommand("build-nf", "Build the sixth-order normal-form package");
  int b_n = 8, b_tk = 1;
  double b_beta = 32.0;
  std::string b_delta = "auto", b_c = "1", b_out, b_golden;
  bool b_bless = false;
  build->add_option("--n", b_n)->required();
  build->add_option("--tk", b_tk)->required();
  build->add_option("--beta", b_beta)->required();
  build->add_option("--delta", b_delta, "auto (beta^-1.3) or a number");
  build->add_option("--c", b_c, "comma-separated c_2,...,c_q");
  build->add_option("--out", b_out)->required();
  build->add_option("--golden", b_golden, "directory holding z4_nN.jsonl / z6_nN.jsonl to check against");
  build->add_flag("--bless", b_bless, "rewrite the golden files instead of checking them");

  // check-nf
  auto* check = app.add_subcommand("check-nf", "Recheck the identities of a saved package");
  std::string c_pkg;
  int c_samples = 100;
  std::uint64_t c_seed = 1;
  check->add_option("package", c_pkg)->required();
  check->add_option("--samples", c_samples);
  check->add_option("--seed", c_seed);

  // evolve
  auto* evolve_cmd = app.add_subcommand("evolve", "Integrate a snapshot and write a trajectory CSV");
  std::string e_state, e_out, e_c = "1", e_pkg;
  double e_dt = -1.0, e_tend = 1.0;
  int e_observe = 1, e_kmax = -1;
  evolve_cmd->add_option("--state", e_state)->required();
  evolve_cmd->add_option("--dt", e_dt, "time step (default min(1e-3, 0.1/N^2))");
  evolve_cmd->add_option("--t-end", e_tend)->required();
  evolve_cmd->add_option("--observe", e_observe, "record every this many steps");
  evolve_cmd->add_option("--c", e_c);
  evolve_cmd->add_option("--kmax", e_kmax, "largest |k| with an action column (default N)");
  evolve_cmd->add_option("--package", e_pkg, "normal-form package; adds the phi6_tk column");
  evolve_cmd->add_option("--out", e_out)->required();

  // drift
  auto* drift = app.add_subcommand("drift", "Run the drift experiment of a config");
  std::string d_config, d_out;
  drift->add_option("--config", d_config)->required();
  drift->add_option("--out", d_out)->required();

  // verify-lemma
  auto* verify = app.add_subcommand("verify-lemma", "Monte Carlo check of one norm bound");
  std::string v_name, v_config;
  int v_samples = 1000;
  verify->add_option("lemma", v_name)->required()->check(CLI::IsMember(lemma_names()));
  verify->add_option("--config", v_config)->required();
  verify->add_option("--samples", v_samples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*sample) {
      SamplerConfig sc;
      sc.params = model_from(s_c, s_q, s_beta, s_n);
      sc.seed = s_seed;
      sc.n_samples = s_count;
      sc.method = sampling_method_from_string(s_method);
      const auto samples = draw_samples(sc);
      auto os = open_out(s_out);
      os.precision(17);
      write_samples_jsonl(os, samples, s_beta);
      return 0;
    }
    if (*build) {
      const auto params = model_from(b_c, 0, b_beta, b_n);
      const CutoffSpec cutoff = b_delta == "auto" ? CutoffSpec::automatic(b_beta) : CutoffSpec{std::stod(b_delta)};
      const auto pkg = build_normal_form(b_n, b_tk, params, cutoff);
      auto os = open_out(b_out);
      os << package_to_json(pkg).dump() << '\n';
      std::cout << nlohmann::json{{"n", pkg.n},
                                  {"tk", pkg.tk},
                                  {"delta", pkg.cutoff.delta},
                                  {"resonance_count", pkg.resonance_count()},
                                  {"identities", check_identities(pkg).to_json()}}
                       .dump()
                << '\n';
      if (!b_golden.empty()) return golden(pkg, b_golden, b_bless);
      if (b_bless) throw InvalidArgument("--bless needs --golden DIR");
      return 0;
    }
    if (*check) {
      const auto pkg = package_from_json(load_json(c_pkg));
      const auto ids = check_identities(pkg);
      SamplerConfig sc;
      sc.params = pkg.params;
      sc.seed = c_seed;
      sc.n_samples = c_samples;
      sc.method = SamplingMethod::GaussianOnly;
      double worst = 0.0;
      for (const auto& s : draw_samples(sc)) worst = std::max(worst, nonresonant_equation_residual(pkg, s.state));
      const bool pass = ids.max() <= 1e-12 && worst <= 1e-10;
      std::cout << nlohmann::json{{"identities", ids.to_json()}, {"nonresonant_residual", worst}, {"pass", pass}}.dump()
                << '\n';
      return pass ? 0 : 1;
    }
    if (*evolve_cmd) {
      const auto snap = load_snapshot(e_state);
      ModelParams params;
      params.c = parse_coefficients(e_c);
      params.n = snap.state.n();
      params.beta = snap.beta_hint.value_or(1.0);
      IntegratorConfig ic;
      ic.dt = e_dt > 0.0 ? e_dt : IntegratorConfig::default_dt(params.n);
      ic.t_end = e_tend;
      ic.observe_every = e_observe;
      const auto traj = evolve(snap.state, ic, params);
      auto os = open_out(e_out);
      std::function<double(const FourierState&)> phi;
      std::optional<NormalFormPackage> pkg;
      if (!e_pkg.empty()) {
        pkg = package_from_json(load_json(e_pkg));
        phi = [&](const FourierState& s) { return phi6_evaluate(*pkg, s); };
      }
      write_trajectory_csv(os, traj, params, e_kmax < 0 ? params.n : std::min(e_kmax, params.n), phi);
      return 0;
    }
    if (*drift) {
      const auto config = load_experiment_config(d_config);
      const auto runs = run_drift_experiment(config);
      auto os = open_out(d_out);
      write_drift_csv(os, runs);
      nlohmann::json summary = {{"provenance", config.provenance()}, {"runs", nlohmann::json::array()}};
      for (const auto& run : runs) {
        nlohmann::json r = {{"beta", run.beta},
                            {"T", run.horizon},
                            {"delta", run.delta},
                            {"failed_samples", run.failed_samples},
                            {"distinct_trajectories", run.distinct_trajectories},
                            {"max_leakage", run.max_leakage},
                            {"summaries", nlohmann::json::array()}};
        for (int k : config.tk_list) r["summaries"].push_back(summarize_drift(run, k).to_json());
        summary["runs"].push_back(r);
      }
      auto js = open_out(d_out + ".json");
      js << summary.dump(2) << '\n';
      std::cout << summary.dump() << '\n';
      return 0;
    }
    if (*verify) {
      const auto config = load_experiment_config(v_config);
      const auto verdict = verify_lemma(v_name, config, v_samples);
      std::cout << verdict.to_json().dump(2) << '\n';
      return verdict.pass ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
