#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nlsgibbs/harness.hpp"
#include "nlsgibbs/io.hpp"
#include "nlsgibbs/toml_subset.hpp"
#include "test_helpers.hpp"

namespace nlsgibbs {
namespace {

using testing::random_state;

TEST(TomlSubset, ParsesSectionsAndValues) {
  const auto doc = parse_toml_subset(R"(# comment
top = 1
[model]
c = [1.0, 0.5]   # trailing comment
n = 1_000
name = "a # not a comment"
flag = true
empty = []
)");
  EXPECT_EQ(doc.at("top"), 1);
  EXPECT_EQ(doc.at("model").at("c"), nlohmann::json::array({1.0, 0.5}));
  EXPECT_EQ(doc.at("model").at("n"), 1000);
  EXPECT_TRUE(doc.at("model").at("n").is_number_integer());
  EXPECT_EQ(doc.at("model").at("name"), "a # not a comment");
  EXPECT_EQ(doc.at("model").at("flag"), true);
  EXPECT_TRUE(doc.at("model").at("empty").empty());
}

TEST(TomlSubset, RejectsMalformedInput) {
  EXPECT_THROW(parse_toml_subset("a = 1\na = 2\n"), InvalidArgument);
  EXPECT_THROW(parse_toml_subset("[s]\n[s]\n"), InvalidArgument);
  EXPECT_THROW(parse_toml_subset("[s\n"), InvalidArgument);
  EXPECT_THROW(parse_toml_subset("a = \"open\n"), InvalidArgument);
  EXPECT_THROW(parse_toml_subset("a = [1, 2\n"), InvalidArgument);
  EXPECT_THROW(parse_toml_subset("just words\n"), InvalidArgument);
  EXPECT_THROW(parse_toml_subset("a = nope\n"), InvalidArgument);
  EXPECT_THROW(load_toml_subset("/nonexistent/config.toml"), InvalidArgument);
  try {
    parse_toml_subset("a = 1\n\nb = [\n");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

TEST(ExperimentConfig, DefaultsFromEmptyDocument) {
  const auto c = experiment_config_from_toml(nlohmann::json::object());
  EXPECT_EQ(c.params.n, 8);
  EXPECT_EQ(c.nf_truncation, 8);
  EXPECT_EQ(c.sampler.method, SamplingMethod::IndependenceMetropolis);
  EXPECT_EQ(c.sampler.n_samples, 200);
  EXPECT_EQ(c.beta_grid, (std::vector<double>{16.0, 32.0}));
  EXPECT_DOUBLE_EQ(c.horizon(16.0), 256.0);
  EXPECT_TRUE(c.delta_rule.automatic);
  EXPECT_NEAR(c.delta_rule.at(16.0), std::pow(16.0, -1.3), 1e-15);
  const auto prov = c.provenance();
  for (const char* key : {"seed", "N", "dt", "M", "delta_rule"}) EXPECT_TRUE(prov.contains(key)) << key;
}

TEST(ExperimentConfig, ReadsAllSections) {
  const auto c = experiment_config_from_toml(parse_toml_subset(R"(
[model]
c = [2.0]
n = 6
nf_truncation = 4
[sampler]
seed = 9
method = "gaussian-only"
n_samples = 12
[integrator]
dt = 0.02
observations = 7
horizon_c = 0.5
full_horizon = true
[experiment]
tk = [1, 2]
beta_grid = [8, 16, 64]
delta = 0.01
eta1 = 0.5
eta2 = 0.25
alpha = 0.1
control_sample = true
all_modes = true
)"));
  EXPECT_EQ(c.params.c, std::vector<double>{2.0});
  EXPECT_EQ(c.params.n, 6);
  EXPECT_EQ(c.nf_truncation, 4);
  EXPECT_EQ(c.sampler.seed, 9u);
  EXPECT_EQ(c.sampler.method, SamplingMethod::GaussianOnly);
  EXPECT_EQ(c.integrator.dt, 0.02);
  EXPECT_EQ(c.observations, 7);
  EXPECT_NEAR(c.horizon(8.0), 0.5 * std::pow(8.0, 2.1), 1e-12);
  EXPECT_EQ(c.tk_list, (std::vector<int>{1, 2}));
  EXPECT_FALSE(c.delta_rule.automatic);
  EXPECT_EQ(c.delta_rule.at(64.0), 0.01);
  EXPECT_TRUE(c.control_sample && c.all_modes);
}

TEST(ExperimentConfig, RejectsInvalidSettings) {
  const auto with = [](const std::string& text) { return experiment_config_from_toml(parse_toml_subset(text)); };
  EXPECT_THROW(with("[experiment]\nbeta_grid = [32, 16]\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\nbeta_grid = []\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\neta1 = 0\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\neta2 = 1\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\nalpha = 0.5\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\ndelta = \"manual\"\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\ndelta = -1\n"), InvalidArgument);
  EXPECT_THROW(with("[experiment]\ntk = [9]\n"), InvalidMode);
  EXPECT_THROW(with("[experiment]\nunknown = 1\n"), InvalidArgument);
  EXPECT_THROW(with("[extra]\na = 1\n"), InvalidArgument);
  EXPECT_THROW(with("[model]\nn = \"eight\"\n"), InvalidArgument);
  EXPECT_THROW(with("[model]\nn = 4\nnf_truncation = 5\n"), InvalidArgument);
  EXPECT_THROW(with("[sampler]\nmethod = \"exact\"\n"), InvalidArgument);
  EXPECT_THROW(with("[integrator]\ndt = 0.5\n"), InvalidArgument);
  EXPECT_NO_THROW(with("[experiment]\neta1 = 1\n"));
}

TEST(Snapshot, RoundTripOmitsZeroModes) {
  FourierState s(3);
  s.set(-2, Complex(0.25, -1.5));
  s.set(3, Complex(1e-3, 0.0));
  const auto j = snapshot_to_json(s, 16.0);
  EXPECT_EQ(j.at("modes").size(), 2u);
  const auto back = snapshot_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.beta_hint, 16.0);
  for (int k = -3; k <= 3; ++k) EXPECT_EQ(back.state[k], s[k]);
  EXPECT_FALSE(snapshot_from_json(snapshot_to_json(s)).beta_hint.has_value());
}

TEST(Snapshot, RejectsDuplicatesAndOutOfRangeModes) {
  EXPECT_THROW(snapshot_from_json(nlohmann::json::parse(R"({"n":2,"modes":[[1,0,0],[1,1,0]]})")), InvalidArgument);
  EXPECT_THROW(snapshot_from_json(nlohmann::json::parse(R"({"n":2,"modes":[[3,0,0]]})")), InvalidMode);
  EXPECT_THROW(snapshot_from_json(nlohmann::json::parse(R"({"n":2,"modes":[[1,0]]})")), InvalidArgument);
  EXPECT_THROW(snapshot_from_json(nlohmann::json::parse(R"({"modes":[]})")), InvalidArgument);
  EXPECT_THROW(snapshot_from_json(nlohmann::json::parse(R"({"n":-1,"modes":[]})")), InvalidArgument);
  EXPECT_THROW(load_snapshot("/nonexistent/state.json"), InvalidArgument);
}

TEST(SamplesJsonl, RoundTrip) {
  std::vector<WeightedSample> samples{{random_state(2, 1), -0.5}, {random_state(2, 2), 0.0}};
  std::stringstream ss;
  write_samples_jsonl(ss, samples, 8.0);
  const auto back = read_samples_jsonl(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].log_weight, samples[i].log_weight);
    for (int k = -2; k <= 2; ++k) EXPECT_EQ(back[i].state[k], samples[i].state[k]);
  }
  std::stringstream bad("{not json}\n");
  EXPECT_THROW(read_samples_jsonl(bad), InvalidArgument);
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.params.c = {1.0};
  c.params.n = 4;
  c.nf_truncation = 4;
  c.sampler.n_samples = 6;
  c.sampler.seed = 3;
  c.beta_grid = {16.0};
  c.horizon_c = 0.01;
  c.observations = 20;
  c.control_sample = true;
  c.sampler.params = c.params_at(16.0);
  return c;
}

const std::vector<DriftRun>& tiny_runs() {
  static const auto runs = run_drift_experiment(tiny_config());
  return runs;
}

TEST(Drift, RecordsAndControlSample) {
  const auto& runs = tiny_runs();
  ASSERT_EQ(runs.size(), 1u);
  const auto& run = runs[0];
  EXPECT_DOUBLE_EQ(run.horizon, 2.56);
  ASSERT_EQ(run.records.size(), 7u);
  for (const auto& r : run.records) {
    EXPECT_EQ(r.k, 1);
    ASSERT_TRUE(r.drift_phi.has_value());
    EXPECT_NEAR(r.drift_I, r.raw_I * 2.0 * 16.0, 1e-15 * r.drift_I);
    EXPECT_GE(r.drift_I, 0.0);
  }
  const auto& control = run.records.back();
  EXPECT_EQ(control.flags, "control");
  EXPECT_FALSE(control.valid());
  // The single-mode state is a fixed point of every action; only roundoff remains.
  EXPECT_LT(control.drift_I, 1e-10);
  EXPECT_LT(*control.drift_phi, 1e-10);
  EXPECT_EQ(run.failed_samples, 0);
  EXPECT_GE(run.distinct_trajectories, 1);
  EXPECT_LE(run.distinct_trajectories, 6);
}

TEST(Drift, CsvIsDeterministic) {
  std::ostringstream a, b;
  write_drift_csv(a, tiny_runs());
  write_drift_csv(b, run_drift_experiment(tiny_config()));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "sample,k,T,drift_I_normalized,drift_phi_normalized,flags");
}

TEST(Drift, CsvWritesNanAndBlankPhi) {
  DriftRun run;
  DriftRecord r;
  r.k = 2;
  r.horizon = 1.0;
  r.drift_I = std::numeric_limits<double>::quiet_NaN();
  r.flags = "nan";
  run.records.push_back(r);
  DriftRecord s;
  s.sample = 1;
  s.k = 0;
  s.horizon = 1.0;
  s.drift_I = 0.5;
  run.records.push_back(s);
  std::ostringstream os;
  write_drift_csv(os, {run});
  EXPECT_NE(os.str().find("0,2,1,nan,,nan\n"), std::string::npos);
  EXPECT_NE(os.str().find("1,0,1,0.5,,\n"), std::string::npos);
}

TEST(Drift, ImportanceWeightsRejected) {
  auto c = tiny_config();
  c.sampler.method = SamplingMethod::ImportanceWeights;
  EXPECT_THROW(run_drift_experiment(c), InvalidArgument);
}

TEST(Drift, SummaryExcludesControl) {
  const auto s = summarize_drift(tiny_runs()[0], 1);
  EXPECT_EQ(s.n_valid, 6);
  EXPECT_GT(s.median_I, 0.0);
  EXPECT_TRUE(s.median_phi.has_value());
  EXPECT_THROW(summarize_drift(tiny_runs()[0], 3), InvalidArgument);
}

TEST(Drift, BetaStreamsDiffer) {
  EXPECT_NE(beta_stream_seed(1, 0), beta_stream_seed(1, 1));
  EXPECT_EQ(beta_stream_seed(1, 0), beta_stream_seed(1, 0));
}

TEST(BadSet, ExtremeThresholds) {
  const auto& records = tiny_runs()[0].records;
  EXPECT_EQ(estimate_bad_set(records, 1, std::numeric_limits<double>::infinity()).fraction, 0.0);
  const auto all = estimate_bad_set(records, 1, 1e-300, DriftQuantity::Action);
  EXPECT_EQ(all.fraction, 1.0);
  EXPECT_EQ(all.n, 6);
  EXPECT_EQ(all.std_error, 0.0);
  const auto half = bad_fraction({0.1, 0.2, 0.3, 0.4}, 0, 0.25);
  EXPECT_EQ(half.exceed, 2);
  EXPECT_DOUBLE_EQ(half.std_error, 0.25);
}

std::vector<DriftRecord> synthetic_records(int samples, int k_max, double value) {
  std::vector<DriftRecord> out;
  for (int i = 0; i < samples; ++i) {
    for (int k = -k_max; k <= k_max; ++k) {
      DriftRecord r;
      r.sample = i;
      r.k = k;
      r.drift_I = value;
      out.push_back(r);
    }
  }
  return out;
}

TEST(Corollary, ZeroDriftsAndUnionBound) {
  const auto zero = corollary_all_modes(synthetic_records(5, 3, 0.0), 0.25, 1.0, 0.5, 3);
  EXPECT_EQ(zero.union_fraction, 0.0);
  EXPECT_TRUE(zero.pass);
  double budget = 0.0;
  for (const auto& m : zero.modes) budget += m.eta2_k;
  EXPECT_LT(budget, 0.5);
  // Sum over all of Z of 1/(1+k²) is π coth π, so the budgets would exhaust eta2 exactly.
  double tail = 0.0;
  for (int k = 4; k < 200000; ++k) tail += 2.0 * 0.5 / ((1.0 + double(k) * k) * std::numbers::pi / std::tanh(std::numbers::pi));
  EXPECT_NEAR(budget + tail, 0.5, 1e-5);

  auto records = synthetic_records(4, 2, 0.0);
  for (auto& r : records) {
    if (r.sample == 0 && (r.k == 0 || r.k == 2)) r.drift_I = 10.0;
    if (r.sample == 1 && r.k == -1) r.drift_I = 10.0;
  }
  const auto rep = corollary_all_modes(records, 0.25, 1.0, 0.9, 2);
  EXPECT_DOUBLE_EQ(rep.union_fraction, 0.5);
  EXPECT_DOUBLE_EQ(rep.sum_fraction, 0.75);
  EXPECT_LE(rep.union_fraction, rep.sum_fraction);
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.modes[0].threshold, std::pow(5.0, 0.75), 1e-12);
  EXPECT_THROW(corollary_all_modes(records, 0.5, 1.0, 0.5, 2), InvalidArgument);
  EXPECT_THROW(corollary_all_modes(records, 0.25, 1.0, 0.5, -1), InvalidArgument);
  records.pop_back();
  EXPECT_THROW(corollary_all_modes(records, 0.25, 1.0, 0.5, 2), InvalidArgument);
}

TEST(Chebyshev, EnvelopesFromFlowNorms) {
  const auto c = tiny_config();
  const auto pkg = build_packages(c, 0).front();
  SamplerConfig sc = c.sampler;
  sc.method = SamplingMethod::ImportanceWeights;
  sc.n_samples = 300;
  sc.seed = 99;
  const auto norms = estimate_flow_norms(pkg, sc);
  EXPECT_GT(norms.phi_dot.mean, 0.0);
  EXPECT_GT(norms.action.mean, 0.0);
  EXPECT_LT(norms.phi_dot.mean, norms.action_dot.mean);
  const auto rep = chebyshev_check(tiny_runs()[0], 1, 1.0, norms);
  const double t = tiny_runs()[0].horizon;
  EXPECT_NEAR(rep.envelope, std::pow(t * norms.phi_dot.mean * 32.0, 2), 1e-9 * rep.envelope);
  EXPECT_NEAR(rep.envelope_rel, std::pow(t * norms.phi_dot.mean / norms.action.mean, 2), 1e-9 * rep.envelope_rel);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.bad.n, 6);
}

TEST(Stationarity, ShortHorizonAgrees) {
  SamplerConfig sc;
  sc.params = testing::params_q2(1.0, 8.0, 4);
  sc.method = SamplingMethod::ImportanceWeights;
  sc.n_samples = 400;
  sc.seed = 4;
  IntegratorConfig ic;
  ic.dt = 0.01;
  ic.t_end = 1.0;
  const auto rep = stationarity_check(sc, ic, 1);
  EXPECT_TRUE(rep.pass);
  EXPECT_GT(rep.sigma, 0.0);
  ic.t_end = 0.0;
  const auto still = stationarity_check(sc, ic, 1);
  EXPECT_EQ(still.at_start.mean, still.at_end.mean);
}

TEST(Lemma, NamesAndUnknownName) {
  const auto& names = lemma_names();
  EXPECT_NE(std::find(names.begin(), names.end(), "stimaazione"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "phidot"), names.end());
  EXPECT_THROW(verify_lemma("nosuchlemma", tiny_config(), 10), InvalidArgument);
}

TEST(Lemma, ActionLowerBoundVerdict) {
  const auto v = verify_lemma("stimaazione", tiny_config(), 2000);
  EXPECT_EQ(v.lemma, "stimaazione");
  EXPECT_TRUE(v.pass);
  EXPECT_GE(v.estimate, 0.5);
  EXPECT_LE(v.estimate, 5.0);
}

}  // namespace
}  // namespace nlsgibbs
