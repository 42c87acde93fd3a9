#pragma once

// State snapshots {n, beta_hint, modes: [[k, re, im], ...]} and JSON-lines sample files.

#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/gibbs.hpp"

namespace nlsgibbs {

struct Snapshot {
  FourierState state;
  std::optional<double> beta_hint;
};

/// Zero modes are omitted.
inline nlohmann::json snapshot_to_json(const FourierState& s, std::optional<double> beta_hint = std::nullopt) {
  nlohmann::json modes = nlohmann::json::array();
  for (int k = -s.n(); k <= s.n(); ++k) {
    if (s[k] != Complex{}) modes.push_back({k, s[k].real(), s[k].imag()});
  }
  nlohmann::json j = {{"n", s.n()}, {"modes", modes}};
  j["beta_hint"] = beta_hint ? nlohmann::json(*beta_hint) : nlohmann::json(nullptr);
  return j;
}

/// Rejects duplicate and out-of-range modes and malformed entries.
inline Snapshot snapshot_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    if (n < 0) throw InvalidArgument("snapshot: negative n");
    Snapshot snap{FourierState(n), std::nullopt};
    if (j.contains("beta_hint") && !j.at("beta_hint").is_null()) snap.beta_hint = j.at("beta_hint").get<double>();
    std::set<int> seen;
    for (const auto& m : j.at("modes")) {
      if (!m.is_array() || m.size() != 3) throw InvalidArgument("snapshot: each mode must be [k, re, im]");
      const int k = m.at(0).get<int>();
      if (!seen.insert(k).second) throw InvalidArgument("snapshot: duplicate mode " + std::to_string(k));
      if (std::abs(k) > n) throw InvalidMode("snapshot: mode " + std::to_string(k) + " outside |k| <= " + std::to_string(n));
      snap.state.set(k, Complex(m.at(1).get<double>(), m.at(2).get<double>()));
    }
    return snap;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("snapshot: malformed JSON: ") + e.what());
  }
}

inline Snapshot load_snapshot(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open snapshot '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("snapshot '" + path + "': " + e.what());
  }
  return snapshot_from_json(j);
}

/// One line per sample: the snapshot fields plus sample index and log weight.
inline void write_samples_jsonl(std::ostream& os, const std::vector<WeightedSample>& samples, double beta) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto j = snapshot_to_json(samples[i].state, beta);
    j["sample"] = i;
    j["log_weight"] = samples[i].log_weight;
    os << j.dump() << '\n';
  }
}

inline std::vector<WeightedSample> read_samples_jsonl(std::istream& is) {
  std::vector<WeightedSample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("samples: ") + e.what());
    }
    out.push_back({snapshot_from_json(j).state, j.value("log_weight", 0.0)});
  }
  return out;
}

}  // namespace nlsgibbs
