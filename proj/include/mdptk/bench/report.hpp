#pragma once

// Run reports (JSON) and learning-curve tables (CSV).

#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdptk/errors.hpp"

namespace mdptk::bench {

struct CurvePoint {
  std::size_t episode = 0;
  std::size_t steps = 0;
  double episode_return = 0.0;
  std::optional<double> value_error;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct ExactComparison {
  double value_error = 0.0;       ///< ||V - V*||_inf
  double policy_agreement = 0.0;  ///< fraction of states where the policies agree

  friend bool operator==(const ExactComparison&, const ExactComparison&) = default;
};

struct RunReport {
  std::string algorithm;
  std::string status = "ok";  ///< "ok" or "failed"
  std::string error;
  std::string instance;
  std::uint64_t seed = 0;
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double discount = 0.0;
  std::vector<double> value;
  std::vector<std::size_t> policy;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> residuals;
  std::vector<CurvePoint> curve;
  std::optional<ExactComparison> exact;
  std::map<std::string, double> metrics;

  bool ok() const { return status == "ok"; }
  friend bool operator==(const RunReport&, const RunReport&) = default;
};

inline constexpr const char* kReportSchema = "mdptk-report/1";

inline nlohmann::json to_json(const RunReport& r, bool include_wall_clock = true) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["algorithm"] = r.algorithm;
  j["status"] = r.status;
  j["error"] = r.error;
  j["instance"] = r.instance;
  j["seed"] = r.seed;
  j["n_states"] = r.n_states;
  j["n_actions"] = r.n_actions;
  j["discount"] = r.discount;
  j["value"] = r.value;
  j["policy"] = r.policy;
  j["iterations"] = r.iterations;
  j["final_residual"] = r.final_residual;
  j["wall_seconds"] = include_wall_clock ? r.wall_seconds : 0.0;
  j["residuals"] = r.residuals;
  auto curve = nlohmann::json::array();
  for (const auto& c : r.curve) {
    nlohmann::json row{{"episode", c.episode}, {"steps", c.steps}, {"return", c.episode_return}};
    row["value_error"] = c.value_error ? nlohmann::json(*c.value_error) : nlohmann::json(nullptr);
    curve.push_back(std::move(row));
  }
  j["curve"] = std::move(curve);
  if (r.exact)
    j["exact"] = {{"value_error", r.exact->value_error}, {"policy_agreement", r.exact->policy_agreement}};
  else
    j["exact"] = nullptr;
  j["metrics"] = r.metrics;
  return j;
}

/// Throws ParseError when required fields are missing or mistyped.
inline RunReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema) throw ParseError("unsupported report schema", 0);
    RunReport r;
    j.at("algorithm").get_to(r.algorithm);
    j.at("status").get_to(r.status);
    j.at("error").get_to(r.error);
    j.at("instance").get_to(r.instance);
    j.at("seed").get_to(r.seed);
    j.at("n_states").get_to(r.n_states);
    j.at("n_actions").get_to(r.n_actions);
    j.at("discount").get_to(r.discount);
    j.at("value").get_to(r.value);
    j.at("policy").get_to(r.policy);
    j.at("iterations").get_to(r.iterations);
    j.at("final_residual").get_to(r.final_residual);
    j.at("wall_seconds").get_to(r.wall_seconds);
    j.at("residuals").get_to(r.residuals);
    for (const auto& row : j.at("curve")) {
      CurvePoint c;
      row.at("episode").get_to(c.episode);
      row.at("steps").get_to(c.steps);
      row.at("return").get_to(c.episode_return);
      if (!row.at("value_error").is_null()) c.value_error = row.at("value_error").get<double>();
      r.curve.push_back(c);
    }
    if (!j.at("exact").is_null())
      r.exact = ExactComparison{j.at("exact").at("value_error").get<double>(),
                                j.at("exact").at("policy_agreement").get<double>()};
    j.at("metrics").get_to(r.metrics);
    if (r.status != "ok" && r.status != "failed") throw ParseError("status must be 'ok' or 'failed'", 0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
}

inline std::string serialize_report(const RunReport& r, bool include_wall_clock = true) {
  return to_json(r, include_wall_clock).dump(2) + "\n";
}

inline RunReport parse_report(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what(), 0);
  }
  return report_from_json(j);
}

/// Columns: episode,steps,return,value_error (empty when no reference value was available).
inline void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& os) {
  os << "episode,steps,return,value_error\n" << std::setprecision(17);
  for (const auto& c : curve) {
    os << c.episode << ',' << c.steps << ',' << c.episode_return << ',';
    if (c.value_error) os << *c.value_error;
    os << '\n';
  }
}

}  // namespace mdptk::bench
