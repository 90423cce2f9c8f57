#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pooling/algorithms.hpp"
#include "pooling/instance_io.hpp"

// JSON wire format for run reports, one record per iteration, plus the flow
// file consumed by the verify command (whitespace-separated numbers, one per
// arc in canonical order; '#' starts a comment).

namespace pooling {

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of rows");
  Matrix m;
  m.rows = static_cast<int>(j.size());
  m.cols = m.rows == 0 ? 0 : static_cast<int>(j[0].size());
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != m.cols)
      throw ParseError(where + ": ragged rows");
    for (const auto& v : row) {
      if (!v.is_number()) throw ParseError(where + ": entries must be numbers");
      m.v.push_back(v.get<double>());
    }
  }
  return m;
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& rep) {
  nlohmann::json j;
  j["algorithm"] = rep.algorithm;
  j["o0"] = rep.o0;
  j["converged"] = rep.converged;
  j["feasible"] = rep.feasible;
  j["iterations"] = rep.iterations;
  j["or_metric"] = rep.or_metric;
  j["wall_time"] = rep.wall_time;
  if (rep.failure_reason) j["failure_reason"] = failure_name(*rep.failure_reason);
  if (rep.feasible) {
    j["final_objective"] = rep.final_objective;
    j["final_y"] = rep.final_y;
    j["final_alpha"] = detail::matrix_to_json(rep.final_alpha);
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const IterationRecord& rec : rep.trace) {
    nlohmann::json r;
    r["t"] = rec.t;
    r["status"] = lp::status_name(rec.lp_status);
    if (rec.objective) {
      r["objective"] = *rec.objective;
      r["max_violation"] = rec.max_violation;
      r["y"] = rec.y;
      r["alpha"] = detail::matrix_to_json(rec.alpha);
    }
    if (rec.mu.rows > 0) {
      r["mu"] = detail::matrix_to_json(rec.mu);
      r["nu"] = detail::matrix_to_json(rec.nu);
      r["s_min"] = detail::matrix_to_json(rec.s_min);
      r["s_max"] = detail::matrix_to_json(rec.s_max);
    }
    trace.push_back(std::move(r));
  }
  j["trace"] = std::move(trace);
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport rep;
  if (!j.is_object()) throw ParseError("report: expected an object");
  rep.algorithm = j.value("algorithm", std::string());
  rep.o0 = j.value("o0", 0.0);
  rep.converged = j.value("converged", false);
  rep.feasible = j.value("feasible", false);
  rep.iterations = j.value("iterations", 0);
  rep.or_metric = j.value("or_metric", 0.0);
  rep.wall_time = j.value("wall_time", 0.0);
  if (j.contains("failure_reason")) {
    std::string name = j["failure_reason"].get<std::string>();
    for (FailureReason r :
         {FailureReason::InfeasibleSubproblem, FailureReason::UnboundedSubproblem,
          FailureReason::IterationLimit, FailureReason::PenaltyCapReached})
      if (name == failure_name(r)) rep.failure_reason = r;
    if (!rep.failure_reason) throw ParseError("report: unknown failure_reason '" + name + "'");
  }
  if (rep.feasible) {
    rep.final_objective = j.value("final_objective", 0.0);
    if (j.contains("final_y")) rep.final_y = j["final_y"].get<std::vector<double>>();
    if (j.contains("final_alpha"))
      rep.final_alpha = detail::matrix_from_json(j["final_alpha"], "final_alpha");
  }
  if (j.contains("trace")) {
    if (!j["trace"].is_array()) throw ParseError("trace: expected an array");
    for (const auto& r : j["trace"]) {
      IterationRecord rec;
      rec.t = r.value("t", 0);
      std::string status = r.value("status", "optimal");
      if (status == "optimal")
        rec.lp_status = lp::Status::Optimal;
      else if (status == "infeasible")
        rec.lp_status = lp::Status::Infeasible;
      else if (status == "unbounded")
        rec.lp_status = lp::Status::Unbounded;
      else
        throw ParseError("trace: unknown status '" + status + "'");
      if (r.contains("objective")) {
        rec.objective = r["objective"].get<double>();
        rec.max_violation = r.value("max_violation", 0.0);
        if (r.contains("y")) rec.y = r["y"].get<std::vector<double>>();
        if (r.contains("alpha")) rec.alpha = detail::matrix_from_json(r["alpha"], "alpha");
      }
      if (r.contains("mu")) {
        rec.mu = detail::matrix_from_json(r["mu"], "mu");
        rec.nu = detail::matrix_from_json(r["nu"], "nu");
        rec.s_min = detail::matrix_from_json(r["s_min"], "s_min");
        rec.s_max = detail::matrix_from_json(r["s_max"], "s_max");
      }
      rep.trace.push_back(std::move(rec));
    }
  }
  return rep;
}

inline void save_report(const RunReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << report_to_json(rep).dump(2) << '\n';
}

inline RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return report_from_json(j);
}

// Flow file: numbers in canonical arc order, any whitespace layout, comments
// from '#' to end of line.
inline FlowVector load_flow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  FlowVector y;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double v;
    while (ss >> v) y.push_back(v);
    if (!ss.eof()) throw ParseError(path + ": non-numeric token in flow file");
  }
  return y;
}

inline void save_flow(const FlowVector& y, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  for (double v : y) out << v << '\n';
}

}  // namespace pooling
