#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bnfit/core.hpp"
#include "bnfit/error.hpp"
#include "bnfit/network.hpp"
#include "bnfit/run.hpp"

// Document formats (formatVersion 1). All arrays are flat and in
// mixed-radix order with the last listed variable fastest; states are
// numbered from 0. A CPT array lists parent configurations (in the order of
// "parents") as rows and the child state as the fastest axis.
//
// Worked example: the binary constraint R(B=1) = 0.61 is written
//   {"scope": ["B"], "dist": [0.39, 0.61]}
// i.e. state 0 first, even where a source table lists state 1 first.
namespace bnfit::io {

inline constexpr int kFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote(const std::string& s) { return json(s).dump(); }

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Syntax, std::string("document: ") + e.what());
  }
}

inline void check_version(const json& root, const std::string& what) {
  if (!root.is_object()) throw Error(ErrorKind::Syntax, what + ": top level must be an object");
  auto it = root.find("formatVersion");
  if (it == root.end() || !it->is_number_integer()) {
    throw Error(ErrorKind::Syntax, what + ": missing integer formatVersion");
  }
  if (it->get<long long>() != kFormatVersion) {
    throw Error(ErrorKind::UnsupportedVersion,
                what + ": formatVersion " + std::to_string(it->get<long long>()) + " is not supported");
  }
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(ErrorKind::Syntax, where + ": unknown field '" + it.key() + "'");
  }
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorKind::Syntax, where + ": missing field '" + key + "'");
  return *it;
}

inline std::vector<double> number_array(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(ErrorKind::Syntax, where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) {
      throw Error(ErrorKind::Syntax, where + "[" + std::to_string(i) + "] is not a number");
    }
    out.push_back(arr[i].get<double>());
  }
  return out;
}

inline std::vector<std::string> string_array(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(ErrorKind::Syntax, where + " must be an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw Error(ErrorKind::Syntax, where + "[" + std::to_string(i) + "] is not a string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

// Product of cardinalities, or SIZE_MAX once it exceeds `limit`.
inline std::size_t bounded_product(const std::vector<std::size_t>& cards, std::size_t limit) {
  std::size_t p = 1;
  for (std::size_t c : cards) {
    if (c != 0 && p > limit / c) return std::numeric_limits<std::size_t>::max();
    p *= c;
  }
  return p;
}

}  // namespace detail

/// Parses and validates a network document.
inline NetworkSpec parse_network(std::string_view text) {
  using detail::json;
  const json root = detail::parse_json(text);
  detail::check_version(root, "network");
  detail::reject_unknown_keys(root, {"formatVersion", "variables"}, "network");
  const json& vars = detail::field(root, "variables", "network");
  if (!vars.is_array() || vars.empty()) {
    throw Error(ErrorKind::Syntax, "network: 'variables' must be a nonempty array");
  }

  std::vector<VariableDecl> decls;
  std::vector<std::vector<std::string>> parent_names;
  std::vector<std::vector<double>> tables;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    std::string where = "variables[" + std::to_string(i) + "]";
    const json& v = vars[i];
    if (!v.is_object()) throw Error(ErrorKind::Syntax, where + " must be an object");
    detail::reject_unknown_keys(v, {"name", "cardinality", "states", "parents", "cpt"}, where);
    const json& name = detail::field(v, "name", where);
    if (!name.is_string()) throw Error(ErrorKind::Syntax, where + ".name must be a string");
    VariableDecl decl;
    decl.name = name.get<std::string>();
    where += " ('" + decl.name + "')";
    const json& card = detail::field(v, "cardinality", where);
    if (!card.is_number_integer() || card.get<long long>() < 2 || card.get<long long>() > (1 << 20)) {
      throw Error(ErrorKind::Cardinality, where + ".cardinality must be an integer in [2, 2^20]");
    }
    decl.cardinality = static_cast<std::size_t>(card.get<long long>());
    if (auto it = v.find("states"); it != v.end()) decl.states = detail::string_array(*it, where + ".states");
    parent_names.push_back(detail::string_array(detail::field(v, "parents", where), where + ".parents"));
    tables.push_back(detail::number_array(detail::field(v, "cpt", where), where + ".cpt"));
    decls.push_back(std::move(decl));
  }

  std::unordered_map<std::string, VarId> index;
  for (VarId v = 0; v < decls.size(); ++v) {
    if (!index.emplace(decls[v].name, v).second) {
      throw Error(ErrorKind::DuplicateVariable, "variable '" + decls[v].name + "' declared twice");
    }
  }
  std::vector<std::vector<VarId>> parents(decls.size());
  std::vector<Cpt> cpts;
  for (VarId v = 0; v < decls.size(); ++v) {
    std::vector<std::size_t> pcards;
    for (const auto& pn : parent_names[v]) {
      auto it = index.find(pn);
      if (it == index.end()) {
        throw Error(ErrorKind::UnknownVariable,
                    "variable '" + decls[v].name + "' names unknown parent '" + pn + "'");
      }
      parents[v].push_back(it->second);
      pcards.push_back(decls[it->second].cardinality);
    }
    auto all = pcards;
    all.push_back(decls[v].cardinality);
    const std::size_t expected = detail::bounded_product(all, tables[v].size());
    if (expected != tables[v].size()) {
      throw Error(ErrorKind::Cardinality,
                  "CPT of '" + decls[v].name + "' has " + std::to_string(tables[v].size()) +
                      " entries; parents and cardinality require " +
                      (expected == std::numeric_limits<std::size_t>::max() ? std::string("more")
                                                                           : std::to_string(expected)));
    }
    cpts.emplace_back(v, decls[v].cardinality, parents[v], std::move(pcards), std::move(tables[v]));
  }
  return NetworkSpec::create(std::move(decls), std::move(parents), std::move(cpts));
}

/// Canonical form: declaration order, two-space indent, every number with
/// 17 significant digits, trailing newline.
inline std::string serialize_network(const NetworkSpec& net) {
  using detail::fmt_double;
  using detail::quote;
  std::string out = "{\n  \"formatVersion\": 1,\n  \"variables\": [";
  for (VarId v = 0; v < net.size(); ++v) {
    const auto& decl = net.variable(v);
    out += v ? ",\n" : "\n";
    out += "    {\n      \"name\": " + quote(decl.name) + ",\n";
    out += "      \"cardinality\": " + std::to_string(decl.cardinality) + ",\n";
    if (!decl.states.empty()) {
      out += "      \"states\": [";
      for (std::size_t i = 0; i < decl.states.size(); ++i) out += (i ? ", " : "") + quote(decl.states[i]);
      out += "],\n";
    }
    out += "      \"parents\": [";
    const auto& pa = net.parents(v);
    for (std::size_t i = 0; i < pa.size(); ++i) out += (i ? ", " : "") + quote(net.name(pa[i]));
    out += "],\n      \"cpt\": [";
    const auto& t = net.cpt(v).table();
    for (std::size_t i = 0; i < t.size(); ++i) out += (i ? ", " : "") + fmt_double(t[i]);
    out += "]\n    }";
  }
  out += "\n  ]\n}\n";
  return out;
}

/// Constraints in document order (which is the default fitting schedule).
inline std::vector<Constraint> parse_constraints(std::string_view text, const NetworkSpec& net) {
  using detail::json;
  const json root = detail::parse_json(text);
  detail::check_version(root, "constraints");
  detail::reject_unknown_keys(root, {"formatVersion", "constraints"}, "constraints");
  const json& list = detail::field(root, "constraints", "constraints");
  if (!list.is_array()) throw Error(ErrorKind::Syntax, "constraints: 'constraints' must be an array");
  std::vector<Constraint> rs;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "constraints[" + std::to_string(i) + "]";
    const json& c = list[i];
    if (!c.is_object()) throw Error(ErrorKind::Syntax, where + " must be an object");
    detail::reject_unknown_keys(c, {"scope", "dist"}, where);
    std::vector<VarId> scope;
    for (const auto& name : detail::string_array(detail::field(c, "scope", where), where + ".scope")) {
      auto v = net.find(name);
      if (!v) throw Error(ErrorKind::UnknownVariable, where + ": unknown variable '" + name + "'");
      scope.push_back(*v);
    }
    auto dist = detail::number_array(detail::field(c, "dist", where), where + ".dist");
    try {
      rs.push_back(make_constraint(net, std::move(scope), std::move(dist)));
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.detail());
    }
  }
  return rs;
}

inline std::string serialize_constraints(const std::vector<Constraint>& rs, const NetworkSpec& net) {
  using detail::fmt_double;
  using detail::quote;
  std::string out = "{\n  \"formatVersion\": 1,\n  \"constraints\": [";
  for (std::size_t i = 0; i < rs.size(); ++i) {
    out += i ? ",\n" : "\n";
    out += "    {\n      \"scope\": [";
    for (std::size_t k = 0; k < rs[i].scope.size(); ++k) out += (k ? ", " : "") + quote(net.name(rs[i].scope[k]));
    out += "],\n      \"dist\": [";
    const auto& p = rs[i].dist.probs;
    for (std::size_t k = 0; k < p.size(); ++k) out += (k ? ", " : "") + fmt_double(p[k]);
    out += "]\n    }";
  }
  out += rs.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

/// Run report. finalDivergence is null when it was not computed (dense
/// ceiling) or is infinite; divergenceNote says which.
inline std::string serialize_report(const RunReport& report) {
  using detail::json;
  json j;
  j["formatVersion"] = kFormatVersion;
  j["algorithm"] = to_string(report.algorithm);
  j["termination"] = to_string(report.termination);
  j["cycles"] = report.cycles;
  j["wallTimeSeconds"] = report.wall_time.count();
  j["logBase"] = RunReport::kLogBase;
  if (report.final_divergence && std::isfinite(*report.final_divergence)) {
    j["finalDivergence"] = *report.final_divergence;
    j["divergenceNote"] = "";
  } else {
    j["finalDivergence"] = nullptr;
    j["divergenceNote"] = report.final_divergence ? "infinite" : "omitted: above dense ceiling";
  }
  j["perConstraintResiduals"] = report.per_constraint_residuals;
  j["structuralResidual"] = report.structural_residual;
  j["maxRenormalization"] = report.max_renormalization;
  j["maxTableEntries"] = report.max_table_entries;
  j["maxMarginalEntries"] = report.max_marginal_entries;
  j["innerIterations"] = report.inner_iterations;
  return j.dump(2) + "\n";
}

inline RunReport parse_report(std::string_view text) {
  using detail::json;
  const json root = detail::parse_json(text);
  detail::check_version(root, "report");
  RunReport r;
  try {
    const auto alg = root.at("algorithm").get<std::string>();
    if (alg == "ipfp") r.algorithm = Algorithm::Ipfp;
    else if (alg == "e-ipfp") r.algorithm = Algorithm::EIpfp;
    else if (alg == "d-ipfp") r.algorithm = Algorithm::DIpfp;
    else throw Error(ErrorKind::Syntax, "report: unknown algorithm '" + alg + "'");
    const auto term = root.at("termination").get<std::string>();
    if (term == "converged") r.termination = Termination::Converged;
    else if (term == "max-cycles") r.termination = Termination::MaxCycles;
    else if (term == "oscillating") r.termination = Termination::Oscillating;
    else throw Error(ErrorKind::Syntax, "report: unknown termination '" + term + "'");
    r.cycles = root.at("cycles").get<std::size_t>();
    r.wall_time = std::chrono::duration<double>(root.at("wallTimeSeconds").get<double>());
    const auto& div = root.at("finalDivergence");
    if (div.is_number()) r.final_divergence = div.get<double>();
    else if (root.value("divergenceNote", "") == "infinite") r.final_divergence = std::numeric_limits<double>::infinity();
    r.per_constraint_residuals = root.at("perConstraintResiduals").get<std::vector<double>>();
    r.structural_residual = root.at("structuralResidual").get<double>();
    r.max_renormalization = root.value("maxRenormalization", 0.0);
    r.max_table_entries = root.value("maxTableEntries", std::size_t{0});
    r.max_marginal_entries = root.value("maxMarginalEntries", std::size_t{0});
    r.inner_iterations = root.value("innerIterations", std::size_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Syntax, std::string("report: ") + e.what());
  }
  return r;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temporary file and rename, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::Io, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace bnfit::io
