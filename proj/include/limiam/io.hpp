#pragma once

// File formats: numeric CSV with a header row, JSON for tensors, DAGs,
// discovery results and test reports. Every index written out is 1-based.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "limiam/bench.hpp"
#include "limiam/discover.hpp"
#include "limiam/error.hpp"
#include "limiam/simulate.hpp"
#include "limiam/svar.hpp"
#include "limiam/tensor.hpp"

namespace limiam {

using json = nlohmann::json;

struct NamedMatrix {
  std::vector<std::string> names;
  SampleMatrix values;
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Header row of names, then one row of numbers per observation. Empty,
/// non-numeric or non-finite cells are errors; there is no imputation.
inline NamedMatrix parse_csv_matrix(const std::string& text, const std::string& source = "input") {
  std::istringstream in(text);
  std::string line;
  NamedMatrix out;
  auto strip = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && s[b] == ' ') ++b;
    return s.substr(b);
  };
  if (!std::getline(in, line)) throw IoError(source + ": empty file");
  for (auto& f : detail::split(strip(line), ',')) out.names.push_back(strip(f));
  const std::size_t p = out.names.size();
  std::vector<double> vals;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip(line);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != p)
      throw IoError(source + ": line " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                    " fields, expected " + std::to_string(p));
    for (std::size_t j = 0; j < p; ++j) {
      const std::string f = strip(fields[j]);
      char* end = nullptr;
      const double v = f.empty() ? NAN : std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size() || !std::isfinite(v))
        throw IoError(source + ": line " + std::to_string(row) + ", column " + out.names[j] +
                      ": missing or non-numeric value '" + f + "'");
      vals.push_back(v);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(vals.size() / std::max<std::size_t>(p, 1));
  if (n == 0) throw IoError(source + ": no data rows");
  out.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vals.data(), n, static_cast<Eigen::Index>(p));
  return out;
}

inline NamedMatrix read_csv_matrix(const std::string& path) { return parse_csv_matrix(read_text(path), path); }

inline std::vector<std::string> default_names(int p) {
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

inline std::string csv_matrix_text(const SampleMatrix& x, const std::vector<std::string>& names) {
  require(static_cast<Eigen::Index>(names.size()) == x.cols(), "csv: one name per column required");
  std::string out;
  for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + names[j];
  out += '\n';
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out += (j ? "," : "") + detail::fmt_double(x(t, j));
    out += '\n';
  }
  return out;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> out(v);
  for (int& x : out) ++x;
  return out;
}

// ------------------------------------------------------------- tensors

/// {"order": d, "dim": p, "entries": [[[i1..id], value], ...]}, 1-based
/// indices in any arrangement; entries not listed are zero.
inline SymmetricTensor tensor_from_json(const json& j) {
  try {
    const int d = j.at("order").get<int>();
    const int p = j.at("dim").get<int>();
    require(d >= 1 && p >= 1, "tensor json: order and dim must be >= 1");
    SymmetricTensor t(d, p);
    std::map<std::vector<int>, double> seen;
    for (const auto& e : j.at("entries")) {
      require(e.is_array() && e.size() == 2, "tensor json: each entry is [index, value]");
      std::vector<int> idx = e[0].get<std::vector<int>>();
      require(static_cast<int>(idx.size()) == d, "tensor json: index length must equal the order");
      for (int& i : idx) {
        require(1 <= i && i <= p, "tensor json: index out of range 1.." + std::to_string(p));
        --i;
      }
      const double v = e[1].get<double>();
      require(std::isfinite(v), "tensor json: non-finite entry");
      std::sort(idx.begin(), idx.end());
      const auto [it, fresh] = seen.emplace(idx, v);
      require(fresh || it->second == v, "tensor json: conflicting values for one symmetric index");
      t.set(idx, v);
    }
    return t;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("tensor json: ") + e.what());
  }
}

inline json tensor_to_json(const SymmetricTensor& t) {
  json entries = json::array();
  t.for_each([&](const std::vector<int>& idx, double v) { entries.push_back({one_based(idx), v}); });
  return {{"order", t.order()}, {"dim", t.dim()}, {"entries", entries}};
}

// ------------------------------------------------------------ structures

inline json dag_to_json(const WeightedDag& dag) {
  return {{"dim", dag.dim},
          {"order", one_based(dag.perm)},
          {"B", matrix_json(dag.column_B())},
          {"B_order_coordinates", matrix_json(dag.B)},
          {"note", "B[i][j] is the coefficient of x(j+1) in the equation of x(i+1); order lists columns source first"}};
}

inline json diagnostics_json(const ScoreDiagnostics& d) {
  json j = {{"fallback_points", d.fallback_points}, {"ridge", d.ridge}, {"cv_tie", d.cv_tie}};
  if (d.bandwidth) j["bandwidth"] = *d.bandwidth;
  if (d.knots) j["knots"] = *d.knots;
  return j;
}

inline json discovery_to_json(const DiscoveryResult& r, const std::vector<std::string>& names) {
  json stages = json::array();
  for (const auto& s : r.stages) {
    json cands = json::array();
    for (const auto& c : s.candidates) {
      json pairs = json::array();
      for (const auto& pd : c.pairs)
        pairs.push_back({{"other", names[static_cast<std::size_t>(pd.target)]}, {"diagnostics", diagnostics_json(pd.diag)}});
      cands.push_back({{"candidate", names[static_cast<std::size_t>(c.column)]}, {"score", c.score}, {"pairs", pairs}});
    }
    stages.push_back({{"stage", s.stage},
                      {"selected", names[static_cast<std::size_t>(s.selected)]},
                      {"tie", s.tie},
                      {"forced", s.forced},
                      {"candidates", cands}});
  }
  std::vector<std::string> order_names;
  for (int c : r.order.perm) order_names.push_back(names[static_cast<std::size_t>(c)]);
  return {{"method", r.method},
          {"variables", names},
          {"order", one_based(r.order.perm)},
          {"order_names", order_names},
          {"B", matrix_json(r.B)},
          {"intercept", std::vector<double>(r.intercept.data(), r.intercept.data() + r.intercept.size())},
          {"stages", stages}};
}

inline json test_report_json(const TestReport& t) {
  json comps = json::array();
  for (const auto& c : t.per_component)
    comps.push_back({{"position", c.index}, {"statistic", c.statistic}, {"p_value", c.p_value}});
  json j = {{"statistic", t.statistic}, {"permutations", t.permutations}, {"p_value", t.p_value}};
  if (!comps.empty()) j["per_component"] = comps;
  return j;
}

inline json bench_config_json(const BenchmarkConfig& cfg) {
  std::vector<std::string> aux, designs;
  for (auto a : cfg.aux_set) aux.emplace_back(to_string(a));
  for (const auto& d : cfg.design_set) designs.emplace_back(to_string(d.kind));
  const DependenceDesign lh = DependenceDesign::lagged_hetero();
  double rho = lh.rho, gamma = lh.gamma;
  for (const auto& d : cfg.design_set)
    if (d.kind == DependenceDesign::Kind::LaggedHetero) rho = d.rho, gamma = d.gamma;
  return {{"dims", cfg.dims},
          {"T", cfg.T},
          {"replications", cfg.replications},
          {"aux", aux},
          {"designs", designs},
          {"methods", cfg.methods},
          {"seed", cfg.base_seed},
          {"shd_threshold", cfg.shd_threshold},
          {"edge_prob", cfg.dag.edge_prob},
          {"coef_low", cfg.dag.coef_low},
          {"coef_high", cfg.dag.coef_high},
          {"random_signs", cfg.dag.random_signs},
          {"rho", rho},
          {"gamma", gamma},
          {"finite_order_d", cfg.finite_order_d}};
}

inline constexpr std::string_view kVersion = "0.1.0";

inline json build_info() {
  return {{"limiam", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"toml++", std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." +
                         std::to_string(TOML_LIB_PATCH)},
#if defined(__clang__)
          {"compiler", "clang " __clang_version__},
#elif defined(__GNUC__)
          {"compiler", "gcc " __VERSION__},
#else
          {"compiler", "unknown"},
#endif
          {"cplusplus", static_cast<long>(__cplusplus)}};
}

/// Config, per-dataset seeds and checksums, build versions. No timestamps,
/// so identical configs give identical bytes.
inline json bench_manifest(const BenchmarkConfig& cfg, const std::vector<BenchmarkCell>& cells) {
  json datasets = json::array();
  for (const auto& c : cells) {
    if (c.method != cells.front().method) continue;  // one entry per dataset
    for (const auto& r : c.records)
      datasets.push_back({{"design", r.design},
                          {"aux", r.aux},
                          {"p", r.p},
                          {"rep", r.rep + 1},
                          {"seed", r.seed},
                          {"checksum", r.checksum},
                          {"dropped", r.dropped}});
  }
  int flagged = 0;
  for (const auto& c : cells) flagged += c.flagged;
  return {{"config", bench_config_json(cfg)},
          {"datasets", datasets},
          {"flagged_cells", flagged},
          {"files", {"cells.csv", "records.csv", "summary.csv", "summary.txt"}},
          {"versions", build_info()}};
}

/// Writes cells.csv, records.csv, summary.csv, summary.txt, manifest.json.
inline void write_bench_outputs(const std::string& dir, const BenchmarkConfig& cfg,
                                const std::vector<BenchmarkCell>& cells) {
  const SummaryTable table = summarize(cells);
  write_text(dir + "/cells.csv", cells_csv(cells));
  write_text(dir + "/records.csv", records_csv(cells));
  write_text(dir + "/summary.csv", summary_csv(table));
  write_text(dir + "/summary.txt", summary_text(table));
  write_text(dir + "/manifest.json", bench_manifest(cfg, cells).dump(2) + "\n");
}

}  // namespace limiam
