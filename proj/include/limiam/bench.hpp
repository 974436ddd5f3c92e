#pragma once

// Monte Carlo benchmark grid: auxiliary distribution x dependence design x
// dimension, every method run on the same dataset per replication, scored on
// exact (or topologically compatible) order recovery and SHD.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <vector>

#include <tomlplusplus/toml.hpp>

#include "limiam/discover.hpp"
#include "limiam/error.hpp"
#include "limiam/meanind.hpp"
#include "limiam/rng.hpp"
#include "limiam/simulate.hpp"

namespace limiam {

/// A discovery method in the grid: DirectLiNGAM when `scorer` is empty.
struct Method {
  std::string name;
  std::optional<ScorerSpec> scorer;

  DiscoveryResult run(const SampleMatrix& x, std::uint64_t seed) const {
    if (scorer) return direct_limiam(x, *scorer, seed);
    return direct_lingam_baseline(x);
  }
};

inline Method parse_method(std::string_view name, int finite_order_d = 4) {
  if (name == "direct-lingam") return {"direct-lingam", std::nullopt};
  std::string_view s = name;
  if (s.starts_with("limiam-")) s.remove_prefix(7);
  const ScorerSpec spec = parse_scorer(s, finite_order_d);
  return {"limiam-" + std::string(scorer_name(spec)), spec};
}

struct BenchmarkConfig {
  std::vector<int> dims{2, 3, 4};
  int T = 500;
  int replications = 25;
  std::vector<AuxDistribution> aux_set{AuxDistribution::Uniform, AuxDistribution::UShapedBeta,
                                       AuxDistribution::ConcentratedBeta, AuxDistribution::Bimodal};
  std::vector<DependenceDesign> design_set{DependenceDesign::independent(), DependenceDesign::lagged_hetero(),
                                           DependenceDesign::threshold(), DependenceDesign::conditional_mixture()};
  std::vector<std::string> methods{"direct-lingam", "limiam-kernel", "limiam-sieve", "limiam-moment",
                                   "limiam-finite-order"};
  std::uint64_t base_seed = 1;
  double shd_threshold = 0.15;
  DagOptions dag;
  int finite_order_d = 4;

  void validate() const {
    require(replications >= 1, "bench config: replications must be >= 1");
    require(!dims.empty() && !aux_set.empty() && !design_set.empty() && !methods.empty(),
            "bench config: every grid axis needs at least one entry");
    for (int p : dims) {
      require(p >= 2, "bench config: every p must be >= 2");
      require(T >= p + 2, "bench config: T must be >= p + 2 for every p");
    }
    require(shd_threshold >= 0.0, "bench config: shd_threshold must be >= 0");
    for (const auto& d : design_set) d.validate();
    for (const auto& m : methods) (void)parse_method(m, finite_order_d);
    require(0.0 <= dag.edge_prob && dag.edge_prob <= 1.0, "bench config: edge_prob must lie in [0, 1]");
  }

  bool dense() const { return dag.edge_prob >= 1.0; }

  /// 100 replications, p = 2..6, all environments and methods.
  BenchmarkConfig full_scale() const {
    BenchmarkConfig c = *this;
    c.dims = {2, 3, 4, 5, 6};
    c.replications = 100;
    return c;
  }
};

namespace detail {

template <class T>
T config_scalar(const toml::table& t, std::string_view key, T fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if constexpr (std::is_floating_point_v<T>) {
    if (auto v = n->value<double>()) return static_cast<T>(*v);
  } else if constexpr (std::is_integral_v<T>) {
    if (auto v = n->value<std::int64_t>()) return static_cast<T>(*v);
  } else {
    if (auto v = n->value<std::string>()) return *v;
  }
  throw ArgumentError("bench config: key '" + std::string(key) + "' has the wrong type");
}

inline std::vector<std::string> config_strings(const toml::table& t, std::string_view key,
                                               std::vector<std::string> fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  const toml::array* arr = n->as_array();
  require(arr != nullptr, "bench config: key '" + std::string(key) + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *arr) {
    auto v = e.value<std::string>();
    require(v.has_value(), "bench config: key '" + std::string(key) + "' must be an array of strings");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

/// TOML config; absent keys keep their defaults. Recognized keys: dims, T,
/// replications, aux, designs, methods, seed, shd_threshold, edge_prob,
/// random_signs, coef_low, coef_high, rho, gamma, finite_order_d.
inline BenchmarkConfig parse_bench_config(std::string_view toml_text, std::string_view source = "config") {
  toml::table t;
  try {
    t = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    throw ArgumentError("bench config: " + std::string(e.description()));
  }
  static constexpr std::string_view known[] = {"dims", "T", "replications", "aux", "designs", "methods", "seed",
                                               "shd_threshold", "edge_prob", "random_signs", "coef_low", "coef_high",
                                               "rho", "gamma", "finite_order_d"};
  for (const auto& [k, v] : t)
    require(std::find(std::begin(known), std::end(known), k.str()) != std::end(known),
            "bench config: unknown key '" + std::string(k.str()) + "'");

  BenchmarkConfig cfg;
  if (const toml::node* n = t.get("dims")) {
    const toml::array* arr = n->as_array();
    require(arr != nullptr, "bench config: dims must be an array of integers");
    cfg.dims.clear();
    for (const auto& e : *arr) {
      auto v = e.value<std::int64_t>();
      require(v.has_value(), "bench config: dims must be an array of integers");
      cfg.dims.push_back(static_cast<int>(*v));
    }
  }
  cfg.T = detail::config_scalar<int>(t, "T", cfg.T);
  cfg.replications = detail::config_scalar<int>(t, "replications", cfg.replications);
  cfg.base_seed = detail::config_scalar<std::uint64_t>(t, "seed", cfg.base_seed);
  cfg.shd_threshold = detail::config_scalar<double>(t, "shd_threshold", cfg.shd_threshold);
  cfg.dag.edge_prob = detail::config_scalar<double>(t, "edge_prob", cfg.dag.edge_prob);
  cfg.dag.coef_low = detail::config_scalar<double>(t, "coef_low", cfg.dag.coef_low);
  cfg.dag.coef_high = detail::config_scalar<double>(t, "coef_high", cfg.dag.coef_high);
  if (const toml::node* n = t.get("random_signs")) {
    auto v = n->value<bool>();
    require(v.has_value(), "bench config: random_signs must be a boolean");
    cfg.dag.random_signs = *v;
  }
  cfg.finite_order_d = detail::config_scalar<int>(t, "finite_order_d", cfg.finite_order_d);
  const double rho = detail::config_scalar<double>(t, "rho", 0.5);
  const double gamma = detail::config_scalar<double>(t, "gamma", 1.0);

  std::vector<std::string> aux_names, design_names;
  for (auto a : cfg.aux_set) aux_names.emplace_back(to_string(a));
  for (const auto& d : cfg.design_set) design_names.emplace_back(to_string(d.kind));
  cfg.aux_set.clear();
  for (const auto& a : detail::config_strings(t, "aux", aux_names)) cfg.aux_set.push_back(parse_aux(a));
  cfg.design_set.clear();
  for (const auto& d : detail::config_strings(t, "designs", design_names))
    cfg.design_set.push_back(parse_design(d, rho, gamma));
  cfg.methods.clear();
  for (const auto& m : detail::config_strings(t, "methods", BenchmarkConfig{}.methods))
    cfg.methods.push_back(parse_method(m, cfg.finite_order_d).name);
  cfg.validate();
  return cfg;
}

inline BenchmarkConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read bench config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_bench_config(buf.str(), path);
}

struct ReplicationRecord {
  std::string aux, design, method;
  int p = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  std::uint64_t checksum = 0;
  bool dropped = false;  // some method failed on this dataset
  std::string error;
  bool success = false;
  int shd = 0;
  std::vector<int> order;  // 0-based columns
};

struct BenchmarkCell {
  std::string aux, design, method;
  int p = 0;
  int replications = 0;
  int completed = 0;
  double success_rate = 0.0;
  double mean_shd = 0.0;
  bool flagged = false;  // more than 10% of replications dropped
  std::vector<ReplicationRecord> records;

  bool same_summary(const BenchmarkCell& o) const {
    return aux == o.aux && design == o.design && method == o.method && p == o.p && replications == o.replications &&
           completed == o.completed && success_rate == o.success_rate && mean_shd == o.mean_shd &&
           flagged == o.flagged;
  }
};

/// FNV-1a over the raw bytes of the matrix entries (column-major).
inline std::uint64_t dataset_checksum(const SampleMatrix& x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(x.data());
  const std::size_t len = static_cast<std::size_t>(x.size()) * sizeof(double);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Replication seed from the cell keys (enum values, not config positions,
/// so a sub-grid reproduces the same datasets as the full grid).
inline std::uint64_t replication_seed(std::uint64_t base, AuxDistribution aux, const DependenceDesign& design, int p,
                                      int rep) {
  return derive_seed(base, {static_cast<std::uint64_t>(aux), static_cast<std::uint64_t>(design.kind),
                            static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(rep)});
}

struct ReplicationData {
  WeightedDag dag;
  SampleMatrix x;
  std::uint64_t seed = 0;
};

inline ReplicationData make_replication(const BenchmarkConfig& cfg, AuxDistribution aux,
                                        const DependenceDesign& design, int p, int rep) {
  ReplicationData d;
  d.seed = replication_seed(cfg.base_seed, aux, design, p, rep);
  d.dag = sample_dag(p, derive_seed(d.seed, {1}), cfg.dag);
  d.x = generate_dataset(d.dag, sample_disturbances(p, cfg.T, aux, design, derive_seed(d.seed, {2})));
  return d;
}

using ProgressFn = std::function<void(const std::string&)>;

inline std::vector<BenchmarkCell> run_grid(const BenchmarkConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  std::vector<Method> methods;
  for (const auto& m : cfg.methods) methods.push_back(parse_method(m, cfg.finite_order_d));

  std::vector<BenchmarkCell> cells;
  for (const auto& design : cfg.design_set) {
    for (AuxDistribution aux : cfg.aux_set) {
      for (int p : cfg.dims) {
        const std::size_t first = cells.size();
        for (const auto& m : methods) {
          BenchmarkCell c;
          c.aux = std::string(to_string(aux));
          c.design = std::string(to_string(design.kind));
          c.method = m.name;
          c.p = p;
          c.replications = cfg.replications;
          cells.push_back(std::move(c));
        }
        for (int rep = 0; rep < cfg.replications; ++rep) {
          const ReplicationData data = make_replication(cfg, aux, design, p, rep);
          const std::uint64_t checksum = dataset_checksum(data.x);
          const EdgeSet truth = edges_from_B(data.dag.column_B(), cfg.shd_threshold);
          const CausalOrder true_order{data.dag.perm};
          std::vector<ReplicationRecord> recs;
          std::string failure;
          for (const auto& m : methods) {
            ReplicationRecord r;
            r.aux = std::string(to_string(aux));
            r.design = std::string(to_string(design.kind));
            r.method = m.name;
            r.p = p;
            r.rep = rep;
            r.seed = data.seed;
            r.checksum = dataset_checksum(data.x);
            require(r.checksum == checksum, "run_grid: dataset changed between methods");
            try {
              const DiscoveryResult res = m.run(data.x, data.seed);
              r.order = res.order.perm;
              r.success = cfg.dense() ? res.order == true_order : order_compatible(res.order, truth);
              r.shd = shd(edges_from_B(res.B, cfg.shd_threshold), truth);
            } catch (const std::exception& e) {
              r.error = e.what();
              if (failure.empty()) failure = m.name + ": " + e.what();
            }
            recs.push_back(std::move(r));
          }
          for (std::size_t k = 0; k < recs.size(); ++k) {
            if (!failure.empty()) {
              recs[k].dropped = true;
              if (recs[k].error.empty()) recs[k].error = "dropped (" + failure + ")";
            }
            cells[first + k].records.push_back(std::move(recs[k]));
          }
        }
        for (std::size_t k = first; k < cells.size(); ++k) {
          BenchmarkCell& c = cells[k];
          int ok = 0, shd_sum = 0;
          for (const auto& r : c.records) {
            if (r.dropped) continue;
            ++c.completed;
            ok += r.success;
            shd_sum += r.shd;
          }
          if (c.completed > 0) {
            c.success_rate = static_cast<double>(ok) / c.completed;
            c.mean_shd = static_cast<double>(shd_sum) / c.completed;
          }
          c.flagged = (c.replications - c.completed) * 10 > c.replications;
        }
        if (progress) {
          std::ostringstream msg;
          msg << to_string(design.kind) << " / " << to_string(aux) << " / p=" << p << ":";
          for (std::size_t k = first; k < cells.size(); ++k)
            msg << ' ' << cells[k].method << '=' << cells[k].success_rate;
          progress(msg.str());
        }
      }
    }
  }
  return cells;
}

// ---------------------------------------------------------------- output

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string join_order(const std::vector<int>& order) {
  std::string s;
  for (std::size_t k = 0; k < order.size(); ++k) s += (k ? " " : "") + std::to_string(order[k] + 1);
  return s;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  require(used == s.size(), "parse: bad number '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  require(used == s.size(), "parse: bad integer '" + s + "'");
  return v;
}

}  // namespace detail

inline constexpr std::string_view kCellsHeader =
    "design,aux,p,method,replications,completed,flagged,success_rate,mean_shd";

inline std::string cells_csv(const std::vector<BenchmarkCell>& cells) {
  std::string out(kCellsHeader);
  out += '\n';
  for (const auto& c : cells) {
    out += c.design + ',' + c.aux + ',' + std::to_string(c.p) + ',' + c.method + ',' + std::to_string(c.replications) +
           ',' + std::to_string(c.completed) + ',' + (c.flagged ? "1" : "0") + ',' +
           detail::fmt_double(c.success_rate) + ',' + detail::fmt_double(c.mean_shd) + '\n';
  }
  return out;
}

/// Inverse of cells_csv (per-replication records are not part of this file).
inline std::vector<BenchmarkCell> parse_cells_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  require(std::getline(in, line) && line == kCellsHeader, "parse_cells_csv: unexpected header");
  std::vector<BenchmarkCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    require(f.size() == 9, "parse_cells_csv: expected 9 fields, got " + std::to_string(f.size()));
    BenchmarkCell c;
    c.design = f[0];
    c.aux = f[1];
    c.p = detail::parse_int(f[2]);
    c.method = f[3];
    c.replications = detail::parse_int(f[4]);
    c.completed = detail::parse_int(f[5]);
    c.flagged = f[6] == "1";
    c.success_rate = detail::parse_double(f[7]);
    c.mean_shd = detail::parse_double(f[8]);
    cells.push_back(std::move(c));
  }
  return cells;
}

inline std::string records_csv(const std::vector<BenchmarkCell>& cells) {
  std::string out = "design,aux,p,method,rep,seed,checksum,dropped,success,shd,order,error\n";
  for (const auto& c : cells) {
    for (const auto& r : c.records) {
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out += r.design + ',' + r.aux + ',' + std::to_string(r.p) + ',' + r.method + ',' + std::to_string(r.rep + 1) +
             ',' + std::to_string(r.seed) + ',' + std::to_string(r.checksum) + ',' + (r.dropped ? "1" : "0") + ',' +
             (r.success ? "1" : "0") + ',' + std::to_string(r.shd) + ',' + detail::join_order(r.order) + ',' + err +
             '\n';
    }
  }
  return out;
}

/// Wide tables: one row per (design, aux), one column per (method, p).
struct SummaryTable {
  std::vector<std::pair<std::string, std::string>> rows;  // (design, aux)
  std::vector<std::pair<std::string, int>> columns;       // (method, p)
  std::map<std::tuple<std::string, std::string, std::string, int>, const BenchmarkCell*> index;

  const BenchmarkCell* at(std::size_t r, std::size_t c) const {
    const auto it = index.find({rows[r].first, rows[r].second, columns[c].first, columns[c].second});
    return it == index.end() ? nullptr : it->second;
  }
};

inline SummaryTable summarize(const std::vector<BenchmarkCell>& cells) {
  require(!cells.empty(), "summarize: no cells");
  SummaryTable t;
  std::vector<std::string> methods;
  std::vector<int> dims;
  for (const auto& c : cells) {
    const std::pair<std::string, std::string> row{c.design, c.aux};
    if (std::find(t.rows.begin(), t.rows.end(), row) == t.rows.end()) t.rows.push_back(row);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(dims.begin(), dims.end(), c.p) == dims.end()) dims.push_back(c.p);
    t.index[{c.design, c.aux, c.method, c.p}] = &c;
  }
  std::sort(dims.begin(), dims.end());
  for (const auto& m : methods)
    for (int p : dims) t.columns.emplace_back(m, p);
  return t;
}

inline std::string summary_csv(const SummaryTable& t) {
  std::string out = "metric,design,aux";
  for (const auto& [m, p] : t.columns) out += ',' + m + "/p" + std::to_string(p);
  out += '\n';
  for (const char* metric : {"success_rate", "mean_shd"}) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      out += std::string(metric) + ',' + t.rows[r].first + ',' + t.rows[r].second;
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const BenchmarkCell* cell = t.at(r, c);
        out += ',';
        if (cell) out += detail::fmt_double(std::strcmp(metric, "mean_shd") == 0 ? cell->mean_shd : cell->success_rate);
      }
      out += '\n';
    }
  }
  return out;
}

inline std::string summary_text(const SummaryTable& t) {
  std::ostringstream out;
  std::size_t label_w = 0;
  for (const auto& [d, a] : t.rows) label_w = std::max(label_w, d.size() + a.size() + 3);
  for (const char* metric : {"success_rate", "mean_shd"}) {
    const bool is_shd = std::strcmp(metric, "mean_shd") == 0;
    out << (is_shd ? "Mean SHD" : "Order success rate") << '\n';
    // one block per method keeps lines readable
    std::vector<std::string> methods;
    for (const auto& col : t.columns)
      if (std::find(methods.begin(), methods.end(), col.first) == methods.end()) methods.push_back(col.first);
    for (const auto& m : methods) {
      out << "  " << m << '\n' << "    " << std::string(label_w, ' ');
      for (const auto& [cm, p] : t.columns)
        if (cm == m) out << "   p=" << p << (p < 10 ? " " : "");
      out << '\n';
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::string label = t.rows[r].first + " / " + t.rows[r].second;
        label.resize(label_w, ' ');
        out << "    " << label;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
          if (t.columns[c].first != m) continue;
          const BenchmarkCell* cell = t.at(r, c);
          std::string v = cell ? detail::fmt_fixed(is_shd ? cell->mean_shd : cell->success_rate, 2) : "-";
          if (cell && cell->flagged) v += '*';
          out << std::string(v.size() < 7 ? 7 - v.size() : 0, ' ') << v;
        }
        out << '\n';
      }
    }
    out << '\n';
  }
  out << "* more than 10% of replications dropped\n";
  return out.str();
}

}  // namespace limiam
