#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dgsp/base_change.hpp"
#include "dgsp/learning.hpp"
#include "dgsp/sampling.hpp"

// File formats. All numeric CSV output uses %.17g so write -> read round
// trips are lossless; every write goes through a temp file + rename.
namespace dgsp::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out.good()) throw ParseError("write failed on " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace detail {

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

inline double parse_number(const std::string& tok, const std::string& path, std::size_t line) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || tok.empty())
    throw ParseError(path + ":" + std::to_string(line) + ": bad number '" + tok + "'");
  if (!std::isfinite(v))
    throw ParseError(path + ":" + std::to_string(line) + ": non-finite number '" + tok + "'");
  return v;
}

inline Index parse_index(const std::string& tok, const std::string& path, std::size_t line) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || tok.empty() || errno == ERANGE)
    throw ParseError(path + ":" + std::to_string(line) + ": bad integer '" + tok + "'");
  return static_cast<Index>(v);
}

inline void check_label(const std::string& label) {
  if (label.empty() || label.find(',') != std::string::npos ||
      label.find('\n') != std::string::npos)
    throw std::invalid_argument("label '" + label + "' cannot be written to CSV");
}

inline fs::path resolve(const fs::path& base, const std::string& rel) {
  fs::path p(rel);
  return p.is_absolute() ? p : base / p;
}

}  // namespace detail

// ---------------------------------------------------------------- matrices

inline void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += fmt(m(r, c));
    }
    out += '\n';
  }
  atomic_write(path, out);
}

inline Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  std::vector<std::vector<double>> rows;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto toks = detail::split_csv(lines[ln]);
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& tok : toks) row.push_back(detail::parse_number(tok, path.string(), ln + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": row has " +
                       std::to_string(row.size()) + " values, expected " +
                       std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no matrix rows");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

// ------------------------------------------------------------------- edges

inline void write_edges_csv(const fs::path& path, const EdgeList& edges) {
  std::string out = "u,v,w\n";
  for (const Edge& e : edges.edges)
    out += std::to_string(e.u) + ',' + std::to_string(e.v) + ',' + fmt(e.w) + '\n';
  atomic_write(path, out);
}

inline EdgeList read_edges_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  EdgeList list;
  bool saw_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto toks = detail::split_csv(lines[ln]);
    if (!saw_header) {
      if (toks != std::vector<std::string>{"u", "v", "w"})
        throw ParseError(path.string() + ":" + std::to_string(ln + 1) +
                         ": expected header 'u,v,w'");
      saw_header = true;
      continue;
    }
    if (toks.size() != 3)
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": expected 3 columns");
    Edge e;
    e.u = detail::parse_index(toks[0], path.string(), ln + 1);
    e.v = detail::parse_index(toks[1], path.string(), ln + 1);
    e.w = detail::parse_number(toks[2], path.string(), ln + 1);
    list.edges.push_back(e);
  }
  if (!saw_header) throw ParseError(path.string() + ": empty edge file");
  return list;
}

// ------------------------------------------------------------- coordinates

struct CoordsFile {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> coords;
};

inline void write_coords_csv(const fs::path& path, const std::vector<std::vector<double>>& coords,
                             const std::vector<std::string>* ids = nullptr) {
  if (coords.empty()) throw std::invalid_argument("write_coords_csv: no points");
  const std::size_t d = coords.front().size();
  std::string out = "id";
  for (std::size_t c = 1; c <= d; ++c) out += ",x" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < coords.size(); ++r) {
    if (coords[r].size() != d)
      throw DimensionError("write_coords_csv: inconsistent point dimensions");
    std::string id = ids ? (*ids)[r] : std::to_string(r);
    detail::check_label(id);
    out += id;
    for (double x : coords[r]) out += ',' + fmt(x);
    out += '\n';
  }
  atomic_write(path, out);
}

inline CoordsFile read_coords_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  CoordsFile file;
  std::size_t d = 0;
  bool saw_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto toks = detail::split_csv(lines[ln]);
    if (!saw_header) {
      if (toks.size() < 2 || toks[0] != "id")
        throw ParseError(path.string() + ":" + std::to_string(ln + 1) +
                         ": expected header 'id,x1,...'");
      d = toks.size() - 1;
      saw_header = true;
      continue;
    }
    if (toks.size() != d + 1)
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": expected " +
                       std::to_string(d + 1) + " columns");
    file.ids.push_back(toks[0]);
    std::vector<double> pt;
    for (std::size_t c = 1; c < toks.size(); ++c)
      pt.push_back(detail::parse_number(toks[c], path.string(), ln + 1));
    file.coords.push_back(std::move(pt));
  }
  if (file.coords.empty()) throw ParseError(path.string() + ": no coordinate rows");
  return file;
}

// ----------------------------------------------------------------- signals

struct SignalFile {
  std::shared_ptr<const VertexSet> vertex_set;
  Eigen::MatrixXd rows;  // one signal per row

  std::vector<Signal> signals() const {
    std::vector<Signal> out;
    out.reserve(static_cast<std::size_t>(rows.rows()));
    for (Index r = 0; r < rows.rows(); ++r) out.emplace_back(vertex_set, rows.row(r).transpose());
    return out;
  }
};

inline void write_signals_csv(const fs::path& path,
                              const std::shared_ptr<const VertexSet>& vertex_set,
                              const Eigen::MatrixXd& rows) {
  if (rows.cols() != vertex_set->n)
    throw DimensionError("write_signals_csv: " + std::to_string(rows.cols()) +
                         " columns for a vertex set of size " + std::to_string(vertex_set->n));
  std::string out;
  for (Index c = 0; c < vertex_set->n; ++c) {
    const std::string& label = vertex_set->labels[static_cast<std::size_t>(c)];
    detail::check_label(label);
    if (c) out += ',';
    out += label;
  }
  out += '\n';
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c) {
      if (c) out += ',';
      out += fmt(rows(r, c));
    }
    out += '\n';
  }
  atomic_write(path, out);
}

inline void write_signals_csv(const fs::path& path, const std::vector<Signal>& signals) {
  if (signals.empty()) throw std::invalid_argument("write_signals_csv: no signals");
  Eigen::MatrixXd rows(static_cast<Index>(signals.size()), signals.front().size());
  for (std::size_t r = 0; r < signals.size(); ++r) {
    if (!same_vertex_set(*signals[r].vertex_set, *signals.front().vertex_set))
      throw DimensionError("write_signals_csv: signals live on different vertex sets");
    rows.row(static_cast<Index>(r)) = signals[r].values.transpose();
  }
  write_signals_csv(path, signals.front().vertex_set, rows);
}

inline SignalFile read_signals_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto toks = detail::split_csv(lines[ln]);
    if (labels.empty()) {
      labels = toks;
      continue;
    }
    if (toks.size() != labels.size())
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": expected " +
                       std::to_string(labels.size()) + " columns");
    std::vector<double> row;
    for (const auto& tok : toks) row.push_back(detail::parse_number(tok, path.string(), ln + 1));
    rows.push_back(std::move(row));
  }
  if (labels.empty()) throw ParseError(path.string() + ": missing vertex-label header");
  if (rows.empty()) throw ParseError(path.string() + ": no signal rows");
  SignalFile file;
  file.vertex_set = VertexSet::make(static_cast<Index>(labels.size()), labels);
  file.rows.resize(static_cast<Index>(rows.size()), static_cast<Index>(labels.size()));
  for (Index r = 0; r < file.rows.rows(); ++r)
    for (Index c = 0; c < file.rows.cols(); ++c)
      file.rows(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return file;
}

// ----------------------------------------------------------------- samples

inline void write_samples_csv(const fs::path& path, const std::map<Index, double>& samples) {
  std::string out = "vertex,value\n";
  for (const auto& [v, x] : samples) out += std::to_string(v) + ',' + fmt(x) + '\n';
  atomic_write(path, out);
}

inline std::map<Index, double> read_samples_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  std::map<Index, double> samples;
  bool saw_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto toks = detail::split_csv(lines[ln]);
    if (!saw_header) {
      if (toks != std::vector<std::string>{"vertex", "value"})
        throw ParseError(path.string() + ":" + std::to_string(ln + 1) +
                         ": expected header 'vertex,value'");
      saw_header = true;
      continue;
    }
    if (toks.size() != 2)
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": expected 2 columns");
    const Index v = detail::parse_index(toks[0], path.string(), ln + 1);
    if (!samples.emplace(v, detail::parse_number(toks[1], path.string(), ln + 1)).second)
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": duplicate vertex " +
                       std::to_string(v));
  }
  if (!saw_header) throw ParseError(path.string() + ": empty samples file");
  return samples;
}

// ---------------------------------------------- spectral coefficient grids

inline void write_spectral_csv(const fs::path& path, const SpectralCoefficients& sc) {
  const Index n = sc.table.cols();
  std::string out = "fiber_param,weight";
  for (Index c = 1; c <= n; ++c) out += ",c_" + std::to_string(c);
  out += '\n';
  for (Index q = 0; q < sc.table.rows(); ++q) {
    const Fiber& fib = sc.ensemble.fiber(q);
    out += fib.param ? fmt(*fib.param) : std::to_string(q);
    out += ',' + fmt(fib.weight);
    for (Index c = 0; c < n; ++c) out += ',' + fmt(sc.table(q, c));
    out += '\n';
  }
  atomic_write(path, out);
}

struct SpectralFile {
  std::vector<double> params;
  std::vector<double> weights;
  Eigen::MatrixXd table;
};

inline SpectralFile read_spectral_csv(const fs::path& path) {
  const auto lines = detail::read_lines(path);
  SpectralFile file;
  std::vector<std::vector<double>> rows;
  std::size_t cols = 0;
  bool saw_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto toks = detail::split_csv(lines[ln]);
    if (!saw_header) {
      if (toks.size() < 3 || toks[0] != "fiber_param" || toks[1] != "weight" || toks[2] != "c_1")
        throw ParseError(path.string() + ":" + std::to_string(ln + 1) +
                         ": expected header 'fiber_param,weight,c_1,...'");
      cols = toks.size();
      saw_header = true;
      continue;
    }
    if (toks.size() != cols)
      throw ParseError(path.string() + ":" + std::to_string(ln + 1) + ": expected " +
                       std::to_string(cols) + " columns");
    file.params.push_back(detail::parse_number(toks[0], path.string(), ln + 1));
    file.weights.push_back(detail::parse_number(toks[1], path.string(), ln + 1));
    std::vector<double> row;
    for (std::size_t c = 2; c < toks.size(); ++c)
      row.push_back(detail::parse_number(toks[c], path.string(), ln + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no coefficient rows");
  file.table.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols - 2));
  for (Index r = 0; r < file.table.rows(); ++r)
    for (Index c = 0; c < file.table.cols(); ++c)
      file.table(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return file;
}

// -------------------------------------------------------------------- JSON

inline json load_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key))
    throw ParseError(ctx + ": missing key '" + key + "'");
  return j.at(key);
}

inline double get_double(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_number()) throw ParseError(ctx + ": '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline Index get_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_number_integer()) throw ParseError(ctx + ": '" + std::string(key) + "' must be an integer");
  return v.get<Index>();
}

inline std::string get_string(const json& j, const char* key, const std::string& ctx) {
  const json& v = require(j, key, ctx);
  if (!v.is_string()) throw ParseError(ctx + ": '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline std::vector<double> get_double_array(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw ParseError(ctx + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(ctx + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline void write_plan_json(const fs::path& path, const SamplingPlan& p) {
  json j;
  j["j"] = p.j;
  j["V_j"] = p.vertices;
  j["sigma_j"] = p.sigma_j;
  j["lambda_j"] = p.lambda_j;
  atomic_write(path, j.dump(2) + "\n");
}

// ------------------------------------------------------- distribution spec

inline SymOperator load_operator(const fs::path& file, bool allow_indefinite = false) {
  Eigen::MatrixXd m = read_matrix_csv(file);
  if (m.rows() != m.cols())
    throw DimensionError(file.string() + ": operator matrix is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ", expected square");
  return SymOperator(std::move(m), file.stem().string(), allow_indefinite);
}

inline DensitySpec parse_density(const json& j, const std::string& ctx) {
  const std::string kind = detail::get_string(j, "kind", ctx);
  if (kind == "uniform") return DensitySpec::uniform();
  if (kind == "truncated_gaussian")
    return DensitySpec::truncated_gaussian(detail::get_double(j, "mean", ctx),
                                           detail::get_double(j, "sigma", ctx));
  if (kind == "piecewise_constant")
    return DensitySpec::piecewise_constant(
        detail::get_double_array(detail::require(j, "breakpoints", ctx), ctx),
        detail::get_double_array(detail::require(j, "values", ctx), ctx));
  if (kind == "table")
    return DensitySpec::table(detail::get_double_array(detail::require(j, "nodes", ctx), ctx),
                              detail::get_double_array(detail::require(j, "values", ctx), ctx));
  throw ParseError(ctx + ": unknown density kind '" + kind + "'");
}

inline QuadratureRule parse_quadrature(const json& j, const std::string& ctx) {
  const std::string kind = detail::get_string(j, "kind", ctx);
  const Index Q = detail::get_int(j, "Q", ctx);
  if (kind == "uniform_midpoint") return QuadratureRule::uniform_midpoint(Q);
  if (kind == "gauss_legendre") return QuadratureRule::gauss_legendre(Q);
  throw ParseError(ctx + ": unknown quadrature kind '" + kind + "'");
}

/// Paths inside the JSON are resolved relative to the spec file's directory.
inline DistributionSpec read_distribution_spec(const fs::path& path) {
  const json j = load_json(path);
  const fs::path base = path.parent_path();
  const std::string ctx = path.string();
  const bool allow_indefinite = j.value("allow_indefinite", false);
  const std::string variant = detail::get_string(j, "variant", ctx);
  if (variant == "delta")
    return DistributionSpec::delta(
        load_operator(detail::resolve(base, detail::get_string(j, "op", ctx)), allow_indefinite));
  if (variant == "discrete") {
    const json& ops_j = detail::require(j, "ops", ctx);
    if (!ops_j.is_array() || ops_j.empty())
      throw ParseError(ctx + ": 'ops' must be a nonempty array of file names");
    std::vector<SymOperator> ops;
    for (const auto& f : ops_j) {
      if (!f.is_string()) throw ParseError(ctx + ": 'ops' must contain file names");
      ops.push_back(load_operator(detail::resolve(base, f.get<std::string>()), allow_indefinite));
    }
    const auto weights =
        detail::get_double_array(detail::require(j, "weights", ctx), ctx + ": weights");
    return DistributionSpec::discrete(std::move(ops), weights);
  }
  if (variant == "interval_family") {
    SymOperator L1 =
        load_operator(detail::resolve(base, detail::get_string(j, "L1", ctx)), allow_indefinite);
    SymOperator L2 =
        load_operator(detail::resolve(base, detail::get_string(j, "L2", ctx)), allow_indefinite);
    return DistributionSpec::interval_family(
        std::move(L1), std::move(L2), parse_density(detail::require(j, "density", ctx), ctx),
        parse_quadrature(detail::require(j, "quadrature", ctx), ctx));
  }
  throw ParseError(ctx + ": unknown variant '" + variant + "'");
}

/// Writes a discrete spec as a JSON file plus one matrix CSV per operator,
/// named <stem>_op<i>.csv next to the JSON.
inline void write_discrete_distribution(const fs::path& json_path,
                                        const std::vector<SymOperator>& ops,
                                        const std::vector<double>& weights) {
  if (ops.empty() || ops.size() != weights.size())
    throw std::invalid_argument("write_discrete_distribution: need matching ops and weights");
  const fs::path base = json_path.parent_path();
  const std::string stem = json_path.stem().string();
  json j;
  j["variant"] = "discrete";
  j["ops"] = json::array();
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string file = stem + "_op" + std::to_string(i) + ".csv";
    write_matrix_csv(base / file, ops[i].matrix());
    j["ops"].push_back(file);
  }
  j["weights"] = weights;
  atomic_write(json_path, j.dump(2) + "\n");
}

// ------------------------------------------------------------ kernel specs

struct KernelSpec {
  enum class Kind { Band, Table, Lambda, AllPass };
  Kind kind = Kind::AllPass;
  Index bottom = 0;
  Eigen::MatrixXd table;
};

inline KernelSpec read_kernel_json(const fs::path& path) {
  const json j = load_json(path);
  const std::string ctx = path.string();
  const std::string variant = detail::get_string(j, "variant", ctx);
  KernelSpec spec;
  if (variant == "band") {
    spec.kind = KernelSpec::Kind::Band;
    spec.bottom = detail::get_int(j, "bottom", ctx);
    if (spec.bottom < 0) throw ParseError(ctx + ": 'bottom' must be >= 0");
    return spec;
  }
  if (variant == "table") {
    spec.kind = KernelSpec::Kind::Table;
    spec.table =
        read_matrix_csv(detail::resolve(path.parent_path(), detail::get_string(j, "csv", ctx)));
    return spec;
  }
  if (variant == "lambda") {
    spec.kind = KernelSpec::Kind::Lambda;
    return spec;
  }
  if (variant == "allpass") {
    spec.kind = KernelSpec::Kind::AllPass;
    return spec;
  }
  throw ParseError(ctx + ": unknown kernel variant '" + variant + "'");
}

inline FilterKernel make_kernel(const KernelSpec& spec, const OperatorEnsemble& ens) {
  switch (spec.kind) {
    case KernelSpec::Kind::Band:
      return FilterKernel::from_band(BandSpec::bottom(spec.bottom));
    case KernelSpec::Kind::Table:
      return FilterKernel::from_table(spec.table);
    case KernelSpec::Kind::Lambda:
      return lambda_kernel(ens);
    case KernelSpec::Kind::AllPass:
      break;
  }
  return all_pass_kernel(ens);
}

// --------------------------------------------------------------- base maps

inline BaseMap read_basemap_json(const fs::path& path) {
  const json j = load_json(path);
  const std::string ctx = path.string();
  const std::string variant = detail::get_string(j, "variant", ctx);
  if (variant == "stretch") return BaseMap::stretch(detail::get_double(j, "eta", ctx));
  if (variant == "identity") return BaseMap::identity();
  if (variant == "coarsening")
    return BaseMap::coarsening(
        detail::get_double_array(detail::require(j, "breakpoints", ctx), ctx),
        detail::get_double_array(detail::require(j, "reps", ctx), ctx));
  if (variant == "discrete") {
    const json& m = detail::require(j, "map", ctx);
    if (!m.is_array()) throw ParseError(ctx + ": 'map' must be an array of fiber indices");
    std::vector<std::size_t> idx;
    for (const auto& x : m) {
      if (!x.is_number_integer() || x.get<long long>() < 0)
        throw ParseError(ctx + ": 'map' entries must be nonnegative integers");
      idx.push_back(x.get<std::size_t>());
    }
    return BaseMap::discrete(std::move(idx));
  }
  throw ParseError(ctx + ": unknown base map variant '" + variant + "'");
}

// --------------------------------------------------------- learning config

struct KnnFamilySpec {
  fs::path coords_file;
  Index k_min = 2;
  Index k_max = 10;
  KnnWeight weight = KnnWeight::Unit;
  double sigma = 1.0;
};

struct LearnConfig {
  std::vector<fs::path> candidate_files;
  std::optional<KnnFamilySpec> knn;
  LossSpec loss = LossSpec::highfreq(1);
  GibbsConfig gibbs;
  std::optional<MHConfig> mh;
  fs::path signals_file;
  std::optional<std::vector<double>> labels;
  bool allow_indefinite = false;
};

inline MHConfig parse_mh(const json& j, const std::string& ctx) {
  MHConfig mh;
  mh.steps = detail::get_int(j, "steps", ctx);
  if (j.contains("burn_in")) mh.burn_in = detail::get_int(j, "burn_in", ctx);
  if (j.contains("thinning")) mh.thinning = detail::get_int(j, "thinning", ctx);
  if (j.contains("seed")) mh.seed = static_cast<std::uint64_t>(detail::get_int(j, "seed", ctx));
  if (j.contains("proposal")) {
    const std::string p = detail::get_string(j, "proposal", ctx);
    if (p == "uniform_independent") {
      mh.proposal = MHConfig::Proposal::UniformIndependent;
    } else if (p == "neighbor_walk") {
      mh.proposal = MHConfig::Proposal::NeighborWalk;
      if (j.contains("width")) mh.walk_width = detail::get_int(j, "width", ctx);
    } else {
      throw ParseError(ctx + ": unknown proposal '" + p + "'");
    }
  }
  return mh;
}

inline LossSpec parse_loss(const json& j, const fs::path& base, const std::string& ctx) {
  const std::string kind = detail::get_string(j, "kind", ctx);
  if (kind == "highfreq") return LossSpec::highfreq(detail::get_int(j, "bandwidth", ctx));
  if (kind == "anomaly") {
    AnomalyDetector d;
    d.threshold = detail::get_double(j, "threshold", ctx);
    if (j.contains("bandwidth")) d.bandwidth = detail::get_int(j, "bandwidth", ctx);
    return LossSpec::anomaly(d);
  }
  if (kind == "custom")
    return LossSpec::custom(
        read_matrix_csv(detail::resolve(base, detail::get_string(j, "csv", ctx))));
  throw ParseError(ctx + ": unknown loss kind '" + kind + "'");
}

inline LearnConfig read_learn_config(const fs::path& path) {
  const json j = load_json(path);
  const fs::path base = path.parent_path();
  const std::string ctx = path.string();
  LearnConfig cfg;
  cfg.allow_indefinite = j.value("allow_indefinite", false);

  const json& cand = detail::require(j, "candidates", ctx);
  if (cand.is_array()) {
    for (const auto& f : cand) {
      if (!f.is_string()) throw ParseError(ctx + ": 'candidates' must list matrix CSV files");
      cfg.candidate_files.push_back(detail::resolve(base, f.get<std::string>()));
    }
    if (cfg.candidate_files.empty()) throw ParseError(ctx + ": 'candidates' is empty");
  } else if (cand.is_object() && cand.contains("knn")) {
    const json& k = cand.at("knn");
    KnnFamilySpec fam;
    fam.coords_file = detail::resolve(base, detail::get_string(k, "coords", ctx));
    fam.k_min = detail::get_int(k, "k_min", ctx);
    fam.k_max = detail::get_int(k, "k_max", ctx);
    if (k.contains("weight")) {
      const std::string w = detail::get_string(k, "weight", ctx);
      if (w == "unit") {
        fam.weight = KnnWeight::Unit;
      } else if (w == "gaussian") {
        fam.weight = KnnWeight::GaussianKernel;
        fam.sigma = detail::get_double(k, "sigma", ctx);
      } else {
        throw ParseError(ctx + ": unknown knn weight '" + w + "'");
      }
    }
    if (fam.k_min < 1 || fam.k_max < fam.k_min)
      throw ParseError(ctx + ": need 1 <= k_min <= k_max");
    cfg.knn = std::move(fam);
  } else {
    throw ParseError(ctx + ": 'candidates' must be a file list or {\"knn\":{...}}");
  }

  cfg.loss = parse_loss(detail::require(j, "loss", ctx), base, ctx);
  cfg.gibbs.gamma = detail::get_double(j, "gamma", ctx);
  if (j.contains("prior"))
    cfg.gibbs.prior = detail::get_double_array(j.at("prior"), ctx + ": prior");
  if (j.contains("mh")) cfg.mh = parse_mh(j.at("mh"), ctx);
  if (j.contains("signals"))
    cfg.signals_file = detail::resolve(base, detail::get_string(j, "signals", ctx));
  if (j.contains("labels"))
    cfg.labels = detail::get_double_array(j.at("labels"), ctx + ": labels");
  return cfg;
}

/// Build the candidate operator list from explicit files or a k-NN family.
inline std::vector<SymOperator> build_candidates(const LearnConfig& cfg) {
  std::vector<SymOperator> ops;
  if (cfg.knn) {
    const CoordsFile coords = read_coords_csv(cfg.knn->coords_file);
    const Index n = static_cast<Index>(coords.coords.size());
    for (Index k = cfg.knn->k_min; k <= cfg.knn->k_max; ++k) {
      const EdgeList edges = knn_graph(coords.coords, k, cfg.knn->weight, cfg.knn->sigma);
      ops.push_back(laplacian_from_edges(edges, n, "knn_k" + std::to_string(k)));
    }
  } else {
    for (const fs::path& f : cfg.candidate_files)
      ops.push_back(load_operator(f, cfg.allow_indefinite));
  }
  return ops;
}

}  // namespace dgsp::io
