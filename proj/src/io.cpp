#include "patopa/io.hpp"

#include "patopa/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>
#include <vector>

namespace patopa {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

long parse_long(std::string_view field, std::size_t line) {
  long v = 0;
  const auto* last = field.data() + field.size();
  const auto res = std::from_chars(field.data(), last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError("line " + std::to_string(line) + ": bad integer '" + std::string(field) +
                     "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Feeder parse_feeder(const std::string& json_text) {
  try {
    const json doc = json::parse(json_text);
    const long base = doc.value("index_base", 0L);
    if (base != 0 && base != 1) throw ParseError("index_base must be 0 or 1");
    const long n_bus = doc.at("n_bus").get<long>();
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ParseError("edges must be [from, to] pairs");
      edges.push_back({e[0].get<Index>() - base, e[1].get<Index>() - base});
    }
    const auto g = doc.at("g").get<std::vector<double>>();
    const auto b = doc.at("b").get<std::vector<double>>();
    if (g.size() != edges.size() || b.size() != edges.size()) {
      throw ParseError("g and b must have one entry per edge");
    }
    // Keep parameters attached to their edge through canonicalization.
    Feeder feeder;
    feeder.topology = GridTopology::from_edges(n_bus, edges);
    feeder.params = LineParams::zeros(feeder.topology.n_edges());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      feeder.params.g(static_cast<Index>(i)) = g[i];
      feeder.params.b(static_cast<Index>(i)) = b[i];
    }
    return feeder;
  } catch (const json::exception& e) {
    throw ParseError(std::string("feeder JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("feeder JSON: ") + e.what());
  }
}

Feeder load_feeder(const std::filesystem::path& path) { return parse_feeder(read_file(path)); }

void save_feeder(const std::filesystem::path& path, const Feeder& feeder) {
  json doc;
  doc["n_bus"] = feeder.topology.n_bus();
  json edges = json::array();
  for (const Edge& e : feeder.topology.edges()) edges.push_back({e.from, e.to});
  doc["edges"] = edges;
  doc["g"] = std::vector<double>(feeder.params.g.begin(), feeder.params.g.end());
  doc["b"] = std::vector<double>(feeder.params.b.begin(), feeder.params.b.end());
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
}

void write_measurements_csv(const std::filesystem::path& path, const MeasurementSet& ms) {
  ms.validate();
  auto out = open_for_write(path);
  out << "t,bus,v,theta,p,q\n";
  for (Index t = 0; t < ms.samples(); ++t) {
    for (Index i = 0; i < ms.buses(); ++i) {
      out << t << ',' << i << ',' << format_double(ms.V(t, i)) << ','
          << format_double(ms.Theta(t, i)) << ',' << format_double(ms.P(t, i)) << ','
          << format_double(ms.Q(t, i)) << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

MeasurementSet read_measurements_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,bus,v,theta,p,q") {
    throw ParseError(path.string() + ": expected header t,bus,v,theta,p,q");
  }
  struct Row {
    long t, bus;
    double v, theta, p, q;
  };
  std::vector<Row> rows;
  long max_t = -1;
  long max_bus = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto f = split(body);
    if (f.size() != 6) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                       std::to_string(f.size()));
    }
    Row r{parse_long(trim(f[0]), line_no), parse_long(trim(f[1]), line_no),
          parse_double(trim(f[2]), line_no), parse_double(trim(f[3]), line_no),
          parse_double(trim(f[4]), line_no), parse_double(trim(f[5]), line_no)};
    if (r.t < 0 || r.bus < 0) {
      throw ParseError("line " + std::to_string(line_no) + ": negative index");
    }
    max_t = std::max(max_t, r.t);
    max_bus = std::max(max_bus, r.bus);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");
  const Index samples = max_t + 1;
  const Index buses = max_bus + 1;
  if (static_cast<Index>(rows.size()) != samples * buses) {
    throw ParseError(path.string() + ": expected " + std::to_string(samples * buses) +
                     " rows for " + std::to_string(samples) + " steps x " +
                     std::to_string(buses) + " buses, got " + std::to_string(rows.size()));
  }
  MeasurementSet ms;
  ms.V = Eigen::MatrixXd::Constant(samples, buses, std::numeric_limits<double>::quiet_NaN());
  ms.Theta.resize(samples, buses);
  ms.P.resize(samples, buses);
  ms.Q.resize(samples, buses);
  for (const Row& r : rows) {
    if (!std::isnan(ms.V(r.t, r.bus))) {
      throw ParseError(path.string() + ": duplicate row for t=" + std::to_string(r.t) +
                       " bus=" + std::to_string(r.bus));
    }
    ms.V(r.t, r.bus) = r.v;
    ms.Theta(r.t, r.bus) = r.theta;
    ms.P(r.t, r.bus) = r.p;
    ms.Q(r.t, r.bus) = r.q;
  }
  try {
    ms.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ms;
}

void write_features_csv(const std::filesystem::path& path, const FeatureSystem& fs) {
  auto out = open_for_write(path);
  out << "row,col,x,w\n";
  const bool weighted = fs.W.size() > 0;
  for (Index r = 0; r < fs.rows(); ++r) {
    for (Index c = 0; c < fs.unknowns(); ++c) {
      if (fs.X(r, c) == 0.0) continue;
      out << r << ',' << c << ',' << format_double(fs.X(r, c)) << ','
          << (weighted ? format_double(fs.W(r, c)) : std::string("1")) << '\n';
    }
    out << r << ',' << fs.unknowns() << ',' << format_double(fs.y(r)) << ','
        << (weighted ? format_double(fs.W(r, fs.unknowns())) : std::string("1")) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const EstimationResult& result) {
  auto out = open_for_write(path);
  out << "iteration,log_likelihood,condition_number\n";
  for (std::size_t k = 0; k < result.ll_trace.size(); ++k) {
    out << k + 1 << ',' << format_double(result.ll_trace[k]) << ',';
    if (k < result.cond_trace.size()) out << format_double(result.cond_trace[k]);
    out << '\n';
  }
}

}  // namespace patopa
