#ifndef TRUSTNET_IO_HPP
#define TRUSTNET_IO_HPP

#include <Eigen/Dense>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustnet/dynamics.hpp"
#include "trustnet/format.hpp"
#include "trustnet/graph.hpp"
#include "trustnet/identify.hpp"

namespace trustnet {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Sparse text form of the trust blocks: header "n n_s", then one "i j w"
/// line per nonzero of the concatenated [B D]. Row i is normal-local
/// (agent n_s + i); column j is the global agent id, so j < n_s addresses
/// B and j >= n_s addresses D column j - n_s. Weights print as shortest
/// round-tripping decimals, which makes dumps byte-stable and lossless.
inline std::string serialize_trust_system(const TrustSystem& sys) {
  const int nr = sys.n_normal();
  std::string out = format_long(sys.n) + " " + format_long(sys.n_stubborn) + "\n";
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < sys.n_stubborn; ++j)
      if (sys.B(i, j) != 0.0)
        out += format_long(i) + " " + format_long(j) + " " + format_double(sys.B(i, j)) + "\n";
    for (int j = 0; j < nr; ++j)
      if (sys.D(i, j) != 0.0)
        out += format_long(i) + " " + format_long(sys.n_stubborn + j) + " " +
               format_double(sys.D(i, j)) + "\n";
  }
  return out;
}

/// Inverse of serialize_trust_system. No stochasticity check here: the same
/// format carries solver estimates, whose rows are only simplex to roundoff.
inline TrustSystem parse_trust_system(const std::string& text) {
  std::istringstream in(text);
  TrustSystem sys;
  if (!(in >> sys.n >> sys.n_stubborn)) throw std::runtime_error("trust system parse: bad header");
  if (sys.n_stubborn <= 0 || sys.n_stubborn >= sys.n)
    throw std::runtime_error("trust system parse: invalid agent counts");
  const int nr = sys.n_normal();
  sys.B = Eigen::MatrixXd::Zero(nr, sys.n_stubborn);
  sys.D = Eigen::MatrixXd::Zero(nr, nr);
  long i = 0, j = 0;
  double w = 0.0;
  while (in >> i >> j >> w) {
    if (i < 0 || i >= nr || j < 0 || j >= sys.n)
      throw std::runtime_error("trust system parse: index out of range");
    if (j < sys.n_stubborn)
      sys.B(i, j) = w;
    else
      sys.D(i, j - sys.n_stubborn) = w;
  }
  if (!in.eof()) throw std::runtime_error("trust system parse: malformed entry line");
  return sys;
}

/// Graphs reuse the trust format with unit weights; normal-normal edges
/// appear in both orientations.
inline std::string serialize_graph(const SocialGraph& g) {
  TrustSystem sys;
  sys.n = g.n;
  sys.n_stubborn = g.n_stubborn;
  const int nr = g.n_normal();
  sys.B = Eigen::MatrixXd::Zero(nr, g.n_stubborn);
  sys.D = Eigen::MatrixXd::Zero(nr, nr);
  for (auto [i, s] : g.support_B) sys.B(i - g.n_stubborn, s) = 1.0;
  for (auto [u, v] : g.edges_normal) {
    sys.D(u - g.n_stubborn, v - g.n_stubborn) = 1.0;
    sys.D(v - g.n_stubborn, u - g.n_stubborn) = 1.0;
  }
  return serialize_trust_system(sys);
}

inline SocialGraph parse_graph(const std::string& text) {
  const TrustSystem sys = parse_trust_system(text);
  SocialGraph g;
  g.n = sys.n;
  g.n_stubborn = sys.n_stubborn;
  const int nr = sys.n_normal();
  for (int i = 0; i < nr; ++i) {
    for (int s = 0; s < sys.n_stubborn; ++s)
      if (sys.B(i, s) != 0.0) g.support_B.emplace_back(sys.n_stubborn + i, s);
    for (int j = i + 1; j < nr; ++j)
      if (sys.D(i, j) != 0.0 || sys.D(j, i) != 0.0)
        g.edges_normal.emplace_back(sys.n_stubborn + i, sys.n_stubborn + j);
  }
  return g;
}

/// CSV with one row per agent; columns ordered sample-major then belief
/// component, labels derived from the sampling times.
inline std::string snapshot_csv(const SnapshotSet& snaps) {
  if (snaps.y.empty()) throw std::invalid_argument("snapshot_csv: empty snapshot set");
  const Eigen::Index n = snaps.y.front().rows();
  const Eigen::Index m = snaps.y.front().cols();
  std::string out = "agent";
  for (std::size_t k = 0; k < snaps.times.size(); ++k)
    for (Eigen::Index c = 0; c < m; ++c) {
      out += ",t" + format_long(snaps.times[k]);
      if (m > 1) out += "_c" + format_long(c);
    }
  out += "\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out += format_long(i);
    for (const auto& y : snaps.y)
      for (Eigen::Index c = 0; c < m; ++c) out += "," + format_double(y(i, c));
    out += "\n";
  }
  return out;
}

/// CSV of one data block; columns ordered issue-major then belief component.
inline std::string matrix_csv(const Eigen::MatrixXd& M, int issues, int m) {
  if (issues * m != static_cast<int>(M.cols()))
    throw std::invalid_argument("matrix_csv: column count is not issues * m");
  std::string out = "agent";
  for (int k = 0; k < issues; ++k)
    for (int c = 0; c < m; ++c) {
      out += ",i" + format_long(k);
      if (m > 1) out += "_c" + format_long(c);
    }
  out += "\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out += format_long(i);
    for (Eigen::Index j = 0; j < M.cols(); ++j) out += "," + format_double(M(i, j));
    out += "\n";
  }
  return out;
}

/// Inverse of the agent-rowed CSVs above: drops the header line and the
/// leading label column, returns the numeric block.
inline Eigen::MatrixXd parse_matrix_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("matrix csv parse: empty input");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = line.find(',');
    if (pos == std::string::npos) throw std::runtime_error("matrix csv parse: row without values");
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string field = line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                                               : next - pos - 1);
      if (field.empty()) throw std::runtime_error("matrix csv parse: empty field");
      row.push_back(parse_double(field));
      pos = next;
    }
    if (!rows.empty() && rows.front().size() != row.size())
      throw std::runtime_error("matrix csv parse: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("matrix csv parse: no data rows");
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

/// Solver diagnostics as a key-value block.
inline std::string estimate_diagnostics(const SSIEstimate& est) {
  std::string out;
  out += "status = " + std::string(est.status == SolveStatus::ok ? "ok" : "infeasible_epsilon") + "\n";
  out += "residual = " + format_double(est.residual) + "\n";
  out += "l1_offdiag = " + format_double(est.l1_offdiag) + "\n";
  out += "penalty = " + format_double(est.penalty) + "\n";
  out += "rows_at_iteration_cap = " + format_long(est.rows_at_iteration_cap) + "\n";
  std::string iters;
  for (std::size_t i = 0; i < est.iterations.size(); ++i) {
    if (i) iters += " ";
    iters += format_long(est.iterations[i]);
  }
  out += "iterations = " + iters + "\n";
  std::string flagged;
  for (std::size_t i = 0; i < est.flagged_rows.size(); ++i) {
    if (i) flagged += " ";
    flagged += format_long(est.flagged_rows[i]);
  }
  out += "flagged_rows = " + flagged + "\n";
  return out;
}

/// Flat config: one "key = value" per line, '#' starts a comment.
inline std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + format_long(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + format_long(lineno) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

inline double config_double(const std::map<std::string, std::string>& kv, const std::string& key,
                            double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return parse_double(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config value for " + key + " is not a number");
  }
}

inline long config_long(const std::map<std::string, std::string>& kv, const std::string& key,
                        long fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t pos = 0;
  const long v = std::stol(it->second, &pos);
  if (pos != it->second.size()) throw std::runtime_error("config value for " + key + " is not an integer");
  return v;
}

inline std::string config_string(const std::map<std::string, std::string>& kv, const std::string& key,
                                 const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

} // namespace trustnet

#endif
