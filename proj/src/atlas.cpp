#include "eegx/atlas.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "eegx/util.hpp"

namespace eegx {

namespace {

// Scaled coordinates span [0, pi] across the unit-disk diameter.
constexpr real kHalfSpan = std::numbers::pi_v<real> / real(2);

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cols;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cols.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cols.push_back(cur);
  return cols;
}

real parse_coord(const std::string& s, std::size_t lineno, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return static_cast<real>(v);
  } catch (const std::exception&) {
    throw std::runtime_error("atlas parse error at line " +
                             std::to_string(lineno) + ": bad " + what + " '" +
                             s + "'");
  }
}

}  // namespace

Atlas Atlas::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("atlas: cannot open " + path);
  std::vector<ElectrodePosition> positions;
  std::string line;
  std::size_t lineno = 0;
  bool header_done = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cols = split_csv_row(t);
    if (!header_done) {
      header_done = true;
      if (lower(trim(cols[0])) == "name") continue;  // header row
    }
    if (cols.size() != 3)
      throw std::runtime_error("atlas parse error at line " +
                               std::to_string(lineno) +
                               ": expected name,u,v");
    ElectrodePosition p;
    p.name = trim(cols[0]);
    if (p.name.empty())
      throw std::runtime_error("atlas parse error at line " +
                               std::to_string(lineno) + ": empty name");
    p.u = parse_coord(trim(cols[1]), lineno, "u");
    p.v = parse_coord(trim(cols[2]), lineno, "v");
    positions.push_back(std::move(p));
  }
  if (positions.empty())
    throw std::runtime_error("atlas: no positions in " + path);
  return from_positions(std::move(positions));
}

Atlas Atlas::from_positions(std::vector<ElectrodePosition> positions) {
  Atlas a;
  std::unordered_set<std::string> seen;
  for (auto& p : positions) {
    const std::string key = lower(p.name);
    if (!seen.insert(key).second)
      throw std::runtime_error("atlas: duplicate electrode name '" + p.name +
                               "'");
    a.keys_.push_back(key);
  }
  a.positions_ = std::move(positions);
  a.coordinate_scale_ = kHalfSpan;
  return a;
}

std::string Atlas::bundled_path() {
  return std::string(EEGX_DATA_DIR) + "/scalp_mesh.csv";
}

Atlas Atlas::bundled() { return load(bundled_path()); }

bool Atlas::contains(const std::string& name) const {
  const std::string key = lower(name);
  for (const auto& k : keys_)
    if (k == key) return true;
  return false;
}

const ElectrodePosition& Atlas::lookup(const std::string& name) const {
  const std::string key = lower(name);
  for (std::size_t i = 0; i < keys_.size(); ++i)
    if (keys_[i] == key) return positions_[i];
  throw std::runtime_error("atlas: unknown electrode '" + name + "'");
}

const ElectrodePosition& Atlas::nearest(real u, real v) const {
  if (positions_.empty()) throw std::runtime_error("atlas: empty");
  std::size_t best = 0;
  real best_d2 = std::numeric_limits<real>::infinity();
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const real du = positions_[i].u - u;
    const real dv = positions_[i].v - v;
    const real d2 = du * du + dv * dv;
    if (d2 < best_d2 ||
        (d2 == best_d2 && positions_[i].name < positions_[best].name)) {
      best = i;
      best_d2 = d2;
    }
  }
  return positions_[best];
}

const ElectrodePosition& Atlas::resolve(const std::string& name) const {
  const std::string key = lower(name);
  for (std::size_t i = 0; i < keys_.size(); ++i)
    if (keys_[i] == key) return positions_[i];
  throw std::runtime_error("atlas: cannot resolve electrode '" + name +
                           "'; unknown name (use coordinates with nearest())");
}

std::vector<real> location_encoding(real scaled_u, real scaled_v, int d_e) {
  if (d_e <= 0 || d_e % 4 != 0)
    throw std::invalid_argument(
        "location_encoding: embedding dimension must be divisible by 4, got " +
        std::to_string(d_e));
  std::vector<real> p(static_cast<std::size_t>(d_e));
  for (int k = 0; k < d_e / 4; ++k) {
    const real w =
        std::pow(real(1000), real(-4) * static_cast<real>(k) / static_cast<real>(d_e));
    p[static_cast<std::size_t>(4 * k + 0)] = std::sin(scaled_u * w);
    p[static_cast<std::size_t>(4 * k + 1)] = std::cos(scaled_u * w);
    p[static_cast<std::size_t>(4 * k + 2)] = std::sin(scaled_v * w);
    p[static_cast<std::size_t>(4 * k + 3)] = std::cos(scaled_v * w);
  }
  return p;
}

}  // namespace eegx
