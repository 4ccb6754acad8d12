#pragma once

// Universal electrode-location mapping: electrode names from the 10-20/10-10
// and extended 5% systems resolve to 2-D scalp coordinates on a flat-disk
// head projection, with nearest-point snapping for sensors the mesh does not
// name. The bundled mesh (data/scalp_mesh.csv) holds 348 positions inside
// the unit disk.

#include <optional>
#include <string>
#include <vector>

#include "eegx/tensor.hpp"

namespace eegx {

struct ElectrodePosition {
  std::string name;  // canonical label, matched case-insensitively
  real u{0};         // horizontal coordinate, unit-disk normalized
  real v{0};         // vertical coordinate (positive = front)
};

class Atlas {
 public:
  // Parses the atlas CSV (header "name,u,v"). Rejects duplicate names and
  // malformed rows (reported with their line number).
  static Atlas load(const std::string& path);
  static Atlas from_positions(std::vector<ElectrodePosition> positions);

  // Bundled 348-point mesh shipped with the repository.
  static Atlas bundled();
  static std::string bundled_path();

  std::size_t size() const { return positions_.size(); }
  const std::vector<ElectrodePosition>& positions() const { return positions_; }

  // Case-insensitive exact match; throws when the name is unknown.
  const ElectrodePosition& lookup(const std::string& name) const;
  bool contains(const std::string& name) const;

  // Position minimizing Euclidean distance to (u,v); ties break toward the
  // lexicographically smallest name. Throws on an empty atlas.
  const ElectrodePosition& nearest(real u, real v) const;

  // lookup falling back to nearest() against the position of `name` in
  // `reference`; used to resolve montages named in a different system.
  const ElectrodePosition& resolve(const std::string& name) const;

  // Maps unit-disk coordinates into [0, coordinate_scale()*2]: the input
  // range of the sinusoidal location encoding. The half-span keeps every
  // frequency component of the encoding inside its monotone half-period
  // over the head diameter, so nearby electrodes get similar embeddings;
  // scaled coordinates stay well inside [0, 1000).
  real coordinate_scale() const { return coordinate_scale_; }
  real scaled_u(const ElectrodePosition& p) const {
    return (p.u + real(1)) * coordinate_scale_;
  }
  real scaled_v(const ElectrodePosition& p) const {
    return (p.v + real(1)) * coordinate_scale_;
  }

 private:
  std::vector<ElectrodePosition> positions_;
  std::vector<std::string> keys_;  // lowercase names, parallel to positions_
  real coordinate_scale_{0};
};

// Sinusoidal location embedding of scaled coordinates (U, V); d_e must be
// divisible by 4. Entry layout per frequency k: sin(U w_k), cos(U w_k),
// sin(V w_k), cos(V w_k) with w_k = 1000^(-4k/d_e).
std::vector<real> location_encoding(real scaled_u, real scaled_v, int d_e);

}  // namespace eegx
