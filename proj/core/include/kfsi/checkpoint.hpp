#pragma once

#include <map>
#include <string>
#include <vector>

#include "kfsi/types.hpp"

namespace kfsi {

/// Versioned state container: plain-text header (magic "KFSI1", field names
/// with decimal-ASCII lengths) followed by little-endian 64-bit float payload.
struct Checkpoint {
  std::map<std::string, VectorX> fields;

  bool has(const std::string& name) const { return fields.count(name) > 0; }
  double scalar(const std::string& name) const;
  const VectorX& vec(const std::string& name) const;
  void set_scalar(const std::string& name, double v);

  void write(const std::string& path) const;
  static Checkpoint read(const std::string& path);
};

}  // namespace kfsi
