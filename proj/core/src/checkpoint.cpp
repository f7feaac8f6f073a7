#include "kfsi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kfsi {

namespace {

void put_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t swapped = 0;
    for (int i = 0; i < 8; ++i) swapped |= ((bits >> (8 * i)) & 0xff) << (8 * (7 - i));
    bits = swapped;
  }
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.write(buf, 8);
}

double get_le(std::istream& in, std::size_t offset) {
  char buf[8];
  if (!in.read(buf, 8))
    throw FormatError("checkpoint: truncated payload at byte offset " + std::to_string(offset));
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t swapped = 0;
    for (int i = 0; i < 8; ++i) swapped |= ((bits >> (8 * i)) & 0xff) << (8 * (7 - i));
    bits = swapped;
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

double Checkpoint::scalar(const std::string& name) const {
  const VectorX& v = vec(name);
  if (v.size() != 1) throw FormatError("checkpoint: field '" + name + "' is not a scalar");
  return v[0];
}

const VectorX& Checkpoint::vec(const std::string& name) const {
  auto it = fields.find(name);
  if (it == fields.end()) throw FormatError("checkpoint: missing field '" + name + "'");
  return it->second;
}

void Checkpoint::set_scalar(const std::string& name, double v) {
  fields[name] = VectorX::Constant(1, v);
}

void Checkpoint::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open for writing: " + path);
  out << "KFSI1\n";
  out << "fields " << fields.size() << "\n";
  for (const auto& [name, data] : fields) out << name << " " << data.size() << "\n";
  out << "payload\n";
  for (const auto& [name, data] : fields)
    for (Eigen::Index i = 0; i < data.size(); ++i) put_le(out, data[i]);
  if (!out) throw FormatError("checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "KFSI1")
    throw FormatError("checkpoint: bad magic at offset 0 (expected KFSI1)");
  if (!std::getline(in, line) || line.rfind("fields ", 0) != 0)
    throw FormatError("checkpoint: missing field count header");
  std::size_t count = 0;
  try {
    count = std::stoul(line.substr(7));
  } catch (const std::exception&) {
    throw FormatError("checkpoint: malformed field count '" + line + "'");
  }
  std::vector<std::pair<std::string, std::size_t>> layout;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line))
      throw FormatError("checkpoint: truncated header at field " + std::to_string(i));
    std::istringstream ls(line);
    std::string name;
    std::size_t len = 0;
    if (!(ls >> name >> len))
      throw FormatError("checkpoint: malformed field descriptor '" + line + "'");
    layout.emplace_back(name, len);
  }
  if (!std::getline(in, line) || line != "payload")
    throw FormatError("checkpoint: missing payload marker");

  Checkpoint cp;
  std::size_t offset = static_cast<std::size_t>(in.tellg());
  for (const auto& [name, len] : layout) {
    VectorX v(len);
    for (std::size_t i = 0; i < len; ++i, offset += 8) v[i] = get_le(in, offset);
    cp.fields[name] = std::move(v);
  }
  return cp;
}

}  // namespace kfsi
