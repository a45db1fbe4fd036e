#include "cmig/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "cmig/errors.hpp"

namespace cmig::ad {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint: truncated at byte " + std::to_string(pos_));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  std::vector<std::uint8_t> out = {'C', 'M', 'I', 'G'};
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  std::unordered_set<std::string> names;
  for (const auto& t : tensors) {
    if (!names.insert(t.name).second) throw ContractViolation("checkpoint: duplicate tensor name " + t.name);
    if (t.name.size() > 0xFFFF) throw ContractViolation("checkpoint: tensor name too long");
    if (t.shape.size() > 0xFF) throw ContractViolation("checkpoint: rank too large");
    if (shape_size(t.shape) != t.data.size())
      throw ContractViolation("checkpoint: tensor " + t.name + " data does not match shape " + shape_str(t.shape));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (double x : t.data) put<double>(out, x);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.string(4) != "CMIG") throw ParseError("checkpoint: bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = in.string(in.get<std::uint16_t>());
    const auto rank = in.get<std::uint8_t>();
    for (std::uint8_t r = 0; r < rank; ++r) t.shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
    t.data.resize(shape_size(t.shape));
    for (double& x : t.data) x = in.get<double>();
    tensors.push_back(std::move(t));
  }
  if (!in.done()) throw ParseError("checkpoint: trailing bytes");
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  const auto bytes = encode_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace cmig::ad
