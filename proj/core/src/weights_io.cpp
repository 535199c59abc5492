// HSCW1 weight files.
//
//   "HSCW1"
//   repeated, ordered by parameter id:
//     u32 id length, id bytes
//     u8  dtype tag (1 = float64)
//     u32 rank, rank x u64 extents
//     float64 values
//
// All integers and floats are little-endian.

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "histocam/errors.hpp"
#include "histocam/network.hpp"

namespace histocam::network {
namespace {

constexpr char kMagic[] = {'H', 'S', 'C', 'W', '1'};
constexpr std::uint8_t kDtypeFloat64 = 1;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits = static_cast<U>(bits >> 8);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(bits);
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("weight file truncated while reading ") + what + " at byte " + std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Model::save_weights(const std::filesystem::path& path) const {
  std::vector<const Parameter*> ordered;
  for (const auto& p : parameters_) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  std::string out(kMagic, sizeof(kMagic));
  for (const auto* p : ordered) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->id.size()));
    out += p->id;
    out.push_back(static_cast<char>(kDtypeFloat64));
    const auto& shape = p->value.shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto extent : shape) put_le<std::uint64_t>(out, extent);
    for (double v : p->value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing " + path.string());
}

void Model::load_weights(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open weight file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  Reader in(bytes);
  if (in.get_bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError(path.string() + " is not an HSCW1 weight file");
  }

  std::map<std::string, std::pair<ag::Shape, std::vector<double>>> records;
  while (!in.at_end()) {
    const auto id_len = in.get<std::uint32_t>("id length");
    std::string id = in.get_bytes(id_len, "id");
    const auto dtype = in.get<std::uint8_t>("dtype tag");
    if (dtype != kDtypeFloat64) {
      throw FormatError("record '" + id + "' has unsupported dtype tag " + std::to_string(dtype));
    }
    const auto rank = in.get<std::uint32_t>("rank");
    ag::Shape shape(rank);
    for (auto& extent : shape) extent = static_cast<std::size_t>(in.get<std::uint64_t>("extent"));
    const std::size_t count = ag::shape_numel(shape);
    if (count > in.remaining() / sizeof(double)) {
      throw FormatError("weight file truncated inside the values of '" + id + "'");
    }
    std::vector<double> values(count);
    for (auto& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>("values"));
    records[id] = {std::move(shape), std::move(values)};
  }

  for (const auto& p : parameters_) {
    auto it = records.find(p.id);
    if (it == records.end()) throw FormatError("weight file has no record for '" + p.id + "'");
    if (it->second.first != p.value.shape()) {
      throw FormatError("layer '" + p.id + "': file shape " + ag::shape_to_string(it->second.first) +
                        " does not match model shape " + ag::shape_to_string(p.value.shape()));
    }
  }
  if (records.size() != parameters_.size()) {
    for (const auto& [id, rec] : records) {
      const bool known = std::any_of(parameters_.begin(), parameters_.end(), [&](const auto& p) { return p.id == id; });
      if (!known) throw FormatError("weight file has unexpected record '" + id + "'");
    }
  }

  for (auto& p : parameters_) {
    const auto& src = records[p.id].second;
    auto dst = p.value.mutable_values();
    std::copy(src.begin(), src.end(), dst.begin());
    p.value.zero_grad();
  }
}

}  // namespace histocam::network
