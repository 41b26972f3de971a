#include "hygnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace hygnn {

const CheckpointRecord* Checkpoint::find(std::string_view name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

const CheckpointRecord& Checkpoint::at(std::string_view name) const {
  if (const auto* r = find(name)) return *r;
  throw CheckpointError("checkpoint has no record '" + std::string(name) + "'");
}

void Checkpoint::add(std::string name, Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw CheckpointError("record '" + name + "' shape does not match its values");
  }
  records.push_back({std::move(name), std::move(shape), std::move(values)});
}

namespace {

constexpr char kMagic[4] = {'H', 'Y', 'G', 'N'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, ckpt.version);
  for (const auto& r : ckpt.records) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) put_le<std::uint64_t>(out, d);
    for (double v : r.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  Reader in(bytes.subspan(4));
  Checkpoint ckpt;
  ckpt.version = in.get_le<std::uint32_t>();
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  while (!in.done()) {
    CheckpointRecord r;
    r.name = in.get_string(in.get_le<std::uint32_t>());
    const auto rank = in.get_le<std::uint32_t>();
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      r.shape.push_back(in.get_le<std::uint64_t>());
      count *= r.shape.back();
    }
    if (count > bytes.size() / 8) throw CheckpointError("record '" + r.name + "' larger than file");
    r.values.resize(count);
    for (auto& v : r.values) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
    ckpt.records.push_back(std::move(r));
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
  if (a.version != b.version || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.name != y.name || x.shape != y.shape || x.values.size() != y.values.size()) return false;
    if (!x.values.empty() &&
        std::memcmp(x.values.data(), y.values.data(), x.values.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace hygnn
