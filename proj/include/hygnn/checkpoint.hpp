#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hygnn/tensor.hpp"

namespace hygnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk layout, all integers and values little-endian:
//   "HYGN" | u32 version | records...
//   record: u32 name_len | name | u32 rank | u64 dims[rank] | f64 values[prod(dims)]
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(std::string_view name) const;
  const CheckpointRecord& at(std::string_view name) const;
  void add(std::string name, Shape shape, std::vector<double> values);
  void add_scalar(std::string name, double value) { add(std::move(name), {1}, {value}); }
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Same names, shapes and bit patterns in the same order.
bool bitwise_equal(const Checkpoint& a, const Checkpoint& b);

}  // namespace hygnn
