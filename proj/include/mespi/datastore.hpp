#pragma once

#include <map>
#include <nlohmann/json_fwd.hpp>

#include "mespi/core.hpp"

namespace mespi {

struct CorruptStoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedVersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One named array in a store. dtype is "f32" (32-bit reals), "c64"
// (interleaved re/im 32-bit floats) or "i32". Blobs are little-endian,
// row-major.
struct ArrayData {
  std::string dtype;
  std::vector<int64_t> shape;
  std::vector<float> f32;    // f32 payload, or interleaved c64 payload
  std::vector<int32_t> i32;  // i32 payload

  int64_t elements() const;

  static ArrayData real(std::vector<int64_t> shape, const std::vector<double> &v);
  static ArrayData complex(std::vector<int64_t> shape, const std::vector<cplx> &v);
  static ArrayData ints(std::vector<int64_t> shape, const std::vector<int> &v);
  std::vector<double> as_real() const;
  std::vector<cplx> as_complex() const;
  std::vector<int> as_ints() const;
};

struct Provenance {
  uint64_t seed = 0;
  std::string config_hash;
  std::string tool_version = "mespi 0.1.0";
  std::string timestamp;  // informational only, excluded from checksums
};

using Store = std::map<std::string, ArrayData>;

// Directory with manifest.json plus one raw blob per array.
void save_store(const std::string &dir, const Store &store, const Provenance &prov,
                const nlohmann::json *meta = nullptr);
Store load_store(const std::string &dir, Provenance *prov = nullptr,
                 nlohmann::json *meta = nullptr);

// Fetch with a clear error naming the absent array.
const ArrayData &require(const Store &store, const std::string &name);

}  // namespace mespi
