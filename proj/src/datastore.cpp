#include "mespi/datastore.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

namespace mespi {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

uint32_t checksum(const void *data, size_t bytes) {
  return static_cast<uint32_t>(
      crc32(0L, static_cast<const Bytef *>(data), static_cast<uInt>(bytes)));
}

void write_file(const fs::path &path, const void *data, size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("datastore: cannot write " + path.string());
  out.write(static_cast<const char *>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw std::runtime_error("datastore: short write to " + path.string());
}

std::vector<char> read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw CorruptStoreError("datastore: missing blob " + path.string());
  const std::streamsize bytes = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<size_t>(bytes));
  in.read(buf.data(), bytes);
  if (!in) throw CorruptStoreError("datastore: short read from " + path.string());
  return buf;
}

}  // namespace

int64_t ArrayData::elements() const {
  int64_t n = 1;
  for (int64_t s : shape) n *= s;
  return n;
}

ArrayData ArrayData::real(std::vector<int64_t> shape, const std::vector<double> &v) {
  ArrayData a;
  a.dtype = "f32";
  a.shape = std::move(shape);
  a.f32.reserve(v.size());
  for (double x : v) a.f32.push_back(static_cast<float>(x));
  if (a.elements() != static_cast<int64_t>(v.size()))
    throw std::invalid_argument("ArrayData: shape/size mismatch");
  return a;
}

ArrayData ArrayData::complex(std::vector<int64_t> shape, const std::vector<cplx> &v) {
  ArrayData a;
  a.dtype = "c64";
  a.shape = std::move(shape);
  a.f32.reserve(2 * v.size());
  for (const cplx &x : v) {
    a.f32.push_back(static_cast<float>(x.real()));
    a.f32.push_back(static_cast<float>(x.imag()));
  }
  if (a.elements() != static_cast<int64_t>(v.size()))
    throw std::invalid_argument("ArrayData: shape/size mismatch");
  return a;
}

ArrayData ArrayData::ints(std::vector<int64_t> shape, const std::vector<int> &v) {
  ArrayData a;
  a.dtype = "i32";
  a.shape = std::move(shape);
  a.i32.assign(v.begin(), v.end());
  if (a.elements() != static_cast<int64_t>(v.size()))
    throw std::invalid_argument("ArrayData: shape/size mismatch");
  return a;
}

std::vector<double> ArrayData::as_real() const {
  if (dtype != "f32") throw std::invalid_argument("ArrayData: not a real array");
  return std::vector<double>(f32.begin(), f32.end());
}

std::vector<cplx> ArrayData::as_complex() const {
  if (dtype != "c64") throw std::invalid_argument("ArrayData: not a complex array");
  std::vector<cplx> v(f32.size() / 2);
  for (size_t i = 0; i < v.size(); ++i) v[i] = cplx(f32[2 * i], f32[2 * i + 1]);
  return v;
}

std::vector<int> ArrayData::as_ints() const {
  if (dtype != "i32") throw std::invalid_argument("ArrayData: not an int array");
  return std::vector<int>(i32.begin(), i32.end());
}

void save_store(const std::string &dir, const Store &store, const Provenance &prov,
                const json *meta) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  json entries = json::object();
  for (const auto &[name, arr] : store) {
    const void *data;
    size_t bytes;
    if (arr.dtype == "i32") {
      data = arr.i32.data();
      bytes = arr.i32.size() * sizeof(int32_t);
    } else {
      data = arr.f32.data();
      bytes = arr.f32.size() * sizeof(float);
    }
    const std::string file = name + ".bin";
    write_file(fs::path(dir) / file, data, bytes);
    entries[name] = {{"dtype", arr.dtype},
                     {"shape", arr.shape},
                     {"file", file},
                     {"size_bytes", bytes},
                     {"crc32", checksum(data, bytes)}};
  }
  manifest["entries"] = entries;
  manifest["provenance"] = {{"seed", prov.seed},
                            {"config_hash", prov.config_hash},
                            {"tool_version", prov.tool_version},
                            {"timestamp", prov.timestamp}};
  if (meta) manifest["meta"] = *meta;
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("datastore: cannot write manifest in " + dir);
}

Store load_store(const std::string &dir, Provenance *prov, json *meta) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw CorruptStoreError("datastore: missing manifest in " + dir);
  json manifest;
  in >> manifest;
  const int version = manifest.at("format_version").get<int>();
  if (version != kFormatVersion)
    throw UnsupportedVersionError("datastore: unsupported format version " +
                                  std::to_string(version));
  Store store;
  for (const auto &[name, entry] : manifest.at("entries").items()) {
    ArrayData arr;
    arr.dtype = entry.at("dtype").get<std::string>();
    if (arr.dtype != "f32" && arr.dtype != "c64" && arr.dtype != "i32")
      throw CorruptStoreError("datastore: unknown dtype '" + arr.dtype + "' for " + name);
    arr.shape = entry.at("shape").get<std::vector<int64_t>>();
    for (int64_t s : arr.shape)
      if (s <= 0) throw CorruptStoreError("datastore: non-positive shape for " + name);
    const auto blob = read_file(fs::path(dir) / entry.at("file").get<std::string>());
    if (blob.size() != entry.at("size_bytes").get<size_t>())
      throw CorruptStoreError("datastore: blob size mismatch for " + name);
    if (checksum(blob.data(), blob.size()) != entry.at("crc32").get<uint32_t>())
      throw CorruptStoreError("datastore: checksum mismatch for " + name);
    if (arr.dtype == "i32") {
      arr.i32.resize(blob.size() / sizeof(int32_t));
      std::memcpy(arr.i32.data(), blob.data(), blob.size());
    } else {
      arr.f32.resize(blob.size() / sizeof(float));
      std::memcpy(arr.f32.data(), blob.data(), blob.size());
    }
    const int64_t expect = arr.elements() * (arr.dtype == "c64" ? 2 : 1);
    const int64_t got = (arr.dtype == "i32") ? static_cast<int64_t>(arr.i32.size())
                                             : static_cast<int64_t>(arr.f32.size());
    if (expect != got) throw CorruptStoreError("datastore: shape/payload mismatch for " + name);
    store.emplace(name, std::move(arr));
  }
  if (prov) {
    const json &p = manifest.at("provenance");
    prov->seed = p.value("seed", 0ULL);
    prov->config_hash = p.value("config_hash", "");
    prov->tool_version = p.value("tool_version", "");
    prov->timestamp = p.value("timestamp", "");
  }
  if (meta && manifest.contains("meta")) *meta = manifest["meta"];
  return store;
}

const ArrayData &require(const Store &store, const std::string &name) {
  auto it = store.find(name);
  if (it == store.end())
    throw std::runtime_error("datastore: required array '" + name + "' is absent");
  return it->second;
}

}  // namespace mespi
