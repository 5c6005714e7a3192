#include "collabrec/checkpoint.hpp"

#include "collabrec/rng.hpp"

#include <cstring>
#include <fstream>

namespace collabrec::io {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'B', 'R', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void append(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <class V>
void append_pod(std::string& buf, V v) {
  append(buf, &v, sizeof(v));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void read(void* out, size_t n) {
    if (pos + n > buf.size()) throw TruncatedError("checkpoint truncated");
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  template <class V>
  V read_pod() {
    V v;
    read(&v, sizeof(v));
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const TensorMap& tensors) {
  std::string buf;
  append(buf, kMagic, sizeof(kMagic));
  append_pod(buf, kVersion);
  append_pod(buf, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {  // std::map: already name-sorted
    append_pod(buf, static_cast<uint32_t>(name.size()));
    append(buf, name.data(), name.size());
    append_pod(buf, static_cast<uint8_t>(0));  // dtype f32
    append_pod(buf, static_cast<uint8_t>(t.dims.size()));
    for (uint32_t d : t.dims) append_pod(buf, d);
    if (t.data.size() != t.count())
      throw CheckpointError("tensor '" + name + "' dims/data mismatch");
    append(buf, t.data.data(), t.data.size() * sizeof(float));
  }
  uint64_t checksum = fnv1a64_bytes(buf.data(), buf.size());
  append_pod(buf, checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("write failed: " + path);
}

TensorMap load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(uint64_t))
    throw TruncatedError("checkpoint too small: " + path);
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw BadMagicError("bad magic in: " + path);

  // Structure is parsed before the checksum is verified so that truncation
  // and version mismatches surface as their own error kinds; any surviving
  // corruption is caught by the checksum afterwards.
  Reader r{buf, sizeof(kMagic)};
  const size_t payload_end = buf.size() - sizeof(uint64_t);
  auto version = r.read_pod<uint32_t>();
  if (version != kVersion)
    throw VersionError("unsupported checkpoint version " +
                       std::to_string(version));
  auto count = r.read_pod<uint32_t>();

  TensorMap tensors;
  for (uint32_t i = 0; i < count; ++i) {
    auto name_len = r.read_pod<uint32_t>();
    if (r.pos + name_len > payload_end)
      throw TruncatedError("checkpoint truncated");
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    auto dtype = r.read_pod<uint8_t>();
    if (dtype != 0)
      throw CheckpointError("unsupported dtype " + std::to_string(dtype));
    auto rank = r.read_pod<uint8_t>();
    Tensor t;
    t.dims.resize(rank);
    for (auto& d : t.dims) d = r.read_pod<uint32_t>();
    if (t.count() > payload_end / sizeof(float) ||
        r.pos + t.count() * sizeof(float) > payload_end)
      throw TruncatedError("checkpoint truncated");
    t.data.resize(t.count());
    r.read(t.data.data(), t.data.size() * sizeof(float));
    tensors.emplace(std::move(name), std::move(t));
  }
  if (r.pos != payload_end)
    throw CheckpointError("trailing bytes in checkpoint: " + path);

  uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - sizeof(uint64_t),
              sizeof(uint64_t));
  uint64_t actual = fnv1a64_bytes(buf.data(), buf.size() - sizeof(uint64_t));
  if (stored != actual)
    throw ChecksumError("checksum mismatch in: " + path);
  return tensors;
}

}  // namespace collabrec::io
