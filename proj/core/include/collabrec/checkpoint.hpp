#pragma once

#include "collabrec/autodiff.hpp"
#include "collabrec/types.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace collabrec::io {

// Binary named-tensor container:
//   magic "CLBRCKPT" | u32 version | u32 tensor count
//   per tensor (sorted by name):
//     u32 name length | name bytes | u8 dtype (0 = f32) | u8 rank |
//     u32 dims[rank] | little-endian f32 payload
//   u64 FNV-1a checksum of everything before it
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  size_t count() const {
    size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

using TensorMap = std::map<std::string, Tensor>;

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagicError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct VersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct ChecksumError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct TruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};

void save_checkpoint(const std::string& path, const TensorMap& tensors);
TensorMap load_checkpoint(const std::string& path);

// ---- adapters between tensors and matrices / parameters ----

template <class T>
Tensor to_tensor(const MatT<T>& m) {
  Tensor t;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.data.resize(static_cast<size_t>(m.size()));
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.data[k++] = static_cast<float>(m(r, c));
  return t;
}

template <class T>
MatT<T> to_matrix(const Tensor& t) {
  if (t.dims.size() != 2)
    throw CheckpointError("tensor is not a matrix (rank " +
                          std::to_string(t.dims.size()) + ")");
  MatT<T> m(t.dims[0], t.dims[1]);
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<T>(t.data[k++]);
  return m;
}

template <class T>
void add_params(TensorMap& out, const std::vector<const ad::Param<T>*>& params) {
  for (const auto* p : params) out[p->name] = to_tensor(p->value);
}

template <class T>
void restore_params(const TensorMap& in, std::vector<ad::Param<T>*> params) {
  for (auto* p : params) {
    auto it = in.find(p->name);
    if (it == in.end())
      throw CheckpointError("missing tensor: " + p->name);
    MatT<T> m = to_matrix<T>(it->second);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw CheckpointError("shape mismatch for tensor: " + p->name);
    p->value = std::move(m);
  }
}

}  // namespace collabrec::io
