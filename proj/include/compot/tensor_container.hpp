#pragma once

#include "compot/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace compot {

enum class Dtype : std::uint8_t { F16, F32, F64, U8 };

std::size_t dtype_width(Dtype d);
const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& s);

// In-memory tensor used for writing: raw little-endian payload plus shape.
struct HostTensor {
    Dtype dtype = Dtype::F32;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;

    std::int64_t element_count() const;
};

struct TensorEntry {
    Dtype dtype = Dtype::F32;
    std::vector<std::int64_t> shape;
    std::uint64_t begin = 0;  // offsets into the data region
    std::uint64_t end = 0;

    std::int64_t element_count() const;
};

// Container file layout: an 8-byte little-endian header length H, a UTF-8
// JSON header mapping tensor name -> {dtype, shape, data_offsets}, then the
// raw little-endian data region. Immutable once opened.
class TensorContainer {
  public:
    static TensorContainer read(const std::string& path);

    const std::map<std::string, TensorEntry>& entries() const { return entries_; }
    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    const TensorEntry& entry(const std::string& name) const;

    std::span<const std::uint8_t> raw(const std::string& name) const;

    // Decodes a rank-2 tensor (row-major on disk) into a dense matrix,
    // widening f16/f32 to f64 exactly. Values are not checked for finiteness.
    MatrixXd matrix(const std::string& name) const;

    // Decodes any tensor of floating dtype into a flat row-major value list.
    std::vector<double> values(const std::string& name) const;

    HostTensor host_tensor(const std::string& name) const;

  private:
    std::map<std::string, TensorEntry> entries_;
    std::vector<std::uint8_t> data_;
};

// Writes the container, assigning contiguous offsets in name order. The
// resulting bytes are a pure function of the tensor set.
void write_container(const std::string& path, const std::map<std::string, HostTensor>& tensors);

// Encoding helpers; matrices are stored row-major.
HostTensor tensor_from_matrix(const MatrixXd& m, Dtype dtype);
MatrixXd matrix_from_tensor(const HostTensor& t);

// Loads a weight, normalizing to compute orientation (rows = input width).
WeightMatrix load_weight(const TensorContainer& c, const std::string& name,
                         Orientation orientation);

// Encodes a weight back into its storage orientation as f32.
HostTensor store_weight(const WeightMatrix& w, Orientation orientation);

}  // namespace compot
