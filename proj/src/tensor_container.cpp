#include "compot/tensor_container.hpp"

#include "compot/half.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts need byte swaps");

namespace compot {

using nlohmann::json;

std::size_t dtype_width(Dtype d) {
    switch (d) {
        case Dtype::F16: return 2;
        case Dtype::F32: return 4;
        case Dtype::F64: return 8;
        case Dtype::U8: return 1;
    }
    throw IoError("unknown dtype");
}

const char* dtype_name(Dtype d) {
    switch (d) {
        case Dtype::F16: return "F16";
        case Dtype::F32: return "F32";
        case Dtype::F64: return "F64";
        case Dtype::U8: return "U8";
    }
    throw IoError("unknown dtype");
}

Dtype dtype_from_name(const std::string& s) {
    if (s == "F16") return Dtype::F16;
    if (s == "F32") return Dtype::F32;
    if (s == "F64") return Dtype::F64;
    if (s == "U8") return Dtype::U8;
    throw IoError("unknown dtype name: " + s);
}

namespace {

std::int64_t shape_elements(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d <= 0) throw IoError("non-positive dimension in tensor shape");
        if (n > std::numeric_limits<std::int64_t>::max() / d) throw IoError("tensor shape overflow");
        n *= d;
    }
    return n;
}

}  // namespace

std::int64_t HostTensor::element_count() const { return shape_elements(shape); }
std::int64_t TensorEntry::element_count() const { return shape_elements(shape); }

TensorContainer TensorContainer::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open container: " + path);
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);
    if (file_size < 8) throw IoError("truncated header: file shorter than length prefix");

    std::uint8_t len_bytes[8];
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    std::uint64_t header_len = 0;
    for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
    if (header_len > file_size - 8) throw IoError("truncated header: declared length exceeds file");

    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError("truncated header: short read");

    TensorContainer c;
    c.data_.resize(file_size - 8 - header_len);
    in.read(reinterpret_cast<char*>(c.data_.data()), static_cast<std::streamsize>(c.data_.size()));
    if (!in) throw IoError("truncated data region");

    // Count root-level keys during parsing so silently-merged duplicates
    // are detectable afterwards.
    std::size_t root_keys = 0;
    json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json&) {
        if (event == json::parse_event_t::key && depth == 1) ++root_keys;
        return true;
    };
    json j;
    try {
        j = json::parse(header, cb);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed header: ") + e.what());
    }
    if (!j.is_object()) throw IoError("malformed header: root is not an object");
    if (root_keys != j.size()) throw IoError("duplicate tensor names in header");

    std::uint64_t prev_end_check = 0;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
    for (auto& [name, spec] : j.items()) {
        if (!spec.is_object()) throw IoError("malformed header entry: " + name);
        TensorEntry e;
        try {
            e.dtype = dtype_from_name(spec.at("dtype").get<std::string>());
            e.shape = spec.at("shape").get<std::vector<std::int64_t>>();
            const auto off = spec.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (off.size() != 2) throw IoError("data_offsets must have two entries");
            e.begin = off[0];
            e.end = off[1];
        } catch (const json::exception& ex) {
            throw IoError("malformed header entry " + name + ": " + ex.what());
        }
        if (e.end <= e.begin) throw IoError("empty or inverted byte range for tensor " + name);
        if (e.end > c.data_.size()) throw IoError("tensor range out of bounds: " + name);
        const std::uint64_t expect =
            static_cast<std::uint64_t>(e.element_count()) * dtype_width(e.dtype);
        if (e.end - e.begin != expect)
            throw IoError("byte range does not match shape for tensor " + name);
        ranges.emplace_back(e.begin, e.end);
        c.entries_.emplace(name, std::move(e));
    }
    std::sort(ranges.begin(), ranges.end());
    for (const auto& [b, e] : ranges) {
        if (b < prev_end_check) throw IoError("overlapping tensor byte ranges");
        prev_end_check = e;
    }
    return c;
}

const TensorEntry& TensorContainer::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("missing tensor: " + name);
    return it->second;
}

std::span<const std::uint8_t> TensorContainer::raw(const std::string& name) const {
    const TensorEntry& e = entry(name);
    return {data_.data() + e.begin, e.end - e.begin};
}

std::vector<double> TensorContainer::values(const std::string& name) const {
    const TensorEntry& e = entry(name);
    const auto bytes = raw(name);
    const std::int64_t n = e.element_count();
    std::vector<double> out(static_cast<std::size_t>(n));
    switch (e.dtype) {
        case Dtype::F16:
            for (std::int64_t i = 0; i < n; ++i) {
                std::uint16_t b;
                std::memcpy(&b, bytes.data() + 2 * i, 2);
                out[static_cast<std::size_t>(i)] = static_cast<double>(f16_bits_to_f32(b));
            }
            break;
        case Dtype::F32:
            for (std::int64_t i = 0; i < n; ++i) {
                float v;
                std::memcpy(&v, bytes.data() + 4 * i, 4);
                out[static_cast<std::size_t>(i)] = static_cast<double>(v);
            }
            break;
        case Dtype::F64:
            for (std::int64_t i = 0; i < n; ++i) {
                double v;
                std::memcpy(&v, bytes.data() + 8 * i, 8);
                out[static_cast<std::size_t>(i)] = v;
            }
            break;
        case Dtype::U8:
            throw IoError("tensor " + name + " is not a floating tensor");
    }
    return out;
}

MatrixXd TensorContainer::matrix(const std::string& name) const {
    const TensorEntry& e = entry(name);
    if (e.shape.size() != 2) throw IoError("not a matrix: " + name);
    const auto vals = values(name);
    const std::int64_t rows = e.shape[0];
    const std::int64_t cols = e.shape[1];
    MatrixXd m(rows, cols);
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c)
            m(r, c) = vals[static_cast<std::size_t>(r * cols + c)];
    return m;
}

HostTensor TensorContainer::host_tensor(const std::string& name) const {
    const TensorEntry& e = entry(name);
    const auto bytes = raw(name);
    HostTensor t;
    t.dtype = e.dtype;
    t.shape = e.shape;
    t.bytes.assign(bytes.begin(), bytes.end());
    return t;
}

void write_container(const std::string& path, const std::map<std::string, HostTensor>& tensors) {
    json header = json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        const std::uint64_t len = static_cast<std::uint64_t>(t.element_count()) * dtype_width(t.dtype);
        if (len != t.bytes.size())
            throw IoError("tensor " + name + ": payload size does not match shape");
        header[name] = {
            {"dtype", dtype_name(t.dtype)},
            {"shape", t.shape},
            {"data_offsets", {offset, offset + len}},
        };
        offset += len;
    }
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::uint64_t header_len = head.size();
    std::uint8_t len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<std::uint8_t>((header_len >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(len_bytes), 8);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, t] : tensors) {
        out.write(reinterpret_cast<const char*>(t.bytes.data()),
                  static_cast<std::streamsize>(t.bytes.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

HostTensor tensor_from_matrix(const MatrixXd& m, Dtype dtype) {
    HostTensor t;
    t.dtype = dtype;
    t.shape = {m.rows(), m.cols()};
    const std::int64_t n = m.rows() * m.cols();
    t.bytes.resize(static_cast<std::size_t>(n) * dtype_width(dtype));
    std::size_t pos = 0;
    for (std::int64_t r = 0; r < m.rows(); ++r) {
        for (std::int64_t c = 0; c < m.cols(); ++c) {
            switch (dtype) {
                case Dtype::F16: {
                    const std::uint16_t b = f32_to_f16_bits(static_cast<float>(m(r, c)));
                    std::memcpy(t.bytes.data() + pos, &b, 2);
                    pos += 2;
                    break;
                }
                case Dtype::F32: {
                    const float v = static_cast<float>(m(r, c));
                    std::memcpy(t.bytes.data() + pos, &v, 4);
                    pos += 4;
                    break;
                }
                case Dtype::F64: {
                    const double v = m(r, c);
                    std::memcpy(t.bytes.data() + pos, &v, 8);
                    pos += 8;
                    break;
                }
                case Dtype::U8:
                    throw IoError("cannot encode a matrix as U8");
            }
        }
    }
    return t;
}

MatrixXd matrix_from_tensor(const HostTensor& t) {
    if (t.shape.size() != 2) throw IoError("not a matrix");
    MatrixXd m(t.shape[0], t.shape[1]);
    const std::int64_t cols = t.shape[1];
    for (std::int64_t r = 0; r < t.shape[0]; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r * cols + c);
            switch (t.dtype) {
                case Dtype::F16: {
                    std::uint16_t b;
                    std::memcpy(&b, t.bytes.data() + 2 * idx, 2);
                    m(r, c) = static_cast<double>(f16_bits_to_f32(b));
                    break;
                }
                case Dtype::F32: {
                    float v;
                    std::memcpy(&v, t.bytes.data() + 4 * idx, 4);
                    m(r, c) = static_cast<double>(v);
                    break;
                }
                case Dtype::F64: {
                    double v;
                    std::memcpy(&v, t.bytes.data() + 8 * idx, 8);
                    m(r, c) = v;
                    break;
                }
                case Dtype::U8:
                    throw IoError("cannot decode a U8 tensor as a matrix");
            }
        }
    }
    return m;
}

WeightMatrix load_weight(const TensorContainer& c, const std::string& name,
                         Orientation orientation) {
    const TensorEntry& e = c.entry(name);
    if (e.shape.size() != 2) throw IoError("not a matrix: " + name);
    MatrixXd m = c.matrix(name);
    if (orientation == Orientation::OutputByInput) m = m.transpose().eval();
    if (!m.allFinite()) throw NumericalError("non-finite values in weight tensor " + name);
    return WeightMatrix{name, std::move(m)};
}

HostTensor store_weight(const WeightMatrix& w, Orientation orientation) {
    if (orientation == Orientation::OutputByInput)
        return tensor_from_matrix(w.data.transpose(), Dtype::F32);
    return tensor_from_matrix(w.data, Dtype::F32);
}

}  // namespace compot
