#include "xmrt/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <zlib.h>

namespace xmrt {

std::string to_string(TensorErrc code) {
    switch (code) {
        case TensorErrc::io: return "io";
        case TensorErrc::bad_magic: return "bad_magic";
        case TensorErrc::bad_version: return "bad_version";
        case TensorErrc::bad_rank: return "bad_rank";
        case TensorErrc::dims_mismatch: return "dims_mismatch";
        case TensorErrc::length: return "length";
        case TensorErrc::crc_mismatch: return "crc_mismatch";
        case TensorErrc::non_finite: return "non_finite";
    }
    return "unknown";
}

Tensor Tensor::from_matrix(const DenseMatrix& m) {
    return {{m.rows(), m.cols()}, {m.values().begin(), m.values().end()}};
}

Tensor Tensor::from_vector(std::span<const double> v) { return {{v.size()}, {v.begin(), v.end()}}; }

DenseMatrix Tensor::to_matrix() const {
    if (dims.size() != 2) {
        throw TensorFileError(TensorErrc::dims_mismatch, "expected a rank-2 tensor, got rank " + std::to_string(dims.size()));
    }
    return DenseMatrix(dims[0], dims[1], values);
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(static_cast<U>(bytes[offset + b]) << (8 * b));
    return std::bit_cast<T>(bits);
}

std::uint32_t crc_of(std::span<const std::uint8_t> payload) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t offset = 0;
    while (offset < payload.size()) {
        const std::size_t chunk = std::min<std::size_t>(payload.size() - offset, 1u << 30);
        crc = crc32(crc, payload.data() + offset, static_cast<uInt>(chunk));
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::size_t element_count(std::span<const std::size_t> dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d != 0 && n > std::numeric_limits<std::size_t>::max() / 8 / d) {
            throw TensorFileError(TensorErrc::dims_mismatch, "tensor dimensions overflow");
        }
        n *= d;
    }
    return n;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
    if (tensor.dims.empty() || tensor.dims.size() > 255) {
        throw TensorFileError(TensorErrc::bad_rank, "tensor rank must lie in [1, 255]");
    }
    if (element_count(tensor.dims) != tensor.values.size()) {
        throw TensorFileError(TensorErrc::dims_mismatch, "tensor dims do not match the value count");
    }
    for (double v : tensor.values) {
        if (!std::isfinite(v)) throw TensorFileError(TensorErrc::non_finite, "refusing to save a non-finite value");
    }
    std::vector<std::uint8_t> out;
    out.reserve(7 + 8 * tensor.dims.size() + 8 * tensor.values.size() + 4);
    out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
    put_le<std::uint16_t>(out, kTensorVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
    for (std::size_t d : tensor.dims) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    const std::size_t payload_start = out.size();
    for (double v : tensor.values) put_le<double>(out, v);
    const std::uint32_t crc = crc_of(std::span<const std::uint8_t>(out).subspan(payload_start));
    put_le<std::uint32_t>(out, crc);
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kFixedHeader = 7;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
        if (bytes.size() < 4) throw TensorFileError(TensorErrc::length, "file too short for a tensor header");
        throw TensorFileError(TensorErrc::bad_magic, "missing XMRT magic bytes");
    }
    if (bytes.size() < kFixedHeader) throw TensorFileError(TensorErrc::length, "truncated tensor header");
    const auto version = get_le<std::uint16_t>(bytes, 4);
    if (version != kTensorVersion) {
        throw TensorFileError(TensorErrc::bad_version, "unsupported tensor version " + std::to_string(version));
    }
    const std::size_t rank = bytes[6];
    if (rank == 0) throw TensorFileError(TensorErrc::bad_rank, "tensor rank is zero");
    const std::size_t header = kFixedHeader + 8 * rank;
    if (bytes.size() < header) throw TensorFileError(TensorErrc::length, "truncated tensor dims");
    Tensor t;
    for (std::size_t r = 0; r < rank; ++r) {
        const auto d = get_le<std::uint64_t>(bytes, kFixedHeader + 8 * r);
        if (d > std::numeric_limits<std::size_t>::max()) throw TensorFileError(TensorErrc::dims_mismatch, "dimension too large");
        t.dims.push_back(static_cast<std::size_t>(d));
    }
    const std::size_t count = element_count(t.dims);
    const std::size_t expected = header + 8 * count + 4;
    if (bytes.size() != expected) {
        throw TensorFileError(TensorErrc::length, "tensor file holds " + std::to_string(bytes.size()) + " bytes, dims imply " +
                                                      std::to_string(expected));
    }
    const auto payload = bytes.subspan(header, 8 * count);
    const auto stored = get_le<std::uint32_t>(bytes, header + 8 * count);
    if (crc_of(payload) != stored) throw TensorFileError(TensorErrc::crc_mismatch, "tensor payload CRC mismatch");
    t.values.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        t.values[k] = get_le<double>(payload, 8 * k);
        if (!std::isfinite(t.values[k])) throw TensorFileError(TensorErrc::non_finite, "tensor holds a non-finite value");
    }
    return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    const auto bytes = encode_tensor(tensor);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorFileError(TensorErrc::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw TensorFileError(TensorErrc::io, "short write to " + path.string());
}

void save_tensor(const std::filesystem::path& path, const DenseMatrix& matrix) {
    save_tensor(path, Tensor::from_matrix(matrix));
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorFileError(TensorErrc::io, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_tensor(bytes);
    } catch (const TensorFileError& e) {
        throw TensorFileError(e.code(), path.string() + ": " + e.what());
    }
}

DenseMatrix load_matrix(const std::filesystem::path& path) {
    const Tensor t = load_tensor(path);
    if (t.dims.size() != 2) {
        throw TensorFileError(TensorErrc::dims_mismatch, path.string() + ": expected a rank-2 tensor, got rank " +
                                                             std::to_string(t.dims.size()));
    }
    return DenseMatrix(t.dims[0], t.dims[1], t.values);
}

}  // namespace xmrt
