#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xmrt/core_math.hpp"
#include "xmrt/errors.hpp"

namespace xmrt {

// On-disk layout, all integers little-endian:
//   "XMRT" | u16 version | u8 rank | rank x u64 dims | f64 payload (row-major) | u32 CRC32(payload)
inline constexpr char kTensorMagic[4] = {'X', 'M', 'R', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;

enum class TensorErrc { io, bad_magic, bad_version, bad_rank, dims_mismatch, length, crc_mismatch, non_finite };

std::string to_string(TensorErrc code);

class TensorFileError : public IoError {
public:
    TensorFileError(TensorErrc code, const std::string& what) : IoError(what), code_(code) {}
    TensorErrc code() const noexcept { return code_; }

private:
    TensorErrc code_;
};

struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<double> values;

    static Tensor from_matrix(const DenseMatrix& m);
    static Tensor from_vector(std::span<const double> v);
    DenseMatrix to_matrix() const;  // rank 2 only
};

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
void save_tensor(const std::filesystem::path& path, const DenseMatrix& matrix);
Tensor load_tensor(const std::filesystem::path& path);
DenseMatrix load_matrix(const std::filesystem::path& path);

}  // namespace xmrt
