#ifndef WIG_IO_HPP
#define WIG_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wig/tensor.hpp"

namespace wig {

// NTF v1: one ASCII header line "ntf v1 dtype=f64 shape=<d1>x<d2>x..."
// followed by raw little-endian 64-bit floats in row-major order.
void write_ntf(const std::filesystem::path& path, const Tensor& t);
Tensor read_ntf(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ntf(const Tensor& t);
Tensor decode_ntf(const std::vector<std::uint8_t>& bytes);

// 8-bit binary PGM (P5).
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::size_t& width,
                                   std::size_t& height);

// Minimal CSV: no quoting, cells must not contain commas or newlines.
void write_csv(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& rows);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

// Write via temp file + rename so readers never observe partial output.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
void atomic_write(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string doubles_to_base64(const std::vector<double>& values);
std::vector<double> base64_to_doubles(const std::string& text);

// Fixed shortest-round-trip text form used in every CSV we emit.
std::string format_double(double v);

}  // namespace wig

#endif
