#include "wig/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wig/error.hpp"

namespace wig {

namespace {

void pack_f64_le(double v, std::uint8_t* out) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

double unpack_f64_le(const std::uint8_t* in) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::vector<std::uint8_t> encode_ntf(const Tensor& t) {
    std::string header = "ntf v1 dtype=f64 shape=" + shape_to_string(t.shape()) + "\n";
    std::vector<std::uint8_t> out(header.size() + 8 * t.size());
    std::memcpy(out.data(), header.data(), header.size());
    std::uint8_t* p = out.data() + header.size();
    for (std::size_t i = 0; i < t.size(); ++i, p += 8) pack_f64_le(t[i], p);
    return out;
}

Tensor decode_ntf(const std::vector<std::uint8_t>& bytes) {
    auto nl = std::find(bytes.begin(), bytes.end(), static_cast<std::uint8_t>('\n'));
    if (nl == bytes.end()) throw IoError("ntf: missing header line");
    std::string header(bytes.begin(), nl);
    std::istringstream hs(header);
    std::string magic, version, dtype, shape_field;
    hs >> magic >> version >> dtype >> shape_field;
    if (magic != "ntf" || version != "v1") throw IoError("ntf: bad magic '" + header + "'");
    if (dtype != "dtype=f64") throw IoError("ntf: unsupported dtype in '" + header + "'");
    if (shape_field.rfind("shape=", 0) != 0) throw IoError("ntf: missing shape in '" + header + "'");

    std::vector<std::size_t> shape;
    const std::string dims = shape_field.substr(6);
    std::size_t pos = 0;
    std::size_t total = 1;
    constexpr std::size_t kMaxElements = std::size_t{1} << 33;
    while (pos < dims.size()) {
        std::size_t next = dims.find('x', pos);
        if (next == std::string::npos) next = dims.size();
        const std::string tok = dims.substr(pos, next - pos);
        std::size_t dim = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), dim);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || dim == 0) {
            throw IoError("ntf: bad shape token '" + tok + "'");
        }
        if (dim > kMaxElements / total) throw IoError("ntf: shape too large");
        total *= dim;
        shape.push_back(dim);
        pos = next + 1;
    }
    if (shape.empty()) throw IoError("ntf: empty shape");

    const std::size_t count = shape_product(shape);
    const std::size_t payload_at = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    if (bytes.size() - payload_at != 8 * count) {
        throw IoError("ntf: payload is " + std::to_string(bytes.size() - payload_at) +
                      " bytes, expected " + std::to_string(8 * count));
    }
    std::vector<double> data(count);
    const std::uint8_t* p = bytes.data() + payload_at;
    for (std::size_t i = 0; i < count; ++i, p += 8) data[i] = unpack_f64_le(p);
    return Tensor(std::move(shape), std::move(data));
}

void write_ntf(const std::filesystem::path& path, const Tensor& t) {
    atomic_write(path, encode_ntf(t));
}

Tensor read_ntf(const std::filesystem::path& path) {
    try {
        return decode_ntf(read_file_bytes(path));
    } catch (const ValueError& e) {
        throw IoError(path.string() + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != width * height) throw ValueError("pgm: pixel count mismatch");
    std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.size() + pixels.size());
    std::memcpy(out.data(), header.data(), header.size());
    std::memcpy(out.data() + header.size(), pixels.data(), pixels.size());
    atomic_write(path, out);
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, std::size_t& width,
                                   std::size_t& height) {
    const auto bytes = read_file_bytes(path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string magic;
    std::size_t maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (!in || magic != "P5" || maxval != 255) throw IoError(path.string() + ": not an 8-bit P5 PGM");
    in.get();  // single whitespace after maxval
    const std::size_t offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() - offset != width * height) {
        throw IoError(path.string() + ": pgm payload size mismatch");
    }
    return std::vector<std::uint8_t>(bytes.begin() + offset, bytes.end());
}

void write_csv(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i].find_first_of(",\n") != std::string::npos) {
                throw ValueError("csv cell contains separator: '" + row[i] + "'");
            }
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    atomic_write(path, out);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::size_t pos = 0;
        for (;;) {
            std::size_t next = line.find(',', pos);
            if (next == std::string::npos) {
                row.push_back(line.substr(pos));
                break;
            }
            row.push_back(line.substr(pos, next - pos));
            pos = next + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void atomic_write(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(contents.data()),
                  static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename to " + path.string() + " failed: " + ec.message());
}

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    atomic_write(path, std::vector<std::uint8_t>(contents.begin(), contents.end()));
}

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += kB64Alphabet[v & 63];
    }
    if (i + 1 == len) {
        const std::uint32_t v = data[i] << 16;
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == len) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    static const auto lut = [] {
        std::array<int, 256> t;
        t.fill(-1);
        for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kB64Alphabet[i])] = i;
        return t;
    }();
    if (text.size() % 4 != 0) throw ValueError("base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw ValueError("base64: bad padding");
                vals[j] = 0;
                ++pad;
            } else {
                vals[j] = lut[static_cast<unsigned char>(c)];
                if (vals[j] < 0 || pad > 0) throw ValueError("base64: bad character");
            }
        }
        const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

std::string doubles_to_base64(const std::vector<double>& values) {
    std::vector<std::uint8_t> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) pack_f64_le(values[i], bytes.data() + 8 * i);
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> base64_to_doubles(const std::string& text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 8 != 0) throw ValueError("base64 payload is not a multiple of 8 bytes");
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = unpack_f64_le(bytes.data() + 8 * i);
    return values;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ValueError("format_double failed");
    return std::string(buf, ptr);
}

}  // namespace wig
