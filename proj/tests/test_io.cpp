#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wig/io.hpp"
#include "wig/tensor.hpp"

using namespace wig;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("wig_io_test_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("ntf round trip preserves bits and shape") {
    const fs::path dir = temp_dir();
    Rng rng(99);
    std::vector<double> data(3 * 4 * 5);
    for (double& v : data) v = (rng.next_double() - 0.5) * 1e3;
    const Tensor t({3, 4, 5}, data);

    write_ntf(dir / "t.ntf", t);
    const Tensor back = read_ntf(dir / "t.ntf");
    CHECK(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);

    // header text is pinned
    std::ifstream in(dir / "t.ntf", std::ios::binary);
    std::string header;
    std::getline(in, header);
    CHECK(header == "ntf v1 dtype=f64 shape=3x4x5");
}

TEST_CASE("ntf rejects malformed input") {
    const fs::path dir = temp_dir();
    atomic_write(dir / "bad1.ntf", std::string("not a tensor\n"));
    CHECK_THROWS_AS(read_ntf(dir / "bad1.ntf"), IoError);

    atomic_write(dir / "bad2.ntf", std::string("ntf v1 dtype=f64 shape=2x2\n1234"));
    CHECK_THROWS_AS(read_ntf(dir / "bad2.ntf"), IoError);

    atomic_write(dir / "bad3.ntf", std::string("ntf v1 dtype=f32 shape=2\n"));
    CHECK_THROWS_AS(read_ntf(dir / "bad3.ntf"), IoError);

    atomic_write(dir / "bad4.ntf", std::string("ntf v1 dtype=f64 shape=0x2\n"));
    CHECK_THROWS_AS(read_ntf(dir / "bad4.ntf"), IoError);

    CHECK_THROWS_AS(read_ntf(dir / "missing.ntf"), IoError);
}

TEST_CASE("pgm round trip") {
    const fs::path dir = temp_dir();
    std::vector<std::uint8_t> pixels = {0, 64, 128, 192, 255, 10};
    write_pgm(dir / "img.pgm", 3, 2, pixels);
    std::size_t w = 0, h = 0;
    const auto back = read_pgm(dir / "img.pgm", w, h);
    CHECK(w == 3);
    CHECK(h == 2);
    CHECK(back == pixels);
}

TEST_CASE("csv round trip and separator rejection") {
    const fs::path dir = temp_dir();
    std::vector<std::vector<std::string>> rows = {{"path", "label"}, {"a.ntf", "0"}, {"b.ntf", "1"}};
    write_csv(dir / "m.csv", rows);
    CHECK(read_csv(dir / "m.csv") == rows);

    CHECK_THROWS_AS(write_csv(dir / "bad.csv", {{"a,b"}}), ValueError);
}

TEST_CASE("base64 round trips doubles") {
    Rng rng(5);
    std::vector<double> values(17);
    for (double& v : values) v = rng.next_double() * 1e9 - 5e8;
    CHECK(base64_to_doubles(doubles_to_base64(values)) == values);

    CHECK_THROWS_AS(base64_decode("abc"), ValueError);   // bad length
    CHECK_THROWS_AS(base64_decode("a!=="), ValueError);  // bad character
}

TEST_CASE("format_double round trips through parsing") {
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const double v = (rng.next_double() - 0.5) * std::pow(10.0, double(rng.below(12)));
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("ntf rejects absurd shape products") {
    const fs::path dir = temp_dir();
    atomic_write(dir / "huge.ntf", std::string("ntf v1 dtype=f64 shape=4294967296x4294967296\n"));
    CHECK_THROWS_WITH_AS(read_ntf(dir / "huge.ntf"), doctest::Contains("too large"), IoError);
}
