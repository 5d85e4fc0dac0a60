#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "wig/io.hpp"
#include "wig/model.hpp"
#include "wig/synthetic.hpp"

using namespace wig;
namespace fs = std::filesystem;

TEST_CASE("synthetic samples are deterministic per seed") {
    SyntheticConfig cfg;
    cfg.count = 20;
    cfg.seed = 7;
    const auto a = make_synthetic_dataset(cfg);
    const auto b = make_synthetic_dataset(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.data() == b[i].image.data());
        CHECK(a[i].ground_truth.data() == b[i].ground_truth.data());
        CHECK(a[i].label == b[i].label);
    }

    cfg.seed = 8;
    const auto c = make_synthetic_dataset(cfg);
    CHECK(a[0].image.data() != c[0].image.data());
}

TEST_CASE("zero noise leaves pure signal on a zero background") {
    SyntheticConfig cfg;
    cfg.count = 4;
    cfg.noise_sigma = 0.0;
    cfg.seed = 3;
    for (const auto& s : make_synthetic_dataset(cfg)) {
        const std::size_t pixels = pixel_count(s.image.shape());
        for (std::size_t p = 0; p < pixels; ++p) {
            const double expected = s.ground_truth[p] != 0.0 ? 1.0 : 0.0;
            CHECK(s.image[p] == expected);
        }
    }
}

TEST_CASE("ground truth is nonempty and matches the class pattern size") {
    SyntheticConfig cfg;
    cfg.count = 30;
    cfg.signal_shape = 4;
    cfg.seed = 5;
    for (const auto& s : make_synthetic_dataset(cfg)) {
        std::size_t on = 0;
        for (std::size_t i = 0; i < s.ground_truth.size(); ++i) on += s.ground_truth[i] != 0.0;
        if (s.label == 0) {
            CHECK(on == 16);  // solid 4x4 block
        } else {
            CHECK(on == 7);  // plus-shaped cross in a 4x4 box
        }
    }
}

TEST_CASE("a linear probe on the signal region alone separates the classes") {
    SyntheticConfig cfg;
    cfg.count = 120;
    cfg.seed = 17;
    const auto data = make_synthetic_dataset(cfg);

    // probe sees only the pixels inside the ground-truth region
    std::vector<Sample> probe_set;
    for (const auto& s : data) {
        Tensor masked({cfg.height * cfg.width});
        for (std::size_t p = 0; p < masked.size(); ++p) {
            masked[p] = s.ground_truth[p] != 0.0 ? s.image[p] : 0.0;
        }
        probe_set.push_back({masked, s.label});
    }
    const auto probe = train_model({cfg.height * cfg.width}, {LayerSpec::dense(2)}, probe_set, 20,
                                   0.1, Rng(23));
    CHECK(probe.accuracy >= 0.95);
}

TEST_CASE("written datasets follow the manifest and mask conventions") {
    const fs::path dir = fs::temp_directory_path() / "wig_synth_test";
    fs::remove_all(dir);

    SyntheticConfig cfg;
    cfg.count = 6;
    cfg.seed = 9;
    write_synthetic_dataset(dir, cfg);

    const auto rows = read_csv(dir / "manifest.csv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] == std::vector<std::string>{"path", "label"});
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const fs::path img = dir / rows[r][0];
        CHECK(fs::exists(img));
        CHECK(fs::exists(mask_path_for(img)));
        const Tensor image = read_ntf(img);
        const Tensor mask = read_ntf(mask_path_for(img));
        CHECK(image.shape() == std::vector<std::size_t>{1, 12, 12});
        CHECK(mask.shape() == std::vector<std::size_t>{12, 12});
    }

    // loadable through the dataset reader used by train
    const auto samples = load_dataset(dir / "manifest.csv");
    CHECK(samples.size() == 6);
    CHECK(samples[1].label == 1);
}
