#include "wig/synthetic.hpp"

#include <cstdio>

#include "wig/error.hpp"
#include "wig/io.hpp"
#include "wig/parallel.hpp"

namespace wig {

void SyntheticConfig::validate() const {
    if (count < 1) throw ValueError("count must be positive");
    if (channels < 1) throw ValueError("channels must be positive");
    if (signal_shape < 2) throw ValueError("signal_shape must be at least 2");
    if (height < signal_shape || width < signal_shape) {
        throw ValueError("image smaller than signal pattern");
    }
    if (noise_sigma < 0.0) throw ValueError("noise_sigma must be non-negative");
}

SyntheticSample make_synthetic_sample(const SyntheticConfig& cfg, std::size_t index) {
    cfg.validate();
    Rng rng = Rng(cfg.seed).derive(index);

    SyntheticSample sample;
    sample.label = index % 2;

    const std::size_t s = cfg.signal_shape;
    const std::size_t y0 = rng.below(cfg.height - s + 1);
    const std::size_t x0 = rng.below(cfg.width - s + 1);

    Tensor image({cfg.channels, cfg.height, cfg.width});
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = cfg.noise_sigma * rng.next_normal();

    Tensor mask({cfg.height, cfg.width});
    const double amplitude = 1.0;
    auto put = [&](std::size_t y, std::size_t x) {
        mask[y * cfg.width + x] = 1.0;
        for (std::size_t c = 0; c < cfg.channels; ++c) {
            image[(c * cfg.height + y) * cfg.width + x] += amplitude;
        }
    };
    if (sample.label == 0) {
        for (std::size_t dy = 0; dy < s; ++dy) {
            for (std::size_t dx = 0; dx < s; ++dx) put(y0 + dy, x0 + dx);
        }
    } else {
        // Plus-shaped cross through the middle of the bounding box.
        const std::size_t cy = y0 + s / 2;
        const std::size_t cx = x0 + s / 2;
        for (std::size_t dx = 0; dx < s; ++dx) put(cy, x0 + dx);
        for (std::size_t dy = 0; dy < s; ++dy) {
            if (y0 + dy != cy) put(y0 + dy, cx);
        }
    }

    image.check_finite("synthetic image");
    sample.image = std::move(image);
    sample.ground_truth = std::move(mask);
    return sample;
}

std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    std::vector<SyntheticSample> samples(cfg.count);
    detail::parallel_for(cfg.count,
                         [&](std::size_t i) { samples[i] = make_synthetic_sample(cfg, i); });
    return samples;
}

std::filesystem::path mask_path_for(const std::filesystem::path& image_path) {
    std::filesystem::path p = image_path;
    p.replace_extension(".mask.ntf");
    return p;
}

void write_synthetic_dataset(const std::filesystem::path& out_dir, const SyntheticConfig& cfg) {
    const auto samples = make_synthetic_dataset(cfg);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<std::vector<std::string>> manifest;
    manifest.push_back({"path", "label"});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05zu.ntf", i);
        write_ntf(out_dir / name, samples[i].image);
        write_ntf(mask_path_for(out_dir / name), samples[i].ground_truth);
        manifest.push_back({name, std::to_string(samples[i].label)});
    }
    write_csv(out_dir / "manifest.csv", manifest);
}

}  // namespace wig
