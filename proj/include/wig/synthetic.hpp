#ifndef WIG_SYNTHETIC_HPP
#define WIG_SYNTHETIC_HPP

#include <filesystem>
#include <vector>

#include "wig/tensor.hpp"

namespace wig {

/// Synthetic image with a known signal region. The class pattern (solid
/// block for class 0, plus-shaped cross for class 1) is what determines the
/// label, so the ground truth mask is exact by construction.
struct SyntheticSample {
    Tensor image;
    std::size_t label = 0;
    Tensor ground_truth;  // H×W, 1.0 on signal pixels
};

struct SyntheticConfig {
    std::size_t count = 200;
    std::size_t height = 12;
    std::size_t width = 12;
    std::size_t channels = 1;
    std::size_t signal_shape = 4;  // side of the pattern's bounding box
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

SyntheticSample make_synthetic_sample(const SyntheticConfig& cfg, std::size_t index);
std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticConfig& cfg);

/// Writes img_NNNNN.ntf, img_NNNNN.mask.ntf and manifest.csv (path,label)
/// under out_dir. Deterministic per seed.
void write_synthetic_dataset(const std::filesystem::path& out_dir, const SyntheticConfig& cfg);

// Conventional mask path for an image file: img.ntf -> img.mask.ntf
std::filesystem::path mask_path_for(const std::filesystem::path& image_path);

}  // namespace wig

#endif
