#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rav {

/// 2D grayscale frame, row-major, intensities in [0, 255].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        if (w <= 0 || h <= 0)
            throw std::invalid_argument("GrayImage: non-positive dimensions");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::uint8_t at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }

    // Replicated-edge sampling, usable anywhere including off-image.
    std::uint8_t at_clamped(int x, int y) const {
        if (x < 0) x = 0;
        if (x >= width) x = width - 1;
        if (y < 0) y = 0;
        if (y >= height) y = height - 1;
        return at(x, y);
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }

    bool operator==(const GrayImage&) const = default;
};

}  // namespace rav
