#pragma once

#include <vector>

namespace udalm {

/// Grayscale raster, row-major, intensities nominally in [0,1].
/// Pixel (i, j) covers the continuous square [i, i+1) × [j, j+1).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool empty() const { return pixels.empty(); }
};

/// Pixel coordinate in the continuous convention above.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

}  // namespace udalm
