#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace ldbn {

// Single-channel 2-D float64 plane, row-major.
struct Plane {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int64_t h, int64_t w, double fill = 0.0)
        : height(h), width(w), v(static_cast<size_t>(h * w), fill) {}

    double& at(int64_t y, int64_t x) { return v[y * width + x]; }
    double at(int64_t y, int64_t x) const { return v[y * width + x]; }
    int64_t count() const { return height * width; }
};

enum class ColorSpace { Srgb8Scaled, Lab, Luminance };

// One plane (Luminance: L*/100 in [0,1]) or three planes (Srgb8Scaled:
// R,G,B as 8-bit codes / 255; Lab: L*/100 in [0,1], then unscaled a*, b*).
struct Image {
    ColorSpace space = ColorSpace::Luminance;
    std::vector<Plane> planes;

    int64_t height() const { return planes.empty() ? 0 : planes[0].height; }
    int64_t width() const { return planes.empty() ? 0 : planes[0].width; }
};

// sRGB -> linear -> XYZ(D65) -> CIELAB. L is stored as L*/100.
Image rgb_to_lab(const Image& srgb);
Image rgb_to_luminance(const Image& srgb);
// Inverse path for color output at inference: combines a restored luminance
// plane with the a*, b* planes of the original.
Image lab_recompose(const Plane& lum, const Plane& a, const Plane& b);

// Correlation with the fixed 3x3 second-derivative kernel
// [[0,-1,0],[-1,4,-1],[0,-1,0]], zero padding, same size, no rescaling.
Plane laplacian(const Plane& lum);

// Forward differences: gx(y,x) = I(y,x+1) - I(y,x) with last column 0;
// gy analogous on rows with last row 0.
std::pair<Plane, Plane> spatial_gradient(const Plane& img);

struct BlurKernel {
    int64_t height = 0;  // odd
    int64_t width = 0;   // odd
    std::vector<double> taps;  // >= 0, sum to 1
    int64_t length = 0;        // provenance when synthesized
    double angle_deg = 0.0;

    double at(int64_t y, int64_t x) const { return taps[y * width + x]; }
};

// Anti-aliased line segment of the given length (pixels, 1..31) and angle
// (degrees), rasterized into the smallest odd-sized grid and normalized.
BlurKernel motion_kernel(int64_t length, double angle_deg);

// True convolution (kernel flipped) with reflect padding, plus i.i.d.
// Gaussian noise of std noise_sigma from a seeded generator, clamped to
// [0,1]. Reflection is edge-inclusive: index -1 maps back to 0.
Plane synthesize_blur(const Plane& sharp, const BlurKernel& k, double noise_sigma,
                      uint64_t seed);

struct PatchPair {
    Plane sharp;
    Plane blur;
};

// Aligned patches on a regular grid.
std::vector<PatchPair> extract_patches_grid(const Plane& sharp, const Plane& blur,
                                            int64_t patch, int64_t stride);
// `count` aligned patches at seeded random offsets.
std::vector<PatchPair> extract_patches_random(const Plane& sharp, const Plane& blur,
                                              int64_t patch, int64_t count,
                                              uint64_t seed);

// {flip-x, flip-y, rot90, rot270}, applied identically to both members.
// Square patches only.
std::array<PatchPair, 4> augment4(const PatchPair& p);

Plane flip_x(const Plane& p);
Plane flip_y(const Plane& p);
Plane rot90(const Plane& p);
Plane rot270(const Plane& p);

}  // namespace ldbn
