#pragma once
// Rasters: binary masks, planar RGB images and bbox-local patches.
// Coordinates: origin top-left, x right, y down. Boxes are half-open.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace simip {

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
    friend auto operator<=>(const Point&, const Point&) = default;
    Point operator+(Point o) const { return {x + o.x, y + o.y}; }
    Point operator-(Point o) const { return {x - o.x, y - o.y}; }
};

struct BBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // [x0,x1) x [y0,y1)

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    long area() const { return empty() ? 0 : long(width()) * height(); }
    // Integer bbox center used as the action origin.
    Point center() const { return {x0 + width() / 2, y0 + height() / 2}; }
    int max_side() const { return std::max(width(), height()); }
    bool contains(Point p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
    BBox translated(Point d) const { return {x0 + d.x, y0 + d.y, x1 + d.x, y1 + d.y}; }
    BBox intersect(const BBox& o) const {
        return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
    }
    BBox unite(const BBox& o) const {
        if (empty()) return o;
        if (o.empty()) return *this;
        return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

// Binary raster with values in {0,1}.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height);

    int width() const { return w_; }
    int height() const { return h_; }
    bool empty_extent() const { return w_ == 0 || h_ == 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < w_ && y < h_; }

    std::uint8_t at(int x, int y) const { return data_[std::size_t(y) * w_ + x]; }
    std::uint8_t& at(int x, int y) { return data_[std::size_t(y) * w_ + x]; }
    void set(int x, int y, bool v) { at(x, y) = v ? 1 : 0; }
    std::uint8_t get_or_zero(int x, int y) const { return in_bounds(x, y) ? at(x, y) : 0; }

    std::span<const std::uint8_t> row(int y) const {
        return {data_.data() + std::size_t(y) * w_, std::size_t(w_)};
    }
    std::span<std::uint8_t> row(int y) { return {data_.data() + std::size_t(y) * w_, std::size_t(w_)}; }
    std::span<const std::uint8_t> data() const { return data_; }
    std::span<std::uint8_t> data() { return data_; }

    std::size_t count() const;
    // Tight bounds of the set pixels; empty box when no pixel is set.
    BBox bounds() const;
    BBox extent() const { return {0, 0, w_, h_}; }
    bool is_binary() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    int w_ = 0;
    int h_ = 0;
    std::vector<std::uint8_t> data_;
};

// Planar 8-bit RGB image.
class Image {
public:
    Image() = default;
    Image(int width, int height, std::array<std::uint8_t, 3> fill = {0, 0, 0});

    int width() const { return w_; }
    int height() const { return h_; }
    std::uint8_t at(int c, int x, int y) const { return planes_[c][std::size_t(y) * w_ + x]; }
    std::uint8_t& at(int c, int x, int y) { return planes_[c][std::size_t(y) * w_ + x]; }
    std::array<std::uint8_t, 3> pixel(int x, int y) const {
        return {at(0, x, y), at(1, x, y), at(2, x, y)};
    }
    void set_pixel(int x, int y, std::array<std::uint8_t, 3> rgb) {
        for (int c = 0; c < 3; ++c) at(c, x, y) = rgb[c];
    }
    std::span<const std::uint8_t> row(int c, int y) const {
        return {planes_[c].data() + std::size_t(y) * w_, std::size_t(w_)};
    }
    std::span<std::uint8_t> row(int c, int y) {
        return {planes_[c].data() + std::size_t(y) * w_, std::size_t(w_)};
    }
    std::span<const std::uint8_t> plane(int c) const { return planes_[c]; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int w_ = 0;
    int h_ = 0;
    std::array<std::vector<std::uint8_t>, 3> planes_;
};

// A mask positioned in scene coordinates by its top-left origin.
struct Patch {
    Point origin;
    Mask mask;

    BBox box() const { return {origin.x, origin.y, origin.x + mask.width(), origin.y + mask.height()}; }
    BBox tight_box() const { return mask.bounds().translated(origin); }
};

// Crops to the tight bounds of set pixels, shifting origin accordingly.
Patch tighten(const Patch& p);
Mask crop(const Mask& m, const BBox& box);
Image crop(const Image& img, const BBox& box);

// Scene-sized rasterization of a patch (pixels outside the scene are dropped).
Mask to_scene(const Patch& p, int width, int height);
// Returns a patch covering `box` cut out of a scene-sized mask.
Patch from_scene(const Mask& scene, const BBox& box);

// |patch ∩ scene| over the overlapping region, SIMD kernels per row.
std::size_t count_and(const Patch& p, const Mask& scene);
// scene |= patch
void or_into(Mask& scene, const Patch& p);
// True if any set pixel of the patch lies outside [0,w)x[0,h).
bool exits_extent(const Patch& p, int width, int height);

Mask mask_or(const Mask& a, const Mask& b);
Mask mask_and(const Mask& a, const Mask& b);
Mask mask_andnot(const Mask& a, const Mask& b);
std::size_t count_and(const Mask& a, const Mask& b);
// Intersection over union; 1.0 when both are empty.
double iou(const Mask& a, const Mask& b);
bool is_subset(const Mask& a, const Mask& b);

// Square (Chebyshev) structuring element of the given radius.
Mask dilate(const Mask& m, int radius);
Mask erode(const Mask& m, int radius);

struct Component {
    BBox bbox;
    std::size_t count = 0;
    double cx = 0.0, cy = 0.0;  // centroid of pixel centers
    std::vector<Point> pixels;  // row-major order
    // Component pixel nearest the centroid (ties broken by row-major order).
    Point anchor() const;
};

// 4-connected components with at least min_size pixels, in row-major order of first pixel.
std::vector<Component> connected_components(const Mask& m, std::size_t min_size = 1);

// Rotation of a bbox-local raster about its geometric center, counter-clockwise
// on screen for positive degrees. The output grid keeps the source parity so
// that the center maps onto a pixel lattice point; `shift` is the offset of the
// output's top-left relative to the source's top-left (before any tightening).
struct RotatedGrid {
    int width = 0, height = 0;
    Point shift;
};
RotatedGrid rotated_grid(int width, int height, int degrees);
Mask rotate_nearest(const Mask& m, int degrees);
// Bilinear resampling; pixels whose source lies outside are left zero.
Image rotate_bilinear(const Image& img, int degrees);

int normalize_degrees(int degrees);  // into [0,360)
int signed_degrees(int degrees);     // into (-180,180]

// Nearest-neighbor resize to the given extent.
Mask resize_nearest(const Mask& m, int width, int height);
Image resize_nearest(const Image& img, int width, int height);

}  // namespace simip
