#include "simip/raster.hpp"

#include <cmath>
#include <numbers>
#include <limits>

#include "simip/errors.hpp"
#include "simip/kernels.hpp"

namespace simip {

Mask::Mask(int width, int height) : w_(width), h_(height) {
    if (width < 0 || height < 0) throw Error(ErrorKind::InvalidArgument, "negative mask extent");
    data_.assign(std::size_t(width) * std::size_t(height), 0);
}

std::size_t Mask::count() const { return kernels::count_nonzero(data_); }

BBox Mask::bounds() const {
    BBox b{w_, h_, 0, 0};
    for (int y = 0; y < h_; ++y) {
        auto r = row(y);
        int first = -1, last = -1;
        for (int x = 0; x < w_; ++x) {
            if (r[x]) {
                if (first < 0) first = x;
                last = x;
            }
        }
        if (first < 0) continue;
        b.x0 = std::min(b.x0, first);
        b.x1 = std::max(b.x1, last + 1);
        b.y0 = std::min(b.y0, y);
        b.y1 = y + 1;
    }
    if (b.x1 <= b.x0) return {};
    return b;
}

bool Mask::is_binary() const {
    return std::all_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v <= 1; });
}

Image::Image(int width, int height, std::array<std::uint8_t, 3> fill) : w_(width), h_(height) {
    if (width < 0 || height < 0) throw Error(ErrorKind::InvalidArgument, "negative image extent");
    for (int c = 0; c < 3; ++c) planes_[c].assign(std::size_t(width) * std::size_t(height), fill[c]);
}

Patch tighten(const Patch& p) {
    BBox b = p.mask.bounds();
    if (b.empty()) return {p.origin, Mask()};
    return {p.origin + Point{b.x0, b.y0}, crop(p.mask, b)};
}

Mask crop(const Mask& m, const BBox& box) {
    Mask out(box.width(), box.height());
    for (int y = 0; y < box.height(); ++y)
        for (int x = 0; x < box.width(); ++x) out.at(x, y) = m.get_or_zero(box.x0 + x, box.y0 + y);
    return out;
}

Image crop(const Image& img, const BBox& box) {
    Image out(box.width(), box.height());
    for (int y = 0; y < box.height(); ++y)
        for (int x = 0; x < box.width(); ++x) {
            int sx = box.x0 + x, sy = box.y0 + y;
            if (sx < 0 || sy < 0 || sx >= img.width() || sy >= img.height()) continue;
            out.set_pixel(x, y, img.pixel(sx, sy));
        }
    return out;
}

Mask to_scene(const Patch& p, int width, int height) {
    Mask out(width, height);
    or_into(out, p);
    return out;
}

Patch from_scene(const Mask& scene, const BBox& box) { return {{box.x0, box.y0}, crop(scene, box)}; }

namespace {

// Row-aligned overlap between a patch and a scene-sized raster.
struct Overlap {
    int x0, x1, y0, y1;  // scene coords
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

Overlap overlap(const Patch& p, int width, int height) {
    return {std::max(0, p.origin.x), std::min(width, p.origin.x + p.mask.width()),
            std::max(0, p.origin.y), std::min(height, p.origin.y + p.mask.height())};
}

}  // namespace

std::size_t count_and(const Patch& p, const Mask& scene) {
    Overlap o = overlap(p, scene.width(), scene.height());
    if (o.empty()) return 0;
    const auto& k = kernels::active();
    std::size_t n = std::size_t(o.x1 - o.x0);
    std::size_t c = 0;
    for (int y = o.y0; y < o.y1; ++y) {
        const std::uint8_t* a = p.mask.row(y - p.origin.y).data() + (o.x0 - p.origin.x);
        const std::uint8_t* b = scene.row(y).data() + o.x0;
        c += k.count_and(a, b, n);
    }
    return c;
}

void or_into(Mask& scene, const Patch& p) {
    Overlap o = overlap(p, scene.width(), scene.height());
    if (o.empty()) return;
    const auto& k = kernels::active();
    std::size_t n = std::size_t(o.x1 - o.x0);
    for (int y = o.y0; y < o.y1; ++y) {
        const std::uint8_t* src = p.mask.row(y - p.origin.y).data() + (o.x0 - p.origin.x);
        k.or_into(scene.row(y).data() + o.x0, src, n);
    }
}

bool exits_extent(const Patch& p, int width, int height) {
    BBox b = p.box();
    if (b.x0 >= 0 && b.y0 >= 0 && b.x1 <= width && b.y1 <= height) return false;
    BBox t = p.tight_box();
    if (t.empty()) return false;
    return t.x0 < 0 || t.y0 < 0 || t.x1 > width || t.y1 > height;
}

namespace {

void require_same_extent(const Mask& a, const Mask& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw Error(ErrorKind::InvalidArgument, "mask extents differ");
}

}  // namespace

Mask mask_or(const Mask& a, const Mask& b) {
    require_same_extent(a, b);
    Mask out = a;
    kernels::or_into(out.data(), b.data());
    return out;
}

Mask mask_and(const Mask& a, const Mask& b) {
    require_same_extent(a, b);
    Mask out = a;
    kernels::and_into(out.data(), b.data());
    return out;
}

Mask mask_andnot(const Mask& a, const Mask& b) {
    require_same_extent(a, b);
    Mask out = a;
    kernels::andnot_into(out.data(), b.data());
    return out;
}

std::size_t count_and(const Mask& a, const Mask& b) {
    require_same_extent(a, b);
    return kernels::count_and(a.data(), b.data());
}

double iou(const Mask& a, const Mask& b) {
    std::size_t inter = count_and(a, b);
    std::size_t uni = a.count() + b.count() - inter;
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

bool is_subset(const Mask& a, const Mask& b) { return count_and(a, b) == a.count(); }

namespace {

// Separable running max/min over a (2r+1) window, `dilate_op` selects max.
Mask morph(const Mask& m, int radius, bool dilate_op) {
    if (radius <= 0) return m;
    const int w = m.width(), h = m.height();
    const std::uint8_t outside = dilate_op ? 0 : 1;  // erosion treats the border as set
    Mask tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = dilate_op ? 0 : 1;
            for (int d = -radius; d <= radius; ++d) {
                int xx = x + d;
                std::uint8_t s = (xx < 0 || xx >= w) ? outside : m.at(xx, y);
                v = dilate_op ? (v | s) : (v & s);
            }
            tmp.at(x, y) = v;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = dilate_op ? 0 : 1;
            for (int d = -radius; d <= radius; ++d) {
                int yy = y + d;
                std::uint8_t s = (yy < 0 || yy >= h) ? outside : tmp.at(x, yy);
                v = dilate_op ? (v | s) : (v & s);
            }
            out.at(x, y) = v;
        }
    }
    return out;
}

}  // namespace

Mask dilate(const Mask& m, int radius) { return morph(m, radius, true); }
Mask erode(const Mask& m, int radius) { return morph(m, radius, false); }

Point Component::anchor() const {
    Point best = pixels.front();
    double bd = std::numeric_limits<double>::infinity();
    for (const Point& p : pixels) {
        double dx = p.x + 0.5 - cx, dy = p.y + 0.5 - cy;
        double d = dx * dx + dy * dy;
        if (d < bd - 1e-12) {
            bd = d;
            best = p;
        }
    }
    return best;
}

std::vector<Component> connected_components(const Mask& m, std::size_t min_size) {
    const int w = m.width(), h = m.height();
    std::vector<int> label(std::size_t(w) * h, -1);
    std::vector<Component> out;
    std::vector<Point> stack;
    int next = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m.at(x, y) || label[std::size_t(y) * w + x] >= 0) continue;
            Component c;
            c.bbox = {x, y, x + 1, y + 1};
            stack.clear();
            stack.push_back({x, y});
            label[std::size_t(y) * w + x] = next;
            while (!stack.empty()) {
                Point p = stack.back();
                stack.pop_back();
                c.pixels.push_back(p);
                const Point nb[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
                for (Point q : nb) {
                    if (!m.in_bounds(q.x, q.y) || !m.at(q.x, q.y)) continue;
                    int& l = label[std::size_t(q.y) * w + q.x];
                    if (l >= 0) continue;
                    l = next;
                    stack.push_back(q);
                }
            }
            ++next;
            if (c.pixels.size() < min_size) continue;
            std::sort(c.pixels.begin(), c.pixels.end(),
                      [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
            double sx = 0, sy = 0;
            for (Point p : c.pixels) {
                sx += p.x + 0.5;
                sy += p.y + 0.5;
                c.bbox = c.bbox.unite({p.x, p.y, p.x + 1, p.y + 1});
            }
            c.count = c.pixels.size();
            c.cx = sx / double(c.count);
            c.cy = sy / double(c.count);
            out.push_back(std::move(c));
        }
    }
    return out;
}

int normalize_degrees(int degrees) {
    int d = degrees % 360;
    return d < 0 ? d + 360 : d;
}

int signed_degrees(int degrees) {
    int d = normalize_degrees(degrees);
    return d > 180 ? d - 360 : d;
}

namespace {

struct Trig {
    double c, s;
};

// Exact values on the quarter turns so that 90-degree rotations permute pixels.
Trig trig(int degrees) {
    switch (normalize_degrees(degrees)) {
        case 0: return {1.0, 0.0};
        case 90: return {0.0, 1.0};
        case 180: return {-1.0, 0.0};
        case 270: return {0.0, -1.0};
        default: break;
    }
    double r = normalize_degrees(degrees) * std::numbers::pi / 180.0;
    return {std::cos(r), std::sin(r)};
}

int parity_ceil(double extent, int parity_of) {
    int v = int(std::ceil(extent - 1e-9));
    if ((v - parity_of) % 2 != 0) ++v;
    return v;
}

// Source coordinates (continuous) of output pixel (u,v)'s center.
struct Sampler {
    Trig t;
    double ow2, oh2, sw2, sh2;
    void source(int u, int v, double& sx, double& sy) const {
        double px = u + 0.5 - ow2, py = v + 0.5 - oh2;
        // inverse of the forward map p' = [[c, s], [-s, c]] p
        sx = t.c * px - t.s * py + sw2;
        sy = t.s * px + t.c * py + sh2;
    }
};

}  // namespace

RotatedGrid rotated_grid(int width, int height, int degrees) {
    Trig t = trig(degrees);
    double ew = std::abs(width * t.c) + std::abs(height * t.s);
    double eh = std::abs(width * t.s) + std::abs(height * t.c);
    RotatedGrid g;
    g.width = parity_ceil(ew, width);
    g.height = parity_ceil(eh, height);
    g.shift = {(width - g.width) / 2, (height - g.height) / 2};
    return g;
}

Mask rotate_nearest(const Mask& m, int degrees) {
    if (normalize_degrees(degrees) == 0) return m;
    RotatedGrid g = rotated_grid(m.width(), m.height(), degrees);
    Sampler s{trig(degrees), g.width / 2.0, g.height / 2.0, m.width() / 2.0, m.height() / 2.0};
    Mask out(g.width, g.height);
    for (int v = 0; v < g.height; ++v)
        for (int u = 0; u < g.width; ++u) {
            double sx, sy;
            s.source(u, v, sx, sy);
            if (sx < 0 || sy < 0 || sx >= m.width() || sy >= m.height()) continue;
            out.at(u, v) = m.at(int(std::floor(sx)), int(std::floor(sy)));
        }
    return out;
}

Image rotate_bilinear(const Image& img, int degrees) {
    if (normalize_degrees(degrees) == 0) return img;
    RotatedGrid g = rotated_grid(img.width(), img.height(), degrees);
    Sampler s{trig(degrees), g.width / 2.0, g.height / 2.0, img.width() / 2.0, img.height() / 2.0};
    Image out(g.width, g.height);
    const int w = img.width(), h = img.height();
    for (int v = 0; v < g.height; ++v)
        for (int u = 0; u < g.width; ++u) {
            double sx, sy;
            s.source(u, v, sx, sy);
            if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
            double fx = std::clamp(sx - 0.5, 0.0, double(w - 1));
            double fy = std::clamp(sy - 0.5, 0.0, double(h - 1));
            int x0 = int(fx), y0 = int(fy);
            int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
            double ax = fx - x0, ay = fy - y0;
            for (int c = 0; c < 3; ++c) {
                double top = img.at(c, x0, y0) * (1 - ax) + img.at(c, x1, y0) * ax;
                double bot = img.at(c, x0, y1) * (1 - ax) + img.at(c, x1, y1) * ax;
                out.at(c, u, v) = std::uint8_t(std::lround(top * (1 - ay) + bot * ay));
            }
        }
    return out;
}

Mask resize_nearest(const Mask& m, int width, int height) {
    Mask out(width, height);
    if (m.width() == 0 || m.height() == 0) return out;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.at(x, y) = m.at(int((x + 0.5) * m.width() / width), int((y + 0.5) * m.height() / height));
    return out;
}

Image resize_nearest(const Image& img, int width, int height) {
    Image out(width, height);
    if (img.width() == 0 || img.height() == 0) return out;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.set_pixel(x, y,
                          img.pixel(int((x + 0.5) * img.width() / width),
                                    int((y + 0.5) * img.height() / height)));
    return out;
}

}  // namespace simip
