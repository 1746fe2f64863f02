#include "simip/visualize.hpp"

#include <cmath>

#include "simip/errors.hpp"
#include "simip/png_io.hpp"

namespace simip {

namespace {

constexpr std::array<std::uint8_t, 3> kRed{230, 20, 20};
constexpr std::array<std::uint8_t, 3> kGreen{20, 200, 40};

void put(Image& img, int x, int y, std::array<std::uint8_t, 3> c, int x_lo, int x_hi) {
    if (x < x_lo || x >= x_hi || y < 0 || y >= img.height()) return;
    img.set_pixel(x, y, c);
}

void ring(Image& img, Point c, int r, int x_lo, int x_hi) {
    for (int y = c.y - r - 1; y <= c.y + r + 1; ++y)
        for (int x = c.x - r - 1; x <= c.x + r + 1; ++x) {
            double d = std::hypot(x - c.x, y - c.y);
            if (std::abs(d - r) <= 1.0) put(img, x, y, kRed, x_lo, x_hi);
        }
}

void cross(Image& img, Point c, int arm, int x_lo, int x_hi) {
    for (int d = -arm; d <= arm; ++d)
        for (int t = -1; t <= 1; ++t) {
            put(img, c.x + d, c.y + t, kGreen, x_lo, x_hi);
            put(img, c.x + t, c.y + d, kGreen, x_lo, x_hi);
        }
}

}  // namespace

PlanStrip render_plan_strip(const Plan& plan, int gap) {
    if (plan.scenes.empty()) throw Error(ErrorKind::InvalidArgument, "plan has no scenes");
    if (gap < 0) throw Error(ErrorKind::InvalidArgument, "gap must be >= 0");
    const int w = plan.scenes.front().width(), h = plan.scenes.front().height();
    const int n = int(plan.scenes.size());
    PlanStrip strip;
    strip.panel_width = w;
    strip.gap = gap;
    strip.image = Image(n * w + (n - 1) * gap, h, {255, 255, 255});
    for (int k = 0; k < n; ++k) {
        const int ox = k * (w + gap);
        Image panel = render(plan.scenes[std::size_t(k)]).image;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) strip.image.set_pixel(ox + x, y, panel.pixel(x, y));
        if (k == 0) continue;
        const Step& step = plan.steps[std::size_t(k - 1)];
        BBox b = footprint_patch(plan.scenes[std::size_t(k)], step.object).tight_box();
        StripMarker m;
        m.panel = k;
        m.circle_center = b.center();
        m.radius = std::max(3, b.max_side() / 2 + 3);
        m.placement = step.target;
        ring(strip.image, m.circle_center + Point{ox, 0}, m.radius, ox, ox + w);
        cross(strip.image, m.placement + Point{ox, 0}, std::max(3, w / 100), ox, ox + w);
        strip.markers.push_back(m);
    }
    return strip;
}

PlanStrip render_plan_strip(const Plan& plan, const std::filesystem::path& out, int gap) {
    PlanStrip s = render_plan_strip(plan, gap);
    write_png(out, s.image);
    return s;
}

}  // namespace simip
