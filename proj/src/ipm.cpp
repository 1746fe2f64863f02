#include "simip/ipm.hpp"

#include <cmath>

#include "simip/errors.hpp"

namespace simip {

using nlohmann::json;

void CameraModel::check() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::InvalidArgument, "focal lengths must be > 0");
    if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "camera image size must be positive");
    if ((R * R.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 || R.determinant() < 0.0)
        throw Error(ErrorKind::InvalidArgument, "camera rotation is not orthonormal");
}

Eigen::Matrix3d CameraModel::K() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

CameraModel CameraModel::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                                 double f, int width, int height) {
    Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d u = up - up.dot(z) * z;
    if (u.norm() < 1e-12) throw Error(ErrorKind::InvalidArgument, "up vector parallel to the viewing direction");
    Eigen::Vector3d y = -u.normalized();
    Eigen::Vector3d x = y.cross(z);
    CameraModel c;
    c.R.row(0) = x.transpose();
    c.R.row(1) = y.transpose();
    c.R.row(2) = z.transpose();
    c.t = -c.R * eye;
    c.fx = c.fy = f;
    c.cx = (width - 1) / 2.0;
    c.cy = (height - 1) / 2.0;
    c.width = width;
    c.height = height;
    return c;
}

bool CameraModel::project(const Eigen::Vector3d& world, Eigen::Vector2d& pixel) const {
    Eigen::Vector3d p = K() * (R * world + t);
    if (p.z() <= 0.0) return false;
    pixel = p.head<2>() / p.z();
    return true;
}

json CameraModel::to_json() const {
    json r = json::array();
    for (int i = 0; i < 3; ++i) r.push_back({R(i, 0), R(i, 1), R(i, 2)});
    return {{"fx", fx}, {"fy", fy}, {"cx", cx}, {"cy", cy}, {"R", r}, {"t", {t.x(), t.y(), t.z()}},
            {"width", width}, {"height", height}};
}

CameraModel CameraModel::from_json(const json& j) {
    CameraModel c;
    try {
        c.fx = j.at("fx").get<double>();
        c.fy = j.at("fy").get<double>();
        c.cx = j.at("cx").get<double>();
        c.cy = j.at("cy").get<double>();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) c.R(i, k) = j.at("R").at(i).at(k).get<double>();
        for (int i = 0; i < 3; ++i) c.t(i) = j.at("t").at(i).get<double>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, std::string("malformed camera: ") + e.what());
    }
    c.check();
    return c;
}

void TopViewSpec::check() const {
    if (!(meters_per_pixel > 0.0)) throw Error(ErrorKind::InvalidArgument, "meters_per_pixel must be > 0");
    if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "top view size must be positive");
}

Eigen::Matrix3d TopViewSpec::A() const {
    Eigen::Matrix3d a;
    a << meters_per_pixel, 0.0, origin_x, 0.0, -meters_per_pixel, origin_y, 0.0, 0.0, 1.0;
    return a;
}

json TopViewSpec::to_json() const {
    return {{"meters_per_pixel", meters_per_pixel}, {"width", width}, {"height", height},
            {"origin_x", origin_x}, {"origin_y", origin_y}};
}

TopViewSpec TopViewSpec::from_json(const json& j) {
    TopViewSpec s;
    s.meters_per_pixel = j.value("meters_per_pixel", s.meters_per_pixel);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.origin_x = j.value("origin_x", s.origin_x);
    s.origin_y = j.value("origin_y", s.origin_y);
    s.check();
    return s;
}

Eigen::Matrix3d ground_homography(const CameraModel& cam, const TopViewSpec& spec) {
    cam.check();
    spec.check();
    Eigen::Matrix3d P;
    P.col(0) = cam.R.col(0);
    P.col(1) = cam.R.col(1);
    P.col(2) = cam.t;
    Eigen::Matrix3d H = cam.K() * P * spec.A();
    const double scale = H.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || std::abs(H.determinant()) < 1e-12 * scale * scale * scale)
        throw Error(ErrorKind::InvalidArgument, "degenerate camera pose: ground plane is seen edge-on");
    // Positive depth at the top-view center means the plane is in front of the camera.
    Eigen::Vector3d c = H * Eigen::Vector3d((spec.width - 1) / 2.0, (spec.height - 1) / 2.0, 1.0);
    if (c.z() <= 0.0) throw Error(ErrorKind::InvalidArgument, "degenerate camera pose: ground plane behind the camera");
    return H;
}

MergeResult remap_and_merge(const std::vector<Image>& images, const std::vector<CameraModel>& cams,
                            const TopViewSpec& spec) {
    if (images.empty() || images.size() != cams.size())
        throw Error(ErrorKind::InvalidArgument, "need one image per camera and at least one camera");
    spec.check();
    const int W = spec.width, Hh = spec.height;
    const std::size_t n = std::size_t(W) * Hh;
    // Fixed-point sums keep the merge independent of camera order.
    std::vector<std::array<std::int64_t, 3>> acc(n, {0, 0, 0});
    std::vector<int> count(n, 0);
    for (std::size_t k = 0; k < images.size(); ++k) {
        const Image& img = images[k];
        const CameraModel& cam = cams[k];
        if (img.width() != cam.width || img.height() != cam.height)
            throw Error(ErrorKind::InvalidArgument, "image size differs from its camera model");
        Eigen::Matrix3d H = ground_homography(cam, spec);
        for (int v = 0; v < Hh; ++v)
            for (int u = 0; u < W; ++u) {
                Eigen::Vector3d p = H * Eigen::Vector3d(u, v, 1.0);
                if (p.z() <= 0.0) continue;
                double x = p.x() / p.z(), y = p.y() / p.z();
                constexpr double eps = 1e-7;  // round-off at the image border
                if (!(x >= -eps && y >= -eps && x <= img.width() - 1 + eps && y <= img.height() - 1 + eps)) continue;
                x = std::clamp(x, 0.0, double(img.width() - 1));
                y = std::clamp(y, 0.0, double(img.height() - 1));
                int x0 = std::min(int(x), img.width() - 2 < 0 ? 0 : img.width() - 2);
                int y0 = std::min(int(y), img.height() - 2 < 0 ? 0 : img.height() - 2);
                int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
                double fx = x - x0, fy = y - y0;
                std::size_t idx = std::size_t(v) * W + u;
                for (int c = 0; c < 3; ++c) {
                    double val = (1 - fx) * (1 - fy) * img.at(c, x0, y0) + fx * (1 - fy) * img.at(c, x1, y0) +
                                 (1 - fx) * fy * img.at(c, x0, y1) + fx * fy * img.at(c, x1, y1);
                    acc[idx][std::size_t(c)] += std::llround(val * 256.0);
                }
                ++count[idx];
            }
    }
    MergeResult r;
    r.image = Image(W, Hh);
    r.coverage = Mask(W, Hh);
    r.view_count = count;
    bool any = false;
    for (int v = 0; v < Hh; ++v)
        for (int u = 0; u < W; ++u) {
            std::size_t idx = std::size_t(v) * W + u;
            if (!count[idx]) continue;
            any = true;
            r.coverage.at(u, v) = 1;
            std::array<std::uint8_t, 3> px;
            for (int c = 0; c < 3; ++c) {
                std::int64_t den = std::int64_t(count[idx]) * 256;
                px[std::size_t(c)] = std::uint8_t(std::clamp<std::int64_t>((acc[idx][std::size_t(c)] + den / 2) / den, 0, 255));
            }
            r.image.set_pixel(u, v, px);
        }
    if (!any) throw Error(ErrorKind::InvalidArgument, "no camera covers any top-view pixel");
    return r;
}

Image render_ground_plane(const CameraModel& cam, const GroundTexture& texture, int supersample) {
    cam.check();
    if (supersample < 1) throw Error(ErrorKind::InvalidArgument, "supersample must be >= 1");
    Eigen::Matrix3d G;  // world (X,Y,1) -> pixel
    G.col(0) = cam.R.col(0);
    G.col(1) = cam.R.col(1);
    G.col(2) = cam.t;
    G = cam.K() * G;
    Eigen::Matrix3d Ginv = G.inverse();
    Image out(cam.width, cam.height);
    const int ss = supersample;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            std::array<int, 3> sum{0, 0, 0};
            int hits = 0;
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    double px = x - 0.5 + (sx + 0.5) / ss, py = y - 0.5 + (sy + 0.5) / ss;
                    Eigen::Vector3d w = Ginv * Eigen::Vector3d(px, py, 1.0);
                    if (w.z() == 0.0) continue;
                    Eigen::Vector3d world(w.x() / w.z(), w.y() / w.z(), 0.0);
                    if ((cam.R * world + cam.t).z() <= 0.0) continue;  // above the horizon
                    auto c = texture(world.x(), world.y());
                    for (int k = 0; k < 3; ++k) sum[std::size_t(k)] += c[std::size_t(k)];
                    ++hits;
                }
            if (!hits) continue;
            out.set_pixel(x, y, {std::uint8_t((sum[0] + hits / 2) / hits), std::uint8_t((sum[1] + hits / 2) / hits),
                                 std::uint8_t((sum[2] + hits / 2) / hits)});
        }
    return out;
}

}  // namespace simip
