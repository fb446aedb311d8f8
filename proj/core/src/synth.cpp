#include "sfg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sfg/errors.hpp"

namespace sfg {

namespace {

struct SurfacePoint {
    double z = 0.0;
    double zu = 0.0;
    double zv = 0.0;
    bool valid = false;
};

using Surface = std::function<SurfacePoint(double u, double v)>;

constexpr double kRimFraction = 0.95;
constexpr double kPatchFraction = 50.0 / 512.0;

const std::map<std::string, ShapeKind>& shape_table() {
    static const std::map<std::string, ShapeKind> table{
        {"plane", ShapeKind::plane},   {"bump", ShapeKind::bump}, {"hemisphere", ShapeKind::hemisphere},
        {"sinusoid", ShapeKind::sinusoid}, {"step", ShapeKind::step}, {"ramp", ShapeKind::ramp},
        {"mixed", ShapeKind::mixed}};
    return table;
}

Surface make_surface(ShapeKind kind, const SynthSpec& s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
    const bool rnd = s.randomize;
    switch (kind) {
        case ShapeKind::plane: {
            const double a = rnd ? draw(-0.3, 0.3) : s.slope_u;
            const double b = rnd ? draw(-0.3, 0.3) : s.slope_v;
            return [=](double u, double v) { return SurfacePoint{a * u + b * v, a, b, true}; };
        }
        case ShapeKind::bump: {
            const double amp = rnd ? draw(-0.3, 0.3) : s.amplitude;
            const double cu = rnd ? draw(-0.4, 0.4) : 0.0;
            const double cv = rnd ? draw(-0.4, 0.4) : 0.0;
            const double sigma = rnd ? draw(0.15, 0.4) : 0.3;
            return [=](double u, double v) {
                const double du = u - cu;
                const double dv = v - cv;
                const double e = amp * std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
                return SurfacePoint{e, -e * du / (sigma * sigma), -e * dv / (sigma * sigma), true};
            };
        }
        case ShapeKind::hemisphere: {
            const double r = rnd ? draw(0.4, 0.9) : s.radius;
            const double cu = rnd ? draw(-0.2, 0.2) : 0.0;
            const double cv = rnd ? draw(-0.2, 0.2) : 0.0;
            return [=](double u, double v) {
                const double du = u - cu;
                const double dv = v - cv;
                const double rho2 = du * du + dv * dv;
                if (rho2 >= kRimFraction * kRimFraction * r * r) return SurfacePoint{};
                const double sq = std::sqrt(r * r - rho2);
                return SurfacePoint{sq, -du / sq, -dv / sq, true};
            };
        }
        case ShapeKind::sinusoid: {
            const double amp = rnd ? draw(0.02, 0.1) : s.amplitude;
            const double fu = rnd ? draw(1.0, 3.0) * std::numbers::pi : std::numbers::pi;
            const double fv = rnd ? draw(1.0, 3.0) * std::numbers::pi : std::numbers::pi;
            const double pu = rnd ? draw(0.0, 2.0 * std::numbers::pi) : 0.0;
            const double pv = rnd ? draw(0.0, 2.0 * std::numbers::pi) : 0.0;
            return [=](double u, double v) {
                const double su = std::sin(fu * u + pu);
                const double sv = std::sin(fv * v + pv);
                return SurfacePoint{amp * su * sv, amp * fu * std::cos(fu * u + pu) * sv,
                                    amp * su * fv * std::cos(fv * v + pv), true};
            };
        }
        case ShapeKind::step: {
            double height = s.step_height;
            if (rnd) height = draw(0.05, 0.3) * (U(rng) < 0.5 ? -1.0 : 1.0);
            const double a = rnd ? draw(-0.2, 0.2) : s.slope_u;
            const double b = rnd ? draw(-0.2, 0.2) : s.slope_v;
            const double u0 = rnd ? draw(-0.3, 0.3) : 0.0;
            return [=](double u, double v) {
                return SurfacePoint{a * u + b * v + (u > u0 ? height : 0.0), a, b, true};
            };
        }
        case ShapeKind::ramp: {
            const double x0 = s.ramp_start;
            const double x1 = s.ramp_end;
            const double y = s.ramp_half_height;
            const double rise = rnd ? draw(0.3, 0.8) : s.ramp_rise;
            if (!(x1 > x0)) throw std::invalid_argument("ramp end must lie right of its start");
            const double slope = rise / (x1 - x0);
            return [=](double u, double v) {
                if (u > x0 && u < x1 && std::abs(v) < y) return SurfacePoint{-slope * (u - x0), -slope, 0.0, true};
                return SurfacePoint{0.0, 0.0, 0.0, true};
            };
        }
        case ShapeKind::mixed:
            break;
    }
    throw std::invalid_argument("mixed is not a concrete shape");
}

SyntheticSample make_sample(const SynthSpec& spec, std::uint64_t seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    ShapeKind kind = spec.shape;
    if (kind == ShapeKind::mixed) {
        static constexpr ShapeKind kinds[] = {ShapeKind::plane, ShapeKind::bump, ShapeKind::hemisphere,
                                              ShapeKind::sinusoid, ShapeKind::step};
        kind = kinds[std::uniform_int_distribution<int>(0, 4)(rng)];
    }
    const Surface surface = make_surface(kind, spec, rng);

    SyntheticSample s;
    s.name = shape_name(kind) + "_" + std::to_string(index);
    s.cam.projection = spec.projection;
    s.cam.focal = spec.focal;
    s.cam.main_distance = spec.main_distance;
    s.cam.width = spec.cols;
    s.cam.height = spec.rows;
    s.cam.validate();

    const int rows = spec.rows;
    const int cols = spec.cols;
    std::vector<SurfacePoint> pts(static_cast<std::size_t>(rows) * cols);
    double sum = 0.0;
    std::size_t count = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            auto& p = pts[static_cast<std::size_t>(r) * cols + c];
            p = surface(s.cam.u_of_col(c), s.cam.v_of_row(r));
            if (p.valid) {
                sum += p.z;
                ++count;
            }
        }
    }
    if (count == 0) throw DataError("synthetic surface " + s.name + " covers no pixel");
    const double base = 1.0 - sum / static_cast<double>(count);

    s.depth = DepthMap{GridD(rows, cols, 0.0), Mask(rows, cols, 0), DepthSpace::linear, true};
    s.normals = NormalMap{Grid<Vec3>(rows, cols, Vec3::Zero()), Mask(rows, cols, 0)};
    const bool persp = spec.projection == Projection::perspective;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::size_t i = s.depth.values.index(r, c);
            const SurfacePoint& p = pts[i];
            if (!p.valid) continue;
            const double z = base + p.z;
            if (!(z > 0.0)) throw DataError("synthetic surface " + s.name + " passes behind the camera");
            Vec3 n;
            if (persp) {
                const double lp = p.zu / z;
                const double lq = p.zv / z;
                n = Vec3(-lp * spec.focal, -lq * spec.focal, 1.0 + lp * s.cam.u_of_col(c) + lq * s.cam.v_of_row(r));
            } else {
                n = Vec3(-p.zu, -p.zv, 1.0);
            }
            if (!(n.z() > 0.0)) throw DataError("synthetic surface " + s.name + " turns away from the camera");
            s.depth.values[i] = z;
            s.depth.mask[i] = 1;
            s.normals.normals[i] = n.normalized();
            s.normals.mask[i] = 1;
        }
    }

    augment(s, spec.zero_patches, spec.noise_sigma, rng);
    return s;
}

}  // namespace

void augment(SyntheticSample& s, int zero_patches, double noise_sigma, std::mt19937_64& rng) {
    if (zero_patches > 0) {
        const int side = std::max(1, static_cast<int>(std::lround(kPatchFraction * std::min(s.cam.height, s.cam.width))));
        std::uniform_int_distribution<int> pr(0, s.cam.height - side);
        std::uniform_int_distribution<int> pc(0, s.cam.width - side);
        for (int k = 0; k < zero_patches; ++k) {
            const int r0 = pr(rng);
            const int c0 = pc(rng);
            for (int r = r0; r < r0 + side; ++r) {
                for (int c = c0; c < c0 + side; ++c) {
                    s.normals.mask(r, c) = 0;
                    s.normals.normals(r, c) = Vec3::Zero();
                    s.depth.mask(r, c) = 0;
                    s.depth.values(r, c) = 0.0;
                }
            }
        }
    }
    if (noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (std::size_t i = 0; i < s.normals.normals.size(); ++i) {
            if (!s.normals.mask[i]) continue;
            Vec3 n = s.normals.normals[i] + Vec3(noise(rng), noise(rng), noise(rng));
            n.z() = std::abs(n.z());
            const double len = n.norm();
            if (len > 0.0) s.normals.normals[i] = n / len;
        }
    }
}

ShapeKind parse_shape(const std::string& name) {
    const auto& t = shape_table();
    const auto it = t.find(name);
    if (it == t.end()) throw std::invalid_argument("unknown shape '" + name + "'");
    return it->second;
}

std::string shape_name(ShapeKind k) {
    for (const auto& [name, kind] : shape_table()) {
        if (kind == k) return name;
    }
    return "unknown";
}

SynthSpec parse_synth_spec(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    if (!(in >> word)) throw std::invalid_argument("empty synthetic spec");
    SynthSpec s;
    s.shape = parse_shape(word);
    std::vector<std::string> tokens;
    while (in >> word) tokens.push_back(word);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string key = tokens[i];
        std::string value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else if (i + 1 < tokens.size()) {
            value = tokens[++i];
        } else {
            throw std::invalid_argument("synthetic spec key '" + key + "' has no value");
        }
        auto number = [&] {
            std::size_t used = 0;
            const double d = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("bad number '" + value + "' for " + key);
            return d;
        };
        auto integer = [&] { return static_cast<int>(std::lround(number())); };
        if (key == "rows") s.rows = integer();
        else if (key == "cols") s.cols = integer();
        else if (key == "size") s.rows = s.cols = integer();
        else if (key == "count") s.count = integer();
        else if (key == "projection") {
            if (value == "orthographic") s.projection = Projection::orthographic;
            else if (value == "perspective") s.projection = Projection::perspective;
            else throw std::invalid_argument("unknown projection '" + value + "'");
        } else if (key == "focal" || key == "f") s.focal = number();
        else if (key == "mu") s.main_distance = number();
        else if (key == "randomize") s.randomize = number() != 0.0;
        else if (key == "radius") s.radius = number();
        else if (key == "amplitude") s.amplitude = number();
        else if (key == "height") s.step_height = number();
        else if (key == "slope_u") s.slope_u = number();
        else if (key == "slope_v") s.slope_v = number();
        else if (key == "ramp_start") s.ramp_start = number();
        else if (key == "ramp_end") s.ramp_end = number();
        else if (key == "ramp_half_height") s.ramp_half_height = number();
        else if (key == "rise") s.ramp_rise = number();
        else if (key == "patches") s.zero_patches = integer();
        else if (key == "noise") s.noise_sigma = number();
        else throw std::invalid_argument("unknown synthetic spec key '" + key + "'");
    }
    if (s.count < 0) throw std::invalid_argument("sample count must be non-negative");
    return s;
}

std::vector<SyntheticSample> synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
    std::vector<SyntheticSample> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) out.push_back(make_sample(spec, seed, i));
    return out;
}

}  // namespace sfg
