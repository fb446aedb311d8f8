#include "sfg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "sfg/errors.hpp"

namespace sfg {

namespace {

void require_pair(const DepthMap& est, const DepthMap& gt) {
    if (!est.values.same_shape(gt.values) || !est.mask.same_shape(est.values) || !gt.mask.same_shape(gt.values)) {
        throw DataError("estimate is " + shape_string(est.rows(), est.cols()) + " but ground truth is " +
                        shape_string(gt.rows(), gt.cols()));
    }
}

double median(std::vector<double> v) {
    if (v.empty()) throw DataError("alignment has no valid pixels");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace

AlignMode parse_align(const std::string& name) {
    if (name == "offset") return AlignMode::offset;
    if (name == "scale") return AlignMode::scale;
    if (name == "none") return AlignMode::none;
    throw std::invalid_argument("unknown alignment '" + name + "'");
}

DepthMap align_depth(const DepthMap& est, const DepthMap& gt, AlignMode mode) {
    require_pair(est, gt);
    DepthMap out = est;
    if (mode == AlignMode::none) return out;
    std::vector<double> samples;
    for (std::size_t i = 0; i < est.values.size(); ++i) {
        if (!est.mask[i] || !gt.mask[i]) continue;
        if (mode == AlignMode::offset) {
            samples.push_back(est.values[i] - gt.values[i]);
        } else if (est.values[i] > 0.0 && gt.values[i] > 0.0) {
            samples.push_back(gt.values[i] / est.values[i]);
        }
    }
    const double m = median(std::move(samples));
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (!out.mask[i]) continue;
        out.values[i] = mode == AlignMode::offset ? out.values[i] - m : out.values[i] * m;
    }
    return out;
}

double mae_mm(const DepthMap& est, const DepthMap& gt, double mu, AlignMode mode) {
    if (!(mu > 0.0)) throw std::invalid_argument("main distance must be positive");
    const DepthMap a = align_depth(est, gt, mode);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!a.mask[i] || !gt.mask[i]) continue;
        sum += std::abs(a.values[i] - gt.values[i]);
        ++n;
    }
    if (n == 0) throw DataError("mae: no shared valid pixels");
    return mu * sum / static_cast<double>(n);
}

std::array<std::uint8_t, 3> ramp_color(int index) {
    const double t = std::clamp(index, 0, 255) / 255.0;
    auto channel = [t](double centre) {
        const double v = 1.5 - 4.0 * std::abs(t - centre);
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    };
    return {channel(0.75), channel(0.5), channel(0.25)};
}

int error_ramp_index(double error_mm, double ceiling_mm) {
    if (!(ceiling_mm > 0.0)) throw std::invalid_argument("error ceiling must be positive");
    const double t = std::clamp(error_mm / ceiling_mm, 0.0, 1.0);
    return static_cast<int>(std::floor(t * 255.0 + 0.5));
}

Image8 error_map(const DepthMap& est, const DepthMap& gt, double mu, double ceiling_mm, AlignMode mode) {
    const DepthMap a = align_depth(est, gt, mode);
    Image8 img{est.rows(), est.cols(), 3, std::vector<std::uint8_t>(static_cast<std::size_t>(est.rows()) * est.cols() * 3, 0)};
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            if (!a.mask(r, c) || !gt.mask(r, c)) continue;
            const auto rgb = ramp_color(error_ramp_index(std::abs(a.values(r, c) - gt.values(r, c)) * mu, ceiling_mm));
            std::copy(rgb.begin(), rgb.end(), img.pixel(r, c));
        }
    }
    return img;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows, bool header) {
    if (header) out << "object,method,MAE_mm,runtime_s\n";
    out << std::setprecision(8);
    for (const auto& r : rows) out << r.object << ',' << r.method << ',' << r.mae_mm << ',' << r.runtime_s << '\n';
}

}  // namespace sfg
