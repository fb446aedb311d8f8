#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sfg/geometry.hpp"

namespace sfg {

enum class ShapeKind { plane, bump, hemisphere, sinusoid, step, ramp, mixed };

ShapeKind parse_shape(const std::string& name);
std::string shape_name(ShapeKind k);

/// Recipe for a batch of parametric surfaces over the normalized image
/// plane. With `randomize` set, shape parameters are drawn per sample;
/// otherwise the fixed values below are used.
struct SynthSpec {
    ShapeKind shape = ShapeKind::plane;
    int count = 1;
    int rows = 64;
    int cols = 64;
    Projection projection = Projection::orthographic;
    double focal = 2.0;
    double main_distance = 1000.0;
    bool randomize = false;

    double radius = 0.8;        ///< hemisphere
    double amplitude = 0.2;     ///< bump, sinusoid
    double step_height = 0.2;   ///< step
    double slope_u = 0.1;       ///< plane and step tilt
    double slope_v = 0.05;
    double ramp_start = -0.2;   ///< ramp: rises from u = start ...
    double ramp_end = 0.2;      ///< ... to u = end, then drops back
    double ramp_half_height = 0.5;
    double ramp_rise = 0.8;

    int zero_patches = 0;       ///< square holes, side 50/512 of the short side
    double noise_sigma = 0.0;   ///< per-component normal noise before renormalization
};

/// Parses "kind key=value ...", e.g. "hemisphere radius=0.8 rows=32".
SynthSpec parse_synth_spec(const std::string& text);

struct SyntheticSample {
    std::string name;
    DepthMap depth;  ///< linear relative ground truth, masked mean 1
    NormalMap normals;
    CameraModel cam;
};

/// Masks out `zero_patches` random squares (side 50/512 of the short
/// side) and perturbs normals by Gaussian noise before renormalizing.
void augment(SyntheticSample& s, int zero_patches, double noise_sigma, std::mt19937_64& rng);

/// Deterministic given (spec, seed); sample i depends only on (seed, i).
std::vector<SyntheticSample> synth_dataset(const SynthSpec& spec, std::uint64_t seed);

}  // namespace sfg
