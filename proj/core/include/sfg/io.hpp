#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sfg/eval.hpp"
#include "sfg/fnin.hpp"
#include "sfg/geometry.hpp"
#include "sfg/synth.hpp"
#include "sfg/train.hpp"

namespace sfg {

/// Float image, rows top to bottom, channels interleaved.
struct FloatImage {
    int rows = 0;
    int cols = 0;
    int channels = 1;
    std::vector<float> data;

    float& at(int r, int c, int ch = 0) { return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch]; }
    float at(int r, int c, int ch = 0) const { return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch]; }
};

/// Portable float map: "Pf" (1 channel) or "PF" (3 channels). Writes
/// little-endian with scale -1; reads either byte order.
FloatImage read_pfm(std::istream& in);
FloatImage read_pfm(const std::string& path);
void write_pfm(std::ostream& out, const FloatImage& img);
void write_pfm(const std::string& path, const FloatImage& img);

/// Depth maps are stored single channel with NaN on masked-out pixels.
FloatImage depth_to_image(const DepthMap& z);
DepthMap depth_from_image(const FloatImage& img);
/// Normal maps are stored three channel with zero vectors off-mask.
FloatImage normals_to_image(const NormalMap& n);
NormalMap normals_from_image(const FloatImage& img);
FloatImage grid_to_image(const GridD& g);
GridD grid_from_image(const FloatImage& img);

/// 8-bit grayscale PNG or binary PGM; pixels above 127 are masked in.
Mask read_mask(const std::string& path);
void write_mask_png(const std::string& path, const Mask& m);
void write_png(const std::string& path, const Image8& img);

/// {"projection": "orthographic" | "perspective", "f", "mu", "width", "height"}
CameraModel read_camera(const std::string& path);
CameraModel parse_camera(const std::string& json_text);
void write_camera(const std::string& path, const CameraModel& cam);

/// One vertex per masked-in pixel, scaled by the main distance, and two
/// triangles per fully valid 2x2 block, counter-clockwise seen from the
/// camera. Returns the number of faces.
std::size_t write_obj(std::ostream& out, const DepthMap& z, const CameraModel& cam);
std::size_t export_obj(const DepthMap& z, const CameraModel& cam, const std::string& path);

inline constexpr int kParamFormatVersion = 1;

/// Network parameters plus any header keys this build does not know,
/// kept as a JSON object text so they survive a load/save cycle.
struct ParamFile {
    FninParams params;
    std::string extra_header = "{}";
};

/// Layout: u64 little-endian header length, UTF-8 JSON header, payload.
/// Tensors are stored as f32 or interleaved f32 pairs (c64).
void write_params(std::ostream& out, const FninParams& params, const std::string& extra_header = "{}");
ParamFile read_params(std::istream& in);
void save_params(const std::string& path, const FninParams& params, const std::string& extra_header = "{}");
ParamFile load_params(const std::string& path);

/// Rounds every parameter to the nearest f32, the precision the container keeps.
void round_to_storage(FninParams& params);

/// Training job description: TrainConfig fields plus the synthetic dataset
/// ("dataset": spec text, "dataset_seed").
struct TrainJob {
    TrainConfig config;
    SynthSpec data;
    std::uint64_t data_seed = 0;
};
TrainJob parse_train_job(const std::string& json_text);

std::string read_text_file(const std::string& path);

}  // namespace sfg
