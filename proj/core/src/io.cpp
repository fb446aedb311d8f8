#include "sfg/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <png.h>

#include <json.hpp>

#include "sfg/errors.hpp"

namespace sfg {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "the file formats assume a little-endian host");

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create " + path);
    return out;
}

std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(what + " is not valid JSON: " + e.what());
    }
}

template <class T>
T get_field(const json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) throw DataError(what + " lacks \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(what + ": bad \"" + key + "\": " + e.what());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// PFM

FloatImage read_pfm(std::istream& in) {
    char magic[2] = {0, 0};
    if (!in.read(magic, 2)) throw DataError("pfm: empty stream");
    FloatImage img;
    if (magic[0] == 'P' && magic[1] == 'f') {
        img.channels = 1;
    } else if (magic[0] == 'P' && magic[1] == 'F') {
        img.channels = 3;
    } else {
        throw DataError(std::string("pfm: bad magic '") + magic[0] + magic[1] + "'");
    }
    double scale = 0.0;
    if (!(in >> img.cols >> img.rows >> scale)) throw DataError("pfm: malformed header");
    if (img.cols <= 0 || img.rows <= 0) throw DataError("pfm: non-positive image size");
    if (scale == 0.0 || !std::isfinite(scale)) throw DataError("pfm: scale must be a non-zero number");
    if (!std::isspace(in.get())) throw DataError("pfm: header not terminated by whitespace");

    const std::size_t row_values = static_cast<std::size_t>(img.cols) * img.channels;
    img.data.resize(row_values * img.rows);
    std::vector<std::uint32_t> row(row_values);
    for (int r = img.rows - 1; r >= 0; --r) {
        if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row_values * 4))) {
            throw DataError("pfm: truncated payload");
        }
        if (scale > 0.0) {
            for (auto& v : row) v = byteswap32(v);
        }
        std::memcpy(img.data.data() + static_cast<std::size_t>(r) * row_values, row.data(), row_values * 4);
    }
    return img;
}

FloatImage read_pfm(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_pfm(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_pfm(std::ostream& out, const FloatImage& img) {
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("pfm holds 1 or 3 channels");
    if (img.data.size() != static_cast<std::size_t>(img.rows) * img.cols * img.channels) {
        throw std::invalid_argument("pfm: data size does not match the image shape");
    }
    out << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.cols << ' ' << img.rows << "\n-1\n";
    const std::size_t row_values = static_cast<std::size_t>(img.cols) * img.channels;
    for (int r = img.rows - 1; r >= 0; --r) {
        out.write(reinterpret_cast<const char*>(img.data.data() + static_cast<std::size_t>(r) * row_values),
                  static_cast<std::streamsize>(row_values * 4));
    }
    if (!out) throw DataError("pfm: write failed");
}

void write_pfm(const std::string& path, const FloatImage& img) {
    auto out = open_out(path);
    write_pfm(out, img);
}

FloatImage depth_to_image(const DepthMap& z) {
    FloatImage img{z.rows(), z.cols(), 1, std::vector<float>(z.values.size())};
    for (std::size_t i = 0; i < z.values.size(); ++i) {
        img.data[i] = z.mask[i] ? static_cast<float>(z.values[i]) : std::numeric_limits<float>::quiet_NaN();
    }
    return img;
}

DepthMap depth_from_image(const FloatImage& img) {
    if (img.channels != 1) throw DataError("depth image must have one channel");
    DepthMap z{GridD(img.rows, img.cols, 0.0), Mask(img.rows, img.cols, 0), DepthSpace::linear, true};
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        if (!std::isfinite(img.data[i])) continue;
        z.values[i] = img.data[i];
        z.mask[i] = 1;
    }
    return z;
}

FloatImage normals_to_image(const NormalMap& n) {
    FloatImage img{n.rows(), n.cols(), 3, std::vector<float>(n.normals.size() * 3, 0.0f)};
    for (std::size_t i = 0; i < n.normals.size(); ++i) {
        if (!n.mask[i]) continue;
        for (int k = 0; k < 3; ++k) img.data[3 * i + k] = static_cast<float>(n.normals[i][k]);
    }
    return img;
}

NormalMap normals_from_image(const FloatImage& img) {
    if (img.channels != 3) throw DataError("normal map must have three channels");
    NormalMap n{Grid<Vec3>(img.rows, img.cols, Vec3::Zero()), Mask(img.rows, img.cols, 0)};
    for (std::size_t i = 0; i < n.normals.size(); ++i) {
        const Vec3 v(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
        if (!v.allFinite() || v.squaredNorm() == 0.0) continue;
        n.normals[i] = v.normalized();
        n.mask[i] = 1;
    }
    return n;
}

FloatImage grid_to_image(const GridD& g) {
    FloatImage img{g.rows(), g.cols(), 1, std::vector<float>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) img.data[i] = static_cast<float>(g[i]);
    return img;
}

GridD grid_from_image(const FloatImage& img) {
    if (img.channels != 1) throw DataError("expected a single-channel image");
    GridD g(img.rows, img.cols);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = img.data[i];
    return g;
}

// ---------------------------------------------------------------------------
// Masks and PNG

Mask read_mask(const std::string& path) {
    auto in = open_in(path);
    char head[8] = {};
    in.read(head, 8);
    const auto got = in.gcount();
    in.close();
    std::vector<std::uint8_t> pixels;
    int rows = 0;
    int cols = 0;
    if (got >= 2 && head[0] == 'P' && head[1] == '5') {
        std::ifstream pgm(path, std::ios::binary);
        std::string magic;
        int maxval = 0;
        auto skip_comments = [&] {
            pgm >> std::ws;
            while (pgm.peek() == '#') {
                std::string line;
                std::getline(pgm, line);
                pgm >> std::ws;
            }
        };
        pgm >> magic;
        skip_comments();
        pgm >> cols;
        skip_comments();
        pgm >> rows;
        skip_comments();
        pgm >> maxval;
        if (!pgm || cols <= 0 || rows <= 0) throw DataError(path + ": malformed PGM header");
        if (maxval > 255) throw DataError(path + ": only 8-bit PGM masks are supported");
        pgm.get();
        pixels.resize(static_cast<std::size_t>(rows) * cols);
        if (!pgm.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
            throw DataError(path + ": truncated PGM payload");
        }
    } else if (got == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(head), 0, 8) == 0) {
        png_image image;
        std::memset(&image, 0, sizeof image);
        image.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_file(&image, path.c_str())) {
            throw DataError(path + ": " + image.message);
        }
        image.format = PNG_FORMAT_GRAY;
        rows = static_cast<int>(image.height);
        cols = static_cast<int>(image.width);
        pixels.resize(PNG_IMAGE_SIZE(image));
        if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
            const std::string msg = image.message;
            png_image_free(&image);
            throw DataError(path + ": " + msg);
        }
    } else {
        throw DataError(path + ": mask must be a PNG or binary PGM image");
    }
    Mask m(rows, cols, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = pixels[i] > 127 ? 1 : 0;
    return m;
}

void write_png(const std::string& path, const Image8& img) {
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("png writer takes 1 or 3 channels");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.cols);
    image.height = static_cast<png_uint_32>(img.rows);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0, nullptr)) {
        throw DataError(path + ": " + image.message);
    }
}

void write_mask_png(const std::string& path, const Mask& m) {
    Image8 img{m.rows(), m.cols(), 1, std::vector<std::uint8_t>(m.size())};
    for (std::size_t i = 0; i < m.size(); ++i) img.data[i] = m[i] ? 255 : 0;
    write_png(path, img);
}

// ---------------------------------------------------------------------------
// Camera

CameraModel parse_camera(const std::string& json_text) {
    const json j = parse_json(json_text, "camera");
    if (!j.is_object()) throw DataError("camera must be a JSON object");
    CameraModel cam;
    const auto proj = get_field<std::string>(j, "projection", "camera");
    if (proj == "orthographic") {
        cam.projection = Projection::orthographic;
    } else if (proj == "perspective") {
        cam.projection = Projection::perspective;
    } else {
        throw DataError("camera: unknown projection '" + proj + "'");
    }
    cam.focal = j.contains("f") ? get_field<double>(j, "f", "camera") : 1.0;
    cam.main_distance = get_field<double>(j, "mu", "camera");
    cam.width = get_field<int>(j, "width", "camera");
    cam.height = get_field<int>(j, "height", "camera");
    try {
        cam.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("camera: ") + e.what());
    }
    return cam;
}

CameraModel read_camera(const std::string& path) {
    try {
        return parse_camera(read_text_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_camera(const std::string& path, const CameraModel& cam) {
    json j{{"projection", cam.projection == Projection::perspective ? "perspective" : "orthographic"},
           {"f", cam.focal},
           {"mu", cam.main_distance},
           {"width", cam.width},
           {"height", cam.height}};
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Mesh

std::size_t write_obj(std::ostream& out, const DepthMap& z, const CameraModel& cam) {
    const PointCloud pc = depth_to_points(to_space(z, DepthSpace::linear), cam);
    Grid<long> vertex(z.rows(), z.cols(), 0);
    long next = 1;
    out << std::setprecision(9);
    for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) {
            if (!z.mask(r, c)) continue;
            const Vec3 p = cam.main_distance * pc.points(r, c);
            out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
            vertex(r, c) = next++;
        }
    }
    std::size_t faces = 0;
    for (int r = 0; r + 1 < z.rows(); ++r) {
        for (int c = 0; c + 1 < z.cols(); ++c) {
            const long a = vertex(r, c);
            const long b = vertex(r, c + 1);
            const long d = vertex(r + 1, c + 1);
            const long e = vertex(r + 1, c);
            if (!a || !b || !d || !e) continue;
            out << "f " << a << ' ' << e << ' ' << b << '\n';
            out << "f " << b << ' ' << e << ' ' << d << '\n';
            faces += 2;
        }
    }
    if (!out) throw DataError("obj: write failed");
    return faces;
}

std::size_t export_obj(const DepthMap& z, const CameraModel& cam, const std::string& path) {
    auto out = open_out(path);
    return write_obj(out, z, cam);
}

// ---------------------------------------------------------------------------
// Parameter container

void round_to_storage(FninParams& params) {
    for (auto& v : params.views()) {
        for (std::size_t k = 0; k < v.count; ++k) v.data[k] = static_cast<float>(v.data[k]);
    }
}

void write_params(std::ostream& out, const FninParams& params, const std::string& extra_header) {
    params.validate();
    json header = parse_json(extra_header, "extra header");
    if (!header.is_object()) throw std::invalid_argument("extra header must be a JSON object");
    header["format_version"] = kParamFormatVersion;
    header["hyper"] = {{"T", params.hyper.T},
                       {"k_max", params.hyper.k_max},
                       {"d_v", params.hyper.d_v},
                       {"c_a", params.hyper.c_a}};
    json tensors = json::object();
    std::uint64_t offset = 0;
    const auto views = params.views();
    for (const auto& v : views) {
        const std::uint64_t length = 4 * v.count;
        tensors[v.name] = {{"dtype", v.complex ? "c64" : "f32"}, {"shape", v.shape}, {"offset", offset}, {"length", length}};
        offset += length;
    }
    header["tensors"] = tensors;
    const std::string text = header.dump();
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    std::vector<float> buf;
    for (const auto& v : views) {
        buf.assign(v.count, 0.0f);
        for (std::size_t k = 0; k < v.count; ++k) buf[k] = static_cast<float>(v.data[k]);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(4 * buf.size()));
    }
    if (!out) throw DataError("parameter container: write failed");
}

ParamFile read_params(std::istream& in) {
    std::uint64_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), 8)) throw DataError("parameter container: missing header length");
    if (len == 0 || len > (1u << 28)) throw DataError("parameter container: implausible header length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError("parameter container: truncated header");
    const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    json header = parse_json(text, "parameter header");
    if (!header.is_object()) throw DataError("parameter header must be a JSON object");
    const int version = get_field<int>(header, "format_version", "parameter header");
    if (version != kParamFormatVersion) {
        throw DataError("parameter container has format_version " + std::to_string(version) + ", this build reads " +
                        std::to_string(kParamFormatVersion) + "; convert it with a matching build and re-save");
    }
    const json hyper = get_field<json>(header, "hyper", "parameter header");
    FninHyper h;
    h.T = get_field<int>(hyper, "T", "hyper");
    h.k_max = get_field<int>(hyper, "k_max", "hyper");
    h.d_v = get_field<int>(hyper, "d_v", "hyper");
    h.c_a = get_field<int>(hyper, "c_a", "hyper");
    ParamFile pf;
    try {
        pf.params = FninParams::zeros(h);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("parameter header: ") + e.what());
    }
    const json tensors = get_field<json>(header, "tensors", "parameter header");
    if (!tensors.is_object()) throw DataError("parameter header: tensors must be an object");

    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    auto views = pf.params.views();
    for (auto& v : views) {
        if (!tensors.contains(v.name)) {
            throw DataError("parameter container lacks tensor " + v.name + " required by T = " + std::to_string(h.T));
        }
        const json& t = tensors.at(v.name);
        const auto dtype = get_field<std::string>(t, "dtype", v.name);
        const auto shape = get_field<std::vector<int>>(t, "shape", v.name);
        const auto offset = get_field<std::uint64_t>(t, "offset", v.name);
        const auto length = get_field<std::uint64_t>(t, "length", v.name);
        if (dtype != (v.complex ? "c64" : "f32")) throw DataError(v.name + ": unexpected dtype " + dtype);
        if (shape != v.shape) throw DataError(v.name + ": shape disagrees with the hyperparameters");
        if (length != 4 * v.count) throw DataError(v.name + ": byte length disagrees with its shape");
        if (offset > payload.size() || length > payload.size() - offset) throw DataError(v.name + ": payload truncated");
        spans.emplace_back(offset, length);
        for (std::size_t k = 0; k < v.count; ++k) {
            float f;
            std::memcpy(&f, payload.data() + offset + 4 * k, 4);
            v.data[k] = f;
        }
    }
    if (tensors.size() != views.size()) {
        for (const auto& [name, value] : tensors.items()) {
            const bool known = std::any_of(views.begin(), views.end(), [&](const ParamView& v) { return v.name == name; });
            if (!known) throw DataError("parameter container has unexpected tensor " + name);
        }
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
        if (spans[i - 1].first + spans[i - 1].second > spans[i].first) throw DataError("parameter container: tensors overlap");
    }
    header.erase("format_version");
    header.erase("hyper");
    header.erase("tensors");
    pf.extra_header = header.dump();
    return pf;
}

void save_params(const std::string& path, const FninParams& params, const std::string& extra_header) {
    auto out = open_out(path);
    write_params(out, params, extra_header);
}

ParamFile load_params(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_params(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training jobs

TrainJob parse_train_job(const std::string& json_text) {
    const json j = parse_json(json_text, "training config");
    if (!j.is_object()) throw DataError("training config must be a JSON object");
    TrainJob job;
    job.data.shape = ShapeKind::mixed;
    job.data.count = 200;
    job.data.randomize = true;
    TrainConfig& c = job.config;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "epochs") c.epochs = value.get<int>();
            else if (key == "lr_max") c.lr_max = value.get<double>();
            else if (key == "lr_decay") c.lr_decay = value.get<double>();
            else if (key == "batch") c.batch = value.get<int>();
            else if (key == "gamma") c.gamma = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "weight_decay") c.weight_decay = value.get<double>();
            else if (key == "val_fraction") c.val_fraction = value.get<double>();
            else if (key == "zero_patches") c.zero_patches = value.get<int>();
            else if (key == "noise_sigma") c.noise_sigma = value.get<double>();
            else if (key == "coarsest_min") c.forward.coarsest_min = value.get<int>();
            else if (key == "hyper") {
                c.hyper.T = value.value("T", c.hyper.T);
                c.hyper.k_max = value.value("k_max", c.hyper.k_max);
                c.hyper.d_v = value.value("d_v", c.hyper.d_v);
                c.hyper.c_a = value.value("c_a", c.hyper.c_a);
            } else if (key == "dataset") {
                const bool randomize = job.data.randomize;
                const int count = job.data.count;
                const std::string spec = value.get<std::string>();
                job.data = parse_synth_spec(spec);
                if (spec.find("randomize") == std::string::npos) job.data.randomize = randomize;
                if (spec.find("count") == std::string::npos) job.data.count = count;
            } else if (key == "dataset_seed") job.data_seed = value.get<std::uint64_t>();
            else throw DataError("training config: unknown key \"" + key + "\"");
        } catch (const json::exception& e) {
            throw DataError("training config: bad \"" + key + "\": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw DataError("training config: " + std::string(e.what()));
        }
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("training config: ") + e.what());
    }
    return job;
}

std::string read_text_file(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace sfg
