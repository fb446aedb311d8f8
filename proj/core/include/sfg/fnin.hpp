#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sfg/geometry.hpp"
#include "sfg/nn.hpp"
#include "sfg/spectral.hpp"

namespace sfg {

struct FninHyper {
    int T = 4;
    int k_max = 16;
    int d_v = 32;
    int c_a = 16;

    friend bool operator==(const FninHyper&, const FninHyper&) = default;
};

/// GELU(W v + K v + b), with W and b held in `w`.
struct FourierLayer {
    nn::Linear w;
    nn::SpectralWeights spectral;
};

/// One layer on a d_v-channel field; `pre`, if given, receives the
/// activation input.
nn::Tensor fourier_layer_apply(const nn::Tensor& v, const FourierLayer& layer, nn::Tensor* pre = nullptr);

/// One named parameter tensor viewed as a flat run of doubles. Complex
/// tensors expose interleaved (re, im) pairs.
struct ParamView {
    std::string name;
    std::vector<int> shape;
    bool complex = false;
    double* data = nullptr;
    std::size_t count = 0;  ///< number of doubles
};

struct FninParams {
    FninHyper hyper;
    nn::Linear lift;                      // 4 -> d_v
    std::array<nn::Linear, 2> project;    // d_v -> d_v -> 1
    std::vector<FourierLayer> initial;    // first resolution
    std::vector<FourierLayer> iterative;  // every later resolution
    std::array<nn::Conv3x3, 3> extractor;  // 1 -> c_a -> c_a -> c_a
    std::array<nn::Conv3x3, 3> regressor;  // c_a -> c_a -> c_a -> 1

    /// All tensors allocated for `hyper` and filled with zeros.
    static FninParams zeros(const FninHyper& hyper);
    /// Uniform(+-1/sqrt(fan_in)) dense weights, spectral weights
    /// scale * (U(-1,1) + i U(-1,1)) with scale 1/(d_v k_max^2).
    static FninParams random(const FninHyper& hyper, std::uint64_t seed);

    std::vector<ParamView> views();
    std::vector<ParamView> views() const;  ///< data pointers must not be written through
    std::size_t parameter_count() const;

    /// Throws std::invalid_argument if any tensor disagrees with `hyper`.
    void validate() const;

    /// Zero-filled copy used as a gradient accumulator.
    FninParams zeros_like() const { return zeros(hyper); }
    void set_zero();
    /// this += other, tensor by tensor.
    void accumulate(const FninParams& other);
    void scale(double s);
};

struct ForwardOptions {
    int coarsest_min = 32;
};

struct AttentionTrace {
    GridD dis;
    Mask mask;
    std::array<nn::Tensor, 6> inputs;  // input of each convolution
    std::array<nn::Tensor, 6> pre;     // output of each convolution
    GridD score;
    std::size_t argmin = 0;
    std::size_t argmax = 0;
    double range = 0.0;
    bool degenerate = true;
};

/// Per-pixel smoothness confidence in [0, 1] from the current depth.
///
/// dis sums the squared one-sided point-to-plane differences divided by the
/// cell size; two convolution stacks map it to a score that is min-max
/// normalized over the mask. A flat score gives 0.5 everywhere; masked-out
/// pixels get 0.
GridD attention_weights(const DepthMap& z, const GridD& n3, double cell, const FninParams& params,
                        AttentionTrace* trace = nullptr);

struct LevelTrace {
    CameraModel cam;
    NormalMap normals;
    GridD n3;
    GridD zhat;              // log depth entering the level
    GridD glog_p, glog_q;    // log-space gradients from the normals
    nn::Tensor lift_in;      // p residual, q residual, u, v
    std::vector<nn::Tensor> layer_in;   // T + 1 entries, last is v_T
    std::vector<nn::Tensor> layer_pre;  // T entries
    nn::Tensor proj_pre, proj_h, q;
    GridD z;                 // exp(zhat + q)
    AttentionTrace attention;
    GridD omega;
};

struct FninOutput {
    DepthMap depth;  ///< linear relative depth at full resolution
    GridD omega;     ///< attention at full resolution, 0 off-mask
    std::vector<LevelTrace> levels;  ///< coarsest first; filled on request
};

/// Multi-resolution forward pass. Starts from z = 1 at the coarsest level
/// and predicts a log-depth residual at every level.
FninOutput fnin_forward(const NormalMap& n, const CameraModel& cam, const FninParams& params,
                        const ForwardOptions& opts = {}, bool keep_trace = false);

/// Given d loss / d z and d loss / d omega at each level (coarsest first,
/// matching `out.levels`), accumulates parameter gradients into `grad`.
void fnin_backward(const FninOutput& out, const FninParams& params, const std::vector<GridD>& grad_z,
                   const std::vector<GridD>& grad_omega, FninParams& grad);

}  // namespace sfg
