#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sfg/fnin.hpp"
#include "sfg/synth.hpp"

namespace sfg {

struct TrainConfig {
    int epochs = 15;
    double lr_max = 2e-3;
    double lr_decay = 0.9;  ///< per epoch
    int batch = 20;
    double gamma = 0.25;
    std::uint64_t seed = 0;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double val_fraction = 0.1;
    int zero_patches = 0;      ///< per training sample and epoch
    double noise_sigma = 0.0;  ///< normal noise per training sample and epoch
    FninHyper hyper;
    ForwardOptions forward;

    /// Throws std::invalid_argument on non-positive rates or sizes.
    void validate() const;
    /// Learning rate used during 0-based `epoch`.
    double lr_at(int epoch) const;
};

struct EpochRecord {
    int epoch = 0;  ///< 0 is the untrained network
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    FninParams params;
    std::vector<EpochRecord> history;
};

/// Adam with decoupled weight decay over every parameter tensor.
class AdamW {
public:
    AdamW(const FninParams& like, const TrainConfig& cfg);
    void step(FninParams& params, const FninParams& grad, double lr);
    long steps() const noexcept { return t_; }

private:
    FninParams m_;
    FninParams v_;
    double beta1_, beta2_, eps_, decay_;
    long t_ = 0;
};

/// Mean multi-resolution loss over `samples`.
double mean_loss(const FninParams& params, const std::vector<SyntheticSample>& samples, double gamma,
                 const ForwardOptions& opts);

/// Splits off the validation samples (seeded shuffle) and trains from
/// `init`, or from FninParams::random(cfg.hyper, cfg.seed) when null.
/// Per-sample work fans out over worker threads; gradients are reduced in
/// sample order, so results do not depend on the thread count.
TrainResult train_toy(const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset,
                      const FninParams* init = nullptr,
                      const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace sfg
