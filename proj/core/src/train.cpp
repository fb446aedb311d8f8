#include "sfg/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "sfg/errors.hpp"
#include "sfg/gradcheck.hpp"
#include "sfg/parallel.hpp"

namespace sfg {

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (!(lr_max > 0.0) || !(lr_decay > 0.0)) throw std::invalid_argument("learning rate and decay must be positive");
    if (batch < 1) throw std::invalid_argument("batch size must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw std::invalid_argument("invalid moment parameters");
    }
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("validation fraction must lie in [0, 1)");
    if (zero_patches < 0 || noise_sigma < 0.0) throw std::invalid_argument("augmentation must be non-negative");
}

double TrainConfig::lr_at(int epoch) const { return lr_max * std::pow(lr_decay, epoch); }

AdamW::AdamW(const FninParams& like, const TrainConfig& cfg)
    : m_(like.zeros_like()), v_(like.zeros_like()), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps),
      decay_(cfg.weight_decay) {}

void AdamW::step(FninParams& params, const FninParams& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto p = params.views();
    const auto g = grad.views();
    auto m = m_.views();
    auto v = v_.views();
    for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t k = 0; k < p[t].count; ++k) {
            const double gk = g[t].data[k];
            double& mk = m[t].data[k];
            double& vk = v[t].data[k];
            mk = beta1_ * mk + (1.0 - beta1_) * gk;
            vk = beta2_ * vk + (1.0 - beta2_) * gk * gk;
            double& x = p[t].data[k];
            x -= lr * decay_ * x;
            x -= lr * (mk / c1) / (std::sqrt(vk / c2) + eps_);
        }
    }
}

double mean_loss(const FninParams& params, const std::vector<SyntheticSample>& samples, double gamma,
                 const ForwardOptions& opts) {
    if (samples.empty()) return 0.0;
    std::vector<double> losses(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        losses[i] = loss_and_grad(params, samples[i], gamma, opts, false).loss;
    });
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(samples.size());
}

TrainResult train_toy(const TrainConfig& cfg, const std::vector<SyntheticSample>& dataset, const FninParams* init,
                      const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (dataset.empty()) throw DataError("train_toy: empty dataset");
    TrainResult result;
    result.params = init ? *init : FninParams::random(cfg.hyper, cfg.seed);
    result.params.validate();

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 split_rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), split_rng);
    std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(dataset.size())));
    if (cfg.val_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
    n_val = std::min(n_val, dataset.size() - 1);
    std::vector<SyntheticSample> val;
    std::vector<SyntheticSample> train;
    for (std::size_t k = 0; k < order.size(); ++k) (k < n_val ? val : train).push_back(dataset[order[k]]);

    auto record = [&](int epoch, double train_loss, double lr) {
        EpochRecord rec{epoch, train_loss, val.empty() ? 0.0 : mean_loss(result.params, val, cfg.gamma, cfg.forward),
                        lr};
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    };
    record(0, mean_loss(result.params, train, cfg.gamma, cfg.forward), 0.0);

    AdamW opt(result.params, cfg);
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    // One reusable gradient buffer per concurrent sample; the batch sum is
    // formed in sample order, independent of how many slots exist.
    const std::size_t slots = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                                                    static_cast<std::size_t>(worker_count()));
    std::vector<FninParams> slot_grad(slots, result.params.zeros_like());
    std::vector<double> slot_loss(slots);
    FninParams grad = result.params.zeros_like();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at(epoch);
        std::mt19937_64 rng(cfg.seed + 1000003ULL * static_cast<std::uint64_t>(epoch + 1));
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::uint64_t aug_seed = rng();
        double epoch_loss = 0.0;
        for (std::size_t start = 0, b = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch), ++b) {
            const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch));
            grad.set_zero();
            double batch_loss = 0.0;
            for (std::size_t group = start; group < end; group += slots) {
                const std::size_t n = std::min(slots, end - group);
                parallel_for(n, [&](std::size_t j) {
                    const std::size_t sample = idx[group + j];
                    if (cfg.zero_patches > 0 || cfg.noise_sigma > 0.0) {
                        SyntheticSample s = train[sample];
                        std::seed_seq seq{static_cast<std::uint32_t>(aug_seed), static_cast<std::uint32_t>(sample)};
                        std::mt19937_64 aug_rng(seq);
                        augment(s, cfg.zero_patches, cfg.noise_sigma, aug_rng);
                        slot_loss[j] = loss_with_grad(result.params, s, cfg.gamma, cfg.forward, slot_grad[j]);
                    } else {
                        slot_loss[j] = loss_with_grad(result.params, train[sample], cfg.gamma, cfg.forward, slot_grad[j]);
                    }
                }, static_cast<int>(n));
                for (std::size_t j = 0; j < n; ++j) {
                    grad.accumulate(slot_grad[j]);
                    batch_loss += slot_loss[j];
                }
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericalError("training diverged: non-finite loss in epoch " + std::to_string(epoch + 1) +
                                     ", batch " + std::to_string(b));
            }
            grad.scale(1.0 / static_cast<double>(end - start));
            opt.step(result.params, grad, lr);
            epoch_loss += batch_loss;
        }
        record(epoch + 1, epoch_loss / static_cast<double>(idx.size()), lr);
    }
    return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,train_loss,val_loss,lr\n";
    out << std::setprecision(10);
    for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
}

}  // namespace sfg
