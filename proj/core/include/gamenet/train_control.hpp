#pragma once

#include "gamenet/network.hpp"
#include "gamenet/optim.hpp"
#include "gamenet/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace gamenet::nn {

/// Early stopping on a validation loss (lower is better).
///
/// An epoch counts as an improvement only if the metric drops below the best
/// value by more than `tolerance`. update() reports Stop once the number of
/// consecutive non-improving epochs reaches `patience`.
class EarlyStopping {
public:
    enum class Decision { Continue, Stop };

    explicit EarlyStopping(std::size_t patience = 25, double tolerance = 1e-8);

    Decision update(double metric);

    bool last_improved() const noexcept { return last_improved_; }
    double best() const noexcept { return best_; }
    std::size_t epochs_since_improve() const noexcept { return since_; }
    std::size_t patience() const noexcept { return patience_; }

private:
    std::size_t patience_;
    double tolerance_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t since_ = 0;
    bool last_improved_ = false;
};

struct PlateauConfig {
    double factor = 0.5;
    std::size_t patience = 10;
    double min_lr = 1e-7;
    double tolerance = 1e-8;

    void validate() const;
};

/// Reduce-on-plateau learning-rate schedule.
class PlateauScheduler {
public:
    explicit PlateauScheduler(PlateauConfig cfg = {});

    /// Returns the learning rate to use after observing `metric`.
    double step(double lr, double metric);

    std::size_t bad_epochs() const noexcept { return bad_; }
    const PlateauConfig& config() const noexcept { return cfg_; }

private:
    PlateauConfig cfg_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t bad_ = 0;
};

struct TrainConfig {
    OptimizerConfig optimizer = OptimizerConfig::adam(1e-4);
    std::size_t batch_size = 256;
    std::size_t max_epochs = 200;
    std::size_t patience = 25;
    double early_stop_tolerance = 1e-8;
    double clip_norm = 1.0;
    bool use_plateau = true;
    PlateauConfig plateau;
    std::uint64_t seed = 46;

    void validate() const;
};

/// Shuffled mini-batches over [0, n). A trailing batch of one row is merged
/// into the previous batch so batchnorm always sees at least two rows.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng);

struct TrainHistory {
    std::vector<double> train_loss;      ///< mean batch loss per epoch
    std::vector<double> val_loss;        ///< index 0 is the untrained model
    std::vector<double> learning_rate;   ///< lr in effect during each epoch
    std::vector<double> best_val_so_far; ///< running minimum of val_loss
    std::size_t best_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
};

/// Callbacks that adapt a specific model to the shared training loop.
struct TrainHooks {
    /// Forward + backward on one batch; returns the batch loss. Gradients are
    /// zeroed before the call.
    std::function<double(std::span<const std::size_t> batch, Rng& rng)> train_batch;
    /// Validation loss of the current parameters (eval mode).
    std::function<double()> validate;
};

/// Mini-batch training with gradient clipping, a plateau schedule and early
/// stopping. The parameters with the lowest validation loss (including the
/// untrained starting point) are restored before returning.
TrainHistory fit(const TrainConfig& cfg, std::size_t n_train, std::span<Optimizer* const> optimizers,
                 const std::vector<Matrix*>& buffers, const TrainHooks& hooks);

} // namespace gamenet::nn
