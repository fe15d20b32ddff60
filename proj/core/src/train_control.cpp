#include "gamenet/train_control.hpp"

#include "gamenet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gamenet::nn {

EarlyStopping::EarlyStopping(std::size_t patience, double tolerance)
    : patience_(patience), tolerance_(tolerance)
{
    if (patience_ == 0)
        throw ConfigError("early stopping patience must be >= 1");
}

EarlyStopping::Decision EarlyStopping::update(double metric)
{
    if (!std::isfinite(metric))
        throw NumericError("early stopping: non-finite validation metric");
    last_improved_ = metric < best_ - tolerance_;
    if (last_improved_) {
        best_ = metric;
        since_ = 0;
    } else {
        ++since_;
    }
    return since_ >= patience_ ? Decision::Stop : Decision::Continue;
}

void PlateauConfig::validate() const
{
    if (!(factor > 0.0 && factor < 1.0))
        throw ConfigError("plateau factor must be in (0, 1)");
    if (patience == 0)
        throw ConfigError("plateau patience must be >= 1");
    if (min_lr < 0.0)
        throw ConfigError("plateau min_lr must be >= 0");
}

PlateauScheduler::PlateauScheduler(PlateauConfig cfg) : cfg_(cfg)
{
    cfg_.validate();
}

double PlateauScheduler::step(double lr, double metric)
{
    if (!std::isfinite(metric))
        throw NumericError("plateau scheduler: non-finite metric");
    if (metric < best_ - cfg_.tolerance) {
        best_ = metric;
        bad_ = 0;
        return lr;
    }
    if (++bad_ < cfg_.patience)
        return lr;
    bad_ = 0;
    return std::max(lr * cfg_.factor, cfg_.min_lr);
}

void TrainConfig::validate() const
{
    optimizer.validate();
    if (batch_size == 0)
        throw ConfigError("batch size must be >= 1");
    if (patience == 0)
        throw ConfigError("patience must be >= 1");
    if (!(clip_norm > 0.0))
        throw ConfigError("clip norm must be > 0");
    if (use_plateau)
        plateau.validate();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
    }
    return batches;
}

TrainHistory fit(const TrainConfig& cfg, std::size_t n_train, std::span<Optimizer* const> optimizers,
                 const std::vector<Matrix*>& buffers, const TrainHooks& hooks)
{
    cfg.validate();
    if (optimizers.empty())
        throw StateError("fit: no optimizers");
    if (n_train < 2)
        throw DataError("fit: need at least two training rows");

    std::vector<ParamTensor*> params;
    for (auto* opt : optimizers)
        for (auto* p : opt->params())
            params.push_back(p);

    Rng rng(cfg.seed);
    TrainHistory hist;
    EarlyStopping stopper(cfg.patience, cfg.early_stop_tolerance);
    PlateauScheduler plateau(cfg.use_plateau ? cfg.plateau : PlateauConfig{});

    const double initial = hooks.validate();
    hist.val_loss.push_back(initial);
    stopper.update(initial);
    hist.best_val = initial;
    hist.best_val_so_far.push_back(initial);
    StateSnapshot best = snapshot(params, buffers);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        hist.learning_rate.push_back(optimizers.front()->lr());
        double loss_sum = 0.0;
        const auto batches = make_batches(n_train, cfg.batch_size, rng);
        for (const auto& batch : batches) {
            for (auto* opt : optimizers)
                opt->zero_grad();
            loss_sum += hooks.train_batch(batch, rng);
            clip_grad_norm(params, cfg.clip_norm);
            for (auto* opt : optimizers)
                opt->step();
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(batches.size()));

        const double val = hooks.validate();
        hist.val_loss.push_back(val);
        const auto decision = stopper.update(val);
        if (stopper.last_improved()) {
            best = snapshot(params, buffers);
            hist.best_epoch = epoch;
            hist.best_val = val;
        }
        hist.best_val_so_far.push_back(hist.best_val);
        if (cfg.use_plateau) {
            const double old_lr = optimizers.front()->lr();
            const double new_lr = plateau.step(old_lr, val);
            if (new_lr != old_lr)
                for (auto* opt : optimizers)
                    opt->set_lr(std::max(opt->lr() * (new_lr / old_lr), cfg.plateau.min_lr));
        }
        if (decision == EarlyStopping::Decision::Stop) {
            hist.stopped_early = true;
            break;
        }
    }
    restore(best, params, buffers);
    return hist;
}

} // namespace gamenet::nn
