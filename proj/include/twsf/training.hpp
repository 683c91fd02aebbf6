#pragma once

#include <iosfwd>
#include <limits>

#include "twsf/model.hpp"

namespace twsf {

// Mean of squared elementwise differences over all channels and horizon
// steps; differentiable through the tape.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Plain (non-graph) metric helpers over one window.
double window_mse(const Tensor& pred, const Tensor& target);
double window_mae(const Tensor& pred, const Tensor& target);

// Adam moments, one slot per parameter in named order. Bias-corrected
// update with the cited defaults.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-4;
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState make(std::vector<std::pair<std::string, Tensor>>& params, double lr);
};

// Applies one update from the gradients currently on the parameters.
// Throws NumericError (naming the parameter) on a non-finite gradient.
void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state);

enum class StopReason { kCompleted, kEarlyStopped, kAborted };

std::string stop_reason_str(StopReason r);

// Strict-improvement early stopping: equal validation loss counts as no
// improvement; stops after `patience` consecutive non-improving epochs.
class EarlyStopper {
public:
    explicit EarlyStopper(int64_t patience) : patience_(patience) {}

    // Returns true when training should stop after this epoch.
    bool update(double val_loss) {
        ++epoch_;
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            stale_ = 0;
            return false;
        }
        return ++stale_ >= patience_;
    }

    double best() const { return best_; }
    int64_t best_epoch() const { return best_epoch_; }

private:
    int64_t patience_;
    int64_t epoch_ = 0;
    int64_t stale_ = 0;
    int64_t best_epoch_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

struct EpochStats {
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int64_t best_epoch = 0;  // 1-based
    double best_val_mse = 0.0;
    StopReason stop_reason = StopReason::kCompleted;
};

// epoch, train_mse, val_mse as a delimited text log.
void write_train_log(std::ostream& os, const TrainReport& report);

struct TrainResult {
    Checkpoint best;
    TrainReport report;
};

// Adam + early stopping: at most config.epochs epochs, stop after
// config.patience consecutive epochs without strict validation improvement,
// return the parameters of the best validation epoch. Batches are shuffled
// per epoch with a seeded generator; the whole trajectory is bit-identical
// for a fixed (seed, config, data). A non-finite loss aborts, preserving
// the best checkpoint so far.
TrainResult train(const RunConfig& config, const SampleSet& train_samples,
                  const SampleSet& val_samples, const TwsWhitener* whitener);

// Mean per-window MSE over a sample set in eval mode.
double evaluate_mse(const ForecasterParams& params, const RunConfig& config,
                    const SampleSet& samples, const TwsWhitener* whitener);

}  // namespace twsf
