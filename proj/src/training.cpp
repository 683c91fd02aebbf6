#include "twsf/training.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "twsf/textio.hpp"

namespace twsf {

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    const Tensor diff = sub(pred, target);
    return mean(mul(diff, diff));
}

double window_mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("window_mse: shape mismatch");
    double s = 0.0;
    const auto p = pred.values();
    const auto t = target.values();
    for (size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        s += d * d;
    }
    return s / static_cast<double>(p.size());
}

double window_mae(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) throw ShapeError("window_mae: shape mismatch");
    double s = 0.0;
    const auto p = pred.values();
    const auto t = target.values();
    for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]);
    return s / static_cast<double>(p.size());
}

AdamState AdamState::make(std::vector<std::pair<std::string, Tensor>>& params, double lr) {
    AdamState st;
    st.lr = lr;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (auto& [name, t] : params) {
        st.m.emplace_back(static_cast<size_t>(t.numel()), 0.0);
        st.v.emplace_back(static_cast<size_t>(t.numel()), 0.0);
    }
    return st;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& st) {
    if (st.m.size() != params.size())
        throw ContractError("adam_step: state does not match parameter count");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (size_t p = 0; p < params.size(); ++p) {
        auto& [name, t] = params[p];
        const auto g = t.grad();
        if (g.size() != static_cast<size_t>(t.numel()))
            throw ContractError("adam_step: '" + name + "' has no gradient");
        auto vals = t.mutable_values();
        auto& m = st.m[p];
        auto& v = st.v[p];
        for (size_t i = 0; i < vals.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("adam_step: non-finite gradient in '" + name + "'");
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            vals[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

std::string stop_reason_str(StopReason r) {
    switch (r) {
        case StopReason::kCompleted: return "completed";
        case StopReason::kEarlyStopped: return "early_stopped";
        case StopReason::kAborted: return "aborted";
    }
    return "unknown";
}

void write_train_log(std::ostream& os, const TrainReport& report) {
    os << "epoch\ttrain_mse\tval_mse\n";
    for (size_t e = 0; e < report.epochs.size(); ++e)
        os << (e + 1) << "\t" << fmt_g17(report.epochs[e].train_mse) << "\t"
           << fmt_g17(report.epochs[e].val_mse) << "\n";
    os << "# best_epoch " << report.best_epoch << "\n";
    os << "# stop " << stop_reason_str(report.stop_reason) << "\n";
}

double evaluate_mse(const ForecasterParams& params, const RunConfig& config,
                    const SampleSet& samples, const TwsWhitener* whitener) {
    if (samples.empty()) throw ContractError("evaluate_mse: empty sample set");
    double total = 0.0;
    for (int64_t i = 0; i < samples.size(); ++i) {
        const ForecastSample s = samples.get(i);
        const Tensor pred = forecast(params, s, whitener, config, nullptr, /*training=*/false);
        total += window_mse(pred, s.target);
    }
    return total / static_cast<double>(samples.size());
}

TrainResult train(const RunConfig& config, const SampleSet& train_samples,
                  const SampleSet& val_samples, const TwsWhitener* whitener) {
    config.validate();
    if (train_samples.empty() || val_samples.empty())
        throw ContractError("train: train and validation sample sets must be non-empty");

    CounterRng init_rng(derive_seed(config.seed, 0));
    CounterRng shuffle_rng(derive_seed(config.seed, 1));
    CounterRng dropout_rng(derive_seed(config.seed, 2));

    ForecasterParams params = ForecasterParams::init(config, init_rng);
    params.set_requires_grad(true);
    auto named = params.named_tensors();
    AdamState adam = AdamState::make(named, config.lr);

    TrainReport report;
    ForecasterParams best_params = params.clone();
    EarlyStopper stopper(config.patience);
    report.stop_reason = StopReason::kCompleted;

    const int64_t n_train = train_samples.size();
    for (int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = shuffled_indices(n_train, shuffle_rng);
        double epoch_loss_sum = 0.0;
        bool aborted = false;

        for (int64_t start = 0; start < n_train; start += config.batch) {
            const int64_t bsz = std::min(config.batch, n_train - start);
            params.zero_grad();
            double batch_loss_value;
            {
                Tape tape;
                std::vector<Tensor> losses;
                losses.reserve(static_cast<size_t>(bsz));
                for (int64_t b = 0; b < bsz; ++b) {
                    const ForecastSample s =
                        train_samples.get(order[static_cast<size_t>(start + b)]);
                    const Tensor pred =
                        forecast(params, s, whitener, config, &dropout_rng, /*training=*/true);
                    losses.push_back(mse_loss(pred, s.target));
                }
                const Tensor batch_loss = mean(concat(losses, 0));
                batch_loss_value = batch_loss.item();
                if (!std::isfinite(batch_loss_value)) {
                    aborted = true;
                    break;
                }
                tape.backward(batch_loss);
            }
            try {
                adam_step(named, adam);
            } catch (const NumericError&) {
                aborted = true;
                break;
            }
            epoch_loss_sum += batch_loss_value * static_cast<double>(bsz);
        }
        if (aborted) {
            report.stop_reason = StopReason::kAborted;
            break;
        }

        const double train_mse = epoch_loss_sum / static_cast<double>(n_train);
        const double val_mse = evaluate_mse(params, config, val_samples, whitener);
        report.epochs.push_back({train_mse, val_mse});

        const bool was_best = val_mse < stopper.best();
        const bool stop = stopper.update(val_mse);
        if (was_best) best_params = params.clone();
        if (stop) {
            report.stop_reason = StopReason::kEarlyStopped;
            break;
        }
    }

    if (stopper.best_epoch() == 0) {
        // Aborted before any finished epoch: keep the last parameter state.
        best_params = params.clone();
    }
    report.best_epoch = stopper.best_epoch();
    report.best_val_mse = stopper.best();

    TrainResult result;
    result.report = report;
    result.best.config = config;
    result.best.params = std::move(best_params);
    result.best.params.set_requires_grad(false);
    if (whitener) result.best.whitener = *whitener;
    return result;
}

}  // namespace twsf
