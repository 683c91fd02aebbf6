#pragma once

#include <array>
#include <string>

#include "twsf/tensor.hpp"

namespace twsf {

// Multivariate series loaded column-major in time: values is
// [C_total x T_total], row per feature. Missing or non-numeric cells are
// load errors, never silently imputed.
struct TimeSeriesDataset {
    std::string name;
    std::vector<std::string> feature_names;
    Tensor values;  // C_total x T_total
    std::string frequency;
    // Chronological split bounds, filled once a split is chosen.
    int64_t train_end = 0;
    int64_t val_end = 0;

    int64_t channels() const { return values.rows(); }
    int64_t length() const { return values.cols(); }
};

// CSV: UTF-8, comma-separated, header row whose first column is "date",
// remaining columns numeric. Parse errors carry row/column locations.
TimeSeriesDataset load_csv(const std::string& path);

// Raw segment lengths for the chronological train/val/test split.
struct SplitSpec {
    int64_t train_n = 0;
    int64_t val_n = 0;
    int64_t test_n = 0;
};

// Benchmark split convention, selected by dataset name: hourly ETT files
// use fixed 8640/2880/2880 borders, minute-level ETT 34560/11520/11520,
// everything else 70%/10%/20% of the full length.
SplitSpec protocol_split(const std::string& dataset_name, int64_t t_total);

// Contiguous column range of a dataset. Later splits reach back `lookback`
// steps into earlier data for window context only.
struct SeriesView {
    const TimeSeriesDataset* ds = nullptr;
    int64_t begin = 0;  // inclusive column index
    int64_t end = 0;    // exclusive

    int64_t length() const { return end - begin; }
    int64_t channels() const { return ds->channels(); }
    double at(int64_t channel, int64_t t) const { return ds->values(channel, begin + t); }
    // Number of length-`window` windows; matches the published split sizes
    // when window = lookback.
    int64_t window_count(int64_t window) const;
};

std::array<SeriesView, 3> split(const TimeSeriesDataset& ds, const SplitSpec& spec,
                                int64_t lookback);

// One supervised example. The target starts immediately after the lookback
// window; exogenous values never extend past the forecast origin.
struct ForecastSample {
    Tensor endogenous;  // C x L
    Tensor exogenous;   // N x L_ex
    Tensor target;      // C x H
    int64_t window_start = 0;  // time index within the view
};

// Lazy, deterministic sequence of sliding-window samples over a view.
// Materializes on demand; an out-of-range view yields an empty set.
class SampleSet {
public:
    SampleSet() = default;
    SampleSet(SeriesView view, int64_t lookback, int64_t exo_lookback, int64_t horizon,
              int64_t stride = 1);

    int64_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    ForecastSample get(int64_t i) const;
    const SeriesView& view() const { return view_; }
    int64_t horizon() const { return horizon_; }

private:
    SeriesView view_;
    int64_t lookback_ = 0, exo_lookback_ = 0, horizon_ = 0, stride_ = 1;
    int64_t count_ = 0;
};

SampleSet make_samples(const SeriesView& view, int64_t lookback, int64_t exo_lookback,
                       int64_t horizon, int64_t stride = 1);

// Per-channel statistics of one window; std has a 1e-5 floor so constant
// channels normalize to zeros and denormalize back exactly.
struct InstanceNormState {
    std::vector<double> mean;
    std::vector<double> std;
};

std::pair<Tensor, InstanceNormState> instance_normalize(const Tensor& x);
Tensor denormalize(const Tensor& pred, const InstanceNormState& state);

// Global standardization with training-split statistics (population std),
// applied in place; the benchmark scoring scale.
struct StandardizeStats {
    std::vector<double> mean;
    std::vector<double> std;
};

StandardizeStats standardize(TimeSeriesDataset& ds, int64_t train_n);

// File stem without extension, e.g. "data/ETTh1.csv" -> "ETTh1".
std::string dataset_name_from_path(const std::string& path);

}  // namespace twsf
