#pragma once

#include "twsf/training.hpp"

namespace twsf {

struct EvalResult {
    std::string dataset;
    int64_t horizon = 0;
    Bridging bridging = Bridging::kCross;
    bool tws = false;
    double mse = 0.0;
    double mae = 0.0;
    int64_t samples = 0;
    double wall_seconds = 0.0;

    bool operator==(const EvalResult&) const = default;
};

// MSE/MAE per window (over all channels and horizon steps), averaged
// uniformly over windows. Predictions come out of forecast() already
// denormalized to the (globally standardized) series scale. Empty sample
// sets are errors.
EvalResult evaluate(const Checkpoint& ckpt, const SampleSet& test_samples,
                    const std::string& dataset_id);

// The full per-dataset data flow: load CSV, standardize with train-split
// statistics, split chronologically. Built once and reused across cells.
// Views are derived on demand so they always point at this object.
struct Pipeline {
    TimeSeriesDataset dataset;
    StandardizeStats stats;
    SplitSpec spec;
    int64_t lookback = 96;

    static Pipeline make(const std::string& csv_path, int64_t lookback);

    SeriesView train_view() const { return {&dataset, 0, spec.train_n}; }
    SeriesView val_view() const {
        return {&dataset, spec.train_n - lookback, spec.train_n + spec.val_n};
    }
    SeriesView test_view() const {
        return {&dataset, spec.train_n + spec.val_n - lookback,
                spec.train_n + spec.val_n + spec.test_n};
    }
    SeriesView view_for(const std::string& split_name) const;
};

struct AblationSpec {
    std::string data_path;
    std::vector<int64_t> horizons;
    RunConfig base;
    std::string out_dir;  // results.tsv, report.txt, per-cell train logs
};

// 4 cells per horizon ({concat, cross} x {without, with} whitening), each
// an independent seeded run (seed = base seed + cell index); the whitener
// is fitted once per dataset and reused. wall_seconds is zeroed in the
// returned results so written artifacts are byte-identical across runs;
// per-cell timings go to the human-readable report only via the log.
std::vector<EvalResult> run_ablation(const AblationSpec& spec);

// Machine-readable file: one EvalResult per line, sorted by (dataset,
// horizon, bridging, tws); parses back to identical values.
void write_results_file(const std::string& path, std::vector<EvalResult> results);
std::vector<EvalResult> read_results_file(const std::string& path);

// Aligned text table grouped by bridging and whitening with a horizon
// average row per group.
std::string format_report(const std::vector<EvalResult>& results);

void sort_results(std::vector<EvalResult>& results);

}  // namespace twsf
