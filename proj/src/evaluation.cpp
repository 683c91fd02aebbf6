#include "twsf/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "twsf/textio.hpp"

namespace twsf {

EvalResult evaluate(const Checkpoint& ckpt, const SampleSet& test_samples,
                    const std::string& dataset_id) {
    if (test_samples.empty()) throw ContractError("evaluate: empty test set");
    const TwsWhitener* whitener = ckpt.whitener ? &*ckpt.whitener : nullptr;

    const auto t0 = std::chrono::steady_clock::now();
    double mse_sum = 0.0, mae_sum = 0.0;
    for (int64_t i = 0; i < test_samples.size(); ++i) {
        const ForecastSample s = test_samples.get(i);
        const Tensor pred = forecast(ckpt.params, s, whitener, ckpt.config, nullptr,
                                     /*training=*/false);
        mse_sum += window_mse(pred, s.target);
        mae_sum += window_mae(pred, s.target);
    }
    const auto t1 = std::chrono::steady_clock::now();

    EvalResult r;
    r.dataset = dataset_id;
    r.horizon = ckpt.config.horizon;
    r.bridging = ckpt.config.bridging;
    r.tws = ckpt.config.tws_enabled;
    r.mse = mse_sum / static_cast<double>(test_samples.size());
    r.mae = mae_sum / static_cast<double>(test_samples.size());
    r.samples = test_samples.size();
    r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    return r;
}

Pipeline Pipeline::make(const std::string& csv_path, int64_t lookback) {
    Pipeline p;
    p.lookback = lookback;
    p.dataset = load_csv(csv_path);
    p.spec = protocol_split(p.dataset.name, p.dataset.length());
    p.stats = standardize(p.dataset, p.spec.train_n);
    p.dataset.train_end = p.spec.train_n;
    p.dataset.val_end = p.spec.train_n + p.spec.val_n;
    // Validates the bounds; the stored views themselves are rebuilt on use.
    static_cast<void>(split(p.dataset, p.spec, lookback));
    return p;
}

SeriesView Pipeline::view_for(const std::string& split_name) const {
    if (split_name == "train") return train_view();
    if (split_name == "val") return val_view();
    if (split_name == "test") return test_view();
    throw ContractError("unknown split '" + split_name + "'");
}

void sort_results(std::vector<EvalResult>& results) {
    std::sort(results.begin(), results.end(), [](const EvalResult& a, const EvalResult& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.horizon != b.horizon) return a.horizon < b.horizon;
        if (a.bridging != b.bridging)
            return bridging_str(a.bridging) < bridging_str(b.bridging);
        return a.tws < b.tws;
    });
}

std::vector<EvalResult> run_ablation(const AblationSpec& spec) {
    namespace fs = std::filesystem;
    if (spec.horizons.empty()) throw ContractError("ablate: no horizons given");
    fs::create_directories(spec.out_dir);

    // Pipeline and whitener are per-dataset, shared by every cell. make_
    // samples only needs the views, which do not depend on the horizon.
    Pipeline pipe = Pipeline::make(spec.data_path, spec.base.lookback);
    const SeriesView train_view = pipe.train_view();
    Tensor train_matrix = Tensor::zeros({train_view.channels(), train_view.length()});
    for (int64_t c = 0; c < train_view.channels(); ++c)
        for (int64_t t = 0; t < train_view.length(); ++t)
            train_matrix.at(c, t) = train_view.at(c, t);
    const TwsWhitener whitener = TwsWhitener::fit(train_matrix, spec.base.threshold);

    std::vector<EvalResult> results;
    int64_t cell_index = 0;
    for (const int64_t horizon : spec.horizons) {
        for (const Bridging bridging : {Bridging::kConcat, Bridging::kCross}) {
            for (const bool tws : {false, true}) {
                RunConfig cfg = spec.base;
                cfg.horizon = horizon;
                cfg.bridging = bridging;
                cfg.tws_enabled = tws;
                cfg.seed = spec.base.seed + static_cast<uint64_t>(cell_index);
                ++cell_index;

                const SampleSet train_set = make_samples(pipe.train_view(), cfg.lookback,
                                                         cfg.exo_lookback(), cfg.horizon);
                const SampleSet val_set = make_samples(pipe.val_view(), cfg.lookback,
                                                       cfg.exo_lookback(), cfg.horizon);
                const SampleSet test_set = make_samples(pipe.test_view(), cfg.lookback,
                                                        cfg.exo_lookback(), cfg.horizon);

                TrainResult tr = train(cfg, train_set, val_set, tws ? &whitener : nullptr);
                tr.best.whitener_ref = tws ? ("fit:" + pipe.dataset.name) : "";

                const std::string cell_name = pipe.dataset.name + "_h" + std::to_string(horizon) +
                                              "_" + bridging_str(bridging) +
                                              (tws ? "_tws" : "_raw");
                std::ofstream log(fs::path(spec.out_dir) / (cell_name + ".log"));
                write_train_log(log, tr.report);

                EvalResult r = evaluate(tr.best, test_set, pipe.dataset.name);
                r.wall_seconds = 0.0;  // timings are not part of the reproducible artifact
                results.push_back(r);
            }
        }
    }

    sort_results(results);
    write_results_file((fs::path(spec.out_dir) / "results.tsv").string(), results);
    std::ofstream report(fs::path(spec.out_dir) / "report.txt");
    report << format_report(results);
    return results;
}

namespace {
constexpr const char* kResultsHeader =
    "dataset\thorizon\tbridging\ttws\tmse\tmae\tsamples\twall_seconds";
}

void write_results_file(const std::string& path, std::vector<EvalResult> results) {
    sort_results(results);
    std::ofstream os(path);
    if (!os) throw ParseError("results: cannot open for write: " + path);
    os << kResultsHeader << "\n";
    for (const auto& r : results) {
        os << r.dataset << "\t" << r.horizon << "\t" << bridging_str(r.bridging) << "\t"
           << (r.tws ? "on" : "off") << "\t" << fmt_g17(r.mse) << "\t" << fmt_g17(r.mae) << "\t"
           << r.samples << "\t" << fmt_g17(r.wall_seconds) << "\n";
    }
}

std::vector<EvalResult> read_results_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("results: cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line != kResultsHeader)
        throw ParseError("results: bad header in " + path);
    std::vector<EvalResult> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string dataset, horizon, bridging, tws, mse, mae, samples, wall;
        if (!std::getline(ss, dataset, '\t') || !std::getline(ss, horizon, '\t') ||
            !std::getline(ss, bridging, '\t') || !std::getline(ss, tws, '\t') ||
            !std::getline(ss, mse, '\t') || !std::getline(ss, mae, '\t') ||
            !std::getline(ss, samples, '\t') || !std::getline(ss, wall, '\t'))
            throw ParseError("results: short row: " + line);
        EvalResult r;
        r.dataset = dataset;
        r.horizon = parse_int(horizon, "horizon");
        r.bridging = bridging_from_str(bridging);
        r.tws = tws == "on";
        r.mse = parse_double(mse, "mse");
        r.mae = parse_double(mae, "mae");
        r.samples = parse_int(samples, "samples");
        r.wall_seconds = parse_double(wall, "wall_seconds");
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_report(const std::vector<EvalResult>& results) {
    std::ostringstream os;
    char buf[160];

    std::vector<std::string> datasets;
    for (const auto& r : results)
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
            datasets.push_back(r.dataset);

    for (const auto& ds : datasets) {
        os << "dataset: " << ds << "\n";
        std::snprintf(buf, sizeof(buf), "%-8s %-4s %8s %12s %12s %9s\n", "bridging", "tws",
                      "horizon", "mse", "mae", "samples");
        os << buf;
        for (const Bridging bridging : {Bridging::kConcat, Bridging::kCross}) {
            for (const bool tws : {false, true}) {
                double mse_sum = 0.0, mae_sum = 0.0;
                int64_t n = 0;
                for (const auto& r : results) {
                    if (r.dataset != ds || r.bridging != bridging || r.tws != tws) continue;
                    std::snprintf(buf, sizeof(buf), "%-8s %-4s %8lld %12.6f %12.6f %9lld\n",
                                  bridging_str(r.bridging).c_str(), r.tws ? "w" : "w/o",
                                  static_cast<long long>(r.horizon), r.mse, r.mae,
                                  static_cast<long long>(r.samples));
                    os << buf;
                    mse_sum += r.mse;
                    mae_sum += r.mae;
                    ++n;
                }
                if (n > 0) {
                    std::snprintf(buf, sizeof(buf), "%-8s %-4s %8s %12.6f %12.6f %9s\n",
                                  bridging_str(bridging).c_str(), tws ? "w" : "w/o", "avg",
                                  mse_sum / static_cast<double>(n),
                                  mae_sum / static_cast<double>(n), "");
                    os << buf;
                }
            }
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace twsf
