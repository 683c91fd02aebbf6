#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "twsf/evaluation.hpp"

namespace {

using namespace twsf;

// Common experiment knobs, bound to every subcommand that trains or
// evaluates. CLI flags override config-file values, which override
// defaults.
struct CommonFlags {
    uint64_t seed = 1;
    int64_t lookback = 96;
    int64_t patch_len = 16;
    int64_t d_model = 128;
    int64_t heads = 8;
    int64_t blocks = 2;
    double dropout = 0.1;
    double lr = 1e-4;
    int64_t batch = 32;
    int64_t epochs = 10;
    int64_t patience = 3;
    double threshold = 0.90;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "base RNG seed");
    cmd->add_option("--lookback", f.lookback, "lookback window length");
    cmd->add_option("--patch-len", f.patch_len, "endogenous patch length");
    cmd->add_option("--d-model", f.d_model, "embedding width");
    cmd->add_option("--heads", f.heads, "attention heads");
    cmd->add_option("--blocks", f.blocks, "encoder blocks");
    cmd->add_option("--dropout", f.dropout, "dropout rate");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--batch", f.batch, "batch size");
    cmd->add_option("--epochs", f.epochs, "max epochs");
    cmd->add_option("--patience", f.patience, "early-stopping patience");
    cmd->add_option("--threshold", f.threshold, "whitening variance threshold");
}

void apply_common_flags(const CLI::App* cmd, const CommonFlags& f, RunConfig& cfg) {
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (cmd->count("--lookback")) cfg.lookback = f.lookback;
    if (cmd->count("--patch-len")) cfg.patch_len = f.patch_len;
    if (cmd->count("--d-model")) cfg.d_model = f.d_model;
    if (cmd->count("--heads")) cfg.heads = f.heads;
    if (cmd->count("--blocks")) cfg.blocks = f.blocks;
    if (cmd->count("--dropout")) cfg.dropout = f.dropout;
    if (cmd->count("--lr")) cfg.lr = f.lr;
    if (cmd->count("--batch")) cfg.batch = f.batch;
    if (cmd->count("--epochs")) cfg.epochs = f.epochs;
    if (cmd->count("--patience")) cfg.patience = f.patience;
    if (cmd->count("--threshold")) cfg.threshold = f.threshold;
}

Tensor view_matrix(const SeriesView& view) {
    Tensor m = Tensor::zeros({view.channels(), view.length()});
    for (int64_t c = 0; c < view.channels(); ++c)
        for (int64_t t = 0; t < view.length(); ++t) m.at(c, t) = view.at(c, t);
    return m;
}

int run_fit_tws(const std::string& data, double threshold, const std::string& projection,
                const std::string& out) {
    TimeSeriesDataset ds = load_csv(data);
    const SplitSpec spec = protocol_split(ds.name, ds.length());
    standardize(ds, spec.train_n);
    SeriesView train_view{&ds, 0, spec.train_n};
    const TwsWhitener w =
        TwsWhitener::fit(view_matrix(train_view), threshold, projection == "centered");
    w.save_file(out);
    std::cout << "fitted whitener on " << ds.name << ": n=" << w.feature_count()
              << " k=" << w.k() << " captured=" << w.captured_variance_ratio()
              << (w.degenerate() ? " (degenerate)" : "") << " -> " << out << "\n";
    return 0;
}

int run_train(RunConfig cfg, const std::string& data, const std::string& whitener_path,
              const std::string& out) {
    cfg.validate();
    Pipeline pipe = Pipeline::make(data, cfg.lookback);

    std::optional<TwsWhitener> whitener;
    std::string whitener_ref;
    if (cfg.tws_enabled) {
        if (!whitener_path.empty()) {
            whitener = TwsWhitener::load_file(whitener_path);
            whitener_ref = whitener_path;
        } else {
            whitener = TwsWhitener::fit(view_matrix(pipe.train_view()), cfg.threshold);
            whitener_ref = "fit:" + pipe.dataset.name;
        }
    }

    const SampleSet train_set =
        make_samples(pipe.train_view(), cfg.lookback, cfg.exo_lookback(), cfg.horizon);
    const SampleSet val_set =
        make_samples(pipe.val_view(), cfg.lookback, cfg.exo_lookback(), cfg.horizon);
    std::cout << "training on " << pipe.dataset.name << ": " << train_set.size()
              << " train / " << val_set.size() << " val samples, H=" << cfg.horizon << "\n";

    TrainResult result = train(cfg, train_set, val_set, whitener ? &*whitener : nullptr);
    result.best.whitener_ref = whitener_ref;
    save_checkpoint(out, result.best);

    write_train_log(std::cout, result.report);
    std::ofstream log(out + ".log");
    write_train_log(log, result.report);
    std::cout << "checkpoint -> " << out << "\n";
    return 0;
}

int run_evaluate(const std::string& checkpoint_path, const std::string& data,
                 const std::string& split_name) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Pipeline pipe = Pipeline::make(data, ckpt.config.lookback);
    const SampleSet samples = make_samples(pipe.view_for(split_name), ckpt.config.lookback,
                                           ckpt.config.exo_lookback(), ckpt.config.horizon);
    const EvalResult r = evaluate(ckpt, samples, pipe.dataset.name);
    std::cout << "dataset=" << r.dataset << " split=" << split_name << " horizon=" << r.horizon
              << " bridging=" << bridging_str(r.bridging) << " tws=" << (r.tws ? "on" : "off")
              << " mse=" << r.mse << " mae=" << r.mae << " samples=" << r.samples
              << " wall_s=" << r.wall_seconds << "\n";
    return 0;
}

int run_ablate(RunConfig base, const std::string& data, const std::vector<int64_t>& horizons,
               const std::string& out_dir) {
    AblationSpec spec;
    spec.data_path = data;
    spec.horizons = horizons;
    spec.base = base;
    spec.out_dir = out_dir;
    const auto results = run_ablation(spec);
    std::cout << format_report(results);
    std::cout << "results -> " << out_dir << "/results.tsv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-series forecaster with PCA-whitened exogenous windows"};
    app.require_subcommand(1);

    // fit-tws
    auto* fit_cmd = app.add_subcommand("fit-tws", "fit a whitener on the training split");
    std::string fit_data, fit_out, fit_projection = "centered";
    double fit_threshold = 0.90;
    fit_cmd->add_option("--data", fit_data, "dataset CSV")->required();
    fit_cmd->add_option("--threshold", fit_threshold, "cumulative variance threshold");
    fit_cmd->add_option("--projection", fit_projection, "centered|literal")
        ->check(CLI::IsMember({"centered", "literal"}));
    fit_cmd->add_option("--out", fit_out, "whitener output path")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train one forecaster");
    std::string train_data, train_whitener, train_config, train_out = "model.ckpt";
    std::string train_bridging = "cross", train_tws = "on";
    int64_t train_horizon = 96;
    CommonFlags train_flags;
    train_cmd->add_option("--data", train_data, "dataset CSV")->required();
    train_cmd->add_option("--horizon", train_horizon, "forecast horizon");
    train_cmd->add_option("--bridging", train_bridging, "cross|concat")
        ->check(CLI::IsMember({"cross", "concat"}));
    train_cmd->add_option("--tws", train_tws, "on|off")->check(CLI::IsMember({"on", "off"}));
    train_cmd->add_option("--whitener", train_whitener, "whitener artifact (fit if omitted)");
    train_cmd->add_option("--config", train_config, "key=value config file");
    train_cmd->add_option("--out", train_out, "checkpoint output path");
    add_common_flags(train_cmd, train_flags);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a split");
    std::string eval_checkpoint, eval_data, eval_split = "test";
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset CSV")->required();
    eval_cmd->add_option("--split", eval_split, "train|val|test")
        ->check(CLI::IsMember({"train", "val", "test"}));

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the bridging x whitening matrix");
    std::string ablate_data, ablate_config, ablate_out = "ablation";
    std::vector<int64_t> ablate_horizons = {96, 192, 336, 720};
    std::string ablate_base_bridging;  // fixed per cell; flag kept out on purpose
    CommonFlags ablate_flags;
    ablate_cmd->add_option("--data", ablate_data, "dataset CSV")->required();
    ablate_cmd->add_option("--horizons", ablate_horizons, "comma-separated horizons")
        ->delimiter(',');
    ablate_cmd->add_option("--config", ablate_config, "key=value config file");
    ablate_cmd->add_option("--out", ablate_out, "output directory");
    add_common_flags(ablate_cmd, ablate_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit_cmd->parsed())
            return run_fit_tws(fit_data, fit_threshold, fit_projection, fit_out);
        if (train_cmd->parsed()) {
            RunConfig cfg;
            if (!train_config.empty()) cfg = twsf::parse_config_file(train_config, cfg);
            if (train_cmd->count("--horizon")) cfg.horizon = train_horizon;
            if (train_cmd->count("--bridging")) cfg.bridging = bridging_from_str(train_bridging);
            if (train_cmd->count("--tws")) cfg.tws_enabled = train_tws == "on";
            apply_common_flags(train_cmd, train_flags, cfg);
            return run_train(cfg, train_data, train_whitener, train_out);
        }
        if (eval_cmd->parsed()) return run_evaluate(eval_checkpoint, eval_data, eval_split);
        if (ablate_cmd->parsed()) {
            RunConfig base;
            if (!ablate_config.empty()) base = twsf::parse_config_file(ablate_config, base);
            apply_common_flags(ablate_cmd, ablate_flags, base);
            return run_ablate(base, ablate_data, ablate_horizons, ablate_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
