#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace twsf {

enum class Bridging { kConcat, kCross };

std::string bridging_str(Bridging b);
Bridging bridging_from_str(const std::string& s);

// Every experiment knob. Defaults follow the common configuration of this
// encoder family; all of them are overridable from a config file or the CLI.
struct RunConfig {
    int64_t lookback = 96;
    int64_t horizon = 96;
    int64_t patch_len = 16;
    int64_t d_model = 128;
    int64_t heads = 8;
    int64_t blocks = 2;
    double dropout = 0.1;
    Bridging bridging = Bridging::kCross;
    bool tws_enabled = true;
    double threshold = 0.90;
    uint64_t seed = 1;
    double lr = 1e-4;
    int64_t batch = 32;
    int64_t epochs = 10;
    int64_t patience = 3;

    int64_t patch_count() const { return lookback / patch_len; }
    int64_t exo_lookback() const { return lookback; }

    // Throws ContractError on inconsistent knobs (indivisible lookback,
    // heads not dividing d_model, ...).
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

// Flat key=value text, one entry per line, '#' comments. Unknown keys are
// errors. Keys mirror the field names: lookback, horizon, patch_len,
// d_model, heads, blocks, dropout, bridging, tws, threshold, seed, lr,
// batch, epochs, patience.
RunConfig parse_config(std::istream& is, RunConfig base = {});
RunConfig parse_config_file(const std::string& path, RunConfig base = {});
void write_config(std::ostream& os, const RunConfig& c);

// Names of fields that differ; used to assert ablation cells vary only in
// their declared knobs.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

}  // namespace twsf
