#include "twsf/config.hpp"

#include <fstream>
#include <sstream>

#include "twsf/errors.hpp"
#include "twsf/textio.hpp"

namespace twsf {

std::string bridging_str(Bridging b) { return b == Bridging::kCross ? "cross" : "concat"; }

Bridging bridging_from_str(const std::string& s) {
    if (s == "cross") return Bridging::kCross;
    if (s == "concat") return Bridging::kConcat;
    throw ContractError("bridging must be 'cross' or 'concat', got '" + s + "'");
}

void RunConfig::validate() const {
    if (lookback <= 0 || horizon <= 0 || patch_len <= 0)
        throw ContractError("config: lookback/horizon/patch_len must be positive");
    if (lookback % patch_len != 0)
        throw ContractError("config: lookback " + std::to_string(lookback) +
                            " not divisible by patch_len " + std::to_string(patch_len));
    if (d_model <= 0 || heads <= 0 || blocks <= 0)
        throw ContractError("config: d_model/heads/blocks must be positive");
    if (d_model % heads != 0)
        throw ContractError("config: heads " + std::to_string(heads) + " must divide d_model " +
                            std::to_string(d_model));
    if (dropout < 0.0 || dropout >= 1.0) throw ContractError("config: dropout must be in [0, 1)");
    if (threshold <= 0.0 || threshold > 1.0)
        throw ContractError("config: threshold must be in (0, 1]");
    if (lr <= 0.0) throw ContractError("config: lr must be positive");
    if (batch <= 0 || epochs <= 0 || patience <= 0)
        throw ContractError("config: batch/epochs/patience must be positive");
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void apply_kv(RunConfig& c, const std::string& key, const std::string& val) {
    if (key == "lookback") c.lookback = parse_int(val, "lookback");
    else if (key == "horizon") c.horizon = parse_int(val, "horizon");
    else if (key == "patch_len") c.patch_len = parse_int(val, "patch_len");
    else if (key == "d_model") c.d_model = parse_int(val, "d_model");
    else if (key == "heads") c.heads = parse_int(val, "heads");
    else if (key == "blocks") c.blocks = parse_int(val, "blocks");
    else if (key == "dropout") c.dropout = parse_double(val, "dropout");
    else if (key == "bridging") c.bridging = bridging_from_str(val);
    else if (key == "tws") {
        if (val == "on") c.tws_enabled = true;
        else if (val == "off") c.tws_enabled = false;
        else throw ContractError("config: tws must be 'on' or 'off', got '" + val + "'");
    }
    else if (key == "threshold") c.threshold = parse_double(val, "threshold");
    else if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(val, "seed"));
    else if (key == "lr") c.lr = parse_double(val, "lr");
    else if (key == "batch") c.batch = parse_int(val, "batch");
    else if (key == "epochs") c.epochs = parse_int(val, "epochs");
    else if (key == "patience") c.patience = parse_int(val, "patience");
    else throw ContractError("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig parse_config(std::istream& is, RunConfig base) {
    std::string line;
    int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
        apply_kv(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw ParseError("config: cannot open: " + path);
    return parse_config(is, base);
}

void write_config(std::ostream& os, const RunConfig& c) {
    os << "lookback=" << c.lookback << "\n";
    os << "horizon=" << c.horizon << "\n";
    os << "patch_len=" << c.patch_len << "\n";
    os << "d_model=" << c.d_model << "\n";
    os << "heads=" << c.heads << "\n";
    os << "blocks=" << c.blocks << "\n";
    os << "dropout=" << fmt_g17(c.dropout) << "\n";
    os << "bridging=" << bridging_str(c.bridging) << "\n";
    os << "tws=" << (c.tws_enabled ? "on" : "off") << "\n";
    os << "threshold=" << fmt_g17(c.threshold) << "\n";
    os << "seed=" << c.seed << "\n";
    os << "lr=" << fmt_g17(c.lr) << "\n";
    os << "batch=" << c.batch << "\n";
    os << "epochs=" << c.epochs << "\n";
    os << "patience=" << c.patience << "\n";
}

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
    std::vector<std::string> d;
    if (a.lookback != b.lookback) d.push_back("lookback");
    if (a.horizon != b.horizon) d.push_back("horizon");
    if (a.patch_len != b.patch_len) d.push_back("patch_len");
    if (a.d_model != b.d_model) d.push_back("d_model");
    if (a.heads != b.heads) d.push_back("heads");
    if (a.blocks != b.blocks) d.push_back("blocks");
    if (a.dropout != b.dropout) d.push_back("dropout");
    if (a.bridging != b.bridging) d.push_back("bridging");
    if (a.tws_enabled != b.tws_enabled) d.push_back("tws");
    if (a.threshold != b.threshold) d.push_back("threshold");
    if (a.seed != b.seed) d.push_back("seed");
    if (a.lr != b.lr) d.push_back("lr");
    if (a.batch != b.batch) d.push_back("batch");
    if (a.epochs != b.epochs) d.push_back("epochs");
    if (a.patience != b.patience) d.push_back("patience");
    return d;
}

}  // namespace twsf
