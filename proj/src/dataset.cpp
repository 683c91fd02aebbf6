#include "twsf/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace twsf {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string dataset_name_from_path(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    size_t dot = stem.find_last_of('.');
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    return stem;
}

TimeSeriesDataset load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("csv: cannot open: " + path);

    std::string header;
    if (!std::getline(is, header)) throw ParseError("csv: empty file: " + path);
    if (!header.empty() && static_cast<unsigned char>(header[0]) == 0xEF && header.size() >= 3)
        header = header.substr(3);  // UTF-8 BOM

    const auto names = split_fields(header);
    if (names.empty() || names[0] != "date")
        throw ParseError("csv: first header column must be 'date', got '" +
                         (names.empty() ? std::string() : names[0]) + "'");
    const size_t n_features = names.size() - 1;
    if (n_features == 0) throw ParseError("csv: no feature columns");

    std::vector<std::vector<double>> columns(n_features);
    std::string line;
    int64_t row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() && is.eof()) break;
        const auto fields = split_fields(line);
        if (fields.size() != names.size())
            throw ParseError("csv: row " + std::to_string(row) + ": expected " +
                             std::to_string(names.size()) + " fields, got " +
                             std::to_string(fields.size()));
        for (size_t c = 1; c < fields.size(); ++c) {
            const std::string& f = fields[c];
            if (f.empty())
                throw ParseError("csv: row " + std::to_string(row) + ", column '" + names[c] +
                                 "': empty cell");
            const char* p = f.c_str();
            char* end = nullptr;
            double v = std::strtod(p, &end);
            if (end == p || *end != '\0' || !std::isfinite(v))
                throw ParseError("csv: row " + std::to_string(row) + ", column '" + names[c] +
                                 "': bad value '" + f + "'");
            columns[c - 1].push_back(v);
        }
    }
    if (row == 0) throw ParseError("csv: no data rows in " + path);

    TimeSeriesDataset ds;
    ds.name = dataset_name_from_path(path);
    const std::string lower = to_lower(ds.name);
    if (lower.find("etth") != std::string::npos) ds.frequency = "hourly";
    else if (lower.find("ettm") != std::string::npos) ds.frequency = "15min";
    else if (lower.find("weather") != std::string::npos) ds.frequency = "10min";
    else if (lower.find("traffic") != std::string::npos ||
             lower.find("electricity") != std::string::npos || lower.find("ecl") != std::string::npos)
        ds.frequency = "hourly";
    ds.feature_names.assign(names.begin() + 1, names.end());
    const int64_t t_total = row;
    const int64_t c_total = static_cast<int64_t>(n_features);
    ds.values = Tensor::zeros({c_total, t_total});
    for (int64_t c = 0; c < c_total; ++c)
        for (int64_t t = 0; t < t_total; ++t)
            ds.values.at(c, t) = columns[static_cast<size_t>(c)][static_cast<size_t>(t)];
    return ds;
}

SplitSpec protocol_split(const std::string& dataset_name, int64_t t_total) {
    const std::string lower = to_lower(dataset_name);
    SplitSpec s;
    if (lower.find("etth") != std::string::npos) {
        s = {12 * 30 * 24, 4 * 30 * 24, 4 * 30 * 24};
    } else if (lower.find("ettm") != std::string::npos) {
        s = {12 * 30 * 24 * 4, 4 * 30 * 24 * 4, 4 * 30 * 24 * 4};
    } else {
        s.train_n = static_cast<int64_t>(static_cast<double>(t_total) * 0.7);
        s.test_n = static_cast<int64_t>(static_cast<double>(t_total) * 0.2);
        s.val_n = t_total - s.train_n - s.test_n;
    }
    if (s.train_n + s.val_n + s.test_n > t_total)
        throw ContractError("split: dataset " + dataset_name + " has " + std::to_string(t_total) +
                            " steps, protocol needs " +
                            std::to_string(s.train_n + s.val_n + s.test_n));
    return s;
}

int64_t SeriesView::window_count(int64_t window) const {
    const int64_t c = length() - window + 1;
    return c > 0 ? c : 0;
}

std::array<SeriesView, 3> split(const TimeSeriesDataset& ds, const SplitSpec& spec,
                                int64_t lookback) {
    if (spec.train_n <= 0 || spec.val_n < 0 || spec.test_n < 0)
        throw ContractError("split: non-positive segment lengths");
    if (spec.train_n + spec.val_n + spec.test_n > ds.length())
        throw ContractError("split: segments exceed series length " +
                            std::to_string(ds.length()));
    if (lookback > spec.train_n)
        throw ContractError("split: lookback longer than the training segment");
    const int64_t b1 = spec.train_n;
    const int64_t b2 = spec.train_n + spec.val_n;
    const int64_t b3 = spec.train_n + spec.val_n + spec.test_n;
    return {SeriesView{&ds, 0, b1},
            SeriesView{&ds, b1 - lookback, b2},
            SeriesView{&ds, b2 - lookback, b3}};
}

SampleSet::SampleSet(SeriesView view, int64_t lookback, int64_t exo_lookback, int64_t horizon,
                     int64_t stride)
    : view_(view), lookback_(lookback), exo_lookback_(exo_lookback), horizon_(horizon),
      stride_(stride) {
    if (lookback <= 0 || horizon <= 0 || stride <= 0)
        throw ContractError("samples: lookback/horizon/stride must be positive");
    if (exo_lookback <= 0 || exo_lookback > lookback)
        throw ContractError("samples: exogenous lookback must be in (0, lookback]");
    const int64_t usable = view.length() - lookback - horizon + 1;
    count_ = usable > 0 ? (usable - 1) / stride + 1 : 0;
}

ForecastSample SampleSet::get(int64_t i) const {
    if (i < 0 || i >= count_) throw ContractError("samples: index out of range");
    const int64_t t0 = i * stride_;
    const int64_t c = view_.channels();

    ForecastSample s;
    s.window_start = t0;
    s.endogenous = Tensor::zeros({c, lookback_});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t t = 0; t < lookback_; ++t) s.endogenous.at(ch, t) = view_.at(ch, t0 + t);

    // Exogenous window: the last exo_lookback steps before the forecast
    // origin, so no value later than t0 + lookback - 1 ever enters.
    const int64_t e0 = t0 + lookback_ - exo_lookback_;
    s.exogenous = Tensor::zeros({c, exo_lookback_});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t t = 0; t < exo_lookback_; ++t) s.exogenous.at(ch, t) = view_.at(ch, e0 + t);

    s.target = Tensor::zeros({c, horizon_});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t t = 0; t < horizon_; ++t)
            s.target.at(ch, t) = view_.at(ch, t0 + lookback_ + t);
    return s;
}

SampleSet make_samples(const SeriesView& view, int64_t lookback, int64_t exo_lookback,
                       int64_t horizon, int64_t stride) {
    return SampleSet(view, lookback, exo_lookback, horizon, stride);
}

std::pair<Tensor, InstanceNormState> instance_normalize(const Tensor& x) {
    if (x.ndim() != 2) throw ShapeError("instance_normalize: rank-2 expected");
    const int64_t c = x.rows(), len = x.cols();
    InstanceNormState st;
    st.mean.resize(static_cast<size_t>(c));
    st.std.resize(static_cast<size_t>(c));
    Tensor out = Tensor::zeros({c, len});
    constexpr double kStdFloor = 1e-5;
    for (int64_t ch = 0; ch < c; ++ch) {
        double m = 0.0;
        for (int64_t t = 0; t < len; ++t) m += x(ch, t);
        m /= static_cast<double>(len);
        double var = 0.0;
        for (int64_t t = 0; t < len; ++t) var += (x(ch, t) - m) * (x(ch, t) - m);
        var /= static_cast<double>(len);
        const double sd = std::max(std::sqrt(var), kStdFloor);
        st.mean[static_cast<size_t>(ch)] = m;
        st.std[static_cast<size_t>(ch)] = sd;
        for (int64_t t = 0; t < len; ++t) out.at(ch, t) = (x(ch, t) - m) / sd;
    }
    return {std::move(out), std::move(st)};
}

Tensor denormalize(const Tensor& pred, const InstanceNormState& state) {
    if (pred.ndim() != 2 || pred.rows() != static_cast<int64_t>(state.mean.size()))
        throw ShapeError("denormalize: channel count mismatch");
    const int64_t c = pred.rows(), len = pred.cols();
    Tensor out = Tensor::zeros({c, len});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t t = 0; t < len; ++t)
            out.at(ch, t) = pred(ch, t) * state.std[static_cast<size_t>(ch)] +
                            state.mean[static_cast<size_t>(ch)];
    return out;
}

StandardizeStats standardize(TimeSeriesDataset& ds, int64_t train_n) {
    if (train_n < 2 || train_n > ds.length())
        throw ContractError("standardize: bad training length " + std::to_string(train_n));
    const int64_t c = ds.channels(), t_total = ds.length();
    StandardizeStats st;
    st.mean.resize(static_cast<size_t>(c));
    st.std.resize(static_cast<size_t>(c));
    for (int64_t ch = 0; ch < c; ++ch) {
        double m = 0.0;
        for (int64_t t = 0; t < train_n; ++t) m += ds.values(ch, t);
        m /= static_cast<double>(train_n);
        double var = 0.0;
        for (int64_t t = 0; t < train_n; ++t)
            var += (ds.values(ch, t) - m) * (ds.values(ch, t) - m);
        var /= static_cast<double>(train_n);
        double sd = std::sqrt(var);
        if (sd == 0.0) sd = 1.0;  // constant feature stays constant (at zero)
        st.mean[static_cast<size_t>(ch)] = m;
        st.std[static_cast<size_t>(ch)] = sd;
        for (int64_t t = 0; t < t_total; ++t)
            ds.values.at(ch, t) = (ds.values(ch, t) - m) / sd;
    }
    return st;
}

}  // namespace twsf
