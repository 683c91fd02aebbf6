#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "test_support.hpp"
#include "twsf/dataset.hpp"

using namespace twsf;
using namespace twsf::testing;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& name, const std::string& content) {
        path = "/tmp/twsf_test_" + name;
        std::ofstream os(path);
        os << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

TimeSeriesDataset flat_dataset(const std::string& name, int64_t channels, int64_t length) {
    TimeSeriesDataset ds;
    ds.name = name;
    ds.values = Tensor::zeros({channels, length});
    for (int64_t c = 0; c < channels; ++c) ds.feature_names.push_back("f" + std::to_string(c));
    return ds;
}

}  // namespace

TEST_CASE("load_csv: direct transcription of a tiny file") {
    TempCsv f("tiny.csv", "date,a,b\n2020-01-01,1,4\n2020-01-02,2,5\n2020-01-03,3,6\n");
    const TimeSeriesDataset ds = load_csv(f.path);
    CHECK(ds.channels() == 2);
    CHECK(ds.length() == 3);
    CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.values(0, 0) == 1.0);
    CHECK(ds.values(0, 2) == 3.0);
    CHECK(ds.values(1, 1) == 5.0);
}

TEST_CASE("load_csv: parse errors carry locations") {
    TempCsv nan_cell("nan.csv", "date,a,b\n2020-01-01,1,NaN\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(nan_cell.path)),
                         doctest::Contains("column 'b'"), ParseError);

    TempCsv ragged("ragged.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,3\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(ragged.path)), doctest::Contains("row 2"),
                         ParseError);

    TempCsv text_cell("text.csv", "date,a\n2020-01-01,abc\n");
    CHECK_THROWS_AS(static_cast<void>(load_csv(text_cell.path)), ParseError);

    TempCsv no_date("nodate.csv", "time,a\n2020-01-01,1\n");
    CHECK_THROWS_AS(static_cast<void>(load_csv(no_date.path)), ParseError);

    TempCsv empty_cell("empty.csv", "date,a,b\n2020-01-01,1,\n");
    CHECK_THROWS_AS(static_cast<void>(load_csv(empty_cell.path)), ParseError);
}

TEST_CASE("protocol splits reproduce the published window counts at L=96") {
    struct Case {
        const char* name;
        int64_t t_total;
        int64_t train_w, val_w, test_w;
    };
    // Published sizes count length-96 lookback windows per split.
    const Case cases[] = {
        {"ETTh1", 17420, 8545, 2881, 2881},
        {"ETTm1", 69680, 34465, 11521, 11521},
        {"weather", 52696, 36792, 5271, 10540},
        {"electricity", 26304, 18317, 2633, 5261},
        {"traffic", 17544, 12185, 1757, 3509},
    };
    for (const auto& c : cases) {
        const TimeSeriesDataset ds = flat_dataset(c.name, 2, c.t_total);
        const SplitSpec spec = protocol_split(c.name, c.t_total);
        const auto views = split(ds, spec, 96);
        CHECK(views[0].window_count(96) == c.train_w);
        CHECK(views[1].window_count(96) == c.val_w);
        CHECK(views[2].window_count(96) == c.test_w);
    }
}

TEST_CASE("split: views are chronological and reach back for lookback only") {
    const TimeSeriesDataset ds = flat_dataset("generic", 1, 100);
    const auto views = split(ds, {60, 20, 20}, 8);
    CHECK(views[0].begin == 0);
    CHECK(views[0].end == 60);
    CHECK(views[1].begin == 52);
    CHECK(views[1].end == 80);
    CHECK(views[2].begin == 72);
    CHECK(views[2].end == 100);
    CHECK_THROWS_AS(split(ds, {80, 20, 20}, 8), ContractError);
}

TEST_CASE("make_samples: window counts match the enumeration oracle") {
    const TimeSeriesDataset long_ds = flat_dataset("x", 1, 200);
    const SeriesView full{&long_ds, 0, 200};
    CHECK(make_samples(full, 96, 96, 96).size() == 9);  // 200 - 96 - 96 + 1

    const TimeSeriesDataset short_ds = flat_dataset("y", 1, 191);
    const SeriesView sv{&short_ds, 0, 191};
    CHECK(make_samples(sv, 96, 96, 96).size() == 0);

    // Brute-force enumeration on a 10-step series, L=2, H=1.
    const TimeSeriesDataset tiny = flat_dataset("z", 1, 10);
    const SeriesView tv{&tiny, 0, 10};
    int64_t count = 0;
    for (int64_t t = 0; t + 2 + 1 <= 10; ++t) ++count;
    CHECK(make_samples(tv, 2, 2, 1).size() == count);
    CHECK(count == 8);
}

TEST_CASE("make_samples: content matches the raw series, no leakage") {
    TimeSeriesDataset ds = flat_dataset("content", 2, 30);
    for (int64_t c = 0; c < 2; ++c)
        for (int64_t t = 0; t < 30; ++t)
            ds.values.at(c, t) = static_cast<double>(100 * c + t);
    const SeriesView view{&ds, 0, 30};
    const SampleSet samples = make_samples(view, 8, 4, 3);
    CHECK(samples.size() == 30 - 8 - 3 + 1);
    for (int64_t i = 0; i < samples.size(); ++i) {
        const ForecastSample s = samples.get(i);
        CHECK(s.window_start == i);
        // Target rows equal raw columns t+L .. t+L+H-1, exactly.
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t h = 0; h < 3; ++h)
                CHECK(s.target(c, h) == static_cast<double>(100 * c + i + 8 + h));
        // Largest time index in endogenous/exogenous content < window_start+L.
        for (int64_t c = 0; c < 2; ++c) {
            for (int64_t t = 0; t < 8; ++t)
                CHECK(s.endogenous(c, t) < static_cast<double>(100 * c + i + 8));
            for (int64_t t = 0; t < 4; ++t)
                CHECK(s.exogenous(c, t) == static_cast<double>(100 * c + i + 4 + t));
        }
    }
}

TEST_CASE("instance_normalize: hand values and round trip") {
    const Tensor x({1, 3}, {1, 2, 3});
    const auto [norm, st] = instance_normalize(x);
    CHECK(st.mean[0] == doctest::Approx(2.0));
    CHECK(st.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(max_abs_diff(denormalize(norm, st), x) < 1e-9);

    const Tensor constant = Tensor::full({1, 5}, 7.0);
    const auto [cn, cst] = instance_normalize(constant);
    for (double v : cn.values()) CHECK(v == 0.0);
    CHECK(max_abs_diff(denormalize(cn, cst), constant) < 1e-12);
}

TEST_CASE("instance_normalize: random 7x96 is standardized per channel") {
    CounterRng rng(51);
    const Tensor x = random_tensor({7, 96}, rng, -4.0, 4.0);
    const auto [norm, st] = instance_normalize(x);
    for (int64_t c = 0; c < 7; ++c) {
        double m = 0.0, var = 0.0;
        for (int64_t t = 0; t < 96; ++t) m += norm(c, t);
        m /= 96.0;
        for (int64_t t = 0; t < 96; ++t) var += (norm(c, t) - m) * (norm(c, t) - m);
        var /= 96.0;
        CHECK(std::abs(m) < 1e-9);
        CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(max_abs_diff(denormalize(norm, st), x) < 1e-9);
}

TEST_CASE("standardize: training statistics, applied to the whole series") {
    TimeSeriesDataset ds = flat_dataset("std", 2, 50);
    CounterRng rng(52);
    for (int64_t c = 0; c < 2; ++c)
        for (int64_t t = 0; t < 50; ++t) ds.values.at(c, t) = rng.next_uniform(0.0, 10.0);
    const Tensor before = ds.values.detached_copy();
    const StandardizeStats st = standardize(ds, 30);
    for (int64_t c = 0; c < 2; ++c) {
        double m = 0.0;
        for (int64_t t = 0; t < 30; ++t) m += ds.values(c, t);
        CHECK(std::abs(m / 30.0) < 1e-10);
        // Values outside the training range still use the training stats.
        for (int64_t t = 30; t < 50; ++t)
            CHECK(ds.values(c, t) ==
                  doctest::Approx((before(c, t) - st.mean[static_cast<size_t>(c)]) /
                                  st.std[static_cast<size_t>(c)]));
    }
}
