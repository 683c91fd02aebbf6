#include "twsf/tws.hpp"

#include <fstream>
#include <sstream>

#include "twsf/kernels.hpp"
#include "twsf/spectral.hpp"
#include "twsf/textio.hpp"

namespace twsf {

int64_t select_k(const std::vector<double>& eigenvalues, double threshold) {
    double total = 0.0;
    for (double l : eigenvalues) total += l;
    if (total <= 0.0) return 1;
    double cum = 0.0;
    for (size_t j = 0; j < eigenvalues.size(); ++j) {
        cum += eigenvalues[j];
        if (cum / total >= threshold) return static_cast<int64_t>(j + 1);
    }
    return static_cast<int64_t>(eigenvalues.size());
}

TwsWhitener TwsWhitener::fit(const Tensor& train_series, double threshold,
                             bool centered_projection) {
    if (train_series.ndim() != 2)
        throw ShapeError("tws fit: rank-2 series expected, got " + shape_str(train_series.shape()));
    if (threshold <= 0.0 || threshold > 1.0)
        throw ContractError("tws fit: threshold must be in (0, 1]");
    const int64_t n = train_series.rows();
    const int64_t len = train_series.cols();
    if (len < 2) throw ContractError("tws fit: need at least 2 time steps");

    TwsWhitener w;
    w.n_ = n;
    w.threshold_ = threshold;
    w.centered_ = centered_projection;

    w.mean_.resize(static_cast<size_t>(n));
    Tensor centered = Tensor::zeros({n, len});
    for (int64_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (int64_t t = 0; t < len; ++t) m += train_series(i, t);
        m /= static_cast<double>(len);
        w.mean_[static_cast<size_t>(i)] = m;
        for (int64_t t = 0; t < len; ++t) centered.at(i, t) = train_series(i, t) - m;
    }

    const EigenDecomposition dec = eigh(covariance(centered));
    w.eigenvalues_ = dec.eigenvalues;

    double total = 0.0;
    for (double l : w.eigenvalues_) total += l;
    if (total <= 0.0) {
        // Zero-variance series: defined degenerate fit rather than an error.
        w.degenerate_ = true;
        w.k_ = 1;
        w.basis_ = Tensor::zeros({n, 1});
        w.basis_.at(0, 0) = 1.0;
        return w;
    }

    w.k_ = select_k(w.eigenvalues_, threshold);
    w.basis_ = Tensor::zeros({n, w.k_});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < w.k_; ++j) w.basis_.at(i, j) = dec.eigenvectors(i, j);
    return w;
}

Tensor TwsWhitener::whiten_window(const Tensor& window) const {
    if (window.ndim() != 2 || window.rows() != n_)
        throw ShapeError("whiten_window: expected " + std::to_string(n_) + " feature rows, got " +
                         shape_str(window.shape()));
    const int64_t len = window.cols();

    std::vector<double> work(window.values().begin(), window.values().end());
    if (centered_) {
        for (int64_t i = 0; i < n_; ++i)
            for (int64_t t = 0; t < len; ++t)
                work[static_cast<size_t>(i * len + t)] -= mean_[static_cast<size_t>(i)];
    }

    // components[k x L] = V^T * work, recon[N x L] = V * components
    std::vector<double> vt(static_cast<size_t>(k_ * n_));
    kernels::transpose(basis_.values().data(), vt.data(), n_, k_);
    std::vector<double> components(static_cast<size_t>(k_ * len));
    kernels::matmul(vt.data(), work.data(), components.data(), k_, n_, len);
    Tensor out = Tensor::zeros({n_, len});
    kernels::matmul(basis_.values().data(), components.data(), out.mutable_values().data(),
                    n_, k_, len);

    for (int64_t i = 0; i < n_; ++i)
        for (int64_t t = 0; t < len; ++t) out.at(i, t) += mean_[static_cast<size_t>(i)];
    return out;
}

double TwsWhitener::captured_variance_ratio() const {
    double total = 0.0;
    for (double l : eigenvalues_) total += l;
    if (degenerate_ || total <= 0.0) return 1.0;
    double kept = 0.0;
    for (int64_t j = 0; j < k_; ++j) kept += eigenvalues_[static_cast<size_t>(j)];
    return kept / total;
}

// --- persistence ------------------------------------------------------

namespace {
constexpr const char* kWhitenerMagic = "twsf.whitener.v1";
}

void TwsWhitener::save(std::ostream& os) const {
    os << kWhitenerMagic << "\n";
    os << "n " << n_ << "\n";
    os << "k " << k_ << "\n";
    os << "threshold " << fmt_g17(threshold_) << "\n";
    os << "centered " << (centered_ ? 1 : 0) << "\n";
    os << "degenerate " << (degenerate_ ? 1 : 0) << "\n";
    os << "mean";
    for (double v : mean_) os << " " << fmt_g17(v);
    os << "\n";
    os << "eigenvalues";
    for (double v : eigenvalues_) os << " " << fmt_g17(v);
    os << "\n";
    os << "basis\n";
    for (int64_t i = 0; i < n_; ++i) {
        for (int64_t j = 0; j < k_; ++j) os << (j ? " " : "") << fmt_g17(basis_(i, j));
        os << "\n";
    }
}

namespace {

std::string expect_line(std::istream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError(std::string("whitener: missing ") + what);
    return line;
}

std::vector<double> parse_vector(const std::string& line, const std::string& key) {
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head != key) throw ParseError("whitener: expected '" + key + "' line, got '" + head + "'");
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) out.push_back(parse_double(tok, key.c_str()));
    return out;
}

int64_t parse_keyed_int(const std::string& line, const std::string& key) {
    std::istringstream ss(line);
    std::string head, val;
    ss >> head >> val;
    if (head != key) throw ParseError("whitener: expected '" + key + "' line, got '" + head + "'");
    return parse_int(val, key.c_str());
}

}  // namespace

TwsWhitener TwsWhitener::load(std::istream& is) {
    if (expect_line(is, "header") != kWhitenerMagic)
        throw ParseError("whitener: bad format header");
    TwsWhitener w;
    w.n_ = parse_keyed_int(expect_line(is, "n"), "n");
    w.k_ = parse_keyed_int(expect_line(is, "k"), "k");
    {
        std::istringstream ss(expect_line(is, "threshold"));
        std::string head, val;
        ss >> head >> val;
        if (head != "threshold") throw ParseError("whitener: expected threshold line");
        w.threshold_ = parse_double(val, "threshold");
    }
    w.centered_ = parse_keyed_int(expect_line(is, "centered"), "centered") != 0;
    w.degenerate_ = parse_keyed_int(expect_line(is, "degenerate"), "degenerate") != 0;
    w.mean_ = parse_vector(expect_line(is, "mean"), "mean");
    w.eigenvalues_ = parse_vector(expect_line(is, "eigenvalues"), "eigenvalues");
    if (static_cast<int64_t>(w.mean_.size()) != w.n_ ||
        static_cast<int64_t>(w.eigenvalues_.size()) != w.n_)
        throw ParseError("whitener: vector lengths disagree with n");
    if (expect_line(is, "basis") != "basis") throw ParseError("whitener: expected basis section");
    w.basis_ = Tensor::zeros({w.n_, w.k_});
    for (int64_t i = 0; i < w.n_; ++i) {
        std::istringstream ss(expect_line(is, "basis row"));
        for (int64_t j = 0; j < w.k_; ++j) {
            std::string tok;
            if (!(ss >> tok)) throw ParseError("whitener: short basis row " + std::to_string(i));
            w.basis_.at(i, j) = parse_double(tok, "basis");
        }
    }
    return w;
}

void TwsWhitener::save_file(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ParseError("whitener: cannot open for write: " + path);
    save(os);
}

TwsWhitener TwsWhitener::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("whitener: cannot open: " + path);
    return load(is);
}

}  // namespace twsf
