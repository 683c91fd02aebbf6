#pragma once

#include <iosfwd>
#include <string>

#include "twsf/tensor.hpp"

namespace twsf {

// Temporal window smoothing: global PCA statistics fitted once on the full
// training series, then applied per window as a project-and-reconstruct
// onto the top-k principal directions (k chosen by cumulative explained
// variance). A fitted whitener is immutable; whiten_window is safe to call
// concurrently.
class TwsWhitener {
public:
    // train_series is [N x L_seq] (one row per feature), threshold in (0, 1].
    // All-zero-variance input produces a degenerate fit: k = 1, basis = e1.
    static TwsWhitener fit(const Tensor& train_series, double threshold,
                           bool centered_projection = true);

    // Projects window [N x L_ex] onto span(basis) and reconstructs, keeping
    // the shape. Centered mode computes mean + V V^T (window - mean); the
    // literal mode keeps V V^T window + mean.
    Tensor whiten_window(const Tensor& window) const;

    // Sum of the selected eigenvalues over the total; 1.0 for a degenerate
    // (zero-variance) fit.
    double captured_variance_ratio() const;

    int64_t feature_count() const { return n_; }
    int64_t k() const { return k_; }
    double threshold() const { return threshold_; }
    bool centered_projection() const { return centered_; }
    bool degenerate() const { return degenerate_; }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }
    const Tensor& basis() const { return basis_; }  // N x k

    void save(std::ostream& os) const;
    static TwsWhitener load(std::istream& is);
    void save_file(const std::string& path) const;
    static TwsWhitener load_file(const std::string& path);

private:
    TwsWhitener() = default;
    int64_t n_ = 0;
    int64_t k_ = 0;
    double threshold_ = 0.9;
    bool centered_ = true;
    bool degenerate_ = false;
    std::vector<double> mean_;         // length N
    std::vector<double> eigenvalues_;  // length N, descending
    Tensor basis_;                     // N x k
};

// Smallest j with cumulative ratio >= threshold (inclusive at the boundary);
// eigenvalues must be descending. Returns 1 when total variance is zero.
int64_t select_k(const std::vector<double>& eigenvalues, double threshold);

}  // namespace twsf
